//! Fixed-step hybrid engine.
//!
//! Between events every agent's control is constant, so the state moves on
//! straight lines and `x(t + h) = x(t) + h·q̂` is exact. The auxiliary
//! variables are advanced with classical RK4 along the segment. Triggers are
//! checked at segment ends against the pre-broadcast snapshot and all
//! broadcasts of one boundary apply together. Every agent broadcasts at
//! `t = 0`.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::graph::{self, GaugeMatrix};
use crate::scenario::Scenario;
use crate::trigger::{self, AgentTrigger, Mode, TriggerParams};

/// `‖x‖∞` above which a run is aborted.
pub const DIVERGENCE_BOUND: f64 = 1e9;

/// Per-step agent loops only fan out above this many agents.
pub const PARALLEL_MIN_AGENTS: usize = 32;

/// Consecutive-step firing run length that triggers a warning.
pub const DEFAULT_FIRE_WINDOW: usize = 10;

#[derive(Clone, Debug, Default)]
pub struct TrajectoryRecord {
    pub n: usize,
    pub d: usize,
    /// Grid times, `times[0] = 0`, `times.last() = T` for a completed run.
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    /// `x̂` after the broadcasts of each grid time.
    pub broadcasts: Vec<DVector<f64>>,
    pub chi: Vec<DVector<f64>>,
    /// `q̂` applied on the segment starting at each grid time.
    pub controls: Vec<DVector<f64>>,
    /// Per-agent event times, including the initial broadcast.
    pub events: Vec<Vec<f64>>,
    /// Grid indices matching `events`.
    pub event_steps: Vec<Vec<usize>>,
    /// Leaderless: `x̃`. Leader-follower: `D*(1⊗u₀)`. `None` when the gauge
    /// is unavailable (forced run on an unbalanced graph).
    pub target: Option<DVector<f64>>,
    pub warnings: Vec<String>,
    pub completed: bool,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Number of integration steps taken.
    pub fn steps(&self) -> usize {
        self.times.len().saturating_sub(1)
    }

    pub fn horizon(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    pub fn final_state(&self) -> &DVector<f64> {
        self.states.last().expect("record has the initial sample")
    }

    pub fn event_counts(&self) -> Vec<usize> {
        self.events.iter().map(Vec::len).collect()
    }

    /// `eᵢ = x̂ᵢ − xᵢ` at grid point `k`.
    pub fn measurement_error(&self, k: usize, i: usize) -> DVector<f64> {
        let d = self.d;
        self.broadcasts[k].rows(i * d, d) - self.states[k].rows(i * d, d)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Divergence {
    pub time: f64,
    pub reason: String,
}

/// Live simulation state for one scenario.
#[derive(Clone, Debug)]
pub struct Engine<'a> {
    scenario: &'a Scenario,
    triggers: Vec<AgentTrigger>,
    gauge: Option<GaugeMatrix>,
    target: Option<DVector<f64>>,
    warnings: Vec<String>,
    execution: Execution,
    steps: usize,
    k: usize,
    t: f64,
    x: DVector<f64>,
    xhat: DVector<f64>,
    chi: DVector<f64>,
    q: DVector<f64>,
    signal: Vec<f64>,
}

fn resolve_triggers(s: &Scenario) -> Vec<AgentTrigger> {
    let g = &s.graph;
    (0..g.n())
        .map(|i| match &s.mode {
            Mode::Leaderless => AgentTrigger::Leaderless {
                mu_bar: trigger::mu_bar(g, i).unwrap_or(0.0),
                degree: g.degree(i),
            },
            Mode::LeaderFollower { coupling, .. } => AgentTrigger::LeaderFollower {
                gamma: trigger::gamma(g, coupling, i),
            },
        })
        .collect()
}

fn target_for(s: &Scenario, gauge: &GaugeMatrix) -> DVector<f64> {
    match &s.mode {
        Mode::Leaderless => graph::gauge_limit(gauge, &s.x0, s.d()),
        Mode::LeaderFollower { u0, .. } => gauge.spread(u0),
    }
}

/// One RK4 step of `χ̇ = rate(‖e₀ − τq‖², χ)` over `[0, h]`.
fn advance_chi(
    trig: &AgentTrigger,
    p: &TriggerParams,
    chi: f64,
    e0: &DVector<f64>,
    q: &DVector<f64>,
    signal: f64,
    h: f64,
) -> f64 {
    let f = |tau: f64, c: f64| {
        let e_sq = (e0 - q * tau).norm_squared();
        trig.chi_rate(p, e_sq, signal, c)
    };
    let k1 = f(0.0, chi);
    let k2 = f(0.5 * h, chi + 0.5 * h * k1);
    let k3 = f(0.5 * h, chi + 0.5 * h * k2);
    let k4 = f(h, chi + h * k3);
    chi + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

impl<'a> Engine<'a> {
    /// Checks the scenario's standing assumptions first.
    pub fn new(scenario: &'a Scenario) -> Result<Self> {
        let gauge = scenario.check_assumptions()?;
        Ok(Self::build(scenario, Some(gauge), Vec::new()))
    }

    /// Runs regardless of the assumptions. The target is still provided when
    /// a gauge can be derived.
    pub fn new_unchecked(scenario: &'a Scenario) -> Self {
        match scenario.check_assumptions() {
            Ok(g) => Self::build(scenario, Some(g), Vec::new()),
            Err(e) => {
                let gauge = match &scenario.mode {
                    Mode::Leaderless => graph::detect_structural_balance(&scenario.graph)
                        .bipartition()
                        .map(graph::gauge_matrix),
                    Mode::LeaderFollower { coupling, .. } => {
                        graph::leader_follower_gauge(&scenario.graph, coupling).ok()
                    }
                };
                Self::build(scenario, gauge, vec![format!("forced run: {e}")])
            }
        }
    }

    fn build(scenario: &'a Scenario, gauge: Option<GaugeMatrix>, mut warnings: Vec<String>) -> Self {
        let n = scenario.n();
        let mut all = scenario.graph.warnings().to_vec();
        all.append(&mut warnings);
        let target = gauge.as_ref().map(|g| target_for(scenario, g));
        let mut e = Engine {
            scenario,
            triggers: resolve_triggers(scenario),
            gauge,
            target,
            warnings: all,
            execution: Execution::Sequential,
            steps: scenario.steps(),
            k: 0,
            t: 0.0,
            x: scenario.x0.clone(),
            xhat: scenario.x0.clone(),
            chi: DVector::from_iterator(n, scenario.params.iter().map(|p| p.chi0)),
            q: DVector::zeros(scenario.x0.len()),
            signal: vec![0.0; n],
        };
        e.refresh_controls();
        e
    }

    /// Agent loops fan out over the pool when parallel and the network has at
    /// least [`PARALLEL_MIN_AGENTS`] agents. Results are identical either way.
    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    fn agent_exec(&self) -> Execution {
        if self.scenario.n() >= PARALLEL_MIN_AGENTS {
            self.execution
        } else {
            Execution::Sequential
        }
    }

    pub fn scenario(&self) -> &Scenario {
        self.scenario
    }

    pub fn gauge(&self) -> Option<&GaugeMatrix> {
        self.gauge.as_ref()
    }

    pub fn target(&self) -> Option<&DVector<f64>> {
        self.target.as_ref()
    }

    pub fn triggers(&self) -> &[AgentTrigger] {
        &self.triggers
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn step_index(&self) -> usize {
        self.k
    }

    pub fn total_steps(&self) -> usize {
        self.steps
    }

    pub fn is_finished(&self) -> bool {
        self.k >= self.steps
    }

    pub fn state(&self) -> &DVector<f64> {
        &self.x
    }

    pub fn broadcasts(&self) -> &DVector<f64> {
        &self.xhat
    }

    pub fn chi(&self) -> &DVector<f64> {
        &self.chi
    }

    pub fn controls(&self) -> &DVector<f64> {
        &self.q
    }

    fn grid_time(&self, k: usize) -> f64 {
        if k >= self.steps {
            self.scenario.horizon
        } else {
            k as f64 * self.scenario.dt
        }
    }

    fn refresh_controls(&mut self) {
        let s = self.scenario;
        let g = &s.graph;
        let d = s.d();
        let xhat = &self.xhat;
        let per_agent = self.agent_exec().map_range(s.n(), |i| match &s.mode {
            Mode::Leaderless => (
                trigger::control_leaderless(g, i, xhat),
                trigger::weighted_disagreement(g, i, xhat),
            ),
            Mode::LeaderFollower { u0, coupling } => {
                let q = trigger::control_leader_follower(g, coupling, u0, i, xhat);
                let sq = q.norm_squared();
                (q, sq)
            }
        });
        for (i, (q, sig)) in per_agent.into_iter().enumerate() {
            self.q.rows_mut(i * d, d).copy_from(&q);
            self.signal[i] = sig;
        }
    }

    /// Advances one grid step and returns the agents that fired at its end.
    pub fn step(&mut self) -> std::result::Result<Vec<usize>, Divergence> {
        let s = self.scenario;
        let d = s.d();
        let t1 = self.grid_time(self.k + 1);
        let h = t1 - self.t;
        let baseline = s.baseline;
        let (x, xhat, q, chi) = (&self.x, &self.xhat, &self.q, &self.chi);
        let (triggers, signal) = (&self.triggers, &self.signal);
        let results = self.agent_exec().map_range(s.n(), |i| {
            let xi = x.rows(i * d, d).into_owned();
            let qi = q.rows(i * d, d).into_owned();
            let e0 = xhat.rows(i * d, d) - &xi;
            let p = &s.params[i];
            let chi1 = advance_chi(&triggers[i], p, chi[i], &e0, &qi, signal[i], h);
            let x1 = xi + &qi * h;
            let e1 = xhat.rows(i * d, d) - &x1;
            let lhs = triggers[i].lhs(p, e1.norm_squared(), signal[i]);
            (chi1, x1, baseline.fires(lhs, chi1))
        });
        let mut fired = Vec::new();
        for (i, (chi1, x1, f)) in results.into_iter().enumerate() {
            self.chi[i] = chi1;
            self.x.rows_mut(i * d, d).copy_from(&x1);
            if f {
                fired.push(i);
            }
        }
        self.k += 1;
        self.t = t1;

        let worst = self.x.iter().fold(0.0_f64, |m, v| if v.is_nan() { f64::NAN } else { m.max(v.abs()) });
        if !worst.is_finite() || self.chi.iter().any(|c| !c.is_finite()) {
            return Err(Divergence {
                time: t1,
                reason: "non-finite state".into(),
            });
        }
        if worst > DIVERGENCE_BOUND {
            return Err(Divergence {
                time: t1,
                reason: format!("|x|_inf = {worst:e} exceeds {DIVERGENCE_BOUND:e}"),
            });
        }

        for &i in &fired {
            let xi = self.x.rows(i * d, d).into_owned();
            self.xhat.rows_mut(i * d, d).copy_from(&xi);
        }
        if !fired.is_empty() {
            self.refresh_controls();
        }
        Ok(fired)
    }

    fn start_record(&self) -> TrajectoryRecord {
        let n = self.scenario.n();
        let cap = self.steps + 1;
        let mut r = TrajectoryRecord {
            n,
            d: self.scenario.d(),
            times: Vec::with_capacity(cap),
            states: Vec::with_capacity(cap),
            broadcasts: Vec::with_capacity(cap),
            chi: Vec::with_capacity(cap),
            controls: Vec::with_capacity(cap),
            events: vec![vec![0.0]; n],
            event_steps: vec![vec![0]; n],
            target: self.target.clone(),
            warnings: self.warnings.clone(),
            completed: false,
        };
        self.push_sample(&mut r);
        r
    }

    fn push_sample(&self, r: &mut TrajectoryRecord) {
        r.times.push(self.t);
        r.states.push(self.x.clone());
        r.broadcasts.push(self.xhat.clone());
        r.chi.push(self.chi.clone());
        r.controls.push(self.q.clone());
    }

    /// Runs to the horizon from a fresh engine.
    pub fn run(mut self) -> Result<TrajectoryRecord> {
        debug_assert_eq!(self.k, 0, "run starts from the initial state");
        let mut rec = self.start_record();
        while !self.is_finished() {
            match self.step() {
                Ok(fired) => {
                    for i in fired {
                        rec.events[i].push(self.t);
                        rec.event_steps[i].push(self.k);
                    }
                    self.push_sample(&mut rec);
                }
                Err(div) => {
                    self.push_sample(&mut rec);
                    rec.warnings.push(format!("diverged at t = {}: {}", div.time, div.reason));
                    return Err(Error::Diverged {
                        time: div.time,
                        reason: div.reason,
                        record: Box::new(rec),
                    });
                }
            }
        }
        rec.completed = true;
        let dwell = min_inter_event(&rec, DEFAULT_FIRE_WINDOW);
        rec.warnings.extend(dwell.warnings);
        Ok(rec)
    }
}

/// Checked run of a single scenario.
pub fn run(scenario: &Scenario) -> Result<TrajectoryRecord> {
    Engine::new(scenario)?.run()
}

/// Independent runs, fanned out across scenarios. Each run is sequential.
pub fn run_batch(scenarios: &[Scenario], execution: Execution) -> Vec<Result<TrajectoryRecord>> {
    execution.map(scenarios, run)
}

/// Minimum over the grid of `χᵢ(t) − χᵢ(0)·e^{−(βᵢ+δᵢ/θᵢ)t}`, per agent.
pub fn chi_floor_check(record: &TrajectoryRecord, params: &[TriggerParams]) -> Vec<f64> {
    params
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let rate = p.floor_rate();
            record
                .times
                .iter()
                .zip(&record.chi)
                .map(|(&t, c)| c[i] - p.chi0 * (-rate * t).exp())
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct DwellReport {
    /// Smallest gap between consecutive events; the horizon for agents with
    /// fewer than two events.
    pub min_dwell: Vec<f64>,
    /// Longest run of firing on consecutive grid steps.
    pub max_consecutive: Vec<usize>,
    pub warnings: Vec<String>,
}

pub fn min_inter_event(record: &TrajectoryRecord, window: usize) -> DwellReport {
    let horizon = record.horizon();
    let mut warnings = Vec::new();
    let min_dwell = record
        .events
        .iter()
        .map(|ev| {
            ev.windows(2)
                .map(|w| w[1] - w[0])
                .reduce(f64::min)
                .unwrap_or(horizon)
        })
        .collect();
    let max_consecutive: Vec<usize> = record
        .event_steps
        .iter()
        .map(|steps| {
            let mut best = usize::from(!steps.is_empty());
            let mut run = best;
            for w in steps.windows(2) {
                run = if w[1] == w[0] + 1 { run + 1 } else { 1 };
                best = best.max(run);
            }
            best
        })
        .collect();
    for (i, &c) in max_consecutive.iter().enumerate() {
        if c > window {
            warnings.push(format!(
                "agent {} fired on {c} consecutive steps (window {window})",
                i + 1
            ));
        }
    }
    DwellReport {
        min_dwell,
        max_consecutive,
        warnings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{InputCoupling, InputSpec, MatrixWeightedGraph};
    use crate::linalg::SymMatrix;
    use crate::scenario::X0Spec;
    use crate::trigger::Baseline;

    fn params(delta: f64, theta: f64) -> TriggerParams {
        TriggerParams {
            sigma: 0.9,
            theta,
            beta: 1.0,
            delta,
            chi0: 0.5,
        }
    }

    fn two_node(x0: Vec<f64>, horizon: f64) -> Scenario {
        let g = MatrixWeightedGraph::from_edges(2, 1, vec![(0, 1, SymMatrix::identity(1))]).unwrap();
        Scenario::new(
            g,
            Mode::Leaderless,
            vec![params(1.0, 0.5); 2],
            X0Spec::Explicit(x0),
            1e-3,
            horizon,
            None,
            Baseline::Dynamic,
        )
        .unwrap()
    }

    #[test]
    fn equilibrium_is_fixed() {
        let s = two_node(vec![0.3, 0.3], 0.5);
        let rec = run(&s).unwrap();
        assert!(rec.states.iter().all(|x| x.as_slice() == [0.3, 0.3]));
        assert_eq!(rec.event_counts(), vec![1, 1]);
        let c = &rec.chi;
        assert!(c.windows(2).all(|w| w[1][0] < w[0][0]));
        assert_eq!(rec.steps(), 500);
        assert_eq!(rec.horizon(), 0.5);
    }

    #[test]
    fn first_segment_matches_closed_form() {
        let s = two_node(vec![1.0, -0.5], 1.0);
        let rec = run(&s).unwrap();
        let first = rec.events.iter().map(|e| e[1]).fold(f64::INFINITY, f64::min);
        let k_end = (first / 1e-3).round() as usize;
        for k in 0..=k_end {
            let t = rec.times[k];
            assert!((rec.states[k][0] - (1.0 - 1.5 * t)).abs() < 1e-12);
            assert!((rec.states[k][1] - (-0.5 + 1.5 * t)).abs() < 1e-12);
        }
    }

    #[test]
    fn errors_reset_at_events() {
        let s = two_node(vec![1.0, -0.5], 2.0);
        let rec = run(&s).unwrap();
        for i in 0..2 {
            for &k in &rec.event_steps[i] {
                assert_eq!(rec.measurement_error(k, i).norm(), 0.0);
            }
        }
        for k in 1..rec.len() {
            for i in 0..2 {
                if !rec.event_steps[i].contains(&k) {
                    assert_eq!(rec.broadcasts[k][i], rec.broadcasts[k - 1][i]);
                }
            }
        }
    }

    #[test]
    fn single_agent_leader_follower_fixed_point() {
        let g = MatrixWeightedGraph::new(1, 2, vec![], 1e-9).unwrap();
        let w = SymMatrix::from_row_major(2, &[2.0, 0.1, 0.1, 1.0]).unwrap();
        let b = InputCoupling::new(
            &g,
            vec![InputSpec {
                agent: 0,
                input: 0,
                weight: w,
                class: None,
            }],
        )
        .unwrap();
        let u0 = DVector::from_vec(vec![0.2, -0.4]);
        let s = Scenario::new(
            g,
            Mode::LeaderFollower { u0: u0.clone(), coupling: b },
            vec![params(1.0, 1.0)],
            X0Spec::Explicit(vec![0.2, -0.4]),
            1e-3,
            0.2,
            None,
            Baseline::Dynamic,
        )
        .unwrap();
        let rec = run(&s).unwrap();
        assert_eq!(rec.final_state(), &u0);
        assert_eq!(rec.target.as_ref().unwrap(), &u0);
    }

    #[test]
    fn zero_edge_agent_is_constant() {
        let g = MatrixWeightedGraph::new(1, 3, vec![], 1e-9).unwrap();
        let s = Scenario::new(
            g,
            Mode::Leaderless,
            vec![params(1.0, 0.5)],
            X0Spec::Uniform,
            1e-2,
            1.0,
            Some(4),
            Baseline::Dynamic,
        )
        .unwrap();
        let rec = run(&s).unwrap();
        assert!(rec.states.iter().all(|x| x == &s.x0));
        assert_eq!(rec.event_counts(), vec![1]);
    }

    #[test]
    fn large_dt_diverges() {
        let w = SymMatrix::identity(1).scaled(100.0);
        let g = MatrixWeightedGraph::from_edges(2, 1, vec![(0, 1, w)]).unwrap();
        let s = Scenario::new(
            g,
            Mode::Leaderless,
            vec![params(1.0, 0.5); 2],
            X0Spec::Explicit(vec![1.0, -1.0]),
            0.1,
            100.0,
            None,
            Baseline::Dynamic,
        )
        .unwrap();
        match run(&s) {
            Err(Error::Diverged { record, .. }) => {
                assert!(!record.completed);
                assert!(record.len() > 1);
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn dwell_report() {
        let rec = TrajectoryRecord {
            times: vec![0.0, 1.0],
            events: vec![vec![0.0, 0.3, 0.5], vec![0.0]],
            event_steps: vec![(0..12).collect(), vec![0]],
            ..Default::default()
        };
        let r = min_inter_event(&rec, 10);
        assert!((r.min_dwell[0] - 0.2).abs() < 1e-15);
        assert_eq!(r.min_dwell[1], 1.0);
        assert_eq!(r.max_consecutive, vec![12, 1]);
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn chi_floor_arithmetic() {
        let p = params(1.0, 0.5);
        let rec = TrajectoryRecord {
            times: vec![1.0],
            chi: vec![DVector::from_vec(vec![0.5 * (-3.0f64).exp()])],
            ..Default::default()
        };
        assert!(chi_floor_check(&rec, &[p])[0].abs() < 1e-15);
    }
}
