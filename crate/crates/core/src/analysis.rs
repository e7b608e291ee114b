//! Post-run metrics.

use nalgebra::DVector;
use serde::Serialize;

use crate::graph::{self, GaugeMatrix};
use crate::linalg::SymMatrix;
use crate::scenario::Scenario;
use crate::sim::{self, TrajectoryRecord, DEFAULT_FIRE_WINDOW};
use crate::trigger::Mode;

/// Samples with `V ≤ FIT_FLOOR·V(0)` are left out of the decay fit.
pub const FIT_FLOOR: f64 = 1e-10;

/// `‖x(t) − x̃‖` per grid point.
pub fn bipartite_error(record: &TrajectoryRecord, xtilde: &DVector<f64>) -> Vec<f64> {
    record.states.iter().map(|x| (x - xtilde).norm()).collect()
}

fn chi_sum(record: &TrajectoryRecord, k: usize) -> f64 {
    record.chi[k].sum()
}

/// `½‖x − x̃‖² + Σχ`.
pub fn lyapunov_leaderless(record: &TrajectoryRecord, xtilde: &DVector<f64>) -> Vec<f64> {
    (0..record.len())
        .map(|k| 0.5 * (&record.states[k] - xtilde).norm_squared() + chi_sum(record, k))
        .collect()
}

/// `ξᵀ L_B ξ + Σχ` with `ξ = x − D*(1⊗u₀)`.
pub fn lyapunov_lf(
    record: &TrajectoryRecord,
    gauge: &GaugeMatrix,
    u0: &DVector<f64>,
    l_b: &SymMatrix,
) -> Vec<f64> {
    let target = gauge.spread(u0);
    (0..record.len())
        .map(|k| l_b.quad_form(&(&record.states[k] - &target)) + chi_sum(record, k))
        .collect()
}

/// Largest one-step increase of a series (negative when strictly
/// decreasing).
pub fn max_increase(v: &[f64]) -> f64 {
    v.windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Least-squares rate `r` in `V ≈ V₀ e^{−r t}`, fitted on the samples with
/// `V > FIT_FLOOR·V(0)`. `None` with fewer than two usable samples.
pub fn fit_decay_rate(times: &[f64], v: &[f64]) -> Option<f64> {
    let v0 = *v.first()?;
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(v)
        .filter(|&(_, &y)| y > FIT_FLOOR * v0 && y > 0.0)
        .map(|(&t, &y)| (t, y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    (sxx > 0.0).then(|| -sxy / sxx)
}

#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub mode: String,
    pub n: usize,
    pub d: usize,
    pub dt: f64,
    pub horizon: f64,
    pub steps: usize,
    pub seed: Option<u64>,
    pub completed: bool,
    /// Leaderless: `‖x(T) − x̃‖`. Leader-follower: `‖ξ(T)‖`.
    pub final_error: Option<f64>,
    /// `final_error / max(1, ‖target‖)`.
    pub final_relative_error: Option<f64>,
    /// `maxᵢₖ ||xᵢₖ(T)| − |targetᵢₖ||`.
    pub final_magnitude_error: Option<f64>,
    pub target: Option<Vec<f64>>,
    pub fitted_decay_rate: Option<f64>,
    pub lyapunov_initial: Option<f64>,
    pub lyapunov_final: Option<f64>,
    pub max_lyapunov_increase: Option<f64>,
    pub event_counts: Vec<usize>,
    pub min_dwell: Vec<f64>,
    pub max_consecutive_fires: Vec<usize>,
    pub chi_floor_margins: Vec<f64>,
    pub warnings: Vec<String>,
    /// Kept out of the serialized form so summaries stay byte-stable.
    #[serde(skip)]
    pub wall_clock_seconds: Option<f64>,
}

/// Lyapunov series for a record, if its target is known.
pub fn lyapunov(scenario: &Scenario, record: &TrajectoryRecord) -> Option<Vec<f64>> {
    let target = record.target.as_ref()?;
    Some(match &scenario.mode {
        Mode::Leaderless => lyapunov_leaderless(record, target),
        Mode::LeaderFollower { coupling, .. } => {
            let l_b = graph::build_grounded_laplacian(&scenario.graph, coupling);
            (0..record.len())
                .map(|k| l_b.quad_form(&(&record.states[k] - target)) + chi_sum(record, k))
                .collect()
        }
    })
}

pub fn event_stats(scenario: &Scenario, record: &TrajectoryRecord) -> RunSummary {
    let dwell = sim::min_inter_event(record, DEFAULT_FIRE_WINDOW);
    let v = lyapunov(scenario, record);
    let target = record.target.as_ref();
    let final_error = target.map(|t| (record.final_state() - t).norm());
    let final_relative_error = target
        .zip(final_error)
        .map(|(t, e)| e / t.norm().max(1.0));
    let final_magnitude_error = target.map(|t| {
        record
            .final_state()
            .iter()
            .zip(t.iter())
            .map(|(x, y)| (x.abs() - y.abs()).abs())
            .fold(0.0, f64::max)
    });
    RunSummary {
        mode: scenario.mode.name().to_string(),
        n: scenario.n(),
        d: scenario.d(),
        dt: scenario.dt,
        horizon: scenario.horizon,
        steps: record.steps(),
        seed: scenario.seed,
        completed: record.completed,
        final_error,
        final_relative_error,
        final_magnitude_error,
        target: target.map(|t| t.iter().copied().collect()),
        fitted_decay_rate: v.as_ref().and_then(|v| fit_decay_rate(&record.times, v)),
        lyapunov_initial: v.as_ref().and_then(|v| v.first().copied()),
        lyapunov_final: v.as_ref().and_then(|v| v.last().copied()),
        max_lyapunov_increase: v.as_ref().map(|v| max_increase(v)),
        event_counts: record.event_counts(),
        min_dwell: dwell.min_dwell,
        max_consecutive_fires: dwell.max_consecutive,
        chi_floor_margins: sim::chi_floor_check(record, &scenario.params),
        warnings: record.warnings.clone(),
        wall_clock_seconds: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::MatrixWeightedGraph;
    use crate::scenario::X0Spec;
    use crate::trigger::{Baseline, TriggerParams};

    #[test]
    fn isolated_agent_decay_rate_is_beta() {
        let g = MatrixWeightedGraph::new(1, 2, vec![], 1e-9).unwrap();
        let p = TriggerParams {
            sigma: 0.5,
            theta: 2.0,
            beta: 0.7,
            delta: 0.0,
            chi0: 1.0,
        };
        let s = Scenario::new(
            g,
            Mode::Leaderless,
            vec![p],
            X0Spec::Uniform,
            1e-3,
            5.0,
            Some(1),
            Baseline::Dynamic,
        )
        .unwrap();
        let rec = sim::run(&s).unwrap();
        let sum = event_stats(&s, &rec);
        let rate = sum.fitted_decay_rate.unwrap();
        assert!((rate - 0.7).abs() < 0.007, "{rate}");
        assert_eq!(sum.event_counts, vec![1]);
        assert_eq!(sum.final_error, Some(0.0));
        assert!(sum.max_lyapunov_increase.unwrap() < 0.0);
        let v = lyapunov(&s, &rec).unwrap();
        assert_eq!(v[0], 1.0);
    }

    #[test]
    fn fit_on_exact_exponential() {
        let t: Vec<f64> = (0..100).map(|k| k as f64 * 0.1).collect();
        let v: Vec<f64> = t.iter().map(|t| 3.0 * (-2.5 * t).exp()).collect();
        assert!((fit_decay_rate(&t, &v).unwrap() - 2.5).abs() < 1e-12);
        assert_eq!(fit_decay_rate(&t[..1], &v[..1]), None);
    }

    #[test]
    fn zero_error_at_target() {
        let x = DVector::from_vec(vec![1.0, -1.0]);
        let rec = TrajectoryRecord {
            times: vec![0.0, 1.0],
            states: vec![x.clone(), x.clone()],
            chi: vec![DVector::zeros(2), DVector::zeros(2)],
            ..Default::default()
        };
        assert_eq!(bipartite_error(&rec, &x), vec![0.0, 0.0]);
        assert_eq!(lyapunov_leaderless(&rec, &x), vec![0.0, 0.0]);
        let gauge = GaugeMatrix { signs: vec![1, -1] };
        let u0 = DVector::from_vec(vec![1.0]);
        let l = SymMatrix::identity(2);
        assert_eq!(lyapunov_lf(&rec, &gauge, &u0, &l), vec![0.0, 0.0]);
    }
}
