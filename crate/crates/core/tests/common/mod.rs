//! Independent reference implementations used by the integration tests.
//! Nothing here calls into the crate's numerics.

#![allow(dead_code)]

use mwconsensus::graph::MatrixWeightedGraph;
use mwconsensus::linalg::SymMatrix;
use mwconsensus::scenario::X0Spec;
use mwconsensus::{Baseline, Mode, Scenario, TriggerParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Signed scalar edge list `(i, j, a)`.
pub type ScalarEdges = Vec<(usize, usize, f64)>;

/// Whether some `s ∈ {±1}ⁿ` satisfies `sᵢ sⱼ = sign(a)` on every edge,
/// by enumerating all `2ⁿ` assignments.
pub fn brute_force_balanced(n: usize, signed: &[(usize, usize, i8)]) -> bool {
    (0u32..(1 << n)).any(|mask| {
        let s = |k: usize| if mask >> k & 1 == 1 { -1i8 } else { 1 };
        signed.iter().all(|&(i, j, sg)| s(i) * s(j) == sg)
    })
}

/// Random simple graph on `n` nodes with edge probability `p` and random
/// signs. Signs follow a hidden bipartition with probability `bias`.
pub fn random_signed_graph(rng: &mut ChaCha8Rng, n: usize, p: f64, bias: f64) -> Vec<(usize, usize, i8)> {
    let hidden: Vec<i8> = (0..n).map(|_| if rng.random_bool(0.5) { 1 } else { -1 }).collect();
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(p) {
                let sign = if rng.random_bool(bias) {
                    hidden[i] * hidden[j]
                } else if rng.random_bool(0.5) {
                    1
                } else {
                    -1
                };
                out.push((i, j, sign));
            }
        }
    }
    out
}

/// Connected, structurally balanced scalar graph: random spanning tree plus
/// extra edges, signs consistent with a random bipartition.
pub fn random_balanced_scalar(rng: &mut ChaCha8Rng, n: usize) -> ScalarEdges {
    let group: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
    let mut edges = Vec::new();
    let mut present = vec![vec![false; n]; n];
    let mut add = |i: usize, j: usize, rng: &mut ChaCha8Rng, edges: &mut ScalarEdges| {
        let (i, j) = (i.min(j), i.max(j));
        if i != j && !present[i][j] {
            present[i][j] = true;
            let mag = rng.random_range(0.5..2.0);
            edges.push((i, j, group[i] * group[j] * mag));
        }
    };
    for k in 1..n {
        let parent = rng.random_range(0..k);
        add(parent, k, rng, &mut edges);
    }
    for _ in 0..n {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        add(i, j, rng, &mut edges);
    }
    edges
}

pub fn scalar_params(rng: &mut ChaCha8Rng) -> TriggerParams {
    let delta = rng.random_range(0.0..=1.0);
    let beta = rng.random_range(0.5..2.0);
    TriggerParams {
        sigma: rng.random_range(0.0..0.95),
        theta: (1.0 - delta) / beta + rng.random_range(0.1..1.0),
        beta,
        delta,
        chi0: rng.random_range(0.1..1.0),
    }
}

/// Block scenario with weights `aᵢⱼ I_d`.
pub fn scalar_scenario(
    n: usize,
    d: usize,
    edges: &ScalarEdges,
    params: Vec<TriggerParams>,
    seed: u64,
    dt: f64,
    horizon: f64,
) -> Scenario {
    let blocks = edges
        .iter()
        .map(|&(i, j, a)| (i, j, SymMatrix::identity(d).scaled(a)))
        .collect();
    let g = MatrixWeightedGraph::from_edges(n, d, blocks).expect("valid scalar graph");
    Scenario::new(g, Mode::Leaderless, params, X0Spec::Uniform, dt, horizon, Some(seed), Baseline::Dynamic)
        .expect("valid scenario")
}

/// Output of [`scalar_oracle`]: per grid point, flat `n·d` states and `n` χ.
pub struct OracleRun {
    pub states: Vec<Vec<f64>>,
    pub chi: Vec<Vec<f64>>,
    pub events: Vec<Vec<usize>>,
}

/// Leaderless event-triggered consensus with scalar signed weights acting on
/// `d`-vector states, written directly from the scalar formulas:
/// `|A| = |a|`, `sgn(A) = sign(a)`, `‖√|A| p‖² = |a| ‖p‖²`, `μ̄ = max |a|`.
pub fn scalar_oracle(
    n: usize,
    d: usize,
    edges: &ScalarEdges,
    params: &[TriggerParams],
    x0: &[f64],
    dt: f64,
    steps: usize,
) -> OracleRun {
    let mut nbrs: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for &(i, j, a) in edges {
        nbrs[i].push((j, a));
        nbrs[j].push((i, a));
    }
    let mu: Vec<f64> = nbrs
        .iter()
        .map(|v| v.iter().map(|&(_, a)| a.abs()).fold(0.0, f64::max))
        .collect();
    let deg: Vec<f64> = nbrs.iter().map(|v| v.len() as f64).collect();

    let mut x = x0.to_vec();
    let mut xh = x0.to_vec();
    let mut chi: Vec<f64> = params.iter().map(|p| p.chi0).collect();
    let mut q = vec![0.0; n * d];
    let mut dis = vec![0.0; n];

    let refresh = |xh: &[f64], q: &mut [f64], dis: &mut [f64]| {
        for i in 0..n {
            dis[i] = 0.0;
            for k in 0..d {
                q[i * d + k] = 0.0;
            }
            for &(j, a) in &nbrs[i] {
                let s = a.signum();
                let mut p_sq = 0.0;
                for k in 0..d {
                    let p = xh[i * d + k] - s * xh[j * d + k];
                    q[i * d + k] -= a.abs() * p;
                    p_sq += p * p;
                }
                dis[i] += a.abs() * p_sq;
            }
        }
    };
    refresh(&xh, &mut q, &mut dis);

    let mut out = OracleRun {
        states: vec![x.clone()],
        chi: vec![chi.clone()],
        events: vec![vec![0]; n],
    };
    for step in 1..=steps {
        let mut fired = Vec::new();
        for i in 0..n {
            let p = &params[i];
            let e_sq = |tau: f64| {
                (0..d)
                    .map(|k| {
                        let e = xh[i * d + k] - x[i * d + k] - tau * q[i * d + k];
                        e * e
                    })
                    .sum::<f64>()
            };
            let rate = |tau: f64, c: f64| -p.beta * c + p.delta * (p.sigma / 4.0 * dis[i] - mu[i] * deg[i] * e_sq(tau));
            let c = chi[i];
            let k1 = rate(0.0, c);
            let k2 = rate(dt / 2.0, c + dt / 2.0 * k1);
            let k3 = rate(dt / 2.0, c + dt / 2.0 * k2);
            let k4 = rate(dt, c + dt * k3);
            chi[i] = c + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            for k in 0..d {
                x[i * d + k] += dt * q[i * d + k];
            }
            let e_end: f64 = (0..d).map(|k| (xh[i * d + k] - x[i * d + k]).powi(2)).sum();
            let lhs = p.theta * (mu[i] * deg[i] * e_end - p.sigma / 4.0 * dis[i]);
            if lhs > chi[i] {
                fired.push(i);
            }
        }
        for &i in &fired {
            for k in 0..d {
                xh[i * d + k] = x[i * d + k];
            }
            out.events[i].push(step);
        }
        if !fired.is_empty() {
            refresh(&xh, &mut q, &mut dis);
        }
        out.states.push(x.clone());
        out.chi.push(chi.clone());
    }
    out
}

pub struct ScalarComparison {
    pub max_state_diff: f64,
    pub max_chi_diff: f64,
    pub events_match: bool,
}

/// Runs `count` random scalar-weighted scenarios through both simulators.
pub fn compare_scalar_random(count: usize, seed: u64) -> Vec<ScalarComparison> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|k| {
            let n = rng.random_range(2..=6);
            let d = 2;
            let edges = random_balanced_scalar(&mut rng, n);
            let params: Vec<_> = (0..n).map(|_| scalar_params(&mut rng)).collect();
            let s = scalar_scenario(n, d, &edges, params.clone(), k as u64, 1e-3, 3.0);
            let rec = mwconsensus::sim::run(&s).expect("block run");
            let oracle = scalar_oracle(n, d, &edges, &params, s.x0.as_slice(), s.dt, s.steps());
            let max_state_diff = rec
                .states
                .iter()
                .zip(&oracle.states)
                .flat_map(|(a, b)| a.iter().zip(b).map(|(u, v)| (u - v).abs()))
                .fold(0.0, f64::max);
            let max_chi_diff = rec
                .chi
                .iter()
                .zip(&oracle.chi)
                .flat_map(|(a, b)| a.iter().zip(b).map(|(u, v)| (u - v).abs()))
                .fold(0.0, f64::max);
            ScalarComparison {
                max_state_diff,
                max_chi_diff,
                events_match: rec.event_steps == oracle.events && rec.len() == oracle.states.len(),
            }
        })
        .collect()
}
