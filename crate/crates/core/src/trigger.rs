//! Control laws and the two dynamic event-triggering mechanisms.
//!
//! All functions here are pure. States are stacked `nd` vectors; agent `i`
//! owns rows `i*d .. (i+1)*d`.
//!
//! Leaderless agent `i` keeps broadcasting-silent while
//!
//! ```text
//! θᵢ (μ̄ᵢ |Nᵢ| ‖eᵢ‖² − Σⱼ σᵢ/4 ‖√|Aᵢⱼ| pᵢⱼ‖²) ≤ χᵢ
//! χ̇ᵢ = −βᵢ χᵢ + δᵢ (σᵢ/4 Σⱼ ‖√|Aᵢⱼ| pᵢⱼ‖² − μ̄ᵢ |Nᵢ| ‖eᵢ‖²)
//! ```
//!
//! and the leader-follower agent while
//!
//! ```text
//! θᵢ (γᵢ ‖eᵢ‖² − σᵢ ‖q̂ᵢ‖²) ≤ χᵢ
//! χ̇ᵢ = −βᵢ χᵢ + δᵢ (σᵢ ‖q̂ᵢ‖² − γᵢ ‖eᵢ‖²)
//! ```
//!
//! Equality does not fire.

use std::fmt;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{InputCoupling, MatrixWeightedGraph};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TriggerParams {
    pub sigma: f64,
    pub theta: f64,
    pub beta: f64,
    pub delta: f64,
    pub chi0: f64,
}

impl TriggerParams {
    /// Smallest admissible `θ` (exclusive): `(1 − δ)/β`.
    pub fn theta_bound(&self) -> f64 {
        (1.0 - self.delta) / self.beta
    }

    /// Exponent of the guaranteed floor `χ(t) ≥ χ(0) e^{−(β + δ/θ) t}`.
    pub fn floor_rate(&self) -> f64 {
        self.beta + self.delta / self.theta
    }

    fn violations(&self, agent: usize) -> Vec<ParamViolation> {
        let mut out = Vec::new();
        let mut bad = |msg: String| out.push(ParamViolation { agent, message: msg });
        let p = self;
        if [p.sigma, p.theta, p.beta, p.delta, p.chi0].iter().any(|v| !v.is_finite()) {
            bad("non-finite parameter".into());
            return out;
        }
        if !(0.0..1.0).contains(&p.sigma) {
            bad(format!("sigma = {} outside [0, 1)", p.sigma));
        }
        if p.theta <= 0.0 {
            bad(format!("theta = {} must be > 0", p.theta));
        }
        if p.beta <= 0.0 {
            bad(format!("beta = {} must be > 0", p.beta));
        }
        if !(0.0..=1.0).contains(&p.delta) {
            bad(format!("delta = {} outside [0, 1]", p.delta));
        }
        if p.chi0 <= 0.0 {
            bad(format!("chi0 = {} must be > 0", p.chi0));
        }
        if p.beta > 0.0 && p.theta <= p.theta_bound() {
            bad(format!(
                "theta = {} must exceed (1 - delta)/beta = {}",
                p.theta,
                p.theta_bound()
            ));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamViolation {
    /// 0-based.
    pub agent: usize,
    pub message: String,
}

impl fmt::Display for ParamViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "agent {}: {}", self.agent + 1, self.message)
    }
}

/// Checks every range invariant and the `θ` bound; reports all violations.
pub fn validate_params(params: &[TriggerParams], n: usize) -> std::result::Result<(), Vec<ParamViolation>> {
    let mut out: Vec<ParamViolation> = params
        .iter()
        .enumerate()
        .flat_map(|(i, p)| p.violations(i))
        .collect();
    if params.len() != n {
        out.push(ParamViolation {
            agent: params.len().min(n),
            message: format!("expected parameters for {n} agents, got {}", params.len()),
        });
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

#[derive(Clone, Debug)]
pub enum Mode {
    Leaderless,
    /// Every input carries the same signal `u0`.
    LeaderFollower { u0: DVector<f64>, coupling: InputCoupling },
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Leaderless => "leaderless",
            Mode::LeaderFollower { .. } => "leader-follower",
        }
    }

    pub fn is_leaderless(&self) -> bool {
        matches!(self, Mode::Leaderless)
    }
}

/// Dynamic uses the auxiliary variable as threshold; static drops it
/// (fire as soon as the bracket turns positive).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Baseline {
    #[default]
    Dynamic,
    Static,
}

impl Baseline {
    pub fn fires(self, lhs: f64, chi: f64) -> bool {
        match self {
            Baseline::Dynamic => lhs > chi,
            Baseline::Static => lhs > 0.0,
        }
    }
}

fn block(x: &DVector<f64>, i: usize, d: usize) -> nalgebra::DVectorView<'_, f64> {
    x.rows(i * d, d)
}

/// `pᵢⱼ = x̂ᵢ − sgn(Aᵢⱼ) x̂ⱼ`.
pub fn relative_broadcast(g: &MatrixWeightedGraph, i: usize, j: usize, xhat: &DVector<f64>) -> Result<DVector<f64>> {
    let e = g.edge_between(i, j).ok_or(Error::NotNeighbors { i, j })?;
    let d = g.d();
    Ok(block(xhat, i, d) - block(xhat, j, d) * e.sign as f64)
}

/// `q̂ᵢ = −Σⱼ |Aᵢⱼ| pᵢⱼ`.
pub fn control_leaderless(g: &MatrixWeightedGraph, i: usize, xhat: &DVector<f64>) -> DVector<f64> {
    let d = g.d();
    let mut q = DVector::zeros(d);
    let xi = block(xhat, i, d);
    for &(j, k) in g.neighbors(i) {
        let e = &g.edges()[k];
        let p = xi - block(xhat, j, d) * e.sign as f64;
        q -= e.abs.matrix() * p;
    }
    q
}

/// `q̂ᵢ = −Σⱼ |Aᵢⱼ| pᵢⱼ − Σₗ |Bᵢₗ| (x̂ᵢ − sgn(Bᵢₗ) u₀)`.
pub fn control_leader_follower(
    g: &MatrixWeightedGraph,
    b: &InputCoupling,
    u0: &DVector<f64>,
    i: usize,
    xhat: &DVector<f64>,
) -> DVector<f64> {
    let mut q = control_leaderless(g, i, xhat);
    let xi = block(xhat, i, g.d());
    for e in b.for_agent(i) {
        q -= e.abs.matrix() * (xi - u0 * e.sign as f64);
    }
    q
}

/// `Σⱼ ‖√|Aᵢⱼ| pᵢⱼ‖²`.
pub fn weighted_disagreement(g: &MatrixWeightedGraph, i: usize, xhat: &DVector<f64>) -> f64 {
    let d = g.d();
    let xi = block(xhat, i, d);
    g.neighbors(i)
        .iter()
        .map(|&(j, k)| {
            let e = &g.edges()[k];
            let p = xi - block(xhat, j, d) * e.sign as f64;
            (e.sqrt_abs.matrix() * p).norm_squared()
        })
        .sum()
}

/// `μ̄ᵢ = maxⱼ μmax(|Aᵢⱼ|)`.
pub fn mu_bar(g: &MatrixWeightedGraph, i: usize) -> Result<f64> {
    g.neighbors(i)
        .iter()
        .map(|&(_, k)| g.edges()[k].mu)
        .reduce(f64::max)
        .ok_or(Error::NoNeighbors { agent: i })
}

/// `γᵢ = n (Σⱼ μmax(|Aᵢⱼ|) + Σₗ μmax(|Bᵢₗ|))² + n Σⱼ μmax²(|Aᵢⱼ|)`.
pub fn gamma(g: &MatrixWeightedGraph, b: &InputCoupling, i: usize) -> f64 {
    let n = g.n() as f64;
    let mus = g.neighbors(i).iter().map(|&(_, k)| g.edges()[k].mu);
    let sum_a: f64 = mus.clone().sum();
    let sum_a2: f64 = mus.map(|m| m * m).sum();
    let sum_b: f64 = b.for_agent(i).map(|e| e.mu).sum();
    n * (sum_a + sum_b).powi(2) + n * sum_a2
}

/// `θ (μ̄ |N| ‖e‖² − σ/4 · disagreement)`.
pub fn leaderless_lhs(p: &TriggerParams, mu_bar: f64, degree: usize, e_sq: f64, disagreement: f64) -> f64 {
    p.theta * (mu_bar * degree as f64 * e_sq - p.sigma / 4.0 * disagreement)
}

pub fn leaderless_fires(p: &TriggerParams, mu_bar: f64, degree: usize, e_sq: f64, disagreement: f64, chi: f64) -> bool {
    leaderless_lhs(p, mu_bar, degree, e_sq, disagreement) > chi
}

pub fn chi_rate_leaderless(p: &TriggerParams, mu_bar: f64, degree: usize, e_sq: f64, disagreement: f64, chi: f64) -> f64 {
    -p.beta * chi + p.delta * (p.sigma / 4.0 * disagreement - mu_bar * degree as f64 * e_sq)
}

/// `θ (γ ‖e‖² − σ ‖q̂‖²)`.
pub fn lf_lhs(p: &TriggerParams, gamma: f64, e_sq: f64, q_sq: f64) -> f64 {
    p.theta * (gamma * e_sq - p.sigma * q_sq)
}

pub fn lf_fires(p: &TriggerParams, gamma: f64, e_sq: f64, q_sq: f64, chi: f64) -> bool {
    lf_lhs(p, gamma, e_sq, q_sq) > chi
}

pub fn chi_rate_lf(p: &TriggerParams, gamma: f64, e_sq: f64, q_sq: f64, chi: f64) -> f64 {
    -p.beta * chi + p.delta * (p.sigma * q_sq - gamma * e_sq)
}

/// Per-agent trigger constants, resolved once per run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AgentTrigger {
    /// `mu_bar` is 0 for an isolated agent (its bracket is then `−σ/4·0 = 0`).
    Leaderless { mu_bar: f64, degree: usize },
    LeaderFollower { gamma: f64 },
}

impl AgentTrigger {
    /// `signal` is the segment-constant term: the weighted disagreement
    /// (leaderless) or `‖q̂ᵢ‖²` (leader-follower).
    pub fn lhs(&self, p: &TriggerParams, e_sq: f64, signal: f64) -> f64 {
        match *self {
            AgentTrigger::Leaderless { mu_bar, degree } => leaderless_lhs(p, mu_bar, degree, e_sq, signal),
            AgentTrigger::LeaderFollower { gamma } => lf_lhs(p, gamma, e_sq, signal),
        }
    }

    pub fn chi_rate(&self, p: &TriggerParams, e_sq: f64, signal: f64, chi: f64) -> f64 {
        match *self {
            AgentTrigger::Leaderless { mu_bar, degree } => chi_rate_leaderless(p, mu_bar, degree, e_sq, signal, chi),
            AgentTrigger::LeaderFollower { gamma } => chi_rate_lf(p, gamma, e_sq, signal, chi),
        }
    }
}
