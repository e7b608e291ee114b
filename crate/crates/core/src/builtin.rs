//! The embedded six-agent, `d = 4` reference network and its two scenarios.
//!
//! Node bipartition `{1, 2, 6} / {3, 4, 5}`. Weights are transcribed to the
//! four decimals they are published with; the resulting rounding noise in the
//! semi-definite weights (eigenvalues of order `1e-5`) is absorbed by
//! [`WEIGHT_TOL`].
//!
//! The published `A12` is not symmetric and its symmetric part is
//! indefinite, so it cannot be used as an edge weight directly; see
//! [`A12Variant`].

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::graph::{EdgeSpec, InputCoupling, InputSpec, MatrixWeightedGraph};
use crate::linalg::{sym_eigen, SymMatrix};
use crate::scenario::{Scenario, X0Spec};
use crate::trigger::{Baseline, Mode, TriggerParams};

pub const N: usize = 6;
pub const D: usize = 4;

/// Relative zero band for classifying the transcribed weights.
pub const WEIGHT_TOL: f64 = 1e-4;

pub const DT: f64 = 1e-3;
pub const LEADERLESS_HORIZON: f64 = 20.0;
pub const LEADER_FOLLOWER_HORIZON: f64 = 30.0;

pub const U0: [f64; D] = [0.2, 0.4, 0.6, 0.8];

/// Published `μ̄ᵢ` (also listed, unchanged, as the leader-follower `γᵢ`).
pub const PUBLISHED_MU_BAR: [f64; N] = [9.2047, 8.396, 9.7599, 6.7454, 9.7599, 9.3996];

/// As printed (row-major, not symmetric).
pub const A12_PRINTED: [f64; 16] = [
    0.0975, 0.9649, 0.4854, 0.9157, //
    0.2785, 0.1576, 0.8003, 0.7922, //
    0.5469, 0.9706, 0.1419, 0.9595, //
    0.9575, 0.9572, 0.4218, 0.6557,
];

pub const A16: [f64; 16] = [
    8.1684, 1.0, -0.1160, 0.3328, //
    1.0, 6.7495, 1.2264, 0.4473, //
    -0.1160, 1.2264, 7.4303, 0.2236, //
    0.3328, 0.4473, 0.2236, 8.0775,
];

pub const A26: [f64; 16] = [
    4.6211, 0.8971, 0.8392, 2.7045, //
    0.8971, 1.1161, 2.1934, 0.0274, //
    0.8392, 2.1934, 4.5295, -0.5815, //
    2.7045, 0.0274, -0.5815, 1.8457,
];

pub const A23: [f64; 16] = [
    -6.6469, 0.4166, 0.044, 0.2922, //
    0.4166, -8.2131, 0.1152, -0.3055, //
    0.044, 0.1152, -6.2339, -0.1434, //
    0.2922, -0.3055, -0.1434, -6.6147,
];

pub const A56: [f64; 16] = [
    -4.7176, -1.6485, 1.5246, -3.1114, //
    -1.6485, -6.7837, -1.3214, 0.9421, //
    1.5246, -1.3214, -6.4716, -2.6201, //
    -3.1114, 0.9421, -2.6201, -6.0166,
];

pub const A35: [f64; 16] = [
    4.8630, -0.9583, -1.0002, 0.6242, //
    -0.9583, 4.9516, 1.1961, -0.8268, //
    -1.0002, 1.1961, 6.5071, -2.4257, //
    0.6242, -0.8268, -2.4257, 6.4197,
];

pub const A34: [f64; 16] = [
    4.6843, -0.5024, 1.2292, 0.5247, //
    -0.5024, 6.2876, 0.5766, 0.0968, //
    1.2292, 0.5766, 5.2446, 0.0118, //
    0.5247, 0.0968, 0.0118, 6.2167,
];

pub const A45: [f64; 16] = [
    0.7899, 1.5860, -0.3137, -0.498, //
    1.5860, 3.2857, -1.0541, -1.5607, //
    -0.3137, -1.0541, 1.9019, 2.5477, //
    -0.4980, -1.5607, 2.5477, 3.4211,
];

/// How the non-symmetric published `A12` is turned into an edge weight.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum A12Variant {
    /// `A12ᵀ A12`: positive definite, `λmax ≈ 6.989`.
    #[default]
    Gram,
    /// Nearest PSD matrix to the symmetric part (negative eigenvalues
    /// clamped). Rank one.
    PsdProjection,
    /// The printed entries. Construction symmetrizes them and the result is
    /// indefinite, so loading the graph fails.
    Printed,
}

impl A12Variant {
    pub fn name(self) -> &'static str {
        match self {
            A12Variant::Gram => "gram",
            A12Variant::PsdProjection => "psd-projection",
            A12Variant::Printed => "printed",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "gram" => Some(A12Variant::Gram),
            "psd-projection" => Some(A12Variant::PsdProjection),
            "printed" => Some(A12Variant::Printed),
            _ => None,
        }
    }
}

fn sym(entries: &[f64; 16]) -> SymMatrix {
    SymMatrix::from_row_major(D, entries).expect("embedded weight is finite")
}

pub fn a12(variant: A12Variant) -> SymMatrix {
    let raw = DMatrix::from_row_slice(D, D, &A12_PRINTED);
    match variant {
        A12Variant::Gram => SymMatrix::new(raw.transpose() * &raw).expect("finite"),
        A12Variant::PsdProjection => {
            let s = SymMatrix::new(raw).expect("finite");
            let eig = sym_eigen(&s);
            SymMatrix::new(eig.reconstruct_with(|l| l.max(0.0))).expect("finite")
        }
        A12Variant::Printed => SymMatrix::from_row_major(D, &A12_PRINTED).expect("finite"),
    }
}

/// `(i, j, weight)` with 0-based agents.
pub fn edges(variant: A12Variant) -> Vec<(usize, usize, SymMatrix)> {
    vec![
        (0, 1, a12(variant)),
        (0, 5, sym(&A16)),
        (1, 5, sym(&A26)),
        (1, 2, sym(&A23)),
        (4, 5, sym(&A56)),
        (2, 4, sym(&A35)),
        (2, 3, sym(&A34)),
        (3, 4, sym(&A45)),
    ]
}

pub fn graph(variant: A12Variant) -> Result<MatrixWeightedGraph> {
    let specs = edges(variant)
        .into_iter()
        .map(|(i, j, w)| EdgeSpec::new(i, j, w))
        .collect();
    MatrixWeightedGraph::new(N, D, specs, WEIGHT_TOL)
}

/// Input 1 drives agent 1 through `A45`, input 2 drives agent 6 through
/// `A16`.
pub fn input_specs() -> Vec<InputSpec> {
    vec![
        InputSpec {
            agent: 0,
            input: 0,
            weight: sym(&A45),
            class: None,
        },
        InputSpec {
            agent: 5,
            input: 1,
            weight: sym(&A16),
            class: None,
        },
    ]
}

pub fn coupling(g: &MatrixWeightedGraph) -> Result<InputCoupling> {
    InputCoupling::new(g, input_specs())
}

pub fn leaderless_params() -> TriggerParams {
    TriggerParams {
        sigma: 0.9,
        theta: 0.5,
        beta: 1.0,
        delta: 1.0,
        chi0: 0.5,
    }
}

pub fn leader_follower_params() -> TriggerParams {
    TriggerParams {
        theta: 1.0,
        ..leaderless_params()
    }
}

pub fn leaderless(seed: u64, variant: A12Variant) -> Result<Scenario> {
    let g = graph(variant)?;
    Scenario::new(
        g,
        Mode::Leaderless,
        vec![leaderless_params(); N],
        X0Spec::Uniform,
        DT,
        LEADERLESS_HORIZON,
        Some(seed),
        Baseline::Dynamic,
    )
}

pub fn leader_follower(seed: u64, variant: A12Variant) -> Result<Scenario> {
    let g = graph(variant)?;
    let b = coupling(&g)?;
    Scenario::new(
        g,
        Mode::LeaderFollower {
            u0: DVector::from_column_slice(&U0),
            coupling: b,
        },
        vec![leader_follower_params(); N],
        X0Spec::Uniform,
        DT,
        LEADER_FOLLOWER_HORIZON,
        Some(seed),
        Baseline::Dynamic,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{classify_definiteness, DefinitenessClass::*};

    #[test]
    fn transcribed_classes() {
        let g = graph(A12Variant::Gram).unwrap();
        let c: Vec<_> = g.edges().iter().map(|e| e.class).collect();
        assert_eq!(
            c,
            vec![
                PositiveDefinite,
                PositiveDefinite,
                PositiveSemiDefinite,
                NegativeDefinite,
                NegativeSemiDefinite,
                PositiveDefinite,
                PositiveDefinite,
                PositiveSemiDefinite,
            ]
        );
        assert!(g.warnings().is_empty());
    }

    #[test]
    fn a12_variants() {
        assert_eq!(classify_definiteness(&a12(A12Variant::Gram), WEIGHT_TOL), PositiveDefinite);
        assert_eq!(
            classify_definiteness(&a12(A12Variant::PsdProjection), WEIGHT_TOL),
            PositiveSemiDefinite
        );
        let printed = a12(A12Variant::Printed);
        assert!(printed.was_symmetrized());
        assert_eq!(classify_definiteness(&printed, WEIGHT_TOL), Indefinite);
        assert!(graph(A12Variant::Printed).is_err());
        assert!(graph(A12Variant::PsdProjection).is_ok());
    }
}
