//! Dense symmetric-matrix kernel.
//!
//! Everything downstream works on [`SymMatrix`]: edge weights, input
//! couplings and the block Laplacians. Construction symmetrizes its input,
//! so every value of this type is exactly symmetric.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default relative tolerance for treating an eigenvalue as zero.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Asymmetry above which construction records that it had to symmetrize.
pub const ASYMMETRY_WARN: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix {
    m: DMatrix<f64>,
    asymmetry: f64,
}

impl SymMatrix {
    /// Builds from a square matrix, replacing it by `(M + Mᵀ)/2`.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() == 0 || m.nrows() != m.ncols() {
            return Err(Error::InvalidMatrix(format!(
                "expected a non-empty square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidMatrix("non-finite entry".into()));
        }
        let t = m.transpose();
        let asymmetry = (&m - &t).amax();
        let m = (&m + &t) * 0.5;
        Ok(SymMatrix { m, asymmetry })
    }

    pub fn from_row_major(dim: usize, entries: &[f64]) -> Result<Self> {
        if dim == 0 || entries.len() != dim * dim {
            return Err(Error::InvalidMatrix(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                entries.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(dim, dim, entries))
    }

    pub fn identity(dim: usize) -> Self {
        SymMatrix {
            m: DMatrix::identity(dim, dim),
            asymmetry: 0.0,
        }
    }

    pub fn zeros(dim: usize) -> Self {
        SymMatrix {
            m: DMatrix::zeros(dim, dim),
            asymmetry: 0.0,
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    /// Wraps a matrix already known to be symmetric (internal arithmetic).
    pub(crate) fn from_symmetric_unchecked(m: DMatrix<f64>) -> Self {
        debug_assert_eq!(m.nrows(), m.ncols());
        SymMatrix { m, asymmetry: 0.0 }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.m[(r, c)]
    }

    /// Largest `|M - Mᵀ|` entry of the matrix handed to the constructor.
    pub fn asymmetry(&self) -> f64 {
        self.asymmetry
    }

    pub fn was_symmetrized(&self) -> bool {
        self.asymmetry > ASYMMETRY_WARN
    }

    pub fn row_major(&self) -> Vec<f64> {
        let d = self.dim();
        let mut out = Vec::with_capacity(d * d);
        for r in 0..d {
            for c in 0..d {
                out.push(self.m[(r, c)]);
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.m.norm()
    }

    pub fn scaled(&self, s: f64) -> Self {
        SymMatrix::from_symmetric_unchecked(&self.m * s)
    }

    pub fn add(&self, other: &SymMatrix) -> Self {
        SymMatrix::from_symmetric_unchecked(&self.m + &other.m)
    }

    pub fn mul_vec(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.m * v
    }

    /// `vᵀ M v`.
    pub fn quad_form(&self, v: &DVector<f64>) -> f64 {
        v.dot(&(&self.m * v))
    }
}

impl fmt::Display for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.m)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DefinitenessClass {
    #[serde(rename = "pd")]
    PositiveDefinite,
    #[serde(rename = "psd")]
    PositiveSemiDefinite,
    #[serde(rename = "nd")]
    NegativeDefinite,
    #[serde(rename = "nsd")]
    NegativeSemiDefinite,
    Indefinite,
    Zero,
}

impl DefinitenessClass {
    pub fn is_indefinite(self) -> bool {
        self == DefinitenessClass::Indefinite
    }

    /// PD/PSD/ND/NSD: classes allowed on an edge.
    pub fn is_sign_definite(self) -> bool {
        !matches!(self, DefinitenessClass::Indefinite | DefinitenessClass::Zero)
    }

    pub fn short_name(self) -> &'static str {
        match self {
            DefinitenessClass::PositiveDefinite => "pd",
            DefinitenessClass::PositiveSemiDefinite => "psd",
            DefinitenessClass::NegativeDefinite => "nd",
            DefinitenessClass::NegativeSemiDefinite => "nsd",
            DefinitenessClass::Indefinite => "indefinite",
            DefinitenessClass::Zero => "zero",
        }
    }
}

impl fmt::Display for DefinitenessClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    /// Ascending.
    pub eigenvalues: DVector<f64>,
    /// Column `k` pairs with `eigenvalues[k]`.
    pub eigenvectors: DMatrix<f64>,
}

impl EigenDecomposition {
    pub fn min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues[self.eigenvalues.len() - 1]
    }

    pub fn max_abs(&self) -> f64 {
        self.eigenvalues.amax()
    }

    /// `Q Λ Qᵀ` with the eigenvalues passed through `f`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let q = &self.eigenvectors;
        let mut scaled = q.clone();
        for (k, mut col) in scaled.column_iter_mut().enumerate() {
            col *= f(self.eigenvalues[k]);
        }
        let m = scaled * q.transpose();
        (&m + m.transpose()) * 0.5
    }
}

pub fn sym_eigen(m: &SymMatrix) -> EigenDecomposition {
    let se = m.m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..se.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
    let d = m.dim();
    let eigenvalues = DVector::from_iterator(d, order.iter().map(|&k| se.eigenvalues[k]));
    let mut eigenvectors = DMatrix::zeros(d, d);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &se.eigenvectors.column(src));
    }
    EigenDecomposition {
        eigenvalues,
        eigenvectors,
    }
}

/// Zero band used for a spectrum: `tol · max(1, max|λ|)`.
pub fn zero_band(eigenvalues: &DVector<f64>, tol: f64) -> f64 {
    tol * eigenvalues.amax().max(1.0)
}

pub fn classify_spectrum(eigenvalues: &DVector<f64>, tol: f64) -> DefinitenessClass {
    let band = zero_band(eigenvalues, tol);
    let pos = eigenvalues.iter().filter(|&&l| l > band).count();
    let neg = eigenvalues.iter().filter(|&&l| l < -band).count();
    let d = eigenvalues.len();
    match (pos, neg) {
        (0, 0) => DefinitenessClass::Zero,
        (p, 0) if p == d => DefinitenessClass::PositiveDefinite,
        (_, 0) => DefinitenessClass::PositiveSemiDefinite,
        (0, q) if q == d => DefinitenessClass::NegativeDefinite,
        (0, _) => DefinitenessClass::NegativeSemiDefinite,
        _ => DefinitenessClass::Indefinite,
    }
}

pub fn classify_definiteness(m: &SymMatrix, tol: f64) -> DefinitenessClass {
    classify_spectrum(&sym_eigen(m).eigenvalues, tol)
}

/// `|M|`: `M` on the positive side, `-M` on the negative side.
pub fn matrix_abs(m: &SymMatrix, class: DefinitenessClass) -> Result<SymMatrix> {
    Ok(m.scaled(match matrix_sgn(class)? {
        -1 => -1.0,
        _ => 1.0,
    }))
}

pub fn matrix_sgn(class: DefinitenessClass) -> Result<i8> {
    use DefinitenessClass::*;
    match class {
        PositiveDefinite | PositiveSemiDefinite => Ok(1),
        NegativeDefinite | NegativeSemiDefinite => Ok(-1),
        Zero => Ok(0),
        Indefinite => Err(Error::UnsupportedWeight(
            "indefinite matrix has no absolute value or sign".into(),
        )),
    }
}

pub fn sym_sqrt(m: &SymMatrix) -> Result<SymMatrix> {
    sym_sqrt_with_tol(m, DEFAULT_TOL)
}

/// Principal square root of a PSD matrix. Eigenvalues inside the zero band
/// are clamped to zero first.
pub fn sym_sqrt_with_tol(m: &SymMatrix, tol: f64) -> Result<SymMatrix> {
    let eig = sym_eigen(m);
    let band = zero_band(&eig.eigenvalues, tol);
    if eig.min() < -band {
        return Err(Error::NotPsd {
            min_eigenvalue: eig.min(),
        });
    }
    Ok(SymMatrix::from_symmetric_unchecked(
        eig.reconstruct_with(|l| if l <= band { 0.0 } else { l.sqrt() }),
    ))
}

/// Largest eigenvalue.
pub fn mu_max(m: &SymMatrix) -> f64 {
    sym_eigen(m).max()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn a16() -> SymMatrix {
        SymMatrix::from_row_major(
            4,
            &[
                8.1684, 1.0, -0.1160, 0.3328, 1.0, 6.7495, 1.2264, 0.4473, -0.1160, 1.2264,
                7.4303, 0.2236, 0.3328, 0.4473, 0.2236, 8.0775,
            ],
        )
        .unwrap()
    }

    fn a23() -> SymMatrix {
        SymMatrix::from_row_major(
            4,
            &[
                -6.6469, 0.4166, 0.044, 0.2922, 0.4166, -8.2131, 0.1152, -0.3055, 0.044, 0.1152,
                -6.2339, -0.1434, 0.2922, -0.3055, -0.1434, -6.6147,
            ],
        )
        .unwrap()
    }

    #[test]
    fn eigen_identity_and_diagonal() {
        let e = sym_eigen(&SymMatrix::identity(3));
        for l in e.eigenvalues.iter() {
            assert_abs_diff_eq!(*l, 1.0, epsilon = 1e-14);
        }
        let e = sym_eigen(&SymMatrix::from_diagonal(&[4.0, -1.0, 0.0]).unwrap());
        assert_eq!(e.eigenvalues.as_slice(), &[-1.0, 0.0, 4.0]);
    }

    #[test]
    fn eigen_two_by_two_closed_form() {
        // det([[2-l,1],[1,2-l]]) = (2-l)^2 - 1 → l = 1, 3
        let e = sym_eigen(&SymMatrix::from_row_major(2, &[2.0, 1.0, 1.0, 2.0]).unwrap());
        assert_abs_diff_eq!(e.eigenvalues[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.eigenvalues[1], 3.0, epsilon = 1e-14);
    }

    #[test]
    fn non_finite_rejected() {
        let err = SymMatrix::from_row_major(2, &[1.0, f64::NAN, 0.0, 1.0]).unwrap_err();
        assert!(matches!(err, Error::InvalidMatrix(_)));
        assert!(SymMatrix::from_row_major(2, &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn construction_symmetrizes() {
        let m = SymMatrix::from_row_major(2, &[1.0, 2.0, 0.0, 1.0]).unwrap();
        assert_eq!(m.get(0, 1), 1.0);
        assert_eq!(m.get(1, 0), 1.0);
        assert!(m.was_symmetrized());
        assert!(!a16().was_symmetrized());
    }

    #[test]
    fn classification_examples() {
        use DefinitenessClass::*;
        assert_eq!(classify_definiteness(&a16(), DEFAULT_TOL), PositiveDefinite);
        assert_eq!(classify_definiteness(&a23(), DEFAULT_TOL), NegativeDefinite);
        let d = |v: &[f64]| SymMatrix::from_diagonal(v).unwrap();
        assert_eq!(classify_definiteness(&d(&[1.0, 0.0]), DEFAULT_TOL), PositiveSemiDefinite);
        assert_eq!(classify_definiteness(&d(&[1.0, -1.0]), DEFAULT_TOL), Indefinite);
        assert_eq!(classify_definiteness(&d(&[0.0, -2.0]), DEFAULT_TOL), NegativeSemiDefinite);
        assert_eq!(classify_definiteness(&d(&[0.0, 0.0]), DEFAULT_TOL), Zero);
        // scale-aware band: 1e-7 against λmax = 1e3 is zero at tol 1e-9
        assert_eq!(classify_definiteness(&d(&[1e3, -1e-7]), DEFAULT_TOL), PositiveSemiDefinite);
        assert_eq!(classify_definiteness(&d(&[1e3, -1e-5]), DEFAULT_TOL), Indefinite);
    }

    #[test]
    fn abs_and_sign() {
        use DefinitenessClass::*;
        let m = a23();
        let abs = matrix_abs(&m, NegativeDefinite).unwrap();
        assert_eq!(abs, m.scaled(-1.0));
        assert_eq!(classify_definiteness(&abs, DEFAULT_TOL), PositiveDefinite);
        let psd = SymMatrix::from_diagonal(&[1.0, 0.0]).unwrap();
        assert_eq!(matrix_abs(&psd, PositiveSemiDefinite).unwrap(), psd);
        let z = SymMatrix::zeros(3);
        assert_eq!(matrix_abs(&z, Zero).unwrap(), z);
        assert!(matches!(
            matrix_abs(&psd, Indefinite),
            Err(Error::UnsupportedWeight(_))
        ));

        assert_eq!(matrix_sgn(PositiveDefinite).unwrap(), 1);
        assert_eq!(matrix_sgn(PositiveSemiDefinite).unwrap(), 1);
        assert_eq!(matrix_sgn(NegativeSemiDefinite).unwrap(), -1);
        assert_eq!(matrix_sgn(NegativeDefinite).unwrap(), -1);
        assert_eq!(matrix_sgn(Zero).unwrap(), 0);
        assert!(matrix_sgn(Indefinite).is_err());
    }

    #[test]
    fn sqrt_examples() {
        let r = sym_sqrt(&SymMatrix::identity(3)).unwrap();
        assert_abs_diff_eq!(r.matrix(), &DMatrix::identity(3, 3), epsilon = 1e-14);
        let r = sym_sqrt(&SymMatrix::from_diagonal(&[4.0, 9.0]).unwrap()).unwrap();
        assert_abs_diff_eq!(r.get(0, 0), 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r.get(1, 1), 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r.get(0, 1), 0.0, epsilon = 1e-14);

        // printed A45 is PSD up to 4-decimal rounding
        let a45 = SymMatrix::from_row_major(
            4,
            &[
                0.7899, 1.5860, -0.3137, -0.498, 1.5860, 3.2857, -1.0541, -1.5607, -0.3137,
                -1.0541, 1.9019, 2.5477, -0.4980, -1.5607, 2.5477, 3.4211,
            ],
        )
        .unwrap();
        let r = sym_sqrt_with_tol(&a45, 1e-4).unwrap();
        let rr = r.matrix() * r.matrix();
        // clamped eigenvalues are O(1e-5), so compare at that scale
        assert!((rr - a45.matrix()).norm() <= 1e-4 * a45.frobenius_norm().max(1.0));
        assert!(matches!(
            sym_sqrt_with_tol(&a45, 1e-9),
            Err(Error::NotPsd { .. })
        ));

        let exact = SymMatrix::from_row_major(4, &a16().row_major()).unwrap();
        let r = sym_sqrt(&exact).unwrap();
        let rr = r.matrix() * r.matrix();
        assert!((rr - exact.matrix()).norm() <= 1e-8 * exact.frobenius_norm().max(1.0));
    }

    #[test]
    fn sqrt_rejects_negative() {
        let m = SymMatrix::from_diagonal(&[1.0, -0.5]).unwrap();
        assert!(matches!(sym_sqrt(&m), Err(Error::NotPsd { .. })));
    }

    fn sym_strategy(max_d: usize) -> impl Strategy<Value = SymMatrix> {
        (1..=max_d).prop_flat_map(|d| {
            prop::collection::vec(-5.0f64..5.0, d * d)
                .prop_map(move |v| SymMatrix::from_row_major(d, &v).unwrap())
        })
    }

    /// Random sign-definite matrix: ±(G Gᵀ) with optional rank deficiency.
    fn definite_strategy(max_d: usize) -> impl Strategy<Value = SymMatrix> {
        (1..=max_d)
            .prop_flat_map(|d| {
                (
                    Just(d),
                    1..=d,
                    prop::collection::vec(-2.0f64..2.0, d * d),
                    any::<bool>(),
                )
            })
            .prop_map(|(d, rank, g, neg)| {
                let g = DMatrix::from_row_slice(d, d, &g).columns(0, rank).into_owned();
                let m = &g * g.transpose() * if neg { -1.0 } else { 1.0 };
                SymMatrix::new(m).unwrap()
            })
    }

    proptest! {
        #[test]
        fn eigen_reconstruction_and_orthonormality(m in sym_strategy(8)) {
            let e = sym_eigen(&m);
            let d = m.dim();
            let recon = e.reconstruct_with(|l| l);
            prop_assert!((recon - m.matrix()).norm() <= 1e-10 * m.frobenius_norm().max(1.0));
            let qtq = e.eigenvectors.transpose() * &e.eigenvectors;
            prop_assert!((qtq - DMatrix::identity(d, d)).norm() <= 1e-10);
            for k in 1..d {
                prop_assert!(e.eigenvalues[k - 1] <= e.eigenvalues[k]);
            }
        }

        #[test]
        fn rayleigh_quotient_bounds(m in sym_strategy(6), seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let e = sym_eigen(&m);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let d = m.dim();
            let slack = 1e-10 * e.max_abs().max(1.0);
            for _ in 0..1000 {
                let x = DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
                let nn = x.norm_squared();
                let q = m.quad_form(&x);
                prop_assert!(q >= e.min() * nn - slack * nn);
                prop_assert!(q <= e.max() * nn + slack * nn);
            }
            // extremes attained on the basis
            let q0 = m.quad_form(&e.eigenvectors.column(0).into_owned());
            let q1 = m.quad_form(&e.eigenvectors.column(d - 1).into_owned());
            prop_assert!((q0 - e.min()).abs() <= slack);
            prop_assert!((q1 - e.max()).abs() <= slack);
        }

        #[test]
        fn young_inequality(
            x in prop::collection::vec(-10.0f64..10.0, 1..10),
            alpha in 1e-3f64..1e3,
            seed in any::<u64>(),
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let x = DVector::from_vec(x);
            let y = DVector::from_fn(x.len(), |_, _| rng.random_range(-10.0..10.0));
            let lhs = x.dot(&y);
            let rhs = x.norm_squared() / (2.0 * alpha) + alpha * y.norm_squared() / 2.0;
            prop_assert!(lhs <= rhs + 1e-12 * rhs.max(1.0));
        }

        #[test]
        fn abs_sign_roundtrip(m in definite_strategy(6)) {
            let class = classify_definiteness(&m, DEFAULT_TOL);
            prop_assume!(class.is_sign_definite());
            let abs = matrix_abs(&m, class).unwrap();
            let abs_class = classify_definiteness(&abs, DEFAULT_TOL);
            prop_assert!(matches!(
                abs_class,
                DefinitenessClass::PositiveDefinite | DefinitenessClass::PositiveSemiDefinite
            ));
            let s = matrix_sgn(class).unwrap() as f64;
            prop_assert!((abs.matrix() * s - m.matrix()).amax() <= 1e-12);

            let r = sym_sqrt(&abs).unwrap();
            let rr = r.matrix() * r.matrix();
            prop_assert!((rr - abs.matrix()).norm() <= 1e-8 * abs.frobenius_norm().max(1.0));
        }
    }
}
