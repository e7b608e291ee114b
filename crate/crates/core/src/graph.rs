//! Matrix-weighted network model.
//!
//! Undirected graph whose edges carry symmetric `d×d` sign-definite weights.
//! Agents are indexed `0..n` internally; the scenario file and every report
//! use 1-based numbering.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{
    self, classify_spectrum, matrix_abs, matrix_sgn, sym_eigen, sym_sqrt_with_tol, zero_band,
    DefinitenessClass, SymMatrix,
};

/// Principal-angle threshold (sine) for comparing the Laplacian null space
/// with the gauge consensus subspace.
pub const SUBSPACE_TOL: f64 = 1e-8;

/// Tolerance for the entrywise gauge identity `σᵢσⱼAᵢⱼ = |Aᵢⱼ|`.
pub const GAUGE_TOL: f64 = 1e-12;

/// A weighted link with its derived quantities cached at load.
#[derive(Clone, Debug)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub weight: SymMatrix,
    pub class: DefinitenessClass,
    pub sign: i8,
    pub abs: SymMatrix,
    pub sqrt_abs: SymMatrix,
    /// Largest eigenvalue of `|A|`.
    pub mu: f64,
}

impl Edge {
    fn build(i: usize, j: usize, weight: SymMatrix, declared: Option<DefinitenessClass>, tol: f64) -> Result<Self> {
        let eig = sym_eigen(&weight);
        let measured = classify_spectrum(&eig.eigenvalues, tol);
        let class = match declared {
            Some(c) => {
                if !class_admits(c, &eig.eigenvalues, tol) {
                    return Err(Error::UnsupportedWeight(format!(
                        "declared class {c} does not match spectrum (measured {measured})"
                    )));
                }
                c
            }
            None => measured,
        };
        if !class.is_sign_definite() {
            return Err(Error::UnsupportedWeight(format!(
                "weight is {class} (eigenvalues {:?})",
                eig.eigenvalues.as_slice()
            )));
        }
        let sign = matrix_sgn(class)?;
        let abs = matrix_abs(&weight, class)?;
        let sqrt_abs = sym_sqrt_with_tol(&abs, tol)?;
        let mu = if sign > 0 { eig.max() } else { -eig.min() };
        Ok(Edge {
            i,
            j,
            weight,
            class,
            sign,
            abs,
            sqrt_abs,
            mu,
        })
    }

    pub fn other(&self, k: usize) -> usize {
        if k == self.i {
            self.j
        } else {
            self.i
        }
    }
}

/// Whether a declared class is consistent with a spectrum under `tol`.
pub fn class_admits(class: DefinitenessClass, eigenvalues: &DVector<f64>, tol: f64) -> bool {
    use DefinitenessClass::*;
    let band = zero_band(eigenvalues, tol);
    match class {
        PositiveDefinite => eigenvalues.iter().all(|&l| l > band),
        PositiveSemiDefinite => eigenvalues.iter().all(|&l| l >= -band) && eigenvalues.iter().any(|&l| l > band),
        NegativeDefinite => eigenvalues.iter().all(|&l| l < -band),
        NegativeSemiDefinite => eigenvalues.iter().all(|&l| l <= band) && eigenvalues.iter().any(|&l| l < -band),
        Zero => eigenvalues.iter().all(|&l| l.abs() <= band),
        Indefinite => classify_spectrum(eigenvalues, tol) == Indefinite,
    }
}

#[derive(Clone, Debug)]
pub struct EdgeSpec {
    pub i: usize,
    pub j: usize,
    pub weight: SymMatrix,
    pub class: Option<DefinitenessClass>,
}

impl EdgeSpec {
    pub fn new(i: usize, j: usize, weight: SymMatrix) -> Self {
        EdgeSpec {
            i,
            j,
            weight,
            class: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MatrixWeightedGraph {
    n: usize,
    d: usize,
    tol: f64,
    edges: Vec<Edge>,
    /// `adjacency[i]` lists `(neighbor, edge index)`, sorted by neighbor.
    adjacency: Vec<Vec<(usize, usize)>>,
    warnings: Vec<String>,
}

impl MatrixWeightedGraph {
    pub fn new(n: usize, d: usize, specs: Vec<EdgeSpec>, tol: f64) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::InvalidGraph("n and d must be positive".into()));
        }
        if tol.is_nan() || tol <= 0.0 {
            return Err(Error::InvalidGraph("weight tolerance must be positive".into()));
        }
        let mut edges = Vec::with_capacity(specs.len());
        let mut adjacency = vec![Vec::new(); n];
        let mut warnings = Vec::new();
        for spec in specs {
            let (i, j) = (spec.i.min(spec.j), spec.i.max(spec.j));
            if j >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge ({}, {}) references a node outside 1..={n}",
                    i + 1,
                    j + 1
                )));
            }
            if i == j {
                return Err(Error::InvalidGraph(format!("self-loop on node {}", i + 1)));
            }
            if spec.weight.dim() != d {
                return Err(Error::InvalidGraph(format!(
                    "edge ({}, {}) weight is {}x{}, expected {d}x{d}",
                    i + 1,
                    j + 1,
                    spec.weight.dim(),
                    spec.weight.dim()
                )));
            }
            if adjacency[i].iter().any(|&(k, _)| k == j) {
                return Err(Error::InvalidGraph(format!("duplicate edge ({}, {})", i + 1, j + 1)));
            }
            if spec.weight.was_symmetrized() {
                warnings.push(format!(
                    "edge ({}, {}): weight symmetrized (max asymmetry {:e})",
                    i + 1,
                    j + 1,
                    spec.weight.asymmetry()
                ));
            }
            let edge = Edge::build(i, j, spec.weight, spec.class, tol).map_err(|e| match e {
                Error::UnsupportedWeight(msg) => {
                    Error::UnsupportedWeight(format!("edge ({}, {}): {msg}", i + 1, j + 1))
                }
                other => other,
            })?;
            let k = edges.len();
            adjacency[i].push((j, k));
            adjacency[j].push((i, k));
            edges.push(edge);
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
        }
        Ok(MatrixWeightedGraph {
            n,
            d,
            tol,
            edges,
            adjacency,
            warnings,
        })
    }

    /// Convenience constructor with automatic classification and the default
    /// tolerance.
    pub fn from_edges(n: usize, d: usize, edges: Vec<(usize, usize, SymMatrix)>) -> Result<Self> {
        let specs = edges.into_iter().map(|(i, j, w)| EdgeSpec::new(i, j, w)).collect();
        Self::new(n, d, specs, linalg::DEFAULT_TOL)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, usize)] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn edge_between(&self, i: usize, j: usize) -> Option<&Edge> {
        self.adjacency
            .get(i)?
            .iter()
            .find(|&&(k, _)| k == j)
            .map(|&(_, e)| &self.edges[e])
    }

    /// `Aᵢⱼ`, or the zero block for non-neighbors and the diagonal.
    pub fn weight(&self, i: usize, j: usize) -> SymMatrix {
        self.edge_between(i, j)
            .map(|e| e.weight.clone())
            .unwrap_or_else(|| SymMatrix::zeros(self.d))
    }

    /// Same topology and weights with one edge replaced (classification redone).
    pub fn with_weight(&self, i: usize, j: usize, weight: SymMatrix) -> Result<Self> {
        let (a, b) = (i.min(j), i.max(j));
        let mut specs: Vec<EdgeSpec> = self
            .edges
            .iter()
            .map(|e| EdgeSpec {
                i: e.i,
                j: e.j,
                weight: e.weight.clone(),
                class: None,
            })
            .collect();
        let slot = specs
            .iter_mut()
            .find(|s| s.i == a && s.j == b)
            .ok_or(Error::NotNeighbors { i, j })?;
        slot.weight = weight;
        Self::new(self.n, self.d, specs, self.tol)
    }
}

/// `(m, d)` input coupling `B = [Bᵢₗ]`; absent pairs are zero blocks.
#[derive(Clone, Debug)]
pub struct InputEdge {
    pub agent: usize,
    pub input: usize,
    pub weight: SymMatrix,
    pub class: DefinitenessClass,
    pub sign: i8,
    pub abs: SymMatrix,
    pub mu: f64,
}

#[derive(Clone, Debug)]
pub struct InputSpec {
    pub agent: usize,
    pub input: usize,
    pub weight: SymMatrix,
    pub class: Option<DefinitenessClass>,
}

#[derive(Clone, Debug)]
pub struct InputCoupling {
    m: usize,
    entries: Vec<InputEdge>,
    by_agent: Vec<Vec<usize>>,
}

impl InputCoupling {
    pub fn empty(n: usize) -> Self {
        InputCoupling {
            m: 0,
            entries: Vec::new(),
            by_agent: vec![Vec::new(); n],
        }
    }

    pub fn new(g: &MatrixWeightedGraph, specs: Vec<InputSpec>) -> Result<Self> {
        let mut entries: Vec<InputEdge> = Vec::with_capacity(specs.len());
        let mut by_agent = vec![Vec::new(); g.n()];
        let mut m = 0;
        for s in specs {
            let tag = format!("input (agent {}, input {})", s.agent + 1, s.input + 1);
            if s.agent >= g.n() {
                return Err(Error::InvalidGraph(format!("{tag}: agent out of range")));
            }
            if s.weight.dim() != g.d() {
                return Err(Error::InvalidGraph(format!("{tag}: weight dimension mismatch")));
            }
            if entries.iter().any(|e| e.agent == s.agent && e.input == s.input) {
                return Err(Error::InvalidGraph(format!("{tag}: duplicate entry")));
            }
            let e = Edge::build(s.agent, s.agent, s.weight, s.class, g.tol())
                .map_err(|e| Error::UnsupportedWeight(format!("{tag}: {e}")))?;
            m = m.max(s.input + 1);
            by_agent[s.agent].push(entries.len());
            entries.push(InputEdge {
                agent: s.agent,
                input: s.input,
                weight: e.weight,
                class: e.class,
                sign: e.sign,
                abs: e.abs,
                mu: e.mu,
            });
        }
        Ok(InputCoupling {
            m,
            entries,
            by_agent,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn entries(&self) -> &[InputEdge] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn for_agent(&self, i: usize) -> impl Iterator<Item = &InputEdge> {
        self.by_agent
            .get(i)
            .into_iter()
            .flatten()
            .map(move |&k| &self.entries[k])
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bipartition {
    pub group1: Vec<usize>,
    pub group2: Vec<usize>,
}

impl Bipartition {
    pub fn from_signs(signs: &[i8]) -> Self {
        let (g1, g2): (Vec<usize>, Vec<usize>) = (0..signs.len()).partition(|&i| signs[i] > 0);
        Bipartition {
            group1: g1,
            group2: g2,
        }
    }

    pub fn n(&self) -> usize {
        self.group1.len() + self.group2.len()
    }

    pub fn is_valid(&self, n: usize) -> bool {
        let mut seen = vec![false; n];
        for &i in self.group1.iter().chain(&self.group2) {
            if i >= n || seen[i] {
                return false;
            }
            seen[i] = true;
        }
        seen.into_iter().all(|s| s)
    }

    pub fn flipped(&self) -> Self {
        Bipartition {
            group1: self.group2.clone(),
            group2: self.group1.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Balance {
    Balanced(Bipartition),
    /// First edge (0-based endpoints) found inconsistent with any coloring.
    Imbalanced { conflict: (usize, usize) },
}

impl Balance {
    pub fn is_balanced(&self) -> bool {
        matches!(self, Balance::Balanced(_))
    }

    pub fn bipartition(&self) -> Option<&Bipartition> {
        match self {
            Balance::Balanced(b) => Some(b),
            Balance::Imbalanced { .. } => None,
        }
    }
}

/// Two-colors a signed graph: `+` edges join equal colors, `-` edges join
/// opposite colors. Each connected component's lowest node gets `+1`.
pub fn two_color(n: usize, signed_edges: &[(usize, usize, i8)]) -> std::result::Result<Vec<i8>, (usize, usize)> {
    let mut adj = vec![Vec::new(); n];
    for &(u, v, s) in signed_edges {
        adj[u].push((v, s));
        adj[v].push((u, s));
    }
    let mut color = vec![0i8; n];
    let mut queue = VecDeque::new();
    for root in 0..n {
        if color[root] != 0 {
            continue;
        }
        color[root] = 1;
        queue.push_back(root);
        while let Some(u) = queue.pop_front() {
            for &(v, s) in &adj[u] {
                let want = color[u] * s.signum();
                if color[v] == 0 {
                    color[v] = want;
                    queue.push_back(v);
                } else if color[v] != want {
                    return Err((u.min(v), u.max(v)));
                }
            }
        }
    }
    Ok(color)
}

pub fn detect_structural_balance(g: &MatrixWeightedGraph) -> Balance {
    let signed: Vec<_> = g.edges.iter().map(|e| (e.i, e.j, e.sign)).collect();
    match two_color(g.n, &signed) {
        Ok(c) => Balance::Balanced(Bipartition::from_signs(&c)),
        Err(conflict) => Balance::Imbalanced { conflict },
    }
}

/// `D* = diag(σ₁, …, σₙ)` with `σᵢ = ±I_d`, stored as the signs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GaugeMatrix {
    pub signs: Vec<i8>,
}

impl GaugeMatrix {
    pub fn identity(n: usize) -> Self {
        GaugeMatrix { signs: vec![1; n] }
    }

    pub fn n(&self) -> usize {
        self.signs.len()
    }

    pub fn sign(&self, i: usize) -> f64 {
        self.signs[i] as f64
    }

    pub fn flipped(&self) -> Self {
        GaugeMatrix {
            signs: self.signs.iter().map(|s| -s).collect(),
        }
    }

    /// `D* x` for a stacked `nd` vector.
    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        let d = x.len() / self.n();
        DVector::from_fn(x.len(), |r, _| x[r] * self.sign(r / d))
    }

    /// Stacked `D* (1 ⊗ v)`.
    pub fn spread(&self, v: &DVector<f64>) -> DVector<f64> {
        let d = v.len();
        DVector::from_fn(self.n() * d, |r, _| v[r % d] * self.sign(r / d))
    }
}

pub fn gauge_matrix(b: &Bipartition) -> GaugeMatrix {
    let n = b.n();
    let mut signs = vec![1i8; n];
    for &i in &b.group2 {
        signs[i] = -1;
    }
    GaugeMatrix { signs }
}

pub fn check_gauge_identity(g: &MatrixWeightedGraph, gauge: &GaugeMatrix) -> bool {
    if gauge.n() != g.n() {
        return false;
    }
    g.edges.iter().all(|e| {
        let s = gauge.sign(e.i) * gauge.sign(e.j);
        (e.weight.matrix() * s - e.abs.matrix()).amax() <= GAUGE_TOL
    })
}

fn add_block(l: &mut DMatrix<f64>, d: usize, bi: usize, bj: usize, m: &DMatrix<f64>, scale: f64) {
    let mut view = l.view_mut((bi * d, bj * d), (d, d));
    view += m * scale;
}

/// Block Laplacian `L = C − A` with `Cᵢ = Σⱼ |Aᵢⱼ|`.
pub fn build_laplacian(g: &MatrixWeightedGraph) -> SymMatrix {
    let (n, d) = (g.n, g.d);
    let mut l = DMatrix::zeros(n * d, n * d);
    for e in &g.edges {
        add_block(&mut l, d, e.i, e.i, e.abs.matrix(), 1.0);
        add_block(&mut l, d, e.j, e.j, e.abs.matrix(), 1.0);
        add_block(&mut l, d, e.i, e.j, e.weight.matrix(), -1.0);
        add_block(&mut l, d, e.j, e.i, e.weight.matrix(), -1.0);
    }
    SymMatrix::from_symmetric_unchecked(l)
}

/// `L_B = L + blkdiag(Σₗ |Bᵢₗ|)`.
pub fn build_grounded_laplacian(g: &MatrixWeightedGraph, b: &InputCoupling) -> SymMatrix {
    let d = g.d;
    let mut l = build_laplacian(g).into_matrix();
    for e in b.entries() {
        add_block(&mut l, d, e.agent, e.agent, e.abs.matrix(), 1.0);
    }
    SymMatrix::from_symmetric_unchecked(l)
}

/// Orthonormal basis (columns) of eigenvectors with `|λ| ≤ tol · λmax`.
pub fn null_space(l: &SymMatrix, tol: f64) -> Result<DMatrix<f64>> {
    let eig = sym_eigen(l);
    let band = zero_band(&eig.eigenvalues, tol);
    if eig.min() < -band {
        return Err(Error::NotPsd {
            min_eigenvalue: eig.min(),
        });
    }
    let cols: Vec<usize> = (0..eig.eigenvalues.len())
        .filter(|&k| eig.eigenvalues[k].abs() <= band)
        .collect();
    Ok(eig.eigenvectors.select_columns(&cols))
}

/// Sine of the largest principal angle between two orthonormal column sets
/// of equal width.
pub fn subspace_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    if a.ncols() != b.ncols() {
        return 1.0;
    }
    if a.ncols() == 0 {
        return 0.0;
    }
    let resid = b - a * (a.transpose() * b);
    resid.singular_values().max()
}

#[derive(Clone, Debug)]
pub struct Assumption1Report {
    pub balanced: bool,
    pub bipartition: Option<Bipartition>,
    pub nullity: usize,
    /// `sin` of the largest principal angle between `null(L)` and
    /// `range(D*(1⊗I_d))`; `1.0` when the dimensions differ.
    pub subspace_sine: f64,
    pub holds: bool,
}

pub fn verify_assumption1(g: &MatrixWeightedGraph) -> Assumption1Report {
    let balance = detect_structural_balance(g);
    let l = build_laplacian(g);
    let basis = null_space(&l, g.tol).ok();
    let nullity = basis.as_ref().map_or(0, |b| b.ncols());
    let (subspace_sine, bipartition) = match (&balance, &basis) {
        (Balance::Balanced(bp), Some(basis)) => {
            let gauge = gauge_matrix(bp);
            let u = consensus_basis(&gauge, g.d);
            (subspace_distance(basis, &u), Some(bp.clone()))
        }
        (Balance::Balanced(bp), None) => (1.0, Some(bp.clone())),
        _ => (1.0, None),
    };
    let balanced = balance.is_balanced();
    Assumption1Report {
        balanced,
        bipartition,
        nullity,
        subspace_sine,
        holds: balanced && nullity == g.d && subspace_sine <= SUBSPACE_TOL,
    }
}

/// Orthonormal columns spanning `range(D*(1⊗I_d))`.
pub fn consensus_basis(gauge: &GaugeMatrix, d: usize) -> DMatrix<f64> {
    let n = gauge.n();
    let s = 1.0 / (n as f64).sqrt();
    DMatrix::from_fn(n * d, d, |r, c| if r % d == c { gauge.sign(r / d) * s } else { 0.0 })
}

/// `x̃ = D*(1 ⊗ (1/n)(1ᵀ⊗I_d) D* x(0))`.
pub fn predicted_bipartite_limit(g: &MatrixWeightedGraph, x0: &DVector<f64>) -> Result<DVector<f64>> {
    if x0.len() != g.n * g.d {
        return Err(Error::InvalidScenario(format!(
            "x0 has length {}, expected {}",
            x0.len(),
            g.n * g.d
        )));
    }
    let report = verify_assumption1(g);
    let bp = match (report.holds, report.bipartition) {
        (true, Some(bp)) => bp,
        _ => {
            return Err(Error::AssumptionViolated(format!(
                "balanced = {}, nullity = {} (need {})",
                report.balanced, report.nullity, g.d
            )))
        }
    };
    Ok(gauge_limit(&gauge_matrix(&bp), x0, g.d))
}

/// Closed-form limit for a known gauge, no assumption checking.
pub fn gauge_limit(gauge: &GaugeMatrix, x0: &DVector<f64>, d: usize) -> DVector<f64> {
    let n = gauge.n();
    let mut mean = DVector::zeros(d);
    for j in 0..n {
        mean += x0.rows(j * d, d) * gauge.sign(j);
    }
    mean /= n as f64;
    gauge.spread(&mean)
}

#[derive(Clone, Debug)]
pub struct Assumption2Report {
    /// Balance of the graph extended with one node per input.
    pub extended_balanced: bool,
    /// `Σₗ Σᵢ |Bᵢₗ|` is positive definite.
    pub input_mass_pd: bool,
    pub holds: bool,
}

fn extended_coloring(g: &MatrixWeightedGraph, b: &InputCoupling) -> std::result::Result<Vec<i8>, (usize, usize)> {
    let mut signed: Vec<_> = g.edges.iter().map(|e| (e.i, e.j, e.sign)).collect();
    signed.extend(b.entries().iter().map(|e| (e.agent, g.n + e.input, e.sign)));
    two_color(g.n + b.m(), &signed)
}

pub fn input_mass(g: &MatrixWeightedGraph, b: &InputCoupling) -> SymMatrix {
    b.entries()
        .iter()
        .fold(SymMatrix::zeros(g.d), |acc, e| acc.add(&e.abs))
}

pub fn verify_assumption2(g: &MatrixWeightedGraph, b: &InputCoupling) -> Assumption2Report {
    let extended_balanced = extended_coloring(g, b).is_ok();
    let mass = input_mass(g, b);
    let input_mass_pd = !b.is_empty()
        && linalg::classify_definiteness(&mass, g.tol) == DefinitenessClass::PositiveDefinite;
    Assumption2Report {
        extended_balanced,
        input_mass_pd,
        holds: extended_balanced && input_mass_pd,
    }
}

/// Gauge for the leader-follower target, oriented so that the input nodes
/// sit on the `+1` side.
pub fn leader_follower_gauge(g: &MatrixWeightedGraph, b: &InputCoupling) -> Result<GaugeMatrix> {
    if b.is_empty() {
        return Err(Error::AssumptionViolated("no input coupling".into()));
    }
    let colors = extended_coloring(g, b).map_err(|(u, v)| {
        Error::AssumptionViolated(format!(
            "extended graph is not structurally balanced (conflict at {} - {})",
            u + 1,
            v + 1
        ))
    })?;
    let inputs = &colors[g.n..];
    let used: Vec<i8> = b.entries().iter().map(|e| inputs[e.input]).collect();
    let s = used[0];
    if used.iter().any(|&c| c != s) {
        return Err(Error::AssumptionViolated(
            "inputs fall in opposite groups; a homogeneous input cannot be tracked".into(),
        ));
    }
    Ok(GaugeMatrix {
        signs: colors[..g.n].iter().map(|&c| c * s).collect(),
    })
}
