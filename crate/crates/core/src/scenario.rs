//! Scenarios and their JSON interchange format.
//!
//! ```json
//! {
//!   "graph":   { "n": 2, "d": 1, "weight_tol": 1e-9,
//!                "edges":  [{ "i": 1, "j": 2, "weight": [1.0], "class": "pd" }],
//!                "inputs": [{ "agent": 1, "input": 1, "weight": [1.0] }] },
//!   "mode":    { "kind": "leader-follower", "u0": [0.5] },
//!   "params":  { "default": { "sigma": 0.9, "theta": 1.0, "beta": 1.0, "delta": 1.0, "chi0": 0.5 },
//!                "agents": { "2": { "theta": 2.0 } } },
//!   "sim":     { "dt": 0.001, "T": 10.0, "seed": 7, "x0": "uniform[-1,1]", "baseline": "dynamic" },
//!   "outputs": { "directory": "runs", "formats": ["csv", "json"] }
//! }
//! ```
//!
//! Node, input and agent indices in the file are 1-based. Unknown keys are
//! rejected everywhere.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::{
    self, EdgeSpec, GaugeMatrix, InputCoupling, InputSpec, MatrixWeightedGraph,
};
use crate::linalg::{self, DefinitenessClass, SymMatrix};
use crate::trigger::{self, Baseline, Mode, TriggerParams};

pub const UNIFORM_X0: &str = "uniform[-1,1]";

#[derive(Clone, Debug, PartialEq)]
pub enum X0Spec {
    /// Every component drawn from `U[-1, 1]` with the scenario seed.
    Uniform,
    Explicit(Vec<f64>),
}

impl Serialize for X0Spec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            X0Spec::Uniform => s.serialize_str(UNIFORM_X0),
            X0Spec::Explicit(v) => v.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for X0Spec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Name(String),
            Values(Vec<f64>),
        }
        match Raw::deserialize(d)? {
            Raw::Name(s) if s == UNIFORM_X0 => Ok(X0Spec::Uniform),
            Raw::Name(s) => Err(serde::de::Error::custom(format!(
                "x0 must be \"{UNIFORM_X0}\" or an array, got \"{s}\""
            ))),
            Raw::Values(v) => Ok(X0Spec::Explicit(v)),
        }
    }
}

pub fn uniform_x0(len: usize, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DVector::from_fn(len, |_, _| rng.random_range(-1.0..=1.0))
}

/// A fully resolved, validated simulation setup.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub graph: MatrixWeightedGraph,
    pub mode: Mode,
    pub params: Vec<TriggerParams>,
    pub x0_spec: X0Spec,
    pub x0: DVector<f64>,
    pub dt: f64,
    pub horizon: f64,
    pub seed: Option<u64>,
    pub baseline: Baseline,
}

impl Scenario {
    /// Resolves `x0` and checks dimensions, step settings and trigger
    /// parameters. Graph assumptions are checked separately by
    /// [`Scenario::check_assumptions`].
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        graph: MatrixWeightedGraph,
        mode: Mode,
        params: Vec<TriggerParams>,
        x0_spec: X0Spec,
        dt: f64,
        horizon: f64,
        seed: Option<u64>,
        baseline: Baseline,
    ) -> Result<Self> {
        let nd = graph.n() * graph.d();
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidScenario(format!("dt = {dt} must be positive")));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidScenario(format!("T = {horizon} must be positive")));
        }
        if dt > horizon {
            return Err(Error::InvalidScenario(format!("dt = {dt} exceeds T = {horizon}")));
        }
        if let Mode::LeaderFollower { u0, .. } = &mode {
            if u0.len() != graph.d() {
                return Err(Error::InvalidScenario(format!(
                    "u0 has length {}, expected d = {}",
                    u0.len(),
                    graph.d()
                )));
            }
            if u0.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidScenario("u0 is not finite".into()));
            }
        }
        trigger::validate_params(&params, graph.n()).map_err(Error::InvalidParams)?;
        let x0 = match &x0_spec {
            X0Spec::Uniform => uniform_x0(nd, seed.unwrap_or(0)),
            X0Spec::Explicit(v) => {
                if v.len() != nd {
                    return Err(Error::InvalidScenario(format!(
                        "x0 has length {}, expected n*d = {nd}",
                        v.len()
                    )));
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::InvalidScenario("x0 is not finite".into()));
                }
                DVector::from_column_slice(v)
            }
        };
        Ok(Scenario {
            graph,
            mode,
            params,
            x0_spec,
            x0,
            dt,
            horizon,
            seed,
            baseline,
        })
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn d(&self) -> usize {
        self.graph.d()
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt - 1e-9).ceil().max(1.0) as usize
    }

    /// Assumption 1 in both modes, plus Assumption 2 and a consistent input
    /// orientation in leader-follower mode. Returns the gauge the analysis
    /// uses.
    pub fn check_assumptions(&self) -> Result<GaugeMatrix> {
        let a1 = graph::verify_assumption1(&self.graph);
        if !a1.holds {
            return Err(Error::AssumptionViolated(format!(
                "assumption 1 fails: balanced = {}, nullity = {} (need {}), subspace sine = {:e}",
                a1.balanced,
                a1.nullity,
                self.d(),
                a1.subspace_sine
            )));
        }
        match &self.mode {
            Mode::Leaderless => Ok(graph::gauge_matrix(
                a1.bipartition.as_ref().expect("balanced graph has a bipartition"),
            )),
            Mode::LeaderFollower { coupling, .. } => {
                let a2 = graph::verify_assumption2(&self.graph, coupling);
                if !a2.holds {
                    return Err(Error::AssumptionViolated(format!(
                        "assumption 2 fails: extended graph balanced = {}, input mass PD = {}",
                        a2.extended_balanced, a2.input_mass_pd
                    )));
                }
                graph::leader_follower_gauge(&self.graph, coupling)
            }
        }
    }

    /// Hex digest of the canonical file form with the seed removed.
    pub fn hash(&self) -> String {
        let mut f = ScenarioFile::from_scenario(self);
        f.sim.seed = None;
        f.outputs = OutputsSection::default();
        let bytes = serde_json::to_vec(&f).expect("scenario serializes");
        let digest = Sha256::digest(&bytes);
        hex::encode(&digest[..8])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub graph: GraphSection,
    pub mode: ModeSection,
    pub params: ParamsSection,
    pub sim: SimSection,
    #[serde(default)]
    pub outputs: OutputsSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSection {
    pub n: usize,
    pub d: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_tol: Option<f64>,
    #[serde(default)]
    pub edges: Vec<EdgeEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub inputs: Vec<InputEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeEntry {
    pub i: usize,
    pub j: usize,
    /// Row-major `d·d`.
    pub weight: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<DefinitenessClass>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputEntry {
    pub agent: usize,
    pub input: usize,
    pub weight: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<DefinitenessClass>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModeSection {
    Leaderless,
    LeaderFollower { u0: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub default: TriggerParams,
    /// 1-based agent → partial override.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub agents: BTreeMap<usize, ParamOverride>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamOverride {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi0: Option<f64>,
}

impl ParamOverride {
    fn apply(&self, base: TriggerParams) -> TriggerParams {
        TriggerParams {
            sigma: self.sigma.unwrap_or(base.sigma),
            theta: self.theta.unwrap_or(base.theta),
            beta: self.beta.unwrap_or(base.beta),
            delta: self.delta.unwrap_or(base.delta),
            chi0: self.chi0.unwrap_or(base.chi0),
        }
    }

    fn diff(base: &TriggerParams, p: &TriggerParams) -> Self {
        let pick = |a: f64, b: f64| (a != b).then_some(b);
        ParamOverride {
            sigma: pick(base.sigma, p.sigma),
            theta: pick(base.theta, p.theta),
            beta: pick(base.beta, p.beta),
            delta: pick(base.delta, p.delta),
            chi0: pick(base.chi0, p.chi0),
        }
    }

    fn is_empty(&self) -> bool {
        *self == ParamOverride::default()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub dt: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub x0: X0Spec,
    #[serde(default)]
    pub baseline: Baseline,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<String>,
    #[serde(default = "default_formats")]
    pub formats: Vec<OutputFormat>,
}

fn default_formats() -> Vec<OutputFormat> {
    vec![OutputFormat::Csv, OutputFormat::Json]
}

impl Default for OutputsSection {
    fn default() -> Self {
        OutputsSection {
            directory: None,
            formats: default_formats(),
        }
    }
}

fn one_based(k: usize, what: &str, limit: usize) -> Result<usize> {
    if k == 0 || k > limit {
        Err(Error::InvalidScenario(format!("{what} index {k} outside 1..={limit}")))
    } else {
        Ok(k - 1)
    }
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut s = self.to_json();
        s.push('\n');
        std::fs::write(path, s)?;
        Ok(())
    }

    pub fn build_graph(&self) -> Result<MatrixWeightedGraph> {
        let g = &self.graph;
        let specs = g
            .edges
            .iter()
            .enumerate()
            .map(|(k, e)| {
                let ctx = |err: Error| Error::InvalidScenario(format!("graph.edges[{k}]: {err}"));
                Ok(EdgeSpec {
                    i: one_based(e.i, "node", g.n).map_err(ctx)?,
                    j: one_based(e.j, "node", g.n).map_err(ctx)?,
                    weight: SymMatrix::from_row_major(g.d, &e.weight).map_err(ctx)?,
                    class: e.class,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        MatrixWeightedGraph::new(g.n, g.d, specs, g.weight_tol.unwrap_or(linalg::DEFAULT_TOL))
    }

    pub fn build_coupling(&self, graph: &MatrixWeightedGraph) -> Result<InputCoupling> {
        let g = &self.graph;
        let specs = g
            .inputs
            .iter()
            .enumerate()
            .map(|(k, e)| {
                let ctx = |err: Error| Error::InvalidScenario(format!("graph.inputs[{k}]: {err}"));
                Ok(InputSpec {
                    agent: one_based(e.agent, "agent", g.n).map_err(ctx)?,
                    input: one_based(e.input, "input", usize::MAX).map_err(ctx)?,
                    weight: SymMatrix::from_row_major(g.d, &e.weight).map_err(ctx)?,
                    class: e.class,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        InputCoupling::new(graph, specs)
    }

    pub fn resolve_params(&self) -> Result<Vec<TriggerParams>> {
        let n = self.graph.n;
        let mut out = vec![self.params.default; n];
        for (&k, o) in &self.params.agents {
            let i = one_based(k, "params.agents", n)?;
            out[i] = o.apply(out[i]);
        }
        Ok(out)
    }

    pub fn to_scenario(&self) -> Result<Scenario> {
        let graph = self.build_graph()?;
        let mode = match &self.mode {
            ModeSection::Leaderless => Mode::Leaderless,
            ModeSection::LeaderFollower { u0 } => {
                let coupling = self.build_coupling(&graph)?;
                Mode::LeaderFollower {
                    u0: DVector::from_column_slice(u0),
                    coupling,
                }
            }
        };
        Scenario::new(
            graph,
            mode,
            self.resolve_params()?,
            self.sim.x0.clone(),
            self.sim.dt,
            self.sim.horizon,
            self.sim.seed,
            self.sim.baseline,
        )
    }

    /// Canonical file form of a scenario. Inverse of [`Self::to_scenario`].
    pub fn from_scenario(s: &Scenario) -> Self {
        let g = &s.graph;
        let edges = g
            .edges()
            .iter()
            .map(|e| EdgeEntry {
                i: e.i + 1,
                j: e.j + 1,
                weight: e.weight.row_major(),
                class: None,
            })
            .collect();
        let (mode, inputs) = match &s.mode {
            Mode::Leaderless => (ModeSection::Leaderless, Vec::new()),
            Mode::LeaderFollower { u0, coupling } => (
                ModeSection::LeaderFollower {
                    u0: u0.iter().copied().collect(),
                },
                coupling
                    .entries()
                    .iter()
                    .map(|e| InputEntry {
                        agent: e.agent + 1,
                        input: e.input + 1,
                        weight: e.weight.row_major(),
                        class: None,
                    })
                    .collect(),
            ),
        };
        let default = s.params[0];
        let agents = s
            .params
            .iter()
            .enumerate()
            .map(|(i, p)| (i + 1, ParamOverride::diff(&default, p)))
            .filter(|(_, o)| !o.is_empty())
            .collect();
        ScenarioFile {
            graph: GraphSection {
                n: g.n(),
                d: g.d(),
                weight_tol: (g.tol() != linalg::DEFAULT_TOL).then_some(g.tol()),
                edges,
                inputs,
            },
            mode,
            params: ParamsSection { default, agents },
            sim: SimSection {
                dt: s.dt,
                horizon: s.horizon,
                seed: s.seed,
                x0: s.x0_spec.clone(),
                baseline: s.baseline,
            },
            outputs: OutputsSection::default(),
        }
    }
}

impl fmt::Display for ScenarioFile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_json())
    }
}
