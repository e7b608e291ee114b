//! Distributed dynamic event-triggered consensus on matrix-weighted networks.
//!
//! The crate covers both the leaderless protocol (bipartite consensus under
//! structural balance) and the leader-follower protocol (tracking of a
//! homogeneous input through the grounded Laplacian), together with the
//! analytics used to judge a run: Lyapunov traces, bipartite error,
//! auxiliary-variable floors and inter-event statistics.
//!
//! Layout, bottom-up:
//!
//! * [`linalg`]: symmetric matrices, eigendecomposition, definiteness,
//!   matrix absolute value / sign / square root.
//! * [`graph`]: matrix-weighted graphs, Laplacians, structural balance,
//!   gauge transformation and the two standing assumptions.
//! * [`trigger`]: control laws, triggering inequalities, auxiliary dynamics
//!   and parameter validation.
//! * [`sim`]: the hybrid fixed-step engine and trajectory records.
//! * [`analysis`]: post-run metrics.
//! * [`scenario`]: the scenario interchange format.
//! * [`builtin`]: the embedded six-agent network and its two reference
//!   scenarios (leaderless and leader-follower).
//! * [`exec`]: sequential / rayon-parallel execution switch.

pub mod analysis;
pub mod error;
pub mod exec;
pub mod graph;
pub mod linalg;
pub mod builtin;
pub mod scenario;
pub mod sim;
pub mod trigger;

pub use error::{Error, Result};
pub use exec::Execution;
pub use graph::{Bipartition, GaugeMatrix, InputCoupling, MatrixWeightedGraph};
pub use linalg::{DefinitenessClass, EigenDecomposition, SymMatrix};
pub use scenario::{Scenario, ScenarioFile};
pub use sim::{Engine, TrajectoryRecord};
pub use trigger::{Baseline, Mode, TriggerParams};
