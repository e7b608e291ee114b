//! Where a scenario comes from: a file or one of the built-in replications.

use std::path::Path;

use mwconsensus::builtin::{self, A12Variant};
use mwconsensus::{Baseline, ScenarioFile};

pub const LEADERLESS: &str = "paper:leaderless";
pub const LEADER_FOLLOWER: &str = "paper:lf";

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Which {
    Leaderless,
    Lf,
}

impl Which {
    pub fn source(self) -> &'static str {
        match self {
            Which::Leaderless => LEADERLESS,
            Which::Lf => LEADER_FOLLOWER,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub dt: Option<f64>,
    pub horizon: Option<f64>,
    pub seed: Option<u64>,
    pub baseline: Option<Baseline>,
}

impl Overrides {
    pub fn apply(&self, f: &mut ScenarioFile) {
        if let Some(dt) = self.dt {
            f.sim.dt = dt;
        }
        if let Some(t) = self.horizon {
            f.sim.horizon = t;
        }
        if let Some(s) = self.seed {
            f.sim.seed = Some(s);
        }
        if let Some(b) = self.baseline {
            f.sim.baseline = b;
        }
    }
}

/// Loads `src`, which is either a path or `paper:leaderless` / `paper:lf`.
pub fn load(src: &str, a12: A12Variant) -> mwconsensus::Result<ScenarioFile> {
    let scenario = match src {
        LEADERLESS => builtin::leaderless(0, a12)?,
        LEADER_FOLLOWER => builtin::leader_follower(0, a12)?,
        path => return ScenarioFile::load(Path::new(path)),
    };
    Ok(ScenarioFile::from_scenario(&scenario))
}
