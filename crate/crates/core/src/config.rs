//! JSON run configuration shared by every command.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::bounds::BoundParams;
use crate::distributions::DistributionSpec;
use crate::error::{Error, Result};
use crate::kernel::{KernelLabel, ThetaSpec};
use crate::paths::DEFAULT_BUDGET;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Kernel,
    Stationary,
    Mix,
    Simulate,
    Paths,
    Bounds,
    Scaling,
    VerifyAll,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub stationarity: f64,
    pub row_sum: f64,
    pub oracle: f64,
    pub paths: f64,
    pub recurrence: f64,
    /// Relative error allowed for the simulated mean return time.
    pub empirical_mean: f64,
    pub curve: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            stationarity: 1e-12,
            row_sum: 1e-15,
            oracle: 1e-15,
            paths: 1e-12,
            recurrence: 1e-12,
            empirical_mean: 0.05,
            curve: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    pub distribution: DistributionSpec,
    pub sampler: KernelLabel,
    pub theta: ThetaSpec,
    pub seed: u64,
    pub delta: f64,
    /// Simulation length.
    pub steps: usize,
    pub excursions: usize,
    /// Path length for enumeration.
    pub length: usize,
    pub budget: u64,
    /// Excursion length cap for the exact flip law; `50 n` when absent.
    pub l_cap: Option<usize>,
    /// Mixing-time step cap; per-sampler default when absent.
    pub t_cap: Option<usize>,
    pub n_list: Vec<usize>,
    pub bounds: BoundParams,
    pub tolerances: Tolerances,
    /// Output directory; falls back to `LIFTMIX_OUT_DIR`, then `.`.
    pub out_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: Command::VerifyAll,
            distribution: DistributionSpec::family(crate::Family::SymmetricTent, 5),
            sampler: KernelLabel::Dhn,
            theta: ThetaSpec::InverseN,
            seed: 2024,
            delta: 0.25,
            steps: 100_000,
            excursions: 100_000,
            length: 6,
            budget: DEFAULT_BUDGET,
            l_cap: None,
            t_cap: None,
            n_list: vec![11, 15, 21, 31, 41],
            bounds: BoundParams::default(),
            tolerances: Tolerances::default(),
            out_dir: None,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidParam {
            name: "config".into(),
            reason: e.to_string(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn l_cap_for(&self, n: usize) -> usize {
        self.l_cap.unwrap_or(50 * n)
    }
}
