//! JSON run configuration. Unknown keys are rejected so typos fail loudly
//! instead of silently falling back to defaults.

use std::path::Path;

use edgemar_core::topology::DEFAULT_CAPACITY_UNITS;
use edgemar_core::workload::{DEFAULT_ARO_MAX_BYTES, DEFAULT_ARO_MIN_BYTES};
use serde::{Deserialize, Serialize};

use crate::error::AppError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase", default)]
pub struct Config {
    pub seed: u64,
    pub topology: TopologySection,
    pub delay: DelaySection,
    pub workload: WorkloadSection,
    pub train: TrainSection,
    pub sweep: SweepSection,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: 1,
            topology: TopologySection::default(),
            delay: DelaySection::default(),
            workload: WorkloadSection::default(),
            train: TrainSection::default(),
            sweep: SweepSection::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase", default)]
pub struct TopologySection {
    pub ec_sites: u32,
    pub active_count: u32,
    pub arity: u32,
    pub capacity_units: u32,
    /// When set, every EC site gets this core count instead of the seeded
    /// draw. Needed for runs that compare schemes on homogeneous hardware.
    pub uniform_cores: Option<u32>,
}

impl Default for TopologySection {
    fn default() -> Self {
        TopologySection {
            ec_sites: 20,
            active_count: 6,
            arity: 4,
            capacity_units: DEFAULT_CAPACITY_UNITS,
            uniform_cores: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase", default)]
pub struct DelaySection {
    pub per_hop_ms: f64,
    pub work_eta: f64,
    pub work_rho: f64,
    pub cloud_penalty_ms: f64,
    pub w_comp: f64,
    pub w_net: f64,
}

impl Default for DelaySection {
    fn default() -> Self {
        DelaySection {
            per_hop_ms: 1.0,
            work_eta: 60.0,
            work_rho: 30.0,
            cloud_penalty_ms: 50.0,
            w_comp: 1.0,
            w_net: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase", default)]
pub struct WorkloadSection {
    pub request_count: u32,
    pub aro_min_bytes: u64,
    pub aro_max_bytes: u64,
    /// Pins every user to its source (stay probability 1).
    pub freeze_mobility: bool,
}

impl Default for WorkloadSection {
    fn default() -> Self {
        WorkloadSection {
            request_count: 30,
            aro_min_bytes: DEFAULT_ARO_MIN_BYTES,
            aro_max_bytes: DEFAULT_ARO_MAX_BYTES,
            freeze_mobility: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase", default)]
pub struct TrainSection {
    pub lr: f64,
    pub epochs: u32,
    pub batch: usize,
    pub hidden: usize,
    pub drop_rate: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            lr: 0.005,
            epochs: 160,
            batch: 16,
            hidden: 80,
            drop_rate: 0.05,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase", default)]
pub struct SweepSection {
    /// Master seeds; every sweep point runs once per seed.
    pub seeds: Vec<u64>,
    /// Overrides the axis defaults when present.
    pub axis_values: Option<Vec<u64>>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            seeds: vec![1, 2, 3],
            axis_values: None,
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Config, AppError> {
        let text = std::fs::read_to_string(path).map_err(AppError::io(path))?;
        serde_json::from_str(&text).map_err(|e| AppError::Config {
            path: path.display().to_string(),
            msg: e.to_string(),
        })
    }
}
