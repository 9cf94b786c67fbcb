//! Parameter sweeps over one axis, averaged over the configured seeds.

use rayon::prelude::*;

use crate::config::Config;
use crate::error::AppError;
use crate::experiment::{run_experiment, ExperimentParams};
use crate::report::MetricRow;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Capacity,
    NumEc,
    NumRequests,
    Mobility,
}

impl Axis {
    pub fn parse(name: &str) -> Result<Axis, AppError> {
        match name {
            "capacity" => Ok(Axis::Capacity),
            "numEC" => Ok(Axis::NumEc),
            "numRequests" => Ok(Axis::NumRequests),
            "mobility" => Ok(Axis::Mobility),
            _ => Err(AppError::Usage(format!(
                "unknown axis {name:?}; expected capacity, numEC, numRequests or mobility"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Axis::Capacity => "capacity",
            Axis::NumEc => "numEC",
            Axis::NumRequests => "numRequests",
            Axis::Mobility => "mobility",
        }
    }

    pub fn default_values(self) -> Vec<u64> {
        match self {
            Axis::Capacity => vec![10, 11, 12, 13, 14],
            Axis::NumEc => vec![5, 6, 7, 8],
            Axis::NumRequests => vec![10, 20, 30, 40],
            // 0 keeps the configured mobility, 1 pins every user in place.
            Axis::Mobility => vec![0, 1],
        }
    }

    /// The swept parameter replaces its field; everything else comes from
    /// the config.
    fn apply(self, base: &ExperimentParams, value: u64) -> Result<ExperimentParams, AppError> {
        let mut p = base.clone();
        match self {
            Axis::Capacity => p.capacity_units = clamp_u32(self, value)?,
            Axis::NumEc => p.active_count = clamp_u32(self, value)?,
            Axis::NumRequests => p.request_count = clamp_u32(self, value)?,
            Axis::Mobility => {
                p.freeze_mobility = match value {
                    0 => false,
                    1 => true,
                    _ => {
                        return Err(AppError::Usage(
                            "mobility axis values must be 0 or 1".to_string(),
                        ))
                    }
                }
            }
        }
        Ok(p)
    }
}

fn clamp_u32(axis: Axis, value: u64) -> Result<u32, AppError> {
    u32::try_from(value)
        .map_err(|_| AppError::Usage(format!("{} value {} out of range", axis.name(), value)))
}

/// Every (axis value, seed) experiment, rows in a fixed order: axis values
/// as given, seeds as given, schemes canonical. With `keep_timings` off the
/// wall-clock columns are zeroed so identical runs emit identical bytes.
pub fn run_sweep(
    cfg: &Config,
    axis: Axis,
    parallel: usize,
    keep_timings: bool,
) -> Result<Vec<MetricRow>, AppError> {
    let base = ExperimentParams::from_config(cfg);
    let values = cfg
        .sweep
        .axis_values
        .clone()
        .unwrap_or_else(|| axis.default_values());
    if values.is_empty() {
        return Err(AppError::Usage("axisValues must not be empty".to_string()));
    }
    let seeds = if cfg.sweep.seeds.is_empty() {
        vec![cfg.seed]
    } else {
        cfg.sweep.seeds.clone()
    };

    let mut jobs = Vec::with_capacity(values.len() * seeds.len());
    for &value in &values {
        for &seed in &seeds {
            let mut p = axis.apply(&base, value)?;
            p.master_seed = seed;
            jobs.push(p);
        }
    }

    let results: Vec<Result<Vec<MetricRow>, AppError>> = if parallel > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(parallel)
            .build()
            .map_err(|e| AppError::Usage(format!("cannot build worker pool: {e}")))?;
        pool.install(|| jobs.par_iter().map(|p| Ok(run_experiment(p)?.rows)).collect())
    } else {
        jobs.iter().map(|p| Ok(run_experiment(p)?.rows)).collect()
    };

    let mut rows = Vec::with_capacity(jobs.len() * 6);
    for result in results {
        let mut batch = result?;
        if !keep_timings {
            for row in &mut batch {
                row.zero_timings();
            }
        }
        rows.append(&mut batch);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_names_round_trip() {
        for name in ["capacity", "numEC", "numRequests", "mobility"] {
            assert_eq!(Axis::parse(name).unwrap().name(), name);
        }
        assert!(matches!(Axis::parse("Capacity"), Err(AppError::Usage(_))));
    }

    #[test]
    fn apply_touches_only_the_swept_field() {
        let base = ExperimentParams::from_config(&Config::default());
        let p = Axis::Capacity.apply(&base, 10).unwrap();
        assert_eq!(p.capacity_units, 10);
        assert_eq!(p.active_count, base.active_count);
        assert_eq!(p.request_count, base.request_count);

        let p = Axis::Mobility.apply(&base, 1).unwrap();
        assert!(p.freeze_mobility);
        assert!(matches!(
            Axis::Mobility.apply(&base, 2),
            Err(AppError::Usage(_))
        ));
        assert!(matches!(
            Axis::Capacity.apply(&base, u64::from(u32::MAX) + 1),
            Err(AppError::Usage(_))
        ));
    }
}
