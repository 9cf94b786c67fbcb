//! Wall-clock summary across repeated runs: per-scheme decision passes plus
//! the two offline phases (exact solving, classifier training).

use std::io::Write;
use std::path::Path;

use crate::config::Config;
use crate::error::AppError;
use crate::experiment::{run_experiment, ExperimentParams};
use crate::report::Scheme;

pub const TIMING_HEADER: &str = "phase,runs,meanMs,stdMs";

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseStat {
    pub phase: &'static str,
    pub runs: usize,
    pub mean_ms: f64,
    pub std_ms: f64,
}

fn stat(phase: &'static str, samples: &[f64]) -> PhaseStat {
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let std = if n < 2 {
        0.0
    } else {
        let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1) as f64;
        var.sqrt()
    };
    PhaseStat {
        phase,
        runs: n,
        mean_ms: mean,
        std_ms: std,
    }
}

/// One full experiment per configured seed; every phase contributes one
/// sample per run.
pub fn run_timing(cfg: &Config) -> Result<Vec<PhaseStat>, AppError> {
    let base = ExperimentParams::from_config(cfg);
    let seeds = if cfg.sweep.seeds.is_empty() {
        vec![cfg.seed]
    } else {
        cfg.sweep.seeds.clone()
    };

    let mut solve = Vec::new();
    let mut infer = Vec::new();
    let mut train = Vec::new();
    let mut fact = Vec::new();
    let mut cfs = Vec::new();
    let mut util = Vec::new();
    let mut rands = Vec::new();
    for &seed in &seeds {
        let mut p = base.clone();
        p.master_seed = seed;
        let run = run_experiment(&p)?;
        for row in &run.rows {
            match row.scheme {
                Scheme::Optim => solve.push(row.solve_ms),
                Scheme::Lstm => {
                    infer.push(row.infer_ms);
                    train.push(row.train_ms);
                }
                Scheme::Fact => fact.push(row.solve_ms),
                Scheme::Cfs => cfs.push(row.solve_ms),
                Scheme::Util => util.push(row.solve_ms),
                Scheme::RandS => rands.push(row.solve_ms),
            }
        }
    }

    Ok(vec![
        stat("solveOptim", &solve),
        stat("lstmInferRepair", &infer),
        stat("train", &train),
        stat("fact", &fact),
        stat("cfs", &cfs),
        stat("util", &util),
        stat("rands", &rands),
    ])
}

pub fn write_timing_csv(path: &Path, stats: &[PhaseStat]) -> Result<(), AppError> {
    let mut text = String::from(TIMING_HEADER);
    text.push('\n');
    for s in stats {
        text.push_str(&format!(
            "{},{},{:.6},{:.6}\n",
            s.phase, s.runs, s.mean_ms, s.std_ms
        ));
    }
    let mut f = std::fs::File::create(path).map_err(AppError::io(path))?;
    f.write_all(text.as_bytes()).map_err(AppError::io(path))
}
