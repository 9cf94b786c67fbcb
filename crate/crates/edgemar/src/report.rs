//! Per-scheme result rows and the fixed CSV schema they append to.

use std::io::Write;
use std::path::Path;

use crate::error::AppError;

/// Placement schemes in canonical report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scheme {
    Optim,
    Lstm,
    Fact,
    Cfs,
    Util,
    RandS,
}

impl Scheme {
    pub const ALL: [Scheme; 6] = [
        Scheme::Optim,
        Scheme::Lstm,
        Scheme::Fact,
        Scheme::Cfs,
        Scheme::Util,
        Scheme::RandS,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Optim => "Optim",
            Scheme::Lstm => "LSTM",
            Scheme::Fact => "FACT",
            Scheme::Cfs => "CFS",
            Scheme::Util => "UTIL",
            Scheme::RandS => "RandS",
        }
    }

    pub fn parse(name: &str) -> Option<Scheme> {
        // Accepts the CLI spellings; case-insensitive.
        match name.to_ascii_lowercase().as_str() {
            "optim" => Some(Scheme::Optim),
            "lstm" => Some(Scheme::Lstm),
            "fact" => Some(Scheme::Fact),
            "cfs" => Some(Scheme::Cfs),
            "util" => Some(Scheme::Util),
            "rands" => Some(Scheme::RandS),
            _ => None,
        }
    }
}

pub const CSV_HEADER: &str = "scheme,seed,numEC,numRequests,capacity,avgDelayMs,rmse,relErrPct,rSquared,accuracyPct,solveMs,trainMs,inferMs,repairCloudCount";

/// One CSV row. Timing columns hold wall-clock phase costs for the scheme
/// that owns the phase and 0 elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub scheme: Scheme,
    pub seed: u64,
    pub num_ec: u32,
    pub num_requests: u32,
    pub capacity: u32,
    pub avg_delay_ms: f64,
    pub rmse: f64,
    pub rel_err_pct: f64,
    pub r_squared: f64,
    pub accuracy_pct: f64,
    pub solve_ms: f64,
    pub train_ms: f64,
    pub infer_ms: f64,
    pub repair_cloud_count: u32,
}

impl MetricRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{}",
            self.scheme.name(),
            self.seed,
            self.num_ec,
            self.num_requests,
            self.capacity,
            self.avg_delay_ms,
            self.rmse,
            self.rel_err_pct,
            self.r_squared,
            self.accuracy_pct,
            self.solve_ms,
            self.train_ms,
            self.infer_ms,
            self.repair_cloud_count,
        )
    }

    /// Wall-clock columns vary run to run; zeroing them keeps result CSVs
    /// byte-comparable.
    pub fn zero_timings(&mut self) {
        self.solve_ms = 0.0;
        self.train_ms = 0.0;
        self.infer_ms = 0.0;
    }
}

pub fn write_metric_csv(path: &Path, rows: &[MetricRow]) -> Result<(), AppError> {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.csv_line());
        out.push('\n');
    }
    let mut f = std::fs::File::create(path).map_err(AppError::io(path))?;
    f.write_all(out.as_bytes()).map_err(AppError::io(path))
}
