//! Subcommand bodies. Each returns a one-line JSON summary for stdout.

use std::path::Path;
use std::time::Instant;

use edgemar_core::heuristics::{cfs, fact, rand_s, util, UTIL_THRESHOLD};
use edgemar_core::pipeline::{split_dataset, DatasetEntry, Split};
use edgemar_core::placement::ServiceDecision;
use edgemar_core::rng::derive_seed;
use edgemar_core::seqnet::{train, ModelParams, TrainConfig};
use edgemar_core::solver::{solve_exhaustive, solve_optimal};
use edgemar_core::workload::Request;
use edgemar_core::{NodeId, RequestId};
use serde_json::{json, Value};

use crate::config::Config;
use crate::error::AppError;
use crate::experiment::{run_experiment, ExperimentParams};
use crate::formats::{
    plan_rows_from_decisions, read_plans, save_checkpoint, write_manifest, write_plans,
    write_requests, write_topology, write_trace, ParamsEcho, PlanRow, SolveManifest,
};
use crate::report::write_metric_csv;
use crate::sweep::{run_sweep, Axis};
use crate::timing::{run_timing, write_timing_csv};

pub fn cmd_generate(cfg: &Config, out: &Path) -> Result<Value, AppError> {
    let p = ExperimentParams::from_config(cfg);
    let t = p.build_topology()?;
    let scenario_seed = p.scenario_seeds()[0];
    let requests = p.build_requests(&t, scenario_seed)?;

    let topology_path = out.join("topology.json");
    let requests_path = out.join("requests.jsonl");
    write_topology(&topology_path, &t)?;
    write_requests(&requests_path, &requests)?;
    Ok(json!({
        "topology": topology_path,
        "requests": requests_path,
        "scenarioSeed": scenario_seed,
    }))
}

/// Schemes the solve command accepts; a superset of the report schemes
/// because the brute-force reference solver is reachable here too.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SolveKind {
    Optim,
    Exhaustive,
    Fact,
    Cfs,
    Util,
    Rands,
}

impl SolveKind {
    fn parse(name: &str) -> Result<SolveKind, AppError> {
        match name.to_ascii_lowercase().as_str() {
            "optim" => Ok(SolveKind::Optim),
            "exhaustive" => Ok(SolveKind::Exhaustive),
            "fact" => Ok(SolveKind::Fact),
            "cfs" => Ok(SolveKind::Cfs),
            "util" => Ok(SolveKind::Util),
            "rands" => Ok(SolveKind::Rands),
            _ => Err(AppError::Usage(format!(
                "unknown scheme {name:?}; expected optim, exhaustive, fact, cfs, util or rands"
            ))),
        }
    }

    fn name(self) -> &'static str {
        match self {
            SolveKind::Optim => "optim",
            SolveKind::Exhaustive => "exhaustive",
            SolveKind::Fact => "fact",
            SolveKind::Cfs => "cfs",
            SolveKind::Util => "util",
            SolveKind::Rands => "rands",
        }
    }
}

pub fn cmd_solve(cfg: &Config, out: &Path, scheme: &str) -> Result<Value, AppError> {
    let kind = SolveKind::parse(scheme)?;
    let p = ExperimentParams::from_config(cfg);
    let t = p.build_topology()?;
    let scenario_seed = p.scenario_seeds()[0];
    let requests = p.build_requests(&t, scenario_seed)?;

    let started = Instant::now();
    let (rows, objective_ms) = match kind {
        SolveKind::Optim => {
            let sol = solve_optimal(&t, &p.delay, &requests).map_err(AppError::stage("solve"))?;
            let rows = sol.plans.iter().map(PlanRow::from_route_plan).collect();
            (rows, sol.objective_ms)
        }
        SolveKind::Exhaustive => {
            let sol =
                solve_exhaustive(&t, &p.delay, &requests).map_err(AppError::stage("solve"))?;
            let rows = sol.plans.iter().map(PlanRow::from_route_plan).collect();
            (rows, sol.objective_ms)
        }
        SolveKind::Fact => {
            let plans = fact(&t, &p.delay, &requests).map_err(AppError::stage("solve"))?;
            let decisions: Vec<ServiceDecision> = plans
                .iter()
                .map(|plan| ServiceDecision {
                    request: plan.request,
                    assignment: Some(plan.assignment()),
                })
                .collect();
            decide(&t, &p, &requests, decisions)?
        }
        SolveKind::Cfs => {
            let d = cfs(&t, &p.delay, &requests).map_err(AppError::stage("solve"))?;
            decide(&t, &p, &requests, d)?
        }
        SolveKind::Util => {
            let d = util(&t, &p.delay, &requests, UTIL_THRESHOLD)
                .map_err(AppError::stage("solve"))?;
            decide(&t, &p, &requests, d)?
        }
        SolveKind::Rands => {
            let d = rand_s(
                &t,
                &p.delay,
                &requests,
                derive_seed(p.master_seed, "rands", 0),
            )
            .map_err(AppError::stage("solve"))?;
            decide(&t, &p, &requests, d)?
        }
    };
    let solve_wall_ms = started.elapsed().as_secs_f64() * 1e3;

    let plans_path = out.join(format!("plans_{}.jsonl", kind.name()));
    let manifest_path = out.join(format!("manifest_{}.json", kind.name()));
    write_plans(&plans_path, &rows)?;
    write_manifest(
        &manifest_path,
        &SolveManifest {
            seed: p.master_seed,
            scheme: kind.name().to_string(),
            params: ParamsEcho::from_params(&p),
            objective_ms,
            solve_wall_ms,
        },
    )?;
    Ok(json!({
        "plans": plans_path,
        "manifest": manifest_path,
        "objectiveMs": objective_ms,
        "solveWallMs": solve_wall_ms,
    }))
}

/// Plans plus summed expected delay for heuristic decisions.
fn decide(
    t: &edgemar_core::topology::Topology,
    p: &ExperimentParams,
    requests: &[Request],
    decisions: Vec<ServiceDecision>,
) -> Result<(Vec<PlanRow>, f64), AppError> {
    let mut total = 0.0;
    let lookup: std::collections::BTreeMap<_, _> = requests.iter().map(|r| (r.id, r)).collect();
    for d in &decisions {
        let r = lookup.get(&d.request).ok_or(AppError::Stage {
            stage: "solve",
            err: edgemar_core::Error::InvalidParameter("decision for an unknown request"),
        })?;
        total += edgemar_core::placement::decision_delay(t, &p.delay, r, d)
            .map_err(AppError::stage("solve"))?;
    }
    Ok((plan_rows_from_decisions(t, requests, &decisions)?, total))
}

pub fn cmd_train(cfg: &Config, out: &Path, dataset: Option<&Path>) -> Result<Value, AppError> {
    let p = ExperimentParams::from_config(cfg);
    let (model, trace, train_cfg) = match dataset {
        None => {
            let run = run_experiment(&p)?;
            let cfg = TrainConfig {
                initial_learn_rate: p.learn_rate,
                max_epochs: p.epochs,
                batch_size: p.batch,
                seed: derive_seed(p.master_seed, "train", 0),
                ..TrainConfig::default()
            };
            (run.model, run.trace, cfg)
        }
        Some(path) => {
            let t = p.build_topology()?;
            let mut entries = Vec::new();
            for row in read_plans(path)? {
                if row.class_index == 0 {
                    return Err(AppError::Format {
                        path: path.display().to_string(),
                        msg: format!("request {}: cloud plans carry no class label", row.request),
                    });
                }
                entries.push(DatasetEntry {
                    x: [NodeId(row.route[0]), NodeId(row.route[3])],
                    y: row.class_index,
                    request: RequestId(row.request),
                    scenario_seed: 0,
                    split: Split::Train,
                });
            }
            let ds = split_dataset(entries, derive_seed(p.master_seed, "dataset", 0));
            let train_set = ds.samples(&t, Split::Train).map_err(AppError::stage("dataset"))?;
            let test_set = ds.samples(&t, Split::Test).map_err(AppError::stage("dataset"))?;
            let m = t.active_ecs().len();
            let model0 = ModelParams::init(
                t.leaves().len(),
                p.hidden,
                m * m,
                p.drop_rate,
                derive_seed(p.master_seed, "model", 0),
            )
            .map_err(AppError::stage("model"))?;
            let cfg = TrainConfig {
                initial_learn_rate: p.learn_rate,
                max_epochs: p.epochs,
                batch_size: p.batch,
                seed: derive_seed(p.master_seed, "train", 0),
                ..TrainConfig::default()
            };
            let (model, trace) =
                train(model0, &cfg, &train_set, &test_set).map_err(AppError::stage("train"))?;
            (model, trace, cfg)
        }
    };

    let checkpoint_path = out.join("checkpoint.json");
    let trace_path = out.join("trace.csv");
    save_checkpoint(&checkpoint_path, &model, &train_cfg, p.master_seed)?;
    write_trace(&trace_path, &trace)?;
    let last = trace.last();
    Ok(json!({
        "checkpoint": checkpoint_path,
        "trace": trace_path,
        "epochs": trace.len(),
        "finalTrainAccPct": last.map(|e| e.train_acc_pct),
        "finalValAccPct": last.map(|e| e.val_acc_pct),
    }))
}

pub fn cmd_sweep(
    cfg: &Config,
    out: &Path,
    axis: &str,
    parallel: usize,
    keep_timings: bool,
) -> Result<Value, AppError> {
    let axis = Axis::parse(axis)?;
    let rows = run_sweep(cfg, axis, parallel, keep_timings)?;
    let csv_path = out.join(format!("sweep_{}.csv", axis.name()));
    write_metric_csv(&csv_path, &rows)?;
    Ok(json!({ "csv": csv_path, "rows": rows.len() }))
}

pub fn cmd_timing(cfg: &Config, out: &Path) -> Result<Value, AppError> {
    let stats = run_timing(cfg)?;
    let csv_path = out.join("timing.csv");
    write_timing_csv(&csv_path, &stats)?;
    Ok(json!({ "csv": csv_path, "phases": stats.len() }))
}
