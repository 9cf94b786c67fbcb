//! Dataset assembly from exact solutions, prediction repair against the
//! live ledger, and the evaluation metrics.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::Error;
use crate::fmath::{abs, sqrt};
use crate::placement::{
    decision_delay, Assignment, DelayParams, LoadLedger, RoutePlan, ServiceDecision,
};
use crate::rng::stream_rng;
use crate::seqnet::Sample;
use crate::solver::solve_optimal;
use crate::topology::Topology;
use crate::workload::{freeze_mobility, generate_requests_with, Request, WorkloadOptions};
use crate::{NodeId, RequestId};

/// Scenarios aggregated into one dataset.
pub const SCENARIO_COUNT: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

/// One supervised example: where the user starts and most likely goes, and
/// the class index the exact solver chose.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetEntry {
    /// [source AR, most likely destination AR]
    pub x: [NodeId; 2],
    pub y: u32,
    pub request: RequestId,
    pub scenario_seed: u64,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub entries: Vec<DatasetEntry>,
}

impl Dataset {
    pub fn train_entries(&self) -> Vec<&DatasetEntry> {
        self.entries.iter().filter(|e| e.split == Split::Train).collect()
    }

    pub fn test_entries(&self) -> Vec<&DatasetEntry> {
        self.entries.iter().filter(|e| e.split == Split::Test).collect()
    }

    /// One-hot samples for the classifier, width = leaf count.
    pub fn samples(&self, t: &Topology, split: Split) -> Result<Vec<Sample>, Error> {
        self.entries
            .iter()
            .filter(|e| e.split == split)
            .map(|e| {
                Ok(Sample {
                    x: encode_input(t, e.x)?,
                    label: e.y,
                })
            })
            .collect()
    }
}

/// Two one-hot steps over the leaf ARs: source first, destination second.
pub fn encode_input(t: &Topology, x: [NodeId; 2]) -> Result<Vec<Vec<f64>>, Error> {
    let width = t.leaves().len();
    let mut steps = Vec::with_capacity(2);
    for node in x {
        let pos = t.leaf_pos(node)? as usize;
        let mut row = alloc::vec![0.0; width];
        row[pos] = 1.0;
        steps.push(row);
    }
    Ok(steps)
}

/// Runs the exact solver once per scenario seed and collects (x, y) pairs,
/// shuffled by `dataset_seed` and tagged 90% train / 10% test with the test
/// share rounded down.
pub fn build_dataset(
    t: &Topology,
    p: &DelayParams,
    scenario_seeds: &[u64],
    request_count: u32,
    dataset_seed: u64,
) -> Result<Dataset, Error> {
    build_dataset_with(
        t,
        p,
        scenario_seeds,
        request_count,
        dataset_seed,
        &WorkloadOptions::default(),
        false,
    )
}

/// `build_dataset` with explicit workload options and an optional mobility
/// freeze (labels then come from the no-mobility optimum).
pub fn build_dataset_with(
    t: &Topology,
    p: &DelayParams,
    scenario_seeds: &[u64],
    request_count: u32,
    dataset_seed: u64,
    opts: &WorkloadOptions,
    freeze: bool,
) -> Result<Dataset, Error> {
    let mut entries = Vec::new();
    for &seed in scenario_seeds {
        let attach = |cause: Error| Error::Scenario {
            seed,
            cause: Box::new(cause),
        };
        let mut rs = generate_requests_with(t, request_count, seed, opts).map_err(attach)?;
        if freeze {
            rs = freeze_mobility(&rs);
        }
        let sol = solve_optimal(t, p, &rs).map_err(attach)?;
        for (r, plan) in rs.iter().zip(&sol.plans) {
            entries.push(DatasetEntry {
                x: [plan.route[0], plan.route[3]],
                y: plan.class_index,
                request: r.id,
                scenario_seed: seed,
                split: Split::Train,
            });
        }
    }
    Ok(split_dataset(entries, dataset_seed))
}

/// Shuffles the entries with a Fisher-Yates pass seeded by `dataset_seed`
/// and tags the trailing tenth (rounded down) as the test split.
pub fn split_dataset(mut entries: Vec<DatasetEntry>, dataset_seed: u64) -> Dataset {
    let mut rng = stream_rng(dataset_seed, "dataset-shuffle", 0);
    for i in (1..entries.len()).rev() {
        let j = rng.gen_range(0..=i);
        entries.swap(i, j);
    }
    let test = entries.len() / 10;
    let train = entries.len() - test;
    for (i, e) in entries.iter_mut().enumerate() {
        e.split = if i < train { Split::Train } else { Split::Test };
    }
    Dataset { entries }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RepairStatus {
    Direct,
    NeighborBackup,
    Cloud,
}

/// What happened to one predicted placement.
#[derive(Debug, Clone, PartialEq)]
pub struct RepairOutcome {
    pub request: RequestId,
    pub status: RepairStatus,
    /// `None` exactly when status is Cloud.
    pub assignment: Option<Assignment>,
    pub penalty_ms: f64,
}

impl RepairOutcome {
    pub fn decision(&self) -> ServiceDecision {
        ServiceDecision {
            request: self.request,
            assignment: self.assignment,
        }
    }
}

/// Active neighbors of `ec` ordered by current load, then leaf position.
fn least_loaded_neighbors(t: &Topology, ledger: &LoadLedger, ec: NodeId) -> Vec<NodeId> {
    let mut out = t.active_neighbors(ec);
    out.sort_by_key(|&n| (ledger.units_used(n), t.leaf_pos(n).unwrap()));
    out
}

/// Accepts each prediction when it fits the live ledger; otherwise retries
/// the functions at the predicted ECs' adjacent active ECs (least loaded
/// first), and sends the whole request to the cloud when nothing fits.
/// Requests are processed in ascending id.
pub fn feasibility_repair(
    t: &Topology,
    p: &DelayParams,
    predictions: &[RoutePlan],
    requests: &[Request],
) -> Result<Vec<RepairOutcome>, Error> {
    let by_request: BTreeMap<RequestId, &RoutePlan> =
        predictions.iter().map(|pl| (pl.request, pl)).collect();
    let mut rs: Vec<&Request> = requests.iter().collect();
    rs.sort_by_key(|r| r.id);

    let mut ledger = LoadLedger::new();
    let mut out = Vec::with_capacity(rs.len());
    for r in rs {
        let plan = by_request
            .get(&r.id)
            .ok_or(Error::InvalidParameter("a request has no prediction"))?;
        let pred = plan.assignment();
        pred.validate(t)?;

        if let Ok(next) = ledger.apply_assignment(t, r, pred) {
            ledger = next;
            out.push(RepairOutcome {
                request: r.id,
                status: RepairStatus::Direct,
                assignment: Some(pred),
                penalty_ms: 0.0,
            });
            continue;
        }

        let mut eta_cands = alloc::vec![pred.l_eta];
        eta_cands.extend(least_loaded_neighbors(t, &ledger, pred.l_eta));
        let mut rho_cands = alloc::vec![pred.l_rho];
        rho_cands.extend(least_loaded_neighbors(t, &ledger, pred.l_rho));

        let mut repaired = None;
        'search: for &l_eta in &eta_cands {
            for &l_rho in &rho_cands {
                let a = Assignment { l_eta, l_rho };
                if a == pred {
                    continue;
                }
                if let Ok(next) = ledger.apply_assignment(t, r, a) {
                    ledger = next;
                    repaired = Some(a);
                    break 'search;
                }
            }
        }
        out.push(match repaired {
            Some(a) => RepairOutcome {
                request: r.id,
                status: RepairStatus::NeighborBackup,
                assignment: Some(a),
                penalty_ms: 0.0,
            },
            None => RepairOutcome {
                request: r.id,
                status: RepairStatus::Cloud,
                assignment: None,
                penalty_ms: p.cloud_penalty_ms,
            },
        });
    }
    Ok(out)
}

/// Mean delay over all requests under their repaired placements; cloud
/// requests cost the root path plus the penalty.
pub fn avg_service_delay(
    t: &Topology,
    p: &DelayParams,
    requests: &[Request],
    outcomes: &[RepairOutcome],
) -> Result<f64, Error> {
    let decisions: Vec<ServiceDecision> = outcomes.iter().map(|o| o.decision()).collect();
    avg_decision_delay(t, p, requests, &decisions)
}

/// Mean delay of arbitrary per-request decisions, id-aligned.
pub fn avg_decision_delay(
    t: &Topology,
    p: &DelayParams,
    requests: &[Request],
    decisions: &[ServiceDecision],
) -> Result<f64, Error> {
    if requests.is_empty() || requests.len() != decisions.len() {
        return Err(Error::LengthMismatch {
            left: requests.len(),
            right: decisions.len(),
        });
    }
    let by_id: BTreeMap<RequestId, &Request> = requests.iter().map(|r| (r.id, r)).collect();
    let mut total = 0.0;
    for d in decisions {
        let r = by_id
            .get(&d.request)
            .ok_or(Error::InvalidParameter("decision for an unknown request"))?;
        total += decision_delay(t, p, r, d)?;
    }
    Ok(total / decisions.len() as f64)
}

/// Root mean square error between two index vectors.
pub fn rmse(y_test: &[f64], y_pred: &[f64]) -> Result<f64, Error> {
    check_lengths(y_test, y_pred)?;
    let n = y_test.len() as f64;
    let sse: f64 = y_test
        .iter()
        .zip(y_pred)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sqrt(sse / n))
}

/// Mean relative error |y/ŷ − 1| in percent.
pub fn rel_error(y_test: &[f64], y_pred: &[f64]) -> Result<f64, Error> {
    check_lengths(y_test, y_pred)?;
    let mut total = 0.0;
    for (i, (a, b)) in y_test.iter().zip(y_pred).enumerate() {
        if *b == 0.0 {
            return Err(Error::ZeroPrediction { index: i });
        }
        total += abs(a / b - 1.0);
    }
    Ok(total / y_test.len() as f64 * 100.0)
}

/// Coefficient of determination.
pub fn r_squared(y_test: &[f64], y_pred: &[f64]) -> Result<f64, Error> {
    check_lengths(y_test, y_pred)?;
    let n = y_test.len() as f64;
    let mean: f64 = y_test.iter().sum::<f64>() / n;
    let sst: f64 = y_test.iter().map(|a| (a - mean) * (a - mean)).sum();
    if sst == 0.0 {
        return Err(Error::ConstantTarget);
    }
    let sse: f64 = y_test
        .iter()
        .zip(y_pred)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(1.0 - sse / sst)
}

fn check_lengths(a: &[f64], b: &[f64]) -> Result<(), Error> {
    if a.is_empty() || a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(())
}

/// Exact-match share between a scheme's classes and the reference, percent.
pub fn match_accuracy_pct(reference: &[u32], predicted: &[u32]) -> Result<f64, Error> {
    if reference.is_empty() || reference.len() != predicted.len() {
        return Err(Error::LengthMismatch {
            left: reference.len(),
            right: predicted.len(),
        });
    }
    let hits = reference
        .iter()
        .zip(predicted)
        .filter(|(a, b)| a == b)
        .count();
    Ok(100.0 * hits as f64 / reference.len() as f64)
}
