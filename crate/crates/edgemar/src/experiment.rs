//! One full benchmark run: scenario generation, exact solving, dataset
//! assembly, classifier training, per-scheme evaluation.

use std::collections::BTreeMap;
use std::time::Instant;

use edgemar_core::heuristics::{cfs, fact, rand_s, util, UTIL_THRESHOLD};
use edgemar_core::pipeline::{
    self, build_dataset_with, feasibility_repair, match_accuracy_pct, r_squared, rel_error, rmse,
    Dataset, Split,
};
use edgemar_core::placement::{
    decision_delay, Assignment, DelayParams, RoutePlan, ServiceDecision,
};
use edgemar_core::rng::derive_seed;
use edgemar_core::seqnet::{predict, train, ModelParams, TrainConfig, TrainingTrace};
use edgemar_core::solver::{solve_optimal, Solution};
use edgemar_core::topology::Topology;
use edgemar_core::workload::{freeze_mobility, generate_requests_with, Request, WorkloadOptions};
use edgemar_core::Error as CoreError;

use crate::config::Config;
use crate::error::AppError;
use crate::report::{MetricRow, Scheme};

/// Everything a single run needs, resolved from config plus overrides.
#[derive(Debug, Clone)]
pub struct ExperimentParams {
    pub master_seed: u64,
    pub ec_sites: u32,
    pub active_count: u32,
    pub arity: u32,
    pub capacity_units: u32,
    pub uniform_cores: Option<u32>,
    pub delay: DelayParams,
    pub request_count: u32,
    pub workload: WorkloadOptions,
    pub freeze_mobility: bool,
    pub learn_rate: f64,
    pub epochs: u32,
    pub batch: usize,
    pub hidden: usize,
    pub drop_rate: f64,
}

impl ExperimentParams {
    pub fn from_config(cfg: &Config) -> ExperimentParams {
        ExperimentParams {
            master_seed: cfg.seed,
            ec_sites: cfg.topology.ec_sites,
            active_count: cfg.topology.active_count,
            arity: cfg.topology.arity,
            capacity_units: cfg.topology.capacity_units,
            uniform_cores: cfg.topology.uniform_cores,
            delay: DelayParams {
                per_hop_ms: cfg.delay.per_hop_ms,
                work_eta: cfg.delay.work_eta,
                work_rho: cfg.delay.work_rho,
                cloud_penalty_ms: cfg.delay.cloud_penalty_ms,
                w_comp: cfg.delay.w_comp,
                w_net: cfg.delay.w_net,
            },
            request_count: cfg.workload.request_count,
            workload: WorkloadOptions {
                aro_min_bytes: cfg.workload.aro_min_bytes,
                aro_max_bytes: cfg.workload.aro_max_bytes,
                aro_pool: None,
            },
            freeze_mobility: cfg.workload.freeze_mobility,
            learn_rate: cfg.train.lr,
            epochs: cfg.train.epochs,
            batch: cfg.train.batch,
            hidden: cfg.train.hidden,
            drop_rate: cfg.train.drop_rate,
        }
    }

    /// Topology under this parameter set, capacity and cores applied.
    pub fn build_topology(&self) -> Result<Topology, AppError> {
        let seed = derive_seed(self.master_seed, "topology", 0);
        let mut t = Topology::generate(seed, self.ec_sites, self.active_count, self.arity)
            .map_err(AppError::stage("topology"))?;
        t.set_uniform_capacity(self.capacity_units);
        if let Some(cores) = self.uniform_cores {
            t.set_uniform_cores(cores);
        }
        Ok(t)
    }

    pub fn scenario_seeds(&self) -> Vec<u64> {
        (0..pipeline::SCENARIO_COUNT as u64)
            .map(|i| derive_seed(self.master_seed, "scenario", i))
            .collect()
    }

    /// Requests for one scenario seed, mobility frozen when configured.
    pub fn build_requests(&self, t: &Topology, seed: u64) -> Result<Vec<Request>, AppError> {
        let rs = generate_requests_with(t, self.request_count, seed, &self.workload)
            .map_err(|err| AppError::Stage {
                stage: "workload",
                err: CoreError::Scenario {
                    seed,
                    cause: Box::new(err),
                },
            })?;
        Ok(if self.freeze_mobility {
            freeze_mobility(&rs)
        } else {
            rs
        })
    }
}

pub struct ScenarioRun {
    pub seed: u64,
    pub requests: Vec<Request>,
    pub optimal: Solution,
}

pub struct ExperimentRun {
    pub topology: Topology,
    pub scenarios: Vec<ScenarioRun>,
    pub dataset: Dataset,
    pub model: ModelParams,
    pub trace: TrainingTrace,
    /// One row per scheme in canonical order.
    pub rows: Vec<MetricRow>,
}

fn elapsed_ms(from: Instant) -> f64 {
    from.elapsed().as_secs_f64() * 1e3
}

/// A scheme's behavior on one run: decision delays summed over every
/// scenario, class indices per request (0 = cloud), and wall cost.
struct SchemeOutcome {
    delay_sum: f64,
    classes: Vec<Vec<u32>>,
    wall_ms: f64,
    cloud_count: u32,
}

impl SchemeOutcome {
    fn new(scenario_count: usize) -> SchemeOutcome {
        SchemeOutcome {
            delay_sum: 0.0,
            classes: vec![Vec::new(); scenario_count],
            wall_ms: 0.0,
            cloud_count: 0,
        }
    }

    /// Folds one scenario's decisions in; decisions must be id-sorted and
    /// cover 0..n like the generator emits.
    fn absorb(
        &mut self,
        t: &Topology,
        p: &DelayParams,
        scenario: usize,
        requests: &[Request],
        decisions: &[ServiceDecision],
    ) -> Result<(), AppError> {
        let by_id: BTreeMap<_, _> = requests.iter().map(|r| (r.id, r)).collect();
        let mut classes = vec![0u32; requests.len()];
        for d in decisions {
            let r = by_id.get(&d.request).ok_or(AppError::Stage {
                stage: "evaluate",
                err: CoreError::InvalidParameter("decision for an unknown request"),
            })?;
            self.delay_sum += decision_delay(t, p, r, d).map_err(AppError::stage("evaluate"))?;
            let class = match d.assignment {
                Some(a) => a.class_index(t).map_err(AppError::stage("evaluate"))?,
                None => {
                    self.cloud_count += 1;
                    0
                }
            };
            classes[d.request.0 as usize] = class;
        }
        self.classes[scenario] = classes;
        Ok(())
    }
}

pub fn run_experiment(p: &ExperimentParams) -> Result<ExperimentRun, AppError> {
    p.delay.validate().map_err(AppError::stage("delay"))?;
    let t = p.build_topology()?;
    let scenario_seeds = p.scenario_seeds();

    let mut scenarios = Vec::with_capacity(scenario_seeds.len());
    let mut optim = SchemeOutcome::new(scenario_seeds.len());
    for (i, &seed) in scenario_seeds.iter().enumerate() {
        let requests = p.build_requests(&t, seed)?;
        let started = Instant::now();
        let optimal = solve_optimal(&t, &p.delay, &requests).map_err(|err| AppError::Stage {
            stage: "solve",
            err: CoreError::Scenario {
                seed,
                cause: Box::new(err),
            },
        })?;
        optim.wall_ms += elapsed_ms(started);
        let decisions: Vec<ServiceDecision> = optimal
            .plans
            .iter()
            .map(|plan| ServiceDecision {
                request: plan.request,
                assignment: Some(plan.assignment()),
            })
            .collect();
        optim.absorb(&t, &p.delay, i, &requests, &decisions)?;
        scenarios.push(ScenarioRun {
            seed,
            requests,
            optimal,
        });
    }

    let dataset = build_dataset_with(
        &t,
        &p.delay,
        &scenario_seeds,
        p.request_count,
        derive_seed(p.master_seed, "dataset", 0),
        &p.workload,
        p.freeze_mobility,
    )
    .map_err(AppError::stage("dataset"))?;

    let train_set = dataset
        .samples(&t, Split::Train)
        .map_err(AppError::stage("dataset"))?;
    let test_set = dataset
        .samples(&t, Split::Test)
        .map_err(AppError::stage("dataset"))?;

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
    let started = Instant::now();
    let (model, trace) = train(model0, &cfg, &train_set, &test_set).map_err(AppError::stage("train"))?;
    let train_ms = elapsed_ms(started);

    // Decision passes for the learned scheme and the baselines.
    let mut lstm = SchemeOutcome::new(scenarios.len());
    let mut lstm_raw_classes: Vec<Vec<u32>> = Vec::with_capacity(scenarios.len());
    let mut fact_o = SchemeOutcome::new(scenarios.len());
    let mut cfs_o = SchemeOutcome::new(scenarios.len());
    let mut util_o = SchemeOutcome::new(scenarios.len());
    let mut rands_o = SchemeOutcome::new(scenarios.len());

    for (i, sc) in scenarios.iter().enumerate() {
        let rs = &sc.requests;

        let started = Instant::now();
        let mut predictions = Vec::with_capacity(rs.len());
        let mut raw = vec![0u32; rs.len()];
        for r in rs {
            let dest = r.most_likely_destination(&t).map_err(AppError::stage("infer"))?;
            let x = pipeline::encode_input(&t, [r.source, dest]).map_err(AppError::stage("infer"))?;
            let class = predict(&model, &x).map_err(AppError::stage("infer"))?;
            raw[r.id.0 as usize] = class;
            let a = Assignment::from_class(&t, class).map_err(AppError::stage("infer"))?;
            predictions.push(RoutePlan::new(&t, r, a).map_err(AppError::stage("infer"))?);
        }
        let outcomes =
            feasibility_repair(&t, &p.delay, &predictions, rs).map_err(AppError::stage("repair"))?;
        lstm.wall_ms += elapsed_ms(started);
        // Cloud outcomes surface as empty assignments, which absorb()
        // already counts.
        let decisions: Vec<ServiceDecision> = outcomes.iter().map(|o| o.decision()).collect();
        lstm.absorb(&t, &p.delay, i, rs, &decisions)?;
        lstm_raw_classes.push(raw);

        let started = Instant::now();
        let plans = fact(&t, &p.delay, rs).map_err(AppError::stage("fact"))?;
        fact_o.wall_ms += elapsed_ms(started);
        let decisions: Vec<ServiceDecision> = plans
            .iter()
            .map(|plan| ServiceDecision {
                request: plan.request,
                assignment: Some(plan.assignment()),
            })
            .collect();
        fact_o.absorb(&t, &p.delay, i, rs, &decisions)?;

        let started = Instant::now();
        let decisions = cfs(&t, &p.delay, rs).map_err(AppError::stage("cfs"))?;
        cfs_o.wall_ms += elapsed_ms(started);
        cfs_o.absorb(&t, &p.delay, i, rs, &decisions)?;

        let started = Instant::now();
        let decisions = util(&t, &p.delay, rs, UTIL_THRESHOLD).map_err(AppError::stage("util"))?;
        util_o.wall_ms += elapsed_ms(started);
        util_o.absorb(&t, &p.delay, i, rs, &decisions)?;

        let started = Instant::now();
        let decisions = rand_s(&t, &p.delay, rs, derive_seed(p.master_seed, "rands", i as u64))
            .map_err(AppError::stage("rands"))?;
        rands_o.wall_ms += elapsed_ms(started);
        rands_o.absorb(&t, &p.delay, i, rs, &decisions)?;
    }

    // Prediction quality against the exact labels on held-out entries.
    let index_of: BTreeMap<u64, usize> = scenario_seeds
        .iter()
        .enumerate()
        .map(|(i, &s)| (s, i))
        .collect();
    let test_entries = dataset.test_entries();
    let mut y_true = Vec::with_capacity(test_entries.len());
    let mut refs = Vec::with_capacity(test_entries.len());
    for e in &test_entries {
        let scenario = *index_of.get(&e.scenario_seed).ok_or(AppError::Stage {
            stage: "evaluate",
            err: CoreError::InvalidParameter("test entry from an unknown scenario"),
        })?;
        y_true.push(e.y);
        refs.push((scenario, e.request.0 as usize));
    }

    let pick = |classes: &[Vec<u32>]| -> Vec<u32> {
        refs.iter().map(|&(s, r)| classes[s][r]).collect()
    };

    let total_requests = (scenarios.len() * p.request_count as usize) as f64;
    let mut rows = Vec::with_capacity(Scheme::ALL.len());
    for scheme in Scheme::ALL {
        let (outcome, y_pred) = match scheme {
            Scheme::Optim => (&optim, pick(&optim.classes)),
            // Quality metrics judge the raw predictions; delay includes the
            // repair fallback.
            Scheme::Lstm => (&lstm, pick(&lstm_raw_classes)),
            Scheme::Fact => (&fact_o, pick(&fact_o.classes)),
            Scheme::Cfs => (&cfs_o, pick(&cfs_o.classes)),
            Scheme::Util => (&util_o, pick(&util_o.classes)),
            Scheme::RandS => (&rands_o, pick(&rands_o.classes)),
        };
        let yt: Vec<f64> = y_true.iter().map(|&y| f64::from(y)).collect();
        let yp: Vec<f64> = y_pred.iter().map(|&y| f64::from(y)).collect();
        let r2 = match r_squared(&yt, &yp) {
            Ok(v) => v,
            // A constant label vector leaves r2 undefined; recorded as NaN
            // rather than aborting the whole run.
            Err(CoreError::ConstantTarget) => f64::NAN,
            Err(err) => return Err(AppError::Stage { stage: "metrics", err }),
        };
        rows.push(MetricRow {
            scheme,
            seed: p.master_seed,
            num_ec: p.active_count,
            num_requests: p.request_count,
            capacity: p.capacity_units,
            avg_delay_ms: outcome.delay_sum / total_requests,
            rmse: rmse(&yt, &yp).map_err(AppError::stage("metrics"))?,
            rel_err_pct: rel_error(&yt, &yp).map_err(AppError::stage("metrics"))?,
            r_squared: r2,
            accuracy_pct: match_accuracy_pct(&y_true, &y_pred)
                .map_err(AppError::stage("metrics"))?,
            solve_ms: match scheme {
                Scheme::Optim => optim.wall_ms,
                Scheme::Lstm => 0.0,
                Scheme::Fact => fact_o.wall_ms,
                Scheme::Cfs => cfs_o.wall_ms,
                Scheme::Util => util_o.wall_ms,
                Scheme::RandS => rands_o.wall_ms,
            },
            train_ms: if scheme == Scheme::Lstm { train_ms } else { 0.0 },
            infer_ms: if scheme == Scheme::Lstm { lstm.wall_ms } else { 0.0 },
            repair_cloud_count: outcome.cloud_count,
        });
    }

    Ok(ExperimentRun {
        topology: t,
        scenarios,
        dataset,
        model,
        trace,
        rows,
    })
}
