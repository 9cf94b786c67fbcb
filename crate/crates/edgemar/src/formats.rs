//! On-disk formats: topology JSON, request and route-plan JSON lines, solve
//! manifests, model checkpoints, training traces.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use edgemar_core::placement::{RoutePlan, ServiceDecision};
use edgemar_core::seqnet::{ModelParams, TrainConfig, TrainingTrace};
use edgemar_core::topology::{EcNode, Node, Topology};
use edgemar_core::workload::Request;
use edgemar_core::{AroId, NodeId, RequestId};
use serde::{Deserialize, Serialize};

use crate::error::AppError;
use crate::experiment::ExperimentParams;

fn bad(path: &Path, msg: impl Into<String>) -> AppError {
    AppError::Format {
        path: path.display().to_string(),
        msg: msg.into(),
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), AppError> {
    let mut f = std::fs::File::create(path).map_err(AppError::io(path))?;
    f.write_all(text.as_bytes()).map_err(AppError::io(path))
}

fn read_text(path: &Path) -> Result<String, AppError> {
    std::fs::read_to_string(path).map_err(AppError::io(path))
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct TopologyFile {
    seed: u64,
    arity: u32,
    nodes: Vec<NodeRow>,
    ecs: Vec<EcRow>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct NodeRow {
    id: u32,
    parent: Option<u32>,
    is_leaf: bool,
    leaf_pos: Option<u32>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct EcRow {
    id: u32,
    capacity_units: u32,
    cores: u32,
    cache_bytes: u64,
    active: bool,
}

pub fn write_topology(path: &Path, t: &Topology) -> Result<(), AppError> {
    let file = TopologyFile {
        seed: t.seed,
        arity: t.arity,
        nodes: t
            .nodes()
            .iter()
            .map(|n| NodeRow {
                id: n.id.0,
                parent: n.parent.map(|p| p.0),
                is_leaf: n.leaf_pos.is_some(),
                leaf_pos: n.leaf_pos,
            })
            .collect(),
        ecs: t
            .ec_sites()
            .iter()
            .map(|e| EcRow {
                id: e.id.0,
                capacity_units: e.capacity_units,
                cores: e.cores,
                cache_bytes: e.cache_bytes,
                active: e.active,
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&file).expect("topology serializes");
    text.push('\n');
    write_text(path, &text)
}

pub fn read_topology(path: &Path) -> Result<Topology, AppError> {
    let file: TopologyFile = serde_json::from_str(&read_text(path)?)
        .map_err(|e| bad(path, e.to_string()))?;
    let n = file.nodes.len();

    // Children regrouped from parent links in id order, which matches the
    // left-to-right order the writer had.
    let mut children: Vec<Vec<NodeId>> = vec![Vec::new(); n];
    for row in &file.nodes {
        if let Some(p) = row.parent {
            let slot = children
                .get_mut(p as usize)
                .ok_or_else(|| bad(path, format!("node {} has unknown parent {}", row.id, p)))?;
            slot.push(NodeId(row.id));
        }
    }

    let parent_of: Vec<Option<u32>> = file.nodes.iter().map(|r| r.parent).collect();
    let depth_of = |mut id: u32| -> Result<u32, AppError> {
        let mut d = 0;
        while let Some(p) = parent_of
            .get(id as usize)
            .copied()
            .ok_or_else(|| bad(path, format!("node id {id} out of range")))?
        {
            d += 1;
            id = p;
            if d as usize > n {
                return Err(bad(path, "parent links form a cycle"));
            }
        }
        Ok(d)
    };

    let mut nodes = Vec::with_capacity(n);
    for row in &file.nodes {
        if row.is_leaf != row.leaf_pos.is_some() {
            return Err(bad(path, format!("node {}: isLeaf and leafPos disagree", row.id)));
        }
        nodes.push(Node {
            id: NodeId(row.id),
            parent: row.parent.map(NodeId),
            children: children[row.id as usize].clone(),
            depth: depth_of(row.id)?,
            leaf_pos: row.leaf_pos,
        });
    }
    let ecs = file
        .ecs
        .iter()
        .map(|e| EcNode {
            id: NodeId(e.id),
            capacity_units: e.capacity_units,
            cores: e.cores,
            cache_bytes: e.cache_bytes,
            active: e.active,
        })
        .collect();
    Topology::from_parts(file.seed, file.arity, nodes, ecs)
        .map_err(|e| bad(path, e.to_string()))
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct RequestRow {
    id: u32,
    source: u32,
    stay_prob: f64,
    mobility: BTreeMap<String, f64>,
    aro_id: u32,
    aro_bytes: u64,
}

pub fn write_requests(path: &Path, rs: &[Request]) -> Result<(), AppError> {
    let mut text = String::new();
    for r in rs {
        let row = RequestRow {
            id: r.id.0,
            source: r.source.0,
            stay_prob: r.stay_prob,
            mobility: r
                .mobility
                .iter()
                .map(|(node, prob)| (node.0.to_string(), *prob))
                .collect(),
            aro_id: r.aro_id.0,
            aro_bytes: r.aro_bytes,
        };
        text.push_str(&serde_json::to_string(&row).expect("request serializes"));
        text.push('\n');
    }
    write_text(path, &text)
}

pub fn read_requests(path: &Path) -> Result<Vec<Request>, AppError> {
    let mut out = Vec::new();
    for (lineno, line) in read_text(path)?.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: RequestRow = serde_json::from_str(line)
            .map_err(|e| bad(path, format!("line {}: {}", lineno + 1, e)))?;
        let mut mobility = BTreeMap::new();
        for (key, prob) in row.mobility {
            let node: u32 = key
                .parse()
                .map_err(|_| bad(path, format!("line {}: mobility key {:?}", lineno + 1, key)))?;
            mobility.insert(NodeId(node), prob);
        }
        out.push(Request {
            id: RequestId(row.id),
            source: NodeId(row.source),
            stay_prob: row.stay_prob,
            mobility,
            aro_id: AroId(row.aro_id),
            aro_bytes: row.aro_bytes,
            units_per_function: 1,
        });
    }
    Ok(out)
}

/// One placement decision in the interchange format. `classIndex` 0 marks a
/// cloud fallback; its route runs through the tree root.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PlanRow {
    pub request: u32,
    pub route: [u32; 4],
    pub class_index: u32,
}

impl PlanRow {
    pub fn from_route_plan(p: &RoutePlan) -> PlanRow {
        PlanRow {
            request: p.request.0,
            route: [p.route[0].0, p.route[1].0, p.route[2].0, p.route[3].0],
            class_index: p.class_index,
        }
    }
}

/// Decisions to rows; cloud decisions get class 0 and a root route.
pub fn plan_rows_from_decisions(
    t: &Topology,
    requests: &[Request],
    decisions: &[ServiceDecision],
) -> Result<Vec<PlanRow>, AppError> {
    let by_id: BTreeMap<RequestId, &Request> = requests.iter().map(|r| (r.id, r)).collect();
    let mut rows = Vec::with_capacity(decisions.len());
    for d in decisions {
        let r = by_id.get(&d.request).ok_or_else(|| AppError::Stage {
            stage: "plans",
            err: edgemar_core::Error::InvalidParameter("decision for an unknown request"),
        })?;
        let row = match d.assignment {
            Some(a) => PlanRow::from_route_plan(
                &RoutePlan::new(t, r, a).map_err(AppError::stage("plans"))?,
            ),
            None => {
                let dest = r
                    .most_likely_destination(t)
                    .map_err(AppError::stage("plans"))?;
                PlanRow {
                    request: r.id.0,
                    route: [r.source.0, t.root().0, t.root().0, dest.0],
                    class_index: 0,
                }
            }
        };
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_plans(path: &Path, rows: &[PlanRow]) -> Result<(), AppError> {
    let mut text = String::new();
    for row in rows {
        text.push_str(&serde_json::to_string(row).expect("plan serializes"));
        text.push('\n');
    }
    write_text(path, &text)
}

pub fn read_plans(path: &Path) -> Result<Vec<PlanRow>, AppError> {
    let mut out = Vec::new();
    for (lineno, line) in read_text(path)?.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: PlanRow = serde_json::from_str(line)
            .map_err(|e| bad(path, format!("line {}: {}", lineno + 1, e)))?;
        out.push(row);
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SolveManifest {
    pub seed: u64,
    pub scheme: String,
    pub params: ParamsEcho,
    /// Total expected delay of the emitted plans.
    pub objective_ms: f64,
    pub solve_wall_ms: f64,
}

/// Instance parameters echoed into manifests so a result file is
/// self-describing.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ParamsEcho {
    pub ec_sites: u32,
    pub active_count: u32,
    pub arity: u32,
    pub capacity_units: u32,
    pub request_count: u32,
    pub per_hop_ms: f64,
    pub work_eta: f64,
    pub work_rho: f64,
    pub cloud_penalty_ms: f64,
    pub w_comp: f64,
    pub w_net: f64,
    pub freeze_mobility: bool,
}

impl ParamsEcho {
    pub fn from_params(p: &ExperimentParams) -> ParamsEcho {
        ParamsEcho {
            ec_sites: p.ec_sites,
            active_count: p.active_count,
            arity: p.arity,
            capacity_units: p.capacity_units,
            request_count: p.request_count,
            per_hop_ms: p.delay.per_hop_ms,
            work_eta: p.delay.work_eta,
            work_rho: p.delay.work_rho,
            cloud_penalty_ms: p.delay.cloud_penalty_ms,
            w_comp: p.delay.w_comp,
            w_net: p.delay.w_net,
            freeze_mobility: p.freeze_mobility,
        }
    }
}

pub fn write_manifest(path: &Path, m: &SolveManifest) -> Result<(), AppError> {
    let mut text = serde_json::to_string_pretty(m).expect("manifest serializes");
    text.push('\n');
    write_text(path, &text)
}

const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct CheckpointFile {
    schema_version: u32,
    seed: u64,
    cfg: CheckpointCfg,
    tensors: Vec<TensorRow>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct CheckpointCfg {
    input_size: usize,
    hidden: usize,
    num_res: usize,
    drop_rate: f64,
    lr: f64,
    epochs: u32,
    batch: usize,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    train_seed: u64,
}

#[derive(Serialize, Deserialize)]
struct TensorRow {
    name: String,
    shape: [usize; 2],
    values: Vec<f64>,
}

/// JSON tensor dump. serde_json prints each f64 as its shortest exact
/// decimal, and the float_roundtrip feature makes the reader parse it back
/// to the same bits, so finite values round-trip exactly.
pub fn save_checkpoint(
    path: &Path,
    model: &ModelParams,
    cfg: &TrainConfig,
    master_seed: u64,
) -> Result<(), AppError> {
    let mut tensors = Vec::new();
    for (name, shape, values) in model.named_tensors() {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(bad(path, format!("tensor {name} holds a non-finite value")));
        }
        tensors.push(TensorRow {
            name: name.to_string(),
            shape,
            values: values.clone(),
        });
    }
    let file = CheckpointFile {
        schema_version: CHECKPOINT_VERSION,
        seed: master_seed,
        cfg: CheckpointCfg {
            input_size: model.input_size,
            hidden: model.hidden,
            num_res: model.num_res,
            drop_rate: model.drop_rate,
            lr: cfg.initial_learn_rate,
            epochs: cfg.max_epochs,
            batch: cfg.batch_size,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            epsilon: cfg.epsilon,
            train_seed: cfg.seed,
        },
        tensors,
    };
    let mut text = serde_json::to_string(&file).expect("checkpoint serializes");
    text.push('\n');
    write_text(path, &text)
}

pub fn load_checkpoint(path: &Path) -> Result<(ModelParams, TrainConfig, u64), AppError> {
    let file: CheckpointFile = serde_json::from_str(&read_text(path)?)
        .map_err(|e| bad(path, e.to_string()))?;
    if file.schema_version != CHECKPOINT_VERSION {
        return Err(bad(
            path,
            format!("schema version {} unsupported", file.schema_version),
        ));
    }
    let c = &file.cfg;
    let mut model = ModelParams::init(c.input_size, c.hidden, c.num_res, c.drop_rate, 0)
        .map_err(AppError::stage("checkpoint"))?;

    let expected: Vec<(String, [usize; 2], usize)> = model
        .named_tensors()
        .iter()
        .map(|(name, shape, values)| (name.to_string(), *shape, values.len()))
        .collect();
    if file.tensors.len() != expected.len() {
        return Err(bad(
            path,
            format!("{} tensors, expected {}", file.tensors.len(), expected.len()),
        ));
    }
    for (row, (name, shape, len)) in file.tensors.iter().zip(&expected) {
        if &row.name != name || &row.shape != shape || row.values.len() != *len {
            return Err(bad(path, format!("tensor {} mismatches {}", row.name, name)));
        }
    }
    for (slot, row) in model.tensors_mut().into_iter().zip(&file.tensors) {
        slot.copy_from_slice(&row.values);
    }
    model.validate().map_err(AppError::stage("checkpoint"))?;

    let cfg = TrainConfig {
        initial_learn_rate: c.lr,
        max_epochs: c.epochs,
        batch_size: c.batch,
        seed: c.train_seed,
        beta1: c.beta1,
        beta2: c.beta2,
        epsilon: c.epsilon,
    };
    Ok((model, cfg, file.seed))
}

pub const TRACE_HEADER: &str = "epoch,loss,trainAccPct,valAccPct";

pub fn write_trace(path: &Path, trace: &TrainingTrace) -> Result<(), AppError> {
    let mut text = String::from(TRACE_HEADER);
    text.push('\n');
    for e in trace {
        text.push_str(&format!(
            "{},{},{},{}\n",
            e.epoch, e.loss, e.train_acc_pct, e.val_acc_pct
        ));
    }
    write_text(path, &text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use edgemar_core::placement::Assignment;
    use edgemar_core::workload::generate_requests;

    fn tmp() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn topology_survives_a_round_trip() {
        let mut t = Topology::generate(11, 20, 6, 4).unwrap();
        t.set_uniform_capacity(10);
        let dir = tmp();
        let path = dir.path().join("topology.json");
        write_topology(&path, &t).unwrap();
        let back = read_topology(&path).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn topology_reader_rejects_inconsistent_leaf_flags() {
        let t = Topology::generate(11, 20, 6, 4).unwrap();
        let dir = tmp();
        let path = dir.path().join("topology.json");
        write_topology(&path, &t).unwrap();
        let broken = std::fs::read_to_string(&path)
            .unwrap()
            .replacen("\"isLeaf\": true", "\"isLeaf\": false", 1);
        std::fs::write(&path, broken).unwrap();
        let err = read_topology(&path).unwrap_err();
        assert!(err.to_string().contains("isLeaf"), "{err}");
    }

    #[test]
    fn requests_survive_a_round_trip() {
        let t = Topology::generate(11, 20, 6, 4).unwrap();
        let rs = generate_requests(&t, 12, 5).unwrap();
        let dir = tmp();
        let path = dir.path().join("requests.jsonl");
        write_requests(&path, &rs).unwrap();
        let lines = std::fs::read_to_string(&path).unwrap().lines().count();
        assert_eq!(lines, 12);
        assert_eq!(read_requests(&path).unwrap(), rs);
    }

    #[test]
    fn cloud_decisions_become_root_routed_class_zero_rows() {
        let t = Topology::generate(11, 20, 6, 4).unwrap();
        let rs = generate_requests(&t, 2, 5).unwrap();
        let edge = Assignment {
            l_eta: t.active_ecs()[0],
            l_rho: t.active_ecs()[1],
        };
        let decisions = vec![
            ServiceDecision {
                request: rs[0].id,
                assignment: Some(edge),
            },
            ServiceDecision {
                request: rs[1].id,
                assignment: None,
            },
        ];
        let rows = plan_rows_from_decisions(&t, &rs, &decisions).unwrap();
        assert_eq!(rows[0].class_index, edge.class_index(&t).unwrap());
        assert_eq!(rows[1].class_index, 0);
        assert_eq!(rows[1].route[1], t.root().0);
        assert_eq!(rows[1].route[2], t.root().0);

        let dir = tmp();
        let path = dir.path().join("plans.jsonl");
        write_plans(&path, &rows).unwrap();
        assert_eq!(read_plans(&path).unwrap(), rows);
    }

    #[test]
    fn checkpoints_restore_the_exact_model() {
        let model = ModelParams::init(6, 4, 4, 0.05, 99).unwrap();
        let cfg = TrainConfig {
            seed: 42,
            ..TrainConfig::default()
        };
        let dir = tmp();
        let path = dir.path().join("checkpoint.json");
        save_checkpoint(&path, &model, &cfg, 7).unwrap();
        let (back, back_cfg, master) = load_checkpoint(&path).unwrap();
        assert_eq!(back, model);
        assert_eq!(back_cfg.seed, 42);
        assert_eq!(back_cfg.max_epochs, cfg.max_epochs);
        assert_eq!(master, 7);
    }

    #[test]
    fn checkpoint_loader_rejects_foreign_schemas() {
        let model = ModelParams::init(6, 4, 4, 0.05, 99).unwrap();
        let dir = tmp();
        let path = dir.path().join("checkpoint.json");
        save_checkpoint(&path, &model, &TrainConfig::default(), 7).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();

        std::fs::write(&path, text.replacen("\"schemaVersion\":1", "\"schemaVersion\":2", 1))
            .unwrap();
        assert!(load_checkpoint(&path).unwrap_err().to_string().contains("schema"));

        // hidden size no longer matches the stored tensor shapes
        std::fs::write(&path, text.replacen("\"hidden\":4", "\"hidden\":5", 1)).unwrap();
        assert!(load_checkpoint(&path).is_err());
    }

    #[test]
    fn trace_rows_are_plain_csv() {
        let trace = vec![edgemar_core::seqnet::EpochStats {
            epoch: 1,
            loss: 0.5,
            train_acc_pct: 50.0,
            val_acc_pct: 40.0,
        }];
        let dir = tmp();
        let path = dir.path().join("trace.csv");
        write_trace(&path, &trace).unwrap();
        assert_eq!(
            std::fs::read_to_string(&path).unwrap(),
            "epoch,loss,trainAccPct,valAccPct\n1,0.5,50,40\n"
        );
    }
}
