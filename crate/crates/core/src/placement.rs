//! Shared placement model: where the two service functions of a request
//! run, what that costs in expected delay, how assignments map onto the
//! dense class-index space, and how EC capacity and cache budgets are
//! accounted.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use crate::error::Error;
use crate::topology::Topology;
use crate::workload::Request;
use crate::{AroId, NodeId, RequestId};

/// Locations of the compute function (lEta) and storage function (lRho).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Assignment {
    pub l_eta: NodeId,
    pub l_rho: NodeId,
}

impl Assignment {
    /// Checks both members are active ECs.
    pub fn validate(&self, t: &Topology) -> Result<(), Error> {
        for ec in [self.l_eta, self.l_rho] {
            if t.ordinal(ec).is_none() {
                return Err(Error::InactiveEc(ec));
            }
        }
        Ok(())
    }

    /// Dense class index of this assignment over the active-EC ordinals.
    pub fn class_index(&self, t: &Topology) -> Result<u32, Error> {
        self.validate(t)?;
        let m = t.active_ecs().len() as u32;
        encode_class(
            t.ordinal(self.l_eta).unwrap(),
            t.ordinal(self.l_rho).unwrap(),
            m,
        )
    }

    /// Inverse of `class_index`.
    pub fn from_class(t: &Topology, index: u32) -> Result<Assignment, Error> {
        let m = t.active_ecs().len() as u32;
        let (e, r) = decode_class(index, m)?;
        Ok(Assignment {
            l_eta: t.active_by_ordinal(e)?,
            l_rho: t.active_by_ordinal(r)?,
        })
    }
}

/// Route record for one request plus its class index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoutePlan {
    pub request: RequestId,
    /// [source, lEta, lRho, most likely destination]
    pub route: [NodeId; 4],
    pub class_index: u32,
}

impl RoutePlan {
    pub fn new(t: &Topology, r: &Request, a: Assignment) -> Result<RoutePlan, Error> {
        let class_index = a.class_index(t)?;
        Ok(RoutePlan {
            request: r.id,
            route: [r.source, a.l_eta, a.l_rho, r.most_likely_destination(t)?],
            class_index,
        })
    }

    pub fn assignment(&self) -> Assignment {
        Assignment {
            l_eta: self.route[1],
            l_rho: self.route[2],
        }
    }
}

/// Weights and unit costs of the delay objective.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayParams {
    pub per_hop_ms: f64,
    /// Compute demand of the compute-intensive function, in ms·cores.
    pub work_eta: f64,
    /// Compute demand of the storage-intensive function, in ms·cores.
    pub work_rho: f64,
    /// Flat penalty when a request is served from the cloud instead.
    pub cloud_penalty_ms: f64,
    pub w_comp: f64,
    pub w_net: f64,
}

impl Default for DelayParams {
    fn default() -> Self {
        DelayParams {
            per_hop_ms: 1.0,
            work_eta: 60.0,
            work_rho: 30.0,
            cloud_penalty_ms: 50.0,
            w_comp: 1.0,
            w_net: 1.0,
        }
    }
}

impl DelayParams {
    pub fn validate(&self) -> Result<(), Error> {
        let fields = [
            self.per_hop_ms,
            self.work_eta,
            self.work_rho,
            self.cloud_penalty_ms,
            self.w_comp,
            self.w_net,
        ];
        if fields.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParameter("delay parameters must be non-negative"));
        }
        if self.w_comp + self.w_net <= 0.0 {
            return Err(Error::InvalidParameter("at least one objective weight must be positive"));
        }
        Ok(())
    }
}

/// Packs an ordered EC pair into one label in [1, M²].
pub fn encode_class(l_eta: u32, l_rho: u32, m: u32) -> Result<u32, Error> {
    for ord in [l_eta, l_rho] {
        if ord == 0 || ord > m {
            return Err(Error::OrdinalOutOfRange { ordinal: ord, m });
        }
    }
    Ok((l_eta - 1) * m + l_rho)
}

/// Inverse of `encode_class`.
pub fn decode_class(index: u32, m: u32) -> Result<(u32, u32), Error> {
    if index == 0 || index > m * m {
        return Err(Error::ClassOutOfRange { index, m });
    }
    Ok(((index - 1) / m + 1, (index - 1) % m + 1))
}

/// Expected end-to-end delay of serving `r` under assignment `a`:
/// the compute time of both functions plus the per-hop network cost of the
/// path source → lEta → lRho → destination, with the last leg averaged over
/// the mobility distribution (staying included).
pub fn expected_delay(
    t: &Topology,
    p: &DelayParams,
    r: &Request,
    a: Assignment,
) -> Result<f64, Error> {
    a.validate(t)?;
    let cores = |ec: NodeId| -> f64 { f64::from(t.ec(ec).unwrap().cores) };
    let comp = p.work_eta / cores(a.l_eta) + p.work_rho / cores(a.l_rho);

    let mut hops = f64::from(t.hop_distance(r.source, a.l_eta)?)
        + f64::from(t.hop_distance(a.l_eta, a.l_rho)?)
        + r.stay_prob * f64::from(t.hop_distance(a.l_rho, r.source)?);
    for (&node, &prob) in &r.mobility {
        hops += prob * f64::from(t.hop_distance(a.l_rho, node)?);
    }

    Ok(p.w_comp * comp + p.w_net * p.per_hop_ms * hops)
}

/// Delay of serving a request from the cloud behind the root gateway:
/// the network legs source → root → mobility-weighted destination plus the
/// flat cloud penalty. Cloud compute is folded into the penalty.
pub fn cloud_delay(t: &Topology, p: &DelayParams, r: &Request) -> Result<f64, Error> {
    let root = t.root();
    let mut hops = f64::from(t.hop_distance(r.source, root)?)
        + r.stay_prob * f64::from(t.hop_distance(root, r.source)?);
    for (&node, &prob) in &r.mobility {
        hops += prob * f64::from(t.hop_distance(root, node)?);
    }
    Ok(p.w_net * p.per_hop_ms * hops + p.cloud_penalty_ms)
}

/// Final decision for one request: an edge assignment, or the cloud when no
/// edge pair fits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ServiceDecision {
    pub request: RequestId,
    /// `None` sends the request to the cloud.
    pub assignment: Option<Assignment>,
}

/// Delay a decision costs its request, edge or cloud.
pub fn decision_delay(
    t: &Topology,
    p: &DelayParams,
    r: &Request,
    d: &ServiceDecision,
) -> Result<f64, Error> {
    match d.assignment {
        Some(a) => expected_delay(t, p, r, a),
        None => cloud_delay(t, p, r),
    }
}

/// Which EC budget an assignment would overrun.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Violation {
    Units { ec: NodeId },
    Cache { ec: NodeId },
}

/// Tracks placement units and cached AROs per EC.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadLedger {
    units_used: BTreeMap<NodeId, u32>,
    cached: BTreeMap<NodeId, BTreeSet<AroId>>,
    cached_bytes: BTreeMap<NodeId, u64>,
}

impl LoadLedger {
    pub fn new() -> LoadLedger {
        LoadLedger::default()
    }

    pub fn units_used(&self, ec: NodeId) -> u32 {
        self.units_used.get(&ec).copied().unwrap_or(0)
    }

    pub fn cached_bytes(&self, ec: NodeId) -> u64 {
        self.cached_bytes.get(&ec).copied().unwrap_or(0)
    }

    pub fn has_cached(&self, ec: NodeId, aro: AroId) -> bool {
        self.cached.get(&ec).is_some_and(|s| s.contains(&aro))
    }

    /// Checks whether `a` fits without changing the ledger.
    pub fn fits(&self, t: &Topology, r: &Request, a: Assignment) -> Result<(), Violation> {
        let mut extra: BTreeMap<NodeId, u32> = BTreeMap::new();
        *extra.entry(a.l_eta).or_insert(0) += r.units_per_function;
        *extra.entry(a.l_rho).or_insert(0) += r.units_per_function;
        for (&ec, &units) in &extra {
            let cap = t.ec(ec).map(|e| e.capacity_units).unwrap_or(0);
            if self.units_used(ec) + units > cap {
                return Err(Violation::Units { ec });
            }
        }
        if !self.has_cached(a.l_rho, r.aro_id) {
            let cap = t.ec(a.l_rho).map(|e| e.cache_bytes).unwrap_or(0);
            if self.cached_bytes(a.l_rho) + r.aro_bytes > cap {
                return Err(Violation::Cache { ec: a.l_rho });
            }
        }
        Ok(())
    }

    /// Returns a ledger with `a` applied, or the violation that prevents it.
    /// Both functions consume units; the ARO is cached at the storage EC,
    /// with bytes counted once per distinct ARO there.
    pub fn apply_assignment(
        &self,
        t: &Topology,
        r: &Request,
        a: Assignment,
    ) -> Result<LoadLedger, Violation> {
        self.fits(t, r, a)?;
        let mut next = self.clone();
        *next.units_used.entry(a.l_eta).or_insert(0) += r.units_per_function;
        *next.units_used.entry(a.l_rho).or_insert(0) += r.units_per_function;
        if next.cached.entry(a.l_rho).or_default().insert(r.aro_id) {
            *next.cached_bytes.entry(a.l_rho).or_insert(0) += r.aro_bytes;
        }
        Ok(next)
    }

    /// All feasible assignments for `r`, ordered by ascending class index.
    pub fn feasible_assignments(&self, t: &Topology, r: &Request) -> Vec<Assignment> {
        let m = t.active_ecs().len() as u32;
        let mut out = Vec::new();
        for idx in 1..=m * m {
            let a = Assignment::from_class(t, idx).unwrap();
            if self.fits(t, r, a).is_ok() {
                out.push(a);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::Node;
    use alloc::vec;

    fn request_at(source: NodeId, stay: f64, moves: &[(NodeId, f64)]) -> Request {
        Request {
            id: RequestId(0),
            source,
            stay_prob: stay,
            mobility: moves.iter().copied().collect(),
            aro_id: AroId(0),
            aro_bytes: 1 << 20,
            units_per_function: 1,
        }
    }

    /// Root plus two leaf ARs, both active ECs, cores 4 and 8.
    fn two_leaf() -> Topology {
        let nodes = vec![
            Node {
                id: NodeId(0),
                parent: None,
                children: vec![NodeId(1), NodeId(2)],
                depth: 0,
                leaf_pos: None,
            },
            Node {
                id: NodeId(1),
                parent: Some(NodeId(0)),
                children: vec![],
                depth: 1,
                leaf_pos: Some(0),
            },
            Node {
                id: NodeId(2),
                parent: Some(NodeId(0)),
                children: vec![],
                depth: 1,
                leaf_pos: Some(1),
            },
        ];
        let ecs = vec![
            crate::topology::EcNode {
                id: NodeId(1),
                capacity_units: 14,
                cores: 4,
                cache_bytes: 16 << 30,
                active: true,
            },
            crate::topology::EcNode {
                id: NodeId(2),
                capacity_units: 14,
                cores: 8,
                cache_bytes: 16 << 30,
                active: true,
            },
        ];
        Topology::from_parts(0, 2, nodes, ecs).unwrap()
    }

    fn single_node() -> Topology {
        let nodes = vec![Node {
            id: NodeId(0),
            parent: None,
            children: vec![],
            depth: 0,
            leaf_pos: Some(0),
        }];
        let ecs = vec![crate::topology::EcNode {
            id: NodeId(0),
            capacity_units: 14,
            cores: 6,
            cache_bytes: 16 << 30,
            active: true,
        }];
        Topology::from_parts(0, 2, nodes, ecs).unwrap()
    }

    #[test]
    fn codec_corners() {
        assert_eq!(encode_class(1, 1, 6).unwrap(), 1);
        assert_eq!(encode_class(6, 6, 6).unwrap(), 36);
        assert_eq!(encode_class(2, 3, 6).unwrap(), 9);
        assert_eq!(decode_class(1, 6).unwrap(), (1, 1));
        assert_eq!(decode_class(36, 6).unwrap(), (6, 6));
        assert_eq!(decode_class(9, 6).unwrap(), (2, 3));
        assert!(encode_class(0, 1, 6).is_err());
        assert!(encode_class(1, 7, 6).is_err());
        assert!(decode_class(0, 6).is_err());
        assert!(decode_class(37, 6).is_err());
    }

    #[test]
    fn degenerate_single_node_delay_is_pure_compute() {
        let t = single_node();
        let p = DelayParams::default();
        let r = request_at(NodeId(0), 1.0, &[]);
        let a = Assignment {
            l_eta: NodeId(0),
            l_rho: NodeId(0),
        };
        let d = expected_delay(&t, &p, &r, a).unwrap();
        assert_eq!(d, (60.0 + 30.0) / 6.0);
    }

    #[test]
    fn split_placement_on_two_leaves_hand_value() {
        // Hand evaluation with defaults: compute 60/4 + 30/8 = 18.75;
        // network 0 (s to lEta) + 2 (lEta to lRho) + 1.0·2 (back to s) = 4.
        let t = two_leaf();
        let p = DelayParams::default();
        let r = request_at(NodeId(1), 1.0, &[]);
        let a = Assignment {
            l_eta: NodeId(1),
            l_rho: NodeId(2),
        };
        let d = expected_delay(&t, &p, &r, a).unwrap();
        assert!((d - 22.75).abs() < 1e-12);
    }

    #[test]
    fn colocated_storage_removes_the_return_leg() {
        let t = two_leaf();
        let p = DelayParams::default();
        let r = request_at(NodeId(1), 1.0, &[]);
        let a = Assignment {
            l_eta: NodeId(2),
            l_rho: NodeId(1),
        };
        // 60/8 + 30/4 = 15; network 2 + 2 + 1.0·0 = 4.
        let d = expected_delay(&t, &p, &r, a).unwrap();
        assert!((d - 19.0).abs() < 1e-12);
    }

    #[test]
    fn mobility_weighted_last_leg() {
        let t = two_leaf();
        let p = DelayParams::default();
        let r = request_at(NodeId(1), 0.25, &[(NodeId(2), 0.75)]);
        let a = Assignment {
            l_eta: NodeId(1),
            l_rho: NodeId(1),
        };
        // Compute 60/4 + 30/4 = 22.5; network 0 + 0 + 0.25·0 + 0.75·2 = 1.5.
        let d = expected_delay(&t, &p, &r, a).unwrap();
        assert!((d - 24.0).abs() < 1e-12);
    }

    #[test]
    fn cloud_delay_is_routing_plus_penalty() {
        let t = two_leaf();
        let p = DelayParams::default();
        let r = request_at(NodeId(1), 0.25, &[(NodeId(2), 0.75)]);
        // Hops: 1 up, 0.25·1 back, 0.75·1 across; penalty 50.
        let d = cloud_delay(&t, &p, &r).unwrap();
        assert!((d - 52.0).abs() < 1e-12);
        let dec = ServiceDecision {
            request: r.id,
            assignment: None,
        };
        assert_eq!(decision_delay(&t, &p, &r, &dec).unwrap(), d);
    }

    #[test]
    fn inactive_ec_is_rejected() {
        let t = two_leaf();
        let p = DelayParams::default();
        let r = request_at(NodeId(1), 1.0, &[]);
        let a = Assignment {
            l_eta: NodeId(0),
            l_rho: NodeId(1),
        };
        assert!(matches!(
            expected_delay(&t, &p, &r, a),
            Err(Error::InactiveEc(NodeId(0)))
        ));
    }

    #[test]
    fn both_functions_consume_units_at_one_ec() {
        let mut t = two_leaf();
        t.set_uniform_capacity(2);
        let r = request_at(NodeId(1), 1.0, &[]);
        let a = Assignment {
            l_eta: NodeId(1),
            l_rho: NodeId(1),
        };
        let ledger = LoadLedger::new().apply_assignment(&t, &r, a).unwrap();
        assert_eq!(ledger.units_used(NodeId(1)), 2);

        t.set_uniform_capacity(1);
        let err = LoadLedger::new().apply_assignment(&t, &r, a).unwrap_err();
        assert_eq!(err, Violation::Units { ec: NodeId(1) });
    }

    #[test]
    fn shared_aro_bytes_count_once() {
        let t = two_leaf();
        let a = Assignment {
            l_eta: NodeId(1),
            l_rho: NodeId(2),
        };
        let mut first = request_at(NodeId(1), 1.0, &[]);
        first.aro_id = AroId(9);
        let mut second = first.clone();
        second.id = RequestId(1);

        let ledger = LoadLedger::new().apply_assignment(&t, &first, a).unwrap();
        let bytes_after_one = ledger.cached_bytes(NodeId(2));
        let ledger = ledger.apply_assignment(&t, &second, a).unwrap();
        assert_eq!(ledger.cached_bytes(NodeId(2)), bytes_after_one);
        assert_eq!(ledger.units_used(NodeId(2)), 2);
    }

    #[test]
    fn cache_overflow_reports_the_storage_ec() {
        let mut t = two_leaf();
        // Shrink the cache below one ARO.
        let nodes = t.nodes().to_vec();
        let mut ecs = t.ec_sites().to_vec();
        for ec in &mut ecs {
            ec.cache_bytes = 10;
        }
        t = Topology::from_parts(0, 2, nodes, ecs).unwrap();
        let r = request_at(NodeId(1), 1.0, &[]);
        let a = Assignment {
            l_eta: NodeId(1),
            l_rho: NodeId(2),
        };
        let err = LoadLedger::new().apply_assignment(&t, &r, a).unwrap_err();
        assert_eq!(err, Violation::Cache { ec: NodeId(2) });
    }

    #[test]
    fn violation_leaves_the_ledger_unchanged() {
        let mut t = two_leaf();
        t.set_uniform_capacity(1);
        let r = request_at(NodeId(1), 1.0, &[]);
        let a = Assignment {
            l_eta: NodeId(1),
            l_rho: NodeId(1),
        };
        let ledger = LoadLedger::new();
        assert!(ledger.apply_assignment(&t, &r, a).is_err());
        assert_eq!(ledger, LoadLedger::new());
    }

    #[test]
    fn feasible_assignments_enumerate_in_class_order() {
        let t = two_leaf();
        let r = request_at(NodeId(1), 1.0, &[]);
        let all = LoadLedger::new().feasible_assignments(&t, &r);
        assert_eq!(all.len(), 4);
        let idx: Vec<u32> = all.iter().map(|a| a.class_index(&t).unwrap()).collect();
        assert_eq!(idx, vec![1, 2, 3, 4]);
    }
}
