//! MAR request generation: each request carries a source AR, a mobility
//! distribution over the adjacent ARs, and an ARO to be cached where its
//! storage function runs.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::Error;
use crate::rng::seeded_rng;
use crate::topology::Topology;
use crate::{AroId, NodeId, RequestId};

/// Smallest ARO payload drawn by default (~0.12 MiB).
pub const DEFAULT_ARO_MIN_BYTES: u64 = 125_829;
/// Largest ARO payload drawn by default (2 MiB).
pub const DEFAULT_ARO_MAX_BYTES: u64 = 2 << 20;

/// The two service functions of a decomposed MAR service, executed in a
/// fixed order: compute first, storage second.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FunctionKind {
    ComputeIntensive,
    StorageIntensive,
}

/// One MAR service request.
#[derive(Debug, Clone, PartialEq)]
pub struct Request {
    pub id: RequestId,
    /// Leaf AR the user starts at, co-located with an active EC.
    pub source: NodeId,
    /// Probability the user stays at the source AR.
    pub stay_prob: f64,
    /// Move probabilities keyed by adjacent AR; together with stay_prob
    /// these sum to 1.
    pub mobility: BTreeMap<NodeId, f64>,
    pub aro_id: AroId,
    pub aro_bytes: u64,
    /// Free capacity units each function consumes at its EC.
    pub units_per_function: u32,
}

impl Request {
    /// Checks the mobility distribution against the topology: keys must be
    /// ARs adjacent to the source and the total mass must be 1.
    pub fn validate(&self, t: &Topology) -> Result<(), Error> {
        let adj = t.adjacent_ars(self.source)?;
        let mut total = self.stay_prob;
        if self.stay_prob < 0.0 {
            return Err(Error::InvalidParameter("stay probability is negative"));
        }
        for (&node, &p) in &self.mobility {
            if !adj.contains(&node) {
                return Err(Error::InvalidParameter(
                    "mobility target is not adjacent to the source",
                ));
            }
            if p < 0.0 {
                return Err(Error::InvalidParameter("move probability is negative"));
            }
            total += p;
        }
        if crate::fmath::abs(total - 1.0) > 1e-9 {
            return Err(Error::InvalidParameter("mobility masses do not sum to 1"));
        }
        Ok(())
    }

    /// The AR the user most probably ends up at: argmax over staying at the
    /// source and each move target, ties broken by lowest leaf position.
    pub fn most_likely_destination(&self, t: &Topology) -> Result<NodeId, Error> {
        let mut best = (self.stay_prob, t.leaf_pos(self.source)?, self.source);
        for (&node, &p) in &self.mobility {
            let pos = t.leaf_pos(node)?;
            if p > best.0 || (p == best.0 && pos < best.1) {
                best = (p, pos, node);
            }
        }
        Ok(best.2)
    }
}

/// Knobs for request generation beyond the common defaults.
#[derive(Debug, Clone)]
pub struct WorkloadOptions {
    pub aro_min_bytes: u64,
    pub aro_max_bytes: u64,
    /// When set, ARO ids are drawn from a pool of this size so several
    /// requests can share content; otherwise every request gets its own.
    pub aro_pool: Option<u32>,
}

impl Default for WorkloadOptions {
    fn default() -> Self {
        WorkloadOptions {
            aro_min_bytes: DEFAULT_ARO_MIN_BYTES,
            aro_max_bytes: DEFAULT_ARO_MAX_BYTES,
            aro_pool: None,
        }
    }
}

/// Generates `count` requests with default options.
pub fn generate_requests(t: &Topology, count: u32, seed: u64) -> Result<Vec<Request>, Error> {
    generate_requests_with(t, count, seed, &WorkloadOptions::default())
}

/// Copies the requests with mobility switched off: every user stays at its
/// source with probability 1.
pub fn freeze_mobility(rs: &[Request]) -> Vec<Request> {
    rs.iter()
        .map(|r| {
            let mut fr = r.clone();
            fr.stay_prob = 1.0;
            fr.mobility.clear();
            fr
        })
        .collect()
}

/// Generates `count` requests. Sources are uniform over the ARs of active
/// ECs. Mobility draws a total move mass in [0.5, 1.0] and splits it across
/// the 1 or 2 adjacent ARs; the stay probability is the remainder.
pub fn generate_requests_with(
    t: &Topology,
    count: u32,
    seed: u64,
    opts: &WorkloadOptions,
) -> Result<Vec<Request>, Error> {
    if count == 0 {
        return Err(Error::InvalidParameter("request count must be positive"));
    }
    if opts.aro_min_bytes > opts.aro_max_bytes {
        return Err(Error::InvalidParameter("ARO size range is inverted"));
    }
    let sources = t.active_ecs();
    let mut rng = seeded_rng(seed);
    let mut out = Vec::with_capacity(count as usize);
    for i in 0..count {
        let source = sources[rng.gen_range(0..sources.len())];
        let adj = t.adjacent_ars(source)?;
        let mut mobility = BTreeMap::new();
        let stay_prob = if adj.is_empty() {
            1.0
        } else {
            let move_mass: f64 = rng.gen_range(0.5..=1.0);
            if adj.len() == 1 {
                mobility.insert(adj[0], move_mass);
            } else {
                let split: f64 = rng.gen_range(0.0..=1.0);
                mobility.insert(adj[0], move_mass * split);
                mobility.insert(adj[1], move_mass * (1.0 - split));
            }
            1.0 - move_mass
        };
        let aro_bytes = rng.gen_range(opts.aro_min_bytes..=opts.aro_max_bytes);
        let aro_id = match opts.aro_pool {
            Some(pool) => AroId(rng.gen_range(0..pool)),
            None => AroId(i),
        };
        out.push(Request {
            id: RequestId(i),
            source,
            stay_prob,
            mobility,
            aro_id,
            aro_bytes,
            units_per_function: 1,
        });
    }
    Ok(out)
}
