//! Baseline placement schemes. All of them respect the same capacity and
//! cache rules as the exact solver; requests that fit nowhere fall back to
//! the cloud instead of failing.

use alloc::vec::Vec;

use rand::Rng;

use crate::error::Error;
use crate::placement::{Assignment, DelayParams, LoadLedger, RoutePlan, ServiceDecision};
use crate::rng::seeded_rng;
use crate::solver::solve_no_mobility;
use crate::topology::Topology;
use crate::workload::Request;
use crate::NodeId;

/// Occupancy fraction beyond which UTIL diverts to a neighbor.
pub const UTIL_THRESHOLD: f64 = 0.8;

fn by_id(rs: &[Request]) -> Vec<&Request> {
    let mut v: Vec<&Request> = rs.iter().collect();
    v.sort_by_key(|r| r.id);
    v
}

/// Active ECs sorted by distance from `from`, nearest first, ties toward
/// the lower leaf position.
fn nearest_order(t: &Topology, from: NodeId) -> Result<Vec<NodeId>, Error> {
    let mut order: Vec<(u32, u32, NodeId)> = Vec::with_capacity(t.active_ecs().len());
    for &ec in t.active_ecs() {
        order.push((t.hop_distance(from, ec)?, t.leaf_pos(ec)?, ec));
    }
    order.sort();
    Ok(order.into_iter().map(|(_, _, ec)| ec).collect())
}

/// Closest-first placement: both functions go to the nearest EC with room;
/// when it cannot take both, the storage function spills to the next
/// nearest EC that fits, and the cloud absorbs the rest.
fn place_closest_first(
    t: &Topology,
    ledger: &mut LoadLedger,
    r: &Request,
    candidates: &[NodeId],
) -> Result<Option<Assignment>, Error> {
    let eta = candidates.iter().copied().find(|&ec| {
        let cap = t.ec(ec).map(|e| e.capacity_units).unwrap_or(0);
        ledger.units_used(ec) + r.units_per_function <= cap
    });
    let Some(l_eta) = eta else {
        return Ok(None);
    };
    for &l_rho in candidates {
        let a = Assignment { l_eta, l_rho };
        if let Ok(next) = ledger.apply_assignment(t, r, a) {
            *ledger = next;
            return Ok(Some(a));
        }
    }
    Ok(None)
}

/// CFS: serve each request at the nearest available EC.
pub fn cfs(t: &Topology, p: &DelayParams, rs: &[Request]) -> Result<Vec<ServiceDecision>, Error> {
    p.validate()?;
    let mut ledger = LoadLedger::new();
    let mut out = Vec::with_capacity(rs.len());
    for r in by_id(rs) {
        let order = nearest_order(t, r.source)?;
        let assignment = place_closest_first(t, &mut ledger, r, &order)?;
        out.push(ServiceDecision {
            request: r.id,
            assignment,
        });
    }
    Ok(out)
}

/// UTIL: like CFS, but when co-locating at the nearest EC would push its
/// occupancy past `threshold`, the least-loaded adjacent active EC takes
/// over as the primary target.
pub fn util(
    t: &Topology,
    p: &DelayParams,
    rs: &[Request],
    threshold: f64,
) -> Result<Vec<ServiceDecision>, Error> {
    p.validate()?;
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidParameter("threshold must lie in [0, 1]"));
    }
    let mut ledger = LoadLedger::new();
    let mut out = Vec::with_capacity(rs.len());
    for r in by_id(rs) {
        let order = nearest_order(t, r.source)?;
        let nearest = order.iter().copied().find(|&ec| {
            let cap = t.ec(ec).map(|e| e.capacity_units).unwrap_or(0);
            ledger.units_used(ec) + r.units_per_function <= cap
        });
        let mut candidates = order.clone();
        if let Some(near) = nearest {
            let cap = f64::from(t.ec(near).unwrap().capacity_units);
            let after = f64::from(ledger.units_used(near) + 2 * r.units_per_function);
            if after > threshold * cap {
                let backup = t
                    .active_neighbors(near)
                    .into_iter()
                    .min_by_key(|&ec| (ledger.units_used(ec), t.leaf_pos(ec).unwrap()));
                if let Some(b) = backup {
                    candidates.retain(|&ec| ec != b);
                    candidates.insert(0, b);
                }
            }
        }
        let assignment = place_closest_first(t, &mut ledger, r, &candidates)?;
        out.push(ServiceDecision {
            request: r.id,
            assignment,
        });
    }
    Ok(out)
}

/// RandS: uniform draw among the assignments that keep the ledger feasible.
pub fn rand_s(
    t: &Topology,
    p: &DelayParams,
    rs: &[Request],
    seed: u64,
) -> Result<Vec<ServiceDecision>, Error> {
    p.validate()?;
    let mut rng = seeded_rng(seed);
    let mut ledger = LoadLedger::new();
    let mut out = Vec::with_capacity(rs.len());
    for r in by_id(rs) {
        let feasible = ledger.feasible_assignments(t, r);
        let assignment = if feasible.is_empty() {
            None
        } else {
            let a = feasible[rng.gen_range(0..feasible.len())];
            ledger = ledger.apply_assignment(t, r, a).unwrap();
            Some(a)
        };
        out.push(ServiceDecision {
            request: r.id,
            assignment,
        });
    }
    Ok(out)
}

/// FACT: the mobility-blind optimum. Plans are computed with every user
/// frozen at its source, then re-expressed against the real requests so
/// routes carry the true most-likely destinations.
pub fn fact(t: &Topology, p: &DelayParams, rs: &[Request]) -> Result<Vec<RoutePlan>, Error> {
    let frozen = solve_no_mobility(t, p, rs)?;
    let ordered = by_id(rs);
    let mut plans = Vec::with_capacity(ordered.len());
    for (r, plan) in ordered.iter().zip(&frozen.plans) {
        plans.push(RoutePlan::new(t, r, plan.assignment())?);
    }
    Ok(plans)
}
