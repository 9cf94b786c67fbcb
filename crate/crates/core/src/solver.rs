//! Exact minimization of total expected delay over joint assignments.
//! `solve_optimal` is the branch-and-bound production path;
//! `solve_exhaustive` is a deliberately separate enumeration used to verify
//! it on small instances.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use crate::error::Error;
use crate::placement::{
    decode_class, expected_delay, Assignment, DelayParams, LoadLedger, RoutePlan, Violation,
};
use crate::topology::Topology;
use crate::workload::Request;
use crate::AroId;

/// Slack for bound pruning so exact-tie subtrees stay explorable.
const BOUND_EPS: f64 = 1e-9;
/// Cap on the joint state count `solve_exhaustive` accepts.
const EXHAUSTIVE_LIMIT: u64 = 10_000_000;

/// A complete joint assignment in request-id order plus its objective.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub plans: Vec<RoutePlan>,
    pub objective_ms: f64,
}

/// Precomputed per-instance tables shared by both solvers.
struct Instance<'a> {
    t: &'a Topology,
    rs: Vec<&'a Request>,
    m: usize,
    caps: Vec<u32>,
    cache_caps: Vec<u64>,
    /// class−1 → (lEta ordinal−1, lRho ordinal−1)
    pairs: Vec<(usize, usize)>,
    /// [request][class−1] → expected delay
    delays: Vec<Vec<f64>>,
}

impl<'a> Instance<'a> {
    fn build(t: &'a Topology, p: &DelayParams, rs: &'a [Request]) -> Result<Instance<'a>, Error> {
        p.validate()?;
        let mut by_id: Vec<&Request> = rs.iter().collect();
        by_id.sort_by_key(|r| r.id);
        let m = t.active_ecs().len();
        let caps: Vec<u32> = t
            .active_ecs()
            .iter()
            .map(|&ec| t.ec(ec).unwrap().capacity_units)
            .collect();
        let cache_caps: Vec<u64> = t
            .active_ecs()
            .iter()
            .map(|&ec| t.ec(ec).unwrap().cache_bytes)
            .collect();
        let mut pairs = Vec::with_capacity(m * m);
        for class in 1..=(m * m) as u32 {
            let (e, r) = decode_class(class, m as u32)?;
            pairs.push((e as usize - 1, r as usize - 1));
        }
        let mut delays = Vec::with_capacity(by_id.len());
        for r in &by_id {
            let mut row = Vec::with_capacity(m * m);
            for class in 1..=(m * m) as u32 {
                let a = Assignment::from_class(t, class)?;
                row.push(expected_delay(t, p, r, a)?);
            }
            delays.push(row);
        }
        Ok(Instance {
            t,
            rs: by_id,
            m,
            caps,
            cache_caps,
            pairs,
            delays,
        })
    }

    /// Objective of a complete class vector, summed in request-id order.
    /// Every solver path scores candidates through this exact loop so equal
    /// assignments compare bit-identically.
    fn objective(&self, classes: &[u32]) -> f64 {
        let mut total = 0.0;
        for (i, &c) in classes.iter().enumerate() {
            total += self.delays[i][c as usize - 1];
        }
        total
    }

    fn to_solution(&self, classes: &[u32]) -> Result<Solution, Error> {
        let mut plans = Vec::with_capacity(classes.len());
        for (i, &c) in classes.iter().enumerate() {
            let a = Assignment::from_class(self.t, c)?;
            plans.push(RoutePlan::new(self.t, self.rs[i], a)?);
        }
        Ok(Solution {
            plans,
            objective_ms: self.objective(classes),
        })
    }

    /// Names the constraint blocking the instance: the first request (by id)
    /// with no individually feasible assignment, or `fallback` when only the
    /// joint combination is binding.
    fn infeasibility(&self, fallback: Option<(usize, Violation)>) -> Error {
        let empty = LoadLedger::new();
        for r in &self.rs {
            let mut first: Option<Violation> = None;
            let mut any = false;
            for class in 1..=(self.m * self.m) as u32 {
                let a = Assignment::from_class(self.t, class).unwrap();
                match empty.fits(self.t, r, a) {
                    Ok(()) => {
                        any = true;
                        break;
                    }
                    Err(v) => {
                        first.get_or_insert(v);
                    }
                }
            }
            if !any {
                return violation_error(r.id, first.unwrap());
            }
        }
        match fallback {
            Some((idx, v)) => violation_error(self.rs[idx].id, v),
            None => Error::InvalidParameter("instance reported infeasible without a witness"),
        }
    }
}

fn violation_error(request: crate::RequestId, v: Violation) -> Error {
    match v {
        Violation::Units { ec } => Error::Infeasible {
            request,
            ec,
            cache_bound: false,
        },
        Violation::Cache { ec } => Error::Infeasible {
            request,
            ec,
            cache_bound: true,
        },
    }
}

/// Mutable capacity/cache state over active-EC ordinals, with undo.
struct FastLedger {
    units: Vec<u32>,
    cache_bytes: Vec<u64>,
    cached: Vec<BTreeSet<AroId>>,
    free_units: u64,
}

struct Undo {
    e: usize,
    r: usize,
    u: u32,
    inserted_aro: Option<(usize, AroId, u64)>,
}

impl FastLedger {
    fn new(inst: &Instance) -> FastLedger {
        FastLedger {
            units: alloc::vec![0; inst.m],
            cache_bytes: alloc::vec![0; inst.m],
            cached: alloc::vec![BTreeSet::new(); inst.m],
            free_units: inst.caps.iter().map(|&c| u64::from(c)).sum(),
        }
    }

    fn fits(&self, inst: &Instance, req: &Request, class: u32) -> Result<(), Violation> {
        let (e, r) = inst.pairs[class as usize - 1];
        let u = req.units_per_function;
        let need_e = if e == r { 2 * u } else { u };
        if self.units[e] + need_e > inst.caps[e] {
            return Err(Violation::Units {
                ec: inst.t.active_ecs()[e],
            });
        }
        if e != r && self.units[r] + u > inst.caps[r] {
            return Err(Violation::Units {
                ec: inst.t.active_ecs()[r],
            });
        }
        if !self.cached[r].contains(&req.aro_id)
            && self.cache_bytes[r] + req.aro_bytes > inst.cache_caps[r]
        {
            return Err(Violation::Cache {
                ec: inst.t.active_ecs()[r],
            });
        }
        Ok(())
    }

    fn try_apply(&mut self, inst: &Instance, req: &Request, class: u32) -> Result<Undo, Violation> {
        self.fits(inst, req, class)?;
        let (e, r) = inst.pairs[class as usize - 1];
        let u = req.units_per_function;
        let mut inserted_aro = None;
        if !self.cached[r].contains(&req.aro_id) {
            self.cached[r].insert(req.aro_id);
            self.cache_bytes[r] += req.aro_bytes;
            inserted_aro = Some((r, req.aro_id, req.aro_bytes));
        }
        self.units[e] += u;
        self.units[r] += u;
        self.free_units -= u64::from(2 * u);
        Ok(Undo {
            e,
            r,
            u,
            inserted_aro,
        })
    }

    fn undo(&mut self, undo: Undo) {
        self.units[undo.e] -= undo.u;
        self.units[undo.r] -= undo.u;
        self.free_units += u64::from(2 * undo.u);
        if let Some((r, aro, bytes)) = undo.inserted_aro {
            self.cached[r].remove(&aro);
            self.cache_bytes[r] -= bytes;
        }
    }
}

/// Subgradient rounds when fitting capacity multipliers at the root.
const MULTIPLIER_ROUNDS: usize = 300;

struct Search<'a, 'b> {
    inst: &'b Instance<'a>,
    /// Exploration order: request indices by descending regret.
    order: Vec<usize>,
    /// [request][rank] → (delay, class), ascending.
    cands: Vec<Vec<(f64, u32)>>,
    /// Σ over order[k..] of unit demand.
    suffix_demand: Vec<u64>,
    /// Capacity price per active EC, ≥ 0. Any such vector yields a valid
    /// bound: a request's true delay plus the prices of the units it
    /// occupies is at least its cheapest priced class, and the prices of
    /// all occupied units never exceed the priced residual capacity.
    lam: Vec<f64>,
    /// Σ over order[k..] of each request's cheapest priced class.
    priced_suffix: Vec<f64>,
    lam_active: bool,
    /// [request][rank] → (priced delay, raw delay, class), priced-ascending.
    /// Branching follows this order so the priced child bound cuts the loop.
    branch_cands: Vec<Vec<(f64, f64, u32)>>,
    ledger: FastLedger,
    chosen: Vec<u32>,
    partial: f64,
    best: Option<(f64, Vec<u32>)>,
    deepest_fail: Option<(usize, usize, Violation)>,
}

impl<'a, 'b> Search<'a, 'b> {
    fn new(inst: &'b Instance<'a>) -> Search<'a, 'b> {
        let n = inst.rs.len();
        let mut cands: Vec<Vec<(f64, u32)>> = Vec::with_capacity(n);
        for row in &inst.delays {
            let mut c: Vec<(f64, u32)> = row
                .iter()
                .enumerate()
                .map(|(i, &d)| (d, i as u32 + 1))
                .collect();
            c.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            cands.push(c);
        }
        // Regret order: requests whose best choice beats their second-best
        // by the most are decided first.
        let mut order: Vec<usize> = (0..n).collect();
        let regret = |i: usize| -> f64 {
            let c = &cands[i];
            if c.len() < 2 {
                0.0
            } else {
                c[1].0 - c[0].0
            }
        };
        order.sort_by(|&a, &b| {
            regret(b)
                .partial_cmp(&regret(a))
                .unwrap()
                .then(a.cmp(&b))
        });
        let mut suffix_demand = alloc::vec![0u64; n + 1];
        for k in (0..n).rev() {
            let i = order[k];
            suffix_demand[k] =
                suffix_demand[k + 1] + u64::from(2 * inst.rs[i].units_per_function);
        }
        let branch_cands = cands
            .iter()
            .map(|c| c.iter().map(|&(d, class)| (d, d, class)).collect())
            .collect();
        Search {
            inst,
            order,
            cands,
            suffix_demand,
            lam: alloc::vec![0.0; inst.m],
            priced_suffix: alloc::vec![0.0; n + 1],
            lam_active: false,
            branch_cands,
            ledger: FastLedger::new(inst),
            chosen: alloc::vec![0; n],
            partial: 0.0,
            best: None,
            deepest_fail: None,
        }
    }

    /// One dual evaluation: each request takes its cheapest class under
    /// unit prices `lam`, without looking at capacities. Returns the bound
    /// value for the full instance and the unit usage that choice implies.
    fn priced_minima(&self, lam: &[f64]) -> (f64, Vec<f64>, Vec<u64>) {
        let m = self.inst.m;
        let mut mins = Vec::with_capacity(self.inst.rs.len());
        let mut usage = alloc::vec![0u64; m];
        for (i, row) in self.inst.delays.iter().enumerate() {
            let u = f64::from(self.inst.rs[i].units_per_function);
            let mut cheapest = f64::INFINITY;
            let mut arg = 0usize;
            for (c, &d) in row.iter().enumerate() {
                let (e, r) = self.inst.pairs[c];
                let priced = d + u * (lam[e] + lam[r]);
                if priced < cheapest {
                    cheapest = priced;
                    arg = c;
                }
            }
            mins.push(cheapest);
            let (e, r) = self.inst.pairs[arg];
            let units = u64::from(self.inst.rs[i].units_per_function);
            usage[e] += units;
            usage[r] += units;
        }
        let value: f64 = mins.iter().sum::<f64>()
            - lam
                .iter()
                .zip(&self.inst.caps)
                .map(|(l, &c)| l * f64::from(c))
                .sum::<f64>();
        (value, mins, usage)
    }

    /// Fits the capacity prices by projected subgradient ascent against the
    /// incumbent objective, then freezes the per-request priced minima into
    /// suffix sums for O(m) node bounds.
    fn fit_prices(&mut self, incumbent: f64) {
        let m = self.inst.m;
        let n = self.inst.rs.len();
        let mut lam = alloc::vec![0.0; m];
        let (mut best_value, _, _) = self.priced_minima(&lam);
        let mut best_lam = lam.clone();
        let mut step_scale = 2.0;
        let mut stalled = 0usize;
        for _ in 0..MULTIPLIER_ROUNDS {
            let (value, _, usage) = self.priced_minima(&lam);
            if value > best_value + 1e-12 {
                best_value = value;
                best_lam.copy_from_slice(&lam);
                stalled = 0;
            } else {
                stalled += 1;
                if stalled >= 15 {
                    step_scale *= 0.5;
                    stalled = 0;
                    if step_scale < 1e-4 {
                        break;
                    }
                }
            }
            let slack: Vec<f64> = usage
                .iter()
                .zip(&self.inst.caps)
                .map(|(&used, &cap)| used as f64 - f64::from(cap))
                .collect();
            let norm: f64 = slack.iter().map(|s| s * s).sum();
            let room = incumbent - value;
            if norm == 0.0 || room <= 0.0 {
                break;
            }
            let step = step_scale * room / norm;
            for (l, s) in lam.iter_mut().zip(&slack) {
                *l = (*l + step * s).max(0.0);
            }
        }
        let (_, mins, _) = self.priced_minima(&best_lam);
        self.lam = best_lam;
        for (i, row) in self.inst.delays.iter().enumerate() {
            let u = f64::from(self.inst.rs[i].units_per_function);
            let mut c: Vec<(f64, f64, u32)> = row
                .iter()
                .enumerate()
                .map(|(idx, &d)| {
                    let (e, r) = self.inst.pairs[idx];
                    (d + u * (self.lam[e] + self.lam[r]), d, idx as u32 + 1)
                })
                .collect();
            c.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.2.cmp(&b.2)));
            self.branch_cands[i] = c;
        }
        // Reorder the requests by priced regret: under prices, the requests
        // that most resent losing their cheapest class go first.
        let regret = |i: usize| -> f64 {
            let c = &self.branch_cands[i];
            if c.len() < 2 {
                0.0
            } else {
                c[1].0 - c[0].0
            }
        };
        self.order.sort_by(|&a, &b| {
            regret(b)
                .partial_cmp(&regret(a))
                .unwrap()
                .then(a.cmp(&b))
        });
        for k in (0..n).rev() {
            let i = self.order[k];
            self.suffix_demand[k] =
                self.suffix_demand[k + 1] + u64::from(2 * self.inst.rs[i].units_per_function);
            self.priced_suffix[k] = self.priced_suffix[k + 1] + mins[i];
        }
        self.lam_active = true;
    }

    /// Σ price × free units under the current ledger.
    fn priced_residual(&self) -> f64 {
        self.lam
            .iter()
            .zip(&self.inst.caps)
            .zip(&self.ledger.units)
            .map(|((l, &cap), &used)| l * f64::from(cap - used))
            .sum()
    }

    fn seed_incumbent(&mut self, classes: Vec<u32>) {
        let obj = self.inst.objective(&classes);
        self.offer(obj, classes);
    }

    fn offer(&mut self, obj: f64, classes: Vec<u32>) {
        match &self.best {
            Some((best_obj, best_vec)) => {
                if obj < *best_obj || (obj == *best_obj && classes < *best_vec) {
                    self.best = Some((obj, classes));
                }
            }
            None => self.best = Some((obj, classes)),
        }
    }

    /// Lower bound on completing order[k..]: each remaining request
    /// independently takes its cheapest class that fits the current ledger
    /// on its own. Any feasible completion satisfies every per-request
    /// residual check, so the sum never overshoots. `None` means some
    /// remaining request cannot be placed at all under this ledger. The
    /// second value is the contribution of the branch request order[k].
    fn residual_suffix_min(&mut self, k: usize) -> Option<(f64, f64)> {
        let mut total = 0.0;
        let mut head = 0.0;
        for pos in k..self.order.len() {
            let i = self.order[pos];
            let mut cheapest = None;
            let mut first_violation: Option<Violation> = None;
            for &(delay, class) in &self.cands[i] {
                match self.ledger.fits(self.inst, self.inst.rs[i], class) {
                    Ok(()) => {
                        cheapest = Some(delay);
                        break;
                    }
                    Err(v) => {
                        first_violation.get_or_insert(v);
                    }
                }
            }
            match cheapest {
                Some(d) => {
                    total += d;
                    if pos == k {
                        head = d;
                    }
                }
                None => {
                    let v = first_violation.unwrap();
                    let deeper = self.deepest_fail.map_or(true, |(dk, _, _)| pos > dk);
                    if deeper {
                        self.deepest_fail = Some((pos, i, v));
                    }
                    return None;
                }
            }
        }
        Some((total, head))
    }

    fn dfs(&mut self, k: usize) {
        let n = self.order.len();
        if k == n {
            let obj = self.inst.objective(&self.chosen);
            let classes = self.chosen.clone();
            self.offer(obj, classes);
            return;
        }
        if self.ledger.free_units < self.suffix_demand[k] {
            return;
        }
        // Priced bound first: O(m), and tightens as free units vanish.
        let priced_resid = if self.lam_active {
            self.priced_residual()
        } else {
            0.0
        };
        if let Some((best_obj, _)) = &self.best {
            if self.lam_active
                && self.partial + self.priced_suffix[k] - priced_resid > *best_obj + BOUND_EPS
            {
                return;
            }
        }
        let rest = match self.residual_suffix_min(k) {
            None => return,
            Some((res_min, head)) => {
                if let Some((best_obj, _)) = &self.best {
                    if self.partial + res_min > *best_obj + BOUND_EPS {
                        return;
                    }
                }
                res_min - head
            }
        };
        let i = self.order[k];
        let mut first_violation: Option<Violation> = None;
        let mut placed_any = false;
        for rank in 0..self.branch_cands[i].len() {
            let (priced, delay, class) = self.branch_cands[i][rank];
            if let Some((best_obj, _)) = &self.best {
                if self.lam_active {
                    // Priced child bound: the candidate pays its own unit
                    // prices, the rest ride on the suffix minima. The loop
                    // is priced-ascending, so the cut is final.
                    let child = self.partial + priced + self.priced_suffix[k + 1] - priced_resid;
                    if child > *best_obj + BOUND_EPS {
                        break;
                    }
                } else if self.partial + delay + rest > *best_obj + BOUND_EPS {
                    // Without prices the list is delay-sorted and the same
                    // reasoning applies to the residual bound.
                    break;
                }
                // `rest` stays valid after any apply: shrinking capacity
                // can only raise the other requests' individual minima.
                if self.partial + delay + rest > *best_obj + BOUND_EPS {
                    continue;
                }
            }
            match self.ledger.try_apply(self.inst, self.inst.rs[i], class) {
                Ok(undo) => {
                    placed_any = true;
                    self.chosen[i] = class;
                    self.partial += delay;
                    self.dfs(k + 1);
                    self.partial -= delay;
                    self.ledger.undo(undo);
                }
                Err(v) => {
                    first_violation.get_or_insert(v);
                }
            }
        }
        if !placed_any {
            if let Some(v) = first_violation {
                let deeper = self.deepest_fail.map_or(true, |(dk, _, _)| k > dk);
                if deeper {
                    self.deepest_fail = Some((k, i, v));
                }
            }
        }
    }
}

/// Branch-and-bound over requests ordered by descending regret. The bound
/// under a node is the partial objective plus each unassigned request's
/// capacity-free minimum; subtrees are cut once the bound clears the
/// incumbent, with slack left so exact ties still surface and settle on the
/// lexicographically smallest class vector.
pub fn solve_optimal(t: &Topology, p: &DelayParams, rs: &[Request]) -> Result<Solution, Error> {
    let inst = Instance::build(t, p, rs)?;
    if inst.rs.is_empty() {
        return Ok(Solution {
            plans: Vec::new(),
            objective_ms: 0.0,
        });
    }
    let mut search = Search::new(&inst);
    let seeds = [
        crate::heuristics::cfs(t, p, rs),
        crate::heuristics::util(t, p, rs, crate::heuristics::UTIL_THRESHOLD),
    ];
    for seed in seeds.into_iter().flatten() {
        // Heuristic runs that fell back to the cloud anywhere cannot seed:
        // the search space covers edge-only assignments.
        if seed.iter().all(|d| d.assignment.is_some()) {
            let mut by_id = seed;
            by_id.sort_by_key(|d| d.request);
            let classes: Result<Vec<u32>, Error> = by_id
                .iter()
                .map(|d| d.assignment.unwrap().class_index(t))
                .collect();
            search.seed_incumbent(classes?);
        }
    }
    if let Some((incumbent, _)) = &search.best {
        let incumbent = *incumbent;
        search.fit_prices(incumbent);
    }
    search.dfs(0);
    let fallback = search.deepest_fail.map(|(_, i, v)| (i, v));
    match search.best.take() {
        Some((_, classes)) => inst.to_solution(&classes),
        None => Err(inst.infeasibility(fallback)),
    }
}

/// Full enumeration oracle. Walks class vectors lexicographically in
/// request-id order over the public ledger API, so it shares no search
/// machinery with `solve_optimal`. Refuses instances beyond the state guard.
pub fn solve_exhaustive(t: &Topology, p: &DelayParams, rs: &[Request]) -> Result<Solution, Error> {
    let inst = Instance::build(t, p, rs)?;
    let n = inst.rs.len();
    if n == 0 {
        return Ok(Solution {
            plans: Vec::new(),
            objective_ms: 0.0,
        });
    }
    let classes_per = (inst.m * inst.m) as u64;
    let mut states: u64 = 1;
    for _ in 0..n {
        states = match states.checked_mul(classes_per) {
            Some(v) if v <= EXHAUSTIVE_LIMIT => v,
            _ => {
                return Err(Error::SearchSpaceTooLarge {
                    states: u64::MAX,
                    limit: EXHAUSTIVE_LIMIT,
                })
            }
        };
    }

    struct Enum<'a, 'b> {
        inst: &'b Instance<'a>,
        chosen: Vec<u32>,
        best: Option<(f64, Vec<u32>)>,
    }
    impl Enum<'_, '_> {
        fn walk(&mut self, i: usize, ledger: &LoadLedger, partial: f64) {
            if i == self.inst.rs.len() {
                // Lexicographic order visits smaller vectors first, so a
                // strict comparison keeps the tie-rule winner.
                if self.best.as_ref().map_or(true, |(b, _)| partial < *b) {
                    self.best = Some((partial, self.chosen.clone()));
                }
                return;
            }
            let r = self.inst.rs[i];
            for class in 1..=(self.inst.m * self.inst.m) as u32 {
                let a = Assignment::from_class(self.inst.t, class).unwrap();
                if let Ok(next) = ledger.apply_assignment(self.inst.t, r, a) {
                    self.chosen[i] = class;
                    self.walk(i + 1, &next, partial + self.inst.delays[i][class as usize - 1]);
                }
            }
        }
    }

    let mut e = Enum {
        inst: &inst,
        chosen: alloc::vec![0; n],
        best: None,
    };
    e.walk(0, &LoadLedger::new(), 0.0);
    match e.best.take() {
        Some((_, classes)) => inst.to_solution(&classes),
        None => Err(inst.infeasibility(None)),
    }
}

/// The mobility-blind planner: every request is frozen at its source
/// (stay probability 1) before solving. Plans and objective refer to the
/// frozen instance.
pub fn solve_no_mobility(t: &Topology, p: &DelayParams, rs: &[Request]) -> Result<Solution, Error> {
    solve_optimal(t, p, &crate::workload::freeze_mobility(rs))
}
