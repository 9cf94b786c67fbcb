//! Tree-like edge network: a cloud gateway at the root, aggregation routers
//! in the middle and access routers (ARs) at the leaves. EC sites are
//! co-located with non-root routers; a small subset of the leaf sites is
//! active and may host service functions.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::Error;
use crate::rng::seeded_rng;
use crate::NodeId;

/// Placement units available in an EC by default.
pub const DEFAULT_CAPACITY_UNITS: u32 = 14;
/// Cache capacity of an EC by default (16 GiB).
pub const DEFAULT_CACHE_BYTES: u64 = 16 << 30;
/// Inclusive range EC core counts are drawn from.
pub const CORE_RANGE: (u32, u32) = (4, 8);

/// One router in the tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub id: NodeId,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    pub depth: u32,
    /// Left-to-right position among leaves; `None` for interior routers.
    pub leaf_pos: Option<u32>,
}

/// An EC co-located with a router.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EcNode {
    pub id: NodeId,
    pub capacity_units: u32,
    pub cores: u32,
    pub cache_bytes: u64,
    pub active: bool,
}

/// Immutable tree network with EC sites and the active-EC subset.
///
/// Active ECs are kept sorted by leaf position so that class indices derived
/// from their ordinals preserve locality: topologically close ECs get
/// adjacent ordinals.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub seed: u64,
    pub arity: u32,
    nodes: Vec<Node>,
    ecs: Vec<EcNode>,
    ec_index: BTreeMap<NodeId, usize>,
    active_ecs: Vec<NodeId>,
    leaves: Vec<NodeId>,
}

impl Topology {
    /// Builds the complete `arity`-ary tree of minimal depth whose non-root
    /// routers can hold `ec_site_count` EC sites, places the sites on leaves
    /// first (left to right) and then on the deepest interior routers, and
    /// samples `active_count` active ECs uniformly among the leaf sites.
    ///
    /// The same seed always yields the same topology.
    pub fn generate(
        seed: u64,
        ec_site_count: u32,
        active_count: u32,
        arity: u32,
    ) -> Result<Topology, Error> {
        if arity < 2 {
            return Err(Error::InvalidParameter("arity must be at least 2"));
        }
        if ec_site_count == 0 {
            return Err(Error::InvalidParameter("ec_site_count must be positive"));
        }
        if active_count == 0 {
            return Err(Error::InvalidParameter("active_count must be positive"));
        }

        // Minimal depth whose non-root node count reaches ec_site_count.
        let mut depth = 0u32;
        let mut non_root: u64 = 0;
        let mut level_size: u64 = 1;
        while non_root < u64::from(ec_site_count) {
            depth += 1;
            level_size = level_size.saturating_mul(u64::from(arity));
            non_root = non_root.saturating_add(level_size);
            if depth > 16 {
                return Err(Error::InvalidParameter("ec_site_count too large"));
            }
        }

        // Breadth-first node layout: ids are contiguous per level.
        let mut nodes: Vec<Node> = Vec::new();
        nodes.push(Node {
            id: NodeId(0),
            parent: None,
            children: Vec::new(),
            depth: 0,
            leaf_pos: None,
        });
        let mut level: Vec<NodeId> = alloc::vec![NodeId(0)];
        for d in 1..=depth {
            let mut next = Vec::new();
            for &parent in &level {
                for _ in 0..arity {
                    let id = NodeId(nodes.len() as u32);
                    nodes.push(Node {
                        id,
                        parent: Some(parent),
                        children: Vec::new(),
                        depth: d,
                        leaf_pos: None,
                    });
                    nodes[parent.0 as usize].children.push(id);
                    next.push(id);
                }
            }
            level = next;
        }

        let leaves: Vec<NodeId> = level;
        for (pos, &leaf) in leaves.iter().enumerate() {
            nodes[leaf.0 as usize].leaf_pos = Some(pos as u32);
        }

        // EC sites: leaves first, then interior routers from the deepest
        // level upward, everything left to right.
        let mut site_nodes: Vec<NodeId> = Vec::with_capacity(ec_site_count as usize);
        site_nodes.extend(leaves.iter().copied().take(ec_site_count as usize));
        if site_nodes.len() < ec_site_count as usize {
            let mut interior: Vec<NodeId> = nodes
                .iter()
                .filter(|n| n.parent.is_some() && n.leaf_pos.is_none())
                .map(|n| n.id)
                .collect();
            interior.sort_by_key(|id| {
                let n = &nodes[id.0 as usize];
                (core::cmp::Reverse(n.depth), n.id)
            });
            site_nodes.extend(
                interior
                    .into_iter()
                    .take(ec_site_count as usize - site_nodes.len()),
            );
        }

        let leaf_site_count = site_nodes
            .iter()
            .filter(|id| nodes[id.0 as usize].leaf_pos.is_some())
            .count() as u32;
        if active_count > leaf_site_count {
            return Err(Error::ActiveExceedsLeafSites {
                requested: active_count,
                leaf_sites: leaf_site_count,
            });
        }

        let mut rng = seeded_rng(seed);

        // Sample the active subset among leaf sites without replacement.
        let mut leaf_sites: Vec<NodeId> = site_nodes
            .iter()
            .copied()
            .filter(|id| nodes[id.0 as usize].leaf_pos.is_some())
            .collect();
        let mut active: Vec<NodeId> = Vec::with_capacity(active_count as usize);
        for _ in 0..active_count {
            let k = rng.gen_range(0..leaf_sites.len());
            active.push(leaf_sites.swap_remove(k));
        }
        active.sort_by_key(|id| nodes[id.0 as usize].leaf_pos);

        site_nodes.sort();
        let ecs: Vec<EcNode> = site_nodes
            .iter()
            .map(|&id| EcNode {
                id,
                capacity_units: DEFAULT_CAPACITY_UNITS,
                cores: rng.gen_range(CORE_RANGE.0..=CORE_RANGE.1),
                cache_bytes: DEFAULT_CACHE_BYTES,
                active: active.contains(&id),
            })
            .collect();

        Topology::from_parts(seed, arity, nodes, ecs)
    }

    /// Assembles a topology from explicit nodes and EC sites, validating the
    /// tree structure. Used by deserialization and by tests that need
    /// hand-built networks.
    pub fn from_parts(
        seed: u64,
        arity: u32,
        nodes: Vec<Node>,
        ecs: Vec<EcNode>,
    ) -> Result<Topology, Error> {
        if nodes.is_empty() {
            return Err(Error::InvalidParameter("topology has no nodes"));
        }
        let mut roots = 0usize;
        for (i, n) in nodes.iter().enumerate() {
            if n.id.0 as usize != i {
                return Err(Error::InvalidParameter("node ids must be contiguous"));
            }
            match n.parent {
                None => roots += 1,
                Some(p) => {
                    if p.0 as usize >= nodes.len() {
                        return Err(Error::UnknownNode(p));
                    }
                }
            }
        }
        if roots != 1 {
            return Err(Error::InvalidParameter("tree must have exactly one root"));
        }

        // Reachability from the root guarantees connectedness; equality of
        // visited count and node count rules out cycles.
        let root = nodes.iter().find(|n| n.parent.is_none()).unwrap().id;
        let mut visited = 0usize;
        let mut stack = alloc::vec![root];
        let mut leaves: Vec<NodeId> = Vec::new();
        while let Some(id) = stack.pop() {
            visited += 1;
            let n = &nodes[id.0 as usize];
            if n.children.is_empty() {
                leaves.push(id);
            }
            // Right-to-left push keeps leaf discovery in left-to-right order.
            for &c in n.children.iter().rev() {
                if nodes[c.0 as usize].parent != Some(id) {
                    return Err(Error::InvalidParameter("child/parent links disagree"));
                }
                stack.push(c);
            }
        }
        if visited != nodes.len() {
            return Err(Error::InvalidParameter("tree is not connected"));
        }
        for (pos, &leaf) in leaves.iter().enumerate() {
            if nodes[leaf.0 as usize].leaf_pos != Some(pos as u32) {
                return Err(Error::InvalidParameter("leaf positions out of order"));
            }
        }

        let mut ec_index = BTreeMap::new();
        for (i, ec) in ecs.iter().enumerate() {
            if ec.id.0 as usize >= nodes.len() {
                return Err(Error::UnknownNode(ec.id));
            }
            if ec.capacity_units == 0 && ec.active {
                // Allowed: an active EC may be administratively drained to
                // zero capacity in stress tests.
            }
            if ec_index.insert(ec.id, i).is_some() {
                return Err(Error::InvalidParameter("duplicate EC site"));
            }
        }

        let mut active_ecs: Vec<NodeId> = ecs.iter().filter(|e| e.active).map(|e| e.id).collect();
        if active_ecs.is_empty() {
            return Err(Error::InvalidParameter("at least one active EC required"));
        }
        for &a in &active_ecs {
            if nodes[a.0 as usize].leaf_pos.is_none() {
                return Err(Error::InvalidParameter("active ECs must sit on leaves"));
            }
        }
        active_ecs.sort_by_key(|id| nodes[id.0 as usize].leaf_pos);

        Ok(Topology {
            seed,
            arity,
            nodes,
            ecs,
            ec_index,
            active_ecs,
            leaves,
        })
    }

    pub fn root(&self) -> NodeId {
        self.nodes.iter().find(|n| n.parent.is_none()).unwrap().id
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> Result<&Node, Error> {
        self.nodes.get(id.0 as usize).ok_or(Error::UnknownNode(id))
    }

    /// Leaf access routers, left to right.
    pub fn leaves(&self) -> &[NodeId] {
        &self.leaves
    }

    pub fn ec_sites(&self) -> &[EcNode] {
        &self.ecs
    }

    pub fn ec(&self, id: NodeId) -> Option<&EcNode> {
        self.ec_index.get(&id).map(|&i| &self.ecs[i])
    }

    /// Active ECs sorted by leaf position. Their 1-based position in this
    /// list is the ordinal used by the class-index codec.
    pub fn active_ecs(&self) -> &[NodeId] {
        &self.active_ecs
    }

    /// 1-based ordinal of an active EC, or `None` if the node is not one.
    pub fn ordinal(&self, ec: NodeId) -> Option<u32> {
        self.active_ecs
            .iter()
            .position(|&a| a == ec)
            .map(|i| i as u32 + 1)
    }

    pub fn active_by_ordinal(&self, ordinal: u32) -> Result<NodeId, Error> {
        let m = self.active_ecs.len() as u32;
        if ordinal == 0 || ordinal > m {
            return Err(Error::OrdinalOutOfRange { ordinal, m });
        }
        Ok(self.active_ecs[ordinal as usize - 1])
    }

    /// Number of edges on the unique tree path between two nodes.
    pub fn hop_distance(&self, a: NodeId, b: NodeId) -> Result<u32, Error> {
        let mut x = self.node(a)?;
        let mut y = self.node(b)?;
        let mut hops = 0;
        while x.depth > y.depth {
            x = self.node(x.parent.unwrap())?;
            hops += 1;
        }
        while y.depth > x.depth {
            y = self.node(y.parent.unwrap())?;
            hops += 1;
        }
        while x.id != y.id {
            x = self.node(x.parent.unwrap())?;
            y = self.node(y.parent.unwrap())?;
            hops += 2;
        }
        Ok(hops)
    }

    /// The leaves at position ±1 of an access router, nearest-left first.
    pub fn adjacent_ars(&self, ar: NodeId) -> Result<Vec<NodeId>, Error> {
        let node = self.node(ar)?;
        let pos = node.leaf_pos.ok_or(Error::NotALeaf(ar))? as usize;
        let mut out = Vec::with_capacity(2);
        if pos > 0 {
            out.push(self.leaves[pos - 1]);
        }
        if pos + 1 < self.leaves.len() {
            out.push(self.leaves[pos + 1]);
        }
        Ok(out)
    }

    /// Active ECs adjacent to `ec` in the leaf-sorted active order.
    pub fn active_neighbors(&self, ec: NodeId) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(2);
        if let Some(i) = self.active_ecs.iter().position(|&a| a == ec) {
            if i > 0 {
                out.push(self.active_ecs[i - 1]);
            }
            if i + 1 < self.active_ecs.len() {
                out.push(self.active_ecs[i + 1]);
            }
        }
        out
    }

    /// Overrides every EC site's capacity; used by the capacity sweep.
    pub fn set_uniform_capacity(&mut self, units: u32) {
        for ec in &mut self.ecs {
            ec.capacity_units = units;
        }
    }

    /// Overrides every EC site's core count.
    pub fn set_uniform_cores(&mut self, cores: u32) {
        for ec in &mut self.ecs {
            ec.cores = cores;
        }
    }

    pub fn leaf_pos(&self, id: NodeId) -> Result<u32, Error> {
        self.node(id)?.leaf_pos.ok_or(Error::NotALeaf(id))
    }
}
