//! Substrate network: base stations, multiplexing nodes, co-located edge
//! clouds and the wired links between them.
//!
//! Networks are immutable after construction except for the per-cloud
//! resource accounting (`EdgeCloud::in_use`), which the simulation mutates
//! on a single thread. Wireless access links are not part of the static
//! graph; they are synthesized per user attachment by the delay model.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;

use thiserror::Error;

use crate::types::{NodeId, Vec2};

/// Default service rate assigned to wired links by the builders, in packets
/// per second. This is a free parameter of the model; scenario configuration
/// can override it for all wired links at once.
pub const DEFAULT_WIRED_MU: f64 = 10_000.0;

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("{bs} base stations not divisible by {mux} multiplexing nodes")]
    Divisibility { bs: u32, mux: u32 },
    #[error("expected {want} base-station positions, got {got}")]
    PositionCount { want: usize, got: usize },
    #[error("duplicate base-station position ({x}, {y})")]
    DuplicatePosition { x: f64, y: f64 },
    #[error("grid dimensions must be at least 1x1")]
    ZeroDimensions,
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("nodes {0} and {1} are disconnected (inconsistent network)")]
    Unreachable(NodeId, NodeId),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Nonnegative per-resource units: CPU, memory and disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ResourceVector {
    pub cpu: u32,
    pub memory: u32,
    pub disk: u32,
}

impl ResourceVector {
    pub const ZERO: ResourceVector = ResourceVector::new(0, 0, 0);

    pub const fn new(cpu: u32, memory: u32, disk: u32) -> Self {
        Self { cpu, memory, disk }
    }

    /// Componentwise `self + other`.
    pub fn plus(self, other: ResourceVector) -> ResourceVector {
        ResourceVector::new(
            self.cpu + other.cpu,
            self.memory + other.memory,
            self.disk + other.disk,
        )
    }

    /// Componentwise `self - other`; `None` if any component would go negative.
    pub fn checked_minus(self, other: ResourceVector) -> Option<ResourceVector> {
        Some(ResourceVector::new(
            self.cpu.checked_sub(other.cpu)?,
            self.memory.checked_sub(other.memory)?,
            self.disk.checked_sub(other.disk)?,
        ))
    }

    /// Componentwise maximum.
    pub fn max(self, other: ResourceVector) -> ResourceVector {
        ResourceVector::new(
            self.cpu.max(other.cpu),
            self.memory.max(other.memory),
            self.disk.max(other.disk),
        )
    }

    /// True when every component of `self` fits within `other`.
    pub fn fits_within(self, other: ResourceVector) -> bool {
        self.cpu <= other.cpu && self.memory <= other.memory && self.disk <= other.disk
    }
}

/// Compute capacity co-located with a substrate node.
#[derive(Debug, Clone)]
pub struct EdgeCloud {
    pub capacity: ResourceVector,
    in_use: ResourceVector,
}

impl EdgeCloud {
    pub fn new(capacity: ResourceVector) -> Self {
        Self {
            capacity,
            in_use: ResourceVector::ZERO,
        }
    }

    pub fn in_use(&self) -> ResourceVector {
        self.in_use
    }

    pub fn free(&self) -> ResourceVector {
        self.capacity
            .checked_minus(self.in_use)
            .expect("in_use exceeds capacity")
    }

    /// Reserve `r`, failing without side effects if it does not fit.
    pub fn reserve(&mut self, r: ResourceVector) -> Result<(), ResourceVector> {
        let next = self.in_use.plus(r);
        if next.fits_within(self.capacity) {
            self.in_use = next;
            Ok(())
        } else {
            Err(self.free())
        }
    }

    /// Release a previously reserved `r`. Releasing more than is held is an
    /// accounting bug, not a recoverable condition.
    pub fn release(&mut self, r: ResourceVector) {
        self.in_use = self
            .in_use
            .checked_minus(r)
            .expect("released more resources than reserved");
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    BaseStation,
    Multiplexing,
    Root,
}

impl NodeKind {
    fn label(self) -> &'static str {
        match self {
            NodeKind::BaseStation => "bs",
            NodeKind::Multiplexing => "mux",
            NodeKind::Root => "root",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SubstrateNode {
    pub id: NodeId,
    pub kind: NodeKind,
    /// Present exactly for base stations.
    pub position: Option<Vec2>,
    pub edge_cloud: EdgeCloud,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkKind {
    Wired,
    Wireless,
}

#[derive(Debug, Clone)]
pub struct Link {
    pub a: NodeId,
    pub b: NodeId,
    pub kind: LinkKind,
    /// Service rate in packets per second.
    pub service_rate_mu: f64,
    /// Aggregate arrival rate of the users currently traversing this link.
    pub current_lambda: f64,
}

/// The substrate graph plus per-node edge clouds.
#[derive(Debug, Clone)]
pub struct SubstrateNetwork {
    nodes: Vec<SubstrateNode>,
    links: Vec<Link>,
    adjacency: Vec<Vec<NodeId>>,
    link_index: BTreeMap<(NodeId, NodeId), usize>,
    bs_set: Vec<NodeId>,
    mux_set: Vec<NodeId>,
    root: Option<NodeId>,
    /// All-pairs hop distances, filled in by `finalize`.
    hop_dist: Vec<Vec<u32>>,
}

fn link_key(a: NodeId, b: NodeId) -> (NodeId, NodeId) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

impl SubstrateNetwork {
    fn from_parts(nodes: Vec<SubstrateNode>, links: Vec<Link>) -> Result<Self, TopologyError> {
        let n = nodes.len();
        let mut adjacency = vec![Vec::new(); n];
        let mut link_index = BTreeMap::new();
        for (i, l) in links.iter().enumerate() {
            adjacency[l.a.0 as usize].push(l.b);
            adjacency[l.b.0 as usize].push(l.a);
            link_index.insert(link_key(l.a, l.b), i);
        }
        for neighbors in &mut adjacency {
            neighbors.sort();
        }
        let bs_set = nodes
            .iter()
            .filter(|n| n.kind == NodeKind::BaseStation)
            .map(|n| n.id)
            .collect();
        let mux_set = nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Multiplexing)
            .map(|n| n.id)
            .collect();
        let root = nodes.iter().find(|n| n.kind == NodeKind::Root).map(|n| n.id);
        let mut net = Self {
            nodes,
            links,
            adjacency,
            link_index,
            bs_set,
            mux_set,
            root,
            hop_dist: Vec::new(),
        };
        net.finalize()?;
        Ok(net)
    }

    /// Precompute all-pairs hop distances and verify connectivity.
    fn finalize(&mut self) -> Result<(), TopologyError> {
        let n = self.nodes.len();
        let mut all = Vec::with_capacity(n);
        for src in 0..n {
            let dist = self.bfs_distances(NodeId(src as u32));
            if let Some(far) = dist.iter().position(|d| *d == u32::MAX) {
                return Err(TopologyError::Unreachable(
                    NodeId(src as u32),
                    NodeId(far as u32),
                ));
            }
            all.push(dist);
        }
        self.hop_dist = all;
        Ok(())
    }

    fn bfs_distances(&self, src: NodeId) -> Vec<u32> {
        let mut dist = vec![u32::MAX; self.nodes.len()];
        dist[src.0 as usize] = 0;
        let mut queue = VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            for &v in &self.adjacency[u.0 as usize] {
                if dist[v.0 as usize] == u32::MAX {
                    dist[v.0 as usize] = dist[u.0 as usize] + 1;
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    pub fn node(&self, id: NodeId) -> &SubstrateNode {
        &self.nodes[id.0 as usize]
    }

    pub fn nodes(&self) -> &[SubstrateNode] {
        &self.nodes
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn edge_cloud(&self, id: NodeId) -> &EdgeCloud {
        &self.nodes[id.0 as usize].edge_cloud
    }

    pub fn edge_cloud_mut(&mut self, id: NodeId) -> &mut EdgeCloud {
        &mut self.nodes[id.0 as usize].edge_cloud
    }

    pub fn base_stations(&self) -> &[NodeId] {
        &self.bs_set
    }

    /// Multiplexing-layer nodes: the mux set plus the root when present.
    pub fn mux_layer(&self) -> Vec<NodeId> {
        let mut out = self.mux_set.clone();
        if let Some(r) = self.root {
            out.push(r);
        }
        out.sort();
        out
    }

    pub fn mux_set(&self) -> &[NodeId] {
        &self.mux_set
    }

    pub fn root(&self) -> Option<NodeId> {
        self.root
    }

    pub fn link_between(&self, a: NodeId, b: NodeId) -> Option<&Link> {
        self.link_index.get(&link_key(a, b)).map(|&i| &self.links[i])
    }

    pub fn link_between_mut(&mut self, a: NodeId, b: NodeId) -> Option<&mut Link> {
        match self.link_index.get(&link_key(a, b)) {
            Some(&i) => Some(&mut self.links[i]),
            None => None,
        }
    }

    /// Set the service rate of every wired link.
    pub fn set_wired_service_rate(&mut self, mu: f64) {
        for l in &mut self.links {
            if l.kind == LinkKind::Wired {
                l.service_rate_mu = mu;
            }
        }
    }

    /// Reset all link arrival rates to zero.
    pub fn clear_link_lambdas(&mut self) {
        for l in &mut self.links {
            l.current_lambda = 0.0;
        }
    }

    /// Add `lambda` to the arrival rate of the link between `a` and `b`.
    pub fn add_link_lambda(&mut self, a: NodeId, b: NodeId, lambda: f64) {
        let l = self
            .link_between_mut(a, b)
            .expect("embedding traverses a nonexistent link");
        l.current_lambda += lambda;
    }

    /// Hop distance between two nodes from the precomputed table.
    pub fn hop_distance(&self, a: NodeId, b: NodeId) -> u32 {
        self.hop_dist[a.0 as usize][b.0 as usize]
    }

    /// The set of base stations served by a multiplexing-layer node: every BS
    /// whose traffic can reach `mux` without passing another mux-layer node
    /// first. On a tree this is the subtree below `mux`; the root serves all.
    pub fn attached_base_stations(&self, mux: NodeId) -> Vec<NodeId> {
        match self.nodes[mux.0 as usize].kind {
            NodeKind::BaseStation => vec![mux],
            NodeKind::Root => self.bs_set.clone(),
            NodeKind::Multiplexing => {
                let mut out: Vec<NodeId> = self.adjacency[mux.0 as usize]
                    .iter()
                    .copied()
                    .filter(|n| self.nodes[n.0 as usize].kind == NodeKind::BaseStation)
                    .collect();
                out.sort();
                out
            }
        }
    }

    /// Shortest path by hop count, inclusive of both endpoints. Ties are
    /// broken toward the lowest node identifier at each expansion, so the
    /// result is deterministic.
    pub fn hop_path(&self, a: NodeId, b: NodeId) -> Result<Vec<NodeId>, TopologyError> {
        let n = self.nodes.len();
        if a.0 as usize >= n {
            return Err(TopologyError::UnknownNode(a));
        }
        if b.0 as usize >= n {
            return Err(TopologyError::UnknownNode(b));
        }
        if a == b {
            return Ok(vec![a]);
        }
        let mut prev: Vec<Option<NodeId>> = vec![None; n];
        let mut seen = vec![false; n];
        seen[a.0 as usize] = true;
        let mut queue = VecDeque::from([a]);
        while let Some(u) = queue.pop_front() {
            // Adjacency lists are sorted, so the first discovery of each node
            // comes from the lowest-id predecessor at the same depth.
            for &v in &self.adjacency[u.0 as usize] {
                if !seen[v.0 as usize] {
                    seen[v.0 as usize] = true;
                    prev[v.0 as usize] = Some(u);
                    if v == b {
                        let mut path = vec![b];
                        let mut cur = b;
                        while let Some(p) = prev[cur.0 as usize] {
                            path.push(p);
                            cur = p;
                        }
                        path.reverse();
                        return Ok(path);
                    }
                    queue.push_back(v);
                }
            }
        }
        Err(TopologyError::Unreachable(a, b))
    }

    /// Render the network in the line-oriented text format.
    pub fn emit(&self) -> String {
        let mut out = String::new();
        for node in &self.nodes {
            let (x, y) = match node.position {
                Some(p) => (format!("{}", p.x), format!("{}", p.y)),
                None => ("-".to_string(), "-".to_string()),
            };
            let cap = node.edge_cloud.capacity;
            writeln!(
                out,
                "node {} {} {} {} {} {} {}",
                node.id,
                node.kind.label(),
                x,
                y,
                cap.cpu,
                cap.memory,
                cap.disk
            )
            .unwrap();
        }
        for link in &self.links {
            let kind = match link.kind {
                LinkKind::Wired => "wired",
                LinkKind::Wireless => "wireless",
            };
            writeln!(out, "link {} {} {} {}", link.a, link.b, kind, link.service_rate_mu).unwrap();
        }
        out
    }

    /// Parse the text format produced by `emit`.
    pub fn parse(text: &str) -> Result<Self, TopologyError> {
        let mut nodes: Vec<SubstrateNode> = Vec::new();
        let mut links: Vec<Link> = Vec::new();
        let err = |line: usize, message: String| TopologyError::Parse { line, message };
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            match fields[0] {
                "node" => {
                    if fields.len() != 8 {
                        return Err(err(line_no, "node expects 7 fields".into()));
                    }
                    let id: u32 = fields[1]
                        .parse()
                        .map_err(|_| err(line_no, format!("bad node id {:?}", fields[1])))?;
                    if id as usize != nodes.len() {
                        return Err(err(line_no, "node ids must be dense and in order".into()));
                    }
                    let kind = match fields[2] {
                        "bs" => NodeKind::BaseStation,
                        "mux" => NodeKind::Multiplexing,
                        "root" => NodeKind::Root,
                        other => return Err(err(line_no, format!("unknown node kind {other:?}"))),
                    };
                    let position = if fields[3] == "-" || fields[4] == "-" {
                        None
                    } else {
                        let x: f64 = fields[3]
                            .parse()
                            .map_err(|_| err(line_no, "bad x coordinate".into()))?;
                        let y: f64 = fields[4]
                            .parse()
                            .map_err(|_| err(line_no, "bad y coordinate".into()))?;
                        Some(Vec2::new(x, y))
                    };
                    if (kind == NodeKind::BaseStation) != position.is_some() {
                        return Err(err(
                            line_no,
                            "position must be present exactly for base stations".into(),
                        ));
                    }
                    let parse_u = |i: usize| -> Result<u32, TopologyError> {
                        fields[i]
                            .parse()
                            .map_err(|_| err(line_no, format!("bad capacity field {:?}", fields[i])))
                    };
                    let capacity = ResourceVector::new(parse_u(5)?, parse_u(6)?, parse_u(7)?);
                    nodes.push(SubstrateNode {
                        id: NodeId(id),
                        kind,
                        position,
                        edge_cloud: EdgeCloud::new(capacity),
                    });
                }
                "link" => {
                    if fields.len() != 5 {
                        return Err(err(line_no, "link expects 4 fields".into()));
                    }
                    let a: u32 = fields[1]
                        .parse()
                        .map_err(|_| err(line_no, "bad link endpoint".into()))?;
                    let b: u32 = fields[2]
                        .parse()
                        .map_err(|_| err(line_no, "bad link endpoint".into()))?;
                    let kind = match fields[3] {
                        "wired" => LinkKind::Wired,
                        "wireless" => LinkKind::Wireless,
                        other => return Err(err(line_no, format!("unknown link kind {other:?}"))),
                    };
                    let mu: f64 = fields[4]
                        .parse()
                        .map_err(|_| err(line_no, "bad service rate".into()))?;
                    links.push(Link {
                        a: NodeId(a),
                        b: NodeId(b),
                        kind,
                        service_rate_mu: mu,
                        current_lambda: 0.0,
                    });
                }
                other => return Err(err(line_no, format!("unknown record {other:?}"))),
            }
        }
        for l in &links {
            for end in [l.a, l.b] {
                if end.0 as usize >= nodes.len() {
                    return Err(TopologyError::UnknownNode(end));
                }
            }
        }
        Self::from_parts(nodes, links)
    }
}

/// Build the three-layer tree: `num_bs` base stations under `num_mux`
/// multiplexing nodes under one root, every node carrying an edge cloud
/// with the given capacity. Base stations are ids `0..num_bs`, mux nodes
/// follow, the root is last.
pub fn build_tree(
    num_bs: u32,
    num_mux: u32,
    bs_positions: &[Vec2],
    capacity: ResourceVector,
) -> Result<SubstrateNetwork, TopologyError> {
    if num_mux == 0 || !num_bs.is_multiple_of(num_mux) {
        return Err(TopologyError::Divisibility {
            bs: num_bs,
            mux: num_mux,
        });
    }
    if bs_positions.len() != num_bs as usize {
        return Err(TopologyError::PositionCount {
            want: num_bs as usize,
            got: bs_positions.len(),
        });
    }
    check_distinct(bs_positions)?;

    let per_mux = num_bs / num_mux;
    let mut nodes = Vec::new();
    for (i, &pos) in bs_positions.iter().enumerate() {
        nodes.push(SubstrateNode {
            id: NodeId(i as u32),
            kind: NodeKind::BaseStation,
            position: Some(pos),
            edge_cloud: EdgeCloud::new(capacity),
        });
    }
    for m in 0..num_mux {
        nodes.push(SubstrateNode {
            id: NodeId(num_bs + m),
            kind: NodeKind::Multiplexing,
            position: None,
            edge_cloud: EdgeCloud::new(capacity),
        });
    }
    let root = NodeId(num_bs + num_mux);
    nodes.push(SubstrateNode {
        id: root,
        kind: NodeKind::Root,
        position: None,
        edge_cloud: EdgeCloud::new(capacity),
    });

    let mut links = Vec::new();
    let mut wired = |a: NodeId, b: NodeId| {
        links.push(Link {
            a,
            b,
            kind: LinkKind::Wired,
            service_rate_mu: DEFAULT_WIRED_MU,
            current_lambda: 0.0,
        });
    };
    for bs in 0..num_bs {
        wired(NodeId(bs), NodeId(num_bs + bs / per_mux));
    }
    for m in 0..num_mux {
        wired(NodeId(num_bs + m), root);
    }
    SubstrateNetwork::from_parts(nodes, links)
}

/// Build a grid surrogate of a city deployment: `rows x cols` base stations
/// with `bs_spacing` meters between neighbors, one multiplexing node per row
/// wired to that row's base stations, and adjacent rows' multiplexing nodes
/// chained together. There is no root node.
pub fn build_city_grid(
    rows: u32,
    cols: u32,
    bs_spacing: f64,
    capacity: ResourceVector,
) -> Result<SubstrateNetwork, TopologyError> {
    if rows == 0 || cols == 0 {
        return Err(TopologyError::ZeroDimensions);
    }
    let num_bs = rows * cols;
    let mut nodes = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            nodes.push(SubstrateNode {
                id: NodeId(r * cols + c),
                kind: NodeKind::BaseStation,
                position: Some(Vec2::new(c as f64 * bs_spacing, r as f64 * bs_spacing)),
                edge_cloud: EdgeCloud::new(capacity),
            });
        }
    }
    for r in 0..rows {
        nodes.push(SubstrateNode {
            id: NodeId(num_bs + r),
            kind: NodeKind::Multiplexing,
            position: None,
            edge_cloud: EdgeCloud::new(capacity),
        });
    }
    let mut links = Vec::new();
    let mut wired = |a: NodeId, b: NodeId| {
        links.push(Link {
            a,
            b,
            kind: LinkKind::Wired,
            service_rate_mu: DEFAULT_WIRED_MU,
            current_lambda: 0.0,
        });
    };
    for r in 0..rows {
        for c in 0..cols {
            wired(NodeId(r * cols + c), NodeId(num_bs + r));
        }
    }
    for r in 0..rows.saturating_sub(1) {
        wired(NodeId(num_bs + r), NodeId(num_bs + r + 1));
    }
    SubstrateNetwork::from_parts(nodes, links)
}

fn check_distinct(positions: &[Vec2]) -> Result<(), TopologyError> {
    for (i, a) in positions.iter().enumerate() {
        for b in &positions[i + 1..] {
            if a == b {
                return Err(TopologyError::DuplicatePosition { x: a.x, y: a.y });
            }
        }
    }
    Ok(())
}

/// Base-station positions on a square-ish grid, row-major, `spacing` meters
/// apart: the layout used by the tree scenarios.
pub fn grid_positions(count: u32, spacing: f64) -> Vec<Vec2> {
    let cols = (count as f64).sqrt().ceil() as u32;
    (0..count)
        .map(|i| Vec2::new((i % cols) as f64 * spacing, (i / cols) as f64 * spacing))
        .collect()
}
