//! Radial feeder structure and the quantities LinDistFlow derives from it.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkError {
    #[error("edge list is empty")]
    EmptyTopology,
    #[error("edge ({from}, {to}) has non-positive or non-finite length {length}")]
    NonPositiveLength { from: usize, to: usize, length: f64 },
    #[error("edge ({from}, {to}) listed more than once")]
    DuplicateEdge { from: usize, to: usize },
    #[error("edge ({from}, {to}) closes a cycle")]
    CycleDetected { from: usize, to: usize },
    #[error("root node 0 does not appear in any edge")]
    MissingRoot,
    #[error("node {node} is not connected to the root")]
    DisconnectedNode { node: usize },
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch { what: &'static str, expected: usize, found: usize },
    #[error("voltage column for the root node is missing")]
    MissingRootVoltage,
    #[error("squared voltage at snapshot {t}, column {column} is not strictly positive")]
    NonPositiveVoltage { t: usize, column: usize },
    #[error("leaf {node} has no voltage measurement")]
    MissingLeafVoltage { node: usize },
    #[error("inner node {node} has an injection but no voltage measurement")]
    UnmeteredInjection { node: usize },
}

/// Branch `parent -> child` with its conductor length in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Edge {
    pub parent: usize,
    pub child: usize,
    pub length: f64,
}

/// Validated radial feeder rooted at node 0.
///
/// Edges are stored in depth-first preorder from the root (children visited in
/// ascending node id), which fixes the column order of every matrix built on
/// top of the topology.
#[derive(Debug, Clone, PartialEq)]
pub struct FeederTopology {
    n_nodes: usize,
    edges: Vec<Edge>,
    parent_edge: Vec<Option<usize>>,
    child_edges: Vec<Vec<usize>>,
    leaves: Vec<usize>,
}

/// Validates an undirected edge list `(a, b, length_m)` and orients it away from node 0.
pub fn validate_topology(raw_edges: &[(usize, usize, f64)]) -> Result<FeederTopology, NetworkError> {
    if raw_edges.is_empty() {
        return Err(NetworkError::EmptyTopology);
    }
    for &(a, b, len) in raw_edges {
        if !(len.is_finite() && len > 0.0) {
            return Err(NetworkError::NonPositiveLength { from: a, to: b, length: len });
        }
    }
    let mut seen = BTreeMap::new();
    for &(a, b, _) in raw_edges {
        if seen.insert((a, b), ()).is_some() {
            return Err(NetworkError::DuplicateEdge { from: a, to: b });
        }
    }
    let n_nodes = raw_edges.iter().map(|&(a, b, _)| a.max(b)).max().unwrap_or(0) + 1;
    if !raw_edges.iter().any(|&(a, b, _)| a == 0 || b == 0) {
        return Err(NetworkError::MissingRoot);
    }

    let mut dsu = DisjointSets::new(n_nodes);
    for &(a, b, _) in raw_edges {
        if a == b || !dsu.union(a, b) {
            return Err(NetworkError::CycleDetected { from: a, to: b });
        }
    }
    for node in 0..n_nodes {
        if dsu.find(node) != dsu.find(0) {
            return Err(NetworkError::DisconnectedNode { node });
        }
    }

    let mut adjacency: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_nodes];
    for &(a, b, len) in raw_edges {
        adjacency[a].push((b, len));
        adjacency[b].push((a, len));
    }
    for list in adjacency.iter_mut() {
        list.sort_by_key(|x| x.0);
    }

    let mut edges = Vec::with_capacity(n_nodes - 1);
    let mut parent_edge = vec![None; n_nodes];
    let mut child_edges = vec![Vec::new(); n_nodes];
    let mut visited = vec![false; n_nodes];
    visited[0] = true;
    // Explicit stack of (node, next neighbor cursor) for a recursion-free preorder.
    let mut stack: Vec<(usize, usize)> = vec![(0, 0)];
    while let Some(top) = stack.last_mut() {
        let node = top.0;
        if top.1 >= adjacency[node].len() {
            stack.pop();
            continue;
        }
        let (next, len) = adjacency[node][top.1];
        top.1 += 1;
        if visited[next] {
            continue;
        }
        visited[next] = true;
        let e = edges.len();
        edges.push(Edge { parent: node, child: next, length: len });
        parent_edge[next] = Some(e);
        child_edges[node].push(e);
        stack.push((next, 0));
    }
    let leaves = (1..n_nodes).filter(|&n| child_edges[n].is_empty()).collect();
    Ok(FeederTopology { n_nodes, edges, parent_edge, child_edges, leaves })
}

impl FeederTopology {
    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> &Edge {
        &self.edges[e]
    }

    /// Leaves in ascending node id.
    pub fn leaves(&self) -> &[usize] {
        &self.leaves
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        node != 0 && self.child_edges[node].is_empty()
    }

    pub fn parent_edge(&self, node: usize) -> Option<usize> {
        self.parent_edge[node]
    }

    pub fn child_edges(&self, node: usize) -> &[usize] {
        &self.child_edges[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.child_edges[node].len() + usize::from(self.parent_edge[node].is_some())
    }

    pub fn lengths(&self) -> Vec<f64> {
        self.edges.iter().map(|e| e.length).collect()
    }

    /// Index of the edge joining `a` and `b`, in either orientation.
    pub fn edge_between(&self, a: usize, b: usize) -> Option<usize> {
        if a >= self.n_nodes || b >= self.n_nodes {
            return None;
        }
        self.parent_edge[b]
            .filter(|&e| self.edges[e].parent == a)
            .or_else(|| self.parent_edge[a].filter(|&e| self.edges[e].parent == b))
    }

    /// Edges on the root-to-`node` path, listed from `node` upwards.
    pub fn path_edges(&self, node: usize) -> Vec<usize> {
        let mut path = Vec::new();
        let mut cur = node;
        while let Some(e) = self.parent_edge[cur] {
            path.push(e);
            cur = self.edges[e].parent;
        }
        path
    }

    /// Same topology with new lengths (e.g. perturbed by noise).
    pub fn with_lengths(&self, lengths: &[f64]) -> Result<Self, NetworkError> {
        if lengths.len() != self.n_edges() {
            return Err(NetworkError::DimensionMismatch {
                what: "edge lengths",
                expected: self.n_edges(),
                found: lengths.len(),
            });
        }
        let mut out = self.clone();
        for (edge, &len) in out.edges.iter_mut().zip(lengths) {
            if !(len.is_finite() && len > 0.0) {
                return Err(NetworkError::NonPositiveLength { from: edge.parent, to: edge.child, length: len });
            }
            edge.length = len;
        }
        Ok(out)
    }

    /// Raw `(parent, child, length)` triples in preorder.
    pub fn raw_edges(&self) -> Vec<(usize, usize, f64)> {
        self.edges.iter().map(|e| (e.parent, e.child, e.length)).collect()
    }
}

struct DisjointSets {
    parent: Vec<usize>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false when `a` and `b` were already joined.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra.max(rb)] = ra.min(rb);
        true
    }
}

/// Path incidence: entry `(n, e)` is set iff edge `e` lies on the root-to-`n` path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncidenceMatrix {
    n_nodes: usize,
    n_edges: usize,
    bits: Vec<bool>,
}

impl IncidenceMatrix {
    pub fn get(&self, node: usize, edge: usize) -> bool {
        self.bits[node * self.n_edges + edge]
    }

    pub fn row(&self, node: usize) -> &[bool] {
        &self.bits[node * self.n_edges..(node + 1) * self.n_edges]
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_edges(&self) -> usize {
        self.n_edges
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n_nodes, self.n_edges, |n, e| if self.get(n, e) { 1.0 } else { 0.0 })
    }
}

pub fn incidence(topology: &FeederTopology) -> IncidenceMatrix {
    let (n_nodes, n_edges) = (topology.n_nodes(), topology.n_edges());
    let mut bits = vec![false; n_nodes * n_edges];
    for node in 0..n_nodes {
        for e in topology.path_edges(node) {
            bits[node * n_edges + e] = true;
        }
    }
    IncidenceMatrix { n_nodes, n_edges, bits }
}

/// Synchronized smart-meter snapshots in per-unit.
///
/// `p` and `q` are `T x N` nodal injections (positive = consumption); `v2` is
/// `T x K` squared voltage magnitude for the nodes listed in `voltage_nodes`,
/// which always includes the root.
#[derive(Debug, Clone, PartialEq)]
pub struct MeterDataset {
    pub p: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub v2: DMatrix<f64>,
    pub voltage_nodes: Vec<usize>,
}

impl MeterDataset {
    pub fn new(
        p: DMatrix<f64>,
        q: DMatrix<f64>,
        v2: DMatrix<f64>,
        voltage_nodes: Vec<usize>,
    ) -> Result<Self, NetworkError> {
        let t = p.nrows();
        for (what, found) in [("Q snapshots", q.nrows()), ("v2 snapshots", v2.nrows())] {
            if found != t {
                return Err(NetworkError::DimensionMismatch { what, expected: t, found });
            }
        }
        if q.ncols() != p.ncols() {
            return Err(NetworkError::DimensionMismatch { what: "Q nodes", expected: p.ncols(), found: q.ncols() });
        }
        if v2.ncols() != voltage_nodes.len() {
            return Err(NetworkError::DimensionMismatch {
                what: "voltage columns",
                expected: voltage_nodes.len(),
                found: v2.ncols(),
            });
        }
        if !voltage_nodes.contains(&0) {
            return Err(NetworkError::MissingRootVoltage);
        }
        for column in 0..v2.ncols() {
            for tt in 0..t {
                let v = v2[(tt, column)];
                if !(v.is_finite() && v > 0.0) {
                    return Err(NetworkError::NonPositiveVoltage { t: tt, column });
                }
            }
        }
        Ok(Self { p, q, v2, voltage_nodes })
    }

    pub fn snapshots(&self) -> usize {
        self.p.nrows()
    }

    pub fn n_nodes(&self) -> usize {
        self.p.ncols()
    }

    pub fn voltage_column(&self, node: usize) -> Option<usize> {
        self.voltage_nodes.iter().position(|&n| n == node)
    }

    /// Squared voltage of `node` at snapshot `t`, if metered.
    pub fn v2_at(&self, t: usize, node: usize) -> Option<f64> {
        self.voltage_column(node).map(|c| self.v2[(t, c)])
    }

    pub fn root_v2(&self, t: usize) -> f64 {
        self.v2_at(t, 0).expect("root voltage column is validated at construction")
    }

    /// Checks node counts, leaf voltages and the passive-inner-node convention.
    pub fn check_against(&self, topology: &FeederTopology) -> Result<(), NetworkError> {
        if self.n_nodes() != topology.n_nodes() {
            return Err(NetworkError::DimensionMismatch {
                what: "dataset nodes",
                expected: topology.n_nodes(),
                found: self.n_nodes(),
            });
        }
        for &leaf in topology.leaves() {
            if self.voltage_column(leaf).is_none() {
                return Err(NetworkError::MissingLeafVoltage { node: leaf });
            }
        }
        for node in 1..topology.n_nodes() {
            if topology.is_leaf(node) || self.voltage_column(node).is_some() {
                continue;
            }
            let loaded = (0..self.snapshots()).any(|t| self.p[(t, node)] != 0.0 || self.q[(t, node)] != 0.0);
            if loaded {
                return Err(NetworkError::UnmeteredInjection { node });
            }
        }
        Ok(())
    }

    /// Keeps only the listed snapshots, in the given order.
    pub fn select_snapshots(&self, rows: &[usize]) -> Self {
        let pick = |m: &DMatrix<f64>| DMatrix::from_fn(rows.len(), m.ncols(), |i, j| m[(rows[i], j)]);
        Self { p: pick(&self.p), q: pick(&self.q), v2: pick(&self.v2), voltage_nodes: self.voltage_nodes.clone() }
    }
}

/// Aggregated branch powers, `T x |E|`.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedFlows {
    pub p: DMatrix<f64>,
    pub q: DMatrix<f64>,
}

/// Bottom-up accumulation of nodal injections into branch flows (lossless).
pub fn aggregate_flows(topology: &FeederTopology, data: &MeterDataset) -> Result<AggregatedFlows, NetworkError> {
    aggregate_injections(topology, &data.p, &data.q)
}

/// [`aggregate_flows`] on raw `T x N` injection matrices.
pub fn aggregate_injections(
    topology: &FeederTopology,
    p: &DMatrix<f64>,
    q: &DMatrix<f64>,
) -> Result<AggregatedFlows, NetworkError> {
    let n = topology.n_nodes();
    for (what, found) in [("P nodes", p.ncols()), ("Q nodes", q.ncols())] {
        if found != n {
            return Err(NetworkError::DimensionMismatch { what, expected: n, found });
        }
    }
    if q.nrows() != p.nrows() {
        return Err(NetworkError::DimensionMismatch { what: "Q snapshots", expected: p.nrows(), found: q.nrows() });
    }
    let (t_count, n_edges) = (p.nrows(), topology.n_edges());
    let mut pbr = DMatrix::zeros(t_count, n_edges);
    let mut qbr = DMatrix::zeros(t_count, n_edges);
    // Reverse preorder visits every child edge before its parent edge.
    for e in (0..n_edges).rev() {
        let child = topology.edge(e).child;
        for t in 0..t_count {
            let mut sp = p[(t, child)];
            let mut sq = q[(t, child)];
            for &c in topology.child_edges(child) {
                sp += pbr[(t, c)];
                sq += qbr[(t, c)];
            }
            pbr[(t, e)] = sp;
            qbr[(t, e)] = sq;
        }
    }
    Ok(AggregatedFlows { p: pbr, q: qbr })
}

/// Non-root nodes joining exactly two branches (one parent, one child).
pub fn degree2_nodes(topology: &FeederTopology) -> Vec<usize> {
    (1..topology.n_nodes()).filter(|&n| topology.child_edges(n).len() == 1).collect()
}

/// Maximal edge chains joined through degree-2 inner nodes, each listed root-side first.
pub fn degree2_chains(topology: &FeederTopology) -> Vec<Vec<usize>> {
    let is_deg2 = |n: usize| n != 0 && topology.child_edges(n).len() == 1;
    let mut chains = Vec::new();
    for (e, edge) in topology.edges().iter().enumerate() {
        // A chain starts at an edge whose lower end is degree 2 but whose upper end is not.
        if is_deg2(edge.parent) || !is_deg2(edge.child) {
            continue;
        }
        let mut chain = vec![e];
        let mut node = edge.child;
        while is_deg2(node) {
            let next = topology.child_edges(node)[0];
            chain.push(next);
            node = topology.edge(next).child;
        }
        chains.push(chain);
    }
    chains
}

/// Feeder with every degree-2 chain merged into a single branch.
#[derive(Debug, Clone, PartialEq)]
pub struct CollapsedNetwork {
    pub topology: FeederTopology,
    /// Summed impedance vector `[r, x]` on the simplified edges.
    pub z: Vec<f64>,
    /// Original edges merged into each simplified edge.
    pub edge_groups: Vec<Vec<usize>>,
}

pub fn collapse_chains(topology: &FeederTopology, z: &[f64]) -> Result<CollapsedNetwork, NetworkError> {
    let n_edges = topology.n_edges();
    if z.len() != 2 * n_edges {
        return Err(NetworkError::DimensionMismatch { what: "impedance vector", expected: 2 * n_edges, found: z.len() });
    }
    let chains = degree2_chains(topology);
    let mut chain_of = vec![None; n_edges];
    for (i, chain) in chains.iter().enumerate() {
        for &e in chain {
            chain_of[e] = Some(i);
        }
    }

    // Surviving nodes keep their relative order.
    let removed = degree2_nodes(topology);
    let mut new_id = vec![usize::MAX; topology.n_nodes()];
    let mut next = 0;
    for (node, slot) in new_id.iter_mut().enumerate() {
        if removed.binary_search(&node).is_err() {
            *slot = next;
            next += 1;
        }
    }

    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut raw = Vec::new();
    let mut emitted_chain = vec![false; chains.len()];
    for e in 0..n_edges {
        let group = match chain_of[e] {
            Some(c) if emitted_chain[c] => continue,
            Some(c) => {
                emitted_chain[c] = true;
                chains[c].clone()
            }
            None => vec![e],
        };
        let top = topology.edge(group[0]).parent;
        let bottom = topology.edge(*group.last().expect("chains are nonempty")).child;
        let length = group.iter().map(|&g| topology.edge(g).length).sum();
        raw.push((new_id[top], new_id[bottom], length));
        groups.push(group);
    }
    let simplified = validate_topology(&raw)?;

    let m = simplified.n_edges();
    let mut ordered_groups = vec![Vec::new(); m];
    let mut z_out = vec![0.0; 2 * m];
    for (group, &(a, b, _)) in groups.into_iter().zip(&raw) {
        let e = simplified.edge_between(a, b).expect("edge survives revalidation");
        z_out[e] = group.iter().map(|&g| z[g]).sum();
        z_out[m + e] = group.iter().map(|&g| z[n_edges + g]).sum();
        ordered_groups[e] = group;
    }
    Ok(CollapsedNetwork { topology: simplified, z: z_out, edge_groups: ordered_groups })
}

/// Independent piece of a feeder obtained by cutting at metered inner nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct SubFeeder {
    pub topology: FeederTopology,
    pub data: MeterDataset,
    /// Local node id to original node id.
    pub node_map: Vec<usize>,
    /// Local edge index to original edge index.
    pub edge_map: Vec<usize>,
}

/// Inner nodes carrying a voltage measurement.
pub fn metered_inner_nodes(topology: &FeederTopology, data: &MeterDataset) -> Vec<usize> {
    (1..topology.n_nodes())
        .filter(|&n| !topology.is_leaf(n) && data.voltage_column(n).is_some())
        .collect()
}

/// Splits the feeder at every metered inner node.
///
/// The subtree below a metered node becomes its own feeder with that node as
/// slack; upstream, the node turns into a leaf whose injection is the
/// aggregated power entering it. Without metered inner nodes the result is a
/// single identity piece.
pub fn split_at_metered(topology: &FeederTopology, data: &MeterDataset) -> Result<Vec<SubFeeder>, NetworkError> {
    if data.n_nodes() != topology.n_nodes() {
        return Err(NetworkError::DimensionMismatch {
            what: "dataset nodes",
            expected: topology.n_nodes(),
            found: data.n_nodes(),
        });
    }
    let metered = metered_inner_nodes(topology, data);
    let flows = aggregate_flows(topology, data)?;
    let t_count = data.snapshots();
    let mut roots = vec![0];
    roots.extend(&metered);

    let mut pieces = Vec::with_capacity(roots.len());
    for &sub_root in &roots {
        let mut node_map = vec![sub_root];
        let mut raw = Vec::new();
        let mut boundary = Vec::new();
        let mut stack = vec![sub_root];
        while let Some(node) = stack.pop() {
            let local_parent = node_map.iter().position(|&n| n == node).expect("visited node is mapped");
            for &e in topology.child_edges(node) {
                let child = topology.edge(e).child;
                node_map.push(child);
                raw.push((local_parent, node_map.len() - 1, topology.edge(e).length));
                if metered.binary_search(&child).is_ok() {
                    boundary.push(child);
                } else {
                    stack.push(child);
                }
            }
        }
        let local = validate_topology(&raw)?;
        let edge_map = (0..local.n_edges())
            .map(|e| {
                let edge = local.edge(e);
                topology
                    .edge_between(node_map[edge.parent], node_map[edge.child])
                    .expect("local edge exists in the original feeder")
            })
            .collect();

        let n_local = node_map.len();
        let mut p = DMatrix::zeros(t_count, n_local);
        let mut q = DMatrix::zeros(t_count, n_local);
        for (local_id, &orig) in node_map.iter().enumerate().skip(1) {
            for t in 0..t_count {
                if boundary.contains(&orig) {
                    let e = topology.parent_edge(orig).expect("boundary node is not the root");
                    p[(t, local_id)] = flows.p[(t, e)];
                    q[(t, local_id)] = flows.q[(t, e)];
                } else {
                    p[(t, local_id)] = data.p[(t, orig)];
                    q[(t, local_id)] = data.q[(t, orig)];
                }
            }
        }
        let mut voltage_nodes = vec![0];
        voltage_nodes.extend(local.leaves().iter().copied());
        let mut v2 = DMatrix::zeros(t_count, voltage_nodes.len());
        for (c, &local_id) in voltage_nodes.iter().enumerate() {
            let orig = node_map[local_id];
            let col = data.voltage_column(orig).ok_or(NetworkError::MissingLeafVoltage { node: orig })?;
            for t in 0..t_count {
                v2[(t, c)] = data.v2[(t, col)];
            }
        }
        let sub_data = MeterDataset::new(p, q, v2, voltage_nodes)?;
        pieces.push(SubFeeder { topology: local, data: sub_data, node_map, edge_map });
    }
    Ok(pieces)
}
