//! Random radial feeders with a prescribed set of degree-2 chains, and a
//! small LV cable catalogue for test cases.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng as _;
use thiserror::Error;

use crate::network::{validate_topology, FeederTopology, NetworkError};
use crate::rng_for;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SyntheticError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("invalid feeder specification: {0}")]
    InvalidSpec(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct FeederSpec {
    /// Total node count including the root.
    pub n_nodes: usize,
    /// Edge count of each degree-2 chain (each at least 2).
    pub chain_edges: Vec<usize>,
    /// Branch lengths are drawn uniformly from this range (meters).
    pub min_length: f64,
    pub max_length: f64,
    /// Upper bound on children of a branching node.
    pub max_children: usize,
    pub seed: u64,
}

impl Default for FeederSpec {
    fn default() -> Self {
        Self { n_nodes: 20, chain_edges: Vec::new(), min_length: 20.0, max_length: 120.0, max_children: 3, seed: 0 }
    }
}

/// Builds a tree whose only degree-2 nodes lie on the requested chains.
///
/// A branching skeleton is grown first (every non-root inner node gets at
/// least two children); distinct skeleton edges are then subdivided.
pub fn random_feeder(spec: &FeederSpec) -> Result<FeederTopology, SyntheticError> {
    if spec.chain_edges.iter().any(|&c| c < 2) {
        return Err(SyntheticError::InvalidSpec("chains need at least two edges"));
    }
    if !(spec.min_length > 0.0 && spec.min_length <= spec.max_length) {
        return Err(SyntheticError::InvalidSpec("length range must be positive and ordered"));
    }
    if spec.max_children < 2 {
        return Err(SyntheticError::InvalidSpec("branching nodes need at least two children"));
    }
    let inserted: usize = spec.chain_edges.iter().map(|c| c - 1).sum();
    let skeleton_nodes = spec
        .n_nodes
        .checked_sub(inserted)
        .filter(|&s| s >= 2)
        .ok_or(SyntheticError::InvalidSpec("too few nodes for the requested chains"))?;
    if spec.chain_edges.len() > skeleton_nodes - 1 {
        return Err(SyntheticError::InvalidSpec("more chains than skeleton edges"));
    }

    let mut rng = rng_for(spec.seed, 0);
    let mut parent = vec![usize::MAX; skeleton_nodes];
    let mut children = vec![0usize; skeleton_nodes];
    let mut next = 1;
    let mut leaves: Vec<usize> = Vec::new();

    let root_children = rng.random_range(1..=spec.max_children).min(skeleton_nodes - 1);
    for _ in 0..root_children {
        parent[next] = 0;
        children[0] += 1;
        leaves.push(next);
        next += 1;
    }
    while next < skeleton_nodes {
        let remaining = skeleton_nodes - next;
        if remaining == 1 {
            // Hang the last node off an existing branching node so no degree-2 node appears.
            let hosts: Vec<usize> = (0..next).filter(|&n| children[n] >= 2 || n == 0).collect();
            let host = hosts[rng.random_range(0..hosts.len())];
            parent[next] = host;
            children[host] += 1;
            next += 1;
            continue;
        }
        let pick = rng.random_range(0..leaves.len());
        let node = leaves.swap_remove(pick);
        let k = rng.random_range(2..=spec.max_children).min(remaining);
        for _ in 0..k {
            parent[next] = node;
            children[node] += 1;
            leaves.push(next);
            next += 1;
        }
    }

    let mut lengths = || spec.min_length + (spec.max_length - spec.min_length) * rng.random::<f64>();
    let mut skeleton: Vec<(usize, usize)> = (1..skeleton_nodes).map(|n| (parent[n], n)).collect();
    let mut order: Vec<usize> = (0..skeleton.len()).collect();
    let mut shuffle_rng = rng_for(spec.seed, 1);
    order.shuffle(&mut shuffle_rng);

    let mut raw = Vec::with_capacity(spec.n_nodes - 1);
    let mut fresh = skeleton_nodes;
    let mut subdivided = vec![0usize; skeleton.len()];
    for (slot, &count) in order.iter().zip(&spec.chain_edges) {
        subdivided[*slot] = count;
    }
    for (i, (a, b)) in skeleton.drain(..).enumerate() {
        let segments = subdivided[i].max(1);
        let mut upper = a;
        for s in 0..segments {
            let lower = if s + 1 == segments {
                b
            } else {
                fresh += 1;
                fresh - 1
            };
            raw.push((upper, lower, lengths()));
            upper = lower;
        }
    }
    Ok(validate_topology(&raw)?)
}

/// Five LV cable types `(r, x)` in ohm/km, sorted by resistance.
///
/// Representative of common European LV underground cables; all lie inside
/// the default line envelope.
pub const REPLICA_CABLES_OHM_PER_KM: [(f64, f64); 5] =
    [(0.089, 0.0675), (0.166, 0.068), (0.274, 0.073), (0.322, 0.074), (0.469, 0.075)];

/// 116-node feeder with six degree-2 nodes spread over five chains (11 edges).
pub fn replica_116_node_feeder(seed: u64) -> Result<FeederTopology, SyntheticError> {
    random_feeder(&FeederSpec { n_nodes: 116, chain_edges: vec![3, 2, 2, 2, 2], seed, ..FeederSpec::default() })
}
