//! K-nearest-neighbor similarity and facility-location thinning.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use thiserror::Error;

use crate::candidates::{CandidateMatrix, Stage};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ThinError {
    #[error("all candidate rows are identical")]
    DegenerateInput,
    #[error("neighborhood size {k} must be in 1..{rows}")]
    InvalidNeighborhood { k: usize, rows: usize },
    #[error("cannot select {wanted} of {available} rows")]
    TooManySelected { wanted: usize, available: usize },
}

pub const DEFAULT_NEIGHBORS: usize = 32;
pub const DEFAULT_SELECTED: usize = 20;

/// Sparse similarity: for each row, itself plus its `K` nearest rows with
/// weight `d_max - distance`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityGraph {
    pub neighbors: Vec<Vec<(usize, f64)>>,
    pub max_distance: f64,
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest rows to row `i` with their distances, plus the distance to the farthest row.
///
/// Neighbors are sorted by distance, ties broken by index.
pub fn nearest_rows(points: &CandidateMatrix, i: usize, k: usize) -> (Vec<(usize, f64)>, f64) {
    let m = points.n_rows();
    let mut scratch: Vec<(f64, usize)> = Vec::with_capacity(m.saturating_sub(1));
    let mut farthest = 0.0f64;
    let row = points.row(i);
    for j in (0..m).filter(|&j| j != i) {
        let d = squared_distance(row, points.row(j));
        farthest = farthest.max(d);
        scratch.push((d, j));
    }
    let k = k.min(scratch.len());
    let by_distance = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k > 0 && k < scratch.len() {
        scratch.select_nth_unstable_by(k - 1, by_distance);
    }
    let nearest = &mut scratch[..k];
    nearest.sort_unstable_by(by_distance);
    let mut out = Vec::with_capacity(k);
    out.extend(nearest.iter().map(|&(d, j)| (j, libm::sqrt(d))));
    (out, libm::sqrt(farthest))
}

/// Assembles the graph from per-row [`nearest_rows`] results, in row order.
pub fn graph_from_nearest(rows: Vec<(Vec<(usize, f64)>, f64)>) -> Result<SimilarityGraph, ThinError> {
    let max_distance = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    if max_distance == 0.0 {
        return Err(ThinError::DegenerateInput);
    }
    let neighbors = rows
        .into_iter()
        .enumerate()
        .map(|(i, (near, _))| {
            let mut list = Vec::with_capacity(near.len() + 1);
            list.push((i, max_distance));
            list.extend(near.into_iter().map(|(j, d)| (j, max_distance - d)));
            list
        })
        .collect();
    Ok(SimilarityGraph { neighbors, max_distance })
}

pub fn check_neighborhood(points: &CandidateMatrix, k: usize) -> Result<(), ThinError> {
    let m = points.n_rows();
    if k == 0 || k >= m {
        return Err(ThinError::InvalidNeighborhood { k, rows: m });
    }
    Ok(())
}

pub fn knn_graph(points: &CandidateMatrix, k: usize) -> Result<SimilarityGraph, ThinError> {
    check_neighborhood(points, k)?;
    graph_from_nearest((0..points.n_rows()).map(|i| nearest_rows(points, i, k)).collect())
}

/// `F(S) = sum_i max_{j in S} w(i, j)`.
pub fn facility_value(graph: &SimilarityGraph, selected: &[usize]) -> f64 {
    graph
        .neighbors
        .iter()
        .map(|list| list.iter().filter(|(j, _)| selected.contains(j)).map(|&(_, w)| w).fold(0.0, f64::max))
        .sum()
}

#[derive(Debug, PartialEq)]
struct Entry {
    gain: f64,
    index: usize,
    round: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.gain.total_cmp(&other.gain).then_with(|| other.index.cmp(&self.index))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Greedy facility-location maximization with lazy gain updates.
///
/// Ties go to the lowest index, so the selection equals the plain greedy one.
pub fn facility_location_select(graph: &SimilarityGraph, count: usize) -> Result<Vec<usize>, ThinError> {
    let m = graph.neighbors.len();
    if count > m {
        return Err(ThinError::TooManySelected { wanted: count, available: m });
    }
    // Column view: which rows does candidate j cover, and with what weight.
    let mut covers: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
    for (i, list) in graph.neighbors.iter().enumerate() {
        for &(j, w) in list {
            covers[j].push((i, w));
        }
    }
    let mut best = vec![0.0f64; m];
    let gain = |j: usize, best: &[f64]| -> f64 { covers[j].iter().map(|&(i, w)| (w - best[i]).max(0.0)).sum() };

    let mut heap: BinaryHeap<Entry> = (0..m).map(|j| Entry { gain: gain(j, &best), index: j, round: 0 }).collect();
    let mut chosen = Vec::with_capacity(count);
    let mut taken = vec![false; m];
    while chosen.len() < count {
        let top = heap.pop().expect("heap holds every unselected row");
        if taken[top.index] {
            continue;
        }
        if top.round == chosen.len() {
            taken[top.index] = true;
            chosen.push(top.index);
            for &(i, w) in &covers[top.index] {
                best[i] = best[i].max(w);
            }
        } else {
            heap.push(Entry { gain: gain(top.index, &best), index: top.index, round: chosen.len() });
        }
    }
    Ok(chosen)
}

/// KNN graph plus greedy selection; returns the kept rows and their indices.
pub fn thin_candidates(points: &CandidateMatrix, k: usize, count: usize) -> Result<(CandidateMatrix, Vec<usize>), ThinError> {
    let graph = knn_graph(points, k)?;
    select_rows(points, &graph, count)
}

/// Greedy selection on a prebuilt graph of `points`.
pub fn select_rows(
    points: &CandidateMatrix,
    graph: &SimilarityGraph,
    count: usize,
) -> Result<(CandidateMatrix, Vec<usize>), ThinError> {
    let picked = facility_location_select(graph, count)?;
    Ok((points.select(&picked, Stage::Thinned), picked))
}
