//! Accuracy of a candidate set against ground truth.

use alloc::vec::Vec;

use thiserror::Error;

use crate::candidates::CandidateMatrix;
use crate::linalg::median;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("ground truth component {0} is zero")]
    ZeroTruthComponent(usize),
    #[error("candidate set is empty")]
    Empty,
    #[error("dimension mismatch: candidates have {candidates} columns, truth has {truth}")]
    DimensionMismatch { candidates: usize, truth: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Mape {
    /// Percent.
    pub value: f64,
    pub best_row: usize,
}

impl Mape {
    /// Value rounded to two decimals, as reported.
    pub fn rounded(&self) -> f64 {
        libm::round(self.value * 100.0) / 100.0
    }
}

fn check(candidates: &CandidateMatrix, truth: &[f64]) -> Result<(), MetricsError> {
    if candidates.n_cols() != truth.len() {
        return Err(MetricsError::DimensionMismatch { candidates: candidates.n_cols(), truth: truth.len() });
    }
    if candidates.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(())
}

/// Closest-in-range MAPE on the resistance and reactance halves.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MapePair {
    pub r: Mape,
    pub x: Mape,
}

fn closest(candidates: &CandidateMatrix, truth: &[f64], cols: core::ops::Range<usize>) -> Mape {
    let n = cols.len() as f64;
    let mut best = Mape { value: f64::INFINITY, best_row: 0 };
    for (k, row) in candidates.rows().enumerate() {
        let err: f64 = cols.clone().map(|j| ((row[j] - truth[j]) / truth[j]).abs()).sum::<f64>() / n;
        if 100.0 * err < best.value {
            best = Mape { value: 100.0 * err, best_row: k };
        }
    }
    best
}

/// Minimum over rows of the mean relative error, separately for `r` and `x`, in percent.
pub fn mape_star(candidates: &CandidateMatrix, truth: &[f64]) -> Result<MapePair, MetricsError> {
    check(candidates, truth)?;
    if let Some(i) = truth.iter().position(|&v| v == 0.0) {
        return Err(MetricsError::ZeroTruthComponent(i));
    }
    let ne = truth.len() / 2;
    Ok(MapePair { r: closest(candidates, truth, 0..ne), x: closest(candidates, truth, ne..2 * ne) })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Spread {
    pub min: f64,
    pub max: f64,
    pub median: f64,
}

impl Spread {
    fn of(values: &[f64]) -> Self {
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self { min, max, median: median(values) }
    }

    /// Distance of `v` outside `[min, max]`, zero inside.
    pub fn outside(&self, v: f64) -> f64 {
        (self.min - v).max(v - self.max).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EdgeRange {
    pub magnitude: Spread,
    pub r: Spread,
    pub x: Spread,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RangeReport {
    pub edges: Vec<EdgeRange>,
}

pub fn range_report(candidates: &CandidateMatrix) -> Result<RangeReport, MetricsError> {
    if candidates.is_empty() {
        return Err(MetricsError::Empty);
    }
    let ne = candidates.n_cols() / 2;
    let edges = (0..ne)
        .map(|e| {
            let r = candidates.column(e);
            let x = candidates.column(ne + e);
            let mag: Vec<f64> = r.iter().zip(&x).map(|(a, b)| libm::hypot(*a, *b)).collect();
            EdgeRange { magnitude: Spread::of(&mag), r: Spread::of(&r), x: Spread::of(&x) }
        })
        .collect();
    Ok(RangeReport { edges })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Containment {
    /// Per edge, how far the true `r` or `x` falls outside the candidate range.
    pub out_of_range: Vec<f64>,
    pub contained: bool,
}

impl RangeReport {
    /// Whether each true `(r, x)` lies inside its per-edge envelope within `tol`.
    pub fn containment(&self, truth: &[f64], tol: f64) -> Result<Containment, MetricsError> {
        let ne = self.edges.len();
        if truth.len() != 2 * ne {
            return Err(MetricsError::DimensionMismatch { candidates: 2 * ne, truth: truth.len() });
        }
        let out_of_range: Vec<f64> =
            self.edges.iter().enumerate().map(|(e, er)| er.r.outside(truth[e]).max(er.x.outside(truth[ne + e]))).collect();
        let contained = out_of_range.iter().all(|&d| d <= tol);
        Ok(Containment { out_of_range, contained })
    }
}
