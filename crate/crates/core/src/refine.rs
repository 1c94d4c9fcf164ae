//! Cable libraries and the penalized descent that pulls sampled candidates
//! towards library-consistent impedances.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{Complex, DVector};
use thiserror::Error;

use crate::candidates::{CandidateMatrix, Stage};
use crate::linalg::norm;
use crate::polytope::{HalfSpaceSystem, LibraryBounds, LibraryEnvelope, PolytopeError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RefineError {
    #[error("edge {0} has an empty cable list")]
    EmptyLibrary(usize),
    #[error("cable {cable} of edge {edge} lies outside the library envelope")]
    OutsideEnvelope { edge: usize, cable: usize },
    #[error("cables {a} and {b} of edge {edge} are closer than the distinctness threshold")]
    NotDistinct { edge: usize, a: usize, b: usize },
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch { what: &'static str, expected: usize, found: usize },
    #[error("invalid refinement setting: {0}")]
    InvalidConfig(&'static str),
    #[error(transparent)]
    Bounds(#[from] PolytopeError),
}

/// Per-edge admissible cable types in per-unit per meter.
#[derive(Debug, Clone, PartialEq)]
pub struct CableLibrary {
    per_edge: Vec<Vec<Complex<f64>>>,
    bounds: LibraryBounds,
}

impl CableLibrary {
    /// Rejects empty lists and types outside `bounds`.
    pub fn new(per_edge: Vec<Vec<Complex<f64>>>, bounds: LibraryBounds) -> Result<Self, RefineError> {
        bounds.validate()?;
        for (e, list) in per_edge.iter().enumerate() {
            if list.is_empty() {
                return Err(RefineError::EmptyLibrary(e));
            }
            for (k, c) in list.iter().enumerate() {
                if !bounds.contains(c.re, c.im, 1e-12) {
                    return Err(RefineError::OutsideEnvelope { edge: e, cable: k });
                }
            }
        }
        Ok(Self { per_edge, bounds })
    }

    /// Same type list on every edge, with envelope derived from the list.
    pub fn uniform(types: &[Complex<f64>], n_edges: usize, envelope: &LibraryEnvelope) -> Result<Self, RefineError> {
        let points: Vec<(f64, f64)> = types.iter().map(|c| (c.re, c.im)).collect();
        let bounds = LibraryBounds::from_points(&points, envelope)?;
        Self::new(vec![types.to_vec(); n_edges], bounds)
    }

    /// Converts ohm/km types to per-unit per meter with `z_base` in ohm.
    pub fn from_ohm_per_km(
        types: &[(f64, f64)],
        n_edges: usize,
        z_base: f64,
        envelope: &LibraryEnvelope,
    ) -> Result<Self, RefineError> {
        if !(z_base > 0.0) {
            return Err(RefineError::InvalidConfig("base impedance must be positive"));
        }
        let factor = 1.0 / (1000.0 * z_base);
        let bounds = LibraryBounds::from_points(types, envelope)?.scaled(factor);
        let scaled: Vec<Complex<f64>> = types.iter().map(|&(r, x)| Complex::new(r * factor, x * factor)).collect();
        Self::new(vec![scaled; n_edges], bounds)
    }

    /// Errors if two types on one edge are within `eps` relative distance.
    pub fn check_distinct(&self, eps: f64) -> Result<(), RefineError> {
        for (e, list) in self.per_edge.iter().enumerate() {
            for a in 0..list.len() {
                for b in a + 1..list.len() {
                    let scale = modulus(list[a]).max(modulus(list[b]));
                    if modulus(list[a] - list[b]) < eps * scale {
                        return Err(RefineError::NotDistinct { edge: e, a, b });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn n_edges(&self) -> usize {
        self.per_edge.len()
    }

    pub fn candidates(&self, edge: usize) -> &[Complex<f64>] {
        &self.per_edge[edge]
    }

    pub fn bounds(&self) -> &LibraryBounds {
        &self.bounds
    }

    /// Index of the nearest scaled type and the offset `z_e - l_e c`; lowest index wins ties.
    pub fn nearest(&self, edge: usize, z_e: Complex<f64>, length: f64) -> (usize, Complex<f64>) {
        let mut best = (0, z_e - self.per_edge[edge][0] * length);
        for (k, &c) in self.per_edge[edge].iter().enumerate().skip(1) {
            let d = z_e - c * length;
            if modulus(d) < modulus(best.1) {
                best = (k, d);
            }
        }
        best
    }
}

fn modulus(c: Complex<f64>) -> f64 {
    libm::hypot(c.re, c.im)
}

fn check_dims(z: &[f64], lib: &CableLibrary, lengths: &[f64]) -> Result<usize, RefineError> {
    let ne = lengths.len();
    if lib.n_edges() != ne {
        return Err(RefineError::DimensionMismatch { what: "library edges", expected: ne, found: lib.n_edges() });
    }
    if z.len() != 2 * ne {
        return Err(RefineError::DimensionMismatch { what: "impedance vector", expected: 2 * ne, found: z.len() });
    }
    Ok(ne)
}

/// Sum over edges of the distance to the nearest length-scaled library type.
pub fn library_distance(z: &[f64], lib: &CableLibrary, lengths: &[f64]) -> Result<f64, RefineError> {
    let ne = check_dims(z, lib, lengths)?;
    Ok((0..ne).map(|e| lib.nearest(e, Complex::new(z[e], z[ne + e]), lengths[e]).1).map(modulus).sum())
}

const KINK: f64 = 1e-14;

/// Subgradient of [`library_distance`]: unit offset per edge, zero on a library point.
pub fn library_gradient(z: &[f64], lib: &CableLibrary, lengths: &[f64]) -> Result<Vec<f64>, RefineError> {
    let ne = check_dims(z, lib, lengths)?;
    let mut g = vec![0.0; 2 * ne];
    for e in 0..ne {
        let d = lib.nearest(e, Complex::new(z[e], z[ne + e]), lengths[e]).1;
        let n = modulus(d);
        if n >= KINK {
            g[e] = d.re / n;
            g[ne + e] = d.im / n;
        }
    }
    Ok(g)
}

fn positive_residual(system: &HalfSpaceSystem, z: &[f64]) -> DVector<f64> {
    (&system.a * DVector::from_column_slice(z) - &system.b).map(|v| v.max(0.0))
}

/// `(rho / 2) ||[a z - b]_+||^2`.
pub fn penalty(system: &HalfSpaceSystem, z: &[f64], rho: f64) -> f64 {
    0.5 * rho * positive_residual(system, z).norm_squared()
}

pub fn penalty_gradient(system: &HalfSpaceSystem, z: &[f64], rho: f64) -> Vec<f64> {
    (system.a.tr_mul(&positive_residual(system, z)) * rho).iter().copied().collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct RefinementConfig {
    /// Step size in per-unit impedance.
    pub lambda: f64,
    /// Penalty weight; zero disables the polytope pull.
    pub rho: f64,
    pub max_iters: usize,
    /// Step-norm threshold; `None` means `1e-8 * lambda`.
    pub stop_tol: Option<f64>,
    /// Iterations without a new best objective before giving up.
    pub patience: usize,
}

impl Default for RefinementConfig {
    fn default() -> Self {
        Self { lambda: 1e-4, rho: 0.0, max_iters: 5000, stop_tol: None, patience: 50 }
    }
}

impl RefinementConfig {
    pub fn validate(&self) -> Result<(), RefineError> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(RefineError::InvalidConfig("lambda must be positive"));
        }
        if !(self.rho >= 0.0 && self.rho.is_finite()) {
            return Err(RefineError::InvalidConfig("rho must be non-negative"));
        }
        Ok(())
    }

    fn tolerance(&self) -> f64 {
        self.stop_tol.unwrap_or(1e-8 * self.lambda)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum RowOutcome {
    Converged,
    MaxIterations,
    /// Objective stopped improving or blew up; the best iterate was kept.
    Stalled,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RowLog {
    pub iterations: usize,
    pub outcome: RowOutcome,
    pub library_distance: f64,
    pub penalty: f64,
}

/// Descends `Q(z) + penalty(z)` in place.
///
/// The library part of each step moves edge `e` by `min(lambda, |offset_e|)`
/// towards its nearest type, so a row can land exactly on the library.
pub fn refine_row(
    z: &mut [f64],
    system: Option<&HalfSpaceSystem>,
    lib: &CableLibrary,
    lengths: &[f64],
    cfg: &RefinementConfig,
) -> Result<RowLog, RefineError> {
    cfg.validate()?;
    let ne = check_dims(z, lib, lengths)?;
    if let Some(s) = system {
        if s.dim() != z.len() {
            return Err(RefineError::DimensionMismatch { what: "half-space columns", expected: z.len(), found: s.dim() });
        }
    }
    let rho = if system.is_some() { cfg.rho } else { 0.0 };
    let objective = |z: &[f64]| -> f64 {
        let q = library_distance(z, lib, lengths).unwrap_or(f64::INFINITY);
        q + system.map_or(0.0, |s| penalty(s, z, rho))
    };

    let tol = cfg.tolerance();
    let mut best = z.to_vec();
    let mut best_obj = objective(z);
    let mut since_best = 0;
    let mut outcome = RowOutcome::MaxIterations;
    let mut iterations = 0;
    let mut step = vec![0.0; z.len()];
    while iterations < cfg.max_iters {
        iterations += 1;
        step.iter_mut().for_each(|s| *s = 0.0);
        for e in 0..ne {
            let d = lib.nearest(e, Complex::new(z[e], z[ne + e]), lengths[e]).1;
            let n = modulus(d);
            if n >= KINK {
                let move_len = cfg.lambda.min(n);
                step[e] = move_len * d.re / n;
                step[ne + e] = move_len * d.im / n;
            }
        }
        if let (Some(s), true) = (system, rho > 0.0) {
            for (st, g) in step.iter_mut().zip(penalty_gradient(s, z, rho)) {
                *st += cfg.lambda * g;
            }
        }
        for (zi, st) in z.iter_mut().zip(&step) {
            *zi -= st;
        }
        let obj = objective(z);
        if !obj.is_finite() {
            outcome = RowOutcome::Stalled;
            break;
        }
        if obj < best_obj {
            best_obj = obj;
            best.copy_from_slice(z);
            since_best = 0;
        } else {
            since_best += 1;
        }
        if norm(&step) < tol {
            outcome = RowOutcome::Converged;
            break;
        }
        if since_best >= cfg.patience {
            outcome = RowOutcome::Stalled;
            break;
        }
    }
    if outcome != RowOutcome::Converged {
        z.copy_from_slice(&best);
    }
    Ok(RowLog {
        iterations,
        outcome,
        library_distance: library_distance(z, lib, lengths)?,
        penalty: system.map_or(0.0, |s| penalty(s, z, cfg.rho)),
    })
}

/// Refines every row independently.
pub fn refine_candidates(
    samples: &CandidateMatrix,
    system: Option<&HalfSpaceSystem>,
    lib: &CableLibrary,
    lengths: &[f64],
    cfg: &RefinementConfig,
) -> Result<(CandidateMatrix, Vec<RowLog>), RefineError> {
    let mut out = samples.clone().with_stage(Stage::Refined);
    let mut logs = Vec::with_capacity(samples.n_rows());
    for i in 0..out.n_rows() {
        logs.push(refine_row(out.row_mut(i), system, lib, lengths, cfg)?);
    }
    Ok((out, logs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn bounds() -> LibraryBounds {
        LibraryBounds { r_lo: 0.0, r_hi: 10.0, x_lo: 0.0, x_hi: 10.0, m_hi: 0.0, b_hi: 10.0, m_lo: 0.0, b_lo: -1.0 }
    }

    fn lib(types: &[(f64, f64)], n: usize) -> CableLibrary {
        let t: Vec<Complex<f64>> = types.iter().map(|&(r, x)| Complex::new(r, x)).collect();
        CableLibrary::new(vec![t; n], bounds()).unwrap()
    }

    #[test]
    fn distance_on_library_point_is_zero() {
        let l = lib(&[(1.0, 0.5), (2.0, 0.6)], 2);
        let z = [2.0 * 3.0, 1.0, 0.6 * 3.0, 0.5];
        assert_eq!(library_distance(&z, &l, &[3.0, 1.0]).unwrap(), 0.0);
        assert_eq!(library_gradient(&z, &l, &[3.0, 1.0]).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn gradient_is_unit_phasor() {
        let l = lib(&[(1.0, 0.0)], 1);
        let g = library_gradient(&[4.0, 3.0], &l, &[1.0]).unwrap();
        assert!((g[0] - g[1]).abs() < 1e-15 && (g[0] - libm::sqrt(0.5)).abs() < 1e-15);
    }

    #[test]
    fn tie_breaks_to_lowest_index() {
        let l = lib(&[(1.0, 0.0), (3.0, 0.0)], 1);
        assert_eq!(l.nearest(0, Complex::new(2.0, 0.0), 1.0).0, 0);
    }

    #[test]
    fn unpenalized_descent_lands_on_nearest_type() {
        let l = lib(&[(0.1, 0.07), (0.3, 0.075)], 1);
        let mut z = [0.12 * 50.0, 0.05 * 50.0];
        let cfg = RefinementConfig { lambda: 0.05, ..RefinementConfig::default() };
        let log = refine_row(&mut z, None, &l, &[50.0], &cfg).unwrap();
        assert_eq!(log.outcome, RowOutcome::Converged);
        assert!((z[0] - 5.0).abs() < 1e-12 && (z[1] - 3.5).abs() < 1e-12);
    }

    #[test]
    fn penalty_balances_library_pull() {
        // z in 1-D (plus a pinned x): library at r = 2, polytope r <= 1; with
        // lambda * rho = 1 the fixed point is r = 1 + 1/rho.
        let l = lib(&[(2.0, 0.0)], 1);
        let system = HalfSpaceSystem::new(DMatrix::from_row_slice(1, 2, &[1.0, 0.0]), DVector::from_vec(vec![1.0])).unwrap();
        let rho = 4.0;
        let cfg = RefinementConfig { lambda: 1.0 / rho, rho, stop_tol: Some(1e-13), ..RefinementConfig::default() };
        let mut z = [1.0, 0.0];
        let log = refine_row(&mut z, Some(&system), &l, &[1.0], &cfg).unwrap();
        assert_eq!(log.outcome, RowOutcome::Converged);
        assert!((z[0] - 1.25).abs() < 1e-12, "{}", z[0]);
    }

    #[test]
    fn library_validation() {
        assert!(matches!(CableLibrary::new(vec![vec![]], bounds()), Err(RefineError::EmptyLibrary(0))));
        let outside = CableLibrary::new(vec![vec![Complex::new(20.0, 0.0)]], bounds());
        assert!(matches!(outside, Err(RefineError::OutsideEnvelope { .. })));
        let close = lib(&[(1.0, 0.0), (1.0 + 1e-9, 0.0)], 1);
        assert!(close.check_distinct(1e-6).is_err());
        assert!(refine_row(&mut [0.0, 0.0], None, &close, &[1.0], &RefinementConfig { lambda: 0.0, ..Default::default() }).is_err());
    }

    #[test]
    fn ohm_per_km_conversion() {
        let z_base = 400.0 * 400.0 / 1e5;
        let l = CableLibrary::from_ohm_per_km(&[(0.2, 0.07)], 1, z_base, &LibraryEnvelope::default()).unwrap();
        assert!((l.candidates(0)[0].re - 0.2 / 1000.0 / 1.6).abs() < 1e-18);
        assert!((l.bounds().b_hi - 0.068 / 1600.0).abs() < 1e-18);
    }

    proptest! {
        #[test]
        fn refinement_never_increases_distance(r in 0.0f64..5.0, x in 0.0f64..5.0, lam in 1e-3f64..1.0) {
            let l = lib(&[(1.0, 0.5), (2.0, 1.0), (3.0, 0.2)], 1);
            let mut z = [r, x];
            let before = library_distance(&z, &l, &[1.0]).unwrap();
            refine_row(&mut z, None, &l, &[1.0], &RefinementConfig { lambda: lam, ..Default::default() }).unwrap();
            prop_assert!(library_distance(&z, &l, &[1.0]).unwrap() <= before + 1e-15);
        }
    }
}
