//! Feasible-impedance polytope: modeling-error LP, half-space assembly,
//! Chebyshev center, library envelopes, identifiability diagnostics and the
//! free/fixed coordinate split.
//!
//! Impedance vectors are laid out as `[r_0 .. r_{E-1}, x_0 .. x_{E-1}]` in
//! per-unit, with edge indices from [`FeederTopology`].

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::linalg::{numerical_rank, row_norm, singular_values};
use crate::lp::{Certificate, LinearProgram, LpError, VarBound};
use crate::network::{degree2_chains, AggregatedFlows, FeederTopology, MeterDataset, NetworkError};

/// Absolute slack used instead of `kappa * delta` when the data fit exactly.
pub const MIN_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolytopeError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("linear program failed: {0}")]
    Lp(LpError),
    #[error("half-space system is empty (infeasible)")]
    Infeasible,
    #[error("half-space system is unbounded")]
    Unbounded,
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch { what: &'static str, expected: usize, found: usize },
    #[error("fixed point violates row {row} by {violation:e}")]
    InfeasibleFixedPoint { row: usize, violation: f64 },
    #[error("feeder has no leaves")]
    NoLeaves,
    #[error("invalid library bounds: {0}")]
    InvalidBounds(&'static str),
    #[error("slack factor must be at least 1, got {0}")]
    InvalidKappa(f64),
}

impl From<LpError> for PolytopeError {
    fn from(e: LpError) -> Self {
        match e {
            LpError::Infeasible { .. } => Self::Infeasible,
            LpError::Unbounded => Self::Unbounded,
            other => Self::Lp(other),
        }
    }
}

/// Origin of a half-space row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum RowTag {
    /// Voltage row at `leaf` for `snapshot`; `positive` rows carry `+M`, the others `-M`.
    Data { leaf: usize, snapshot: usize, positive: bool },
    RUpper { edge: usize },
    XUpper { edge: usize },
    RLower { edge: usize },
    XLower { edge: usize },
    LineUpper { edge: usize },
    LineLower { edge: usize },
    Other,
}

/// `{ z : a z <= b }` with a tag per row.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfSpaceSystem {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub tags: Vec<RowTag>,
}

impl HalfSpaceSystem {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self, PolytopeError> {
        if a.nrows() != b.len() {
            return Err(PolytopeError::DimensionMismatch { what: "right-hand side", expected: a.nrows(), found: b.len() });
        }
        let tags = vec![RowTag::Other; a.nrows()];
        Ok(Self { a, b, tags })
    }

    pub fn empty(dim: usize) -> Self {
        Self { a: DMatrix::zeros(0, dim), b: DVector::zeros(0), tags: Vec::new() }
    }

    pub fn n_rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    /// Largest `a_i z - b_i` (negative when strictly inside).
    pub fn max_violation(&self, z: &[f64]) -> f64 {
        let zv = DVector::from_column_slice(z);
        let r = &self.a * zv - &self.b;
        r.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, z: &[f64], tol: f64) -> bool {
        self.n_rows() == 0 || self.max_violation(z) <= tol
    }

    /// Rows of `other` appended below `self`.
    pub fn stacked(&self, other: &HalfSpaceSystem) -> Result<Self, PolytopeError> {
        if self.dim() != other.dim() {
            return Err(PolytopeError::DimensionMismatch { what: "stacked columns", expected: self.dim(), found: other.dim() });
        }
        let (m1, m2, n) = (self.n_rows(), other.n_rows(), self.dim());
        let mut a = DMatrix::zeros(m1 + m2, n);
        a.view_mut((0, 0), (m1, n)).copy_from(&self.a);
        a.view_mut((m1, 0), (m2, n)).copy_from(&other.a);
        let mut b = DVector::zeros(m1 + m2);
        b.rows_mut(0, m1).copy_from(&self.b);
        b.rows_mut(m1, m2).copy_from(&other.b);
        let mut tags = self.tags.clone();
        tags.extend_from_slice(&other.tags);
        Ok(Self { a, b, tags })
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let a = DMatrix::from_fn(rows.len(), self.dim(), |i, j| self.a[(rows[i], j)]);
        let b = DVector::from_fn(rows.len(), |i, _| self.b[rows[i]]);
        let tags = rows.iter().map(|&i| self.tags[i]).collect();
        Self { a, b, tags }
    }

    /// Indices of the `+M` data rows.
    pub fn data_rows(&self) -> Vec<usize> {
        (0..self.n_rows()).filter(|&i| matches!(self.tags[i], RowTag::Data { positive: true, .. })).collect()
    }
}

/// `M^n`: one row per snapshot, `2 A_{n,e} [Pbr, Qbr]` in the `[r, x]` columns.
pub fn leaf_rows(topology: &FeederTopology, flows: &AggregatedFlows, leaf: usize) -> DMatrix<f64> {
    let ne = topology.n_edges();
    let t_count = flows.p.nrows();
    let mut m = DMatrix::zeros(t_count, 2 * ne);
    for e in topology.path_edges(leaf) {
        for t in 0..t_count {
            m[(t, e)] = 2.0 * flows.p[(t, e)];
            m[(t, ne + e)] = 2.0 * flows.q[(t, e)];
        }
    }
    m
}

fn leaf_voltages(topology: &FeederTopology, data: &MeterDataset, flows: &AggregatedFlows) -> Result<(), PolytopeError> {
    data.check_against(topology)?;
    if topology.leaves().is_empty() {
        return Err(PolytopeError::NoLeaves);
    }
    if flows.p.nrows() != data.snapshots() || flows.p.ncols() != topology.n_edges() {
        return Err(PolytopeError::DimensionMismatch {
            what: "aggregated flows",
            expected: data.snapshots(),
            found: flows.p.nrows(),
        });
    }
    Ok(())
}

/// Measured squared voltage at `leaf` minus the root value, per snapshot.
fn measured_drop(data: &MeterDataset, leaf: usize) -> Result<Vec<f64>, PolytopeError> {
    (0..data.snapshots())
        .map(|t| {
            let v2 = data.v2_at(t, leaf).ok_or(NetworkError::MissingLeafVoltage { node: leaf })?;
            Ok(v2 - data.root_v2(t))
        })
        .collect()
}

/// Minimum uniform modeling error and a minimizing impedance vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaSolution {
    pub delta_star: f64,
    pub z_star: Vec<f64>,
    pub certificate: Certificate,
}

/// Smallest `delta` such that some `z >= 0` explains every leaf voltage within `delta`.
pub fn solve_delta_lp(
    topology: &FeederTopology,
    data: &MeterDataset,
    flows: &AggregatedFlows,
) -> Result<DeltaSolution, PolytopeError> {
    leaf_voltages(topology, data, flows)?;
    let ne = topology.n_edges();
    let t_count = data.snapshots();
    let leaves = topology.leaves();
    let n_rows = 2 * t_count * leaves.len();
    let mut a = DMatrix::zeros(n_rows, 2 * ne + 1);
    let mut b = vec![0.0; n_rows];
    let mut row = 0;
    for &leaf in leaves {
        let m = leaf_rows(topology, flows, leaf);
        let drop = measured_drop(data, leaf)?;
        for t in 0..t_count {
            for j in 0..2 * ne {
                a[(row, j)] = -m[(t, j)];
                a[(row + t_count, j)] = m[(t, j)];
            }
            a[(row, 2 * ne)] = -1.0;
            a[(row + t_count, 2 * ne)] = -1.0;
            b[row] = drop[t];
            b[row + t_count] = -drop[t];
            row += 1;
        }
        row += t_count;
    }
    let mut objective = vec![0.0; 2 * ne + 1];
    objective[2 * ne] = 1.0;
    let lp = LinearProgram::new(objective, a, b, vec![VarBound::NonNegative; 2 * ne + 1]);
    let sol = lp.solve()?;
    let delta_star = sol.x[2 * ne].max(0.0);
    Ok(DeltaSolution { delta_star, z_star: sol.x[..2 * ne].to_vec(), certificate: sol.certificate })
}

/// Slack actually used for the voltage rows.
pub fn effective_slack(delta_star: f64, kappa: f64) -> f64 {
    if delta_star < MIN_SLACK {
        MIN_SLACK
    } else {
        kappa * delta_star
    }
}

/// Voltage half-spaces with slack `kappa * delta_star`, stacked leaf by leaf.
pub fn assemble_halfspaces(
    topology: &FeederTopology,
    data: &MeterDataset,
    flows: &AggregatedFlows,
    delta_star: f64,
    kappa: f64,
) -> Result<HalfSpaceSystem, PolytopeError> {
    if !(kappa >= 1.0) {
        return Err(PolytopeError::InvalidKappa(kappa));
    }
    assemble_with_slack(topology, data, flows, kappa * delta_star)
}

/// Voltage half-spaces with an explicit absolute slack.
pub fn assemble_with_slack(
    topology: &FeederTopology,
    data: &MeterDataset,
    flows: &AggregatedFlows,
    slack: f64,
) -> Result<HalfSpaceSystem, PolytopeError> {
    leaf_voltages(topology, data, flows)?;
    let ne = topology.n_edges();
    let t_count = data.snapshots();
    let leaves = topology.leaves();
    let n_rows = 2 * t_count * leaves.len();
    let mut a = DMatrix::zeros(n_rows, 2 * ne);
    let mut b = DVector::zeros(n_rows);
    let mut tags = Vec::with_capacity(n_rows);
    let mut base = 0;
    for &leaf in leaves {
        let m = leaf_rows(topology, flows, leaf);
        let drop = measured_drop(data, leaf)?;
        for t in 0..t_count {
            for j in 0..2 * ne {
                a[(base + t, j)] = -m[(t, j)];
                a[(base + t_count + t, j)] = m[(t, j)];
            }
            b[base + t] = drop[t] + slack;
            b[base + t_count + t] = -drop[t] + slack;
        }
        tags.extend((0..t_count).map(|t| RowTag::Data { leaf, snapshot: t, positive: false }));
        tags.extend((0..t_count).map(|t| RowTag::Data { leaf, snapshot: t, positive: true }));
        base += 2 * t_count;
    }
    Ok(HalfSpaceSystem { a, b, tags })
}

/// Center and radius of the largest inscribed ball.
pub fn chebyshev_center(system: &HalfSpaceSystem) -> Result<(Vec<f64>, f64), PolytopeError> {
    let n = system.dim();
    let mut rows = Vec::new();
    for i in 0..system.n_rows() {
        let norm = row_norm(&system.a, i);
        if norm > 0.0 {
            rows.push((i, norm));
        } else if system.b[i] < 0.0 {
            return Err(PolytopeError::Infeasible);
        }
    }
    if n == 0 {
        return Ok((Vec::new(), f64::INFINITY));
    }
    let mut a = DMatrix::zeros(rows.len(), n + 1);
    let mut b = vec![0.0; rows.len()];
    for (k, &(i, norm)) in rows.iter().enumerate() {
        a.view_mut((k, 0), (1, n)).copy_from(&system.a.row(i));
        a[(k, n)] = norm;
        b[k] = system.b[i];
    }
    let mut objective = vec![0.0; n + 1];
    objective[n] = -1.0;
    let mut bounds = vec![VarBound::Free; n + 1];
    bounds[n] = VarBound::NonNegative;
    let sol = LinearProgram::new(objective, a, b, bounds).solve()?;
    Ok((sol.x[..n].to_vec(), sol.x[n]))
}

/// Library envelope parameters in library units (per unit length for the
/// intercepts and box factors' reference points; slopes are dimensionless).
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct LibraryEnvelope {
    pub upper_factor: f64,
    pub lower_factor: f64,
    pub m_hi: f64,
    pub b_hi: f64,
    pub m_lo: f64,
    pub b_lo: f64,
}

impl Default for LibraryEnvelope {
    /// Lines in ohm/km fitted around common LV cable types.
    fn default() -> Self {
        Self { upper_factor: 1.10, lower_factor: 0.90, m_hi: 0.030, b_hi: 0.068, m_lo: 0.017, b_lo: 0.061 }
    }
}

/// Per-unit-length box and line bounds on `(r_e / l_e, x_e / l_e)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LibraryBounds {
    pub r_lo: f64,
    pub r_hi: f64,
    pub x_lo: f64,
    pub x_hi: f64,
    pub m_hi: f64,
    pub b_hi: f64,
    pub m_lo: f64,
    pub b_lo: f64,
}

impl LibraryBounds {
    /// Box from the extreme library points widened by the envelope factors.
    pub fn from_points(points: &[(f64, f64)], envelope: &LibraryEnvelope) -> Result<Self, PolytopeError> {
        if points.is_empty() {
            return Err(PolytopeError::InvalidBounds("library is empty"));
        }
        let fold = |f: fn(&(f64, f64)) -> f64, init: f64, pick: fn(f64, f64) -> f64| points.iter().map(f).fold(init, pick);
        let bounds = Self {
            r_lo: envelope.lower_factor * fold(|p| p.0, f64::INFINITY, f64::min),
            r_hi: envelope.upper_factor * fold(|p| p.0, f64::NEG_INFINITY, f64::max),
            x_lo: envelope.lower_factor * fold(|p| p.1, f64::INFINITY, f64::min),
            x_hi: envelope.upper_factor * fold(|p| p.1, f64::NEG_INFINITY, f64::max),
            m_hi: envelope.m_hi,
            b_hi: envelope.b_hi,
            m_lo: envelope.m_lo,
            b_lo: envelope.b_lo,
        };
        bounds.validate()?;
        Ok(bounds)
    }

    /// Rescales every length-proportional quantity (slopes are unit-free).
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            r_lo: self.r_lo * factor,
            r_hi: self.r_hi * factor,
            x_lo: self.x_lo * factor,
            x_hi: self.x_hi * factor,
            b_hi: self.b_hi * factor,
            b_lo: self.b_lo * factor,
            ..*self
        }
    }

    pub fn validate(&self) -> Result<(), PolytopeError> {
        let all = [self.r_lo, self.r_hi, self.x_lo, self.x_hi, self.m_hi, self.b_hi, self.m_lo, self.b_lo];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(PolytopeError::InvalidBounds("non-finite value"));
        }
        if !(self.r_lo < self.r_hi && self.x_lo < self.x_hi) {
            return Err(PolytopeError::InvalidBounds("box bounds must be ordered"));
        }
        let gap = |r: f64| (self.m_hi * r + self.b_hi) - (self.m_lo * r + self.b_lo);
        if !(gap(self.r_lo) > 0.0 && gap(self.r_hi) > 0.0) {
            return Err(PolytopeError::InvalidBounds("upper line must lie above lower line over the box"));
        }
        Ok(())
    }

    /// Whether a per-unit-length point lies inside the envelope (with relative slack `tol`).
    pub fn contains(&self, r: f64, x: f64, tol: f64) -> bool {
        let s = tol * (self.r_hi.abs() + self.x_hi.abs());
        r <= self.r_hi + s
            && r >= self.r_lo - s
            && x <= self.x_hi + s
            && x >= self.x_lo - s
            && x <= self.m_hi * r + self.b_hi + s
            && x >= self.m_lo * r + self.b_lo - s
    }
}

/// Six blocks of `E` rows: `r`/`x` upper, `r`/`x` lower, upper line, lower line.
pub fn library_halfspaces(lengths: &[f64], bounds: &LibraryBounds) -> HalfSpaceSystem {
    let ne = lengths.len();
    let mut a = DMatrix::zeros(6 * ne, 2 * ne);
    let mut b = DVector::zeros(6 * ne);
    let mut tags = Vec::with_capacity(6 * ne);
    for (e, &l) in lengths.iter().enumerate() {
        let (r, x) = (e, ne + e);
        a[(e, r)] = 1.0;
        b[e] = l * bounds.r_hi;
        a[(ne + e, x)] = 1.0;
        b[ne + e] = l * bounds.x_hi;
        a[(2 * ne + e, r)] = -1.0;
        b[2 * ne + e] = -l * bounds.r_lo;
        a[(3 * ne + e, x)] = -1.0;
        b[3 * ne + e] = -l * bounds.x_lo;
        a[(4 * ne + e, r)] = -bounds.m_hi;
        a[(4 * ne + e, x)] = 1.0;
        b[4 * ne + e] = l * bounds.b_hi;
        a[(5 * ne + e, r)] = bounds.m_lo;
        a[(5 * ne + e, x)] = -1.0;
        b[5 * ne + e] = -l * bounds.b_lo;
    }
    let blocks: [fn(usize) -> RowTag; 6] = [
        |edge| RowTag::RUpper { edge },
        |edge| RowTag::XUpper { edge },
        |edge| RowTag::RLower { edge },
        |edge| RowTag::XLower { edge },
        |edge| RowTag::LineUpper { edge },
        |edge| RowTag::LineLower { edge },
    ];
    for make in blocks {
        tags.extend((0..ne).map(make));
    }
    HalfSpaceSystem { a, b, tags }
}

/// `system` with the library rows appended.
pub fn apply_library_bounds(
    system: &HalfSpaceSystem,
    lengths: &[f64],
    bounds: &LibraryBounds,
) -> Result<HalfSpaceSystem, PolytopeError> {
    if system.dim() != 2 * lengths.len() {
        return Err(PolytopeError::DimensionMismatch { what: "branch lengths", expected: system.dim() / 2, found: lengths.len() });
    }
    system.stacked(&library_halfspaces(lengths, bounds))
}

/// Structural identifiability of the data block.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IdentifiabilityReport {
    pub n_columns: usize,
    pub singular_values: Vec<f64>,
    pub numerical_rank: usize,
    /// Groups of edges whose `r` and `x` columns coincide.
    pub duplicate_edges: Vec<Vec<usize>>,
    /// `tan(phi)` when the `x` half is a fixed multiple of the `r` half.
    pub constant_ratio: Option<f64>,
    /// `||R - ratio L|| / ||R||` of the least-squares ratio fit.
    pub ratio_residual: f64,
    /// Induced 1-norm of the pseudo-inverse of the data block.
    pub pinv_norm_1: f64,
}

pub const RANK_TOL: f64 = 1e-8;
pub const DUPLICATE_TOL: f64 = 1e-10;
pub const RATIO_TOL: f64 = 1e-8;

fn columns_equal(m: &DMatrix<f64>, i: usize, j: usize) -> bool {
    let d: f64 = m.column(i).iter().zip(m.column(j).iter()).map(|(a, b)| (a - b) * (a - b)).sum();
    libm::sqrt(d) <= DUPLICATE_TOL * m.column(i).norm().max(m.column(j).norm())
}

pub fn diagnose_identifiability(system: &HalfSpaceSystem) -> IdentifiabilityReport {
    let rows = system.data_rows();
    let m = if rows.is_empty() { system.a.clone() } else { system.select_rows(&rows).a };
    let n = m.ncols();
    let singular = singular_values(&m);
    let rank = numerical_rank(&singular, RANK_TOL);

    let ne = n / 2;
    let mut assigned = vec![false; ne];
    let mut duplicate_edges = Vec::new();
    for i in 0..ne {
        if assigned[i] {
            continue;
        }
        let mut group = vec![i];
        for j in i + 1..ne {
            if !assigned[j] && columns_equal(&m, i, j) && columns_equal(&m, ne + i, ne + j) {
                group.push(j);
                assigned[j] = true;
            }
        }
        if group.len() > 1 {
            duplicate_edges.push(group);
        }
    }

    let (mut constant_ratio, mut ratio_residual) = (None, f64::INFINITY);
    if ne > 0 && 2 * ne == n {
        let l = m.columns(0, ne);
        let r = m.columns(ne, ne);
        let ll = l.dot(&l);
        let rr = r.dot(&r);
        if ll > 0.0 {
            let ratio = l.dot(&r) / ll;
            let resid = (r - l * ratio).norm();
            ratio_residual = if rr > 0.0 { resid / libm::sqrt(rr) } else { 0.0 };
            if ratio_residual < RATIO_TOL {
                constant_ratio = Some(ratio);
            }
        }
    }

    let pinv_norm_1 = if m.nrows() == 0 || n == 0 {
        0.0
    } else {
        let s_max = singular.first().copied().unwrap_or(0.0);
        match m.clone().svd(true, true).pseudo_inverse(RANK_TOL * s_max) {
            Ok(p) => (0..p.ncols()).map(|j| p.column(j).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max),
            Err(_) => f64::INFINITY,
        }
    };

    IdentifiabilityReport {
        n_columns: n,
        singular_values: singular,
        numerical_rank: rank,
        duplicate_edges,
        constant_ratio,
        ratio_residual,
        pinv_norm_1,
    }
}

/// Polytope restricted to the free coordinates with the rest pinned at `z0`.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionSplit {
    pub free: Vec<usize>,
    pub fixed: Vec<usize>,
    pub z0: Vec<f64>,
    pub reduced: HalfSpaceSystem,
    /// Original row index of each reduced row.
    pub kept_rows: Vec<usize>,
}

impl DirectionSplit {
    /// Full vector from free-coordinate values.
    pub fn lift(&self, free_values: &[f64]) -> Vec<f64> {
        let mut z = self.z0.clone();
        for (&j, &v) in self.free.iter().zip(free_values) {
            z[j] = v;
        }
        z
    }
}

pub fn split_directions(
    system: &HalfSpaceSystem,
    z0: &[f64],
    free: &[usize],
    tol: f64,
) -> Result<DirectionSplit, PolytopeError> {
    let n = system.dim();
    if z0.len() != n {
        return Err(PolytopeError::DimensionMismatch { what: "fixed point", expected: n, found: z0.len() });
    }
    let mut is_free = vec![false; n];
    for &j in free {
        if j >= n {
            return Err(PolytopeError::DimensionMismatch { what: "free coordinate", expected: n, found: j });
        }
        is_free[j] = true;
    }
    let free: Vec<usize> = (0..n).filter(|&j| is_free[j]).collect();
    let fixed: Vec<usize> = (0..n).filter(|&j| !is_free[j]).collect();

    let mut kept_rows = Vec::new();
    let mut rhs = Vec::new();
    for i in 0..system.n_rows() {
        let pinned: f64 = fixed.iter().map(|&j| system.a[(i, j)] * z0[j]).sum();
        let d = system.b[i] - pinned;
        if free.iter().all(|&j| system.a[(i, j)] == 0.0) {
            if d < -tol {
                return Err(PolytopeError::InfeasibleFixedPoint { row: i, violation: -d });
            }
        } else {
            kept_rows.push(i);
            rhs.push(d);
        }
    }
    let a = DMatrix::from_fn(kept_rows.len(), free.len(), |i, j| system.a[(kept_rows[i], free[j])]);
    let tags = kept_rows.iter().map(|&i| system.tags[i]).collect();
    let reduced = HalfSpaceSystem { a, b: DVector::from_vec(rhs), tags };
    Ok(DirectionSplit { free, fixed, z0: z0.to_vec(), reduced, kept_rows })
}

/// Free coordinates: `r` and `x` of every degree-2 chain edge, unless an
/// explicit list is given.
///
/// Data-driven deficiencies such as a constant power factor stay fixed; the
/// library prior resolves them.
pub fn auto_select_free(topology: &FeederTopology, explicit: Option<&[usize]>) -> Vec<usize> {
    if let Some(list) = explicit {
        return list.to_vec();
    }
    let ne = topology.n_edges();
    let mut edges: Vec<usize> = degree2_chains(topology).into_iter().flatten().collect();
    edges.sort_unstable();
    let mut out = edges.clone();
    out.extend(edges.iter().map(|e| ne + e));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{aggregate_flows, validate_topology};
    use crate::simulate::{make_dataset, FlowModel, InjectionModel};
    use proptest::prelude::*;

    fn one_edge(v_leaf: f64) -> (FeederTopology, MeterDataset, AggregatedFlows) {
        let t = validate_topology(&[(0, 1, 1.0)]).unwrap();
        let p = DMatrix::from_row_slice(1, 2, &[0.0, 1.0]);
        let q = DMatrix::from_row_slice(1, 2, &[0.0, 0.5]);
        let v2 = DMatrix::from_row_slice(1, 2, &[1.0, v_leaf * v_leaf]);
        let d = MeterDataset::new(p, q, v2, vec![0, 1]).unwrap();
        let f = aggregate_flows(&t, &d).unwrap();
        (t, d, f)
    }

    #[test]
    fn single_edge_rows() {
        let (t, d, f) = one_edge(libm::sqrt(0.975));
        let h = assemble_halfspaces(&t, &d, &f, 0.0, 1.05).unwrap();
        assert_eq!(h.a, DMatrix::from_row_slice(2, 2, &[-2.0, -1.0, 2.0, 1.0]));
        assert!((h.b[0] + 0.025).abs() < 1e-15 && (h.b[1] - 0.025).abs() < 1e-15);
        assert!(h.contains(&[0.01, 0.005], 1e-14));
        assert!(matches!(assemble_halfspaces(&t, &d, &f, 0.0, 0.5), Err(PolytopeError::InvalidKappa(_))));
    }

    #[test]
    fn delta_lp_exact_and_negative_drop() {
        let (t, d, f) = one_edge(libm::sqrt(0.975));
        let s = solve_delta_lp(&t, &d, &f).unwrap();
        assert!(s.delta_star < 1e-12);
        // A leaf above the root cannot be explained by z >= 0 with positive load.
        let (t, d, f) = one_edge(libm::sqrt(1.01));
        let s = solve_delta_lp(&t, &d, &f).unwrap();
        assert!((s.delta_star - 0.01).abs() < 1e-12);
    }

    #[test]
    fn chebyshev_of_unit_square() {
        let a = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0]);
        let h = HalfSpaceSystem::new(a, DVector::from_vec(vec![1.0, 0.0, 1.0, 0.0])).unwrap();
        let (c, r) = chebyshev_center(&h).unwrap();
        assert!((c[0] - 0.5).abs() < 1e-10 && (c[1] - 0.5).abs() < 1e-10);
        assert!((r - 0.5).abs() < 1e-10);
    }

    #[test]
    fn chebyshev_of_empty_set() {
        let a = DMatrix::from_row_slice(2, 1, &[1.0, -1.0]);
        let h = HalfSpaceSystem::new(a, DVector::from_vec(vec![0.0, -1.0])).unwrap();
        assert_eq!(chebyshev_center(&h), Err(PolytopeError::Infeasible));
    }

    #[test]
    fn library_rows_scale_with_length() {
        let bounds = LibraryBounds::from_points(&[(0.1, 0.07), (0.4, 0.075)], &LibraryEnvelope::default()).unwrap();
        let h = library_halfspaces(&[2.0], &bounds);
        assert_eq!(h.n_rows(), 6);
        assert!((h.b[0] - 2.0 * 0.44).abs() < 1e-15);
        assert!((h.b[2] + 2.0 * 0.09).abs() < 1e-15);
        assert!(h.contains(&[2.0 * 0.2, 2.0 * 0.072], 0.0));
        assert!(!h.contains(&[2.0 * 0.2, 2.0 * 0.09], 0.0));
        assert!(bounds.contains(0.2, 0.072, 0.0));
    }

    #[test]
    fn bounds_validation() {
        let env = LibraryEnvelope { b_hi: 0.0, ..LibraryEnvelope::default() };
        assert!(LibraryBounds::from_points(&[(0.1, 0.07)], &env).is_err());
        assert!(LibraryBounds::from_points(&[], &LibraryEnvelope::default()).is_err());
    }

    #[test]
    fn constant_ratio_and_duplicates() {
        // 0 - 1 - 2 with a single leaf: the two edges always carry identical flows.
        let t = validate_topology(&[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let model = InjectionModel::FixedPowerFactor { power_factor: 0.95, p_min: 0.01, p_max: 0.1 };
        let d = make_dataset(&t, &[0.01, 0.01, 0.003, 0.003], &model, 6, FlowModel::LinDistFlow, 1.0, 0).unwrap();
        let f = aggregate_flows(&t, &d).unwrap();
        let h = assemble_halfspaces(&t, &d, &f, 0.0, 1.0).unwrap();
        let rep = diagnose_identifiability(&h);
        assert_eq!(rep.numerical_rank, 1);
        assert_eq!(rep.duplicate_edges, vec![vec![0, 1]]);
        let tan_phi = libm::tan(libm::acos(0.95));
        assert!((rep.constant_ratio.unwrap() - tan_phi).abs() < 1e-12);
        assert_eq!(auto_select_free(&t, None), vec![0, 1, 2, 3]);
        assert_eq!(auto_select_free(&t, Some(&[3])), vec![3]);
    }

    #[test]
    fn split_pins_fixed_coordinates() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 0.0, 1.0, 0.0, -1.0]);
        let h = HalfSpaceSystem::new(a, DVector::from_vec(vec![2.0, 1.0, 0.0])).unwrap();
        let s = split_directions(&h, &[0.0, 0.5], &[0], 1e-12).unwrap();
        assert_eq!(s.kept_rows, vec![0]);
        assert_eq!(s.reduced.a, DMatrix::from_row_slice(1, 1, &[1.0]));
        assert!((s.reduced.b[0] - 1.5).abs() < 1e-15);
        assert_eq!(s.lift(&[0.7]), vec![0.7, 0.5]);
        let err = split_directions(&h, &[0.0, 2.0], &[0], 1e-12).unwrap_err();
        assert!(matches!(err, PolytopeError::InfeasibleFixedPoint { row: 1, .. }));
        let none = split_directions(&h, &[0.0, 0.5], &[], 1e-12).unwrap();
        assert_eq!(none.reduced.n_rows(), 0);
        assert_eq!(none.lift(&[]), vec![0.0, 0.5]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn truth_satisfies_lindistflow_rows(seed in any::<u64>(), kappa in 1.0f64..1.5) {
            let t = validate_topology(&[(0, 1, 30.0), (1, 2, 20.0), (1, 3, 25.0), (3, 4, 40.0), (3, 5, 10.0)]).unwrap();
            let z = [0.01, 0.012, 0.009, 0.02, 0.004, 0.002, 0.002, 0.002, 0.003, 0.001];
            let model = InjectionModel::IndependentUniform { p_min: 0.0, p_max: 0.1, q_min: -0.02, q_max: 0.05 };
            let d = make_dataset(&t, &z, &model, 8, FlowModel::LinDistFlow, 1.0, seed).unwrap();
            let f = aggregate_flows(&t, &d).unwrap();
            let s = solve_delta_lp(&t, &d, &f).unwrap();
            prop_assert!(s.delta_star < 1e-10);
            let h = assemble_with_slack(&t, &d, &f, effective_slack(s.delta_star, kappa)).unwrap();
            prop_assert_eq!(h.n_rows(), 2 * 8 * t.leaves().len());
            prop_assert!(h.contains(&z, 1e-12));
            prop_assert!(h.contains(&s.z_star, 1e-9));
        }
    }
}
