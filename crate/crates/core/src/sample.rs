//! Redundancy removal, rounding and random walks over the reduced polytope.
//!
//! Rounding composes three affine maps: an equality elimination for slab-like
//! row pairs, a Dikin-ellipsoid map at the Chebyshev center, and pilot-run
//! covariance maps until the pilot cloud is close to isotropic.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rand_distr::{Distribution, Open01, StandardNormal};
use thiserror::Error;

use crate::candidates::{CandidateMatrix, Stage};
use crate::linalg::{affine_solution, condition_number, covariance, row_norm};
use crate::lp::{LinearProgram, LpError, VarBound};
use crate::polytope::{chebyshev_center, DirectionSplit, HalfSpaceSystem, PolytopeError};
use crate::{rng_for, Rng};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SampleError {
    #[error("polytope is empty")]
    Infeasible,
    #[error("polytope is unbounded along a walk direction")]
    Unbounded,
    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(&'static str),
    #[error("walk start point is not strictly feasible")]
    StartInfeasible,
    #[error("invalid sampler setting: {0}")]
    InvalidConfig(&'static str),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("linear program failed: {0}")]
    Lp(LpError),
}

impl From<PolytopeError> for SampleError {
    fn from(e: PolytopeError) -> Self {
        match e {
            PolytopeError::Infeasible => Self::Infeasible,
            PolytopeError::Unbounded => Self::Unbounded,
            PolytopeError::Lp(l) => Self::Lp(l),
            _ => Self::NumericalDegeneracy("unexpected polytope error"),
        }
    }
}

/// Relative tolerance when certifying that a row never binds.
pub const REDUNDANCY_TOL: f64 = 1e-11;
/// Largest width of an opposite row pair treated as an equality.
pub const EQUALITY_WIDTH: f64 = 1e-9;

fn normalized(system: &HalfSpaceSystem) -> Result<(DMatrix<f64>, DVector<f64>, Vec<usize>), SampleError> {
    let mut keep = Vec::new();
    for i in 0..system.n_rows() {
        let norm = row_norm(&system.a, i);
        if norm > 0.0 {
            keep.push((i, norm));
        } else if system.b[i] < -EQUALITY_WIDTH {
            return Err(SampleError::Infeasible);
        }
    }
    let a = DMatrix::from_fn(keep.len(), system.dim(), |r, j| system.a[(keep[r].0, j)] / keep[r].1);
    let b = DVector::from_fn(keep.len(), |r, _| system.b[keep[r].0] / keep[r].1);
    Ok((a, b, keep.into_iter().map(|(i, _)| i).collect()))
}

/// `max a_i z` subject to the rows in `others` and the relaxed row `a_i z <= b_i + 1`.
fn row_maximum(a: &DMatrix<f64>, b: &DVector<f64>, others: &[usize], i: usize) -> Result<(f64, Vec<f64>), SampleError> {
    let n = a.ncols();
    let mut rows: Vec<usize> = others.to_vec();
    rows.push(i);
    let lp_a = DMatrix::from_fn(rows.len(), n, |r, j| a[(rows[r], j)]);
    let mut lp_b: Vec<f64> = rows.iter().map(|&r| b[r]).collect();
    *lp_b.last_mut().expect("row i present") += 1.0;
    let objective: Vec<f64> = a.row(i).iter().map(|v| -v).collect();
    let sol = LinearProgram::new(objective, lp_a, lp_b, vec![VarBound::Free; n]).solve().map_err(|e| match e {
        LpError::Infeasible { .. } => SampleError::Infeasible,
        LpError::Unbounded => SampleError::Unbounded,
        other => SampleError::Lp(other),
    })?;
    Ok((-sol.objective, sol.x))
}

/// Drops every row whose left-hand side cannot exceed its right-hand side
/// given the other retained rows.
///
/// Rows are decided in order against the rows still retained. A strictly
/// interior point lets most decisions use only the rows already known to be
/// binding (ray shooting); without one, each row is tested against all others.
pub fn remove_redundant(system: &HalfSpaceSystem) -> Result<HalfSpaceSystem, SampleError> {
    if system.n_rows() == 0 {
        return Ok(system.clone());
    }
    let (a, b, original) = normalized(system)?;
    let m = a.nrows();
    let center = match chebyshev_center(system) {
        Ok((c, r)) if r > 0.0 => Some(DVector::from_vec(c)),
        Ok(_) => None,
        Err(PolytopeError::Infeasible) => return Err(SampleError::Infeasible),
        Err(PolytopeError::Unbounded) => None,
        Err(e) => return Err(e.into()),
    };
    let binds = |value: f64, i: usize| value > b[i] + REDUNDANCY_TOL * (1.0 + b[i].abs());

    let mut keep: Vec<usize> = match center {
        Some(ref c) => {
            // Every binding row is found from a ray between the center and an LP optimum.
            let mut known: Vec<usize> = Vec::new();
            let mut in_known = vec![false; m];
            let slack = &b - &a * c;
            for i in 0..m {
                if in_known[i] {
                    continue;
                }
                loop {
                    let (value, z) = row_maximum(&a, &b, &known, i)?;
                    if !binds(value, i) {
                        break;
                    }
                    let dir = DVector::from_vec(z) - c;
                    let along = &a * &dir;
                    let mut hit: Option<(f64, usize)> = None;
                    for k in 0..m {
                        if along[k] > 0.0 {
                            let t = slack[k] / along[k];
                            if hit.is_none_or(|(best, _)| t < best) {
                                hit = Some((t, k));
                            }
                        }
                    }
                    match hit {
                        Some((_, k)) if !in_known[k] => {
                            in_known[k] = true;
                            known.push(k);
                            if k == i {
                                break;
                            }
                        }
                        _ => {
                            in_known[i] = true;
                            known.push(i);
                            break;
                        }
                    }
                }
            }
            known.sort_unstable();
            known
        }
        None => {
            let mut retained: Vec<usize> = (0..m).collect();
            let mut pos = 0;
            while pos < retained.len() {
                let i = retained[pos];
                let others: Vec<usize> = retained.iter().copied().filter(|&k| k != i).collect();
                let (value, _) = row_maximum(&a, &b, &others, i)?;
                if binds(value, i) {
                    pos += 1;
                } else {
                    retained.remove(pos);
                }
            }
            retained
        }
    };
    keep.iter_mut().for_each(|k| *k = original[*k]);
    Ok(system.select_rows(&keep))
}

/// Walk-space body `{ u : a u <= b }` with the affine map `z_free = lin u + shift`.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundedPolytope {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub lin: DMatrix<f64>,
    pub shift: DVector<f64>,
    pub start: DVector<f64>,
    /// Condition number of the last pilot covariance (1 for a point).
    pub pilot_condition: f64,
    /// Covariance maps applied.
    pub rounds: usize,
}

impl RoundedPolytope {
    pub fn walk_dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn free_dim(&self) -> usize {
        self.lin.nrows()
    }

    pub fn to_free(&self, u: &DVector<f64>) -> DVector<f64> {
        &self.lin * u + &self.shift
    }

    /// Applies `u = offset + t v` and moves the start to `v = 0`.
    fn remap(&mut self, offset: &DVector<f64>, t: &DMatrix<f64>) {
        self.b = &self.b - &self.a * offset;
        self.a = &self.a * t;
        self.shift = &self.shift + &self.lin * offset;
        self.lin = &self.lin * t;
        self.start = DVector::zeros(t.ncols());
    }

    fn min_slack(&self, u: &DVector<f64>) -> f64 {
        (&self.b - &self.a * u).iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Equality-eliminated body without any rounding, started at the Chebyshev center.
    pub fn unrounded(system: &HalfSpaceSystem) -> Result<Self, SampleError> {
        let mut body = embed(system)?;
        if body.walk_dim() > 0 {
            let sys = HalfSpaceSystem::new(body.a.clone(), body.b.clone()).expect("consistent shapes");
            let (c, r) = chebyshev_center(&sys)?;
            if !(r > 0.0) {
                return Err(SampleError::NumericalDegeneracy("polytope has empty interior"));
            }
            body.start = DVector::from_vec(c);
        }
        Ok(body)
    }
}

/// Converts opposite row pairs of width at most [`EQUALITY_WIDTH`] into
/// equalities and restricts the system to their solution set.
fn embed(system: &HalfSpaceSystem) -> Result<RoundedPolytope, SampleError> {
    let n = system.dim();
    let (a, b, _) = normalized(system)?;
    let m = a.nrows();
    let mut paired = vec![false; m];
    let mut eq_rows: Vec<(usize, f64)> = Vec::new();
    for i in 0..m {
        if paired[i] {
            continue;
        }
        for j in i + 1..m {
            if paired[j] || b[i] + b[j] > EQUALITY_WIDTH {
                continue;
            }
            let opposite = (0..n).map(|k| { let s = a[(i, k)] + a[(j, k)]; s * s }).sum::<f64>();
            if libm::sqrt(opposite) <= EQUALITY_WIDTH {
                paired[i] = true;
                paired[j] = true;
                eq_rows.push((i, 0.5 * (b[i] - b[j])));
                break;
            }
        }
    }
    let e = DMatrix::from_fn(eq_rows.len(), n, |r, k| a[(eq_rows[r].0, k)]);
    let f = DVector::from_fn(eq_rows.len(), |r, _| eq_rows[r].1);
    let (z_p, null) = affine_solution(&e, &f, 1e-10);
    let k = null.ncols();

    let ineq: Vec<usize> = (0..m).filter(|&i| !paired[i]).collect();
    let mut rows_a = Vec::new();
    let mut rows_b = Vec::new();
    for &i in &ineq {
        let projected = a.row(i) * &null;
        let rhs = b[i] - (a.row(i) * &z_p)[(0, 0)];
        if projected.norm() <= 1e-12 {
            if rhs < -1e-8 {
                return Err(SampleError::Infeasible);
            }
            continue;
        }
        rows_a.push(projected);
        rows_b.push(rhs);
    }
    let a_w = if rows_a.is_empty() { DMatrix::zeros(0, k) } else { DMatrix::from_rows(&rows_a) };
    Ok(RoundedPolytope {
        a: a_w,
        b: DVector::from_vec(rows_b),
        lin: null,
        shift: z_p,
        start: DVector::zeros(k),
        pilot_condition: 1.0,
        rounds: 0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct RoundingOptions {
    pub pilot_steps: usize,
    pub min_rounds: usize,
    pub max_rounds: usize,
    pub target_condition: f64,
}

impl Default for RoundingOptions {
    fn default() -> Self {
        Self { pilot_steps: 5000, min_rounds: 2, max_rounds: 6, target_condition: 10.0 }
    }
}

const BURN_IN_PER_DIM: usize = 10;
const RESYNC_EVERY: usize = 64;

/// Coordinate hit-and-run state on `{ u : a u <= b }`.
struct Walker<'p> {
    a: &'p DMatrix<f64>,
    b: &'p DVector<f64>,
    u: DVector<f64>,
    slack: DVector<f64>,
    steps: usize,
}

impl<'p> Walker<'p> {
    fn new(a: &'p DMatrix<f64>, b: &'p DVector<f64>, start: &DVector<f64>) -> Result<Self, SampleError> {
        let slack = b - a * start;
        if slack.iter().any(|&s| !(s > 0.0)) {
            return Err(SampleError::StartInfeasible);
        }
        Ok(Self { a, b, u: start.clone(), slack, steps: 0 })
    }

    /// One sweep over all coordinates.
    fn hit_and_run(&mut self, rng: &mut Rng) -> Result<(), SampleError> {
        let k = self.u.len();
        for j in 0..k {
            let col = self.a.column(j);
            let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
            for (i, &c) in col.iter().enumerate() {
                if c > 0.0 {
                    hi = hi.min(self.slack[i] / c);
                } else if c < 0.0 {
                    lo = lo.max(self.slack[i] / c);
                }
            }
            if !(lo.is_finite() && hi.is_finite()) {
                return Err(SampleError::Unbounded);
            }
            if hi <= lo {
                continue;
            }
            let w: f64 = Open01.sample(rng);
            let t = lo + (hi - lo) * w;
            self.u[j] += t;
            self.slack.axpy(-t, &col, 1.0);
        }
        self.finish_step();
        Ok(())
    }

    fn dikin_matrix(&self, slack: &DVector<f64>) -> DMatrix<f64> {
        let scaled = DMatrix::from_fn(self.a.nrows(), self.a.ncols(), |i, j| self.a[(i, j)] / slack[i]);
        scaled.tr_mul(&scaled)
    }

    /// Gaussian Dikin proposal with Metropolis correction.
    fn dikin(&mut self, radius: f64, rng: &mut Rng) -> Result<(), SampleError> {
        let k = self.u.len();
        let h = self.dikin_matrix(&self.slack);
        let chol = Cholesky::new(h.clone()).ok_or(SampleError::NumericalDegeneracy("Dikin matrix is singular"))?;
        let xi = DVector::from_fn(k, |_, _| StandardNormal.sample(rng));
        let scale = radius / libm::sqrt(k as f64);
        let step = chol.l().transpose().solve_upper_triangular(&xi).expect("triangular solve") * scale;
        let proposal = &self.u + &step;
        let slack_p = self.b - self.a * &proposal;
        if slack_p.iter().all(|&s| s > 0.0) {
            let h_p = self.dikin_matrix(&slack_p);
            if let Some(chol_p) = Cholesky::new(h_p.clone()) {
                let log_det = |c: &Cholesky<f64, nalgebra::Dyn>| c.l().diagonal().iter().map(|d| libm::log(*d)).sum::<f64>();
                let quad = |m: &DMatrix<f64>| (step.transpose() * m * &step)[(0, 0)];
                let log_ratio = (log_det(&chol_p) - log_det(&chol))
                    - (k as f64) / (2.0 * radius * radius) * (quad(&h_p) - quad(&h));
                let w: f64 = Open01.sample(rng);
                if libm::log(w) < log_ratio {
                    self.u = proposal;
                    self.slack = slack_p;
                }
            }
        }
        self.finish_step();
        Ok(())
    }

    fn finish_step(&mut self) {
        self.steps += 1;
        if self.steps.is_multiple_of(RESYNC_EVERY) {
            self.slack = self.b - self.a * &self.u;
        }
    }

    fn step(&mut self, kind: WalkKind, rng: &mut Rng) -> Result<(), SampleError> {
        match kind {
            WalkKind::HitAndRun => self.hit_and_run(rng),
            WalkKind::Dikin { step } => self.dikin(step, rng),
        }
    }
}

/// Pilot cloud (`k x steps`) after burn-in, by hit-and-run.
fn pilot(body: &RoundedPolytope, steps: usize, rng: &mut Rng) -> Result<DMatrix<f64>, SampleError> {
    let k = body.walk_dim();
    let mut w = Walker::new(&body.a, &body.b, &body.start)?;
    for _ in 0..BURN_IN_PER_DIM * k {
        w.hit_and_run(rng)?;
    }
    let mut pts = DMatrix::zeros(k, steps);
    for s in 0..steps {
        w.hit_and_run(rng)?;
        pts.set_column(s, &w.u);
    }
    Ok(pts)
}

/// Embeds and rounds the polytope until pilot samples are close to isotropic.
pub fn round_polytope(system: &HalfSpaceSystem, seed: u64, opts: &RoundingOptions) -> Result<RoundedPolytope, SampleError> {
    if opts.pilot_steps < 2 || opts.max_rounds < opts.min_rounds {
        return Err(SampleError::InvalidConfig("pilot needs at least two steps and max_rounds >= min_rounds"));
    }
    let mut body = RoundedPolytope::unrounded(system)?;
    let k = body.walk_dim();
    if k == 0 {
        return Ok(body);
    }

    let slack = &body.b - &body.a * &body.start;
    let scaled = DMatrix::from_fn(body.a.nrows(), k, |i, j| body.a[(i, j)] / slack[i]);
    let h = scaled.tr_mul(&scaled);
    let chol = Cholesky::new(h).ok_or(SampleError::NumericalDegeneracy("Dikin matrix at the center is singular"))?;
    let t = chol.l().transpose().solve_upper_triangular(&DMatrix::identity(k, k)).expect("triangular solve");
    let center = body.start.clone();
    body.remap(&center, &t);

    let mut rng = rng_for(seed, 0);
    loop {
        let pts = pilot(&body, opts.pilot_steps, &mut rng)?;
        let (mean, cov) = covariance(&pts);
        let eig = SymmetricEigen::new(cov.clone());
        let max = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
        let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        if !(max > 0.0) || min <= 1e-12 * max {
            return Err(SampleError::NumericalDegeneracy("pilot covariance is rank-deficient"));
        }
        body.pilot_condition = condition_number(&cov);
        let done = body.rounds >= opts.min_rounds && body.pilot_condition < opts.target_condition;
        if done || body.rounds >= opts.max_rounds {
            return Ok(body);
        }
        let l = Cholesky::new(cov)
            .ok_or(SampleError::NumericalDegeneracy("pilot covariance is not positive definite"))?
            .l();
        body.remap(&mean, &l);
        if !(body.min_slack(&body.start) > 0.0) {
            return Err(SampleError::NumericalDegeneracy("pilot mean left the polytope"));
        }
        body.rounds += 1;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum WalkKind {
    HitAndRun,
    Dikin { step: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct WalkOptions {
    pub kind: WalkKind,
    pub chains: usize,
    /// Raw steps per kept sample.
    pub thinning: usize,
}

impl Default for WalkOptions {
    fn default() -> Self {
        Self { kind: WalkKind::HitAndRun, chains: 4, thinning: 3 }
    }
}

impl WalkOptions {
    pub fn validate(&self) -> Result<(), SampleError> {
        if self.chains == 0 || self.thinning == 0 {
            return Err(SampleError::InvalidConfig("chains and thinning must be positive"));
        }
        if let WalkKind::Dikin { step } = self.kind {
            if !(step > 0.0 && step.is_finite()) {
                return Err(SampleError::InvalidConfig("Dikin step must be positive"));
            }
        }
        Ok(())
    }

    /// Rows produced by `chain` when `m` rows are interleaved.
    pub fn chain_len(&self, m: usize, chain: usize) -> usize {
        (m + self.chains - 1 - chain) / self.chains
    }
}

/// Samples of one chain in free coordinates, row-major.
pub fn sample_chain(
    rp: &RoundedPolytope,
    count: usize,
    seed: u64,
    chain: usize,
    opts: &WalkOptions,
) -> Result<Vec<f64>, SampleError> {
    opts.validate()?;
    let n = rp.free_dim();
    let k = rp.walk_dim();
    let mut out = Vec::with_capacity(count * n);
    if k == 0 {
        for _ in 0..count {
            out.extend(rp.shift.iter());
        }
        return Ok(out);
    }
    let mut rng = rng_for(seed, chain as u64 + 1);
    let mut w = Walker::new(&rp.a, &rp.b, &rp.start)?;
    for _ in 0..BURN_IN_PER_DIM * k {
        w.step(opts.kind, &mut rng)?;
    }
    for _ in 0..count {
        for _ in 0..opts.thinning {
            w.step(opts.kind, &mut rng)?;
        }
        out.extend(rp.to_free(&w.u).iter());
    }
    Ok(out)
}

/// Interleaves per-chain outputs: row `j` comes from chain `j mod chains`.
pub fn interleave_chains(chains: &[Vec<f64>], n_cols: usize, m: usize) -> CandidateMatrix {
    let mut out = CandidateMatrix::new(n_cols, Stage::Free);
    let c = chains.len();
    for j in 0..m {
        let start = (j / c) * n_cols;
        out.push_row(&chains[j % c][start..start + n_cols]);
    }
    out
}

/// `m` walk samples in free coordinates.
pub fn sample_walk(rp: &RoundedPolytope, m: usize, seed: u64, opts: &WalkOptions) -> Result<CandidateMatrix, SampleError> {
    opts.validate()?;
    if m == 0 {
        return Err(SampleError::InvalidConfig("at least one sample is required"));
    }
    if rp.walk_dim() > 0 && !(rp.min_slack(&rp.start) > 0.0) {
        return Err(SampleError::StartInfeasible);
    }
    let chains = (0..opts.chains)
        .map(|c| sample_chain(rp, opts.chain_len(m, c), seed, c, opts))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(interleave_chains(&chains, rp.free_dim(), m))
}

/// Full impedance rows with fixed coordinates taken from the split.
pub fn lift_to_full(samples_free: &CandidateMatrix, split: &DirectionSplit) -> Result<CandidateMatrix, SampleError> {
    if samples_free.n_cols() != split.free.len() {
        return Err(SampleError::DimensionMismatch { expected: split.free.len(), found: samples_free.n_cols() });
    }
    let mut out = CandidateMatrix::new(split.z0.len(), Stage::Sampled);
    for row in samples_free.rows() {
        out.push_row(&split.lift(row));
    }
    Ok(out)
}
