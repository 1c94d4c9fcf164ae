//! Dense two-phase revised simplex.
//!
//! Solves `min c^T x  s.t.  A x <= b` with each variable either non-negative or
//! free. Rows are equilibrated, free variables are split, and the basis inverse
//! is kept explicitly with product-form updates and periodic refactorization.
//! Pricing is Dantzig's rule until a run of degenerate pivots is detected, at
//! which point Bland's rule takes over until the objective moves again.
//!
//! Tall problems (many more rows than columns) are solved through their dual,
//! whose basis is only as large as the column count; the primal point is read
//! off the dual multipliers.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpError {
    #[error("linear program is infeasible (phase-one residual {residual:e})")]
    Infeasible { residual: f64 },
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("simplex iteration limit ({0}) reached")]
    IterationLimit(usize),
    #[error("numerical failure: {0}")]
    Numerical(&'static str),
    #[error("dimension mismatch: {0}")]
    Dimension(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarBound {
    NonNegative,
    Free,
}

#[derive(Debug, Clone)]
pub struct LinearProgram {
    /// Minimized.
    pub objective: Vec<f64>,
    pub a: DMatrix<f64>,
    pub b: Vec<f64>,
    pub bounds: Vec<VarBound>,
}

/// Post-solve optimality evidence, all in the original (unscaled) units.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Certificate {
    /// Largest violation of `A x <= b` or of a sign constraint.
    pub primal_infeasibility: f64,
    /// Most negative reduced cost among enterable columns (0 when dual feasible).
    pub dual_infeasibility: f64,
    /// `|c^T x - b^T y| / (1 + |c^T x|)`.
    pub duality_gap: f64,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub certificate: Certificate,
}

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    pub feasibility_tol: f64,
    pub optimality_tol: f64,
    pub pivot_tol: f64,
    pub max_gap: f64,
    pub refactor_every: usize,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub degenerate_streak: usize,
    pub max_iterations: Option<usize>,
    pub form: SolveForm,
}

/// Which problem the simplex runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveForm {
    /// Dual when rows outnumber twice the (split) columns.
    Auto,
    Primal,
    Dual,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            feasibility_tol: 1e-10,
            optimality_tol: 1e-11,
            pivot_tol: 1e-9,
            max_gap: 1e-9,
            refactor_every: 64,
            degenerate_streak: 30,
            max_iterations: None,
            form: SolveForm::Auto,
        }
    }
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>, a: DMatrix<f64>, b: Vec<f64>, bounds: Vec<VarBound>) -> Self {
        Self { objective, a, b, bounds }
    }

    pub fn solve(&self) -> Result<LpSolution, LpError> {
        self.solve_with(&SimplexOptions::default())
    }

    pub fn solve_with(&self, opts: &SimplexOptions) -> Result<LpSolution, LpError> {
        let n = self.objective.len();
        if self.a.ncols() != n || self.bounds.len() != n {
            return Err(LpError::Dimension("objective, bounds and columns of A must agree"));
        }
        if self.a.nrows() != self.b.len() {
            return Err(LpError::Dimension("rows of A and b must agree"));
        }
        let split_cols: usize = self.bounds.iter().map(|b| if *b == VarBound::Free { 2 } else { 1 }).sum();
        let dual = match opts.form {
            SolveForm::Auto => self.a.nrows() > 2 * split_cols,
            SolveForm::Primal => false,
            SolveForm::Dual => true,
        };
        if dual {
            return self.solve_dual(opts);
        }
        self.solve_primal(opts)
    }

    fn solve_primal(&self, opts: &SimplexOptions) -> Result<LpSolution, LpError> {
        let mut tableau = StandardForm::build(self, opts)?;
        tableau.phase_one()?;
        tableau.phase_two()?;
        let x = tableau.structural_solution();
        let objective = self.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        let certificate = tableau.certificate(self, &x, objective);
        if certificate.duality_gap > opts.max_gap {
            return Err(LpError::Numerical("duality gap above tolerance"));
        }
        Ok(LpSolution { x, objective, iterations: tableau.iterations, certificate })
    }

    /// `min b^T y` s.t. `-A_j^T y <= c_j` (non-negative `x_j`), `A_j^T y = -c_j` (free `x_j`), `y >= 0`.
    fn solve_dual(&self, opts: &SimplexOptions) -> Result<LpSolution, LpError> {
        let (m, n) = (self.a.nrows(), self.a.ncols());
        // Each dual row: (primal column, sign of A_j^T in the row).
        let mut rows: Vec<(usize, f64)> = Vec::with_capacity(2 * n);
        for (j, bound) in self.bounds.iter().enumerate() {
            rows.push((j, -1.0));
            if *bound == VarBound::Free {
                rows.push((j, 1.0));
            }
        }
        let a = DMatrix::from_fn(rows.len(), m, |r, i| rows[r].1 * self.a[(i, rows[r].0)]);
        let b: Vec<f64> = rows.iter().map(|&(j, sgn)| -sgn * self.objective[j]).collect();
        let dual = LinearProgram::new(self.b.clone(), a, b, vec![VarBound::NonNegative; m]);

        let mut tableau = StandardForm::build(&dual, opts)?;
        let solved = tableau.phase_one().and_then(|_| tableau.phase_two());
        match solved {
            Ok(()) => {}
            Err(LpError::Unbounded) => return Err(LpError::Infeasible { residual: f64::INFINITY }),
            // An infeasible dual means the primal is unbounded or itself infeasible.
            Err(LpError::Infeasible { .. }) => return self.solve_primal(opts),
            Err(e) => return Err(e),
        }
        let y = tableau.structural_solution_padded(m);
        let multipliers = tableau.row_multipliers(rows.len());
        let mut x = vec![0.0; n];
        for (r, &(j, sgn)) in rows.iter().enumerate() {
            x[j] -= sgn * multipliers[r];
        }
        let objective: f64 = self.objective.iter().zip(&x).map(|(c, v)| c * v).sum();

        let ax = &self.a * DVector::from_column_slice(&x);
        let mut primal = 0.0f64;
        for i in 0..m {
            primal = primal.max(ax[i] - self.b[i]);
        }
        for (j, bound) in self.bounds.iter().enumerate() {
            if *bound == VarBound::NonNegative {
                primal = primal.max(-x[j]);
            }
        }
        let aty = dual.a.clone() * DVector::from_column_slice(&y);
        let mut dual_inf = y.iter().fold(0.0f64, |acc, v| acc.max(-v));
        for r in 0..rows.len() {
            dual_inf = dual_inf.max(aty[r] - dual.b[r]);
        }
        let dual_objective = -self.b.iter().zip(&y).map(|(b, v)| b * v).sum::<f64>();
        let duality_gap = (objective - dual_objective).abs() / (1.0 + objective.abs());
        let certificate = Certificate { primal_infeasibility: primal, dual_infeasibility: dual_inf, duality_gap };
        if certificate.duality_gap > opts.max_gap {
            return Err(LpError::Numerical("duality gap above tolerance"));
        }
        Ok(LpSolution { x, objective, iterations: tableau.iterations, certificate })
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Column {
    /// Original variable `j`, with sign (+1 or -1 for the negative part of a free variable).
    Structural(usize, i8),
    Slack,
    Artificial,
}

struct StandardForm {
    opts: SimplexOptions,
    s: DMatrix<f64>,
    rhs: DVector<f64>,
    kinds: Vec<Column>,
    costs: Vec<f64>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    binv: DMatrix<f64>,
    x_b: DVector<f64>,
    /// Original row and the factor it was multiplied by.
    row_map: Vec<(usize, f64)>,
    iterations: usize,
    max_iterations: usize,
    since_refactor: usize,
}

impl StandardForm {
    fn build(lp: &LinearProgram, opts: &SimplexOptions) -> Result<Self, LpError> {
        let m_all = lp.a.nrows();
        // Equilibrate rows; all-zero rows are either vacuous or a proof of infeasibility.
        let mut rows = Vec::with_capacity(m_all);
        for i in 0..m_all {
            let scale = lp.a.row(i).iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
            if !scale.is_finite() || !lp.b[i].is_finite() {
                return Err(LpError::Numerical("non-finite constraint data"));
            }
            if scale == 0.0 {
                if lp.b[i] < -opts.feasibility_tol {
                    return Err(LpError::Infeasible { residual: -lp.b[i] });
                }
                continue;
            }
            rows.push((i, 1.0 / scale));
        }
        let m = rows.len();

        let mut kinds = Vec::new();
        for (j, bound) in lp.bounds.iter().enumerate() {
            kinds.push(Column::Structural(j, 1));
            if *bound == VarBound::Free {
                kinds.push(Column::Structural(j, -1));
            }
        }
        let n_struct = kinds.len();
        let needs_artificial: Vec<bool> = rows.iter().map(|&(i, sc)| lp.b[i] * sc < 0.0).collect();
        let n_art = needs_artificial.iter().filter(|&&v| v).count();
        let total = n_struct + m + n_art;

        let mut s = DMatrix::zeros(m, total);
        let mut rhs = DVector::zeros(m);
        let mut basis = vec![0; m];
        let mut art = n_struct + m;
        for (r, &(i, sc)) in rows.iter().enumerate() {
            let sign = if needs_artificial[r] { -1.0 } else { 1.0 };
            for (c, kind) in kinds.iter().enumerate() {
                if let Column::Structural(j, sgn) = *kind {
                    s[(r, c)] = sign * sc * lp.a[(i, j)] * f64::from(sgn);
                }
            }
            s[(r, n_struct + r)] = sign;
            rhs[r] = sign * sc * lp.b[i];
            if needs_artificial[r] {
                s[(r, art)] = 1.0;
                basis[r] = art;
                art += 1;
            } else {
                basis[r] = n_struct + r;
            }
        }
        kinds.extend(core::iter::repeat_n(Column::Slack, m));
        kinds.extend(core::iter::repeat_n(Column::Artificial, n_art));

        let row_map: Vec<(usize, f64)> =
            rows.iter().zip(&needs_artificial).map(|(&(i, sc), &art)| (i, if art { -sc } else { sc })).collect();
        let mut costs = vec![0.0; total];
        for (c, kind) in kinds.iter().enumerate() {
            if let Column::Structural(j, sgn) = *kind {
                costs[c] = lp.objective[j] * f64::from(sgn);
            }
        }
        let mut is_basic = vec![false; total];
        for &bcol in &basis {
            is_basic[bcol] = true;
        }
        let max_iterations = opts.max_iterations.unwrap_or(50 * (m + total) + 1000);
        Ok(Self {
            opts: *opts,
            binv: DMatrix::identity(m, m),
            x_b: rhs.clone(),
            s,
            rhs,
            kinds,
            costs,
            basis,
            is_basic,
            iterations: 0,
            row_map,
            max_iterations,
            since_refactor: 0,
        })
    }

    fn m(&self) -> usize {
        self.basis.len()
    }

    fn phase_one(&mut self) -> Result<(), LpError> {
        let phase_costs: Vec<f64> =
            self.kinds.iter().map(|k| if *k == Column::Artificial { 1.0 } else { 0.0 }).collect();
        if phase_costs.iter().all(|&c| c == 0.0) {
            return Ok(());
        }
        self.iterate(&phase_costs, true)?;
        let residual: f64 = self
            .basis
            .iter()
            .zip(self.x_b.iter())
            .filter(|(&b, _)| self.kinds[b] == Column::Artificial)
            .map(|(_, &v)| v.max(0.0))
            .sum();
        let scale = 1.0 + self.rhs.amax();
        if residual > self.opts.feasibility_tol * scale * 10.0 {
            return Err(LpError::Infeasible { residual });
        }
        self.drive_out_artificials();
        Ok(())
    }

    fn drive_out_artificials(&mut self) {
        for r in 0..self.m() {
            if self.kinds[self.basis[r]] != Column::Artificial {
                continue;
            }
            let row = self.binv.row(r).clone_owned();
            let mut best = None;
            let mut best_abs = 1e-9;
            for j in 0..self.kinds.len() {
                if self.is_basic[j] || self.kinds[j] == Column::Artificial {
                    continue;
                }
                let v = row.iter().zip(self.s.column(j).iter()).map(|(a, b)| a * b).sum::<f64>();
                if v.abs() > best_abs {
                    best_abs = v.abs();
                    best = Some(j);
                }
            }
            if let Some(q) = best {
                let alpha = &self.binv * self.s.column(q);
                self.pivot(r, q, &alpha, 0.0);
            }
        }
    }

    fn phase_two(&mut self) -> Result<(), LpError> {
        let costs = self.costs.clone();
        self.iterate(&costs, false)
    }

    fn duals(&self, costs: &[f64]) -> DVector<f64> {
        let c_b = DVector::from_iterator(self.m(), self.basis.iter().map(|&b| costs[b]));
        self.binv.tr_mul(&c_b)
    }

    fn iterate(&mut self, costs: &[f64], allow_artificial: bool) -> Result<(), LpError> {
        let mut degenerate_run = 0usize;
        let mut bland = false;
        loop {
            if self.iterations >= self.max_iterations {
                return Err(LpError::IterationLimit(self.iterations));
            }
            let y = self.duals(costs);
            let reduced = self.s.tr_mul(&y);
            let mut entering = None;
            let mut best = -self.opts.optimality_tol;
            for j in 0..self.kinds.len() {
                if self.is_basic[j] || (!allow_artificial && self.kinds[j] == Column::Artificial) {
                    continue;
                }
                let d = costs[j] - reduced[j];
                if d < best {
                    entering = Some(j);
                    if bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some(q) = entering else {
                return Ok(());
            };

            let alpha = &self.binv * self.s.column(q);
            let mut leave: Option<usize> = None;
            let mut theta = f64::INFINITY;
            for i in 0..self.m() {
                let a = alpha[i];
                if a <= self.opts.pivot_tol {
                    continue;
                }
                let ratio = self.x_b[i].max(0.0) / a;
                let better = match leave {
                    None => true,
                    Some(l) => {
                        let tie = (ratio - theta).abs() <= 1e-12 * (1.0 + theta.abs());
                        if tie {
                            if bland {
                                self.basis[i] < self.basis[l]
                            } else {
                                a > alpha[l]
                            }
                        } else {
                            ratio < theta
                        }
                    }
                };
                if better {
                    leave = Some(i);
                    theta = ratio;
                }
            }
            let Some(r) = leave else {
                return Err(LpError::Unbounded);
            };
            if theta <= 1e-14 {
                degenerate_run += 1;
                if degenerate_run >= self.opts.degenerate_streak {
                    bland = true;
                }
            } else {
                degenerate_run = 0;
                bland = false;
            }
            self.pivot(r, q, &alpha, theta);
        }
    }

    fn pivot(&mut self, r: usize, q: usize, alpha: &DVector<f64>, theta: f64) {
        let m = self.m();
        for i in 0..m {
            self.x_b[i] -= theta * alpha[i];
        }
        self.x_b[r] = theta;
        let ar = alpha[r];
        for j in 0..m {
            let pr = self.binv[(r, j)] / ar;
            if pr == 0.0 {
                continue;
            }
            for i in 0..m {
                if i != r {
                    self.binv[(i, j)] -= alpha[i] * pr;
                }
            }
            self.binv[(r, j)] = pr;
        }
        self.is_basic[self.basis[r]] = false;
        self.is_basic[q] = true;
        self.basis[r] = q;
        self.iterations += 1;
        self.since_refactor += 1;
        if self.since_refactor >= self.opts.refactor_every {
            self.refactor();
        }
    }

    fn refactor(&mut self) {
        self.since_refactor = 0;
        let b = DMatrix::from_columns(&self.basis.iter().map(|&c| self.s.column(c)).collect::<Vec<_>>());
        if let Some(inv) = b.lu().try_inverse() {
            self.x_b = &inv * &self.rhs;
            self.binv = inv;
        }
    }

    fn structural_solution(&self) -> Vec<f64> {
        let n_orig = self
            .kinds
            .iter()
            .filter_map(|k| match k {
                Column::Structural(j, _) => Some(j + 1),
                _ => None,
            })
            .max()
            .unwrap_or(0);
        let mut x = vec![0.0; n_orig];
        for (i, &b) in self.basis.iter().enumerate() {
            if let Column::Structural(j, sgn) = self.kinds[b] {
                x[j] += f64::from(sgn) * self.x_b[i];
            }
        }
        x
    }

    fn structural_solution_padded(&self, n: usize) -> Vec<f64> {
        let mut x = self.structural_solution();
        x.resize(n, 0.0);
        x
    }

    /// Non-negative multipliers `w` of the original rows (`w = -B^{-T} c_B`, unscaled).
    fn row_multipliers(&self, n_rows: usize) -> Vec<f64> {
        let y = self.duals(&self.costs);
        let mut w = vec![0.0; n_rows];
        for (r, &(i, factor)) in self.row_map.iter().enumerate() {
            w[i] = -y[r] * factor;
        }
        w
    }

    fn certificate(&self, lp: &LinearProgram, x: &[f64], objective: f64) -> Certificate {
        let ax = &lp.a * DVector::from_column_slice(x);
        let mut primal = 0.0f64;
        for i in 0..lp.b.len() {
            primal = primal.max(ax[i] - lp.b[i]);
        }
        for (j, bound) in lp.bounds.iter().enumerate() {
            if *bound == VarBound::NonNegative {
                primal = primal.max(-x[j]);
            }
        }
        let y = self.duals(&self.costs);
        let reduced = self.s.tr_mul(&y);
        let mut dual = 0.0f64;
        for j in 0..self.kinds.len() {
            if !self.is_basic[j] && self.kinds[j] != Column::Artificial {
                dual = dual.max(reduced[j] - self.costs[j]);
            }
        }
        let dual_objective = y.dot(&self.rhs);
        let duality_gap = (objective - dual_objective).abs() / (1.0 + objective.abs());
        Certificate { primal_infeasibility: primal, dual_infeasibility: dual, duality_gap }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn lp(c: &[f64], rows: &[&[f64]], b: &[f64], bounds: Vec<VarBound>) -> LinearProgram {
        let n = c.len();
        let a = DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]);
        LinearProgram::new(c.to_vec(), a, b.to_vec(), bounds)
    }

    #[test]
    fn textbook_maximization() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18  -> (2, 6), 36
        let p = lp(
            &[-3.0, -5.0],
            &[&[1.0, 0.0], &[0.0, 2.0], &[3.0, 2.0]],
            &[4.0, 12.0, 18.0],
            vec![VarBound::NonNegative; 2],
        );
        let s = p.solve().unwrap();
        assert!((s.x[0] - 2.0).abs() < 1e-10 && (s.x[1] - 6.0).abs() < 1e-10);
        assert!((s.objective + 36.0).abs() < 1e-10);
        assert!(s.certificate.duality_gap < 1e-12);
    }

    #[test]
    fn needs_phase_one() {
        // min x + y s.t. x + y >= 2, x - y <= 1, free vars with x >= -5 via a row.
        let p = lp(
            &[1.0, 2.0],
            &[&[-1.0, -1.0], &[1.0, -1.0], &[-1.0, 0.0]],
            &[-2.0, 1.0, 5.0],
            vec![VarBound::Free; 2],
        );
        let s = p.solve().unwrap();
        // Optimum on x + y = 2, x - y = 1 -> (1.5, 0.5), objective 2.5
        assert!((s.x[0] - 1.5).abs() < 1e-10, "{:?}", s.x);
        assert!((s.objective - 2.5).abs() < 1e-10);
        assert!(s.certificate.primal_infeasibility < 1e-10);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let p = lp(&[1.0], &[&[1.0], &[-1.0]], &[1.0, -2.0], vec![VarBound::Free]);
        assert!(matches!(p.solve(), Err(LpError::Infeasible { .. })));
        let p = lp(&[-1.0], &[&[-1.0]], &[0.0], vec![VarBound::NonNegative]);
        assert_eq!(p.solve().unwrap_err(), LpError::Unbounded);
        let p = lp(&[1.0], &[&[0.0]], &[-1.0], vec![VarBound::Free]);
        assert!(matches!(p.solve(), Err(LpError::Infeasible { .. })));
    }

    fn both_forms(p: &LinearProgram) -> (LpSolution, LpSolution) {
        let primal = p.solve_with(&SimplexOptions { form: SolveForm::Primal, ..SimplexOptions::default() }).unwrap();
        let dual = p.solve_with(&SimplexOptions { form: SolveForm::Dual, ..SimplexOptions::default() }).unwrap();
        (primal, dual)
    }

    #[test]
    fn dual_form_agrees() {
        let p = lp(
            &[-3.0, -5.0],
            &[&[1.0, 0.0], &[0.0, 2.0], &[3.0, 2.0]],
            &[4.0, 12.0, 18.0],
            vec![VarBound::NonNegative; 2],
        );
        let (a, b) = both_forms(&p);
        assert!((a.objective - b.objective).abs() < 1e-10);
        assert!((b.x[0] - 2.0).abs() < 1e-10 && (b.x[1] - 6.0).abs() < 1e-10);
        let p = lp(
            &[1.0, 2.0],
            &[&[-1.0, -1.0], &[1.0, -1.0], &[-1.0, 0.0]],
            &[-2.0, 1.0, 5.0],
            vec![VarBound::Free; 2],
        );
        let (a, b) = both_forms(&p);
        assert!((a.objective - b.objective).abs() < 1e-10);
        assert!((b.x[0] - 1.5).abs() < 1e-10 && (b.x[1] - 0.5).abs() < 1e-10);
        assert!(b.certificate.primal_infeasibility < 1e-10);
    }

    #[test]
    fn dual_form_reports_status() {
        let dual = SimplexOptions { form: SolveForm::Dual, ..SimplexOptions::default() };
        let p = lp(&[1.0], &[&[1.0], &[-1.0]], &[1.0, -2.0], vec![VarBound::Free]);
        assert!(matches!(p.solve_with(&dual), Err(LpError::Infeasible { .. })));
        let p = lp(&[-1.0], &[&[-1.0]], &[0.0], vec![VarBound::NonNegative]);
        assert_eq!(p.solve_with(&dual).unwrap_err(), LpError::Unbounded);
    }

    #[test]
    fn tall_random_problems_match() {
        use rand::Rng as _;
        let mut rng = crate::rng_for(5, 0);
        for _ in 0..20 {
            let (m, n) = (40, 4);
            // Feasible and bounded: box rows plus random cuts through a ball around the origin.
            let mut a = DMatrix::zeros(m, n);
            let mut b = vec![0.0; m];
            for i in 0..m {
                for j in 0..n {
                    a[(i, j)] = rng.random::<f64>() * 2.0 - 1.0;
                }
                b[i] = 0.5 + rng.random::<f64>();
            }
            let c: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let p = LinearProgram::new(c, a, b, vec![VarBound::Free; n]);
            match (
                p.solve_with(&SimplexOptions { form: SolveForm::Primal, ..SimplexOptions::default() }),
                p.solve_with(&SimplexOptions { form: SolveForm::Dual, ..SimplexOptions::default() }),
            ) {
                (Ok(x), Ok(y)) => assert!((x.objective - y.objective).abs() < 1e-9 * (1.0 + x.objective.abs())),
                (Err(LpError::Unbounded), Err(LpError::Unbounded)) => {}
                other => panic!("forms disagree: {other:?}"),
            }
        }
    }

    #[test]
    fn degenerate_problem_terminates() {
        // Klee-Minty style cube in 4-D plus duplicated constraints for degeneracy.
        let n = 4;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut b = Vec::new();
        for i in 0..n {
            let mut row = vec![0.0; n];
            for (j, slot) in row.iter_mut().enumerate().take(i) {
                *slot = libm::pow(2.0, (i - j + 1) as f64);
            }
            row[i] = 1.0;
            rows.push(row.clone());
            rows.push(row);
            let rhs = libm::pow(5.0, (i + 1) as f64);
            b.push(rhs);
            b.push(rhs);
        }
        let c: Vec<f64> = (0..n).map(|j| -libm::pow(2.0, (n - 1 - j) as f64)).collect();
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let s = lp(&c, &refs, &b, vec![VarBound::NonNegative; n]).solve().unwrap();
        assert!((s.objective + libm::pow(5.0, n as f64)).abs() < 1e-8);
    }
}
