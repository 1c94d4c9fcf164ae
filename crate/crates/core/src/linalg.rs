//! Small dense helpers shared by the polytope and sampling stages.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

pub fn row_norm(a: &DMatrix<f64>, i: usize) -> f64 {
    libm::sqrt(a.row(i).iter().map(|v| v * v).sum())
}

pub fn norm(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum())
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Singular values in descending order.
pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = a.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Number of singular values above `rel_tol * s_max`.
pub fn numerical_rank(singular: &[f64], rel_tol: f64) -> usize {
    let max = singular.first().copied().unwrap_or(0.0);
    if max <= 0.0 {
        return 0;
    }
    singular.iter().filter(|&&s| s > rel_tol * max).count()
}

/// Least-squares particular solution and orthonormal null-space basis of `e z = f`.
///
/// Returns `(z_p, N)` with `N` of shape `n x (n - rank)`.
pub fn affine_solution(e: &DMatrix<f64>, f: &DVector<f64>, rel_tol: f64) -> (DVector<f64>, DMatrix<f64>) {
    let n = e.ncols();
    if e.nrows() == 0 {
        return (DVector::zeros(n), DMatrix::identity(n, n));
    }
    // Pad to at least n rows so the thin SVD still yields a complete right basis.
    let rows = e.nrows().max(n);
    let mut padded = DMatrix::zeros(rows, n);
    padded.view_mut((0, 0), (e.nrows(), n)).copy_from(e);
    let mut rhs = DVector::zeros(rows);
    rhs.rows_mut(0, f.len()).copy_from(f);

    let svd = padded.svd(true, true);
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let s = &svd.singular_values;
    let s_max = s.iter().copied().fold(0.0, f64::max);
    let mut z_p = DVector::zeros(n);
    let mut null_cols = Vec::new();
    for k in 0..s.len() {
        if s_max > 0.0 && s[k] > rel_tol * s_max {
            let coef = u.column(k).dot(&rhs) / s[k];
            z_p += v_t.row(k).transpose() * coef;
        } else {
            null_cols.push(v_t.row(k).transpose());
        }
    }
    let null = if null_cols.is_empty() { DMatrix::zeros(n, 0) } else { DMatrix::from_columns(&null_cols) };
    (z_p, null)
}

/// Sample covariance of the columns-as-points matrix `points` (`dim x count`).
pub fn covariance(points: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let count = points.ncols();
    let mean = points.column_mean();
    let mut cov = DMatrix::zeros(points.nrows(), points.nrows());
    for j in 0..count {
        let d = points.column(j) - &mean;
        cov.ger(1.0, &d, &d, 1.0);
    }
    if count > 1 {
        cov /= (count - 1) as f64;
    }
    (mean, cov)
}

/// Ratio of extreme eigenvalues of a symmetric positive semi-definite matrix.
pub fn condition_number(sym: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(sym.clone());
    let max = eig.eigenvalues.iter().copied().fold(f64::MIN, f64::max);
    let min = eig.eigenvalues.iter().copied().fold(f64::MAX, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Median of a slice (sorts a copy); `NaN` for an empty slice.
pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

/// Linear-interpolation quantile of a slice (sorts a copy).
pub fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = libm::floor(pos) as usize;
    let hi = libm::ceil(pos) as usize;
    let frac = pos - lo as f64;
    v[lo] + (v[hi] - v[lo]) * frac
}
