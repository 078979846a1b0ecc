//! Small dense linear-algebra helpers shared across modules.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Matrices whose 2-norm condition number exceeds this are treated as singular.
pub const CONDITION_LIMIT: f64 = 1e12;

pub fn frobenius(m: &Mat) -> f64 {
    m.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Relative Frobenius distance `‖a − b‖ / ‖b‖`.
pub fn rel_frobenius(a: &Mat, b: &Mat) -> f64 {
    frobenius(&(a - b)) / frobenius(b)
}

pub fn max_abs(m: &Mat) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

pub fn is_symmetric(m: &Mat, tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let n = m.nrows();
    (0..n).all(|i| (0..i).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= tol))
}

pub fn min_eigenvalue(m: &Mat) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues().min()
}

/// 2-norm condition number from singular values.
pub fn condition_number(m: &Mat) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 1.0;
    }
    let sv = m.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Inverse of a square matrix, rejecting anything with condition number above
/// [`CONDITION_LIMIT`].
pub fn checked_inverse(m: &Mat, what: &str) -> Result<(Mat, f64)> {
    let cond = condition_number(m);
    if !cond.is_finite() || cond > CONDITION_LIMIT {
        return Err(Error::numerical(format!(
            "{what} is numerically singular (condition number {cond:e})"
        )));
    }
    let inv = m
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::numerical(format!("{what} is singular")))?;
    Ok((inv, cond))
}

/// Symmetric square root `S` with `S·S = m` for a PSD matrix; small negative
/// eigenvalues from rounding are clamped to zero.
pub fn sym_sqrt(m: &Mat) -> Mat {
    let n = m.nrows();
    if n == 0 {
        return Mat::zeros(0, 0);
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut root = Mat::zeros(n, n);
    for k in 0..n {
        let lam = eig.eigenvalues[k].max(0.0).sqrt();
        if lam == 0.0 {
            continue;
        }
        let v = eig.eigenvectors.column(k);
        root += (v * v.transpose()) * lam;
    }
    root
}

pub fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

pub fn mat_from_rows(rows: &[Vec<f64>], what: &str) -> Result<Mat> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().position(|r| r.len() != ncols) {
        return Err(Error::invalid(format!(
            "{what}: row {bad} has {} entries, expected {ncols}",
            rows[bad].len()
        )));
    }
    Ok(Mat::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub fn mat_to_rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}
