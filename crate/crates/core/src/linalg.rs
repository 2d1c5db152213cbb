//! Dense symmetric eigendecomposition and small vector helpers.
//!
//! The cyclic Jacobi solver here is the verification oracle for the analytic
//! rank-2 decomposition in [`crate::quantum`]; the two share no code paths.

use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LinalgError {
    #[error("matrix is not square: {rows} rows, row {row} has {cols} columns")]
    NotSquare { rows: usize, row: usize, cols: usize },
    #[error("matrix is not symmetric at ({row},{col})")]
    NotSymmetric { row: usize, col: usize },
    #[error("Jacobi iteration did not converge within {0} sweeps")]
    NoConvergence(usize),
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

pub fn norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// Returns the unit vector along `a`, or `None` if `‖a‖ = 0`.
pub fn normalized<T: Real>(a: &[T]) -> Option<Vec<T>> {
    let n = norm(a);
    if n == T::zero() {
        return None;
    }
    Some(a.iter().map(|&x| x / n).collect())
}

/// Outer product `a·bᵀ` scaled by `scale`.
pub fn scaled_outer<T: Real>(a: &[T], b: &[T], scale: T) -> Vec<Vec<T>> {
    a.iter()
        .map(|&x| b.iter().map(|&y| scale * x * y).collect())
        .collect()
}

pub fn mat_vec<T: Real>(m: &[Vec<T>], v: &[T]) -> Vec<T> {
    m.iter().map(|row| dot(row, v)).collect()
}

pub fn mat_add_assign<T: Real>(m: &mut [Vec<T>], other: &[Vec<T>]) {
    for (row, other_row) in m.iter_mut().zip(other) {
        for (x, &y) in row.iter_mut().zip(other_row) {
            *x += y;
        }
    }
}

pub fn frobenius_norm<T: Real>(m: &[Vec<T>]) -> T {
    m.iter()
        .map(|row| dot(row, row))
        .fold(T::zero(), |acc, x| acc + x)
        .sqrt()
}

/// Eigenpairs of a symmetric matrix, eigenvalues sorted descending.
/// `eigenvectors[i]` is the unit eigenvector for `eigenvalues[i]`.
#[derive(Debug, Clone)]
pub struct SymmetricEigen<T> {
    pub eigenvalues: Vec<T>,
    pub eigenvectors: Vec<Vec<T>>,
}

const MAX_SWEEPS: usize = 100;
const SYMMETRY_TOL: f64 = 1e-10;

/// Diagonalizes a symmetric matrix with cyclic Jacobi rotations.
///
/// Sweeps until the off-diagonal Frobenius norm drops below
/// `max(1e-12, 4·ε)·‖A‖`, capped at 100 sweeps. The input must be symmetric
/// within an absolute 1e-10.
pub fn jacobi_eigendecompose<T: Real>(matrix: &[Vec<T>]) -> Result<SymmetricEigen<T>, LinalgError> {
    let n = matrix.len();
    for (row, r) in matrix.iter().enumerate() {
        if r.len() != n {
            return Err(LinalgError::NotSquare { rows: n, row, cols: r.len() });
        }
    }
    let sym_tol = T::from_f64_lossy(SYMMETRY_TOL);
    for p in 0..n {
        for q in (p + 1)..n {
            if (matrix[p][q] - matrix[q][p]).abs() > sym_tol {
                return Err(LinalgError::NotSymmetric { row: p, col: q });
            }
        }
    }

    let mut a: Vec<Vec<T>> = matrix.to_vec();
    let mut v = identity::<T>(n);
    let norm_a = frobenius_norm(&a);
    let four = T::from_f64_lossy(4.0);
    let threshold = norm_a * T::from_f64_lossy(1e-12).max(four * T::epsilon());

    for _ in 0..MAX_SWEEPS {
        if off_diagonal_norm(&a) <= threshold {
            return Ok(sorted_eigen(a, v));
        }
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let apq = a[p][q];
                if apq == T::zero() {
                    continue;
                }
                // tangent of the rotation angle that annihilates a[p][q]
                let theta = (a[q][q] - a[p][p]) / (apq + apq);
                let root = (T::one() + theta * theta).sqrt();
                let t = if theta >= T::zero() {
                    T::one() / (theta + root)
                } else {
                    T::one() / (theta - root)
                };
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = t * c;
                rotate(&mut a, p, q, c, s);
                accumulate(&mut v, p, q, c, s);
            }
        }
    }
    if off_diagonal_norm(&a) <= threshold {
        return Ok(sorted_eigen(a, v));
    }
    Err(LinalgError::NoConvergence(MAX_SWEEPS))
}

fn identity<T: Real>(n: usize) -> Vec<Vec<T>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { T::one() } else { T::zero() }).collect())
        .collect()
}

fn off_diagonal_norm<T: Real>(a: &[Vec<T>]) -> T {
    let n = a.len();
    let mut sum = T::zero();
    for p in 0..n {
        for q in 0..n {
            if p != q {
                sum += a[p][q] * a[p][q];
            }
        }
    }
    sum.sqrt()
}

/// Two-sided Givens update `A ← GᵀAG` on the (p,q) plane.
fn rotate<T: Real>(a: &mut [Vec<T>], p: usize, q: usize, c: T, s: T) {
    let n = a.len();
    for i in 0..n {
        let aip = a[i][p];
        let aiq = a[i][q];
        a[i][p] = c * aip - s * aiq;
        a[i][q] = s * aip + c * aiq;
    }
    for j in 0..n {
        let apj = a[p][j];
        let aqj = a[q][j];
        a[p][j] = c * apj - s * aqj;
        a[q][j] = s * apj + c * aqj;
    }
}

fn accumulate<T: Real>(v: &mut [Vec<T>], p: usize, q: usize, c: T, s: T) {
    for row in v.iter_mut() {
        let vip = row[p];
        let viq = row[q];
        row[p] = c * vip - s * viq;
        row[q] = s * vip + c * viq;
    }
}

fn sorted_eigen<T: Real>(a: Vec<Vec<T>>, v: Vec<Vec<T>>) -> SymmetricEigen<T> {
    let n = a.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j][j].partial_cmp(&a[i][i]).expect("finite eigenvalues"));
    let eigenvalues = order.iter().map(|&i| a[i][i]).collect();
    let eigenvectors = order
        .iter()
        .map(|&col| (0..n).map(|row| v[row][col]).collect())
        .collect();
    SymmetricEigen { eigenvalues, eigenvectors }
}
