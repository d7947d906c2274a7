//! Dense complex matrix helpers shared by the solver, metric and verification
//! modules. Heavy kernels (matmul, SVD, Hermitian EVD) go through `faer`.

use faer::{Mat, Side};

use crate::error::{Error, Result};
use crate::c64;

pub type CMat = Mat<c64>;

pub fn identity(n: usize) -> CMat {
    Mat::from_fn(n, n, |i, j| if i == j { c64::ONE } else { c64::ZERO })
}

pub fn diag(entries: &[c64]) -> CMat {
    let n = entries.len();
    Mat::from_fn(n, n, |i, j| if i == j { entries[i] } else { c64::ZERO })
}

pub fn adjoint(m: &CMat) -> CMat {
    m.adjoint().to_owned()
}

/// Largest entry modulus.
pub fn max_abs(m: &CMat) -> f64 {
    let mut acc = 0.0_f64;
    for j in 0..m.ncols() {
        for z in m.col_as_slice(j) {
            acc = acc.max(z.norm());
        }
    }
    acc
}

pub fn frobenius(m: &CMat) -> f64 {
    m.norm_l2()
}

pub fn sub(a: &CMat, b: &CMat) -> CMat {
    a - b
}

/// `‖a − b‖_max`.
pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    let mut acc = 0.0_f64;
    for j in 0..a.ncols() {
        let (ca, cb) = (a.col_as_slice(j), b.col_as_slice(j));
        for (x, y) in ca.iter().zip(cb) {
            acc = acc.max((x - y).norm());
        }
    }
    acc
}

/// `‖m − m†‖_max`.
pub fn hermitian_defect(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut acc = 0.0_f64;
    for j in 0..n {
        for i in 0..=j {
            acc = acc.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    acc
}

/// `(m + m†) / 2`.
pub fn hermitian_part(m: &CMat) -> CMat {
    let n = m.nrows();
    Mat::from_fn(n, n, |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5)
}

/// `diag(d) · m`.
pub fn scale_rows(d: &[c64], m: &CMat) -> CMat {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| d[i] * m[(i, j)])
}

/// `m · diag(d)`.
pub fn scale_cols(m: &CMat, d: &[c64]) -> CMat {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * d[j])
}

/// Euclidean norm of column `j`.
pub fn col_norm(m: &CMat, j: usize) -> f64 {
    m.col_as_slice(j).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `x† y` for two columns.
pub fn dot(x: &[c64], y: &[c64]) -> c64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

pub fn singular_values(m: &CMat) -> Result<Vec<f64>> {
    m.singular_values()
        .map_err(|e| Error::EigensolverFailure(format!("svd: {e:?}")))
}

/// 2-norm condition number; `f64::INFINITY` for a numerically singular matrix.
pub fn cond2(m: &CMat) -> Result<f64> {
    let s = singular_values(m)?;
    let (hi, lo) = match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) => (hi, lo),
        _ => return Ok(1.0),
    };
    if lo == 0.0 {
        Ok(f64::INFINITY)
    } else {
        Ok(hi / lo)
    }
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigen(m: &CMat) -> Result<(Vec<f64>, CMat)> {
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::EigensolverFailure(format!("hermitian evd: {e:?}")))?;
    let s = evd.S().column_vector();
    let values = (0..m.nrows()).map(|i| s[i].re).collect();
    Ok((values, evd.U().to_owned()))
}

pub fn hermitian_eigenvalues(m: &CMat) -> Result<Vec<f64>> {
    m.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::EigensolverFailure(format!("hermitian evd: {e:?}")))
}

/// `U · diag(f(μ)) · U†` for a Hermitian eigendecomposition.
pub fn hermitian_function(values: &[f64], vectors: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let scaled = scale_cols(
        vectors,
        &values.iter().map(|&v| c64::new(f(v), 0.0)).collect::<Vec<_>>(),
    );
    &scaled * vectors.adjoint()
}

/// Returns `true` when every entry outside the main three diagonals is exactly zero.
pub fn is_tridiagonal(m: &CMat) -> bool {
    let n = m.nrows();
    for j in 0..n {
        for (i, z) in m.col_as_slice(j).iter().enumerate() {
            if i.abs_diff(j) > 1 && *z != c64::ZERO {
                return false;
            }
        }
    }
    true
}

/// Matrix bandwidth: the largest `|i − j|` with a nonzero entry.
pub fn bandwidth(m: &CMat) -> usize {
    let mut bw = 0;
    for j in 0..m.ncols() {
        for (i, z) in m.col_as_slice(j).iter().enumerate() {
            if *z != c64::ZERO {
                bw = bw.max(i.abs_diff(j));
            }
        }
    }
    bw
}

/// Solves a tridiagonal system with partial pivoting (banded LU, one extra
/// super-diagonal of fill). `lower[i]` couples row `i + 1` to column `i`,
/// `upper[i]` couples row `i` to column `i + 1`. Returns `None` on an exactly
/// zero pivot.
pub fn solve_tridiagonal(
    lower: &[c64],
    main: &[c64],
    upper: &[c64],
    rhs: &[c64],
) -> Option<Vec<c64>> {
    let n = main.len();
    if n == 0 {
        return Some(Vec::new());
    }
    // Row i of U holds (d[i], u1[i], u2[i]) at columns (i, i+1, i+2).
    let mut d = main.to_vec();
    let mut u1: Vec<c64> = (0..n)
        .map(|i| if i + 1 < n { upper[i] } else { c64::ZERO })
        .collect();
    let mut u2 = vec![c64::ZERO; n];
    let mut l = lower.to_vec();
    let mut b = rhs.to_vec();

    for i in 0..n.saturating_sub(1) {
        if l[i].norm() > d[i].norm() {
            // Swap rows i and i + 1.
            let (ri0, ri1, ri2) = (d[i], u1[i], u2[i]);
            d[i] = l[i];
            u1[i] = d[i + 1];
            u2[i] = u1[i + 1];
            l[i] = ri0;
            d[i + 1] = ri1;
            u1[i + 1] = ri2;
            b.swap(i, i + 1);
        }
        if d[i] == c64::ZERO {
            return None;
        }
        let m = l[i] / d[i];
        d[i + 1] -= m * u1[i];
        if i + 2 < n {
            u1[i + 1] -= m * u2[i];
        }
        let bi = b[i];
        b[i + 1] -= m * bi;
    }
    if d[n - 1] == c64::ZERO {
        return None;
    }
    let mut x = vec![c64::ZERO; n];
    for i in (0..n).rev() {
        let mut acc = b[i];
        if i + 1 < n {
            acc -= u1[i] * x[i + 1];
        }
        if i + 2 < n {
            acc -= u2[i] * x[i + 2];
        }
        x[i] = acc / d[i];
    }
    Some(x)
}

/// Extracts the three diagonals of a tridiagonal matrix.
pub fn tridiagonal_bands(m: &CMat) -> (Vec<c64>, Vec<c64>, Vec<c64>) {
    let n = m.nrows();
    let main = (0..n).map(|i| m[(i, i)]).collect();
    let lower = (0..n.saturating_sub(1)).map(|i| m[(i + 1, i)]).collect();
    let upper = (0..n.saturating_sub(1)).map(|i| m[(i, i + 1)]).collect();
    (lower, main, upper)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> c64 {
        c64::new(re, im)
    }

    #[test]
    fn tridiagonal_solve_matches_dense_product() {
        let lower = vec![c(1.0, 0.5), c(-2.0, 0.0), c(0.3, -1.0)];
        let main = vec![c(0.1, 0.0), c(4.0, 1.0), c(0.0, 0.0), c(2.0, -3.0)];
        let upper = vec![c(3.0, 0.0), c(1.0, 1.0), c(-1.0, 2.0)];
        let rhs = vec![c(1.0, 0.0), c(0.0, 1.0), c(2.0, 2.0), c(-1.0, 0.5)];
        let x = solve_tridiagonal(&lower, &main, &upper, &rhs).unwrap();
        let n = main.len();
        for i in 0..n {
            let mut acc = main[i] * x[i];
            if i > 0 {
                acc += lower[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                acc += upper[i] * x[i + 1];
            }
            assert!((acc - rhs[i]).norm() < 1e-12, "row {i}: {acc} vs {}", rhs[i]);
        }
    }

    #[test]
    fn singular_tridiagonal_is_reported() {
        let zero = vec![c64::ZERO; 2];
        assert!(solve_tridiagonal(&[c64::ZERO], &zero, &[c64::ZERO], &zero).is_none());
    }

    #[test]
    fn bandwidth_and_hermitian_defect() {
        let m = Mat::from_fn(3, 3, |i, j| {
            if i == j {
                c(2.0, 0.0)
            } else if i.abs_diff(j) == 1 {
                c(-1.0, 0.0)
            } else {
                c64::ZERO
            }
        });
        assert_eq!(bandwidth(&m), 1);
        assert!(is_tridiagonal(&m));
        assert_eq!(hermitian_defect(&m), 0.0);
        assert!((cond2(&identity(4)).unwrap() - 1.0).abs() < 1e-14);
    }
}
