use nalgebra::{DMatrix, SymmetricEigen};

use super::Matrix;
use crate::error::{Error, Result};

/// Lower Cholesky factor of a symmetric positive definite matrix stored
/// row-major in `a` (dimension `n`). Returns `None` when a pivot is not
/// positive.
pub(crate) fn cholesky_in_place(a: &mut [f64], n: usize) -> Option<()> {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    Some(())
}

/// Solves `L Lᵀ x = b` given the factor produced by [`cholesky_in_place`].
pub(crate) fn cholesky_backsolve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// Solves `a x = b` for symmetric positive definite `a`.
pub fn cholesky_solve(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.rows();
    if a.cols() != n || b.len() != n {
        return Err(Error::Dimension(format!(
            "cholesky solve of {}x{} system with right-hand side of length {}",
            a.rows(),
            a.cols(),
            b.len()
        )));
    }
    let mut l = a.as_slice().to_vec();
    cholesky_in_place(&mut l, n)
        .ok_or_else(|| Error::Singular("matrix is not positive definite".into()))?;
    let mut x = b.to_vec();
    cholesky_backsolve(&l, n, &mut x);
    Ok(x)
}

/// Inverse of a symmetric positive definite matrix.
pub fn invert_spd(a: &Matrix) -> Result<Matrix> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::Dimension(format!("cannot invert a {}x{} matrix", n, a.cols())));
    }
    let mut l = a.as_slice().to_vec();
    cholesky_in_place(&mut l, n)
        .ok_or_else(|| Error::Singular("matrix is not positive definite".into()))?;
    let mut inv = Matrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e.iter_mut().for_each(|v| *v = 0.0);
        e[j] = 1.0;
        cholesky_backsolve(&l, n, &mut e);
        for i in 0..n {
            inv[(i, j)] = e[i];
        }
    }
    symmetrize(&mut inv);
    Ok(inv)
}

/// Symmetric square root `V diag(sqrt(max(λ, 0))) Vᵀ` of a symmetric matrix.
/// Negative eigenvalues, which appear when a sample covariance is
/// numerically indefinite, are clipped to zero.
pub fn symmetric_sqrt(a: &Matrix) -> Result<Matrix> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::Dimension(format!("square root of a {}x{} matrix", n, a.cols())));
    }
    if n == 0 {
        return Ok(Matrix::zeros(0, 0));
    }
    let m = DMatrix::from_row_slice(n, n, a.as_slice());
    let eig = SymmetricEigen::new(m);
    let mut out = Matrix::zeros(n, n);
    for k in 0..n {
        let lambda = eig.eigenvalues[k].max(0.0).sqrt();
        if lambda == 0.0 {
            continue;
        }
        for i in 0..n {
            let vi = eig.eigenvectors[(i, k)] * lambda;
            for j in 0..n {
                out[(i, j)] += vi * eig.eigenvectors[(j, k)];
            }
        }
    }
    symmetrize(&mut out);
    Ok(out)
}

fn symmetrize(m: &mut Matrix) {
    let n = m.rows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}
