//! Ordinary least squares by Householder QR.

use super::matrix::dot;
use super::Matrix;
use crate::error::{Error, Result};

/// Relative pivot threshold below which a design column counts as
/// linearly dependent.
const PIVOT_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct LinearFit {
    pub coefficients: Vec<f64>,
    pub residuals: Vec<f64>,
    /// `(E_n[d dᵀ])⁻¹` for the design rows `d`.
    pub gram_inverse: Matrix,
}

impl LinearFit {
    pub fn predict(&self, row: &[f64]) -> f64 {
        dot(row, &self.coefficients)
    }

    pub fn n(&self) -> usize {
        self.residuals.len()
    }

    /// Influence vectors `gram_inverse · d_i · e_i` for arbitrary per-row
    /// errors `e_i`. With the fitted residuals these are the estimated
    /// influence vectors; with the true errors their mean is exactly the
    /// coefficient estimation error.
    pub fn influence(&self, design: &Matrix, errors: &[f64]) -> Result<Matrix> {
        let q = self.coefficients.len();
        if design.cols() != q || design.rows() != errors.len() {
            return Err(Error::Dimension(format!(
                "influence of a {q}-coefficient fit on a {}x{} design with {} errors",
                design.rows(),
                design.cols(),
                errors.len()
            )));
        }
        let mut out = Matrix::zeros(design.rows(), q);
        for (i, d) in design.row_iter().enumerate() {
            let e = errors[i];
            let row = out.row_mut(i);
            for (a, slot) in row.iter_mut().enumerate() {
                *slot = e * dot(self.gram_inverse.row(a), d);
            }
        }
        Ok(out)
    }
}

/// Least-squares fit of `response` on the columns of `design`.
///
/// Fails with [`Error::RankDeficient`] naming the first column whose
/// Householder pivot is negligible relative to the column's norm.
pub fn fit_ols(design: &Matrix, response: &[f64]) -> Result<LinearFit> {
    let n = design.rows();
    let p = design.cols();
    if response.len() != n {
        return Err(Error::Dimension(format!(
            "design has {n} rows but response has {} entries",
            response.len()
        )));
    }
    if n < p {
        return Err(Error::Dimension(format!("{n} rows cannot identify {p} coefficients")));
    }
    if let Some(i) = response.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("response entry {i} is not finite")));
    }

    // Column-major working copy; R ends up in the upper triangle.
    let mut a: Vec<Vec<f64>> = (0..p).map(|j| design.column(j)).collect();
    let col_norms: Vec<f64> = a.iter().map(|c| dot(c, c).sqrt()).collect();
    let mut qty = response.to_vec();
    let mut v = vec![0.0; n];

    for j in 0..p {
        let norm = a[j][j..].iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm <= PIVOT_TOL * col_norms[j].max(1.0) {
            return Err(Error::RankDeficient { column: j });
        }
        let alpha = if a[j][j] > 0.0 { -norm } else { norm };
        v[j..].copy_from_slice(&a[j][j..]);
        v[j] -= alpha;
        let vnorm2: f64 = v[j..].iter().map(|x| x * x).sum();
        let reflect = |col: &mut [f64]| {
            let s: f64 = col[j..].iter().zip(&v[j..]).map(|(c, w)| c * w).sum();
            let f = 2.0 * s / vnorm2;
            for (c, w) in col[j..].iter_mut().zip(&v[j..]) {
                *c -= f * w;
            }
        };
        for col in a.iter_mut().skip(j + 1) {
            reflect(col);
        }
        reflect(&mut qty);
        a[j][j] = alpha;
        for x in a[j][j + 1..].iter_mut() {
            *x = 0.0;
        }
    }

    // Back substitution R b = (Qᵀy)[..p].
    let mut coefficients = vec![0.0; p];
    for i in (0..p).rev() {
        let mut s = qty[i];
        for k in i + 1..p {
            s -= a[k][i] * coefficients[k];
        }
        coefficients[i] = s / a[i][i];
    }

    let residuals: Vec<f64> = design
        .row_iter()
        .zip(response)
        .map(|(d, y)| y - dot(d, &coefficients))
        .collect();

    // R⁻¹ (upper triangular), then gram_inverse = n R⁻¹ R⁻ᵀ.
    let mut rinv = Matrix::zeros(p, p);
    for c in 0..p {
        rinv[(c, c)] = 1.0 / a[c][c];
        for i in (0..c).rev() {
            let mut s = 0.0;
            for k in i + 1..=c {
                s += a[k][i] * rinv[(k, c)];
            }
            rinv[(i, c)] = -s / a[i][i];
        }
    }
    let mut gram_inverse = Matrix::zeros(p, p);
    for i in 0..p {
        for j in 0..=i {
            let s: f64 = (i.max(j)..p).map(|k| rinv[(i, k)] * rinv[(j, k)]).sum();
            gram_inverse[(i, j)] = s * n as f64;
            gram_inverse[(j, i)] = s * n as f64;
        }
    }

    Ok(LinearFit { coefficients, residuals, gram_inverse })
}
