//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Build a matrix from row vectors, checking the rows are rectangular.
pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::invalid("ragged matrix rows"));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Stack row vectors into an `S×d` sample matrix.
pub fn stack_rows(rows: &[DVector<f64>]) -> Result<DMatrix<f64>> {
    let d = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != d) {
        return Err(Error::invalid("rows of unequal length"));
    }
    Ok(DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]))
}

/// Factor `L` with `L Lᵀ = cov` for a symmetric positive semi-definite
/// covariance. Zero eigenvalues are allowed.
pub fn psd_factor(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !cov.is_square() {
        return Err(Error::invalid("covariance must be square"));
    }
    let n = cov.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let scale = cov.iter().fold(0.0_f64, |a, v| a.max(v.abs())).max(1.0);
    if (cov - cov.transpose()).amax() > 1e-9 * scale {
        return Err(Error::invalid("covariance is not symmetric"));
    }
    let eig = cov.clone().symmetric_eigen();
    if eig.eigenvalues.iter().any(|&l| l < -1e-9 * scale) {
        return Err(Error::invalid("covariance is not positive semi-definite"));
    }
    let sqrt = DVector::from_iterator(n, eig.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()));
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&sqrt))
}

/// `ln|det A|` with the sign of the determinant, computed from a partially
/// pivoted LU factorisation. Singular matrices give `(-inf, 0)`.
pub fn log_abs_det(a: &DMatrix<f64>) -> Result<(f64, f64)> {
    if !a.is_square() {
        return Err(Error::invalid(format!(
            "determinant of a non-square {}x{} matrix",
            a.nrows(),
            a.ncols()
        )));
    }
    let lu = a.clone().lu();
    let mut sign = lu.p().determinant::<f64>();
    let mut log = 0.0;
    for &u in lu.u().diagonal().iter() {
        if u == 0.0 || !u.is_finite() {
            return Ok((f64::NEG_INFINITY, 0.0));
        }
        sign *= u.signum();
        log += u.abs().ln();
    }
    Ok((log, sign))
}

/// Column means of an `S×d` sample matrix.
pub fn column_means(samples: &DMatrix<f64>) -> DVector<f64> {
    let n = samples.nrows().max(1) as f64;
    DVector::from_iterator(samples.ncols(), samples.column_iter().map(|c| c.sum() / n))
}

/// Unbiased (`1/(S-1)`) sample covariance of an `S×d` matrix.
pub fn sample_covariance(samples: &DMatrix<f64>) -> DMatrix<f64> {
    let s = samples.nrows();
    let mean = column_means(samples);
    let mut centered = samples.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let denom = (s.max(2) - 1) as f64;
    centered.transpose() * centered / denom
}

/// Per-column standardisation parameters (mean, standard deviation). Columns
/// with zero spread get a unit scale so they stay finite after transform.
#[derive(Debug, Clone)]
pub struct Standardizer {
    pub mean: DVector<f64>,
    pub scale: DVector<f64>,
}

impl Standardizer {
    pub fn fit(samples: &DMatrix<f64>) -> Self {
        let mean = column_means(samples);
        let n = samples.nrows();
        let scale = DVector::from_iterator(
            samples.ncols(),
            samples.column_iter().zip(mean.iter()).map(|(c, m)| {
                let var = c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n.max(2) - 1) as f64;
                let sd = var.sqrt();
                if sd > 0.0 && sd.is_finite() {
                    sd
                } else {
                    1.0
                }
            }),
        );
        Self { mean, scale }
    }

    pub fn transform(&self, samples: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(samples.nrows(), samples.ncols(), |i, j| {
            (samples[(i, j)] - self.mean[j]) / self.scale[j]
        })
    }
}
