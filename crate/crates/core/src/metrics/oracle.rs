//! Closed-form Gaussian information quantities, used as test oracles.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::log_abs_det;

fn check_psd(cov: &DMatrix<f64>, name: &str) -> Result<()> {
    if !cov.is_square() {
        return Err(Error::invalid(format!("{name} must be square")));
    }
    let scale = cov.amax().max(1.0);
    if (cov - cov.transpose()).amax() > 1e-12 * scale {
        return Err(Error::invalid(format!("{name} must be symmetric")));
    }
    let min_eig = cov.clone().symmetric_eigenvalues().min();
    if min_eig < -1e-12 * scale {
        return Err(Error::invalid(format!(
            "{name} is not positive semi-definite (eigenvalue {min_eig})"
        )));
    }
    Ok(())
}

fn log_det_pd(m: &DMatrix<f64>, name: &str) -> Result<f64> {
    let (ld, sign) = log_abs_det(m)?;
    if sign <= 0.0 {
        return Err(Error::invalid(format!("{name} is singular")));
    }
    Ok(ld)
}

/// `I(x; Ax + n)` for `x ~ N(·, Σ_in)` and `n ~ N(0, Σ_noise)`:
/// `½ [ln det(AΣ_inAᵀ + Σ_noise) − ln det Σ_noise]`.
pub fn gaussian_channel_mi(a: &DMatrix<f64>, input_cov: &DMatrix<f64>, noise_cov: &DMatrix<f64>) -> Result<f64> {
    check_psd(input_cov, "input covariance")?;
    check_psd(noise_cov, "noise covariance")?;
    if a.ncols() != input_cov.nrows() || a.nrows() != noise_cov.nrows() {
        return Err(Error::invalid(format!(
            "channel matrix is {}x{}, input covariance {}x{}, noise covariance {}x{}",
            a.nrows(),
            a.ncols(),
            input_cov.nrows(),
            input_cov.ncols(),
            noise_cov.nrows(),
            noise_cov.ncols()
        )));
    }
    let output_cov = a * input_cov * a.transpose() + noise_cov;
    Ok(0.5 * (log_det_pd(&output_cov, "output covariance")? - log_det_pd(noise_cov, "noise covariance")?))
}

/// `I(x; Ax + σε)` with isotropic noise: `½ ln det(I + AΣAᵀ/σ²)`.
pub fn gaussian_mi_oracle(a: &DMatrix<f64>, input_cov: &DMatrix<f64>, noise_sd: f64) -> Result<f64> {
    if !(noise_sd > 0.0 && noise_sd.is_finite()) {
        return Err(Error::invalid("noise standard deviation must be positive"));
    }
    let d = a.nrows();
    gaussian_channel_mi(a, input_cov, &(DMatrix::identity(d, d) * (noise_sd * noise_sd)))
}

/// Mutual information of a bivariate normal pair with correlation `rho`.
pub fn correlated_pair_mi(rho: f64) -> f64 {
    -0.5 * (1.0 - rho * rho).ln()
}

/// Differential entropy of `N(·, Σ)`: `½ ln det(2πe Σ)`.
pub fn gaussian_entropy(cov: &DMatrix<f64>) -> Result<f64> {
    check_psd(cov, "covariance")?;
    let d = cov.nrows() as f64;
    Ok(0.5 * (d * (2.0 * PI * std::f64::consts::E).ln() + log_det_pd(cov, "covariance")?))
}
