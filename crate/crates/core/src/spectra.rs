//! Closed-form singular values of `(I - gamma P)^{-1}` for a few graphs.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};

const SYMMETRY_TOL: f64 = 1e-10;
const RANGE_SLACK: f64 = 1e-8;

/// `sigma_k = 1 / (1 - gamma cos(2 pi / S * ceil((k - 1) / 2)))` for the
/// random walk on a cycle of `S` states.
pub fn torus1d_spectrum_closed_form(num_states: usize, gamma: f64) -> Result<Vector> {
    check_gamma(gamma)?;
    if num_states < 3 {
        return Err(Error::InvalidArgument(format!(
            "the cycle closed form needs S >= 3, got {num_states}"
        )));
    }
    let s = num_states as f64;
    let mut values: Vec<f64> = (1..=num_states)
        .map(|k| {
            let freq = (k - 1).div_ceil(2) as f64;
            1.0 / (1.0 - gamma * (2.0 * PI / s * freq).cos())
        })
        .collect();
    values.sort_by(|a, b| b.total_cmp(a));
    Ok(Vector::from_vec(values))
}

/// Extreme singular values of the star graph SR; the remaining `S - 2` are 1.
pub fn star_spectrum_closed_form(num_states: usize, gamma: f64) -> Result<Vector> {
    check_gamma(gamma)?;
    if num_states < 3 {
        return Err(Error::InvalidArgument(format!(
            "the star closed form needs S >= 3, got {num_states}"
        )));
    }
    let s = num_states as f64;
    let m = s - 1.0;
    let eta = gamma / (1.0 - gamma * gamma);
    let a = eta * eta * (m + 1.0 / m);
    let disc = a * a + 4.0 * (eta + eta * eta * gamma).powi(2) * s * s / m
        - 4.0 * eta.powi(4);
    let shift = 2.0 * eta * gamma + eta * eta * gamma * gamma + 1.0;
    let sigma_max = (0.5 * (a + disc.sqrt()) + shift).sqrt();
    // The product of the extremes is |det| = 1 / (1 - gamma^2); this avoids
    // the cancellation in the minus branch.
    let sigma_min = 1.0 / ((1.0 - gamma * gamma) * sigma_max);
    let mut values = vec![1.0; num_states];
    values[0] = sigma_max;
    values[num_states - 1] = sigma_min;
    values.sort_by(|a, b| b.total_cmp(a));
    Ok(Vector::from_vec(values))
}

/// Whether every singular value of `(I - gamma P)^{-1}` lies in
/// `[1/(1+gamma), 1/(1-gamma)]` (with slack `1e-8`). `P` must be symmetric.
pub fn symmetric_spectrum_range_check(p: &Matrix, gamma: f64) -> Result<bool> {
    check_gamma(gamma)?;
    if !p.is_square() {
        return Err(Error::InvalidArgument("transition matrix must be square".into()));
    }
    let asym = linalg::asymmetry(p);
    if asym > SYMMETRY_TOL {
        return Err(Error::InvalidArgument(format!(
            "transition matrix is not symmetric (defect {asym:e})"
        )));
    }
    let s = p.nrows();
    let a = Matrix::identity(s, s) - p.scale(gamma);
    // For symmetric `P` the singular values of the inverse are the reciprocals
    // of `|eig(I - gamma P)|`.
    let eig = linalg::symmetric_eigenvalues(&a);
    let lo = 1.0 / (1.0 + gamma) - RANGE_SLACK;
    let hi = 1.0 / (1.0 - gamma) + RANGE_SLACK;
    Ok(eig.iter().all(|&e| {
        let sigma = 1.0 / e.abs();
        (lo..=hi).contains(&sigma)
    }))
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::InvalidArgument(format!(
            "discount must lie in [0, 1), got {gamma}"
        )));
    }
    Ok(())
}
