//! Orientation certainty level.

use crate::blocks::{GradientCovariance, OrientedBlock};

/// `1 − λmin/λmax` of the gradient covariance, 0 when `λmax` is 0.
pub fn ocl_from_covariance(cov: &GradientCovariance) -> f64 {
    let (lmin, lmax) = cov.eigenvalues();
    if lmax > 0.0 {
        (1.0 - lmin.max(0.0) / lmax).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

pub fn ocl(block: &OrientedBlock) -> f64 {
    ocl_from_covariance(&GradientCovariance::of(block.pixels.view()))
}
