use std::f64::consts::{FRAC_PI_2, PI};

use ndarray::{Array2, ArrayView2};

use super::{BlockCenter, BlockError, BlockSpec};
use crate::ingest::IntensityGrid;

/// Mean outer product of the intensity gradient, `[[a, c], [c, b]]`.
///
/// Gradients use centered differences inside the block and one-sided
/// differences on its border, so every pixel contributes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradientCovariance {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

fn derivative(prev: Option<f64>, here: f64, next: Option<f64>) -> f64 {
    match (prev, next) {
        (Some(p), Some(n)) => (n - p) / 2.0,
        (None, Some(n)) => n - here,
        (Some(p), None) => here - p,
        (None, None) => 0.0,
    }
}

impl GradientCovariance {
    pub fn of(block: ArrayView2<'_, f64>) -> Self {
        let (rows, cols) = block.dim();
        let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
        for r in 0..rows {
            for col in 0..cols {
                let here = block[[r, col]];
                let dx = derivative(
                    col.checked_sub(1).map(|k| block[[r, k]]),
                    here,
                    (col + 1 < cols).then(|| block[[r, col + 1]]),
                );
                let dy = derivative(
                    r.checked_sub(1).map(|k| block[[k, col]]),
                    here,
                    (r + 1 < rows).then(|| block[[r + 1, col]]),
                );
                a += dx * dx;
                b += dy * dy;
                c += dx * dy;
            }
        }
        let n = (rows * cols).max(1) as f64;
        Self {
            a: a / n,
            b: b / n,
            c: c / n,
        }
    }

    /// `(λ_min, λ_max)` of the 2x2 covariance.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let tr = self.a + self.b;
        let disc = ((self.a - self.b).powi(2) + 4.0 * self.c * self.c).sqrt();
        ((tr - disc) / 2.0, (tr + disc) / 2.0)
    }

    /// Ridge-flow angle in `[0, π)`: perpendicular to the dominant gradient.
    /// Angles are measured in image coordinates (x right, y down).
    pub fn ridge_angle(&self) -> Option<f64> {
        let energy = self.a + self.b;
        if energy.is_nan() || energy <= 1e-12 {
            return None;
        }
        let theta = 0.5 * (2.0 * self.c).atan2(self.a - self.b) + FRAC_PI_2;
        Some(theta.rem_euclid(PI) % PI)
    }
}

/// Ridge-flow angle of a real-valued block.
pub fn orientation_of(block: ArrayView2<'_, f64>) -> Result<f64, BlockError> {
    GradientCovariance::of(block)
        .ridge_angle()
        .ok_or(BlockError::NoOrientation)
}

fn tile(grid: &IntensityGrid, center: BlockCenter, block_size: usize) -> Result<Array2<f64>, BlockError> {
    let half = (block_size as f64 - 1.0) / 2.0;
    let x0 = center.x - half;
    let y0 = center.y - half;
    if x0 < 0.0 || y0 < 0.0 {
        return Err(BlockError::OutOfSupport);
    }
    let (x0, y0) = (x0.round() as usize, y0.round() as usize);
    if x0 + block_size > grid.width() || y0 + block_size > grid.height() {
        return Err(BlockError::OutOfSupport);
    }
    Ok(Array2::from_shape_fn((block_size, block_size), |(r, c)| {
        f64::from(grid.get(x0 + c, y0 + r))
    }))
}

/// Ridge-flow angle of the tiling block centered at `center`.
pub fn estimate_orientation(
    grid: &IntensityGrid,
    center: BlockCenter,
    spec: &BlockSpec,
) -> Result<f64, BlockError> {
    orientation_of(tile(grid, center, spec.block_size)?.view())
}

/// A block resampled so that its ridges run vertically.
#[derive(Clone, Debug, PartialEq)]
pub struct OrientedBlock {
    /// `oriented_height x oriented_width` intensities.
    pub pixels: Array2<f64>,
    /// Ridge-flow angle of the source block.
    pub angle: f64,
    pub center: (f64, f64),
}

impl OrientedBlock {
    pub fn new(pixels: Array2<f64>) -> Self {
        Self {
            pixels,
            angle: FRAC_PI_2,
            center: (0.0, 0.0),
        }
    }

    pub fn rows(&self) -> usize {
        self.pixels.nrows()
    }

    pub fn cols(&self) -> usize {
        self.pixels.ncols()
    }
}

fn snap(v: f64) -> f64 {
    if v.abs() < 1e-12 {
        0.0
    } else if (v.abs() - 1.0).abs() < 1e-12 {
        v.signum()
    } else {
        v
    }
}

/// Rotates the neighbourhood of `center` by `π/2 - angle` with bilinear
/// resampling. Blocks whose sampling disc leaves the grid are skipped.
pub fn extract_oriented_block(
    grid: &IntensityGrid,
    center: BlockCenter,
    angle: f64,
    spec: &BlockSpec,
) -> Result<OrientedBlock, BlockError> {
    let r = spec.sampling_radius();
    let (cx, cy) = (center.x, center.y);
    if cx - r < 0.0
        || cy - r < 0.0
        || cx + r > (grid.width() - 1) as f64
        || cy + r > (grid.height() - 1) as f64
    {
        return Err(BlockError::OutOfSupport);
    }
    let (sin, cos) = angle.sin_cos();
    let (sin, cos) = (snap(sin), snap(cos));
    // local column axis -> across ridges, local row axis -> along ridges
    let across = (sin, -cos);
    let along = (cos, sin);
    let (h, w) = (spec.oriented_height, spec.oriented_width);
    let (hc, wc) = ((h as f64 - 1.0) / 2.0, (w as f64 - 1.0) / 2.0);
    let mut pixels = Array2::zeros((h, w));
    for i in 0..h {
        let ly = i as f64 - hc;
        for j in 0..w {
            let lx = j as f64 - wc;
            let x = cx + lx * across.0 + ly * along.0;
            let y = cy + lx * across.1 + ly * along.1;
            pixels[[i, j]] = grid.sample_bilinear(x, y).ok_or(BlockError::OutOfSupport)?;
        }
    }
    Ok(OrientedBlock {
        pixels,
        angle,
        center: (cx, cy),
    })
}
