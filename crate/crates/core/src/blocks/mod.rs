//! Block partitioning, orientation normalization, binarization and
//! ridge/valley width profiles.
//!
//! Every block is rotated so its ridges run vertically; widths are then
//! measured along horizontal lines of the rotated block.

mod binarize;
mod orientation;
mod profile;

pub use binarize::{binarize, BinaryBlock, ThresholdPlane};
pub use orientation::{
    estimate_orientation, extract_oriented_block, orientation_of, GradientCovariance,
    OrientedBlock,
};
pub use profile::{run_length_profile, ProfileRow, RidgeValleyProfile};

use thiserror::Error;

use crate::ingest::IntensityGrid;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum BlockError {
    #[error("invalid block spec: {0}")]
    InvalidSpec(String),
    #[error("no orientation: zero gradient energy")]
    NoOrientation,
    #[error("sampling disc leaves the image")]
    OutOfSupport,
    #[error("degenerate block: constant intensity")]
    DegenerateBlock,
    #[error("unprofilable block: {0}")]
    Unprofilable(String),
}

impl BlockError {
    /// Short key used in exclusion tallies.
    pub fn reason(&self) -> &'static str {
        match self {
            BlockError::InvalidSpec(_) => "invalid-spec",
            BlockError::NoOrientation => "no-orientation",
            BlockError::OutOfSupport => "edge",
            BlockError::DegenerateBlock => "degenerate",
            BlockError::Unprofilable(_) => "unprofilable",
        }
    }
}

/// Which intensity phase is ridge.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Polarity {
    /// Ridges darker than valleys (optical sensors).
    #[default]
    DarkRidges,
    BrightRidges,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlockSpec {
    /// Side of the square tiling blocks, in pixels.
    pub block_size: usize,
    /// Columns of the rotated block (across ridges).
    pub oriented_width: usize,
    /// Rows of the rotated block (along ridges).
    pub oriented_height: usize,
    /// Minimum population intensity variance for a foreground block.
    pub fg_variance_threshold: f64,
    pub polarity: Polarity,
}

impl Default for BlockSpec {
    fn default() -> Self {
        Self {
            block_size: 32,
            oriented_width: 16,
            oriented_height: 32,
            fg_variance_threshold: 100.0,
            polarity: Polarity::DarkRidges,
        }
    }
}

impl BlockSpec {
    /// Radius of the disc every rotated sample is drawn from: the
    /// circumscribed circle of a tiling block.
    pub fn sampling_radius(&self) -> f64 {
        self.block_size as f64 * std::f64::consts::SQRT_2 / 2.0
    }

    pub fn validate(&self) -> Result<(), BlockError> {
        if self.block_size < 16 {
            return Err(BlockError::InvalidSpec(format!(
                "block_size {} < 16",
                self.block_size
            )));
        }
        if self.oriented_width < 2 || self.oriented_height < 2 {
            return Err(BlockError::InvalidSpec("oriented block must be at least 2x2".into()));
        }
        let diag = (self.oriented_width as f64).hypot(self.oriented_height as f64);
        if diag > 2.0 * self.sampling_radius() {
            return Err(BlockError::InvalidSpec(format!(
                "oriented {}x{} block (diagonal {diag:.2}) does not fit the sampling disc of radius {:.2}",
                self.oriented_height,
                self.oriented_width,
                self.sampling_radius()
            )));
        }
        if self.fg_variance_threshold.is_nan() || self.fg_variance_threshold < 0.0 {
            return Err(BlockError::InvalidSpec("foreground threshold must be non-negative".into()));
        }
        Ok(())
    }
}

/// A tiling block and its center in pixel coordinates (pixel centers at
/// integers).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlockCenter {
    pub col: usize,
    pub row: usize,
    pub x: f64,
    pub y: f64,
}

impl BlockCenter {
    pub fn of(col: usize, row: usize, block_size: usize) -> Self {
        let half = (block_size as f64 - 1.0) / 2.0;
        Self {
            col,
            row,
            x: (col * block_size) as f64 + half,
            y: (row * block_size) as f64 + half,
        }
    }
}

/// Population intensity variance of one tiling block.
pub fn block_variance(grid: &IntensityGrid, col: usize, row: usize, block_size: usize) -> f64 {
    let (x0, y0) = (col * block_size, row * block_size);
    let n = (block_size * block_size) as f64;
    let (mut sum, mut sum_sq) = (0.0f64, 0.0f64);
    for y in y0..y0 + block_size {
        for x in x0..x0 + block_size {
            let v = f64::from(grid.get(x, y));
            sum += v;
            sum_sq += v * v;
        }
    }
    let mean = sum / n;
    (sum_sq / n - mean * mean).max(0.0)
}

/// Centers of the non-overlapping blocks whose variance exceeds the
/// foreground threshold, in row-major block order.
pub fn segment_foreground(grid: &IntensityGrid, spec: &BlockSpec) -> Vec<BlockCenter> {
    let b = spec.block_size;
    let (cols, rows) = (grid.width() / b, grid.height() / b);
    let mut out = Vec::new();
    for row in 0..rows {
        for col in 0..cols {
            if block_variance(grid, col, row, b) > spec.fg_variance_threshold {
                out.push(BlockCenter::of(col, row, b));
            }
        }
    }
    out
}
