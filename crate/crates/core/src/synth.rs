//! Straight-stripe ridge patterns with known widths, and labeled feature
//! clouds for classifier and selection tests.
//!
//! Stripe geometry uses the same frame as block rotation: for ridge angle
//! `θ`, the across-ridge coordinate of pixel `(x, y)` is
//! `u = x·sinθ − y·cosθ` and the along-ridge coordinate is
//! `v = x·cosθ + y·sinθ`. Ridge `k` is centered at `u = k·period + phase`.
//! Widths are integers and vary per stripe row `floor(v)`.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::ingest::{DatasetManifest, IngestError, IntensityGrid, Label, Material, SampleRecord, Split};
use crate::rng::{mix, rng};

#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    pub width: usize,
    pub height: usize,
    /// Ridge period in pixels (integer so edges land on the pixel grid).
    pub period: usize,
    pub ridge_fraction: f64,
    /// Ridge-flow angle in radians, image coordinates.
    pub orientation: f64,
    /// Offset of ridge 0 along `u`.
    pub phase: f64,
    /// Per-row ridge width jitter amplitude in pixels.
    pub jitter: f64,
    /// Number of ridges that get `abnormal_jitter` instead of `jitter`.
    pub abnormal_ridges: usize,
    pub abnormal_jitter: f64,
    /// Valley minus ridge gray level.
    pub contrast: f64,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            width: 192,
            height: 192,
            period: 10,
            ridge_fraction: 0.5,
            orientation: PI / 2.0,
            phase: 0.0,
            jitter: 0.0,
            abnormal_ridges: 0,
            abnormal_jitter: 0.0,
            contrast: 160.0,
            noise_std: 0.0,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), String> {
        if self.width == 0 || self.height == 0 {
            return Err("empty image".into());
        }
        if self.period < 4 {
            return Err(format!("period {} < 4", self.period));
        }
        if !(self.ridge_fraction > 0.0 && self.ridge_fraction < 1.0) {
            return Err("ridge fraction must be in (0, 1)".into());
        }
        let half = self.period as f64 / 2.0;
        if !(self.jitter >= 0.0 && self.jitter < half) || !(self.abnormal_jitter >= 0.0 && self.abnormal_jitter < half) {
            return Err(format!("jitter must be in [0, {half})"));
        }
        if !(0.0..=255.0).contains(&self.contrast) {
            return Err("contrast must be in [0, 255]".into());
        }
        Ok(())
    }

    pub fn nominal_ridge_width(&self) -> usize {
        ((self.period as f64 * self.ridge_fraction).round() as usize).clamp(1, self.period - 1)
    }
}

/// Width oracle for a generated pattern.
#[derive(Clone, Debug)]
pub struct StripeTruth {
    period: usize,
    nominal: usize,
    phase: f64,
    jitter: f64,
    abnormal: Vec<i64>,
    abnormal_jitter: f64,
    seed: u64,
    sin: f64,
    cos: f64,
}

/// Deterministic value in `[-1, 1]` for stripe row `j`, ridge `k`.
fn unit_field(seed: u64, j: i64, k: i64) -> f64 {
    let h = mix(mix(seed, j as u64), k as u64);
    (h >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
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

impl StripeTruth {
    fn new(spec: &SynthSpec, ridges_in_view: (i64, i64)) -> Self {
        let (s, c) = spec.orientation.sin_cos();
        let mut abnormal = Vec::new();
        if spec.abnormal_ridges > 0 {
            let mut r = rng(mix(spec.seed, 0xab));
            let (lo, hi) = ridges_in_view;
            while abnormal.len() < spec.abnormal_ridges.min((hi - lo + 1).max(0) as usize) {
                let k = r.random_range(lo..=hi);
                if !abnormal.contains(&k) {
                    abnormal.push(k);
                }
            }
            abnormal.sort_unstable();
        }
        Self {
            period: spec.period,
            nominal: spec.nominal_ridge_width(),
            phase: spec.phase,
            jitter: spec.jitter,
            abnormal,
            abnormal_jitter: spec.abnormal_jitter,
            seed: spec.seed,
            sin: snap(s),
            cos: snap(c),
        }
    }

    pub fn across(&self, x: f64, y: f64) -> f64 {
        x * self.sin - y * self.cos
    }

    pub fn along(&self, x: f64, y: f64) -> f64 {
        x * self.cos + y * self.sin
    }

    pub fn abnormal_ridges(&self) -> &[i64] {
        &self.abnormal
    }

    /// Ridge `k`'s width on stripe row `j`. Growing the amplitude never
    /// moves a width back toward nominal.
    pub fn ridge_width(&self, j: i64, k: i64) -> usize {
        let amp = if self.abnormal.binary_search(&k).is_ok() { self.abnormal_jitter } else { self.jitter };
        let delta = (amp * unit_field(self.seed, j, k)).round() as i64;
        (self.nominal as i64 + delta).clamp(1, self.period as i64 - 1) as usize
    }

    fn center(&self, k: i64) -> f64 {
        k as f64 * self.period as f64 + self.phase
    }

    /// `[start, end)` of ridge `k` along `u` on stripe row `j`.
    pub fn ridge_span(&self, j: i64, k: i64) -> (f64, f64) {
        let w = self.ridge_width(j, k);
        let start = self.center(k) - (w / 2) as f64;
        (start, start + w as f64)
    }

    pub fn valley_width(&self, j: i64, k: i64) -> usize {
        let (_, end) = self.ridge_span(j, k);
        let (next, _) = self.ridge_span(j, k + 1);
        (next - end).round() as usize
    }

    pub fn is_ridge_uv(&self, u: f64, v: f64) -> bool {
        let j = v.floor() as i64;
        let k = ((u - self.phase) / self.period as f64).round() as i64;
        let (a, b) = self.ridge_span(j, k);
        a <= u && u < b
    }

    pub fn is_ridge(&self, x: f64, y: f64) -> bool {
        self.is_ridge_uv(self.across(x, y), self.along(x, y))
    }

    /// Complete runs seen by `n` unit-spaced samples starting at `u0` on
    /// the line `v`: `(is_ridge, sample count)`. Runs containing the first
    /// or last sample are dropped.
    pub fn interior_runs(&self, v: f64, u0: f64, n: usize) -> Vec<(bool, usize)> {
        let j = v.floor() as i64;
        let u1 = u0 + (n as f64 - 1.0);
        let p = self.period as f64;
        let k0 = ((u0 - self.phase) / p).floor() as i64 - 1;
        let k1 = ((u1 - self.phase) / p).ceil() as i64 + 1;
        // alternating boundaries: ridge k spans [a_k, b_k), valley k spans [b_k, a_{k+1})
        let mut intervals = Vec::new();
        for k in k0..=k1 {
            let (a, b) = self.ridge_span(j, k);
            let (next, _) = self.ridge_span(j, k + 1);
            intervals.push((true, a, b));
            intervals.push((false, b, next));
        }
        let count = |a: f64, b: f64| ((b - u0).ceil().max(0.0) - (a - u0).ceil().max(0.0)).max(0.0) as usize;
        intervals
            .into_iter()
            .filter(|&(_, a, b)| a > u0 && b <= u1)
            .map(|(r, a, b)| (r, count(a, b).min(n)))
            .filter(|&(_, c)| c > 0)
            .collect()
    }
}

/// Renders the stripe pattern and returns it with its width oracle.
pub fn gen_stripe_grid(spec: &SynthSpec) -> (IntensityGrid, StripeTruth) {
    spec.validate().expect("invalid synth spec");
    let probe = StripeTruth::new(spec, (0, 0));
    let corners = [(0.0, 0.0), (spec.width as f64, 0.0), (0.0, spec.height as f64), (spec.width as f64, spec.height as f64)];
    let us: Vec<f64> = corners.iter().map(|&(x, y)| probe.across(x, y)).collect();
    let p = spec.period as f64;
    let lo = ((us.iter().cloned().fold(f64::INFINITY, f64::min) - spec.phase) / p).floor() as i64;
    let hi = ((us.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - spec.phase) / p).ceil() as i64;
    let truth = StripeTruth::new(spec, (lo + 1, hi - 1));

    let ridge_level = 128.0 - spec.contrast / 2.0;
    let valley_level = 128.0 + spec.contrast / 2.0;
    let mut noise_rng = rng(mix(spec.seed, 0x0e15e));
    let noise = Normal::new(0.0, spec.noise_std.max(0.0)).expect("finite std");
    let grid = IntensityGrid::from_fn(spec.width, spec.height, |x, y| {
        let mut v = if truth.is_ridge(x as f64, y as f64) { ridge_level } else { valley_level };
        if spec.noise_std > 0.0 {
            v += noise.sample(&mut noise_rng);
        }
        v.round().clamp(0.0, 255.0) as u8
    });
    (grid, truth)
}

/// Gaussian class clouds: the first `informative` columns are shifted by
/// `separation` (in units of the unit noise std) for the live class.
pub fn gen_labeled_features(
    n_per_class: usize,
    dims: usize,
    informative: usize,
    separation: f64,
    seed: u64,
) -> (Vec<Vec<f64>>, Vec<Label>) {
    assert!(n_per_class >= 10, "need at least 10 samples per class");
    assert!(informative <= dims);
    let mut r = rng(seed);
    let mut x = Vec::with_capacity(2 * n_per_class);
    let mut y = Vec::with_capacity(2 * n_per_class);
    for i in 0..2 * n_per_class {
        let label = if i % 2 == 0 { Label::Live } else { Label::Fake };
        let shift = if label == Label::Live { separation / 2.0 } else { -separation / 2.0 };
        let row = (0..dims)
            .map(|d| {
                let z: f64 = StandardNormal.sample(&mut r);
                if d < informative { z + shift } else { z }
            })
            .collect();
        x.push(row);
        y.push(label);
    }
    (x, y)
}

/// Columns 0 and 1 carry the label only jointly (live iff their signs
/// agree); the remaining columns are noise.
pub fn gen_xor_features(n_per_class: usize, dims: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<Label>) {
    assert!(dims >= 2);
    let mut r = rng(seed);
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..2 * n_per_class {
        let label = if i % 2 == 0 { Label::Live } else { Label::Fake };
        let s0: f64 = if r.random_bool(0.5) { 1.0 } else { -1.0 };
        let s1 = if label == Label::Live { s0 } else { -s0 };
        let mut row = vec![s0 * r.random_range(0.5..2.0), s1 * r.random_range(0.5..2.0)];
        for _ in 2..dims {
            row.push(StandardNormal.sample(&mut r));
        }
        x.push(row);
        y.push(label);
    }
    (x, y)
}

/// A train/test set of stripe images: live images have constant widths,
/// fake images have jittered widths.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSpec {
    pub per_class: usize,
    /// Fraction of each class assigned to Train.
    pub train_fraction: f64,
    pub size: usize,
    pub period_range: (usize, usize),
    pub fake_jitter: f64,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            per_class: 200,
            train_fraction: 0.5,
            size: 192,
            period_range: (8, 12),
            fake_jitter: 2.0,
            noise_std: 5.0,
            seed: 42,
        }
    }
}

/// Spec of image `index` of class `label` in a generated dataset.
pub fn dataset_image_spec(ds: &DatasetSpec, label: Label, index: usize) -> SynthSpec {
    let stream = (index as u64) << 1 | u64::from(label == Label::Fake);
    let mut r = rng(mix(ds.seed, stream));
    let period = r.random_range(ds.period_range.0..=ds.period_range.1);
    SynthSpec {
        width: ds.size,
        height: ds.size,
        period,
        ridge_fraction: 0.5,
        orientation: r.random_range(0.0..PI),
        phase: r.random_range(0.0..period as f64),
        jitter: if label == Label::Fake { ds.fake_jitter } else { 0.0 },
        noise_std: ds.noise_std,
        seed: r.random(),
        ..SynthSpec::default()
    }
}

/// Writes a LivDet-shaped tree (`Train|Test/Live`, `Train|Test/Fake/Synthetic`)
/// of portable graymaps under `root` and returns its manifest.
pub fn write_dataset(root: impl AsRef<Path>, ds: &DatasetSpec) -> Result<DatasetManifest, IngestError> {
    let root = root.as_ref();
    let n_train = (ds.per_class as f64 * ds.train_fraction).round() as usize;
    let mut records = Vec::new();
    for split in [Split::Train, Split::Test] {
        for label in [Label::Live, Label::Fake] {
            let dir: PathBuf = match label {
                Label::Live => root.join(split.to_string()).join("Live"),
                Label::Fake => root.join(split.to_string()).join("Fake").join("Synthetic"),
            };
            std::fs::create_dir_all(&dir).map_err(|source| IngestError::Io { path: dir.clone(), source })?;
            let range = match split {
                Split::Train => 0..n_train,
                Split::Test => n_train..ds.per_class,
            };
            for i in range {
                let (grid, _) = gen_stripe_grid(&dataset_image_spec(ds, label, i));
                let path = dir.join(format!("{}_{i:04}.pgm", label.to_string().to_ascii_lowercase()));
                grid.write_pgm(&path)?;
                records.push(SampleRecord {
                    path,
                    label,
                    material: (label == Label::Fake).then(|| Material::Other("Synthetic".into())),
                    sensor: "synthetic".into(),
                    split,
                });
            }
        }
    }
    DatasetManifest::new(records)
}
