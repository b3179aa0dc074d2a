//! Gabor quality: spread of oriented filter responses per pixel.

use std::f64::consts::PI;

use ndarray::Array2;
use rustfft::num_complex::Complex;

use super::FeatureError;
use crate::blocks::OrientedBlock;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaborBankSpec {
    pub orientations: usize,
    /// Carrier wavelength in pixels.
    pub wavelength: f64,
    /// Gaussian envelope std in pixels.
    pub sigma: f64,
}

impl Default for GaborBankSpec {
    fn default() -> Self {
        Self {
            orientations: 8,
            wavelength: 8.0,
            sigma: 4.0,
        }
    }
}

impl GaborBankSpec {
    pub fn validate(&self) -> Result<(), FeatureError> {
        if self.orientations < 4 {
            return Err(FeatureError::InvalidBank(format!("{} orientations < 4", self.orientations)));
        }
        if !(4.0..=20.0).contains(&self.wavelength) {
            return Err(FeatureError::InvalidBank(format!("wavelength {} outside [4, 20]", self.wavelength)));
        }
        if self.sigma.is_nan() || self.sigma <= 0.0 {
            return Err(FeatureError::InvalidBank("sigma must be positive".into()));
        }
        Ok(())
    }

    pub fn radius(&self) -> usize {
        (2.0 * self.sigma).ceil() as usize
    }
}

/// Precomputed complex kernels, one per orientation.
#[derive(Clone, Debug)]
pub struct GaborBank {
    spec: GaborBankSpec,
    kernels: Vec<Array2<Complex<f64>>>,
}

impl GaborBank {
    pub fn new(spec: GaborBankSpec) -> Result<Self, FeatureError> {
        spec.validate()?;
        let r = spec.radius() as isize;
        let size = (2 * r + 1) as usize;
        let kernels = (0..spec.orientations)
            .map(|k| {
                let phi = PI * k as f64 / spec.orientations as f64;
                let (s, c) = phi.sin_cos();
                let mut g = Array2::from_shape_fn((size, size), |(i, j)| {
                    let (y, x) = (i as isize - r, j as isize - r);
                    let (x, y) = (x as f64, y as f64);
                    let u = x * c + y * s;
                    let env = (-(x * x + y * y) / (2.0 * spec.sigma * spec.sigma)).exp();
                    Complex::from_polar(env, 2.0 * PI * u / spec.wavelength)
                });
                // zero DC so flat regions give no response
                let env_sum: f64 = g.iter().map(|z| z.norm()).sum();
                let dc = g.sum() / env_sum;
                let envelope = g.mapv(|z| z.norm());
                g.zip_mut_with(&envelope, |z, &e| *z -= dc * e);
                g
            })
            .collect();
        Ok(Self { spec, kernels })
    }

    pub fn spec(&self) -> &GaborBankSpec {
        &self.spec
    }

    /// Response magnitudes of every filter at every pixel, borders mirrored.
    pub fn magnitudes(&self, px: &Array2<f64>) -> Vec<Array2<f64>> {
        let (h, w) = px.dim();
        let r = self.spec.radius() as isize;
        let mean = px.mean().unwrap_or(0.0);
        let reflect = |i: isize, n: usize| -> usize {
            let n = n as isize;
            if n == 1 {
                return 0;
            }
            let period = 2 * (n - 1);
            let m = i.rem_euclid(period);
            (if m < n { m } else { period - m }) as usize
        };
        self.kernels
            .iter()
            .map(|k| {
                Array2::from_shape_fn((h, w), |(y, x)| {
                    let mut acc = Complex::new(0.0, 0.0);
                    for dy in -r..=r {
                        let sy = reflect(y as isize + dy, h);
                        for dx in -r..=r {
                            let sx = reflect(x as isize + dx, w);
                            acc += k[[(dy + r) as usize, (dx + r) as usize]] * (px[[sy, sx]] - mean);
                        }
                    }
                    acc.norm()
                })
            })
            .collect()
    }

    /// Mean over pixels of the population std of the response magnitudes
    /// across orientations.
    pub fn quality(&self, block: &OrientedBlock) -> f64 {
        let mags = self.magnitudes(&block.pixels);
        let k = mags.len() as f64;
        let (h, w) = block.pixels.dim();
        if h * w == 0 {
            return 0.0;
        }
        let mut total = 0.0;
        for y in 0..h {
            for x in 0..w {
                let m = mags.iter().map(|a| a[[y, x]]).sum::<f64>() / k;
                let var = mags.iter().map(|a| (a[[y, x]] - m).powi(2)).sum::<f64>() / k;
                total += var.sqrt();
            }
        }
        total / (h * w) as f64
    }
}

pub fn gabor_quality(block: &OrientedBlock, bank: &GaborBank) -> f64 {
    bank.quality(block)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;
    use rand_distr::{Distribution, Normal};

    fn bank() -> GaborBank {
        GaborBank::new(GaborBankSpec::default()).unwrap()
    }

    fn sinusoid() -> Array2<f64> {
        Array2::from_shape_fn((32, 16), |(_, c)| 128.0 + 60.0 * (2.0 * PI * c as f64 / 8.0).sin())
    }

    #[test]
    fn constant_block_scores_zero() {
        let g = gabor_quality(&OrientedBlock::new(Array2::from_elem((32, 16), 120.0)), &bank());
        assert_eq!(g, 0.0);
    }

    #[test]
    fn kernels_have_zero_dc() {
        for k in &bank().kernels {
            assert!(k.sum().norm() < 1e-9);
        }
    }

    #[test]
    fn oriented_beats_scrambled() {
        let px = sinusoid();
        let mut vals: Vec<f64> = px.iter().copied().collect();
        vals.shuffle(&mut crate::rng::rng(7));
        let scrambled = Array2::from_shape_vec((32, 16), vals).unwrap();
        let b = bank();
        let g_sin = gabor_quality(&OrientedBlock::new(px), &b);
        let g_scr = gabor_quality(&OrientedBlock::new(scrambled), &b);
        assert!(g_sin > g_scr, "{g_sin} vs {g_scr}");
    }

    #[test]
    fn oriented_beats_white_noise() {
        let mut rng = crate::rng::rng(11);
        let n = Normal::new(128.0, 42.0).unwrap();
        let noise = Array2::from_shape_fn((32, 16), |_| n.sample(&mut rng));
        let b = bank();
        let g_sin = gabor_quality(&OrientedBlock::new(sinusoid()), &b);
        let g_noise = gabor_quality(&OrientedBlock::new(noise), &b);
        assert!(g_sin > g_noise, "{g_sin} vs {g_noise}");
    }

    #[test]
    fn bank_validation() {
        assert!(GaborBankSpec { orientations: 3, ..Default::default() }.validate().is_err());
        assert!(GaborBankSpec { wavelength: 30.0, ..Default::default() }.validate().is_err());
        assert_eq!(GaborBankSpec::default().radius(), 8);
    }
}
