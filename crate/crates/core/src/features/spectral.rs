//! Frequency domain analysis of the ridge signature.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::FeatureError;
use crate::blocks::OrientedBlock;

/// Weight of the two bins next to the dominant frequency.
pub const FDA_C: f64 = 0.3;

/// Shortest signature the ratio is defined on.
pub const MIN_SIGNATURE: usize = 8;

/// Column means of a vertically oriented block: each column is a line along
/// one ridge phase, so the signature traces the ridge-valley alternation.
pub fn ridge_signature(block: &OrientedBlock) -> Vec<f64> {
    let n = block.rows() as f64;
    block.pixels.columns().into_iter().map(|c| c.sum() / n).collect()
}

/// Amplitudes `A(F)` for `F = 0..=N/2`.
pub fn amplitude_spectrum(signal: &[f64]) -> Vec<f64> {
    let mut buf: Vec<Complex<f64>> = signal.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf.iter().take(signal.len() / 2 + 1).map(|z| z.norm()).collect()
}

/// FDA of a 1-D signature.
///
/// `(A(Fmax) + C·(A(Fmax−1) + A(Fmax+1))) / Σ_{F=1}^{N/2} A(F)`, with `Fmax`
/// the strongest non-DC bin (lowest on ties). When `Fmax` is the first or
/// last bin a neighbour is missing and the value is 1.
pub fn fda_signature(signal: &[f64]) -> Result<f64, FeatureError> {
    let n = signal.len();
    if n < MIN_SIGNATURE {
        return Err(FeatureError::ShortSignature(n));
    }
    let mut amp = amplitude_spectrum(signal);
    let top = amp[1..].iter().cloned().fold(0.0, f64::max);
    if top.is_nan() || top <= 0.0 {
        return Err(FeatureError::FlatSpectrum);
    }
    // rounding leakage from the transform, not signal
    for a in amp.iter_mut() {
        if *a <= top * 1e-12 {
            *a = 0.0;
        }
    }
    let last = n / 2;
    let mut fmax = 1;
    for f in 2..=last {
        if amp[f] > amp[fmax] {
            fmax = f;
        }
    }
    if fmax == 1 || fmax == last {
        return Ok(1.0);
    }
    let total: f64 = amp[1..=last].iter().sum();
    Ok((amp[fmax] + FDA_C * (amp[fmax - 1] + amp[fmax + 1])) / total)
}

pub fn fda(block: &OrientedBlock) -> Result<f64, FeatureError> {
    fda_signature(&ridge_signature(block))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    /// Direct O(N²) transform as an independent check of the FFT path.
    fn naive_amplitudes(x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..=n / 2)
            .map(|f| {
                let (mut re, mut im) = (0.0, 0.0);
                for (t, v) in x.iter().enumerate() {
                    let w = -2.0 * PI * (f * t) as f64 / n as f64;
                    re += v * w.cos();
                    im += v * w.sin();
                }
                re.hypot(im)
            })
            .collect()
    }

    fn tone(n: usize, k: f64, amp: f64, phase: f64) -> Vec<f64> {
        (0..n).map(|t| amp * (2.0 * PI * k * t as f64 / n as f64 + phase).cos()).collect()
    }

    #[test]
    fn fft_matches_naive_dft() {
        let x: Vec<f64> = (0..16).map(|i| ((i * 37 % 11) as f64).sqrt()).collect();
        for (a, b) in amplitude_spectrum(&x).iter().zip(naive_amplitudes(&x)) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn pure_tone_is_one() {
        let x: Vec<f64> = tone(16, 3.0, 50.0, 0.4).iter().map(|v| v + 128.0).collect();
        assert_eq!(fda_signature(&x).unwrap(), 1.0);
    }

    #[test]
    fn boundary_peak_is_one() {
        assert_eq!(fda_signature(&tone(16, 1.0, 10.0, 0.0)).unwrap(), 1.0);
        let mut x = tone(16, 8.0, 10.0, 0.0);
        for (t, v) in x.iter_mut().enumerate() {
            *v += 0.5 * (2.0 * PI * 3.0 * t as f64 / 16.0).sin();
        }
        assert_eq!(fda_signature(&x).unwrap(), 1.0);
    }

    #[test]
    fn two_equal_tones_split_the_energy() {
        let x: Vec<f64> = tone(32, 3.0, 20.0, 0.0)
            .iter()
            .zip(tone(32, 11.0, 20.0, 1.0))
            .map(|(a, b)| a + b)
            .collect();
        let a = naive_amplitudes(&x);
        let fmax = 3; // equal peaks, lower index wins
        let want = (a[fmax] + FDA_C * (a[fmax - 1] + a[fmax + 1])) / a[1..].iter().sum::<f64>();
        let got = fda_signature(&x).unwrap();
        assert!((got - 0.5).abs() <= 0.05, "{got}");
        assert!((got - want).abs() < 1e-9);
    }

    #[test]
    fn neighbour_weighting() {
        // energy at bins 3 (peak), 2 and 4
        let x: Vec<f64> = (0..16)
            .map(|t| {
                let t = t as f64;
                8.0 * (2.0 * PI * 3.0 * t / 16.0).cos()
                    + 2.0 * (2.0 * PI * 2.0 * t / 16.0).cos()
                    + 4.0 * (2.0 * PI * 4.0 * t / 16.0).cos()
            })
            .collect();
        let got = fda_signature(&x).unwrap();
        let want = (8.0 + 0.3 * (2.0 + 4.0)) / 14.0;
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn short_and_flat_signatures() {
        assert_eq!(fda_signature(&[1.0; 7]), Err(FeatureError::ShortSignature(7)));
        assert_eq!(fda_signature(&[5.0; 16]), Err(FeatureError::FlatSpectrum));
    }

    #[test]
    fn block_signature_follows_columns() {
        let px = Array2::from_shape_fn((32, 16), |(r, c)| 100.0 + 40.0 * (2.0 * PI * 2.0 * c as f64 / 16.0).cos() + r as f64);
        let b = OrientedBlock::new(px);
        let sig = ridge_signature(&b);
        assert_eq!(sig.len(), 16);
        assert_eq!(fda(&b).unwrap(), 1.0);
    }

    proptest! {
        #[test]
        fn fda_in_unit_interval(x in proptest::collection::vec(-100.0f64..100.0, 8..40)) {
            if let Ok(v) = fda_signature(&x) {
                prop_assert!(v > 0.0 && v <= 1.0 + 1e-12, "{}", v);
            }
        }
    }
}
