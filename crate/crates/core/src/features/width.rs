//! Width-based features: RWS, VWS, abnormal counts and ridge-valley clarity.

use ndarray::{Array2, ArrayView1};

use super::FeatureError;
use crate::blocks::{BinaryBlock, RidgeValleyProfile};

/// Width deviation above which a ridge or valley counts as abnormal.
pub const T_W: f64 = 1.03;

/// Population (1/n) standard deviation.
pub fn population_std(v: ArrayView1<'_, f64>) -> f64 {
    let n = v.len() as f64;
    if v.is_empty() {
        return 0.0;
    }
    let m = v.sum() / n;
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n).sqrt()
}

fn smoothness(widths: &Array2<f64>, what: &str) -> Result<f64, FeatureError> {
    if widths.nrows() < 2 || widths.ncols() == 0 {
        return Err(FeatureError::Unprofilable(format!(
            "{what}: {}x{} width matrix",
            widths.nrows(),
            widths.ncols()
        )));
    }
    let total: f64 = widths.columns().into_iter().map(population_std).sum();
    Ok(total / widths.ncols() as f64)
}

/// Ridge width smoothness: mean over ridges of the per-ridge width std.
pub fn rws(profile: &RidgeValleyProfile) -> Result<f64, FeatureError> {
    smoothness(&profile.rw, "ridges")
}

/// Valley width smoothness.
pub fn vws(profile: &RidgeValleyProfile) -> Result<f64, FeatureError> {
    smoothness(&profile.vw, "valleys")
}

/// Ridges and valleys whose width std exceeds `t_w`.
pub fn abnormal_counts(profile: &RidgeValleyProfile, t_w: f64) -> (usize, usize) {
    let count = |m: &Array2<f64>| m.columns().into_iter().filter(|c| population_std(*c) > t_w).count();
    (count(&profile.rw), count(&profile.vw))
}

/// Ridge-valley clarity: fraction of profiled pixels whose class disagrees
/// with a nominal stripe pattern of mean ridge width and mean valley width.
///
/// Each retained row's nominal pattern starts at its first interior run and
/// with that run's class; pixels are classified by their centers.
pub fn rvc(bin: &BinaryBlock, profile: &RidgeValleyProfile) -> Result<f64, FeatureError> {
    let n = profile.valid_rows();
    if n < 2 || profile.ridge_count() == 0 {
        return Err(FeatureError::Unprofilable("rvc needs a valid profile".into()));
    }
    let rw_sum = profile.rw.sum();
    let vw_sum = profile.vw.sum();
    let total = rw_sum + vw_sum;
    let mean_r = rw_sum / profile.rw.len() as f64;
    let mean_v = if profile.vw.is_empty() { 0.0 } else { vw_sum / profile.vw.len() as f64 };
    let period = mean_r + mean_v;
    let (first, first_len) = if profile.first_is_ridge { (true, mean_r) } else { (false, mean_v) };

    let mut wrong = 0usize;
    for (i, pr) in profile.rows.iter().enumerate() {
        let span = (profile.rw.row(i).sum() + profile.vw.row(i).sum()) as usize;
        for k in 0..span {
            let phase = (k as f64 + 0.5).rem_euclid(period);
            let nominal_ridge = if phase < first_len { first } else { !first };
            if bin.mask[[pr.row, pr.start + k]] != nominal_ridge {
                wrong += 1;
            }
        }
    }
    Ok(wrong as f64 / total)
}
