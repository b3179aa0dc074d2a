//! The eight block-level quality features and their 13-slot image summary.

mod gabor;
mod ocl;
mod spectral;
mod width;

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

pub use gabor::{gabor_quality, GaborBank, GaborBankSpec};
pub use ocl::{ocl, ocl_from_covariance};
pub use spectral::{amplitude_spectrum, fda, fda_signature, ridge_signature, FDA_C, MIN_SIGNATURE};
pub use width::{abnormal_counts, population_std, rvc, rws, vws, T_W};

use crate::blocks::{
    binarize, estimate_orientation, extract_oriented_block, run_length_profile, segment_foreground,
    BlockCenter, BlockError, BlockSpec,
};
use crate::exec::Exec;
use crate::ingest::IntensityGrid;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum FeatureError {
    #[error("unprofilable: {0}")]
    Unprofilable(String),
    #[error("signature of length {0} is too short")]
    ShortSignature(usize),
    #[error("flat spectrum")]
    FlatSpectrum,
    #[error("invalid Gabor bank: {0}")]
    InvalidBank(String),
    #[error(transparent)]
    Block(#[from] BlockError),
    #[error("insufficient foreground: {0}")]
    InsufficientForeground(String),
}

/// Per-block feature values. `None` marks a feature whose stage failed on
/// this block; aggregation skips it for that feature only.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LocalFeatureSet {
    pub rws: Option<f64>,
    pub vws: Option<f64>,
    pub r_ab: Option<usize>,
    pub v_ab: Option<usize>,
    pub rvc: Option<f64>,
    pub fda: Option<f64>,
    pub ocl: Option<f64>,
    pub gabor: Option<f64>,
}

/// Slot positions inside [`QualityVector`].
pub mod slot {
    pub const RWS_MU: usize = 0;
    pub const VWS_MU: usize = 1;
    pub const RVC_MU: usize = 2;
    pub const FDA_MU: usize = 3;
    pub const OCL_MU: usize = 4;
    pub const RWS_SD: usize = 5;
    pub const VWS_SD: usize = 6;
    pub const RVC_SD: usize = 7;
    pub const FDA_SD: usize = 8;
    pub const OCL_SD: usize = 9;
    pub const RAB_MU: usize = 10;
    pub const VAB_MU: usize = 11;
    pub const G_MU: usize = 12;
}

pub const QUALITY_DIM: usize = 13;

/// The image-level vector `Q`.
///
/// Slot order: RWSμ VWSμ RVCμ FDAμ OCLμ RWSσ VWSσ RVCσ FDAσ OCLσ Rabμ Vabμ Gμ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QualityVector(pub [f64; QUALITY_DIM]);

impl QualityVector {
    pub const NAMES: [&'static str; QUALITY_DIM] = [
        "RWS_mu", "VWS_mu", "RVC_mu", "FDA_mu", "OCL_mu", "RWS_sd", "VWS_sd", "RVC_sd", "FDA_sd", "OCL_sd",
        "Rab_mu", "Vab_mu", "G_mu",
    ];

    /// Row number of each slot in the feature-selection report ordering,
    /// which lists the features as RWSμ RWSσ VWSμ VWSσ Rabμ Vabμ RVCμ RVCσ
    /// FDAμ FDAσ OCLμ OCLσ Gμ (1-based).
    pub const TABLE_ROW: [usize; QUALITY_DIM] = [1, 3, 7, 9, 11, 2, 4, 8, 10, 12, 5, 6, 13];

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Slot for a 1-based table row.
    pub fn slot_of_table_row(row: usize) -> Option<usize> {
        Self::TABLE_ROW.iter().position(|&r| r == row)
    }
}

impl fmt::Display for QualityVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("\t")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sample_std(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// Mean of all eight features and sample std of RWS, VWS, RVC, FDA, OCL,
/// each over the blocks where that feature is defined.
pub fn aggregate(locals: &[LocalFeatureSet]) -> Result<QualityVector, FeatureError> {
    fn collect(
        locals: &[LocalFeatureSet],
        name: &str,
        get: impl Fn(&LocalFeatureSet) -> Option<f64>,
    ) -> Result<Vec<f64>, FeatureError> {
        let v: Vec<f64> = locals.iter().filter_map(get).collect();
        if v.len() < 2 {
            return Err(FeatureError::InsufficientForeground(format!(
                "{name} defined on {} block(s)",
                v.len()
            )));
        }
        Ok(v)
    }
    let rws = collect(locals, "RWS", |l| l.rws)?;
    let vws = collect(locals, "VWS", |l| l.vws)?;
    let rvc = collect(locals, "RVC", |l| l.rvc)?;
    let fda = collect(locals, "FDA", |l| l.fda)?;
    let ocl = collect(locals, "OCL", |l| l.ocl)?;
    let rab = collect(locals, "Rab", |l| l.r_ab.map(|v| v as f64))?;
    let vab = collect(locals, "Vab", |l| l.v_ab.map(|v| v as f64))?;
    let g = collect(locals, "G", |l| l.gabor)?;
    Ok(QualityVector([
        mean(&rws),
        mean(&vws),
        mean(&rvc),
        mean(&fda),
        mean(&ocl),
        sample_std(&rws),
        sample_std(&vws),
        sample_std(&rvc),
        sample_std(&fda),
        sample_std(&ocl),
        mean(&rab),
        mean(&vab),
        mean(&g),
    ]))
}

/// Everything computed for one foreground block.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockFeatures {
    pub center: BlockCenter,
    pub angle: Option<f64>,
    pub features: LocalFeatureSet,
    /// Reasons for every stage that failed on this block.
    pub failures: Vec<&'static str>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Extraction {
    pub vector: QualityVector,
    pub blocks: Vec<BlockFeatures>,
    /// Failure reason -> number of blocks.
    pub exclusions: BTreeMap<&'static str, usize>,
}

/// Runs orientation, rotation, binarization, profiling and all features on
/// one block. Never fails: failed stages leave their features empty.
pub fn block_features(grid: &IntensityGrid, center: BlockCenter, spec: &BlockSpec, bank: &GaborBank) -> BlockFeatures {
    let mut out = BlockFeatures {
        center,
        angle: None,
        features: LocalFeatureSet::default(),
        failures: Vec::new(),
    };
    let oriented = match estimate_orientation(grid, center, spec)
        .and_then(|angle| extract_oriented_block(grid, center, angle, spec))
    {
        Ok(b) => b,
        Err(e) => {
            out.failures.push(e.reason());
            return out;
        }
    };
    out.angle = Some(oriented.angle);
    let f = &mut out.features;
    match fda(&oriented) {
        Ok(v) => f.fda = Some(v),
        Err(_) => out.failures.push("fda"),
    }
    f.ocl = Some(ocl(&oriented));
    f.gabor = Some(bank.quality(&oriented));

    let profiled = binarize(&oriented, spec.polarity).and_then(|bin| run_length_profile(&bin).map(|p| (bin, p)));
    match profiled {
        Ok((bin, profile)) => {
            f.rws = rws(&profile).ok();
            f.vws = vws(&profile).ok();
            if f.vws.is_none() {
                out.failures.push("no-valley");
            }
            let (r_ab, v_ab) = abnormal_counts(&profile, T_W);
            f.r_ab = Some(r_ab);
            f.v_ab = Some(v_ab);
            f.rvc = rvc(&bin, &profile).ok();
        }
        Err(e) => out.failures.push(e.reason()),
    }
    out
}

/// Full per-image extraction: foreground segmentation, per-block features,
/// aggregation.
pub fn extract_all(
    grid: &IntensityGrid,
    spec: &BlockSpec,
    bank: &GaborBank,
    exec: Exec,
) -> Result<Extraction, FeatureError> {
    spec.validate()?;
    let centers = segment_foreground(grid, spec);
    if centers.is_empty() {
        return Err(FeatureError::InsufficientForeground("no foreground blocks".into()));
    }
    let blocks = exec.map(&centers, |&c| block_features(grid, c, spec, bank));
    let mut exclusions = BTreeMap::new();
    for b in &blocks {
        for r in &b.failures {
            *exclusions.entry(*r).or_insert(0) += 1;
        }
    }
    let locals: Vec<LocalFeatureSet> = blocks.iter().map(|b| b.features.clone()).collect();
    let vector = aggregate(&locals)?;
    Ok(Extraction {
        vector,
        blocks,
        exclusions,
    })
}
