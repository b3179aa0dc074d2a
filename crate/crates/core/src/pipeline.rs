//! Stage wiring for the command-line front end. Every stage reads and
//! writes plain text so stages can be run and checked one at a time.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::blocks::{BlockSpec, Polarity};
use crate::eval::{evaluate, threshold_sweep, EvalReport, ScoredSample, SweepCurve};
use crate::exec::{with_workers, Exec};
use crate::features::{extract_all, GaborBank, GaborBankSpec, QualityVector, QUALITY_DIM};
use crate::forest::{predict_score, train, ForestModel, ForestParams, LIVDET_THRESHOLD};
use crate::ingest::{load_image, material_field, parse_material_field, DatasetManifest, SampleRecord, Split};
use crate::rng::{mix, STREAM_SELECT, STREAM_TRAIN};
use crate::select::{sffs, Action, FeatureSubset, Objective};

/// Failure classes, mapped to process exit codes by the binary.
#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("leakage guard: {0}")]
    Leakage(String),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Usage(_) => 1,
            PipelineError::Data(_) => 2,
            PipelineError::Leakage(_) => 3,
        }
    }
}

fn data<E: std::fmt::Display>(e: E) -> PipelineError {
    PipelineError::Data(e.to_string())
}

/// Everything a run depends on. Module seeds derive from `seed`:
/// selection uses `mix(seed, STREAM_SELECT)`, the final forest
/// `mix(seed, STREAM_TRAIN)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub block: BlockSpec,
    pub gabor: GaborBankSpec,
    pub forest: ForestParams,
    pub folds: usize,
    pub seed: u64,
    pub threshold: f64,
    /// Worker threads for image-level parallelism; 0 = all cores.
    pub workers: usize,
    pub exec: Exec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            block: BlockSpec::default(),
            gabor: GaborBankSpec::default(),
            forest: ForestParams::default(),
            folds: 5,
            seed: 42,
            threshold: LIVDET_THRESHOLD,
            workers: 0,
            exec: Exec::default(),
        }
    }
}

impl RunConfig {
    pub fn with_invert(mut self, invert: bool) -> Self {
        self.block.polarity = if invert { Polarity::BrightRidges } else { Polarity::DarkRidges };
        self
    }

    pub fn objective(&self) -> Objective {
        Objective {
            folds: self.folds,
            seed: mix(self.seed, STREAM_SELECT),
            forest: self.forest,
        }
    }

    pub fn train_params(&self) -> ForestParams {
        ForestParams {
            seed: mix(self.seed, STREAM_TRAIN),
            ..self.forest
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        self.block.validate().map_err(|e| PipelineError::Usage(e.to_string()))?;
        self.gabor.validate().map_err(|e| PipelineError::Usage(e.to_string()))?;
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(PipelineError::Usage(format!("threshold {} outside [0, 1]", self.threshold)));
        }
        if self.folds < 2 {
            return Err(PipelineError::Usage("need at least 2 folds".into()));
        }
        if self.forest.n_trees == 0 {
            return Err(PipelineError::Usage("need at least 1 tree".into()));
        }
        Ok(())
    }
}

/// One line of the feature file.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureRow {
    pub record: SampleRecord,
    pub vector: QualityVector,
    pub exclusions: BTreeMap<String, usize>,
}

pub fn feature_header() -> String {
    let mut s = String::from("#path\tlabel\tmaterial\tsensor\tsplit");
    for n in QualityVector::NAMES {
        s.push('\t');
        s.push_str(n);
    }
    s.push_str("\texcluded\n");
    s
}

/// Tab-separated: path, label, material, sensor, split, the 13 values, and a
/// trailing `#reason=count,...` field with the block exclusion tallies.
pub fn features_to_text(rows: &[FeatureRow]) -> String {
    let mut s = feature_header();
    for r in rows {
        let rec = &r.record;
        let tallies: Vec<String> = r.exclusions.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{}\t#{}",
            rec.path.display(),
            rec.label,
            material_field(rec.material.as_ref()),
            rec.sensor,
            rec.split,
            r.vector,
            tallies.join(",")
        );
    }
    s
}

pub fn parse_features(text: &str) -> Result<Vec<FeatureRow>, PipelineError> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let err = |m: String| PipelineError::Data(format!("feature file line {}: {m}", i + 1));
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 5 + QUALITY_DIM + 1 {
            return Err(err(format!("expected {} fields, got {}", 6 + QUALITY_DIM, f.len())));
        }
        let label = f[1].parse().map_err(err)?;
        let mut v = [0.0f64; QUALITY_DIM];
        for (k, slot) in v.iter_mut().enumerate() {
            *slot = f[5 + k].parse().map_err(|_| err(format!("bad value {:?}", f[5 + k])))?;
            if !slot.is_finite() {
                return Err(err(format!("non-finite value in {}", QualityVector::NAMES[k])));
            }
        }
        let tail = f[5 + QUALITY_DIM]
            .strip_prefix('#')
            .ok_or_else(|| err("exclusion field must start with #".into()))?;
        let mut exclusions = BTreeMap::new();
        for kv in tail.split(',').filter(|s| !s.is_empty()) {
            let (k, n) = kv.split_once('=').ok_or_else(|| err(format!("bad tally {kv:?}")))?;
            exclusions.insert(k.to_string(), n.parse().map_err(|_| err(format!("bad tally {kv:?}")))?);
        }
        rows.push(FeatureRow {
            record: SampleRecord {
                path: PathBuf::from(f[0]),
                label,
                material: parse_material_field(label, f[2]).map_err(err)?,
                sensor: f[3].to_string(),
                split: f[4].parse().map_err(err)?,
            },
            vector: QualityVector(v),
            exclusions,
        });
    }
    Ok(rows)
}

pub fn read_text(path: &Path) -> Result<String, PipelineError> {
    std::fs::read_to_string(path).map_err(|e| PipelineError::Data(format!("{}: {e}", path.display())))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| PipelineError::Data(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, text).map_err(|e| PipelineError::Data(format!("{}: {e}", path.display())))
}

pub fn read_features(path: &Path) -> Result<Vec<FeatureRow>, PipelineError> {
    parse_features(&read_text(path)?)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExtractOutcome {
    pub rows: Vec<FeatureRow>,
    pub failures: Vec<(PathBuf, String)>,
}

impl ExtractOutcome {
    pub fn failure_rate(&self) -> f64 {
        let n = self.rows.len() + self.failures.len();
        if n == 0 {
            0.0
        } else {
            self.failures.len() as f64 / n as f64
        }
    }
}

/// Largest tolerated fraction of images that fail extraction.
pub const MAX_EXTRACT_FAILURE_RATE: f64 = 0.10;

/// Extracts one feature row per manifest record, in manifest order.
/// Images are processed in parallel on `config.workers` threads; blocks of
/// one image run sequentially inside its task.
pub fn cmd_extract(manifest: &DatasetManifest, config: &RunConfig) -> Result<ExtractOutcome, PipelineError> {
    config.validate()?;
    if manifest.is_empty() {
        return Err(PipelineError::Data("empty manifest".into()));
    }
    let bank = GaborBank::new(config.gabor).map_err(|e| PipelineError::Usage(e.to_string()))?;
    let results = with_workers(config.workers, || {
        config.exec.map(manifest.records(), |rec| {
            let grid = load_image(&rec.path).map_err(|e| e.to_string())?;
            let inner = if config.exec.is_parallel() { Exec::Sequential } else { config.exec };
            extract_all(&grid, &config.block, &bank, inner).map_err(|e| e.to_string())
        })
    });
    let mut out = ExtractOutcome { rows: Vec::new(), failures: Vec::new() };
    for (rec, r) in manifest.records().iter().zip(results) {
        match r {
            Ok(ex) => out.rows.push(FeatureRow {
                record: rec.clone(),
                vector: ex.vector,
                exclusions: ex.exclusions.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            }),
            Err(msg) => {
                log::warn!("{}: {msg}", rec.path.display());
                out.failures.push((rec.path.clone(), msg));
            }
        }
    }
    Ok(out)
}

fn matrix(rows: &[FeatureRow]) -> (Vec<Vec<f64>>, Vec<crate::ingest::Label>) {
    (
        rows.iter().map(|r| r.vector.0.to_vec()).collect(),
        rows.iter().map(|r| r.record.label).collect(),
    )
}

pub fn mask_string(mask: &[bool]) -> String {
    mask.iter().map(|&m| if m { '1' } else { '0' }).collect()
}

pub fn parse_mask(s: &str) -> Result<Vec<bool>, PipelineError> {
    if s.len() != QUALITY_DIM || !s.bytes().all(|b| b == b'0' || b == b'1') {
        return Err(PipelineError::Data(format!("mask must be {QUALITY_DIM} characters of 0/1, got {s:?}")));
    }
    let m: Vec<bool> = s.bytes().map(|b| b == b'1').collect();
    if !m.iter().any(|&b| b) {
        return Err(PipelineError::Data("mask selects no feature".into()));
    }
    Ok(m)
}

/// SFFS over train-split rows. Any test-split row is refused.
pub fn cmd_select(rows: &[FeatureRow], config: &RunConfig, max_dim: usize) -> Result<FeatureSubset, PipelineError> {
    config.validate()?;
    if let Some(r) = rows.iter().find(|r| r.record.split == Split::Test) {
        return Err(PipelineError::Leakage(format!(
            "feature file contains test-split rows (first: {}); selection must only see training data",
            r.record.path.display()
        )));
    }
    if rows.is_empty() {
        return Err(PipelineError::Data("no training rows".into()));
    }
    let (x, y) = matrix(rows);
    with_workers(config.workers, || sffs(&x, &y, &config.objective(), max_dim, config.exec)).map_err(data)
}

pub fn subset_to_text(s: &FeatureSubset) -> String {
    let mut t = String::new();
    let _ = writeln!(t, "mask\t{}", mask_string(&s.mask));
    let _ = writeln!(t, "score\t{}", s.score);
    let names: Vec<&str> = s.indices().iter().map(|&i| QualityVector::NAMES[i]).collect();
    let _ = writeln!(t, "features\t{}", names.join(","));
    let _ = writeln!(t, "best_after_step\t{}", s.steps_to_best);
    let _ = writeln!(t, "#step\taction\tfeature\tname\tscore");
    for h in &s.history {
        let _ = writeln!(t, "{}\t{}\t{}\t{}\t{}", h.step, h.action, h.feature, QualityVector::NAMES[h.feature], h.score);
    }
    t
}

/// Reads the mask from a subset report.
pub fn parse_subset_mask(text: &str) -> Result<Vec<bool>, PipelineError> {
    let line = text
        .lines()
        .find_map(|l| l.strip_prefix("mask\t"))
        .ok_or_else(|| PipelineError::Data("subset report has no mask line".into()))?;
    parse_mask(line.trim())
}

/// Trains the final forest on the train-split rows under `mask`; test rows
/// are ignored.
pub fn cmd_train(rows: &[FeatureRow], mask: &[bool], config: &RunConfig) -> Result<ForestModel, PipelineError> {
    config.validate()?;
    let train_rows: Vec<FeatureRow> = rows.iter().filter(|r| r.record.split == Split::Train).cloned().collect();
    let skipped = rows.len() - train_rows.len();
    if skipped > 0 {
        log::info!("ignoring {skipped} test-split rows");
    }
    let (x, y) = matrix(&train_rows);
    train(&x, &y, &config.train_params(), mask, config.exec).map_err(data)
}

/// Scores rows of `split` (all rows when `None`).
pub fn cmd_score(model: &ForestModel, rows: &[FeatureRow], split: Option<Split>) -> Result<Vec<ScoredSample>, PipelineError> {
    rows.iter()
        .filter(|r| split.is_none_or(|s| r.record.split == s))
        .map(|r| {
            Ok(ScoredSample {
                path: r.record.path.display().to_string(),
                score: predict_score(model, &r.vector.0).map_err(data)?,
                label: r.record.label,
                material: r.record.material.clone(),
                sensor: r.record.sensor.clone(),
            })
        })
        .collect()
}

pub fn cmd_eval(scores: &[ScoredSample], config: &RunConfig) -> Result<EvalReport, PipelineError> {
    evaluate(scores, config.threshold).map_err(data)
}

pub fn cmd_sweep(scores: &[ScoredSample]) -> Result<SweepCurve, PipelineError> {
    threshold_sweep(scores).map_err(data)
}

/// Artifacts of a whole run, in the order the stages produce them.
#[derive(Clone, Debug, PartialEq)]
pub struct RunArtifacts {
    pub features: String,
    pub subset: String,
    pub model: String,
    pub scores: String,
    pub report: String,
    pub sweep: String,
    pub extract_failures: usize,
}

/// extract -> select (train split) -> train -> score (test split) -> eval.
pub fn run_all(manifest: &DatasetManifest, config: &RunConfig, max_dim: usize) -> Result<(RunArtifacts, EvalReport), PipelineError> {
    let ex = cmd_extract(manifest, config)?;
    if ex.failure_rate() > MAX_EXTRACT_FAILURE_RATE {
        return Err(PipelineError::Data(format!("{} of {} images failed extraction", ex.failures.len(), manifest.len())));
    }
    let train_rows: Vec<FeatureRow> = ex.rows.iter().filter(|r| r.record.split == Split::Train).cloned().collect();
    let subset = cmd_select(&train_rows, config, max_dim)?;
    let model = cmd_train(&train_rows, &subset.mask, config)?;
    let scores = cmd_score(&model, &ex.rows, Some(Split::Test))?;
    let report = cmd_eval(&scores, config)?;
    let sweep = cmd_sweep(&scores)?;
    Ok((
        RunArtifacts {
            features: features_to_text(&ex.rows),
            subset: subset_to_text(&subset),
            model: model.to_string(),
            scores: crate::eval::scores_to_text(&scores),
            report: report.to_text(),
            sweep: sweep.to_text(),
            extract_failures: ex.failures.len(),
        },
        report,
    ))
}

/// Replays a subset's history and checks it lands on the reported mask.
pub fn history_is_consistent(s: &FeatureSubset) -> bool {
    let mut m = vec![false; s.mask.len()];
    for h in &s.history[..s.steps_to_best] {
        m[h.feature] = h.action == Action::Add;
    }
    m == s.mask
}
