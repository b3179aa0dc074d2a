//! Ferrlive, Ferrfake, ACE, per-material breakdown and the 0.01-step
//! threshold sweep with EER and best-ACE points.
//!
//! A sample is classified live iff its score is strictly above the
//! threshold, so a live sample scored exactly at the threshold is an error.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::forest::LIVDET_THRESHOLD;
use crate::ingest::{material_field, parse_material_field, Label, Material};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no {0} samples")]
    MissingClass(Label),
    #[error("score file line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoredSample {
    pub path: String,
    pub score: f64,
    pub label: Label,
    /// `None` exactly when live.
    pub material: Option<Material>,
    pub sensor: String,
}

/// Raw error counts at one threshold.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ErrorCounts {
    pub live_errors: usize,
    pub live: usize,
    pub fake_errors: usize,
    pub fake: usize,
}

impl ErrorCounts {
    pub fn at(samples: &[ScoredSample], threshold: f64) -> Self {
        let mut c = ErrorCounts::default();
        for s in samples {
            match s.label {
                Label::Live => {
                    c.live += 1;
                    c.live_errors += usize::from(s.score <= threshold);
                }
                Label::Fake => {
                    c.fake += 1;
                    c.fake_errors += usize::from(s.score > threshold);
                }
            }
        }
        c
    }

    fn require_both(&self) -> Result<(), EvalError> {
        if self.live == 0 {
            return Err(EvalError::MissingClass(Label::Live));
        }
        if self.fake == 0 {
            return Err(EvalError::MissingClass(Label::Fake));
        }
        Ok(())
    }

    pub fn ferrlive(&self) -> f64 {
        100.0 * self.live_errors as f64 / self.live as f64
    }

    pub fn ferrfake(&self) -> f64 {
        100.0 * self.fake_errors as f64 / self.fake as f64
    }

    /// `|Ferrlive − Ferrfake|` scaled to an exact integer.
    fn gap_key(&self) -> u128 {
        let a = self.live_errors as u128 * self.fake as u128;
        let b = self.fake_errors as u128 * self.live as u128;
        a.abs_diff(b)
    }

    /// `Ferrlive + Ferrfake` scaled to an exact integer.
    fn ace_key(&self) -> u128 {
        self.live_errors as u128 * self.fake as u128 + self.fake_errors as u128 * self.live as u128
    }
}

/// `(Ferrlive %, Ferrfake %)` at `threshold`.
pub fn ferr_rates(samples: &[ScoredSample], threshold: f64) -> Result<(f64, f64), EvalError> {
    let c = ErrorCounts::at(samples, threshold);
    c.require_both()?;
    Ok((c.ferrlive(), c.ferrfake()))
}

/// Average classification error.
pub fn ace(ferrlive: f64, ferrfake: f64) -> f64 {
    (ferrlive + ferrfake) / 2.0
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaterialRate {
    pub errors: usize,
    pub total: usize,
    pub ferrfake: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaterialReport {
    /// Pooled over all fakes.
    pub overall: f64,
    /// Keyed by material name; fakes without one go under `unknown`.
    pub per_material: BTreeMap<String, MaterialRate>,
}

pub fn per_material_report(samples: &[ScoredSample], threshold: f64) -> Result<MaterialReport, EvalError> {
    let mut per: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    let (mut err, mut total) = (0, 0);
    for s in samples.iter().filter(|s| s.label == Label::Fake) {
        let key = s.material.as_ref().map_or_else(|| Material::Unknown.to_string(), |m| m.to_string());
        let e = per.entry(key).or_default();
        let wrong = usize::from(s.score > threshold);
        e.0 += wrong;
        e.1 += 1;
        err += wrong;
        total += 1;
    }
    if total == 0 {
        return Err(EvalError::MissingClass(Label::Fake));
    }
    Ok(MaterialReport {
        overall: 100.0 * err as f64 / total as f64,
        per_material: per
            .into_iter()
            .map(|(k, (e, t))| {
                (
                    k,
                    MaterialRate {
                        errors: e,
                        total: t,
                        ferrfake: 100.0 * e as f64 / t as f64,
                    },
                )
            })
            .collect(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepPoint {
    pub threshold: f64,
    pub counts: ErrorCounts,
    pub ferrlive: f64,
    pub ferrfake: f64,
    pub ace: f64,
}

pub const SWEEP_STEPS: usize = 100;

/// 101 points, thresholds `k/100` for `k = 0..=100`.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepCurve {
    pub points: Vec<SweepPoint>,
}

pub fn sweep_threshold(k: usize) -> f64 {
    k as f64 / SWEEP_STEPS as f64
}

pub fn threshold_sweep(samples: &[ScoredSample]) -> Result<SweepCurve, EvalError> {
    ErrorCounts::at(samples, 0.0).require_both()?;
    let points = (0..=SWEEP_STEPS)
        .map(|k| {
            let t = sweep_threshold(k);
            let c = ErrorCounts::at(samples, t);
            let (fl, ff) = (c.ferrlive(), c.ferrfake());
            SweepPoint {
                threshold: t,
                counts: c,
                ferrlive: fl,
                ferrfake: ff,
                ace: ace(fl, ff),
            }
        })
        .collect();
    Ok(SweepCurve { points })
}

impl SweepCurve {
    /// One line per threshold: threshold, Ferrlive, Ferrfake, ACE.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for p in &self.points {
            let _ = writeln!(s, "{:.2}\t{:.4}\t{:.4}\t{:.4}", p.threshold, p.ferrlive, p.ferrfake, p.ace);
        }
        s
    }
}

fn argmin_by_key(curve: &SweepCurve, key: impl Fn(&SweepPoint) -> u128) -> &SweepPoint {
    let mut best = &curve.points[0];
    for p in &curve.points[1..] {
        if key(p) < key(best) {
            best = p;
        }
    }
    best
}

/// Grid point where the two error rates are closest (lowest threshold on
/// ties); the EER is the mean of the two rates there.
pub fn eer_point(curve: &SweepCurve) -> (f64, f64) {
    let p = argmin_by_key(curve, |p| p.counts.gap_key());
    (p.threshold, ace(p.ferrlive, p.ferrfake))
}

/// Grid point with the lowest ACE (lowest threshold on ties).
pub fn best_ace_point(curve: &SweepCurve) -> (f64, f64) {
    let p = argmin_by_key(curve, |p| p.counts.ace_key());
    (p.threshold, p.ace)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SensorReport {
    pub sensor: String,
    pub threshold: f64,
    pub counts: ErrorCounts,
    pub ferrlive: f64,
    pub materials: MaterialReport,
    pub ace: f64,
    pub best: (f64, f64),
    pub eer: (f64, f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub sensors: Vec<SensorReport>,
}

/// Per-sensor report at `threshold`, with sweep-derived best-ACE and EER.
pub fn evaluate(samples: &[ScoredSample], threshold: f64) -> Result<EvalReport, EvalError> {
    let mut by_sensor: BTreeMap<&str, Vec<ScoredSample>> = BTreeMap::new();
    for s in samples {
        by_sensor.entry(s.sensor.as_str()).or_default().push(s.clone());
    }
    if by_sensor.is_empty() {
        return Err(EvalError::MissingClass(Label::Live));
    }
    let mut sensors = Vec::new();
    for (sensor, group) in by_sensor {
        let counts = ErrorCounts::at(&group, threshold);
        counts.require_both()?;
        let materials = per_material_report(&group, threshold)?;
        let curve = threshold_sweep(&group)?;
        sensors.push(SensorReport {
            sensor: sensor.to_string(),
            threshold,
            counts,
            ferrlive: counts.ferrlive(),
            ace: ace(counts.ferrlive(), materials.overall),
            materials,
            best: best_ace_point(&curve),
            eer: eer_point(&curve),
        });
    }
    Ok(EvalReport { sensors })
}

impl EvalReport {
    pub fn average_ace(&self) -> f64 {
        self.sensors.iter().map(|s| s.ace).sum::<f64>() / self.sensors.len() as f64
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# error rates (%) at threshold");
        let _ = writeln!(s, "sensor\tthreshold\tlive\tfake\tFerrlive\tFerrfake\tACE");
        for r in &self.sensors {
            let _ = writeln!(
                s,
                "{}\t{:.2}\t{}\t{}\t{:.2}\t{:.2}\t{:.2}",
                r.sensor, r.threshold, r.counts.live, r.counts.fake, r.ferrlive, r.materials.overall, r.ace
            );
        }
        let _ = writeln!(s, "average\t\t\t\t\t\t{:.2}", self.average_ace());
        let _ = writeln!(s);
        let _ = writeln!(s, "# Ferrfake (%) per material");
        let _ = writeln!(s, "sensor\tmaterial\terrors\ttotal\tFerrfake");
        for r in &self.sensors {
            for (m, rate) in &r.materials.per_material {
                let _ = writeln!(s, "{}\t{}\t{}\t{}\t{:.2}", r.sensor, m, rate.errors, rate.total, rate.ferrfake);
            }
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "# ACE (%) at best, EER and LivDet thresholds");
        let _ = writeln!(s, "sensor\tbest_t\tbest_ACE\teer_t\tEER\tlivdet_t\tlivdet_ACE");
        for r in &self.sensors {
            let _ = writeln!(
                s,
                "{}\t{:.2}\t{:.2}\t{:.2}\t{:.2}\t{:.2}\t{:.2}",
                r.sensor, r.best.0, r.best.1, r.eer.0, r.eer.1, LIVDET_THRESHOLD, r.ace
            );
        }
        s
    }
}

/// Score file: `path label material sensor score`, tab-separated, `#`
/// comments.
pub fn scores_to_text(samples: &[ScoredSample]) -> String {
    let mut s = String::from("#path\tlabel\tmaterial\tsensor\tscore\n");
    for x in samples {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}",
            x.path,
            x.label,
            material_field(x.material.as_ref()),
            x.sensor,
            x.score
        );
    }
    s
}

pub fn parse_scores(text: &str) -> Result<Vec<ScoredSample>, EvalError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let err = |msg: String| EvalError::Parse { line: i + 1, msg };
        let f: Vec<&str> = line.split('\t').collect();
        let [path, label, material, sensor, score] = f[..] else {
            return Err(err(format!("expected 5 fields, got {}", f.len())));
        };
        let label: Label = label.parse().map_err(err)?;
        let score: f64 = score.parse().map_err(|_| err(format!("bad score {score:?}")))?;
        if !(0.0..=1.0).contains(&score) {
            return Err(err(format!("score {score} outside [0, 1]")));
        }
        out.push(ScoredSample {
            path: path.to_string(),
            score,
            label,
            material: parse_material_field(label, material).map_err(err)?,
            sensor: sensor.to_string(),
        });
    }
    Ok(out)
}

pub fn read_scores(path: impl AsRef<Path>) -> Result<Vec<ScoredSample>, EvalError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_scores(&text)
}
