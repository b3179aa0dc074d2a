//! Labeled dataset manifests built from a directory tree.
//!
//! A [`LayoutDescriptor`] maps folder patterns to (split, label) and says
//! which path component names the spoof material, so differently organised
//! releases ingest without code changes.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use walkdir::WalkDir;

use super::{material_field, parse_material_field, IngestError, Label, Material, Split};

const IMAGE_EXTENSIONS: &[&str] = &["pgm", "pnm", "png", "bmp", "tif", "tiff"];

#[derive(Clone, Debug, PartialEq, Eq)]
enum Segment {
    /// Case-insensitive alternatives, e.g. `Train|Training`.
    Literal(Vec<String>),
    Material,
    Sensor,
    /// `*`: exactly one component.
    Any,
    /// `**`: zero or more components.
    AnyDepth,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayoutRule {
    segments: Vec<Segment>,
    pub split: Split,
    pub label: Label,
}

#[derive(Default)]
struct Captures {
    material: Option<String>,
    sensor: Option<String>,
}

impl LayoutRule {
    pub fn parse(pattern: &str, split: Split, label: Label) -> Result<Self, String> {
        let segments = pattern
            .split('/')
            .filter(|s| !s.is_empty())
            .map(|s| match s {
                "{material}" => Ok(Segment::Material),
                "{sensor}" => Ok(Segment::Sensor),
                "*" => Ok(Segment::Any),
                "**" => Ok(Segment::AnyDepth),
                lit if lit.contains('{') || lit.contains('*') => {
                    Err(format!("unsupported pattern component {lit:?}"))
                }
                lit => Ok(Segment::Literal(
                    lit.split('|').map(|a| a.to_ascii_lowercase()).collect(),
                )),
            })
            .collect::<Result<Vec<_>, _>>()?;
        if segments.is_empty() {
            return Err("empty pattern".into());
        }
        Ok(Self {
            segments,
            split,
            label,
        })
    }

    fn matches(&self, dirs: &[String]) -> Option<Captures> {
        let mut caps = Captures::default();
        match_segments(&self.segments, dirs, &mut caps).then_some(caps)
    }
}

fn match_segments(segs: &[Segment], dirs: &[String], caps: &mut Captures) -> bool {
    let Some((head, rest)) = segs.split_first() else {
        return dirs.is_empty();
    };
    if *head == Segment::AnyDepth {
        return (0..=dirs.len()).any(|skip| match_segments(rest, &dirs[skip..], caps));
    }
    let Some((dir, dir_rest)) = dirs.split_first() else {
        return false;
    };
    let ok = match head {
        Segment::Literal(alts) => alts.iter().any(|a| *a == dir.to_ascii_lowercase()),
        Segment::Any => true,
        Segment::Material => {
            caps.material = Some(dir.clone());
            true
        }
        Segment::Sensor => {
            caps.sensor = Some(dir.clone());
            true
        }
        Segment::AnyDepth => unreachable!(),
    };
    ok && match_segments(rest, dir_rest, caps)
}

/// Folder-pattern → (split, label) mapping.
///
/// Text form, one rule per line, whitespace separated, `#` comments:
///
/// ```text
/// **/Train|Training/Fake|Spoof/{material}   train   fake
/// ```
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayoutDescriptor {
    pub rules: Vec<LayoutRule>,
}

impl LayoutDescriptor {
    /// `Train|Training` / `Test|Testing` above `Live|Real|Alive` and
    /// `Fake|Spoof[/<material>]`, at any depth under the root.
    pub fn livdet() -> Self {
        Self::parse(
            "**/Train|Training/Live|Real|Alive            train live\n\
             **/Train|Training/Fake|Spoof                 train fake\n\
             **/Train|Training/Fake|Spoof/{material}      train fake\n\
             **/Test|Testing/Live|Real|Alive              test  live\n\
             **/Test|Testing/Fake|Spoof                   test  fake\n\
             **/Test|Testing/Fake|Spoof/{material}        test  fake\n",
        )
        .expect("built-in layout parses")
    }

    /// Same as [`LayoutDescriptor::livdet`] with the first component naming
    /// the sensor, for roots that hold several sensors side by side.
    pub fn livdet_by_sensor() -> Self {
        Self::parse(
            "{sensor}/**/Train|Training/Live|Real|Alive          train live\n\
             {sensor}/**/Train|Training/Fake|Spoof               train fake\n\
             {sensor}/**/Train|Training/Fake|Spoof/{material}    train fake\n\
             {sensor}/**/Test|Testing/Live|Real|Alive            test  live\n\
             {sensor}/**/Test|Testing/Fake|Spoof                 test  fake\n\
             {sensor}/**/Test|Testing/Fake|Spoof/{material}      test  fake\n",
        )
        .expect("built-in layout parses")
    }

    pub fn parse(text: &str) -> Result<Self, IngestError> {
        let mut rules = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| IngestError::Layout { line: i + 1, msg };
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [pattern, split, label] = fields[..] else {
                return Err(err(format!("expected `pattern split label`, got {line:?}")));
            };
            let split = split.parse().map_err(err)?;
            let label = label.parse().map_err(err)?;
            rules.push(LayoutRule::parse(pattern, split, label).map_err(err)?);
        }
        if rules.is_empty() {
            return Err(IngestError::Layout {
                line: 0,
                msg: "no rules".into(),
            });
        }
        Ok(Self { rules })
    }

    /// Resolves a preset name (`livdet`, `livdet-by-sensor`) or reads a file.
    pub fn load(spec: &str) -> Result<Self, IngestError> {
        match spec {
            "livdet" | "default" => Ok(Self::livdet()),
            "livdet-by-sensor" => Ok(Self::livdet_by_sensor()),
            path => {
                let text = std::fs::read_to_string(path).map_err(|source| IngestError::Io {
                    path: PathBuf::from(path),
                    source,
                })?;
                Self::parse(&text)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampleRecord {
    pub path: PathBuf,
    pub label: Label,
    /// `None` exactly when `label == Live`.
    pub material: Option<Material>,
    pub sensor: String,
    pub split: Split,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DatasetManifest {
    records: Vec<SampleRecord>,
    counts: BTreeMap<(Split, Label), usize>,
}

impl DatasetManifest {
    pub fn new(records: Vec<SampleRecord>) -> Result<Self, IngestError> {
        for (i, r) in records.iter().enumerate() {
            if (r.label == Label::Live) != r.material.is_none() {
                return Err(IngestError::Manifest {
                    line: i + 1,
                    msg: format!("{}: material must be present iff the sample is fake", r.path.display()),
                });
            }
        }
        let mut counts = BTreeMap::new();
        for r in &records {
            *counts.entry((r.split, r.label)).or_insert(0) += 1;
        }
        Ok(Self { records, counts })
    }

    pub fn records(&self) -> &[SampleRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn count(&self, split: Split, label: Label) -> usize {
        self.counts.get(&(split, label)).copied().unwrap_or(0)
    }

    pub fn counts(&self) -> &BTreeMap<(Split, Label), usize> {
        &self.counts
    }

    /// Records restricted to one split, keeping order.
    pub fn filter_split(&self, split: Split) -> DatasetManifest {
        DatasetManifest::new(self.records.iter().filter(|r| r.split == split).cloned().collect())
            .expect("subset of a valid manifest is valid")
    }

    /// Tab-separated text, header line prefixed `#`.
    pub fn to_text(&self) -> String {
        let mut out = String::from("#path\tlabel\tmaterial\tsensor\tsplit\n");
        for r in &self.records {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                r.path.display(),
                r.label,
                material_field(r.material.as_ref()),
                r.sensor,
                r.split
            ));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, IngestError> {
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            let err = |msg: String| IngestError::Manifest { line: i + 1, msg };
            let fields: Vec<&str> = line.split('\t').collect();
            let [path, label, material, sensor, split] = fields[..] else {
                return Err(err(format!("expected 5 tab-separated fields, got {}", fields.len())));
            };
            let label: Label = label.parse().map_err(err)?;
            records.push(SampleRecord {
                path: PathBuf::from(path),
                label,
                material: parse_material_field(label, material).map_err(err)?,
                sensor: sensor.to_string(),
                split: split.parse().map_err(err)?,
            });
        }
        Self::new(records)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, IngestError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| IngestError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }
}

fn is_image_file(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

/// Walks `root` and assigns every image file exactly one record.
///
/// Files matching no rule, or rules that disagree, are reported together.
/// Byte-identical files in both splits are rejected as duplicates.
pub fn build_manifest(
    root: impl AsRef<Path>,
    layout: &LayoutDescriptor,
    default_sensor: &str,
) -> Result<DatasetManifest, IngestError> {
    let root = root.as_ref();
    let mut records = Vec::new();
    let mut ambiguous = Vec::new();
    let mut unmatched = Vec::new();

    let walker = WalkDir::new(root).sort_by_file_name().follow_links(true);
    for entry in walker {
        let entry = entry.map_err(|e| IngestError::Io {
            path: e.path().map(Path::to_path_buf).unwrap_or_else(|| root.to_path_buf()),
            source: e.into(),
        })?;
        if !entry.file_type().is_file() || !is_image_file(entry.path()) {
            continue;
        }
        let rel = entry.path().strip_prefix(root).unwrap_or(entry.path());
        let dirs: Vec<String> = rel
            .parent()
            .map(|p| {
                p.components()
                    .map(|c| c.as_os_str().to_string_lossy().into_owned())
                    .collect()
            })
            .unwrap_or_default();

        let mut candidates: Vec<SampleRecord> = Vec::new();
        for rule in &layout.rules {
            if let Some(caps) = rule.matches(&dirs) {
                let material = match rule.label {
                    Label::Live => None,
                    Label::Fake => Some(caps.material.as_deref().map_or(Material::Unknown, Material::parse)),
                };
                let rec = SampleRecord {
                    path: entry.path().to_path_buf(),
                    label: rule.label,
                    material,
                    sensor: caps.sensor.unwrap_or_else(|| default_sensor.to_string()),
                    split: rule.split,
                };
                if !candidates.contains(&rec) {
                    candidates.push(rec);
                }
            }
        }
        match candidates.len() {
            0 => unmatched.push(entry.path().to_path_buf()),
            1 => records.push(candidates.pop().unwrap()),
            _ => ambiguous.push(entry.path().to_path_buf()),
        }
    }

    if !ambiguous.is_empty() {
        return Err(IngestError::AmbiguousLabel(ambiguous));
    }
    if !unmatched.is_empty() {
        return Err(IngestError::Unmatched(unmatched));
    }
    if records.is_empty() {
        return Err(IngestError::EmptyTree(root.to_path_buf()));
    }
    check_split_overlap(&records)?;
    DatasetManifest::new(records)
}

fn check_split_overlap(records: &[SampleRecord]) -> Result<(), IngestError> {
    let mut seen: HashMap<Vec<u8>, (Split, &Path)> = HashMap::new();
    for r in records {
        let bytes = std::fs::read(&r.path).map_err(|source| IngestError::Io {
            path: r.path.clone(),
            source,
        })?;
        let digest = Sha256::digest(&bytes).to_vec();
        match seen.get(&digest) {
            Some((split, first)) if *split != r.split => {
                return Err(IngestError::DuplicateSample {
                    first: first.to_path_buf(),
                    second: r.path.clone(),
                });
            }
            Some(_) => log::warn!("{} duplicates another sample in the same split", r.path.display()),
            None => {
                seen.insert(digest, (r.split, &r.path));
            }
        }
    }
    Ok(())
}

/// Per-split live counts and per-material fake counts.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SplitSummary {
    pub live: BTreeMap<Split, usize>,
    pub fake: BTreeMap<Split, BTreeMap<String, usize>>,
}

impl SplitSummary {
    pub fn fake_total(&self, split: Split) -> usize {
        self.fake.get(&split).map_or(0, |m| m.values().sum())
    }
}

impl fmt::Display for SplitSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for split in [Split::Train, Split::Test] {
            let live = self.live.get(&split).copied().unwrap_or(0);
            let fakes = self.fake.get(&split);
            if live == 0 && fakes.is_none() {
                continue;
            }
            writeln!(f, "{split}")?;
            writeln!(f, "  Live: {live}")?;
            writeln!(f, "  Fake: {}", self.fake_total(split))?;
            for (material, n) in fakes.into_iter().flatten() {
                writeln!(f, "    {material}: {n}")?;
            }
        }
        Ok(())
    }
}

pub fn summarize(manifest: &DatasetManifest) -> SplitSummary {
    let mut s = SplitSummary::default();
    for r in manifest.records() {
        match &r.material {
            None => *s.live.entry(r.split).or_insert(0) += 1,
            Some(m) => {
                *s.fake
                    .entry(r.split)
                    .or_default()
                    .entry(m.to_string())
                    .or_insert(0) += 1
            }
        }
    }
    s
}
