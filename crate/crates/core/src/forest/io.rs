//! Text model format: a header, one preorder node list per tree, and a
//! sha256 line over everything before it.

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{ForestError, ForestModel, ForestParams, Node, TrainingDigest, Tree};

const MAGIC: &str = "ridgelive-forest 1";

fn mask_string(mask: &[bool]) -> String {
    mask.iter().map(|&m| if m { '1' } else { '0' }).collect()
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(|| "none".into(), |v| v.to_string())
}

pub(crate) fn body(model: &ForestModel) -> String {
    let p = &model.params;
    let d = &model.digest;
    let mut s = String::new();
    let _ = writeln!(s, "{MAGIC}");
    let _ = writeln!(s, "trees\t{}", p.n_trees);
    let _ = writeln!(s, "max_depth\t{}", opt(p.max_depth));
    let _ = writeln!(s, "min_leaf\t{}", p.min_leaf);
    let _ = writeln!(s, "mtry\t{}", opt(p.mtry));
    let _ = writeln!(s, "bootstrap\t{}", p.bootstrap_fraction);
    let _ = writeln!(s, "seed\t{}", p.seed);
    let _ = writeln!(s, "mask\t{}", mask_string(&d.mask));
    let _ = writeln!(s, "samples\t{}\t{}\t{}", d.samples, d.live, d.fake);
    let _ = writeln!(s, "oob\t{}", opt(model.oob_accuracy));
    for (i, t) in model.trees.iter().enumerate() {
        let _ = writeln!(s, "tree\t{i}\t{}", t.nodes.len());
        for n in &t.nodes {
            match n {
                Node::Split { feature, threshold, .. } => {
                    let _ = writeln!(s, "S\t{feature}\t{threshold}");
                }
                Node::Leaf { live_fraction } => {
                    let _ = writeln!(s, "L\t{live_fraction}");
                }
            }
        }
    }
    s
}

pub(crate) fn model_to_string(model: &ForestModel) -> String {
    let b = body(model);
    let digest = hex::encode(Sha256::digest(b.as_bytes()));
    format!("{b}sha256\t{digest}\n")
}

pub fn write_model(model: &ForestModel) -> String {
    model_to_string(model)
}

pub fn save_model(model: &ForestModel, path: impl AsRef<Path>) -> Result<(), ForestError> {
    let path = path.as_ref();
    std::fs::write(path, model_to_string(model)).map_err(|source| ForestError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ForestModel, ForestError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ForestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_model(&text)
}

/// Parses a model, checking the digest first.
pub fn parse_model(text: &str) -> Result<ForestModel, ForestError> {
    let trimmed = text.strip_suffix('\n').unwrap_or(text);
    let (body, last) = match trimmed.rfind('\n') {
        Some(i) => (&text[..i + 1], &trimmed[i + 1..]),
        None => return Err(ForestError::Integrity("missing digest line".into())),
    };
    let Some(want) = last.strip_prefix("sha256\t") else {
        return Err(ForestError::Integrity("missing digest line (truncated file?)".into()));
    };
    let got = hex::encode(Sha256::digest(body.as_bytes()));
    if got != want {
        return Err(ForestError::Integrity(format!("digest mismatch: file says {want}, content hashes to {got}")));
    }

    let mut cur = Cursor { lines: body.lines().enumerate().collect(), pos: 0 };
    let first = cur.line()?;
    if first.1 != MAGIC {
        return Err(ForestError::Format { line: 1, msg: format!("not a forest model: {:?}", first.1) });
    }
    let n_trees: usize = cur.value("trees")?;
    let max_depth = cur.optional("max_depth")?;
    let min_leaf = cur.value("min_leaf")?;
    let mtry = cur.optional("mtry")?;
    let bootstrap_fraction = cur.value("bootstrap")?;
    let seed = cur.value("seed")?;
    let (l, f) = cur.fields("mask")?;
    let mask_s = f.first().copied().unwrap_or("");
    if mask_s.is_empty() || !mask_s.bytes().all(|b| b == b'0' || b == b'1') {
        return Err(ForestError::Format { line: l, msg: format!("bad mask {mask_s:?}") });
    }
    let mask: Vec<bool> = mask_s.bytes().map(|b| b == b'1').collect();
    let (l, f) = cur.fields("samples")?;
    let digest = TrainingDigest {
        samples: num(l, f.first())?,
        live: num(l, f.get(1))?,
        fake: num(l, f.get(2))?,
        mask,
    };
    let oob_accuracy = cur.optional("oob")?;

    let mut trees = Vec::with_capacity(n_trees);
    for t in 0..n_trees {
        let (l, f) = cur.fields("tree")?;
        let idx: usize = num(l, f.first())?;
        if idx != t {
            return Err(ForestError::Format { line: l, msg: format!("expected tree {t}, got {idx}") });
        }
        let count: usize = num(l, f.get(1))?;
        let mut raw = Vec::with_capacity(count);
        for _ in 0..count {
            let (l, line) = cur.line()?;
            let f: Vec<&str> = line.split('\t').collect();
            let node = match f[0] {
                "S" => RawNode::Split(num(l, f.get(1))?, num(l, f.get(2))?),
                "L" => RawNode::Leaf(num(l, f.get(1))?),
                other => return Err(ForestError::Format { line: l, msg: format!("unknown node kind {other:?}") }),
            };
            raw.push((l, node));
        }
        trees.push(link(raw, digest.mask.len())?);
    }
    if let Some(&(i, extra)) = cur.lines.get(cur.pos) {
        return Err(ForestError::Format { line: i + 1, msg: format!("unexpected line {extra:?}") });
    }
    Ok(ForestModel {
        params: ForestParams {
            n_trees,
            max_depth,
            min_leaf,
            mtry,
            bootstrap_fraction,
            seed,
        },
        digest,
        trees,
        oob_accuracy,
    })
}

fn num<T: std::str::FromStr>(line: usize, s: Option<&&str>) -> Result<T, ForestError> {
    s.and_then(|s| s.parse().ok()).ok_or_else(|| ForestError::Format {
        line,
        msg: format!("bad value {s:?}"),
    })
}

struct Cursor<'a> {
    lines: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn line(&mut self) -> Result<(usize, &'a str), ForestError> {
        let &(i, l) = self.lines.get(self.pos).ok_or(ForestError::Format {
            line: self.pos + 1,
            msg: "unexpected end of model".into(),
        })?;
        self.pos += 1;
        Ok((i + 1, l))
    }

    fn fields(&mut self, key: &str) -> Result<(usize, Vec<&'a str>), ForestError> {
        let (n, line) = self.line()?;
        let mut f = line.split('\t');
        match f.next() {
            Some(k) if k == key => Ok((n, f.collect())),
            other => Err(ForestError::Format { line: n, msg: format!("expected {key:?}, got {other:?}") }),
        }
    }

    fn value<T: std::str::FromStr>(&mut self, key: &str) -> Result<T, ForestError> {
        let (n, f) = self.fields(key)?;
        num(n, f.first())
    }

    fn optional<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>, ForestError> {
        let (n, f) = self.fields(key)?;
        match f.first() {
            Some(&"none") => Ok(None),
            other => num(n, other).map(Some),
        }
    }
}

enum RawNode {
    Split(usize, f64),
    Leaf(f64),
}

/// Rebuilds right-child links from a preorder list.
fn link(raw: Vec<(usize, RawNode)>, arity: usize) -> Result<Tree, ForestError> {
    fn go(raw: &[(usize, RawNode)], i: usize, nodes: &mut Vec<Node>, arity: usize) -> Result<usize, ForestError> {
        let Some((line, n)) = raw.get(i) else {
            return Err(ForestError::Format { line: 0, msg: "tree ends early".into() });
        };
        match *n {
            RawNode::Leaf(v) => {
                if !(0.0..=1.0).contains(&v) {
                    return Err(ForestError::Format { line: *line, msg: format!("leaf value {v} outside [0, 1]") });
                }
                nodes.push(Node::Leaf { live_fraction: v });
                Ok(i + 1)
            }
            RawNode::Split(feature, threshold) => {
                if feature >= arity {
                    return Err(ForestError::Format { line: *line, msg: format!("feature {feature} outside mask") });
                }
                let at = nodes.len();
                nodes.push(Node::Split { feature, threshold, right: 0 });
                let after_left = go(raw, i + 1, nodes, arity)?;
                let right_at = nodes.len();
                if let Node::Split { right, .. } = &mut nodes[at] {
                    *right = right_at;
                }
                go(raw, after_left, nodes, arity)
            }
        }
    }
    let mut nodes = Vec::with_capacity(raw.len());
    let end = go(&raw, 0, &mut nodes, arity)?;
    if end != raw.len() {
        return Err(ForestError::Format { line: raw[end].0, msg: "trailing nodes".into() });
    }
    Ok(Tree { nodes })
}
