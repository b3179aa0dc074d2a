//! Random forest over quality vectors: bootstrap, Gini splits on a random
//! feature subset per node, leaves holding the live fraction.

mod io;
mod tree;

use std::fmt;

use thiserror::Error;

pub use io::{load_model, parse_model, save_model, write_model};
pub use tree::{Node, Tree};

use crate::exec::Exec;
use crate::ingest::Label;
use crate::rng::{mix, rng};
use rand::Rng;
use tree::{Builder, TreeConfig};

#[derive(Debug, Error)]
pub enum ForestError {
    #[error("single-class training data ({0} only)")]
    SingleClass(Label),
    #[error("empty feature mask")]
    EmptyMask,
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("arity mismatch: expected {expected} values, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("invalid forest parameters: {0}")]
    InvalidParams(String),
    #[error("model integrity error: {0}")]
    Integrity(String),
    #[error("model format error at line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Features tried per split; `None` means `ceil(sqrt(d))` over the
    /// selected features.
    pub mtry: Option<usize>,
    /// Bootstrap sample size as a fraction of the training set, drawn with
    /// replacement.
    pub bootstrap_fraction: f64,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: None,
            min_leaf: 1,
            mtry: None,
            bootstrap_fraction: 1.0,
            seed: 0,
        }
    }
}

impl ForestParams {
    pub fn effective_mtry(&self, d: usize) -> usize {
        self.mtry.unwrap_or_else(|| (d as f64).sqrt().ceil() as usize)
    }

    pub fn validate(&self, d: usize) -> Result<(), ForestError> {
        let bad = |m: String| Err(ForestError::InvalidParams(m));
        if self.n_trees == 0 {
            return bad("tree count must be at least 1".into());
        }
        if self.min_leaf == 0 {
            return bad("min leaf size must be at least 1".into());
        }
        let m = self.effective_mtry(d);
        if m == 0 || m > d {
            return bad(format!("features per split {m} outside [1, {d}]"));
        }
        if !(self.bootstrap_fraction > 0.0 && self.bootstrap_fraction <= 1.0) {
            return bad("bootstrap fraction must be in (0, 1]".into());
        }
        Ok(())
    }
}

/// What the model was trained on.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrainingDigest {
    pub samples: usize,
    pub live: usize,
    pub fake: usize,
    pub mask: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForestModel {
    pub params: ForestParams,
    pub digest: TrainingDigest,
    pub trees: Vec<Tree>,
    /// Out-of-bag accuracy over samples left out by at least one tree.
    pub oob_accuracy: Option<f64>,
}

impl ForestModel {
    /// Expected input length: the full mask length, unselected slots
    /// included.
    pub fn arity(&self) -> usize {
        self.digest.mask.len()
    }
}

/// Trains a forest on the columns of `x` selected by `mask`.
/// Tree `i` draws from `mix(params.seed, i)`.
pub fn train(
    x: &[Vec<f64>],
    labels: &[Label],
    params: &ForestParams,
    mask: &[bool],
    exec: Exec,
) -> Result<ForestModel, ForestError> {
    let n = x.len();
    if n != labels.len() {
        return Err(ForestError::Arity { expected: n, got: labels.len() });
    }
    if n < 2 {
        return Err(ForestError::TooFewSamples(n));
    }
    for row in x {
        if row.len() != mask.len() {
            return Err(ForestError::Arity { expected: mask.len(), got: row.len() });
        }
    }
    let features: Vec<usize> = mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i).collect();
    if features.is_empty() {
        return Err(ForestError::EmptyMask);
    }
    params.validate(features.len())?;
    let y: Vec<bool> = labels.iter().map(|&l| l == Label::Live).collect();
    let live = y.iter().filter(|&&v| v).count();
    if live == 0 {
        return Err(ForestError::SingleClass(Label::Fake));
    }
    if live == n {
        return Err(ForestError::SingleClass(Label::Live));
    }
    let mtry = params.effective_mtry(features.len());
    let n_boot = ((n as f64 * params.bootstrap_fraction).round() as usize).max(1);

    let grown: Vec<(Tree, Vec<bool>)> = exec.map_range(params.n_trees, |t| {
        let mut r = rng(mix(params.seed, t as u64));
        let mut in_bag = vec![false; n];
        let mut samples: Vec<usize> = (0..n_boot)
            .map(|_| {
                let i = r.random_range(0..n);
                in_bag[i] = true;
                i
            })
            .collect();
        let tree = Builder {
            x,
            y: &y,
            cfg: TreeConfig {
                features: &features,
                mtry,
                max_depth: params.max_depth,
                min_leaf: params.min_leaf,
            },
            rng: &mut r,
            nodes: Vec::new(),
        }
        .build(&mut samples);
        (tree, in_bag)
    });

    let mut oob_sum = vec![0.0; n];
    let mut oob_n = vec![0usize; n];
    for (tree, in_bag) in &grown {
        for i in (0..n).filter(|&i| !in_bag[i]) {
            oob_sum[i] += tree.predict(&x[i]);
            oob_n[i] += 1;
        }
    }
    let scored: Vec<usize> = (0..n).filter(|&i| oob_n[i] > 0).collect();
    let oob_accuracy = (!scored.is_empty()).then(|| {
        let right = scored
            .iter()
            .filter(|&&i| (oob_sum[i] / oob_n[i] as f64 > 0.5) == y[i])
            .count();
        right as f64 / scored.len() as f64
    });

    Ok(ForestModel {
        params: *params,
        digest: TrainingDigest {
            samples: n,
            live,
            fake: n - live,
            mask: mask.to_vec(),
        },
        trees: grown.into_iter().map(|(t, _)| t).collect(),
        oob_accuracy,
    })
}

/// Mean over trees of the leaf live fraction.
pub fn predict_score(model: &ForestModel, x: &[f64]) -> Result<f64, ForestError> {
    if x.len() != model.arity() {
        return Err(ForestError::Arity { expected: model.arity(), got: x.len() });
    }
    let total: f64 = model.trees.iter().map(|t| t.predict(x)).sum();
    Ok(total / model.trees.len() as f64)
}

/// Live iff `score > threshold`.
pub fn classify(score: f64, threshold: f64) -> Label {
    if score > threshold {
        Label::Live
    } else {
        Label::Fake
    }
}

pub const LIVDET_THRESHOLD: f64 = 0.5;

impl fmt::Display for ForestModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&io::model_to_string(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::gen_labeled_features;
    use proptest::prelude::*;

    fn line_data(n: usize) -> (Vec<Vec<f64>>, Vec<Label>) {
        let x: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64 - n as f64 / 2.0 + 0.5]).collect();
        let y = x.iter().map(|r| if r[0] > 0.0 { Label::Live } else { Label::Fake }).collect();
        (x, y)
    }

    fn params(seed: u64) -> ForestParams {
        ForestParams { n_trees: 25, seed, ..Default::default() }
    }

    #[test]
    fn separable_training_accuracy() {
        let (x, y) = line_data(40);
        let m = train(&x, &y, &params(1), &[true], Exec::Sequential).unwrap();
        for (r, l) in x.iter().zip(&y) {
            assert_eq!(classify(predict_score(&m, r).unwrap(), 0.5), *l);
        }
        assert!(predict_score(&m, &[100.0]).unwrap() >= 0.9);
    }

    #[test]
    fn deterministic_model_bytes() {
        let (x, y) = gen_labeled_features(30, 4, 2, 2.0, 5);
        let mask = [true, false, true, true];
        let a = train(&x, &y, &params(9), &mask, Exec::Sequential).unwrap();
        let b = train(&x, &y, &params(9), &mask, Exec::Parallel).unwrap();
        assert_eq!(a.to_string(), b.to_string());
        for t in &a.trees {
            assert!(t.split_features().all(|f| mask[f]));
        }
    }

    #[test]
    fn training_errors() {
        let x = vec![vec![1.0], vec![2.0]];
        let r = train(&x, &[Label::Live, Label::Live], &params(0), &[true], Exec::Sequential);
        assert!(matches!(r, Err(ForestError::SingleClass(Label::Live))));
        assert!(r.unwrap_err().to_string().contains("single-class"));
        let r = train(&x, &[Label::Live, Label::Fake], &params(0), &[false], Exec::Sequential);
        assert!(matches!(r, Err(ForestError::EmptyMask)));
        let m = train(&x, &[Label::Live, Label::Fake], &params(0), &[true], Exec::Sequential).unwrap();
        assert!(matches!(predict_score(&m, &[1.0, 2.0]), Err(ForestError::Arity { .. })));
    }

    #[test]
    fn classify_rule() {
        assert_eq!(classify(0.5, LIVDET_THRESHOLD), Label::Fake);
        assert_eq!(classify(0.51, LIVDET_THRESHOLD), Label::Live);
        assert_eq!(classify(0.0, LIVDET_THRESHOLD), Label::Fake);
    }

    #[test]
    fn score_is_mean_of_leaves() {
        let stump = |v: f64| Tree { nodes: vec![Node::Leaf { live_fraction: v }] };
        let mut trees = vec![stump(1.0); 37];
        trees.extend(vec![stump(0.0); 63]);
        let model = ForestModel {
            params: ForestParams::default(),
            digest: TrainingDigest { samples: 2, live: 1, fake: 1, mask: vec![true] },
            trees,
            oob_accuracy: None,
        };
        assert!((predict_score(&model, &[0.0]).unwrap() - 0.37).abs() < 1e-15);
        let all_live = ForestModel { trees: vec![stump(1.0); 10], ..model };
        assert_eq!(predict_score(&all_live, &[0.0]).unwrap(), 1.0);
    }

    #[test]
    fn oob_on_separable_data() {
        let (x, y) = gen_labeled_features(250, 3, 1, 8.0, 21);
        let p = ForestParams { n_trees: 50, seed: 3, ..Default::default() };
        let m = train(&x, &y, &p, &[true; 3], Exec::Parallel).unwrap();
        assert!(m.oob_accuracy.unwrap() >= 0.95, "{:?}", m.oob_accuracy);
    }

    fn same_structure(a: &ForestModel, b: &ForestModel) -> bool {
        a.trees.iter().zip(&b.trees).all(|(ta, tb)| {
            ta.nodes.len() == tb.nodes.len()
                && ta.nodes.iter().zip(&tb.nodes).all(|(na, nb)| match (na, nb) {
                    (Node::Leaf { live_fraction: x }, Node::Leaf { live_fraction: y }) => x == y,
                    (Node::Split { feature: f, right: r, .. }, Node::Split { feature: g, right: s, .. }) => f == g && r == s,
                    _ => false,
                })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn increasing_affine_maps_leave_scores_unchanged(seed in 0u64..1000, k in 0.1f64..5.0, off in -10.0f64..10.0) {
            let (x, y) = gen_labeled_features(20, 3, 1, 2.0, seed);
            let g = |v: f64| k * v + off;
            let xt: Vec<Vec<f64>> = x.iter().map(|r| vec![g(r[0]), r[1], r[2]]).collect();
            let p = params(seed);
            let a = train(&x, &y, &p, &[true; 3], Exec::Sequential).unwrap();
            let b = train(&xt, &y, &p, &[true; 3], Exec::Sequential).unwrap();
            prop_assert!(same_structure(&a, &b));
            let (probe, _) = gen_labeled_features(10, 3, 1, 2.0, seed + 1);
            for r in x.iter().chain(&probe) {
                let rt = [g(r[0]), r[1], r[2]];
                prop_assert_eq!(predict_score(&a, r).unwrap(), predict_score(&b, &rt).unwrap());
            }
        }

        /// Split choice depends only on the order of feature values, so any
        /// strictly increasing map keeps every split feature, the topology
        /// and the leaves; only thresholds move.
        #[test]
        fn monotone_maps_leave_tree_structure_unchanged(seed in 0u64..1000, k in 0.1f64..3.0) {
            let (x, y) = gen_labeled_features(20, 3, 1, 2.0, seed);
            let g = |v: f64| (k * v).exp() + v.powi(3);
            let xt: Vec<Vec<f64>> = x.iter().map(|r| vec![g(r[0]), r[1], r[2]]).collect();
            let p = params(seed);
            let a = train(&x, &y, &p, &[true; 3], Exec::Sequential).unwrap();
            let b = train(&xt, &y, &p, &[true; 3], Exec::Sequential).unwrap();
            prop_assert!(same_structure(&a, &b));
        }
    }
}
