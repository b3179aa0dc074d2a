//! Wrapper feature selection: sequential forward floating selection, plain
//! forward selection and an exhaustive oracle, all scored by stratified
//! k-fold cross-validated forest accuracy.

use std::cmp::Ordering;
use std::fmt;

use rand::seq::SliceRandom;
use thiserror::Error;

use crate::exec::Exec;
use crate::forest::{classify, predict_score, train, ForestError, ForestParams, LIVDET_THRESHOLD};
use crate::ingest::Label;
use crate::rng::{mix, rng, STREAM_FOLDS};

#[derive(Debug, Error)]
pub enum SelectError {
    #[error("empty feature mask")]
    EmptyMask,
    #[error("single-class input")]
    SingleClass,
    #[error("invalid fold count {folds}: need 2 <= folds <= {max} (smallest class)")]
    Folds { folds: usize, max: usize },
    #[error("exhaustive search limited to 16 features and subsets of at most 6, got {features} features and max_dim {max_dim}")]
    TooLarge { features: usize, max_dim: usize },
    #[error("inconsistent input: {0}")]
    Shape(String),
    #[error(transparent)]
    Forest(#[from] ForestError),
}

/// The selection criterion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Objective {
    pub folds: usize,
    pub seed: u64,
    /// Forest settings; the seed field is replaced per fold.
    pub forest: ForestParams,
}

impl Default for Objective {
    fn default() -> Self {
        Self {
            folds: 5,
            seed: 0,
            forest: ForestParams::default(),
        }
    }
}

/// Fold index of every sample: each class is shuffled separately and dealt
/// round-robin, so every fold holds each class in proportion.
pub fn stratified_folds(labels: &[Label], folds: usize, seed: u64) -> Vec<usize> {
    let mut r = rng(mix(seed, STREAM_FOLDS));
    let mut out = vec![0; labels.len()];
    for class in [Label::Live, Label::Fake] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut r);
        for (pos, i) in idx.into_iter().enumerate() {
            out[i] = pos % folds;
        }
    }
    out
}

fn check(x: &[Vec<f64>], labels: &[Label], folds: usize) -> Result<(), SelectError> {
    if x.len() != labels.len() {
        return Err(SelectError::Shape(format!("{} rows but {} labels", x.len(), labels.len())));
    }
    let live = labels.iter().filter(|&&l| l == Label::Live).count();
    let min = live.min(labels.len() - live);
    if min == 0 {
        return Err(SelectError::SingleClass);
    }
    if folds < 2 || folds > min {
        return Err(SelectError::Folds { folds, max: min });
    }
    Ok(())
}

/// Stratified k-fold accuracy of the forest restricted to `mask`. Fold `f`
/// trains with seed `mix(objective.seed, f)`, shared by every mask.
pub fn cv_accuracy(x: &[Vec<f64>], labels: &[Label], mask: &[bool], objective: &Objective) -> Result<f64, SelectError> {
    if !mask.iter().any(|&m| m) {
        return Err(SelectError::EmptyMask);
    }
    check(x, labels, objective.folds)?;
    let fold_of = stratified_folds(labels, objective.folds, objective.seed);
    let mut correct = 0;
    for f in 0..objective.folds {
        let (mut tx, mut ty) = (Vec::new(), Vec::new());
        for i in (0..x.len()).filter(|&i| fold_of[i] != f) {
            tx.push(x[i].clone());
            ty.push(labels[i]);
        }
        let params = ForestParams {
            seed: mix(objective.seed, f as u64),
            ..objective.forest
        };
        let model = train(&tx, &ty, &params, mask, Exec::Sequential)?;
        for i in (0..x.len()).filter(|&i| fold_of[i] == f) {
            if classify(predict_score(&model, &x[i])?, LIVDET_THRESHOLD) == labels[i] {
                correct += 1;
            }
        }
    }
    Ok(correct as f64 / x.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Action {
    Add,
    Remove,
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Action::Add => "add",
            Action::Remove => "remove",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub step: usize,
    pub action: Action,
    pub feature: usize,
    /// Objective value of the subset after this step.
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSubset {
    pub mask: Vec<bool>,
    pub score: f64,
    pub history: Vec<Step>,
    /// Number of leading history steps that produce `mask`.
    pub steps_to_best: usize,
}

impl FeatureSubset {
    pub fn indices(&self) -> Vec<usize> {
        indices(&self.mask)
    }

    /// Mask obtained by applying the first `steps` history entries to the
    /// empty set.
    pub fn replay(&self, steps: usize) -> Vec<bool> {
        let mut m = vec![false; self.mask.len()];
        for s in &self.history[..steps] {
            m[s.feature] = s.action == Action::Add;
        }
        m
    }
}

fn indices(mask: &[bool]) -> Vec<usize> {
    mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i).collect()
}

/// Ranking used everywhere: higher score first, then fewer features, then
/// the lexicographically smaller sorted index list.
fn better(a: (f64, &[bool]), b: (f64, &[bool])) -> bool {
    match a.0.partial_cmp(&b.0) {
        Some(Ordering::Greater) => true,
        Some(Ordering::Less) => false,
        _ => {
            let (ia, ib) = (indices(a.1), indices(b.1));
            (ia.len(), ia) < (ib.len(), ib)
        }
    }
}

fn with(mask: &[bool], f: usize, on: bool) -> Vec<bool> {
    let mut m = mask.to_vec();
    m[f] = on;
    m
}

struct Search<'a> {
    x: &'a [Vec<f64>],
    labels: &'a [Label],
    objective: &'a Objective,
    exec: Exec,
}

impl Search<'_> {
    /// Best of the candidate masks by the shared ranking.
    fn best_of(&self, candidates: Vec<(usize, Vec<bool>)>) -> Result<Option<(usize, Vec<bool>, f64)>, SelectError> {
        let scores = self
            .exec
            .map(&candidates, |(_, m)| cv_accuracy(self.x, self.labels, m, self.objective));
        let mut best: Option<(usize, Vec<bool>, f64)> = None;
        for ((f, m), s) in candidates.into_iter().zip(scores) {
            let s = s?;
            if best.as_ref().is_none_or(|b| better((s, &m), (b.2, &b.1))) {
                best = Some((f, m, s));
            }
        }
        Ok(best)
    }

    fn run(&self, max_dim: usize, floating: bool) -> Result<FeatureSubset, SelectError> {
        let d = self.x.first().map_or(0, Vec::len);
        check(self.x, self.labels, self.objective.folds)?;
        if d == 0 {
            return Err(SelectError::EmptyMask);
        }
        let max_dim = max_dim.clamp(1, d);
        let mut current = vec![false; d];
        let mut k = 0;
        // best score recorded at each subset size
        let mut best_at: Vec<Option<(f64, Vec<bool>)>> = vec![None; d + 1];
        let mut history = Vec::new();
        let mut overall: Option<(f64, Vec<bool>, usize)> = None;

        let record = |mask: &Vec<bool>, score: f64, history_len: usize, overall: &mut Option<(f64, Vec<bool>, usize)>| {
            if overall.as_ref().is_none_or(|o| better((score, mask), (o.0, &o.1))) {
                *overall = Some((score, mask.clone(), history_len));
            }
        };

        while k < max_dim {
            let cands: Vec<(usize, Vec<bool>)> = (0..d).filter(|&f| !current[f]).map(|f| (f, with(&current, f, true))).collect();
            let Some((f, mask, score)) = self.best_of(cands)? else { break };
            current = mask;
            k += 1;
            history.push(Step { step: history.len() + 1, action: Action::Add, feature: f, score });
            if best_at[k].as_ref().is_none_or(|b| better((score, &current), (b.0, &b.1))) {
                best_at[k] = Some((score, current.clone()));
            }
            record(&current, score, history.len(), &mut overall);

            if !floating {
                continue;
            }
            while k > 2 {
                let cands: Vec<(usize, Vec<bool>)> = (0..d).filter(|&f| current[f]).map(|f| (f, with(&current, f, false))).collect();
                let Some((f, mask, score)) = self.best_of(cands)? else { break };
                let improves = best_at[k - 1].as_ref().is_none_or(|b| score > b.0);
                if !improves {
                    break;
                }
                current = mask;
                k -= 1;
                history.push(Step { step: history.len() + 1, action: Action::Remove, feature: f, score });
                best_at[k] = Some((score, current.clone()));
                record(&current, score, history.len(), &mut overall);
            }
        }
        let (score, mask, steps_to_best) = overall.ok_or(SelectError::EmptyMask)?;
        Ok(FeatureSubset { mask, score, history, steps_to_best })
    }
}

/// Sequential forward floating selection up to `max_dim` features.
pub fn sffs(x: &[Vec<f64>], labels: &[Label], objective: &Objective, max_dim: usize, exec: Exec) -> Result<FeatureSubset, SelectError> {
    Search { x, labels, objective, exec }.run(max_dim, true)
}

/// Plain sequential forward selection (no conditional removals).
pub fn sfs(x: &[Vec<f64>], labels: &[Label], objective: &Objective, max_dim: usize, exec: Exec) -> Result<FeatureSubset, SelectError> {
    Search { x, labels, objective, exec }.run(max_dim, false)
}

/// Scores every nonempty subset of at most `max_dim` features.
pub fn exhaustive_best_subset(
    x: &[Vec<f64>],
    labels: &[Label],
    objective: &Objective,
    max_dim: usize,
    exec: Exec,
) -> Result<FeatureSubset, SelectError> {
    let d = x.first().map_or(0, Vec::len);
    if d > 16 || max_dim > 6 {
        return Err(SelectError::TooLarge { features: d, max_dim });
    }
    check(x, labels, objective.folds)?;
    let masks: Vec<(usize, Vec<bool>)> = (1u32..1 << d)
        .filter(|bits| bits.count_ones() as usize <= max_dim)
        .map(|bits| (0, (0..d).map(|i| bits >> i & 1 == 1).collect()))
        .collect();
    let search = Search { x, labels, objective, exec };
    let (_, mask, score) = search.best_of(masks)?.ok_or(SelectError::EmptyMask)?;
    let history = indices(&mask)
        .into_iter()
        .enumerate()
        .map(|(i, f)| Step { step: i + 1, action: Action::Add, feature: f, score })
        .collect::<Vec<_>>();
    let steps_to_best = history.len();
    Ok(FeatureSubset { mask, score, history, steps_to_best })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{gen_labeled_features, gen_xor_features};

    fn objective(seed: u64) -> Objective {
        Objective {
            folds: 5,
            seed,
            forest: ForestParams { n_trees: 15, ..Default::default() },
        }
    }

    #[test]
    fn folds_are_stratified() {
        let labels: Vec<Label> = (0..53).map(|i| if i < 23 { Label::Live } else { Label::Fake }).collect();
        let f = stratified_folds(&labels, 5, 1);
        for k in 0..5 {
            let live = (0..53).filter(|&i| f[i] == k && labels[i] == Label::Live).count();
            let fake = (0..53).filter(|&i| f[i] == k && labels[i] == Label::Fake).count();
            assert!((4..=5).contains(&live) && (6..=6).contains(&fake), "fold {k}: {live} {fake}");
        }
    }

    #[test]
    fn cv_examples() {
        let (x, y) = gen_labeled_features(50, 3, 1, 12.0, 1);
        assert_eq!(cv_accuracy(&x, &y, &[true, false, false], &objective(0)).unwrap(), 1.0);
        let (x, y) = gen_labeled_features(100, 3, 0, 0.0, 2);
        let acc = cv_accuracy(&x, &y, &[true, true, true], &objective(0)).unwrap();
        assert!((acc - 0.5).abs() <= 0.1, "{acc}");
        assert!(matches!(cv_accuracy(&x, &y, &[false; 3], &objective(0)), Err(SelectError::EmptyMask)));
        let live = vec![Label::Live; x.len()];
        assert!(matches!(cv_accuracy(&x, &live, &[true; 3], &objective(0)), Err(SelectError::SingleClass)));
    }

    #[test]
    fn single_informative_feature() {
        let (x, y) = gen_labeled_features(40, 4, 1, 10.0, 3);
        let s = sffs(&x, &y, &objective(1), 4, Exec::Parallel).unwrap();
        assert_eq!(s.indices(), vec![0]);
        assert_eq!(s.score, 1.0);
        let e = exhaustive_best_subset(&x, &y, &objective(1), 4, Exec::Parallel).unwrap();
        assert_eq!(e.mask, s.mask);
    }

    #[test]
    fn duplicated_feature_keeps_lower_index() {
        let (mut x, y) = gen_labeled_features(40, 4, 1, 10.0, 3);
        for r in &mut x {
            r.swap(0, 2);
            r[3] = r[2];
        }
        let s = sffs(&x, &y, &objective(1), 4, Exec::Parallel).unwrap();
        assert_eq!(s.indices(), vec![2]);
    }

    #[test]
    fn exhaustive_small_cases() {
        let (x, y) = gen_labeled_features(30, 3, 1, 10.0, 6);
        assert_eq!(exhaustive_best_subset(&x, &y, &objective(0), 3, Exec::Parallel).unwrap().indices(), vec![0]);
        let (x, y) = gen_xor_features(60, 3, 4);
        let pair = exhaustive_best_subset(&x, &y, &objective(0), 3, Exec::Parallel).unwrap();
        assert_eq!(pair.indices(), vec![0, 1]);
        let (x, y) = gen_labeled_features(30, 4, 2, 3.0, 8);
        let single = exhaustive_best_subset(&x, &y, &objective(0), 1, Exec::Parallel).unwrap();
        assert_eq!(single.indices().len(), 1);
        let best_single = (0..4)
            .map(|f| cv_accuracy(&x, &y, &with(&[false; 4], f, true), &objective(0)).unwrap())
            .fold(0.0, f64::max);
        assert_eq!(single.score, best_single);
        let wide = vec![vec![0.0; 17]; 4];
        assert!(matches!(
            exhaustive_best_subset(&wide, &[Label::Live, Label::Fake, Label::Live, Label::Fake], &objective(0), 2, Exec::Sequential),
            Err(SelectError::TooLarge { .. })
        ));
    }

    #[test]
    fn noise_history_replays() {
        let (x, y) = gen_labeled_features(40, 6, 0, 0.0, 11);
        let s = sffs(&x, &y, &objective(2), 6, Exec::Parallel).unwrap();
        assert!((s.score - 0.5).abs() <= 0.2, "{}", s.score);
        assert_eq!(s.replay(s.steps_to_best), s.mask);
        assert_eq!(cv_accuracy(&x, &y, &s.mask, &objective(2)).unwrap(), s.score);
        for w in s.history.windows(2) {
            assert_eq!(w[1].step, w[0].step + 1);
        }
    }

    #[test]
    fn sffs_not_worse_than_sfs() {
        for seed in 0..4 {
            let (x, y) = gen_labeled_features(30, 5, 2, 1.5, 100 + seed);
            let a = sffs(&x, &y, &objective(seed), 5, Exec::Parallel).unwrap();
            let b = sfs(&x, &y, &objective(seed), 5, Exec::Parallel).unwrap();
            assert!(a.score >= b.score, "seed {seed}: {} < {}", a.score, b.score);
        }
    }

    #[test]
    fn execution_mode_does_not_change_result() {
        let (x, y) = gen_labeled_features(30, 5, 2, 1.5, 9);
        let a = sffs(&x, &y, &objective(3), 5, Exec::Parallel).unwrap();
        let b = sffs(&x, &y, &objective(3), 5, Exec::Sequential).unwrap();
        assert_eq!(a, b);
    }
}
