use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::Rng;

/// One node of a tree stored in preorder: a split is followed by its left
/// subtree, then its right subtree.
#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    /// `x[feature] <= threshold` goes left.
    Split { feature: usize, threshold: f64, right: usize },
    /// Fraction of live training samples that reached this leaf.
    Leaf { live_fraction: f64 },
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { live_fraction } => return live_fraction,
                Node::Split { feature, threshold, right } => {
                    i = if x[feature] <= threshold { i + 1 } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> (usize, usize) {
            match nodes[i] {
                Node::Leaf { .. } => (1, i + 1),
                Node::Split { right, .. } => {
                    let (dl, _) = go(nodes, i + 1);
                    let (dr, end) = go(nodes, right);
                    (1 + dl.max(dr), end)
                }
            }
        }
        if self.nodes.is_empty() {
            0
        } else {
            go(&self.nodes, 0).0
        }
    }

    /// Feature indices used by any split.
    pub fn split_features(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Split { feature, .. } => Some(*feature),
            Node::Leaf { .. } => None,
        })
    }
}

pub(crate) struct TreeConfig<'a> {
    pub features: &'a [usize],
    pub mtry: usize,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
}

pub(crate) struct Builder<'a, R: Rng> {
    pub x: &'a [Vec<f64>],
    /// `true` = live.
    pub y: &'a [bool],
    pub cfg: TreeConfig<'a>,
    pub rng: &'a mut R,
    pub nodes: Vec<Node>,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

fn gini(live: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = live as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

impl<R: Rng> Builder<'_, R> {
    pub fn build(mut self, samples: &mut [usize]) -> Tree {
        self.grow(samples, 0);
        Tree { nodes: self.nodes }
    }

    fn grow(&mut self, samples: &mut [usize], depth: usize) {
        let n = samples.len();
        let live = samples.iter().filter(|&&i| self.y[i]).count();
        let leaf = Node::Leaf {
            live_fraction: live as f64 / n as f64,
        };
        let depth_ok = self.cfg.max_depth.is_none_or(|d| depth < d);
        if live == 0 || live == n || n < 2 * self.cfg.min_leaf || !depth_ok {
            self.nodes.push(leaf);
            return;
        }
        let Some(best) = self.choose_split(samples, live) else {
            self.nodes.push(leaf);
            return;
        };
        let at = self.nodes.len();
        self.nodes.push(Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            right: 0,
        });
        let x = self.x;
        let f = best.feature;
        let split = partition(samples, |&i| x[i][f] <= best.threshold);
        let (left, right) = samples.split_at_mut(split);
        self.grow(left, depth + 1);
        let right_at = self.nodes.len();
        if let Node::Split { right, .. } = &mut self.nodes[at] {
            *right = right_at;
        }
        self.grow(right, depth + 1);
    }

    /// Best Gini split over `mtry` randomly drawn features. When none of
    /// them separates the node, the remaining features are tried in the
    /// same random order until one does.
    fn choose_split(&mut self, samples: &[usize], live: usize) -> Option<Candidate> {
        let mut order = self.cfg.features.to_vec();
        order.shuffle(self.rng);
        let mut best: Option<Candidate> = None;
        let mut sorted: Vec<(f64, bool)> = Vec::with_capacity(samples.len());
        for (tried, &f) in order.iter().enumerate() {
            if tried >= self.cfg.mtry && best.is_some() {
                break;
            }
            sorted.clear();
            sorted.extend(samples.iter().map(|&i| (self.x[i][f], self.y[i])));
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(Ordering::Equal));
            let n = sorted.len();
            let min_leaf = self.cfg.min_leaf;
            let mut left_live = 0;
            for k in 1..n {
                left_live += usize::from(sorted[k - 1].1);
                if sorted[k - 1].0 == sorted[k].0 || k < min_leaf || n - k < min_leaf {
                    continue;
                }
                let wl = k as f64 / n as f64;
                let imp = wl * gini(left_live, k) + (1.0 - wl) * gini(live - left_live, n - k);
                if best.as_ref().is_none_or(|b| imp < b.impurity) {
                    best = Some(Candidate {
                        feature: f,
                        threshold: midpoint(sorted[k - 1].0, sorted[k].0),
                        impurity: imp,
                    });
                }
            }
        }
        best
    }
}

/// A value in `[lo, hi)` halfway between two distinct neighbours.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo / 2.0 + hi / 2.0;
    if m < lo || m >= hi {
        lo
    } else {
        m
    }
}

/// Stable in-place partition; returns the number of elements satisfying
/// `pred`, which end up first.
fn partition<T: Copy>(v: &mut [T], pred: impl Fn(&T) -> bool) -> usize {
    let (yes, no): (Vec<T>, Vec<T>) = v.iter().partition(|e| pred(e));
    let k = yes.len();
    for (dst, src) in v.iter_mut().zip(yes.into_iter().chain(no)) {
        *dst = src;
    }
    k
}
