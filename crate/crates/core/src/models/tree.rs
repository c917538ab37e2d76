//! CART decision trees.
//!
//! Splits are chosen greedily by Gini impurity decrease (classification) or
//! variance reduction (regression). Candidate thresholds are midpoints
//! between consecutive distinct sorted values, and ties in gain go to the
//! lowest feature index, then the lowest threshold. Samples with
//! `value <= threshold` go left.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::data::TargetKind;
use crate::rng::Rng;

/// Impure nodes are split whenever a valid split exists, including
/// zero-gain splits (XOR). This slack absorbs rounding in the gain.
const GAIN_SLACK: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub depth: usize,
    /// `None` for leaves.
    pub feature: Option<usize>,
    pub threshold: f64,
    pub left: Option<usize>,
    pub right: Option<usize>,
    pub parent: Option<usize>,
    pub samples: usize,
    /// Mean target (regression) or positive-class fraction (classification).
    pub value: f64,
    pub impurity: f64,
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        self.feature.is_none()
    }
}

/// A fitted tree stored as a preorder node array; node 0 is the root.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
    pub n_features: usize,
}

#[derive(Clone, Debug)]
pub struct TreeParams {
    pub task: TargetKind,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Features examined per split; `None` means all.
    pub mtry: Option<usize>,
}

impl Tree {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            let node = &self.nodes[i];
            match node.feature {
                None => return node.value,
                Some(f) => {
                    i = if row[f] <= node.threshold {
                        node.left.expect("split node has children")
                    } else {
                        node.right.expect("split node has children")
                    };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }
}

/// Impurity bookkeeping over a set of samples.
#[derive(Clone, Copy, Default)]
struct Stats {
    n: f64,
    sum: f64,
    sum_sq: f64,
}

impl Stats {
    fn add(&mut self, y: f64) {
        self.n += 1.0;
        self.sum += y;
        self.sum_sq += y * y;
    }

    fn sub(&self, other: &Stats) -> Stats {
        Stats {
            n: self.n - other.n,
            sum: self.sum - other.sum,
            sum_sq: self.sum_sq - other.sum_sq,
        }
    }

    /// Impurity times sample count: Gini·n for 0/1 labels, SSE otherwise.
    fn weighted_impurity(&self, task: TargetKind) -> f64 {
        if self.n == 0.0 {
            return 0.0;
        }
        match task {
            // Gini = 2 p (1 - p), p = sum / n
            TargetKind::Classification => 2.0 * self.sum * (self.n - self.sum) / self.n,
            TargetKind::Regression => (self.sum_sq - self.sum * self.sum / self.n).max(0.0),
        }
    }

    fn value(&self) -> f64 {
        self.sum / self.n
    }
}

struct Builder<'a> {
    columns: &'a [Vec<f64>],
    y: &'a [f64],
    params: &'a TreeParams,
    nodes: Vec<Node>,
    /// Scratch buffer of (value, target) pairs.
    pairs: Vec<(f64, f64)>,
}

struct Split {
    feature: usize,
    threshold: f64,
    gain: f64,
}

/// Midpoint of consecutive distinct values `a < b` that still separates
/// them under the `<=` rule.
fn midpoint(a: f64, b: f64) -> f64 {
    let t = a + (b - a) / 2.0;
    if t >= b || t < a {
        a
    } else {
        t
    }
}

impl<'a> Builder<'a> {
    fn best_split(&mut self, samples: &[usize], parent: &Stats, features: &[usize]) -> Option<Split> {
        let task = self.params.task;
        let min_leaf = self.params.min_samples_leaf.max(1);
        let parent_imp = parent.weighted_impurity(task);
        let mut best: Option<Split> = None;
        for &f in features {
            let col = &self.columns[f];
            self.pairs.clear();
            self.pairs.extend(samples.iter().map(|&i| (col[i], self.y[i])));
            self.pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
            if self.pairs[0].0 == self.pairs[self.pairs.len() - 1].0 {
                continue;
            }
            let mut left = Stats::default();
            let n = self.pairs.len();
            for k in 0..n - 1 {
                left.add(self.pairs[k].1);
                let (a, b) = (self.pairs[k].0, self.pairs[k + 1].0);
                if a == b {
                    continue;
                }
                let n_left = k + 1;
                if n_left < min_leaf || n - n_left < min_leaf {
                    continue;
                }
                let right = parent.sub(&left);
                let gain = parent_imp - left.weighted_impurity(task) - right.weighted_impurity(task);
                if best.as_ref().map_or(true, |s| gain > s.gain) {
                    best = Some(Split {
                        feature: f,
                        threshold: midpoint(a, b),
                        gain,
                    });
                }
            }
        }
        best.filter(|s| s.gain >= -GAIN_SLACK * parent_imp)
    }

    fn is_pure(&self, stats: &Stats) -> bool {
        match self.params.task {
            TargetKind::Classification => stats.sum == 0.0 || stats.sum == stats.n,
            TargetKind::Regression => stats.weighted_impurity(TargetKind::Regression) <= 1e-14 * stats.sum_sq.max(1e-300),
        }
    }

    fn build(&mut self, samples: &mut [usize], depth: usize, parent: Option<usize>, rng: &mut Option<&mut Rng>) -> usize {
        let mut stats = Stats::default();
        for &i in samples.iter() {
            stats.add(self.y[i]);
        }
        let id = self.nodes.len();
        self.nodes.push(Node {
            depth,
            feature: None,
            threshold: 0.0,
            left: None,
            right: None,
            parent,
            samples: samples.len(),
            value: stats.value(),
            impurity: stats.weighted_impurity(self.params.task) / stats.n,
        });

        let min_leaf = self.params.min_samples_leaf.max(1);
        if self.is_pure(&stats)
            || samples.len() < 2 * min_leaf
            || self.params.max_depth.is_some_and(|d| depth >= d)
        {
            return id;
        }

        let p = self.columns.len();
        let features: Vec<usize> = match (self.params.mtry, rng.as_deref_mut()) {
            (Some(m), Some(r)) if m < p => {
                let mut f = index::sample(r, p, m).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..p).collect(),
        };
        let Some(split) = self.best_split(samples, &stats, &features) else {
            return id;
        };

        let col = &self.columns[split.feature];
        let mut boundary = 0;
        for k in 0..samples.len() {
            if col[samples[k]] <= split.threshold {
                samples.swap(k, boundary);
                boundary += 1;
            }
        }
        // Keep each child's sample order canonical so results do not depend
        // on the partition's swap pattern.
        let (l, r) = samples.split_at_mut(boundary);
        l.sort_unstable();
        r.sort_unstable();

        self.nodes[id].feature = Some(split.feature);
        self.nodes[id].threshold = split.threshold;
        let left = self.build(l, depth + 1, Some(id), rng);
        let right = self.build(r, depth + 1, Some(id), rng);
        self.nodes[id].left = Some(left);
        self.nodes[id].right = Some(right);
        id
    }
}

/// Fits a tree on column-major features. `samples` may contain duplicates
/// (bootstrap). `rng` is only consulted when `params.mtry` is below the
/// feature count.
pub fn fit_tree(columns: &[Vec<f64>], y: &[f64], samples: Vec<usize>, params: &TreeParams, rng: Option<&mut Rng>) -> Tree {
    let mut samples = samples;
    samples.sort_unstable();
    let mut b = Builder {
        columns,
        y,
        params,
        nodes: Vec::new(),
        pairs: Vec::with_capacity(samples.len()),
    };
    let mut rng = rng;
    b.build(&mut samples, 0, None, &mut rng);
    Tree {
        nodes: b.nodes,
        n_features: columns.len(),
    }
}
