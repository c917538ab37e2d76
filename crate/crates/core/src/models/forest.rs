//! Random forests of CART trees.

use rand::Rng as _;
use rayon::prelude::*;

use super::tree::{fit_tree, Tree, TreeParams};
use crate::rng::{self, stream};

/// Fits `n_trees` trees. Tree `t` draws its bootstrap sample and split
/// feature subsets from its own stream seeded by `(seed, t)`, so the result
/// does not depend on how the trees are scheduled.
pub fn fit_forest(
    columns: &[Vec<f64>],
    y: &[f64],
    params: &TreeParams,
    n_trees: usize,
    bootstrap: bool,
    seed: u64,
) -> Vec<Tree> {
    let n = y.len();
    (0..n_trees)
        .into_par_iter()
        .map(|t| {
            let mut r = rng::derived_rng(seed, &[stream::TREE, t as u64]);
            let samples: Vec<usize> = if bootstrap {
                (0..n).map(|_| r.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            fit_tree(columns, y, samples, params, Some(&mut r))
        })
        .collect()
}

pub fn predict_forest(trees: &[Tree], row: &[f64]) -> f64 {
    trees.iter().map(|t| t.predict_row(row)).sum::<f64>() / trees.len() as f64
}
