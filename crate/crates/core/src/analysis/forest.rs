//! Random forest of CART classification trees, used only for Gini
//! (mean impurity decrease) feature importance.

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream, Stream};

pub const MIN_SAMPLES: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Features tried per split; `⌊√p⌋` when `None`.
    pub max_features: Option<usize>,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: 8,
            min_samples_leaf: 5,
            max_features: None,
            seed: 0,
        }
    }
}

/// `2·pos·neg / n`: node size times binary Gini impurity.
fn weighted_gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    2.0 * pos as f64 * (n - pos) as f64 / n as f64
}

struct Split {
    feature: usize,
    /// Samples with value `<= threshold` go left.
    threshold: f64,
    gain: f64,
}

struct TreeFit<'a> {
    x: &'a [Vec<f64>],
    y: &'a [bool],
    cfg: &'a ForestConfig,
    max_features: usize,
    importance: Vec<f64>,
}

impl TreeFit<'_> {
    fn best_split<R: Rng>(&self, idx: &[usize], rng: &mut R) -> Option<Split> {
        let n = idx.len();
        let pos = idx.iter().filter(|&&i| self.y[i]).count();
        let parent = weighted_gini(pos, n);
        let p = self.x[0].len();
        let mut best: Option<Split> = None;
        let mut vals: Vec<(f64, bool)> = Vec::with_capacity(n);
        for f in sample(rng, p, self.max_features.min(p)).into_iter() {
            vals.clear();
            vals.extend(idx.iter().map(|&i| (self.x[i][f], self.y[i])));
            vals.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left_pos = 0;
            for k in 1..n {
                left_pos += usize::from(vals[k - 1].1);
                if vals[k].0 == vals[k - 1].0 || k < self.cfg.min_samples_leaf || n - k < self.cfg.min_samples_leaf {
                    continue;
                }
                let gain = parent - weighted_gini(left_pos, k) - weighted_gini(pos - left_pos, n - k);
                if gain > 1e-12 && best.as_ref().map_or(true, |b| gain > b.gain) {
                    best = Some(Split {
                        feature: f,
                        threshold: vals[k - 1].0,
                        gain,
                    });
                }
            }
        }
        best
    }

    fn grow<R: Rng>(&mut self, idx: Vec<usize>, depth: usize, rng: &mut R) {
        if depth >= self.cfg.max_depth || idx.len() < 2 * self.cfg.min_samples_leaf {
            return;
        }
        let Some(s) = self.best_split(&idx, rng) else { return };
        self.importance[s.feature] += s.gain;
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.x[i][s.feature] <= s.threshold);
        self.grow(l, depth + 1, rng);
        self.grow(r, depth + 1, rng);
    }
}

/// Impurity-decrease importance of one tree on a bootstrap sample, scaled
/// to sum to 1 (all zeros if the tree never split).
fn tree_importance(x: &[Vec<f64>], y: &[bool], cfg: &ForestConfig, tree: usize) -> Vec<f64> {
    let mut rng = stream(cfg.seed, Stream::Forest, tree as u64);
    let n = x.len();
    let p = x[0].len();
    let boot: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
    let mut fit = TreeFit {
        x,
        y,
        cfg,
        max_features: cfg.max_features.unwrap_or(((p as f64).sqrt() as usize).max(1)),
        importance: vec![0.0; p],
    };
    fit.grow(boot, 0, &mut rng);
    let total: f64 = fit.importance.iter().sum();
    if total > 0.0 {
        fit.importance.iter_mut().for_each(|v| *v /= total);
    }
    fit.importance
}

/// Mean per-tree importance, normalized to sum to 1. Trees are fitted in
/// parallel and reduced in tree order.
pub fn rf_importance(x: &[Vec<f64>], y: &[bool], cfg: &ForestConfig) -> Result<Vec<f64>> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!("{} rows, {} labels", x.len(), y.len())));
    }
    if x.len() < MIN_SAMPLES {
        return Err(Error::Config(format!(
            "random forest needs at least {MIN_SAMPLES} samples, have {}",
            x.len()
        )));
    }
    let p = x[0].len();
    if p == 0 || x.iter().any(|r| r.len() != p) {
        return Err(Error::Dimension("rows must have the same nonzero length".into()));
    }
    if y.iter().all(|&v| v) || y.iter().all(|&v| !v) {
        return Err(Error::SingleClass);
    }
    if cfg.n_trees == 0 || cfg.min_samples_leaf == 0 {
        return Err(Error::Config("n_trees and min_samples_leaf must be >= 1".into()));
    }
    let per_tree: Vec<Vec<f64>> = (0..cfg.n_trees)
        .into_par_iter()
        .map(|t| tree_importance(x, y, cfg, t))
        .collect();
    let mut imp = vec![0.0; p];
    for t in &per_tree {
        for (a, b) in imp.iter_mut().zip(t) {
            *a += b;
        }
    }
    let total: f64 = imp.iter().sum();
    if total > 0.0 {
        imp.iter_mut().for_each(|v| *v /= total);
    } else {
        imp.fill(1.0 / p as f64);
    }
    Ok(imp)
}
