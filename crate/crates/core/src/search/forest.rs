//! Regression forest used as the search surrogate.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel::{self, ExecMode};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestConfig {
    pub trees: usize,
    pub bootstrap: bool,
    /// Share of features considered at each split, at least one.
    pub max_features: f64,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            trees: 100,
            bootstrap: true,
            max_features: 5.0 / 6.0,
            min_samples_split: 3,
            min_samples_leaf: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf(f64),
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf(v) => return v,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }
}

struct Builder<'a, R> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    cfg: &'a ForestConfig,
    rng: R,
    nodes: Vec<Node>,
}

fn mean(y: &[f64], idx: &[usize]) -> f64 {
    idx.iter().map(|&i| y[i]).sum::<f64>() / idx.len() as f64
}

impl<R: Rng> Builder<'_, R> {
    fn grow(&mut self, mut idx: Vec<usize>) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf(mean(self.y, &idx)));
        let first = self.y[idx[0]];
        if idx.iter().all(|&i| self.y[i] == first) {
            self.nodes[id] = Node::Leaf(first);
            return id;
        }
        if idx.len() < self.cfg.min_samples_split {
            return id;
        }
        let d = self.x[0].len();
        let k = ((d as f64 * self.cfg.max_features).ceil() as usize).clamp(1, d);
        let mut features = index::sample(&mut self.rng, d, k).into_vec();
        features.sort_unstable();

        let leaf = self.cfg.min_samples_leaf.max(1);
        let n = idx.len();
        let total: f64 = idx.iter().map(|&i| self.y[i]).sum();
        let total_sq: f64 = idx.iter().map(|&i| self.y[i] * self.y[i]).sum();
        let parent_sse = total_sq - total * total / n as f64;
        // (sse, feature, threshold)
        let mut best: Option<(f64, usize, f64)> = None;
        for &f in &features {
            idx.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]).then(a.cmp(&b)));
            let (mut s, mut sq) = (0.0, 0.0);
            for j in 0..n - 1 {
                let yj = self.y[idx[j]];
                s += yj;
                sq += yj * yj;
                let (lo, hi) = (self.x[idx[j]][f], self.x[idx[j + 1]][f]);
                let nl = j + 1;
                if lo == hi || nl < leaf || n - nl < leaf {
                    continue;
                }
                let (rs, rsq) = (total - s, total_sq - sq);
                let sse = (sq - s * s / nl as f64) + (rsq - rs * rs / (n - nl) as f64);
                if best.is_none_or(|(b, _, _)| sse < b - 1e-12) {
                    best = Some((sse, f, 0.5 * (lo + hi)));
                }
            }
        }
        let Some((sse, feature, threshold)) = best else {
            return id;
        };
        if sse >= parent_sse - 1e-15 {
            return id;
        }
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.x[i][feature] <= threshold);
        let left = self.grow(l);
        let right = self.grow(r);
        self.nodes[id] = Node::Split { feature, threshold, left, right };
        id
    }
}

/// Bagged regression trees; the spread of tree predictions is the
/// uncertainty estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomForest {
    trees: Vec<Tree>,
    dim: usize,
}

impl RandomForest {
    /// Fits on `(x, y)`. Rows are put in a canonical order first, so the
    /// forest does not depend on the order observations arrived in.
    pub fn fit(x: &[Vec<f64>], y: &[f64], cfg: &ForestConfig, exec: ExecMode) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::Shape(format!("{} rows but {} targets", x.len(), y.len())));
        }
        if x.is_empty() {
            return Err(Error::Search("surrogate needs at least one observation".into()));
        }
        if cfg.trees == 0 {
            return Err(Error::config("trees", "must be at least 1"));
        }
        let dim = x[0].len();
        if dim == 0 || x.iter().any(|r| r.len() != dim) {
            return Err(Error::Shape("feature rows must share a non-zero width".into()));
        }
        if y.iter().chain(x.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("surrogate data must be finite".into()));
        }
        let mut order: Vec<usize> = (0..x.len()).collect();
        order.sort_by(|&a, &b| {
            x[a].iter()
                .zip(&x[b])
                .map(|(p, q)| p.total_cmp(q))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(y[a].total_cmp(&y[b]))
        });
        let xs: Vec<Vec<f64>> = order.iter().map(|&i| x[i].clone()).collect();
        let ys: Vec<f64> = order.iter().map(|&i| y[i]).collect();
        let n = xs.len();
        let trees = parallel::map_range(exec, cfg.trees, |t| {
            let mut rng = seed::rng(cfg.seed, &[t as u64]);
            let idx: Vec<usize> = if cfg.bootstrap {
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let mut b = Builder { x: &xs, y: &ys, cfg, rng, nodes: Vec::new() };
            b.grow(idx);
            Tree { nodes: b.nodes }
        });
        Ok(RandomForest { trees, dim })
    }

    pub fn num_trees(&self) -> usize {
        self.trees.len()
    }

    /// Mean and variance of the per-tree predictions.
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        debug_assert_eq!(x.len(), self.dim);
        let preds: Vec<f64> = self.trees.iter().map(|t| t.predict(x)).collect();
        // Shifted by the first prediction so identical trees give exactly
        // that prediction and zero spread.
        let p0 = preds[0];
        let n = preds.len() as f64;
        let d = preds.iter().map(|p| p - p0).sum::<f64>() / n;
        let v = preds.iter().map(|p| (p - p0 - d) * (p - p0 - d)).sum::<f64>() / n;
        (p0 + d, v.max(0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let x: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64 / (n - 1) as f64]).collect();
        let y = x.iter().map(|r| r[0]).collect();
        (x, y)
    }

    #[test]
    fn tracks_increasing_function() {
        let (x, y) = line(20);
        let f = RandomForest::fit(&x, &y, &ForestConfig::default(), ExecMode::Sequential).unwrap();
        assert!(f.predict(&[0.9]).0 > f.predict(&[0.1]).0);
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=10 {
            let m = f.predict(&[i as f64 / 10.0]).0;
            assert!(m >= prev - 0.1, "dip at {i}");
            prev = m;
        }
    }

    #[test]
    fn repeated_point_has_no_spread() {
        let x = vec![vec![0.3, 1.0]; 6];
        let y = vec![0.7; 6];
        let f = RandomForest::fit(&x, &y, &ForestConfig::default(), ExecMode::Sequential).unwrap();
        assert_eq!(f.predict(&[0.3, 1.0]), (0.7, 0.0));
    }

    #[test]
    fn row_order_does_not_matter() {
        let (mut x, mut y) = line(15);
        let cfg = ForestConfig { seed: 9, ..Default::default() };
        let a = RandomForest::fit(&x, &y, &cfg, ExecMode::Sequential).unwrap();
        x.reverse();
        y.reverse();
        x.swap(2, 7);
        y.swap(2, 7);
        let b = RandomForest::fit(&x, &y, &cfg, ExecMode::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_empty_and_ragged() {
        let cfg = ForestConfig::default();
        assert!(RandomForest::fit(&[], &[], &cfg, ExecMode::Sequential).is_err());
        assert!(RandomForest::fit(&[vec![1.0], vec![]], &[0.0, 1.0], &cfg, ExecMode::Sequential).is_err());
    }
}
