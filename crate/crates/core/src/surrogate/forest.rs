//! Random-forest regression: bootstrap rows, √d candidate features per split,
//! variance-reduction splits at midpoints between sorted unique values.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub num_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features examined per split; `None` means ⌈√d⌉.
    #[serde(default)]
    pub max_features: Option<usize>,
    #[serde(default = "yes")]
    pub bootstrap: bool,
    #[serde(default)]
    pub seed: u64,
}

fn yes() -> bool {
    true
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            num_trees: 32,
            max_depth: 12,
            min_leaf: 2,
            max_features: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf { mean: f64, count: usize },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { mean, .. } => return mean,
                Node::Split { feature, threshold, left, right } => {
                    at = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn leaves(&self) -> impl Iterator<Item = (f64, usize)> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf { mean, count } => Some((*mean, *count)),
            Node::Split { .. } => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    pub trees: Vec<Tree>,
    pub dim: usize,
}

impl Forest {
    pub fn fit(x: &[Vec<f64>], y: &[f64], params: &ForestParams) -> Result<Forest> {
        if x.is_empty() || x.len() != y.len() {
            return Err(Error::config("forest needs a non-empty training set with one target per row"));
        }
        let dim = x[0].len();
        if x.iter().any(|r| r.len() != dim) {
            return Err(Error::Shape("training rows differ in width".into()));
        }
        if params.num_trees == 0 {
            return Err(Error::config("forest needs at least one tree"));
        }
        let mtry = params
            .max_features
            .unwrap_or_else(|| (dim as f64).sqrt().ceil() as usize)
            .clamp(1, dim.max(1));
        let trees = (0..params.num_trees)
            .map(|t| {
                let mut rng = rng::derive(params.seed, t as u64);
                let rows: Vec<usize> = if params.bootstrap {
                    (0..x.len()).map(|_| rng.random_range(0..x.len())).collect()
                } else {
                    (0..x.len()).collect()
                };
                let mut builder = Builder {
                    x,
                    y,
                    params,
                    mtry,
                    rng,
                    nodes: Vec::new(),
                };
                builder.grow(rows, 0);
                Tree { nodes: builder.nodes }
            })
            .collect();
        Ok(Forest { trees, dim })
    }

    /// Mean of per-tree predictions and their population variance.
    pub fn predict(&self, x: &[f64]) -> Result<(f64, f64)> {
        if x.len() != self.dim {
            return Err(Error::Shape(format!(
                "query has {} features, forest was trained on {}",
                x.len(),
                self.dim
            )));
        }
        let preds: Vec<f64> = self.trees.iter().map(|t| t.predict(x)).collect();
        let n = preds.len() as f64;
        let mean = preds.iter().sum::<f64>() / n;
        let var = preds.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / n;
        Ok((mean, var))
    }
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    params: &'a ForestParams,
    mtry: usize,
    rng: Rng,
    nodes: Vec<Node>,
}

struct SplitChoice {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl Builder<'_> {
    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        let mean = rows.iter().map(|&i| self.y[i]).sum::<f64>() / rows.len() as f64;
        self.nodes.push(Node::Leaf { mean, count: rows.len() });
        let constant = rows.iter().all(|&i| self.y[i] == self.y[rows[0]]);
        if depth >= self.params.max_depth || rows.len() < 2 * self.params.min_leaf.max(1) || constant {
            return id;
        }
        let Some(split) = self.best_split(&rows) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| self.x[i][split.feature] <= split.threshold);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }

    /// Examines `mtry` random features; keeps going through the remaining
    /// ones only while no valid split has been found.
    fn best_split(&mut self, rows: &[usize]) -> Option<SplitChoice> {
        let dim = self.x[0].len();
        let mut features: Vec<usize> = (0..dim).collect();
        features.shuffle(&mut self.rng);
        let min_leaf = self.params.min_leaf.max(1);
        let total: f64 = rows.iter().map(|&i| self.y[i]).sum();
        let n = rows.len() as f64;
        let parent = total * total / n;
        let mut best: Option<SplitChoice> = None;
        let mut sorted = rows.to_vec();
        for (examined, &f) in features.iter().enumerate() {
            if examined >= self.mtry && best.is_some() {
                break;
            }
            sorted.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]));
            let mut left_sum = 0.0;
            for k in 0..sorted.len() - 1 {
                left_sum += self.y[sorted[k]];
                let (nl, nr) = (k + 1, sorted.len() - k - 1);
                let (a, b) = (self.x[sorted[k]][f], self.x[sorted[k + 1]][f]);
                if a == b || nl < min_leaf || nr < min_leaf {
                    continue;
                }
                let right_sum = total - left_sum;
                let gain = left_sum * left_sum / nl as f64 + right_sum * right_sum / nr as f64 - parent;
                if gain > 1e-12 && best.as_ref().is_none_or(|b| gain > b.gain) {
                    best = Some(SplitChoice {
                        feature: f,
                        threshold: 0.5 * (a + b),
                        gain,
                    });
                }
            }
        }
        best
    }
}
