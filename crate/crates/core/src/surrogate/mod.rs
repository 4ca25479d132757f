//! Forest surrogate over (encoding, budget) and the proposal step that turns
//! it into new configurations.

mod forest;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::{cmp_vec, parego_scalarize, LambdaWeights, ObjectiveVector};
use crate::rng::{self, Rng};
use crate::space::{encode, sample, warm_start, Config, SpaceSpec};

pub use forest::{Forest, ForestParams, Node, Tree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Ok,
    Failed,
}

/// One evaluation; serialized form is one trial-journal line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    #[serde(rename = "t")]
    pub timestamp: u64,
    pub bracket_s: usize,
    pub stage_i: usize,
    pub budget: usize,
    pub lambda: LambdaWeights,
    pub encoding: Vec<f64>,
    pub config: Config,
    pub objectives: ObjectiveVector,
    pub scalarized: f64,
    pub status: TrialStatus,
    #[serde(skip)]
    pub seed: u64,
}

impl TrialRecord {
    /// Whether `scalarized` is reproducible from the stored objectives and λ.
    pub fn consistent(&self, alpha: f64) -> bool {
        parego_scalarize(&self.objectives, &self.lambda, alpha).is_ok_and(|v| v == self.scalarized)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SurrogateParams {
    /// Below this many trials proposals are uniform (or warm-start) samples.
    pub n_min_fit: usize,
    pub pool_min: usize,
    pub pool_per_config: usize,
    /// Share of each batch chosen by expected improvement.
    pub rho: f64,
    pub num_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for SurrogateParams {
    fn default() -> Self {
        SurrogateParams {
            n_min_fit: 16,
            pool_min: 1000,
            pool_per_config: 50,
            rho: 0.7,
            num_trees: 32,
            max_depth: 12,
            min_leaf: 2,
        }
    }
}

impl SurrogateParams {
    pub fn check(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::config("surrogate rho must lie in [0, 1]"));
        }
        if self.num_trees == 0 || self.max_depth == 0 {
            return Err(Error::config("surrogate needs at least one tree of depth >= 1"));
        }
        Ok(())
    }
}

/// Surrogate input row: encoding followed by budget / b_max.
pub fn features(encoding: &[f64], budget: usize, b_max: usize) -> Vec<f64> {
    let mut x = encoding.to_vec();
    x.push(budget as f64 / b_max as f64);
    x
}

/// Fits a forest to the history; targets are the history's objectives
/// scalarized with `lambda` (the weights of the subproblem being solved).
pub fn fit(
    history: &[TrialRecord],
    lambda: &LambdaWeights,
    alpha: f64,
    b_max: usize,
    params: &ForestParams,
) -> Result<Forest> {
    if history.is_empty() {
        return Err(Error::Search("cannot fit a surrogate to an empty history".into()));
    }
    let x: Vec<Vec<f64>> = history.iter().map(|t| features(&t.encoding, t.budget, b_max)).collect();
    let y = history
        .iter()
        .map(|t| parego_scalarize(&t.objectives, lambda, alpha))
        .collect::<Result<Vec<_>>>()?;
    Forest::fit(&x, &y, params)
}

const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

/// Expected improvement below `best` under N(mean, variance).
pub fn expected_improvement(mean: f64, variance: f64, best: f64) -> f64 {
    let sigma = variance.max(0.0).sqrt();
    let diff = best - mean;
    if sigma < 1e-12 {
        return diff.max(0.0);
    }
    let z = diff / sigma;
    let cdf = 0.5 * libm::erfc(-z / std::f64::consts::SQRT_2);
    let pdf = (-0.5 * z * z).exp() / SQRT_2PI;
    (diff * cdf + sigma * pdf).max(0.0)
}

/// Inputs the proposal step needs beyond the history itself.
#[derive(Debug, Clone)]
pub struct ProposalContext<'a> {
    pub params: &'a SurrogateParams,
    pub lambda: &'a LambdaWeights,
    pub alpha: f64,
    pub b_max: usize,
    /// Cold starts in the very first bracket come from the warm-start band.
    pub first_bracket: bool,
    pub forest_seed: u64,
}

fn key(enc: &[f64]) -> Vec<u64> {
    enc.iter().map(|v| v.to_bits()).collect()
}

/// Proposes `n` valid, pairwise-distinct (when the space allows) configurations.
pub fn sample_configurations(
    n: usize,
    history: &[TrialRecord],
    spec: &SpaceSpec,
    ctx: &ProposalContext<'_>,
    rng: &mut Rng,
) -> Result<Vec<Config>> {
    spec.check()?;
    if n == 0 {
        return Err(Error::config("must propose at least one configuration"));
    }
    let mut batch = Vec::with_capacity(n);
    let mut seen = HashSet::new();
    if history.len() < ctx.params.n_min_fit {
        if ctx.first_bracket {
            // Redraw duplicates a bounded number of times; a narrow band may
            // hold fewer than `n` distinct points.
            let mut attempts = 0;
            while batch.len() < n && attempts < 20 * n {
                attempts += 1;
                for c in warm_start(spec, 1, rng)?.configs {
                    if seen.insert(key(&encode(&c, spec)?)) {
                        batch.push(c);
                    }
                }
            }
        }
        fill_uniform(&mut batch, &mut seen, n, spec, rng)?;
        return Ok(batch);
    }

    let forest_params = ForestParams {
        num_trees: ctx.params.num_trees,
        max_depth: ctx.params.max_depth,
        min_leaf: ctx.params.min_leaf,
        max_features: None,
        bootstrap: true,
        seed: ctx.forest_seed,
    };
    let forest = fit(history, ctx.lambda, ctx.alpha, ctx.b_max, &forest_params)?;
    let top_budget = history.iter().map(|t| t.budget).max().unwrap_or(ctx.b_max);
    let mut best = f64::INFINITY;
    let mut done_at_max = HashSet::new();
    for t in history.iter().filter(|t| t.budget == top_budget) {
        best = best.min(parego_scalarize(&t.objectives, ctx.lambda, ctx.alpha)?);
        done_at_max.insert(key(&t.encoding));
    }

    let pool_size = ctx.params.pool_min.max(ctx.params.pool_per_config * n);
    let mut pool_keys = HashSet::new();
    let mut pool: Vec<(Vec<f64>, Config)> = Vec::new();
    for _ in 0..pool_size {
        let c = sample(spec, rng)?;
        let enc = encode(&c, spec)?;
        if pool_keys.insert(key(&enc)) {
            pool.push((enc, c));
        }
    }
    // Prefer points whose top-budget value is still unknown.
    if pool.iter().any(|(e, _)| !done_at_max.contains(&key(e))) {
        pool.retain(|(e, _)| !done_at_max.contains(&key(e)));
    }
    let mut scored = pool
        .into_iter()
        .map(|(enc, c)| {
            let (mean, var) = forest.predict(&features(&enc, top_budget, ctx.b_max))?;
            Ok((expected_improvement(mean, var, best), enc, c))
        })
        .collect::<Result<Vec<_>>>()?;
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| cmp_vec(&a.1, &b.1)));

    let n_ei = ((ctx.params.rho * n as f64) - 1e-9).ceil().max(0.0) as usize;
    let n_ei = n_ei.min(n);
    for (_, enc, c) in scored.into_iter().take(n_ei) {
        seen.insert(key(&enc));
        batch.push(c);
    }
    fill_uniform(&mut batch, &mut seen, n, spec, rng)?;
    Ok(batch)
}

/// Tops `batch` up to `n` with uniform draws, skipping repeats while the space
/// still offers new points.
fn fill_uniform(
    batch: &mut Vec<Config>,
    seen: &mut HashSet<Vec<u64>>,
    n: usize,
    spec: &SpaceSpec,
    rng: &mut Rng,
) -> Result<()> {
    let mut misses = 0;
    while batch.len() < n {
        let c = sample(spec, rng)?;
        if seen.insert(key(&encode(&c, spec)?)) || misses >= 64 * n {
            batch.push(c);
        } else {
            misses += 1;
        }
    }
    Ok(())
}

/// Seed for the forest fitted at a given proposal round.
pub fn forest_seed(run_seed: u64, round: u64) -> u64 {
    rng::mix(run_seed, 0x5eed_0000 + round)
}
