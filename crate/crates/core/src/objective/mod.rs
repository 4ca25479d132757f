//! Multi-task objectives: budgeted evaluation, ParEGO scalarization, and the
//! Pareto front over fully evaluated configurations.

mod pareto;
mod suite;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::merge::assemble;
use crate::rng::Rng;
use crate::space::Config;
use crate::zoo::LayeredModel;

pub use pareto::{dominates, FrontMember, ParetoFront};
pub(crate) use pareto::cmp_vec;
pub use suite::{evaluate, CalibrationSuite, CalibrationTask};

pub const DEFAULT_ALPHA: f64 = 0.05;
pub const LAMBDA_LATTICE: usize = 10;

/// Per-task error rates (1 − accuracy), all minimized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectiveVector(pub Vec<f64>);

impl ObjectiveVector {
    pub fn worst(m: usize) -> Self {
        ObjectiveVector(vec![1.0; m])
    }

    pub fn mean(&self) -> f64 {
        self.0.iter().sum::<f64>() / self.0.len().max(1) as f64
    }
}

/// Nonnegative weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LambdaWeights(Vec<f64>);

impl LambdaWeights {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::config("lambda weights must be nonnegative and non-empty"));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::config(format!("lambda weights sum to {sum}, not 1")));
        }
        Ok(LambdaWeights(values))
    }

    /// Lattice point `counts / q`; the counts must sum to `q`.
    pub fn from_counts(counts: &[usize], q: usize) -> Result<Self> {
        if counts.iter().sum::<usize>() != q || q == 0 {
            return Err(Error::config("lattice counts must sum to q"));
        }
        LambdaWeights::new(counts.iter().map(|&k| k as f64 / q as f64).collect())
    }

    pub fn uniform(m: usize) -> Self {
        LambdaWeights(vec![1.0 / m as f64; m])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `max_i λ_i f_i + α Σ_i λ_i f_i`
pub fn parego_scalarize(f: &ObjectiveVector, lambda: &LambdaWeights, alpha: f64) -> Result<f64> {
    if f.0.len() != lambda.len() {
        return Err(Error::config(format!(
            "{} objectives but {} weights",
            f.0.len(),
            lambda.len()
        )));
    }
    if !(alpha > 0.0) {
        return Err(Error::config("alpha must be positive"));
    }
    let weighted = f.0.iter().zip(lambda.values()).map(|(fi, li)| fi * li);
    let (max, sum) = weighted.fold((f64::NEG_INFINITY, 0.0), |(m, s), v| (m.max(v), s + v));
    Ok(max + alpha * sum)
}

/// Uniform draw from `{k/q : Σk = q}` via a uniform stars-and-bars placement.
pub fn lattice_counts(m: usize, q: usize, rng: &mut Rng) -> Vec<usize> {
    if m <= 1 {
        return vec![q; m];
    }
    let slots = q + m - 1;
    let mut bars: Vec<usize> = index::sample(rng, slots, m - 1).into_vec();
    bars.sort_unstable();
    let mut counts = Vec::with_capacity(m);
    let mut next = 0;
    for &b in &bars {
        counts.push(b - next);
        next = b + 1;
    }
    counts.push(slots - next);
    counts
}

pub fn sample_lambda(m: usize, rng: &mut Rng) -> LambdaWeights {
    let counts = lattice_counts(m, LAMBDA_LATTICE, rng);
    LambdaWeights::from_counts(&counts, LAMBDA_LATTICE).expect("lattice point sums to q")
}

/// Every lattice point for `m` objectives at resolution `q`, in lexicographic order.
pub fn lattice_points(m: usize, q: usize) -> Vec<Vec<usize>> {
    fn rec(m: usize, left: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if m == 1 {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in 0..=left {
            prefix.push(k);
            rec(m - 1, left - k, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if m > 0 {
        rec(m, q, &mut Vec::new(), &mut out);
    }
    out
}

/// Something that scores a configuration at a budget.
pub trait Objective: Sync {
    fn num_objectives(&self) -> usize;

    fn evaluate(&self, config: &Config, budget: usize) -> Result<ObjectiveVector>;
}

/// Assembles the stitched model and measures it on the calibration suite.
pub struct StitchObjective<'a> {
    pub base: &'a LayeredModel,
    pub candidates: &'a [LayeredModel],
    pub suite: &'a CalibrationSuite,
}

impl Objective for StitchObjective<'_> {
    fn num_objectives(&self) -> usize {
        self.suite.len()
    }

    fn evaluate(&self, config: &Config, budget: usize) -> Result<ObjectiveVector> {
        let model = assemble(config, self.base, self.candidates)?;
        evaluate(&model, self.suite, budget)
    }
}
