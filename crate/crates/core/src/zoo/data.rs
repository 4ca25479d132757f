//! Synthetic classification tasks standing in for the family's task domains.
//!
//! Every generator reserves the last input coordinate for a per-generator domain
//! tag so that examples from different generators never collide in input space.
//! Labels are assigned round-robin inside each split and then shuffled, so every
//! split is balanced to within one example per class.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Rng};
use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Generator {
    GaussianBlobs,
    XorBands,
    ModularSum,
}

impl Generator {
    pub fn name(self) -> &'static str {
        match self {
            Generator::GaussianBlobs => "gaussian-blobs",
            Generator::XorBands => "xor-bands",
            Generator::ModularSum => "modular-sum",
        }
    }

    fn tag(self) -> f64 {
        match self {
            Generator::GaussianBlobs => -2.0,
            Generator::XorBands => 0.0,
            Generator::ModularSum => 2.0,
        }
    }

    fn min_input_dim(self) -> usize {
        match self {
            Generator::GaussianBlobs => 2,
            Generator::XorBands | Generator::ModularSum => 3,
        }
    }
}

impl FromStr for Generator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian-blobs" => Ok(Generator::GaussianBlobs),
            "xor-bands" => Ok(Generator::XorBands),
            "modular-sum" => Ok(Generator::ModularSum),
            other => Err(Error::config(format!("unknown task generator `{other}`"))),
        }
    }
}

impl TryFrom<String> for Generator {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Generator> for String {
    fn from(g: Generator) -> String {
        g.name().to_owned()
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn default_noise() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task_id: String,
    pub generator: Generator,
    pub seed: u64,
    pub num_classes: usize,
    pub input_dim: usize,
    pub train_size: usize,
    pub calib_size: usize,
    pub test_size: usize,
    /// Generator-specific spread; blob standard deviation for `gaussian-blobs`.
    #[serde(default = "default_noise")]
    pub noise: f64,
}

impl TaskSpec {
    pub fn new(task_id: impl Into<String>, generator: Generator, seed: u64) -> Self {
        TaskSpec {
            task_id: task_id.into(),
            generator,
            seed,
            num_classes: 4,
            input_dim: 8,
            train_size: 2000,
            calib_size: 1000,
            test_size: 1000,
            noise: default_noise(),
        }
    }

    pub fn with_sizes(mut self, train: usize, calib: usize, test: usize) -> Self {
        self.train_size = train;
        self.calib_size = calib;
        self.test_size = test;
        self
    }

    pub fn with_classes(mut self, num_classes: usize) -> Self {
        self.num_classes = num_classes;
        self
    }

    pub fn with_input_dim(mut self, input_dim: usize) -> Self {
        self.input_dim = input_dim;
        self
    }

    pub fn with_noise(mut self, noise: f64) -> Self {
        self.noise = noise;
        self
    }

    fn check(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::config(format!(
                "task `{}`: num_classes must be at least 2",
                self.task_id
            )));
        }
        if self.input_dim < self.generator.min_input_dim() {
            return Err(Error::config(format!(
                "task `{}`: generator {} needs input_dim >= {}",
                self.task_id,
                self.generator,
                self.generator.min_input_dim()
            )));
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return Err(Error::config(format!("task `{}`: noise must be finite and >= 0", self.task_id)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub inputs: Matrix,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    /// Seed of the permutation applied to the examples when the split was drawn.
    pub order_seed: u64,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.cols()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Concatenates datasets with identical input width and class count.
    pub fn concat(parts: &[&LabeledDataset]) -> Result<LabeledDataset> {
        let first = parts
            .first()
            .ok_or_else(|| Error::config("cannot concatenate zero datasets"))?;
        let dim = first.input_dim();
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for p in parts {
            if p.input_dim() != dim || p.num_classes != first.num_classes {
                return Err(Error::Shape("datasets disagree on input_dim or num_classes".into()));
            }
            data.extend_from_slice(p.inputs.as_slice());
            labels.extend_from_slice(&p.labels);
        }
        Ok(LabeledDataset {
            inputs: Matrix::from_vec(labels.len(), dim, data),
            labels,
            num_classes: first.num_classes,
            order_seed: first.order_seed,
        })
    }

    /// Rows selected by `idx`, in that order.
    pub fn subset(&self, idx: &[usize]) -> LabeledDataset {
        let dim = self.input_dim();
        let mut data = Vec::with_capacity(idx.len() * dim);
        for &i in idx {
            data.extend_from_slice(self.inputs.row(i));
        }
        LabeledDataset {
            inputs: Matrix::from_vec(idx.len(), dim, data),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
            order_seed: self.order_seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskDatasets {
    pub train: LabeledDataset,
    pub calib: LabeledDataset,
    pub test: LabeledDataset,
}

pub fn make_task_datasets(spec: &TaskSpec) -> Result<TaskDatasets> {
    spec.check()?;
    // Shared per-task structure (blob centres) comes from its own stream so
    // that split sizes never shift it.
    let mut structure_rng = rng::derive(spec.seed, 0);
    let centers = blob_centers(spec, &mut structure_rng);
    let split = |stream: u64, n: usize| {
        let order_seed = rng::mix(spec.seed, stream);
        let mut rng = rng::seeded(order_seed);
        draw_split(spec, &centers, n, order_seed, &mut rng)
    };
    Ok(TaskDatasets {
        train: split(1, spec.train_size),
        calib: split(2, spec.calib_size),
        test: split(3, spec.test_size),
    })
}

fn blob_centers(spec: &TaskSpec, rng: &mut Rng) -> Vec<Vec<f64>> {
    if spec.generator != Generator::GaussianBlobs {
        return Vec::new();
    }
    let normal = Normal::new(0.0, 1.5).expect("valid normal");
    (0..spec.num_classes)
        .map(|_| (0..spec.input_dim - 1).map(|_| normal.sample(rng)).collect())
        .collect()
}

fn draw_split(
    spec: &TaskSpec,
    centers: &[Vec<f64>],
    n: usize,
    order_seed: u64,
    rng: &mut Rng,
) -> LabeledDataset {
    let k = spec.num_classes;
    let d = spec.input_dim;
    let mut labels: Vec<usize> = (0..n).map(|i| i % k).collect();
    labels.shuffle(rng);
    let distractor = Normal::new(0.0, 0.5).expect("valid normal");
    let mut data = vec![0.0; n * d];
    for (row, &label) in data.chunks_exact_mut(d).zip(&labels) {
        match spec.generator {
            Generator::GaussianBlobs => {
                let noise = Normal::new(0.0, spec.noise.max(1e-12)).expect("valid normal");
                for (x, c) in row.iter_mut().zip(&centers[label]) {
                    *x = c + noise.sample(rng);
                }
            }
            Generator::XorBands => {
                // label = (band(x0) + [x1 > 0]) mod k
                let positive = rng.random_bool(0.5);
                let band = (label + k - usize::from(positive)) % k;
                let width = 2.0 / k as f64;
                row[0] = -1.0 + width * (band as f64 + rng.random::<f64>());
                let mag = 0.1 + 0.9 * rng.random::<f64>();
                row[1] = if positive { mag } else { -mag };
                for x in &mut row[2..d - 1] {
                    *x = distractor.sample(rng);
                }
            }
            Generator::ModularSum => {
                // label = (d0 + d1) mod k, digits encoded on [-1, 1] with jitter
                let d0 = rng.random_range(0..k);
                let d1 = (label + k - d0) % k;
                let jitter = Normal::new(0.0, 0.05).expect("valid normal");
                let scale = 2.0 / (k - 1) as f64;
                row[0] = d0 as f64 * scale - 1.0 + jitter.sample(rng);
                row[1] = d1 as f64 * scale - 1.0 + jitter.sample(rng);
                for x in &mut row[2..d - 1] {
                    *x = distractor.sample(rng);
                }
            }
        }
        row[d - 1] = spec.generator.tag();
    }
    LabeledDataset {
        inputs: Matrix::from_vec(n, d, data),
        labels,
        num_classes: k,
        order_seed,
    }
}
