//! Minibatch SGD on softmax cross-entropy, with hand-written backprop.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::data::{make_task_datasets, LabeledDataset, TaskSpec};
use super::model::{LayeredModel, ModelShape, ResidualBlock};
use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::dot;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainHyper {
    pub steps: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
}

fn default_lr() -> f64 {
    0.05
}

fn default_batch() -> usize {
    16
}

impl TrainHyper {
    pub fn steps(steps: usize) -> Self {
        TrainHyper {
            steps,
            learning_rate: default_lr(),
            batch_size: default_batch(),
        }
    }
}

/// Mean cross-entropy and its gradient with respect to every parameter.
pub fn loss_and_grad(model: &LayeredModel, data: &LabeledDataset, idx: &[usize]) -> (f64, LayeredModel) {
    let mut grad = zeros_like(model);
    let h = model.hidden_dim;
    let scale = 1.0 / idx.len() as f64;
    let mut total = 0.0;
    // per-layer cached inputs and pre-activations for one example
    let mut inputs = vec![vec![0.0; h]; model.blocks.len() + 1];
    let mut pre = vec![vec![0.0; h]; model.blocks.len()];
    for &n in idx {
        inputs[0].iter_mut().for_each(|v| *v = 0.0);
        inputs[0][..model.input_dim].copy_from_slice(data.inputs.row(n));
        for (l, block) in model.blocks.iter().enumerate() {
            let (head, tail) = inputs.split_at_mut(l + 1);
            let x = &head[l];
            let out = &mut tail[0];
            let z = &mut pre[l];
            for (i, zi) in z.iter_mut().enumerate() {
                *zi = dot(block.w1.row(i), x) + block.b1[i];
            }
            let a: Vec<f64> = z.iter().map(|v| v.max(0.0)).collect();
            for i in 0..h {
                out[i] = x[i] + dot(block.w2.row(i), &a) + block.b2[i];
            }
        }
        let top = &inputs[model.blocks.len()];
        let logits: Vec<f64> = (0..model.num_classes)
            .map(|c| dot(model.head.w.row(c), top) + model.head.b[c])
            .collect();
        let probs = softmax(&logits);
        let label = data.labels[n];
        total -= probs[label].max(f64::MIN_POSITIVE).ln();
        let dlogits: Vec<f64> = probs
            .iter()
            .enumerate()
            .map(|(c, p)| (p - if c == label { 1.0 } else { 0.0 }) * scale)
            .collect();

        let mut dh = vec![0.0; h];
        for (c, &g) in dlogits.iter().enumerate() {
            grad.head.b[c] += g;
            let wrow = model.head.w.row(c);
            for ((gw, &t), (d, &w)) in grad.head.w.row_mut(c).iter_mut().zip(top).zip(dh.iter_mut().zip(wrow)) {
                *gw += g * t;
                *d += g * w;
            }
        }
        for l in (0..model.blocks.len()).rev() {
            let block = &model.blocks[l];
            let gb = &mut grad.blocks[l];
            let x = &inputs[l];
            let z = &pre[l];
            let mut dz = vec![0.0; h];
            for i in 0..h {
                let du = dh[i];
                gb.b2[i] += du;
                if du != 0.0 {
                    for (j, gw) in gb.w2.row_mut(i).iter_mut().enumerate() {
                        *gw += du * z[j].max(0.0);
                    }
                    for (j, w) in block.w2.row(i).iter().enumerate() {
                        dz[j] += du * w;
                    }
                }
            }
            for (j, d) in dz.iter_mut().enumerate() {
                if z[j] <= 0.0 {
                    *d = 0.0;
                }
            }
            for (i, &d) in dz.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                gb.b1[i] += d;
                for (gw, &xj) in gb.w1.row_mut(i).iter_mut().zip(x) {
                    *gw += d * xj;
                }
                for (dj, &w) in dh.iter_mut().zip(block.w1.row(i)) {
                    *dj += d * w;
                }
            }
        }
    }
    (total * scale, grad)
}

pub fn mean_loss(model: &LayeredModel, data: &LabeledDataset) -> f64 {
    let logits = model.forward(&data.inputs).expect("dataset width checked by caller");
    let mut total = 0.0;
    for (n, &label) in data.labels.iter().enumerate() {
        let p = softmax(logits.row(n));
        total -= p[label].max(f64::MIN_POSITIVE).ln();
    }
    total / data.len().max(1) as f64
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn zeros_like(model: &LayeredModel) -> LayeredModel {
    let mut g = model.clone();
    for t in g.tensors_mut() {
        t.iter_mut().for_each(|v| *v = 0.0);
    }
    g
}

/// Fraction of misclassified examples.
pub fn error_rate(model: &LayeredModel, data: &LabeledDataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Evaluation("cannot measure error on an empty dataset".into()));
    }
    let pred = model.predict(&data.inputs)?;
    let wrong = pred.iter().zip(&data.labels).filter(|(p, l)| p != l).count();
    Ok(wrong as f64 / data.len() as f64)
}

/// Runs `hyper.steps` SGD steps in place, sampling minibatches from reshuffled epochs.
pub fn sgd(model: &mut LayeredModel, data: &LabeledDataset, hyper: &TrainHyper, seed: u64) -> Result<()> {
    run_sgd(model, data, hyper, seed, true)
}

fn run_sgd(model: &mut LayeredModel, data: &LabeledDataset, hyper: &TrainHyper, seed: u64, train_head: bool) -> Result<()> {
    if hyper.steps == 0 {
        return Ok(());
    }
    if data.input_dim() != model.input_dim || data.num_classes != model.num_classes {
        return Err(Error::Shape(format!(
            "training data ({} inputs, {} classes) does not fit model ({} inputs, {} classes)",
            data.input_dim(),
            data.num_classes,
            model.input_dim,
            model.num_classes
        )));
    }
    if data.is_empty() || hyper.batch_size == 0 {
        return Err(Error::config("training needs a non-empty dataset and batch size"));
    }
    let mut rng = rng::seeded(seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut rng);
    let mut cursor = 0;
    let mut batch = Vec::with_capacity(hyper.batch_size);
    for _ in 0..hyper.steps {
        batch.clear();
        while batch.len() < hyper.batch_size.min(data.len()) {
            if cursor == order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            batch.push(order[cursor]);
            cursor += 1;
        }
        let (_, grad) = loss_and_grad(model, data, &batch);
        let mut params = model.tensors_mut();
        if !train_head {
            params.truncate(params.len() - 2);
        }
        for (p, g) in params.into_iter().zip(grad.tensors()) {
            for (pv, gv) in p.iter_mut().zip(g) {
                *pv -= hyper.learning_rate * gv;
            }
        }
    }
    Ok(())
}

fn check_family_tasks(tasks: &[TaskSpec]) -> Result<(usize, usize)> {
    let first = tasks.first().ok_or_else(|| Error::config("at least one task is required"))?;
    for t in tasks {
        if t.input_dim != first.input_dim || t.num_classes != first.num_classes {
            return Err(Error::config(format!(
                "task `{}` has shape ({}, {}) but `{}` has ({}, {})",
                t.task_id, t.input_dim, t.num_classes, first.task_id, first.input_dim, first.num_classes
            )));
        }
    }
    Ok((first.input_dim, first.num_classes))
}

/// Trains the shared base on the union of all task training sets.
pub fn train_base(
    tasks: &[TaskSpec],
    hidden_dim: usize,
    num_layers: usize,
    hyper: &TrainHyper,
    seed: u64,
) -> Result<LayeredModel> {
    let (input_dim, num_classes) = check_family_tasks(tasks)?;
    let shape = ModelShape {
        input_dim,
        hidden_dim,
        num_layers,
        num_classes,
    };
    let mut model = LayeredModel::init(shape, seed, "base")?;
    let sets = tasks
        .iter()
        .map(|t| make_task_datasets(t).map(|d| d.train))
        .collect::<Result<Vec<_>>>()?;
    let union = LabeledDataset::concat(&sets.iter().collect::<Vec<_>>())?;
    sgd(&mut model, &union, hyper, rng::mix(seed, 1))?;
    Ok(model)
}

/// Copies `base` and continues training its blocks on one task only.
///
/// The head stays frozen, so every variant shares the base head and a
/// stitched model built from one variant's blocks is that variant.
pub fn finetune_variant(base: &LayeredModel, task: &TaskSpec, hyper: &TrainHyper, seed: u64) -> Result<LayeredModel> {
    if task.input_dim != base.input_dim || task.num_classes != base.num_classes {
        return Err(Error::Shape(format!(
            "task `{}` ({} inputs, {} classes) is incompatible with base ({} inputs, {} classes)",
            task.task_id, task.input_dim, task.num_classes, base.input_dim, base.num_classes
        )));
    }
    let data = make_task_datasets(task)?.train;
    let mut model = base.clone();
    model.label = format!("variant-{}", task.task_id);
    run_sgd(&mut model, &data, hyper, seed, false)?;
    Ok(model)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    /// Loss is essentially zero; gradients are tiny and the check is weak.
    pub saturated: bool,
}

/// Compares backprop gradients with central differences on a seeded random
/// subset of parameters. Relative error is `|a − n| / max(|a| + |n|, 1e-6)`.
pub fn grad_check(model: &LayeredModel, data: &LabeledDataset, epsilon: f64, samples: usize, seed: u64) -> Result<GradCheckReport> {
    if !(epsilon > 0.0 && epsilon <= 1e-2) {
        return Err(Error::config("grad_check epsilon must lie in (0, 1e-2]"));
    }
    let idx: Vec<usize> = (0..data.len()).collect();
    let (loss, grad) = loss_and_grad(model, data, &idx);
    let grad_flat: Vec<f64> = grad.tensors().into_iter().flatten().copied().collect();
    let total = grad_flat.len();
    let mut rng = rng::seeded(seed);
    let picks = rand::seq::index::sample(&mut rng, total, samples.min(total));
    let mut probe = model.clone();
    let mut max_rel: f64 = 0.0;
    for p in picks.iter() {
        let original = get_flat(&probe, p);
        set_flat(&mut probe, p, original + epsilon);
        let up = mean_loss(&probe, data);
        set_flat(&mut probe, p, original - epsilon);
        let down = mean_loss(&probe, data);
        set_flat(&mut probe, p, original);
        let numeric = (up - down) / (2.0 * epsilon);
        let analytic = grad_flat[p];
        let rel = (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-6);
        max_rel = max_rel.max(rel);
    }
    Ok(GradCheckReport {
        max_rel_error: max_rel,
        checked: picks.len(),
        saturated: loss < 1e-8,
    })
}

fn locate(model: &LayeredModel, mut flat: usize) -> (usize, usize) {
    for (t, slice) in model.tensors().iter().enumerate() {
        if flat < slice.len() {
            return (t, flat);
        }
        flat -= slice.len();
    }
    panic!("parameter index out of range");
}

fn get_flat(model: &LayeredModel, flat: usize) -> f64 {
    let (t, i) = locate(model, flat);
    model.tensors()[t][i]
}

fn set_flat(model: &mut LayeredModel, flat: usize, v: f64) {
    let (t, i) = locate(model, flat);
    model.tensors_mut()[t][i] = v;
}

/// Block-wise zero check used by tests and assembly.
pub fn is_zero_block(b: &ResidualBlock) -> bool {
    b.tensors().iter().all(|t| t.iter().all(|&v| v == 0.0))
}
