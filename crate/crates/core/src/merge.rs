//! Stitching operators: per-layer selection, task-arithmetic merging, and
//! depth-wise layer folding, plus assembly of a pruned model from a config.

use crate::error::{Error, Result};
use crate::space::{fold_targets, Config, FoldConfig, PruneConfig, CANONICAL};
use crate::zoo::{LayeredModel, ResidualBlock};

/// `p_base + μ · Σ_t (p_t − p_base)` for every parameter.
pub fn task_arithmetic_layer(base: &ResidualBlock, selected: &[&ResidualBlock], mu: f64) -> Result<ResidualBlock> {
    if let Some(bad) = selected.iter().position(|b| !b.same_shape(base)) {
        return Err(Error::Shape(format!("selected layer {bad} differs in shape from the base layer")));
    }
    Ok(base.zip_map(selected, |p, others| {
        let tau: f64 = others.iter().map(|o| o - p).sum();
        p + mu * tau
    }))
}

/// Convex combination of a retained layer with the removed layers folded into it.
///
/// `importance[0]` belongs to `retained`, the rest to `removed` in order. With
/// β = importance / Σ importance the result is `Σ β_j·L_j`, evaluated as
/// `L_i + Σ_{j≠i} β_j·(L_j − L_i)` so identical inputs come back unchanged.
pub fn fold_layers(retained: &ResidualBlock, removed: &[&ResidualBlock], importance: &[f64]) -> Result<ResidualBlock> {
    let beta = fold_weights(importance)?;
    if beta.len() != removed.len() + 1 {
        return Err(Error::config(format!(
            "{} importance values for {} layers",
            importance.len(),
            removed.len() + 1
        )));
    }
    if let Some(bad) = removed.iter().position(|b| !b.same_shape(retained)) {
        return Err(Error::Shape(format!("folded layer {bad} differs in shape from the retained layer")));
    }
    Ok(retained.zip_map(removed, |p, others| {
        p + others.iter().zip(&beta[1..]).map(|(o, b)| b * (o - p)).sum::<f64>()
    }))
}

/// Normalized fold weights β.
pub fn fold_weights(importance: &[f64]) -> Result<Vec<f64>> {
    if importance.is_empty() {
        return Err(Error::config("fold needs at least one importance value"));
    }
    if importance.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(Error::config("importance values must be positive and finite"));
    }
    let total: f64 = importance.iter().sum();
    Ok(importance.iter().map(|w| w / total).collect())
}

/// Builds the pruned model described by `config` from the base and candidates.
pub fn assemble(config: &Config, base: &LayeredModel, candidates: &[LayeredModel]) -> Result<LayeredModel> {
    let l = base.num_layers();
    if config.num_layers() != l {
        return Err(Error::Shape(format!(
            "config covers {} layers, model has {l}",
            config.num_layers()
        )));
    }
    if let Some(c) = candidates.iter().find(|c| !c.compatible_with(base)) {
        return Err(Error::Shape(format!("candidate `{}` is not shape-compatible with the base", c.label)));
    }
    if config.removed_count() == l {
        return Err(Error::config("configuration removes every layer; the model would be empty"));
    }
    let blocks = match config {
        Config::Prune(p) => prune_blocks(p, base, candidates)?,
        Config::Fold(f) => fold_blocks(f, base)?,
    };
    Ok(LayeredModel {
        label: "stitched".into(),
        input_dim: base.input_dim,
        hidden_dim: base.hidden_dim,
        num_classes: base.num_classes,
        blocks,
        head: base.head.clone(),
    })
}

fn prune_blocks(p: &PruneConfig, base: &LayeredModel, candidates: &[LayeredModel]) -> Result<Vec<ResidualBlock>> {
    let l = base.num_layers();
    if p.c.len() != l || p.merge_factor.len() != l || p.output_scale.len() != l {
        return Err(Error::Shape("config field lengths disagree with layer count".into()));
    }
    let mut blocks = Vec::with_capacity(l);
    for i in (0..l).filter(|&i| !p.r[i]) {
        if p.c[i].len() != candidates.len() {
            return Err(Error::Shape(format!(
                "layer {i} selects among {} candidates but {} were supplied",
                p.c[i].len(),
                candidates.len()
            )));
        }
        let selected: Vec<&ResidualBlock> = p.c[i]
            .iter()
            .zip(candidates)
            .filter(|(&on, _)| on)
            .map(|(_, m)| &m.blocks[i])
            .collect();
        let mut block = match selected.as_slice() {
            [] => base.blocks[i].clone(),
            [one] => (*one).clone(),
            many => task_arithmetic_layer(&base.blocks[i], many, p.merge_factor[i])?,
        };
        if p.output_scale[i] != CANONICAL {
            block.scale_branch(p.output_scale[i]);
        }
        blocks.push(block);
    }
    Ok(blocks)
}

fn fold_blocks(f: &FoldConfig, base: &LayeredModel) -> Result<Vec<ResidualBlock>> {
    let l = base.num_layers();
    if f.importance.len() != l {
        return Err(Error::Shape("importance length disagrees with layer count".into()));
    }
    let targets = fold_targets(&f.fold_select);
    let mut blocks = Vec::new();
    for i in (0..l).filter(|&i| !f.fold_select[i]) {
        let folded: Vec<usize> = (0..l).filter(|&j| targets[j] == Some(i)).collect();
        if folded.is_empty() {
            blocks.push(base.blocks[i].clone());
            continue;
        }
        let neighbors: Vec<&ResidualBlock> = folded.iter().map(|&j| &base.blocks[j]).collect();
        let importance: Vec<f64> = std::iter::once(i).chain(folded).map(|j| f.importance[j]).collect();
        blocks.push(fold_layers(&base.blocks[i], &neighbors, &importance)?);
    }
    Ok(blocks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Matrix;
    use crate::zoo::ModelShape;

    fn block(vals: [f64; 2]) -> ResidualBlock {
        // hidden 1 would lose the second value; use a 1×1 W1 and b1 as the pair
        ResidualBlock {
            w1: Matrix::from_vec(1, 1, vec![vals[0]]),
            b1: vec![vals[1]],
            w2: Matrix::from_vec(1, 1, vec![0.0]),
            b2: vec![0.0],
        }
    }

    fn pair(b: &ResidualBlock) -> [f64; 2] {
        [b.w1.get(0, 0), b.b1[0]]
    }

    #[test]
    fn task_arithmetic_hand_example() {
        let base = block([1.0, 2.0]);
        let v1 = block([2.0, 2.0]);
        let v2 = block([1.0, 4.0]);
        let out = task_arithmetic_layer(&base, &[&v1, &v2], 0.5).unwrap();
        assert_eq!(pair(&out), [1.5, 3.0]);
        assert_eq!(task_arithmetic_layer(&base, &[&v1, &v2], 0.0).unwrap(), base);
        assert_eq!(task_arithmetic_layer(&base, &[&v1], 1.0).unwrap(), v1);
    }

    #[test]
    fn task_arithmetic_is_affine_in_mu() {
        let shape = ModelShape {
            input_dim: 2,
            hidden_dim: 4,
            num_layers: 1,
            num_classes: 2,
        };
        let base = LayeredModel::init(shape, 1, "b").unwrap().blocks.remove(0);
        let a = LayeredModel::init(shape, 2, "a").unwrap().blocks.remove(0);
        let c = LayeredModel::init(shape, 3, "c").unwrap().blocks.remove(0);
        let half = task_arithmetic_layer(&base, &[&a, &c], 0.5).unwrap();
        let full = task_arithmetic_layer(&base, &[&a, &c], 1.0).unwrap();
        for t in 0..4 {
            for ((h, f), p) in half.tensors()[t].iter().zip(full.tensors()[t]).zip(base.tensors()[t]) {
                assert!(((f - p) - 2.0 * (h - p)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        let a = block([1.0, 1.0]);
        let b = ResidualBlock::zeros(2);
        assert!(task_arithmetic_layer(&a, &[&b], 0.5).is_err());
        assert!(fold_layers(&a, &[&b], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn fold_hand_examples() {
        let li = block([4.0, 8.0]);
        let lj = block([0.0, 4.0]);
        assert_eq!(fold_weights(&[3.0, 1.0]).unwrap(), vec![0.75, 0.25]);
        let out = fold_layers(&li, &[&lj], &[3.0, 1.0]).unwrap();
        let expect = [0.75 * 4.0 + 0.25 * 0.0, 0.75 * 8.0 + 0.25 * 4.0];
        for (o, e) in pair(&out).iter().zip(expect) {
            assert!((o - e).abs() <= 1e-12 * e.abs());
        }
        assert_eq!(fold_layers(&li, &[], &[0.3]).unwrap(), li);
        let beta = fold_weights(&[0.5, 0.5, 0.5]).unwrap();
        for b in &beta {
            assert!((b - 1.0 / 3.0).abs() < 1e-15);
        }
        assert!((beta.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fold_identical_layers_is_exact() {
        let p = block([0.1, -0.7]);
        let out = fold_layers(&p, &[&p.clone(), &p.clone()], &[0.25, 0.5, 1.0]).unwrap();
        assert_eq!(out, p);
    }

    #[test]
    fn fold_rejects_bad_weights() {
        let p = block([1.0, 1.0]);
        assert!(fold_weights(&[]).is_err());
        assert!(fold_layers(&p, &[&p], &[1.0, 0.0]).is_err());
        assert!(fold_layers(&p, &[&p], &[1.0]).is_err());
    }
}
