//! Residual MLP stack shared by the base model and every finetuned variant.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::Matrix;

/// One block: `x + W2·relu(W1·x + b1) + b2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualBlock {
    #[serde(rename = "W1")]
    pub w1: Matrix,
    pub b1: Vec<f64>,
    #[serde(rename = "W2")]
    pub w2: Matrix,
    pub b2: Vec<f64>,
}

impl ResidualBlock {
    pub fn zeros(hidden: usize) -> Self {
        ResidualBlock {
            w1: Matrix::zeros(hidden, hidden),
            b1: vec![0.0; hidden],
            w2: Matrix::zeros(hidden, hidden),
            b2: vec![0.0; hidden],
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.b1.len()
    }

    pub fn num_params(&self) -> usize {
        let h = self.hidden_dim();
        2 * h * h + 2 * h
    }

    pub fn same_shape(&self, other: &ResidualBlock) -> bool {
        self.w1.shape() == other.w1.shape()
            && self.w2.shape() == other.w2.shape()
            && self.b1.len() == other.b1.len()
            && self.b2.len() == other.b2.len()
    }

    pub fn is_well_formed(&self) -> bool {
        let h = self.b1.len();
        self.w1.shape() == (h, h) && self.w2.shape() == (h, h) && self.b2.len() == h
    }

    /// Parameter tensors in fixed order: W1, b1, W2, b2.
    pub fn tensors(&self) -> [&[f64]; 4] {
        [self.w1.as_slice(), &self.b1, self.w2.as_slice(), &self.b2]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 4] {
        [
            self.w1.as_mut_slice(),
            &mut self.b1,
            self.w2.as_mut_slice(),
            &mut self.b2,
        ]
    }

    /// Elementwise map over parameters of `self` and `others` in lockstep.
    pub fn zip_map(&self, others: &[&ResidualBlock], f: impl Fn(f64, &[f64]) -> f64) -> ResidualBlock {
        let mut out = self.clone();
        let mut scratch = vec![0.0; others.len()];
        for (t, dst) in out.tensors_mut().into_iter().enumerate() {
            for (i, d) in dst.iter_mut().enumerate() {
                for (s, o) in scratch.iter_mut().zip(others) {
                    *s = o.tensors()[t][i];
                }
                *d = f(*d, &scratch);
            }
        }
        out
    }

    /// Multiplies the residual branch by `scale`, leaving the skip path alone.
    pub fn scale_branch(&mut self, scale: f64) {
        self.w2.map_inplace(|v| v * scale);
        self.b2.iter_mut().for_each(|v| *v *= scale);
    }

    pub fn forward(&self, x: &Matrix) -> Matrix {
        let mut a = self.w1.affine_rows(x, &self.b1);
        a.map_inplace(|v| v.max(0.0));
        let mut out = self.w2.affine_rows(&a, &self.b2);
        for (o, xi) in out.as_mut_slice().iter_mut().zip(x.as_slice()) {
            *o += xi;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Head {
    #[serde(rename = "W")]
    pub w: Matrix,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayeredModel {
    pub label: String,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub num_classes: usize,
    pub blocks: Vec<ResidualBlock>,
    pub head: Head,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelShape {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub num_layers: usize,
    pub num_classes: usize,
}

impl ModelShape {
    pub fn check(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_dim == 0 || self.num_classes == 0 {
            return Err(Error::config("model dimensions must be positive"));
        }
        if self.input_dim > self.hidden_dim {
            return Err(Error::config(format!(
                "input_dim {} exceeds hidden_dim {}; inputs are zero-padded into the hidden width",
                self.input_dim, self.hidden_dim
            )));
        }
        Ok(())
    }
}

impl LayeredModel {
    /// Seeded initialization: weights uniform in ±1/√hidden_dim, biases zero.
    pub fn init(shape: ModelShape, seed: u64, label: impl Into<String>) -> Result<Self> {
        shape.check()?;
        let h = shape.hidden_dim;
        let bound = 1.0 / (h as f64).sqrt();
        let mut rng = rng::seeded(seed);
        let mut uniform = |rows: usize, cols: usize| {
            Matrix::from_vec(
                rows,
                cols,
                (0..rows * cols).map(|_| rng.random_range(-bound..=bound)).collect(),
            )
        };
        let blocks = (0..shape.num_layers)
            .map(|_| ResidualBlock {
                w1: uniform(h, h),
                b1: vec![0.0; h],
                w2: uniform(h, h),
                b2: vec![0.0; h],
            })
            .collect();
        let head = Head {
            w: uniform(shape.num_classes, h),
            b: vec![0.0; shape.num_classes],
        };
        Ok(LayeredModel {
            label: label.into(),
            input_dim: shape.input_dim,
            hidden_dim: h,
            num_classes: shape.num_classes,
            blocks,
            head,
        })
    }

    pub fn zeros(shape: ModelShape, label: impl Into<String>) -> Result<Self> {
        shape.check()?;
        Ok(LayeredModel {
            label: label.into(),
            input_dim: shape.input_dim,
            hidden_dim: shape.hidden_dim,
            num_classes: shape.num_classes,
            blocks: vec![ResidualBlock::zeros(shape.hidden_dim); shape.num_layers],
            head: Head {
                w: Matrix::zeros(shape.num_classes, shape.hidden_dim),
                b: vec![0.0; shape.num_classes],
            },
        })
    }

    pub fn num_layers(&self) -> usize {
        self.blocks.len()
    }

    pub fn shape(&self) -> ModelShape {
        ModelShape {
            input_dim: self.input_dim,
            hidden_dim: self.hidden_dim,
            num_layers: self.blocks.len(),
            num_classes: self.num_classes,
        }
    }

    pub fn num_params(&self) -> usize {
        self.blocks.iter().map(ResidualBlock::num_params).sum::<usize>() + self.head_params()
    }

    pub fn head_params(&self) -> usize {
        self.head.w.as_slice().len() + self.head.b.len()
    }

    /// Checks internal shape consistency.
    pub fn check_integrity(&self) -> Result<()> {
        self.shape().check()?;
        for (i, b) in self.blocks.iter().enumerate() {
            if !b.is_well_formed() || b.hidden_dim() != self.hidden_dim {
                return Err(Error::Integrity(format!("block {i} does not match hidden_dim {}", self.hidden_dim)));
            }
        }
        if self.head.w.shape() != (self.num_classes, self.hidden_dim) || self.head.b.len() != self.num_classes {
            return Err(Error::Integrity("head shape does not match num_classes × hidden_dim".into()));
        }
        Ok(())
    }

    /// True when layers can be exchanged between the two models.
    pub fn compatible_with(&self, other: &LayeredModel) -> bool {
        self.shape() == other.shape()
    }

    pub(crate) fn embed(&self, batch: &Matrix) -> Matrix {
        let mut h = Matrix::zeros(batch.rows(), self.hidden_dim);
        for n in 0..batch.rows() {
            h.row_mut(n)[..self.input_dim].copy_from_slice(batch.row(n));
        }
        h
    }

    pub fn forward(&self, batch: &Matrix) -> Result<Matrix> {
        if batch.cols() != self.input_dim {
            return Err(Error::Shape(format!(
                "batch has {} columns, model expects input_dim {}",
                batch.cols(),
                self.input_dim
            )));
        }
        let mut h = self.embed(batch);
        for block in &self.blocks {
            h = block.forward(&h);
        }
        Ok(self.head.w.affine_rows(&h, &self.head.b))
    }

    /// Class predictions; ties go to the lowest class index.
    pub fn predict(&self, batch: &Matrix) -> Result<Vec<usize>> {
        let logits = self.forward(batch)?;
        Ok((0..logits.rows()).map(|n| argmax(logits.row(n))).collect())
    }

    /// All parameter tensors in canonical order (blocks then head).
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut v: Vec<&[f64]> = self.blocks.iter().flat_map(|b| b.tensors()).collect();
        v.push(self.head.w.as_slice());
        v.push(&self.head.b);
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v: Vec<&mut [f64]> = self.blocks.iter_mut().flat_map(|b| b.tensors_mut()).collect();
        v.push(self.head.w.as_mut_slice());
        v.push(&mut self.head.b);
        v
    }

    /// Euclidean distance between parameter vectors of two same-shaped models.
    pub fn param_distance(&self, other: &LayeredModel) -> f64 {
        self.tensors()
            .iter()
            .zip(other.tensors())
            .flat_map(|(a, b)| a.iter().zip(b.iter()))
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(l: usize) -> ModelShape {
        ModelShape {
            input_dim: 2,
            hidden_dim: 3,
            num_layers: l,
            num_classes: 2,
        }
    }

    #[test]
    fn zero_model_gives_zero_logits() {
        let m = LayeredModel::zeros(shape(4), "z").unwrap();
        let x = Matrix::from_vec(3, 2, vec![1.0, -2.0, 0.5, 3.0, 7.0, 1.0]);
        assert!(m.forward(&x).unwrap().as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_block_is_identity() {
        let x = Matrix::from_vec(2, 3, vec![1.0, -2.0, 0.5, 3.0, 7.0, 1.0]);
        assert_eq!(ResidualBlock::zeros(3).forward(&x), x);
    }

    #[test]
    fn removing_zero_block_keeps_logits() {
        let mut m = LayeredModel::init(shape(3), 4, "m").unwrap();
        m.blocks[1] = ResidualBlock::zeros(3);
        let x = Matrix::from_vec(2, 2, vec![0.3, -1.0, 2.0, 0.25]);
        let before = m.forward(&x).unwrap();
        m.blocks.remove(1);
        assert_eq!(m.forward(&x).unwrap(), before);
    }

    #[test]
    fn one_layer_hand_computation() {
        // hidden 2, input 1: h = [x, 0]
        let mut m = LayeredModel::zeros(
            ModelShape {
                input_dim: 1,
                hidden_dim: 2,
                num_layers: 1,
                num_classes: 2,
            },
            "hand",
        )
        .unwrap();
        let b = &mut m.blocks[0];
        b.w1 = Matrix::from_vec(2, 2, vec![1.0, 0.0, -1.0, 0.0]);
        b.b1 = vec![0.0, 0.5];
        b.w2 = Matrix::from_vec(2, 2, vec![0.0, 0.0, 2.0, 1.0]);
        b.b2 = vec![0.0, -1.0];
        m.head.w = Matrix::from_vec(2, 2, vec![1.0, 0.0, 0.0, 1.0]);
        m.head.b = vec![0.1, 0.0];
        let x = Matrix::from_vec(2, 1, vec![2.0, -1.0]);
        // x=2: z=[2,-1.5] a=[2,0] u=[0,3] -> h=[2,3]; logits=[2.1,3]
        // x=-1: z=[-1,1.5] a=[0,1.5] u=[0,0.5] -> h=[-1,0.5]; logits=[-0.9,0.5]
        let y = m.forward(&x).unwrap();
        assert_eq!(y.row(0), &[2.1, 3.0]);
        assert_eq!(y.row(1), &[-0.9, 0.5]);
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let m = LayeredModel::zeros(shape(1), "z").unwrap();
        assert!(matches!(m.forward(&Matrix::zeros(1, 3)), Err(Error::Shape(_))));
    }

    #[test]
    fn input_wider_than_hidden_rejected() {
        let s = ModelShape {
            input_dim: 5,
            hidden_dim: 3,
            num_layers: 1,
            num_classes: 2,
        };
        assert!(LayeredModel::init(s, 0, "x").is_err());
    }
}
