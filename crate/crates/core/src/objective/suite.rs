//! Budgeted calibration data. Each task is shuffled once; a budget of `b`
//! evaluates the first `b` examples of that fixed order, so lower budgets
//! always see a prefix of what higher budgets see.

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::Matrix;
use crate::zoo::{make_task_datasets, LabeledDataset, LayeredModel, TaskSpec};

use super::ObjectiveVector;

#[derive(Debug, Clone)]
pub struct CalibrationTask {
    pub task_id: String,
    pub max_budget: usize,
    pub shuffle_seed: u64,
    order: Vec<usize>,
    shuffled: LabeledDataset,
    /// Optional (search budget → task budget) overrides.
    budget_map: Vec<(usize, usize)>,
}

impl CalibrationTask {
    pub fn new(task_id: impl Into<String>, data: LabeledDataset, max_budget: usize, shuffle_seed: u64) -> Result<Self> {
        let task_id = task_id.into();
        if max_budget > data.len() {
            return Err(Error::config(format!(
                "task `{task_id}`: max_budget {max_budget} exceeds dataset size {}",
                data.len()
            )));
        }
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut rng::seeded(shuffle_seed));
        let shuffled = data.subset(&order);
        Ok(CalibrationTask {
            task_id,
            max_budget,
            shuffle_seed,
            order,
            shuffled,
            budget_map: Vec::new(),
        })
    }

    /// Overrides the number of examples this task uses at given search budgets.
    pub fn with_budget_map(mut self, map: Vec<(usize, usize)>) -> Result<Self> {
        if let Some(&(_, b)) = map.iter().find(|(_, b)| *b > self.max_budget || *b == 0) {
            return Err(Error::config(format!(
                "task `{}`: mapped budget {b} outside 1..={}",
                self.task_id, self.max_budget
            )));
        }
        self.budget_map = map;
        Ok(self)
    }

    pub fn budget_for(&self, budget: usize) -> Result<usize> {
        let b = self
            .budget_map
            .iter()
            .find(|(from, _)| *from == budget)
            .map_or(budget, |&(_, to)| to);
        if b == 0 {
            return Err(Error::Evaluation(format!("task `{}`: budget must be positive", self.task_id)));
        }
        if b > self.max_budget || b > self.order.len() {
            return Err(Error::Evaluation(format!(
                "task `{}`: budget {b} exceeds available calibration examples ({})",
                self.task_id,
                self.max_budget.min(self.order.len())
            )));
        }
        Ok(b)
    }

    /// Original dataset indices evaluated at `budget`.
    pub fn indices(&self, budget: usize) -> Result<&[usize]> {
        Ok(&self.order[..self.budget_for(budget)?])
    }

    pub fn error_rate(&self, model: &LayeredModel, budget: usize) -> Result<f64> {
        let b = self.budget_for(budget)?;
        let width = self.shuffled.input_dim();
        let inputs = Matrix::from_vec(b, width, self.shuffled.inputs.as_slice()[..b * width].to_vec());
        let pred = model.predict(&inputs)?;
        let wrong = pred.iter().zip(&self.shuffled.labels[..b]).filter(|(p, l)| p != l).count();
        Ok(wrong as f64 / b as f64)
    }
}

#[derive(Debug, Clone, Default)]
pub struct CalibrationSuite {
    pub tasks: Vec<CalibrationTask>,
}

impl CalibrationSuite {
    /// Calibration splits of `specs`, each with its full size as max budget.
    pub fn from_task_specs(specs: &[TaskSpec]) -> Result<Self> {
        let tasks = specs
            .iter()
            .map(|s| {
                let calib = make_task_datasets(s)?.calib;
                CalibrationTask::new(s.task_id.clone(), calib, s.calib_size, rng::mix(s.seed, 7))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CalibrationSuite { tasks })
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    /// Smallest per-task maximum budget.
    pub fn max_budget(&self) -> usize {
        self.tasks.iter().map(|t| t.max_budget).min().unwrap_or(0)
    }
}

/// Per-task error rates on the budget-`b` prefix of each task.
pub fn evaluate(model: &LayeredModel, suite: &CalibrationSuite, budget: usize) -> Result<ObjectiveVector> {
    if suite.is_empty() {
        return Err(Error::Evaluation("calibration suite has no tasks".into()));
    }
    let values = suite
        .tasks
        .iter()
        .map(|t| t.error_rate(model, budget))
        .collect::<Result<Vec<_>>>()?;
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Evaluation("non-finite objective".into()));
    }
    Ok(ObjectiveVector(values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo::{Generator, ModelShape};

    fn constant_model(class: usize, input_dim: usize, classes: usize) -> LayeredModel {
        let shape = ModelShape {
            input_dim,
            hidden_dim: input_dim.max(2),
            num_layers: 1,
            num_classes: classes,
        };
        let mut m = LayeredModel::zeros(shape, "const").unwrap();
        m.head.b[class] = 1.0;
        m
    }

    #[test]
    fn constant_model_on_balanced_set() {
        let spec = TaskSpec::new("t", Generator::XorBands, 1).with_classes(2).with_sizes(4, 101, 4);
        let suite = CalibrationSuite::from_task_specs(&[spec]).unwrap();
        let f = evaluate(&constant_model(0, 8, 2), &suite, 101).unwrap();
        assert!((f.0[0] - 0.5).abs() <= 1.0 / 101.0);
    }

    #[test]
    fn hand_linear_model_four_examples() {
        // one input + padding; head reads the raw coordinate: class 1 iff x > 0
        let data = LabeledDataset {
            inputs: Matrix::from_vec(4, 1, vec![-1.0, 2.0, 0.5, -0.25]),
            labels: vec![0, 1, 0, 0],
            num_classes: 2,
            order_seed: 0,
        };
        let mut m = constant_model(0, 1, 2);
        m.head.b = vec![0.0, 0.0];
        m.head.w = Matrix::from_vec(2, 2, vec![0.0, 0.0, 1.0, 0.0]);
        // predictions: [0, 1, 1, 0] → one error (index 2)
        let suite = CalibrationSuite {
            tasks: vec![CalibrationTask::new("h", data, 4, 3).unwrap()],
        };
        assert_eq!(evaluate(&m, &suite, 4).unwrap().0, vec![0.25]);
    }

    #[test]
    fn budget_prefix_property() {
        let spec = TaskSpec::new("t", Generator::GaussianBlobs, 9).with_sizes(4, 300, 4);
        let suite = CalibrationSuite::from_task_specs(&[spec]).unwrap();
        let small = suite.tasks[0].indices(100).unwrap();
        let large = suite.tasks[0].indices(300).unwrap();
        assert_eq!(small, &large[..100]);
    }

    #[test]
    fn budget_errors() {
        let spec = TaskSpec::new("t", Generator::GaussianBlobs, 9).with_sizes(4, 50, 4);
        let suite = CalibrationSuite::from_task_specs(std::slice::from_ref(&spec)).unwrap();
        let m = constant_model(0, 8, 4);
        assert!(matches!(evaluate(&m, &suite, 51), Err(Error::Evaluation(_))));
        let empty = CalibrationSuite::from_task_specs(&[spec.with_sizes(4, 0, 4)]).unwrap();
        assert!(evaluate(&m, &empty, 1).is_err());
    }

    #[test]
    fn per_task_budget_map() {
        let a = TaskSpec::new("a", Generator::GaussianBlobs, 1).with_sizes(4, 1000, 4);
        let b = TaskSpec::new("wsc", Generator::XorBands, 2).with_sizes(4, 500, 4);
        let mut suite = CalibrationSuite::from_task_specs(&[a, b]).unwrap();
        let t = suite.tasks.pop().unwrap().with_budget_map(vec![(100, 100), (300, 200), (1000, 500)]).unwrap();
        assert_eq!(t.budget_for(300).unwrap(), 200);
        assert_eq!(t.budget_for(1000).unwrap(), 500);
        assert!(t.clone().with_budget_map(vec![(1000, 501)]).is_err());
    }
}
