//! Exhaustive evaluation of small search spaces, used to check the optimizer.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::{cmp_vec, dominates, lattice_points, parego_scalarize, LambdaWeights, Objective, ObjectiveVector};
use crate::space::{encode, enumerate, Config, SpaceSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRow {
    pub index: usize,
    pub encoding: Vec<f64>,
    pub config: Config,
    /// `None` for configurations that cannot be assembled or evaluated.
    pub objectives: Option<ObjectiveVector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub infeasible: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaArgmin {
    pub lambda: LambdaWeights,
    pub index: usize,
    pub encoding: Vec<f64>,
    pub scalarized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub budget: usize,
    pub alpha: f64,
    pub rows: Vec<OracleRow>,
    /// Row indices of the non-dominated feasible rows, ascending.
    pub front: Vec<usize>,
    pub argmins: Vec<LambdaArgmin>,
}

/// Evaluates every configuration of `spec` at `budget`, refusing spaces
/// larger than `cap`.
pub fn evaluate_all(
    spec: &SpaceSpec,
    objective: &dyn Objective,
    budget: usize,
    cap: u64,
    threads: usize,
) -> Result<Vec<OracleRow>> {
    let configs: Vec<Config> = enumerate(spec, cap)?.collect();
    let eval = |(index, config): (usize, Config)| -> Result<OracleRow> {
        let encoding = encode(&config, spec)?;
        let (objectives, infeasible) = match objective.evaluate(&config, budget) {
            Ok(v) => (Some(v), None),
            Err(e) => (None, Some(e.to_string())),
        };
        Ok(OracleRow { index, encoding, config, objectives, infeasible })
    };
    let work = configs.into_iter().enumerate();
    if threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::config(format!("thread pool: {e}")))?;
        pool.install(|| work.collect::<Vec<_>>().into_par_iter().map(eval).collect())
    } else {
        work.map(eval).collect()
    }
}

/// Indices of feasible rows no other feasible row dominates; duplicates of a
/// non-dominated vector are all kept.
pub fn non_dominated(rows: &[OracleRow]) -> Vec<usize> {
    let feasible: Vec<(usize, &[f64])> = rows
        .iter()
        .filter_map(|r| r.objectives.as_ref().map(|o| (r.index, o.0.as_slice())))
        .collect();
    feasible
        .iter()
        .filter(|(_, a)| !feasible.iter().any(|(_, b)| dominates(b, a)))
        .map(|(i, _)| *i)
        .collect()
}

/// Feasible row minimizing the scalarized value (ties to the smaller encoding).
pub fn argmin(rows: &[OracleRow], lambda: &LambdaWeights, alpha: f64) -> Result<Option<LambdaArgmin>> {
    let mut best: Option<LambdaArgmin> = None;
    for r in rows {
        let Some(o) = &r.objectives else { continue };
        let v = parego_scalarize(o, lambda, alpha)?;
        let better = match &best {
            None => true,
            Some(b) => v < b.scalarized || (v == b.scalarized && cmp_vec(&r.encoding, &b.encoding).is_lt()),
        };
        if better {
            best = Some(LambdaArgmin {
                lambda: lambda.clone(),
                index: r.index,
                encoding: r.encoding.clone(),
                scalarized: v,
            });
        }
    }
    Ok(best)
}

/// Full oracle: table, true front, and the argmin for every point of the
/// weight lattice at resolution `q`.
pub fn run_oracle(
    spec: &SpaceSpec,
    objective: &dyn Objective,
    budget: usize,
    alpha: f64,
    q: usize,
    cap: u64,
    threads: usize,
) -> Result<OracleReport> {
    let rows = evaluate_all(spec, objective, budget, cap, threads)?;
    let front = non_dominated(&rows);
    let m = objective.num_objectives();
    let mut argmins = Vec::new();
    for counts in lattice_points(m, q) {
        let lambda = LambdaWeights::from_counts(&counts, q)?;
        if let Some(a) = argmin(&rows, &lambda, alpha)? {
            argmins.push(a);
        }
    }
    Ok(OracleReport { budget, alpha, rows, front, argmins })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{Config, Mode};

    struct Removed;

    impl Objective for Removed {
        fn num_objectives(&self) -> usize {
            2
        }

        fn evaluate(&self, config: &Config, _budget: usize) -> Result<ObjectiveVector> {
            let r = config.removed();
            if r.iter().all(|&b| b) {
                return Err(Error::Evaluation("empty model".into()));
            }
            let first = r.iter().position(|&b| b).unwrap_or(0) as f64;
            Ok(ObjectiveVector(vec![first / 4.0, 1.0 - first / 4.0]))
        }
    }

    #[test]
    fn all_removed_is_infeasible() {
        let spec = SpaceSpec::new(3, 1, 1.0, Mode::RemoveOnly).unwrap();
        let rows = evaluate_all(&spec, &Removed, 10, 100, 1).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].objectives.is_none());
        assert!(rows[0].infeasible.is_some());
        assert!(non_dominated(&rows).is_empty());
    }

    #[test]
    fn trade_off_front_keeps_everything() {
        let spec = SpaceSpec::new(4, 1, 0.25, Mode::RemoveOnly).unwrap();
        let report = run_oracle(&spec, &Removed, 10, 0.05, 10, 100, 1).unwrap();
        assert_eq!(report.rows.len(), 4);
        assert_eq!(report.front, vec![0, 1, 2, 3]);
        assert_eq!(report.argmins.len(), 11);
    }
}
