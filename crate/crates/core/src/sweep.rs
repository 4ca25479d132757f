//! Pruning-ratio sweep: one search per ratio, each reseeded as `seed ^ index`.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizer::{best_mean_error, SearchConfig};
use crate::pipeline::{execute_search, Workspace};
use crate::space::Config;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub ratio: f64,
    pub remove_count: usize,
    pub seed: u64,
    /// `None` when no trial reached the maximum budget.
    pub best_mean_error: Option<f64>,
    pub best_objectives: Option<Vec<f64>>,
    pub best_config: Option<Config>,
}

/// Search config for the `index`-th ratio of a sweep.
pub fn ratio_config(base: &SearchConfig, ratio: f64, index: usize) -> Result<SearchConfig> {
    if !(0.0..1.0).contains(&ratio) {
        return Err(Error::config(format!("pruning ratio {ratio} outside [0, 1)")));
    }
    let mut cfg = base.clone();
    cfg.space = cfg.space.with_sparsity(ratio)?;
    cfg.seed = base.seed ^ index as u64;
    Ok(cfg)
}

/// Runs one search per ratio; each run's files go to `out_dir/ratio-<index>`.
pub fn sweep_ratio(base: &SearchConfig, ratios: &[f64], ws: &Workspace, out_dir: &Path) -> Result<Vec<RatioRow>> {
    if ratios.is_empty() {
        return Err(Error::config("ratio sweep needs at least one ratio"));
    }
    let configs = ratios
        .iter()
        .enumerate()
        .map(|(i, &r)| ratio_config(base, r, i))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(ratios.len());
    for (i, (cfg, &ratio)) in configs.iter().zip(ratios).enumerate() {
        let outcome = execute_search(cfg, ws, &out_dir.join(format!("ratio-{i}")), false)?;
        let best = best_mean_error(&outcome.history, cfg.b_max);
        rows.push(RatioRow {
            ratio,
            remove_count: cfg.space.remove_count,
            seed: cfg.seed,
            best_mean_error: best.map(|t| t.objectives.mean()),
            best_objectives: best.map(|t| t.objectives.0.clone()),
            best_config: best.map(|t| t.config.clone()),
        });
    }
    Ok(rows)
}

pub fn render_sweep(rows: &[RatioRow]) -> String {
    let mut s = String::from("ratio   removed  best_avg_error  best_removed_layers\n");
    for r in rows {
        let err = r.best_mean_error.map_or("-".to_string(), |e| format!("{e:.4}"));
        let removed = r.best_config.as_ref().map_or("-".to_string(), removed_layers);
        let _ = writeln!(s, "{:<6}  {:>7}  {:>14}  {}", r.ratio, r.remove_count, err, removed);
    }
    s
}

pub fn sweep_csv(rows: &[RatioRow]) -> String {
    let mut s = String::from("ratio,remove_count,seed,best_mean_error,best_removed_layers\n");
    for r in rows {
        let err = r.best_mean_error.map_or(String::new(), |e| e.to_string());
        let removed = r.best_config.as_ref().map_or(String::new(), removed_layers);
        let _ = writeln!(s, "{},{},{},{},{}", r.ratio, r.remove_count, r.seed, err, removed);
    }
    s
}

fn removed_layers(c: &Config) -> String {
    let v: Vec<String> = c
        .removed()
        .iter()
        .enumerate()
        .filter(|(_, &b)| b)
        .map(|(i, _)| i.to_string())
        .collect();
    if v.is_empty() {
        "none".into()
    } else {
        v.join(" ")
    }
}
