use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::surrogate::TrialRecord;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationRow {
    pub budget: usize,
    pub trials: usize,
    pub percent: f64,
}

/// Trial counts per budget rung, ascending by budget.
pub fn budget_allocation_report(history: &[TrialRecord]) -> Vec<AllocationRow> {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for t in history {
        *counts.entry(t.budget).or_default() += 1;
    }
    let total = history.len() as f64;
    counts
        .into_iter()
        .map(|(budget, trials)| AllocationRow {
            budget,
            trials,
            percent: 100.0 * trials as f64 / total,
        })
        .collect()
}

pub fn render_allocation(rows: &[AllocationRow]) -> String {
    let mut s = String::from("budget   trials  percent\n");
    for r in rows {
        let _ = writeln!(s, "{:>6}  {:>7}  {:>6.1}%", r.budget, r.trials, r.percent);
    }
    s
}

pub fn allocation_csv(rows: &[AllocationRow]) -> String {
    let mut s = String::from("budget,trials,percent\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{}", r.budget, r.trials, r.percent);
    }
    s
}
