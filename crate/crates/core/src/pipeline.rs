//! Glue between a run config, a loaded family, and the files a search leaves behind.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::objective::{CalibrationSuite, ParetoFront, StitchObjective};
use crate::optimizer::{
    allocation_csv, budget_allocation_report, read_journal, render_allocation, run_search, JournalWriter,
    SearchConfig, SearchOutcome,
};
use crate::runconfig::RunConfig;
use crate::space::Config;
use crate::surrogate::TrialRecord;
use crate::zoo::{load_family, Family, TaskSpec};

pub const JOURNAL_FILE: &str = "journal.jsonl";
pub const PARETO_JSON: &str = "pareto.json";
pub const PARETO_CSV: &str = "pareto.csv";
pub const ALLOCATION_FILE: &str = "allocation.txt";
pub const ALLOCATION_CSV: &str = "allocation.csv";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const BEST_CONFIG: &str = "best_config.json";
pub const RESOLVED_CONFIG: &str = "run_config.resolved.json";

/// A family together with the calibration suite it is scored on.
pub struct Workspace {
    pub family: Family,
    pub suite: CalibrationSuite,
}

impl Workspace {
    pub fn new(family: Family, suite_tasks: Option<&[TaskSpec]>) -> Result<Self> {
        let suite = CalibrationSuite::from_task_specs(suite_tasks.unwrap_or(&family.tasks))?;
        Ok(Workspace { family, suite })
    }

    pub fn load(run: &RunConfig) -> Result<Self> {
        let (family, _) = load_family(&run.zoo_manifest)?;
        Workspace::new(family, run.suite.as_deref())
    }

    pub fn objective(&self) -> StitchObjective<'_> {
        StitchObjective {
            base: &self.family.base,
            candidates: &self.family.variants,
            suite: &self.suite,
        }
    }

    /// Checks that a search's space and budgets fit this family and suite.
    pub fn check_search(&self, cfg: &SearchConfig) -> Result<()> {
        let l = self.family.base.num_layers();
        if cfg.space.l != l {
            return Err(Error::config(format!("space has l = {} but the family has {l} layers", cfg.space.l)));
        }
        if cfg.space.k != self.family.variants.len() {
            return Err(Error::config(format!(
                "space has K = {} but the family has {} variants",
                cfg.space.k,
                self.family.variants.len()
            )));
        }
        if cfg.b_max > self.suite.max_budget() {
            return Err(Error::config(format!(
                "b_max {} exceeds the calibration suite's {} examples per task",
                cfg.b_max,
                self.suite.max_budget()
            )));
        }
        Ok(())
    }
}

/// Runs (or resumes) a search, journaling into `out_dir`, then writes the
/// exports. A failure once the journal exists is reported as
/// [`Error::Interrupted`].
pub fn execute_search(cfg: &SearchConfig, ws: &Workspace, out_dir: &Path, resume: bool) -> Result<SearchOutcome> {
    cfg.check()?;
    ws.check_search(cfg)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let journal_path = out_dir.join(JOURNAL_FILE);
    let replay = if resume {
        read_journal(&journal_path)?
    } else {
        Vec::new()
    };
    let resolved = serde_json::to_string_pretty(cfg).expect("search config serializes");
    let resolved_path = out_dir.join(RESOLVED_CONFIG);
    fs::write(&resolved_path, resolved).map_err(|e| Error::io(&resolved_path, e))?;

    let mut writer = JournalWriter::create(&journal_path)?;
    let mut written = 0usize;
    let objective = ws.objective();
    let outcome = run_search(cfg, &objective, &replay, &mut |r| {
        writer.append(r)?;
        written += 1;
        Ok(())
    })
    .map_err(|e| match e {
        e @ (Error::Config(_) | Error::InvalidConfig(_)) if written == 0 => e,
        e => Error::Interrupted {
            trials: written,
            source: Box::new(e),
        },
    })?;
    write_exports(cfg, &outcome, out_dir)?;
    Ok(outcome)
}

/// Writes the front, allocation report and summary for a finished run.
pub fn write_exports(cfg: &SearchConfig, outcome: &SearchOutcome, out_dir: &Path) -> Result<()> {
    let files: [(&str, String); 5] = [
        (PARETO_JSON, pareto_json(&outcome.front)),
        (PARETO_CSV, pareto_csv(&outcome.front)),
        (ALLOCATION_FILE, render_allocation(&budget_allocation_report(&outcome.history))),
        (ALLOCATION_CSV, allocation_csv(&budget_allocation_report(&outcome.history))),
        (SUMMARY_FILE, summary(cfg, outcome)),
    ];
    for (name, text) in files {
        let p = out_dir.join(name);
        fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
    }
    if let Some(best) = &outcome.best {
        let p = out_dir.join(BEST_CONFIG);
        let text = serde_json::to_string_pretty(&best.config).expect("config serializes");
        fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
    }
    Ok(())
}

pub fn pareto_json(front: &ParetoFront) -> String {
    let mut s = serde_json::to_string_pretty(&front.sorted()).expect("front serializes");
    s.push('\n');
    s
}

pub fn pareto_csv(front: &ParetoFront) -> String {
    let m = front.members().first().map_or(0, |f| f.objectives.0.len());
    let mut s = String::from("rank");
    for i in 0..m {
        let _ = write!(s, ",f{i}");
    }
    s.push_str(",mean,scalarized_best,removed_layers,encoding\n");
    for (i, f) in front.sorted().into_iter().enumerate() {
        let _ = write!(s, "{i}");
        for v in &f.objectives.0 {
            let _ = write!(s, ",{v}");
        }
        let _ = writeln!(
            s,
            ",{},{},{},{}",
            f.objectives.mean(),
            f.scalarized_best,
            removed_list(&f.config),
            f.encoding.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
        );
    }
    s
}

fn removed_list(config: &Config) -> String {
    config
        .removed()
        .iter()
        .enumerate()
        .filter(|(_, &r)| r)
        .map(|(i, _)| i.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Plain-text description of a configuration, one line per layer position.
pub fn describe_config(config: &Config, base_label: &str, labels: &[String]) -> String {
    let mut s = String::new();
    match config {
        Config::Prune(p) => {
            for i in 0..p.r.len() {
                if p.r[i] {
                    let _ = writeln!(s, "  layer {i}: removed");
                    continue;
                }
                let chosen: Vec<&str> = p.c[i]
                    .iter()
                    .enumerate()
                    .filter(|(_, &b)| b)
                    .map(|(k, _)| labels.get(k).map_or("?", |l| l.as_str()))
                    .collect();
                let source = match chosen.len() {
                    0 => base_label.to_string(),
                    1 => chosen[0].to_string(),
                    _ => format!("merge({}) mu={}", chosen.join(", "), p.merge_factor[i]),
                };
                let _ = writeln!(s, "  layer {i}: {source}, output scale {}", p.output_scale[i]);
            }
        }
        Config::Fold(f) => {
            for i in 0..f.fold_select.len() {
                let state = if f.fold_select[i] { "folded" } else { "kept" };
                let _ = writeln!(s, "  layer {i}: {state}, importance {}", f.importance[i]);
            }
        }
    }
    s
}

pub fn summary(cfg: &SearchConfig, outcome: &SearchOutcome) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "mode {} | l = {} | remove {} | seed {} | trials {}",
        cfg.space.mode.name(),
        cfg.space.l,
        cfg.space.remove_count,
        cfg.seed,
        outcome.history.len()
    );
    match &outcome.best {
        Some(b) => {
            let _ = writeln!(s, "best configuration (trial {}), scalarized {}", b.timestamp, b.scalarized);
            let _ = writeln!(s, "  objectives {:?}, mean {}", b.objectives.0, b.objectives.mean());
            let labels: Vec<String> = (0..cfg.space.k).map(|k| format!("variant{k}")).collect();
            s.push_str(&describe_config(&b.config, "base", &labels));
        }
        None => s.push_str("no trial reached the maximum budget\n"),
    }
    let _ = writeln!(s, "pareto front: {} configurations", outcome.front.len());
    s
}

/// Reads a run's journal and rebuilds its front and report.
pub fn replay_outputs(journal: &Path, b_max: usize) -> Result<(Vec<TrialRecord>, ParetoFront)> {
    let history = read_journal(journal)?;
    let front = crate::optimizer::front_from_history(&history, b_max);
    Ok((history, front))
}

