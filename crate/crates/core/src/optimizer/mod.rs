//! Bracketed successive halving over calibration budgets, with surrogate-driven
//! proposals and ParEGO scalarization.

mod journal;
mod report;
mod schedule;

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::{
    cmp_vec, parego_scalarize, sample_lambda, FrontMember, LambdaWeights, Objective, ObjectiveVector, ParetoFront,
    DEFAULT_ALPHA,
};
use crate::rng::{self, Rng};
use crate::space::{encode, Config, SpaceSpec};
use crate::surrogate::{forest_seed, sample_configurations, ProposalContext, SurrogateParams, TrialRecord, TrialStatus};

pub use journal::{read_journal, to_line, JournalWriter};
pub use report::{allocation_csv, budget_allocation_report, render_allocation, AllocationRow};
pub use schedule::{compute_schedule, Bracket, HyperbandSchedule, Stage};

/// How ParEGO weights are drawn during a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LambdaPolicy {
    /// One draw per bracket; a bracket's promotions compare like with like.
    #[default]
    PerBracket,
    /// A fresh draw for every trial.
    PerTrial,
    /// The same weights throughout.
    Fixed(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    pub b_min: usize,
    pub b_max: usize,
    pub eta: usize,
    pub t_max: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub seed: u64,
    pub space: SpaceSpec,
    #[serde(default)]
    pub surrogate: SurrogateParams,
    #[serde(default)]
    pub lambda_policy: LambdaPolicy,
    /// Worker threads for stage evaluation; 1 runs inline.
    #[serde(default = "default_threads")]
    pub threads: usize,
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

fn default_threads() -> usize {
    1
}

impl SearchConfig {
    /// Budgets (100, 1000), η = 3, α = 0.05, one thread, per-bracket weights.
    pub fn new(space: SpaceSpec, t_max: usize, seed: u64) -> Self {
        SearchConfig {
            b_min: 100,
            b_max: 1000,
            eta: 3,
            t_max,
            alpha: DEFAULT_ALPHA,
            seed,
            space,
            surrogate: SurrogateParams::default(),
            lambda_policy: LambdaPolicy::PerBracket,
            threads: 1,
        }
    }

    pub fn check(&self) -> Result<()> {
        compute_schedule(self.b_min, self.b_max, self.eta)?;
        if self.t_max == 0 {
            return Err(Error::config("t_max must be at least 1"));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::config("alpha must be positive"));
        }
        if self.threads == 0 {
            return Err(Error::config("threads must be at least 1"));
        }
        self.space.check()?;
        self.surrogate.check()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    /// Lowest-scalarized trial at the maximum budget; `None` when the trial
    /// cap ran out before any configuration reached it.
    pub best: Option<TrialRecord>,
    pub front: ParetoFront,
    pub history: Vec<TrialRecord>,
}

/// Survivors of a stage: ascending scalarized value, ties to the
/// lexicographically smaller encoding, first `keep` kept.
pub fn promote(results: &[TrialRecord], keep: usize) -> Vec<Config> {
    let mut order: Vec<&TrialRecord> = results.iter().collect();
    order.sort_by(|a, b| rank(a, b));
    order.into_iter().take(keep).map(|t| t.config.clone()).collect()
}

fn rank(a: &TrialRecord, b: &TrialRecord) -> Ordering {
    a.scalarized.total_cmp(&b.scalarized).then_with(|| cmp_vec(&a.encoding, &b.encoding))
}

/// ω*: the best trial run at `b_max`.
pub fn best_trial(history: &[TrialRecord], b_max: usize) -> Option<&TrialRecord> {
    history.iter().filter(|t| t.budget == b_max).min_by(|a, b| rank(a, b))
}

/// Lowest mean objective among successful `b_max` trials.
pub fn best_mean_error(history: &[TrialRecord], b_max: usize) -> Option<&TrialRecord> {
    history
        .iter()
        .filter(|t| t.budget == b_max && t.status == TrialStatus::Ok)
        .min_by(|a, b| {
            a.objectives
                .mean()
                .total_cmp(&b.objectives.mean())
                .then_with(|| cmp_vec(&a.encoding, &b.encoding))
        })
}

/// Non-dominated successful trials at `b_max`, built incrementally.
pub fn front_from_history(history: &[TrialRecord], b_max: usize) -> ParetoFront {
    let mut front = ParetoFront::new();
    for t in history {
        absorb(&mut front, t, b_max);
    }
    front
}

fn absorb(front: &mut ParetoFront, t: &TrialRecord, b_max: usize) {
    if t.budget == b_max && t.status == TrialStatus::Ok {
        front.update(FrontMember {
            encoding: t.encoding.clone(),
            config: t.config.clone(),
            objectives: t.objectives.clone(),
            scalarized_best: t.scalarized,
        });
    }
}

fn draw_lambda(policy: &LambdaPolicy, m: usize, rng: &mut Rng) -> Result<LambdaWeights> {
    match policy {
        LambdaPolicy::Fixed(v) => {
            if v.len() != m {
                return Err(Error::config(format!("fixed lambda has {} weights for {m} objectives", v.len())));
            }
            LambdaWeights::new(v.clone())
        }
        _ => Ok(sample_lambda(m, rng)),
    }
}

/// Runs the search. `replay` holds records from an interrupted run with the
/// same configuration; they are checked against the regenerated trials and
/// reused instead of re-evaluated. Every trial (replayed or fresh) is passed
/// to `sink` in order.
pub fn run_search(
    cfg: &SearchConfig,
    objective: &dyn Objective,
    replay: &[TrialRecord],
    sink: &mut dyn FnMut(&TrialRecord) -> Result<()>,
) -> Result<SearchOutcome> {
    cfg.check()?;
    let spec = &cfg.space;
    if spec.remove_count >= spec.l {
        return Err(Error::Search(format!(
            "no feasible configurations: removing {} of {} layers leaves an empty model",
            spec.remove_count, spec.l
        )));
    }
    let m = objective.num_objectives();
    if m == 0 {
        return Err(Error::config("objective has no tasks"));
    }
    if replay.len() > cfg.t_max {
        return Err(Error::Integrity(format!(
            "journal holds {} trials but t_max is {}",
            replay.len(),
            cfg.t_max
        )));
    }
    let schedule = compute_schedule(cfg.b_min, cfg.b_max, cfg.eta)?;
    let pool = if cfg.threads > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.threads)
                .build()
                .map_err(|e| Error::config(format!("thread pool: {e}")))?,
        )
    } else {
        None
    };

    let mut rng = rng::seeded(cfg.seed);
    let mut history: Vec<TrialRecord> = Vec::with_capacity(cfg.t_max);
    let mut front = ParetoFront::new();
    let mut round = 0u64;
    let mut sweep = 0usize;

    'run: loop {
        for (bi, bracket) in schedule.brackets.iter().enumerate() {
            if history.len() >= cfg.t_max {
                break 'run;
            }
            let bracket_lambda = draw_lambda(&cfg.lambda_policy, m, &mut rng)?;
            let ctx = ProposalContext {
                params: &cfg.surrogate,
                lambda: &bracket_lambda,
                alpha: cfg.alpha,
                b_max: cfg.b_max,
                first_bracket: sweep == 0 && bi == 0,
                forest_seed: forest_seed(cfg.seed, round),
            };
            round += 1;
            let mut configs = sample_configurations(bracket.n, &history, spec, &ctx, &mut rng)?;

            for (i, stage) in bracket.stages.iter().enumerate() {
                let remaining = cfg.t_max - history.len();
                if remaining == 0 {
                    break 'run;
                }
                configs.truncate(stage.count.min(remaining));
                let lambdas = match cfg.lambda_policy {
                    LambdaPolicy::PerTrial => configs
                        .iter()
                        .map(|_| draw_lambda(&cfg.lambda_policy, m, &mut rng))
                        .collect::<Result<Vec<_>>>()?,
                    _ => vec![bracket_lambda.clone(); configs.len()],
                };
                let encodings = configs.iter().map(|c| encode(c, spec)).collect::<Result<Vec<_>>>()?;

                let start = history.len();
                let replayed = replay.len().saturating_sub(start).min(configs.len());
                for (j, enc) in encodings.iter().take(replayed).enumerate() {
                    let r = &replay[start + j];
                    if &r.encoding != enc || r.budget != stage.budget {
                        return Err(Error::Integrity(format!(
                            "journal diverges from the run at trial {}",
                            start + j
                        )));
                    }
                }
                let fresh = &configs[replayed..];
                let eval = |c: &Config| match objective.evaluate(c, stage.budget) {
                    Ok(v) if v.0.len() == m => (v, TrialStatus::Ok),
                    Ok(_) | Err(_) => (ObjectiveVector::worst(m), TrialStatus::Failed),
                };
                let results: Vec<(ObjectiveVector, TrialStatus)> = match &pool {
                    Some(p) => p.install(|| fresh.par_iter().map(eval).collect()),
                    None => fresh.iter().map(eval).collect(),
                };

                let mut stage_records = Vec::with_capacity(configs.len());
                for (j, (config, encoding)) in configs.iter().zip(encodings).enumerate() {
                    let (objectives, status) = if j < replayed {
                        let r = &replay[start + j];
                        (r.objectives.clone(), r.status)
                    } else {
                        results[j - replayed].clone()
                    };
                    let lambda = lambdas[j].clone();
                    let scalarized = parego_scalarize(&objectives, &lambda, cfg.alpha)?;
                    let record = TrialRecord {
                        timestamp: (start + j) as u64,
                        bracket_s: bracket.s,
                        stage_i: i,
                        budget: stage.budget,
                        lambda,
                        encoding,
                        config: config.clone(),
                        objectives,
                        scalarized,
                        status,
                        seed: cfg.seed,
                    };
                    sink(&record)?;
                    absorb(&mut front, &record, cfg.b_max);
                    stage_records.push(record);
                }
                history.extend(stage_records.iter().cloned());

                if i + 1 < bracket.stages.len() {
                    let keep = (stage_records.len() / cfg.eta).max(1);
                    configs = promote(&stage_records, keep);
                }
            }
        }
        sweep += 1;
    }

    let best = best_trial(&history, cfg.b_max).cloned();
    Ok(SearchOutcome { best, front, history })
}

/// Trial counts each rung would receive, without evaluating anything.
pub fn simulate_allocation(b_min: usize, b_max: usize, eta: usize, t_max: usize) -> Result<Vec<(usize, usize)>> {
    let schedule = compute_schedule(b_min, b_max, eta)?;
    let mut counts = vec![0usize; schedule.ladder.len()];
    let mut t = 0;
    'run: loop {
        for st in schedule.brackets.iter().flat_map(|b| &b.stages) {
            if t == t_max {
                break 'run;
            }
            let take = st.count.min(t_max - t);
            counts[st.rung] += take;
            t += take;
        }
    }
    Ok(schedule.ladder.into_iter().zip(counts).collect())
}
