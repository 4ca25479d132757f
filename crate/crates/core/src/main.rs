use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use layerstitch::merge::assemble;
use layerstitch::objective::{evaluate, LAMBDA_LATTICE};
use layerstitch::optimizer::{allocation_csv, budget_allocation_report, read_journal, render_allocation};
use layerstitch::oracle::run_oracle;
use layerstitch::pipeline::{
    describe_config, execute_search, pareto_csv, pareto_json, replay_outputs, Workspace, JOURNAL_FILE, PARETO_CSV,
    PARETO_JSON,
};
use layerstitch::runconfig::{Overrides, RunConfig};
use layerstitch::space::{DEFAULT_ENUMERATION_CAP, ensure_valid, Config, Mode, SpaceSpec};
use layerstitch::sweep::{render_sweep, sweep_csv, sweep_ratio};
use layerstitch::zoo::{build_family, parse_json, write_family, ZooConfig};
use layerstitch::{Error, Result};

#[derive(Parser)]
#[command(name = "layerstitch", version, about = "Search layer-pruned models stitched from a family of finetunes")]
struct Cli {
    /// Worker threads for evaluations (default 1 keeps runs bit-reproducible).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Model family construction.
    #[command(subcommand)]
    Zoo(ZooCmd),
    /// Configuration search.
    #[command(subcommand)]
    Search(SearchCmd),
    /// Exhaustive evaluation of small spaces.
    #[command(subcommand)]
    Oracle(OracleCmd),
    /// Evaluate one configuration at full budget.
    Eval(EvalArgs),
    /// Front exports rebuilt from a journal.
    #[command(subcommand)]
    Pareto(ParetoCmd),
    /// Reports rebuilt from a journal.
    #[command(subcommand)]
    Report(ReportCmd),
    /// Parameter sweeps.
    #[command(subcommand)]
    Sweep(SweepCmd),
}

#[derive(Subcommand)]
enum ZooCmd {
    /// Train a base model and one variant per task, then write checkpoints and a manifest.
    Build {
        /// Zoo config JSON; the built-in default family when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Run config JSON.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    t_max: Option<usize>,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<Mode>,
    #[arg(long)]
    sparsity: Option<f64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum SearchCmd {
    /// Start a fresh search (overwrites the journal in the output directory).
    Run(RunArgs),
    /// Continue an interrupted search from its journal.
    Resume(RunArgs),
}

#[derive(Subcommand)]
enum OracleCmd {
    /// Evaluate every configuration of the run's space at b_max.
    Enumerate {
        #[command(flatten)]
        run: RunArgs,
        /// Space spec JSON replacing the run config's space.
        #[arg(long)]
        space: Option<PathBuf>,
        /// Refuse spaces with more configurations than this.
        #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP)]
        cap: u64,
        /// Output file; `<output_dir>/oracle.json` by default.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct EvalArgs {
    /// Configuration JSON to evaluate.
    config_file: PathBuf,
    /// Run config supplying the space, manifest and budget.
    #[arg(long)]
    run_config: PathBuf,
    /// Family manifest overriding the run config's.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Evaluation budget; b_max of the run config by default.
    #[arg(long)]
    budget: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum ParetoCmd {
    /// Rebuild the front from a run's journal.
    Export {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        /// Write here instead of the run's output directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ReportCmd {
    /// Trials per budget rung.
    Budgets {
        /// Trial journal (JSONL).
        #[arg(long)]
        journal: PathBuf,
        #[arg(long)]
        csv: bool,
    },
}

#[derive(Subcommand)]
enum SweepCmd {
    /// One search per pruning ratio.
    Ratio {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated ratios in [0, 1).
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        ratios: Vec<f64>,
    },
}

fn parse_mode(s: &str) -> std::result::Result<Mode, String> {
    s.parse::<Mode>().map_err(|e| e.to_string())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_)
        | Error::Parse { .. }
        | Error::InvalidConfig(_)
        | Error::Shape(_)
        | Error::Integrity(_) => 2,
        Error::Io { .. } => 3,
        Error::Interrupted { .. } | Error::Search(_) | Error::Evaluation(_) => 4,
        Error::CapExceeded { .. } => 5,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Zoo(ZooCmd::Build { config, output_dir, seed }) => zoo_build(config.as_deref(), output_dir, *seed),
        Command::Search(SearchCmd::Run(a)) => search(a, cli.threads, false),
        Command::Search(SearchCmd::Resume(a)) => search(a, cli.threads, true),
        Command::Oracle(OracleCmd::Enumerate { run, space, cap, output }) => {
            oracle(run, cli.threads, space.as_deref(), *cap, output.as_deref())
        }
        Command::Eval(a) => eval(a),
        Command::Pareto(ParetoCmd::Export { run, format, output }) => pareto_export(run, *format, output.as_deref()),
        Command::Report(ReportCmd::Budgets { journal, csv }) => {
            let rows = budget_allocation_report(&read_journal(journal)?);
            print!("{}", if *csv { allocation_csv(&rows) } else { render_allocation(&rows) });
            Ok(())
        }
        Command::Sweep(SweepCmd::Ratio { run, ratios }) => sweep(run, cli.threads, ratios),
    }
}

fn load_run(a: &RunArgs, threads: Option<usize>) -> Result<RunConfig> {
    let mut run = RunConfig::load(&a.config)?;
    run.apply(&Overrides {
        seed: a.seed,
        t_max: a.t_max,
        threads,
        mode: a.mode,
        sparsity: a.sparsity,
        output_dir: a.output_dir.clone(),
    })?;
    Ok(run)
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn zoo_build(config: Option<&Path>, output_dir: &Option<PathBuf>, seed: Option<u64>) -> Result<()> {
    let (mut cfg, root) = match config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            let cfg: ZooConfig = parse_json(&text, p)?;
            (cfg, p.parent().unwrap_or(Path::new(".")).to_path_buf())
        }
        None => (ZooConfig::default(), PathBuf::from(".")),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let dir = match (output_dir, &cfg.output_dir) {
        (Some(d), _) => d.clone(),
        (None, Some(d)) => root.join(d),
        (None, None) => PathBuf::from("zoo"),
    };
    info!("training family of {} tasks into {}", cfg.tasks.len(), dir.display());
    let family = build_family(&cfg)?;
    let manifest = write_family(&family, cfg.seed, &dir)?;
    println!("wrote {}", manifest.display());
    for row in family.error_table()? {
        let errs: Vec<String> = row.calib_errors.iter().map(|e| format!("{e:.4}")).collect();
        println!("  {:<16} {}", row.model, errs.join("  "));
    }
    Ok(())
}

fn search(a: &RunArgs, threads: Option<usize>, resume: bool) -> Result<()> {
    let run = load_run(a, threads)?;
    let ws = Workspace::load(&run)?;
    let outcome = execute_search(&run.search, &ws, &run.output_dir, resume)?;
    print!("{}", layerstitch::pipeline::summary(&run.search, &outcome));
    println!("outputs in {}", run.output_dir.display());
    Ok(())
}

fn oracle(a: &RunArgs, threads: Option<usize>, space: Option<&Path>, cap: u64, output: Option<&Path>) -> Result<()> {
    let mut run = load_run(a, threads)?;
    if let Some(p) = space {
        let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
        run.search.space = parse_json::<SpaceSpec>(&text, p)?;
    }
    let ws = Workspace::load(&run)?;
    ws.check_search(&run.search)?;
    let objective = ws.objective();
    let report = run_oracle(
        &run.search.space,
        &objective,
        run.search.b_max,
        run.search.alpha,
        LAMBDA_LATTICE,
        cap,
        run.search.threads,
    )?;
    let path = output.map_or_else(|| run.output_dir.join("oracle.json"), Path::to_path_buf);
    write(&path, &serde_json::to_string_pretty(&report).expect("oracle report serializes"))?;
    let infeasible = report.rows.iter().filter(|r| r.objectives.is_none()).count();
    println!(
        "{} configurations ({} infeasible), front of {}; wrote {}",
        report.rows.len(),
        infeasible,
        report.front.len(),
        path.display()
    );
    Ok(())
}

fn eval(a: &EvalArgs) -> Result<()> {
    let mut run = RunConfig::load(&a.run_config)?;
    if let Some(m) = &a.manifest {
        run.zoo_manifest = m.clone();
    }
    let text = fs::read_to_string(&a.config_file).map_err(|e| Error::io(&a.config_file, e))?;
    let config: Config = parse_json(&text, &a.config_file)?;
    ensure_valid(&config, &run.search.space)?;
    let ws = Workspace::load(&run)?;
    let budget = a.budget.unwrap_or(run.search.b_max);
    let model = assemble(&config, &ws.family.base, &ws.family.variants)?;
    let f = evaluate(&model, &ws.suite, budget)?;
    let total = ws.family.base.num_params();
    let removed = total - model.num_params();
    println!("budget {budget}");
    for (task, e) in ws.suite.tasks.iter().zip(&f.0) {
        println!("  {:<16} error {e}", task.task_id);
    }
    println!("  mean error {}", f.mean());
    println!(
        "parameters removed: {removed} of {total} ({:.2}%)",
        100.0 * removed as f64 / total as f64
    );
    let labels: Vec<String> = ws.family.variants.iter().map(|v| v.label.clone()).collect();
    print!("{}", describe_config(&config, &ws.family.base.label, &labels));
    Ok(())
}

fn pareto_export(a: &RunArgs, format: Format, output: Option<&Path>) -> Result<()> {
    let run = load_run(a, None)?;
    let (_, front) = replay_outputs(&run.output_dir.join(JOURNAL_FILE), run.search.b_max)?;
    let (name, text) = match format {
        Format::Json => (PARETO_JSON, pareto_json(&front)),
        Format::Csv => (PARETO_CSV, pareto_csv(&front)),
    };
    let path = output.map_or_else(|| run.output_dir.join(name), Path::to_path_buf);
    write(&path, &text)?;
    println!("{} front members; wrote {}", front.len(), path.display());
    Ok(())
}

fn sweep(a: &RunArgs, threads: Option<usize>, ratios: &[f64]) -> Result<()> {
    if ratios.is_empty() {
        return Err(Error::config("ratio sweep needs at least one ratio"));
    }
    let run = load_run(a, threads)?;
    let ws = Workspace::load(&run)?;
    let rows = sweep_ratio(&run.search, ratios, &ws, &run.output_dir)?;
    let table = render_sweep(&rows);
    write(&run.output_dir.join("sweep.txt"), &table)?;
    write(&run.output_dir.join("sweep.csv"), &sweep_csv(&rows))?;
    print!("{table}");
    Ok(())
}
