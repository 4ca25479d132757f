use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use layerstitch::optimizer::read_journal;
use layerstitch::space::{Config, PruneConfig};
use layerstitch::zoo::read_manifest;
use serde_json::{json, Value};

const BIN: &str = env!("CARGO_BIN_EXE_layerstitch");

fn repo_file(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn cli(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("LAYERSTITCH_SEED").output().unwrap()
}

fn ok(out: Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// The default family, built once per test binary.
fn default_zoo() -> &'static Path {
    static DIR: OnceLock<PathBuf> = OnceLock::new();
    DIR.get_or_init(|| {
        let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("cli-default-zoo");
        let _ = fs::remove_dir_all(&dir);
        ok(cli(&["zoo", "build", "--output-dir", path_str(&dir)]));
        dir
    })
}

/// Three layers, two tasks: the 108-point toy space fits this family.
fn small_zoo() -> &'static Path {
    static DIR: OnceLock<PathBuf> = OnceLock::new();
    DIR.get_or_init(|| {
        let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("cli-small-zoo");
        let _ = fs::remove_dir_all(&dir);
        let cfg = repo_file("configs/small-zoo.json");
        ok(cli(&["zoo", "build", "--config", path_str(&cfg), "--output-dir", path_str(&dir)]));
        dir
    })
}

/// Writes a run config from a repo template, pointed at `zoo` and `out`.
fn run_config(template: &str, zoo: &Path, out: &Path, t_max: usize) -> PathBuf {
    let mut v: Value = serde_json::from_str(&fs::read_to_string(repo_file(template)).unwrap()).unwrap();
    v["zoo_manifest"] = json!(zoo.join("manifest.json"));
    v["output_dir"] = json!(out);
    v["search"]["t_max"] = json!(t_max);
    fs::create_dir_all(out).unwrap();
    let p = out.join("run.json");
    fs::write(&p, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    p
}

fn journal_text(out: &Path) -> String {
    fs::read_to_string(out.join("journal.jsonl")).unwrap()
}

#[test]
fn zoo_build_is_reproducible() {
    let first = default_zoo();
    let names: Vec<String> = {
        let mut v: Vec<String> = fs::read_dir(first)
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        v.sort();
        v
    };
    assert_eq!(
        names,
        ["base.json", "manifest.json", "variant-blobs.json", "variant-modsum.json", "variant-xor.json"]
    );
    let manifest = read_manifest(&first.join("manifest.json")).unwrap();
    assert_eq!(manifest.variants.len(), 3);

    let again = tempfile::tempdir().unwrap();
    ok(cli(&["zoo", "build", "--output-dir", path_str(again.path())]));
    for name in &names {
        assert_eq!(
            fs::read(first.join(name)).unwrap(),
            fs::read(again.path().join(name)).unwrap(),
            "{name} differs between builds"
        );
    }
}

#[test]
fn toy_search_runs_resumes_and_exports() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("toy");
    let cfg = run_config("configs/toy-run.json", default_zoo(), &out, 200);
    let stdout = ok(cli(&["search", "run", "--config", path_str(&cfg)]));
    assert!(stdout.contains("trials 200"), "{stdout}");
    let reference = journal_text(&out);
    assert_eq!(reference.lines().count(), 200);
    for f in ["pareto.json", "pareto.csv", "best_config.json", "allocation.txt"] {
        assert!(out.join(f).exists(), "{f} missing");
    }

    let cut: String = reference.lines().take(77).map(|l| format!("{l}\n")).collect();
    fs::write(out.join("journal.jsonl"), cut).unwrap();
    ok(cli(&["search", "resume", "--config", path_str(&cfg)]));
    assert_eq!(journal_text(&out), reference);

    let csv_path = tmp.path().join("front.csv");
    ok(cli(&["pareto", "export", "--config", path_str(&cfg), "--format", "csv", "--output", path_str(&csv_path)]));
    assert_eq!(fs::read_to_string(&csv_path).unwrap(), fs::read_to_string(out.join("pareto.csv")).unwrap());

    let report = ok(cli(&["report", "budgets", "--journal", path_str(&out.join("journal.jsonl")), "--csv"]));
    let rows: Vec<&str> = report.lines().skip(1).collect();
    assert_eq!(rows.len(), 3, "{report}");
    let total: usize = rows.iter().map(|r| r.split(',').nth(1).unwrap().parse::<usize>().unwrap()).sum();
    assert_eq!(total, 200);
}

#[test]
fn remove_only_mode_keeps_base_layers() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("ro");
    let cfg = run_config("configs/toy-run.json", default_zoo(), &out, 40);
    ok(cli(&["search", "run", "--config", path_str(&cfg), "--mode", "remove_only"]));
    let journal = read_journal(out.join("journal.jsonl")).unwrap();
    assert_eq!(journal.len(), 40);
    for r in journal {
        let Config::Prune(p) = r.config else {
            panic!("remove_only produced a fold config")
        };
        assert_eq!(p.r.iter().filter(|&&b| b).count(), 2);
        assert!(p.c.iter().flatten().all(|&b| !b));
    }
}

#[test]
fn seed_precedence_is_flag_then_env_then_file() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |name: &str, env: Option<&str>, flag: Option<&str>| {
        let out = tmp.path().join(name);
        let cfg = run_config("configs/toy-run.json", default_zoo(), &out, 25);
        let mut cmd = Command::new(BIN);
        cmd.args(["search", "run", "--config", path_str(&cfg)]).env_remove("LAYERSTITCH_SEED");
        if let Some(e) = env {
            cmd.env("LAYERSTITCH_SEED", e);
        }
        if let Some(f) = flag {
            cmd.args(["--seed", f]);
        }
        ok(cmd.output().unwrap());
        journal_text(&out)
    };
    let file_seed = run("file", None, None);
    let env_seed = run("env", Some("5"), None);
    let flag_seed = run("flag", None, Some("5"));
    let both = run("both", Some("5"), Some("1"));
    assert_eq!(env_seed, flag_seed);
    assert_ne!(env_seed, file_seed);
    assert_eq!(both, file_seed);
}

#[test]
fn oracle_enumerates_the_toy_space_and_honours_the_cap() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("oracle");
    let cfg = run_config("configs/small-run.json", small_zoo(), &out, 100);
    let stdout = ok(cli(&["oracle", "enumerate", "--config", path_str(&cfg)]));
    assert!(stdout.starts_with("108 configurations"), "{stdout}");
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("oracle.json")).unwrap()).unwrap();
    assert_eq!(report["rows"].as_array().unwrap().len(), 108);

    let refused = cli(&["oracle", "enumerate", "--config", path_str(&cfg), "--cap", "100"]);
    assert_eq!(refused.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&refused.stderr).contains("108"));
}

#[test]
fn ratio_sweep_needs_ratios() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = run_config("configs/small-run.json", small_zoo(), &tmp.path().join("s"), 10);
    let out = cli(&["sweep", "ratio", "--config", path_str(&cfg), "--ratios"]);
    assert_eq!(out.status.code(), Some(2));
    let out = cli(&["sweep", "ratio", "--config", path_str(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn ratio_sweep_writes_one_run_per_ratio() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sweep");
    let cfg = run_config("configs/toy-run.json", default_zoo(), &out, 22);
    ok(cli(&["sweep", "ratio", "--config", path_str(&cfg), "--ratios", "0,0.25"]));
    assert_eq!(journal_text(&out.join("ratio-0")).lines().count(), 22);
    assert_eq!(journal_text(&out.join("ratio-1")).lines().count(), 22);
    assert_eq!(fs::read_to_string(out.join("sweep.csv")).unwrap().lines().count(), 3);
}

fn eval_errors(stdout: &str) -> Vec<f64> {
    stdout
        .lines()
        .filter_map(|l| l.trim().split_once(" error "))
        .filter(|(task, _)| *task != "mean")
        .map(|(_, v)| v.trim().parse().unwrap())
        .collect()
}

#[test]
fn eval_reproduces_journal_and_manifest_numbers() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("ev");
    let cfg = run_config("configs/toy-run.json", default_zoo(), &out, 60);
    ok(cli(&["search", "run", "--config", path_str(&cfg)]));

    let journal = read_journal(out.join("journal.jsonl")).unwrap();
    let best_config: Config = serde_json::from_str(&fs::read_to_string(out.join("best_config.json")).unwrap()).unwrap();
    let best = journal
        .iter()
        .find(|r| r.budget == 1000 && r.config == best_config)
        .expect("best configuration is journaled at b_max");
    let stdout = ok(cli(&["eval", path_str(&out.join("best_config.json")), "--run-config", path_str(&cfg)]));
    assert_eq!(eval_errors(&stdout), best.objectives.0);

    let identity = tmp.path().join("identity.json");
    let mut id = PruneConfig::identity(8, 3);
    fs::write(&identity, serde_json::to_string(&Config::Prune(id.clone())).unwrap()).unwrap();
    let mut free = serde_json::from_str::<Value>(&fs::read_to_string(&cfg).unwrap()).unwrap();
    free["search"]["space"]["sparsity"] = json!(0.0);
    let free_cfg = tmp.path().join("free.json");
    fs::write(&free_cfg, free.to_string()).unwrap();
    let stdout = ok(cli(&["eval", path_str(&identity), "--run-config", path_str(&free_cfg)]));
    let manifest = read_manifest(&default_zoo().join("manifest.json")).unwrap();
    assert_eq!(eval_errors(&stdout), manifest.error_table[0].calib_errors);

    id.r = vec![true, true, true, false, false, false, false, false];
    fs::write(&identity, serde_json::to_string(&Config::Prune(id)).unwrap()).unwrap();
    let refused = cli(&["eval", path_str(&identity), "--run-config", path_str(&cfg)]);
    assert_eq!(refused.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&refused.stderr);
    assert!(stderr.contains("3 layers removed but remove_count is 2"), "{stderr}");
}

#[test]
fn unreadable_config_is_an_io_error() {
    let out = cli(&["search", "run", "--config", "/nonexistent/run.json"]);
    assert_eq!(out.status.code(), Some(3));
}
