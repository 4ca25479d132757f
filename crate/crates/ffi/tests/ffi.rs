use std::ffi::{CStr, CString};
use std::path::Path;
use std::ptr;

use layerstitch::tensor::Matrix;
use layerstitch::zoo::{build_family, write_family, Generator, TaskSpec, TrainHyper, ZooConfig};
use layerstitch_ffi::*;

fn last_error() -> String {
    let p = ls_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn c_path(p: &Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

fn small_zoo(dir: &Path) -> std::path::PathBuf {
    let cfg = ZooConfig {
        seed: 3,
        hidden_dim: 12,
        num_layers: 4,
        tasks: vec![
            TaskSpec::new("a", Generator::GaussianBlobs, 1).with_sizes(200, 120, 50),
            TaskSpec::new("b", Generator::ModularSum, 2).with_sizes(200, 120, 50),
        ],
        base_training: TrainHyper::steps(100),
        finetune: TrainHyper::steps(30),
        output_dir: None,
    };
    write_family(&build_family(&cfg).unwrap(), cfg.seed, dir).unwrap()
}

#[test]
fn schedule_matches_reported_budgets() {
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { ls_schedule_new(100, 1000, 3, &mut s) }, LsStatus::Ok);
    let mut len = 0;
    assert_eq!(unsafe { ls_schedule_ladder(s, ptr::null_mut(), 0, &mut len) }, LsStatus::Ok);
    let mut ladder = vec![0usize; len];
    assert_eq!(unsafe { ls_schedule_ladder(s, ladder.as_mut_ptr(), len, &mut len) }, LsStatus::Ok);
    assert_eq!(ladder, [100, 300, 1000]);

    let mut brackets = 0;
    assert_eq!(unsafe { ls_schedule_num_brackets(s, &mut brackets) }, LsStatus::Ok);
    let mut got = Vec::new();
    for b in 0..brackets {
        let mut n = 0;
        assert_eq!(unsafe { ls_schedule_num_stages(s, b, &mut n) }, LsStatus::Ok);
        for i in 0..n {
            let mut st = LsStage::default();
            assert_eq!(unsafe { ls_schedule_stage(s, b, i, &mut st) }, LsStatus::Ok);
            got.push((st.count, st.budget));
        }
    }
    assert_eq!(got, [(9, 100), (3, 300), (1, 1000), (5, 300), (1, 1000), (3, 1000)]);

    let mut st = LsStage::default();
    assert_eq!(unsafe { ls_schedule_stage(s, 7, 0, &mut st) }, LsStatus::OutOfRange);
    unsafe { ls_schedule_free(s) };

    let mut bad = ptr::null_mut();
    assert_eq!(unsafe { ls_schedule_new(10, 5, 3, &mut bad) }, LsStatus::Config);
    assert!(bad.is_null());
    assert!(last_error().contains("b_min"));
}

#[test]
fn scalarization_values_and_errors() {
    let f = [0.4, 0.6];
    let mut out = 0.0;
    let half = [0.5, 0.5];
    assert_eq!(unsafe { ls_parego_scalarize(f.as_ptr(), half.as_ptr(), 2, 0.05, &mut out) }, LsStatus::Ok);
    assert!((out - 0.325).abs() < 1e-15);
    let skewed = [0.5, 0.6];
    assert_eq!(
        unsafe { ls_parego_scalarize(f.as_ptr(), skewed.as_ptr(), 2, 0.05, &mut out) },
        LsStatus::Config
    );
    assert_eq!(
        unsafe { ls_parego_scalarize(ptr::null(), half.as_ptr(), 2, 0.05, &mut out) },
        LsStatus::NullArgument
    );
    assert!(last_error().contains("objectives"));
}

#[test]
fn model_round_trip_through_handles() {
    let dir = tempfile::tempdir().unwrap();
    small_zoo(dir.path());
    let path = c_path(&dir.path().join("base.json"));
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { ls_model_load(path.as_ptr(), &mut m) }, LsStatus::Ok);

    let mut shape = LsModelShape::default();
    assert_eq!(unsafe { ls_model_shape(m, &mut shape) }, LsStatus::Ok);
    assert_eq!((shape.input_dim, shape.hidden_dim, shape.num_layers, shape.num_classes), (8, 12, 4, 4));

    let rows = 3;
    let x: Vec<f64> = (0..rows * 8).map(|i| (i as f64 * 0.37).sin()).collect();
    let mut logits = vec![0.0; rows * 4];
    assert_eq!(
        unsafe { ls_model_forward(m, x.as_ptr(), rows, 8, logits.as_mut_ptr(), logits.len()) },
        LsStatus::Ok
    );
    let native = layerstitch::zoo::load_checkpoint(dir.path().join("base.json"))
        .unwrap()
        .forward(&Matrix::from_vec(rows, 8, x.clone()))
        .unwrap();
    assert_eq!(logits, native.as_slice());

    let mut short = vec![0.0; 2];
    assert_eq!(
        unsafe { ls_model_forward(m, x.as_ptr(), rows, 8, short.as_mut_ptr(), short.len()) },
        LsStatus::OutOfRange
    );
    assert_eq!(
        unsafe { ls_model_forward(m, x.as_ptr(), 2, 12, logits.as_mut_ptr(), logits.len()) },
        LsStatus::Shape
    );
    unsafe { ls_model_free(m) };
    unsafe { ls_model_free(ptr::null_mut()) };
}

#[test]
fn load_failures_map_to_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = c_path(&dir.path().join("nope.json"));
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { ls_model_load(missing.as_ptr(), &mut m) }, LsStatus::Io);
    assert!(m.is_null());
    assert!(last_error().contains("nope.json"));

    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, "{\"format_version\": 1, \"label\": 3}").unwrap();
    let broken = c_path(&broken);
    assert_eq!(unsafe { ls_model_load(broken.as_ptr(), &mut m) }, LsStatus::Parse);
    assert!(last_error().contains("label"));

    assert_eq!(unsafe { ls_model_load(ptr::null(), &mut m) }, LsStatus::NullArgument);
    assert_eq!(unsafe { ls_model_load(missing.as_ptr(), ptr::null_mut()) }, LsStatus::NullArgument);

    assert_eq!(unsafe { ls_model_shape(ptr::null(), ptr::null_mut()) }, LsStatus::NullArgument);
}

#[test]
fn search_from_run_config() {
    let dir = tempfile::tempdir().unwrap();
    small_zoo(&dir.path().join("zoo"));
    let run = r#"{
        "zoo_manifest": "zoo/manifest.json",
        "output_dir": "out",
        "search": {
            "b_min": 10, "b_max": 90, "eta": 3, "t_max": 30, "seed": 4,
            "space": {"l": 4, "K": 2, "sparsity": 0.25, "mode": "select_remove"}
        }
    }"#;
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, run).unwrap();
    let cfg = c_path(&cfg);

    let mut r = ptr::null_mut();
    assert_eq!(unsafe { ls_search_run(cfg.as_ptr(), false, 0, &mut r) }, LsStatus::Ok, "{}", {
        let p = ls_last_error_message();
        if p.is_null() { String::new() } else { unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned() }
    });
    let (mut trials, mut front) = (0, 0);
    assert_eq!(unsafe { ls_search_result_counts(r, &mut trials, &mut front) }, LsStatus::Ok);
    assert_eq!(trials, 30);
    assert!(front >= 1);
    let mut best = LsBest::default();
    let mut f = [0.0; 2];
    assert_eq!(unsafe { ls_search_result_best(r, &mut best, f.as_mut_ptr(), 2) }, LsStatus::Ok);
    assert!(best.found);
    assert_eq!(best.num_objectives, 2);
    assert!((best.mean_error - (f[0] + f[1]) / 2.0).abs() < 1e-15);
    unsafe { ls_search_result_free(r) };

    let lines = std::fs::read_to_string(dir.path().join("out/journal.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 30);
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/layerstitch.h")).unwrap();
    for name in [
        "ls_last_error_message",
        "ls_model_load",
        "ls_model_forward",
        "ls_model_free",
        "ls_parego_scalarize",
        "ls_schedule_new",
        "ls_search_run",
        "ls_search_result_free",
        "typedef struct LsModel LsModel",
        "LS_STATUS_OK = 0",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(ls_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

/// Compiles and runs a C program against the header and the static library.
#[test]
fn c_program_links_against_static_library() {
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().unwrap().parent().unwrap();
    let lib = profile_dir.join("liblayerstitch_ffi.a");
    assert!(lib.exists(), "static library missing at {}", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include "layerstitch.h"
int main(void) {
    LsSchedule *s = NULL;
    if (ls_schedule_new(100, 1000, 3, &s) != LS_STATUS_OK) return 1;
    size_t ladder[3], len = 0;
    if (ls_schedule_ladder(s, ladder, 3, &len) != LS_STATUS_OK || len != 3) return 2;
    ls_schedule_free(s);
    double f[2] = {0.4, 0.6}, l[2] = {0.5, 0.5}, out = 0.0;
    if (ls_parego_scalarize(f, l, 2, 0.05, &out) != LS_STATUS_OK) return 3;
    LsModel *m = NULL;
    if (ls_model_load("/nonexistent/model.json", &m) != LS_STATUS_IO) return 4;
    if (ls_last_error_message() == NULL) return 5;
    printf("%zu %zu %zu %.3f\n", ladder[0], ladder[1], ladder[2], out);
    return 0;
}
"#,
    )
    .unwrap();
    let bin = dir.path().join("smoke");
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let status = std::process::Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .expect("a C compiler named `cc` is on PATH");
    assert!(status.success());
    let out = std::process::Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert_eq!(String::from_utf8_lossy(&out.stdout), "100 300 1000 0.325\n");
}
