mod common;

use layerstitch::objective::CalibrationSuite;
use layerstitch::zoo::{
    build_family, error_rate, finetune_variant, load_family, make_task_datasets, train_base, write_family, LayeredModel,
    TrainHyper, ZooConfig, MANIFEST_FILE,
};
use layerstitch::Error;

fn mean_train_error(model: &LayeredModel, cfg: &ZooConfig) -> f64 {
    let errs: Vec<f64> = cfg
        .tasks
        .iter()
        .map(|t| error_rate(model, &make_task_datasets(t).unwrap().train).unwrap())
        .collect();
    errs.iter().sum::<f64>() / errs.len() as f64
}

#[test]
fn training_reduces_train_error() {
    let cfg = ZooConfig::default();
    let init = train_base(&cfg.tasks, 32, 8, &TrainHyper::steps(0), 5).unwrap();
    let trained = train_base(&cfg.tasks, 32, 8, &TrainHyper::steps(200), 5).unwrap();
    assert!(mean_train_error(&trained, &cfg) < mean_train_error(&init, &cfg));
}

#[test]
fn default_family_specializes() {
    let cfg = ZooConfig::default();
    let family = build_family(&cfg).unwrap();
    assert_eq!(family.variants.len(), 3);
    let table = family.error_table().unwrap();
    assert_eq!(table.len(), 4);
    for (k, _) in cfg.tasks.iter().enumerate() {
        let base_err = table[0].calib_errors[k];
        let own = table[k + 1].calib_errors[k];
        assert!(own <= base_err, "variant {k}: {own} > base {base_err}");
    }
    for i in 0..3 {
        for j in i + 1..3 {
            assert!(family.variants[i].param_distance(&family.variants[j]) > 0.0);
        }
    }
}

#[test]
fn zero_step_finetune_is_the_base() {
    let cfg = common::small_zoo_config();
    let base = train_base(&cfg.tasks, 16, 4, &TrainHyper::steps(20), 1).unwrap();
    let v = finetune_variant(&base, &cfg.tasks[0], &TrainHyper::steps(0), 9).unwrap();
    assert_eq!(v.blocks, base.blocks);
    assert_eq!(v.head, base.head);
    assert_eq!(v.param_distance(&base), 0.0);
}

#[test]
fn family_round_trips_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let family = common::small_family();
    let manifest_path = write_family(&family, 7, dir.path()).unwrap();
    assert_eq!(manifest_path, dir.path().join(MANIFEST_FILE));
    let (loaded, manifest) = load_family(&manifest_path).unwrap();
    assert_eq!(loaded, family);
    assert_eq!(manifest.variants.len(), 2);
    assert_eq!(manifest.error_table.len(), 3);

    // Rebuilding with the same seed writes byte-identical files.
    let again = tempfile::tempdir().unwrap();
    write_family(&common::small_family(), 7, again.path()).unwrap();
    for name in ["base.json", "variant-blobs.json", "variant-modsum.json", MANIFEST_FILE] {
        assert_eq!(
            std::fs::read(dir.path().join(name)).unwrap(),
            std::fs::read(again.path().join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn manifest_errors_match_a_fresh_suite() {
    let family = common::small_family();
    let suite = CalibrationSuite::from_task_specs(&family.tasks).unwrap();
    let table = family.error_table().unwrap();
    let full = suite.max_budget();
    for (row, model) in table.iter().zip(std::iter::once(&family.base).chain(&family.variants)) {
        let f = layerstitch::objective::evaluate(model, &suite, full).unwrap();
        assert_eq!(row.calib_errors, f.0);
    }
}

#[test]
fn incompatible_variant_detected() {
    let dir = tempfile::tempdir().unwrap();
    let family = common::small_family();
    let manifest = write_family(&family, 7, dir.path()).unwrap();
    let mut other_cfg = common::small_zoo_config();
    other_cfg.hidden_dim = 12;
    let other = build_family(&other_cfg).unwrap();
    layerstitch::zoo::save_checkpoint(&other.variants[0], dir.path().join("variant-blobs.json")).unwrap();
    let got = load_family(&manifest);
    assert!(matches!(got, Err(Error::Integrity(_))), "{:?}", got.map(|_| ()));
}
