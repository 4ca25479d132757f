//! Builds and persists a model family: one base plus one finetuned variant per task.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::checkpoint::{load_checkpoint, parse_json, save_checkpoint};
use super::data::{make_task_datasets, Generator, TaskSpec};
use super::model::{LayeredModel, ModelShape};
use super::train::{error_rate, finetune_variant, train_base, TrainHyper};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZooConfig {
    pub seed: u64,
    pub hidden_dim: usize,
    pub num_layers: usize,
    pub tasks: Vec<TaskSpec>,
    pub base_training: TrainHyper,
    pub finetune: TrainHyper,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl Default for ZooConfig {
    /// Three tasks, input_dim 8, hidden_dim 32, 8 layers, 4 classes. Variants
    /// are finetuned gently (400 steps at lr 0.01) so they stay near the base.
    fn default() -> Self {
        ZooConfig {
            seed: 1,
            hidden_dim: 32,
            num_layers: 8,
            tasks: vec![
                TaskSpec::new("blobs", Generator::GaussianBlobs, 101),
                TaskSpec::new("xor", Generator::XorBands, 202),
                TaskSpec::new("modsum", Generator::ModularSum, 303),
            ],
            base_training: TrainHyper::steps(2000),
            finetune: TrainHyper {
                steps: 400,
                learning_rate: 0.01,
                batch_size: 16,
            },
            output_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Family {
    pub base: LayeredModel,
    pub variants: Vec<LayeredModel>,
    pub tasks: Vec<TaskSpec>,
}

impl Family {
    pub fn shape(&self) -> ModelShape {
        self.base.shape()
    }

    pub fn check_compatible(&self) -> Result<()> {
        for v in &self.variants {
            if !v.compatible_with(&self.base) {
                return Err(Error::Integrity(format!(
                    "variant `{}` shape {:?} differs from base {:?}",
                    v.label,
                    v.shape(),
                    self.base.shape()
                )));
            }
        }
        Ok(())
    }

    /// Calibration error of every model (base first) on every task.
    pub fn error_table(&self) -> Result<Vec<ErrorRow>> {
        let calib = self
            .tasks
            .iter()
            .map(|t| make_task_datasets(t).map(|d| d.calib))
            .collect::<Result<Vec<_>>>()?;
        std::iter::once(&self.base)
            .chain(&self.variants)
            .map(|m| {
                Ok(ErrorRow {
                    model: m.label.clone(),
                    calib_errors: calib.iter().map(|d| error_rate(m, d)).collect::<Result<_>>()?,
                })
            })
            .collect()
    }
}

pub fn build_family(cfg: &ZooConfig) -> Result<Family> {
    let base = train_base(&cfg.tasks, cfg.hidden_dim, cfg.num_layers, &cfg.base_training, cfg.seed)?;
    let variants = cfg
        .tasks
        .iter()
        .enumerate()
        .map(|(k, t)| finetune_variant(&base, t, &cfg.finetune, variant_seed(cfg.seed, k)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Family {
        base,
        variants,
        tasks: cfg.tasks.clone(),
    })
}

fn variant_seed(seed: u64, k: usize) -> u64 {
    rng::mix(seed, 100 + k as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    pub label: String,
    /// Relative to the manifest's directory.
    pub path: PathBuf,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub model: String,
    pub calib_errors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyManifest {
    pub format_version: u32,
    pub shape: ModelShape,
    pub tasks: Vec<TaskSpec>,
    pub base: ModelEntry,
    pub variants: Vec<ModelEntry>,
    /// Rows in model order (base first); columns in task order.
    pub error_table: Vec<ErrorRow>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Writes every checkpoint and the manifest into `dir`; returns the manifest path.
pub fn write_family(family: &Family, seed: u64, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let base_path = PathBuf::from("base.json");
    save_checkpoint(&family.base, dir.join(&base_path))?;
    let mut variants = Vec::new();
    for (k, v) in family.variants.iter().enumerate() {
        let p = PathBuf::from(format!("{}.json", v.label));
        save_checkpoint(v, dir.join(&p))?;
        variants.push(ModelEntry {
            label: v.label.clone(),
            path: p,
            seed: variant_seed(seed, k),
        });
    }
    let manifest = FamilyManifest {
        format_version: 1,
        shape: family.shape(),
        tasks: family.tasks.clone(),
        base: ModelEntry {
            label: family.base.label.clone(),
            path: base_path,
            seed,
        },
        variants,
        error_table: family.error_table()?,
    };
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

pub fn read_manifest(path: &Path) -> Result<FamilyManifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_json(&text, path)
}

pub fn load_family(manifest_path: &Path) -> Result<(Family, FamilyManifest)> {
    let manifest = read_manifest(manifest_path)?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let base = load_checkpoint(dir.join(&manifest.base.path))?;
    let variants = manifest
        .variants
        .iter()
        .map(|e| load_checkpoint(dir.join(&e.path)))
        .collect::<Result<Vec<_>>>()?;
    if base.shape() != manifest.shape {
        return Err(Error::Integrity(format!(
            "base checkpoint shape {:?} differs from manifest {:?}",
            base.shape(),
            manifest.shape
        )));
    }
    let family = Family {
        base,
        variants,
        tasks: manifest.tasks.clone(),
    };
    family.check_compatible()?;
    Ok((family, manifest))
}
