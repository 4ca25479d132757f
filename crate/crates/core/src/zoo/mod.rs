//! Toy model family: synthetic tasks, a residual MLP base, and per-task finetunes.

pub mod checkpoint;
pub mod data;
pub mod family;
pub mod model;
pub mod train;

pub use checkpoint::{from_json, load_checkpoint, parse_json, save_checkpoint, to_json};
pub use data::{make_task_datasets, Generator, LabeledDataset, TaskDatasets, TaskSpec};
pub use family::{build_family, load_family, read_manifest, write_family, ErrorRow, Family, FamilyManifest, ModelEntry, ZooConfig, MANIFEST_FILE};
pub use model::{Head, LayeredModel, ModelShape, ResidualBlock};
pub use train::{error_rate, finetune_variant, grad_check, train_base, GradCheckReport, TrainHyper};
