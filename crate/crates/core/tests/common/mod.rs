#![allow(dead_code)]

use layerstitch::pipeline::Workspace;
use layerstitch::space::{Mode, SpaceSpec};
use layerstitch::zoo::{build_family, Family, Generator, TaskSpec, TrainHyper, ZooConfig};

/// Four layers, two quick tasks, small calibration sets (budgets up to 90).
pub fn small_zoo_config() -> ZooConfig {
    ZooConfig {
        seed: 7,
        hidden_dim: 16,
        num_layers: 4,
        tasks: vec![
            TaskSpec::new("blobs", Generator::GaussianBlobs, 11).with_sizes(400, 90, 60),
            TaskSpec::new("modsum", Generator::ModularSum, 12).with_sizes(400, 90, 60),
        ],
        base_training: TrainHyper::steps(300),
        finetune: TrainHyper {
            steps: 60,
            learning_rate: 0.01,
            batch_size: 16,
        },
        output_dir: None,
    }
}

pub fn small_family() -> Family {
    build_family(&small_zoo_config()).unwrap()
}

pub fn small_workspace() -> Workspace {
    Workspace::new(small_family(), None).unwrap()
}

pub fn small_space(mode: Mode) -> SpaceSpec {
    SpaceSpec::new(4, 2, 0.25, mode).unwrap()
}
