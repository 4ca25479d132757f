//! The JSON run configuration and its precedence rules: flag > environment >
//! file > default.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizer::SearchConfig;
use crate::space::Mode;
use crate::zoo::{parse_json, TaskSpec};

pub const SEED_ENV: &str = "LAYERSTITCH_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Family manifest written by `zoo build`.
    pub zoo_manifest: PathBuf,
    pub output_dir: PathBuf,
    /// Calibration tasks; the manifest's tasks when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suite: Option<Vec<TaskSpec>>,
    pub search: SearchConfig,
}

/// Command-line overrides of individual fields.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub t_max: Option<usize>,
    pub threads: Option<usize>,
    pub mode: Option<Mode>,
    pub sparsity: Option<f64>,
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    /// Reads a run config; relative paths are taken from the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfig = parse_json(&text, path)?;
        let root = path.parent().unwrap_or(Path::new("."));
        cfg.zoo_manifest = root.join(&cfg.zoo_manifest);
        cfg.output_dir = root.join(&cfg.output_dir);
        Ok(cfg)
    }

    /// Applies `LAYERSTITCH_SEED` (if set) and then the flags.
    pub fn apply(&mut self, flags: &Overrides) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.search.seed = v
                .trim()
                .parse()
                .map_err(|_| Error::config(format!("{SEED_ENV}={v:?} is not an unsigned integer")))?;
        }
        if let Some(s) = flags.seed {
            self.search.seed = s;
        }
        if let Some(t) = flags.t_max {
            self.search.t_max = t;
        }
        if let Some(t) = flags.threads {
            self.search.threads = t;
        }
        if let Some(m) = flags.mode {
            self.search.space = self.search.space.clone().with_mode(m);
        }
        if let Some(s) = flags.sparsity {
            self.search.space = self.search.space.clone().with_sparsity(s)?;
        }
        if let Some(d) = &flags.output_dir {
            self.output_dir = d.clone();
        }
        self.search.check()
    }
}
