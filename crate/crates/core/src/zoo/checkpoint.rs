//! Portable JSON checkpoint document.
//!
//! Floats are written in shortest round-trip form and parsed with exact
//! rounding, so save → load is bit-identical.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{Head, LayeredModel, ResidualBlock};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointDoc {
    format_version: u32,
    label: String,
    input_dim: usize,
    hidden_dim: usize,
    num_layers: usize,
    num_classes: usize,
    blocks: Vec<ResidualBlock>,
    head: Head,
}

pub fn to_json(model: &LayeredModel) -> String {
    let doc = CheckpointDoc {
        format_version: FORMAT_VERSION,
        label: model.label.clone(),
        input_dim: model.input_dim,
        hidden_dim: model.hidden_dim,
        num_layers: model.num_layers(),
        num_classes: model.num_classes,
        blocks: model.blocks.clone(),
        head: model.head.clone(),
    };
    serde_json::to_string(&doc).expect("checkpoint serializes")
}

pub fn from_json(text: &str, path: &Path) -> Result<LayeredModel> {
    let doc: CheckpointDoc = parse_json(text, path)?;
    if doc.format_version != FORMAT_VERSION {
        return Err(Error::Integrity(format!(
            "unsupported checkpoint format_version {} (expected {FORMAT_VERSION})",
            doc.format_version
        )));
    }
    if doc.blocks.len() != doc.num_layers {
        return Err(Error::Integrity(format!(
            "manifest declares num_layers = {} but {} blocks are present",
            doc.num_layers,
            doc.blocks.len()
        )));
    }
    let model = LayeredModel {
        label: doc.label,
        input_dim: doc.input_dim,
        hidden_dim: doc.hidden_dim,
        num_classes: doc.num_classes,
        blocks: doc.blocks,
        head: doc.head,
    };
    model.check_integrity()?;
    Ok(model)
}

pub fn save_checkpoint(model: &LayeredModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_json(model)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<LayeredModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_json(&text, path)
}

/// Deserializes JSON, reporting the path of the offending field on failure.
pub fn parse_json<T: serde::de::DeserializeOwned>(text: &str, path: &Path) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        field: e.path().to_string(),
        message: e.inner().to_string(),
    })
}
