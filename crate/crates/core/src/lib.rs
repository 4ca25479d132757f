//! Structured layer pruning for families of finetuned models.
//!
//! A pruned model is built by removing a fixed number of layers from a base
//! model and, for each retained position, keeping the base layer, taking the
//! layer of one finetuned variant, or merging several variants by task
//! arithmetic. Configurations are scored per task on budgeted calibration
//! sets, scalarized with random ParEGO weights, and searched with a
//! forest-guided successive-halving loop that reports a Pareto front.

pub mod error;
pub mod merge;
pub mod objective;
pub mod optimizer;
pub mod oracle;
pub mod pipeline;
pub mod rng;
pub mod runconfig;
pub mod space;
pub mod surrogate;
pub mod sweep;
pub mod tensor;
pub mod zoo;

pub use error::{Error, Result};
