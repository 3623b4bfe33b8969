//! Deterministic tabular ML: canonical dataset/config/model formats, a
//! seeded MLP trainer, inference, and the measured quantities that end up
//! in attestations.
//!
//! All arithmetic runs single-threaded in a fixed order so that training
//! the same `(dataset, config)` twice yields byte-identical model files.

mod config;
mod dataset;
mod fgsm;
mod metrics;
mod model;
pub mod rng;
pub mod synth;
mod train;

pub use config::{Activation, Architecture, Optimizer, TrainingConfig};
pub use dataset::{Dataset, Row};
pub use fgsm::{fgsm_dataset, input_gradient};
pub use metrics::{
    accuracy, demographic_parity, distribution, robust_accuracy, DistributionKind,
    DistributionalProperty, GroupCount, LabelGroups, MetricKind, MetricValue,
};
pub use model::{predict, InferenceRecord, Mlp, Model};
pub use train::train;

use crate::hashcore::{CanonicalError, DecimalError};

#[derive(Debug, thiserror::Error)]
pub enum MlError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("malformed dataset CSV at line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error("row {row}: expected {expected} features, found {found}")]
    Arity { row: usize, expected: usize, found: usize },
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("input has {found} features but the model expects {expected}")]
    InputArity { expected: usize, found: usize },
    #[error("row {row}: label {label} outside [0, {classes})")]
    LabelOutOfRange { row: usize, label: u32, classes: usize },
    #[error("sensitive group {0} has no rows")]
    EmptyGroup(u32),
    #[error("epsilon must be non-negative, got {0}")]
    NegativeEpsilon(String),
    #[error("malformed model: {0}")]
    Model(String),
    #[error(transparent)]
    Decimal(#[from] DecimalError),
    #[error(transparent)]
    Canonical(#[from] CanonicalError),
}
