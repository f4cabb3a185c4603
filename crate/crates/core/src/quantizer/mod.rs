//! Vector quantization of the feature space and the discrete joint
//! distribution over (cell, group, label) built from it.

mod codebook;
mod joint;
mod metrics;
mod pac;

pub use codebook::{assign_cell, train_codebook, Codebook, MAX_LLOYD_ITERATIONS};
pub use joint::{build_joint, views, DiscreteJoint, ProbabilityViews};
pub use metrics::{pcc, tv_distance};
pub use pac::{pac_max_cells, pac_sample_bound, PacParams};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum QuantizerError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("table has {distinct} distinct feature vectors, fewer than the {requested} requested cells")]
    TooFewDistinct { distinct: usize, requested: usize },
    #[error("table is empty")]
    EmptyTable,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid joint distribution: {0}")]
    InvalidJoint(String),
    #[error("conditioning event `{0}` has zero probability mass")]
    ZeroMass(String),
    #[error("input vector is constant; correlation undefined")]
    ConstantInput,
    #[error("input is not a probability vector (sum {sum})")]
    NotNormalized { sum: f64 },
}

pub type Result<T> = std::result::Result<T, QuantizerError>;
