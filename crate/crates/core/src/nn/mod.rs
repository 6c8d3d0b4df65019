//! Dense linear algebra, ReLU MLP inference, reverse-mode gradients and an
//! adaptive-moment trainer.
//!
//! Everything is 64-bit: the MILP encodings downstream work at 1e-6
//! tolerances, which 32-bit floats cannot sustain.

mod matrix;
mod mlp;
mod train;

pub use matrix::DenseMatrix;
pub use mlp::{ForwardTrace, Layer, MlpNetwork};
pub use train::{
    gradient, sigmoid, softplus, train, AdamState, Loss, LogisticLoss, SquaredError, TrainConfig,
};

use thiserror::Error;

/// Errors from network construction, inference and training.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum NnError {
    #[error("matrix data length {got} does not match {rows}x{cols}")]
    DataLength { rows: usize, cols: usize, got: usize },
    #[error("non-finite entry at index {index}")]
    NonFinite { index: usize },
    #[error("layer {layer}: input length {got}, expected {expected}")]
    DimensionMismatch {
        layer: usize,
        expected: usize,
        got: usize,
    },
    #[error("layer {layer} input dim {got} does not chain with previous output dim {expected}")]
    LayerChain {
        layer: usize,
        expected: usize,
        got: usize,
    },
    #[error("parameter vector length {got}, expected {expected}")]
    ParamLength { expected: usize, got: usize },
    #[error("training aborted: loss became non-finite at epoch {epoch}")]
    NanLoss { epoch: usize },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("network must have at least one layer")]
    NoLayers,
}
