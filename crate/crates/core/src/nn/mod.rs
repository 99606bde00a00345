//! Minimal differentiable building blocks for the DDGNN.
//!
//! Everything is dense `f64`, batch size 1, with explicit forward caches and
//! hand-written backward passes. [`gradcheck`] validates every analytic
//! gradient against central finite differences.

pub mod adam;
pub mod gradcheck;
pub mod graphconv;
pub mod linear;
pub mod lstm;
pub mod ops;
pub mod tensor;

pub use adam::AdamState;
pub use gradcheck::{central_difference, check_gradients, relative_error, GradCheckEntry, GradCheckReport};
pub use graphconv::{dense_reference_forward, GraphConv, GraphConvCache};
pub use linear::{glorot_bound, Linear, LinearCache};
pub use lstm::{BiLstm, BiLstmCache, BiLstmLayer, LstmLayerParams};
pub use ops::{
    dropout, dropout_backward, dropout_forward, global_mean_pool, global_mean_pool_backward,
    sigmoid, sigmoid_prime_from_output, softmax, softmax_cross_entropy, DropoutMask,
};
pub use tensor::{max_abs_diff, Tensor2};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid checkpoint: {0}")]
    InvalidCheckpoint(String),
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
}
