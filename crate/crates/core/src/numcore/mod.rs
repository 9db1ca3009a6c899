//! Minimal dense tensor arithmetic with reverse-mode automatic
//! differentiation, plus the spatial/spectral primitives (convolution,
//! bilinear resampling, orthonormal DCT) the rest of the crate consumes.
//!
//! Everything runs in `f64`. Ops are pure functions of their inputs; a
//! [`Graph`] records differentiable ops define-by-run and replays them in
//! reverse for [`Graph::backward`].

mod gradcheck;
mod graph;
mod kernels;
mod optim;
mod rng;
mod tensor;

pub use gradcheck::grad_check;
pub use graph::{Graph, Var};
pub use kernels::{
    adaptive_avg_pool2d, conv2d, dct2d, idct2d, layer_norm, resize_bilinear, softmax, PadMode,
};
pub use optim::{adam_step, OptimState};
pub use rng::SplitMix64;
pub use tensor::Tensor;

/// Errors raised by tensor construction and numeric ops.
#[derive(Debug, thiserror::Error)]
pub enum TensorError {
    #[error("shape mismatch in {op}: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        op: &'static str,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("data length {got} does not match shape {shape:?} (expects {expected})")]
    DataLength {
        shape: Vec<usize>,
        expected: usize,
        got: usize,
    },
    #[error("invalid axis {axis} for rank-{rank} tensor")]
    InvalidAxis { axis: usize, rank: usize },
    #[error("non-finite value produced by op '{op}'")]
    NonFinite { op: &'static str },
    #[error("non-finite gradient encountered in backward at op '{op}'")]
    BackwardNonFinite { op: &'static str },
    #[error("backward requires a scalar loss, got shape {shape:?}")]
    NonScalarLoss { shape: Vec<usize> },
    #[error("{what} must be positive, got {value}")]
    NonPositive { what: &'static str, value: f64 },
    #[error("invalid argument to {op}: {reason}")]
    InvalidArgument { op: &'static str, reason: String },
}

pub type Result<T> = std::result::Result<T, TensorError>;
