//! Transformer style-transfer network: patch embedding, content-aware
//! positional encoding (CAPE) for the content stream, fixed sinusoidal
//! encoding for the style stream, twin self-attention encoders, a
//! cross-attention decoder that mixes the two codes, and a convolutional
//! pixel decoder. Content images supply high-level structure; style images
//! supply low-level sonar texture.

mod forward;
mod loss;
mod params;
mod train;

pub use forward::sinusoidal_pe;
pub use loss::{LossBreakdown, LossWeights};
pub use params::{load_checkpoint, save_checkpoint, StyleTransferModel};
pub use train::{train, TrainHyper, TrainRun, Trainer};

use crate::numcore::Tensor;

/// Architecture hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    /// Square input side in pixels; must be divisible by `patch`.
    pub image_side: usize,
    /// Patch side in pixels; must be a power of two.
    pub patch: usize,
    /// Token embedding width; divisible by `heads` and even.
    pub embed_dim: usize,
    pub heads: usize,
    /// Self-attention layers per encoder stream.
    pub enc_layers: usize,
    /// Decoder layers (self + cross attention + MLP each).
    pub dec_layers: usize,
    /// CAPE pooled-grid side.
    pub cape_grid: usize,
}

impl Default for ModelConfig {
    /// Desk-scale defaults.
    fn default() -> Self {
        Self {
            image_side: 32,
            patch: 4,
            embed_dim: 64,
            heads: 4,
            enc_layers: 2,
            dec_layers: 2,
            cape_grid: 4,
        }
    }
}

impl ModelConfig {
    /// Token grid side (`image_side / patch`).
    pub fn grid_side(&self) -> usize {
        self.image_side / self.patch
    }

    pub fn token_count(&self) -> usize {
        self.grid_side() * self.grid_side()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |reason: String| Err(ModelError::ConfigInvalid { reason });
        if self.image_side == 0 || self.patch == 0 || self.embed_dim == 0 || self.heads == 0 {
            return fail("all extents must be positive".into());
        }
        if !self.patch.is_power_of_two() {
            return fail(format!("patch {} is not a power of two", self.patch));
        }
        if !self.image_side.is_multiple_of(self.patch) {
            return fail(format!(
                "image side {} not divisible by patch {}",
                self.image_side, self.patch
            ));
        }
        if !self.embed_dim.is_multiple_of(self.heads) {
            return fail(format!(
                "embed dim {} not divisible by heads {}",
                self.embed_dim, self.heads
            ));
        }
        if !self.embed_dim.is_multiple_of(2) {
            return fail(format!("embed dim {} must be even", self.embed_dim));
        }
        if self.cape_grid == 0 || self.cape_grid > self.grid_side() {
            return fail(format!(
                "cape grid {} outside [1, {}]",
                self.cape_grid,
                self.grid_side()
            ));
        }
        Ok(())
    }
}

/// A token sequence laid out over a patch grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchSequence {
    /// (rows, cols) of the token grid.
    pub grid: (usize, usize),
    /// `[rows*cols, d]` tokens in raster order.
    pub tokens: Tensor,
}

impl PatchSequence {
    pub fn new(grid: (usize, usize), tokens: Tensor) -> Result<Self> {
        if tokens.rank() != 2 || tokens.shape()[0] != grid.0 * grid.1 {
            return Err(ModelError::ShapeMismatch {
                what: format!(
                    "token tensor {:?} does not cover a {}x{} grid",
                    tokens.shape(),
                    grid.0,
                    grid.1
                ),
            });
        }
        Ok(Self { grid, tokens })
    }

    pub fn token_count(&self) -> usize {
        self.grid.0 * self.grid.1
    }

    pub fn dim(&self) -> usize {
        self.tokens.shape()[1]
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("invalid model config: {reason}")]
    ConfigInvalid { reason: String },
    #[error("shape mismatch: {what}")]
    ShapeMismatch { what: String },
    #[error("input image is {got_w}x{got_h}, model expects {side}x{side} grayscale")]
    InputSizeMismatch {
        got_w: usize,
        got_h: usize,
        side: usize,
    },
    #[error("sinusoidal encoding needs an even dimension, got {dim}")]
    OddDimension { dim: usize },
    #[error("dataset is empty: {which}")]
    EmptyDataset { which: &'static str },
    #[error("non-finite loss at iteration {iteration}")]
    NonFiniteLoss { iteration: usize },
    #[error("{stack} layer {layer}: {source}")]
    LayerFailed {
        stack: &'static str,
        layer: usize,
        #[source]
        source: Box<ModelError>,
    },
    #[error("checkpoint names diverge at record {index}: expected {expected}, found {found}")]
    CheckpointNameMismatch {
        index: usize,
        expected: String,
        found: String,
    },
    #[error("tensor error: {0}")]
    Tensor(#[from] crate::numcore::TensorError),
    #[error("record error: {0}")]
    Record(#[from] crate::records::RecordError),
    #[error("image error: {0}")]
    Image(#[from] crate::imageio::ImageIoError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ModelError>;
