//! No-reference image quality assessment: NIQE (pristine-corpus statistical
//! model + Mahalanobis-style distance) and a BRISQUE-style score (natural
//! scene statistics features + trained ridge regressor), both built on
//! MSCN/GGD/AGGD estimators.
//!
//! The reference BRISQUE support-vector regressor and its LIVE-database
//! model are not available here; scores from [`QualityRegressor`] are
//! internally consistent (monotone in distortion severity) but not
//! numerically comparable to published BRISQUE numbers.

mod brisque;
mod distort;
mod estimators;
mod features;
mod mscn;
mod niqe;
mod stats;

pub use brisque::{brisque_score, train_quality_regressor, QualityRegressor};
pub use distort::{build_regressor_corpus, distortion_ladder, severity_of, BLUR_LEVELS, SPECKLE_LEVELS};
pub use estimators::{fit_aggd, fit_ggd, gamma, AggdParams, GgdParams};
pub use features::{nss_features, NSS_FEATURE_LEN};
pub use mscn::{mscn, MscnField};
pub use niqe::{fit_niqe_model, niqe_score, NiqeModel};
pub use stats::spearman;

#[derive(Debug, thiserror::Error)]
pub enum IqaError {
    #[error("degenerate sample: zero variance")]
    DegenerateSample,
    #[error("one-sided samples: AGGD needs both signs present")]
    OneSidedSamples,
    #[error("too few samples: got {got}, need at least {need}")]
    TooFewSamples { got: usize, need: usize },
    #[error("image too small: {w}x{h}, need at least 32x32")]
    ImageTooSmall { w: usize, h: usize },
    #[error("insufficient pristine data: {got} usable blocks, need at least {need}")]
    InsufficientPristineData { got: usize, need: usize },
    #[error("{what} must be positive, got {value}")]
    NonPositive { what: &'static str, value: f64 },
    #[error("pooled covariance is singular even after ridge")]
    SingularCovariance,
    #[error("need at least {need} images, got {got}")]
    TooFewImages { got: usize, need: usize },
    #[error("severities are constant; regression target is degenerate")]
    ConstantSeverities,
    #[error("invalid parameter: {reason}")]
    InvalidParameter { reason: String },
    #[error("no scoreable blocks in test image")]
    NoUsableBlocks,
    #[error("tensor error: {0}")]
    Tensor(#[from] crate::numcore::TensorError),
    #[error("record error: {0}")]
    Record(#[from] crate::records::RecordError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, IqaError>;
