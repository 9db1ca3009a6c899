//! Core library for synthesizing pseudo-acoustic sonar imagery from optical
//! images and evaluating the results.
//!
//! The pipeline: optical images are grayscaled, foreground-extracted with a
//! trimap-guided alpha matte, smoothed and resized ([`preprocess`]); a
//! transformer style-transfer model re-renders them with sonar texture
//! ([`styletrans`]); generated images are scored with no-reference quality
//! metrics ([`iqa`]) and compared against real acoustic frames ([`simeval`]).
//! Everything is built on a small dense-tensor library with reverse-mode
//! automatic differentiation ([`numcore`]) and bit-exact raster I/O
//! ([`imageio`]).

pub mod imageio;
pub mod iqa;
pub mod numcore;
pub mod preprocess;
pub mod records;
pub mod simeval;
pub mod styletrans;
