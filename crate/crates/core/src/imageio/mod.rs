//! Raster image I/O: bit-exact binary PNM (PGM/PPM) load/save, animated GIF
//! frame decomposition, and dataset manifest construction.

mod gif;
mod manifest;
mod pnm;

pub use gif::decode_gif_frames;
pub use gif::decode_gif_frames_bytes;
#[doc(hidden)]
pub use gif::oracle as gif_oracle;
pub use manifest::{build_manifest, DatasetManifest, DatasetRole, ManifestEntry};
pub use pnm::{load_pnm, load_pnm_bytes, save_pnm, save_pnm_bytes};

use crate::numcore::Tensor;

/// Planar raster image. Pixel values live in `[0,1]`; layout is
/// channel-major (`pixels[c*w*h + y*w + x]`), 1 channel for grayscale and 3
/// for RGB.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    pixels: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, pixels: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(ImageIoError::BadChannelCount { channels });
        }
        if pixels.len() != width * height * channels {
            return Err(ImageIoError::BufferLength {
                expected: width * height * channels,
                got: pixels.len(),
            });
        }
        if let Some(&v) = pixels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(ImageIoError::PixelOutOfRange { value: v });
        }
        Ok(Self {
            width,
            height,
            channels,
            pixels,
        })
    }

    pub fn zeros(width: usize, height: usize, channels: usize) -> Self {
        Self {
            width,
            height,
            channels,
            pixels: vec![0.0; width * height * channels],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [f64] {
        &mut self.pixels
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.pixels[(c * self.height + y) * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, v: f64) {
        self.pixels[(c * self.height + y) * self.width + x] = v;
    }

    pub fn is_gray(&self) -> bool {
        self.channels == 1
    }

    /// View as a `[C,H,W]` tensor (same memory layout).
    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(
            vec![self.channels, self.height, self.width],
            self.pixels.clone(),
        )
        .expect("image buffer matches its own shape")
    }

    /// Build from a `[C,H,W]` tensor, clamping values into `[0,1]`.
    pub fn from_tensor_clamped(t: &Tensor) -> Result<Self> {
        if t.rank() != 3 {
            return Err(ImageIoError::BufferLength {
                expected: 3,
                got: t.rank(),
            });
        }
        let (c, h, w) = (t.shape()[0], t.shape()[1], t.shape()[2]);
        let pixels = t.data().iter().map(|&v| v.clamp(0.0, 1.0)).collect();
        Image::new(w, h, c, pixels)
    }
}

/// Errors from raster decoding, encoding and manifest construction.
#[derive(Debug, thiserror::Error)]
pub enum ImageIoError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("unsupported channel count {channels} (expected 1 or 3)")]
    BadChannelCount { channels: usize },
    #[error("pixel buffer length mismatch: expected {expected}, got {got}")]
    BufferLength { expected: usize, got: usize },
    #[error("pixel value {value} outside [0,1]")]
    PixelOutOfRange { value: f64 },
    #[error("bad PNM magic (expected P5 or P6)")]
    PnmBadMagic,
    #[error("malformed PNM header: {reason}")]
    PnmBadHeader { reason: String },
    #[error("unsupported PNM maxval {maxval} (only 255)")]
    PnmBadMaxval { maxval: u32 },
    #[error("truncated PNM raster: expected {expected} bytes, got {got}")]
    PnmTruncated { expected: usize, got: usize },
    #[error("not a GIF file (bad magic)")]
    GifBadMagic,
    #[error("truncated GIF stream while reading {context}")]
    GifTruncated { context: &'static str },
    #[error("corrupt GIF LZW stream: {reason}")]
    GifCorruptLzw { reason: String },
    #[error("GIF stream ended without trailer")]
    GifMissingTrailer,
    #[error("GIF disposal method 3 (restore previous) is not supported")]
    GifUnsupportedDisposal,
    #[error("GIF has no frames")]
    GifNoFrames,
    #[error("cannot read directory {path}: {source}")]
    DirUnreadable {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed manifest line {line}: {reason}")]
    ManifestParse { line: usize, reason: String },
}

pub type Result<T> = std::result::Result<T, ImageIoError>;
