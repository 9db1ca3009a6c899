//! Synthetic distortion ladder for training and validating the quality
//! regressor: a grid of Gaussian blur and multiplicative speckle levels
//! applied to user-supplied pristine images, with the severity label being
//! the normalized rank of the distortion pair.

use super::features::nss_features;
use super::Result;
use crate::imageio::Image;
use crate::preprocess::{add_speckle_noise, gaussian_smooth};

pub const BLUR_LEVELS: [f64; 5] = [0.0, 0.5, 1.0, 2.0, 4.0];
pub const SPECKLE_LEVELS: [f64; 4] = [0.0, 0.05, 0.1, 0.2];

/// Normalized distortion rank of a (blur index, speckle index) grid cell:
/// the mean of the two axis ranks, in [0,1].
pub fn severity_of(blur_idx: usize, speckle_idx: usize) -> f64 {
    let b = blur_idx as f64 / (BLUR_LEVELS.len() - 1) as f64;
    let s = speckle_idx as f64 / (SPECKLE_LEVELS.len() - 1) as f64;
    (b + s) / 2.0
}

/// All blur x speckle variants of one image with their severities. Speckle
/// draws are seeded per grid cell so the ladder replays exactly.
pub fn distortion_ladder(img: &Image, seed: u64) -> Result<Vec<(Image, f64)>> {
    let mut out = Vec::with_capacity(BLUR_LEVELS.len() * SPECKLE_LEVELS.len());
    for (bi, &sigma) in BLUR_LEVELS.iter().enumerate() {
        let blurred = gaussian_smooth(img, sigma).map_err(io_from_preprocess)?;
        for (si, &intensity) in SPECKLE_LEVELS.iter().enumerate() {
            let cell = (bi * SPECKLE_LEVELS.len() + si) as u64;
            let distorted = add_speckle_noise(&blurred, intensity, seed.wrapping_add(cell));
            out.push((distorted, severity_of(bi, si)));
        }
    }
    Ok(out)
}

fn io_from_preprocess(e: crate::preprocess::PreprocessError) -> super::IqaError {
    super::IqaError::InvalidParameter {
        reason: e.to_string(),
    }
}

/// Feature/severity pairs over a pristine corpus, ready for
/// [`super::train_quality_regressor`].
pub fn build_regressor_corpus(
    pristine: &[Image],
    seed: u64,
) -> Result<Vec<(Vec<f64>, f64)>> {
    let mut pairs = Vec::new();
    for (k, img) in pristine.iter().enumerate() {
        for (distorted, severity) in distortion_ladder(img, seed.wrapping_add(k as u64 * 1000))? {
            match nss_features(&distorted) {
                Ok(f) => pairs.push((f, severity)),
                Err(e) => log::warn!("skipping distorted variant of image {k}: {e}"),
            }
        }
    }
    Ok(pairs)
}
