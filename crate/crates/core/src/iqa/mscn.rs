//! Mean-subtracted contrast-normalized (MSCN) coefficients: locally
//! normalized luminance whose statistics underpin NIQE and BRISQUE.

use super::{IqaError, Result};
use crate::imageio::Image;
use crate::preprocess::to_grayscale;

/// MSCN coefficient field with its local mean and deviation fields.
#[derive(Debug, Clone)]
pub struct MscnField {
    pub width: usize,
    pub height: usize,
    /// Normalized coefficients `(I - mu) / (sigma + C)`.
    pub coeffs: Vec<f64>,
    /// Gaussian-weighted local mean of the [0,255]-scaled intensity.
    pub mu: Vec<f64>,
    /// Local deviation field `sqrt(smooth((I - mu)^2))`.
    pub sigma: Vec<f64>,
}

/// Normalized Gaussian window taps. The window extends to `3*sigma_w`
/// truncated toward zero, so the conventional `sigma_w = 7/6` calibration
/// yields a 7x7 window.
fn window_taps(sigma_w: f64) -> Vec<f64> {
    let radius = ((3.0 * sigma_w).floor() as usize).max(1);
    let mut taps: Vec<f64> = (-(radius as isize)..=radius as isize)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma_w * sigma_w)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= sum;
    }
    taps
}

fn smooth2d(src: &[f64], w: usize, h: usize, taps: &[f64]) -> Vec<f64> {
    let r = (taps.len() / 2) as isize;
    let mut tmp = vec![0.0; src.len()];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (ti, &t) in taps.iter().enumerate() {
                let sx = (x as isize + ti as isize - r).clamp(0, w as isize - 1);
                acc += t * src[y * w + sx as usize];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; src.len()];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (ti, &t) in taps.iter().enumerate() {
                let sy = (y as isize + ti as isize - r).clamp(0, h as isize - 1);
                acc += t * tmp[sy as usize * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// Compute the MSCN field of an image. Pixels are rescaled to `[0,255]`
/// internally; `c` is the stabilizer calibrated to that range.
pub fn mscn(img: &Image, sigma_w: f64, c: f64) -> Result<MscnField> {
    if c <= 0.0 {
        return Err(IqaError::NonPositive {
            what: "MSCN stabilizer C",
            value: c,
        });
    }
    if sigma_w <= 0.0 {
        return Err(IqaError::NonPositive {
            what: "MSCN window sigma",
            value: sigma_w,
        });
    }
    let gray = to_grayscale(img);
    let (w, h) = (gray.width(), gray.height());
    let intensity: Vec<f64> = gray.pixels().iter().map(|&v| v * 255.0).collect();
    let taps = window_taps(sigma_w);
    let mu = smooth2d(&intensity, w, h, &taps);
    let dev_sq: Vec<f64> = intensity
        .iter()
        .zip(&mu)
        .map(|(&i, &m)| (i - m) * (i - m))
        .collect();
    let sigma: Vec<f64> = smooth2d(&dev_sq, w, h, &taps)
        .into_iter()
        .map(|v| v.max(0.0).sqrt())
        .collect();
    let coeffs = intensity
        .iter()
        .zip(&mu)
        .zip(&sigma)
        .map(|((&i, &m), &s)| (i - m) / (s + c))
        .collect();
    Ok(MscnField {
        width: w,
        height: h,
        coeffs,
        mu,
        sigma,
    })
}

/// Conventional MSCN calibration: 7x7 Gaussian window, C = 1 on [0,255].
pub(crate) const MSCN_SIGMA_W: f64 = 7.0 / 6.0;
pub(crate) const MSCN_C: f64 = 1.0;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::SplitMix64;

    fn noise_image(side: usize, seed: u64) -> Image {
        let mut rng = SplitMix64::new(seed);
        let px = (0..side * side).map(|_| rng.next_f64()).collect();
        Image::new(side, side, 1, px).unwrap()
    }

    #[test]
    fn constant_image_has_zero_coefficients() {
        let img = Image::new(16, 16, 1, vec![0.6; 256]).unwrap();
        let f = mscn(&img, MSCN_SIGMA_W, MSCN_C).unwrap();
        for &v in &f.coeffs {
            assert!(v.abs() < 1e-9, "coefficient {v}");
        }
    }

    #[test]
    fn white_noise_coefficients_near_zero_mean() {
        let img = noise_image(256, 42);
        let f = mscn(&img, MSCN_SIGMA_W, MSCN_C).unwrap();
        let mean: f64 = f.coeffs.iter().sum::<f64>() / f.coeffs.len() as f64;
        assert!(mean.abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn window_is_7x7_at_conventional_sigma() {
        assert_eq!(window_taps(MSCN_SIGMA_W).len(), 7);
    }

    #[test]
    fn near_invariance_to_positive_gain() {
        // The coefficient ratio under gain g is g(sigma+C)/(g*sigma+C), so
        // with sigma >> C (high-contrast binary texture: local sigma ~ 60 on
        // the 255 scale) a gain of 2 changes coefficients by under 1%.
        let mut rng = SplitMix64::new(7);
        let px: Vec<f64> = (0..128 * 128)
            .map(|_| if rng.next_f64() < 0.5 { 0.0 } else { 0.5 })
            .collect();
        let img = Image::new(128, 128, 1, px.clone()).unwrap();
        let gained = Image::new(128, 128, 1, px.iter().map(|&v| v * 2.0).collect()).unwrap();
        let a = mscn(&img, MSCN_SIGMA_W, MSCN_C).unwrap();
        let b = mscn(&gained, MSCN_SIGMA_W, MSCN_C).unwrap();
        let mut max_rel = 0.0f64;
        let mut measured = 0usize;
        for i in 0..a.coeffs.len() {
            // The <1% bound holds where sigma >> C.
            if a.sigma[i] > 60.0 && a.coeffs[i].abs() > 0.1 {
                max_rel = max_rel.max((a.coeffs[i] - b.coeffs[i]).abs() / a.coeffs[i].abs());
                measured += 1;
            }
        }
        assert!(measured > 1000, "only {measured} high-variance pixels");
        assert!(max_rel < 0.01, "max relative change {max_rel}");
    }

    #[test]
    fn rejects_non_positive_parameters() {
        let img = noise_image(16, 1);
        assert!(mscn(&img, 7.0 / 6.0, 0.0).is_err());
        assert!(mscn(&img, 0.0, 1.0).is_err());
    }
}
