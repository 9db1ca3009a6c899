//! Natural-scene-statistics feature vector shared by NIQE and BRISQUE.
//!
//! Per scale (full resolution and a bilinear half-scale): a GGD fit of the
//! MSCN coefficients (2 features: alpha, sigma^2) plus AGGD fits of the four
//! directional pairwise products - horizontal, vertical, main diagonal,
//! anti-diagonal - each contributing (nu, eta, sigma_l^2, sigma_r^2).
//! That is 18 features per scale, 36 in the fixed order
//! `[scale1 | scale2]`, each scale ordered `[GGD a, GGD s2, H(4), V(4), D1(4), D2(4)]`.

use super::estimators::{fit_aggd_min, fit_ggd_min};
use super::mscn::{mscn, MscnField, MSCN_C, MSCN_SIGMA_W};
use super::{IqaError, Result};
use crate::imageio::Image;
use crate::numcore::resize_bilinear;

/// Length of the full two-scale feature vector.
pub const NSS_FEATURE_LEN: usize = 36;

/// Sample floor for per-block estimator calls. Whole-image fits clear the
/// public 100-sample floor on any supported size; small NIQE blocks at the
/// half scale need this lower bound.
pub(crate) const BLOCK_MIN_SAMPLES: usize = 8;

/// Rectangular window into an MSCN field.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Region {
    pub x0: usize,
    pub y0: usize,
    pub w: usize,
    pub h: usize,
}

impl Region {
    pub(crate) fn full(field: &MscnField) -> Self {
        Region {
            x0: 0,
            y0: 0,
            w: field.width,
            h: field.height,
        }
    }
}

fn region_values(field: &MscnField, r: Region) -> Vec<f64> {
    let mut out = Vec::with_capacity(r.w * r.h);
    for y in r.y0..r.y0 + r.h {
        for x in r.x0..r.x0 + r.w {
            out.push(field.coeffs[y * field.width + x]);
        }
    }
    out
}

fn directional_products(field: &MscnField, r: Region, dy: usize, dx: isize) -> Vec<f64> {
    let mut out = Vec::new();
    let y_end = r.y0 + r.h - dy;
    for y in r.y0..y_end {
        for x in r.x0..r.x0 + r.w {
            let x2 = x as isize + dx;
            if x2 < r.x0 as isize || x2 >= (r.x0 + r.w) as isize {
                continue;
            }
            out.push(
                field.coeffs[y * field.width + x]
                    * field.coeffs[(y + dy) * field.width + x2 as usize],
            );
        }
    }
    out
}

/// 18 features of one scale's MSCN field restricted to `region`.
pub(crate) fn features18(field: &MscnField, region: Region, min_samples: usize) -> Result<[f64; 18]> {
    let mut out = [0.0; 18];
    let values = region_values(field, region);
    let ggd = fit_ggd_min(&values, min_samples)?;
    out[0] = ggd.alpha;
    out[1] = ggd.sigma_sq;
    // (dy, dx): horizontal, vertical, main diagonal, anti-diagonal.
    let directions: [(usize, isize); 4] = [(0, 1), (1, 0), (1, 1), (1, -1)];
    for (k, &(dy, dx)) in directions.iter().enumerate() {
        let prods = directional_products(field, region, dy, dx);
        let aggd = fit_aggd_min(&prods, min_samples)?;
        let base = 2 + 4 * k;
        out[base] = aggd.nu;
        out[base + 1] = aggd.eta;
        out[base + 2] = aggd.sigma_l_sq;
        out[base + 3] = aggd.sigma_r_sq;
    }
    Ok(out)
}

/// Half-scale copy of an image (bilinear).
pub(crate) fn half_scale(img: &Image) -> Result<Image> {
    let t = resize_bilinear(&img.to_tensor(), img.height() / 2, img.width() / 2)?;
    Ok(Image::from_tensor_clamped(&t).expect("resize keeps pixel range"))
}

/// MSCN fields of both scales with the conventional calibration.
pub(crate) fn two_scale_fields(img: &Image) -> Result<(MscnField, MscnField)> {
    let f1 = mscn(img, MSCN_SIGMA_W, MSCN_C)?;
    let f2 = mscn(&half_scale(img)?, MSCN_SIGMA_W, MSCN_C)?;
    Ok((f1, f2))
}

/// The 36-dimensional two-scale NSS feature vector of a whole image.
pub fn nss_features(img: &Image) -> Result<Vec<f64>> {
    if img.width() < 32 || img.height() < 32 {
        return Err(IqaError::ImageTooSmall {
            w: img.width(),
            h: img.height(),
        });
    }
    let (f1, f2) = two_scale_fields(img)?;
    let mut out = Vec::with_capacity(NSS_FEATURE_LEN);
    out.extend_from_slice(&features18(&f1, Region::full(&f1), 100)?);
    out.extend_from_slice(&features18(&f2, Region::full(&f2), 100)?);
    Ok(out)
}
