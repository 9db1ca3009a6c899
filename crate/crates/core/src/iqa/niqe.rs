//! NIQE: fit a multivariate Gaussian over block features of a pristine
//! corpus, then score test images by a Mahalanobis-style distance between
//! their block-feature Gaussian and the pristine one. Lower is better.

use super::features::{features18, two_scale_fields, Region, BLOCK_MIN_SAMPLES, NSS_FEATURE_LEN};
use super::{IqaError, Result};
use crate::imageio::Image;
use crate::numcore::Tensor;
use crate::records::{RecordReader, RecordWriter};
use std::path::Path;

const NIQE_MAGIC: [u8; 8] = *b"UWIQA\0\0\x01";
const NIQE_VERSION: u32 = 1;
const KIND_NIQE: u32 = 1;

/// Pristine-corpus feature statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct NiqeModel {
    /// Mean feature vector (36).
    pub mean: Vec<f64>,
    /// Feature covariance, 36x36 row-major, symmetric PSD.
    pub covariance: Vec<f64>,
    /// Block side length at full scale.
    pub patch: usize,
    /// Quantile of per-image block sharpness below which blocks are dropped.
    pub sharpness_fraction: f64,
}

/// Type-7 (linear interpolation) quantile of unsorted values.
fn quantile(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if sorted.len() == 1 {
        return sorted[0];
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Per-block two-scale features of one image under the sharpness selection
/// rule. Blocks whose estimators fail (for example a flat region with
/// one-sided products) are skipped.
fn image_block_features(img: &Image, patch: usize, fraction: f64) -> Result<Vec<Vec<f64>>> {
    if patch < 2 * BLOCK_MIN_SAMPLES || !patch.is_multiple_of(2) {
        return Err(IqaError::InvalidParameter {
            reason: format!("patch must be even and >= {}, got {patch}", 2 * BLOCK_MIN_SAMPLES),
        });
    }
    let bx = img.width() / patch;
    let by = img.height() / patch;
    if bx == 0 || by == 0 {
        return Err(IqaError::ImageTooSmall {
            w: img.width(),
            h: img.height(),
        });
    }
    let (f1, f2) = two_scale_fields(img)?;

    // Sharpness per block: mean local deviation at full scale.
    let mut sharpness = Vec::with_capacity(bx * by);
    for yb in 0..by {
        for xb in 0..bx {
            let mut acc = 0.0;
            for y in yb * patch..(yb + 1) * patch {
                for x in xb * patch..(xb + 1) * patch {
                    acc += f1.sigma[y * f1.width + x];
                }
            }
            sharpness.push(acc / (patch * patch) as f64);
        }
    }
    let threshold = quantile(&sharpness, fraction);
    let mut keep: Vec<usize> = (0..sharpness.len())
        .filter(|&i| sharpness[i] > threshold)
        .collect();
    if keep.is_empty() {
        // All-tie sharpness (synthetic imagery); fall back to every block.
        keep = (0..sharpness.len()).collect();
    }

    let half = patch / 2;
    let mut features = Vec::with_capacity(keep.len());
    for &i in &keep {
        let (yb, xb) = (i / bx, i % bx);
        let r1 = Region {
            x0: xb * patch,
            y0: yb * patch,
            w: patch,
            h: patch,
        };
        let r2 = Region {
            x0: xb * half,
            y0: yb * half,
            w: half,
            h: half,
        };
        let part1 = match features18(&f1, r1, BLOCK_MIN_SAMPLES) {
            Ok(f) => f,
            Err(e) => {
                log::debug!("skipping block ({xb},{yb}): {e}");
                continue;
            }
        };
        let part2 = match features18(&f2, r2, BLOCK_MIN_SAMPLES) {
            Ok(f) => f,
            Err(e) => {
                log::debug!("skipping block ({xb},{yb}) at half scale: {e}");
                continue;
            }
        };
        let mut v = Vec::with_capacity(NSS_FEATURE_LEN);
        v.extend_from_slice(&part1);
        v.extend_from_slice(&part2);
        features.push(v);
    }
    Ok(features)
}

fn mean_and_covariance(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let d = NSS_FEATURE_LEN;
    let n = rows.len() as f64;
    let mut mean = vec![0.0; d];
    for row in rows {
        for (m, &v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut cov = vec![0.0; d * d];
    for row in rows {
        for i in 0..d {
            let di = row[i] - mean[i];
            for j in i..d {
                cov[i * d + j] += di * (row[j] - mean[j]);
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            let v = cov[i * d + j] / n;
            cov[i * d + j] = v;
            cov[j * d + i] = v;
        }
    }
    (mean, cov)
}

/// Fit the pristine model: pooled mean and covariance over the kept blocks
/// of every corpus image.
pub fn fit_niqe_model(
    corpus: &[Image],
    patch: usize,
    sharpness_fraction: f64,
) -> Result<NiqeModel> {
    if corpus.len() < 10 {
        return Err(IqaError::TooFewImages {
            got: corpus.len(),
            need: 10,
        });
    }
    if !(0.0..1.0).contains(&sharpness_fraction) {
        return Err(IqaError::InvalidParameter {
            reason: format!("sharpness fraction {sharpness_fraction} outside [0,1)"),
        });
    }
    let mut rows = Vec::new();
    for img in corpus {
        rows.extend(image_block_features(img, patch, sharpness_fraction)?);
    }
    if rows.len() < NSS_FEATURE_LEN {
        return Err(IqaError::InsufficientPristineData {
            got: rows.len(),
            need: NSS_FEATURE_LEN,
        });
    }
    let (mean, covariance) = mean_and_covariance(&rows);
    Ok(NiqeModel {
        mean,
        covariance,
        patch,
        sharpness_fraction,
    })
}

/// Cholesky solve of the SPD system `A x = b` (A is d x d row-major).
pub(crate) fn cholesky_solve_pub(a: &[f64], b: &[f64], d: usize) -> Result<Vec<f64>> {
    cholesky_solve(a, b, d)
}

fn cholesky_solve(a: &[f64], b: &[f64], d: usize) -> Result<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut sum = a[i * d + j];
            for k in 0..j {
                sum -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return Err(IqaError::SingularCovariance);
                }
                l[i * d + i] = sum.sqrt();
            } else {
                l[i * d + j] = sum / l[j * d + j];
            }
        }
    }
    // Forward then back substitution.
    let mut y = vec![0.0; d];
    for i in 0..d {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[i * d + k] * y[k];
        }
        y[i] = sum / l[i * d + i];
    }
    let mut x = vec![0.0; d];
    for i in (0..d).rev() {
        let mut sum = y[i];
        for k in i + 1..d {
            sum -= l[k * d + i] * x[k];
        }
        x[i] = sum / l[i * d + i];
    }
    Ok(x)
}

/// Mahalanobis-style distance between two feature Gaussians under the pooled
/// covariance `(S1 + S2)/2` with a relative ridge.
pub(crate) fn gaussian_distance(
    mean1: &[f64],
    cov1: &[f64],
    mean2: &[f64],
    cov2: &[f64],
) -> Result<f64> {
    let d = mean1.len();
    let mut pooled: Vec<f64> = cov1
        .iter()
        .zip(cov2)
        .map(|(&a, &b)| 0.5 * (a + b))
        .collect();
    let trace: f64 = (0..d).map(|i| pooled[i * d + i]).sum();
    let ridge = 1e-6 * trace / d as f64;
    if !ridge.is_finite() || ridge <= 0.0 {
        return Err(IqaError::SingularCovariance);
    }
    for i in 0..d {
        pooled[i * d + i] += ridge;
    }
    let delta: Vec<f64> = mean1.iter().zip(mean2).map(|(&a, &b)| a - b).collect();
    let z = cholesky_solve(&pooled, &delta, d)?;
    let q: f64 = delta.iter().zip(&z).map(|(&a, &b)| a * b).sum();
    Ok(q.max(0.0).sqrt())
}

/// Score a test image against the pristine model; lower is better, 0 means
/// the test feature distribution matches the pristine mean exactly.
pub fn niqe_score(img: &Image, model: &NiqeModel) -> Result<f64> {
    let rows = image_block_features(img, model.patch, model.sharpness_fraction)?;
    if rows.is_empty() {
        return Err(IqaError::NoUsableBlocks);
    }
    let (mean2, cov2) = mean_and_covariance(&rows);
    gaussian_distance(&model.mean, &model.covariance, &mean2, &cov2)
}

impl NiqeModel {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = RecordWriter::new(NIQE_MAGIC, NIQE_VERSION, &[KIND_NIQE]);
        w.put(
            "mean",
            &Tensor::new(vec![NSS_FEATURE_LEN], self.mean.clone()).unwrap(),
        );
        w.put(
            "covariance",
            &Tensor::new(
                vec![NSS_FEATURE_LEN, NSS_FEATURE_LEN],
                self.covariance.clone(),
            )
            .unwrap(),
        );
        w.put("patch", &Tensor::scalar(self.patch as f64));
        w.put(
            "sharpness_fraction",
            &Tensor::scalar(self.sharpness_fraction),
        );
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (header, mut r) = RecordReader::open(bytes, NIQE_MAGIC, NIQE_VERSION, 1)?;
        if header[0] != KIND_NIQE {
            return Err(IqaError::InvalidParameter {
                reason: format!("record kind {} is not a NIQE model", header[0]),
            });
        }
        let recs = r.read_all()?;
        let find = |name: &str| {
            recs.iter()
                .find(|(n, _)| n == name)
                .map(|(_, t)| t.clone())
                .ok_or_else(|| IqaError::InvalidParameter {
                    reason: format!("missing record '{name}'"),
                })
        };
        Ok(NiqeModel {
            mean: find("mean")?.into_data(),
            covariance: find("covariance")?.into_data(),
            patch: find("patch")?.item() as usize,
            sharpness_fraction: find("sharpness_fraction")?.item(),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}
