//! BRISQUE-style scoring: NSS features mapped to a quality score by a
//! closed-form ridge regressor trained on a synthetic distortion ladder.
//! Lower is better by construction of the training severities.

use super::features::{nss_features, NSS_FEATURE_LEN};
use super::{IqaError, Result};
use crate::imageio::Image;
use crate::numcore::Tensor;
use crate::records::{RecordReader, RecordWriter};
use std::path::Path;

const IQA_MAGIC: [u8; 8] = *b"UWIQA\0\0\x01";
const IQA_VERSION: u32 = 1;
const KIND_REGRESSOR: u32 = 2;

/// Standardizing ridge regressor over the 36-dim NSS feature space.
#[derive(Debug, Clone, PartialEq)]
pub struct QualityRegressor {
    pub feat_mean: Vec<f64>,
    /// Per-dimension scale (population std, or 1 where a feature is
    /// constant across the corpus); always positive.
    pub feat_scale: Vec<f64>,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub ridge_lambda: f64,
}

/// Closed-form ridge regression on standardized features. The penalty
/// applies to the sample-mean-normalized Gram matrix
/// `(X'X/n + lambda I) w = X'y/n`, so duplicating the dataset leaves the
/// fit unchanged.
pub fn train_quality_regressor(
    pairs: &[(Vec<f64>, f64)],
    ridge_lambda: f64,
) -> Result<QualityRegressor> {
    if ridge_lambda <= 0.0 {
        return Err(IqaError::NonPositive {
            what: "ridge lambda",
            value: ridge_lambda,
        });
    }
    let d = NSS_FEATURE_LEN;
    if pairs.len() < d {
        return Err(IqaError::TooFewSamples {
            got: pairs.len(),
            need: d,
        });
    }
    let first = pairs[0].1;
    if pairs.iter().all(|(_, y)| *y == first) {
        return Err(IqaError::ConstantSeverities);
    }
    let n = pairs.len() as f64;

    let mut feat_mean = vec![0.0; d];
    for (x, _) in pairs {
        for (m, &v) in feat_mean.iter_mut().zip(x) {
            *m += v;
        }
    }
    for m in &mut feat_mean {
        *m /= n;
    }
    let mut feat_scale = vec![0.0; d];
    for (x, _) in pairs {
        for j in 0..d {
            let dv = x[j] - feat_mean[j];
            feat_scale[j] += dv * dv;
        }
    }
    for s in &mut feat_scale {
        *s = (*s / n).sqrt();
        if *s == 0.0 {
            *s = 1.0;
        }
    }

    let y_mean = pairs.iter().map(|(_, y)| y).sum::<f64>() / n;
    let mut gram = vec![0.0; d * d];
    let mut rhs = vec![0.0; d];
    let mut xhat = vec![0.0; d];
    for (x, y) in pairs {
        for j in 0..d {
            xhat[j] = (x[j] - feat_mean[j]) / feat_scale[j];
        }
        let yc = y - y_mean;
        for i in 0..d {
            rhs[i] += xhat[i] * yc;
            for j in i..d {
                gram[i * d + j] += xhat[i] * xhat[j];
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            let v = gram[i * d + j] / n;
            gram[i * d + j] = v;
            gram[j * d + i] = v;
        }
        gram[i * d + i] += ridge_lambda;
        rhs[i] /= n;
    }
    let weights = super::niqe::cholesky_solve_pub(&gram, &rhs, d)?;
    Ok(QualityRegressor {
        feat_mean,
        feat_scale,
        weights,
        bias: y_mean,
        ridge_lambda,
    })
}

impl QualityRegressor {
    /// Score a raw feature vector.
    pub fn predict(&self, features: &[f64]) -> f64 {
        let mut acc = self.bias;
        for (j, w) in self.weights.iter().enumerate() {
            acc += w * (features[j] - self.feat_mean[j]) / self.feat_scale[j];
        }
        acc
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = RecordWriter::new(IQA_MAGIC, IQA_VERSION, &[KIND_REGRESSOR]);
        let d = self.weights.len();
        w.put("feat_mean", &Tensor::new(vec![d], self.feat_mean.clone()).unwrap());
        w.put("feat_scale", &Tensor::new(vec![d], self.feat_scale.clone()).unwrap());
        w.put("weights", &Tensor::new(vec![d], self.weights.clone()).unwrap());
        w.put("bias", &Tensor::scalar(self.bias));
        w.put("ridge_lambda", &Tensor::scalar(self.ridge_lambda));
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (header, mut r) = RecordReader::open(bytes, IQA_MAGIC, IQA_VERSION, 1)?;
        if header[0] != KIND_REGRESSOR {
            return Err(IqaError::InvalidParameter {
                reason: format!("record kind {} is not a quality regressor", header[0]),
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
        Ok(QualityRegressor {
            feat_mean: find("feat_mean")?.into_data(),
            feat_scale: find("feat_scale")?.into_data(),
            weights: find("weights")?.into_data(),
            bias: find("bias")?.item(),
            ridge_lambda: find("ridge_lambda")?.item(),
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

/// Score an image with a trained regressor.
pub fn brisque_score(img: &Image, regressor: &QualityRegressor) -> Result<f64> {
    Ok(regressor.predict(&nss_features(img)?))
}
