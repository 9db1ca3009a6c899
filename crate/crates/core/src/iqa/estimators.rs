//! Moment-matching estimators for the (asymmetric) generalized Gaussian
//! distributions fit to MSCN coefficients and their pairwise products.

use super::{IqaError, Result};
use std::sync::OnceLock;

/// Gamma function via the Lanczos approximation (g = 7, 9 coefficients),
/// with the reflection formula below 0.5.
pub fn gamma(z: f64) -> f64 {
    // The published g=7 coefficient table, digits as published.
    #[allow(clippy::excessive_precision)]
    const COEFFS: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if z < 0.5 {
        std::f64::consts::PI / ((std::f64::consts::PI * z).sin() * gamma(1.0 - z))
    } else {
        let z = z - 1.0;
        let mut x = COEFFS[0];
        for (i, &c) in COEFFS.iter().enumerate().skip(1) {
            x += c / (z + i as f64);
        }
        let t = z + 7.5;
        (2.0 * std::f64::consts::PI).sqrt() * t.powf(z + 0.5) * (-t).exp() * x
    }
}

/// Generalized Gaussian ratio rho(alpha) = Gamma(2/a)^2 / (Gamma(1/a) Gamma(3/a)).
/// Strictly increasing on the table range, so nearest-match inversion is
/// well-defined.
pub(crate) fn ggd_rho(alpha: f64) -> f64 {
    let g2 = gamma(2.0 / alpha);
    g2 * g2 / (gamma(1.0 / alpha) * gamma(3.0 / alpha))
}

const ALPHA_MIN: f64 = 0.2;
const ALPHA_STEP: f64 = 0.001;
const ALPHA_COUNT: usize = 9_801; // covers [0.2, 10.0]

fn rho_table() -> &'static Vec<f64> {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        (0..ALPHA_COUNT)
            .map(|i| ggd_rho(ALPHA_MIN + i as f64 * ALPHA_STEP))
            .collect()
    })
}

/// Nearest-match inversion of rho over the alpha grid [0.2, 10], step 0.001.
pub(crate) fn invert_rho(rho: f64) -> f64 {
    let table = rho_table();
    // Monotone increasing: binary search for the insertion point.
    let idx = table.partition_point(|&r| r < rho);
    let best = if idx == 0 {
        0
    } else if idx >= table.len() {
        table.len() - 1
    } else if (table[idx] - rho).abs() < (rho - table[idx - 1]).abs() {
        idx
    } else {
        idx - 1
    };
    ALPHA_MIN + best as f64 * ALPHA_STEP
}

/// Fitted zero-mean generalized Gaussian: shape `alpha`, variance `sigma_sq`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GgdParams {
    pub alpha: f64,
    pub sigma_sq: f64,
}

/// Fitted asymmetric generalized Gaussian: shape `nu`, mean `eta`, one-sided
/// variances `sigma_l_sq` / `sigma_r_sq`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggdParams {
    pub nu: f64,
    pub eta: f64,
    pub sigma_l_sq: f64,
    pub sigma_r_sq: f64,
}

pub(crate) fn fit_ggd_min(samples: &[f64], min_samples: usize) -> Result<GgdParams> {
    if samples.len() < min_samples {
        return Err(IqaError::TooFewSamples {
            got: samples.len(),
            need: min_samples,
        });
    }
    let n = samples.len() as f64;
    let e_abs = samples.iter().map(|x| x.abs()).sum::<f64>() / n;
    let e_sq = samples.iter().map(|x| x * x).sum::<f64>() / n;
    let mean = samples.iter().sum::<f64>() / n;
    let var = e_sq - mean * mean;
    // Scale-relative zero test; summation roundoff keeps the variance of
    // constant samples from landing on exact zero.
    if var <= e_sq * 1e-12 || e_sq == 0.0 {
        return Err(IqaError::DegenerateSample);
    }
    let rho = e_abs * e_abs / e_sq;
    Ok(GgdParams {
        alpha: invert_rho(rho),
        sigma_sq: e_sq,
    })
}

/// Moment-matching GGD fit: invert `rho = (E|x|)^2 / E[x^2]` against the
/// precomputed table; `sigma^2 = E[x^2]`.
pub fn fit_ggd(samples: &[f64]) -> Result<GgdParams> {
    fit_ggd_min(samples, 100)
}

pub(crate) fn fit_aggd_min(samples: &[f64], min_samples: usize) -> Result<AggdParams> {
    if samples.len() < min_samples {
        return Err(IqaError::TooFewSamples {
            got: samples.len(),
            need: min_samples,
        });
    }
    let mut neg_sq = 0.0;
    let mut neg_n = 0usize;
    let mut pos_sq = 0.0;
    let mut pos_n = 0usize;
    let mut abs_sum = 0.0;
    let mut sq_sum = 0.0;
    for &x in samples {
        abs_sum += x.abs();
        sq_sum += x * x;
        if x < 0.0 {
            neg_sq += x * x;
            neg_n += 1;
        } else if x > 0.0 {
            pos_sq += x * x;
            pos_n += 1;
        }
    }
    if neg_n == 0 || pos_n == 0 {
        return Err(IqaError::OneSidedSamples);
    }
    let n = samples.len() as f64;
    let sigma_l = (neg_sq / neg_n as f64).sqrt();
    let sigma_r = (pos_sq / pos_n as f64).sqrt();
    if sigma_l == 0.0 || sigma_r == 0.0 {
        return Err(IqaError::DegenerateSample);
    }
    let gamma_hat = sigma_l / sigma_r;
    let r_hat = (abs_sum / n) * (abs_sum / n) / (sq_sum / n);
    let big_r = r_hat * (gamma_hat.powi(3) + 1.0) * (gamma_hat + 1.0)
        / (gamma_hat * gamma_hat + 1.0).powi(2);
    let nu = invert_rho(big_r);
    let eta = (sigma_r - sigma_l) * gamma(2.0 / nu) / gamma(1.0 / nu);
    Ok(AggdParams {
        nu,
        eta,
        sigma_l_sq: sigma_l * sigma_l,
        sigma_r_sq: sigma_r * sigma_r,
    })
}

/// Moment-matching AGGD fit of signed samples (one-sided root-mean-squares,
/// table inversion of the asymmetric ratio, analytic mean term).
pub fn fit_aggd(samples: &[f64]) -> Result<AggdParams> {
    fit_aggd_min(samples, 100)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::SplitMix64;

    #[test]
    fn gamma_reference_values() {
        assert!((gamma(1.0) - 1.0).abs() < 1e-12);
        assert!((gamma(0.5) - std::f64::consts::PI.sqrt()).abs() < 1e-12);
        assert!((gamma(5.0) - 24.0).abs() < 1e-10);
    }

    #[test]
    fn rho_is_strictly_increasing_over_table_range() {
        let mut prev = ggd_rho(0.2);
        let mut alpha = 0.2 + 0.001;
        while alpha <= 10.0 {
            let r = ggd_rho(alpha);
            assert!(r > prev, "rho not increasing at alpha={alpha}");
            prev = r;
            alpha += 0.001;
        }
    }

    fn normal_samples(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = SplitMix64::new(seed);
        (0..n).map(|_| rng.next_normal()).collect()
    }

    fn laplace_samples(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = SplitMix64::new(seed);
        (0..n)
            .map(|_| {
                let u = rng.next_f64() - 0.5;
                -u.signum() * (1.0 - 2.0 * u.abs()).ln()
            })
            .collect()
    }

    #[test]
    fn ggd_recovers_gaussian_shape() {
        let p = fit_ggd(&normal_samples(100_000, 1)).unwrap();
        assert!((1.9..=2.1).contains(&p.alpha), "alpha {}", p.alpha);
        assert!((p.sigma_sq - 1.0).abs() < 0.05);
    }

    #[test]
    fn ggd_recovers_laplace_shape() {
        let p = fit_ggd(&laplace_samples(100_000, 2)).unwrap();
        assert!((0.92..=1.08).contains(&p.alpha), "alpha {}", p.alpha);
    }

    #[test]
    fn ggd_rejects_constant_samples() {
        assert!(matches!(
            fit_ggd(&vec![0.7; 500]),
            Err(IqaError::DegenerateSample)
        ));
    }

    #[test]
    fn ggd_rejects_short_input() {
        assert!(matches!(
            fit_ggd(&[1.0, -1.0]),
            Err(IqaError::TooFewSamples { .. })
        ));
    }

    #[test]
    fn aggd_symmetric_gaussian_has_small_eta() {
        let p = fit_aggd(&normal_samples(100_000, 3)).unwrap();
        assert!(p.eta.abs() < 0.02, "eta {}", p.eta);
        assert!((1.8..=2.2).contains(&p.nu), "nu {}", p.nu);
    }

    #[test]
    fn aggd_negation_equivariance() {
        let xs = normal_samples(50_000, 4)
            .into_iter()
            .map(|x| x + 0.3 * x.abs())
            .collect::<Vec<_>>();
        let neg: Vec<f64> = xs.iter().map(|&x| -x).collect();
        let a = fit_aggd(&xs).unwrap();
        let b = fit_aggd(&neg).unwrap();
        assert!((a.eta + b.eta).abs() < 1e-12);
        assert!((a.sigma_l_sq - b.sigma_r_sq).abs() < 1e-12);
        assert!((a.sigma_r_sq - b.sigma_l_sq).abs() < 1e-12);
        assert_eq!(a.nu, b.nu);
    }

    #[test]
    fn aggd_right_skew_gives_positive_eta() {
        // Construction with sigma_r = 2 sigma_l: continuous half-normals with
        // side weights proportional to their scales.
        let mut rng = SplitMix64::new(5);
        let samples: Vec<f64> = (0..100_000)
            .map(|_| {
                let n = rng.next_normal().abs();
                if rng.next_f64() < 1.0 / 3.0 {
                    -n
                } else {
                    2.0 * n
                }
            })
            .collect();
        let p = fit_aggd(&samples).unwrap();
        assert!(p.eta > 0.0, "eta {}", p.eta);
        assert!(p.sigma_r_sq > p.sigma_l_sq);
        // Gaussian halves: nu should recover ~2 within 15%.
        assert!((1.7..=2.3).contains(&p.nu), "nu {}", p.nu);
    }

    #[test]
    fn aggd_rejects_one_sided_samples() {
        let xs: Vec<f64> = (1..=500).map(|i| i as f64 / 100.0).collect();
        assert!(matches!(fit_aggd(&xs), Err(IqaError::OneSidedSamples)));
    }

    #[test]
    fn inversion_roundtrip_on_grid() {
        for &alpha in &[0.3, 0.7, 1.0, 2.0, 3.5, 8.0] {
            let back = invert_rho(ggd_rho(alpha));
            assert!((back - alpha).abs() <= 0.001 + 1e-9, "{alpha} -> {back}");
        }
    }
}
