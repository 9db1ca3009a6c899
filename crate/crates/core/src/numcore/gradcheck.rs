//! Central finite-difference verification of analytic gradients.

use super::{Graph, Result, Tensor, TensorError, Var};

/// Compare the analytic gradient of a scalar-valued map `f` at `point`
/// against central finite differences with step `h`.
///
/// Returns the maximum over coordinates of
/// `|analytic - numeric| / max(1, |analytic|)`.
pub fn grad_check<F>(f: F, point: &Tensor, h: f64) -> Result<f64>
where
    F: Fn(&mut Graph, Var) -> Result<Var>,
{
    if h <= 0.0 {
        return Err(TensorError::NonPositive {
            what: "grad_check step h",
            value: h,
        });
    }

    let mut g = Graph::new();
    let x = g.param(point.clone());
    let out = f(&mut g, x)?;
    if !g.value(out).is_scalar() {
        return Err(TensorError::NonScalarLoss {
            shape: g.value(out).shape().to_vec(),
        });
    }
    g.backward(out)?;
    let analytic = g
        .grad(x)
        .cloned()
        .unwrap_or_else(|| Tensor::zeros(point.shape().to_vec()));

    let eval = |pt: &Tensor| -> Result<f64> {
        let mut g = Graph::new();
        let x = g.input(pt.clone());
        let out = f(&mut g, x)?;
        let v = g.value(out).item();
        if !v.is_finite() {
            return Err(TensorError::NonFinite { op: "grad_check" });
        }
        Ok(v)
    };

    let mut max_err = 0.0f64;
    let mut perturbed = point.clone();
    for i in 0..point.numel() {
        let orig = perturbed.data()[i];
        perturbed.data_mut()[i] = orig + h;
        let fp = eval(&perturbed)?;
        perturbed.data_mut()[i] = orig - h;
        let fm = eval(&perturbed)?;
        perturbed.data_mut()[i] = orig;
        let numeric = (fp - fm) / (2.0 * h);
        let a = analytic.data()[i];
        let err = (a - numeric).abs() / a.abs().max(1.0);
        max_err = max_err.max(err);
    }
    Ok(max_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::SplitMix64;

    #[test]
    fn sum_of_squares_is_nearly_exact() {
        let mut rng = SplitMix64::new(1);
        let point = Tensor::rand_uniform(vec![6], -2.0, 2.0, &mut rng);
        let err = grad_check(
            |g, x| {
                let sq = g.mul(x, x)?;
                g.sum_all(sq)
            },
            &point,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-8, "err {err}");
    }

    #[test]
    fn softmax_cross_entropy_toy() {
        // loss = -sum(onehot * ln(softmax(x)))
        let mut rng = SplitMix64::new(2);
        let point = Tensor::rand_uniform(vec![5], -1.0, 1.0, &mut rng);
        let err = grad_check(
            |g, x| {
                let row = g.reshape(x, vec![1, 5])?;
                let p = g.softmax_axis(row, 1)?;
                let logp = g.ln(p)?;
                let onehot = g.input(Tensor::new(vec![1, 5], vec![1.0, 0.0, 0.0, 0.0, 0.0])?);
                let picked = g.mul(logp, onehot)?;
                let s = g.sum_all(picked)?;
                g.scale(s, -1.0)
            },
            &point,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-6, "err {err}");
    }

    #[test]
    fn linear_map_is_exact() {
        let mut rng = SplitMix64::new(3);
        let point = Tensor::rand_uniform(vec![8], -1.0, 1.0, &mut rng);
        let weights = Tensor::rand_uniform(vec![8], -1.0, 1.0, &mut rng);
        let err = grad_check(
            |g, x| {
                let w = g.input(weights.clone());
                let prod = g.mul(x, w)?;
                g.sum_all(prod)
            },
            &point,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-10, "err {err}");
    }

    #[test]
    fn rejects_non_positive_step() {
        let point = Tensor::from_vec(vec![1.0]);
        assert!(grad_check(|g, x| g.sum_all(x), &point, 0.0).is_err());
    }
}
