//! Adam optimizer state and update step.

use super::{Result, Tensor, TensorError};

/// Per-parameter first/second moment accumulators plus hyperparameters.
#[derive(Debug, Clone)]
pub struct OptimState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Step counter; strictly increases by one per [`adam_step`].
    pub t: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl OptimState {
    pub fn new(lr: f64) -> Result<Self> {
        Self::with_betas(lr, 0.9, 0.999, 1e-8)
    }

    pub fn with_betas(lr: f64, beta1: f64, beta2: f64, eps: f64) -> Result<Self> {
        if lr <= 0.0 {
            return Err(TensorError::NonPositive {
                what: "learning rate",
                value: lr,
            });
        }
        Ok(Self {
            lr,
            beta1,
            beta2,
            eps,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        })
    }
}

/// One bias-corrected adaptive-moment update over a parameter list.
///
/// Moment accumulators are allocated lazily on the first call and must keep
/// matching shapes afterwards. A zero gradient leaves a fresh parameter
/// unchanged.
pub fn adam_step(
    params: &mut [&mut Tensor],
    grads: &[&Tensor],
    state: &mut OptimState,
) -> Result<()> {
    if params.len() != grads.len() {
        return Err(TensorError::InvalidArgument {
            op: "adam_step",
            reason: format!("{} params vs {} grads", params.len(), grads.len()),
        });
    }
    if state.m.is_empty() {
        state.m = params.iter().map(|p| Tensor::zeros(p.shape().to_vec())).collect();
        state.v = params.iter().map(|p| Tensor::zeros(p.shape().to_vec())).collect();
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if !p.same_shape(g) || !p.same_shape(&state.m[i]) {
            return Err(TensorError::ShapeMismatch {
                op: "adam_step",
                expected: p.shape().to_vec(),
                got: g.shape().to_vec(),
            });
        }
        if !g.is_finite() {
            return Err(TensorError::NonFinite { op: "adam_step" });
        }
    }
    state.t += 1;
    let bc1 = 1.0 - state.beta1.powi(state.t as i32);
    let bc2 = 1.0 - state.beta2.powi(state.t as i32);
    for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let m = state.m[i].data_mut();
        let v = state.v[i].data_mut();
        let pd = p.data_mut();
        for j in 0..pd.len() {
            let gj = g.data()[j];
            m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * gj;
            v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * gj * gj;
            let mhat = m[j] / bc1;
            let vhat = v[j] / bc2;
            pd[j] -= state.lr * mhat / (vhat.sqrt() + state.eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_grad_leaves_params_unchanged() {
        let mut p = Tensor::from_vec(vec![1.0, -2.0, 0.5]);
        let g = Tensor::zeros(vec![3]);
        let mut state = OptimState::new(0.1).unwrap();
        let before = p.clone();
        adam_step(&mut [&mut p], &[&g], &mut state).unwrap();
        assert_eq!(p.data(), before.data());
        assert_eq!(state.t, 1);
    }

    #[test]
    fn first_step_is_approximately_lr() {
        // Bias correction makes the first update lr * g/(|g| + eps').
        let mut p = Tensor::scalar(0.0);
        let g = Tensor::scalar(1.0);
        let mut state = OptimState::new(0.1).unwrap();
        adam_step(&mut [&mut p], &[&g], &mut state).unwrap();
        assert!((p.item() + 0.1).abs() < 1e-6, "param {}", p.item());
    }

    #[test]
    fn constant_grad_moves_monotonically_against_sign() {
        let mut p = Tensor::scalar(0.0);
        let g = Tensor::scalar(2.5);
        let mut state = OptimState::new(0.05).unwrap();
        let mut last = p.item();
        for _ in 0..2 {
            adam_step(&mut [&mut p], &[&g], &mut state).unwrap();
            assert!(p.item() < last);
            last = p.item();
        }
    }

    #[test]
    fn rejects_non_finite_grad() {
        let mut p = Tensor::scalar(0.0);
        let g = Tensor::scalar(f64::NAN);
        let mut state = OptimState::new(0.1).unwrap();
        assert!(adam_step(&mut [&mut p], &[&g], &mut state).is_err());
    }

    #[test]
    fn rejects_non_positive_lr() {
        assert!(OptimState::new(0.0).is_err());
        assert!(OptimState::new(-0.1).is_err());
    }
}
