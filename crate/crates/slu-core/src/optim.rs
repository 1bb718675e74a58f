//! RMSProp, global-norm gradient clipping, the step-decayed learning rate
//! schedule and inverted dropout.

use ndarray::Array2;
use rand::Rng;

use crate::error::SluError;
use crate::params::ParamSet;
use crate::tape::{Scalar, Tape, Var};

/// Per-parameter mean-square accumulators for RMSProp.
pub struct RmsPropState<F: Scalar> {
    acc: Vec<Array2<F>>,
    pub decay: f64,
    pub epsilon: f64,
}

impl<F: Scalar> RmsPropState<F> {
    pub fn new(params: &ParamSet<F>) -> Self {
        Self::with_hyper(params, 0.9, 1e-8)
    }

    pub fn with_hyper(params: &ParamSet<F>, decay: f64, epsilon: f64) -> Self {
        let acc = params.iter().map(|p| Array2::zeros(p.value.dim())).collect();
        RmsPropState {
            acc,
            decay,
            epsilon,
        }
    }

    pub fn accumulator(&self, idx: usize) -> &Array2<F> {
        &self.acc[idx]
    }
}

/// One RMSProp update over every parameter.
///
/// acc <- decay * acc + (1 - decay) * g^2;  p <- p - lr * g / (sqrt(acc) + eps)
pub fn rmsprop_step<F: Scalar>(
    params: &mut ParamSet<F>,
    state: &mut RmsPropState<F>,
    lr: f64,
) -> Result<(), SluError> {
    let decay = F::from_f64(state.decay);
    let one_minus = F::from_f64(1.0 - state.decay);
    let eps = F::from_f64(state.epsilon);
    let lr = F::from_f64(lr);
    for idx in 0..params.len() {
        let g = params.grad(idx).clone();
        let acc = &mut state.acc[idx];
        acc.zip_mut_with(&g, |a, &gi| *a = decay * *a + one_minus * gi * gi);
        let mut bad = false;
        {
            let value = params.value_mut(idx);
            ndarray::Zip::from(&mut *value)
                .and(&g)
                .and(&*acc)
                .for_each(|v, &gi, &ai| {
                    let upd = lr * gi / (ai.sqrt() + eps);
                    *v = *v - upd;
                    if !v.is_finite() {
                        bad = true;
                    }
                });
        }
        if bad {
            return Err(SluError::NonFinite(params.name(idx).to_string()));
        }
    }
    Ok(())
}

/// Scale all gradients so the global L2 norm does not exceed `threshold`.
/// Returns the applied factor (1.0 when already within the threshold).
pub fn clip_global_norm<F: Scalar>(params: &mut ParamSet<F>, threshold: f64) -> f64 {
    let mut sq = 0.0f64;
    for p in params.iter() {
        sq += p.grad.iter().map(|&g| g.to_f64() * g.to_f64()).sum::<f64>();
    }
    let norm = sq.sqrt();
    if norm <= threshold || norm == 0.0 {
        return 1.0;
    }
    let factor = threshold / norm;
    let f = F::from_f64(factor);
    for idx in 0..params.len() {
        params.grad_mut(idx).mapv_inplace(|g| g * f);
    }
    factor
}

/// Global gradient L2 norm (diagnostic).
pub fn global_grad_norm<F: Scalar>(params: &ParamSet<F>) -> f64 {
    params
        .iter()
        .map(|p| p.grad.iter().map(|&g| g.to_f64() * g.to_f64()).sum::<f64>())
        .sum::<f64>()
        .sqrt()
}

/// Step-decayed schedule: lr0 * decay^floor(step / interval).
pub fn learning_rate(step: u64) -> f64 {
    learning_rate_with(step, 0.0003, 0.95, 3000)
}

pub fn learning_rate_with(step: u64, lr0: f64, decay: f64, interval: u64) -> f64 {
    lr0 * decay.powi((step / interval) as i32)
}

/// Inverted dropout: zero with probability `rate`, scale survivors by
/// 1/(1-rate). Identity in eval mode or at rate 0.
pub fn dropout<F: Scalar>(
    tape: &mut Tape<F>,
    x: Var,
    rate: f64,
    training: bool,
    rng: &mut impl Rng,
) -> Result<Var, SluError> {
    if rate >= 1.0 || rate < 0.0 {
        return Err(SluError::Config(format!("dropout rate {rate} not in [0,1)")));
    }
    if !training || rate == 0.0 {
        return Ok(x);
    }
    let keep = F::from_f64(1.0 / (1.0 - rate));
    let dim = tape.value(x).dim();
    let mask = Array2::from_shape_fn(dim, |_| {
        if rng.gen::<f64>() < rate {
            F::zero()
        } else {
            keep
        }
    });
    Ok(tape.mask_mul(x, mask))
}
