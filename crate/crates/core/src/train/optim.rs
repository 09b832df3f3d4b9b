//! StepLR schedule, global-norm clipping and AdamW.

use crate::error::{Error, Result};
use crate::mlp::{Gradients, MlpParams};
use crate::train::TrainConfig;

/// `lr0 · gamma^⌊epoch / step_size⌋`, applied as repeated multiplication the
/// way a stepping scheduler decays its rate.
pub fn lr_at_epoch(config: &TrainConfig, epoch: usize) -> f64 {
    let steps = epoch / config.step_size.max(1);
    (0..steps).fold(config.lr0, |lr, _| lr * config.gamma)
}

/// Rescales every gradient by `clip_norm / g` when the global L2 norm `g`
/// exceeds `clip_norm`. Returns the norm before clipping.
///
/// The clipped norm, as recomputed by [`Gradients::global_norm`], never
/// exceeds `clip_norm`, so clipping twice is bitwise identical to clipping
/// once.
pub fn clip_gradients(grads: &mut Gradients, clip_norm: f64) -> f64 {
    let before = grads.global_norm();
    let mut norm = before;
    let mut shrink = 1.0;
    while norm > clip_norm {
        let factor = clip_norm / norm * shrink;
        grads.iter_mut().for_each(|g| *g *= factor);
        norm = grads.global_norm();
        // rounding can leave the norm an ulp above the limit
        shrink *= 1.0 - 4.0 * f64::EPSILON;
    }
    before
}

/// First and second moment estimates for AdamW.
#[derive(Debug, Clone)]
pub struct AdamState {
    step: u64,
    m: Gradients,
    v: Gradients,
}

impl AdamState {
    pub fn new(params: &MlpParams) -> Self {
        Self {
            step: 0,
            m: Gradients::zeros_like(params),
            v: Gradients::zeros_like(params),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }
}

/// One AdamW update with bias-corrected moments and decoupled weight decay:
/// `θ ← θ − lr·m̂/(√v̂ + ε) − lr·λ·θ`. Biases are not decayed.
pub fn adamw_step(
    params: &mut MlpParams,
    grads: &Gradients,
    state: &mut AdamState,
    lr: f64,
    config: &TrainConfig,
) -> Result<()> {
    let same_shape = params.weights.len() == grads.weights.len()
        && params.biases.len() == grads.biases.len()
        && params.weights.iter().zip(&grads.weights).all(|(p, g)| p.shape() == g.shape())
        && params.biases.iter().zip(&grads.biases).all(|(p, g)| p.len() == g.len())
        && state.m.weights.len() == grads.weights.len();
    if !same_shape {
        return Err(Error::InvalidInput("gradient shapes do not match parameters".into()));
    }

    state.step += 1;
    let (b1, b2, eps) = (config.adam_beta1, config.adam_beta2, config.adam_eps);
    let t = state.step.min(i32::MAX as u64) as i32;
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);

    let update = |theta: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64], decay: f64| {
        for i in 0..theta.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            let old = theta[i];
            theta[i] = old - lr * m_hat / (v_hat.sqrt() + eps) - lr * decay * old;
        }
    };

    for l in 0..params.weights.len() {
        update(
            params.weights[l].as_mut_slice(),
            grads.weights[l].as_slice(),
            state.m.weights[l].as_mut_slice(),
            state.v.weights[l].as_mut_slice(),
            config.weight_decay,
        );
        update(
            &mut params.biases[l],
            &grads.biases[l],
            &mut state.m.biases[l],
            &mut state.v.biases[l],
            0.0,
        );
    }
    Ok(())
}
