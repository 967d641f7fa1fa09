//! RMSprop parameter updates.

use crate::error::{Error, Result};
use crate::param::Param;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub lr: f64,
    pub alpha: f64,
    pub epsilon: f64,
    pub batch_size: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            lr: 0.001,
            alpha: 0.95,
            epsilon: 1e-7,
            batch_size: 128,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lr.is_nan() || self.lr <= 0.0 {
            return Err(Error::config("lr must be > 0"));
        }
        let alpha_ok = self.alpha > 0.0 && self.alpha < 1.0;
        if self.alpha.is_nan() || !alpha_ok {
            return Err(Error::config("alpha must lie in (0, 1)"));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::config("epsilon must be > 0"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be >= 1"));
        }
        Ok(())
    }
}

/// One RMSprop step on a flat parameter slice:
/// `v ← α·v + (1−α)·g²`, `θ ← θ − lr·g/(√v + ε)`.
///
/// Non-finite gradients abort with a divergence error rather than being
/// clamped.
pub fn rmsprop_update(
    theta: &mut [f64],
    grads: &[f64],
    v: &mut [f64],
    cfg: &OptimizerConfig,
) -> Result<()> {
    if theta.len() != grads.len() || theta.len() != v.len() {
        return Err(Error::shape(format!(
            "rmsprop shapes disagree: θ {}, g {}, v {}",
            theta.len(),
            grads.len(),
            v.len()
        )));
    }
    if let Some((i, &g)) = grads.iter().enumerate().find(|(_, g)| !g.is_finite()) {
        return Err(Error::Divergence(format!(
            "non-finite gradient {g} at parameter index {i}"
        )));
    }
    for i in 0..theta.len() {
        let g = grads[i];
        v[i] = cfg.alpha * v[i] + (1.0 - cfg.alpha) * g * g;
        theta[i] -= cfg.lr * g / (v[i].sqrt() + cfg.epsilon);
    }
    Ok(())
}

/// [`rmsprop_update`] applied to a [`Param`].
pub fn rmsprop_step(param: &mut Param, cfg: &OptimizerConfig) -> Result<()> {
    let Param { value, grad, v } = param;
    rmsprop_update(value.data_mut(), grad.data(), v.data_mut(), cfg)
}
