use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::mlp::{Mlp, MlpGrads};
use crate::error::{Error, Result};

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self { lr, ..Self::default() }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 3e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Adam moment accumulators for one [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    step: u64,
    m: Vec<(Matrix, Matrix)>,
    v: Vec<(Matrix, Matrix)>,
}

impl Adam {
    pub fn new(model: &Mlp, config: AdamConfig) -> Self {
        let zeros = MlpGrads::zeros_like(model).layers;
        Self { config, step: 0, m: zeros.clone(), v: zeros }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// First and second moments, flattened in parameter order.
    pub fn moments(&self) -> (Vec<f64>, Vec<f64>) {
        let flat = |s: &[(Matrix, Matrix)]| {
            s.iter().flat_map(|(w, b)| w.as_slice().iter().chain(b.as_slice()).copied()).collect()
        };
        (flat(&self.m), flat(&self.v))
    }

    /// One bias-corrected Adam update of `model` along `-grads`.
    pub fn step(&mut self, model: &mut Mlp, grads: &MlpGrads) -> Result<()> {
        if grads.layers.len() != model.layers().len() {
            return Err(Error::DimensionMismatch { expected: model.layers().len(), got: grads.layers.len() });
        }
        if !grads.is_finite() {
            return Err(Error::NonFinite("gradient passed to Adam".into()));
        }
        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        for (((layer, (gw, gb)), (mw, mb)), (vw, vb)) in model
            .layers_mut()
            .iter_mut()
            .zip(&grads.layers)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            if gw.shape() != layer.weight.shape() || gb.shape() != layer.bias.shape() {
                return Err(Error::DimensionMismatch { expected: layer.weight.len(), got: gw.len() });
            }
            for (param, g, m, v) in [(&mut layer.weight, gw, mw, vw), (&mut layer.bias, gb, mb, vb)] {
                let p = param.as_mut_slice();
                let (m, v) = (m.as_mut_slice(), v.as_mut_slice());
                for i in 0..p.len() {
                    let gi = g.as_slice()[i];
                    m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
                    v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
                    let m_hat = m[i] / bc1;
                    let v_hat = v[i] / bc2;
                    p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
                }
            }
        }
        Ok(())
    }
}
