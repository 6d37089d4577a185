use ndarray::Zip;
use serde::{Deserialize, Serialize};

use super::mlp::{Gradients, Mlp};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
}

fn default_eps() -> f64 {
    1e-8
}

impl AdamConfig {
    pub fn new(lr: f64, beta1: f64, beta2: f64) -> Self {
        AdamConfig { lr, beta1, beta2, eps: default_eps() }
    }
}

/// Bias-corrected Adam moments for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    pub m: Gradients,
    pub v: Gradients,
}

impl AdamState {
    pub fn new(config: AdamConfig, net: &Mlp) -> Self {
        AdamState { config, step: 0, m: Gradients::zeros_like(net), v: Gradients::zeros_like(net) }
    }

    /// Applies one update with learning rate `lr` (overrides `config.lr`,
    /// which is the base rate for schedules).
    pub fn step(&mut self, net: &mut Mlp, grads: &Gradients, lr: f64) -> Result<()> {
        if !(lr > 0.0) {
            return Err(Error::Parameter(format!("learning rate must be positive, got {lr}")));
        }
        if grads.layers.len() != self.m.layers.len()
            || grads
                .layers
                .iter()
                .zip(&self.m.layers)
                .any(|(g, m)| g.weight.dim() != m.weight.dim() || g.bias.dim() != m.bias.dim())
        {
            return Err(Error::Shape("gradient blocks do not match optimizer state".into()));
        }
        if !grads.all_finite() {
            return Err(Error::Divergence { step: self.step + 1, what: "non-finite gradient".into() });
        }
        self.step += 1;
        let AdamConfig { beta1, beta2, eps, .. } = self.config;
        let t = i32::try_from(self.step).unwrap_or(i32::MAX);
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);

        let update = |p: &mut f64, g: &f64, m: &mut f64, v: &mut f64| {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        };
        let layers = net.layers_mut();
        for (((layer, g), m), v) in layers.iter_mut().zip(&grads.layers).zip(&mut self.m.layers).zip(&mut self.v.layers)
        {
            Zip::from(&mut layer.weight).and(&g.weight).and(&mut m.weight).and(&mut v.weight).for_each(update);
            Zip::from(&mut layer.bias).and(&g.bias).and(&mut m.bias).and(&mut v.bias).for_each(update);
        }
        Ok(())
    }
}

/// `base_lr · (1 − step / total_steps)`.
pub fn linear_lr_decay(step: u64, total_steps: u64, base_lr: f64) -> Result<f64> {
    if step > total_steps {
        return Err(Error::Domain(format!("step {step} beyond schedule length {total_steps}")));
    }
    if total_steps == 0 {
        return Ok(base_lr);
    }
    Ok(base_lr * (1.0 - step as f64 / total_steps as f64))
}
