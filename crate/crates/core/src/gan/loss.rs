//! Adversarial objectives.
//!
//! Discriminator losses report the objective `V_D` the discriminator ascends
//! and return parameter gradients of `-V_D`. Generator losses report the
//! objective `V_G` the generator descends and return `dV_G / d(fake batch)`,
//! which the caller pushes through the generator.
//!
//! For sigmoid discriminators, values use probabilities clamped to
//! `[1e-7, 1 - 1e-7]`; gradients are taken with respect to the logit, where
//! they are exact and never saturate numerically.

use ndarray::{concatenate, Array2, ArrayView2, Axis};

use crate::diagnostics::{clip_scores, ldr_clamped};
use crate::error::{Error, Result};
use crate::numcore::{sigmoid, Activation, Gradients, Mlp, PROB_CLAMP};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    NonSaturating,
    Hinge,
}

impl LossKind {
    /// Output activation the discriminator must use with this loss.
    pub fn discriminator_output(self) -> Activation {
        match self {
            LossKind::NonSaturating => Activation::Sigmoid,
            LossKind::Hinge => Activation::Identity,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DiscriminatorLoss {
    pub value: f64,
    pub grads: Gradients,
}

#[derive(Debug, Clone)]
pub struct GeneratorLoss {
    pub value: f64,
    pub fake_grad: Array2<f64>,
}

fn require_output(d: &Mlp, loss: LossKind) -> Result<()> {
    let want = loss.discriminator_output();
    if d.output_activation() != want || d.output_dim() != 1 {
        return Err(Error::Config(format!(
            "{loss:?} loss needs a scalar discriminator with {want:?} output, got {:?} with {} outputs",
            d.output_activation(),
            d.output_dim()
        )));
    }
    Ok(())
}

fn require_nonempty(batch: &ArrayView2<f64>, what: &str) -> Result<()> {
    if batch.nrows() == 0 {
        return Err(Error::Parameter(format!("{what} batch is empty")));
    }
    Ok(())
}

fn log_prob(z: f64) -> (f64, f64) {
    let p = sigmoid(z).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    (p.ln(), (1.0 - p).ln())
}

/// `V_D = mean log D(x) + mean log(1 - D(G(z)))`.
pub fn d_loss_ns(d: &Mlp, real: ArrayView2<f64>, fake: ArrayView2<f64>) -> Result<DiscriminatorLoss> {
    require_output(d, LossKind::NonSaturating)?;
    require_nonempty(&real, "real")?;
    require_nonempty(&fake, "fake")?;
    let (nr, nf) = (real.nrows(), fake.nrows());
    let batch = concatenate(Axis(0), &[real, fake]).map_err(|e| Error::Shape(e.to_string()))?;
    let tape = d.forward_tape(batch.view())?;
    let logits = tape.logits();
    let mut value = 0.0;
    let mut grad = Array2::zeros((nr + nf, 1));
    for i in 0..nr {
        let z = logits[[i, 0]];
        value += log_prob(z).0 / nr as f64;
        grad[[i, 0]] = -(1.0 - sigmoid(z)) / nr as f64;
    }
    for i in nr..nr + nf {
        let z = logits[[i, 0]];
        value += log_prob(z).1 / nf as f64;
        grad[[i, 0]] = sigmoid(z) / nf as f64;
    }
    let (grads, _) = d.backward_from_logits(&tape, &grad)?;
    Ok(DiscriminatorLoss { value, grads })
}

/// `V_D = mean min(0, -1 + D(x)) + mean min(0, -1 - D(G(z)))` on raw outputs.
pub fn d_loss_hinge(d: &Mlp, real: ArrayView2<f64>, fake: ArrayView2<f64>) -> Result<DiscriminatorLoss> {
    require_output(d, LossKind::Hinge)?;
    require_nonempty(&real, "real")?;
    require_nonempty(&fake, "fake")?;
    let (nr, nf) = (real.nrows(), fake.nrows());
    let batch = concatenate(Axis(0), &[real, fake]).map_err(|e| Error::Shape(e.to_string()))?;
    let tape = d.forward_tape(batch.view())?;
    let out = tape.output();
    let mut value = 0.0;
    let mut grad = Array2::zeros((nr + nf, 1));
    for i in 0..nr {
        let o = out[[i, 0]];
        value += (o - 1.0).min(0.0) / nr as f64;
        if o < 1.0 {
            grad[[i, 0]] = -1.0 / nr as f64;
        }
    }
    for i in nr..nr + nf {
        let o = out[[i, 0]];
        value += (-1.0 - o).min(0.0) / nf as f64;
        if o > -1.0 {
            grad[[i, 0]] = 1.0 / nf as f64;
        }
    }
    let (grads, _) = d.backward_from_logits(&tape, &grad)?;
    Ok(DiscriminatorLoss { value, grads })
}

pub fn d_loss(loss: LossKind, d: &Mlp, real: ArrayView2<f64>, fake: ArrayView2<f64>) -> Result<DiscriminatorLoss> {
    match loss {
        LossKind::NonSaturating => d_loss_ns(d, real, fake),
        LossKind::Hinge => d_loss_hinge(d, real, fake),
    }
}

/// `-(1/B) Σ w_i log D(G(z_i))` with the weights treated as constants.
fn weighted_ns(d: &Mlp, fake: ArrayView2<f64>, weights: Option<&[f64]>) -> Result<GeneratorLoss> {
    let n = fake.nrows() as f64;
    let tape = d.forward_tape(fake)?;
    let logits = tape.logits();
    let mut value = 0.0;
    let mut grad = Array2::zeros((fake.nrows(), 1));
    for i in 0..fake.nrows() {
        let w = weights.map_or(1.0, |w| w[i]);
        if w == 0.0 {
            continue;
        }
        let z = logits[[i, 0]];
        value -= w * log_prob(z).0 / n;
        grad[[i, 0]] = -w * (1.0 - sigmoid(z)) / n;
    }
    let fake_grad = d.input_grad_from_logits(&tape, &grad)?;
    Ok(GeneratorLoss { value, fake_grad })
}

/// `V_G = -mean log D(G(z))`.
pub fn g_loss_ns(d: &Mlp, fake: ArrayView2<f64>) -> Result<GeneratorLoss> {
    require_output(d, LossKind::NonSaturating)?;
    require_nonempty(&fake, "fake")?;
    weighted_ns(d, fake, None)
}

/// `V_G = -mean D(G(z))` on raw outputs.
pub fn g_loss_hinge(d: &Mlp, fake: ArrayView2<f64>) -> Result<GeneratorLoss> {
    require_output(d, LossKind::Hinge)?;
    require_nonempty(&fake, "fake")?;
    let n = fake.nrows() as f64;
    let tape = d.forward_tape(fake)?;
    let value = -tape.output().sum() / n;
    let grad = Array2::from_elem((fake.nrows(), 1), -1.0 / n);
    let fake_grad = d.input_grad_from_logits(&tape, &grad)?;
    Ok(GeneratorLoss { value, fake_grad })
}

/// Indices of the `⌈fraction·B⌉` fakes with the largest discriminator
/// output, in ascending index order. Ties keep the lower index.
pub fn topk_indices(d_out: &[f64], fraction: f64) -> Result<Vec<usize>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Parameter(format!("top-k fraction must be in (0, 1], got {fraction}")));
    }
    let keep = ((fraction * d_out.len() as f64).ceil() as usize).clamp(1, d_out.len());
    let mut order: Vec<usize> = (0..d_out.len()).collect();
    order.sort_by(|&a, &b| d_out[b].total_cmp(&d_out[a]).then(a.cmp(&b)));
    let mut chosen = order[..keep].to_vec();
    chosen.sort_unstable();
    Ok(chosen)
}

/// Non-saturating generator loss over the top-scoring fraction of fakes only.
pub fn topk_g_loss(d: &Mlp, fake: ArrayView2<f64>, fraction: f64) -> Result<GeneratorLoss> {
    require_output(d, LossKind::NonSaturating)?;
    require_nonempty(&fake, "fake")?;
    let scores = d.forward(fake)?.column(0).to_vec();
    let chosen = topk_indices(&scores, fraction)?;
    let scale = fake.nrows() as f64 / chosen.len() as f64;
    let mut weights = vec![0.0; fake.nrows()];
    for i in chosen {
        weights[i] = scale;
    }
    weighted_ns(d, fake, Some(&weights))
}

/// Per-fake weights `∝ clip(exp(LDR))`, normalized to mean one. Uses the
/// same floor-then-ratio clipping as the real-sample scores.
pub fn gold_weights(ldr: &[f64]) -> Vec<f64> {
    let ratios: Vec<f64> = ldr.iter().map(|l| l.exp()).collect();
    let clipped = clip_scores(&ratios);
    let mean = clipped.iter().sum::<f64>() / clipped.len() as f64;
    clipped.iter().map(|c| c / mean).collect()
}

/// Unconditional GOLD-style reweighting of the non-saturating generator loss.
pub fn gold_g_loss(d: &Mlp, fake: ArrayView2<f64>) -> Result<GeneratorLoss> {
    require_output(d, LossKind::NonSaturating)?;
    require_nonempty(&fake, "fake")?;
    let ldr: Vec<f64> = d.forward(fake)?.iter().map(|&p| ldr_clamped(p)).collect();
    let weights = gold_weights(&ldr);
    weighted_ns(d, fake, Some(&weights))
}
