use std::io::Write;

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;

use super::loss::{d_loss, g_loss_hinge, g_loss_ns, gold_g_loss, topk_g_loss, LossKind};
use super::{GanModel, GeneratorObjective, TrainConfig};
use crate::datasets::LabeledDataset;
use crate::diagnostics::{ldr_clamped, LdrLog, SamplingDistribution};
use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::numcore::{AdamState, Mlp};
use crate::rng;

const RECORD_CHUNK: usize = 4096;

/// One row of the training curve. `d_loss` is `-V_D`, `g_loss` is `V_G`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub step: u64,
    pub d_loss: f64,
    pub g_loss: f64,
    pub lr: f64,
}

pub fn write_curve_csv<W: Write>(curve: &[CurvePoint], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["step", "d_loss", "g_loss", "lr"])?;
    for p in curve {
        w.write_record([p.step.to_string(), fmt_f64(p.d_loss), fmt_f64(p.g_loss), fmt_f64(p.lr)])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct Phase1Output {
    pub log: LdrLog,
    pub curve: Vec<CurvePoint>,
}

/// Value recorded per training point: the clamped LDR for a sigmoid
/// discriminator, the raw output for a hinge discriminator.
pub fn record_values(d: &Mlp, points: ArrayView2<f64>, loss: LossKind) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(points.nrows());
    for chunk in points.axis_chunks_iter(Axis(0), RECORD_CHUNK) {
        let y = d.forward(chunk)?;
        match loss {
            LossKind::NonSaturating => out.extend(y.iter().map(|&p| ldr_clamped(p))),
            LossKind::Hinge => out.extend(y.iter().copied()),
        }
    }
    Ok(out)
}

fn latent_batch<R: Rng + ?Sized>(rng: &mut R, rows: usize, dim: usize) -> Array2<f64> {
    let mut buf = vec![0.0; rows * dim];
    rng::fill_normal(rng, &mut buf);
    Array2::from_shape_vec((rows, dim), buf).expect("rows * dim values")
}

fn discriminator_update(
    loss: LossKind,
    d: &mut Mlp,
    opt: &mut AdamState,
    real: ArrayView2<f64>,
    fake: ArrayView2<f64>,
    lr: f64,
    step: u64,
) -> Result<f64> {
    let out = d_loss(loss, d, real, fake)?;
    if !out.value.is_finite() {
        return Err(Error::Divergence { step, what: "non-finite discriminator loss".into() });
    }
    opt.step(d, &out.grads, lr).map_err(|e| with_step(e, step))?;
    Ok(-out.value)
}

fn with_step(e: Error, step: u64) -> Error {
    match e {
        Error::Divergence { what, .. } => Error::Divergence { step, what },
        other => other,
    }
}

/// Shared body of every training step: sample fakes, update D on
/// `(real, fakes)`, then update G against the updated D. Returns the fakes
/// (pre-update generator output) for auxiliary updates.
fn adversarial_step(
    model: &mut GanModel,
    cfg: &TrainConfig,
    real: ArrayView2<f64>,
    z: ArrayView2<f64>,
    lr: f64,
) -> Result<(Array2<f64>, CurvePoint)> {
    let step = model.step + 1;
    let g_tape = model.generator.forward_tape(z)?;
    let fake = g_tape.output().clone();
    let d_value =
        discriminator_update(cfg.loss, &mut model.discriminator, &mut model.d_opt, real, fake.view(), lr, step)?;

    let d = &model.discriminator;
    let g_out = match (cfg.loss, cfg.generator_objective) {
        (LossKind::Hinge, _) => g_loss_hinge(d, fake.view())?,
        (LossKind::NonSaturating, GeneratorObjective::Standard) => g_loss_ns(d, fake.view())?,
        (LossKind::NonSaturating, GeneratorObjective::TopK { fraction }) => topk_g_loss(d, fake.view(), fraction)?,
        (LossKind::NonSaturating, GeneratorObjective::Gold) => gold_g_loss(d, fake.view())?,
    };
    if !g_out.value.is_finite() {
        return Err(Error::Divergence { step, what: "non-finite generator loss".into() });
    }
    let (g_grads, _) = model.generator.backward(&g_tape, &g_out.fake_grad)?;
    model.g_opt.step(&mut model.generator, &g_grads, lr).map_err(|e| with_step(e, step))?;
    model.step = step;
    Ok((fake, CurvePoint { step, d_loss: d_value, g_loss: g_out.value, lr }))
}

/// Phase 1: uniform minibatches until `cfg.phase1_steps`, recording every
/// training point's LDR on the configured schedule.
pub fn train_phase1(model: &mut GanModel, dataset: &LabeledDataset, cfg: &TrainConfig) -> Result<Phase1Output> {
    cfg.validate()?;
    if model.step > cfg.phase1_steps {
        return Err(Error::Contract(format!("model already past phase 1 (step {})", model.step)));
    }
    let sampler = SamplingDistribution::uniform(dataset.len())?;
    let mut rng = rng::stream(cfg.seed, rng::streams::PHASE1);
    let mut log = LdrLog::new(dataset.len());
    let mut curve = Vec::new();
    let latent = model.latent_dim();
    while model.step < cfg.phase1_steps {
        let lr = cfg.lr_at(model.step)?;
        let idx = sampler.draw_batch(&mut rng, cfg.batch_size);
        let real = dataset.points.select(Axis(0), &idx);
        let z = latent_batch(&mut rng, cfg.batch_size, latent);
        let (_, point) = adversarial_step(model, cfg, real.view(), z.view(), lr)?;
        curve.push(point);
        if cfg.records_at(model.step) {
            log.push(model.step, record_values(&model.discriminator, dataset.points.view(), cfg.loss)?)?;
        }
    }
    Ok(Phase1Output { log, curve })
}

/// Phase 2: D and G see minibatches drawn from `sampling`; the auxiliary
/// discriminator sees uniform minibatches against the same fakes.
pub fn train_phase2(
    model: &mut GanModel,
    dataset: &LabeledDataset,
    sampling: &SamplingDistribution,
    cfg: &TrainConfig,
) -> Result<Vec<CurvePoint>> {
    cfg.validate()?;
    if sampling.len() != dataset.len() {
        return Err(Error::Contract(format!(
            "sampling distribution covers {} points, dataset has {}",
            sampling.len(),
            dataset.len()
        )));
    }
    if model.aux.is_none() {
        model.init_aux();
    }
    let uniform = SamplingDistribution::uniform(dataset.len())?;
    let mut rng = rng::stream(cfg.seed, rng::streams::PHASE2);
    let mut aux_rng = rng::stream(cfg.seed, rng::streams::PHASE2_AUX);
    let latent = model.latent_dim();
    let mut curve = Vec::new();
    while model.step < cfg.total_steps {
        let lr = cfg.lr_at(model.step)?;
        let idx = sampling.draw_batch(&mut rng, cfg.batch_size);
        let real = dataset.points.select(Axis(0), &idx);
        let z = latent_batch(&mut rng, cfg.batch_size, latent);
        let (fake, point) = adversarial_step(model, cfg, real.view(), z.view(), lr)?;
        curve.push(point);

        let aux_idx = uniform.draw_batch(&mut aux_rng, cfg.batch_size);
        let aux_real = dataset.points.select(Axis(0), &aux_idx);
        let (aux, aux_opt) = match (model.aux.as_mut(), model.aux_opt.as_mut()) {
            (Some(a), Some(o)) => (a, o),
            _ => unreachable!("auxiliary discriminator initialized above"),
        };
        discriminator_update(cfg.loss, aux, aux_opt, aux_real.view(), fake.view(), lr, model.step)?;
    }
    Ok(curve)
}

/// Baseline continuation: uniform minibatches from the phase-2 stream up to
/// `cfg.total_steps`, no auxiliary discriminator. With a uniform sampling
/// distribution, [`train_phase2`] moves G and D through exactly the same
/// parameters.
pub fn continue_uniform(model: &mut GanModel, dataset: &LabeledDataset, cfg: &TrainConfig) -> Result<Vec<CurvePoint>> {
    cfg.validate()?;
    let uniform = SamplingDistribution::uniform(dataset.len())?;
    let mut rng = rng::stream(cfg.seed, rng::streams::PHASE2);
    let latent = model.latent_dim();
    let mut curve = Vec::new();
    while model.step < cfg.total_steps {
        let lr = cfg.lr_at(model.step)?;
        let idx = uniform.draw_batch(&mut rng, cfg.batch_size);
        let real = dataset.points.select(Axis(0), &idx);
        let z = latent_batch(&mut rng, cfg.batch_size, latent);
        let (_, point) = adversarial_step(model, cfg, real.view(), z.view(), lr)?;
        curve.push(point);
    }
    Ok(curve)
}

/// `n` generator samples from standard-normal latents.
pub fn generate<R: Rng + ?Sized>(g: &Mlp, n: usize, rng: &mut R) -> Result<Array2<f64>> {
    let z = latent_batch(rng, n, g.input_dim());
    g.forward(z.view())
}
