use ndarray::{ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::{Activation, AdamConfig, AdamState, Mlp};
use crate::rng;

/// Smallest generated set `re_score` will train an autoencoder on.
pub const MIN_GENERATED: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AeConfig {
    pub hidden: usize,
    pub bottleneck: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for AeConfig {
    fn default() -> Self {
        AeConfig { hidden: 32, bottleneck: 2, epochs: 200, batch_size: 128, lr: 1e-3, seed: 0 }
    }
}

/// Euclidean distance divided by the dimension.
pub fn per_dim_distance(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    let sq: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum();
    sq.sqrt() / a.len() as f64
}

/// Fits a dense autoencoder `d → h → b → h → d` to `data` by mean squared error.
pub fn train_autoencoder(data: ArrayView2<f64>, cfg: &AeConfig) -> Result<Mlp> {
    let (n, d) = data.dim();
    if n == 0 || d == 0 {
        return Err(Error::Parameter("autoencoder needs non-empty training data".into()));
    }
    if cfg.batch_size == 0 || cfg.hidden == 0 || cfg.bottleneck == 0 || !(cfg.lr > 0.0) {
        return Err(Error::Parameter(format!("invalid autoencoder config {cfg:?}")));
    }
    let mut rng = rng::stream(cfg.seed, rng::streams::AUTOENCODER);
    let dims = [d, cfg.hidden, cfg.bottleneck, cfg.hidden, d];
    let mut net = Mlp::new(&dims, Activation::Relu, Activation::Identity, &mut rng)?;
    let mut opt = AdamState::new(AdamConfig::new(cfg.lr, 0.9, 0.999), &net);
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let x = data.select(Axis(0), chunk);
            let tape = net.forward_tape(x.view())?;
            let grad = (tape.output() - &x) * (2.0 / chunk.len() as f64);
            let (grads, _) = net.backward(&tape, &grad)?;
            opt.step(&mut net, &grads, cfg.lr)?;
        }
    }
    Ok(net)
}

/// Mean per-dimension reconstruction distance of `subset` under `ae`.
pub fn reconstruction_error(ae: &Mlp, subset: ArrayView2<f64>) -> Result<f64> {
    if subset.nrows() == 0 {
        return Err(Error::Parameter("reconstruction error of an empty subset".into()));
    }
    let recon = ae.forward(subset)?;
    let total: f64 = subset.rows().into_iter().zip(recon.rows()).map(|(a, b)| per_dim_distance(a, b)).sum();
    let mean = total / subset.nrows() as f64;
    if !mean.is_finite() {
        return Err(Error::Divergence { step: 0, what: "non-finite reconstruction".into() });
    }
    Ok(mean)
}

/// Trains an autoencoder on generated samples and scores how well it
/// reconstructs `subset`. High values mean the generator under-covers it.
pub fn re_score(subset: ArrayView2<f64>, generated: ArrayView2<f64>, cfg: &AeConfig) -> Result<f64> {
    if generated.nrows() < MIN_GENERATED {
        return Err(Error::Parameter(format!(
            "need at least {MIN_GENERATED} generated samples, got {}",
            generated.nrows()
        )));
    }
    if subset.ncols() != generated.ncols() {
        return Err(Error::Shape(format!("subset has {} dims, samples {}", subset.ncols(), generated.ncols())));
    }
    let ae = train_autoencoder(generated, cfg)?;
    reconstruction_error(&ae, subset)
}
