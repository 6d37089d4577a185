//! Discriminator rejection sampling.
//!
//! A candidate `x` from the generator is accepted with probability
//! `sigmoid(F̂(x))` where
//!
//! ```text
//! F̂(x) = LDR(x) - LDR_M - log(1 - exp(LDR(x) - LDR_M - ε)) - γ
//! ```
//!
//! `LDR_M` is a running maximum of the log-density ratio, ε keeps the log
//! finite when `LDR(x) = LDR_M`, and γ shifts every acceptance logit to
//! control how aggressive the filter is. With γ = 0 the acceptance
//! probability is `≈ exp(LDR(x) - LDR_M)`, plain rejection sampling.

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gan::LossKind;
use crate::numcore::{sigmoid, Activation, Mlp};
use crate::rng;

pub const DEFAULT_EPSILON: f64 = 1e-6;
/// `256 × 50` candidates for the initial maximum and γ.
pub const DEFAULT_INIT_COUNT: usize = 12_800;
pub const DEFAULT_GAMMA_PERCENTILE: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrsConfig {
    pub epsilon: f64,
    pub init_count: usize,
    pub gamma_percentile: f64,
    /// Candidates generated per batch.
    pub chunk: usize,
    /// Sampling fails if the acceptance rate over a full window of
    /// candidates drops below this floor.
    pub min_acceptance: f64,
    pub starvation_window: usize,
}

impl Default for DrsConfig {
    fn default() -> Self {
        DrsConfig {
            epsilon: DEFAULT_EPSILON,
            init_count: DEFAULT_INIT_COUNT,
            gamma_percentile: DEFAULT_GAMMA_PERCENTILE,
            chunk: 1024,
            min_acceptance: 1e-4,
            starvation_window: 1_000_000,
        }
    }
}

/// Produces candidate samples.
pub trait SampleSource {
    fn sample(&self, n: usize, rng: &mut dyn rand::RngCore) -> Result<Array2<f64>>;
}

/// Log-density-ratio estimate `log p_data(x) / p_g(x)` for a batch.
pub trait LdrEstimator {
    fn ldr(&self, x: ArrayView2<f64>) -> Result<Vec<f64>>;
}

/// A generator network fed with standard-normal latents.
pub struct GeneratorSource<'a>(pub &'a Mlp);

impl SampleSource for GeneratorSource<'_> {
    fn sample(&self, n: usize, rng: &mut dyn rand::RngCore) -> Result<Array2<f64>> {
        let mut z = vec![0.0; n * self.0.input_dim()];
        rng::fill_normal(rng, &mut z);
        let z = Array2::from_shape_vec((n, self.0.input_dim()), z).expect("sized buffer");
        self.0.forward(z.view())
    }
}

/// LDR read off a discriminator: the clamped logit of a sigmoid output, or
/// the raw score of a hinge discriminator.
pub struct DiscriminatorLdr<'a>(pub &'a Mlp);

impl LdrEstimator for DiscriminatorLdr<'_> {
    fn ldr(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        let loss = match self.0.output_activation() {
            Activation::Sigmoid => LossKind::NonSaturating,
            Activation::Identity => LossKind::Hinge,
            other => return Err(Error::Config(format!("cannot read an LDR off a {other:?} output"))),
        };
        crate::gan::record_values(self.0, x, loss)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrsState {
    pub ldr_max: f64,
    pub gamma: f64,
    pub epsilon: f64,
}

impl DrsState {
    pub fn new(ldr_max: f64, gamma: f64, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::Parameter(format!("epsilon must be positive, got {epsilon}")));
        }
        Ok(DrsState { ldr_max, gamma, epsilon })
    }

    /// Raises the running maximum; never lowers it.
    pub fn observe(&mut self, ldr: f64) {
        if ldr > self.ldr_max {
            self.ldr_max = ldr;
        }
    }
}

/// `F̂` for one candidate; `ldr_x` must not exceed `state.ldr_max`.
pub fn f_hat(ldr_x: f64, state: &DrsState) -> Result<f64> {
    if !(ldr_x <= state.ldr_max) {
        return Err(Error::Contract(format!("candidate LDR {ldr_x} exceeds the running maximum {}", state.ldr_max)));
    }
    let delta = ldr_x - state.ldr_max;
    // 1 - exp(a) = -expm1(a), exact for a near 0
    let log_gap = (-(delta - state.epsilon).exp_m1()).ln();
    Ok(delta - log_gap - state.gamma)
}

pub fn acceptance_probability(f_hat_value: f64) -> f64 {
    sigmoid(f_hat_value)
}

/// Accept iff `u < sigmoid(F̂)`.
pub fn accept(f_hat_value: f64, u: f64) -> bool {
    u < acceptance_probability(f_hat_value)
}

/// Element at nearest rank `⌈p·n⌉` (1-based) of the ascending order.
pub fn nearest_rank_percentile(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Parameter("percentile of an empty pool".into()));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Parameter(format!("percentile {p} outside (0, 1]")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    Ok(sorted[rank - 1])
}

/// State from a pool of candidate LDRs: `ldr_max` is their maximum and γ
/// the configured percentile of `F̂` evaluated with γ = 0.
pub fn state_from_pool(pool: &[f64], cfg: &DrsConfig) -> Result<DrsState> {
    if pool.is_empty() {
        return Err(Error::Parameter("empty initialization pool".into()));
    }
    let ldr_max = pool.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let zero_gamma = DrsState::new(ldr_max, 0.0, cfg.epsilon)?;
    let f: Vec<f64> = pool.iter().map(|&l| f_hat(l, &zero_gamma)).collect::<Result<_>>()?;
    let gamma = nearest_rank_percentile(&f, cfg.gamma_percentile)?;
    DrsState::new(ldr_max, gamma, cfg.epsilon)
}

/// Estimates `ldr_max` and γ from `cfg.init_count` fresh candidates.
pub fn init_ldr_max(
    source: &dyn SampleSource,
    estimator: &dyn LdrEstimator,
    cfg: &DrsConfig,
    rng: &mut dyn rand::RngCore,
) -> Result<DrsState> {
    if cfg.init_count == 0 {
        return Err(Error::Parameter("initialization needs at least one candidate".into()));
    }
    let x = source.sample(cfg.init_count, rng)?;
    state_from_pool(&estimator.ldr(x.view())?, cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrsReport {
    pub requested: usize,
    pub accepted: usize,
    pub candidates: usize,
    pub acceptance_rate: f64,
    pub initial_ldr_max: f64,
    pub final_ldr_max: f64,
    pub gamma: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone)]
pub struct DrsOutcome {
    pub samples: Array2<f64>,
    pub report: DrsReport,
}

/// Draws exactly `n` accepted samples. A candidate whose LDR exceeds the
/// running maximum first raises the maximum, then is evaluated against it.
pub fn sample_n(
    source: &dyn SampleSource,
    estimator: &dyn LdrEstimator,
    n: usize,
    state: &mut DrsState,
    cfg: &DrsConfig,
    rng: &mut dyn rand::RngCore,
) -> Result<DrsOutcome> {
    let initial_ldr_max = state.ldr_max;
    let mut rows: Vec<f64> = Vec::new();
    let mut dim = 0;
    let mut accepted = 0usize;
    let mut candidates = 0usize;
    let mut window_seen = 0usize;
    let mut window_accepted = 0usize;
    while accepted < n {
        let x = source.sample(cfg.chunk.max(1), rng)?;
        dim = x.ncols();
        let ldrs = estimator.ldr(x.view())?;
        for (row, ldr) in x.axis_iter(Axis(0)).zip(ldrs) {
            if accepted == n {
                break;
            }
            candidates += 1;
            state.observe(ldr);
            let f = f_hat(ldr, state)?;
            let u: f64 = rng.random();
            window_seen += 1;
            if accept(f, u) {
                rows.extend(row.iter());
                accepted += 1;
                window_accepted += 1;
            }
            if window_seen == cfg.starvation_window {
                let rate = window_accepted as f64 / window_seen as f64;
                if rate < cfg.min_acceptance {
                    return Err(Error::Starvation { rate, window: window_seen });
                }
                window_seen = 0;
                window_accepted = 0;
            }
        }
    }
    let samples = Array2::from_shape_vec((accepted, dim), rows).expect("accepted rows");
    Ok(DrsOutcome {
        samples,
        report: DrsReport {
            requested: n,
            accepted,
            candidates,
            acceptance_rate: if candidates == 0 { 1.0 } else { accepted as f64 / candidates as f64 },
            initial_ldr_max,
            final_ldr_max: state.ldr_max,
            gamma: state.gamma,
            epsilon: state.epsilon,
        },
    })
}

/// Runs `ldr` over `x` and checks it is finite; a convenience for callers
/// holding a discriminator.
pub fn discriminator_ldr(d: &Mlp, x: ArrayView2<f64>) -> Result<Vec<f64>> {
    let v = DiscriminatorLdr(d).ldr(x)?;
    if v.iter().any(|l| !l.is_finite()) {
        return Err(Error::Domain("non-finite LDR".into()));
    }
    Ok(v)
}
