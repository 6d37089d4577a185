//! Laplace approximation of a logistic last layer.
//!
//! Treating the discriminator's penultimate activations `φ` as fixed
//! features, the output is a logistic regression `D = σ(θᵀφ)`. Under a
//! Gaussian prior `N(0, s₀I)` the posterior is approximately
//! `N(θ_MAP, S_n)`, and since the logit is linear in `θ` the variance of
//! the LDR at `x` is exactly `φᵀ S_n φ` under that Gaussian.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use ndarray::{ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::datasets::{Group, LabeledDataset};
use crate::diagnostics::LdrLog;
use crate::error::{Error, Result};
use crate::numcore::{sigmoid, Activation, Mlp};
use crate::rng;

pub const DEFAULT_PRIOR_VARIANCE: f64 = 1.0;
pub const DEFAULT_TOLERANCE: f64 = 1e-8;
pub const MAX_NEWTON_ITERATIONS: usize = 200;
pub const MIN_MC_DRAWS: usize = 10_000;

fn to_matrix(features: ArrayView2<f64>) -> DMatrix<f64> {
    let (n, d) = features.dim();
    DMatrix::from_fn(n, d, |i, j| features[[i, j]])
}

fn to_vector(v: ArrayView1<f64>) -> DVector<f64> {
    DVector::from_iterator(v.len(), v.iter().copied())
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn log_posterior(phi: &DMatrix<f64>, y: &[f64], theta: &DVector<f64>, s0: f64) -> f64 {
    let z = phi * theta;
    let lik: f64 = z.iter().zip(y).map(|(&z, &y)| y * z - softplus(z)).sum();
    lik - theta.norm_squared() / (2.0 * s0)
}

/// `Σ D(1−D) φφᵀ + I/s₀`, the negative Hessian of the log-posterior.
fn precision(phi: &DMatrix<f64>, theta: &DVector<f64>, s0: f64) -> DMatrix<f64> {
    let d = phi.ncols();
    let z = phi * theta;
    let mut weighted = phi.clone();
    for (i, &zi) in z.iter().enumerate() {
        let p = sigmoid(zi);
        weighted.row_mut(i).scale_mut(p * (1.0 - p));
    }
    phi.transpose() * weighted + DMatrix::identity(d, d) / s0
}

fn check_inputs(features: ArrayView2<f64>, s0: f64) -> Result<()> {
    if !(s0 > 0.0) || !s0.is_finite() {
        return Err(Error::Parameter(format!("prior variance must be positive, got {s0}")));
    }
    if features.ncols() == 0 {
        return Err(Error::Shape("zero-dimensional features".into()));
    }
    if features.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite feature".into()));
    }
    Ok(())
}

/// Maximizes the L2-regularized logistic log-posterior by damped Newton
/// steps until the gradient norm is at most `tol`.
pub fn fit_map(features: ArrayView2<f64>, labels: &[u8], s0: f64, tol: f64) -> Result<DVector<f64>> {
    check_inputs(features, s0)?;
    if labels.len() != features.nrows() {
        return Err(Error::Shape(format!("{} labels for {} features", labels.len(), features.nrows())));
    }
    if let Some(bad) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::Domain(format!("label {bad} is not 0 or 1")));
    }
    let phi = to_matrix(features);
    let y: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
    let mut theta = DVector::zeros(phi.ncols());
    let mut objective = log_posterior(&phi, &y, &theta, s0);
    let mut grad_norm = f64::INFINITY;
    for _ in 0..MAX_NEWTON_ITERATIONS {
        let residual = DVector::from_iterator(y.len(), (&phi * &theta).iter().zip(&y).map(|(&z, &y)| y - sigmoid(z)));
        let grad = phi.transpose() * residual - &theta / s0;
        grad_norm = grad.norm();
        if grad_norm <= tol {
            return Ok(theta);
        }
        let h = precision(&phi, &theta, s0);
        let step = Cholesky::new(h).ok_or(Error::Optimization { iterations: 0, grad_norm })?.solve(&grad);
        let slope = grad.dot(&step);
        let mut t = 1.0;
        loop {
            let candidate = &theta + &step * t;
            let value = log_posterior(&phi, &y, &candidate, s0);
            // near the optimum the objective change drops below roundoff
            let flat = (value - objective).abs() <= 1e-12 * objective.abs().max(1.0);
            if value >= objective + 1e-4 * t * slope || flat || t < 1e-10 {
                theta = candidate;
                objective = value;
                break;
            }
            t *= 0.5;
        }
    }
    Err(Error::Optimization { iterations: MAX_NEWTON_ITERATIONS, grad_norm })
}

/// `S_n = (Σ D(1−D) φφᵀ + I/s₀)⁻¹`, symmetrized.
pub fn laplace_covariance(theta: &DVector<f64>, features: ArrayView2<f64>, s0: f64) -> Result<DMatrix<f64>> {
    check_inputs(features, s0)?;
    if theta.len() != features.ncols() {
        return Err(Error::Shape(format!("θ has {} entries, features {}", theta.len(), features.ncols())));
    }
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite θ".into()));
    }
    let h = precision(&to_matrix(features), theta, s0);
    let inv = Cholesky::new(h).expect("ridge keeps the precision positive definite").inverse();
    Ok((&inv + inv.transpose()) * 0.5)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticPosterior {
    pub theta_map: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub prior_variance: f64,
    /// Number of fitted examples.
    pub n: usize,
}

impl LogisticPosterior {
    pub fn fit(features: ArrayView2<f64>, labels: &[u8], s0: f64) -> Result<Self> {
        let theta_map = fit_map(features, labels, s0, DEFAULT_TOLERANCE)?;
        let covariance = laplace_covariance(&theta_map, features, s0)?;
        Ok(LogisticPosterior { theta_map, covariance, prior_variance: s0, n: features.nrows() })
    }

    pub fn dim(&self) -> usize {
        self.theta_map.len()
    }

    fn check_feature(&self, phi: ArrayView1<f64>) -> Result<()> {
        if phi.len() != self.dim() {
            return Err(Error::Shape(format!("feature has {} dims, posterior {}", phi.len(), self.dim())));
        }
        Ok(())
    }
}

/// `φᵀ S_n φ`.
pub fn ldrv_approx(phi: ArrayView1<f64>, posterior: &LogisticPosterior) -> Result<f64> {
    posterior.check_feature(phi)?;
    let v = to_vector(phi);
    Ok((v.transpose() * &posterior.covariance * &v)[(0, 0)].max(0.0))
}

/// Sample variance of `θᵀφ` over `draws` samples `θ ~ N(θ_MAP, S_n)`.
pub fn mc_ldrv_oracle(phi: ArrayView1<f64>, posterior: &LogisticPosterior, draws: usize, seed: u64) -> Result<f64> {
    posterior.check_feature(phi)?;
    if draws < MIN_MC_DRAWS {
        return Err(Error::Parameter(format!("need at least {MIN_MC_DRAWS} draws, got {draws}")));
    }
    let chol: Cholesky<f64, Dyn> = Cholesky::new(posterior.covariance.clone())
        .ok_or_else(|| Error::Domain("posterior covariance is not positive definite".into()))?;
    let l = chol.l();
    let v = to_vector(phi);
    let d = posterior.dim();
    let mut rng = rng::stream(seed, rng::streams::BAYES);
    let mut z = DVector::zeros(d);
    let mut values = Vec::with_capacity(draws);
    for _ in 0..draws {
        rng::fill_normal(&mut rng, z.as_mut_slice());
        let theta = &posterior.theta_map + &l * &z;
        values.push(theta.dot(&v));
    }
    let (_, var) = crate::diagnostics::mean_var(&values);
    Ok(var)
}

/// Standard error of a sample variance of `draws` Gaussian values with
/// true variance `variance`.
pub fn variance_standard_error(variance: f64, draws: usize) -> f64 {
    variance * (2.0 / (draws as f64 - 1.0)).sqrt()
}

/// `Σ D(1−D) ⟨y, φᵢ⟩²` over the pool, for unit-normalized `y`.
pub fn projection_energy(direction: ArrayView1<f64>, features: ArrayView2<f64>, d_values: &[f64]) -> Result<f64> {
    if direction.len() != features.ncols() || d_values.len() != features.nrows() {
        return Err(Error::Shape("direction, features and D values disagree".into()));
    }
    let norm = direction.dot(&direction).sqrt();
    if norm == 0.0 {
        return Ok(0.0);
    }
    let proj = features.dot(&direction);
    Ok(proj.iter().zip(d_values).map(|(p, d)| d * (1.0 - d) * (p / norm).powi(2)).sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub count: usize,
    pub mean_ldrm: f64,
    pub mean_ldrv: f64,
    /// Mean `φᵀ S_n φ` with the trained last layer taken as `θ_MAP`.
    pub mean_ldrv_approx: f64,
    /// Projection energy of the group's mean feature direction.
    pub projection_energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinorLdrvReport {
    pub schema_version: u32,
    pub window: usize,
    pub prior_variance: f64,
    pub major: GroupSummary,
    pub minor: GroupSummary,
    pub ldrv_ratio: f64,
}

/// Compares major and minor training points: recorded LDRM/LDRV over the
/// last `window` records, and the Laplace quantities computed from the
/// discriminator's penultimate features.
pub fn minor_ldrv_study(
    dataset: &LabeledDataset,
    log: &LdrLog,
    discriminator: &Mlp,
    window: usize,
    s0: f64,
) -> Result<MinorLdrvReport> {
    if discriminator.output_activation() != Activation::Sigmoid {
        return Err(Error::Config("the study needs a sigmoid discriminator".into()));
    }
    if log.sample_count() != dataset.len() {
        return Err(Error::Shape(format!("log covers {} points, dataset {}", log.sample_count(), dataset.len())));
    }
    let major = dataset.indices_of(Group::Major);
    let minor = dataset.indices_of(Group::Minor);
    if major.is_empty() || minor.is_empty() {
        return Err(Error::Parameter("dataset lacks major or minor group labels".into()));
    }
    let stats = log.last(window).statistics()?;

    let (d_out, phi) = discriminator.forward_features(dataset.points.view())?;
    let d_values: Vec<f64> = d_out.iter().copied().collect();
    let ones = ndarray::Array2::ones((phi.nrows(), 1));
    let features = ndarray::concatenate![Axis(1), phi, ones];
    let last = discriminator.layers().last().expect("at least one layer");
    let theta = DVector::from_iterator(
        features.ncols(),
        last.weight.row(0).iter().copied().chain(std::iter::once(last.bias[0])),
    );
    let cov = laplace_covariance(&theta, features.view(), s0)?;
    let posterior = LogisticPosterior { theta_map: theta, covariance: cov, prior_variance: s0, n: dataset.len() };

    let summarize = |idx: &[usize]| -> Result<GroupSummary> {
        let n = idx.len() as f64;
        let mean_ldrm = idx.iter().map(|&i| stats[i].0).sum::<f64>() / n;
        let mean_ldrv = idx.iter().map(|&i| stats[i].1).sum::<f64>() / n;
        let mut approx = 0.0;
        for &i in idx {
            approx += ldrv_approx(features.row(i), &posterior)?;
        }
        let direction = features.select(Axis(0), idx).mean_axis(Axis(0)).expect("non-empty group");
        let energy = projection_energy(direction.view(), features.view(), &d_values)?;
        Ok(GroupSummary {
            count: idx.len(),
            mean_ldrm,
            mean_ldrv,
            mean_ldrv_approx: approx / n,
            projection_energy: energy,
        })
    };
    let major = summarize(&major)?;
    let minor = summarize(&minor)?;
    let ldrv_ratio = minor.mean_ldrv / major.mean_ldrv;
    Ok(MinorLdrvReport { schema_version: 1, window, prior_variance: s0, major, minor, ldrv_ratio })
}

/// Seeded synthetic logistic data: standard normal features and labels
/// drawn from a random true weight vector.
pub fn synthetic_logistic(n: usize, d: usize, seed: u64) -> (ndarray::Array2<f64>, Vec<u8>) {
    let mut rng = rng::stream(seed, rng::streams::BAYES);
    let mut theta = vec![0.0; d];
    rng::fill_normal(&mut rng, &mut theta);
    let mut buf = vec![0.0; n * d];
    rng::fill_normal(&mut rng, &mut buf);
    let x = ndarray::Array2::from_shape_vec((n, d), buf).expect("sized buffer");
    let labels = x
        .rows()
        .into_iter()
        .map(|row| {
            let z: f64 = row.iter().zip(&theta).map(|(a, b)| a * b).sum();
            u8::from(rng::uniform(&mut rng) < sigmoid(z))
        })
        .collect();
    (x, labels)
}
