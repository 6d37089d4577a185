//! Per-sample discrepancy statistics and the score-weighted sampler.
//!
//! The log-density-ratio estimate of a point is the logit of the
//! discriminator output. Recorded over a window of training steps, its mean
//! (LDRM) flags regions the generator has not covered and its variance
//! (LDRV) flags points from minor groups. The two combine into a discrepancy
//! score `LDRM + k·√LDRV`, which is clipped and normalized into the
//! probability of drawing each training point into a minibatch.

mod log;
mod sampling;
mod score;

pub use log::LdrLog;
pub use sampling::SamplingDistribution;
pub use score::ScoreTable;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::PROB_CLAMP;

/// Floor applied to raw discrepancy scores.
pub const MIN_CLIP: f64 = 0.01;
/// Largest allowed ratio between the biggest and smallest clipped score.
pub const MAX_RATIO: f64 = 50.0;
/// Number of most recent records used for the statistics.
pub const DEFAULT_WINDOW: usize = 50;
/// Values of `k` swept when tuning the score.
pub const K_SWEEP: [f64; 6] = [0.3, 0.5, 1.0, 3.0, 5.0, 7.0];

/// `log(d / (1 - d))` for a discriminator probability strictly inside (0, 1).
pub fn ldr(d: f64) -> Result<f64> {
    if !(d > 0.0 && d < 1.0) {
        return Err(Error::Domain(format!("discriminator output {d} is not in (0, 1)")));
    }
    Ok((d / (1.0 - d)).ln())
}

/// [`ldr`] after clamping `d` into `[1e-7, 1 - 1e-7]`; always finite.
pub fn ldr_clamped(d: f64) -> f64 {
    let d = if d.is_nan() { 0.5 } else { d.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP) };
    (d / (1.0 - d)).ln()
}

/// Sample mean of the recorded values.
pub fn ldrm(row: &[f64]) -> Result<f64> {
    if row.is_empty() {
        return Err(Error::InsufficientWindow { needed: 1, got: 0 });
    }
    Ok(mean_var(row).0)
}

/// Sample variance with the `|T| - 1` denominator.
pub fn ldrv(row: &[f64]) -> Result<f64> {
    if row.len() < 2 {
        return Err(Error::InsufficientWindow { needed: 2, got: row.len() });
    }
    Ok(mean_var(row).1)
}

/// Welford's running mean and unbiased variance (0 for a single value).
pub(crate) fn mean_var(row: &[f64]) -> (f64, f64) {
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (i, &x) in row.iter().enumerate() {
        let delta = x - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (x - mean);
    }
    let var = if row.len() > 1 { (m2 / (row.len() - 1) as f64).max(0.0) } else { 0.0 };
    (mean, var)
}

/// `ldrm + k·√ldrv`.
pub fn discrepancy_score(ldrm: f64, ldrv: f64, k: f64) -> Result<f64> {
    if !(ldrv >= 0.0) {
        return Err(Error::Domain(format!("variance must be non-negative, got {ldrv}")));
    }
    Ok(ldrm + k * ldrv.sqrt())
}

/// Score clipping: floor at `floor`, then cap at `max_ratio` times the
/// smallest floored score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClipRule {
    pub floor: f64,
    pub max_ratio: f64,
}

impl Default for ClipRule {
    fn default() -> Self {
        ClipRule { floor: MIN_CLIP, max_ratio: MAX_RATIO }
    }
}

impl ClipRule {
    pub fn validate(&self) -> Result<()> {
        if !(self.floor > 0.0 && self.floor.is_finite()) || !(self.max_ratio >= 1.0 && self.max_ratio.is_finite()) {
            return Err(Error::Parameter(format!("invalid clip rule {self:?}")));
        }
        Ok(())
    }

    pub fn apply(&self, raw: &[f64]) -> Vec<f64> {
        let floored: Vec<f64> = raw.iter().map(|&s| if s >= self.floor { s } else { self.floor }).collect();
        let min = floored.iter().copied().fold(f64::INFINITY, f64::min);
        let cap = self.max_ratio * min;
        floored.into_iter().map(|s| s.min(cap)).collect()
    }
}

/// Floors every score at [`MIN_CLIP`], then caps every score at
/// [`MAX_RATIO`] times the smallest floored score.
pub fn clip_scores(raw: &[f64]) -> Vec<f64> {
    ClipRule::default().apply(raw)
}

/// Normalizes clipped scores into sampling probabilities.
pub fn sampling_frequency(clipped: &[f64]) -> Vec<f64> {
    let total: f64 = clipped.iter().sum();
    clipped.iter().map(|s| s / total).collect()
}

/// Hinge-loss variant: the same scoring rule on raw discriminator outputs.
pub fn hinge_statistics(row: &[f64], k: f64) -> Result<f64> {
    discrepancy_score(ldrm(row)?, ldrv(row)?, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ldr_values() {
        assert_eq!(ldr(0.5).unwrap(), 0.0);
        assert!((ldr(0.9).unwrap() - 9f64.ln()).abs() < 1e-12);
        assert!((ldr(0.9).unwrap() - 2.19722).abs() < 1e-5);
        assert!(ldr(0.0).is_err());
        assert!(ldr(1.0).is_err());
        assert!(ldr(f64::NAN).is_err());
        assert!(ldr_clamped(1.0).is_finite());
        assert!((ldr_clamped(0.0) + ldr_clamped(1.0)).abs() < 1e-9);
    }

    #[test]
    fn window_statistics() {
        assert_eq!(ldrm(&[1.0, 1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(ldrv(&[1.0, 1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(ldrm(&[0.0, 2.0]).unwrap(), 1.0);
        assert_eq!(ldrv(&[0.0, 2.0]).unwrap(), 2.0);
        assert!(matches!(ldrv(&[1.0]), Err(Error::InsufficientWindow { needed: 2, got: 1 })));
        assert!(ldrm(&[]).is_err());
    }

    #[test]
    fn score_examples() {
        assert_eq!(discrepancy_score(1.3, 4.0, 0.0).unwrap(), 1.3);
        assert_eq!(discrepancy_score(1.0, 4.0, 0.5).unwrap(), 2.0);
        assert_eq!(discrepancy_score(-0.7, 0.0, 3.0).unwrap(), -0.7);
        assert!(discrepancy_score(0.0, -1e-3, 1.0).is_err());
    }

    #[test]
    fn clip_examples() {
        assert_eq!(clip_scores(&[0.001, 0.02, 10.0]), vec![0.01, 0.02, 0.5]);
        assert_eq!(clip_scores(&[0.01, 0.3, 0.5]), vec![0.01, 0.3, 0.5]);
        assert_eq!(clip_scores(&[0.7, 0.7]), vec![0.7, 0.7]);
        assert_eq!(clip_scores(&[-3.0, f64::NAN]), vec![0.01, 0.01]);
    }

    #[test]
    fn frequency_examples() {
        assert_eq!(sampling_frequency(&[0.2; 4]), vec![0.25; 4]);
        let p = sampling_frequency(&[0.01, 0.02, 0.5]);
        for (a, b) in p.iter().zip([0.01887, 0.03774, 0.94340]) {
            assert!((a - b).abs() < 1e-5);
        }
    }

    #[test]
    fn hinge_examples() {
        assert_eq!(hinge_statistics(&[0.4, 0.4, 0.4], 2.0).unwrap(), 0.4);
        assert!((hinge_statistics(&[-1.0, 1.0], 1.0).unwrap() - 2f64.sqrt()).abs() < 1e-12);
        let row = [0.3, -0.2, 1.7, 0.9];
        assert_eq!(
            hinge_statistics(&row, 0.5).unwrap(),
            discrepancy_score(ldrm(&row).unwrap(), ldrv(&row).unwrap(), 0.5).unwrap()
        );
    }

    proptest! {
        #[test]
        fn ldr_antisymmetric(d in 1e-6f64..(1.0 - 1e-6)) {
            prop_assert!((ldr(d).unwrap() + ldr(1.0 - d).unwrap()).abs() < 1e-9);
        }

        #[test]
        fn score_monotone(m in -5.0f64..5.0, v in 0.0f64..10.0, dm in 1e-3f64..1.0, dv in 1e-3f64..1.0, k in 1e-2f64..7.0) {
            prop_assert!(discrepancy_score(m + dm, v, k).unwrap() > discrepancy_score(m, v, k).unwrap());
            prop_assert!(discrepancy_score(m, v + dv, k).unwrap() > discrepancy_score(m, v, k).unwrap());
        }

        #[test]
        fn clip_is_idempotent_and_bounded(raw in proptest::collection::vec(-10.0f64..100.0, 1..60)) {
            let once = clip_scores(&raw);
            prop_assert_eq!(clip_scores(&once), once.clone());
            let min = once.iter().copied().fold(f64::INFINITY, f64::min);
            let max = once.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(min >= MIN_CLIP);
            prop_assert!(max / min <= MAX_RATIO * (1.0 + 1e-12));
        }

        #[test]
        fn frequency_preserves_ranking(raw in proptest::collection::vec(-1.0f64..5.0, 1..60)) {
            let clipped = clip_scores(&raw);
            let p = sampling_frequency(&clipped);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|&x| x > 0.0));
            let pmin = p.iter().copied().fold(f64::INFINITY, f64::min);
            let pmax = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(pmin / pmax >= 1.0 / MAX_RATIO * (1.0 - 1e-12));
            for i in 0..p.len() {
                for j in 0..p.len() {
                    prop_assert_eq!(clipped[i].partial_cmp(&clipped[j]), p[i].partial_cmp(&p[j]));
                }
            }
        }
    }
}
