use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;

/// Tolerance on `Σ p = 1` accepted by [`SamplingDistribution::new`].
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// Categorical distribution over dataset indices, sampled by inverting the
/// cumulative table.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingDistribution {
    cumulative: Vec<f64>,
    last_positive: usize,
}

impl SamplingDistribution {
    /// Requires non-negative finite probabilities summing to one.
    pub fn new(probabilities: &[f64]) -> Result<Self> {
        if probabilities.is_empty() {
            return Err(Error::Parameter("empty sampling distribution".into()));
        }
        if probabilities.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Contract("probabilities must be finite and non-negative".into()));
        }
        let mut acc = 0.0;
        let cumulative: Vec<f64> = probabilities
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        if (acc - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::Contract(format!("probabilities sum to {acc}, not 1")));
        }
        let last_positive = probabilities.iter().rposition(|&p| p > 0.0).unwrap_or(0);
        Ok(SamplingDistribution { cumulative, last_positive })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Parameter("empty sampling distribution".into()));
        }
        Self::new(&vec![1.0 / n as f64; n])
    }

    pub fn len(&self) -> usize {
        self.cumulative.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cumulative.is_empty()
    }

    pub fn probability(&self, i: usize) -> f64 {
        self.cumulative[i] - if i == 0 { 0.0 } else { self.cumulative[i - 1] }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = *self.cumulative.last().expect("non-empty");
        let u = rng::uniform(rng) * total;
        // rounding can push u to the very top of the table
        self.cumulative.partition_point(|&c| c <= u).min(self.last_positive)
    }

    /// `batch` independent draws with replacement.
    pub fn draw_batch<R: Rng + ?Sized>(&self, rng: &mut R, batch: usize) -> Vec<usize> {
        (0..batch).map(|_| self.draw(rng)).collect()
    }
}
