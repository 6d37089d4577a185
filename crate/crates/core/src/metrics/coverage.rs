use std::io::Write;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::datasets::{nearest_mode, GaussianMixtureSpec};
use crate::error::{Error, Result};
use crate::io::fmt_f64;

/// Per-mode counts of high-quality generated samples, optionally paired
/// with the mean LDRM of the training points of each mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeCoverageReport {
    pub counts: Vec<usize>,
    pub total: usize,
    pub radius: f64,
    pub mean_ldrm: Option<Vec<f64>>,
}

impl ModeCoverageReport {
    pub fn high_quality(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Modes with at least `threshold` high-quality samples.
    pub fn modes_covered(&self, threshold: usize) -> usize {
        self.counts.iter().filter(|&&c| c >= threshold).count()
    }

    /// Attaches the per-mode mean of `ldrm`, where `modes[i]` is the mode
    /// of training point `i`.
    pub fn with_mean_ldrm(mut self, ldrm: &[f64], modes: &[usize]) -> Result<Self> {
        if ldrm.len() != modes.len() {
            return Err(Error::Shape(format!("{} LDRM values for {} mode labels", ldrm.len(), modes.len())));
        }
        let mut sums = vec![0.0; self.counts.len()];
        let mut n = vec![0usize; self.counts.len()];
        for (&l, &m) in ldrm.iter().zip(modes) {
            if m >= sums.len() {
                return Err(Error::Parameter(format!("mode index {m} out of range")));
            }
            sums[m] += l;
            n[m] += 1;
        }
        self.mean_ldrm =
            Some(sums.iter().zip(&n).map(|(s, &c)| if c == 0 { f64::NAN } else { s / c as f64 }).collect());
        Ok(self)
    }

    /// CSV with header `mode_index,count,mean_ldrm`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["mode_index", "count", "mean_ldrm"])?;
        for (j, c) in self.counts.iter().enumerate() {
            let l = self.mean_ldrm.as_ref().map(|m| fmt_f64(m[j])).unwrap_or_default();
            w.write_record([j.to_string(), c.to_string(), l])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Assigns every generated point to its nearest mode and counts it when it
/// lies within four component standard deviations of that mode.
pub fn high_quality_counts(generated: ArrayView2<f64>, spec: &GaussianMixtureSpec) -> Result<ModeCoverageReport> {
    if generated.nrows() == 0 {
        return Err(Error::Parameter("no generated samples".into()));
    }
    if generated.ncols() != 2 {
        return Err(Error::Shape(format!("mode coverage needs 2-D samples, got {}", generated.ncols())));
    }
    if spec.centers.is_empty() {
        return Err(Error::Parameter("mixture has no centers".into()));
    }
    let radius = spec.high_quality_radius();
    let mut counts = vec![0; spec.centers.len()];
    for row in generated.rows() {
        let (mode, dist) = nearest_mode(row, spec);
        if dist <= radius {
            counts[mode] += 1;
        }
    }
    Ok(ModeCoverageReport { counts, total: generated.nrows(), radius, mean_ldrm: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    #[test]
    fn radius_constant() {
        let spec = GaussianMixtureSpec::twenty_five();
        assert!((spec.high_quality_radius() - 0.070721).abs() < 1e-6);
        assert!((spec.scaled(3.0).high_quality_radius() - 3.0 * spec.high_quality_radius()).abs() < 1e-15);
    }

    #[test]
    fn counting() {
        let spec = GaussianMixtureSpec::twenty_five();
        let c = spec.centers[7];
        let pts = arr2(&[[c[0], c[1]], [c[0] + 0.1, c[1]], [c[0], c[1] + 0.05]]);
        let rep = high_quality_counts(pts.view(), &spec).unwrap();
        assert_eq!(rep.counts[7], 2);
        assert_eq!(rep.high_quality(), 2);
        assert_eq!(rep.modes_covered(1), 1);
    }
}
