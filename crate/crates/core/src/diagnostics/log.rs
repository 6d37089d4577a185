use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::io::{fmt_f64, parse_finite};

/// Recorded per-sample statistic (LDR, or raw discriminator output for the
/// hinge loss) at a sequence of training steps.
///
/// CSV layout: header `sample,<step>,<step>,...`, then one row per sample
/// with its index followed by its recorded values.
#[derive(Debug, Clone, PartialEq)]
pub struct LdrLog {
    sample_count: usize,
    steps: Vec<u64>,
    columns: Vec<Vec<f64>>,
}

impl LdrLog {
    pub fn new(sample_count: usize) -> Self {
        LdrLog { sample_count, steps: Vec::new(), columns: Vec::new() }
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    pub fn steps(&self) -> &[u64] {
        &self.steps
    }

    pub fn num_records(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Appends the values of every sample recorded at `step`.
    pub fn push(&mut self, step: u64, values: Vec<f64>) -> Result<()> {
        if values.len() != self.sample_count {
            return Err(Error::Shape(format!("record has {} values for {} samples", values.len(), self.sample_count)));
        }
        if self.steps.last().is_some_and(|&last| step <= last) {
            return Err(Error::Contract(format!("record step {step} is not after {:?}", self.steps.last())));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite value for sample {bad} at step {step}")));
        }
        self.steps.push(step);
        self.columns.push(values);
        Ok(())
    }

    /// Values recorded for one sample, oldest first.
    pub fn row(&self, sample: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[sample]).collect()
    }

    /// The values of every sample at record `index`.
    pub fn record(&self, index: usize) -> &[f64] {
        &self.columns[index]
    }

    /// The last `window` records (all of them when fewer exist).
    pub fn last(&self, window: usize) -> LdrLog {
        let start = self.steps.len().saturating_sub(window);
        LdrLog {
            sample_count: self.sample_count,
            steps: self.steps[start..].to_vec(),
            columns: self.columns[start..].to_vec(),
        }
    }

    /// Per-sample `(mean, variance)` over all records.
    pub fn statistics(&self) -> Result<Vec<(f64, f64)>> {
        if self.num_records() < 2 {
            return Err(Error::InsufficientWindow { needed: 2, got: self.num_records() });
        }
        Ok((0..self.sample_count).map(|i| super::mean_var(&self.row(i))).collect())
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["sample".to_owned()];
        header.extend(self.steps.iter().map(u64::to_string));
        w.write_record(&header)?;
        let mut rec = Vec::with_capacity(self.steps.len() + 1);
        for i in 0..self.sample_count {
            rec.clear();
            rec.push(i.to_string());
            rec.extend(self.columns.iter().map(|c| fmt_f64(c[i])));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
        let header = r.headers()?.clone();
        if header.get(0) != Some("sample") {
            return Err(Error::Format("LDR log header must start with `sample`".into()));
        }
        let steps = header
            .iter()
            .skip(1)
            .map(|s| s.parse::<u64>().map_err(|e| Error::Format(format!("bad step {s:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        if steps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Format("record steps must be strictly increasing".into()));
        }
        let mut columns = vec![Vec::new(); steps.len()];
        let mut count = 0usize;
        for rec in r.records() {
            let rec = rec?;
            if rec.len() != steps.len() + 1 {
                return Err(Error::Format(format!(
                    "row {count} has {} fields, expected {}",
                    rec.len(),
                    steps.len() + 1
                )));
            }
            if rec[0].parse::<usize>().ok() != Some(count) {
                return Err(Error::Format(format!("row {count} has sample index {:?}", &rec[0])));
            }
            for (col, field) in columns.iter_mut().zip(rec.iter().skip(1)) {
                col.push(parse_finite(field)?);
            }
            count += 1;
        }
        Ok(LdrLog { sample_count: count, steps, columns })
    }
}
