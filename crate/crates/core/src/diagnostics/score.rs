use std::io::{Read, Write};

use super::{discrepancy_score, sampling_frequency, ClipRule, LdrLog};
use crate::error::{Error, Result};
use crate::io::{fmt_f64, parse_finite};

/// Raw and clipped discrepancy scores and the resulting sampling
/// probabilities, one entry per training sample.
///
/// CSV layout: header `index,raw,clipped,p_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    pub raw: Vec<f64>,
    pub clipped: Vec<f64>,
    pub p_s: Vec<f64>,
}

impl ScoreTable {
    pub fn from_raw(raw: Vec<f64>) -> Result<Self> {
        Self::from_raw_with(raw, &ClipRule::default())
    }

    pub fn from_raw_with(raw: Vec<f64>, rule: &ClipRule) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::Parameter("no scores".into()));
        }
        rule.validate()?;
        if raw.iter().any(|s| !s.is_finite()) {
            return Err(Error::Domain("non-finite score".into()));
        }
        let clipped = rule.apply(&raw);
        let p_s = sampling_frequency(&clipped);
        Ok(ScoreTable { raw, clipped, p_s })
    }

    /// Scores from the last `window` records of `log`.
    pub fn from_log(log: &LdrLog, k: f64, window: usize) -> Result<Self> {
        Self::from_log_with(log, k, window, &ClipRule::default())
    }

    pub fn from_log_with(log: &LdrLog, k: f64, window: usize, rule: &ClipRule) -> Result<Self> {
        let stats = log.last(window).statistics()?;
        let raw = stats.into_iter().map(|(m, v)| discrepancy_score(m, v, k)).collect::<Result<Vec<_>>>()?;
        Self::from_raw_with(raw, rule)
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["index", "raw", "clipped", "p_s"])?;
        for i in 0..self.len() {
            w.write_record([i.to_string(), fmt_f64(self.raw[i]), fmt_f64(self.clipped[i]), fmt_f64(self.p_s[i])])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        if r.headers()?.iter().collect::<Vec<_>>() != ["index", "raw", "clipped", "p_s"] {
            return Err(Error::Format("score table header must be `index,raw,clipped,p_s`".into()));
        }
        let mut table = ScoreTable { raw: Vec::new(), clipped: Vec::new(), p_s: Vec::new() };
        for rec in r.records() {
            let rec = rec?;
            let i = table.raw.len();
            if rec[0].parse::<usize>().ok() != Some(i) {
                return Err(Error::Format(format!("row {i} has index {:?}", &rec[0])));
            }
            table.raw.push(parse_finite(&rec[1])?);
            table.clipped.push(parse_finite(&rec[2])?);
            let p = parse_finite(&rec[3])?;
            if p < 0.0 {
                return Err(Error::Format(format!("negative probability in row {i}")));
            }
            table.p_s.push(p);
        }
        Ok(table)
    }
}
