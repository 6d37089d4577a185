//! Number formatting shared by the CSV writers.

use crate::error::{Error, Result};

/// Shortest text that parses back to exactly `v`.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-5..1e16).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub fn parse_f64(s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|e| Error::Format(format!("bad number {s:?}: {e}")))
}

pub fn parse_finite(s: &str) -> Result<f64> {
    let v = parse_f64(s)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Format(format!("non-finite value {s:?}")))
    }
}
