//! Benchmark result rows and their CSV form.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// One result row. Aggregate rows leave `trial` empty and carry the
/// bootstrap interval; per-trial rows leave the interval empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub method: String,
    pub axis: String,
    pub axis_value: f64,
    pub trial: Option<usize>,
    pub mse: f64,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub runtime_seconds: f64,
    pub seed: u64,
}

/// Column order of the result CSV.
pub const RECORD_HEADER: [&str; 9] = [
    "method",
    "axis",
    "axis_value",
    "trial",
    "mse",
    "ci_low",
    "ci_high",
    "runtime_seconds",
    "seed",
];

impl ExperimentRecord {
    pub fn validate(&self) -> Result<()> {
        if !(self.mse >= 0.0) || !(self.runtime_seconds >= 0.0) {
            return Err(invalid(format!("record for {} has negative mse or runtime", self.method)));
        }
        if let (Some(lo), Some(hi)) = (self.ci_low, self.ci_high) {
            let slack = 1e-12 * self.mse.abs().max(1e-300);
            if lo > self.mse + slack || self.mse > hi + slack {
                return Err(invalid(format!(
                    "interval [{lo}, {hi}] does not contain mse {}",
                    self.mse
                )));
            }
        }
        Ok(())
    }
}

pub fn write_records<W: Write>(w: W, records: &[ExperimentRecord]) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    wtr.write_record(RECORD_HEADER)?;
    for r in records {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_records<R: Read>(r: R) -> Result<Vec<ExperimentRecord>> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers()?.clone();
    if header.iter().ne(RECORD_HEADER.iter().copied()) {
        return Err(invalid(format!("unexpected result header: {header:?}")));
    }
    rdr.deserialize().map(|r| r.map_err(Into::into)).collect()
}
