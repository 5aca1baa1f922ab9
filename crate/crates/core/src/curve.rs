//! Decay curves and their CSV representation.
//!
//! Columns: `total_time_s,signal,stderr,n_realizations,n_pulses,tau_s`. The
//! last two are optional when reading; without them a curve can still be fitted
//! with the phenomenological models.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayPoint {
    pub total_time_s: f64,
    pub signal: f64,
    pub stderr: f64,
    pub n_realizations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_pulses: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DecayCurve {
    pub points: Vec<DecayPoint>,
}

#[derive(Deserialize)]
struct Row {
    total_time_s: f64,
    signal: f64,
    #[serde(default)]
    stderr: f64,
    #[serde(default)]
    n_realizations: usize,
    #[serde(default)]
    n_pulses: Option<u64>,
    #[serde(default)]
    tau_s: Option<f64>,
}

impl DecayCurve {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.total_time_s).collect()
    }

    pub fn signals(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.signal).collect()
    }

    /// Noiseless curve from `(t, y)` pairs.
    pub fn from_samples(times: &[f64], signals: &[f64]) -> Self {
        DecayCurve {
            points: times
                .iter()
                .zip(signals)
                .map(|(&t, &y)| DecayPoint {
                    total_time_s: t,
                    signal: y,
                    stderr: 0.0,
                    n_realizations: 0,
                    n_pulses: None,
                    tau_s: None,
                })
                .collect(),
        }
    }

    /// Fill in missing `tau_s`/`n_pulses` with a fixed spacing, deriving `N`
    /// from `total_time / tau`.
    pub fn with_fixed_tau(mut self, tau: f64) -> Self {
        for p in &mut self.points {
            p.tau_s.get_or_insert(tau);
            p.n_pulses
                .get_or_insert((p.total_time_s / tau).round() as u64);
        }
        self
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record([
            "total_time_s",
            "signal",
            "stderr",
            "n_realizations",
            "n_pulses",
            "tau_s",
        ])?;
        for p in &self.points {
            wr.write_record([
                fmt_f64(p.total_time_s),
                fmt_f64(p.signal),
                fmt_f64(p.stderr),
                p.n_realizations.to_string(),
                p.n_pulses.map(|n| n.to_string()).unwrap_or_default(),
                p.tau_s.map(fmt_f64).unwrap_or_default(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R, source: &str) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let mut points = Vec::new();
        for rec in rd.deserialize::<Row>() {
            let row = rec.map_err(|e| {
                let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
                Error::Parse {
                    path: source.to_string(),
                    line,
                    msg: e.to_string(),
                }
            })?;
            points.push(DecayPoint {
                total_time_s: row.total_time_s,
                signal: row.signal,
                stderr: row.stderr,
                n_realizations: row.n_realizations,
                n_pulses: row.n_pulses,
                tau_s: row.tau_s,
            });
        }
        Ok(DecayCurve { points })
    }

    pub fn read_path(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_csv(f, &path.display().to_string())
    }
}

/// Shortest decimal representation that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}
