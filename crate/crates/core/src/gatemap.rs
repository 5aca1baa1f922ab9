//! Gate fidelity under static amplitude and detuning errors.

use crate::dynamics::{evolve_static, DriveParams, Propagator, PulseProgram, Segment};
use crate::error::{invalid, Result};
use crate::sequences::{BlockLayout, SequenceSpec};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateKind {
    #[serde(rename = "half_pi")]
    HalfPi,
    Pi,
    Cpmg8,
    Xy8,
}

impl GateKind {
    pub const ALL: [GateKind; 4] = [GateKind::HalfPi, GateKind::Pi, GateKind::Cpmg8, GateKind::Xy8];

    pub fn name(&self) -> &'static str {
        match self {
            GateKind::HalfPi => "half_pi",
            GateKind::Pi => "pi",
            GateKind::Cpmg8 => "cpmg8",
            GateKind::Xy8 => "xy8",
        }
    }

    pub fn parse(s: &str) -> Option<GateKind> {
        GateKind::ALL.into_iter().find(|g| g.name() == s)
    }
}

/// Default pulse spacing of the sequence gates.
pub const GATE_TAU: f64 = 100e-6;
/// Fidelity threshold overlaid on maps.
pub const FIDELITY_THRESHOLD: f64 = 0.9999;

/// Segments of a gate. Single pulses are about x; the sequence gates are their
/// eight `τ/2 − π − τ/2` blocks without the preparation and readout pulses.
pub fn gate_program(gate: GateKind, drive: &DriveParams, tau: f64) -> Result<PulseProgram> {
    let segments = match gate {
        GateKind::HalfPi => vec![Segment::pulse(drive.half_pi_duration(), 0.0)],
        GateKind::Pi => vec![Segment::pulse(drive.pi_duration(), 0.0)],
        GateKind::Cpmg8 | GateKind::Xy8 => {
            let spec = if gate == GateKind::Cpmg8 {
                SequenceSpec::cpmg(8, tau)
            } else {
                SequenceSpec::xy8(8, tau)
            };
            let layout = BlockLayout::new(&spec, drive)?;
            layout
                .blocks
                .iter()
                .flat_map(|b| [b.pre, b.pi, b.post])
                .collect()
        }
    };
    PulseProgram::new(segments)
}

/// `½|Tr(U_ideal† U)|`, clamped to `[0, 1]`.
pub fn gate_fidelity(actual: &Propagator, ideal: &Propagator) -> f64 {
    (0.5 * (ideal.u.adjoint() * actual.u).trace().norm()).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorGrid {
    pub eps_values: Vec<f64>,
    pub delta_values: Vec<f64>,
    /// `fidelities[i][j]` belongs to `(eps_values[i], delta_values[j])`.
    pub fidelities: Vec<Vec<f64>>,
}

impl ErrorGrid {
    /// Minimum over grid points with `|ε| ≤ eps_max` and `|δ| ≤ delta_max`;
    /// `None` when the box holds no grid point.
    pub fn box_min(&self, eps_max: f64, delta_max: f64) -> Option<f64> {
        let mut out: Option<f64> = None;
        for (i, e) in self.eps_values.iter().enumerate() {
            if e.abs() > eps_max * (1.0 + 1e-12) {
                continue;
            }
            for (j, d) in self.delta_values.iter().enumerate() {
                if d.abs() > delta_max * (1.0 + 1e-12) {
                    continue;
                }
                let f = self.fidelities[i][j];
                out = Some(out.map_or(f, |m: f64| m.min(f)));
            }
        }
        out
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["eps", "delta_rad_s", "fidelity"])?;
        for (i, e) in self.eps_values.iter().enumerate() {
            for (j, d) in self.delta_values.iter().enumerate() {
                wr.write_record([
                    crate::curve::fmt_f64(*e),
                    crate::curve::fmt_f64(*d),
                    crate::curve::fmt_f64(self.fidelities[i][j]),
                ])?;
            }
        }
        wr.flush()?;
        Ok(())
    }
}

/// `n` evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![0.5 * (lo + hi)],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Default axes: 121 points over `ε ∈ [−0.03, 0.03]` and
/// `δ ∈ [−2π·600 kHz, 2π·600 kHz]`.
pub fn default_axes() -> (Vec<f64>, Vec<f64>) {
    let dmax = 2.0 * PI * 600e3;
    (linspace(-0.03, 0.03, 121), linspace(-dmax, dmax, 121))
}

/// Fidelity of `gate` at every `(ε, δ)` of the grid, with the error-free
/// finite-pulse propagator as target.
pub fn fidelity_map(
    gate: GateKind,
    eps_values: &[f64],
    delta_values: &[f64],
    drive: &DriveParams,
    tau: f64,
) -> Result<ErrorGrid> {
    if eps_values.is_empty() || delta_values.is_empty() {
        return Err(invalid("axes", "must be nonempty"));
    }
    if eps_values.iter().chain(delta_values).any(|v| !v.is_finite()) {
        return Err(invalid("axes", "must be finite"));
    }
    let program = gate_program(gate, drive, tau)?;
    let ideal = evolve_static(&program, drive, 0.0, 0.0);
    let fidelities = eps_values
        .par_iter()
        .map(|&e| {
            delta_values
                .iter()
                .map(|&d| gate_fidelity(&evolve_static(&program, drive, d, e), &ideal))
                .collect()
        })
        .collect();
    Ok(ErrorGrid {
        eps_values: eps_values.to_vec(),
        delta_values: delta_values.to_vec(),
        fidelities,
    })
}

/// Overlay metadata written next to a map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapMetadata {
    pub gate: String,
    pub tau_s: f64,
    pub threshold: f64,
    pub box_eps: f64,
    pub box_delta_rad_s: f64,
    pub box_min_fidelity: Option<f64>,
    pub n_eps: usize,
    pub n_delta: usize,
}

impl MapMetadata {
    /// Box of `±3σ` around the origin.
    pub fn new(gate: GateKind, grid: &ErrorGrid, tau: f64, sigma_eps: f64, sigma_delta: f64) -> Self {
        let (be, bd) = (3.0 * sigma_eps, 3.0 * sigma_delta);
        MapMetadata {
            gate: gate.name().to_string(),
            tau_s: tau,
            threshold: FIDELITY_THRESHOLD,
            box_eps: be,
            box_delta_rad_s: bd,
            box_min_fidelity: grid.box_min(be, bd),
            n_eps: grid.eps_values.len(),
            n_delta: grid.delta_values.len(),
        }
    }
}

/// Rotation angle `π/2` about x, for the ideal half-π target.
pub fn half_pi_target() -> Propagator {
    Propagator {
        u: crate::linalg::Mat2::su2_exp(0.5, 0.0, 0.0, FRAC_PI_2),
    }
}
