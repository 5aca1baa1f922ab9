//! Ramsey, Hahn echo, CPMG-N and XY8 pulse programs.
//!
//! Every dynamical-decoupling program has the form
//! `π/2(φ₀) · [τ/2 − π(φ_k) − τ/2]^N · π/2(φ_r)`. The spacing `τ` is measured
//! between π-pulse centers, so each block's free paddings are shortened by half
//! a π pulse and the total duration is exactly `N·τ + 2·t_{π/2}`.
//!
//! π-pulse phases are referenced to a `frame_phase` that defaults to the
//! initial π/2 phase. Shifting only `initial_phase` (see
//! [`SequenceSpec::with_prep_phase`]) prepares a state perpendicular to the
//! CPMG refocusing axis while keeping the refocusing pulses fixed.

use crate::dynamics::{DriveParams, PulseProgram, Segment};
use crate::error::{check_finite, invalid, Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI, TAU};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SequenceKind {
    Ramsey,
    Hahn,
    Cpmg,
    Xy8,
}

impl SequenceKind {
    pub fn name(&self) -> &'static str {
        match self {
            SequenceKind::Ramsey => "ramsey",
            SequenceKind::Hahn => "hahn",
            SequenceKind::Cpmg => "cpmg",
            SequenceKind::Xy8 => "xy8",
        }
    }
}

/// XY8 block in units of the frame: `X, Y, X, Y, Y, X, Y, X`.
const XY8_PATTERN: [bool; 8] = [false, true, false, true, true, false, true, false];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SequenceSpec {
    pub kind: SequenceKind,
    /// Number of π pulses (`8·Ñ` for XY8; ignored for Ramsey).
    pub n_pulses: usize,
    /// π-center spacing for DD kinds; the free-evolution time for Ramsey.
    pub tau: f64,
    /// Phase of the first π/2 pulse (rad).
    pub initial_phase: f64,
    /// Reference for the π-pulse phases (rad).
    pub frame_phase: f64,
    /// Phase of the final π/2 pulse. `None` picks the phase that maps the
    /// ideal final state onto `|1⟩`.
    pub readout_phase: Option<f64>,
}

impl SequenceSpec {
    fn base(kind: SequenceKind, n_pulses: usize, tau: f64) -> Self {
        SequenceSpec {
            kind,
            n_pulses,
            tau,
            initial_phase: 0.0,
            frame_phase: 0.0,
            readout_phase: None,
        }
    }

    pub fn ramsey(wait: f64) -> Self {
        Self::base(SequenceKind::Ramsey, 0, wait)
    }

    /// Hahn echo: a single `τ/2 − π − τ/2` block.
    pub fn hahn(tau: f64) -> Self {
        Self::base(SequenceKind::Hahn, 1, tau)
    }

    pub fn cpmg(n_pulses: usize, tau: f64) -> Self {
        Self::base(SequenceKind::Cpmg, n_pulses, tau)
    }

    pub fn xy8(n_pulses: usize, tau: f64) -> Self {
        Self::base(SequenceKind::Xy8, n_pulses, tau)
    }

    /// Rotate the whole sequence: initial, frame (and an explicit readout)
    /// phase all move together.
    pub fn with_initial_phase(mut self, phase: f64) -> Self {
        let shift = phase - self.initial_phase;
        self.initial_phase = phase;
        self.frame_phase += shift;
        self.readout_phase = self.readout_phase.map(|r| r + shift);
        self
    }

    /// Change only the preparation pulse, leaving the π pulses in place.
    pub fn with_prep_phase(mut self, phase: f64) -> Self {
        self.initial_phase = phase;
        self
    }

    pub fn with_readout_phase(mut self, phase: f64) -> Self {
        self.readout_phase = Some(phase);
        self
    }

    pub fn with_n_pulses(mut self, n: usize) -> Self {
        self.n_pulses = n;
        self
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    /// `N·τ` for DD kinds, the wait time for Ramsey.
    pub fn total_time(&self) -> f64 {
        match self.kind {
            SequenceKind::Ramsey => self.tau,
            _ => self.n_pulses as f64 * self.tau,
        }
    }

    pub fn effective_n_pulses(&self) -> usize {
        match self.kind {
            SequenceKind::Ramsey => 0,
            _ => self.n_pulses,
        }
    }

    pub fn validate(&self, drive: &DriveParams) -> Result<()> {
        check_finite(self.tau, "tau")?;
        check_finite(self.initial_phase, "initial_phase")?;
        check_finite(self.frame_phase, "frame_phase")?;
        if let Some(r) = self.readout_phase {
            check_finite(r, "readout_phase")?;
        }
        match self.kind {
            SequenceKind::Ramsey => {
                if self.tau < 0.0 {
                    return Err(invalid("tau", "Ramsey wait must be >= 0"));
                }
            }
            SequenceKind::Hahn if self.n_pulses != 1 => {
                return Err(invalid("n_pulses", "Hahn echo has exactly one pi pulse"));
            }
            SequenceKind::Xy8 if !self.n_pulses.is_multiple_of(8) => {
                return Err(invalid(
                    "n_pulses",
                    format!("XY8 needs a multiple of 8 pulses, got {}", self.n_pulses),
                ));
            }
            _ => {}
        }
        if self.kind != SequenceKind::Ramsey && self.n_pulses > 0 && self.tau <= drive.pi_duration() {
            return Err(Error::TauTooShort {
                tau: self.tau,
                pi: drive.pi_duration(),
            });
        }
        Ok(())
    }

    /// Phase of the k-th π pulse.
    pub fn pi_phase(&self, k: usize) -> f64 {
        match self.kind {
            SequenceKind::Ramsey => self.frame_phase,
            SequenceKind::Hahn | SequenceKind::Cpmg => self.frame_phase + FRAC_PI_2,
            SequenceKind::Xy8 => {
                if XY8_PATTERN[k % 8] {
                    self.frame_phase + PI
                } else {
                    self.frame_phase + FRAC_PI_2
                }
            }
        }
    }

    pub fn pi_phases(&self) -> Vec<f64> {
        (0..self.effective_n_pulses()).map(|k| self.pi_phase(k)).collect()
    }

    /// Readout phase that sends the ideal final state to `|1⟩` after the
    /// first `n` π pulses.
    ///
    /// A π/2 pulse about the in-plane axis at angle `φ` takes `|0⟩` to the
    /// equator at angle `φ − 90°`, a π pulse about `φ_k` reflects an equator
    /// angle `θ` to `2φ_k − θ`, and a π/2 pulse at `θ + 90°` takes the state
    /// at `θ` to `|1⟩`.
    pub fn auto_readout_phase(&self, n: usize) -> f64 {
        let mut theta = self.initial_phase - FRAC_PI_2;
        for k in 0..n {
            theta = 2.0 * self.pi_phase(k) - theta;
        }
        (theta + FRAC_PI_2).rem_euclid(TAU)
    }

    pub fn resolved_readout_phase(&self) -> f64 {
        self.readout_phase
            .unwrap_or_else(|| self.auto_readout_phase(self.effective_n_pulses()))
    }

    /// Same sequence read out along the opposite axis.
    pub fn flipped_readout(&self) -> Self {
        let r = self.resolved_readout_phase();
        SequenceSpec {
            readout_phase: Some((r + PI).rem_euclid(TAU)),
            ..*self
        }
    }
}

/// One `τ/2 − π − τ/2` block with explicit paddings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Block {
    pub pre: Segment,
    pub pi: Segment,
    pub post: Segment,
}

/// Program split into its parts, for callers that need to stop after any
/// number of blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockLayout {
    pub prep: Segment,
    pub blocks: Vec<Block>,
}

impl BlockLayout {
    pub fn new(spec: &SequenceSpec, drive: &DriveParams) -> Result<Self> {
        spec.validate(drive)?;
        let prep = Segment::pulse(drive.half_pi_duration(), spec.initial_phase);
        let pad = 0.5 * (spec.tau - drive.pi_duration());
        let blocks = (0..spec.effective_n_pulses())
            .map(|k| Block {
                pre: Segment::free(pad),
                pi: Segment::pulse(drive.pi_duration(), spec.pi_phase(k)),
                post: Segment::free(pad),
            })
            .collect();
        Ok(BlockLayout { prep, blocks })
    }
}

/// Compile a spec into a segment list. Adjacent free paddings are merged.
pub fn build_program(spec: &SequenceSpec, drive: &DriveParams) -> Result<PulseProgram> {
    spec.validate(drive)?;
    let half = drive.half_pi_duration();
    let mut segments = vec![Segment::pulse(half, spec.initial_phase)];
    let push_free = |segments: &mut Vec<Segment>, d: f64| {
        if d <= 0.0 {
            return;
        }
        match segments.last_mut() {
            Some(last) if !last.drive_on => last.duration += d,
            _ => segments.push(Segment::free(d)),
        }
    };
    if spec.kind == SequenceKind::Ramsey {
        push_free(&mut segments, spec.tau);
    } else {
        let layout = BlockLayout::new(spec, drive)?;
        for b in &layout.blocks {
            push_free(&mut segments, b.pre.duration);
            segments.push(b.pi);
            push_free(&mut segments, b.post.duration);
        }
    }
    segments.push(Segment::pulse(half, spec.resolved_readout_phase()));
    PulseProgram::new(segments)
}

/// Programs for the two readout phases of a differential measurement.
pub fn differential_pair(
    spec: &SequenceSpec,
    drive: &DriveParams,
) -> Result<(PulseProgram, PulseProgram)> {
    let plus = SequenceSpec {
        readout_phase: Some(spec.resolved_readout_phase()),
        ..*spec
    };
    Ok((build_program(&plus, drive)?, build_program(&plus.flipped_readout(), drive)?))
}
