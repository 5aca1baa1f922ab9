//! Rotating-frame two-level dynamics.
//!
//! The Hamiltonian is `H = (δ/2)σz + (Ω̃/2)(cos φ σx + sin φ σy)` with
//! `Ω̃ = Ω(1 + ε)f`. It is held constant over each time step and the step
//! propagators are multiplied in time order. Every step exponential is
//! evaluated in closed form from the Pauli decomposition.
//!
//! Free segments only carry the `σz` term, so all their steps commute and the
//! product collapses to `diag(e^{-iΦ/2}, e^{iΦ/2})` with `Φ = Σ δ_i Δt_i`.
//! That accumulation is the default "fast path"; the step-by-step matrix
//! product is kept behind [`StepConfig::free_fast_path`] for validation.

use crate::error::{check_finite, invalid, Error, Result};
use crate::linalg::{Mat2, C64};
use crate::noise::{NoiseParams, NoiseStream, NoiseTrajectory, OuProcess, Channel};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Resonant drive with peak Rabi frequency `Ω` (rad/s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveParams {
    rabi_peak: f64,
    pi_duration: f64,
    half_pi_duration: f64,
}

impl DriveParams {
    pub fn new(rabi_peak: f64) -> Result<Self> {
        check_finite(rabi_peak, "rabi_peak")?;
        if rabi_peak <= 0.0 {
            return Err(invalid("rabi_peak", "must be > 0"));
        }
        Ok(DriveParams {
            rabi_peak,
            pi_duration: PI / rabi_peak,
            half_pi_duration: 0.5 * PI / rabi_peak,
        })
    }

    /// Drive specified as an ordinary frequency `Ω/2π` in Hz.
    pub fn from_rabi_hz(hz: f64) -> Result<Self> {
        Self::new(2.0 * PI * hz)
    }

    pub fn rabi_peak(&self) -> f64 {
        self.rabi_peak
    }

    pub fn pi_duration(&self) -> f64 {
        self.pi_duration
    }

    pub fn half_pi_duration(&self) -> f64 {
        self.half_pi_duration
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentKind {
    Pulse,
    Free,
}

/// A stretch of constant drive envelope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub duration: f64,
    pub drive_on: bool,
    pub phase: f64,
    pub kind: SegmentKind,
}

impl Segment {
    pub fn pulse(duration: f64, phase: f64) -> Self {
        Segment {
            duration,
            drive_on: true,
            phase,
            kind: SegmentKind::Pulse,
        }
    }

    pub fn free(duration: f64) -> Self {
        Segment {
            duration,
            drive_on: false,
            phase: 0.0,
            kind: SegmentKind::Free,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_finite(self.duration, "duration")?;
        check_finite(self.phase, "phase")?;
        if self.duration <= 0.0 {
            return Err(invalid("duration", "segment duration must be > 0"));
        }
        if self.kind == SegmentKind::Free && self.drive_on {
            return Err(invalid("drive_on", "free segments cannot be driven"));
        }
        Ok(())
    }
}

/// Compiled, time-ordered list of segments.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PulseProgram {
    pub segments: Vec<Segment>,
}

impl PulseProgram {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        let p = PulseProgram { segments };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.segments.iter().try_for_each(Segment::validate)
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    pub fn pulse_count(&self) -> usize {
        self.segments
            .iter()
            .filter(|s| s.kind == SegmentKind::Pulse)
            .count()
    }
}

/// Time discretization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepConfig {
    #[serde(default = "StepConfig::default_dt_pulse")]
    pub dt_pulse: f64,
    #[serde(default = "StepConfig::default_dt_free")]
    pub dt_free: f64,
    #[serde(default = "StepConfig::default_fast_path")]
    pub free_fast_path: bool,
}

impl StepConfig {
    fn default_dt_pulse() -> f64 {
        5e-11
    }

    fn default_dt_free() -> f64 {
        2.5e-8
    }

    fn default_fast_path() -> bool {
        true
    }

    pub fn validate(&self) -> Result<()> {
        check_finite(self.dt_pulse, "dt_pulse")?;
        check_finite(self.dt_free, "dt_free")?;
        if self.dt_pulse <= 0.0 {
            return Err(invalid("dt_pulse", "must be > 0"));
        }
        if self.dt_free <= 0.0 {
            return Err(invalid("dt_free", "must be > 0"));
        }
        Ok(())
    }

    /// Number of equal steps and their length for one segment. The step is
    /// the largest one not exceeding the configured size that tiles the
    /// segment exactly.
    pub fn subdivide(&self, seg: &Segment) -> (usize, f64) {
        let target = match seg.kind {
            SegmentKind::Pulse => self.dt_pulse,
            SegmentKind::Free => self.dt_free,
        };
        let n = ((seg.duration / target) - 1e-9).ceil().max(1.0) as usize;
        (n, seg.duration / n as f64)
    }

    /// Start instants of every step of `program`.
    pub fn step_grid(&self, program: &PulseProgram) -> Vec<f64> {
        let mut grid = Vec::new();
        let mut t0 = 0.0;
        for seg in &program.segments {
            let (n, h) = self.subdivide(seg);
            grid.extend((0..n).map(|i| t0 + i as f64 * h));
            t0 += seg.duration;
        }
        grid
    }
}

impl Default for StepConfig {
    fn default() -> Self {
        StepConfig {
            dt_pulse: Self::default_dt_pulse(),
            dt_free: Self::default_dt_free(),
            free_fast_path: true,
        }
    }
}

/// 2×2 density matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinState {
    pub rho: Mat2,
}

impl SpinState {
    /// `(I + xσx + yσy + zσz)/2`.
    pub fn from_bloch(x: f64, y: f64, z: f64) -> Self {
        SpinState {
            rho: Mat2::from_pauli(0.5, 0.5 * x, 0.5 * y, 0.5 * z),
        }
    }

    pub fn ground() -> Self {
        Self::from_bloch(0.0, 0.0, 1.0)
    }

    pub fn excited() -> Self {
        Self::from_bloch(0.0, 0.0, -1.0)
    }

    pub fn maximally_mixed() -> Self {
        Self::from_bloch(0.0, 0.0, 0.0)
    }

    pub fn bloch(&self) -> (f64, f64, f64) {
        let (_, x, y, z) = self.rho.pauli_coefficients();
        (2.0 * x, 2.0 * y, 2.0 * z)
    }

    pub fn trace(&self) -> f64 {
        self.rho.trace().re
    }

    /// `Tr ρ²`.
    pub fn purity(&self) -> f64 {
        (self.rho * self.rho).trace().re
    }

    /// Population of `|1⟩`, the readout ("dark") state.
    pub fn dark_population(&self) -> f64 {
        self.rho.0[1][1].re
    }

    pub fn check(&self, tol: f64) -> Result<()> {
        let tr = self.rho.trace();
        if (tr.re - 1.0).abs() > tol || tr.im.abs() > tol {
            return Err(invalid("rho", format!("trace {tr} differs from 1")));
        }
        if self.rho.hermiticity_error() > tol {
            return Err(invalid("rho", "not Hermitian"));
        }
        let (lo, hi) = self.rho.hermitian_eigenvalues();
        if lo < -1e-9 || hi > 1.0 + 1e-9 {
            return Err(invalid("rho", format!("eigenvalues ({lo}, {hi}) out of range")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Propagator {
    pub u: Mat2,
}

impl Propagator {
    pub fn identity() -> Self {
        Propagator {
            u: Mat2::identity(),
        }
    }

    pub fn unitarity_error(&self) -> f64 {
        self.u.unitarity_error()
    }

    /// `self` followed by `later`.
    pub fn then(&self, later: &Propagator) -> Propagator {
        Propagator {
            u: later.u * self.u,
        }
    }
}

/// `(δ/2)σz + (Ω̃/2)(cos φ σx + sin φ σy)`.
pub fn step_hamiltonian(delta: f64, rabi_eff: f64, phase: f64) -> Mat2 {
    let (s, c) = phase.sin_cos();
    Mat2::from_pauli(0.0, 0.5 * rabi_eff * c, 0.5 * rabi_eff * s, 0.5 * delta)
}

/// `exp(−iH dt)` for a Hermitian `H`.
pub fn step_propagator(h: &Mat2, dt: f64) -> Propagator {
    let (c0, cx, cy, cz) = h.pauli_coefficients();
    let mut u = Mat2::su2_exp(cx, cy, cz, dt);
    if c0 != 0.0 {
        u = u.scale(C64::from_polar(1.0, -c0 * dt));
    }
    Propagator { u }
}

/// `ρ → UρU†`.
pub fn apply(u: &Propagator, rho: &SpinState) -> SpinState {
    SpinState {
        rho: rho.rho.conjugate(&u.u),
    }
}

/// Per-step noise values consumed by the propagation loop.
///
/// Each call returns the value held during the step and then moves the source
/// forward by `dt`.
pub trait NoiseSource {
    /// `(δ, ε)` for one pulse step.
    fn pulse_step(&mut self, dt: f64) -> (f64, f64);
    /// `δ` for one free step.
    fn free_step(&mut self, dt: f64) -> f64;
    /// Called once after a free segment of total length `duration`.
    fn end_free_segment(&mut self, duration: f64);
}

/// Static errors, as used for gate-fidelity maps.
#[derive(Debug, Clone, Copy)]
pub struct StaticNoise {
    pub delta: f64,
    pub eps: f64,
}

impl NoiseSource for StaticNoise {
    fn pulse_step(&mut self, _dt: f64) -> (f64, f64) {
        (self.delta, self.eps)
    }

    fn free_step(&mut self, _dt: f64) -> f64 {
        self.delta
    }

    fn end_free_segment(&mut self, _duration: f64) {}
}

/// Live OU processes for both channels of one realization. The amplitude
/// channel only matters under drive, so it jumps across each free segment in
/// one exact transition.
#[derive(Debug, Clone)]
pub struct OuNoise {
    pub detuning: OuProcess,
    pub amplitude: OuProcess,
    master_seed: u64,
    realization: u64,
}

impl OuNoise {
    pub fn new(params: &NoiseParams, master_seed: u64, realization: u64) -> Self {
        Self::with_fork(params, master_seed, realization, 0)
    }

    /// Fresh realization drawn from the streams tagged `fork`.
    pub fn with_fork(params: &NoiseParams, master_seed: u64, realization: u64, fork: u64) -> Self {
        OuNoise {
            detuning: OuProcess::start(
                params.detuning,
                NoiseStream::forked(master_seed, realization, Channel::Detuning, fork),
            ),
            amplitude: OuProcess::start(
                params.amplitude,
                NoiseStream::forked(master_seed, realization, Channel::Amplitude, fork),
            ),
            master_seed,
            realization,
        }
    }
}

/// Noise sources that can branch: the branch starts from the current values
/// and continues independently of the parent.
pub trait ForkNoise: NoiseSource + Sized {
    fn fork(&self, fork: u64) -> Self;
}

impl ForkNoise for OuNoise {
    fn fork(&self, fork: u64) -> Self {
        let stream = |ch| NoiseStream::forked(self.master_seed, self.realization, ch, fork);
        OuNoise {
            detuning: self.detuning.fork(stream(Channel::Detuning)),
            amplitude: self.amplitude.fork(stream(Channel::Amplitude)),
            master_seed: self.master_seed,
            realization: self.realization,
        }
    }
}

impl ForkNoise for StaticNoise {
    fn fork(&self, _fork: u64) -> Self {
        *self
    }
}

impl NoiseSource for OuNoise {
    #[inline]
    fn pulse_step(&mut self, dt: f64) -> (f64, f64) {
        let v = (self.detuning.value(), self.amplitude.value());
        self.detuning.advance(dt);
        self.amplitude.advance(dt);
        v
    }

    #[inline]
    fn free_step(&mut self, dt: f64) -> f64 {
        let v = self.detuning.value();
        self.detuning.advance(dt);
        v
    }

    fn end_free_segment(&mut self, duration: f64) {
        self.amplitude.advance(duration);
    }
}

/// Pre-sampled trajectories on the step grid.
struct TrajectoryNoise<'a> {
    delta: &'a [f64],
    eps: &'a [f64],
    cursor: usize,
}

impl NoiseSource for TrajectoryNoise<'_> {
    fn pulse_step(&mut self, _dt: f64) -> (f64, f64) {
        let v = (self.delta[self.cursor], self.eps[self.cursor]);
        self.cursor += 1;
        v
    }

    fn free_step(&mut self, _dt: f64) -> f64 {
        let v = self.delta[self.cursor];
        self.cursor += 1;
        v
    }

    fn end_free_segment(&mut self, _duration: f64) {}
}

/// Incremental time-ordered propagation. Holds the accumulated propagator so
/// callers can inspect intermediate results between segments.
#[derive(Debug, Clone)]
pub struct Evolver {
    drive: DriveParams,
    steps: StepConfig,
    u: Mat2,
}

impl Evolver {
    pub fn new(drive: DriveParams, steps: StepConfig) -> Self {
        Evolver {
            drive,
            steps,
            u: Mat2::identity(),
        }
    }

    pub fn propagator(&self) -> Propagator {
        Propagator { u: self.u }
    }

    pub fn segment<N: NoiseSource>(&mut self, seg: &Segment, noise: &mut N) {
        self.u = segment_propagator(seg, &self.drive, &self.steps, noise) * self.u;
    }

    pub fn run<N: NoiseSource>(&mut self, segments: &[Segment], noise: &mut N) {
        for seg in segments {
            self.segment(seg, noise);
        }
    }
}

/// Propagator of a single segment under `noise`.
pub fn segment_propagator<N: NoiseSource>(
    seg: &Segment,
    drive: &DriveParams,
    steps: &StepConfig,
    noise: &mut N,
) -> Mat2 {
    let (n, h) = steps.subdivide(seg);
    if seg.drive_on {
        let (s, c) = seg.phase.sin_cos();
        let half_rabi = 0.5 * drive.rabi_peak;
        let mut u = Mat2::identity();
        for _ in 0..n {
            let (delta, eps) = noise.pulse_step(h);
            let amp = half_rabi * (1.0 + eps);
            u = Mat2::su2_exp(amp * c, amp * s, 0.5 * delta, h) * u;
        }
        u
    } else if steps.free_fast_path {
        let mut phi = 0.0;
        for _ in 0..n {
            phi += noise.free_step(h);
        }
        noise.end_free_segment(seg.duration);
        Mat2::z_phase(phi * h)
    } else {
        let mut u = Mat2::identity();
        for _ in 0..n {
            let delta = noise.free_step(h);
            u = Mat2::su2_exp(0.0, 0.0, 0.5 * delta, h) * u;
        }
        noise.end_free_segment(seg.duration);
        u
    }
}

/// Propagate `program` under explicit noise trajectories sampled at the start
/// of every step (see [`StepConfig::step_grid`]).
pub fn evolve(
    program: &PulseProgram,
    drive: &DriveParams,
    delta_traj: &NoiseTrajectory,
    eps_traj: &NoiseTrajectory,
    steps: &StepConfig,
) -> Result<Propagator> {
    program.validate()?;
    steps.validate()?;
    let grid = steps.step_grid(program);
    for (name, traj) in [("delta", delta_traj), ("eps", eps_traj)] {
        if traj.values.len() != grid.len() || traj.times.len() != grid.len() {
            return Err(Error::TrajectoryMismatch(format!(
                "{name} trajectory has {} samples, program needs {}",
                traj.values.len(),
                grid.len()
            )));
        }
        let scale = program.total_duration().max(f64::MIN_POSITIVE);
        if let Some(i) = grid
            .iter()
            .zip(&traj.times)
            .position(|(a, b)| (a - b).abs() > 1e-12 * scale)
        {
            return Err(Error::TrajectoryMismatch(format!(
                "{name} sample {i} at t={:e} s, step starts at {:e} s",
                traj.times[i], grid[i]
            )));
        }
    }
    let mut noise = TrajectoryNoise {
        delta: &delta_traj.values,
        eps: &eps_traj.values,
        cursor: 0,
    };
    let mut ev = Evolver::new(*drive, *steps);
    ev.run(&program.segments, &mut noise);
    Ok(ev.propagator())
}

/// Propagate with a caller-supplied noise source.
pub fn evolve_with<N: NoiseSource>(
    program: &PulseProgram,
    drive: &DriveParams,
    steps: &StepConfig,
    noise: &mut N,
) -> Propagator {
    let mut ev = Evolver::new(*drive, *steps);
    ev.run(&program.segments, noise);
    ev.propagator()
}

/// Exact propagator for time-independent errors: one exponential per segment.
pub fn evolve_static(program: &PulseProgram, drive: &DriveParams, delta: f64, eps: f64) -> Propagator {
    let mut u = Mat2::identity();
    for seg in &program.segments {
        let amp = if seg.drive_on {
            0.5 * drive.rabi_peak * (1.0 + eps)
        } else {
            0.0
        };
        let (s, c) = seg.phase.sin_cos();
        u = Mat2::su2_exp(amp * c, amp * s, 0.5 * delta, seg.duration) * u;
    }
    Propagator { u }
}

/// Propagator with ideal, instantaneous pulses: every pulse segment becomes a
/// perfect rotation by `Ω·duration` and consumes no time; free segments keep
/// their durations.
pub fn evolve_ideal(program: &PulseProgram, drive: &DriveParams, delta: f64) -> Propagator {
    let mut u = Mat2::identity();
    for seg in &program.segments {
        let step = if seg.drive_on {
            let (s, c) = seg.phase.sin_cos();
            let half = 0.5 * drive.rabi_peak;
            Mat2::su2_exp(half * c, half * s, 0.0, seg.duration)
        } else {
            Mat2::z_phase(delta * seg.duration)
        };
        u = step * u;
    }
    Propagator { u }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{generate_trajectory, OUParams};

    const I: C64 = C64::new(0.0, 1.0);

    fn drive() -> DriveParams {
        DriveParams::from_rabi_hz(6.486e6).unwrap()
    }

    #[test]
    fn hamiltonian_examples() {
        assert_eq!(step_hamiltonian(0.0, 0.0, 0.0).max_abs(), 0.0);
        let omega = drive().rabi_peak();
        let h = step_hamiltonian(0.0, omega, 0.0);
        assert!(h.max_abs_diff(&Mat2::sigma_x().scale_re(omega / 2.0)) < 1e-9);
        let delta = 2.0 * PI * 1e6;
        let h = step_hamiltonian(delta, 0.0, 0.3);
        assert!(h.max_abs_diff(&Mat2::sigma_z().scale_re(PI * 1e6)) < 1e-9);
        let h = step_hamiltonian(1.3, 2.1, 0.7);
        assert!(h.hermiticity_error() < 1e-15);
        assert!(h.trace().norm() < 1e-15);
    }

    #[test]
    fn step_propagator_examples() {
        let omega = drive().rabi_peak();
        let h = Mat2::sigma_x().scale_re(omega / 2.0);
        let u = step_propagator(&h, PI / omega);
        assert!(u.u.max_abs_diff(&Mat2::sigma_x().scale(-I)) < 1e-12);

        let u = step_propagator(&Mat2::zero(), 17.0);
        assert_eq!(u.u, Mat2::identity());

        let (delta, dt) = (5.0e5, 3.0e-6);
        let u = step_propagator(&Mat2::sigma_z().scale_re(delta / 2.0), dt);
        let expected = Mat2::new(
            C64::from_polar(1.0, -delta * dt / 2.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::from_polar(1.0, delta * dt / 2.0),
        );
        assert!(u.u.max_abs_diff(&expected) < 1e-12);
    }

    #[test]
    fn apply_examples() {
        let rho = SpinState::from_bloch(0.3, -0.2, 0.5);
        assert_eq!(apply(&Propagator::identity(), &rho), rho);

        let flip = Propagator {
            u: Mat2::sigma_x().scale(-I),
        };
        let out = apply(&flip, &SpinState::ground());
        assert!(out.rho.max_abs_diff(&SpinState::excited().rho) < 1e-15);

        let d = drive();
        let program = PulseProgram::new(vec![Segment::pulse(d.half_pi_duration(), PI / 2.0)]).unwrap();
        let u = evolve_static(&program, &d, 0.0, 0.0);
        let out = apply(&u, &SpinState::ground());
        assert!(out.rho.max_abs_diff(&SpinState::from_bloch(1.0, 0.0, 0.0).rho) < 1e-12);
        out.check(1e-12).unwrap();
    }

    #[test]
    fn pi_pulse_without_noise() {
        let d = drive();
        let steps = StepConfig::default();
        let program = PulseProgram::new(vec![Segment::pulse(d.pi_duration(), 0.0)]).unwrap();
        let u = evolve_with(&program, &d, &steps, &mut StaticNoise { delta: 0.0, eps: 0.0 });
        assert!(u.u.max_abs_diff(&Mat2::sigma_x().scale(-I)) < 1e-9);
    }

    #[test]
    fn free_evolution_with_constant_detuning() {
        let d = drive();
        let (delta, t) = (2.0 * PI * 80e3, 3.3e-6);
        let program = PulseProgram::new(vec![Segment::free(t)]).unwrap();
        for fast in [true, false] {
            let steps = StepConfig {
                free_fast_path: fast,
                ..StepConfig::default()
            };
            let u = evolve_with(&program, &d, &steps, &mut StaticNoise { delta, eps: 0.0 });
            assert!(u.u.max_abs_diff(&Mat2::z_phase(delta * t)) < 1e-10, "fast={fast}");
        }
    }

    #[test]
    fn fast_path_matches_step_product_on_ou_noise() {
        let d = drive();
        let program = PulseProgram::new(vec![Segment::free(40e-6)]).unwrap();
        let noise = NoiseParams {
            detuning: OUParams::new(2.0 * PI * 146e3, 20e-6).unwrap(),
            amplitude: OUParams::silent(),
        };
        let fast = StepConfig::default();
        let slow = StepConfig {
            free_fast_path: false,
            ..fast
        };
        let a = evolve_with(&program, &d, &fast, &mut OuNoise::new(&noise, 5, 0));
        let b = evolve_with(&program, &d, &slow, &mut OuNoise::new(&noise, 5, 0));
        assert!(a.u.max_abs_diff(&b.u) < 1e-10);
    }

    #[test]
    fn trajectory_evolve_matches_streaming() {
        let d = drive();
        let program = PulseProgram::new(vec![
            Segment::pulse(d.half_pi_duration(), 0.5),
            Segment::free(2e-6),
            Segment::pulse(d.pi_duration(), 1.0),
        ])
        .unwrap();
        let steps = StepConfig::default();
        let grid = steps.step_grid(&program);
        let delta_p = OUParams::new(2.0 * PI * 146e3, 1e-6).unwrap();
        let eps_p = OUParams::new(0.005, 500e-6).unwrap();
        let mut s1 = NoiseStream::new(1, 0, Channel::Detuning);
        let mut s2 = NoiseStream::new(1, 0, Channel::Amplitude);
        let dt = generate_trajectory(&delta_p, &grid, &mut s1).unwrap();
        let et = generate_trajectory(&eps_p, &grid, &mut s2).unwrap();
        let u = evolve(&program, &d, &dt, &et, &steps).unwrap();
        assert!(u.unitarity_error() < 1e-12);

        // replaying the same samples through a trait object gives the same product
        let mut src = TrajectoryNoise {
            delta: &dt.values,
            eps: &et.values,
            cursor: 0,
        };
        let v = evolve_with(&program, &d, &steps, &mut src);
        assert_eq!(u, v);

        let short = NoiseTrajectory::constant(&grid[1..], 0.0);
        assert!(matches!(
            evolve(&program, &d, &short, &et, &steps),
            Err(Error::TrajectoryMismatch(_))
        ));
    }

    #[test]
    fn rabi_zero_crossing_at_pi_over_omega() {
        // P(|0⟩) under resonant drive is cos²(Ωt/2); its zero sits at t = π/Ω
        let d = drive();
        let steps = StepConfig::default();
        let n = (1.5 * d.pi_duration() / steps.dt_pulse) as usize;
        let rho0 = SpinState::ground();
        let mut u = Mat2::identity();
        let step = Mat2::su2_exp(0.5 * d.rabi_peak(), 0.0, 0.0, steps.dt_pulse);
        let mut best = (f64::INFINITY, 0.0);
        for k in 1..=n {
            u = step * u;
            let p_bright = 1.0 - apply(&Propagator { u }, &rho0).dark_population();
            if p_bright < best.0 {
                best = (p_bright, k as f64 * steps.dt_pulse);
            }
        }
        assert!((best.1 - d.pi_duration()).abs() <= steps.dt_pulse);
    }

    #[test]
    fn subdivision_tiles_segments() {
        let steps = StepConfig::default();
        let seg = Segment::free(100e-9);
        assert_eq!(steps.subdivide(&seg).0, 4);
        let d = drive();
        let (n, h) = steps.subdivide(&Segment::pulse(d.pi_duration(), 0.0));
        assert_eq!(n, 1542);
        assert!(h <= steps.dt_pulse);
        assert!((n as f64 * h - d.pi_duration()).abs() < 1e-20);
    }

    #[test]
    fn drive_invariants() {
        let d = drive();
        assert!((d.pi_duration() * d.rabi_peak() - PI).abs() < 1e-15);
        assert!((d.pi_duration() - 77.09e-9).abs() < 0.01e-9);
        assert!(DriveParams::new(0.0).is_err());
        assert!(Segment::free(0.0).validate().is_err());
        let mut bad = Segment::free(1.0);
        bad.drive_on = true;
        assert!(bad.validate().is_err());
    }
}
