//! Monte-Carlo ensemble over noise realizations.
//!
//! Realization `k` draws its noise from streams keyed by `(master_seed, k)`
//! and the per-realization density matrices are summed in index order, so the
//! result is bit-identical for any thread count.
//!
//! Sweeps over the number of pulses at fixed spacing share one evolution per
//! realization: the program for `N` pulses is a prefix of the program for any
//! larger `N`, so the readout pulse is applied at every requested `N` on a
//! branch of the noise that continues from the current values.

use crate::curve::{DecayCurve, DecayPoint};
use crate::dynamics::{
    apply, evolve_with, DriveParams, Evolver, ForkNoise, NoiseSource, OuNoise, PulseProgram,
    Segment, SpinState, StaticNoise, StepConfig,
};
use crate::error::{invalid, Error, Result};
use crate::linalg::Mat2;
use crate::noise::NoiseParams;
use crate::sequences::{BlockLayout, SequenceKind, SequenceSpec};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub n_realizations: usize,
    pub master_seed: u64,
    pub steps: StepConfig,
    /// Worker threads; `None` uses the global pool.
    #[serde(default)]
    pub threads: Option<usize>,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            n_realizations: 2500,
            master_seed: 0,
            steps: StepConfig::default(),
            threads: None,
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_realizations == 0 {
            return Err(invalid("n_realizations", "must be >= 1"));
        }
        if self.threads == Some(0) {
            return Err(invalid("threads", "must be >= 1"));
        }
        self.steps.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub rho_avg: SpinState,
    /// Final state without noise.
    pub rho_ideal: SpinState,
    /// `Tr(ρ_ideal ρ̄)`.
    pub state_fidelity: f64,
    /// Mean dark-state population.
    pub signal: f64,
    pub standard_error: f64,
    /// Per-realization dark-state populations, in realization order.
    pub samples: Vec<f64>,
}

impl EnsembleResult {
    fn from_states(states: &[Mat2], rho_ideal: SpinState) -> Result<Self> {
        let n = states.len();
        let sum = states.iter().fold(Mat2::zero(), |acc, r| acc + *r);
        let rho_avg = SpinState {
            rho: sum.scale_re(1.0 / n as f64),
        };
        let samples: Vec<f64> = states.iter().map(|r| r.0[1][1].re).collect();
        let (signal, standard_error) = mean_and_stderr(&samples);
        Ok(EnsembleResult {
            state_fidelity: state_fidelity(&rho_avg, &rho_ideal)?,
            rho_avg,
            rho_ideal,
            signal,
            standard_error,
            samples,
        })
    }

    pub fn ideal_signal(&self) -> f64 {
        self.rho_ideal.dark_population()
    }

    pub fn n_realizations(&self) -> usize {
        self.samples.len()
    }
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// `Tr(ρ_ideal ρ̄)` for a pure reference state.
pub fn state_fidelity(rho_avg: &SpinState, rho_ideal: &SpinState) -> Result<f64> {
    let purity = rho_ideal.purity();
    if (purity - 1.0).abs() > 1e-9 {
        return Err(Error::NotPure(purity));
    }
    let f = (rho_ideal.rho * rho_avg.rho).trace().re;
    Ok(f.clamp(0.0, 1.0))
}

/// Dark-population difference of a differential pair, normalized by the
/// noiseless contrast `|P_ideal(+) − P_ideal(−)|`. Swapping the arguments
/// flips the sign.
pub fn differential_signal(plus: &EnsembleResult, minus: &EnsembleResult) -> f64 {
    differential_point(plus, minus).0
}

/// Differential signal and its standard error. When both results hold the
/// same realizations the error comes from the per-realization differences.
pub fn differential_point(plus: &EnsembleResult, minus: &EnsembleResult) -> (f64, f64) {
    let contrast = (plus.ideal_signal() - minus.ideal_signal()).abs();
    let contrast = if contrast > 0.0 { contrast } else { 1.0 };
    let signal = ((plus.signal - minus.signal) / contrast).clamp(-1.0, 1.0);
    let stderr = if plus.samples.len() == minus.samples.len() {
        let d: Vec<f64> = plus
            .samples
            .iter()
            .zip(&minus.samples)
            .map(|(a, b)| a - b)
            .collect();
        mean_and_stderr(&d).1 / contrast
    } else {
        plus.standard_error.hypot(minus.standard_error) / contrast
    };
    (signal, stderr)
}

pub(crate) fn in_pool<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| invalid("threads", e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

/// Run `program` from `initial` over `cfg.n_realizations` noise realizations.
pub fn run_ensemble(
    program: &PulseProgram,
    initial: &SpinState,
    noise: &NoiseParams,
    drive: &DriveParams,
    cfg: &EnsembleConfig,
) -> Result<EnsembleResult> {
    program.validate()?;
    noise.validate()?;
    cfg.validate()?;
    let steps = cfg.steps;
    let ideal_u = evolve_with(program, drive, &steps, &mut StaticNoise { delta: 0.0, eps: 0.0 });
    let rho_ideal = apply(&ideal_u, initial);
    let states: Vec<Mat2> = in_pool(cfg.threads, || {
        (0..cfg.n_realizations)
            .into_par_iter()
            .map(|k| {
                let mut src = OuNoise::new(noise, cfg.master_seed, k as u64);
                let u = evolve_with(program, drive, &steps, &mut src);
                apply(&u, initial).rho
            })
            .collect()
    })?;
    EnsembleResult::from_states(&states, rho_ideal)
}

/// Ensemble results for both readouts of one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferentialResult {
    pub n_pulses: usize,
    pub tau: f64,
    pub total_time: f64,
    pub plus: EnsembleResult,
    pub minus: EnsembleResult,
}

impl DifferentialResult {
    pub fn signal(&self) -> f64 {
        differential_signal(&self.plus, &self.minus)
    }

    pub fn to_point(&self) -> DecayPoint {
        let (signal, stderr) = differential_point(&self.plus, &self.minus);
        DecayPoint {
            total_time_s: self.total_time,
            signal,
            stderr,
            n_realizations: self.plus.n_realizations(),
            n_pulses: Some(self.n_pulses as u64),
            tau_s: Some(self.tau),
        }
    }
}

/// Evolution plan: fixed prefix, repeated blocks, readouts after selected
/// block counts.
struct Plan {
    prefix: Vec<Segment>,
    blocks: Vec<[Segment; 3]>,
    /// Sorted, unique block counts at which to read out.
    checkpoints: Vec<usize>,
    readout: Vec<(f64, f64)>,
    half_pi: f64,
}

impl Plan {
    fn new(spec: &SequenceSpec, drive: &DriveParams, checkpoints: &[usize]) -> Result<Self> {
        let max_n = *checkpoints.iter().max().ok_or_else(|| invalid("sweep", "empty"))?;
        let spec = spec.with_n_pulses(if spec.kind == SequenceKind::Ramsey { 0 } else { max_n });
        for &c in checkpoints {
            spec.with_n_pulses(c).validate(drive)?;
        }
        let layout = BlockLayout::new(&spec, drive)?;
        let mut prefix = vec![layout.prep];
        if spec.kind == SequenceKind::Ramsey && spec.tau > 0.0 {
            prefix.push(Segment::free(spec.tau));
        }
        let readout = checkpoints
            .iter()
            .map(|&c| {
                let r = spec
                    .readout_phase
                    .unwrap_or_else(|| spec.auto_readout_phase(c));
                (r, r + PI)
            })
            .collect();
        Ok(Plan {
            prefix,
            blocks: layout.blocks.iter().map(|b| [b.pre, b.pi, b.post]).collect(),
            checkpoints: checkpoints.to_vec(),
            readout,
            half_pi: drive.half_pi_duration(),
        })
    }

    /// Final `(ρ+, ρ−)` at every checkpoint for one realization.
    fn realize<N: ForkNoise + Clone>(
        &self,
        drive: &DriveParams,
        steps: &StepConfig,
        initial: &SpinState,
        mut noise: N,
    ) -> Vec<[Mat2; 2]> {
        let mut ev = Evolver::new(*drive, *steps);
        ev.run(&self.prefix, &mut noise);
        let mut out = Vec::with_capacity(self.checkpoints.len());
        let mut done = 0;
        for (i, &c) in self.checkpoints.iter().enumerate() {
            while done < c {
                ev.run(&self.blocks[done], &mut noise);
                done += 1;
            }
            let branch = noise.fork(1 + c as u64);
            let (rp, rm) = self.readout[i];
            let read = |phase: f64, mut n: N| {
                let mut e = ev.clone();
                e.segment(&Segment::pulse(self.half_pi, phase), &mut n);
                apply(&e.propagator(), initial).rho
            };
            out.push([read(rp, branch.clone()), read(rm, branch)]);
        }
        out
    }
}

fn normalize_checkpoints(values: &[usize]) -> Vec<usize> {
    let mut v = values.to_vec();
    v.sort_unstable();
    v.dedup();
    v
}

/// Differential ensemble at each requested pulse count, sharing one evolution
/// per realization across counts. Results come back in ascending `N`.
pub fn run_order_sweep(
    base: &SequenceSpec,
    n_values: &[usize],
    initial: &SpinState,
    noise: &NoiseParams,
    drive: &DriveParams,
    cfg: &EnsembleConfig,
) -> Result<Vec<DifferentialResult>> {
    run_plan(base, &normalize_checkpoints(n_values), 0, initial, noise, drive, cfg)
}

/// Differential ensemble for a single sequence.
pub fn run_differential(
    spec: &SequenceSpec,
    initial: &SpinState,
    noise: &NoiseParams,
    drive: &DriveParams,
    cfg: &EnsembleConfig,
) -> Result<DifferentialResult> {
    let mut v = run_plan(spec, &[spec.effective_n_pulses()], 0, initial, noise, drive, cfg)?;
    Ok(v.remove(0))
}

fn run_plan(
    spec: &SequenceSpec,
    checkpoints: &[usize],
    stream_tag: u64,
    initial: &SpinState,
    noise: &NoiseParams,
    drive: &DriveParams,
    cfg: &EnsembleConfig,
) -> Result<Vec<DifferentialResult>> {
    noise.validate()?;
    cfg.validate()?;
    let plan = Plan::new(spec, drive, checkpoints)?;
    let steps = cfg.steps;
    let ideal = plan.realize(drive, &steps, initial, StaticNoise { delta: 0.0, eps: 0.0 });
    // stream tags occupy the upper half of the fork id; checkpoints the lower
    let tag = stream_tag << 32;
    let per_realization: Vec<Vec<[Mat2; 2]>> = in_pool(cfg.threads, || {
        (0..cfg.n_realizations)
            .into_par_iter()
            .map(|k| {
                let src = OuNoise::with_fork(noise, cfg.master_seed, k as u64, tag);
                plan.realize(drive, &steps, initial, TaggedNoise { inner: src, tag })
            })
            .collect()
    })?;
    plan.checkpoints
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let plus: Vec<Mat2> = per_realization.iter().map(|r| r[i][0]).collect();
            let minus: Vec<Mat2> = per_realization.iter().map(|r| r[i][1]).collect();
            let tau = spec.tau;
            let total_time = spec.with_n_pulses(c).total_time();
            Ok(DifferentialResult {
                n_pulses: c,
                tau,
                total_time,
                plus: EnsembleResult::from_states(&plus, SpinState { rho: ideal[i][0] })?,
                minus: EnsembleResult::from_states(&minus, SpinState { rho: ideal[i][1] })?,
            })
        })
        .collect()
}

/// Offsets branch ids by the sweep-point tag so branches of different sweep
/// points never share streams.
#[derive(Clone)]
struct TaggedNoise {
    inner: OuNoise,
    tag: u64,
}

impl NoiseSource for TaggedNoise {
    #[inline]
    fn pulse_step(&mut self, dt: f64) -> (f64, f64) {
        self.inner.pulse_step(dt)
    }

    #[inline]
    fn free_step(&mut self, dt: f64) -> f64 {
        self.inner.free_step(dt)
    }

    fn end_free_segment(&mut self, duration: f64) {
        self.inner.end_free_segment(duration)
    }
}

impl ForkNoise for TaggedNoise {
    fn fork(&self, fork: u64) -> Self {
        TaggedNoise {
            inner: self.inner.fork(self.tag | fork),
            tag: self.tag,
        }
    }
}

/// A family of sequences swept over one parameter.
#[derive(Debug, Clone, PartialEq)]
pub enum Sweep {
    /// Fixed spacing, varying pulse count.
    Order { base: SequenceSpec, n_values: Vec<usize> },
    /// Fixed pulse count, varying spacing (or wait time for Ramsey).
    Tau { base: SequenceSpec, tau_values: Vec<f64> },
}

/// Differential decay curve for a sweep: one `(N·τ, signal, stderr)` sample
/// per sweep point.
pub fn decay_curve(
    sweep: &Sweep,
    initial: &SpinState,
    noise: &NoiseParams,
    drive: &DriveParams,
    cfg: &EnsembleConfig,
) -> Result<DecayCurve> {
    let results = sweep_results(sweep, initial, noise, drive, cfg)?;
    Ok(DecayCurve {
        points: results.iter().map(DifferentialResult::to_point).collect(),
    })
}

pub fn sweep_results(
    sweep: &Sweep,
    initial: &SpinState,
    noise: &NoiseParams,
    drive: &DriveParams,
    cfg: &EnsembleConfig,
) -> Result<Vec<DifferentialResult>> {
    match sweep {
        Sweep::Order { base, n_values } => {
            if n_values.is_empty() {
                return Err(invalid("n_values", "sweep is empty"));
            }
            run_order_sweep(base, n_values, initial, noise, drive, cfg)
        }
        Sweep::Tau { base, tau_values } => {
            if tau_values.is_empty() {
                return Err(invalid("tau_values", "sweep is empty"));
            }
            tau_values
                .iter()
                .enumerate()
                .map(|(i, &tau)| {
                    let spec = base.with_tau(tau);
                    let n = [spec.effective_n_pulses()];
                    let mut v =
                        run_plan(&spec, &n, 1 + i as u64, initial, noise, drive, cfg)?;
                    Ok(v.remove(0))
                })
                .collect()
        }
    }
}
