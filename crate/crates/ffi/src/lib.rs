//! C ABI for the `ddsim` simulator.
//!
//! Every fallible call returns a [`DdsimStatus`]; on failure a description is
//! available from [`ddsim_last_error`] on the same thread. Model handles are
//! opaque and must be released with [`ddsim_model_free`].

use ddsim::analytic::gamma_ou;
use ddsim::curve::{DecayCurve, DecayPoint};
use ddsim::dynamics::{evolve_static, DriveParams, SpinState};
use ddsim::ensemble::{run_order_sweep, EnsembleConfig};
use ddsim::estimation::{estimate_tau_c, fit_decay, DecayModel, FitOptions};
use ddsim::gatemap::{gate_fidelity, gate_program, GateKind};
use ddsim::noise::{NoiseParams, OUParams};
use ddsim::sequences::SequenceSpec;
use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::f64::consts::TAU;
use std::panic::{catch_unwind, AssertUnwindSafe};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DdsimStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ComputationFailed = 3,
    Panic = 4,
}

/// Sequence families accepted by [`ddsim_order_sweep`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DdsimSequence {
    Cpmg = 0,
    Xy8 = 1,
}

/// Gates accepted by [`ddsim_gate_fidelity`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DdsimGate {
    HalfPi = 0,
    Pi = 1,
    Cpmg8 = 2,
    Xy8 = 3,
}

/// Noise, drive and ensemble settings.
pub struct DdsimModel {
    noise: NoiseParams,
    drive: DriveParams,
    ensemble: EnsembleConfig,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).unwrap_or_default());
}

fn guard(f: impl FnOnce() -> Result<(), (DdsimStatus, String)>) -> DdsimStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            DdsimStatus::Ok
        }
        Ok(Err((code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("internal panic");
            DdsimStatus::Panic
        }
    }
}

fn invalid(e: impl std::fmt::Display) -> (DdsimStatus, String) {
    (DdsimStatus::InvalidArgument, e.to_string())
}

fn failed(e: impl std::fmt::Display) -> (DdsimStatus, String) {
    (DdsimStatus::ComputationFailed, e.to_string())
}

fn null(name: &str) -> (DdsimStatus, String) {
    (DdsimStatus::NullPointer, format!("{name} is null"))
}

/// # Safety
/// `ptr` must be null or valid for `len` reads.
unsafe fn slice<'a, T>(ptr: *const T, len: usize, name: &str) -> Result<&'a [T], (DdsimStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

/// # Safety
/// `ptr` must be null or valid for `len` writes.
unsafe fn slice_mut<'a, T>(ptr: *mut T, len: usize, name: &str) -> Result<&'a mut [T], (DdsimStatus, String)> {
    if len == 0 {
        return Ok(&mut []);
    }
    if ptr.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts_mut(ptr, len))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ddsim_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread; empty after a success.
/// Valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn ddsim_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Create a model. Frequencies are in Hz (the 2π factor is applied here),
/// times in seconds. Returns null on invalid input.
#[no_mangle]
pub extern "C" fn ddsim_model_new(
    sigma_delta_hz: f64,
    tau_c_s: f64,
    sigma_eps: f64,
    tau_omega_s: f64,
    rabi_hz: f64,
) -> *mut DdsimModel {
    let mut out: *mut DdsimModel = std::ptr::null_mut();
    guard(|| {
        let noise = NoiseParams {
            detuning: OUParams::new(TAU * sigma_delta_hz, tau_c_s).map_err(invalid)?,
            amplitude: OUParams::new(sigma_eps, tau_omega_s).map_err(invalid)?,
        };
        let drive = DriveParams::from_rabi_hz(rabi_hz).map_err(invalid)?;
        out = Box::into_raw(Box::new(DdsimModel {
            noise,
            drive,
            ensemble: EnsembleConfig::default(),
        }));
        Ok(())
    });
    out
}

/// Release a model. Null is ignored.
///
/// # Safety
/// `model` must be null or a pointer from [`ddsim_model_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ddsim_model_free(model: *mut DdsimModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Ensemble size, master seed and worker threads (0 = default pool).
///
/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ddsim_model_set_ensemble(
    model: *mut DdsimModel,
    n_realizations: usize,
    seed: u64,
    threads: usize,
) -> DdsimStatus {
    guard(|| {
        let m = model.as_mut().ok_or_else(|| null("model"))?;
        let cfg = EnsembleConfig {
            n_realizations,
            master_seed: seed,
            threads: (threads > 0).then_some(threads),
            ..m.ensemble
        };
        cfg.validate().map_err(invalid)?;
        m.ensemble = cfg;
        Ok(())
    })
}

/// Monte-Carlo differential signal of an order sweep at spacing `tau_s`;
/// `sequence` is a [`DdsimSequence`] value.
/// `prep_phase_rad` sets the phase of the preparation pulse relative to the
/// refocusing frame (0 for the X initial state, π/2 for Y). Writes `len`
/// values to `out_signal` and `out_stderr`, in ascending order of
/// `n_values` with duplicates removed; `*out_len` receives the count.
///
/// # Safety
/// Pointers must be valid for `len` elements; `out_len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ddsim_order_sweep(
    model: *const DdsimModel,
    sequence: i32,
    tau_s: f64,
    prep_phase_rad: f64,
    n_values: *const usize,
    len: usize,
    out_signal: *mut f64,
    out_stderr: *mut f64,
    out_len: *mut usize,
) -> DdsimStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let ns = slice(n_values, len, "n_values")?;
        let sig = slice_mut(out_signal, len, "out_signal")?;
        let err = slice_mut(out_stderr, len, "out_stderr")?;
        let out_len = out_len.as_mut().ok_or_else(|| null("out_len"))?;
        if ns.is_empty() {
            return Err(invalid("n_values is empty"));
        }
        let base = match sequence {
            0 => SequenceSpec::cpmg(1, tau_s),
            1 => SequenceSpec::xy8(8, tau_s),
            other => return Err(invalid(format!("unknown sequence {other}"))),
        }
        .with_prep_phase(prep_phase_rad);
        let res = run_order_sweep(&base, ns, &SpinState::ground(), &m.noise, &m.drive, &m.ensemble)
            .map_err(invalid)?;
        for (i, r) in res.iter().enumerate() {
            let p = r.to_point();
            sig[i] = p.signal;
            err[i] = p.stderr;
        }
        *out_len = res.len();
        Ok(())
    })
}

/// Closed-form OU decay exponent for `n` ideal π pulses spaced `tau_s`.
/// `sigma_delta` is in rad/s.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ddsim_gamma_ou(
    n: u64,
    tau_s: f64,
    sigma_delta: f64,
    tau_c_s: f64,
    out: *mut f64,
) -> DdsimStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = gamma_ou(n, tau_s, sigma_delta, tau_c_s).map_err(invalid)?;
        Ok(())
    })
}

/// Fidelity of a [`DdsimGate`] under static relative amplitude error `eps` and
/// detuning `delta_rad_s`; sequence gates use spacing `tau_s`.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ddsim_gate_fidelity(
    model: *const DdsimModel,
    gate: i32,
    eps: f64,
    delta_rad_s: f64,
    tau_s: f64,
    out: *mut f64,
) -> DdsimStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let kind = match gate {
            0 => GateKind::HalfPi,
            1 => GateKind::Pi,
            2 => GateKind::Cpmg8,
            3 => GateKind::Xy8,
            other => return Err(invalid(format!("unknown gate {other}"))),
        };
        if !(eps.is_finite() && delta_rad_s.is_finite()) {
            return Err(invalid("eps and delta must be finite"));
        }
        let program = gate_program(kind, &m.drive, tau_s).map_err(invalid)?;
        let ideal = evolve_static(&program, &m.drive, 0.0, 0.0);
        *out = gate_fidelity(&evolve_static(&program, &m.drive, delta_rad_s, eps), &ideal);
        Ok(())
    })
}

/// Simple-exponential fit `A·exp(−t/T2)`.
///
/// # Safety
/// `t` and `y` must hold `len` values; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn ddsim_fit_simple(
    t: *const f64,
    y: *const f64,
    len: usize,
    out_t2: *mut f64,
    out_t2_stderr: *mut f64,
    out_r_squared: *mut f64,
) -> DdsimStatus {
    guard(|| {
        let ts = slice(t, len, "t")?;
        let ys = slice(y, len, "y")?;
        let (a, b, c) = (
            out_t2.as_mut().ok_or_else(|| null("out_t2"))?,
            out_t2_stderr.as_mut().ok_or_else(|| null("out_t2_stderr"))?,
            out_r_squared.as_mut().ok_or_else(|| null("out_r_squared"))?,
        );
        let curve = DecayCurve::from_samples(ts, ys);
        let r = fit_decay(&curve, DecayModel::Simple, &FitOptions::default()).map_err(failed)?;
        *a = r.params.t2;
        *b = r.param_stderr.t2;
        *c = r.r_squared;
        Ok(())
    })
}

/// Correlation-time estimate from `(n_i, tau_i, signal_i)` with `sigma_delta`
/// (rad/s) held fixed, best of `restarts` random starts.
///
/// # Safety
/// Input arrays must hold `len` values; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn ddsim_estimate_tau_c(
    n_pulses: *const u64,
    tau_s: *const f64,
    signal: *const f64,
    len: usize,
    sigma_delta: f64,
    restarts: usize,
    seed: u64,
    out_tau_c: *mut f64,
    out_r_squared: *mut f64,
) -> DdsimStatus {
    guard(|| {
        let ns = slice(n_pulses, len, "n_pulses")?;
        let taus = slice(tau_s, len, "tau_s")?;
        let ys = slice(signal, len, "signal")?;
        let out_tc = out_tau_c.as_mut().ok_or_else(|| null("out_tau_c"))?;
        let out_r2 = out_r_squared.as_mut().ok_or_else(|| null("out_r_squared"))?;
        let curve = DecayCurve {
            points: (0..len)
                .map(|i| DecayPoint {
                    total_time_s: ns[i] as f64 * taus[i],
                    signal: ys[i],
                    stderr: 0.0,
                    n_realizations: 0,
                    n_pulses: Some(ns[i]),
                    tau_s: Some(taus[i]),
                })
                .collect(),
        };
        let (fit, _) = estimate_tau_c(&curve, sigma_delta, restarts, seed).map_err(failed)?;
        *out_tc = fit.tau_c;
        *out_r2 = fit.r_squared;
        Ok(())
    })
}
