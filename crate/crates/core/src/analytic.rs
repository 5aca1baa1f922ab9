//! Closed-form coherence decay under OU dephasing with ideal π pulses, and the
//! model functions fitted to decay curves.

use crate::error::{check_finite, invalid, Result};
use serde::{Deserialize, Serialize};

/// `amplitude·exp(−(t/t2)^β) + offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayModelParams {
    pub t2: f64,
    pub beta: f64,
    pub amplitude: f64,
    pub offset: f64,
}

impl DecayModelParams {
    pub fn simple(t2: f64) -> Self {
        DecayModelParams {
            t2,
            beta: 1.0,
            amplitude: 1.0,
            offset: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t2 > 0.0) {
            return Err(invalid("t2", "must be > 0"));
        }
        if !(self.beta > 0.0) {
            return Err(invalid("beta", "must be > 0"));
        }
        Ok(())
    }
}

pub fn stretched_exp(t: f64, p: &DecayModelParams) -> f64 {
    p.amplitude * (-(t / p.t2).powf(p.beta)).exp() + p.offset
}

/// `1 − sech(x)` for `x ≥ 0`, written as `2 sinh²(x/2)/cosh(x)` near zero.
fn one_minus_sech(x: f64) -> f64 {
    if x < 1.0 {
        let s = (0.5 * x).sinh();
        2.0 * s * s / x.cosh()
    } else {
        1.0 - 1.0 / x.cosh()
    }
}

/// `1 − tanh(x)/x` for `x ≥ 0`, by Taylor series below 1e-2.
fn one_minus_tanhc(x: f64) -> f64 {
    if x < 1e-2 {
        let x2 = x * x;
        // tanh(x)/x = 1 − x²/3 + 2x⁴/15 − 17x⁶/315 + 62x⁸/2835 − …
        x2 * (1.0 / 3.0 - x2 * (2.0 / 15.0 - x2 * (17.0 / 315.0 - x2 * (62.0 / 2835.0))))
    } else {
        1.0 - x.tanh() / x
    }
}

fn check_positive(v: f64, name: &'static str) -> Result<()> {
    check_finite(v, name)?;
    if v <= 0.0 {
        return Err(invalid(name, format!("must be > 0, got {v}")));
    }
    Ok(())
}

/// Decay exponent `γ(N, τ)` of the coherence `exp(−γ)` after `N` ideal π
/// pulses spaced by `τ` (total time `t = Nτ`) under OU dephasing with
/// standard deviation `sigma_delta` and correlation time `tau_c`:
///
/// `γ = σ²τc² [ −((−1)^{N+1} e^{−t/τc} + 1)(1 − sech(τ/2τc))² + t(1/τc − 2 tanh(τ/2τc)/τ) ]`
pub fn gamma_ou(n_pulses: u64, tau: f64, sigma_delta: f64, tau_c: f64) -> Result<f64> {
    if n_pulses == 0 {
        return Err(invalid("n_pulses", "must be >= 1; use ramsey_gamma for N = 0"));
    }
    check_positive(tau, "tau")?;
    check_positive(sigma_delta, "sigma_delta")?;
    check_positive(tau_c, "tau_c")?;
    Ok(gamma_ou_unchecked(n_pulses as f64, n_pulses.is_multiple_of(2), tau, sigma_delta, tau_c))
}

/// `γ` for a real-valued pulse count with a chosen parity of the boundary term.
pub(crate) fn gamma_ou_unchecked(n: f64, even: bool, tau: f64, sigma: f64, tau_c: f64) -> f64 {
    let t = n * tau;
    let x = 0.5 * tau / tau_c;
    // (−1)^{N+1} e^{−t/τc} + 1
    let boundary = if even {
        -(-t / tau_c).exp_m1()
    } else {
        1.0 + (-t / tau_c).exp()
    };
    let b = one_minus_sech(x);
    let bulk = t / tau_c * one_minus_tanhc(x);
    (sigma * sigma * tau_c * tau_c * (bulk - boundary * b * b)).max(0.0)
}

/// Long-spacing Hahn-echo limit `σ²τc·t` with `t = τ`.
pub fn hahn_limit(tau: f64, sigma_delta: f64, tau_c: f64) -> f64 {
    sigma_delta * sigma_delta * tau_c * tau
}

/// Free-induction (N = 0) decay exponent in the quasi-static limit,
/// `σ²t²/2`.
pub fn ramsey_gamma(t: f64, sigma_delta: f64) -> f64 {
    0.5 * sigma_delta * sigma_delta * t * t
}

/// Hahn-echo coherence time `T2 ≈ 2(3/D)^{1/3}` from the diffusion constant.
pub fn t2_from_diffusion(d: f64) -> Result<f64> {
    check_positive(d, "d")?;
    Ok(2.0 * (3.0 / d).cbrt())
}

/// Correlation time `τc ≈ 4/(T2*² D)`.
pub fn tau_c_from(t2_star: f64, d: f64) -> Result<f64> {
    check_positive(t2_star, "t2_star")?;
    check_positive(d, "d")?;
    Ok(4.0 / (t2_star * t2_star * d))
}

/// `D = 2σ²/τc`.
pub fn diffusion_constant(sigma_delta: f64, tau_c: f64) -> f64 {
    2.0 * sigma_delta * sigma_delta / tau_c
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    // f(lo) < 0 <= f(hi)
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

fn bracket(f: &impl Fn(f64) -> f64, start: f64) -> Option<(f64, f64)> {
    let mut hi = start;
    let mut lo = 0.0;
    for _ in 0..2000 {
        if f(hi) >= 0.0 {
            return Some((lo, hi));
        }
        lo = hi;
        hi *= 2.0;
    }
    None
}

/// Spacing `τ` at which a fixed-`N` sequence reaches `γ = 1`. Returns the
/// total time `Nτ`.
pub fn one_over_e_time_tau_sweep(n_pulses: u64, sigma_delta: f64, tau_c: f64) -> Result<f64> {
    gamma_ou(n_pulses.max(1), 1.0, sigma_delta, tau_c)?;
    let n = n_pulses as f64;
    let even = n_pulses.is_multiple_of(2);
    let f = |tau: f64| gamma_ou_unchecked(n, even, tau, sigma_delta, tau_c) - 1.0;
    let (lo, hi) = bracket(&f, 1e-9).ok_or_else(|| invalid("sigma_delta", "no 1/e crossing"))?;
    Ok(n * bisect(lo, hi, f))
}

/// Total time `Nτ` at which a fixed-`τ` order sweep reaches `γ = 1`, treating
/// `N` as continuous with the even-`N` boundary term.
pub fn one_over_e_time_order_sweep(tau: f64, sigma_delta: f64, tau_c: f64) -> Result<f64> {
    gamma_ou(1, tau, sigma_delta, tau_c)?;
    let f = |n: f64| gamma_ou_unchecked(n, true, tau, sigma_delta, tau_c) - 1.0;
    let (lo, hi) = bracket(&f, 1.0).ok_or_else(|| invalid("sigma_delta", "no 1/e crossing"))?;
    Ok(tau * bisect(lo, hi, f))
}
