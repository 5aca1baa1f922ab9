//! Least-squares fits of decay curves.
//!
//! Two families are supported:
//!
//! * phenomenological envelopes `A·exp(−(t/T2)^β) + c` (β fixed to 1 for the
//!   simple model), and
//! * the OU decay `A·exp(−γ(N, τ; σ_δ, τ_c)) + c` with `σ_δ` held fixed, used to
//!   estimate the correlation time `τ_c` from many randomly started fits.
//!
//! All fits minimize the unweighted residual sum of squares with the simplex
//! method. Positive scale parameters (`T2`, `β`, `τ_c`) are optimized in log
//! space. Standard errors come from the Gauss-Newton approximation
//! `s²(JᵀJ)⁻¹` of the residual surface at the optimum.

use crate::analytic::{gamma_ou_unchecked, stretched_exp, DecayModelParams};
use crate::curve::DecayCurve;
use crate::error::{invalid, Error, Result};
use crate::noise::{Channel, NoiseStream};
use crate::simplex::{minimize, SimplexOptions};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecayModel {
    /// `β = 1`.
    Simple,
    /// `β` free.
    Stretched,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Fit the additive offset `c`; otherwise it is pinned at zero.
    pub fit_offset: bool,
    /// Fit the amplitude `A`; otherwise it is pinned at one.
    pub fit_amplitude: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            fit_offset: false,
            fit_amplitude: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub params: DecayModelParams,
    /// Standard errors in the units of `params`; zero for pinned parameters.
    pub param_stderr: DecayModelParams,
    pub r_squared: f64,
    pub sse: f64,
    pub n_restarts: usize,
    pub converged: bool,
}

/// `1 − SS_res/SS_tot`.
pub fn r_squared(data: &[f64], model_values: &[f64]) -> Result<f64> {
    if data.len() != model_values.len() {
        return Err(invalid(
            "model_values",
            format!("length {} != data length {}", model_values.len(), data.len()),
        ));
    }
    if data.len() < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            got: data.len(),
        });
    }
    let mean = data.iter().sum::<f64>() / data.len() as f64;
    let ss_tot: f64 = data.iter().map(|y| (y - mean) * (y - mean)).sum();
    if ss_tot == 0.0 {
        return Err(Error::ConstantData);
    }
    let ss_res: f64 = data
        .iter()
        .zip(model_values)
        .map(|(y, m)| (y - m) * (y - m))
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}

fn sse<F: Fn(usize) -> f64>(ys: &[f64], model: F) -> f64 {
    ys.iter()
        .enumerate()
        .map(|(i, y)| {
            let r = y - model(i);
            r * r
        })
        .sum()
}

/// Gauss-Newton covariance diagonal `s²·diag((JᵀJ)⁻¹)` with a central-difference
/// Jacobian of `model(params, i)` in natural units.
fn gauss_newton_stderr<F: Fn(&[f64], usize) -> f64>(
    params: &[f64],
    n_points: usize,
    sse: f64,
    model: F,
) -> Vec<f64> {
    let p = params.len();
    if p == 0 {
        return vec![];
    }
    let dof = n_points.saturating_sub(p);
    if dof == 0 {
        return vec![f64::INFINITY; p];
    }
    let mut jac = DMatrix::<f64>::zeros(n_points, p);
    for j in 0..p {
        let h = 1e-6 * params[j].abs().max(1e-12);
        let mut up = params.to_vec();
        let mut dn = params.to_vec();
        up[j] += h;
        dn[j] -= h;
        for i in 0..n_points {
            jac[(i, j)] = (model(&up, i) - model(&dn, i)) / (2.0 * h);
        }
    }
    let jtj = jac.transpose() * &jac;
    let s2 = sse / dof as f64;
    match jtj.try_inverse() {
        Some(inv) => (0..p).map(|j| (s2 * inv[(j, j)]).max(0.0).sqrt()).collect(),
        None => vec![f64::INFINITY; p],
    }
}

/// Time at which the curve first drops below `1/e` of its first value, by
/// linear interpolation; the last time if it never does.
fn one_over_e_guess(ts: &[f64], ys: &[f64]) -> f64 {
    let y0 = ys[0].abs().max(f64::MIN_POSITIVE);
    let target = y0 / std::f64::consts::E;
    for i in 1..ys.len() {
        if ys[i] <= target {
            let (t0, t1, a, b) = (ts[i - 1], ts[i], ys[i - 1], ys[i]);
            let t = if a != b {
                t0 + (a - target) / (a - b) * (t1 - t0)
            } else {
                t1
            };
            return t.max(f64::MIN_POSITIVE);
        }
    }
    ts.iter().cloned().fold(0.0, f64::max).max(f64::MIN_POSITIVE)
}

/// Fit `A·exp(−(t/T2)^β) + c` to `curve`.
pub fn fit_decay(curve: &DecayCurve, model: DecayModel, opts: &FitOptions) -> Result<FitResult> {
    if curve.len() < 4 {
        return Err(Error::TooFewPoints {
            needed: 4,
            got: curve.len(),
        });
    }
    let ts = curve.times();
    let ys = curve.signals();
    if ts.iter().any(|t| !(t.is_finite() && *t >= 0.0)) || ys.iter().any(|y| !y.is_finite()) {
        return Err(invalid("curve", "times must be finite and >= 0, signals finite"));
    }
    if !ts.iter().any(|t| *t > 0.0) {
        return Err(invalid("curve", "needs positive times"));
    }

    // free-parameter vector: [ln T2, (ln β), (A), (c)]
    let stretched = model == DecayModel::Stretched;
    let unpack = |u: &[f64]| -> DecayModelParams {
        let mut k = 1;
        let beta = if stretched {
            k += 1;
            u[1].exp()
        } else {
            1.0
        };
        let amplitude = if opts.fit_amplitude {
            k += 1;
            u[k - 1]
        } else {
            1.0
        };
        let offset = if opts.fit_offset { u[k] } else { 0.0 };
        DecayModelParams {
            t2: u[0].exp(),
            beta,
            amplitude,
            offset,
        }
    };
    let objective = |u: &[f64]| {
        let p = unpack(u);
        sse(&ys, |i| stretched_exp(ts[i], &p))
    };

    let t2_guess = one_over_e_guess(&ts, &ys);
    let a_guess = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let betas: &[f64] = if stretched { &[1.0, 2.0, 0.6] } else { &[1.0] };
    let mut starts = Vec::new();
    for &scale in &[1.0, 0.5, 2.0] {
        for &b in betas {
            let mut u = vec![(t2_guess * scale).ln()];
            if stretched {
                u.push(b.ln());
            }
            if opts.fit_amplitude {
                u.push(a_guess);
            }
            if opts.fit_offset {
                u.push(0.0);
            }
            starts.push(u);
        }
    }
    let simplex = SimplexOptions::default();
    let results: Vec<_> = starts
        .iter()
        .map(|u0| minimize(objective, u0, &simplex))
        .collect();
    let best = results
        .iter()
        .min_by(|a, b| a.f.total_cmp(&b.f))
        .ok_or(Error::AllRestartsFailed(0))?;
    if !best.f.is_finite() {
        return Err(Error::AllRestartsFailed(results.len()));
    }
    let params = unpack(&best.x);
    let model_vals: Vec<f64> = ts.iter().map(|&t| stretched_exp(t, &params)).collect();
    let r2 = r_squared(&ys, &model_vals)?;

    // natural-unit free parameters for the error estimate
    let mut natural = vec![params.t2];
    if stretched {
        natural.push(params.beta);
    }
    if opts.fit_amplitude {
        natural.push(params.amplitude);
    }
    if opts.fit_offset {
        natural.push(params.offset);
    }
    let eval_natural = |v: &[f64], i: usize| {
        let mut k = 1;
        let beta = if stretched {
            k += 1;
            v[1]
        } else {
            1.0
        };
        let amplitude = if opts.fit_amplitude {
            k += 1;
            v[k - 1]
        } else {
            1.0
        };
        let offset = if opts.fit_offset { v[k] } else { 0.0 };
        stretched_exp(
            ts[i],
            &DecayModelParams {
                t2: v[0],
                beta,
                amplitude,
                offset,
            },
        )
    };
    let se = gauss_newton_stderr(&natural, ts.len(), best.f, eval_natural);
    let mut k = 1;
    let mut take = |on: bool| {
        if on {
            k += 1;
            se[k - 1]
        } else {
            0.0
        }
    };
    let param_stderr = DecayModelParams {
        t2: se[0],
        beta: take(stretched),
        amplitude: take(opts.fit_amplitude),
        offset: take(opts.fit_offset),
    };
    Ok(FitResult {
        params,
        param_stderr,
        r_squared: r2,
        sse: best.f,
        n_restarts: starts.len(),
        converged: best.converged,
    })
}

/// Best correlation-time fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TauCFit {
    pub tau_c: f64,
    pub tau_c_stderr: f64,
    pub amplitude: f64,
    pub amplitude_stderr: f64,
    pub offset: f64,
    pub offset_stderr: f64,
    pub r_squared: f64,
    pub sse: f64,
    pub n_restarts: usize,
    pub converged: bool,
}

/// Every restart's estimate, for histograms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RestartEnsemble {
    pub estimates: Vec<f64>,
    pub r2_values: Vec<f64>,
    pub best_index: usize,
}

/// One bin of a log-spaced histogram.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
}

impl RestartEnsemble {
    /// Histogram of the finite, positive estimates over `bins` log-spaced bins.
    pub fn histogram(&self, bins: usize) -> Vec<HistogramBin> {
        let vals: Vec<f64> = self
            .estimates
            .iter()
            .cloned()
            .filter(|v| v.is_finite() && *v > 0.0)
            .collect();
        if vals.is_empty() || bins == 0 {
            return vec![];
        }
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min).ln();
        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max).ln();
        let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
        let mut counts = vec![0usize; bins];
        for v in &vals {
            let i = (((v.ln() - lo) / width) as usize).min(bins - 1);
            counts[i] += 1;
        }
        counts
            .iter()
            .enumerate()
            .map(|(i, &count)| HistogramBin {
                lower: (lo + i as f64 * width).exp(),
                upper: (lo + (i + 1) as f64 * width).exp(),
                count,
            })
            .collect()
    }
}

/// Lower and upper bounds of the log-uniform initial-guess range for `τ_c`.
pub const TAU_C_GUESS_RANGE: (f64, f64) = (0.1, 1000.0);

/// Estimate `τ_c` by fitting `A·exp(−γ(N_i, τ_i; σ_δ, τ_c)) + c` from
/// `n_restarts` random initial guesses and keeping the fit with maximal R².
///
/// Each point of `curve` must carry its pulse count and spacing.
pub fn estimate_tau_c(
    curve: &DecayCurve,
    sigma_delta: f64,
    n_restarts: usize,
    seed: u64,
) -> Result<(TauCFit, RestartEnsemble)> {
    if n_restarts == 0 {
        return Err(invalid("n_restarts", "must be >= 1"));
    }
    if !(sigma_delta > 0.0 && sigma_delta.is_finite()) {
        return Err(invalid("sigma_delta", "must be > 0"));
    }
    if curve.len() < 4 {
        return Err(Error::TooFewPoints {
            needed: 4,
            got: curve.len(),
        });
    }
    let mut ns = Vec::with_capacity(curve.len());
    let mut taus = Vec::with_capacity(curve.len());
    for (i, p) in curve.points.iter().enumerate() {
        match (p.n_pulses, p.tau_s) {
            (Some(n), Some(tau)) if tau > 0.0 => {
                ns.push(n);
                taus.push(tau);
            }
            _ => {
                return Err(invalid(
                    "curve",
                    format!("point {i} lacks n_pulses/tau_s needed by the OU model"),
                ))
            }
        }
    }
    let ys = curve.signals();
    let model = |tau_c: f64, a: f64, c: f64, i: usize| {
        let g = gamma_ou_unchecked(ns[i] as f64, ns[i] % 2 == 0, taus[i], sigma_delta, tau_c);
        a * (-g).exp() + c
    };
    let objective = |u: &[f64]| sse(&ys, |i| model(u[0].exp(), u[1], u[2], i));
    let y_max = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (g_lo, g_hi) = (TAU_C_GUESS_RANGE.0.ln(), TAU_C_GUESS_RANGE.1.ln());
    let simplex = SimplexOptions::default();

    let fits: Vec<(Vec<f64>, f64, bool)> = (0..n_restarts)
        .into_par_iter()
        .map(|r| {
            let mut s = NoiseStream::new(seed, r as u64, Channel::Restart);
            let ln_tc = g_lo + (g_hi - g_lo) * s.uniform();
            let a0 = y_max * (0.8 + 0.4 * s.uniform());
            let c0 = 0.2 * (s.uniform() - 0.5);
            let res = minimize(objective, &[ln_tc, a0, c0], &simplex);
            (res.x, res.f, res.converged)
        })
        .collect();

    let r2_of = |u: &[f64]| -> f64 {
        let vals: Vec<f64> = (0..ys.len()).map(|i| model(u[0].exp(), u[1], u[2], i)).collect();
        r_squared(&ys, &vals).unwrap_or(f64::NEG_INFINITY)
    };
    let estimates: Vec<f64> = fits.iter().map(|(u, _, _)| u[0].exp()).collect();
    let r2_values: Vec<f64> = fits
        .iter()
        .map(|(u, f, _)| if f.is_finite() { r2_of(u) } else { f64::NEG_INFINITY })
        .collect();
    let best_index = r2_values
        .iter()
        .enumerate()
        .filter(|(_, r)| r.is_finite())
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .ok_or(Error::AllRestartsFailed(n_restarts))?;

    let (u, f, converged) = &fits[best_index];
    let best = [u[0].exp(), u[1], u[2]];
    let se = gauss_newton_stderr(&best, ys.len(), *f, |v, i| model(v[0], v[1], v[2], i));
    let fit = TauCFit {
        tau_c: best[0],
        tau_c_stderr: se[0],
        amplitude: best[1],
        amplitude_stderr: se[1],
        offset: best[2],
        offset_stderr: se[2],
        r_squared: r2_values[best_index],
        sse: *f,
        n_restarts,
        converged: *converged,
    };
    Ok((
        fit,
        RestartEnsemble {
            estimates,
            r2_values,
            best_index,
        },
    ))
}

/// Noise-free OU coherence `exp(−γ)` for an order scan at fixed spacing, plus
/// additive Gaussian noise of standard deviation `noise_sd`.
pub fn synthetic_order_scan(
    tau: f64,
    n_values: &[u64],
    sigma_delta: f64,
    tau_c: f64,
    noise_sd: f64,
    seed: u64,
) -> DecayCurve {
    let mut s = NoiseStream::new(seed, 0, Channel::Measurement);
    let points = n_values
        .iter()
        .map(|&n| {
            let g = gamma_ou_unchecked(n as f64, n % 2 == 0, tau, sigma_delta, tau_c);
            crate::curve::DecayPoint {
                total_time_s: n as f64 * tau,
                signal: (-g).exp() + noise_sd * s.normal(),
                stderr: noise_sd,
                n_realizations: 0,
                n_pulses: Some(n),
                tau_s: Some(tau),
            }
        })
        .collect();
    DecayCurve { points }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn exp_curve(t2: f64, beta: f64, n: usize, t_max: f64) -> DecayCurve {
        let ts: Vec<f64> = (0..n).map(|i| t_max * i as f64 / (n - 1) as f64).collect();
        let p = DecayModelParams {
            beta,
            ..DecayModelParams::simple(t2)
        };
        let ys: Vec<f64> = ts.iter().map(|&t| stretched_exp(t, &p)).collect();
        DecayCurve::from_samples(&ts, &ys)
    }

    #[test]
    fn r_squared_examples() {
        let y = [1.0, 2.0, 4.0, 3.0];
        assert_eq!(r_squared(&y, &y).unwrap(), 1.0);
        assert_eq!(r_squared(&y, &[2.5; 4]).unwrap(), 0.0);
        assert!(r_squared(&y, &[10.0; 4]).unwrap() < 0.0);
        assert!(matches!(r_squared(&[1.0, 1.0], &[1.0, 1.0]), Err(Error::ConstantData)));
        assert!(r_squared(&[1.0], &[1.0]).is_err());
        assert!(r_squared(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn recovers_exact_simple_exponential() {
        let c = exp_curve(24.1e-3, 1.0, 30, 60e-3);
        let f = fit_decay(&c, DecayModel::Simple, &FitOptions::default()).unwrap();
        assert_relative_eq!(f.params.t2, 24.1e-3, max_relative = 1e-3);
        assert!(f.r_squared > 1.0 - 1e-9);
        assert!(f.param_stderr.t2 >= 0.0);
    }

    #[test]
    fn recovers_stretched_exponent_from_noisy_data() {
        let mut c = exp_curve(1.54e-6, 1.5, 40, 4e-6);
        let mut s = NoiseStream::new(3, 0, Channel::Measurement);
        for p in &mut c.points {
            p.signal += 0.01 * s.normal();
        }
        let f = fit_decay(&c, DecayModel::Stretched, &FitOptions::default()).unwrap();
        assert!((f.params.beta - 1.5).abs() < 0.15, "beta {}", f.params.beta);
        assert!(f.param_stderr.beta > 0.0);
    }

    #[test]
    fn time_scaling_scales_t2() {
        let c = exp_curve(2.0, 1.0, 20, 5.0);
        let scaled = DecayCurve::from_samples(
            &c.times().iter().map(|t| t * 1e-3).collect::<Vec<_>>(),
            &c.signals(),
        );
        let a = fit_decay(&c, DecayModel::Simple, &FitOptions::default()).unwrap();
        let b = fit_decay(&scaled, DecayModel::Simple, &FitOptions::default()).unwrap();
        assert_relative_eq!(b.params.t2, a.params.t2 * 1e-3, max_relative = 1e-6);
    }

    #[test]
    fn offset_can_be_fitted() {
        let ts: Vec<f64> = (0..25).map(|i| i as f64 * 0.2).collect();
        let p = DecayModelParams {
            t2: 1.3,
            beta: 1.0,
            amplitude: 0.7,
            offset: 0.2,
        };
        let ys: Vec<f64> = ts.iter().map(|&t| stretched_exp(t, &p)).collect();
        let opts = FitOptions {
            fit_offset: true,
            ..Default::default()
        };
        let f = fit_decay(&DecayCurve::from_samples(&ts, &ys), DecayModel::Simple, &opts).unwrap();
        assert_relative_eq!(f.params.t2, 1.3, max_relative = 1e-5);
        assert_relative_eq!(f.params.offset, 0.2, epsilon = 1e-6);
    }

    #[test]
    fn too_few_points() {
        let c = exp_curve(1.0, 1.0, 3, 2.0);
        assert!(matches!(
            fit_decay(&c, DecayModel::Simple, &FitOptions::default()),
            Err(Error::TooFewPoints { .. })
        ));
    }

    fn order_values() -> Vec<u64> {
        (0..=50).map(|k| 8 * k).collect()
    }

    #[test]
    fn tau_c_from_noiseless_scan() {
        let sigma = 2.0 * PI * 146e3;
        let c = synthetic_order_scan(100e-6, &order_values(), sigma, 15.5, 0.0, 1);
        let (fit, ens) = estimate_tau_c(&c, sigma, 20, 9).unwrap();
        assert_relative_eq!(fit.tau_c, 15.5, max_relative = 1e-6);
        assert!((fit.r_squared - 1.0).abs() < 1e-9);
        assert_eq!(ens.estimates.len(), 20);
        assert!(ens.r2_values.iter().all(|r| *r <= ens.r2_values[ens.best_index]));
    }

    #[test]
    fn restart_determinism() {
        let sigma = 2.0 * PI * 146e3;
        let c = synthetic_order_scan(100e-6, &order_values(), sigma, 15.5, 0.02, 4);
        let a = estimate_tau_c(&c, sigma, 16, 77).unwrap();
        let b = estimate_tau_c(&c, sigma, 16, 77).unwrap();
        assert_eq!(a, b);
        let hist = a.1.histogram(10);
        assert_eq!(hist.iter().map(|b| b.count).sum::<usize>(), 16);
    }

    #[test]
    fn tau_c_needs_sequence_metadata() {
        let c = exp_curve(1.0, 1.0, 10, 2.0);
        assert!(estimate_tau_c(&c, 1.0, 4, 0).is_err());
    }
}
