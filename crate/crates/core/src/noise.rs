//! Exact Ornstein-Uhlenbeck noise for the detuning δ(t) and the relative
//! drive-amplitude error ε(t).
//!
//! The update `x' = μ + (x − μ)·e^{−Δt/τ} + n·σ·√(1 − e^{−2Δt/τ})` samples the
//! OU transition density exactly, so the step size never changes the
//! statistics of the process at the sampled instants.
//!
//! Random numbers come from ChaCha8 keyed by `(master_seed, channel, fork)`
//! with the realization index as the ChaCha stream id. Every realization owns
//! an independent counter-based stream, so results do not depend on which
//! thread evaluates which realization. Unit normals use the ziggurat sampler
//! (`rand_distr::StandardNormal`).

use crate::error::{check_finite, invalid, Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Parameters of one OU channel.
///
/// `sigma` is in rad/s for the detuning channel and dimensionless for the
/// amplitude channel; `static_offset` shares the unit of `sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OUParams {
    pub sigma: f64,
    pub tau_corr: f64,
    #[serde(default)]
    pub static_offset: f64,
}

impl OUParams {
    pub fn new(sigma: f64, tau_corr: f64) -> Result<Self> {
        Self::with_offset(sigma, tau_corr, 0.0)
    }

    pub fn with_offset(sigma: f64, tau_corr: f64, static_offset: f64) -> Result<Self> {
        let p = OUParams {
            sigma,
            tau_corr,
            static_offset,
        };
        p.validate()?;
        Ok(p)
    }

    /// A channel that is identically zero.
    pub fn silent() -> Self {
        OUParams {
            sigma: 0.0,
            tau_corr: 1.0,
            static_offset: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_finite(self.sigma, "sigma")?;
        check_finite(self.tau_corr, "tau_corr")?;
        check_finite(self.static_offset, "static_offset")?;
        if self.sigma < 0.0 {
            return Err(invalid("sigma", format!("must be >= 0, got {}", self.sigma)));
        }
        if self.tau_corr <= 0.0 {
            return Err(invalid(
                "tau_corr",
                format!("must be > 0, got {}", self.tau_corr),
            ));
        }
        Ok(())
    }

    /// Diffusion constant `D = 2σ²/τ`.
    pub fn diffusion(&self) -> f64 {
        2.0 * self.sigma * self.sigma / self.tau_corr
    }

    /// Build from a diffusion constant using `σ = √(Dτ/2)`.
    pub fn from_diffusion(d: f64, tau_corr: f64) -> Result<Self> {
        if !(d >= 0.0) {
            return Err(invalid("d", "must be >= 0"));
        }
        Self::new((0.5 * d * tau_corr).sqrt(), tau_corr)
    }
}

/// Detuning and amplitude channels together.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub detuning: OUParams,
    pub amplitude: OUParams,
}

impl NoiseParams {
    pub fn silent() -> Self {
        NoiseParams {
            detuning: OUParams::silent(),
            amplitude: OUParams::silent(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.detuning.validate()?;
        self.amplitude.validate()
    }

    pub fn is_silent(&self) -> bool {
        self.detuning.sigma == 0.0
            && self.detuning.static_offset == 0.0
            && self.amplitude.sigma == 0.0
            && self.amplitude.static_offset == 0.0
    }
}

/// One exact OU transition.
pub fn ou_step(x: f64, dt: f64, params: &OUParams, n: f64) -> Result<f64> {
    check_finite(x, "x")?;
    check_finite(dt, "dt")?;
    check_finite(n, "n")?;
    params.validate()?;
    if dt < 0.0 {
        return Err(invalid("dt", format!("must be >= 0, got {dt}")));
    }
    let (decay, spread) = transition_factors(dt, params);
    Ok(params.static_offset + (x - params.static_offset) * decay + n * spread)
}

/// `(e^{−Δt/τ}, σ·√(1 − e^{−2Δt/τ}))`.
#[inline]
fn transition_factors(dt: f64, params: &OUParams) -> (f64, f64) {
    let r = dt / params.tau_corr;
    let decay = (-r).exp();
    // 1 − e^{−2r} without cancellation for small r
    let var_frac = -(-2.0 * r).exp_m1();
    (decay, params.sigma * var_frac.sqrt())
}

/// Draw from the stationary distribution `N(static_offset, σ²)`.
pub fn sample_initial(params: &OUParams, n: f64) -> f64 {
    params.static_offset + n * params.sigma
}

/// Which OU channel a stream feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Channel {
    Detuning = 0,
    Amplitude = 1,
    /// Synthetic measurement noise used by the estimation tools.
    Measurement = 2,
    /// Random initial guesses for fit restarts.
    Restart = 3,
}

/// Deterministic source of unit normals for one `(seed, channel, fork,
/// realization)` tuple.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    rng: ChaCha8Rng,
}

impl NoiseStream {
    pub fn new(master_seed: u64, realization: u64, channel: Channel) -> Self {
        Self::forked(master_seed, realization, channel, 0)
    }

    /// An independent stream for the same realization, distinguished by `fork`.
    pub fn forked(master_seed: u64, realization: u64, channel: Channel, fork: u64) -> Self {
        let mut key = [0u8; 32];
        key[0..8].copy_from_slice(&master_seed.to_le_bytes());
        key[8..16].copy_from_slice(&(channel as u64).to_le_bytes());
        key[16..24].copy_from_slice(&fork.to_le_bytes());
        key[24..32].copy_from_slice(b"ddsim-ou");
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(realization);
        NoiseStream { rng }
    }

    #[inline]
    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }
}

/// Sampled realization of one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseTrajectory {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl NoiseTrajectory {
    /// A trajectory that holds `value` at every instant of `grid`.
    pub fn constant(grid: &[f64], value: f64) -> Self {
        NoiseTrajectory {
            times: grid.to_vec(),
            values: vec![value; grid.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub(crate) fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    for (i, w) in grid.windows(2).enumerate() {
        if !(w[1] > w[0]) {
            return Err(Error::NonMonotoneGrid(i + 1));
        }
    }
    Ok(())
}

/// Sample one OU realization on `grid`: the first point from the stationary
/// distribution, every later point by an exact transition over the local gap.
pub fn generate_trajectory(
    params: &OUParams,
    grid: &[f64],
    stream: &mut NoiseStream,
) -> Result<NoiseTrajectory> {
    params.validate()?;
    check_grid(grid)?;
    let mut process = OuProcess::start(*params, stream.clone());
    let mut values = Vec::with_capacity(grid.len());
    values.push(process.value());
    for w in grid.windows(2) {
        process.advance(w[1] - w[0]);
        values.push(process.value());
    }
    *stream = process.stream;
    Ok(NoiseTrajectory {
        times: grid.to_vec(),
        values,
    })
}

/// Stateful OU sampler used in the propagation loop. Transition factors for
/// the last step size are cached since the step grid is piecewise uniform.
#[derive(Debug, Clone)]
pub struct OuProcess {
    params: OUParams,
    value: f64,
    stream: NoiseStream,
    cached_dt: f64,
    decay: f64,
    spread: f64,
}

impl OuProcess {
    pub fn start(params: OUParams, mut stream: NoiseStream) -> Self {
        let value = if params.sigma == 0.0 {
            params.static_offset
        } else {
            sample_initial(&params, stream.normal())
        };
        OuProcess {
            params,
            value,
            stream,
            cached_dt: f64::NAN,
            decay: 1.0,
            spread: 0.0,
        }
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.value
    }

    #[inline]
    pub fn advance(&mut self, dt: f64) {
        if dt != self.cached_dt {
            let (decay, spread) = transition_factors(dt, &self.params);
            self.cached_dt = dt;
            self.decay = decay;
            self.spread = spread;
        }
        let mu = self.params.static_offset;
        let drift = mu + (self.value - mu) * self.decay;
        self.value = if self.params.sigma == 0.0 {
            drift
        } else {
            drift + self.spread * self.stream.normal()
        };
    }

    /// Continue from the current value on a different random stream.
    pub fn fork(&self, stream: NoiseStream) -> Self {
        OuProcess {
            stream,
            ..self.clone()
        }
    }
}
