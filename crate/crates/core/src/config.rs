//! Run configuration (TOML).
//!
//! Frequencies are written in Hz. They are converted to angular frequency
//! (rad/s) in exactly one place, [`RunConfig::noise_params`] and
//! [`RunConfig::drive_params`]; everything downstream works in rad/s.

use crate::dynamics::{DriveParams, StepConfig};
use crate::ensemble::{EnsembleConfig, Sweep};
use crate::error::{Error, Result};
use crate::gatemap::GateKind;
use crate::noise::{NoiseParams, OUParams};
use crate::sequences::{SequenceKind, SequenceSpec};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    /// Detuning noise standard deviation, Hz (σ_δ/2π).
    pub sigma_delta_hz: f64,
    pub tau_c_s: f64,
    /// Relative amplitude noise standard deviation.
    pub sigma_eps: f64,
    pub tau_omega_s: f64,
    /// Static detuning, Hz.
    #[serde(default)]
    pub delta0_hz: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        NoiseSection {
            sigma_delta_hz: 146e3,
            tau_c_s: 15.5,
            sigma_eps: 0.005,
            tau_omega_s: 500e-6,
            delta0_hz: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveSection {
    /// Rabi frequency, Hz (Ω/2π).
    pub rabi_hz: f64,
}

impl Default for DriveSection {
    fn default() -> Self {
        DriveSection { rabi_hz: 6.486e6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    pub n_realizations: usize,
    pub seed: u64,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        EnsembleSection {
            n_realizations: 250,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepsSection {
    pub dt_pulse_s: f64,
    pub dt_free_s: f64,
    pub free_fast_path: bool,
}

impl Default for StepsSection {
    fn default() -> Self {
        let s = StepConfig::default();
        StepsSection {
            dt_pulse_s: s.dt_pulse,
            dt_free_s: s.dt_free,
            free_fast_path: s.free_fast_path,
        }
    }
}

/// A list, a single value, or an inclusive arithmetic range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Values<T> {
    Scalar(T),
    List(Vec<T>),
    Range { start: T, stop: T, step: T },
}

impl Values<f64> {
    pub fn resolve(&self, key: &str) -> Result<Vec<f64>> {
        let v = match self {
            Values::Scalar(x) => vec![*x],
            Values::List(v) => v.clone(),
            Values::Range { start, stop, step } => {
                if !(*step > 0.0) || !(stop >= start) {
                    return Err(Error::Config(format!("{key}: range needs step > 0 and stop >= start")));
                }
                let n = ((stop - start) / step + 1e-9).floor() as usize;
                (0..=n).map(|i| start + i as f64 * step).collect()
            }
        };
        if v.is_empty() {
            return Err(Error::Config(format!("{key}: empty list")));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config(format!("{key}: non-finite value")));
        }
        Ok(v)
    }
}

impl Values<u64> {
    pub fn resolve(&self, key: &str) -> Result<Vec<u64>> {
        let v = match self {
            Values::Scalar(x) => vec![*x],
            Values::List(v) => v.clone(),
            Values::Range { start, stop, step } => {
                if *step == 0 || stop < start {
                    return Err(Error::Config(format!("{key}: range needs step > 0 and stop >= start")));
                }
                (*start..=*stop).step_by(*step as usize).collect()
            }
        };
        if v.is_empty() {
            return Err(Error::Config(format!("{key}: empty list")));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceSection {
    /// Output file stem.
    pub name: String,
    pub kind: SequenceKind,
    /// Phase of the preparation pulse, degrees.
    #[serde(default)]
    pub initial_phase_deg: f64,
    /// Reference phase of the π pulses, degrees.
    #[serde(default)]
    pub frame_phase_deg: f64,
    /// Pulse spacing (wait time for Ramsey), s.
    pub tau_s: Values<f64>,
    /// Pulse count; ignored for Ramsey.
    #[serde(default)]
    pub n_pulses: Option<Values<u64>>,
}

impl SequenceSection {
    /// Resolve into a sweep. Exactly one of `tau_s` and `n_pulses` may hold
    /// more than one value.
    pub fn sweep(&self) -> Result<Sweep> {
        let key = |k: &str| format!("sequence.{}.{k}", self.name);
        let taus = self.tau_s.resolve(&key("tau_s"))?;
        let ns: Vec<u64> = match (&self.n_pulses, self.kind) {
            (_, SequenceKind::Ramsey) => vec![0],
            (None, SequenceKind::Hahn) => vec![1],
            (None, _) => return Err(Error::Config(format!("{}: missing", key("n_pulses")))),
            (Some(v), _) => v.resolve(&key("n_pulses"))?,
        };
        if taus.iter().any(|t| *t < 0.0) {
            return Err(Error::Config(format!("{}: must be >= 0", key("tau_s"))));
        }
        let mut base = match self.kind {
            SequenceKind::Ramsey => SequenceSpec::ramsey(taus[0]),
            SequenceKind::Hahn => SequenceSpec::hahn(taus[0]),
            SequenceKind::Cpmg => SequenceSpec::cpmg(ns[0] as usize, taus[0]),
            SequenceKind::Xy8 => SequenceSpec::xy8(ns[0] as usize, taus[0]),
        };
        base.initial_phase = self.initial_phase_deg.to_radians();
        base.frame_phase = self.frame_phase_deg.to_radians();
        match (taus.len(), ns.len()) {
            (_, 1) => Ok(Sweep::Tau {
                base,
                tau_values: taus,
            }),
            (1, _) => Ok(Sweep::Order {
                base,
                n_values: ns.iter().map(|&n| n as usize).collect(),
            }),
            _ => Err(Error::Config(format!(
                "sequence.{}: tau_s and n_pulses cannot both be swept",
                self.name
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyticSection {
    pub tau_c_presets_s: Vec<f64>,
}

impl Default for AnalyticSection {
    fn default() -> Self {
        AnalyticSection {
            tau_c_presets_s: vec![12.4, 15.5, 18.7],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GatemapSection {
    pub gates: Vec<GateKind>,
    pub eps_max: f64,
    pub delta_max_hz: f64,
    pub n_eps: usize,
    pub n_delta: usize,
    pub tau_s: f64,
}

impl Default for GatemapSection {
    fn default() -> Self {
        GatemapSection {
            gates: GateKind::ALL.to_vec(),
            eps_max: 0.03,
            delta_max_hz: 600e3,
            n_eps: 121,
            n_delta: 121,
            tau_s: crate::gatemap::GATE_TAU,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub drive: DriveSection,
    #[serde(default)]
    pub ensemble: EnsembleSection,
    #[serde(default)]
    pub steps: StepsSection,
    #[serde(default, rename = "sequence")]
    pub sequences: Vec<SequenceSection>,
    #[serde(default)]
    pub analytic: AnalyticSection,
    #[serde(default)]
    pub gatemap: GatemapSection,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            output_dir: default_output_dir(),
            noise: NoiseSection::default(),
            drive: DriveSection::default(),
            ensemble: EnsembleSection::default(),
            steps: StepsSection::default(),
            sequences: vec![],
            analytic: AnalyticSection::default(),
            gatemap: GatemapSection::default(),
        }
    }
}

fn config_err(key: &str, e: Error) -> Error {
    Error::Config(format!("{key}: {e}"))
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.noise_params()?;
        self.drive_params()?;
        self.ensemble_config(None)?;
        let mut names = std::collections::HashSet::new();
        for s in &self.sequences {
            if s.name.is_empty() || s.name.contains(['/', '\\']) {
                return Err(Error::Config(format!("sequence.name: invalid name {:?}", s.name)));
            }
            if !names.insert(s.name.as_str()) {
                return Err(Error::Config(format!("sequence.name: duplicate {:?}", s.name)));
            }
            s.sweep()?;
        }
        if self.analytic.tau_c_presets_s.is_empty()
            || self.analytic.tau_c_presets_s.iter().any(|t| !(*t > 0.0 && t.is_finite()))
        {
            return Err(Error::Config("analytic.tau_c_presets_s: need positive values".into()));
        }
        let g = &self.gatemap;
        if g.n_eps == 0 || g.n_delta == 0 {
            return Err(Error::Config("gatemap.n_eps/n_delta: must be >= 1".into()));
        }
        if !(g.eps_max >= 0.0 && g.delta_max_hz >= 0.0 && g.tau_s > 0.0) {
            return Err(Error::Config("gatemap: eps_max, delta_max_hz >= 0 and tau_s > 0".into()));
        }
        Ok(())
    }

    /// Noise in angular units.
    pub fn noise_params(&self) -> Result<NoiseParams> {
        let n = &self.noise;
        Ok(NoiseParams {
            detuning: OUParams::with_offset(TAU * n.sigma_delta_hz, n.tau_c_s, TAU * n.delta0_hz)
                .map_err(|e| config_err("noise.sigma_delta_hz/tau_c_s/delta0_hz", e))?,
            amplitude: OUParams::new(n.sigma_eps, n.tau_omega_s)
                .map_err(|e| config_err("noise.sigma_eps/tau_omega_s", e))?,
        })
    }

    pub fn drive_params(&self) -> Result<DriveParams> {
        DriveParams::from_rabi_hz(self.drive.rabi_hz).map_err(|e| config_err("drive.rabi_hz", e))
    }

    pub fn step_config(&self) -> StepConfig {
        StepConfig {
            dt_pulse: self.steps.dt_pulse_s,
            dt_free: self.steps.dt_free_s,
            free_fast_path: self.steps.free_fast_path,
        }
    }

    pub fn ensemble_config(&self, threads: Option<usize>) -> Result<EnsembleConfig> {
        let c = EnsembleConfig {
            n_realizations: self.ensemble.n_realizations,
            master_seed: self.ensemble.seed,
            steps: self.step_config(),
            threads,
        };
        c.validate().map_err(|e| config_err("ensemble/steps", e))?;
        Ok(c)
    }

    pub fn sigma_delta(&self) -> f64 {
        TAU * self.noise.sigma_delta_hz
    }

    pub fn gatemap_delta_max(&self) -> f64 {
        TAU * self.gatemap.delta_max_hz
    }
}
