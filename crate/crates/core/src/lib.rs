//! Decoherence of a driven two-level spin under Ornstein-Uhlenbeck detuning
//! and amplitude noise: Monte-Carlo ensembles for Ramsey, Hahn, CPMG and XY8
//! sequences, the closed-form OU decay exponent, decay fitting and gate
//! fidelity maps.

pub mod analytic;
pub mod config;
pub mod curve;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod estimation;
pub mod gatemap;
pub mod linalg;
pub mod noise;
pub mod sequences;
pub mod simplex;

pub use analytic::{gamma_ou, DecayModelParams};
pub use curve::{DecayCurve, DecayPoint};
pub use dynamics::{DriveParams, Propagator, PulseProgram, Segment, SpinState, StepConfig};
pub use ensemble::{decay_curve, EnsembleConfig, Sweep};
pub use error::{Error, Result};
pub use estimation::{estimate_tau_c, fit_decay, DecayModel, FitOptions, FitResult};
pub use gatemap::{fidelity_map, gate_fidelity, ErrorGrid, GateKind};
pub use noise::{NoiseParams, OUParams};
pub use sequences::{SequenceKind, SequenceSpec};
