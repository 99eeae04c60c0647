//! Single-qudit SWAP pulse synthesis and the fidelity cost of spectator-mode
//! frequency shifts.

pub mod config;
pub mod control;
pub mod error;
pub mod lbfgs;
pub mod operators;
pub mod propagator;
pub mod pulses;
pub mod spectator;
pub mod sweeps;

pub use config::RunConfig;
pub use control::{synthesize, ObjectiveReport, OptimizerSettings, Synthesis, SynthesisSettings};
pub use error::{Error, Result};
pub use operators::{GateTask, OscillatorSpec, SpectatorConfig};
pub use propagator::{CMatrix, Integrator, PropagationSettings, PropagatorResult};
pub use pulses::{BSplineBasis, PulseFile, PulseSet};
pub use spectator::{DecayAnalyzer, DecayReport, ShiftEvaluator, TraceNormalization};
pub use sweeps::{GatePulse, HeatmapSpec, Reference, ScalingSpec, SweepResult, SweepRow};

/// Crate version recorded in output provenance.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
