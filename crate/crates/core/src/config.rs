//! Run configuration. Files are TOML in lab units (GHz, ns); conversion to
//! rad/ns happens in the accessors that build internal types.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::control::{OptimizerSettings, SynthesisSettings};
use crate::error::{Error, Result};
use crate::operators::{ghz_to_rad_per_ns, GateTask, OscillatorSpec};
use crate::propagator::{Integrator, PropagationSettings};
use crate::spectator::{TraceNormalization, DEFAULT_CHECKPOINTS};
use crate::sweeps::{default_heatmap_exponents, default_scaling_grid, Reference, COLLAPSE_ANCHOR, SLOPE_WINDOW};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub oscillator: OscillatorConfig,
    #[serde(default)]
    pub gates: Vec<GateConfig>,
    #[serde(default)]
    pub pulse: PulseConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub propagation: PropagationConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
}

fn default_seed() -> u64 {
    1234
}

fn default_workers() -> usize {
    1
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OscillatorConfig {
    /// `ξ/2π` in GHz.
    pub self_kerr_ghz: f64,
    #[serde(default = "one")]
    pub guard_levels: usize,
    #[serde(default)]
    pub rotation_ghz: f64,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateConfig {
    pub from: usize,
    pub to: usize,
    pub duration_ns: f64,
    /// Defaults to `max(from, to) + 1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub essential_levels: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PulseConfig {
    pub segments: usize,
    pub max_amplitude_ghz: f64,
    /// Explicit carriers in GHz; otherwise the transition frequencies of the gate.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub carriers_ghz: Option<Vec<f64>>,
}

impl Default for PulseConfig {
    fn default() -> Self {
        Self {
            segments: 10,
            max_amplitude_ghz: 0.03,
            carriers_ghz: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub max_iterations: usize,
    pub guard_weight: f64,
    pub convergence_tol: f64,
    pub memory: usize,
    /// Synthesis counts as successful at or below this infidelity.
    pub infidelity_threshold: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        let o = OptimizerSettings::default();
        Self {
            max_iterations: o.max_iterations,
            guard_weight: o.guard_weight,
            convergence_tol: o.convergence_tol,
            memory: o.memory,
            infidelity_threshold: 5e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PropagationConfig {
    pub max_dt_ns: f64,
    pub samples_per_period: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps_per_ns: Option<f64>,
    pub integrator: Integrator,
    pub unitarity_tol: f64,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        let p = PropagationSettings::default();
        Self {
            max_dt_ns: p.max_dt,
            samples_per_period: p.samples_per_period,
            steps_per_ns: p.steps_per_ns,
            integrator: p.integrator,
            unitarity_tol: p.unitarity_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    pub checkpoints: usize,
    pub normalization: TraceNormalization,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            checkpoints: DEFAULT_CHECKPOINTS,
            normalization: TraceNormalization::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub heatmap: HeatmapConfig,
    pub scaling: ScalingConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeatmapConfig {
    /// Gate label, e.g. `swap04`.
    pub gate: String,
    pub occ_max: u32,
    /// Exponent pairs; empty means the default 8×8 set.
    pub exponents: Vec<[f64; 2]>,
}

impl Default for HeatmapConfig {
    fn default() -> Self {
        Self {
            gate: "swap04".into(),
            occ_max: 50,
            exponents: vec![],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScalingConfig {
    /// Gate labels to include; empty means every configured gate.
    pub gates: Vec<String>,
    /// Explicit `ε/ξ` grid; empty means the default grid.
    pub grid: Vec<f64>,
    pub slope_window: [f64; 2],
    pub anchor: f64,
    pub reference: Reference,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        Self {
            gates: vec![],
            grid: vec![],
            slope_window: [SLOPE_WINDOW.0, SLOPE_WINDOW.1],
            anchor: COLLAPSE_ANCHOR,
            reference: Reference::default(),
        }
    }
}

fn field_err(field: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{field}: {msg}"))
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(field_err(field, format!("must be positive and finite, got {v}")))
    }
}

impl RunConfig {
    /// The four benchmark SWAPs `|0⟩ ↔ |k⟩`, `k = 3..6`, at `ξ/2π = 0.22 GHz`.
    pub fn benchmark_defaults() -> Self {
        let gates = [(3, 140.0), (4, 215.0), (5, 265.0), (6, 425.0)]
            .into_iter()
            .map(|(k, t)| GateConfig {
                from: 0,
                to: k,
                duration_ns: t,
                essential_levels: None,
            })
            .collect();
        Self {
            seed: default_seed(),
            workers: default_workers(),
            output_dir: default_output_dir(),
            oscillator: OscillatorConfig {
                self_kerr_ghz: 0.22,
                guard_levels: 1,
                rotation_ghz: 0.0,
            },
            gates,
            pulse: PulseConfig::default(),
            optimizer: OptimizerConfig::default(),
            propagation: PropagationConfig::default(),
            analysis: AnalysisConfig::default(),
            sweep: SweepConfig::default(),
        }
    }

    /// Parses and validates TOML text. Diagnostics name the offending field.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        // TOML integers are signed 64-bit
        if i64::try_from(self.seed).is_err() {
            return Err(field_err("seed", format!("must be at most {}", i64::MAX)));
        }
        if self.workers == 0 {
            return Err(field_err("workers", "must be >= 1"));
        }
        positive("oscillator.self_kerr_ghz", self.oscillator.self_kerr_ghz)?;
        if !self.oscillator.rotation_ghz.is_finite() {
            return Err(field_err("oscillator.rotation_ghz", "must be finite"));
        }
        for (i, g) in self.gates.iter().enumerate() {
            positive(&format!("gates[{i}].duration_ns"), g.duration_ns)?;
            self.task(g).map_err(|e| field_err(&format!("gates[{i}]"), e))?;
        }
        let mut labels: Vec<String> = self.gates.iter().map(gate_label).collect();
        labels.sort();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(field_err("gates", "duplicate gate"));
        }
        if self.pulse.segments == 0 {
            return Err(field_err("pulse.segments", "must be >= 1"));
        }
        positive("pulse.max_amplitude_ghz", self.pulse.max_amplitude_ghz)?;
        if let Some(c) = &self.pulse.carriers_ghz {
            if c.is_empty() || c.iter().any(|v| !v.is_finite()) {
                return Err(field_err(
                    "pulse.carriers_ghz",
                    "must be a non-empty list of finite values",
                ));
            }
        }
        if !(self.optimizer.guard_weight.is_finite() && self.optimizer.guard_weight >= 0.0) {
            return Err(field_err("optimizer.guard_weight", "must be non-negative"));
        }
        if !(self.optimizer.convergence_tol.is_finite() && self.optimizer.convergence_tol >= 0.0) {
            return Err(field_err("optimizer.convergence_tol", "must be non-negative"));
        }
        if self.optimizer.memory == 0 {
            return Err(field_err("optimizer.memory", "must be >= 1"));
        }
        positive("optimizer.infidelity_threshold", self.optimizer.infidelity_threshold)?;
        positive("propagation.max_dt_ns", self.propagation.max_dt_ns)?;
        positive("propagation.samples_per_period", self.propagation.samples_per_period)?;
        if let Some(s) = self.propagation.steps_per_ns {
            positive("propagation.steps_per_ns", s)?;
        }
        positive("propagation.unitarity_tol", self.propagation.unitarity_tol)?;
        if self.analysis.checkpoints < 2 {
            return Err(field_err("analysis.checkpoints", "must be >= 2"));
        }
        let h = &self.sweep.heatmap;
        if h.occ_max < 1 {
            return Err(field_err("sweep.heatmap.occ_max", "must be >= 1"));
        }
        if h.exponents.iter().flatten().any(|v| !v.is_finite()) {
            return Err(field_err("sweep.heatmap.exponents", "must be finite"));
        }
        let s = &self.sweep.scaling;
        if s.grid.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(field_err("sweep.scaling.grid", "values must be positive"));
        }
        if s.grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(field_err("sweep.scaling.grid", "must be strictly ascending"));
        }
        let [lo, hi] = s.slope_window;
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(field_err(
                "sweep.scaling.slope_window",
                format!("invalid interval [{lo}, {hi}]"),
            ));
        }
        positive("sweep.scaling.anchor", s.anchor)?;
        Ok(())
    }

    pub fn oscillator_spec(&self, essential_levels: usize) -> Result<OscillatorSpec> {
        OscillatorSpec::from_ghz(
            essential_levels,
            self.oscillator.guard_levels,
            self.oscillator.self_kerr_ghz,
            self.oscillator.rotation_ghz,
        )
    }

    pub fn task(&self, g: &GateConfig) -> Result<GateTask> {
        let d = g.essential_levels.unwrap_or(g.from.max(g.to) + 1);
        GateTask::new(g.from, g.to, g.duration_ns, self.oscillator_spec(d)?)
    }

    pub fn tasks(&self) -> Result<Vec<GateTask>> {
        self.gates.iter().map(|g| self.task(g)).collect()
    }

    /// Task for a gate label such as `swap04`.
    pub fn task_by_label(&self, label: &str) -> Result<GateTask> {
        self.gates
            .iter()
            .find(|g| gate_label(g) == label)
            .ok_or_else(|| Error::Config(format!("no gate `{label}` in config")))
            .and_then(|g| self.task(g))
    }

    pub fn propagation_settings(&self) -> PropagationSettings {
        let p = &self.propagation;
        PropagationSettings {
            steps_per_ns: p.steps_per_ns,
            max_dt: p.max_dt_ns,
            samples_per_period: p.samples_per_period,
            unitarity_tol: p.unitarity_tol,
            checkpoints: 0,
            integrator: p.integrator,
        }
    }

    pub fn synthesis_settings(&self) -> SynthesisSettings {
        let o = &self.optimizer;
        SynthesisSettings {
            segments: self.pulse.segments,
            max_amplitude: ghz_to_rad_per_ns(self.pulse.max_amplitude_ghz),
            carriers: self
                .pulse
                .carriers_ghz
                .as_ref()
                .map(|c| c.iter().map(|&f| ghz_to_rad_per_ns(f)).collect()),
            optimizer: OptimizerSettings {
                max_iterations: o.max_iterations,
                guard_weight: o.guard_weight,
                seed: self.seed,
                convergence_tol: o.convergence_tol,
                memory: o.memory,
            },
            propagation: self.propagation_settings(),
        }
    }

    pub fn heatmap_exponents(&self) -> Vec<(f64, f64)> {
        if self.sweep.heatmap.exponents.is_empty() {
            default_heatmap_exponents()
        } else {
            self.sweep.heatmap.exponents.iter().map(|e| (e[0], e[1])).collect()
        }
    }

    pub fn scaling_grid(&self) -> Vec<f64> {
        if self.sweep.scaling.grid.is_empty() {
            default_scaling_grid()
        } else {
            self.sweep.scaling.grid.clone()
        }
    }

    /// SHA-256 of the canonical serialization, hex encoded. The output
    /// directory and worker count do not affect results and are left out.
    pub fn hash(&self) -> Result<String> {
        let mut c = self.clone();
        c.output_dir = default_output_dir();
        c.workers = default_workers();
        Ok(hex_digest(c.to_toml()?.as_bytes()))
    }

    /// Hash of the oscillator section only. Pulse files carry it so they can
    /// be checked against the config they are evaluated under.
    pub fn oscillator_hash(&self) -> Result<String> {
        let text = toml::to_string(&self.oscillator).map_err(|e| Error::Config(e.to_string()))?;
        Ok(hex_digest(text.as_bytes()))
    }
}

pub fn gate_label(g: &GateConfig) -> String {
    format!("swap{}{}", g.from, g.to)
}

fn hex_digest(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    const MINIMAL: &str = r#"
[oscillator]
self_kerr_ghz = 0.22

[[gates]]
from = 0
to = 3
duration_ns = 140.0
"#;

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = RunConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.oscillator.guard_levels, 1);
        assert_eq!(cfg.optimizer.max_iterations, 200);
        let task = cfg.task(&cfg.gates[0]).unwrap();
        assert_eq!(task.essential_levels(), 4);
        assert_eq!(task.levels(), 5);
        assert!((task.oscillator.self_kerr - TAU * 0.22).abs() < 1e-15);
        let s = cfg.synthesis_settings();
        assert!((s.max_amplitude - TAU * 0.03).abs() < 1e-15);
        assert_eq!(s.optimizer.seed, 1234);
    }

    #[test]
    fn round_trip_fixed_point() {
        for cfg in [RunConfig::benchmark_defaults(), RunConfig::from_toml(MINIMAL).unwrap()] {
            let text = cfg.to_toml().unwrap();
            let back = RunConfig::from_toml(&text).unwrap();
            assert_eq!(back, cfg);
            assert_eq!(back.to_toml().unwrap(), text);
            assert_eq!(back.hash().unwrap(), cfg.hash().unwrap());
        }
    }

    #[test]
    fn custom_sections_round_trip() {
        let mut cfg = RunConfig::benchmark_defaults();
        cfg.pulse.carriers_ghz = Some(vec![0.0, -0.22, -0.44]);
        cfg.propagation.steps_per_ns = Some(250.0);
        cfg.propagation.integrator = Integrator::Midpoint;
        cfg.sweep.heatmap.exponents = vec![[-3.5, -3.5], [0.0, -1.0]];
        cfg.sweep.scaling.grid = vec![1e-5, 1e-4, 1e-3];
        cfg.sweep.scaling.reference = Reference::Target;
        cfg.analysis.normalization = TraceNormalization::DSquared;
        let back = RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.heatmap_exponents(), vec![(-3.5, -3.5), (0.0, -1.0)]);
    }

    #[test]
    fn malformed_frequency_names_field() {
        let bad = MINIMAL.replace("0.22", "\"fast\"");
        let msg = RunConfig::from_toml(&bad).unwrap_err().to_string();
        assert!(msg.contains("self_kerr_ghz"), "{msg}");
        let neg = MINIMAL.replace("0.22", "-0.22");
        let msg = RunConfig::from_toml(&neg).unwrap_err().to_string();
        assert!(msg.contains("oscillator.self_kerr_ghz"), "{msg}");
        let typo = format!("{MINIMAL}\n[optimizer]\nmax_iter = 3\n");
        let msg = RunConfig::from_toml(&typo).unwrap_err().to_string();
        assert!(msg.contains("max_iter"), "{msg}");
    }

    #[test]
    fn gate_validation() {
        let same = MINIMAL.replace("to = 3", "to = 0");
        assert!(RunConfig::from_toml(&same)
            .unwrap_err()
            .to_string()
            .contains("gates[0]"));
        let dup = format!("{MINIMAL}\n[[gates]]\nfrom = 0\nto = 3\nduration_ns = 100.0\n");
        assert!(RunConfig::from_toml(&dup).is_err());
        let cfg = RunConfig::benchmark_defaults();
        assert_eq!(cfg.task_by_label("swap05").unwrap().essential_levels(), 6);
        assert!(cfg.task_by_label("swap12").is_err());
    }

    #[test]
    fn hashes_track_content() {
        let a = RunConfig::benchmark_defaults();
        let mut b = a.clone();
        b.workers = 8;
        b.output_dir = "elsewhere".into();
        assert_eq!(a.hash().unwrap(), b.hash().unwrap());
        b.seed = 7;
        assert_ne!(a.hash().unwrap(), b.hash().unwrap());
        assert_eq!(a.oscillator_hash().unwrap(), b.oscillator_hash().unwrap());
        b.oscillator.self_kerr_ghz = 0.2;
        assert_ne!(a.oscillator_hash().unwrap(), b.oscillator_hash().unwrap());
        assert_eq!(a.hash().unwrap().len(), 64);
    }

    #[test]
    fn oversized_seed_rejected() {
        let mut cfg = RunConfig::benchmark_defaults();
        cfg.seed = u64::MAX;
        assert!(cfg.validate().unwrap_err().to_string().contains("seed"));
    }

    #[test]
    fn empty_gate_list_is_valid() {
        let cfg = RunConfig::from_toml("[oscillator]\nself_kerr_ghz = 0.22\n").unwrap();
        assert!(cfg.tasks().unwrap().is_empty());
    }
}
