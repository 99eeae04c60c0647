//! Single-mode operators, the Kerr Hamiltonian of the target oscillator and
//! the scalar frequency shift induced by Fock-state spectators.
//!
//! All frequencies are angular (rad/ns) with ħ = 1. Spectators never enter
//! the Hilbert space: a spectator in a Fock state only contributes the term
//! `ε V` with `V = -n̂` on the target mode.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Converts a cyclic frequency in GHz to an angular frequency in rad/ns.
pub fn ghz_to_rad_per_ns(f_ghz: f64) -> f64 {
    TAU * f_ghz
}

/// Converts an angular frequency in rad/ns to GHz.
pub fn rad_per_ns_to_ghz(w: f64) -> f64 {
    w / TAU
}

/// Target-mode definition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillatorSpec {
    /// Dimension `d` of the computational subspace.
    pub essential_levels: usize,
    /// Extra simulated levels above the essential subspace.
    pub guard_levels: usize,
    /// Self-Kerr `ξ` in rad/ns.
    pub self_kerr: f64,
    /// Rotating-frame frequency `ω` in rad/ns. Not used by the dynamics.
    pub rotation_freq: f64,
}

impl OscillatorSpec {
    pub fn new(essential_levels: usize, guard_levels: usize, self_kerr: f64, rotation_freq: f64) -> Result<Self> {
        let spec = Self {
            essential_levels,
            guard_levels,
            self_kerr,
            rotation_freq,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Builds a spec from lab units (GHz).
    pub fn from_ghz(
        essential_levels: usize,
        guard_levels: usize,
        self_kerr_ghz: f64,
        rotation_ghz: f64,
    ) -> Result<Self> {
        Self::new(
            essential_levels,
            guard_levels,
            ghz_to_rad_per_ns(self_kerr_ghz),
            ghz_to_rad_per_ns(rotation_ghz),
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.essential_levels < 2 {
            return Err(Error::InvalidSpec(format!(
                "essential_levels must be >= 2, got {}",
                self.essential_levels
            )));
        }
        if !(self.self_kerr.is_finite() && self.self_kerr > 0.0) {
            return Err(Error::InvalidSpec(format!(
                "self_kerr must be positive and finite, got {}",
                self.self_kerr
            )));
        }
        if !self.rotation_freq.is_finite() {
            return Err(Error::InvalidSpec("rotation_freq must be finite".into()));
        }
        Ok(())
    }

    /// Total number of simulated levels `N = d + guard`.
    pub fn levels(&self) -> usize {
        self.essential_levels + self.guard_levels
    }

    /// Unperturbed eigenvalue `E_k = -(ξ/2)(k² - k)`.
    pub fn energy(&self, k: usize) -> f64 {
        let k = k as f64;
        -0.5 * self.self_kerr * (k * k - k)
    }
}

/// Cross-Kerr couplings and Fock occupations of the spectator modes.
///
/// Downstream code only ever sees the induced shift [`SpectatorConfig::epsilon`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SpectatorConfig {
    entries: Vec<(f64, u32)>,
}

impl SpectatorConfig {
    pub fn new(entries: Vec<(f64, u32)>) -> Result<Self> {
        for &(xi, _) in &entries {
            if !(xi.is_finite() && xi >= 0.0) {
                return Err(Error::InvalidSpec(format!(
                    "cross-Kerr must be finite and non-negative, got {xi}"
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[(f64, u32)] {
        &self.entries
    }

    /// Induced shift `ε = Σ ξⱼ nⱼ` in rad/ns.
    pub fn epsilon(&self) -> f64 {
        epsilon_shift(self)
    }
}

/// A SWAP between two levels of the target oscillator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateTask {
    pub swap_from: usize,
    pub swap_to: usize,
    /// Gate duration `τ` in ns.
    pub duration: f64,
    pub oscillator: OscillatorSpec,
}

impl GateTask {
    pub fn new(swap_from: usize, swap_to: usize, duration: f64, oscillator: OscillatorSpec) -> Result<Self> {
        let task = Self {
            swap_from,
            swap_to,
            duration,
            oscillator,
        };
        task.validate()?;
        Ok(task)
    }

    /// The layout used for the benchmark SWAPs: `|0⟩ ↔ |k⟩` with `k + 1`
    /// essential levels and the given number of guard levels.
    pub fn swap_from_ground(k: usize, duration: f64, guard_levels: usize, self_kerr: f64) -> Result<Self> {
        let osc = OscillatorSpec::new(k + 1, guard_levels, self_kerr, 0.0)?;
        Self::new(0, k, duration, osc)
    }

    pub fn validate(&self) -> Result<()> {
        self.oscillator.validate()?;
        if self.swap_from == self.swap_to {
            return Err(Error::InvalidTask(format!("degenerate SWAP {0}<->{0}", self.swap_from)));
        }
        if self.swap_from > self.swap_to {
            return Err(Error::InvalidTask(format!(
                "levels must be ordered (i < j), got {} and {}",
                self.swap_from, self.swap_to
            )));
        }
        if self.swap_to >= self.oscillator.essential_levels {
            return Err(Error::InvalidTask(format!(
                "level {} outside essential subspace of dimension {}",
                self.swap_to, self.oscillator.essential_levels
            )));
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::InvalidTask(format!(
                "duration must be positive, got {}",
                self.duration
            )));
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        format!("swap{}{}", self.swap_from, self.swap_to)
    }

    pub fn levels(&self) -> usize {
        self.oscillator.levels()
    }

    pub fn essential_levels(&self) -> usize {
        self.oscillator.essential_levels
    }
}

/// Number operator `n̂ = diag(0, 1, …, N-1)`.
pub fn number_operator(n: usize) -> Result<DMatrix<f64>> {
    if n < 1 {
        return Err(Error::InvalidDimension("number operator needs N >= 1".into()));
    }
    Ok(DMatrix::from_fn(n, n, |r, c| if r == c { r as f64 } else { 0.0 }))
}

/// Truncated lowering operator with `(k, k+1)` entry `√(k+1)`.
pub fn lowering_operator(n: usize) -> Result<DMatrix<f64>> {
    if n < 2 {
        return Err(Error::InvalidDimension(format!(
            "lowering operator needs N >= 2, got {n}"
        )));
    }
    Ok(DMatrix::from_fn(
        n,
        n,
        |r, c| {
            if c == r + 1 {
                (c as f64).sqrt()
            } else {
                0.0
            }
        },
    ))
}

/// Static Kerr Hamiltonian `H₀ = -(ξ/2)(n̂² - n̂)`.
pub fn h0(spec: &OscillatorSpec) -> DMatrix<f64> {
    let n = spec.levels();
    DMatrix::from_fn(n, n, |r, c| if r == c { spec.energy(r) } else { 0.0 })
}

/// Shift operator `V = -n̂`.
pub fn shift_operator(n: usize) -> Result<DMatrix<f64>> {
    Ok(-number_operator(n)?)
}

/// Total spectator-induced shift `ε = Σ ξⱼ nⱼ`.
pub fn epsilon_shift(cfg: &SpectatorConfig) -> f64 {
    cfg.entries.iter().map(|&(xi, occ)| xi * f64::from(occ)).sum()
}

/// Effective Hamiltonian `H₀ + εV`.
pub fn h_eff(spec: &OscillatorSpec, eps: f64) -> DMatrix<f64> {
    let n = spec.levels();
    DMatrix::from_fn(n, n, |r, c| if r == c { spec.energy(r) - eps * r as f64 } else { 0.0 })
}

/// SWAP target on all simulated levels: exchanges `|i⟩` and `|j⟩`, identity elsewhere
/// (including guard levels).
pub fn swap_target(task: &GateTask) -> Result<DMatrix<f64>> {
    task.validate()?;
    let n = task.levels();
    let (i, j) = (task.swap_from, task.swap_to);
    let mut u = DMatrix::identity(n, n);
    u[(i, i)] = 0.0;
    u[(j, j)] = 0.0;
    u[(i, j)] = 1.0;
    u[(j, i)] = 1.0;
    Ok(u)
}

/// `E_i - E_j` from the diagonal of `H₀`.
pub fn transition_frequency(i: usize, j: usize, spec: &OscillatorSpec) -> Result<f64> {
    let n = spec.levels();
    if i >= n || j >= n {
        return Err(Error::InvalidDimension(format!(
            "levels ({i}, {j}) outside {n} simulated levels"
        )));
    }
    Ok(spec.energy(i) - spec.energy(j))
}
