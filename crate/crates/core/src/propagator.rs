//! Time-ordered propagation of the driven qudit.
//!
//! Every step is a product of exact exponentials of Hermitian matrices, so the
//! propagator stays unitary to round-off regardless of the step size.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{h_eff, OscillatorSpec};
use crate::pulses::{drive_x, drive_y, PulseSet};

pub type CMatrix = DMatrix<Complex64>;

/// Minimum number of steps over a gate.
pub const MIN_STEPS: usize = 100;

/// Step rule of the time-ordered exponential.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    /// `exp(-i H(t + Δt/2) Δt)`, second order.
    Midpoint,
    /// Fourth-order commutator-free Magnus scheme with two Gauss nodes:
    /// `exp(-iΔt(α₂H₁ + α₁H₂)) · exp(-iΔt(α₁H₁ + α₂H₂))`.
    #[default]
    CommutatorFree4,
}

/// Step-size and checkpoint policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationSettings {
    /// Fixed step density. `None` derives it from `max_dt` and the fastest carrier.
    pub steps_per_ns: Option<f64>,
    /// Upper bound on the step in ns when `steps_per_ns` is unset.
    pub max_dt: f64,
    /// Minimum samples per period of the fastest carrier.
    pub samples_per_period: f64,
    pub unitarity_tol: f64,
    /// Number of uniform checkpoint intervals to record (0 = final only).
    pub checkpoints: usize,
    pub integrator: Integrator,
}

impl Default for PropagationSettings {
    fn default() -> Self {
        Self {
            steps_per_ns: None,
            max_dt: 0.01,
            samples_per_period: 40.0,
            unitarity_tol: 1e-10,
            checkpoints: 0,
            integrator: Integrator::CommutatorFree4,
        }
    }
}

impl PropagationSettings {
    pub fn with_checkpoints(mut self, m: usize) -> Self {
        self.checkpoints = m;
        self
    }

    /// Same settings with half the step size.
    pub fn refined(mut self) -> Self {
        match self.steps_per_ns {
            Some(s) => self.steps_per_ns = Some(2.0 * s),
            None => {
                self.max_dt /= 2.0;
                self.samples_per_period *= 2.0;
            }
        }
        self
    }

    /// Number of steps over `[0, duration]` for the given fastest carrier.
    /// Rounded up to a multiple of the checkpoint count.
    pub fn step_count(&self, duration: f64, max_carrier: f64) -> usize {
        let dt = match self.steps_per_ns {
            Some(s) => 1.0 / s,
            None => {
                let mut dt = self.max_dt;
                if max_carrier > 0.0 {
                    dt = dt.min(TAU / (self.samples_per_period * max_carrier));
                }
                dt
            }
        };
        let mut steps = ((duration / dt).ceil() as usize).max(MIN_STEPS);
        if self.checkpoints > 0 {
            steps = steps.div_ceil(self.checkpoints) * self.checkpoints;
        }
        steps
    }
}

/// Final propagator plus optional time-resolved samples.
#[derive(Debug, Clone)]
pub struct PropagatorResult {
    pub final_unitary: CMatrix,
    /// `(t, U(t))` at uniform checkpoints including `t = 0` and `t = τ`.
    pub checkpoints: Vec<(f64, CMatrix)>,
    /// Largest entry of `U†U - I` observed at checkpoints and at the end.
    pub unitarity_defect: f64,
    pub steps: usize,
}

/// Eigendecomposition-based exponential `exp(-i H dt)` of a Hermitian matrix.
#[derive(Debug, Clone)]
pub(crate) struct HermitianExp {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: CMatrix,
    pub unitary: CMatrix,
}

pub(crate) fn expm_hermitian(h: CMatrix, dt: f64) -> HermitianExp {
    let eig = SymmetricEigen::new(h);
    let phases = eig.eigenvalues.map(|l| Complex64::from_polar(1.0, -l * dt));
    let v = eig.eigenvectors;
    let mut scaled = v.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= phases[j];
    }
    let unitary = scaled * v.adjoint();
    HermitianExp {
        eigenvalues: eig.eigenvalues,
        eigenvectors: v,
        unitary,
    }
}

/// Maximum entry of `U†U - I`.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    let n = u.nrows();
    let mut g = u.adjoint() * u;
    for k in 0..n {
        g[(k, k)] -= Complex64::new(1.0, 0.0);
    }
    g.iter().fold(0.0, |m, z| m.max(z.norm()))
}

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Sub-exponential of one step: time samples with their weights (in units of
/// `Δt`) combined into a single Hermitian generator.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Stage {
    /// Sample times as offsets in units of `Δt`.
    pub nodes: [f64; 2],
    pub weights: [f64; 2],
}

/// Stages in application order (first stage acts first on the state).
pub(crate) fn stages(integrator: Integrator) -> Vec<Stage> {
    match integrator {
        Integrator::Midpoint => vec![Stage {
            nodes: [0.5, 0.5],
            weights: [1.0, 0.0],
        }],
        Integrator::CommutatorFree4 => {
            let c1 = 0.5 - SQRT3 / 6.0;
            let c2 = 0.5 + SQRT3 / 6.0;
            let a1 = (3.0 - 2.0 * SQRT3) / 12.0;
            let a2 = (3.0 + 2.0 * SQRT3) / 12.0;
            vec![
                Stage {
                    nodes: [c1, c2],
                    weights: [a2, a1],
                },
                Stage {
                    nodes: [c1, c2],
                    weights: [a1, a2],
                },
            ]
        }
    }
}

/// The static part of the Hamiltonian and the two drive operators.
#[derive(Debug, Clone)]
pub(crate) struct DriveModel {
    pub h_static: CMatrix,
    pub hx: CMatrix,
    pub hy: CMatrix,
}

impl DriveModel {
    pub fn new(h_static: CMatrix) -> Result<Self> {
        let n = h_static.nrows();
        if n != h_static.ncols() {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: h_static.ncols(),
            });
        }
        if n < 2 {
            return Err(Error::InvalidDimension(format!("need N >= 2, got {n}")));
        }
        let herm = (&h_static - h_static.adjoint())
            .iter()
            .fold(0.0f64, |m, z| m.max(z.norm()));
        let scale = h_static.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        if herm > 1e-12 * (1.0 + scale) {
            return Err(Error::InvalidDimension("static Hamiltonian is not Hermitian".into()));
        }
        Ok(Self {
            hx: drive_x(n),
            hy: drive_y(n),
            h_static,
        })
    }

    pub fn dim(&self) -> usize {
        self.h_static.nrows()
    }

    /// Generator `Σ w_k H(t_k)` of one stage, scaled so that the stage is
    /// `exp(-i G Δt)`. Also returns the effective `(p, q)` combination.
    pub fn stage_generator(&self, pulse: &PulseSet, t0: f64, dt: f64, stage: &Stage) -> (CMatrix, f64, f64) {
        let wsum: f64 = stage.weights.iter().sum();
        let (mut p, mut q) = (0.0, 0.0);
        for k in 0..2 {
            if stage.weights[k] == 0.0 {
                continue;
            }
            let (pk, qk) = pulse.envelope_unchecked(t0 + stage.nodes[k] * dt);
            p += stage.weights[k] * pk;
            q += stage.weights[k] * qk;
        }
        let mut g = &self.h_static * Complex64::new(wsum, 0.0);
        g.zip_zip_apply(&self.hx, &self.hy, |gi, x, y| {
            *gi += x * p + y * q;
        });
        (g, p, q)
    }
}

fn check_pulse(model: &DriveModel, pulse: &PulseSet) -> Result<()> {
    if model.dim() < 2 {
        return Err(Error::InvalidDimension("need N >= 2".into()));
    }
    if pulse.duration() <= 0.0 {
        return Err(Error::InvalidPulse("non-positive duration".into()));
    }
    Ok(())
}

/// Propagates over `[t0, t1]` with `steps` uniform steps starting from `init`.
/// Records a checkpoint every `every` steps when `every > 0`.
fn evolve(
    model: &DriveModel,
    pulse: &PulseSet,
    integrator: Integrator,
    t0: f64,
    t1: f64,
    steps: usize,
    every: usize,
    init: CMatrix,
) -> (CMatrix, Vec<(f64, CMatrix)>) {
    let dt = (t1 - t0) / steps as f64;
    let stage_list = stages(integrator);
    let mut u = init;
    let mut cps = Vec::new();
    if every > 0 {
        cps.push((t0, u.clone()));
    }
    for s in 0..steps {
        let ts = t0 + s as f64 * dt;
        for stage in &stage_list {
            let (g, _, _) = model.stage_generator(pulse, ts, dt, stage);
            let e = expm_hermitian(g, dt);
            u = e.unitary * u;
        }
        if every > 0 && (s + 1) % every == 0 {
            let t = if s + 1 == steps { t1 } else { t0 + (s + 1) as f64 * dt };
            cps.push((t, u.clone()));
        }
    }
    (u, cps)
}

fn finish(u: CMatrix, checkpoints: Vec<(f64, CMatrix)>, steps: usize, tol: f64) -> Result<PropagatorResult> {
    let mut defect = unitarity_defect(&u);
    for (_, c) in &checkpoints {
        defect = defect.max(unitarity_defect(c));
    }
    if !(defect <= tol) {
        return Err(Error::Propagation { defect, tol });
    }
    Ok(PropagatorResult {
        final_unitary: u,
        checkpoints,
        unitarity_defect: defect,
        steps,
    })
}

/// Time-ordered propagator of `h_static + H_d(t)` over the pulse window.
pub fn propagate(h_static: &CMatrix, pulse: &PulseSet, settings: &PropagationSettings) -> Result<PropagatorResult> {
    let model = DriveModel::new(h_static.clone())?;
    propagate_model(&model, pulse, settings)
}

pub(crate) fn propagate_model(
    model: &DriveModel,
    pulse: &PulseSet,
    settings: &PropagationSettings,
) -> Result<PropagatorResult> {
    check_pulse(model, pulse)?;
    let tau = pulse.duration();
    let steps = settings.step_count(tau, pulse.max_carrier());
    let every = if settings.checkpoints > 0 {
        steps / settings.checkpoints
    } else {
        0
    };
    let n = model.dim();
    let (u, cps) = evolve(
        model,
        pulse,
        settings.integrator,
        0.0,
        tau,
        steps,
        every,
        CMatrix::identity(n, n),
    );
    finish(u, cps, steps, settings.unitarity_tol)
}

/// Propagates over a sub-interval `[t0, t1]` of the pulse window with the given
/// number of steps, starting from `init`.
pub fn propagate_interval(
    h_static: &CMatrix,
    pulse: &PulseSet,
    t0: f64,
    t1: f64,
    steps: usize,
    integrator: Integrator,
    init: &CMatrix,
) -> Result<CMatrix> {
    let model = DriveModel::new(h_static.clone())?;
    if !(0.0 <= t0 && t0 < t1 && t1 <= pulse.duration()) {
        return Err(Error::Domain {
            t: if t0 < 0.0 { t0 } else { t1 },
            duration: pulse.duration(),
        });
    }
    if init.nrows() != model.dim() || init.ncols() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: init.nrows(),
        });
    }
    let (u, _) = evolve(&model, pulse, integrator, t0, t1, steps.max(1), 0, init.clone());
    Ok(u)
}

/// Real diagonal operator as a complex matrix.
pub fn complexify(m: &DMatrix<f64>) -> CMatrix {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Propagator of the spectator-shifted Hamiltonian `H₀ + εV + H_d(t)`.
pub fn propagate_shifted(
    spec: &OscillatorSpec,
    eps: f64,
    pulse: &PulseSet,
    settings: &PropagationSettings,
) -> Result<PropagatorResult> {
    propagate(&complexify(&h_eff(spec, eps)), pulse, settings)
}
