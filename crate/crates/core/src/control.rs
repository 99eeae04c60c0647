//! Pulse synthesis: trace-fidelity objective with a guard-level leakage
//! penalty, its exact adjoint gradient, and a box-constrained L-BFGS driver.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{h0, swap_target, GateTask};
use crate::propagator::{
    complexify, expm_hermitian, stages, CMatrix, DriveModel, PropagationSettings, PropagatorResult,
};
use crate::pulses::{default_carriers, BSplineBasis, PulseSet};

/// One evaluation of the synthesis objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveReport {
    pub infidelity: f64,
    pub guard_penalty: f64,
    /// `infidelity + guard_weight * guard_penalty`.
    pub total: f64,
    pub iteration: usize,
    pub gradient_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSettings {
    pub max_iterations: usize,
    pub guard_weight: f64,
    pub seed: u64,
    /// Stop once the projected-gradient infinity norm drops below this.
    pub convergence_tol: f64,
    /// Number of curvature pairs kept by L-BFGS.
    pub memory: usize,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            guard_weight: 1.0,
            seed: 1234,
            convergence_tol: 1e-9,
            memory: 10,
        }
    }
}

/// Pulse layout, optimizer and propagation settings for one synthesis run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisSettings {
    pub segments: usize,
    /// Coefficient bound in rad/ns.
    pub max_amplitude: f64,
    /// Carrier frequencies in rad/ns; `None` uses [`default_carriers`].
    pub carriers: Option<Vec<f64>>,
    pub optimizer: OptimizerSettings,
    pub propagation: PropagationSettings,
}

impl Default for SynthesisSettings {
    fn default() -> Self {
        Self {
            segments: 10,
            max_amplitude: TAU * 0.03,
            carriers: None,
            optimizer: OptimizerSettings::default(),
            propagation: PropagationSettings::default(),
        }
    }
}

impl SynthesisSettings {
    /// Zero pulse with the configured layout for `task`.
    pub fn zero_pulse(&self, task: &GateTask) -> Result<PulseSet> {
        let carriers = match &self.carriers {
            Some(c) => c.clone(),
            None => default_carriers(task)?,
        };
        let basis = BSplineBasis::new(self.segments, task.duration)?;
        PulseSet::zeros(basis, carriers, self.max_amplitude)
    }

    /// Seeded initial coefficients, uniform in `±0.01 · max_amplitude`.
    pub fn initial_pulse(&self, task: &GateTask) -> Result<PulseSet> {
        let zero = self.zero_pulse(task)?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.optimizer.seed);
        let r = 0.01 * self.max_amplitude;
        let coeffs: Vec<f64> = (0..zero.coeffs().len()).map(|_| rng.gen_range(-r..=r)).collect();
        zero.with_coeffs(&coeffs)
    }
}

/// `|Tr_ess(target† u) / d|²`, the trace over the leading `d × d` block.
pub fn trace_fidelity(u: &CMatrix, target: &CMatrix, d: usize) -> Result<f64> {
    let n = u.nrows();
    if u.ncols() != n || target.nrows() != n || target.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: target.nrows(),
        });
    }
    if d == 0 || d > n {
        return Err(Error::InvalidDimension(format!(
            "essential dimension {d} not in 1..={n}"
        )));
    }
    Ok((essential_overlap(u, target, d) / d as f64).norm_sqr())
}

/// `Tr_ess(target† u)`.
fn essential_overlap(u: &CMatrix, target: &CMatrix, d: usize) -> Complex64 {
    let n = u.nrows();
    let mut g = Complex64::new(0.0, 0.0);
    for j in 0..d {
        for i in 0..n {
            g += target[(i, j)].conj() * u[(i, j)];
        }
    }
    g
}

/// Time-averaged population in `guard` levels over the remaining
/// (essential) columns, normalized per column. Trapezoidal quadrature over
/// the recorded checkpoints.
pub fn guard_penalty(result: &PropagatorResult, guard: &[usize]) -> Result<f64> {
    let cps = &result.checkpoints;
    if cps.len() < 2 {
        return Err(Error::MissingCheckpoints(
            "guard penalty needs at least two checkpoints".into(),
        ));
    }
    let n = cps[0].1.nrows();
    let essential: Vec<usize> = (0..n).filter(|k| !guard.contains(k)).collect();
    if essential.is_empty() || guard.iter().any(|&g| g >= n) {
        return Err(Error::InvalidDimension("guard indices out of range".into()));
    }
    let pop = |u: &CMatrix| -> f64 {
        let mut s = 0.0;
        for &c in &essential {
            for &g in guard {
                s += u[(g, c)].norm_sqr();
            }
        }
        s
    };
    let mut integral = 0.0;
    for w in cps.windows(2) {
        integral += 0.5 * (w[1].0 - w[0].0) * (pop(&w[0].1) + pop(&w[1].1));
    }
    let span = cps[cps.len() - 1].0 - cps[0].0;
    Ok(integral / (span * essential.len() as f64))
}

/// Precomputed operators for objective evaluations of one gate.
#[derive(Debug, Clone)]
pub struct Problem {
    task: GateTask,
    model: DriveModel,
    target: CMatrix,
    template: PulseSet,
    guard_weight: f64,
    propagation: PropagationSettings,
}

impl Problem {
    pub fn new(
        task: &GateTask,
        template: PulseSet,
        guard_weight: f64,
        propagation: PropagationSettings,
    ) -> Result<Self> {
        task.validate()?;
        if (template.duration() - task.duration).abs() > 1e-12 * task.duration {
            return Err(Error::InvalidPulse(format!(
                "pulse duration {} does not match gate duration {}",
                template.duration(),
                task.duration
            )));
        }
        Ok(Self {
            task: *task,
            model: DriveModel::new(complexify(&h0(&task.oscillator)))?,
            target: complexify(&swap_target(task)?),
            template,
            guard_weight,
            propagation,
        })
    }

    pub fn from_settings(task: &GateTask, settings: &SynthesisSettings) -> Result<Self> {
        Self::new(
            task,
            settings.zero_pulse(task)?,
            settings.optimizer.guard_weight,
            settings.propagation,
        )
    }

    pub fn task(&self) -> &GateTask {
        &self.task
    }

    pub fn template(&self) -> &PulseSet {
        &self.template
    }

    pub fn dim(&self) -> usize {
        self.template.coeffs().len()
    }

    pub fn guard_weight(&self) -> f64 {
        self.guard_weight
    }

    pub fn with_guard_weight(mut self, w: f64) -> Self {
        self.guard_weight = w;
        self
    }

    /// Objective value only.
    pub fn objective(&self, coeffs: &[f64]) -> Result<ObjectiveReport> {
        self.evaluate(coeffs, false).map(|(r, _)| r)
    }

    /// Objective and its gradient with respect to every coefficient.
    pub fn objective_and_gradient(&self, coeffs: &[f64]) -> Result<(ObjectiveReport, Vec<f64>)> {
        let (r, g) = self.evaluate(coeffs, true)?;
        Ok((r, g.expect("gradient requested")))
    }

    fn evaluate(&self, coeffs: &[f64], want_grad: bool) -> Result<(ObjectiveReport, Option<Vec<f64>>)> {
        if coeffs.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: coeffs.len(),
            });
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidPulse("non-finite coefficient".into()));
        }
        let pulse = self.template.with_coeffs(coeffs)?;
        let n = self.model.dim();
        let d = self.task.essential_levels();
        let tau = self.task.duration;
        let steps = self.propagation.step_count(tau, pulse.max_carrier());
        let dt = tau / steps as f64;
        let stage_list = stages(self.propagation.integrator);
        let ns = stage_list.len();

        // Penalty weight per step boundary (trapezoid, normalized per column).
        let pen_scale = 1.0 / (tau * d as f64);
        let boundary_weight = |s: usize| -> f64 {
            if s == 0 || s == steps {
                0.5 * dt * pen_scale
            } else {
                dt * pen_scale
            }
        };
        let guard_pop = |u: &CMatrix| -> f64 {
            let mut acc = 0.0;
            for c in 0..d {
                for g in d..n {
                    acc += u[(g, c)].norm_sqr();
                }
            }
            acc
        };

        // Forward sweep.
        let mut u = CMatrix::identity(n, n);
        let mut penalty = boundary_weight(0) * guard_pop(&u);
        for s in 0..steps {
            let ts = s as f64 * dt;
            for stage in &stage_list {
                let (g, _, _) = self.model.stage_generator(&pulse, ts, dt, stage);
                u = expm_hermitian(g, dt).unitary * u;
            }
            penalty += boundary_weight(s + 1) * guard_pop(&u);
        }
        let defect = crate::propagator::unitarity_defect(&u);
        if !(defect <= self.propagation.unitarity_tol) {
            return Err(Error::Propagation {
                defect,
                tol: self.propagation.unitarity_tol,
            });
        }
        let overlap = essential_overlap(&u, &self.target, d);
        let d2 = (d * d) as f64;
        let infidelity = 1.0 - overlap.norm_sqr() / d2;
        let total = infidelity + self.guard_weight * penalty;
        let mut report = ObjectiveReport {
            infidelity,
            guard_penalty: penalty,
            total,
            iteration: 0,
            gradient_norm: f64::NAN,
        };
        if !total.is_finite() {
            return Err(Error::NonFinite { iteration: 0 });
        }
        if !want_grad {
            return Ok((report, None));
        }

        // Adjoint sweep. With X_m the state after the m-th exponential and
        // dJ = Re Σ_m Tr(A_m dX_m), the costate obeys B_m = A_m + B_{m+1} U_{m+1}
        // and exponential m contributes Re Tr(X_{m-1} B_m dU_m).
        let penalty_costate = |x: &CMatrix, weight: f64| -> CMatrix {
            // A = 2 w (Q X P)^†
            let k = 2.0 * self.guard_weight * weight;
            CMatrix::from_fn(n, n, |r, c| {
                if r < d && c >= d {
                    x[(c, r)].conj() * k
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
        };
        // Infidelity: A = -(2/d²) conj(g) P T†
        let scale = -(2.0 / d2) * overlap.conj();
        let mut b = CMatrix::from_fn(n, n, |r, c| {
            if r < d {
                self.target[(c, r)].conj() * scale
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        b += penalty_costate(&u, boundary_weight(steps));

        let mut grad = vec![0.0; self.dim()];
        let mut x = u;
        for s in (0..steps).rev() {
            let ts = s as f64 * dt;
            for stage in stage_list.iter().rev() {
                let (g, _, _) = self.model.stage_generator(&pulse, ts, dt, stage);
                let e = expm_hermitian(g, dt);
                let x_prev = e.unitary.adjoint() * &x;
                let m = &x_prev * &b;
                let (gp, gq) = self.stage_sensitivity(&e, &m, dt);
                for k in 0..2 {
                    let w = stage.weights[k];
                    if w != 0.0 {
                        pulse.accumulate_gradient(ts + stage.nodes[k] * dt, w * gp, w * gq, &mut grad);
                    }
                }
                b = &b * &e.unitary;
                x = x_prev;
            }
            if s > 0 {
                b += penalty_costate(&x, boundary_weight(s));
            }
            let _ = ns;
        }
        report.gradient_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        Ok((report, Some(grad)))
    }

    /// `(Re Tr(M ∂U/∂p), Re Tr(M ∂U/∂q))` for `U = exp(-i G dt)` via the
    /// divided-difference form of the exponential's Fréchet derivative.
    fn stage_sensitivity(&self, e: &crate::propagator::HermitianExp, m: &CMatrix, dt: f64) -> (f64, f64) {
        let v = &e.eigenvectors;
        let lam = &e.eigenvalues;
        let n = lam.len();
        let mt = v.adjoint() * m * v;
        let ph: Vec<Complex64> = lam.iter().map(|&l| Complex64::from_polar(1.0, -l * dt)).collect();
        // S^T with S_ab = mt_ba Φ_ab, stored directly as (S^T)_ba.
        let st = CMatrix::from_fn(n, n, |r, c| {
            // r = b, c = a
            let (a, bb) = (c, r);
            let diff = lam[a] - lam[bb];
            let phi = if diff.abs() > 1e-9 {
                (ph[a] - ph[bb]) / diff
            } else {
                // first-order expansion around the mean eigenvalue
                let mean = 0.5 * (lam[a] + lam[bb]);
                Complex64::new(0.0, -dt) * Complex64::from_polar(1.0, -mean * dt)
            };
            mt[(bb, a)] * phi
        });
        let k = v * st * v.adjoint();
        let tr = |h: &CMatrix| -> f64 {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..n {
                for j in 0..n {
                    acc += k[(i, j)] * h[(j, i)];
                }
            }
            acc.re
        };
        (tr(&self.model.hx), tr(&self.model.hy))
    }
}

/// Objective for a coefficient vector against the task's SWAP.
pub fn objective(coeffs: &[f64], task: &GateTask, settings: &SynthesisSettings) -> Result<ObjectiveReport> {
    Problem::from_settings(task, settings)?.objective(coeffs)
}

/// Gradient of the total objective with respect to the coefficients.
pub fn gradient(coeffs: &[f64], task: &GateTask, settings: &SynthesisSettings) -> Result<Vec<f64>> {
    Ok(Problem::from_settings(task, settings)?
        .objective_and_gradient(coeffs)?
        .1)
}

/// Result of a synthesis run.
#[derive(Debug, Clone)]
pub struct Synthesis {
    pub pulse: PulseSet,
    /// Best-so-far report per iteration, starting with the initial point.
    pub history: Vec<ObjectiveReport>,
    /// Number of objective evaluations including line-search trials.
    pub evaluations: usize,
}

impl Synthesis {
    pub fn best(&self) -> &ObjectiveReport {
        self.history.last().expect("history holds the initial point")
    }
}

/// Synthesizes a SWAP pulse by box-constrained L-BFGS from a seeded start.
pub fn synthesize(task: &GateTask, settings: &SynthesisSettings) -> Result<Synthesis> {
    let problem = Problem::from_settings(task, settings)?;
    let start = settings.initial_pulse(task)?;
    let opt = crate::lbfgs::minimize_box(
        |x| problem.objective_and_gradient(x),
        start.coeffs(),
        settings.max_amplitude,
        &settings.optimizer,
    )?;
    Ok(Synthesis {
        pulse: start.with_coeffs(&opt.x)?,
        history: opt.history,
        evaluations: opt.evaluations,
    })
}

/// Writes an optimization trace as CSV.
pub fn trace_csv(history: &[ObjectiveReport]) -> String {
    let mut out = String::from("iteration,infidelity,guard_penalty,total,gradient_norm\n");
    for r in history {
        out.push_str(&format!(
            "{},{:e},{:e},{:e},{:e}\n",
            r.iteration, r.infidelity, r.guard_penalty, r.total, r.gradient_norm
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{GateTask, OscillatorSpec};
    use crate::propagator::{propagate, PropagationSettings};
    use crate::pulses::Quadrature;
    use nalgebra::DMatrix;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn trace_fidelity_examples() {
        let x = DMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]);
        assert!((trace_fidelity(&x, &x, 2).unwrap() - 1.0).abs() < 1e-15);
        let phased = &x * Complex64::from_polar(1.0, 0.77);
        assert!((trace_fidelity(&phased, &x, 2).unwrap() - 1.0).abs() < 1e-15);
        let id = CMatrix::identity(2, 2);
        assert_eq!(trace_fidelity(&id, &x, 2).unwrap(), 0.0);
        assert!(trace_fidelity(&id, &x, 3).is_err());
    }

    #[test]
    fn guard_penalty_rabi_leakage() {
        // One essential level, one guard level, resonant drive: P_guard = sin²(Ωt).
        let tau = 30.0;
        let omega = 0.11;
        let basis = BSplineBasis::new(3, tau).unwrap();
        let mut coeffs = vec![0.0; 10];
        for v in &mut coeffs[..5] {
            *v = omega;
        }
        let pulse = PulseSet::new(basis, vec![0.0], coeffs, 1.0).unwrap();
        let settings = PropagationSettings::default().with_checkpoints(4000);
        let r = propagate(&CMatrix::zeros(2, 2), &pulse, &settings).unwrap();
        let got = guard_penalty(&r, &[1]).unwrap();
        let expect = 0.5 - (2.0 * omega * tau).sin() / (4.0 * omega * tau);
        assert!((got - expect).abs() < 1e-6, "{got} vs {expect}");
    }

    #[test]
    fn guard_penalty_edges() {
        let pulse = PulseSet::zeros(BSplineBasis::new(3, 5.0).unwrap(), vec![0.0], 1.0).unwrap();
        let spec = OscillatorSpec::new(3, 1, 1.0, 0.0).unwrap();
        let h = complexify(&h0(&spec));
        let r = propagate(&h, &pulse, &PropagationSettings::default().with_checkpoints(10)).unwrap();
        assert_eq!(guard_penalty(&r, &[3]).unwrap(), 0.0);
        // guard holding a column at all times: swap the labels
        let p = guard_penalty(&r, &[0, 1, 2]).unwrap();
        assert_eq!(p, 0.0);
        let mut full = r.clone();
        for (_, u) in &mut full.checkpoints {
            *u = DMatrix::from_fn(4, 4, |i, j| {
                if (i, j) == (3, 0) || (i, j) == (0, 3) || (i == j && i != 0 && i != 3) {
                    c(1.0)
                } else {
                    c(0.0)
                }
            });
        }
        // column 0 lives entirely in level 3 (guard); columns 1, 2 do not
        assert!((guard_penalty(&full, &[3]).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let none = PropagatorResult {
            checkpoints: vec![],
            ..r
        };
        assert!(matches!(guard_penalty(&none, &[3]), Err(Error::MissingCheckpoints(_))));
    }

    fn bench_task(k: usize, tau: f64) -> GateTask {
        GateTask::swap_from_ground(k, tau, 1, TAU * 0.22).unwrap()
    }

    #[test]
    fn zero_pulse_objective_closed_form() {
        let task = bench_task(3, 140.0);
        let settings = SynthesisSettings::default();
        let zeros = vec![0.0; settings.zero_pulse(&task).unwrap().coeffs().len()];
        let r = objective(&zeros, &task, &settings).unwrap();
        // Tr_ess(SWAP† diag(e^{-iE_k τ})) = e^{-iE_1 τ} + e^{-iE_2 τ}
        let e = |k: usize| Complex64::from_polar(1.0, -task.oscillator.energy(k) * task.duration);
        let expect = 1.0 - ((e(1) + e(2)) / 4.0).norm_sqr();
        assert!((r.infidelity - expect).abs() < 1e-9);
        assert_eq!(r.guard_penalty, 0.0);
    }

    #[test]
    fn total_is_weighted_sum() {
        let task = GateTask::swap_from_ground(2, 20.0, 1, 1.0).unwrap();
        let mut settings = SynthesisSettings {
            segments: 4,
            max_amplitude: 0.3,
            ..Default::default()
        };
        settings.optimizer.seed = 5;
        let start = SynthesisSettings {
            max_amplitude: 0.3,
            ..settings.clone()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let n = start.zero_pulse(&task).unwrap().coeffs().len();
        let coeffs: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.3..0.3)).collect();
        for w in [0.0, 1.0, 10.0] {
            settings.optimizer.guard_weight = w;
            let r = objective(&coeffs, &task, &settings).unwrap();
            assert!(r.guard_penalty > 0.0);
            assert!((r.total - (r.infidelity + w * r.guard_penalty)).abs() < 1e-15);
        }
    }

    #[test]
    fn objective_penalty_matches_checkpoint_quadrature() {
        let task = GateTask::swap_from_ground(2, 15.0, 1, 1.0).unwrap();
        let settings = SynthesisSettings {
            segments: 4,
            max_amplitude: 0.4,
            ..Default::default()
        };
        let problem = Problem::from_settings(&task, &settings).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let coeffs: Vec<f64> = (0..problem.dim()).map(|_| rng.gen_range(-0.4..0.4)).collect();
        let r = problem.objective(&coeffs).unwrap();
        let pulse = problem.template().with_coeffs(&coeffs).unwrap();
        let steps = settings.propagation.step_count(15.0, pulse.max_carrier());
        let prop = propagate(
            &complexify(&h0(&task.oscillator)),
            &pulse,
            &settings.propagation.with_checkpoints(steps),
        )
        .unwrap();
        let direct = guard_penalty(&prop, &[3]).unwrap();
        assert!((r.guard_penalty - direct).abs() < 1e-12);
        let f = trace_fidelity(&prop.final_unitary, &complexify(&swap_target(&task).unwrap()), 3).unwrap();
        assert!((r.infidelity - (1.0 - f)).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_central_differences() {
        for integrator in [
            crate::propagator::Integrator::CommutatorFree4,
            crate::propagator::Integrator::Midpoint,
        ] {
            let task = GateTask::swap_from_ground(2, 12.0, 1, 1.0).unwrap();
            let mut settings = SynthesisSettings {
                segments: 4,
                max_amplitude: 0.5,
                ..Default::default()
            };
            settings.propagation.integrator = integrator;
            let problem = Problem::from_settings(&task, &settings).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let x: Vec<f64> = (0..problem.dim()).map(|_| rng.gen_range(-0.3..0.3)).collect();
            let (_, g) = problem.objective_and_gradient(&x).unwrap();
            let h = 1e-6;
            for k in 0..problem.dim() {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[k] += h;
                xm[k] -= h;
                let fd = (problem.objective(&xp).unwrap().total - problem.objective(&xm).unwrap().total) / (2.0 * h);
                let err = (fd - g[k]).abs();
                assert!(
                    err <= 1e-8_f64.max(1e-5 * fd.abs()),
                    "coord {k}: adjoint {} fd {fd}",
                    g[k]
                );
            }
        }
    }

    #[test]
    fn zero_frequency_quadrature_gradient_vanishes_at_zero() {
        let task = GateTask::swap_from_ground(3, 30.0, 1, 1.0).unwrap();
        let settings = SynthesisSettings {
            segments: 5,
            ..Default::default()
        };
        let problem = Problem::from_settings(&task, &settings).unwrap();
        let zeros = vec![0.0; problem.dim()];
        let (_, g) = problem.objective_and_gradient(&zeros).unwrap();
        let nb = problem.template().basis().len();
        for j in 0..nb {
            let k = problem.template().index(0, Quadrature::Quadrature, j);
            assert!(g[k].abs() < 1e-12);
        }
    }

    #[test]
    fn zero_iterations_returns_start() {
        let task = GateTask::swap_from_ground(2, 10.0, 1, 1.0).unwrap();
        let mut settings = SynthesisSettings {
            segments: 3,
            ..Default::default()
        };
        settings.optimizer.max_iterations = 0;
        let s = synthesize(&task, &settings).unwrap();
        assert_eq!(s.pulse.coeffs(), settings.initial_pulse(&task).unwrap().coeffs());
        assert_eq!(s.history.len(), 1);
    }

    #[test]
    fn trace_csv_header() {
        let csv = trace_csv(&[ObjectiveReport {
            infidelity: 0.5,
            guard_penalty: 0.1,
            total: 0.6,
            iteration: 0,
            gradient_norm: 1.0,
        }]);
        assert!(csv.starts_with("iteration,infidelity,guard_penalty,total,gradient_norm\n0,"));
    }
}
