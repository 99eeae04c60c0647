//! Fidelity decay of a fixed pulse under a spectator-induced shift `ε`.
//!
//! Two routes are provided: full simulation of the shifted propagator, and a
//! second-order predictor built from the time average of the interaction-picture
//! shift operator `Ṽ(t) = U₀†(t) V U₀(t)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{h0, h_eff, shift_operator, GateTask};
use crate::propagator::{complexify, propagate, CMatrix, PropagationSettings, PropagatorResult};
use crate::pulses::PulseSet;

/// Default number of checkpoint intervals for `V̄` and `Γ`.
pub const DEFAULT_CHECKPOINTS: usize = 2000;

/// Simulated and predicted infidelity at one shift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub eps_over_xi: f64,
    pub simulated_infidelity: f64,
    pub predicted_infidelity: f64,
    /// Coefficient of `ε²` (ns²) in the predicted infidelity.
    pub susceptibility: f64,
}

/// How the trace terms of the second-order predictor are normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceNormalization {
    /// `Tr(V̄²)/d - (Tr V̄ / d)²`: variance of `V̄` in the maximally mixed
    /// essential state. This is the exact `ε²` coefficient of `1 - F`.
    #[default]
    MaximallyMixedVariance,
    /// `[Tr(V̄²) - Tr²(V̄)] / d²`, both traces scaled by `d²`.
    DSquared,
}

/// `U₀† U_eff`.
pub fn rotating_frame_propagator(u0: &CMatrix, u_eff: &CMatrix) -> Result<CMatrix> {
    if u0.shape() != u_eff.shape() || u0.nrows() != u0.ncols() {
        return Err(Error::DimensionMismatch {
            expected: u0.nrows(),
            got: u_eff.nrows(),
        });
    }
    Ok(u0.adjoint() * u_eff)
}

/// `|Tr_ess(U_rot)/d|²` clamped into `[0, 1]`.
fn essential_trace_fidelity(u_rot: &CMatrix, d: usize) -> f64 {
    let mut tr = Complex64::new(0.0, 0.0);
    for k in 0..d {
        tr += u_rot[(k, k)];
    }
    (tr / d as f64).norm_sqr().clamp(0.0, 1.0)
}

/// Fidelity between the unshifted and the `ε`-shifted evolution under the
/// same pulse and settings.
pub fn shifted_gate_fidelity(
    pulse: &PulseSet,
    task: &GateTask,
    eps: f64,
    settings: &PropagationSettings,
) -> Result<f64> {
    ShiftEvaluator::new(pulse, task, settings)?.fidelity(eps)
}

/// Caches the unshifted reference propagator of one gate.
#[derive(Debug, Clone)]
pub struct ShiftEvaluator {
    pulse: PulseSet,
    task: GateTask,
    settings: PropagationSettings,
    u0: CMatrix,
    target: CMatrix,
}

impl ShiftEvaluator {
    pub fn new(pulse: &PulseSet, task: &GateTask, settings: &PropagationSettings) -> Result<Self> {
        task.validate()?;
        let u0 = propagate(&complexify(&h0(&task.oscillator)), pulse, settings)?.final_unitary;
        let target = complexify(&crate::operators::swap_target(task)?);
        Ok(Self {
            pulse: pulse.clone(),
            task: *task,
            settings: *settings,
            u0,
            target,
        })
    }

    pub fn task(&self) -> &GateTask {
        &self.task
    }

    pub fn reference(&self) -> &CMatrix {
        &self.u0
    }

    fn shifted(&self, eps: f64) -> Result<CMatrix> {
        let h = complexify(&h_eff(&self.task.oscillator, eps));
        Ok(propagate(&h, &self.pulse, &self.settings)?.final_unitary)
    }

    /// `|Tr_ess(U₀†U_eff)/d|²`.
    pub fn fidelity(&self, eps: f64) -> Result<f64> {
        let u_rot = rotating_frame_propagator(&self.u0, &self.shifted(eps)?)?;
        Ok(essential_trace_fidelity(&u_rot, self.task.essential_levels()))
    }

    pub fn infidelity(&self, eps: f64) -> Result<f64> {
        Ok(1.0 - self.fidelity(eps)?)
    }

    /// Infidelity of the shifted evolution against the ideal SWAP, which
    /// includes the synthesis floor at `ε = 0`.
    pub fn target_infidelity(&self, eps: f64) -> Result<f64> {
        let u = self.shifted(eps)?;
        let f = crate::control::trace_fidelity(&u, &self.target, self.task.essential_levels())?;
        Ok((1.0 - f).clamp(0.0, 1.0))
    }
}

/// `Ṽ(t) = U₀†(t) V U₀(t)` for every checkpoint of an unshifted propagation.
pub fn v_tilde(u0: &PropagatorResult, n: usize) -> Result<Vec<(f64, CMatrix)>> {
    if u0.checkpoints.is_empty() {
        return Err(Error::MissingCheckpoints("Ṽ(t) needs the checkpoints of U₀(t)".into()));
    }
    let v = complexify(&shift_operator(n)?);
    u0.checkpoints
        .iter()
        .map(|(t, u)| {
            if u.nrows() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: u.nrows(),
                });
            }
            Ok((*t, u.adjoint() * &v * u))
        })
        .collect()
}

fn check_series(series: &[(f64, CMatrix)], tau: f64) -> Result<()> {
    if series.len() < 2 {
        return Err(Error::MissingCheckpoints(format!(
            "need at least 2 samples, got {}",
            series.len()
        )));
    }
    if !(tau > 0.0) {
        return Err(Error::InvalidPulse(format!("duration must be positive, got {tau}")));
    }
    Ok(())
}

/// Time average `V̄ = (1/τ) ∫₀^τ Ṽ dt` by the trapezoidal rule.
pub fn v_bar(series: &[(f64, CMatrix)], tau: f64) -> Result<CMatrix> {
    check_series(series, tau)?;
    let n = series[0].1.nrows();
    let mut acc = CMatrix::zeros(n, n);
    for w in series.windows(2) {
        let h = 0.5 * (w[1].0 - w[0].0);
        acc += (&w[0].1 + &w[1].1) * Complex64::new(h, 0.0);
    }
    Ok(acc / Complex64::new(tau, 0.0))
}

/// `Γ(τ) = i ∫₀^τ dt' ∫_{t'}^τ dt'' [Ṽ(t'), Ṽ(t'')]` by nested trapezoidal
/// quadrature (the inner integral is accumulated backwards from `τ`).
pub fn gamma(series: &[(f64, CMatrix)], tau: f64) -> Result<CMatrix> {
    check_series(series, tau)?;
    let n = series[0].1.nrows();
    let m = series.len();
    // tail[k] = ∫_{t_k}^{τ} Ṽ
    let mut tail = vec![CMatrix::zeros(n, n); m];
    for k in (0..m - 1).rev() {
        let h = 0.5 * (series[k + 1].0 - series[k].0);
        tail[k] = &tail[k + 1] + (&series[k].1 + &series[k + 1].1) * Complex64::new(h, 0.0);
    }
    let integrand = |k: usize| -> CMatrix {
        let v = &series[k].1;
        v * &tail[k] - &tail[k] * v
    };
    let mut acc = CMatrix::zeros(n, n);
    let mut prev = integrand(0);
    for k in 0..m - 1 {
        let next = integrand(k + 1);
        let h = 0.5 * (series[k + 1].0 - series[k].0);
        acc += (&prev + &next) * Complex64::new(h, 0.0);
        prev = next;
    }
    Ok(acc * Complex64::new(0.0, 1.0))
}

/// Coefficient of `ε²` in the second-order infidelity. Traces run over the
/// essential levels; `Tr_ess(V̄²)` is taken of the full product so that
/// excursions through guard levels are kept.
pub fn fidelity_susceptibility(v_bar: &CMatrix, tau: f64, d: usize, norm: TraceNormalization) -> Result<f64> {
    if d == 0 {
        return Err(Error::InvalidDimension("essential dimension must be positive".into()));
    }
    if d > v_bar.nrows() {
        return Err(Error::InvalidDimension(format!(
            "essential dimension {d} exceeds {}",
            v_bar.nrows()
        )));
    }
    let sq = v_bar * v_bar;
    let tr: f64 = (0..d).map(|k| v_bar[(k, k)].re).sum();
    let tr2: f64 = (0..d).map(|k| sq[(k, k)].re).sum();
    let df = d as f64;
    let coeff = match norm {
        TraceNormalization::MaximallyMixedVariance => tr2 / df - (tr / df).powi(2),
        TraceNormalization::DSquared => (tr2 - tr * tr) / (df * df),
    };
    Ok(coeff * tau * tau)
}

/// Second-order predicted infidelity `χ ε²`.
pub fn perturbative_infidelity(v_bar: &CMatrix, tau: f64, d: usize, eps: f64, norm: TraceNormalization) -> Result<f64> {
    Ok(fidelity_susceptibility(v_bar, tau, d, norm)? * eps * eps)
}

/// Both decay routes for one synthesized gate.
#[derive(Debug, Clone)]
pub struct DecayAnalyzer {
    evaluator: ShiftEvaluator,
    v_bar: CMatrix,
    susceptibility: f64,
    norm: TraceNormalization,
}

impl DecayAnalyzer {
    pub fn new(
        pulse: &PulseSet,
        task: &GateTask,
        settings: &PropagationSettings,
        checkpoints: usize,
        norm: TraceNormalization,
    ) -> Result<Self> {
        let evaluator = ShiftEvaluator::new(pulse, task, settings)?;
        let traced = propagate(
            &complexify(&h0(&task.oscillator)),
            pulse,
            &settings.with_checkpoints(checkpoints.max(1)),
        )?;
        let series = v_tilde(&traced, task.levels())?;
        let v_bar = v_bar(&series, task.duration)?;
        let susceptibility = fidelity_susceptibility(&v_bar, task.duration, task.essential_levels(), norm)?;
        Ok(Self {
            evaluator,
            v_bar,
            susceptibility,
            norm,
        })
    }

    pub fn v_bar(&self) -> &CMatrix {
        &self.v_bar
    }

    pub fn susceptibility(&self) -> f64 {
        self.susceptibility
    }

    pub fn normalization(&self) -> TraceNormalization {
        self.norm
    }

    pub fn evaluator(&self) -> &ShiftEvaluator {
        &self.evaluator
    }

    pub fn report(&self, eps_over_xi: f64) -> Result<DecayReport> {
        let xi = self.evaluator.task.oscillator.self_kerr;
        let eps = eps_over_xi * xi;
        Ok(DecayReport {
            eps_over_xi,
            simulated_infidelity: self.evaluator.infidelity(eps)?,
            predicted_infidelity: self.susceptibility * eps * eps,
            susceptibility: self.susceptibility,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::OscillatorSpec;
    use crate::pulses::BSplineBasis;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn max_abs(m: &CMatrix) -> f64 {
        m.iter().fold(0.0, |a, z| a.max(z.norm()))
    }

    fn random_unitary(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
        let h = CMatrix::from_fn(n, n, |_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let h = &h + h.adjoint();
        crate::propagator::expm_hermitian(h, 0.7).unitary
    }

    fn small_task() -> (GateTask, PulseSet) {
        let task = GateTask::swap_from_ground(2, 20.0, 1, 1.0).unwrap();
        let basis = BSplineBasis::new(4, 20.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let coeffs = (0..2 * 2 * basis.len()).map(|_| rng.gen_range(-0.2..0.2)).collect();
        (task, PulseSet::new(basis, vec![0.0, -1.0], coeffs, 0.2).unwrap())
    }

    #[test]
    fn rotating_frame_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = random_unitary(4, &mut rng);
        let r = rotating_frame_propagator(&u, &u).unwrap();
        assert!(max_abs(&(r - CMatrix::identity(4, 4))) < 1e-12);
        let w = random_unitary(4, &mut rng);
        let r = rotating_frame_propagator(&u, &w).unwrap();
        assert!(crate::propagator::unitarity_defect(&r) < 1e-12);
        let phase = Complex64::from_polar(1.0, 0.4);
        let r = rotating_frame_propagator(&u, &(&u * phase)).unwrap();
        assert!(max_abs(&(r - CMatrix::identity(4, 4) * phase)) < 1e-12);
        assert!(rotating_frame_propagator(&u, &CMatrix::identity(3, 3)).is_err());
    }

    #[test]
    fn zero_shift_fidelity_is_one() {
        let (task, pulse) = small_task();
        let f = shifted_gate_fidelity(&pulse, &task, 0.0, &PropagationSettings::default()).unwrap();
        assert!((f - 1.0).abs() < 1e-12);
    }

    #[test]
    fn v_tilde_properties() {
        let (task, pulse) = small_task();
        let r = propagate(
            &complexify(&h0(&task.oscillator)),
            &pulse,
            &PropagationSettings::default().with_checkpoints(50),
        )
        .unwrap();
        let series = v_tilde(&r, 4).unwrap();
        let v = complexify(&shift_operator(4).unwrap());
        assert!(max_abs(&(&series[0].1 - &v)) == 0.0);
        for (_, vt) in &series {
            assert!((vt.trace() - v.trace()).norm() < 1e-9);
            assert!(max_abs(&(vt - vt.adjoint())) < 1e-12);
        }
        let no_cp = PropagatorResult {
            checkpoints: vec![],
            ..r
        };
        assert!(matches!(v_tilde(&no_cp, 4), Err(Error::MissingCheckpoints(_))));
    }

    #[test]
    fn zero_pulse_series_is_constant() {
        let spec = OscillatorSpec::new(3, 1, 1.0, 0.0).unwrap();
        let pulse = PulseSet::zeros(BSplineBasis::new(3, 10.0).unwrap(), vec![0.0], 0.1).unwrap();
        let r = propagate(
            &complexify(&h0(&spec)),
            &pulse,
            &PropagationSettings::default().with_checkpoints(20),
        )
        .unwrap();
        let series = v_tilde(&r, 4).unwrap();
        let v = complexify(&shift_operator(4).unwrap());
        for (_, vt) in &series {
            assert!(max_abs(&(vt - &v)) < 1e-12);
        }
        let vb = v_bar(&series, 10.0).unwrap();
        assert!(max_abs(&(&vb - &v)) < 1e-12);
        let g = gamma(&series, 10.0).unwrap();
        assert!(max_abs(&g) < 1e-12);
    }

    #[test]
    fn v_bar_trace_and_errors() {
        let (task, pulse) = small_task();
        let r = propagate(
            &complexify(&h0(&task.oscillator)),
            &pulse,
            &PropagationSettings::default().with_checkpoints(400),
        )
        .unwrap();
        let series = v_tilde(&r, 4).unwrap();
        let vb = v_bar(&series, 20.0).unwrap();
        assert!((vb.trace().re + 6.0).abs() < 1e-10);
        assert!(max_abs(&(&vb - vb.adjoint())) < 1e-12);
        assert!(v_bar(&series[..1], 20.0).is_err());
        assert!(gamma(&series[..1], 20.0).is_err());
    }

    #[test]
    fn gamma_piecewise_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let herm = |rng: &mut ChaCha8Rng| {
            let h = CMatrix::from_fn(3, 3, |_, _| {
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            });
            &h + h.adjoint()
        };
        let a = herm(&mut rng);
        let b = herm(&mut rng);
        let tau = 2.0;
        let m = 4000;
        // Sample A on [0, τ/2) and B on [τ/2, τ]; the jump costs O(h).
        let series: Vec<(f64, CMatrix)> = (0..=m)
            .map(|k| {
                let t = tau * k as f64 / m as f64;
                (t, if t < tau / 2.0 { a.clone() } else { b.clone() })
            })
            .collect();
        let g = gamma(&series, tau).unwrap();
        let expect = (&a * &b - &b * &a) * Complex64::new(0.0, tau * tau / 4.0);
        assert!(max_abs(&(&g - &expect)) < 1e-2 * max_abs(&expect));
        assert!(max_abs(&(&g - g.adjoint())) < 1e-12);
    }

    #[test]
    fn gamma_refinement_agrees() {
        let (task, pulse) = small_task();
        let h = complexify(&h0(&task.oscillator));
        let coarse = propagate(&h, &pulse, &PropagationSettings::default().with_checkpoints(2000)).unwrap();
        let fine = propagate(&h, &pulse, &PropagationSettings::default().with_checkpoints(4000)).unwrap();
        let sc = v_tilde(&coarse, 4).unwrap();
        let sf = v_tilde(&fine, 4).unwrap();
        let gc = gamma(&sc, 20.0).unwrap();
        let gf = gamma(&sf, 20.0).unwrap();
        assert!(max_abs(&(&gc - &gf)) < 1e-6 * max_abs(&gf));
        assert!(max_abs(&(&gf - gf.adjoint())) < 1e-8 * max_abs(&gf));
        let vc = v_bar(&sc, 20.0).unwrap();
        let vf = v_bar(&sf, 20.0).unwrap();
        // strongly driven 20 ns pulse; synthesized gates are checked at 1e-8
        assert!(max_abs(&(&vc - &vf)) < 1e-7);
    }

    #[test]
    fn susceptibility_conventions() {
        let vb = complexify(&shift_operator(2).unwrap());
        // d = 2, V̄ = -n̂: Tr(V̄²) = 1, Tr²(V̄) = 1
        assert_eq!(
            perturbative_infidelity(&vb, 1.0, 2, 0.3, TraceNormalization::DSquared).unwrap(),
            0.0
        );
        let var = perturbative_infidelity(&vb, 1.0, 2, 0.3, TraceNormalization::MaximallyMixedVariance).unwrap();
        assert!((var - 0.25 * 0.09).abs() < 1e-15);
        assert_eq!(
            perturbative_infidelity(&vb, 1.0, 2, 0.0, TraceNormalization::default()).unwrap(),
            0.0
        );
        let prop = CMatrix::identity(3, 3) * Complex64::new(-1.7, 0.0);
        assert!(
            fidelity_susceptibility(&prop, 5.0, 3, TraceNormalization::default())
                .unwrap()
                .abs()
                < 1e-12
        );
        assert!(fidelity_susceptibility(&vb, 1.0, 0, TraceNormalization::default()).is_err());
    }

    #[test]
    fn predictor_tracks_simulation_at_small_shift() {
        let (task, pulse) = small_task();
        let analyzer = DecayAnalyzer::new(
            &pulse,
            &task,
            &PropagationSettings::default(),
            2000,
            TraceNormalization::default(),
        )
        .unwrap();
        let r = analyzer.report(1e-4).unwrap();
        assert!(r.simulated_infidelity > 0.0);
        let rel = (r.predicted_infidelity - r.simulated_infidelity).abs() / r.simulated_infidelity;
        assert!(rel < 1e-2, "{r:?}");
    }
}
