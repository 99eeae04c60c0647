//! Quadratic B-spline control envelopes mixed onto carrier waves.
//!
//! Each carrier `Ω_f` carries two spline curves, an in-phase curve `A_f(t)`
//! and a quadrature curve `B_f(t)`. The lab-frame-free control functions are
//!
//! ```text
//! p(t) = Σ_f A_f(t) cos(Ω_f t) + B_f(t) sin(Ω_f t)
//! q(t) = Σ_f B_f(t) cos(Ω_f t) - A_f(t) sin(Ω_f t)
//! ```
//!
//! and the drive is `H_d = p (a + a†) + q i(a† - a)`, which puts a carrier at
//! `E_{k+1} - E_k` on resonance with the `k → k+1` transition of `H₀`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{ghz_to_rad_per_ns, transition_frequency, GateTask};

pub const SPLINE_DEGREE: usize = 2;

/// Uniform clamped quadratic B-spline basis on `[0, τ]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BSplineBasis {
    segments: usize,
    duration: f64,
}

impl BSplineBasis {
    pub fn new(segments: usize, duration: f64) -> Result<Self> {
        if segments == 0 {
            return Err(Error::InvalidPulse("spline needs at least one segment".into()));
        }
        if !(duration.is_finite() && duration > 0.0) {
            return Err(Error::InvalidPulse(format!(
                "spline duration must be positive, got {duration}"
            )));
        }
        Ok(Self { segments, duration })
    }

    pub fn segments(&self) -> usize {
        self.segments
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    /// Number of basis functions, `D + 2`.
    pub fn len(&self) -> usize {
        self.segments + SPLINE_DEGREE
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Full clamped knot vector (`D + 5` entries).
    pub fn knots(&self) -> Vec<f64> {
        let d = self.segments;
        let h = self.duration / d as f64;
        let mut k = vec![0.0; SPLINE_DEGREE + 1];
        k.extend((1..d).map(|i| i as f64 * h));
        k.extend(std::iter::repeat(self.duration).take(SPLINE_DEGREE + 1));
        k
    }

    /// Index of the first non-zero basis function at `t` and the three
    /// non-zero values. `t` must lie in `[0, τ]`.
    pub fn eval_local(&self, t: f64) -> Result<(usize, [f64; 3])> {
        if !(0.0..=self.duration).contains(&t) {
            return Err(Error::Domain {
                t,
                duration: self.duration,
            });
        }
        Ok(self.eval_local_unchecked(t))
    }

    pub(crate) fn eval_local_unchecked(&self, t: f64) -> (usize, [f64; 3]) {
        let d = self.segments;
        let h = self.duration / d as f64;
        let span = ((t / h).floor() as usize).min(d - 1);
        // Knot index mu with knots[mu] <= t < knots[mu + 1].
        let mu = span + SPLINE_DEGREE;
        let knot = |i: usize| -> f64 {
            if i <= SPLINE_DEGREE {
                0.0
            } else if i >= d + SPLINE_DEGREE {
                self.duration
            } else {
                (i - SPLINE_DEGREE) as f64 * h
            }
        };
        // Cox-de Boor triangle for the p + 1 non-zero functions.
        let mut n = [1.0, 0.0, 0.0];
        let mut left = [0.0; 3];
        let mut right = [0.0; 3];
        for j in 1..=SPLINE_DEGREE {
            left[j] = t - knot(mu + 1 - j);
            right[j] = knot(mu + j) - t;
            let mut saved = 0.0;
            for r in 0..j {
                let denom = right[r + 1] + left[j - r];
                let temp = if denom == 0.0 { 0.0 } else { n[r] / denom };
                n[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            n[j] = saved;
        }
        (mu - SPLINE_DEGREE, n)
    }
}

/// All basis-function values at `t`.
pub fn basis_eval(basis: &BSplineBasis, t: f64) -> Result<Vec<f64>> {
    let (first, vals) = basis.eval_local(t)?;
    let mut out = vec![0.0; basis.len()];
    out[first..first + 3].copy_from_slice(&vals);
    Ok(out)
}

/// Refines a coefficient vector from `D` to `2D` segments by inserting every
/// segment midpoint (Boehm knot insertion). The spline curve is unchanged.
pub fn refine_coefficients(basis: &BSplineBasis, coeffs: &[f64]) -> Result<(BSplineBasis, Vec<f64>)> {
    if coeffs.len() != basis.len() {
        return Err(Error::DimensionMismatch {
            expected: basis.len(),
            got: coeffs.len(),
        });
    }
    let p = SPLINE_DEGREE;
    let mut knots = basis.knots();
    let mut ctrl = coeffs.to_vec();
    let h = basis.duration / basis.segments as f64;
    for s in 0..basis.segments {
        let u = (s as f64 + 0.5) * h;
        // k: last index with knots[k] <= u
        let k = knots.iter().rposition(|&x| x <= u).expect("u >= 0");
        let mut next = Vec::with_capacity(ctrl.len() + 1);
        for i in 0..=ctrl.len() {
            let q = if i + p <= k {
                ctrl[i]
            } else if i > k {
                ctrl[i - 1]
            } else {
                let alpha = (u - knots[i]) / (knots[i + p] - knots[i]);
                (1.0 - alpha) * ctrl[i - 1] + alpha * ctrl[i]
            };
            next.push(q);
        }
        knots.insert(k + 1, u);
        ctrl = next;
    }
    Ok((BSplineBasis::new(2 * basis.segments, basis.duration)?, ctrl))
}

/// Which spline curve of a carrier a coefficient belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quadrature {
    InPhase,
    Quadrature,
}

/// B-spline coefficients, carriers and amplitude bound of a control pulse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSet {
    basis: BSplineBasis,
    carriers: Vec<f64>,
    coeffs: Vec<f64>,
    max_amplitude: f64,
}

impl PulseSet {
    /// Coefficients are clamped into `[-max_amplitude, max_amplitude]`.
    pub fn new(basis: BSplineBasis, carriers: Vec<f64>, coeffs: Vec<f64>, max_amplitude: f64) -> Result<Self> {
        if carriers.is_empty() {
            return Err(Error::InvalidPulse("at least one carrier required".into()));
        }
        if !(max_amplitude.is_finite() && max_amplitude > 0.0) {
            return Err(Error::InvalidPulse(format!(
                "max amplitude must be positive, got {max_amplitude}"
            )));
        }
        if carriers.iter().chain(coeffs.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidPulse("non-finite carrier or coefficient".into()));
        }
        let expected = 2 * carriers.len() * basis.len();
        if coeffs.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: coeffs.len(),
            });
        }
        let mut pulse = Self {
            basis,
            carriers,
            coeffs,
            max_amplitude,
        };
        pulse.clamp();
        Ok(pulse)
    }

    pub fn zeros(basis: BSplineBasis, carriers: Vec<f64>, max_amplitude: f64) -> Result<Self> {
        let len = 2 * carriers.len() * basis.len();
        Self::new(basis, carriers, vec![0.0; len], max_amplitude)
    }

    pub fn basis(&self) -> &BSplineBasis {
        &self.basis
    }

    pub fn carriers(&self) -> &[f64] {
        &self.carriers
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn max_amplitude(&self) -> f64 {
        self.max_amplitude
    }

    pub fn duration(&self) -> f64 {
        self.basis.duration
    }

    /// Replaces the coefficients, clamping into the amplitude box.
    pub fn with_coeffs(&self, coeffs: &[f64]) -> Result<Self> {
        Self::new(self.basis, self.carriers.clone(), coeffs.to_vec(), self.max_amplitude)
    }

    /// Flat index of a coefficient.
    pub fn index(&self, carrier: usize, curve: Quadrature, j: usize) -> usize {
        let c = match curve {
            Quadrature::InPhase => 0,
            Quadrature::Quadrature => 1,
        };
        (2 * carrier + c) * self.basis.len() + j
    }

    fn clamp(&mut self) {
        let c = self.max_amplitude;
        for x in &mut self.coeffs {
            *x = x.clamp(-c, c);
        }
    }

    /// Largest carrier magnitude in rad/ns.
    pub fn max_carrier(&self) -> f64 {
        self.carriers.iter().fold(0.0, |m, w| m.max(w.abs()))
    }

    pub(crate) fn envelope_unchecked(&self, t: f64) -> (f64, f64) {
        let (first, vals) = self.basis.eval_local_unchecked(t);
        let nb = self.basis.len();
        let (mut p, mut q) = (0.0, 0.0);
        for (f, &w) in self.carriers.iter().enumerate() {
            let base_a = 2 * f * nb + first;
            let base_b = base_a + nb;
            let mut a = 0.0;
            let mut b = 0.0;
            for m in 0..3 {
                a += vals[m] * self.coeffs[base_a + m];
                b += vals[m] * self.coeffs[base_b + m];
            }
            let (s, c) = (w * t).sin_cos();
            p += a * c + b * s;
            q += b * c - a * s;
        }
        (p, q)
    }

    /// Accumulates `gp · ∂p/∂θ + gq · ∂q/∂θ` at time `t` into `grad`.
    pub(crate) fn accumulate_gradient(&self, t: f64, gp: f64, gq: f64, grad: &mut [f64]) {
        let (first, vals) = self.basis.eval_local_unchecked(t);
        let nb = self.basis.len();
        for (f, &w) in self.carriers.iter().enumerate() {
            let (s, c) = (w * t).sin_cos();
            // dp/dA = c, dq/dA = -s ; dp/dB = s, dq/dB = c
            let ga = gp * c - gq * s;
            let gb = gp * s + gq * c;
            let base_a = 2 * f * nb + first;
            let base_b = base_a + nb;
            for m in 0..3 {
                grad[base_a + m] += vals[m] * ga;
                grad[base_b + m] += vals[m] * gb;
            }
        }
    }
}

/// Control functions `(p(t), q(t))` in rad/ns.
pub fn envelope(pulse: &PulseSet, t: f64) -> Result<(f64, f64)> {
    pulse.basis.eval_local(t)?;
    Ok(pulse.envelope_unchecked(t))
}

/// `a + a†` on `n` levels.
pub fn drive_x(n: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(n, n, |r, c| {
        if c == r + 1 {
            Complex64::new((c as f64).sqrt(), 0.0)
        } else if r == c + 1 {
            Complex64::new((r as f64).sqrt(), 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// `i(a† - a)` on `n` levels.
pub fn drive_y(n: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(n, n, |r, c| {
        if c == r + 1 {
            Complex64::new(0.0, -(c as f64).sqrt())
        } else if r == c + 1 {
            Complex64::new(0.0, (r as f64).sqrt())
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// Drive Hamiltonian `p(t)(a + a†) + q(t) i(a† - a)`.
pub fn drive_hamiltonian(pulse: &PulseSet, t: f64, n: usize) -> Result<DMatrix<Complex64>> {
    if n < 2 {
        return Err(Error::InvalidDimension(format!("drive needs N >= 2, got {n}")));
    }
    let (p, q) = envelope(pulse, t)?;
    Ok(drive_x(n) * Complex64::new(p, 0.0) + drive_y(n) * Complex64::new(q, 0.0))
}

/// Adjacent-level transition frequencies `E_{k+1} - E_k` of the essential
/// subspace, duplicates removed, in ascending level order.
pub fn default_carriers(task: &GateTask) -> Result<Vec<f64>> {
    let spec = &task.oscillator;
    let mut out: Vec<f64> = Vec::new();
    for k in 0..spec.essential_levels - 1 {
        let w = transition_frequency(k + 1, k, spec)?;
        if !out.iter().any(|&x| x == w) {
            out.push(w);
        }
    }
    Ok(out)
}

/// Version tag written into every pulse file.
pub const PULSE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisRecord {
    pub segments: usize,
    pub duration_ns: f64,
}

/// On-disk pulse document. Carriers and the amplitude bound are in GHz,
/// `coeffs` in rad/ns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseFile {
    pub format_version: u32,
    pub basis: BasisRecord,
    pub carriers_ghz: Vec<f64>,
    pub coeffs: Vec<f64>,
    pub max_amplitude_ghz: f64,
    /// Gate the pulse was synthesized for.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<TaskRecord>,
    /// Hash of the oscillator spec the pulse was built against.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oscillator_hash: Option<String>,
    /// Hash of the full run configuration that produced the file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    /// Final gate infidelity reported by the optimizer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub infidelity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub swap_from: usize,
    pub swap_to: usize,
    pub duration_ns: f64,
    pub essential_levels: usize,
    pub guard_levels: usize,
    pub self_kerr_ghz: f64,
    pub rotation_ghz: f64,
}

impl TaskRecord {
    pub fn from_task(task: &GateTask) -> Self {
        let o = &task.oscillator;
        Self {
            swap_from: task.swap_from,
            swap_to: task.swap_to,
            duration_ns: task.duration,
            essential_levels: o.essential_levels,
            guard_levels: o.guard_levels,
            self_kerr_ghz: crate::operators::rad_per_ns_to_ghz(o.self_kerr),
            rotation_ghz: crate::operators::rad_per_ns_to_ghz(o.rotation_freq),
        }
    }

    pub fn to_task(&self) -> Result<GateTask> {
        let osc = crate::operators::OscillatorSpec::from_ghz(
            self.essential_levels,
            self.guard_levels,
            self.self_kerr_ghz,
            self.rotation_ghz,
        )?;
        GateTask::new(self.swap_from, self.swap_to, self.duration_ns, osc)
    }
}

impl PulseFile {
    pub fn from_pulse(pulse: &PulseSet) -> Self {
        Self {
            format_version: PULSE_FORMAT_VERSION,
            basis: BasisRecord {
                segments: pulse.basis.segments,
                duration_ns: pulse.basis.duration,
            },
            carriers_ghz: pulse
                .carriers
                .iter()
                .map(|&w| crate::operators::rad_per_ns_to_ghz(w))
                .collect(),
            coeffs: pulse.coeffs.clone(),
            max_amplitude_ghz: crate::operators::rad_per_ns_to_ghz(pulse.max_amplitude),
            task: None,
            oscillator_hash: None,
            config_hash: None,
            infidelity: None,
        }
    }

    pub fn to_pulse(&self) -> Result<PulseSet> {
        if self.format_version != PULSE_FORMAT_VERSION {
            return Err(Error::InvalidPulse(format!(
                "unsupported pulse format version {} (expected {PULSE_FORMAT_VERSION})",
                self.format_version
            )));
        }
        let basis = BSplineBasis::new(self.basis.segments, self.basis.duration_ns)?;
        PulseSet::new(
            basis,
            self.carriers_ghz.iter().map(|&f| ghz_to_rad_per_ns(f)).collect(),
            self.coeffs.clone(),
            ghz_to_rad_per_ns(self.max_amplitude_ghz),
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}
