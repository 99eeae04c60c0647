//! Projected limited-memory BFGS on a symmetric box `[-bound, bound]^n`.
//!
//! Variables sitting on a bound with the gradient pushing outward are frozen
//! for the two-loop recursion; trial points are projected back into the box
//! and accepted under an Armijo condition along the projected path.

use std::collections::VecDeque;

use crate::control::{ObjectiveReport, OptimizerSettings};
use crate::error::{Error, Result};

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 30;

#[derive(Debug, Clone)]
pub struct BoxOptimum {
    pub x: Vec<f64>,
    /// Best-so-far report per accepted iteration (index 0 is the start).
    pub history: Vec<ObjectiveReport>,
    pub evaluations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn project(x: &mut [f64], bound: f64) {
    for v in x {
        *v = v.clamp(-bound, bound);
    }
}

/// Gradient with components that would leave the box zeroed.
fn projected_gradient(x: &[f64], g: &[f64], bound: f64) -> Vec<f64> {
    x.iter()
        .zip(g)
        .map(|(&xi, &gi)| {
            if (xi >= bound && gi < 0.0) || (xi <= -bound && gi > 0.0) {
                0.0
            } else {
                gi
            }
        })
        .collect()
}

/// Minimizes `f` (returning the report and gradient of `report.total`) over
/// the box, for at most `settings.max_iterations` accepted steps.
pub fn minimize_box<F>(mut f: F, x0: &[f64], bound: f64, settings: &OptimizerSettings) -> Result<BoxOptimum>
where
    F: FnMut(&[f64]) -> Result<(ObjectiveReport, Vec<f64>)>,
{
    let mut x = x0.to_vec();
    project(&mut x, bound);
    let (mut rep, mut g) = f(&x)?;
    let mut evaluations = 1;
    if !rep.total.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { iteration: 0 });
    }
    let mut pg = projected_gradient(&x, &g, bound);
    rep.gradient_norm = dot(&pg, &pg).sqrt();
    rep.iteration = 0;
    let mut history = vec![rep];
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();

    for iter in 1..=settings.max_iterations {
        let pg_inf = pg.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if pg_inf < settings.convergence_tol {
            break;
        }
        let free: Vec<bool> = pg.iter().zip(&g).map(|(p, gi)| *p != 0.0 || *gi == 0.0).collect();

        let mut accepted = None;
        for attempt in 0..2 {
            let use_memory = attempt == 0 && !pairs.is_empty();
            let mut dir = if use_memory {
                two_loop(&pg, &pairs, &free)
            } else {
                // Steepest descent sized to move the largest coefficient by a
                // tenth of the box.
                let scale = 0.1 * bound / pg_inf;
                pg.iter().map(|v| -v * scale).collect()
            };
            for (d, fr) in dir.iter_mut().zip(&free) {
                if !fr {
                    *d = 0.0;
                }
            }
            if dot(&dir, &pg) >= 0.0 {
                continue;
            }
            let mut alpha = 1.0;
            for _ in 0..MAX_BACKTRACKS {
                let mut trial: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + alpha * b).collect();
                project(&mut trial, bound);
                let step: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
                let decrease = dot(&g, &step);
                if decrease >= 0.0 {
                    alpha *= 0.5;
                    continue;
                }
                let (trep, tg) = f(&trial)?;
                evaluations += 1;
                if !trep.total.is_finite() || tg.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite { iteration: iter });
                }
                if trep.total <= rep.total + ARMIJO * decrease {
                    accepted = Some((trial, step, trep, tg));
                    break;
                }
                alpha *= 0.5;
            }
            if accepted.is_some() {
                break;
            }
            pairs.clear();
        }
        let Some((xn, s, mut rn, gn)) = accepted else {
            break;
        };
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            if pairs.len() == settings.memory.max(1) {
                pairs.pop_front();
            }
            pairs.push_back((s, y, 1.0 / sy));
        }
        x = xn;
        g = gn;
        pg = projected_gradient(&x, &g, bound);
        rn.gradient_norm = dot(&pg, &pg).sqrt();
        rn.iteration = iter;
        rep = rn;
        history.push(rep);
    }
    Ok(BoxOptimum {
        x,
        history,
        evaluations,
    })
}

/// Two-loop recursion restricted to free variables.
fn two_loop(g: &[f64], pairs: &VecDeque<(Vec<f64>, Vec<f64>, f64)>, free: &[bool]) -> Vec<f64> {
    let mask = |v: &[f64]| -> Vec<f64> { v.iter().zip(free).map(|(x, &f)| if f { *x } else { 0.0 }).collect() };
    let mut q = mask(g);
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y, rho) in pairs.iter().rev() {
        let s = mask(s);
        let a = rho * dot(&s, &q);
        for (qi, yi) in q.iter_mut().zip(y.iter().zip(free)) {
            if *yi.1 {
                *qi -= a * yi.0;
            }
        }
        alphas.push(a);
    }
    let (s, y, _) = pairs.back().expect("non-empty");
    let (sm, ym) = (mask(s), mask(y));
    let yy = dot(&ym, &ym);
    let gamma = if yy > 0.0 { (dot(&sm, &ym) / yy).abs() } else { 1.0 };
    for v in &mut q {
        *v *= gamma;
    }
    for ((s, y, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
        let ym = mask(y);
        let b = rho * dot(&ym, &q);
        for (qi, si) in q.iter_mut().zip(s.iter().zip(free)) {
            if *si.1 {
                *qi += (a - b) * si.0;
            }
        }
    }
    q.iter().map(|v| -v).collect()
}
