//! Batch evaluation of shifted-gate infidelity over spectator occupations
//! (heatmaps) and over log-spaced `ε/ξ` grids (scaling curves), plus the
//! slope fit and rescaling used to compare gates.
//!
//! Every cell is a pure function of `ε`, so distinct shifts are evaluated
//! once in parallel and the results are shared by all cells with the same
//! `ε` bit pattern.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::GateTask;
use crate::propagator::PropagationSettings;
use crate::pulses::PulseSet;
use crate::spectator::ShiftEvaluator;

/// Default slope window in `ε/ξ`.
pub const SLOPE_WINDOW: (f64, f64) = (8.912_509_381_337_456e-5, 1.122_018_454_301_963_4e-4);
/// Default rescaling anchor in `ε/ξ`.
pub const COLLAPSE_ANCHOR: f64 = 1e-4;

/// Relative slack when testing grid points against window edges.
const EDGE_SLACK: f64 = 1e-9;

/// A gate together with the pulse synthesized for it.
#[derive(Debug, Clone)]
pub struct GatePulse {
    pub label: String,
    pub task: GateTask,
    pub pulse: PulseSet,
}

impl GatePulse {
    pub fn new(task: GateTask, pulse: PulseSet) -> Self {
        Self {
            label: task.label(),
            task,
            pulse,
        }
    }
}

#[derive(Debug, Clone)]
pub struct HeatmapSpec {
    pub gate: GatePulse,
    pub occ_max: u32,
    /// Cross-Kerr exponents `(e₁, e₂)` with `ξⱼ = 10^{eⱼ} ξ`, one panel each.
    pub cross_kerr_exponents: Vec<(f64, f64)>,
}

impl HeatmapSpec {
    pub fn validate(&self) -> Result<()> {
        if self.occ_max < 1 {
            return Err(Error::Config("occ_max must be >= 1".into()));
        }
        if self.cross_kerr_exponents.is_empty() {
            return Err(Error::Config("at least one exponent pair required".into()));
        }
        if self
            .cross_kerr_exponents
            .iter()
            .any(|(a, b)| !a.is_finite() || !b.is_finite())
        {
            return Err(Error::Config("cross-Kerr exponents must be finite".into()));
        }
        Ok(())
    }
}

/// Exponents `{0, -0.5, …, -3.5}` on both axes (64 panels).
pub fn default_heatmap_exponents() -> Vec<(f64, f64)> {
    let axis: Vec<f64> = (0..8).map(|k| -0.5 * k as f64).collect();
    axis.iter().flat_map(|&a| axis.iter().map(move |&b| (a, b))).collect()
}

/// What the shifted evolution is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    /// The unshifted evolution under the same pulse (`F(0) = 1`).
    #[default]
    Unshifted,
    /// The ideal SWAP, so curves sit on the synthesis floor at small `ε`.
    Target,
}

#[derive(Debug, Clone)]
pub struct ScalingSpec {
    pub gates: Vec<GatePulse>,
    pub eps_over_xi_grid: Vec<f64>,
    pub slope_window: (f64, f64),
    pub reference: Reference,
}

impl ScalingSpec {
    pub fn validate(&self) -> Result<()> {
        if self.eps_over_xi_grid.is_empty() {
            return Err(Error::Config("eps/xi grid is empty".into()));
        }
        if self.eps_over_xi_grid.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::Config("eps/xi grid values must be positive".into()));
        }
        if self.eps_over_xi_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("eps/xi grid must be strictly ascending".into()));
        }
        let (lo, hi) = self.slope_window;
        if !(lo > 0.0 && hi > lo) {
            return Err(Error::Config(format!("invalid slope window [{lo}, {hi}]")));
        }
        Ok(())
    }
}

/// `count` log-spaced values over `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (a, b) = (lo.log10(), hi.log10());
    match count {
        0 => vec![],
        1 => vec![lo],
        _ => (0..count)
            .map(|k| 10f64.powf(a + (b - a) * k as f64 / (count - 1) as f64))
            .collect(),
    }
}

/// 40 log-spaced points over `[1e-5, 1e-1]`, the slope-window edges and the
/// rescaling anchor, sorted.
pub fn default_scaling_grid() -> Vec<f64> {
    let mut g = log_grid(1e-5, 1e-1, 40);
    g.extend([SLOPE_WINDOW.0, SLOPE_WINDOW.1, COLLAPSE_ANCHOR]);
    g.sort_by(f64::total_cmp);
    g.dedup_by(|a, b| ((*a - *b) / *b).abs() < 1e-12);
    g
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Heatmap,
    Scaling,
}

/// One CSV row. Heatmap rows carry exponents and occupations; scaling rows
/// leave them empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub gate: String,
    pub exp1: Option<f64>,
    pub exp2: Option<f64>,
    pub n1: Option<u32>,
    pub n2: Option<u32>,
    pub eps_over_xi: f64,
    /// Empty when the cell's propagation failed.
    pub infidelity: Option<f64>,
}

/// Metadata needed to re-run a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub code_version: String,
    pub seed: u64,
    pub config_hash: String,
    pub propagation: PropagationSettings,
    pub reference: Option<Reference>,
    /// Free-form configuration snapshot.
    pub config: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub kind: SweepKind,
    pub rows: Vec<SweepRow>,
    /// Diagnostics for cells whose propagation failed.
    pub failures: Vec<String>,
    pub provenance: Provenance,
}

pub const CSV_HEADER: &str = "gate,exp1,exp2,n1,n2,eps_over_xi,infidelity";

impl SweepResult {
    /// CSV with the fixed column set.
    pub fn to_csv(&self) -> Result<String> {
        rows_to_csv(&self.rows)
    }

    /// Per-gate `(ε/ξ, infidelity)` curves in grid order, failures skipped.
    pub fn curves(&self) -> Vec<Curve> {
        curves_from_rows(&self.rows)
    }

    pub fn min_max(&self) -> Option<(f64, f64)> {
        let vals: Vec<f64> = self.rows.iter().filter_map(|r| r.infidelity).collect();
        if vals.is_empty() {
            return None;
        }
        Some(vals.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        }))
    }
}

pub fn rows_to_csv(rows: &[SweepRow]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(true).from_writer(vec![]);
    for r in rows {
        w.serialize(r).map_err(|e| Error::Config(format!("csv write: {e}")))?;
    }
    if rows.is_empty() {
        return Ok(format!("{CSV_HEADER}\n"));
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(format!("csv write: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Config(e.to_string()))
}

/// Parses a sweep CSV; the header must match [`CSV_HEADER`] exactly.
pub fn rows_from_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = rdr
        .headers()
        .map_err(|e| Error::Config(format!("csv header: {e}")))?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if header != CSV_HEADER {
        return Err(Error::Config(format!(
            "unexpected CSV columns `{header}`, expected `{CSV_HEADER}`"
        )));
    }
    rdr.deserialize()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| Error::Config(format!("csv row {}: {e}", i + 2))))
        .collect()
}

/// A labeled curve of `(ε/ξ, infidelity)` points.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

pub fn curves_from_rows(rows: &[SweepRow]) -> Vec<Curve> {
    let mut order: Vec<String> = Vec::new();
    let mut map: HashMap<String, Vec<(f64, f64)>> = HashMap::new();
    for r in rows {
        if let Some(v) = r.infidelity {
            if !map.contains_key(&r.gate) {
                order.push(r.gate.clone());
            }
            map.entry(r.gate.clone()).or_default().push((r.eps_over_xi, v));
        }
    }
    order
        .into_iter()
        .map(|label| {
            let mut points = map.remove(&label).unwrap_or_default();
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            Curve { label, points }
        })
        .collect()
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// Evaluates `f` once per distinct bit pattern of `eps_over_xi`.
fn evaluate_distinct<F>(values: &[f64], workers: usize, f: F) -> Result<HashMap<u64, std::result::Result<f64, String>>>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    let mut distinct: Vec<f64> = values.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup_by(|a, b| a.to_bits() == b.to_bits());
    let results: Vec<(u64, std::result::Result<f64, String>)> = pool(workers)?.install(|| {
        distinct
            .par_iter()
            .map(|&x| (x.to_bits(), f(x).map_err(|e| e.to_string())))
            .collect()
    });
    Ok(results.into_iter().collect())
}

/// Shift in units of `ξ` for one heatmap cell.
pub fn cell_eps_over_xi(exponents: (f64, f64), n1: u32, n2: u32) -> f64 {
    10f64.powf(exponents.0) * f64::from(n1) + 10f64.powf(exponents.1) * f64::from(n2)
}

/// Infidelity over `(n₁, n₂) ∈ [0, occ_max]²` for each exponent pair.
pub fn run_heatmap(
    spec: &HeatmapSpec,
    settings: &PropagationSettings,
    workers: usize,
    provenance: Provenance,
) -> Result<SweepResult> {
    spec.validate()?;
    let evaluator = ShiftEvaluator::new(&spec.gate.pulse, &spec.gate.task, settings)?;
    let xi = spec.gate.task.oscillator.self_kerr;
    let occ = spec.occ_max;
    let mut cells = Vec::new();
    for &(e1, e2) in &spec.cross_kerr_exponents {
        for n2 in 0..=occ {
            for n1 in 0..=occ {
                cells.push((e1, e2, n1, n2, cell_eps_over_xi((e1, e2), n1, n2)));
            }
        }
    }
    let shifts: Vec<f64> = cells.iter().map(|c| c.4).collect();
    let values = evaluate_distinct(&shifts, workers, |x| evaluator.infidelity(x * xi))?;
    let mut failures = Vec::new();
    let rows = cells
        .into_iter()
        .map(|(e1, e2, n1, n2, x)| {
            let infidelity = match &values[&x.to_bits()] {
                Ok(v) => Some(v.clamp(0.0, 1.0)),
                Err(msg) => {
                    failures.push(format!("{} exp=({e1},{e2}) n=({n1},{n2}): {msg}", spec.gate.label));
                    None
                }
            };
            SweepRow {
                gate: spec.gate.label.clone(),
                exp1: Some(e1),
                exp2: Some(e2),
                n1: Some(n1),
                n2: Some(n2),
                eps_over_xi: x,
                infidelity,
            }
        })
        .collect();
    Ok(SweepResult {
        kind: SweepKind::Heatmap,
        rows,
        failures,
        provenance,
    })
}

/// Infidelity curve over the `ε/ξ` grid for every gate.
pub fn run_scaling(
    spec: &ScalingSpec,
    settings: &PropagationSettings,
    workers: usize,
    provenance: Provenance,
) -> Result<SweepResult> {
    spec.validate()?;
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for gate in &spec.gates {
        let evaluator = ShiftEvaluator::new(&gate.pulse, &gate.task, settings)?;
        let xi = gate.task.oscillator.self_kerr;
        let values = evaluate_distinct(&spec.eps_over_xi_grid, workers, |x| match spec.reference {
            Reference::Unshifted => evaluator.infidelity(x * xi),
            Reference::Target => evaluator.target_infidelity(x * xi),
        })?;
        for &x in &spec.eps_over_xi_grid {
            let infidelity = match &values[&x.to_bits()] {
                Ok(v) => Some(v.clamp(0.0, 1.0)),
                Err(msg) => {
                    failures.push(format!("{} eps/xi={x:e}: {msg}", gate.label));
                    None
                }
            };
            rows.push(SweepRow {
                gate: gate.label.clone(),
                exp1: None,
                exp2: None,
                n1: None,
                n2: None,
                eps_over_xi: x,
                infidelity,
            });
        }
    }
    Ok(SweepResult {
        kind: SweepKind::Scaling,
        rows,
        failures,
        provenance,
    })
}

/// Least-squares slope of `log₁₀(infidelity)` against `log₁₀(ε/ξ)` over the
/// points inside `window` (edges included).
pub fn fit_slope(curve: &[(f64, f64)], window: (f64, f64)) -> Result<f64> {
    let (lo, hi) = window;
    let pts: Vec<(f64, f64)> = curve
        .iter()
        .filter(|(x, y)| *x >= lo * (1.0 - EDGE_SLACK) && *x <= hi * (1.0 + EDGE_SLACK) && *y > 0.0)
        .map(|(x, y)| (x.log10(), y.log10()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::Window {
            lo,
            hi,
            found: pts.len(),
        });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Value of a curve at `x`, interpolating linearly in log-log space.
pub fn value_at(curve: &[(f64, f64)], x: f64) -> Result<f64> {
    let lo = curve.first().map(|p| p.0).unwrap_or(f64::NAN);
    let hi = curve.last().map(|p| p.0).unwrap_or(f64::NAN);
    if curve.is_empty() || x < lo * (1.0 - EDGE_SLACK) || x > hi * (1.0 + EDGE_SLACK) {
        return Err(Error::Anchor { anchor: x, lo, hi });
    }
    if let Some(p) = curve.iter().find(|p| ((p.0 - x) / x).abs() < EDGE_SLACK) {
        return Ok(p.1);
    }
    let k = curve.partition_point(|p| p.0 < x);
    let (a, b) = (curve[k - 1], curve[k]);
    let t = (x.log10() - a.0.log10()) / (b.0.log10() - a.0.log10());
    Ok(10f64.powf(a.1.log10() + t * (b.1.log10() - a.1.log10())))
}

/// Divides each curve by its value at `anchor`.
pub fn rescale_collapse(curves: &[Curve], anchor: f64) -> Result<Vec<Curve>> {
    curves
        .iter()
        .map(|c| {
            let v = value_at(&c.points, anchor)?;
            Ok(Curve {
                label: c.label.clone(),
                points: c.points.iter().map(|&(x, y)| (x, y / v)).collect(),
            })
        })
        .collect()
}

/// Largest relative spread `max/min - 1` across rescaled curves at grid
/// points inside `range` shared by all curves.
pub fn collapse_spread(rescaled: &[Curve], range: (f64, f64)) -> f64 {
    let mut by_x: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for c in rescaled {
        for &(x, y) in &c.points {
            if x >= range.0 * (1.0 - EDGE_SLACK) && x <= range.1 * (1.0 + EDGE_SLACK) {
                by_x.entry(x.to_bits()).or_default().push(y);
            }
        }
    }
    by_x.values()
        .filter(|v| v.len() == rescaled.len())
        .map(|v| {
            let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            hi / lo - 1.0
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulses::BSplineBasis;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn provenance() -> Provenance {
        Provenance {
            code_version: "test".into(),
            seed: 0,
            config_hash: "0".into(),
            propagation: PropagationSettings::default(),
            reference: None,
            config: serde_json::Value::Null,
        }
    }

    fn gate() -> GatePulse {
        let task = GateTask::swap_from_ground(2, 20.0, 1, 1.0).unwrap();
        let basis = BSplineBasis::new(4, 20.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let coeffs = (0..2 * 2 * basis.len()).map(|_| rng.gen_range(-0.1..0.1)).collect();
        GatePulse::new(task, PulseSet::new(basis, vec![0.0, -1.0], coeffs, 0.1).unwrap())
    }

    #[test]
    fn power_law_slopes() {
        let xs = log_grid(1e-5, 1e-3, 30);
        let sq: Vec<(f64, f64)> = xs.iter().map(|&x| (x, 3.7 * x * x)).collect();
        let cu: Vec<(f64, f64)> = xs.iter().map(|&x| (x, 0.2 * x.powi(3))).collect();
        assert!((fit_slope(&sq, (1e-5, 1e-3)).unwrap() - 2.0).abs() < 1e-10);
        assert!((fit_slope(&cu, (1e-5, 1e-3)).unwrap() - 3.0).abs() < 1e-10);
        assert!(matches!(fit_slope(&sq, (2e-4, 2.01e-4)), Err(Error::Window { .. })));
    }

    #[test]
    fn default_grid_covers_window() {
        let g = default_scaling_grid();
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        let inside = g
            .iter()
            .filter(|&&x| x >= SLOPE_WINDOW.0 * (1.0 - EDGE_SLACK) && x <= SLOPE_WINDOW.1 * (1.0 + EDGE_SLACK))
            .count();
        assert!(inside >= 4, "{inside}");
        assert!(g.iter().any(|&x| x == COLLAPSE_ANCHOR));
        assert!((SLOPE_WINDOW.0 - 10f64.powf(-4.05)).abs() < 1e-18);
        assert!((SLOPE_WINDOW.1 - 10f64.powf(-3.95)).abs() < 1e-18);
    }

    #[test]
    fn rescaling_examples() {
        let xs = log_grid(1e-5, 1e-3, 21);
        let a = Curve {
            label: "a".into(),
            points: xs.iter().map(|&x| (x, 5.0 * x * x)).collect(),
        };
        let b = Curve {
            label: "b".into(),
            points: xs.iter().map(|&x| (x, 0.3 * x * x)).collect(),
        };
        let r = rescale_collapse(&[a.clone(), b], 1e-4).unwrap();
        assert!((value_at(&r[0].points, 1e-4).unwrap() - 1.0).abs() < 1e-12);
        for (p, q) in r[0].points.iter().zip(&r[1].points) {
            assert!((p.1 - q.1).abs() < 1e-12 * p.1);
        }
        assert!(collapse_spread(&r, (1e-5, 1e-3)) < 1e-12);
        // anchor between grid points is interpolated exactly for power laws
        let r = rescale_collapse(&[a.clone()], 1.234e-4).unwrap();
        assert!((value_at(&r[0].points, 1.234e-4).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(rescale_collapse(&[a], 1.0), Err(Error::Anchor { .. })));
    }

    #[test]
    fn heatmap_small_grid() {
        let spec = HeatmapSpec {
            gate: gate(),
            occ_max: 1,
            cross_kerr_exponents: vec![(-2.0, -2.0)],
        };
        let r = run_heatmap(&spec, &PropagationSettings::default(), 2, provenance()).unwrap();
        assert_eq!(r.rows.len(), 4);
        let zero = r.rows.iter().find(|c| c.n1 == Some(0) && c.n2 == Some(0)).unwrap();
        assert!(zero.infidelity.unwrap() < 1e-12);
        let a = r.rows.iter().find(|c| c.n1 == Some(1) && c.n2 == Some(0)).unwrap();
        let b = r.rows.iter().find(|c| c.n1 == Some(0) && c.n2 == Some(1)).unwrap();
        assert_eq!(a.infidelity.unwrap().to_bits(), b.infidelity.unwrap().to_bits());
        let csv = r.to_csv().unwrap();
        assert!(csv.starts_with(CSV_HEADER));
        assert_eq!(csv.lines().count(), 5);
        assert_eq!(rows_from_csv(&csv).unwrap(), r.rows);
    }

    #[test]
    fn heatmap_worker_count_invariance() {
        let spec = HeatmapSpec {
            gate: gate(),
            occ_max: 3,
            cross_kerr_exponents: vec![(-1.0, -1.5), (-2.0, -2.0)],
        };
        let s = PropagationSettings::default();
        let a = run_heatmap(&spec, &s, 1, provenance()).unwrap();
        let b = run_heatmap(&spec, &s, 4, provenance()).unwrap();
        assert_eq!(a.to_csv().unwrap(), b.to_csv().unwrap());
        // spot value of the cell shift
        assert!((cell_eps_over_xi((-3.5, -3.5), 50, 50) - 100.0 * 10f64.powf(-3.5)).abs() < 1e-15);
    }

    #[test]
    fn scaling_reference_modes() {
        let g = gate();
        let spec = ScalingSpec {
            gates: vec![g.clone()],
            eps_over_xi_grid: log_grid(1e-5, 1e-2, 7),
            slope_window: SLOPE_WINDOW,
            reference: Reference::Unshifted,
        };
        let s = PropagationSettings::default();
        let r = run_scaling(&spec, &s, 2, provenance()).unwrap();
        assert_eq!(r.rows.len(), 7);
        assert!(r.rows.iter().all(|row| row.exp1.is_none() && row.infidelity.is_some()));
        let target = run_scaling(
            &ScalingSpec {
                reference: Reference::Target,
                ..spec.clone()
            },
            &s,
            2,
            provenance(),
        )
        .unwrap();
        // random pulse: the target comparison sits on a large floor
        let floor = target.rows[0].infidelity.unwrap();
        assert!(floor > 0.1);
        assert!(r.rows[0].infidelity.unwrap() < 1e-6);
        let bad = ScalingSpec {
            eps_over_xi_grid: vec![1e-3, 1e-4],
            ..spec
        };
        assert!(run_scaling(&bad, &s, 1, provenance()).is_err());
    }

    #[test]
    fn csv_schema_checked() {
        assert!(rows_from_csv("gate,exp1,n1\nx,1,2\n").is_err());
        let rows = rows_from_csv(&format!("{CSV_HEADER}\nswap03,,,,,0.001,0.25\n")).unwrap();
        assert_eq!(rows[0].exp1, None);
        assert_eq!(rows[0].infidelity, Some(0.25));
    }
}
