use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use qudit_crosstalk::config::RunConfig;
use qudit_crosstalk::control::trace_csv;
use qudit_crosstalk::pulses::TaskRecord;
use qudit_crosstalk::sweeps::{
    collapse_spread, curves_from_rows, fit_slope, rescale_collapse, rows_from_csv, run_heatmap, run_scaling,
    Provenance, SweepKind, CSV_HEADER, SLOPE_WINDOW,
};
use qudit_crosstalk::{
    synthesize as run_synthesis, DecayAnalyzer, Error, GatePulse, GateTask, HeatmapSpec, PulseFile, PulseSet,
    ScalingSpec, SweepResult,
};
use serde::Serialize;

use crate::{Kind, RunArgs};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numerical(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Numerical(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Propagation { .. } | Error::NonFinite { .. } => CliError::Numerical(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Usage(format!("{}: {e}", path.display()))
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn to_json<T: Serialize>(v: &T) -> CliResult<String> {
    serde_json::to_string_pretty(v).map_err(|e| CliError::Usage(e.to_string()))
}

fn load_config(run: &RunArgs) -> CliResult<RunConfig> {
    let mut cfg = RunConfig::load(&run.config)?;
    if let Some(out) = &run.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = run.seed {
        cfg.seed = seed;
    }
    if let Some(w) = run.workers {
        cfg.workers = w;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn pulse_path(cfg: &RunConfig, task: &GateTask) -> PathBuf {
    cfg.output_dir.join("pulses").join(format!("{}.json", task.label()))
}

#[derive(Serialize)]
struct GateSummary {
    gate: String,
    infidelity: f64,
    guard_penalty: f64,
    iterations: usize,
    evaluations: usize,
    converged: bool,
    pulse: PathBuf,
    trace: PathBuf,
}

#[derive(Serialize)]
struct SynthesisManifest {
    code_version: &'static str,
    config_hash: String,
    seed: u64,
    infidelity_threshold: f64,
    gates: Vec<GateSummary>,
    failures: Vec<String>,
}

/// Synthesizes and saves the pulse for one gate.
fn synthesize_gate(cfg: &RunConfig, task: &GateTask) -> CliResult<(PulseSet, GateSummary)> {
    let syn = run_synthesis(task, &cfg.synthesis_settings())?;
    let best = *syn.best();
    let mut file = PulseFile::from_pulse(&syn.pulse);
    file.task = Some(TaskRecord::from_task(task));
    file.oscillator_hash = Some(cfg.oscillator_hash()?);
    file.config_hash = Some(cfg.hash()?);
    file.infidelity = Some(best.infidelity);
    let pulse = pulse_path(cfg, task);
    write(&pulse, &file.to_json()?)?;
    let trace = cfg.output_dir.join("traces").join(format!("{}.csv", task.label()));
    write(&trace, &trace_csv(&syn.history))?;
    let summary = GateSummary {
        gate: task.label(),
        infidelity: best.infidelity,
        guard_penalty: best.guard_penalty,
        iterations: best.iteration,
        evaluations: syn.evaluations,
        converged: best.infidelity <= cfg.optimizer.infidelity_threshold,
        pulse,
        trace,
    };
    Ok((syn.pulse, summary))
}

pub fn synthesize(run: &RunArgs) -> CliResult<()> {
    let cfg = load_config(run)?;
    let tasks = cfg.tasks()?;
    if tasks.is_empty() {
        println!("no gates configured");
        return Ok(());
    }
    let mut gates = Vec::new();
    let mut failures = Vec::new();
    for task in &tasks {
        match synthesize_gate(&cfg, task) {
            Ok((_, s)) => {
                println!(
                    "{}: infidelity {:.3e}, guard {:.3e}, {} iterations{}",
                    s.gate,
                    s.infidelity,
                    s.guard_penalty,
                    s.iterations,
                    if s.converged { "" } else { " (above threshold)" }
                );
                if !s.converged {
                    failures.push(format!(
                        "{}: infidelity {:.3e} above threshold {:.1e}",
                        s.gate, s.infidelity, cfg.optimizer.infidelity_threshold
                    ));
                }
                gates.push(s);
            }
            Err(e) => {
                eprintln!("{}: {e}", task.label());
                failures.push(format!("{}: {e}", task.label()));
            }
        }
    }
    let manifest = SynthesisManifest {
        code_version: qudit_crosstalk::VERSION,
        config_hash: cfg.hash()?,
        seed: cfg.seed,
        infidelity_threshold: cfg.optimizer.infidelity_threshold,
        gates,
        failures,
    };
    write(&cfg.output_dir.join("synthesis.json"), &to_json(&manifest)?)?;
    if manifest.failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Numerical(format!(
            "{} gate(s) failed",
            manifest.failures.len()
        )))
    }
}

fn read_pulse_file(path: &Path) -> CliResult<PulseFile> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    PulseFile::from_json(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

/// Reuses a saved pulse when it was built for the same gate and oscillator,
/// otherwise synthesizes a fresh one.
fn pulse_for(cfg: &RunConfig, task: &GateTask) -> CliResult<PulseSet> {
    let path = pulse_path(cfg, task);
    if path.exists() {
        let file = read_pulse_file(&path)?;
        let same_gate = file.task.as_ref() == Some(&TaskRecord::from_task(task));
        let same_osc = file.oscillator_hash.as_deref() == Some(cfg.oscillator_hash()?.as_str());
        if same_gate && same_osc {
            return Ok(file.to_pulse()?);
        }
        eprintln!(
            "{}: saved pulse does not match the config, re-synthesizing",
            task.label()
        );
    }
    let (pulse, s) = synthesize_gate(cfg, task)?;
    println!("{}: synthesized, infidelity {:.3e}", s.gate, s.infidelity);
    Ok(pulse)
}

pub fn evaluate(pulse: &Path, eps_over_xi: f64, config: Option<&Path>) -> CliResult<()> {
    if !eps_over_xi.is_finite() {
        return Err(CliError::Usage("--eps-over-xi must be finite".into()));
    }
    let file = read_pulse_file(pulse)?;
    let cfg = match config {
        Some(path) => {
            let cfg = RunConfig::load(path)?;
            let expected = cfg.oscillator_hash()?;
            match file.oscillator_hash.as_deref() {
                Some(h) if h == expected => {}
                Some(h) => {
                    return Err(CliError::Usage(format!(
                        "{}: oscillator hash {h} does not match config ({expected})",
                        pulse.display()
                    )))
                }
                None => {
                    return Err(CliError::Usage(format!(
                        "{}: pulse file has no oscillator hash",
                        pulse.display()
                    )))
                }
            }
            cfg
        }
        None => RunConfig::benchmark_defaults(),
    };
    let task = file
        .task
        .as_ref()
        .ok_or_else(|| CliError::Usage(format!("{}: pulse file does not record its gate", pulse.display())))?
        .to_task()?;
    let pulse_set = file.to_pulse()?;
    let analyzer = DecayAnalyzer::new(
        &pulse_set,
        &task,
        &cfg.propagation_settings(),
        cfg.analysis.checkpoints,
        cfg.analysis.normalization,
    )?;
    println!("{}", to_json(&analyzer.report(eps_over_xi)?)?);
    Ok(())
}

#[derive(Serialize)]
struct Sidecar<'a> {
    kind: SweepKind,
    csv: String,
    columns: Vec<&'static str>,
    rows: usize,
    gates: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    occ_max: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    exponents: Option<Vec<(f64, f64)>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    slope_window: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    anchor: Option<f64>,
    min_infidelity: Option<f64>,
    max_infidelity: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    slopes: Vec<(String, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    collapse_spread: Option<f64>,
    failures: &'a [String],
    provenance: &'a Provenance,
}

fn provenance(cfg: &RunConfig, reference: Option<qudit_crosstalk::Reference>) -> CliResult<Provenance> {
    Ok(Provenance {
        code_version: qudit_crosstalk::VERSION.into(),
        seed: cfg.seed,
        config_hash: cfg.hash()?,
        propagation: cfg.propagation_settings(),
        reference,
        config: serde_json::to_value(cfg).map_err(|e| CliError::Usage(e.to_string()))?,
    })
}

pub fn sweep(run: &RunArgs, kind: Kind) -> CliResult<()> {
    let cfg = load_config(run)?;
    let settings = cfg.propagation_settings();
    let (result, extra) = match kind {
        Kind::Heatmap => {
            let h = &cfg.sweep.heatmap;
            let task = cfg.task_by_label(&h.gate)?;
            let pulse = pulse_for(&cfg, &task)?;
            let spec = HeatmapSpec {
                gate: GatePulse::new(task, pulse),
                occ_max: h.occ_max,
                cross_kerr_exponents: cfg.heatmap_exponents(),
            };
            let r = run_heatmap(&spec, &settings, cfg.workers, provenance(&cfg, None)?)?;
            let extra = Extra {
                gates: vec![h.gate.clone()],
                occ_max: Some(h.occ_max),
                exponents: Some(spec.cross_kerr_exponents.clone()),
                ..Default::default()
            };
            (r, extra)
        }
        Kind::Scaling => {
            let s = &cfg.sweep.scaling;
            let tasks: Vec<GateTask> = if s.gates.is_empty() {
                cfg.tasks()?
            } else {
                s.gates.iter().map(|l| cfg.task_by_label(l)).collect::<Result<_, _>>()?
            };
            if tasks.is_empty() {
                return Err(CliError::Usage("scaling sweep needs at least one gate".into()));
            }
            let gates = tasks
                .iter()
                .map(|t| Ok(GatePulse::new(*t, pulse_for(&cfg, t)?)))
                .collect::<CliResult<Vec<_>>>()?;
            let window = (s.slope_window[0], s.slope_window[1]);
            let spec = ScalingSpec {
                gates,
                eps_over_xi_grid: cfg.scaling_grid(),
                slope_window: window,
                reference: s.reference,
            };
            let r = run_scaling(&spec, &settings, cfg.workers, provenance(&cfg, Some(s.reference))?)?;
            let curves = r.curves();
            let mut slopes = Vec::new();
            for c in &curves {
                match fit_slope(&c.points, window) {
                    Ok(v) => slopes.push((c.label.clone(), v)),
                    Err(e) => eprintln!("{}: {e}", c.label),
                }
            }
            let spread = rescale_collapse(&curves, s.anchor).ok().map(|rc| {
                let (lo, hi) = (s.anchor / 10f64.sqrt(), s.anchor * 10f64.sqrt());
                collapse_spread(&rc, (lo, hi))
            });
            let extra = Extra {
                gates: curves.iter().map(|c| c.label.clone()).collect(),
                slope_window: Some(window),
                anchor: Some(s.anchor),
                slopes,
                collapse_spread: spread,
                ..Default::default()
            };
            (r, extra)
        }
    };
    let name = match kind {
        Kind::Heatmap => "heatmap",
        Kind::Scaling => "scaling",
    };
    let csv_path = cfg.output_dir.join(format!("{name}.csv"));
    write(&csv_path, &result.to_csv()?)?;
    print_summary(&result, &extra, &csv_path);
    let (min, max) = result.min_max().unzip();
    let sidecar = Sidecar {
        kind: result.kind,
        csv: format!("{name}.csv"),
        columns: CSV_HEADER.split(',').collect(),
        rows: result.rows.len(),
        gates: extra.gates,
        occ_max: extra.occ_max,
        exponents: extra.exponents,
        slope_window: extra.slope_window,
        anchor: extra.anchor,
        min_infidelity: min,
        max_infidelity: max,
        slopes: extra.slopes,
        collapse_spread: extra.collapse_spread,
        failures: &result.failures,
        provenance: &result.provenance,
    };
    write(&cfg.output_dir.join(format!("{name}.json")), &to_json(&sidecar)?)?;
    if result.failures.is_empty() {
        Ok(())
    } else {
        for f in &result.failures {
            eprintln!("{f}");
        }
        Err(CliError::Numerical(format!("{} cell(s) failed", result.failures.len())))
    }
}

#[derive(Default)]
struct Extra {
    gates: Vec<String>,
    occ_max: Option<u32>,
    exponents: Option<Vec<(f64, f64)>>,
    slope_window: Option<(f64, f64)>,
    anchor: Option<f64>,
    slopes: Vec<(String, f64)>,
    collapse_spread: Option<f64>,
}

fn print_summary(result: &SweepResult, extra: &Extra, csv: &Path) {
    println!("wrote {} rows to {}", result.rows.len(), csv.display());
    if let Some((lo, hi)) = result.min_max() {
        println!("infidelity min {lo:.4e} max {hi:.4e}");
    }
    for (gate, s) in &extra.slopes {
        println!("{gate}: slope {s:.4}");
    }
    if let Some(s) = extra.collapse_spread {
        println!("collapse spread within half a decade of the anchor: {:.2}%", 100.0 * s);
    }
}

#[derive(Serialize)]
struct SlopeReport {
    window: (f64, f64),
    slopes: Vec<(String, f64)>,
}

pub fn slope(input: &Path, window: Option<(f64, f64)>) -> CliResult<()> {
    let window = window.unwrap_or(SLOPE_WINDOW);
    if !(window.0 > 0.0 && window.1 > window.0) {
        return Err(CliError::Usage(format!("invalid window [{}, {}]", window.0, window.1)));
    }
    let text = fs::read_to_string(input).map_err(|e| io_err(input, e))?;
    let rows = rows_from_csv(&text).map_err(|e| CliError::Usage(format!("{}: {e}", input.display())))?;
    if rows.iter().any(|r| r.n1.is_some() || r.exp1.is_some()) {
        return Err(CliError::Usage(format!("{}: not a scaling CSV", input.display())));
    }
    let mut slopes = Vec::new();
    for c in curves_from_rows(&rows) {
        let s = fit_slope(&c.points, window).map_err(|e| CliError::Usage(format!("{}: {e}", c.label)))?;
        slopes.push((c.label, s));
    }
    println!("{}", to_json(&SlopeReport { window, slopes })?);
    Ok(())
}

pub fn defaults() -> CliResult<()> {
    print!("{}", RunConfig::benchmark_defaults().to_toml()?);
    Ok(())
}
