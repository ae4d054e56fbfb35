//! Subcommand pipelines. Each one computes its results, then writes every
//! artifact under the output directory.

use std::path::{Path, PathBuf};

use halmba_core::engine::{pdlmba_sweep, sweep, ArchitectureConfig, EngineError, Mode};
use halmba_core::reconfig::{
    optimize_phase, plan_grid, sweep_metrics, vswr_circle, LoadCondition, PlanEntry,
    ReconfigError,
};
use halmba_core::tlfit::{tl_phase_fit, TlFitError};
use halmba_core::{Execution, Phasor};
use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, KeyIssue, ScenarioConfig};
use crate::export::{self, write_file, ExportError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Sweep,
    MismatchGrid,
    PhaseOpt,
    Tlfit,
    Compare,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Sweep => "sweep",
            Command::MismatchGrid => "mismatch-grid",
            Command::PhaseOpt => "phase-opt",
            Command::Tlfit => "tlfit",
            Command::Compare => "compare",
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error(transparent)]
    Io(#[from] ExportError),
    #[error("cannot read {}: {source}", path.display())]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<ReconfigError> for CliError {
    fn from(e: ReconfigError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<TlFitError> for CliError {
    fn from(e: TlFitError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

#[derive(Debug, Serialize)]
pub struct ErrorSummary<'a> {
    pub error: &'static str,
    pub exit_code: i32,
    pub message: String,
    #[serde(skip_serializing_if = "<[_]>::is_empty")]
    pub issues: &'a [KeyIssue],
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io(_) | CliError::Read { .. } => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Numeric(_) => "numeric",
            CliError::Io(_) | CliError::Read { .. } => "io",
        }
    }

    /// Single-line JSON description for machine consumption.
    pub fn to_json(&self) -> String {
        let issues = match self {
            CliError::Config(c) => c.issues(),
            _ => &[],
        };
        let summary = ErrorSummary {
            error: self.kind(),
            exit_code: self.exit_code(),
            message: self.to_string(),
            issues,
        };
        serde_json::to_string(&summary).unwrap_or_else(|_| {
            format!("{{\"error\":\"{}\",\"exit_code\":{}}}", self.kind(), self.exit_code())
        })
    }
}

/// Everything a run needs besides the configuration file.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub execution: Execution,
}

fn single_load(cfg: &ScenarioConfig) -> Result<LoadCondition, CliError> {
    Ok(LoadCondition::from_z(cfg.load.z)?)
}

fn grid_loads(cfg: &ScenarioConfig) -> Result<Vec<LoadCondition>, CliError> {
    let l = &cfg.load;
    match &l.phases_deg {
        Some(phases) => {
            let r = (l.vswr - 1.0) / (l.vswr + 1.0);
            phases
                .iter()
                .map(|deg| {
                    LoadCondition::from_gamma(Phasor::from_polar(r, deg.to_radians()))
                        .map_err(CliError::from)
                })
                .collect()
        }
        None => Ok(vswr_circle(l.vswr, l.step_deg)?),
    }
}

fn architecture(cfg: &ScenarioConfig) -> Result<ArchitectureConfig, CliError> {
    Ok(cfg.build_architecture()?)
}

/// Runs one subcommand and returns the written paths in write order.
pub fn run_scenario(
    cmd: Command,
    cfg: &ScenarioConfig,
    opts: &RunOptions,
) -> Result<Vec<PathBuf>, CliError> {
    let files = match cmd {
        Command::Sweep => run_sweep(cfg)?,
        Command::MismatchGrid => run_mismatch_grid(cfg, opts.execution)?,
        Command::PhaseOpt => run_phase_opt(cfg, opts.execution)?,
        Command::Tlfit => run_tlfit(cfg)?,
        Command::Compare => run_compare(cfg)?,
    };
    let mut written = Vec::with_capacity(files.len());
    for (rel, contents) in files {
        let path = opts.out_dir.join(rel);
        write_file(&path, &contents)?;
        written.push(path);
    }
    Ok(written)
}

type Files = Vec<(PathBuf, String)>;

fn run_sweep(cfg: &ScenarioConfig) -> Result<Files, CliError> {
    let arch = architecture(cfg)?;
    let load = single_load(cfg)?;
    let result = sweep(&arch, load.absolute(arch.net.z0()))?;
    let ohms = cfg.architecture.z0_ohms;
    Ok(vec![
        ("sweep.csv".into(), export::sweep_csv(&result, ohms)),
        ("smith.csv".into(), export::smith_csv(&result, ohms)),
    ])
}

fn entries(results: Vec<Result<PlanEntry, ReconfigError>>) -> Result<Vec<PlanEntry>, CliError> {
    results
        .into_iter()
        .enumerate()
        .map(|(k, r)| r.map_err(|e| CliError::Numeric(format!("load {k}: {e}"))))
        .collect()
}

fn run_mismatch_grid(cfg: &ScenarioConfig, execution: Execution) -> Result<Files, CliError> {
    let arch = architecture(cfg)?;
    let loads = grid_loads(cfg)?;
    let plan_opts = cfg.plan_options(execution);
    let planned = entries(plan_grid(&loads, &arch, &plan_opts, true))?;
    let baseline = entries(plan_grid(&loads, &arch, &plan_opts, false))?;
    let ohms = cfg.architecture.z0_ohms;
    let rows = |es: &[PlanEntry]| -> Vec<_> {
        es.iter().map(|e| (e.load, e.plan, e.metrics)).collect()
    };
    let mut files: Files = vec![
        (
            "plan_report.csv".into(),
            export::plan_report_csv(&rows(&planned), ohms),
        ),
        (
            "baseline_report.csv".into(),
            export::plan_report_csv(&rows(&baseline), ohms),
        ),
    ];
    let width = loads.len().saturating_sub(1).to_string().len().max(2);
    for (k, e) in planned.iter().enumerate() {
        files.push((
            Path::new("sweeps").join(format!("load_{k:0width$}.csv")),
            export::sweep_csv(&e.sweep, ohms),
        ));
        files.push((
            Path::new("smith").join(format!("load_{k:0width$}.csv")),
            export::smith_csv(&e.sweep, ohms),
        ));
    }
    Ok(files)
}

fn run_phase_opt(cfg: &ScenarioConfig, execution: Execution) -> Result<Files, CliError> {
    let arch = architecture(cfg)?;
    let load = single_load(cfg)?;
    let search = cfg.plan_options(execution).search;
    let best = optimize_phase(&arch, &load, &search)?;
    let result = sweep(
        &arch.with_phi(best.phi_deg.to_radians()),
        load.absolute(arch.net.z0()),
    )?;
    let ohms = cfg.architecture.z0_ohms;
    Ok(vec![
        ("phase_scan.csv".into(), export::phase_scan_csv(&best, ohms)),
        ("sweep.csv".into(), export::sweep_csv(&result, ohms)),
        ("smith.csv".into(), export::smith_csv(&result, ohms)),
    ])
}

/// Three transmission-line sections with alternating one-degree ripple,
/// 13 points from 1.7 to 2.9 GHz.
pub fn synthetic_phase_points() -> Vec<(f64, f64)> {
    (0..13)
        .map(|k| {
            let f = 1.7 + 0.1 * k as f64;
            let theta = match k {
                0..=3 => 95.0,
                4..=8 => 130.0,
                _ => 170.0,
            };
            let ripple = if k % 2 == 0 { 1.0 } else { -1.0 };
            (f, -theta * f / 2.3 + ripple)
        })
        .collect()
}

fn read_phase_points(path: &Path) -> Result<Vec<(f64, f64)>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let bad = |line: usize, why: &str| {
        CliError::Config(ConfigError::Invalid(vec![KeyIssue {
            key: "tlfit.input".into(),
            problem: format!("{} line {line}: {why}", path.display()),
        }]))
    };
    let mut points = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split(',').map(str::trim);
        let (Some(f), Some(p), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(bad(k + 1, "expected two comma-separated fields"));
        };
        match (f.parse::<f64>(), p.parse::<f64>()) {
            (Ok(f), Ok(p)) => points.push((f, p)),
            _ if points.is_empty() => {}
            _ => return Err(bad(k + 1, "fields are not numbers")),
        }
    }
    Ok(points)
}

fn run_tlfit(cfg: &ScenarioConfig) -> Result<Files, CliError> {
    let t = &cfg.tlfit;
    let points = match (&t.input, &t.points) {
        (Some(path), _) => read_phase_points(Path::new(path))?,
        (None, Some(p)) => p.clone(),
        (None, None) => synthetic_phase_points(),
    };
    let ref_freq = match t.ref_freq {
        Some(f) => f,
        None => match (points.first(), points.last()) {
            (Some(a), Some(b)) => 0.5 * (a.0 + b.0),
            _ => return Err(CliError::Numeric("no phase points to fit".into())),
        },
    };
    let fit = tl_phase_fit(&points, t.segments, ref_freq)?;
    Ok(vec![(
        "tlfit.csv".into(),
        export::tlfit_csv(&fit, cfg.architecture.z0_ohms),
    )])
}

fn run_compare(cfg: &ScenarioConfig) -> Result<Files, CliError> {
    let arch = architecture(cfg)?;
    let load = single_load(cfg)?.absolute(arch.net.z0());
    let halmba = sweep(&arch.with_mode(Mode::Halmba), load)?;
    let pdlmba = pdlmba_sweep(&arch.with_mode(Mode::Pdlmba), load)?;
    let mh = sweep_metrics(&halmba)?;
    let mp = sweep_metrics(&pdlmba)?;
    let ohms = cfg.architecture.z0_ohms;
    Ok(vec![
        ("sweep_halmba.csv".into(), export::sweep_csv(&halmba, ohms)),
        ("sweep_pdlmba.csv".into(), export::sweep_csv(&pdlmba, ohms)),
        (
            "compare_summary.csv".into(),
            export::compare_summary_csv(
                &[("halmba", &halmba, &mh), ("pdlmba", &pdlmba, &mp)],
                ohms,
            ),
        ),
    ])
}
