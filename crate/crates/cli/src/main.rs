use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use halmba_cli::config::{parse_mode, ConfigError, KeyIssue, ObjectiveKind, ScenarioConfig};
use halmba_cli::fmt::parse_complex;
use halmba_cli::{parse_config, run_scenario, CliError, Command, RunOptions};
use halmba_core::Execution;

#[derive(Parser, Debug)]
#[command(name = "halmba", version, about = "Hybrid asymmetrical load-modulated balanced amplifier simulator")]
struct Cli {
    #[command(subcommand)]
    command: Sub,

    /// TOML scenario file; every key is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides output.dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Normalized load impedance, e.g. 2.0+0.0j.
    #[arg(long, global = true, allow_hyphen_values = true)]
    load: Option<String>,
    #[arg(long, global = true)]
    vswr: Option<f64>,
    /// Reflection-angle step around the VSWR circle, degrees.
    #[arg(long, global = true)]
    step_deg: Option<f64>,
    #[arg(long, global = true)]
    mode: Option<ModeArg>,
    #[arg(long, global = true)]
    objective: Option<ObjectiveArg>,
    /// Phase-offset search spacing, degrees.
    #[arg(long, global = true)]
    phi_grid_deg: Option<f64>,
    /// Transmission-line segments for tlfit.
    #[arg(long, global = true)]
    segments: Option<usize>,
    /// Accepted for compatibility; every pipeline is deterministic.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of drive levels in each sweep.
    #[arg(long, global = true)]
    points: Option<usize>,
    /// Disable data parallelism.
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Sub {
    /// Drive sweep into one load: sweep.csv and smith.csv.
    Sweep,
    /// Plan and evaluate every load on a VSWR circle.
    MismatchGrid,
    /// Search the CA-BA phase offset for one load.
    PhaseOpt,
    /// Fit piecewise transmission lines to a phase-versus-frequency table.
    Tlfit,
    /// Three-way and two-way pseudo-Doherty sweeps side by side.
    Compare,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum ModeArg {
    Halmba,
    Pdlmba,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum ObjectiveArg {
    Ampm,
    Amam,
    Eff,
    Weighted,
}

fn config_issue(key: &str, problem: String) -> CliError {
    CliError::Config(ConfigError::Invalid(vec![KeyIssue {
        key: key.into(),
        problem,
    }]))
}

fn load_config(cli: &Cli) -> Result<ScenarioConfig, CliError> {
    let text = match &cli.config {
        Some(path) => std::fs::read_to_string(path).map_err(|source| CliError::Read {
            path: path.clone(),
            source,
        })?,
        None => String::new(),
    };
    let mut cfg = parse_config(&text)?;
    if let Some(s) = &cli.load {
        cfg.load.z = parse_complex(s).map_err(|e| config_issue("--load", e.to_string()))?;
    }
    if let Some(v) = cli.vswr {
        cfg.load.vswr = v;
    }
    if let Some(s) = cli.step_deg {
        cfg.load.step_deg = s;
        cfg.load.phases_deg = None;
    }
    if let Some(m) = cli.mode {
        let name = match m {
            ModeArg::Halmba => "halmba",
            ModeArg::Pdlmba => "pdlmba",
        };
        cfg.architecture.mode = parse_mode(name).unwrap_or(cfg.architecture.mode);
    }
    if let Some(o) = cli.objective {
        cfg.plan.objective = match o {
            ObjectiveArg::Ampm => ObjectiveKind::Ampm,
            ObjectiveArg::Amam => ObjectiveKind::Amam,
            ObjectiveArg::Eff => ObjectiveKind::Eff,
            ObjectiveArg::Weighted => ObjectiveKind::Weighted,
        };
    }
    if let Some(g) = cli.phi_grid_deg {
        cfg.plan.phi_grid_deg = g;
    }
    if let Some(k) = cli.segments {
        cfg.tlfit.segments = k;
    }
    if let Some(n) = cli.points {
        cfg.architecture.beta_points = n;
    }
    if let Some(dir) = &cli.out {
        cfg.output.dir = dir.to_string_lossy().into_owned();
    }
    let issues = halmba_cli::config::validate(&cfg);
    if !issues.is_empty() {
        return Err(CliError::Config(ConfigError::Invalid(issues)));
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let cfg = load_config(cli)?;
    let cmd = match cli.command {
        Sub::Sweep => Command::Sweep,
        Sub::MismatchGrid => Command::MismatchGrid,
        Sub::PhaseOpt => Command::PhaseOpt,
        Sub::Tlfit => Command::Tlfit,
        Sub::Compare => Command::Compare,
    };
    let opts = RunOptions {
        out_dir: PathBuf::from(&cfg.output.dir),
        execution: if cli.sequential {
            Execution::Sequential
        } else {
            Execution::default()
        },
    };
    run_scenario(cmd, &cfg, &opts)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let err = config_issue("arguments", e.to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
