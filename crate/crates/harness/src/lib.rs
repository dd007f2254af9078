//! Experiment harness for the `iwatsuka` solvers and the `iwsk` command.

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;

use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};

pub use config::{Experiment, Initial, RunConfig};
pub use error::HarnessError;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    /// Full model at one ε.
    Simulate,
    /// Averaged model.
    Effective,
    /// Full runs over the ε sweep against one averaged run.
    Converge,
    /// Residual of the averaging identity over the ε sweep.
    Identity,
    /// Single-mode data against its closed form.
    Polarized,
    /// Two-sided bounds between the ε-weighted and plain norms.
    Normequiv,
}

impl From<Command> for Experiment {
    fn from(c: Command) -> Self {
        match c {
            Command::Simulate => Experiment::Simulate,
            Command::Effective => Experiment::Effective,
            Command::Converge => Experiment::Converge,
            Command::Identity => Experiment::Identity,
            Command::Polarized => Experiment::Polarized,
            Command::Normequiv => Experiment::Normequiv,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "iwsk", version, about = "Strong-field NLS experiments")]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`, default `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `seed`, and the seed of `random(..)` initial data.
    #[arg(long)]
    seed: Option<u64>,
    /// Write binary snapshots of every recorded sample.
    #[arg(long)]
    snapshots: bool,
}

/// Parses `args` (program name first), runs, and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(line) => {
            println!("{line}");
            0
        }
        Err(e) => {
            eprintln!("iwsk: {e}");
            e.exit_code()
        }
    }
}

fn resolve(cli: &Cli) -> Result<RunConfig, HarnessError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
        if let Initial::Random(_) = cfg.initial_data()? {
            cfg.initial = Initial::Random(seed).to_string();
        }
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = Some(out.to_string_lossy().into_owned());
    }
    cfg.snapshots |= cli.snapshots;
    cfg.validate_for(cli.command.into())?;
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<String, HarnessError> {
    let cfg = resolve(cli)?;
    let exp: Experiment = cli.command.into();
    let dir = PathBuf::from(cfg.output_dir.clone().unwrap_or_else(|| "out".into()));
    std::fs::create_dir_all(&dir)?;
    run_experiment(exp, &cfg, &dir)
}

/// Runs `exp` and writes its results into `dir`; returns a one-line summary.
pub fn run_experiment(
    exp: Experiment,
    cfg: &RunConfig,
    dir: &Path,
) -> Result<String, HarnessError> {
    let json = dir.join(format!("{}.json", exp.name()));
    let csv_path = dir.join(format!("{}.csv", exp.name()));
    match exp {
        Experiment::Simulate | Experiment::Effective => {
            let (line, traj) = if exp == Experiment::Simulate {
                let (s, traj) = experiments::simulate(cfg)?;
                output::write_json(&json, &s)?;
                let line = format!(
                    "simulate: eps={} steps={} mass_drift={:.3e} leakage={:.3e}",
                    s.epsilon, s.steps, s.mass_drift, s.table_leakage
                );
                (line, traj)
            } else {
                let (s, traj) = experiments::effective(cfg)?;
                output::write_json(&json, &s)?;
                let line = format!(
                    "effective: steps={} n_theta={} mass_drift={:.3e}",
                    s.steps, s.n_theta, s.mass_drift
                );
                (line, traj)
            };
            output::write_trajectory_csv(&csv_path, &traj)?;
            if cfg.snapshots {
                output::write_snapshots(&dir.join("snapshots"), &traj)?;
            }
            Ok(line)
        }
        Experiment::Converge => {
            let s = experiments::converge(cfg)?;
            output::write_json(&json, &s)?;
            let rows = s.epsilons.iter().zip(&s.errors).zip(&s.dts);
            output::write_atomic(
                &csv_path,
                &table(
                    &["epsilon", "error", "dt"],
                    rows.map(|((e, r), d)| vec![*e, *r, *d]),
                )?,
            )?;
            Ok(format!(
                "converge: slope={} decreasing={} noise_floor={:.3e}",
                fmt_opt(s.slope),
                s.strictly_decreasing,
                s.noise_floor
            ))
        }
        Experiment::Identity => {
            let s = experiments::identity(cfg)?;
            output::write_json(&json, &s)?;
            let rows = s
                .epsilons
                .iter()
                .zip(&s.residuals_final)
                .zip(&s.residuals_sup);
            output::write_atomic(
                &csv_path,
                &table(
                    &["epsilon", "residual_final", "residual_sup"],
                    rows.map(|((e, f), m)| vec![*e, *f, *m]),
                )?,
            )?;
            Ok(format!(
                "identity: slope_sup={} slope_final={} degenerate={}",
                fmt_opt(s.slope_sup),
                fmt_opt(s.slope_final),
                s.degenerate
            ))
        }
        Experiment::Polarized => {
            let s = experiments::polarized(cfg)?;
            output::write_json(&json, &s)?;
            let rows = s.times.iter().zip(&s.deviations);
            output::write_atomic(
                &csv_path,
                &table(&["t", "deviation"], rows.map(|(t, d)| vec![*t, *d]))?,
            )?;
            Ok(format!(
                "polarized: mode={} max_deviation={:.3e} max_leakage={:.3e}",
                s.mode, s.max_deviation, s.max_leakage
            ))
        }
        Experiment::Normequiv => {
            let s = experiments::normequiv(cfg)?;
            output::write_json(&json, &s)?;
            let eps: Vec<String> = s
                .entries
                .iter()
                .map(|e| format!("m={}:{:.4}", e.m, e.eps_m))
                .collect();
            Ok(format!(
                "normequiv: {} gcal_constant={:.4}",
                eps.join(" "),
                s.gcal_constant
            ))
        }
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |v| format!("{v:.4}"))
}

fn table(header: &[&str], rows: impl Iterator<Item = Vec<f64>>) -> Result<Vec<u8>, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(f64::to_string))?;
    }
    w.into_inner().map_err(|e| HarnessError::Io(e.into_error()))
}
