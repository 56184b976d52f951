//! `cbl`: point evaluation, sweeps, figure presets, oracle verification and
//! the consistency report.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use cbl_core::report::consistency_report;
use cbl_core::sweep::{evaluate_point, run_sweep, FigurePreset, Grid, Observable, Param, SweepSpec};
use cbl_core::verify::{verify, ToleranceProfile, VerifyScope};
use cbl_core::SystemParams;
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "cbl", version, about = "Squeezing and intensity of a degenerate coherent beat laser")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Steady-state observables at one point, as JSON
    Eval {
        #[command(flatten)]
        params: ParamFlags,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One-parameter sweep as CSV
    Sweep(SweepArgs),
    /// CSV data behind one of the figure presets
    Figure {
        /// fig2 .. fig7
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the closed form against the numerical oracles
    Verify {
        /// langevin, master or all
        scope: Option<String>,
        /// Same as the positional scope
        #[arg(long, conflicts_with = "scope")]
        oracle: Option<String>,
        #[arg(long, default_value = "default")]
        tolerance_profile: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Published formulas next to the reconciled ones
    Report {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Default)]
struct ParamFlags {
    /// Linear gain coefficient
    #[arg(long = "A", allow_negative_numbers = true)]
    gain: Option<f64>,
    /// Cavity damping constant
    #[arg(long, allow_negative_numbers = true)]
    kappa: Option<f64>,
    /// Superposition parameter in [-1, 1]
    #[arg(long, allow_negative_numbers = true)]
    eta: Option<f64>,
    /// Drive amplitude over atomic decay rate
    #[arg(long, allow_negative_numbers = true)]
    omega: Option<f64>,
    /// Mean photon number of the biased reservoir
    #[arg(long = "N", allow_negative_numbers = true)]
    noise: Option<f64>,
}

impl ParamFlags {
    fn given(&self) -> Vec<(Param, f64)> {
        [
            (Param::Gain, self.gain),
            (Param::Kappa, self.kappa),
            (Param::Eta, self.eta),
            (Param::Omega, self.omega),
            (Param::Noise, self.noise),
        ]
        .into_iter()
        .filter_map(|(p, v)| v.map(|v| (p, v)))
        .collect()
    }

    fn params(&self) -> Result<SystemParams> {
        let given = self.given();
        let missing: Vec<String> = Param::ALL
            .into_iter()
            .filter(|p| !given.iter().any(|(q, _)| q == p))
            .map(|p| format!("--{p}"))
            .collect();
        if !missing.is_empty() {
            bail!("missing {}", missing.join(", "));
        }
        let get = |p: Param| given.iter().find(|(q, _)| *q == p).map(|(_, v)| *v).unwrap_or_default();
        Ok(SystemParams::new(
            get(Param::Gain),
            get(Param::Kappa),
            get(Param::Eta),
            get(Param::Omega),
            get(Param::Noise),
        )?)
    }
}

#[derive(Args)]
struct SweepArgs {
    /// JSON sweep spec; flags below override its values
    #[arg(long)]
    spec: Option<PathBuf>,
    #[command(flatten)]
    params: ParamFlags,
    /// Swept parameter: A, kappa, eta, omega or N
    #[arg(long)]
    axis: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    start: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    stop: Option<f64>,
    #[arg(long)]
    step: Option<f64>,
    /// Comma-separated observable names
    #[arg(long, value_delimiter = ',')]
    outputs: Vec<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl SweepArgs {
    fn spec(&self) -> Result<SweepSpec> {
        let mut spec = match &self.spec {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                SweepSpec::from_json(&text)?
            }
            None => SweepSpec {
                fixed: Default::default(),
                axis: Param::Eta,
                grid: Grid::new(f64::NAN, f64::NAN, f64::NAN),
                outputs: Vec::new(),
            },
        };
        match &self.axis {
            Some(a) => spec.axis = a.parse()?,
            None if self.spec.is_none() => bail!("--axis is required without --spec"),
            None => {}
        }
        if let Some(v) = self.start {
            spec.grid.start = v;
        }
        if let Some(v) = self.stop {
            spec.grid.stop = v;
        }
        if let Some(v) = self.step {
            spec.grid.step = v;
        }
        if !self.outputs.is_empty() {
            spec.outputs = self
                .outputs
                .iter()
                .map(|s| s.trim().parse::<Observable>())
                .collect::<cbl_core::Result<_>>()?;
        }
        for (p, v) in self.params.given() {
            if p == spec.axis {
                bail!("--{p} conflicts with the sweep axis");
            }
            spec.fixed.insert(p, v);
        }
        spec.validate()?;
        Ok(spec)
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Runs the command; `Ok(false)` means a verification failure.
fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Eval { params, out } => {
            let p = params.params()?;
            let json = serde_json::to_string_pretty(&evaluate_point(&p).to_json())?;
            emit(out.as_deref(), &format!("{json}\n"))?;
        }
        Command::Sweep(args) => {
            let spec = args.spec()?;
            emit(args.out.as_deref(), &run_sweep(&spec)?)?;
        }
        Command::Figure { name, out } => {
            let preset: FigurePreset = name.parse()?;
            emit(out.as_deref(), &preset.csv()?)?;
        }
        Command::Verify {
            scope,
            oracle,
            tolerance_profile,
            out,
        } => {
            let scope: VerifyScope = scope.or(oracle).as_deref().unwrap_or("all").parse()?;
            let profile: ToleranceProfile = tolerance_profile.parse()?;
            let report = verify(scope, profile)?;
            emit(out.as_deref(), &report.render())?;
            return Ok(report.passed());
        }
        Command::Report { out } => emit(out.as_deref(), &consistency_report())?,
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {:#}", anyhow!(e));
            ExitCode::from(1)
        }
    }
}
