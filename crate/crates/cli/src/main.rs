//! `bouchaud <experiment> --config PATH [--seed N] [--workers N] [--out DIR]
//! [--tolerance-profile ci|paper]`
//!
//! Exit status: 0 if every declared tolerance passes, 1 if some check
//! fails, 2 on usage or configuration errors.

use std::path::PathBuf;
use std::process::ExitCode;

use bouchaud_core::{ExperimentConfig, ExperimentKind, ToleranceProfile};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "bouchaud", version, about = "Trap model experiments")]
struct Cli {
    #[command(subcommand)]
    experiment: Command,
}

#[derive(Subcommand, Clone)]
enum Command {
    /// Two-time correlation against the arcsine law
    AgingCurve(Flags),
    /// Laplace transform of the rescaled clock
    ClockMarginal(Flags),
    /// Hitting time of a Poisson cloud on the hypercube
    HittingLaw(Flags),
    /// Exact hypercube and torus potential-theory tables
    PotentialReport(Flags),
    /// Empirical proxies of the sufficient conditions for aging
    Diagnostics(Flags),
}

#[derive(clap::Args, Clone)]
struct Flags {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    tolerance_profile: Option<Profile>,
}

#[derive(ValueEnum, Clone, Copy)]
enum Profile {
    Ci,
    Paper,
}

fn load(kind: ExperimentKind, flags: &Flags) -> Result<ExperimentConfig, String> {
    let path = flags.config.as_ref().ok_or("--config PATH is required")?;
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let path = path.display();
    let has_kind = text.lines().any(|l| {
        l.split('#')
            .next()
            .unwrap_or("")
            .split_once('=')
            .is_some_and(|(k, _)| k.trim() == "experiment")
    });
    // a config without an experiment key takes it from the subcommand
    let text = if has_kind {
        text
    } else {
        format!("experiment = {kind}\n{text}")
    };
    let line_shift = usize::from(!has_kind);
    let mut cfg = ExperimentConfig::parse(&text).map_err(|e| match e {
        bouchaud_core::Error::Config { line, msg } => {
            format!("{path}:{}: {msg}", line.saturating_sub(line_shift))
        }
        other => format!("{path}: {other}"),
    })?;
    if cfg.experiment != kind {
        return Err(format!("{path} configures {}, not {kind}", cfg.experiment));
    }
    if let Some(s) = flags.seed {
        cfg.seed = s;
    }
    if let Some(w) = flags.workers {
        cfg.workers = w;
    }
    if let Some(o) = &flags.out {
        cfg.output = o.clone();
    }
    if let Some(p) = flags.tolerance_profile {
        cfg.profile = match p {
            Profile::Ci => ToleranceProfile::Ci,
            Profile::Paper => ToleranceProfile::Paper,
        };
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, flags) = match cli.experiment {
        Command::AgingCurve(f) => (ExperimentKind::AgingCurve, f),
        Command::ClockMarginal(f) => (ExperimentKind::ClockMarginal, f),
        Command::HittingLaw(f) => (ExperimentKind::HittingLaw, f),
        Command::PotentialReport(f) => (ExperimentKind::PotentialReport, f),
        Command::Diagnostics(f) => (ExperimentKind::Diagnostics, f),
    };
    let cfg = match load(kind, &flags) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match bouchaud_core::run(&cfg) {
        Ok(report) => {
            for p in report.points.iter().filter(|p| p.pass.is_some()) {
                println!(
                    "{:<5} {} param={} {}estimate={:.6} target={:.6} tol={}",
                    if p.pass == Some(true) { "PASS" } else { "FAIL" },
                    p.quantity,
                    p.param,
                    p.param2.map(|x| format!("param2={x} ")).unwrap_or_default(),
                    p.estimate,
                    p.target.unwrap_or(f64::NAN),
                    p.tolerance.unwrap_or(f64::NAN),
                );
            }
            println!(
                "{} in {:.1}s, results in {}",
                if report.pass { "pass" } else { "fail" },
                report.wall_clock_secs,
                cfg.output.display()
            );
            if report.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
