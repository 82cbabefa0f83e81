use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rabi_cli::{parse_config_for, run, ExperimentKind};

#[derive(Parser)]
#[command(
    name = "rabi",
    version,
    about = "Multi-qubit quantum Rabi model experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Transition frequencies along a resonator-frequency sweep
    Spectrum(Common),
    /// Locate an avoided crossing and its splitting
    Anticross(Common),
    /// Closed-form versus exact effective coupling over a coupling grid
    Effcoupling(Common),
    /// Time evolution through joint absorption and emission
    Dynamics(Common),
    /// Pi-pulse calibration scan
    Calibrate(Common),
    /// GHZ-state fidelity at a quarter Rabi period
    Ghz(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment config file
    #[arg(long)]
    config: PathBuf,
    /// CSV output path; overrides [output] path
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    match try_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn try_main() -> Result<()> {
    let cli = Cli::parse();
    let (kind, common) = match cli.command {
        Command::Spectrum(c) => (ExperimentKind::SpectrumSweep, c),
        Command::Anticross(c) => (ExperimentKind::Anticrossing, c),
        Command::Effcoupling(c) => (ExperimentKind::EffectiveCoupling, c),
        Command::Dynamics(c) => (ExperimentKind::Dynamics, c),
        Command::Calibrate(c) => (ExperimentKind::Calibrate, c),
        Command::Ghz(c) => (ExperimentKind::Ghz, c),
    };
    if let Some(n) = common.threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("cannot configure the thread pool")?;
    }
    let text = std::fs::read_to_string(&common.config)
        .with_context(|| format!("cannot read {}", common.config.display()))?;
    let spec =
        parse_config_for(&text, kind).with_context(|| format!("in {}", common.config.display()))?;
    let Some(out) = common.out.or_else(|| spec.output_path.clone()) else {
        bail!("no output path: pass --out or set `path` in [output]");
    };
    let report = run(&spec, &out)?;
    eprintln!(
        "wrote {} rows to {} ({:.2} s); manifest {}",
        report.rows,
        report.csv_path.display(),
        report.wall_time.as_secs_f64(),
        report.manifest_path.display()
    );
    Ok(())
}
