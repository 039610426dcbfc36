use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use log::{error, info};

use softhom::config::ExperimentConfig;
use softhom::experiments::{self, Outcome};
use softhom::{plot, report, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Command {
    /// Correctors and homogenized tensor for one delta.
    Cell,
    /// Asymptotics of the cell solutions as delta goes to zero.
    DeltaSweep,
    /// Two-scale expansion residual over eps and delta.
    RateSweep,
    /// Lipschitz profiles, Caccioppoli ratios and flatness descent.
    Regularity,
    /// Aggregate the CSVs in the output directory into a summary.
    Report,
    /// Write SVG charts and gnuplot scripts for the sweep CSVs.
    Plot,
}

#[derive(Debug, Parser)]
#[command(
    name = "softhom",
    version,
    about = "Homogenization experiments for elasticity with soft inclusions"
)]
struct Cli {
    #[arg(value_enum)]
    command: Command,

    /// TOML configuration; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Output directory, overriding `[output] dir`.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Worker threads.
    #[arg(long, env = "SOFTHOM_THREADS")]
    threads: Option<usize>,
}

fn print_checks(outcome: &Outcome) {
    for c in &outcome.checks {
        println!(
            "{} criterion {:>2} {}::{} = {} ({})",
            if c.passed { "PASS" } else { "FAIL" },
            c.criterion,
            outcome.name,
            c.name,
            experiments::fmt_f(c.value),
            c.threshold
        );
    }
}

fn run(cli: &Cli) -> Result<bool> {
    let cfg = match &cli.config {
        Some(path) => ExperimentConfig::from_path(path)?,
        None => ExperimentConfig::default(),
    };
    let out = cli.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    let outcome = match cli.command {
        Command::Cell => experiments::run_cell(&cfg, &out)?,
        Command::DeltaSweep => experiments::run_delta_sweep(&cfg, &out)?,
        Command::RateSweep => experiments::run_rate_sweep(&cfg, &out)?,
        Command::Regularity => experiments::run_regularity(&cfg, &out)?,
        Command::Report => {
            let rep = report::run_report(&out)?;
            print!("{}", rep.render());
            return Ok(rep.passed());
        }
        Command::Plot => {
            for f in plot::emit_plots(&out)? {
                info!("wrote {}", f.display());
            }
            return Ok(true);
        }
    };
    for a in &outcome.artifacts {
        info!("wrote {}", a.display());
    }
    print_checks(&outcome);
    Ok(outcome.passed())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(k) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
        {
            error!("{e}");
            return ExitCode::from(1);
        }
    }
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
