use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use tslb::bench::{scaling_run, BenchConfig};
use tslb::cases::{execute, preset, run_case, verdict};
use tslb::config::SimulationConfig;

/// Lattice Boltzmann solver with a race-free parallel push kernel.
///
/// The worker count can be overridden with the TSLB_WORKERS environment
/// variable.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the case described by a configuration file.
    Run { config: PathBuf },
    /// Run a built-in case (cavity, droplet-oscillation, head-on-impact) and
    /// check it against its reference.
    Validate {
        case: String,
        /// Write snapshots, time series and summary here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the number of time steps.
        #[arg(long)]
        steps: Option<u64>,
    },
    /// Time the kernel once per worker count in `bench_workers`.
    Bench { config: PathBuf },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { config } => {
            let cfg = SimulationConfig::load(&config)?;
            let result = run_case(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&result.summary)?);
            log::info!("artifacts in {}", cfg.output_dir.display());
            Ok(true)
        }
        Command::Validate { case, out, steps } => {
            let mut cfg = preset(&case)?;
            if let Some(n) = steps {
                cfg.steps = n;
            }
            let result = execute(&cfg, out.as_deref()).with_context(|| format!("running {case}"))?;
            let nci = cfg.color.is_some_and(|c| c.nci_strength > 0.0);
            let (ok, line) = verdict(&result.summary.observables, nci);
            println!("{} {case}: {line}", if ok { "PASS" } else { "FAIL" });
            Ok(ok)
        }
        Command::Bench { config } => {
            let cfg = SimulationConfig::load(&config)?;
            let bench = BenchConfig {
                lattice: cfg.lattice,
                dims: cfg.dims,
                precision: cfg.precision,
                omega: cfg.collision()?.omega,
                steps: cfg.steps,
                warmup: cfg.warmup,
                workers: cfg.bench_workers.clone(),
                machine: cfg.machine,
            };
            let table = scaling_run(&bench)?;
            println!("{}", serde_json::to_string_pretty(&table)?);
            Ok(table.bit_identical)
        }
    }
}
