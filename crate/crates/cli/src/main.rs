use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dcmg_cli::commands::{self, CliError};
use dcmg_cli::exit;

/// DC microgrid stabilizer simulator: PI and fuzzy controllers, PSO tuning.
///
/// Exit codes: 0 success, 1 output or unexpected error, 2 configuration
/// error, 3 numerical divergence, 4 tuned fuzzy system missing.
#[derive(Debug, Parser)]
#[command(name = "dcmg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Run configuration file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the integration step, seconds.
    #[arg(long)]
    dt: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one closed-loop simulation; writes log.csv and metrics.toml.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Tune the fuzzy output membership functions with a particle swarm.
    Tune {
        #[command(flatten)]
        common: Common,
        /// Directory for the tuned system, convergence and trajectory CSVs.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run PI, initial fuzzy and tuned fuzzy on the three regimes.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Tuned fuzzy system; defaults to controller.fis_path.
        #[arg(long)]
        fis: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { common } => {
            let cfg = commands::load_config(&common.config, common.seed, common.dt)?;
            let out = commands::simulate(&cfg)?;
            let m = &out.metrics;
            println!("log: {}", out.log_path.display());
            println!("metrics: {}", out.metrics_path.display());
            println!(
                "Q = {:.3} C, iae = {:.4} %, max deviation = {:.3} %, within 1 %: {:.4}",
                m.q_battery, m.iae_pct, m.max_dev_pct, m.regulation_ok_fraction
            );
        }
        Command::Tune { common, out } => {
            let cfg = commands::load_config(&common.config, common.seed, common.dt)?;
            let total = cfg.tuner.swarm.iterations;
            let t = commands::tune(&cfg, &out, |i, c| eprintln!("iteration {i}/{total}: best cost {c:.6}"))?;
            let s = &t.summary;
            println!("initial cost: {:.6}", s.initial_cost);
            println!("best cost: {:.6}", s.best_cost);
            println!("tuned system: {}", out.join(commands::TUNED_FIS_FILE).display());
        }
        Command::Compare { common, fis } => {
            let cfg = commands::load_config(&common.config, common.seed, common.dt)?;
            let report = commands::compare(&cfg, fis.as_deref())?;
            print!("{}", report.render());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::from(exit::OK as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
