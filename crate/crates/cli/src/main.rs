use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dynsamp::config::ScenarioConfig;
use dynsamp::workflow;
use dynsamp::Error;

#[derive(Parser)]
#[command(name = "dynsamp", version, about = "Dynamic network sampling and epidemic simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every replicate of one scenario.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        replicates: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        snapshot_out: Option<PathBuf>,
    },
    /// Paired runs of two scenarios from a shared snapshot.
    Compare {
        #[arg(long)]
        baseline: PathBuf,
        #[arg(long)]
        variant: PathBuf,
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        replicates: u64,
        #[arg(long)]
        seed: u64,
    },
    /// Run a fresh world for N steps and save it.
    Burnin {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        steps: u64,
        #[arg(long)]
        snapshot_out: PathBuf,
        #[arg(long)]
        seed: u64,
    },
    /// Re-run a scenario across values of one dotted parameter.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',')]
        values: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Simulate {
            config,
            out,
            replicates,
            seed,
            snapshot_out,
        } => {
            let mut cfg = ScenarioConfig::load(&config)?;
            if let Some(r) = replicates {
                cfg.run.replicates = r;
            }
            if let Some(s) = seed {
                cfg.run.seed = s;
            }
            if snapshot_out.is_some() {
                cfg.run.snapshot_out = snapshot_out;
            }
            cfg.validate()?;
            let outcome = workflow::simulate(&cfg, &out)?;
            log::info!("{} replicate(s) written to {}", outcome.done.len(), out.display());
            outcome.into_result()?;
        }
        Command::Compare {
            baseline,
            variant,
            snapshot,
            out,
            replicates,
            seed,
        } => {
            let b = ScenarioConfig::load(&baseline)?;
            let v = ScenarioConfig::load(&variant)?;
            let c = workflow::compare(&b, &v, &snapshot, &out, replicates, seed)?;
            println!(
                "variant lower in {}/{} replicates (sign test p = {:.4})",
                c.variant_lower, c.pairs, c.sign_test_p
            );
        }
        Command::Burnin {
            config,
            steps,
            snapshot_out,
            seed,
        } => {
            let mut cfg = ScenarioConfig::load(&config)?;
            cfg.run.seed = seed;
            let sim = workflow::burnin(&cfg, steps, &snapshot_out)?;
            log::info!(
                "saved step {} with population {} to {}",
                sim.world.step,
                sim.world.population(),
                snapshot_out.display()
            );
        }
        Command::Sweep {
            config,
            param,
            values,
            out,
        } => {
            let cfg = ScenarioConfig::load(&config)?;
            let rows = workflow::sweep(&cfg, &param, &values, &out)?;
            log::info!("{} summary rows written to {}", rows.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
