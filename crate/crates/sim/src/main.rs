use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use sfedca_sim::{config, runner};

#[derive(Parser)]
#[command(name = "sfedca", version, about = "Federated spiking-network training simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its CSV and JSON results.
    Run {
        config: PathBuf,
        /// Output directory.
        #[arg(short, long, default_value = "out")]
        output: PathBuf,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Validate and print the resolved config without training.
        #[arg(long)]
        dry_run: bool,
    },
    /// Write the configured train and test sets as CSV.
    Export {
        config: PathBuf,
        #[arg(short, long, default_value = "data")]
        output: PathBuf,
    },
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Run { config, output, seed, dry_run } => {
            let mut cfg = config::parse_config(&config)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if dry_run {
                let prepared = runner::prepare(&cfg)?;
                print!("{cfg}");
                let net = &prepared.federation.network;
                println!("\n# train {} samples, test {}, {} classes", prepared.train.len(), prepared.test.len(), prepared.train.classes());
                println!("# client sizes {:?}", prepared.partition.sizes());
                println!("# neurons per layer {:?}, flops per layer {:?}", net.widths(), net.count_flops());
                return Ok(());
            }
            let summary = runner::run(&cfg, &output).with_context(|| format!("running {}", config.display()))?;
            println!(
                "{} rounds, final accuracy {:.4}, total energy {:.4e} pJ, results in {}",
                summary.rounds,
                summary.final_accuracy,
                summary.total_pj,
                output.display()
            );
            for t in &summary.rounds_to_target {
                match t.round {
                    Some(r) => println!("target {}: round {r}", t.target),
                    None => println!("target {}: not reached", t.target),
                }
            }
        }
        Command::Export { config, output } => {
            let cfg = config::parse_config(&config)?;
            let (train, test) = runner::export(&cfg, &output)?;
            println!("wrote {train} train and {test} test samples to {}", output.display());
        }
    }
    Ok(())
}
