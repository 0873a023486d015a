//! The `i2mufs` binary: thin argument parsing around the library commands.

use clap::{Parser, Subcommand};
use i2mufs_cli::{cmd_bench, cmd_run, cmd_synth, BenchConfig, RunConfig, SynthConfig};

#[derive(Parser)]
#[command(
    name = "i2mufs",
    about = "Incremental unsupervised feature selection on incomplete multi-view streams",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Stream a dataset through the solver and report selected features
    /// with their clustering quality.
    Run(RunConfig),
    /// Measure incremental speedup against full recomputation.
    Bench(BenchConfig),
    /// Generate a planted-subspace synthetic dataset.
    Synth(SynthConfig),
}

fn main() {
    env_logger::init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(cfg) => cmd_run(&cfg).map(|paths| {
            for path in paths {
                println!("{}", path.display());
            }
        }),
        Command::Bench(cfg) => cmd_bench(&cfg).map(|path| println!("{}", path.display())),
        Command::Synth(cfg) => cmd_synth(&cfg).map(|path| println!("{}", path.display())),
    };
    if let Err(err) = outcome {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
