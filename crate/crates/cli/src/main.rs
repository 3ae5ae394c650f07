use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use springlattice_cli::{catalog_listing, run, RunOptions};

#[derive(Parser)]
#[command(name = "springlattice", version, about = "Spring-lattice density queries and experiments")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every task of a config file.
    Run {
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Replaces the config seeds by consecutive seeds from this one.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// List the built-in lattices.
    Catalog,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    match cli.command {
        Command::Catalog => {
            print!("{}", catalog_listing());
            ExitCode::SUCCESS
        }
        Command::Run { config, output_dir, seed } => match run(&config, &RunOptions { output_dir, seed }) {
            Ok(dir) => {
                println!("results in {}", dir.display());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::FAILURE
            }
        },
    }
}
