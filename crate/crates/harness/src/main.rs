use std::path::PathBuf;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "wignerlab", version, about = "Monte Carlo checks of eigenvector equipartition for sums of Wigner matrices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Worker threads (default: all cores). Results do not depend on it.
        #[arg(long)]
        workers: Option<usize>,
        /// Output directory (overrides `output.dir` in the config).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a table merged from one or more summary files.
    Report {
        #[arg(required = true)]
        summaries: Vec<PathBuf>,
    },
    /// List the built-in entry distributions with their cumulants.
    ListDistributions,
}

fn main() {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { config, workers, out } => wignerlab::run_command(&config, workers, out),
        Command::Report { summaries } => wignerlab::report_command(&summaries),
        Command::ListDistributions => {
            print!("{}", wignerlab::distributions::listing());
            wignerlab::EXIT_PASS
        }
    };
    std::process::exit(code);
}
