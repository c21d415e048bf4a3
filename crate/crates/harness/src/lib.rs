//! Experiment runner for wignerlab: reads a JSON configuration, runs the
//! matching verifier and writes a trial CSV, a summary JSON and a manifest.

pub mod config;
pub mod distributions;
pub mod output;
pub mod report;
pub mod run;

use std::path::{Path, PathBuf};

pub use config::{ConfigError, Experiment, ExperimentConfig};
pub use run::{execute, RunError, RunOutput, Summary, SummaryRow};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// `run` subcommand. Returns the process exit code; diagnostics go to stderr.
pub fn run_command(config: &Path, workers: Option<usize>, out: Option<PathBuf>) -> i32 {
    let started = chrono::Utc::now();
    let cfg = match ExperimentConfig::load(config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let seed = match cfg.resolve_seed(std::env::var(config::SEED_ENV).ok().as_deref()) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let workers = workers.unwrap_or_else(rayon::current_num_threads).max(1);
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start {workers} workers: {e}");
            return EXIT_CONFIG;
        }
    };
    let result = pool.install(|| execute(&cfg, seed));
    let output = match result {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let dir = out.or_else(|| cfg.output.dir.clone()).unwrap_or_else(|| PathBuf::from("wignerlab-out"));
    match output::write_all(&dir, &output.summary, &output.trial_stats, started, workers) {
        Ok(w) => {
            print!("{}", report::render(std::slice::from_ref(&output.summary)));
            println!("wrote {}, {}, {}", w.trials.display(), w.summary.display(), w.manifest.display());
        }
        Err(e) => {
            eprintln!("error: cannot write results to {}: {e}", dir.display());
            return EXIT_CONFIG;
        }
    }
    if output.summary.verdict.passed() {
        EXIT_PASS
    } else {
        EXIT_FAIL
    }
}

/// `report` subcommand.
pub fn report_command(paths: &[PathBuf]) -> i32 {
    let mut summaries = Vec::new();
    for p in paths {
        match report::load(p) {
            Ok(s) => summaries.push(s),
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_CONFIG;
            }
        }
    }
    print!("{}", report::render(&summaries));
    if report::all_pass(&summaries) {
        EXIT_PASS
    } else {
        EXIT_FAIL
    }
}
