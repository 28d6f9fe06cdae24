use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use regafem::experiment::{self, ExperimentConfig};
use regafem::Error;

#[derive(Parser)]
#[command(name = "regafem", version, about = "Adaptive FEM for regularized line-source problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write run.csv, mesh.vtk, solution.vtk, summary.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (overrides the config).
        #[arg(long)]
        threads: Option<usize>,
        /// Zero the wall-clock column so repeated runs are byte-identical.
        #[arg(long)]
        deterministic: bool,
    },
    /// Check a config without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Fit the log-log slope of energy error against dofs.
    Slopes {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long, default_value_t = 5)]
        last: usize,
    },
}

const VALIDATION: u8 = 1;
const NUMERICAL: u8 = 2;

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(if e.is_numerical() { NUMERICAL } else { VALIDATION })
}

fn load(path: &PathBuf) -> Result<ExperimentConfig, ExitCode> {
    ExperimentConfig::load(path).map_err(|e| fail(&e))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out, threads, deterministic } => {
            let mut cfg = match load(&config) {
                Ok(c) => c,
                Err(code) => return code,
            };
            if threads.is_some() {
                cfg.threads = threads;
            }
            cfg.deterministic |= deterministic;
            if let Err(e) = cfg.validate() {
                return fail(&e);
            }
            if let Some(n) = cfg.threads {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    eprintln!("error: {e}");
                    return ExitCode::from(VALIDATION);
                }
            }
            match experiment::run(&cfg, &out) {
                Ok(summary) => {
                    for w in &summary.warnings {
                        eprintln!("warning: {w}");
                    }
                    println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
        Command::Validate { config } => {
            let cfg = match load(&config) {
                Ok(c) => c,
                Err(code) => return code,
            };
            let problems = cfg.problems();
            if problems.is_empty() {
                println!("ok");
                ExitCode::SUCCESS
            } else {
                for p in problems {
                    eprintln!("{p}");
                }
                ExitCode::from(VALIDATION)
            }
        }
        Command::Slopes { csv, last } => {
            let record = match std::fs::File::open(&csv).map_err(Error::from).and_then(experiment::read_csv) {
                Ok(r) => r,
                Err(e) => return fail(&e),
            };
            let pts = experiment::outer_points(&record);
            match experiment::slope_fit(&pts, last) {
                Ok(s) => {
                    println!("{s:.6}");
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
    }
}
