use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use emt_harness::{compare, presets, run_experiment, ExperimentConfig, HarnessError};

#[derive(Parser)]
#[command(name = "emt", version, about = "Evolutionary multitasking experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed of an experiment config and write its report.
    Run {
        config: PathBuf,
        /// Output directory (default: config `output_dir`, then
        /// `$EMT_OUTPUT_ROOT/<config stem>`, then `results/<config stem>`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Parallel runs (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Compare two or more report directories over the same problem.
    Compare {
        #[arg(required = true, num_args = 2..)]
        dirs: Vec<PathBuf>,
        /// Also write the table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Named problems usable as `{"kind": "preset", "name": ...}`.
    Presets {
        #[command(subcommand)]
        action: PresetsAction,
    },
}

#[derive(Subcommand)]
enum PresetsAction {
    List,
}

fn execute(command: Command) -> Result<(), HarnessError> {
    match command {
        Command::Run { config, out, jobs } => {
            let experiment = ExperimentConfig::load(&config)?;
            let dir = experiment.output_dir(&config, out.as_deref());
            let report = run_experiment(&experiment, &dir, jobs)?;
            for t in &report.tasks {
                let rate = t.success_rate.map(|r| format!("  success {r:.1}%")).unwrap_or_default();
                println!(
                    "{} task {} ({}): mean best {:.6}{rate}",
                    report.engine, t.task_id, t.name, t.mean_best_fitness
                );
            }
            println!("report written to {}", dir.display());
        }
        Command::Compare { dirs, csv } => {
            let table = compare(&dirs)?;
            print!("{}", table.to_table());
            if let Some(path) = csv {
                table.write_csv(&path)?;
            }
        }
        Command::Presets { action: PresetsAction::List } => {
            for p in presets::PRESETS {
                println!("{:<22} {}", p.name, p.description);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
