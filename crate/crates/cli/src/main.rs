use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use layernas_cli::{
    analyze_dir, load_config, run_experiment, validate_config, CliError, RunOptions,
};

#[derive(Parser)]
#[command(
    name = "layernas",
    about = "Layer-wise architecture search experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Write outputs here instead of the config's output_dir.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Comma-separated seeds replacing the config's seed list.
        #[arg(long, value_delimiter = ',')]
        seed_override: Option<Vec<u64>>,
    },
    /// Check a config file without running anything.
    Validate { config: PathBuf },
    /// Rebuild summary.csv from the trajectory CSVs in a results directory.
    Analyze { dir: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(e)) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(3)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            config,
            output_dir,
            seed_override,
        } => {
            let (cfg, base) = load_config(&config)?;
            let options = RunOptions {
                output_dir,
                seed_override,
            };
            let manifest = run_experiment(&cfg, &base, &options)?;
            emit(&format!("{}\n", manifest.display()));
            Ok(())
        }
        Command::Validate { config } => {
            let (cfg, base) = load_config(&config)?;
            validate_config(&cfg, &base)?;
            emit("ok\n");
            Ok(())
        }
        Command::Analyze { dir } => {
            let rows = analyze_dir(&dir)?;
            let mut out = String::from("checkpoint_seconds,mean,std,n\n");
            for row in rows {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    row.checkpoint_seconds, row.mean, row.std, row.runs_with_data
                ));
            }
            emit(&out);
            Ok(())
        }
    }
}

/// Writes to stdout, treating a closed pipe as a normal early exit.
fn emit(text: &str) {
    use std::io::Write;
    if let Err(e) = std::io::stdout().write_all(text.as_bytes()) {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
    }
}
