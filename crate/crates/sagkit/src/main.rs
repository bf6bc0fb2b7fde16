use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sagkit::output::{emit_outputs, report, Format};
use sagkit::runner::{run_experiment, RunStatus};
use sagkit::{suites, ExperimentConfig, HarnessError, Result};

#[derive(Parser)]
#[command(name = "sagkit", version, about = "Run SAG and baseline optimizers on benchmark problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run only this seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Both)]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML file.
    Run { config: PathBuf },
    /// Run a named preset.
    Suite {
        #[arg(value_parser = suites::SUITES)]
        name: String,
    },
    /// Rebuild summary.csv from the trajectory files in a directory.
    Report { dir: PathBuf },
}

fn execute(cli: &Cli, mut config: ExperimentConfig, base: &Path) -> Result<bool> {
    if let Some(seed) = cli.seed {
        config.seeds = Some(vec![seed]);
    }
    let dir = match (&cli.out, &config.output) {
        (Some(out), _) => out.join(&config.name),
        (None, Some(out)) => out.clone(),
        (None, None) => base.join(&config.name),
    };
    let (resolved, records) = run_experiment(&config)?;
    emit_outputs(&dir, Some(&resolved), &records, cli.format)?;
    let diverged = records.iter().filter(|r| r.status != RunStatus::Completed).count();
    println!(
        "{}: {} runs ({} diverged), config {} -> {}",
        resolved.name,
        records.len(),
        diverged,
        resolved.hash(),
        dir.display()
    );
    Ok(!records.is_empty() && diverged == records.len())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = (|| -> Result<bool> {
        match &cli.command {
            Command::Run { config } => {
                let text = std::fs::read_to_string(config)
                    .map_err(|source| HarnessError::Io { path: config.clone(), source })?;
                execute(&cli, ExperimentConfig::from_toml(&text)?, Path::new("out"))
            }
            Command::Suite { name } => {
                let mut all_diverged = true;
                for config in suites::suite(name)? {
                    all_diverged &= execute(&cli, config, Path::new("out"))?;
                }
                Ok(all_diverged)
            }
            Command::Report { dir } => {
                let rows = report(dir)?;
                println!("{} runs summarized into {}", rows.len(), dir.join("summary.csv").display());
                Ok(false)
            }
        }
    })();
    match result {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => {
            eprintln!("every run diverged");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
