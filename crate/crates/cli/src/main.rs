use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use contract_sim::experiment::{self, load_summary, parse_config, render_report, ExperimentSpec, ReportFormat, Sweep};
use contract_sim::Result;
use serde_json::Value;

#[derive(Parser)]
#[command(name = "contract-sim", version, about = "Principal-agent market simulations with noisy type and effort signals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Master seed; overrides the config and ASYM_SEED.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (default: the config's output_dir, else ./out).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the experiment once per value of one market parameter.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Name of a market field, e.g. sigma_theta.
        #[arg(long)]
        param: String,
        /// Comma-separated values; each is read as JSON, else as a string.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the summary of a finished run.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "csv")]
        format: String,
    },
}

fn load_spec(config: &Path, seed: Option<u64>) -> Result<ExperimentSpec> {
    let env = std::env::var(experiment::SEED_ENV).ok();
    parse_config(config)?.with_seed_override(seed, env.as_deref())
}

fn output_dir(spec: &ExperimentSpec, out: Option<PathBuf>) -> PathBuf {
    out.or_else(|| spec.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out"))
}

fn execute(spec: &ExperimentSpec, out: Option<PathBuf>) -> Result<()> {
    let dir = output_dir(spec, out);
    let report = experiment::run(spec, &dir)?;
    eprintln!(
        "wrote {} record file(s) and summary to {}",
        report.record_files.len(),
        report.output_dir.display()
    );
    Ok(())
}

fn parse_value(raw: &str) -> Value {
    serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().to_string()))
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { config, seed, out } => execute(&load_spec(&config, seed)?, out),
        Command::Sweep {
            config,
            param,
            values,
            seed,
            out,
        } => {
            let mut spec = load_spec(&config, seed)?;
            spec.sweep = Some(Sweep {
                param,
                values: values.iter().map(|v| parse_value(v)).collect(),
            });
            execute(&spec, out)
        }
        Command::Report { input, format } => {
            let format: ReportFormat = format.parse()?;
            print!("{}", render_report(&load_summary(&input)?, format)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
