use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use smop::harness::{emit, run_experiment, run_front_experiment, write_csv, write_json};
use smop::harness::{ExperimentSpec, OutputFormat};
use smop::{Error, Result};

#[derive(Parser)]
#[command(name = "smop", version, about = "Stochastic multi-objective trust-region experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every simulation of an experiment and write the metric table.
    Run(Common),
    /// Explore the Pareto front and write the archive.
    Front(Common),
    /// Check an experiment file without running it.
    Validate(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment file (flat key = value).
    config: PathBuf,
    /// Override a key, e.g. `--set k_max=100`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output path; takes precedence over `output` / `archive_output`.
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long, value_parser = ["csv", "json"])]
    format: Option<String>,
}

impl Common {
    fn load(&self) -> Result<ExperimentSpec> {
        let mut overrides = self.set.clone();
        if let Some(format) = &self.format {
            overrides.push(format!("output_format={format}"));
        }
        let spec = ExperimentSpec::from_file(&self.config, &overrides)?;
        Ok(match self.seed {
            Some(seed) => spec.with_seed(seed)?,
            None => spec,
        })
    }
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn run(args: &Common) -> Result<()> {
    let spec = args.load()?;
    let result = run_experiment(&spec)?;
    match args.output.as_ref().or(spec.output.as_ref()) {
        Some(path) => {
            let sidecar = emit(&result, path, spec.output_format)?;
            info!("wrote {} and {}", path.display(), sidecar.display());
        }
        None => {
            let stdout = Path::new("<stdout>");
            let mut out = std::io::stdout().lock();
            let written = match spec.output_format {
                OutputFormat::Csv => write_csv(&result.rows, &mut out).map_err(|e| e.to_string()),
                OutputFormat::Json => write_json(&result.rows, &mut out).map_err(|e| e.to_string()),
            };
            written.map_err(|message| Error::Output {
                path: stdout.into(),
                message,
            })?;
            out.flush().map_err(io_error(stdout))?;
        }
    }
    if !result.summary.failures.is_empty() {
        return Err(Error::Output {
            path: PathBuf::from(&args.config),
            message: format!("{} simulation(s) failed", result.summary.failures.len()),
        });
    }
    Ok(())
}

fn front(args: &Common) -> Result<()> {
    let spec = args.load()?;
    let output = run_front_experiment(&spec)?;
    for (i, round) in output.rounds.iter().enumerate() {
        info!(
            "round {i}: {} candidates, {} failed restarts, archive {}",
            round.candidates, round.failures, round.archive_size
        );
    }
    match args.output.as_ref().or(spec.archive_output.as_ref()) {
        Some(path) => output.archive.save_csv(path)?,
        None => {
            let stdout = Path::new("<stdout>");
            let mut out = std::io::stdout().lock();
            output.archive.write_csv(&mut out).map_err(|e| Error::Output {
                path: stdout.into(),
                message: e.to_string(),
            })?;
            out.flush().map_err(io_error(stdout))?;
        }
    }
    Ok(())
}

fn validate(args: &Common) -> Result<()> {
    let spec = args.load()?;
    let oracle = spec.problem.build()?;
    let dimension = oracle.spec().dimension;
    spec.start(dimension)?;
    spec.front_config(dimension)?;
    println!("{}: ok ({} variables, {} objectives)", args.config.display(), dimension, oracle.spec().num_objectives);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(args) => run(args),
        Command::Front(args) => front(args),
        Command::Validate(args) => validate(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 3 })
        }
    }
}
