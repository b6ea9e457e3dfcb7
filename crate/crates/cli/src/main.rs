use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qwalkdec_core::oracles;
use qwalkdec_runner::{execute, load_config, validate, RunError, RunOptions};

#[derive(Parser)]
#[command(name = "qwalkdec", version, about = "Quantum walks with decoherence: experiments and reference values")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (JSON).
    config: PathBuf,
    /// Master seed, replacing the one in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: QWALKDEC_THREADS, else all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory, replacing `output.dir`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Horizon replacing the config's (steps or time).
    #[arg(long)]
    horizon_override: Option<f64>,
}

impl RunArgs {
    fn options(&self) -> RunOptions {
        RunOptions {
            seed: self.seed,
            threads: self.threads,
            out_dir: self.out_dir.clone(),
            horizon_override: self.horizon_override,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment, including any sweep it declares.
    Run(RunArgs),
    /// Run a parameter sweep; the config must declare `sweep`.
    Sweep(RunArgs),
    /// Check a config and report the number of sweep points.
    Validate(RunArgs),
    /// Print closed-form reference values; `oracles list` shows the names.
    Oracles {
        name: String,
        #[arg(allow_negative_numbers = true)]
        params: Vec<f64>,
    },
}

fn run(cli: Cli) -> Result<(), RunError> {
    match cli.command {
        Command::Run(a) => run_experiment(&a, false),
        Command::Sweep(a) => run_experiment(&a, true),
        Command::Validate(a) => {
            let (cfg, _) = load_config(&a.config)?;
            let n = validate(&cfg, &a.options())?;
            println!("{}: valid, {n} point(s)", cfg.experiment_id);
            Ok(())
        }
        Command::Oracles { name, params } => {
            if name == "list" {
                for n in oracles::ORACLE_NAMES {
                    println!("{n}");
                }
                return Ok(());
            }
            let values = oracles::evaluate(&name, &params).map_err(|e| match e {
                qwalkdec_core::Error::Parameter { name, message } => RunError::Config {
                    field: name.to_string(),
                    message,
                },
                other => RunError::core("oracle", other),
            })?;
            for (k, v) in values {
                println!("{k}\t{v}");
            }
            Ok(())
        }
    }
}

fn run_experiment(a: &RunArgs, require_sweep: bool) -> Result<(), RunError> {
    let (cfg, base) = load_config(&a.config)?;
    if require_sweep && cfg.sweep.is_none() {
        return Err(RunError::Config {
            field: "sweep".into(),
            message: "no sweep axes declared; use `qwalkdec run`".into(),
        });
    }
    let report = execute(&cfg, &base, &a.options())?;
    let m = &report.manifest;
    println!(
        "{}: {} point(s), {} rows -> {}",
        m.experiment_id,
        m.points.len(),
        report.rows,
        report.csv_path.display()
    );
    println!("manifest -> {}", report.manifest_path.display());
    if !m.all_converged {
        let n = m.points.iter().filter(|p| !p.converged).count();
        println!("note: {n} point(s) have unconverged observables (converged=false rows)");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
