use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use entropy_ldg::config::{ModelCheckConfig, RunConfig};
use entropy_ldg::experiments::{run_config, run_preset, PRESETS};
use entropy_ldg::models::validate_model;

#[derive(Parser)]
#[command(name = "entropy-ldg", version, about = "Entropy-variable LDG solver for cross-diffusion systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation described by a TOML file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a built-in experiment and its checks.
    Experiment {
        /// One of the preset names; `list` prints them.
        preset: String,
        /// Directory for CSV artifacts.
        #[arg(long, default_value = "output")]
        out: PathBuf,
    },
    /// Sample the structural hypotheses of the model in a TOML file.
    ValidateModel {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cmd: Command) -> entropy_ldg::Result<bool> {
    match cmd {
        Command::Run { config } => {
            let cfg = RunConfig::from_file(&config)?;
            std::fs::create_dir_all(&cfg.output.dir)?;
            let report = run_config(&cfg)?;
            println!("{report}");
            Ok(report.passed())
        }
        Command::Experiment { preset, out } => {
            if preset == "list" {
                PRESETS.iter().for_each(|p| println!("{p}"));
                return Ok(true);
            }
            std::fs::create_dir_all(&out)?;
            let report = run_preset(&preset, Some(&out))?;
            println!("{report}");
            Ok(report.passed())
        }
        Command::ValidateModel { config } => {
            let cfg = ModelCheckConfig::from_file(&config)?;
            let model = cfg.model.build()?;
            let report = validate_model(&model, cfg.validate.samples, cfg.validate.seed);
            println!("model {}", model.name());
            println!("{report}");
            Ok(report.passed())
        }
    }
}
