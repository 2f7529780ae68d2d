use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use coarcta_core::bc::ExportMode;
use coarcta_core::{load_config, run_command, Command};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Step {
    Ingest,
    Synth,
    Train,
    Evaluate,
    Bcgen,
    Oracle,
    Report,
}

impl From<Step> for Command {
    fn from(s: Step) -> Self {
        match s {
            Step::Ingest => Command::Ingest,
            Step::Synth => Command::Synth,
            Step::Train => Command::Train,
            Step::Evaluate => Command::Evaluate,
            Step::Bcgen => Command::Bcgen,
            Step::Oracle => Command::Oracle,
            Step::Report => Command::Report,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    Snapshot,
    Transient,
}

/// Doppler traces to ML-derived boundary conditions for aortic flow models.
#[derive(Debug, Parser)]
#[command(name = "coarcta", version)]
struct Cli {
    /// Pipeline step to run.
    #[arg(value_enum)]
    command: Step,
    /// TOML pipeline configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated models that receive BC sets.
    #[arg(long, value_delimiter = ',')]
    models: Option<Vec<String>>,
    #[arg(long, value_enum)]
    bc_mode: Option<Mode>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    let mut config = match load_config(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            log::error!("{e}");
            return ExitCode::from(1);
        }
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = cli.out {
        config.output_dir = std::path::absolute(&out).unwrap_or(out);
    }
    if let Some(models) = cli.models {
        config.bc_models = Some(models);
    }
    if let Some(mode) = cli.bc_mode {
        config.bc_mode = match mode {
            Mode::Snapshot => ExportMode::Snapshot,
            Mode::Transient => ExportMode::Transient,
        };
    }
    match run_command(cli.command.into(), &config) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
