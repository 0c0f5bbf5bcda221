//! Batch entry points: data generation, training, evaluation, benchmarks and
//! importance reports. The `reflexnav` binary is a thin clap wrapper.

pub mod commands;
pub mod config;
pub mod io;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::{load_config, ConfigError, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "reflexnav", version, about = "Terrain-aware robot behavior learning")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Roll out the expert and write a training dataset.
    GenData {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a model and write a checkpoint and solver trace.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run closed-loop trials of a checkpoint on a named scenario.
    Evaluate {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory; defaults to `<output_dir>/evaluate/<scenario>/<variant>`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Use this config instead of the one embedded in the checkpoint.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Disable the self-reflective offset.
        #[arg(long)]
        no_offset: bool,
    },
    /// Full controller versus offset ablation on every configured scenario.
    Benchmark {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        config: PathBuf,
    },
    /// Modality and history importance of a checkpoint.
    Inspect {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

pub fn dispatch(command: &Command) -> anyhow::Result<()> {
    match command {
        Command::GenData { config, out } => {
            let path = commands::gen_data(config, out)?;
            println!("wrote {}", path.display());
        }
        Command::Train { data, config, out } => {
            let path = commands::train(data, config, out)?;
            println!("wrote {}", path.display());
        }
        Command::Evaluate {
            ckpt,
            scenario,
            trials,
            seed,
            out,
            config,
            no_offset,
        } => {
            let report = commands::evaluate(&commands::EvaluateArgs {
                ckpt,
                scenario,
                trials: *trials,
                seed: *seed,
                out: out.as_deref(),
                config: config.as_deref(),
                use_offset: !no_offset,
            })?;
            println!("{}", commands::describe(&report));
        }
        Command::Benchmark { ckpt, config } => {
            for (full, ablation) in commands::benchmark(ckpt, config)? {
                println!("{}", commands::describe(&full));
                println!("{}", commands::describe(&ablation));
            }
        }
        Command::Inspect { ckpt, out } => {
            let file = commands::inspect(ckpt, out.as_deref())?;
            println!("{}", serde_json::to_string_pretty(&file.report)?);
        }
    }
    Ok(())
}
