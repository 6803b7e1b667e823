use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;

use nest::harness::{eval_files, gen_data, inspect_files, predict_files, train_files};
use nest::scenario::SynthKind;
use nest::NestError;

#[derive(Parser)]
#[command(name = "nest", version, about = "Hypergraph trajectory prediction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write synthetic scenarios as JSON lines.
    GenData {
        /// chain, intersection, merge or uturn
        #[arg(long)]
        kind: SynthKind,
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train from a config file; also writes `<out stem>.loss.csv`.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a metrics report for a checkpoint.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        report: PathBuf,
        /// Refuse the checkpoint unless it was trained under this config.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Write world-frame multimodal predictions.
    Predict {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the interaction hypergraph of every scenario.
    Inspect {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cmd: Command) -> Result<(), NestError> {
    match cmd {
        Command::GenData {
            kind,
            count,
            seed,
            out,
        } => {
            gen_data(kind, count, seed, &out)?;
            info!("wrote {count} scenarios to {}", out.display());
        }
        Command::Train { config, data, out } => {
            let curve = train_files(&config, &data, &out)?;
            info!("checkpoint {}, loss curve {}", out.display(), curve.display());
        }
        Command::Eval {
            ckpt,
            data,
            report,
            config,
        } => {
            let r = eval_files(&ckpt, &data, &report, config.as_deref())?;
            println!("minADE_1 {:.4}  minFDE_1 {:.4}", r.min_ade[0], r.min_fde_1);
        }
        Command::Predict { ckpt, data, out } => predict_files(&ckpt, &data, &out)?,
        Command::Inspect { ckpt, data, out } => inspect_files(&ckpt, &data, &out)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
