use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tcn_cws::checkpoint::Checkpoint;
use tcn_cws::config::TrainConfig;
use tcn_cws::segment::{eval_files, segment_file};
use tcn_cws::train::train;
use tcn_cws::Error;

#[derive(Parser)]
#[command(name = "tcn-cws", version, about = "Chinese word segmentation with a dilated TCN encoder and a CRF")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model; prints one tab-separated line per epoch.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the master seed from the config file.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Segment raw text, one sentence per line.
    Segment {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Score a predicted segmentation against a gold one.
    Eval {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        pred: PathBuf,
    },
    /// Describe a checkpoint.
    Inspect {
        #[arg(long)]
        model: PathBuf,
    },
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Train { config, seed } => {
            let mut config = TrainConfig::from_file(&config)?;
            if let Some(seed) = seed {
                config.seed = seed;
            }
            let outcome = train(&config, &mut io::stdout())?;
            match (outcome.best_epoch, outcome.best_dev_f) {
                (Some(epoch), Some(f)) => eprintln!(
                    "best dev F {f:.4} at epoch {epoch}; checkpoints in {}",
                    config.checkpoint_dir.display()
                ),
                _ => eprintln!("no epochs run; checkpoints in {}", config.checkpoint_dir.display()),
            }
            if let Some(rate) = outcome.embedding_hit_rate {
                eprintln!("embedding hit rate {rate:.4}");
            }
        }
        Command::Segment { model, input, output } => {
            segment_file(&model, &input, &output)?;
        }
        Command::Eval { gold, pred } => {
            let report = eval_files(&gold, &pred)?;
            println!("{report}");
            println!("{}", report.machine_line());
        }
        Command::Inspect { model } => {
            print!("{}", Checkpoint::load(&model)?.summary());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
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
