use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use wvad::metrics::GroupKey;
use wvad::{pipeline, Error};

/// Waveform-based voice activity detection.
#[derive(Parser)]
#[command(name = "wvad", version)]
struct Cli {
    /// Suppress per-epoch progress output.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic labeled corpus.
    SynthData {
        /// Corpus spec (TOML; an empty file selects every default).
        spec: PathBuf,
        out_dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train a single-encoder detector.
    Train {
        corpus: PathBuf,
        /// Training settings (TOML keys: lr, epochs, batch, seed, eps, ...).
        config: PathBuf,
        model_out: PathBuf,
    },
    /// Two-stage training of an encoder ensemble over an attribute tree.
    TrainEnsemble {
        corpus: PathBuf,
        /// Training settings; `tree = 2` or `tree = 6` picks the tree.
        config: PathBuf,
        model_out: PathBuf,
    },
    /// Accuracy and AUC per attribute group.
    Eval {
        model: PathBuf,
        corpus: PathBuf,
        /// Comma-separated: snr, noise_type, speaker_class.
        #[arg(long, default_value = "")]
        by: String,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Label one WAV file.
    Predict {
        model: PathBuf,
        wav: PathBuf,
        labels_out: PathBuf,
        /// Also write per-frame `y_ns,y_s` to this CSV.
        #[arg(long)]
        scores: Option<PathBuf>,
    },
    /// Histogram of a network stage and the ROC curve, as CSV.
    Plot {
        model: PathBuf,
        corpus: PathBuf,
        /// db1, db2, db3 or final.
        #[arg(long, default_value = "final")]
        stage: String,
        /// all, tn or tp.
        #[arg(long, default_value = "all")]
        filter: String,
        #[arg(long, default_value_t = 20)]
        bins: usize,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> wvad::Result<()> {
    match cli.command {
        Command::SynthData { spec, out_dir, seed } => {
            let corpus = pipeline::synth_data(&spec, &out_dir, seed)?;
            println!("wrote {} utterances to {}", corpus.len(), out_dir.display());
        }
        Command::Train { corpus, config, model_out } => {
            pipeline::train(&corpus, &config, &model_out, cli.quiet)?;
            println!("saved {}", model_out.display());
        }
        Command::TrainEnsemble { corpus, config, model_out } => {
            let model = pipeline::train_ensemble(&corpus, &config, &model_out, cli.quiet)?;
            println!("saved {} ({} encoders)", model_out.display(), model.encoder_count());
        }
        Command::Eval { model, corpus, by, out } => {
            let keys = GroupKey::parse_list(&by)?;
            let summary = pipeline::eval(&model, &corpus, &keys, &out)?;
            for w in &summary.warnings {
                eprintln!("warning: {w}");
            }
            print!("{}", summary.to_csv());
        }
        Command::Predict { model, wav, labels_out, scores } => {
            let track = pipeline::predict(&model, &wav, &labels_out, scores.as_deref())?;
            println!("{} frames, {} speech", track.len(), track.speech_count());
        }
        Command::Plot { model, corpus, stage, filter, bins, out } => {
            let h = pipeline::plot(&model, &corpus, &stage, &filter, bins, &out)?;
            println!("{} frames in histogram", h.total());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
