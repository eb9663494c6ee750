use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use olce::cli::{self, ModelKind, Overrides, Settings};

#[derive(Parser)]
#[command(name = "olce", version, about = "Odor labeling encoder-decoder and baseline benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic preset as CSV files plus a manifest
    Generate(Flags),
    /// Train OLCE and save a checkpoint
    Train(Flags),
    /// Evaluate a checkpoint on the test split
    Eval(Flags),
    /// Repeated-split comparison of all models
    Bench(Flags),
    /// Finite-difference gradient check of OLCE and the MLP
    Gradcheck(Flags),
    /// Write original and decoded test responses
    ExportDecoded(Flags),
}

#[derive(Args)]
struct Flags {
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    /// Comma-separated subset of olce,lda,mlp,dt,pca_lda,cnn_svm
    #[arg(long, value_delimiter = ',')]
    models: Option<Vec<String>>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    test_fraction: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    lambda_recon: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    mlp_epochs: Option<usize>,
    #[arg(long)]
    cnn_epochs: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// JSON file with any of the above; flags take precedence
    #[arg(long)]
    config: Option<PathBuf>,
}

impl Flags {
    fn settings(self) -> olce::Result<Settings> {
        let models = self
            .models
            .map(|v| v.iter().map(|m| m.parse::<ModelKind>()).collect::<olce::Result<Vec<_>>>())
            .transpose()?;
        let overrides = Overrides {
            manifest: self.manifest,
            preset: self.preset,
            models,
            runs: self.runs,
            seed: self.seed,
            test_fraction: self.test_fraction,
            epochs: self.epochs,
            lr: self.lr,
            lambda_recon: self.lambda_recon,
            batch_size: self.batch_size,
            mlp_epochs: self.mlp_epochs,
            cnn_epochs: self.cnn_epochs,
            out: self.out,
            checkpoint: self.checkpoint,
        };
        Settings::resolve(self.config.as_deref(), overrides)
    }
}

fn run(command: Command) -> olce::Result<()> {
    match command {
        Command::Generate(f) => cli::cmd_generate(&f.settings()?).map(drop),
        Command::Train(f) => cli::cmd_train(&f.settings()?).map(drop),
        Command::Eval(f) => cli::cmd_eval(&f.settings()?).map(drop),
        Command::Bench(f) => cli::cmd_bench(&f.settings()?).map(drop),
        Command::Gradcheck(f) => cli::cmd_gradcheck(&f.settings()?).map(drop),
        Command::ExportDecoded(f) => cli::cmd_export_decoded(&f.settings()?).map(drop),
    }
}

fn main() -> ExitCode {
    let parsed = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(parsed.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}
