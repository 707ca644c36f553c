//! `depbias`: synthesize a corpus, extract features, train, evaluate and
//! tabulate gender-balanced against unbalanced runs.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use depbias_core::Execution;

use config::{env_layer, load_file, Layer, RunConfig};
use error::CliError;

#[derive(Parser)]
#[command(name = "depbias", version, about = "Gender-bias experiments for audio depression detection")]
struct Cli {
    #[command(flatten)]
    opts: Opts,
    #[command(subcommand)]
    cmd: Cmd,
}

/// Every flag maps to the config key of the same name (dashes become underscores).
#[derive(Args, Default)]
struct Opts {
    /// Config file of `key = value` lines
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; every other path is relative to it
    #[arg(long, global = true)]
    out: Option<String>,
    #[arg(long, global = true)]
    manifest: Option<String>,
    /// Synthetic corpus preset: daicwoz-shape or tiny
    #[arg(long, global = true)]
    preset: Option<String>,
    #[arg(long, global = true)]
    duration_min: Option<String>,
    #[arg(long, global = true)]
    duration_max: Option<String>,
    /// mel or raw
    #[arg(long, global = true)]
    feature_kind: Option<String>,
    /// per-signal, per-gender or none
    #[arg(long, global = true)]
    norm: Option<String>,
    /// depaudionet or rawaudio
    #[arg(long, global = true)]
    model: Option<String>,
    #[arg(long, global = true)]
    conv_filters: Option<String>,
    /// Epochs between learning-rate decays
    #[arg(long, global = true)]
    lambda: Option<String>,
    /// on or off
    #[arg(long, global = true)]
    gender_balance: Option<String>,
    #[arg(long, global = true)]
    seed: Option<String>,
    #[arg(long, global = true)]
    epochs: Option<String>,
    #[arg(long, global = true)]
    patience: Option<String>,
    #[arg(long, global = true)]
    batch_size: Option<String>,
    /// Worker threads (0 = all cores)
    #[arg(long, global = true)]
    jobs: Option<String>,
    #[arg(long, global = true)]
    run_id: Option<String>,
}

impl Opts {
    fn layer(&self) -> Layer {
        let pairs = [
            ("out", &self.out),
            ("manifest", &self.manifest),
            ("preset", &self.preset),
            ("duration_min", &self.duration_min),
            ("duration_max", &self.duration_max),
            ("feature_kind", &self.feature_kind),
            ("norm", &self.norm),
            ("model", &self.model),
            ("conv_filters", &self.conv_filters),
            ("lambda", &self.lambda),
            ("gender_balance", &self.gender_balance),
            ("seed", &self.seed),
            ("epochs", &self.epochs),
            ("patience", &self.patience),
            ("batch_size", &self.batch_size),
            ("jobs", &self.jobs),
            ("run_id", &self.run_id),
        ];
        pairs.into_iter().filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone()))).collect()
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic corpus (WAV files and manifest)
    Synth,
    /// Extract and normalise features for every manifest entry
    Features,
    /// Train a model and write its checkpoint and logs
    Train,
    /// Evaluate a run on the validation split
    Eval {
        /// Evaluate two runs side by side with the difference column
        #[arg(long, num_args = 2, value_names = ["RUN_A", "RUN_B"])]
        compare: Option<Vec<String>>,
    },
    /// Tabulate every evaluated run
    Report,
}

fn run(cli: Cli) -> Result<String, CliError> {
    let mut layers = Vec::new();
    if let Some(path) = &cli.opts.config {
        layers.push(load_file(path)?);
    }
    layers.push(env_layer(std::env::vars()));
    layers.push(cli.opts.layer());
    let cfg = RunConfig::resolve(&layers)?;
    let exec = Execution::default();
    exec.with_jobs(cfg.jobs, || match cli.cmd {
        Cmd::Synth => commands::synth(&cfg, exec),
        Cmd::Features => commands::features(&cfg, exec),
        Cmd::Train => commands::train_cmd(&cfg, exec),
        Cmd::Eval { compare } => {
            let pair = compare.map(|v| (v[0].clone(), v[1].clone()));
            commands::eval_cmd(&cfg, pair, exec)
        }
        Cmd::Report => commands::report_cmd(&cfg),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(summary) => {
            print!("{summary}");
            if !summary.ends_with('\n') {
                println!();
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
