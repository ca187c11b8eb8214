//! `bci-itr`: capacity, rate and channel-design reports from the command line.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bci_itr::sim::Algorithm;
use report::Format;

#[derive(Parser, Debug)]
#[command(name = "bci-itr", version, about = "Information transfer rates and channel capacity for BCI confusion data")]
pub struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value = "table")]
    pub format: Format,
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Capacity and optimal input of a channel matrix.
    Capacity(CapacityArgs),
    /// Conventional and capacity-based ITR of confusion matrices.
    Itr(ItrArgs),
    /// Capacity-maximizing channels at fixed accuracy.
    Design(DesignArgs),
    /// Synthesize SSVEP data and write leave-one-trial-out confusions.
    Simulate(SimulateArgs),
    /// Leave-one-trial-out evaluation of a saved dataset.
    Evaluate(EvaluateArgs),
}

#[derive(Args, Debug, Clone)]
pub struct BaArgs {
    /// Blahut-Arimoto stopping threshold in bits.
    #[arg(long, default_value_t = 1e-9)]
    pub threshold: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iter: usize,
}

#[derive(Args, Debug)]
pub struct CapacityArgs {
    /// Matrix CSV, one row per input.
    #[arg(required_unless_present = "inline", conflicts_with = "inline")]
    pub file: Option<PathBuf>,
    /// Inline channel: `bsc e`, `bec e`, `z e`, `binary p12 p21`,
    /// `identity m` or `balanced m p`.
    #[arg(long)]
    pub inline: Option<String>,
    /// Also report bits/min for this many seconds per selection.
    #[arg(long)]
    pub period: Option<f64>,
    #[command(flatten)]
    pub ba: BaArgs,
}

#[derive(Args, Debug)]
pub struct ItrArgs {
    /// Confusion files (`.csv` or `.json`).
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
    /// Window length for records that do not carry one.
    #[arg(long)]
    pub window: Option<f64>,
    /// Gaze-shift time added to every window.
    #[arg(long)]
    pub gaze: Option<f64>,
    /// Take each subject's optimal input from its record at this window.
    #[arg(long)]
    pub reference_window: Option<f64>,
    /// Sum confusions over subjects for each window before evaluating.
    #[arg(long)]
    pub pooled: bool,
    #[command(flatten)]
    pub ba: BaArgs,
}

#[derive(Args, Debug)]
pub struct DesignArgs {
    /// Alphabet size.
    #[arg(long, short = 'm', default_value_t = 2)]
    pub alphabet: usize,
    /// Average accuracy targets.
    #[arg(long, value_delimiter = ',', default_value = "0.99,0.95,0.9,0.85,0.8,0.75")]
    pub targets: Vec<f64>,
    #[arg(long, default_value_t = 16)]
    pub restarts: usize,
    #[arg(long, default_value_t = 500)]
    pub max_outer: usize,
    /// Outer-loop capacity tolerance.
    #[arg(long, default_value_t = 1e-7)]
    pub tolerance: f64,
    /// Also report bits/min for this many seconds per selection.
    #[arg(long)]
    pub period: Option<f64>,
    /// Print the designed channel matrices.
    #[arg(long)]
    pub show_channels: bool,
    #[command(flatten)]
    pub ba: BaArgs,
}

#[derive(Args, Debug, Clone)]
pub struct MethodArgs {
    #[arg(long, default_value = "trca")]
    pub algorithm: Algorithm,
    /// Use every class's filter jointly.
    #[arg(long)]
    pub ensemble: bool,
    /// Number of filter-bank sub-bands; 0 disables the bank.
    #[arg(long, default_value_t = 0)]
    pub filter_bank: usize,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 8)]
    pub classes: usize,
    #[arg(long, default_value_t = 4)]
    pub channels: usize,
    #[arg(long, default_value_t = 6)]
    pub trials: usize,
    #[arg(long, default_value_t = 1)]
    pub subjects: usize,
    /// Window lengths in seconds.
    #[arg(long, value_delimiter = ',', default_value = "0.5")]
    pub windows: Vec<f64>,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub snr_db: f64,
    #[arg(long, default_value_t = 250.0)]
    pub sample_rate: f64,
    #[arg(long, default_value_t = 3)]
    pub harmonics: usize,
    #[arg(long, default_value_t = 0.13)]
    pub latency: f64,
    /// Gaze time recorded in the confusion metadata.
    #[arg(long, default_value_t = 0.5)]
    pub gaze: f64,
    #[command(flatten)]
    pub method: MethodArgs,
    /// Directory for the confusion CSVs.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write each synthesized dataset as JSON.
    #[arg(long)]
    pub save_datasets: bool,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Dataset JSON written by `simulate --save-datasets`.
    pub dataset: PathBuf,
    #[command(flatten)]
    pub method: MethodArgs,
    /// Write the confusion CSV here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    pub gaze: f64,
}

/// Exit status: success, results flagged as not converged, or bad input.
pub enum Outcome {
    Done,
    NotConverged,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok((text, outcome)) => {
            print!("{text}");
            match outcome {
                Outcome::Done => ExitCode::SUCCESS,
                Outcome::NotConverged => {
                    eprintln!("warning: at least one iteration did not converge");
                    ExitCode::from(1)
                }
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
