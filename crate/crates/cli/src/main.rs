//! `pixmap`: generate the synthetic benchmark, apply mappings and baselines,
//! inspect spectra, train and evaluate detectors, and run the reducer
//! comparison.

mod commands;
mod run_manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pixmap_core::synthgen::{Upsampler, BENCHMARK_NOISE_SIGMA, DEFAULT_SIZE};

#[derive(Parser, Debug)]
#[command(name = "pixmap", version, about = "Pixel-level mapping preprocessing for synthetic-image detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render a train/test benchmark with manifests.
    Gen(GenArgs),
    /// Apply a mapping or baseline reducer to one PPM image.
    Map(MapArgs),
    /// Mean azimuthal power profile of a directory of PPM images.
    Spectrum(SpectrumArgs),
    /// Train a detector on a manifest directory.
    Train(TrainArgs),
    /// Evaluate a trained detector on a manifest directory.
    Eval(EvalArgs),
    /// Train and evaluate one detector per reducer on a benchmark.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
struct GenArgs {
    /// Output directory; receives train/ and test/.
    #[arg(long)]
    out: PathBuf,
    /// Upsampler for training fakes.
    #[arg(long, default_value = "nearest")]
    train_upsampler: Upsampler,
    /// Upsampler for test fakes.
    #[arg(long, default_value = "bilinear")]
    test_upsampler: Upsampler,
    /// Tie content family to the label in training and swap it at test time.
    #[arg(long)]
    confound: bool,
    /// Images per class and split.
    #[arg(long, default_value_t = 500)]
    n: usize,
    /// Root seed.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Image side length in pixels (even).
    #[arg(long, default_value_t = DEFAULT_SIZE)]
    size: usize,
    /// Standard deviation of the sensor noise, in levels.
    #[arg(long, default_value_t = BENCHMARK_NOISE_SIGMA)]
    noise_sigma: f64,
}

#[derive(Args, Debug)]
struct MapArgs {
    /// none, fixed, random, highpass[:cutoff], shuffle[:patch] or npr[:block].
    #[arg(long)]
    mode: String,
    /// Seed for random tables and shuffle permutations (required for those).
    #[arg(long)]
    seed: Option<u64>,
    /// Patch size for shuffle when not given in --mode.
    #[arg(long)]
    patch: Option<usize>,
    /// Block size for npr when not given in --mode (default 2).
    #[arg(long)]
    block: Option<usize>,
    /// Cutoff for highpass as a fraction of the half-size radius, when not
    /// given in --mode (default 0.25).
    #[arg(long)]
    cutoff: Option<f64>,
    /// Input PPM (P6, maxval 255).
    #[arg(long = "in")]
    input: PathBuf,
    /// Output real-valued image file.
    #[arg(long)]
    out: PathBuf,
    /// Also write the mapping tables as CSV (fixed and random only).
    #[arg(long)]
    tables_csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SpectrumArgs {
    /// Directory of PPM images, all the same size.
    #[arg(long = "in")]
    input: PathBuf,
    /// Reducer applied to each image before the transform.
    #[arg(long, default_value = "none")]
    reducer: String,
    /// Root seed for stochastic reducers; image i uses a seed derived from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV: radius, mean power, bin count.
    #[arg(long)]
    out: PathBuf,
    /// Write log10 mean power instead of mean power.
    #[arg(long)]
    log: bool,
    /// Also write the mean 2-D spectrum as a log-scaled PGM heatmap.
    #[arg(long)]
    heatmap: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainFlags {
    /// key=value file with lr, beta1, beta2, weight_decay, epochs,
    /// batch_size, crop, reducer, seed. Flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Adam learning rate [default: 0.0002].
    #[arg(long)]
    lr: Option<f64>,
    /// Adam first-moment decay [default: 0.9].
    #[arg(long)]
    beta1: Option<f64>,
    /// Adam second-moment decay [default: 0.999].
    #[arg(long)]
    beta2: Option<f64>,
    /// Decoupled weight decay [default: 0.0002].
    #[arg(long)]
    weight_decay: Option<f64>,
    /// Training epochs [default: 30].
    #[arg(long)]
    epochs: Option<usize>,
    /// Minibatch size [default: 2].
    #[arg(long)]
    batch_size: Option<usize>,
    /// Square crop side in pixels [default: 32].
    #[arg(long)]
    crop: Option<usize>,
    /// Training seed [default: 0].
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Directory holding manifest.csv and its images.
    #[arg(long)]
    data: PathBuf,
    /// none, fixed, random, highpass[:cutoff], shuffle:patch or npr[:block]
    /// [default: none].
    #[arg(long)]
    reducer: Option<String>,
    #[command(flatten)]
    flags: TrainFlags,
    /// Output weights file.
    #[arg(long)]
    out: PathBuf,
    /// Also write the per-epoch loss trace as CSV.
    #[arg(long)]
    loss_csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Weights file written by `pixmap train`.
    #[arg(long)]
    model: PathBuf,
    /// Directory holding manifest.csv and its images.
    #[arg(long)]
    data: PathBuf,
    /// Must equal the reducer the model was trained with.
    #[arg(long)]
    reducer: String,
    /// Also write the key=value report to this file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the per-generator CSV breakdown to this file.
    #[arg(long)]
    breakdown_csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Benchmark directory with train/ and test/ (as written by `pixmap gen`).
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    flags: TrainFlags,
    /// Output comparison CSV.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            eprintln!("error[usage]: {}", first.trim_start_matches("error: "));
            return ExitCode::from(1);
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {}", e.kind(), e.message().replace('\n', " "));
            ExitCode::from(1)
        }
    }
}
