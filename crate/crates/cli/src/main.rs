//! tnvault: decompose N-dimensional data into randomized tensor-network
//! shares, reconstruct from dispersed fragments, measure privacy leakage,
//! and reproduce the benchmark suites.

use std::path::PathBuf;

use tnvault_cli::{bench, config, decompose, error, metrics_cmd, reconstruct};

use clap::{Parser, Subcommand};

use config::{resolve_delta, resolve_seed, FileConfig};
use error::CliError;
use tnvault_core::decomp::Scheme;

#[derive(Parser)]
#[command(
    name = "tnvault",
    about = "Tensor-network secret sharing: randomized decomposition, dispersed shares, leakage metrics",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decompose an input tensor into randomized shares.
    Decompose {
        /// Input file (.dt, .csv, .pgm, .ppm).
        input: PathBuf,
        /// Output directory.
        #[arg(short, long)]
        out: PathBuf,
        /// Tensor-network format: tt | tr | tucker | ht.
        #[arg(long)]
        format: Scheme,
        /// Error threshold in (0, 1) for tt/tr.
        #[arg(long)]
        eps: Option<f64>,
        /// Comma-separated target ranks for tucker/ht.
        #[arg(long, value_delimiter = ',')]
        ranks: Option<Vec<usize>>,
        /// Perturbation threshold in (0, 1]; defaults to 0.05.
        #[arg(long)]
        delta: Option<f64>,
        /// RNG seed (falls back to config file, then TNVAULT_SEED).
        #[arg(long)]
        seed: Option<u64>,
        /// Number of servers to assign fragments to.
        #[arg(long)]
        servers: Option<usize>,
        /// Randomly permute mode indices (seeds recorded in the manifest).
        #[arg(long)]
        permute_modes: bool,
        /// Keep the input axis order even for unbalanced trains.
        #[arg(long)]
        no_auto_permute: bool,
        /// key = value file overriding defaults.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Rebuild the dense tensor from a manifest and its fragments.
    Reconstruct {
        /// Path to manifest.json.
        manifest: PathBuf,
        /// Fragment directory; defaults to `fragments/` next to the manifest.
        #[arg(long)]
        fragments: Option<PathBuf>,
        /// Output .dt path.
        #[arg(short, long)]
        out: PathBuf,
        /// Original tensor to print the relative error against.
        #[arg(long)]
        verify: Option<PathBuf>,
    },
    /// Privacy and fidelity metrics, written as CSV and JSON.
    Metrics {
        #[command(subcommand)]
        metric: MetricCommand,
    },
    /// Benchmark suites: superdiagonal | timing | distortion-curve.
    Bench {
        suite: bench::Suite,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum MetricCommand {
    /// Normalized mutual information between two tensors.
    Nmi {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = 256)]
        bins: usize,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Absolute Pearson correlation per rank slice between two cores.
    Pearson {
        a: PathBuf,
        b: PathBuf,
        /// 1-based axis holding the rank index.
        #[arg(long)]
        axis: usize,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Normalized L2-dissimilarity over paired directories.
    L2 {
        #[arg(long)]
        originals: PathBuf,
        #[arg(long)]
        recons: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Equal-width histogram of a tensor's values.
    Histogram {
        input: PathBuf,
        #[arg(long, default_value_t = 256)]
        bins: usize,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Compression ratio of a dispersed representation.
    Compression {
        manifest: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Decompose {
            input,
            out,
            format,
            eps,
            ranks,
            delta,
            seed,
            servers,
            permute_modes,
            no_auto_permute,
            config,
        } => {
            let file_config = FileConfig::load(config.as_deref())?;
            let args = decompose::DecomposeArgs {
                input,
                out,
                scheme: format,
                eps: match eps {
                    Some(e) => Some(e),
                    None => file_config.get_f64("eps")?,
                },
                ranks,
                delta: resolve_delta(delta, &file_config)?,
                seed: resolve_seed(seed, &file_config)?,
                servers: match servers {
                    Some(s) => Some(s),
                    None => file_config.get_usize("servers")?,
                },
                permute_modes,
                no_auto_permute,
            };
            decompose::run(args)
        }
        Command::Reconstruct {
            manifest,
            fragments,
            out,
            verify,
        } => reconstruct::run(reconstruct::ReconstructArgs {
            manifest,
            fragments,
            out,
            verify,
        }),
        Command::Metrics { metric } => match metric {
            MetricCommand::Nmi { a, b, bins, out } => {
                metrics_cmd::run(metrics_cmd::MetricsArgs::Nmi { a, b, bins }, &out)
            }
            MetricCommand::Pearson { a, b, axis, out } => {
                metrics_cmd::run(metrics_cmd::MetricsArgs::Pearson { a, b, axis }, &out)
            }
            MetricCommand::L2 {
                originals,
                recons,
                out,
            } => metrics_cmd::run(metrics_cmd::MetricsArgs::L2 { originals, recons }, &out),
            MetricCommand::Histogram { input, bins, out } => {
                metrics_cmd::run(metrics_cmd::MetricsArgs::Histogram { input, bins }, &out)
            }
            MetricCommand::Compression { manifest, out } => {
                metrics_cmd::run(metrics_cmd::MetricsArgs::Compression { manifest }, &out)
            }
        },
        Command::Bench {
            suite,
            seed,
            out,
            config,
        } => {
            let file_config = FileConfig::load(config.as_deref())?;
            let seed = resolve_seed(seed, &file_config)?;
            bench::run(suite, seed, &out)
        }
    }
}
