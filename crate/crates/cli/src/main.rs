//! `tgprompt`: data preparation, pre-training, prompt tuning and evaluation
//! from the command line.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 numerical breakdown.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tgprompt::error::Error;

#[derive(Parser, Debug)]
#[command(name = "tgprompt", version, about = "Test-time prompt tuning for frozen graph encoders")]
pub struct Cli {
    /// Seed for single-run commands; for `run` and `grid` it replaces the
    /// configured seed list.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// `key=value` configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Worker threads for multi-seed runs.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Node classification on one graph, or classification of whole graphs.
    #[arg(long, global = true, value_enum)]
    pub task: Option<TaskArg>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum TaskArg {
    Node,
    Graph,
}

/// The dataset, encoder and split shared by the per-split commands.
#[derive(Args, Debug)]
pub struct Fixed {
    /// Dataset directory (a graph, or a graph collection with `--task graph`).
    #[arg(long)]
    pub graph: PathBuf,
    /// Encoder weights written by `pretrain`.
    #[arg(long)]
    pub model: PathBuf,
    /// Split file written by `split`.
    #[arg(long)]
    pub split: PathBuf,
}

/// Where the encoder of an end-to-end run comes from.
#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
pub struct EncoderSource {
    /// Pre-trained encoder weights.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Comma-separated source graph directories to pre-train on first.
    #[arg(long, value_delimiter = ',')]
    pub sources: Option<Vec<PathBuf>>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Sample a stochastic block model graph into a dataset directory.
    Sbm {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "100,100")]
        blocks: Vec<usize>,
        #[arg(long, default_value_t = 0.2)]
        p_in: f64,
        #[arg(long, default_value_t = 0.01)]
        p_out: f64,
        #[arg(long, default_value_t = 64)]
        feature_dim: usize,
        #[arg(long, default_value_t = 0.4)]
        shift: f64,
    },
    /// Sample a labelled graph collection into a dataset directory.
    Collection {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20)]
        graphs_per_class: usize,
        #[arg(long, default_value_t = 10)]
        min_nodes: usize,
        #[arg(long, default_value_t = 20)]
        max_nodes: usize,
        /// Edge density per class.
        #[arg(long, value_delimiter = ',', default_value = "0.15,0.5")]
        p_edge: Vec<f64>,
        #[arg(long, default_value_t = 8)]
        feature_dim: usize,
        #[arg(long, default_value_t = 0.5)]
        shift: f64,
    },
    /// Project features onto their leading singular directions.
    Align {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Target width; defaults to the configured `align_dim`.
        #[arg(long)]
        dim: Option<usize>,
    },
    /// Draw a few-shot / validation / test split.
    Split {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Shots per class; defaults to the configured `shots`.
        #[arg(long)]
        shots: Option<usize>,
    },
    /// Drop edges and shuffle features of unprotected nodes.
    Perturb {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        edge_drop: f64,
        #[arg(long, default_value_t = 0.0)]
        feature_shuffle: f64,
        /// Protect the few-shot and validation nodes of this split.
        #[arg(long)]
        split: Option<PathBuf>,
    },
    /// Pre-train the encoder by link prediction on source graphs.
    Pretrain {
        #[arg(long, value_delimiter = ',', required = true)]
        sources: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tune centroid and layer prompts on one split.
    Tune {
        #[command(flatten)]
        fixed: Fixed,
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict the test items of a split with tuned prompts.
    Predict {
        #[command(flatten)]
        fixed: Fixed,
        #[arg(long)]
        prompts: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Validation and test accuracy of tuned prompts.
    Eval {
        #[command(flatten)]
        fixed: Fixed,
        #[arg(long)]
        prompts: PathBuf,
    },
    /// Per-layer mean entropy of the test items and the pivot layer, as TSV.
    InspectEntropy {
        #[command(flatten)]
        fixed: Fixed,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the (optionally prompted) class centroids as TSV.
    ExportCentroids {
        #[command(flatten)]
        fixed: Fixed,
        #[arg(long)]
        prompts: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Split, tune, predict and score over the configured seeds.
    Run {
        #[arg(long)]
        graph: PathBuf,
        #[command(flatten)]
        encoder: EncoderSource,
        /// Also write the per-seed report as TSV.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Select gamma, n_aug and alpha by validation accuracy, then score the winner.
    Grid {
        #[arg(long)]
        graph: PathBuf,
        #[command(flatten)]
        encoder: EncoderSource,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

/// A failure together with the exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Core(Error::InvalidArgument(_)) => 1,
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
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
    match commands::dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
