//! `groundcheck`: hallucination detection and retrieval over technical
//! manuals, driven by a TOML config with command-line overrides.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::EmbeddingBackend;
use groundcheck::detectors::DetectorMode;
use groundcheck::retrieval::Level;
use groundcheck::{ProviderMode, Split};

/// A bad argument, config value or input reference. Exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser, Debug)]
#[command(
    name = "groundcheck",
    version,
    about = "Detect hallucinated answers in retrieval-augmented QA"
)]
struct Cli {
    /// TOML run configuration. Flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Directory for outputs and run manifests.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct DatasetArgs {
    /// Dataset file or directory.
    #[arg(long)]
    dataset: Option<PathBuf>,

    /// Schema adapter: `canonical` or `release`.
    #[arg(long)]
    adapter: Option<String>,

    /// Restrict to one split.
    #[arg(long, value_parser = parse_split)]
    split: Option<Split>,
}

#[derive(Args, Debug, Clone, Default)]
struct EmbeddingArgs {
    #[arg(long, value_enum)]
    embedder: Option<EmbeddingBackend>,

    #[arg(long, value_parser = parse_mode)]
    embedding_mode: Option<ProviderMode>,

    #[arg(long)]
    embedding_cache: Option<PathBuf>,

    #[arg(long)]
    embedding_endpoint: Option<String>,

    #[arg(long)]
    embedding_identity: Option<String>,
}

#[derive(Args, Debug, Clone, Default)]
struct DetectorArgs {
    #[arg(long, value_parser = parse_detector)]
    mode: Option<DetectorMode>,

    /// Cosine threshold.
    #[arg(long)]
    t1: Option<f64>,

    /// Overlap threshold.
    #[arg(long)]
    t2: Option<f64>,

    /// Missing-keyword ratio threshold.
    #[arg(long)]
    t3: Option<f64>,

    /// Keywords per triple id, as written by `extract-keywords`. Without it
    /// keyword mode uses the built-in fallback extractor.
    #[arg(long)]
    keywords: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default)]
struct ChatArgs {
    #[arg(long, value_parser = parse_mode)]
    chat_mode: Option<ProviderMode>,

    #[arg(long)]
    chat_endpoint: Option<String>,

    #[arg(long)]
    chat_cache: Option<PathBuf>,

    #[arg(long)]
    model: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SearchMethod {
    Sparse,
    Dense,
    Ensemble,
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KeywordSource {
    /// Deterministic stopword-filtered tokens plus capitalized phrases.
    Fallback,
    /// Ask the chat model with the keyword prompt.
    Llm,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse a manual (HTML, Markdown or JSON) into document trees.
    Ingest {
        #[arg(long)]
        manual: PathBuf,
    },
    /// Build a document/section/paragraph index of a manual.
    Index {
        #[arg(long)]
        manual: PathBuf,
        #[command(flatten)]
        embedding: EmbeddingArgs,
    },
    /// Query an index.
    Search {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        query: String,
        #[arg(long, value_enum, default_value = "ensemble")]
        method: SearchMethod,
        #[arg(long)]
        k: Option<usize>,
        /// Restrict sparse, dense and ensemble search to one level.
        #[arg(long, value_parser = parse_level)]
        level: Option<Level>,
        #[command(flatten)]
        embedding: EmbeddingArgs,
    },
    /// Run a detector over a dataset and write one record per triple.
    Detect {
        #[command(flatten)]
        dataset: DatasetArgs,
        #[command(flatten)]
        detector: DetectorArgs,
        #[command(flatten)]
        embedding: EmbeddingArgs,
    },
    /// Grid-search a detector's thresholds for macro F1.
    Tune {
        #[command(flatten)]
        dataset: DatasetArgs,
        #[command(flatten)]
        detector: DetectorArgs,
        #[command(flatten)]
        embedding: EmbeddingArgs,
        /// Comma-separated grid; defaults to 0.1, 0.2, ..., 0.9.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<f64>>,
    },
    /// Score detection records against gold labels.
    Eval {
        #[arg(long)]
        detections: PathBuf,
        #[command(flatten)]
        dataset: DatasetArgs,
        /// Row name in the rendered table.
        #[arg(long)]
        name: Option<String>,
    },
    /// Dataset counts per split and per retrieval method.
    Stats {
        #[command(flatten)]
        dataset: DatasetArgs,
    },
    /// Sentence-label agreement between two labellings, or alpha over an
    /// annotation matrix.
    Agreement {
        /// JSON object mapping triple id to sentence labels.
        #[arg(long, requires = "candidate")]
        reference: Option<PathBuf>,
        #[arg(long, requires = "reference")]
        candidate: Option<PathBuf>,
        /// JSON array of annotator rows of labels (null when missing).
        #[arg(long)]
        annotations: Option<PathBuf>,
    },
    /// Extract answer keywords for the keyword-match detector.
    ExtractKeywords {
        #[command(flatten)]
        dataset: DatasetArgs,
        #[arg(long, value_enum, default_value = "fallback")]
        source: KeywordSource,
        #[command(flatten)]
        chat: ChatArgs,
    },
    /// Render evaluation reports as one table.
    Report {
        /// Files written by `eval`.
        #[arg(long = "input", required = true)]
        inputs: Vec<PathBuf>,
    },
}

fn parse_split(s: &str) -> Result<Split, String> {
    s.parse()
}

fn parse_mode(s: &str) -> Result<ProviderMode, String> {
    s.parse()
}

fn parse_detector(s: &str) -> Result<DetectorMode, String> {
    s.parse()
}

fn parse_level(s: &str) -> Result<Level, String> {
    s.parse()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    use groundcheck::Error as E;
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            if matches!(
                e,
                E::InvalidThreshold { .. } | E::UnknownRetrievalMethod(_) | E::UnknownAdapter(_) | E::ContextTooLong(_)
            ) {
                return 2;
            }
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
