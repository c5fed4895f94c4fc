use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "triage",
    version,
    about = "Collect GitHub issues, train issue-type classifiers and serve them as a webhook",
    arg_required_else_help = true
)]
pub struct Cli {
    /// TOML file with [fetch], [prepare], [pretrain], [training] and [baseline] tables.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Built-in configuration to start from (paper-2021, desk).
    #[arg(long, global = true, value_name = "NAME")]
    pub preset: Option<String>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,

    /// One of off, error, warn, info, debug, trace.
    #[arg(long, global = true, env = "TRIAGE_LOG", default_value = "info")]
    pub log_level: String,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Test,
}

fn positive_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err("must be a positive number".into())
    }
}

fn non_negative_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err("must be zero or positive".into())
    }
}

fn unit_interval(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err("must be strictly between 0 and 1".into())
    }
}

fn positive_usize(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(v) => Ok(v),
        Err(_) => Err(format!("`{s}` is not a positive integer")),
    }
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct ModelArgs {
    /// Fine-tuned transformer artifact directory.
    #[arg(long, value_name = "DIR")]
    pub artifact: Option<PathBuf>,
    /// Baseline artifact directory.
    #[arg(long, value_name = "DIR")]
    pub baseline: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Download issues from the top repositories of each language into a JSONL archive.
    Fetch {
        /// Comma-separated list, or a file with one language per line.
        #[arg(long)]
        languages: Option<String>,
        #[arg(long, allow_negative_numbers = true, value_parser = clap::value_parser!(u32).range(1..))]
        repos_per_language: Option<u32>,
        #[arg(long, allow_negative_numbers = true, value_parser = clap::value_parser!(u32).range(1..=100))]
        page_size: Option<u32>,
        #[arg(long, allow_negative_numbers = true, value_parser = positive_usize)]
        workers: Option<usize>,
        /// Archive to create or extend.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        #[arg(long, env = "GITHUB_API_URL")]
        api_url: Option<String>,
    },
    /// Filter, split and oversample an archive into a corpus directory.
    Prepare {
        #[arg(long = "in", value_name = "FILE")]
        input: PathBuf,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        #[arg(long, allow_negative_numbers = true, value_parser = unit_interval)]
        ratio: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Keep the training split as is.
        #[arg(long)]
        no_oversample: bool,
        /// Randomly keep this many labeled English issues.
        #[arg(long, allow_negative_numbers = true, value_parser = positive_usize)]
        sample: Option<usize>,
    },
    /// Train a tokenizer and a small masked-language encoder on a corpus's training texts.
    Pretrain {
        #[arg(long, value_name = "DIR")]
        corpus: PathBuf,
        /// Defaults to <encoder home>/<name>.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        #[arg(long)]
        name: Option<String>,
        #[arg(long, allow_negative_numbers = true, value_parser = positive_usize)]
        steps: Option<usize>,
        #[arg(long, allow_negative_numbers = true, value_parser = positive_usize)]
        vocab_size: Option<usize>,
        #[arg(long, allow_negative_numbers = true, value_parser = positive_usize)]
        max_len: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fine-tune the transformer classifier.
    Train {
        #[arg(long, value_name = "DIR")]
        corpus: PathBuf,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        #[arg(long, allow_negative_numbers = true, value_parser = clap::value_parser!(u32).range(1..))]
        epochs: Option<u32>,
        #[arg(long, allow_negative_numbers = true, value_parser = positive_f64)]
        learning_rate: Option<f64>,
        #[arg(long, allow_negative_numbers = true, value_parser = positive_usize)]
        batch_size: Option<usize>,
        #[arg(long, allow_negative_numbers = true, value_parser = positive_usize)]
        max_len: Option<usize>,
        /// Encoder name under the encoder home, or a directory.
        #[arg(long)]
        base_encoder: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, allow_negative_numbers = true, value_parser = unit_interval)]
        threshold: Option<f64>,
        #[arg(long, allow_negative_numbers = true, value_parser = non_negative_f64)]
        weight_decay: Option<f64>,
    },
    /// Train the TF-IDF logistic-regression baseline.
    TrainBaseline {
        #[arg(long, value_name = "DIR")]
        corpus: PathBuf,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        #[arg(long, allow_negative_numbers = true, value_parser = clap::value_parser!(u64).range(1..))]
        min_token_freq: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Score a model on one side of a corpus and write the report as JSON.
    Evaluate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_name = "DIR")]
        corpus: PathBuf,
        #[arg(long, value_enum, default_value_t = SplitArg::Test)]
        split: SplitArg,
        /// Defaults to <model dir>/evaluation-<split>.json.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Put two evaluation reports side by side.
    Compare {
        /// Give exactly twice: left, then right.
        #[arg(long = "report", value_name = "FILE", required = true)]
        reports: Vec<PathBuf>,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Label a single piece of text.
    Predict {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        text: String,
    },
    /// Run the webhook service.
    Serve {
        #[arg(long, env = "ARTIFACT_DIR", value_name = "DIR")]
        artifact: Option<PathBuf>,
        #[arg(long, env = "BIND_ADDR")]
        bind: Option<String>,
        #[arg(long, env = "DELIVERY_LOG", value_name = "FILE")]
        delivery_log: Option<PathBuf>,
    },
    /// Evaluate the transformer and the baseline on the same test split and compare them.
    Rq1 {
        #[arg(long, value_name = "DIR")]
        corpus: PathBuf,
        #[arg(long, value_name = "DIR")]
        artifact: PathBuf,
        #[arg(long, value_name = "DIR")]
        baseline: PathBuf,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
}
