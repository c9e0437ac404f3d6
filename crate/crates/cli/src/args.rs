//! Command-line surface and config-file merging.
//!
//! A config file holds `key = value` lines whose keys are long flag names
//! (`max-epochs` or `max_epochs`). A flag given on the command line wins over
//! the file, and the file wins over built-in defaults. Keys that the chosen
//! subcommand does not know are ignored with a warning, so one file can
//! serve several subcommands.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::parser::ValueSource;
use clap::{ArgAction, Args, CommandFactory, Parser, Subcommand, ValueEnum};
use qamatch::model::Variant;
use qamatch::training::Monitor;
use serde::Serialize;

use crate::error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "qamatch", version, about = "Question-answer matching in two-party dialogues")]
pub struct Cli {
    /// `key = value` file supplying defaults for the subcommand's flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum Command {
    /// Generate a synthetic labelled corpus.
    Synth(SynthArgs),
    /// Split a corpus 7:1:2 and write candidate pairs and statistics.
    Prepare(PrepareArgs),
    /// Train skip-gram word vectors.
    Pretrain(PretrainArgs),
    /// Train a pair scorer.
    Train(TrainArgs),
    /// Match questions and answers with a trained model.
    Predict(PredictArgs),
    /// Run a rule-based or distance-only baseline.
    Baseline(BaselineArgs),
    /// Score predictions against gold pairs.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tokenizer {
    Whitespace,
    Pretokenized,
}

impl From<Tokenizer> for qamatch::embeddings::TokenizerSpec {
    fn from(t: Tokenizer) -> Self {
        match t {
            Tokenizer::Whitespace => Self::Whitespace,
            Tokenizer::Pretokenized => Self::ExternalPretokenized,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MonitorArg {
    DevLoss,
    TrainLoss,
}

impl From<MonitorArg> for Monitor {
    fn from(m: MonitorArg) -> Self {
        match m {
            MonitorArg::DevLoss => Monitor::DevLoss,
            MonitorArg::TrainLoss => Monitor::TrainLoss,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReportFormat {
    Table,
    Json,
    Csv,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub dialogues: usize,
    #[arg(long, default_value_t = 6)]
    pub min_turns: usize,
    #[arg(long, default_value_t = 12)]
    pub max_turns: usize,
    #[arg(long, default_value_t = 120)]
    pub vocab_size: usize,
    /// Share of question-answer segments built as incremental chains.
    #[arg(long, default_value_t = 0.3)]
    pub incremental_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct PrepareArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Receives `{train,dev,test}.jsonl`, `*.pairs.jsonl`, `manifest.json`
    /// and `summary.txt`.
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Tokenizer::Whitespace)]
    pub tokenizer: Tokenizer,
}

#[derive(Debug, Args, Serialize)]
pub struct PretrainArgs {
    /// Dialogue files; labels are ignored.
    #[arg(long, num_args = 1..)]
    pub input: Vec<PathBuf>,
    /// Plain-text files with one whitespace-tokenized sentence per line.
    #[arg(long, num_args = 1..)]
    pub text: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub dim: usize,
    #[arg(long, default_value_t = 5)]
    pub window: usize,
    #[arg(long, default_value_t = 5)]
    pub negatives: usize,
    #[arg(long, default_value_t = 5)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.025)]
    pub lr: f64,
    #[arg(long, default_value_t = 2)]
    pub min_count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Tokenizer::Whitespace)]
    pub tokenizer: Tokenizer,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub dev: Option<PathBuf>,
    /// Checkpoint of the best epoch.
    #[arg(long)]
    pub out: PathBuf,
    /// Word vectors from `pretrain`. Without them, vectors are drawn at
    /// random for the training vocabulary.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long, default_value = "HDM")]
    pub variant: Variant,
    /// Ignored when `--embeddings` is given.
    #[arg(long, default_value_t = 100)]
    pub embedding_dim: usize,
    #[arg(long, default_value_t = 128)]
    pub encoder_hidden: usize,
    #[arg(long, default_value_t = 256)]
    pub match_hidden: usize,
    #[arg(long, default_value_t = 0.3)]
    pub dropout: f64,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[arg(long, default_value_t = 0.001)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.95)]
    pub lr_decay: f64,
    #[arg(long, default_value_t = 3)]
    pub patience: usize,
    #[arg(long, default_value_t = 50)]
    pub max_epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, value_enum, default_value_t = MonitorArg::DevLoss)]
    pub monitor: MonitorArg,
    #[arg(long)]
    pub stop_at_f1: Option<f64>,
    /// Minimum count for the random-vector vocabulary.
    #[arg(long, default_value_t = 2)]
    pub min_count: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Per-epoch JSONL log; defaults to `<out>.log.jsonl`.
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Writes a checkpoint for every improving epoch.
    #[arg(long)]
    pub checkpoint_dir: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Tokenizer::Whitespace)]
    pub tokenizer: Tokenizer,
}

#[derive(Debug, Args, Serialize)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Refuse a checkpoint of any other variant.
    #[arg(long)]
    pub variant: Option<Variant>,
    /// Overrides the checkpoint's threshold.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Store each emitted pair's probability.
    #[arg(long)]
    pub probs: bool,
    #[arg(long, value_enum, default_value_t = Tokenizer::Whitespace)]
    pub tokenizer: Tokenizer,
}

#[derive(Debug, Args, Serialize)]
pub struct BaselineArgs {
    /// `gd1`, `gdn`, `gd1+j`, `gdn+j` or `distance`.
    #[arg(long)]
    pub rule: String,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Training dialogues for `distance`.
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Give an answer claimed by several questions to the nearest one.
    #[arg(long)]
    pub resolve: bool,
    #[arg(long, value_enum, default_value_t = Tokenizer::Whitespace)]
    pub tokenizer: Tokenizer,
}

#[derive(Debug, Args, Serialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub gold: PathBuf,
    /// One file per system, or per run with `--average`.
    #[arg(long, required = true, num_args = 1..)]
    pub predictions: Vec<PathBuf>,
    /// Report accuracy per exact distance instead of 1..4 and >=5.
    #[arg(long)]
    pub exact: bool,
    /// Treat the prediction files as runs of one system and add their mean.
    #[arg(long)]
    pub average: bool,
    #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
    pub format: ReportFormat,
    /// Defaults to standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Tokenizer::Whitespace)]
    pub tokenizer: Tokenizer,
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected `key = value`", i + 1)))?;
        let key = k.trim().replace('_', "-");
        let value = v.trim().trim_matches('"').to_string();
        if key.is_empty() {
            return Err(CliError::Usage(format!("config line {}: empty key", i + 1)));
        }
        out.insert(key, value);
    }
    Ok(out)
}

fn read_config(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text)
}

/// Parses `argv`, filling flags that were not given from `--config`.
/// Also returns warnings about config keys the subcommand does not use.
pub fn parse<I, T>(argv: I) -> std::result::Result<(Cli, Vec<String>), clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let probe = Cli::command().ignore_errors(true).try_get_matches_from(&argv);
    let Ok(probe) = probe else {
        return Cli::try_parse_from(argv).map(|c| (c, Vec::new()));
    };
    let (Some(path), Some((name, sub))) =
        (probe.get_one::<PathBuf>("config").cloned(), probe.subcommand())
    else {
        return Cli::try_parse_from(argv).map(|c| (c, Vec::new()));
    };
    let config = read_config(&path).map_err(|e| {
        Cli::command().error(clap::error::ErrorKind::Io, e.to_string())
    })?;
    let cmd = Cli::command();
    let sub_cmd = cmd.find_subcommand(name).expect("parsed subcommand exists");
    let mut extra: Vec<OsString> = Vec::new();
    let mut known = Vec::new();
    for arg in sub_cmd.get_arguments() {
        let Some(long) = arg.get_long() else { continue };
        known.push(long.to_string());
        let Some(value) = config.get(long) else { continue };
        if sub.value_source(arg.get_id().as_str()) == Some(ValueSource::CommandLine) {
            continue;
        }
        match arg.get_action() {
            ArgAction::SetTrue => {
                if value.parse::<bool>().map_err(|_| {
                    Cli::command().error(
                        clap::error::ErrorKind::InvalidValue,
                        format!("config key `{long}` expects true or false, found `{value}`"),
                    )
                })? {
                    extra.push(format!("--{long}").into());
                }
            }
            ArgAction::Append => {
                for v in value.split(',').map(str::trim).filter(|v| !v.is_empty()) {
                    extra.push(format!("--{long}").into());
                    extra.push(v.into());
                }
            }
            _ => {
                extra.push(format!("--{long}").into());
                extra.push(value.into());
            }
        }
    }
    let warnings = config
        .keys()
        .filter(|k| !known.contains(k) && *k != "config" && *k != "verbose")
        .map(|k| format!("config key `{k}` is not used by `{name}`"))
        .collect();
    let mut full = argv;
    full.extend(extra);
    Ok((Cli::try_parse_from(full)?, warnings))
}
