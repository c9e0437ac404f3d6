use std::fs;
use std::path::{Path, PathBuf};

use qamatch::data::{render_summary, split_dialogues, summarize};
use qamatch::dialogue::{build_candidate_pairs, Dialogue};
use qamatch::embeddings::{
    build_vocab, read_embeddings, train_skipgram, write_embeddings, EmbeddingMatrix,
    SkipGramConfig, TokenizerSpec, Vocabulary,
};
use qamatch::evaluation::{micro_prf_with, DistanceMode, MetricsSummary, Report, SystemRow};
use qamatch::io::{read_dialogues_file, read_jsonl_file, write_dialogues_file, write_jsonl_file};
use qamatch::matcher::{
    baseline_gd, greedy_match, greedy_match_with, DistanceBaseline, DistanceBaselineConfig,
    GdRule, MatchResult,
};
use qamatch::model::{Model, ModelConfig};
use qamatch::numerics::RandomSource;
use qamatch::synth::{generate, SyntheticSpec};
use qamatch::training::{run_multi_seed, train, CheckpointWriter, TrainConfig, TrainObserver};
use serde_json::{json, Value};

use crate::args::*;
use crate::error::{CliError, Result};

/// The resolved invocation, stored next to every artifact.
fn header(command: &Command) -> Value {
    json!({
        "qamatch": env!("CARGO_PKG_VERSION"),
        "config": command,
    })
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".run.json");
    PathBuf::from(s)
}

fn write_sidecar(path: &Path, header: &Value) -> Result<()> {
    fs::write(sidecar(path), serde_json::to_string_pretty(header)? + "\n")?;
    Ok(())
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(p) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(p)?;
    }
    Ok(())
}

fn read(path: &Path, tok: Tokenizer) -> Result<Vec<Dialogue>> {
    Ok(read_dialogues_file(path, TokenizerSpec::from(tok))?)
}

pub fn run(command: &Command) -> Result<()> {
    let h = header(command);
    match command {
        Command::Synth(a) => synth(a, &h),
        Command::Prepare(a) => prepare(a, &h),
        Command::Pretrain(a) => pretrain(a, &h),
        Command::Train(a) => train_cmd(a, &h),
        Command::Predict(a) => predict(a, &h),
        Command::Baseline(a) => baseline(a, &h),
        Command::Evaluate(a) => evaluate(a, &h),
    }
}

fn synth(a: &SynthArgs, h: &Value) -> Result<()> {
    let spec = SyntheticSpec {
        n_dialogues: a.dialogues,
        min_turns: a.min_turns,
        max_turns: a.max_turns,
        vocab_size: a.vocab_size,
        incremental_fraction: a.incremental_fraction,
        seed: a.seed,
    };
    let dialogues = generate(&spec, &mut RandomSource::new(a.seed).stream("synth"))?;
    ensure_parent(&a.out)?;
    write_dialogues_file(&a.out, &dialogues)?;
    write_sidecar(&a.out, h)?;
    println!("wrote {} dialogues to {}", dialogues.len(), a.out.display());
    Ok(())
}

fn prepare(a: &PrepareArgs, h: &Value) -> Result<()> {
    let dialogues = read(&a.input, a.tokenizer)?;
    let split = split_dialogues(dialogues, &mut RandomSource::new(a.seed).stream("split"));
    fs::create_dir_all(&a.out_dir)?;
    let mut manifest = serde_json::Map::new();
    let mut summaries = Vec::new();
    for (name, part) in split.parts() {
        write_dialogues_file(&a.out_dir.join(format!("{name}.jsonl")), part)?;
        let pairs: Vec<_> = part.iter().flat_map(build_candidate_pairs).collect();
        write_jsonl_file(&a.out_dir.join(format!("{name}.pairs.jsonl")), &pairs)?;
        manifest.insert(
            name.to_string(),
            part.iter().map(|d| d.id.clone()).collect::<Vec<_>>().into(),
        );
        summaries.push(summarize(name, part));
    }
    let manifest = json!({ "run": h, "splits": manifest, "summary": summaries });
    fs::write(
        a.out_dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)? + "\n",
    )?;
    let text = render_summary(&summaries);
    fs::write(a.out_dir.join("summary.txt"), &text)?;
    print!("{text}");
    Ok(())
}

fn pretrain(a: &PretrainArgs, h: &Value) -> Result<()> {
    let mut corpus: Vec<Vec<String>> = Vec::new();
    for p in &a.input {
        for d in read(p, a.tokenizer)? {
            corpus.extend(d.turns.into_iter().map(|t| t.tokens));
        }
    }
    for p in &a.text {
        let text = fs::read_to_string(p)?;
        corpus.extend(
            text.lines()
                .map(|l| TokenizerSpec::Whitespace.tokenize(l))
                .filter(|t| !t.is_empty()),
        );
    }
    if corpus.is_empty() {
        return Err(CliError::Usage("pretrain needs --input or --text".into()));
    }
    let vocab = build_vocab(&corpus, a.min_count)?;
    let cfg = SkipGramConfig {
        dim: a.dim,
        window: a.window,
        negatives: a.negatives,
        epochs: a.epochs,
        lr: a.lr,
        seed: a.seed,
    };
    let (emb, report) = train_skipgram(&corpus, &vocab, &cfg);
    ensure_parent(&a.out)?;
    write_embeddings(fs::File::create(&a.out)?, &vocab, &emb)?;
    write_sidecar(&a.out, &json!({ "run": h, "epoch_losses": report.epoch_losses }))?;
    println!(
        "wrote {} vectors of dimension {} to {}",
        vocab.len(),
        a.dim,
        a.out.display()
    );
    Ok(())
}

struct Observers<'a>(Vec<&'a mut dyn TrainObserver>);

impl TrainObserver for Observers<'_> {
    fn on_epoch(
        &mut self,
        record: &qamatch::training::EpochRecord,
        model: &Model,
    ) -> qamatch::Result<()> {
        for o in &mut self.0 {
            o.on_epoch(record, model)?;
        }
        Ok(())
    }
}

fn train_cmd(a: &TrainArgs, h: &Value) -> Result<()> {
    let train_set = read(&a.train, a.tokenizer)?;
    let dev_set = match &a.dev {
        Some(p) => read(p, a.tokenizer)?,
        None => Vec::new(),
    };
    let (vocab, emb) = match &a.embeddings {
        Some(p) => read_embeddings(std::io::BufReader::new(fs::File::open(p)?))?,
        None => {
            let tokens: Vec<Vec<String>> = train_set
                .iter()
                .flat_map(|d| d.turns.iter().map(|t| t.tokens.clone()))
                .collect();
            let vocab: Vocabulary = build_vocab(&tokens, a.min_count)?;
            let emb = EmbeddingMatrix::random(
                &vocab,
                a.embedding_dim,
                &mut RandomSource::new(a.seed).stream("embeddings"),
            );
            (vocab, emb)
        }
    };
    let config = ModelConfig {
        variant: a.variant,
        embedding_dim: emb.dim(),
        encoder_hidden: a.encoder_hidden,
        match_hidden: a.match_hidden,
        dropout: a.dropout,
        classification_threshold: a.threshold,
        ..ModelConfig::new(a.variant)
    };
    let cfg = TrainConfig {
        lr: a.lr,
        lr_decay: a.lr_decay,
        dropout: a.dropout,
        patience: a.patience,
        max_epochs: a.max_epochs,
        batch_size: a.batch_size,
        seeds: vec![a.seed],
        monitor: a.monitor.into(),
        stop_at_f1: a.stop_at_f1,
    };
    let mut writer = a.checkpoint_dir.as_ref().map(CheckpointWriter::new).transpose()?;
    let mut observers = Observers(Vec::new());
    if let Some(w) = writer.as_mut() {
        observers.0.push(w);
    }
    let result = train(config, emb, vocab, &train_set, &dev_set, &cfg, a.seed, &mut observers);
    let (model, log) = match result {
        Err(qamatch::Error::NonFinite { epoch }) => {
            log::error!("non-finite loss in epoch {epoch}; training aborted");
            return Err(qamatch::Error::NonFinite { epoch }.into());
        }
        r => r?,
    };
    ensure_parent(&a.out)?;
    model.save(
        &a.out,
        json!({ "run": h, "best_epoch": log.best_epoch, "train": cfg }),
    )?;
    let log_path = a.log.clone().unwrap_or_else(|| {
        let mut s = a.out.as_os_str().to_owned();
        s.push(".log.jsonl");
        PathBuf::from(s)
    });
    log.write_jsonl(fs::File::create(&log_path)?)?;
    write_sidecar(&log_path, h)?;
    let last = log.epochs.last().expect("at least one epoch");
    println!(
        "trained {} for {} epochs (best {}); final train loss {:.4}{}",
        a.variant,
        log.epochs.len(),
        log.best_epoch,
        last.train_loss,
        last.dev_f1.map(|f| format!(", dev F1 {f:.4}")).unwrap_or_default()
    );
    Ok(())
}

fn predict(a: &PredictArgs, h: &Value) -> Result<()> {
    let model = Model::load(&a.model, None)?;
    if let Some(v) = a.variant {
        if v != model.variant() {
            return Err(qamatch::Error::Checkpoint(format!(
                "checkpoint holds a {} model, not {v}",
                model.variant()
            ))
            .into());
        }
    }
    let dialogues = read(&a.input, a.tokenizer)?;
    let threshold = a.threshold.unwrap_or(model.config().classification_threshold);
    let preds: Vec<MatchResult> = dialogues
        .iter()
        .map(|d| {
            let mut r = greedy_match_with(d, threshold, |q, nq| model.score_pair(d, q, nq).probability);
            if a.probs {
                r.probs = Some(
                    r.pairs
                        .iter()
                        .map(|&(q, nq)| model.score_pair(d, q, nq).probability)
                        .collect(),
                );
            }
            r
        })
        .collect();
    write_predictions(&a.out, &preds, h)
}

fn write_predictions(path: &Path, preds: &[MatchResult], h: &Value) -> Result<()> {
    ensure_parent(path)?;
    write_jsonl_file(path, preds)?;
    write_sidecar(path, h)?;
    let n: usize = preds.iter().map(|p| p.pairs.len()).sum();
    println!("wrote {n} pairs for {} dialogues to {}", preds.len(), path.display());
    Ok(())
}

fn baseline(a: &BaselineArgs, h: &Value) -> Result<()> {
    let dialogues = read(&a.input, a.tokenizer)?;
    let preds: Vec<MatchResult> = if a.rule.eq_ignore_ascii_case("distance") {
        let path = a
            .train
            .as_ref()
            .ok_or_else(|| CliError::Usage("the distance baseline needs --train".into()))?;
        let b = DistanceBaseline::train_on(&read(path, a.tokenizer)?, &DistanceBaselineConfig::default())?;
        dialogues
            .iter()
            .map(|d| greedy_match(d, |q, nq| b.score(nq - q)))
            .collect()
    } else {
        let rule: GdRule = a
            .rule
            .parse()
            .map_err(|e: qamatch::Error| CliError::Usage(e.to_string()))?;
        dialogues.iter().map(|d| baseline_gd(d, rule, a.resolve)).collect()
    };
    write_predictions(&a.out, &preds, h)
}

fn evaluate(a: &EvaluateArgs, h: &Value) -> Result<()> {
    let gold = read(&a.gold, a.tokenizer)?;
    let mode = if a.exact {
        DistanceMode::Exact
    } else {
        DistanceMode::Bucketed
    };
    let mut rows = Vec::new();
    let mut runs = Vec::new();
    for (k, p) in a.predictions.iter().enumerate() {
        let preds: Vec<MatchResult> = read_jsonl_file(p)?;
        let m = micro_prf_with(&preds, &gold, mode)?;
        let summary = MetricsSummary::from(&m);
        let name = p
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| format!("run{k}"));
        rows.push(SystemRow {
            system: name,
            metrics: summary.clone(),
        });
        runs.push(summary);
    }
    if a.average {
        let mean = run_multi_seed(&(0..runs.len() as u64).collect::<Vec<_>>(), |k| {
            Ok(runs[k as usize].clone())
        })?;
        rows.push(SystemRow {
            system: "mean".into(),
            metrics: mean.mean,
        });
    }
    let report = Report::new(rows);
    let text = match a.format {
        ReportFormat::Table => {
            let mut t = String::new();
            if a.out.is_none() {
                t.push_str(&format!("# {}\n", serde_json::to_string(h)?));
            }
            t.push_str(&report.to_table());
            t
        }
        ReportFormat::Csv => report.to_csv()?,
        ReportFormat::Json => {
            serde_json::to_string_pretty(&json!({ "run": h, "report": report }))? + "\n"
        }
    };
    match &a.out {
        Some(p) => {
            ensure_parent(p)?;
            fs::write(p, text)?;
            write_sidecar(p, h)?;
        }
        None => print!("{text}"),
    }
    Ok(())
}
