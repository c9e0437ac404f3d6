//! Generates a small synthetic corpus, trains one variant and prints the
//! scores on held-out dialogues.
//!
//! `cargo run --release -p qamatch --example synthetic_run -- DIS`

use qamatch::embeddings::{build_vocab, train_skipgram, SkipGramConfig};
use qamatch::evaluation::{micro_prf, Report, SystemRow};
use qamatch::model::{ModelConfig, Variant};
use qamatch::numerics::RandomSource;
use qamatch::synth::{generate, SyntheticSpec};
use qamatch::training::{predict, train, TrainConfig};

fn main() -> qamatch::Result<()> {
    let variant: Variant = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "HDM".into())
        .parse()?;
    let spec = SyntheticSpec {
        n_dialogues: 120,
        incremental_fraction: 0.4,
        ..Default::default()
    };
    let data = generate(&spec, &mut RandomSource::new(7).stream("synth"))?;
    let (train_set, rest) = data.split_at(90);
    let (dev, test) = rest.split_at(10);

    let corpus: Vec<Vec<String>> = train_set
        .iter()
        .flat_map(|d| d.turns.iter().map(|t| t.tokens.clone()))
        .collect();
    let vocab = build_vocab(&corpus, 1)?;
    let (emb, _) = train_skipgram(&corpus, &vocab, &SkipGramConfig { dim: 16, ..Default::default() });

    let config = ModelConfig {
        embedding_dim: 16,
        encoder_hidden: 16,
        match_hidden: 32,
        ..ModelConfig::new(variant)
    };
    let cfg = TrainConfig { max_epochs: 30, ..Default::default() };
    let (model, log) = train(config, emb, vocab, train_set, dev, &cfg, 1, &mut ())?;
    println!("{} epochs, best {}", log.epochs.len(), log.best_epoch);

    let metrics = micro_prf(&predict(&model, test), test)?;
    let row = SystemRow { system: variant.to_string(), metrics: (&metrics).into() };
    print!("{}", Report::new(vec![row]).to_table());
    Ok(())
}
