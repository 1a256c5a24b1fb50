//! Trains a reduced model to memorize a dozen fixture examples, saves a
//! checkpoint, reloads it and verifies decode parity — the end-to-end
//! training loop in miniature.
//!
//!     cargo run --release --example train_overfit

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use synforge::data::{load_dataset, prepare_examples, Vocab};
use synforge::infer::DecodeOpts;
use synforge::minilang::Language;
use synforge::model::{Model, ModelDims};
use synforge::train::{evaluate_exact_match, load_checkpoint, save_checkpoint, train, TrainConfig};

fn main() {
    let grammar = Language::MiniPy.grammar();
    let dir = synforge::fixtures::bundled_dir();
    let text = std::fs::read_to_string(dir.join("minipy_train.jsonl")).unwrap();
    let examples = load_dataset(&text, &grammar, Language::MiniPy).unwrap().examples;
    let subset = &examples[..12];
    let vocab = Vocab::build(subset, 1, 1);
    let prepared = prepare_examples(subset, &vocab, &grammar);

    let config = TrainConfig {
        dims: ModelDims {
            embed: 48,
            node_type_embed: 24,
            rnn: 64,
            scorer_hidden: 32,
            masked_applyrule: false,
            dropout: 0.0,
        },
        batch_size: 6,
        max_epochs: 300,
        dev_every: 10,
        stop_at_dev_acc: Some(1.0),
        patience: 20,
        ..TrainConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let model = Model::for_grammar(
        config.dims,
        &grammar,
        vocab.source_words.len(),
        vocab.terminal_words.len(),
        &mut rng,
    )
    .unwrap();

    let started = std::time::Instant::now();
    let outcome = train(model, &grammar, &vocab, Language::MiniPy, &prepared, &prepared, &config)
        .expect("training succeeds");
    for rec in outcome.log.iter().filter(|r| !r.dev_acc.is_nan()) {
        println!(
            "epoch {:>3}  nll {:>7.3}  exact {:.2}  bleu {:.2}",
            rec.epoch, rec.train_nll, rec.dev_acc, rec.dev_bleu
        );
    }
    println!("best exact match {:.2} in {:?}", outcome.best_dev_acc, started.elapsed());

    // Checkpoint round trip: decoding is identical after save + load.
    let tmp = std::env::temp_dir().join("synforge_overfit.ckpt");
    save_checkpoint(&tmp, &outcome.model, &grammar.hash(), &vocab.hash(), &config).unwrap();
    let loaded = load_checkpoint(&tmp, Some(&grammar)).unwrap();
    let opts = DecodeOpts { beam: 1, ..DecodeOpts::default() };
    let (acc, _) =
        evaluate_exact_match(&loaded.model, &grammar, &vocab, Language::MiniPy, &prepared, opts);
    println!("exact match after reload: {acc:.2} (checkpoint {})", tmp.display());
}
