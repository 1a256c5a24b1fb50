//! Trains on the copy-stress fixture set, where each target contains an
//! identifier that appears exactly once corpus-wide (hence out of
//! vocabulary), then shows the pointer network copying those words straight
//! from the input at decode time.
//!
//!     cargo run --release --example copy_mechanism

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use synforge::data::{load_dataset, prepare_examples, Vocab};
use synforge::infer::{greedy_decode, DecodeInput, DecodeOpts};
use synforge::minilang::{render, Language};
use synforge::model::{Model, ModelDims};
use synforge::train::{train, TrainConfig};

fn main() {
    let grammar = Language::MiniPy.grammar();
    let dir = synforge::fixtures::bundled_dir();
    let text = std::fs::read_to_string(dir.join("minipy_copy.jsonl")).unwrap();
    let examples = load_dataset(&text, &grammar, Language::MiniPy).unwrap().examples;
    // Frequency threshold 2: the unique identifiers have no vocabulary row.
    let vocab = Vocab::build(&examples, 2, 2);
    println!(
        "terminal vocabulary: {} content words (+ close/unk rows)",
        vocab.terminal_content_size()
    );
    let prepared = prepare_examples(&examples, &vocab, &grammar);

    let config = TrainConfig {
        dims: ModelDims {
            embed: 32,
            node_type_embed: 16,
            rnn: 48,
            scorer_hidden: 24,
            masked_applyrule: false,
            dropout: 0.0,
        },
        batch_size: 6,
        max_epochs: 400,
        dev_every: 10,
        stop_at_dev_acc: Some(1.0),
        patience: 40,
        d_source: 2,
        d_terminal: 2,
        ..TrainConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let model = Model::for_grammar(
        config.dims,
        &grammar,
        vocab.source_words.len(),
        vocab.terminal_words.len(),
        &mut rng,
    )
    .unwrap();
    let outcome = train(model, &grammar, &vocab, Language::MiniPy, &prepared, &prepared, &config)
        .expect("training succeeds");
    println!("train exact match: {:.2}\n", outcome.best_dev_acc);

    for ex in examples.iter().take(6) {
        let (src_ids, src_oov) = vocab.encode_source(&ex.src_tokens);
        let input =
            DecodeInput { src_tokens: &ex.src_tokens, src_ids: &src_ids, src_oov: &src_oov };
        let decoded = greedy_decode(
            &input,
            &outcome.model,
            &grammar,
            &vocab.terminal_words,
            DecodeOpts::default(),
        )
        .unwrap();
        let code = decoded
            .complete()
            .map(|h| render(&h.ast, Language::MiniPy).unwrap())
            .unwrap_or_else(|| "<incomplete>".into());
        let oov_words: Vec<&str> = ex
            .src_tokens
            .iter()
            .zip(&src_oov)
            .filter(|(_, &o)| o)
            .map(|(w, _)| w.as_str())
            .collect();
        println!("nl:   {}\n  oov {:?}\n  ->  {code}\n", ex.nl, oov_words);
    }
}
