//! Beam search over the FlowDSL fixture set with an untrained model: every
//! hypothesis in the ranked list is a well-formed program, rendered and
//! scored, and the scores are monotone in the beam size.
//!
//!     cargo run --release --example beam_decode

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use synforge::data::{load_dataset, Vocab};
use synforge::infer::{beam_search, DecodeInput, DecodeOpts};
use synforge::minilang::{render, Language};
use synforge::model::{Model, ModelDims};

fn main() {
    let grammar = Language::FlowDsl.grammar();
    let dir = synforge::fixtures::bundled_dir();
    let text = std::fs::read_to_string(dir.join("flowdsl_train.jsonl")).unwrap();
    let examples = load_dataset(&text, &grammar, Language::FlowDsl).unwrap().examples;
    let vocab = Vocab::build(&examples, 1, 1);

    let dims = ModelDims {
        embed: 32,
        node_type_embed: 16,
        rnn: 48,
        scorer_hidden: 24,
        masked_applyrule: false,
        dropout: 0.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let model = Model::for_grammar(
        dims,
        &grammar,
        vocab.source_words.len(),
        vocab.terminal_words.len(),
        &mut rng,
    )
    .unwrap();

    let ex = &examples[0];
    println!("input: {}", ex.nl);
    let (src_ids, src_oov) = vocab.encode_source(&ex.src_tokens);
    let input = DecodeInput { src_tokens: &ex.src_tokens, src_ids: &src_ids, src_oov: &src_oov };

    for beam in [1usize, 5, 15] {
        let outcome = beam_search(
            &input,
            &model,
            &grammar,
            &vocab.terminal_words,
            DecodeOpts { beam, ..DecodeOpts::default() },
        )
        .unwrap();
        let best = outcome.complete().expect("FlowDSL derivations always complete");
        println!(
            "K={beam:<2} best score {:>9.4}  {}",
            best.score,
            render(&best.ast, Language::FlowDsl).unwrap()
        );
        if beam == 15 {
            if let synforge::infer::DecodeOutcome::Complete(ranked) = &outcome {
                println!("top of the K=15 finished pool:");
                for (rank, hyp) in ranked.iter().take(5).enumerate() {
                    println!(
                        "  #{rank} {:>9.4}  {}",
                        hyp.score,
                        render(&hyp.ast, Language::FlowDsl).unwrap()
                    );
                }
            }
        }
    }
    println!("(untrained weights: outputs are arbitrary but always grammatical)");
}
