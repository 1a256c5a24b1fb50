//! Mines frequent unary production chains from the fixture corpus, merges
//! them into closure rules, and shows the oracle action sequences shrinking
//! while round trips keep holding.
//!
//!     cargo run --release --example unary_closure

use synforge::ast::ast_equal;
use synforge::data::load_dataset;
use synforge::grammar::{grammar_stats, unary_closure};
use synforge::minilang::Language;
use synforge::transition::{oracle_actions, replay};

fn main() {
    let grammar = Language::MiniPy.grammar();
    let dir = synforge::fixtures::bundled_dir();
    let text = std::fs::read_to_string(dir.join("minipy_train.jsonl")).unwrap();
    let report = load_dataset(&text, &grammar, Language::MiniPy).unwrap();
    let trees: Vec<_> = report.examples.iter().map(|e| e.ast.clone()).collect();
    let sequences: Vec<_> = report.examples.iter().map(|e| e.oracle.clone()).collect();

    for k in [100, 50, 30, 10] {
        let closed = unary_closure(&grammar, &sequences, k);
        let stats = grammar_stats(&closed, &trees).unwrap();
        println!(
            "k = {k:>3}: {} productions (+{} closures), avg actions {:.1}",
            closed.productions.len(),
            closed.productions.len() - grammar.productions.len(),
            stats.avg_actions_per_example
        );
    }

    let closed = unary_closure(&grammar, &sequences, 30);
    println!("\nclosure rules at k = 30:");
    for prod in closed.productions.iter().filter(|p| p.is_closure) {
        let chain = prod.closure_chain.as_ref().unwrap();
        let parts: Vec<String> =
            chain.iter().map(|c| closed.production_display(*c)).collect();
        println!("  {}  (merges: {})", closed.production_display(prod.id), parts.join("  |  "));
    }

    // Closure grammars stay loss-free: every tree still round-trips.
    let ok = trees
        .iter()
        .filter(|t| {
            let seq = oracle_actions(t, &closed).unwrap();
            ast_equal(&replay(&seq, &closed).unwrap(), t)
        })
        .count();
    println!("\nround trips under the closure grammar: {ok}/{}", trees.len());
}
