//! Loads the bundled grammars, prints their statistics, and induces a fresh
//! grammar from the fixture corpus to show that induction covers it.
//!
//!     cargo run --release --example grammar_tour

use synforge::data::load_dataset;
use synforge::grammar::{grammar_stats, induce_grammar};
use synforge::minilang::Language;

fn main() {
    for language in [Language::MiniPy, Language::FlowDsl] {
        let grammar = language.grammar();
        println!("== {} ==", language.name());
        println!("  node types:  {}", grammar.node_types.len());
        println!("  productions: {}", grammar.productions.len());
        for pid in grammar.productions.iter().take(6).map(|p| p.id) {
            println!("    {}", grammar.production_display(pid));
        }
        println!("    ...");
    }

    // Corpus statistics in the usual dataset-table shape.
    let dir = synforge::fixtures::bundled_dir();
    let text = std::fs::read_to_string(dir.join("minipy_train.jsonl")).unwrap();
    let grammar = Language::MiniPy.grammar();
    let report = load_dataset(&text, &grammar, Language::MiniPy).unwrap();
    let trees: Vec<_> = report.examples.iter().map(|e| e.ast.clone()).collect();
    let stats = grammar_stats(&grammar, &trees).unwrap();
    println!("\nMiniPy fixture corpus ({} examples)", trees.len());
    println!("  avg actions per example: {:.1}", stats.avg_actions_per_example);

    // Induction: every corpus tree is derivable under the induced grammar.
    let induced = induce_grammar(&trees, "root").unwrap();
    println!(
        "  induced grammar: {} productions, {} node types",
        induced.productions.len(),
        induced.node_types.len()
    );
    let ok = trees
        .iter()
        .filter(|t| synforge::transition::oracle_actions(t, &induced).is_ok())
        .count();
    println!("  derivable under induced grammar: {ok}/{}", trees.len());
}
