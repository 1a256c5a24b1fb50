//! Parses the running example `sorted(my_list, reverse=True)`, prints its
//! oracle action sequence, replays it, and verifies the rebuilt tree is
//! structurally identical down to the rendered code.
//!
//!     cargo run --release --example oracle_roundtrip

use synforge::ast::{ast_equal, resolve_rules};
use synforge::minilang::{parse, render, Language};
use synforge::transition::{oracle_actions, replay, OracleAction};

fn main() {
    let code = "sorted(my_list, reverse=True)";
    let grammar = Language::MiniPy.grammar();
    let tree = resolve_rules(&parse(code, Language::MiniPy).unwrap(), &grammar).unwrap();

    let actions = oracle_actions(&tree, &grammar).unwrap();
    println!("{code}\n{} actions:", actions.len());
    for (i, action) in actions.iter().enumerate() {
        let desc = match action {
            OracleAction::Rule(pid) => format!("ApplyRule  {}", grammar.production_display(*pid)),
            OracleAction::Token(tok) => format!("GenToken   {tok}"),
            OracleAction::Close => "GenToken   </n>".to_string(),
        };
        println!("  t{:<3} {desc}", i + 1);
    }

    let rebuilt = replay(&actions, &grammar).unwrap();
    assert!(ast_equal(&rebuilt, &tree));
    let rendered = render(&rebuilt, Language::MiniPy).unwrap();
    assert_eq!(rendered, code);
    println!("replayed tree renders identically: {rendered}");

    // The whole fixture corpus round-trips the same way.
    let dir = synforge::fixtures::bundled_dir();
    let text = std::fs::read_to_string(dir.join("minipy_train.jsonl")).unwrap();
    let report = synforge::data::load_dataset(&text, &grammar, Language::MiniPy).unwrap();
    let mut ok = 0;
    for ex in &report.examples {
        let seq = oracle_actions(&ex.ast, &grammar).unwrap();
        if ast_equal(&replay(&seq, &grammar).unwrap(), &ex.ast) {
            ok += 1;
        }
    }
    println!("corpus round trips: {ok}/{}", report.examples.len());
}
