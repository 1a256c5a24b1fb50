//! Steps the derivation automaton by hand: legal actions, frontier tracking
//! and parent steps, ending in a complete tree.
//!
//!     cargo run --release --example derivation_walk

use synforge::minilang::{render, Language};
use synforge::transition::{DerivationState, LegalOpts, OracleAction};

fn main() {
    let grammar = Language::MiniPy.grammar();
    let opts = LegalOpts { vocab_len: 6, input_len: 2, max_terminal_tokens: 8 };

    // Derive `save(data)` action by action.
    let script: Vec<OracleAction> = vec![
        OracleAction::Rule(find(&grammar, "root -> body:stmt")),
        OracleAction::Rule(find(&grammar, "stmt -> s:Expr")),
        OracleAction::Rule(find(&grammar, "Expr -> value:expr")),
        OracleAction::Rule(find(&grammar, "expr -> e:Call")),
        OracleAction::Rule(find(&grammar, "Call -> func:expr args:expr* keywords:kw*")),
        OracleAction::Rule(find(&grammar, "expr -> e:Name")),
        OracleAction::Rule(find(&grammar, "Name -> id:ident")),
        OracleAction::Token("save".into()),
        OracleAction::Close,
        OracleAction::Rule(find(&grammar, "expr* -> e0:expr")),
        OracleAction::Rule(find(&grammar, "expr -> e:Name")),
        OracleAction::Rule(find(&grammar, "Name -> id:ident")),
        OracleAction::Token("data".into()),
        OracleAction::Close,
        OracleAction::Rule(find(&grammar, "kw* ->")),
    ];

    let mut state = DerivationState::initial(&grammar);
    for op in &script {
        let frontier = state.frontier().unwrap();
        let legal = state.legal_actions(&grammar, opts).unwrap();
        println!(
            "t{:<3} frontier {:<8} (created t{}, {} legal) <- {:?}",
            state.t() + 1,
            grammar.node_type(frontier.ty).name,
            frontier.created_at,
            legal.len(),
            op
        );
        state = state.apply(op, &grammar).unwrap();
    }
    assert!(state.is_complete());
    let tree = state.to_ast(&grammar);
    println!("\ncomplete after {} steps: {}", state.t(), render(&tree, Language::MiniPy).unwrap());
    println!("parent of step 8 (first token): t{}", state.parent_step(8).unwrap());
}

fn find(grammar: &synforge::Grammar, display: &str) -> synforge::ProdId {
    grammar
        .productions
        .iter()
        .map(|p| p.id)
        .find(|&pid| grammar.production_display(pid) == display)
        .unwrap_or_else(|| panic!("no production `{display}`"))
}
