//! Metrics walk-through: exact match, token-level BLEU-4 and the DSL
//! channel/full-tree accuracies, plus the size-bucketed report.
//!
//!     cargo run --release --example evaluate

use synforge::evalx::{bleu4, build_report, dsl_accuracy, exact_match, PerExample};
use synforge::minilang::{parse, surface_tokens, Language};

fn main() {
    let pairs = [
        ("sorted(my_list, reverse=True)", "sorted(my_list, reverse=True)"),
        ("out.write(blankout(t, 'B'))", "out.write(blankout(t.contents, 'B'))"),
        ("x = 5", "y = 5"),
    ];
    let mut rows = Vec::new();
    for (i, (pred, gold)) in pairs.iter().enumerate() {
        let p = surface_tokens(pred).unwrap();
        let g = surface_tokens(gold).unwrap();
        let bleu = bleu4(&p, &g).unwrap();
        let exact = exact_match(pred, gold);
        println!("pred: {pred}\ngold: {gold}\n  exact {exact}  bleu4 {bleu:.3}\n");
        let gold_tree = parse(gold, Language::MiniPy).unwrap();
        rows.push(PerExample {
            id: format!("ex{i}"),
            exact,
            bleu4: bleu,
            gold_nodes: gold_tree.node_count(),
        });
    }
    let report = build_report(rows);
    println!("corpus: accuracy {:.3}, bleu4 {:.3}", report.accuracy, report.bleu4);
    for bucket in &report.by_ast_size {
        println!(
            "  AST size {:>2}-{:>2}: {} example(s), accuracy {:.2}",
            bucket.min_nodes, bucket.max_nodes, bucket.n_examples, bucket.accuracy
        );
    }

    let pred = parse("IF Instagram.AnyNewPhotoByYou THEN Dropbox.UploadFile", Language::FlowDsl).unwrap();
    let gold = parse("IF Instagram.AnyNewPhotoByYou THEN Dropbox.AddFileFromURL", Language::FlowDsl).unwrap();
    let acc = dsl_accuracy(&pred, &gold).unwrap();
    println!(
        "\nFlowDSL: channels match = {}, full tree match = {}",
        acc.channel_correct, acc.full_correct
    );
}
