//! Evaluation metrics: exact-match accuracy, per-example token-level BLEU-4
//! (corpus score is the mean over examples), and channel/full-tree accuracy
//! for the DSL setting.

use std::collections::HashMap;

use serde::Serialize;
use thiserror::Error;

use crate::ast::{ast_equal, AstNode};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("empty gold token sequence")]
    EmptyGold,
    #[error("tree is not a FlowDSL program: {0}")]
    WrongGrammar(String),
}

/// String equality after per-line trailing-whitespace normalization.
pub fn exact_match(pred: &str, gold: &str) -> bool {
    let norm = |s: &str| s.lines().map(str::trim_end).collect::<Vec<_>>().join("\n");
    norm(pred) == norm(gold)
}

pub fn corpus_accuracy<'a>(pairs: impl Iterator<Item = (&'a str, &'a str)>) -> f64 {
    let mut n = 0usize;
    let mut hit = 0usize;
    for (pred, gold) in pairs {
        n += 1;
        if exact_match(pred, gold) {
            hit += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        hit as f64 / n as f64
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts: HashMap<&[String], usize> = HashMap::new();
    if tokens.len() >= n {
        for window in tokens.windows(n) {
            *counts.entry(window).or_insert(0) += 1;
        }
    }
    counts
}

/// Sentence-level BLEU with n-grams up to 4, brevity penalty, and add-one
/// smoothing on higher-order precisions whose clipped match count is zero
/// (many references are shorter than four tokens at this scale).
pub fn bleu4(pred: &[String], gold: &[String]) -> Result<f64, EvalError> {
    if gold.is_empty() {
        return Err(EvalError::EmptyGold);
    }
    if pred.is_empty() {
        return Ok(0.0);
    }
    let mut log_sum = 0.0;
    for n in 1..=4usize {
        let pred_counts = ngram_counts(pred, n);
        let gold_counts = ngram_counts(gold, n);
        let total: usize = pred_counts.values().sum();
        let matched: usize = pred_counts
            .iter()
            .map(|(gram, count)| (*count).min(gold_counts.get(gram).copied().unwrap_or(0)))
            .sum();
        let p = if matched == 0 && n > 1 {
            (matched + 1) as f64 / (total + 1) as f64
        } else if total == 0 {
            // Unigram total is never zero here; unreachable for n = 1.
            0.0
        } else {
            matched as f64 / total as f64
        };
        if p == 0.0 {
            return Ok(0.0);
        }
        log_sum += p.ln();
    }
    let precision_term = (log_sum / 4.0).exp();
    let bp = if pred.len() < gold.len() {
        (1.0 - gold.len() as f64 / pred.len() as f64).exp()
    } else {
        1.0
    };
    Ok(bp * precision_term)
}

pub fn corpus_bleu4(pairs: &[(Vec<String>, Vec<String>)]) -> Result<f64, EvalError> {
    if pairs.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for (pred, gold) in pairs {
        total += bleu4(pred, gold)?;
    }
    Ok(total / pairs.len() as f64)
}

/// Channel-level and full-tree correctness for FlowDSL programs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct DslAccuracy {
    pub channel_correct: bool,
    pub full_correct: bool,
}

fn flow_channel<'a>(tree: &'a AstNode, part: &str) -> Result<&'a AstNode, EvalError> {
    let slot = tree
        .children()
        .iter()
        .find(|c| c.ty_name() == part)
        .ok_or_else(|| EvalError::WrongGrammar(format!("missing {part} subtree")))?;
    slot.children()
        .iter()
        .find(|c| c.ty_name() == "channel")
        .ok_or_else(|| EvalError::WrongGrammar(format!("missing channel under {part}")))
}

pub fn dsl_accuracy(pred: &AstNode, gold: &AstNode) -> Result<DslAccuracy, EvalError> {
    for tree in [pred, gold] {
        if tree.ty_name() != "root" || tree.children().len() != 2 {
            return Err(EvalError::WrongGrammar("root must hold trigger and action".into()));
        }
    }
    let channel_correct = ast_equal(flow_channel(pred, "trigger")?, flow_channel(gold, "trigger")?)
        && ast_equal(flow_channel(pred, "action")?, flow_channel(gold, "action")?);
    let full_correct = ast_equal(pred, gold);
    Ok(DslAccuracy { channel_correct, full_correct })
}

// ---------------------------------------------------------------------------
// Evaluation report
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
pub struct PerExample {
    pub id: String,
    pub exact: bool,
    pub bleu4: f64,
    pub gold_nodes: usize,
}

#[derive(Debug, Serialize)]
pub struct SizeBucket {
    /// Inclusive node-count range of reference ASTs in this bucket.
    pub min_nodes: usize,
    pub max_nodes: usize,
    pub n_examples: usize,
    pub accuracy: f64,
    pub bleu4: f64,
}

#[derive(Debug, Serialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub bleu4: f64,
    pub n_examples: usize,
    pub per_example: Vec<PerExample>,
    /// Breakdown by reference AST size (node count), bucket width 10.
    pub by_ast_size: Vec<SizeBucket>,
}

pub fn build_report(rows: Vec<PerExample>) -> EvalReport {
    let n = rows.len();
    let accuracy = if n == 0 {
        0.0
    } else {
        rows.iter().filter(|r| r.exact).count() as f64 / n as f64
    };
    let bleu = if n == 0 { 0.0 } else { rows.iter().map(|r| r.bleu4).sum::<f64>() / n as f64 };

    let mut buckets: HashMap<usize, Vec<&PerExample>> = HashMap::new();
    for row in &rows {
        buckets.entry(row.gold_nodes / 10).or_default().push(row);
    }
    let mut keys: Vec<usize> = buckets.keys().copied().collect();
    keys.sort_unstable();
    let by_ast_size = keys
        .into_iter()
        .map(|k| {
            let group = &buckets[&k];
            SizeBucket {
                min_nodes: k * 10,
                max_nodes: k * 10 + 9,
                n_examples: group.len(),
                accuracy: group.iter().filter(|r| r.exact).count() as f64 / group.len() as f64,
                bleu4: group.iter().map(|r| r.bleu4).sum::<f64>() / group.len() as f64,
            }
        })
        .collect();
    EvalReport { accuracy, bleu4: bleu, n_examples: n, per_example: rows, by_ast_size }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn exact_match_is_string_equality_with_trailing_ws_normalized() {
        assert!(exact_match("x = 5", "x = 5"));
        assert!(exact_match("x = 5  \n", "x = 5"));
        assert!(!exact_match("x = 5", "x = 6"));
    }

    #[test]
    fn gold_vs_gold_accuracy_is_one() {
        let golds = ["x = 5", "f(y)", "for i in xs: f(i) end"];
        let acc = corpus_accuracy(golds.iter().map(|g| (*g, *g)));
        assert_eq!(acc, 1.0);
    }

    #[test]
    fn identical_sequences_score_one() {
        let t = toks("sorted ( my_list , reverse = True )");
        assert!((bleu4(&t, &t).unwrap() - 1.0).abs() < 1e-12);
        // Short identical sequences are also exact under smoothing.
        let s = toks("x = 5");
        assert!((bleu4(&s, &s).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_prediction_scores_zero_and_empty_gold_errors() {
        assert_eq!(bleu4(&[], &toks("x = 5")).unwrap(), 0.0);
        assert!(matches!(bleu4(&toks("x"), &[]), Err(EvalError::EmptyGold)));
    }

    #[test]
    fn one_token_difference_drops_below_one() {
        let gold = toks("a b c d e");
        let pred = toks("a b c d f");
        let score = bleu4(&pred, &gold).unwrap();
        assert!(score < 1.0 && score > 0.0);
    }

    /// Independent reference implementation, written directly from the
    /// definition with a different counting strategy (per-window scan rather
    /// than hash-joined counts).
    fn reference_bleu(pred: &[String], gold: &[String]) -> f64 {
        if pred.is_empty() {
            return 0.0;
        }
        let mut logs = 0.0;
        for n in 1..=4usize {
            let total = pred.len().saturating_sub(n - 1);
            let mut matched = 0usize;
            let mut used = vec![false; gold.len()];
            if pred.len() >= n {
                for w in pred.windows(n) {
                    if gold.len() >= n {
                        for (start, gw) in gold.windows(n).enumerate() {
                            if !used[start] && gw == w {
                                used[start] = true;
                                matched += 1;
                                break;
                            }
                        }
                    }
                }
            }
            let p = if matched == 0 && n > 1 {
                (matched + 1) as f64 / (total + 1) as f64
            } else if total == 0 {
                0.0
            } else {
                matched as f64 / total as f64
            };
            if p == 0.0 {
                return 0.0;
            }
            logs += p.ln();
        }
        let bp = if pred.len() < gold.len() {
            (1.0 - gold.len() as f64 / pred.len() as f64).exp()
        } else {
            1.0
        };
        bp * (logs / 4.0).exp()
    }

    #[test]
    fn bleu_matches_independent_reference_on_random_pairs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let alphabet = ["a", "b", "c", "d", "(", ")", "=", "x"];
        for _ in 0..20 {
            let len_p = rng.gen_range(1..12);
            let len_g = rng.gen_range(1..12);
            let pred: Vec<String> =
                (0..len_p).map(|_| alphabet[rng.gen_range(0..alphabet.len())].to_string()).collect();
            let gold: Vec<String> =
                (0..len_g).map(|_| alphabet[rng.gen_range(0..alphabet.len())].to_string()).collect();
            let ours = bleu4(&pred, &gold).unwrap();
            let reference = reference_bleu(&pred, &gold);
            assert!(
                (ours - reference).abs() < 1e-9,
                "pred {pred:?} gold {gold:?}: {ours} vs {reference}"
            );
        }
    }

    fn flow_tree(tc: &str, tf: &str, ac: &str, af: &str) -> AstNode {
        let code = format!("IF {tc}.{tf} THEN {ac}.{af}");
        crate::minilang::parse(&code, crate::minilang::Language::FlowDsl).unwrap()
    }

    #[test]
    fn identical_trees_are_fully_correct() {
        let a = flow_tree("Instagram", "AnyNewPhotoByYou", "Dropbox", "AddFileFromURL");
        let acc = dsl_accuracy(&a, &a).unwrap();
        assert!(acc.channel_correct && acc.full_correct);
    }

    #[test]
    fn same_channels_different_functions_is_channel_only() {
        let a = flow_tree("Instagram", "AnyNewPhotoByYou", "Dropbox", "AddFileFromURL");
        let b = flow_tree("Instagram", "NewLike", "Dropbox", "UploadFile");
        let acc = dsl_accuracy(&a, &b).unwrap();
        assert!(acc.channel_correct);
        assert!(!acc.full_correct);
    }

    #[test]
    fn full_implies_channel_on_random_pairs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let channels = crate::minilang::flow_channels();
        let funcs = crate::minilang::flow_functions();
        let mut sample = |rng: &mut rand_chacha::ChaCha8Rng| {
            flow_tree(
                channels[rng.gen_range(0..channels.len())],
                funcs[rng.gen_range(0..funcs.len())],
                channels[rng.gen_range(0..channels.len())],
                funcs[rng.gen_range(0..funcs.len())],
            )
        };
        for _ in 0..1000 {
            let a = sample(&mut rng);
            let b = sample(&mut rng);
            let acc = dsl_accuracy(&a, &b).unwrap();
            if acc.full_correct {
                assert!(acc.channel_correct, "full-tree correctness implies channel correctness");
            }
        }
    }

    #[test]
    fn non_flow_tree_is_rejected() {
        let a = flow_tree("Sms", "SendSms", "Email", "SendEmail");
        let b = crate::minilang::parse("x = 5", crate::minilang::Language::MiniPy).unwrap();
        assert!(matches!(dsl_accuracy(&a, &b), Err(EvalError::WrongGrammar(_))));
    }

    #[test]
    fn corpus_metrics_are_permutation_invariant() {
        let rows = |order: &[usize]| {
            let data = [("x = 5", "x = 5"), ("f(y)", "g(y)"), ("a + b", "a + b")];
            let picked: Vec<_> = order.iter().map(|&i| data[i]).collect();
            let acc = corpus_accuracy(picked.iter().map(|(p, g)| (*p, *g)));
            let pairs: Vec<(Vec<String>, Vec<String>)> =
                picked.iter().map(|(p, g)| (toks(p), toks(g))).collect();
            (acc, corpus_bleu4(&pairs).unwrap())
        };
        assert_eq!(rows(&[0, 1, 2]), rows(&[2, 0, 1]));
    }

    #[test]
    fn report_buckets_by_reference_size() {
        let rows = vec![
            PerExample { id: "a".into(), exact: true, bleu4: 1.0, gold_nodes: 5 },
            PerExample { id: "b".into(), exact: false, bleu4: 0.5, gold_nodes: 7 },
            PerExample { id: "c".into(), exact: true, bleu4: 1.0, gold_nodes: 15 },
        ];
        let report = build_report(rows);
        assert_eq!(report.n_examples, 3);
        assert_eq!(report.by_ast_size.len(), 2);
        assert_eq!(report.by_ast_size[0].n_examples, 2);
        assert!((report.by_ast_size[0].accuracy - 0.5).abs() < 1e-12);
        assert!((report.accuracy - 2.0 / 3.0).abs() < 1e-12);
    }
}
