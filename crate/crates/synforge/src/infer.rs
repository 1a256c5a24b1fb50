//! Beam-search and greedy decoding.
//!
//! Each step expands every live hypothesis by all of its legal actions,
//! keeps the top-K by accumulated log probability, and moves completed
//! hypotheses into a finished pool that does not occupy beam slots. The
//! search ends when K hypotheses have finished, the beam empties, or the
//! step budget runs out; greedy decoding is exactly the K = 1 case.
//!
//! Token actions are scored with the marginal probability of their surface
//! token, so a vocabulary route and a copy route producing the same word are
//! interchangeable in score.

use std::collections::HashMap;
use std::rc::Rc;

use thiserror::Error;

use crate::ast::AstNode;
use crate::grammar::Grammar;
use crate::model::{HeadValues, Model, PrevAction, CLOSE_TOKEN_ID};
use crate::transition::{
    Action, DerivationState, LegalOpts, OracleAction, TransitionError, DEFAULT_MAX_TERMINAL_TOKENS,
};

#[derive(Clone, Copy, Debug)]
pub struct DecodeOpts {
    pub beam: usize,
    pub max_steps: usize,
    pub max_terminal_tokens: usize,
    /// Divide scores by derivation length when ranking. Off by default: the
    /// score is the raw sum of log probabilities.
    pub length_norm: bool,
}

impl Default for DecodeOpts {
    fn default() -> Self {
        DecodeOpts {
            beam: 15,
            max_steps: 300,
            max_terminal_tokens: DEFAULT_MAX_TERMINAL_TOKENS,
            length_norm: false,
        }
    }
}

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("beam size and step budget must be >= 1")]
    BadOpts,
    #[error(transparent)]
    Transition(#[from] TransitionError),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
}

/// A finished (or best partial) derivation.
#[derive(Clone, Debug)]
pub struct DecodedHyp {
    pub ast: AstNode,
    pub score: f64,
    pub actions: Vec<Action>,
    pub tree_ops: Vec<OracleAction>,
    pub complete: bool,
}

#[derive(Debug)]
pub enum DecodeOutcome {
    /// Ranked complete hypotheses, best first.
    Complete(Vec<DecodedHyp>),
    /// No hypothesis completed within the step budget.
    Incomplete { best_partial: DecodedHyp },
}

impl DecodeOutcome {
    pub fn best(&self) -> &DecodedHyp {
        match self {
            DecodeOutcome::Complete(ranked) => &ranked[0],
            DecodeOutcome::Incomplete { best_partial } => best_partial,
        }
    }

    pub fn complete(&self) -> Option<&DecodedHyp> {
        match self {
            DecodeOutcome::Complete(ranked) => Some(&ranked[0]),
            DecodeOutcome::Incomplete { .. } => None,
        }
    }
}

struct StepRec {
    h: Vec<f64>,
    emb: Vec<f64>,
}

struct Hypothesis {
    state: DerivationState,
    score: f64,
    /// Stored states by step for parent feeding; index 0 is the
    /// pre-derivation state (zero hidden, zero parent embedding).
    steps: Vec<Rc<StepRec>>,
    last_c: Vec<f64>,
    /// Embedding of the chronologically previous action (start row at t=0).
    chain_emb: Vec<f64>,
    actions: Vec<Action>,
}

/// Per-input routing table: which input positions and vocabulary rows carry
/// the same surface token.
struct RouteTable {
    vocab_of_position: Vec<Option<usize>>,
    positions_of_surface: HashMap<String, Vec<usize>>,
}

impl RouteTable {
    fn build(input_tokens: &[String], terminal_words: &[String]) -> Self {
        let vocab_index: HashMap<&str, usize> = terminal_words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.as_str(), i))
            .collect();
        let mut positions_of_surface: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, tok) in input_tokens.iter().enumerate() {
            positions_of_surface.entry(tok.clone()).or_default().push(i);
        }
        RouteTable {
            vocab_of_position: input_tokens
                .iter()
                .map(|t| vocab_index.get(t.as_str()).copied())
                .collect(),
            positions_of_surface,
        }
    }

    fn copy_positions(&self, surface: &str) -> &[usize] {
        self.positions_of_surface.get(surface).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Inputs to one decode: the surface tokens plus their vocabulary encoding.
pub struct DecodeInput<'a> {
    pub src_tokens: &'a [String],
    pub src_ids: &'a [usize],
    pub src_oov: &'a [bool],
}

pub fn beam_search(
    input: &DecodeInput,
    model: &Model,
    grammar: &Grammar,
    terminal_words: &[String],
    opts: DecodeOpts,
) -> Result<DecodeOutcome, DecodeError> {
    if opts.beam == 0 || opts.max_steps == 0 {
        return Err(DecodeError::BadOpts);
    }
    let enc = model.encode_values(input.src_ids, input.src_oov)?;
    let routes = RouteTable::build(input.src_tokens, terminal_words);
    let legal_opts = LegalOpts {
        vocab_len: terminal_words.len(),
        input_len: input.src_tokens.len(),
        max_terminal_tokens: opts.max_terminal_tokens,
    };

    let rnn = model.dims.rnn;
    let embed = model.dims.embed;
    let initial = Hypothesis {
        state: DerivationState::initial(grammar),
        score: 0.0,
        steps: vec![Rc::new(StepRec { h: vec![0.0; rnn], emb: vec![0.0; embed] })],
        last_c: vec![0.0; rnn],
        chain_emb: model.start_embedding_values(),
        actions: Vec::new(),
    };

    let mut live: Vec<Hypothesis> = vec![initial];
    let mut finished: Vec<Hypothesis> = Vec::new();

    for _ in 0..opts.max_steps {
        if live.is_empty() || finished.len() >= opts.beam {
            break;
        }
        // (score, parent index, action order) keyed candidates.
        struct Candidate {
            score: f64,
            parent: usize,
            action_rank: usize,
            action: Action,
            op: OracleAction,
            h: Vec<f64>,
            c: Vec<f64>,
            emb_row: PrevAction,
        }
        let mut candidates: Vec<Candidate> = Vec::new();
        for (parent_idx, hyp) in live.iter().enumerate() {
            let frontier = hyp.state.frontier().expect("live hypotheses are incomplete");
            let parent = if frontier.created_at == 0 {
                None
            } else {
                let rec = &hyp.steps[frontier.created_at];
                Some((rec.h.as_slice(), rec.emb.as_slice()))
            };
            let prev_h = &hyp.steps.last().expect("never empty").h;
            let sv = model.step_values(
                &enc,
                prev_h,
                &hyp.last_c,
                &hyp.chain_emb,
                parent,
                frontier.ty,
                frontier.kind,
            )?;
            let legal = hyp.state.legal_actions(grammar, legal_opts)?;
            for (action_rank, action) in legal.into_iter().enumerate() {
                let (log_p, op, emb_row) = match action {
                    Action::ApplyRule(pid) => {
                        let p = match &sv.head {
                            HeadValues::Rules(dist) => {
                                if model.dims.masked_applyrule {
                                    // Renormalize over the legal subset.
                                    let legal_ids =
                                        hyp.state.legal_actions(grammar, legal_opts)?;
                                    let mass: f64 = legal_ids
                                        .iter()
                                        .filter_map(|a| match a {
                                            Action::ApplyRule(q) => Some(dist[q.0 as usize]),
                                            _ => None,
                                        })
                                        .sum();
                                    dist[pid.0 as usize] / mass.max(1e-300)
                                } else {
                                    dist[pid.0 as usize]
                                }
                            }
                            _ => unreachable!("rule action on a terminal frontier"),
                        };
                        (p.max(1e-300).ln(), OracleAction::Rule(pid), PrevAction::Rule(pid))
                    }
                    Action::GenClose => {
                        let p = sv.head.token_marginal(Some(CLOSE_TOKEN_ID), &[]);
                        (p.max(1e-300).ln(), OracleAction::Close, PrevAction::Token(CLOSE_TOKEN_ID))
                    }
                    Action::GenVocab(v) => {
                        let surface = &terminal_words[v];
                        let p = sv.head.token_marginal(Some(v), routes.copy_positions(surface));
                        (
                            p.max(1e-300).ln(),
                            OracleAction::Token(surface.clone()),
                            PrevAction::Token(v),
                        )
                    }
                    Action::GenCopy(pos) => {
                        let surface = &input.src_tokens[pos];
                        let vocab_id = routes.vocab_of_position[pos];
                        let p = sv.head.token_marginal(vocab_id, routes.copy_positions(surface));
                        (
                            p.max(1e-300).ln(),
                            OracleAction::Token(surface.clone()),
                            PrevAction::Token(model.token_row(vocab_id)),
                        )
                    }
                };
                candidates.push(Candidate {
                    score: hyp.score + log_p,
                    parent: parent_idx,
                    action_rank,
                    action,
                    op,
                    h: sv.h.clone(),
                    c: sv.c.clone(),
                    emb_row,
                });
            }
        }

        // Rank: score descending, then parent index, then the deterministic
        // action order (rules by id; close, vocab ids, copy positions).
        candidates.sort_by(|a, b| {
            b.score
                .partial_cmp(&a.score)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.parent.cmp(&b.parent))
                .then(a.action_rank.cmp(&b.action_rank))
        });

        let mut next_live: Vec<Hypothesis> = Vec::new();
        for cand in candidates {
            if next_live.len() >= opts.beam {
                break;
            }
            let parent = &live[cand.parent];
            let state = parent.state.apply(&cand.op, grammar)?;
            let emb = model.action_embedding_values(cand.emb_row);
            let mut steps = parent.steps.clone();
            steps.push(Rc::new(StepRec { h: cand.h, emb: emb.clone() }));
            let mut actions = parent.actions.clone();
            actions.push(cand.action);
            let hyp = Hypothesis {
                state,
                score: cand.score,
                steps,
                last_c: cand.c,
                chain_emb: emb,
                actions,
            };
            if hyp.state.is_complete() {
                finished.push(hyp);
            } else {
                next_live.push(hyp);
            }
        }
        live = next_live;
    }

    let rank_score = |h: &Hypothesis| {
        if opts.length_norm {
            h.score / (h.actions.len().max(1) as f64)
        } else {
            h.score
        }
    };
    finished.sort_by(|a, b| {
        rank_score(b).partial_cmp(&rank_score(a)).unwrap_or(std::cmp::Ordering::Equal)
    });

    let decode = |h: &Hypothesis, complete: bool| DecodedHyp {
        ast: h.state.to_ast(grammar),
        score: h.score,
        actions: h.actions.clone(),
        tree_ops: h.state.history().to_vec(),
        complete,
    };

    if finished.is_empty() {
        let best = live
            .iter()
            .max_by(|a, b| rank_score(a).partial_cmp(&rank_score(b)).unwrap_or(std::cmp::Ordering::Equal))
            .expect("either finished or live hypotheses exist");
        return Ok(DecodeOutcome::Incomplete { best_partial: decode(best, false) });
    }
    Ok(DecodeOutcome::Complete(finished.iter().map(|h| decode(h, true)).collect()))
}

/// Exactly `beam_search` with K = 1.
pub fn greedy_decode(
    input: &DecodeInput,
    model: &Model,
    grammar: &Grammar,
    terminal_words: &[String],
    opts: DecodeOpts,
) -> Result<DecodeOutcome, DecodeError> {
    beam_search(input, model, grammar, terminal_words, DecodeOpts { beam: 1, ..opts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::load_grammar;
    use crate::model::ModelDims;
    use crate::transition::bind_oracle;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny_dims() -> ModelDims {
        ModelDims {
            embed: 6,
            node_type_embed: 5,
            rnn: 8,
            scorer_hidden: 7,
            masked_applyrule: false,
            dropout: 0.0,
        }
    }

    fn decode_input<'a>(
        tokens: &'a [String],
        ids: &'a [usize],
        oov: &'a [bool],
    ) -> DecodeInput<'a> {
        DecodeInput { src_tokens: tokens, src_ids: ids, src_oov: oov }
    }

    #[test]
    fn single_derivation_grammar_returns_its_only_tree() {
        let g = load_grammar("type root\ntype a op\nrule root -> x:a\n").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let model = Model::new(tiny_dims(), 4, 2, 1, 2, &mut rng).unwrap();
        let tokens: Vec<String> = vec!["go".into()];
        let ids = vec![1usize];
        let oov = vec![false];
        let words: Vec<String> = vec!["</n>".into(), "<unk>".into()];
        for beam in [1, 5] {
            let out = beam_search(
                &decode_input(&tokens, &ids, &oov),
                &model,
                &g,
                &words,
                DecodeOpts { beam, ..DecodeOpts::default() },
            )
            .unwrap();
            let best = out.complete().expect("single derivation always completes");
            assert!(best.ast.is_complete());
            assert_eq!(best.ast.children()[0].ty_name(), "a");
            assert!(best.score.abs() < 1e-12, "the only action has probability 1");
        }
    }

    #[test]
    fn greedy_equals_beam_one_action_for_action() {
        let g = crate::minilang::Language::MiniPy.grammar();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let words: Vec<String> =
            ["</n>", "<unk>", "x", "y", "f"].iter().map(|s| s.to_string()).collect();
        let model = Model::new(tiny_dims(), 8, words.len(), g.productions.len(), g.node_types.len(), &mut rng)
            .unwrap();
        for seed in 0..10u64 {
            let mut r2 = ChaCha8Rng::seed_from_u64(seed);
            use rand::Rng;
            let n = r2.gen_range(1..5);
            let tokens: Vec<String> = (0..n).map(|i| format!("w{i}")).collect();
            let ids: Vec<usize> = (0..n).map(|i| (i % 7) + 1).collect();
            let oov = vec![false; n];
            let a = greedy_decode(
                &decode_input(&tokens, &ids, &oov),
                &model,
                &g,
                &words,
                DecodeOpts::default(),
            )
            .unwrap();
            let b = beam_search(
                &decode_input(&tokens, &ids, &oov),
                &model,
                &g,
                &words,
                DecodeOpts { beam: 1, ..DecodeOpts::default() },
            )
            .unwrap();
            assert_eq!(a.best().actions, b.best().actions);
            assert!((a.best().score - b.best().score).abs() < 1e-12);
        }
    }

    #[test]
    fn returned_score_matches_sequence_log_prob() {
        // Two variable terminals exercise token and close scoring, including
        // the summed vocabulary-plus-copy routes for the shared token "x".
        let g = load_grammar("type root\ntype str variable\nrule root -> a:str b:str\n").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let words: Vec<String> =
            ["</n>", "<unk>", "x", "f"].iter().map(|s| s.to_string()).collect();
        let model = Model::new(tiny_dims(), 8, words.len(), g.productions.len(), g.node_types.len(), &mut rng)
            .unwrap();
        let tokens: Vec<String> = vec!["set".into(), "x".into()];
        let ids = vec![1usize, 2];
        let oov = vec![false, false];
        let out = beam_search(
            &decode_input(&tokens, &ids, &oov),
            &model,
            &g,
            &words,
            DecodeOpts { beam: 5, ..DecodeOpts::default() },
        )
        .unwrap();
        for hyp in match &out {
            DecodeOutcome::Complete(ranked) => ranked.iter().take(3),
            _ => panic!("expected completions"),
        } {
            let steps = bind_oracle(
                &hyp.tree_ops,
                &g,
                |t| words.iter().position(|w| w == t),
                &tokens,
            )
            .unwrap();
            let lp = model.sequence_log_prob(&ids, &oov, &steps).unwrap();
            assert!(
                (lp - hyp.score).abs() < 1e-9,
                "recomputed {lp} vs beam score {}",
                hyp.score
            );
        }
    }

    #[test]
    fn incomplete_decode_carries_best_partial() {
        let g = crate::minilang::Language::MiniPy.grammar();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let words: Vec<String> = vec!["</n>".into(), "<unk>".into()];
        let model = Model::new(tiny_dims(), 4, words.len(), g.productions.len(), g.node_types.len(), &mut rng)
            .unwrap();
        let tokens: Vec<String> = vec!["q".into()];
        let ids = vec![1usize];
        let oov = vec![false];
        let out = beam_search(
            &decode_input(&tokens, &ids, &oov),
            &model,
            &g,
            &words,
            DecodeOpts { beam: 2, max_steps: 2, ..DecodeOpts::default() },
        )
        .unwrap();
        match out {
            DecodeOutcome::Incomplete { best_partial } => {
                assert!(!best_partial.complete);
                assert!(!best_partial.ast.is_complete());
                assert_eq!(best_partial.actions.len(), 2);
            }
            DecodeOutcome::Complete(_) => panic!("two steps cannot complete a MiniPy tree"),
        }
    }

    #[test]
    fn default_beam_is_fifteen() {
        assert_eq!(DecodeOpts::default().beam, 15);
        assert_eq!(DecodeOpts::default().max_steps, 300);
    }
}
