//! The derivation automaton: legal-action enumeration, action application,
//! oracle extraction and parent-step bookkeeping.
//!
//! A derivation grows a partial AST one action at a time. The frontier node
//! is always the first unexpanded nonterminal or unclosed variable terminal
//! in depth-first, left-to-right order; the action taken at step `t` expands
//! or populates it. `parent_step(t)` is the step at which that frontier node
//! was created, which the decoder uses for parent feeding.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ast::AstNode;
use crate::grammar::{Grammar, NodeKind, NodeTypeId, ProdId};

/// Vocabulary- and input-relative action, the unit of search.
///
/// `GenClose` is the reserved row 0 of the terminal vocabulary; a `GenVocab`
/// action therefore never carries id 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    ApplyRule(ProdId),
    GenVocab(usize),
    GenCopy(usize),
    GenClose,
}

/// Vocabulary-independent action: what an action does to the tree.
///
/// Oracle sequences are expressed in this form so that round trips do not
/// depend on vocabulary thresholds; binding against a vocabulary and an input
/// sentence turns them into [`Action`]s or training targets.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OracleAction {
    Rule(ProdId),
    Token(String),
    Close,
}

#[derive(Debug, Error)]
pub enum TransitionError {
    #[error("illegal action: {0}")]
    Illegal(String),
    #[error("no legal actions: derivation is complete")]
    Complete,
    #[error("AST not derivable: {0}")]
    NotDerivable(String),
    #[error("replay ended with an incomplete derivation")]
    IncompleteReplay,
}

#[derive(Clone, Debug)]
enum DerivNode {
    Open { ty: NodeTypeId, label: Option<String>, created_at: usize },
    Expanded {
        ty: NodeTypeId,
        label: Option<String>,
        rule: ProdId,
        children: Vec<DerivNode>,
    },
    Term {
        ty: NodeTypeId,
        label: Option<String>,
        tokens: Vec<String>,
        closed: bool,
        created_at: usize,
    },
    Leaf { ty: NodeTypeId, label: Option<String> },
}

/// Snapshot of the current frontier node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frontier {
    pub ty: NodeTypeId,
    pub kind: NodeKind,
    /// Step at which the frontier node was created; the parent step of the
    /// action about to be taken.
    pub created_at: usize,
    /// Tokens already emitted into the node (variable terminals only).
    pub token_count: usize,
}

/// A partial derivation: the growing tree plus the bookkeeping the decoder
/// needs. States are cloned when beam search branches.
#[derive(Clone, Debug)]
pub struct DerivationState {
    root: DerivNode,
    t: usize,
    /// `parent_steps[i]` is the parent step of action `i + 1`.
    parent_steps: Vec<usize>,
    history: Vec<OracleAction>,
    frontier: Option<Frontier>,
}

impl DerivNode {
    fn find_frontier(&self) -> Option<Frontier> {
        match self {
            DerivNode::Open { ty, created_at, .. } => Some(Frontier {
                ty: *ty,
                kind: NodeKind::Nonterminal,
                created_at: *created_at,
                token_count: 0,
            }),
            DerivNode::Term { ty, tokens, closed, created_at, .. } if !closed => Some(Frontier {
                ty: *ty,
                kind: NodeKind::VariableTerminal,
                created_at: *created_at,
                token_count: tokens.len(),
            }),
            DerivNode::Term { .. } | DerivNode::Leaf { .. } => None,
            DerivNode::Expanded { children, .. } => {
                children.iter().find_map(DerivNode::find_frontier)
            }
        }
    }

    /// Applies `op` to the frontier node below `self`. Returns true if the
    /// frontier was inside this subtree.
    fn apply_at_frontier(
        &mut self,
        op: &OracleAction,
        grammar: &Grammar,
        step: usize,
    ) -> Result<bool, TransitionError> {
        match self {
            DerivNode::Open { ty, label, created_at: _ } => {
                let pid = match op {
                    OracleAction::Rule(pid) => *pid,
                    OracleAction::Token(_) | OracleAction::Close => {
                        return Err(TransitionError::Illegal(
                            "GenToken on a nonterminal frontier".into(),
                        ))
                    }
                };
                let prod = grammar
                    .productions
                    .get(pid.0 as usize)
                    .ok_or_else(|| TransitionError::Illegal(format!("unknown rule {}", pid.0)))?;
                if prod.head != *ty {
                    return Err(TransitionError::Illegal(format!(
                        "rule {} does not expand frontier type {}",
                        grammar.production_display(pid),
                        grammar.node_type(*ty).name
                    )));
                }
                let ty = *ty;
                let label = label.take();
                *self = expand(ty, label, pid, grammar, step);
                Ok(true)
            }
            DerivNode::Term { tokens, closed, .. } if !*closed => {
                match op {
                    OracleAction::Token(tok) => tokens.push(tok.clone()),
                    OracleAction::Close => {
                        if tokens.is_empty() {
                            return Err(TransitionError::Illegal(
                                "close on an empty terminal".into(),
                            ));
                        }
                        *closed = true;
                    }
                    OracleAction::Rule(_) => {
                        return Err(TransitionError::Illegal("ApplyRule on a terminal".into()))
                    }
                }
                Ok(true)
            }
            DerivNode::Term { .. } | DerivNode::Leaf { .. } => Ok(false),
            DerivNode::Expanded { children, .. } => {
                for child in children {
                    if child.apply_at_frontier(op, grammar, step)? {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
        }
    }

    fn to_ast(&self, grammar: &Grammar) -> AstNode {
        match self {
            DerivNode::Open { ty, label, .. } => AstNode::NonTerminal {
                ty_name: grammar.node_type(*ty).name.clone(),
                label: label.clone(),
                rule: None,
                children: Vec::new(),
            },
            DerivNode::Expanded { ty, label, rule, children, .. } => AstNode::NonTerminal {
                ty_name: grammar.node_type(*ty).name.clone(),
                label: label.clone(),
                rule: Some(*rule),
                children: children.iter().map(|c| c.to_ast(grammar)).collect(),
            },
            DerivNode::Term { ty, label, tokens, closed, .. } => AstNode::Terminal {
                ty_name: grammar.node_type(*ty).name.clone(),
                label: label.clone(),
                tokens: tokens.clone(),
                closed: *closed,
            },
            DerivNode::Leaf { ty, label } => AstNode::Leaf {
                ty_name: grammar.node_type(*ty).name.clone(),
                label: label.clone(),
            },
        }
    }
}

fn fresh_child(ty: NodeTypeId, label: String, grammar: &Grammar, step: usize) -> DerivNode {
    match grammar.node_type(ty).kind {
        NodeKind::Nonterminal => DerivNode::Open { ty, label: Some(label), created_at: step },
        NodeKind::VariableTerminal => DerivNode::Term {
            ty,
            label: Some(label),
            tokens: Vec::new(),
            closed: false,
            created_at: step,
        },
        NodeKind::OperationTerminal => DerivNode::Leaf { ty, label: Some(label) },
    }
}

/// Expands a node by `pid`. Closure rules unfold their full constituent
/// chain, so the tree is identical to what sequential application of the
/// chain would have produced.
fn expand(
    ty: NodeTypeId,
    label: Option<String>,
    pid: ProdId,
    grammar: &Grammar,
    step: usize,
) -> DerivNode {
    let prod = grammar.production(pid);
    if let Some(chain) = &prod.closure_chain {
        let mut node: Option<DerivNode> = None;
        for &cid in chain.iter().rev() {
            let cprod = grammar.production(cid);
            let field = &cprod.fields[0];
            let child = match node.take() {
                Some(mut inner) => {
                    if let DerivNode::Open { label, .. } | DerivNode::Expanded { label, .. } = &mut inner {
                        *label = Some(field.label.clone());
                    }
                    inner
                }
                None => fresh_child(field.ty, field.label.clone(), grammar, step),
            };
            node = Some(DerivNode::Expanded {
                ty: cprod.head,
                label: None,
                rule: cid,
                children: vec![child],
            });
        }
        let mut top = node.expect("closure chain is non-empty");
        if let DerivNode::Expanded { ty: top_ty, label: top_label, .. } = &mut top {
            debug_assert_eq!(*top_ty, ty);
            *top_label = label;
        }
        top
    } else {
        let children = prod
            .fields
            .iter()
            .map(|f| fresh_child(f.ty, f.label.clone(), grammar, step))
            .collect();
        DerivNode::Expanded { ty, label, rule: pid, children }
    }
}

/// Knobs the automaton needs to enumerate token actions.
#[derive(Clone, Copy, Debug)]
pub struct LegalOpts {
    /// Total terminal-vocabulary rows, including the reserved close row 0.
    pub vocab_len: usize,
    /// Number of input positions available to copy from.
    pub input_len: usize,
    /// Hard cap on tokens per terminal node; once reached only close is
    /// legal, which bounds every derivation of bounded node count.
    pub max_terminal_tokens: usize,
}

pub const DEFAULT_MAX_TERMINAL_TOKENS: usize = 32;

impl DerivationState {
    pub fn initial(grammar: &Grammar) -> Self {
        let root = DerivNode::Open { ty: grammar.root_type, label: None, created_at: 0 };
        let frontier = root.find_frontier();
        DerivationState { root, t: 0, parent_steps: Vec::new(), history: Vec::new(), frontier }
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn is_complete(&self) -> bool {
        self.frontier.is_none()
    }

    pub fn frontier(&self) -> Option<&Frontier> {
        self.frontier.as_ref()
    }

    pub fn history(&self) -> &[OracleAction] {
        &self.history
    }

    /// Parent step of action `t` (1-based); 0 refers to the root.
    pub fn parent_step(&self, t: usize) -> Option<usize> {
        if t == 0 || t > self.parent_steps.len() {
            None
        } else {
            Some(self.parent_steps[t - 1])
        }
    }

    /// Parent step the *next* action will use.
    pub fn next_parent_step(&self) -> Option<usize> {
        self.frontier.as_ref().map(|f| f.created_at)
    }

    pub fn to_ast(&self, grammar: &Grammar) -> AstNode {
        self.root.to_ast(grammar)
    }

    /// All actions legal in this state, in the deterministic tie-break order
    /// (rules by id; close, then vocabulary ids, then copy positions).
    pub fn legal_actions(&self, grammar: &Grammar, opts: LegalOpts) -> Result<Vec<Action>, TransitionError> {
        let frontier = self.frontier.as_ref().ok_or(TransitionError::Complete)?;
        match frontier.kind {
            NodeKind::Nonterminal => Ok(grammar
                .productions_for(frontier.ty)
                .iter()
                .map(|&pid| Action::ApplyRule(pid))
                .collect()),
            NodeKind::VariableTerminal => {
                let mut actions = Vec::new();
                if frontier.token_count > 0 {
                    actions.push(Action::GenClose);
                }
                if frontier.token_count < opts.max_terminal_tokens {
                    // Row 0 is the close token; it is reachable only through
                    // the explicit GenClose action.
                    actions.extend((1..opts.vocab_len).map(Action::GenVocab));
                    actions.extend((0..opts.input_len).map(Action::GenCopy));
                }
                Ok(actions)
            }
            NodeKind::OperationTerminal => unreachable!("operation terminals are never frontier"),
        }
    }

    /// Applies a vocabulary-independent action, returning the successor
    /// state. The receiver is unchanged.
    pub fn apply(&self, op: &OracleAction, grammar: &Grammar) -> Result<DerivationState, TransitionError> {
        let mut next = self.clone();
        next.apply_in_place(op, grammar)?;
        Ok(next)
    }

    pub fn apply_in_place(&mut self, op: &OracleAction, grammar: &Grammar) -> Result<(), TransitionError> {
        let frontier = self.frontier.as_ref().ok_or(TransitionError::Complete)?;
        let parent = frontier.created_at;
        let step = self.t + 1;
        if !self.root.apply_at_frontier(op, grammar, step)? {
            return Err(TransitionError::Complete);
        }
        self.t = step;
        self.parent_steps.push(parent);
        self.history.push(op.clone());
        self.frontier = self.root.find_frontier();
        Ok(())
    }

    /// Resolves a search-level action against the vocabulary and the input
    /// sentence, then applies it.
    pub fn apply_action(
        &self,
        action: Action,
        grammar: &Grammar,
        terminal_words: &[String],
        input_tokens: &[String],
    ) -> Result<DerivationState, TransitionError> {
        let op = match action {
            Action::ApplyRule(pid) => OracleAction::Rule(pid),
            Action::GenVocab(id) => OracleAction::Token(
                terminal_words
                    .get(id)
                    .ok_or_else(|| TransitionError::Illegal(format!("vocab id {id} out of range")))?
                    .clone(),
            ),
            Action::GenCopy(pos) => OracleAction::Token(
                input_tokens
                    .get(pos)
                    .ok_or_else(|| TransitionError::Illegal(format!("copy position {pos} out of range")))?
                    .clone(),
            ),
            Action::GenClose => OracleAction::Close,
        };
        self.apply(&op, grammar)
    }
}

/// Extracts the oracle action sequence deriving `tree` under `grammar` by
/// pre-order traversal. When the grammar contains closure rules, the longest
/// applicable closure is preferred, realizing the action-count reduction
/// deterministically.
pub fn oracle_actions(tree: &AstNode, grammar: &Grammar) -> Result<Vec<OracleAction>, TransitionError> {
    let mut out = Vec::new();
    walk_oracle(tree, grammar, &mut out)?;
    Ok(out)
}

fn node_production(tree: &AstNode, grammar: &Grammar) -> Result<ProdId, TransitionError> {
    let head = grammar
        .type_id(tree.ty_name())
        .ok_or_else(|| TransitionError::NotDerivable(format!("unknown type {}", tree.ty_name())))?;
    let mut fields = Vec::new();
    for child in tree.children() {
        let ty = grammar.type_id(child.ty_name()).ok_or_else(|| {
            TransitionError::NotDerivable(format!("unknown type {}", child.ty_name()))
        })?;
        fields.push((child.label().unwrap_or_default().to_string(), ty));
    }
    grammar.find_production(head, &fields).ok_or_else(|| {
        TransitionError::NotDerivable(format!("no production for node {}", tree.ty_name()))
    })
}

/// Length of the closure chain matched at `tree`, if `chain` replays the
/// gold derivation node-for-node from here.
fn closure_matches(tree: &AstNode, chain: &[ProdId], grammar: &Grammar) -> bool {
    let mut node = tree;
    for &cid in chain {
        match node_production(node, grammar) {
            Ok(pid) if pid == cid => {
                node = &node.children()[0];
            }
            _ => return false,
        }
    }
    true
}

fn walk_oracle(tree: &AstNode, grammar: &Grammar, out: &mut Vec<OracleAction>) -> Result<(), TransitionError> {
    match tree {
        AstNode::NonTerminal { ty_name, children, .. } => {
            let head = grammar.type_id(ty_name).ok_or_else(|| {
                TransitionError::NotDerivable(format!("unknown type {ty_name}"))
            })?;
            // Greedy longest closure match, ties broken by lower id.
            let mut best: Option<(usize, ProdId, usize)> = None;
            for &pid in grammar.productions_for(head) {
                let prod = grammar.production(pid);
                if let Some(chain) = &prod.closure_chain {
                    if closure_matches(tree, chain, grammar) {
                        let better = match best {
                            None => true,
                            Some((len, best_pid, _)) => {
                                chain.len() > len || (chain.len() == len && pid < best_pid)
                            }
                        };
                        if better {
                            best = Some((chain.len(), pid, chain.len()));
                        }
                    }
                }
            }
            if let Some((_, pid, depth)) = best {
                out.push(OracleAction::Rule(pid));
                let mut node = tree;
                for _ in 0..depth {
                    node = &node.children()[0];
                }
                return walk_oracle(node, grammar, out);
            }
            let pid = node_production(tree, grammar)?;
            out.push(OracleAction::Rule(pid));
            for child in children {
                walk_oracle(child, grammar, out)?;
            }
            Ok(())
        }
        AstNode::Terminal { ty_name, tokens, .. } => {
            if tokens.is_empty() {
                return Err(TransitionError::NotDerivable(format!(
                    "terminal {ty_name} has no tokens"
                )));
            }
            for tok in tokens {
                out.push(OracleAction::Token(tok.clone()));
            }
            out.push(OracleAction::Close);
            Ok(())
        }
        // Appended (and completed) by the parent's ApplyRule action.
        AstNode::Leaf { .. } => Ok(()),
    }
}

/// Replays an action sequence from the initial state; the result must be a
/// complete derivation.
pub fn replay(seq: &[OracleAction], grammar: &Grammar) -> Result<AstNode, TransitionError> {
    let mut state = DerivationState::initial(grammar);
    for op in seq {
        state.apply_in_place(op, grammar)?;
    }
    if !state.is_complete() {
        return Err(TransitionError::IncompleteReplay);
    }
    Ok(state.to_ast(grammar))
}

/// Splits a terminal value on whitespace and lowercase-to-uppercase
/// boundaries (`ClassName` becomes `Class`, `Name`).
pub fn tokenize_terminal(value: &str) -> Vec<String> {
    let mut out = Vec::new();
    for word in value.split_whitespace() {
        let chars: Vec<char> = word.chars().collect();
        let mut start = 0;
        for i in 1..chars.len() {
            if chars[i - 1].is_lowercase() && chars[i].is_uppercase() {
                out.push(chars[start..i].iter().collect::<String>());
                start = i;
            }
        }
        if start < chars.len() {
            out.push(chars[start..].iter().collect::<String>());
        }
    }
    out
}

/// One oracle step bound against a vocabulary and an input sentence: all the
/// routes that produce the gold token. Training sums the routes, mirroring
/// the marginal generate-or-copy probability.
#[derive(Clone, Debug, PartialEq)]
pub enum BoundTarget {
    Rule(ProdId),
    Token {
        surface: String,
        /// Terminal-vocabulary row, when the token is in vocabulary.
        vocab_id: Option<usize>,
        /// Every input position holding the same surface token.
        copy_positions: Vec<usize>,
    },
    Close,
}

#[derive(Clone, Debug)]
pub struct BoundStep {
    pub t: usize,
    pub parent: usize,
    pub frontier_ty: NodeTypeId,
    pub target: BoundTarget,
}

/// Binds an oracle sequence to concrete routes, replaying it to recover the
/// frontier type and parent step of every action.
pub fn bind_oracle(
    seq: &[OracleAction],
    grammar: &Grammar,
    lookup_terminal: impl Fn(&str) -> Option<usize>,
    input_tokens: &[String],
) -> Result<Vec<BoundStep>, TransitionError> {
    let mut state = DerivationState::initial(grammar);
    let mut out = Vec::with_capacity(seq.len());
    for (idx, op) in seq.iter().enumerate() {
        let frontier = state.frontier().ok_or(TransitionError::Complete)?;
        let target = match op {
            OracleAction::Rule(pid) => BoundTarget::Rule(*pid),
            OracleAction::Close => BoundTarget::Close,
            OracleAction::Token(tok) => BoundTarget::Token {
                surface: tok.clone(),
                vocab_id: lookup_terminal(tok),
                copy_positions: input_tokens
                    .iter()
                    .enumerate()
                    .filter(|(_, w)| *w == tok)
                    .map(|(i, _)| i)
                    .collect(),
            },
        };
        out.push(BoundStep {
            t: idx + 1,
            parent: frontier.created_at,
            frontier_ty: frontier.ty,
            target,
        });
        state.apply_in_place(op, grammar)?;
    }
    Ok(out)
}

/// JSON-lines record for one bound action step.
#[derive(Debug, Serialize, Deserialize)]
pub struct ActionRecord {
    pub t: usize,
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub arg: Option<serde_json::Value>,
    pub parent: usize,
}

pub fn action_records(steps: &[BoundStep]) -> Vec<ActionRecord> {
    steps
        .iter()
        .map(|s| {
            let (kind, arg) = match &s.target {
                BoundTarget::Rule(pid) => ("rule", Some(serde_json::json!(pid.0))),
                BoundTarget::Close => ("close", None),
                BoundTarget::Token { vocab_id, copy_positions, surface } => match vocab_id {
                    Some(id) => ("vocab", Some(serde_json::json!(id))),
                    None => match copy_positions.first() {
                        Some(pos) => ("copy", Some(serde_json::json!(pos))),
                        None => ("vocab", Some(serde_json::json!({ "oov": surface }))),
                    },
                },
            };
            ActionRecord { t: s.t, kind: kind.to_string(), arg, parent: s.parent }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::resolve_rules;
    use crate::grammar::load_grammar;

    fn call_grammar() -> Grammar {
        load_grammar(concat!(
            "type root\ntype expr\ntype expr*\ntype kw*\ntype Call\ntype Name\ntype str variable\n",
            "rule root -> value:expr\n",
            "rule expr -> e:Call\n",
            "rule expr -> e:Name\n",
            "rule Call -> func:expr args:expr* keywords:kw*\n",
            "rule Name -> id:str\n",
            "rule expr* -> e0:expr\n",
            "rule kw* ->\n",
        ))
        .unwrap()
    }

    fn opts(vocab_len: usize, input_len: usize) -> LegalOpts {
        LegalOpts { vocab_len, input_len, max_terminal_tokens: DEFAULT_MAX_TERMINAL_TOKENS }
    }

    #[test]
    fn initial_state_fronts_the_root() {
        let g = call_grammar();
        let state = DerivationState::initial(&g);
        assert_eq!(state.frontier().unwrap().ty, g.root_type);
        assert!(!state.is_complete());
        assert_eq!(state.t(), 0);
        assert!(state.history().is_empty());
    }

    #[test]
    fn legal_actions_at_nonterminal_are_head_productions() {
        let g = call_grammar();
        let state = DerivationState::initial(&g);
        let actions = state.legal_actions(&g, opts(4, 3)).unwrap();
        assert_eq!(actions, vec![Action::ApplyRule(ProdId(0))]);

        let state = state.apply(&OracleAction::Rule(ProdId(0)), &g).unwrap();
        let actions = state.legal_actions(&g, opts(4, 3)).unwrap();
        // Frontier is `expr`: exactly the two expr-headed rules.
        assert_eq!(actions, vec![Action::ApplyRule(ProdId(1)), Action::ApplyRule(ProdId(2))]);
    }

    #[test]
    fn fresh_terminal_offers_vocab_plus_copies_without_close() {
        let g = call_grammar();
        let state = DerivationState::initial(&g)
            .apply(&OracleAction::Rule(ProdId(0)), &g)
            .unwrap()
            .apply(&OracleAction::Rule(ProdId(2)), &g)
            .unwrap()
            .apply(&OracleAction::Rule(ProdId(4)), &g)
            .unwrap();
        // Terminal vocabulary with 5 generatable words (6 rows incl. close),
        // 3 input positions: 5 + 3 actions, no close on the empty node.
        let actions = state.legal_actions(&g, opts(6, 3)).unwrap();
        assert_eq!(actions.len(), 8);
        assert!(!actions.contains(&Action::GenClose));

        let after = state.apply(&OracleAction::Token("x".into()), &g).unwrap();
        let actions = after.legal_actions(&g, opts(6, 3)).unwrap();
        assert_eq!(actions.len(), 9);
        assert_eq!(actions[0], Action::GenClose);
    }

    #[test]
    fn token_cap_leaves_only_close() {
        let g = call_grammar();
        let mut state = DerivationState::initial(&g)
            .apply(&OracleAction::Rule(ProdId(0)), &g)
            .unwrap()
            .apply(&OracleAction::Rule(ProdId(2)), &g)
            .unwrap()
            .apply(&OracleAction::Rule(ProdId(4)), &g)
            .unwrap();
        let o = LegalOpts { vocab_len: 4, input_len: 2, max_terminal_tokens: 2 };
        state.apply_in_place(&OracleAction::Token("a".into()), &g).unwrap();
        state.apply_in_place(&OracleAction::Token("b".into()), &g).unwrap();
        assert_eq!(state.legal_actions(&g, o).unwrap(), vec![Action::GenClose]);
    }

    #[test]
    fn apply_rule_appends_all_children() {
        let g = call_grammar();
        let state = DerivationState::initial(&g)
            .apply(&OracleAction::Rule(ProdId(0)), &g)
            .unwrap()
            .apply(&OracleAction::Rule(ProdId(1)), &g)
            .unwrap()
            .apply(&OracleAction::Rule(ProdId(3)), &g)
            .unwrap();
        let ast = state.to_ast(&g);
        // root -> expr -> Call with three fresh children.
        let call = &ast.children()[0].children()[0];
        assert_eq!(call.ty_name(), "Call");
        assert_eq!(call.children().len(), 3);
        assert_eq!(call.children()[0].label(), Some("func"));
    }

    #[test]
    fn parent_steps_track_node_creation() {
        let g = call_grammar();
        let mut state = DerivationState::initial(&g);
        // t1 expands root (created at 0), t2 expands expr (created at 1),
        // t3 expands Call (created at 2), t4 expands func expr (created at 3).
        for pid in [0u32, 1, 3, 2] {
            assert_eq!(state.next_parent_step().unwrap(), state.t());
            state.apply_in_place(&OracleAction::Rule(ProdId(pid)), &g).unwrap();
        }
        assert_eq!(state.parent_step(1), Some(0));
        assert_eq!(state.parent_step(4), Some(3));
        // Tokens populate the node created at t4: both token steps and the
        // close step share parent 4.
        state.apply_in_place(&OracleAction::Rule(ProdId(4)), &g).unwrap(); // Name -> str at t5
        state.apply_in_place(&OracleAction::Token("sorted".into()), &g).unwrap();
        state.apply_in_place(&OracleAction::Token("fn".into()), &g).unwrap();
        assert_eq!(state.parent_step(6), Some(5));
        assert_eq!(state.parent_step(7), Some(5));
    }

    #[test]
    fn genclose_completes_terminal_and_moves_frontier() {
        let g = load_grammar(concat!(
            "type root\ntype str variable\n",
            "rule root -> a:str b:str\n",
        ))
        .unwrap();
        let mut state = DerivationState::initial(&g);
        state.apply_in_place(&OracleAction::Rule(ProdId(0)), &g).unwrap();
        state.apply_in_place(&OracleAction::Token("my_list".into()), &g).unwrap();
        let before = state.frontier().unwrap().created_at;
        state.apply_in_place(&OracleAction::Close, &g).unwrap();
        let after = state.frontier().unwrap();
        assert_eq!(after.token_count, 0);
        assert_eq!(after.created_at, before, "both terminals were created by the same rule");
        assert!(!state.is_complete());
    }

    #[test]
    fn illegal_actions_are_rejected() {
        let g = call_grammar();
        let state = DerivationState::initial(&g);
        // Token on a nonterminal frontier.
        assert!(state.apply(&OracleAction::Token("x".into()), &g).is_err());
        // Head mismatch: Name -> str cannot expand root.
        assert!(state.apply(&OracleAction::Rule(ProdId(4)), &g).is_err());
        // Close on an empty terminal.
        let term = state
            .apply(&OracleAction::Rule(ProdId(0)), &g)
            .unwrap()
            .apply(&OracleAction::Rule(ProdId(2)), &g)
            .unwrap()
            .apply(&OracleAction::Rule(ProdId(4)), &g)
            .unwrap();
        assert!(term.apply(&OracleAction::Close, &g).is_err());
        // ApplyRule on a terminal frontier.
        assert!(term.apply(&OracleAction::Rule(ProdId(4)), &g).is_err());
    }

    fn sorted_call_tree() -> AstNode {
        AstNode::nonterminal("root", None).with_child(
            AstNode::nonterminal("expr", Some("value")).with_child(
                AstNode::nonterminal("Call", Some("e"))
                    .with_child(
                        AstNode::nonterminal("expr", Some("func")).with_child(
                            AstNode::nonterminal("Name", Some("e"))
                                .with_child(AstNode::terminal("str", Some("id"), vec!["sorted".into()])),
                        ),
                    )
                    .with_child(
                        AstNode::nonterminal("expr*", Some("args")).with_child(
                            AstNode::nonterminal("expr", Some("e0")).with_child(
                                AstNode::nonterminal("Name", Some("e")).with_child(
                                    AstNode::terminal("str", Some("id"), vec!["my_list".into()]),
                                ),
                            ),
                        ),
                    )
                    .with_child(AstNode::nonterminal("kw*", Some("keywords"))),
            ),
        )
    }

    #[test]
    fn oracle_emits_rules_then_tokens_then_close() {
        let g = call_grammar();
        let seq = oracle_actions(&sorted_call_tree(), &g).unwrap();
        // Structure first, then the func terminal is populated and closed.
        assert_eq!(
            &seq[..7],
            &[
                OracleAction::Rule(ProdId(0)),
                OracleAction::Rule(ProdId(1)),
                OracleAction::Rule(ProdId(3)),
                OracleAction::Rule(ProdId(2)),
                OracleAction::Rule(ProdId(4)),
                OracleAction::Token("sorted".into()),
                OracleAction::Close,
            ]
        );
    }

    #[test]
    fn one_rule_grammar_has_length_one_oracle() {
        let g = load_grammar("type root\nrule root ->\n").unwrap();
        let tree = AstNode::nonterminal("root", None);
        let seq = oracle_actions(&tree, &g).unwrap();
        assert_eq!(seq.len(), 1);
        let replayed = replay(&seq, &g).unwrap();
        assert!(replayed.structural_eq(&resolve_rules(&tree, &g).unwrap()));
    }

    #[test]
    fn oracle_replay_round_trips() {
        let g = call_grammar();
        let tree = sorted_call_tree();
        let seq = oracle_actions(&tree, &g).unwrap();
        let rebuilt = replay(&seq, &g).unwrap();
        assert!(rebuilt.structural_eq(&resolve_rules(&tree, &g).unwrap()));
    }

    #[test]
    fn oracle_prefixes_stay_legal() {
        let g = call_grammar();
        let tree = sorted_call_tree();
        let seq = oracle_actions(&tree, &g).unwrap();
        let words = vec!["</n>".to_string(), "sorted".into(), "my_list".into()];
        let lookup = |tok: &str| words.iter().position(|w| w == tok);
        let mut state = DerivationState::initial(&g);
        for op in &seq {
            let legal = state.legal_actions(&g, opts(words.len(), 0)).unwrap();
            let action = match op {
                OracleAction::Rule(pid) => Action::ApplyRule(*pid),
                OracleAction::Token(tok) => Action::GenVocab(lookup(tok).unwrap()),
                OracleAction::Close => Action::GenClose,
            };
            assert!(legal.contains(&action), "oracle action {op:?} not legal");
            state.apply_in_place(op, &g).unwrap();
        }
        assert!(state.is_complete());
    }

    #[test]
    fn nondervable_tree_reports_missing_production() {
        let g = call_grammar();
        let tree = AstNode::nonterminal("root", None)
            .with_child(AstNode::terminal("str", Some("value"), vec!["x".into()]));
        assert!(matches!(
            oracle_actions(&tree, &g).unwrap_err(),
            TransitionError::NotDerivable(_)
        ));
    }

    #[test]
    fn tokenizer_splits_camel_and_space() {
        assert_eq!(tokenize_terminal("ClassName"), vec!["Class", "Name"]);
        assert_eq!(tokenize_terminal("x"), vec!["x"]);
        assert_eq!(tokenize_terminal("hello world"), vec!["hello", "world"]);
        assert_eq!(tokenize_terminal("my_list"), vec!["my_list"]);
        assert_eq!(tokenize_terminal("HTTPServer"), vec!["HTTPServer"]);
        assert!(tokenize_terminal("").is_empty());
    }

    #[test]
    fn bound_steps_carry_routes_and_parents() {
        let g = call_grammar();
        let tree = sorted_call_tree();
        let seq = oracle_actions(&tree, &g).unwrap();
        let input: Vec<String> = ["sort", "my_list", "sorted"].iter().map(|s| s.to_string()).collect();
        let vocab = vec!["</n>".to_string(), "<unk>".into(), "sorted".into()];
        let steps =
            bind_oracle(&seq, &g, |tok| vocab.iter().position(|w| w == tok), &input).unwrap();
        assert_eq!(steps.len(), seq.len());
        let tok_step = steps.iter().find(|s| matches!(&s.target, BoundTarget::Token { surface, .. } if surface == "sorted")).unwrap();
        match &tok_step.target {
            BoundTarget::Token { vocab_id, copy_positions, .. } => {
                assert_eq!(*vocab_id, Some(2));
                assert_eq!(copy_positions, &[2]);
            }
            _ => unreachable!(),
        }
        let copy_step = steps.iter().find(|s| matches!(&s.target, BoundTarget::Token { surface, .. } if surface == "my_list")).unwrap();
        match &copy_step.target {
            BoundTarget::Token { vocab_id, copy_positions, .. } => {
                assert_eq!(*vocab_id, None);
                assert_eq!(copy_positions, &[1]);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn closure_application_expands_full_chain() {
        let g = load_grammar(concat!(
            "type root\ntype a\ntype b\ntype str variable\n",
            "rule root -> x:a\n",
            "rule a -> y:b\n",
            "rule b -> v:str\n",
            "closure a -> v:str chain 1 2\n",
        ))
        .unwrap();
        let mut state = DerivationState::initial(&g);
        state.apply_in_place(&OracleAction::Rule(ProdId(0)), &g).unwrap();
        state.apply_in_place(&OracleAction::Rule(ProdId(3)), &g).unwrap();
        state.apply_in_place(&OracleAction::Token("v".into()), &g).unwrap();
        state.apply_in_place(&OracleAction::Close, &g).unwrap();
        assert!(state.is_complete());
        let ast = state.to_ast(&g);
        // The chain a -> b -> str is materialized with constituent rules.
        let a = &ast.children()[0];
        assert_eq!(a.ty_name(), "a");
        let b = &a.children()[0];
        assert_eq!(b.ty_name(), "b");
        assert!(matches!(b.children()[0], AstNode::Terminal { .. }));
    }

    #[test]
    fn random_legal_walks_make_monotone_progress() {
        use rand::{Rng, SeedableRng};
        let g = call_grammar();
        let words = vec!["</n>".to_string(), "<unk>".into(), "x".into()];
        let input = vec!["a".to_string()];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let mut state = DerivationState::initial(&g);
            for _ in 0..40 {
                if state.is_complete() {
                    break;
                }
                let o = LegalOpts { vocab_len: words.len(), input_len: input.len(), max_terminal_tokens: 4 };
                let legal = state.legal_actions(&g, o).unwrap();
                let action = legal[rng.gen_range(0..legal.len())];
                let next = state.apply_action(action, &g, &words, &input).unwrap();
                assert_eq!(next.t(), state.t() + 1);
                state = next;
            }
        }
    }
}
