//! The abstract grammar: node types, production rules, induction from a
//! parsed corpus, and unary-closure extraction.
//!
//! A grammar is the legal action space of the derivation automaton. Node
//! types come in three kinds: nonterminals (expanded by applying a
//! production), variable terminals (populated token-by-token), and operation
//! terminals (closed-set leaves that are complete the moment a production
//! appends them).

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::ast::AstNode;

/// Index of a node type inside its grammar.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeTypeId(pub u32);

/// Index of a production inside its grammar.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ProdId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    /// Expanded by an `ApplyRule` action; may head productions.
    Nonterminal,
    /// Populated by `GenToken` actions; never heads a production.
    VariableTerminal,
    /// Closed-set leaf, complete on creation; never heads a production.
    OperationTerminal,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeType {
    pub name: String,
    pub kind: NodeKind,
}

/// One labeled, typed child slot of a production.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Field {
    pub label: String,
    pub ty: NodeTypeId,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Production {
    pub id: ProdId,
    pub head: NodeTypeId,
    pub fields: Vec<Field>,
    pub is_closure: bool,
    /// For closure rules: the chain of unary productions this rule collapses,
    /// outermost first.
    pub closure_chain: Option<Vec<ProdId>>,
}

impl Production {
    pub fn is_unary(&self) -> bool {
        self.fields.len() == 1
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Grammar {
    pub node_types: Vec<NodeType>,
    pub productions: Vec<Production>,
    /// For each node type id, the ids of productions headed by it.
    pub productions_by_head: Vec<Vec<ProdId>>,
    pub root_type: NodeTypeId,
}

#[derive(Debug, Error)]
pub enum GrammarError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: duplicate node type `{name}`")]
    DuplicateType { line: usize, name: String },
    #[error("line {line}: unknown node type `{name}`")]
    UnknownType { line: usize, name: String },
    #[error("line {line}: variable terminal `{name}` used as rule head")]
    TerminalHead { line: usize, name: String },
    #[error("line {line}: duplicate field label `{label}`")]
    DuplicateLabel { line: usize, label: String },
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("inconsistent node usage: type `{name}` used as both terminal and nonterminal")]
    InconsistentKind { name: String },
    #[error("grammar has no productions")]
    NoProductions,
}

impl Grammar {
    pub fn node_type(&self, id: NodeTypeId) -> &NodeType {
        &self.node_types[id.0 as usize]
    }

    pub fn production(&self, id: ProdId) -> &Production {
        &self.productions[id.0 as usize]
    }

    pub fn type_id(&self, name: &str) -> Option<NodeTypeId> {
        self.node_types
            .iter()
            .position(|t| t.name == name)
            .map(|i| NodeTypeId(i as u32))
    }

    pub fn productions_for(&self, head: NodeTypeId) -> &[ProdId] {
        &self.productions_by_head[head.0 as usize]
    }

    /// Structural lookup: the non-closure production with this head and these
    /// (label, type) fields, if any.
    pub fn find_production(&self, head: NodeTypeId, fields: &[(String, NodeTypeId)]) -> Option<ProdId> {
        self.productions_for(head)
            .iter()
            .copied()
            .find(|&pid| {
                let p = self.production(pid);
                !p.is_closure
                    && p.fields.len() == fields.len()
                    && p.fields
                        .iter()
                        .zip(fields)
                        .all(|(f, (label, ty))| f.label == *label && f.ty == *ty)
            })
    }

    fn rebuild_head_index(&mut self) {
        self.productions_by_head = vec![Vec::new(); self.node_types.len()];
        for p in &self.productions {
            self.productions_by_head[p.head.0 as usize].push(p.id);
        }
    }

    /// Canonical text form: the same declarative format accepted by
    /// [`load_grammar`], with closure rules spelled via `closure` lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for t in &self.node_types {
            let kind = match t.kind {
                NodeKind::Nonterminal => "",
                NodeKind::VariableTerminal => " variable",
                NodeKind::OperationTerminal => " op",
            };
            let _ = writeln!(out, "type {}{}", t.name, kind);
        }
        for p in &self.productions {
            let keyword = if p.is_closure { "closure" } else { "rule" };
            let _ = write!(out, "{} {} ->", keyword, self.node_type(p.head).name);
            for f in &p.fields {
                let _ = write!(out, " {}:{}", f.label, self.node_type(f.ty).name);
            }
            if let Some(chain) = &p.closure_chain {
                let ids: Vec<String> = chain.iter().map(|c| c.0.to_string()).collect();
                let _ = write!(out, " chain {}", ids.join(" "));
            }
            let _ = writeln!(out);
        }
        out
    }

    /// SHA-256 of the canonical text form, as lowercase hex.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Human-readable `Head -> label:Type ...` form of one production.
    pub fn production_display(&self, id: ProdId) -> String {
        let p = self.production(id);
        let mut s = format!("{} ->", self.node_type(p.head).name);
        for f in &p.fields {
            let _ = write!(s, " {}:{}", f.label, self.node_type(f.ty).name);
        }
        s
    }
}

/// Parses the declarative grammar file format.
///
/// One declaration per line: `type <name> [variable|op|terminal]` and
/// `rule <Head> -> <label>:<Type> ...`. `#` starts a comment, blank lines are
/// ignored. `closure` lines (same shape as `rule` plus `chain <id>...`) are
/// accepted so grammars with extracted closures round-trip through files.
/// Production ids are assigned in file order starting at 0; the root type is
/// the head of the first rule.
pub fn load_grammar(text: &str) -> Result<Grammar, GrammarError> {
    let mut node_types: Vec<NodeType> = Vec::new();
    let mut by_name: HashMap<String, NodeTypeId> = HashMap::new();
    struct RawRule {
        line: usize,
        head: String,
        fields: Vec<(String, String)>,
        chain: Option<Vec<u32>>,
    }
    let mut raw_rules: Vec<RawRule> = Vec::new();

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let mut words = line.split_whitespace();
        match words.next() {
            Some("type") => {
                let name = words
                    .next()
                    .ok_or_else(|| GrammarError::Parse {
                        line: line_no,
                        msg: "expected `type <name> [variable|op]`".into(),
                    })?
                    .to_string();
                let kind = match words.next() {
                    None => NodeKind::Nonterminal,
                    // `terminal` is accepted as a synonym for `variable`.
                    Some("variable") | Some("terminal") => NodeKind::VariableTerminal,
                    Some("op") => NodeKind::OperationTerminal,
                    Some(other) => {
                        return Err(GrammarError::Parse {
                            line: line_no,
                            msg: format!("unknown type kind `{other}`"),
                        })
                    }
                };
                if by_name.contains_key(&name) {
                    return Err(GrammarError::DuplicateType { line: line_no, name });
                }
                let id = NodeTypeId(node_types.len() as u32);
                by_name.insert(name.clone(), id);
                node_types.push(NodeType { name, kind });
            }
            Some(kw @ ("rule" | "closure")) => {
                let rest = line[kw.len()..].trim();
                let (head, tail) = rest.split_once("->").ok_or_else(|| GrammarError::Parse {
                    line: line_no,
                    msg: "expected `<Head> -> <label>:<Type> ...`".into(),
                })?;
                let head = head.trim().to_string();
                if head.is_empty() {
                    return Err(GrammarError::Parse {
                        line: line_no,
                        msg: "missing rule head".into(),
                    });
                }
                let mut fields = Vec::new();
                let mut chain = None;
                let mut parts = tail.split_whitespace().peekable();
                while let Some(part) = parts.next() {
                    if part == "chain" {
                        let mut ids = Vec::new();
                        for p in parts.by_ref() {
                            ids.push(p.parse::<u32>().map_err(|_| GrammarError::Parse {
                                line: line_no,
                                msg: format!("bad chain id `{p}`"),
                            })?);
                        }
                        chain = Some(ids);
                        break;
                    }
                    let (label, ty) = part.split_once(':').ok_or_else(|| GrammarError::Parse {
                        line: line_no,
                        msg: format!("expected `label:Type`, got `{part}`"),
                    })?;
                    fields.push((label.to_string(), ty.to_string()));
                }
                if kw == "closure" && chain.is_none() {
                    return Err(GrammarError::Parse {
                        line: line_no,
                        msg: "closure rule missing `chain`".into(),
                    });
                }
                raw_rules.push(RawRule { line: line_no, head, fields, chain });
            }
            Some(other) => {
                return Err(GrammarError::Parse {
                    line: line_no,
                    msg: format!("unknown declaration `{other}`"),
                })
            }
            None => unreachable!(),
        }
    }

    let mut productions = Vec::new();
    for raw in raw_rules {
        let head = *by_name.get(&raw.head).ok_or_else(|| GrammarError::UnknownType {
            line: raw.line,
            name: raw.head.clone(),
        })?;
        if node_types[head.0 as usize].kind != NodeKind::Nonterminal {
            return Err(GrammarError::TerminalHead { line: raw.line, name: raw.head });
        }
        let mut fields = Vec::new();
        for (label, ty_name) in raw.fields {
            let ty = *by_name.get(&ty_name).ok_or_else(|| GrammarError::UnknownType {
                line: raw.line,
                name: ty_name.clone(),
            })?;
            if fields.iter().any(|f: &Field| f.label == label) {
                return Err(GrammarError::DuplicateLabel { line: raw.line, label });
            }
            fields.push(Field { label, ty });
        }
        let id = ProdId(productions.len() as u32);
        productions.push(Production {
            id,
            head,
            fields,
            is_closure: raw.chain.is_some(),
            closure_chain: raw.chain.map(|c| c.into_iter().map(ProdId).collect()),
        });
    }

    if productions.is_empty() {
        return Err(GrammarError::NoProductions);
    }
    let root_type = productions[0].head;
    let mut grammar = Grammar {
        node_types,
        productions,
        productions_by_head: Vec::new(),
        root_type,
    };
    grammar.rebuild_head_index();
    Ok(grammar)
}

/// Derives a grammar from a corpus of parsed trees.
///
/// Every distinct (head, labeled field list) observed at a nonterminal node
/// becomes one production; list-valued fields therefore show up as one
/// production per observed arity. Node types and productions are registered
/// in first-seen pre-order, so the result is deterministic for a given corpus
/// order. The induced grammar derives every input tree.
pub fn induce_grammar(trees: &[AstNode], root_name: &str) -> Result<Grammar, GrammarError> {
    if trees.is_empty() {
        return Err(GrammarError::EmptyCorpus);
    }
    let mut node_types: Vec<NodeType> = Vec::new();
    let mut by_name: HashMap<String, NodeTypeId> = HashMap::new();
    let mut intern = |name: &str, kind: NodeKind, node_types: &mut Vec<NodeType>, by_name: &mut HashMap<String, NodeTypeId>| -> Result<NodeTypeId, GrammarError> {
        if let Some(&id) = by_name.get(name) {
            if node_types[id.0 as usize].kind != kind {
                return Err(GrammarError::InconsistentKind { name: name.to_string() });
            }
            return Ok(id);
        }
        let id = NodeTypeId(node_types.len() as u32);
        by_name.insert(name.to_string(), id);
        node_types.push(NodeType { name: name.to_string(), kind });
        Ok(id)
    };

    // The root type is registered first so ids are stable even if the first
    // tree's root node differs from `root_name` (it should not).
    intern(root_name, NodeKind::Nonterminal, &mut node_types, &mut by_name)?;

    let mut productions: Vec<Production> = Vec::new();
    let mut prod_index: HashMap<(NodeTypeId, Vec<(String, NodeTypeId)>), ProdId> = HashMap::new();

    fn walk(
        node: &AstNode,
        node_types: &mut Vec<NodeType>,
        by_name: &mut HashMap<String, NodeTypeId>,
        productions: &mut Vec<Production>,
        prod_index: &mut HashMap<(NodeTypeId, Vec<(String, NodeTypeId)>), ProdId>,
        intern: &mut impl FnMut(&str, NodeKind, &mut Vec<NodeType>, &mut HashMap<String, NodeTypeId>) -> Result<NodeTypeId, GrammarError>,
    ) -> Result<NodeTypeId, GrammarError> {
        match node {
            AstNode::NonTerminal { ty_name, children, .. } => {
                let head = intern(ty_name, NodeKind::Nonterminal, node_types, by_name)?;
                let mut fields = Vec::new();
                for child in children {
                    let child_ty = walk(child, node_types, by_name, productions, prod_index, intern)?;
                    fields.push((child.label().unwrap_or_default().to_string(), child_ty));
                }
                let key = (head, fields.clone());
                if !prod_index.contains_key(&key) {
                    let id = ProdId(productions.len() as u32);
                    productions.push(Production {
                        id,
                        head,
                        fields: fields
                            .iter()
                            .map(|(label, ty)| Field { label: label.clone(), ty: *ty })
                            .collect(),
                        is_closure: false,
                        closure_chain: None,
                    });
                    prod_index.insert(key, id);
                }
                Ok(head)
            }
            AstNode::Terminal { ty_name, .. } => {
                intern(ty_name, NodeKind::VariableTerminal, node_types, by_name)
            }
            AstNode::Leaf { ty_name, .. } => {
                intern(ty_name, NodeKind::OperationTerminal, node_types, by_name)
            }
        }
    }

    for tree in trees {
        walk(tree, &mut node_types, &mut by_name, &mut productions, &mut prod_index, &mut intern)?;
    }

    if productions.is_empty() {
        return Err(GrammarError::NoProductions);
    }
    let root_type = *by_name.get(root_name).expect("root interned above");
    let mut grammar = Grammar {
        node_types,
        productions,
        productions_by_head: Vec::new(),
        root_type,
    };
    grammar.rebuild_head_index();
    Ok(grammar)
}

/// Adds closure productions for every maximal chain of unary productions that
/// occurs at least `min_frequency` times in the corpus action sequences.
///
/// Original productions are always retained and never pruned. A chain is a
/// consecutive run of single-field productions where each next rule is
/// applied to the node the previous one created; the resulting closure rule
/// has the head of the first and the single field of the last constituent.
pub fn unary_closure(
    grammar: &Grammar,
    corpus: &[Vec<crate::transition::OracleAction>],
    min_frequency: usize,
) -> Grammar {
    assert!(min_frequency >= 1, "closure frequency threshold must be >= 1");
    // Count maximal unary runs. Oracle sequences are pre-order, and a unary
    // rule's single child is the next node expanded, so consecutive unary
    // applications in the sequence form exactly the spine chains.
    let mut counts: HashMap<Vec<ProdId>, usize> = HashMap::new();
    let mut order: Vec<Vec<ProdId>> = Vec::new();
    for seq in corpus {
        let mut run: Vec<ProdId> = Vec::new();
        let mut flush = |run: &mut Vec<ProdId>| {
            if run.len() >= 2 {
                let key = run.clone();
                if !counts.contains_key(&key) {
                    order.push(key.clone());
                }
                *counts.entry(key).or_insert(0) += 1;
            }
            run.clear();
        };
        for action in seq {
            match action {
                crate::transition::OracleAction::Rule(pid) => {
                    let p = grammar.production(*pid);
                    let continues = if let Some(last) = run.last() {
                        grammar.production(*last).fields[0].ty == p.head
                    } else {
                        true
                    };
                    if p.is_unary() && !p.is_closure {
                        if !continues {
                            flush(&mut run);
                        }
                        run.push(*pid);
                        // A chain ends when the unary field is a terminal:
                        // nothing below it can extend the spine.
                        if grammar.node_type(p.fields[0].ty).kind != NodeKind::Nonterminal {
                            flush(&mut run);
                        }
                    } else {
                        flush(&mut run);
                    }
                }
                _ => flush(&mut run),
            }
        }
        flush(&mut run);
    }

    let mut out = grammar.clone();
    for chain in order {
        if counts[&chain] < min_frequency {
            continue;
        }
        let first = grammar.production(chain[0]);
        let last = grammar.production(*chain.last().unwrap());
        let id = ProdId(out.productions.len() as u32);
        out.productions.push(Production {
            id,
            head: first.head,
            fields: vec![last.fields[0].clone()],
            is_closure: true,
            closure_chain: Some(chain),
        });
    }
    out.rebuild_head_index();
    out
}

/// Corpus-level grammar statistics in the shape of the usual dataset tables.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GrammarStats {
    pub production_count: usize,
    pub node_type_count: usize,
    pub avg_actions_per_example: f64,
}

/// Computes production/type counts plus the mean oracle action-sequence
/// length of `trees` under `grammar` (closure rules are preferred when the
/// grammar contains them).
pub fn grammar_stats(
    grammar: &Grammar,
    trees: &[AstNode],
) -> Result<GrammarStats, crate::transition::TransitionError> {
    let mut total = 0usize;
    for tree in trees {
        total += crate::transition::oracle_actions(tree, grammar)?.len();
    }
    let avg = if trees.is_empty() { 0.0 } else { total as f64 / trees.len() as f64 };
    Ok(GrammarStats {
        production_count: grammar.productions.len(),
        node_type_count: grammar.node_types.len(),
        avg_actions_per_example: avg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transition::{oracle_actions, replay};

    #[test]
    fn minimal_grammar_loads() {
        let g = load_grammar("type root\ntype Leaf variable\nrule root -> v:Leaf\n").unwrap();
        assert_eq!(g.productions.len(), 1);
        assert_eq!(g.node_types.len(), 2);
        assert_eq!(g.root_type, g.type_id("root").unwrap());
        assert_eq!(g.node_type(g.type_id("Leaf").unwrap()).kind, NodeKind::VariableTerminal);
    }

    #[test]
    fn unknown_field_type_is_rejected() {
        let err = load_grammar("type root\nrule root -> v:Missing\n").unwrap_err();
        match err {
            GrammarError::UnknownType { name, .. } => assert_eq!(name, "Missing"),
            other => panic!("expected unknown type error, got {other}"),
        }
    }

    #[test]
    fn variable_terminal_head_is_rejected() {
        let err = load_grammar("type root variable\nrule root -> \n").unwrap_err();
        assert!(matches!(err, GrammarError::TerminalHead { .. }));
    }

    #[test]
    fn duplicate_type_and_label_are_rejected() {
        assert!(matches!(
            load_grammar("type a\ntype a\n").unwrap_err(),
            GrammarError::DuplicateType { .. }
        ));
        assert!(matches!(
            load_grammar("type root\ntype x\nrule root -> a:x a:x\n").unwrap_err(),
            GrammarError::DuplicateLabel { .. }
        ));
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let g = load_grammar("# header\n\ntype root # trailing\ntype v variable\nrule root -> x:v\n").unwrap();
        assert_eq!(g.productions.len(), 1);
    }

    #[test]
    fn production_ids_follow_file_order() {
        let g = load_grammar("type root\ntype a\nrule root -> x:a\nrule a ->\n").unwrap();
        assert_eq!(g.productions[0].id, ProdId(0));
        assert_eq!(g.productions[1].id, ProdId(1));
        assert_eq!(g.productions_for(g.type_id("a").unwrap()), &[ProdId(1)]);
    }

    #[test]
    fn induce_single_terminal_tree() {
        let tree = AstNode::nonterminal("root", None)
            .with_child(AstNode::terminal("Leaf", Some("v"), vec!["x".into()]));
        let g = induce_grammar(&[tree], "root").unwrap();
        assert_eq!(g.productions.len(), 1);
        assert_eq!(g.node_types.len(), 2);
    }

    #[test]
    fn induce_empty_corpus_fails() {
        assert!(matches!(induce_grammar(&[], "root").unwrap_err(), GrammarError::EmptyCorpus));
    }

    #[test]
    fn induce_rejects_inconsistent_kinds() {
        let t1 = AstNode::nonterminal("root", None)
            .with_child(AstNode::terminal("x", Some("a"), vec!["v".into()]));
        let t2 = AstNode::nonterminal("root", None).with_child(
            AstNode::nonterminal("x", Some("a"))
                .with_child(AstNode::terminal("y", Some("b"), vec!["v".into()])),
        );
        assert!(matches!(
            induce_grammar(&[t1, t2], "root").unwrap_err(),
            GrammarError::InconsistentKind { .. }
        ));
    }

    fn chain_grammar() -> Grammar {
        load_grammar(concat!(
            "type root\ntype list\ntype expr\ntype Name\ntype str variable\n",
            "rule root -> v:list\n",
            "rule list -> e:expr\n",
            "rule expr -> n:Name\n",
            "rule Name -> id:str\n",
        ))
        .unwrap()
    }

    fn chain_tree() -> AstNode {
        AstNode::nonterminal("root", None).with_child(
            AstNode::nonterminal("list", Some("v")).with_child(
                AstNode::nonterminal("expr", Some("e")).with_child(
                    AstNode::nonterminal("Name", Some("n"))
                        .with_child(AstNode::terminal("str", Some("id"), vec!["sorted".into()])),
                ),
            ),
        )
    }

    #[test]
    fn closure_merges_unary_chain() {
        let g = chain_grammar();
        let tree = chain_tree();
        let seq = oracle_actions(&tree, &g).unwrap();
        let corpus: Vec<_> = std::iter::repeat(seq).take(5).collect();
        let closed = unary_closure(&g, &corpus, 5);
        // One new rule collapsing list -> expr -> Name into `list ->* str`
        // (the root rule is also unary, so the maximal chain has length 4).
        assert_eq!(closed.productions.len(), g.productions.len() + 1);
        let closure = closed.productions.last().unwrap();
        assert!(closure.is_closure);
        assert_eq!(closure.closure_chain.as_ref().unwrap().len(), 4);
        assert_eq!(closed.node_type(closure.head).name, "root");
        assert_eq!(closed.node_type(closure.fields[0].ty).name, "str");
    }

    #[test]
    fn closure_threshold_above_frequency_is_identity() {
        let g = chain_grammar();
        let seq = oracle_actions(&chain_tree(), &g).unwrap();
        let closed = unary_closure(&g, &[seq], 2);
        assert_eq!(closed.productions.len(), g.productions.len());
    }

    #[test]
    fn closure_on_chainless_grammar_is_identity() {
        let g = load_grammar(concat!(
            "type root\ntype a\ntype b\n",
            "rule root -> x:a y:b\nrule a ->\nrule b ->\n",
        ))
        .unwrap();
        let tree = AstNode::nonterminal("root", None)
            .with_child(AstNode::nonterminal("a", Some("x")))
            .with_child(AstNode::nonterminal("b", Some("y")));
        let seq = oracle_actions(&tree, &g).unwrap();
        let closed = unary_closure(&g, &vec![seq; 100], 1);
        assert_eq!(closed.productions.len(), g.productions.len());
    }

    #[test]
    fn closure_preserves_derivability_and_shrinks_oracle() {
        let g = chain_grammar();
        let tree = chain_tree();
        let plain = oracle_actions(&tree, &g).unwrap();
        let closed = unary_closure(&g, &vec![plain.clone(); 3], 3);
        let merged = oracle_actions(&tree, &closed).unwrap();
        assert!(merged.len() < plain.len());
        let rebuilt = replay(&merged, &closed).unwrap();
        let resolved = crate::ast::resolve_rules(&tree, &g).unwrap();
        assert!(rebuilt.structural_eq(&resolved));
    }

    #[test]
    fn grammar_text_round_trips_including_closures() {
        let g = chain_grammar();
        let seq = oracle_actions(&chain_tree(), &g).unwrap();
        let closed = unary_closure(&g, &vec![seq; 3], 1);
        let reloaded = load_grammar(&closed.to_text()).unwrap();
        assert_eq!(reloaded.to_text(), closed.to_text());
        assert_eq!(reloaded.hash(), closed.hash());
    }

    #[test]
    fn stats_on_singleton_corpus() {
        let g = chain_grammar();
        let tree = chain_tree();
        // 4 rule applications + 1 token + 1 close.
        let stats = grammar_stats(&g, &[tree]).unwrap();
        assert_eq!(stats.avg_actions_per_example, 6.0);
        assert_eq!(stats.production_count, 4);
        assert_eq!(stats.node_type_count, 5);
    }
}
