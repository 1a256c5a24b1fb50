//! The AST data model: typed tree nodes, structural equality, completeness
//! checks and a line-oriented text serialization.
//!
//! Nodes carry node-type *names* rather than grammar-relative ids so trees
//! can exist before a grammar does (the mini-language parsers produce trees
//! that grammar induction consumes). `resolve_rules` stamps production ids
//! onto a tree once a grammar is available.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grammar::{Grammar, NodeKind, ProdId};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AstNode {
    /// Expanded by a production; complete once `rule` is set and all
    /// children are complete.
    NonTerminal {
        ty_name: String,
        label: Option<String>,
        rule: Option<ProdId>,
        children: Vec<AstNode>,
    },
    /// Variable terminal holding a token sequence; complete once closed.
    Terminal {
        ty_name: String,
        label: Option<String>,
        tokens: Vec<String>,
        closed: bool,
    },
    /// Operation terminal: a closed-set leaf, complete on creation.
    Leaf { ty_name: String, label: Option<String> },
}

#[derive(Debug, Error)]
pub enum AstError {
    #[error("incomplete AST: {0}")]
    Incomplete(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("node type `{0}` is not part of the grammar")]
    ForeignType(String),
    #[error("no production matches node `{0}`")]
    NoMatchingProduction(String),
}

impl AstNode {
    pub fn nonterminal(ty_name: &str, label: Option<&str>) -> Self {
        AstNode::NonTerminal {
            ty_name: ty_name.to_string(),
            label: label.map(str::to_string),
            rule: None,
            children: Vec::new(),
        }
    }

    pub fn terminal(ty_name: &str, label: Option<&str>, tokens: Vec<String>) -> Self {
        AstNode::Terminal {
            ty_name: ty_name.to_string(),
            label: label.map(str::to_string),
            tokens,
            closed: true,
        }
    }

    pub fn leaf(ty_name: &str, label: Option<&str>) -> Self {
        AstNode::Leaf { ty_name: ty_name.to_string(), label: label.map(str::to_string) }
    }

    pub fn with_child(mut self, child: AstNode) -> Self {
        match &mut self {
            AstNode::NonTerminal { children, .. } => children.push(child),
            _ => panic!("only nonterminals have children"),
        }
        self
    }

    pub fn ty_name(&self) -> &str {
        match self {
            AstNode::NonTerminal { ty_name, .. }
            | AstNode::Terminal { ty_name, .. }
            | AstNode::Leaf { ty_name, .. } => ty_name,
        }
    }

    pub fn label(&self) -> Option<&str> {
        match self {
            AstNode::NonTerminal { label, .. }
            | AstNode::Terminal { label, .. }
            | AstNode::Leaf { label, .. } => label.as_deref(),
        }
    }

    pub fn children(&self) -> &[AstNode] {
        match self {
            AstNode::NonTerminal { children, .. } => children,
            _ => &[],
        }
    }

    /// Total node count, the size measure used by evaluation breakdowns.
    pub fn node_count(&self) -> usize {
        1 + self.children().iter().map(AstNode::node_count).sum::<usize>()
    }

    /// Structural equality over type, applied rule, label, children and
    /// token sequences.
    pub fn structural_eq(&self, other: &AstNode) -> bool {
        match (self, other) {
            (
                AstNode::NonTerminal { ty_name: a, label: la, rule: ra, children: ca },
                AstNode::NonTerminal { ty_name: b, label: lb, rule: rb, children: cb },
            ) => {
                a == b
                    && la == lb
                    && ra == rb
                    && ca.len() == cb.len()
                    && ca.iter().zip(cb).all(|(x, y)| x.structural_eq(y))
            }
            (
                AstNode::Terminal { ty_name: a, label: la, tokens: ta, closed: xa },
                AstNode::Terminal { ty_name: b, label: lb, tokens: tb, closed: xb },
            ) => a == b && la == lb && ta == tb && xa == xb,
            (
                AstNode::Leaf { ty_name: a, label: la },
                AstNode::Leaf { ty_name: b, label: lb },
            ) => a == b && la == lb,
            _ => false,
        }
    }

    /// A node is complete when it has no unexpanded nonterminal and no
    /// unclosed or empty variable terminal anywhere below it.
    pub fn is_complete(&self) -> bool {
        match self {
            AstNode::NonTerminal { rule, children, .. } => {
                rule.is_some() && children.iter().all(AstNode::is_complete)
            }
            AstNode::Terminal { tokens, closed, .. } => *closed && !tokens.is_empty(),
            AstNode::Leaf { .. } => true,
        }
    }

    /// Checks the full set of node invariants against a grammar: every type
    /// exists, kinds match the node shape, and each nonterminal's children
    /// agree with its applied rule in count, order, label and type.
    pub fn check_invariants(&self, grammar: &Grammar) -> Result<(), AstError> {
        let ty = grammar
            .type_id(self.ty_name())
            .ok_or_else(|| AstError::ForeignType(self.ty_name().to_string()))?;
        let kind = grammar.node_type(ty).kind;
        match self {
            AstNode::NonTerminal { ty_name, rule, children, .. } => {
                if kind != NodeKind::Nonterminal {
                    return Err(AstError::ForeignType(format!("{ty_name} is not a nonterminal")));
                }
                let rule = rule.ok_or_else(|| AstError::Incomplete(ty_name.clone()))?;
                let prod = grammar.production(rule);
                if prod.head != ty || prod.fields.len() != children.len() {
                    return Err(AstError::NoMatchingProduction(ty_name.clone()));
                }
                for (field, child) in prod.fields.iter().zip(children) {
                    if child.label() != Some(field.label.as_str())
                        || grammar.type_id(child.ty_name()) != Some(field.ty)
                    {
                        return Err(AstError::NoMatchingProduction(ty_name.clone()));
                    }
                    child.check_invariants(grammar)?;
                }
                Ok(())
            }
            AstNode::Terminal { ty_name, tokens, closed, .. } => {
                if kind != NodeKind::VariableTerminal {
                    return Err(AstError::ForeignType(format!("{ty_name} is not a variable terminal")));
                }
                if !*closed || tokens.is_empty() {
                    return Err(AstError::Incomplete(ty_name.clone()));
                }
                Ok(())
            }
            AstNode::Leaf { ty_name, .. } => {
                if kind != NodeKind::OperationTerminal {
                    return Err(AstError::ForeignType(format!("{ty_name} is not an operation terminal")));
                }
                Ok(())
            }
        }
    }
}

/// Returns a copy of `tree` with every nonterminal's production id resolved
/// against `grammar` by (head, labeled child types) lookup.
pub fn resolve_rules(tree: &AstNode, grammar: &Grammar) -> Result<AstNode, AstError> {
    match tree {
        AstNode::NonTerminal { ty_name, label, children, .. } => {
            let head = grammar
                .type_id(ty_name)
                .ok_or_else(|| AstError::ForeignType(ty_name.clone()))?;
            let mut fields = Vec::new();
            for child in children {
                let ty = grammar
                    .type_id(child.ty_name())
                    .ok_or_else(|| AstError::ForeignType(child.ty_name().to_string()))?;
                fields.push((child.label().unwrap_or_default().to_string(), ty));
            }
            let rule = grammar
                .find_production(head, &fields)
                .ok_or_else(|| AstError::NoMatchingProduction(ty_name.clone()))?;
            let children = children
                .iter()
                .map(|c| resolve_rules(c, grammar))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(AstNode::NonTerminal {
                ty_name: ty_name.clone(),
                label: label.clone(),
                rule: Some(rule),
                children,
            })
        }
        other => Ok(other.clone()),
    }
}

/// Free-function form of [`AstNode::structural_eq`].
pub fn ast_equal(a: &AstNode, b: &AstNode) -> bool {
    a.structural_eq(b)
}

// ---------------------------------------------------------------------------
// Text serialization: one node per line, indentation encodes nesting.
//
//   nt   <type> [label] [rule=<id>]
//   term <type> [label] tokens=<json array>
//   leaf <type> [label]
// ---------------------------------------------------------------------------

pub fn serialize(tree: &AstNode) -> String {
    let mut out = String::new();
    fn emit(node: &AstNode, depth: usize, out: &mut String) {
        let pad = "  ".repeat(depth);
        let label = node.label().map(|l| format!(" {l}")).unwrap_or_default();
        match node {
            AstNode::NonTerminal { ty_name, rule, children, .. } => {
                let rule_part = rule.map(|r| format!(" rule={}", r.0)).unwrap_or_default();
                out.push_str(&format!("{pad}nt {ty_name}{label}{rule_part}\n"));
                for child in children {
                    emit(child, depth + 1, out);
                }
            }
            AstNode::Terminal { ty_name, tokens, closed, .. } => {
                let tok = serde_json::to_string(tokens).expect("token list is serializable");
                let open = if *closed { "" } else { " open" };
                out.push_str(&format!("{pad}term {ty_name}{label} tokens={tok}{open}\n"));
            }
            AstNode::Leaf { ty_name, .. } => {
                out.push_str(&format!("{pad}leaf {ty_name}{label}\n"));
            }
        }
    }
    emit(tree, 0, &mut out);
    out
}

pub fn deserialize(text: &str) -> Result<AstNode, AstError> {
    struct Line {
        no: usize,
        depth: usize,
        node: AstNode,
    }
    let mut lines: Vec<Line> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let no = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let stripped = raw.trim_start_matches(' ');
        let indent = raw.len() - stripped.len();
        if indent % 2 != 0 {
            return Err(AstError::Parse { line: no, msg: "odd indentation".into() });
        }
        let mut words = stripped.split_whitespace();
        let kind = words.next().ok_or(AstError::Parse { line: no, msg: "empty line".into() })?;
        let ty_name = words
            .next()
            .ok_or(AstError::Parse { line: no, msg: "missing node type".into() })?
            .to_string();
        let rest: Vec<&str> = words.collect();
        let label = rest
            .first()
            .filter(|w| !w.contains('=') && **w != "open")
            .map(|w| w.to_string());
        let node = match kind {
            "nt" => {
                let rule = rest.iter().find_map(|w| w.strip_prefix("rule=")).map(|v| {
                    v.parse::<u32>().map(ProdId).map_err(|_| AstError::Parse {
                        line: no,
                        msg: format!("bad rule id `{v}`"),
                    })
                });
                AstNode::NonTerminal {
                    ty_name,
                    label,
                    rule: rule.transpose()?,
                    children: Vec::new(),
                }
            }
            "term" => {
                let tok = rest
                    .iter()
                    .find_map(|w| w.strip_prefix("tokens="))
                    .ok_or(AstError::Parse { line: no, msg: "terminal missing tokens".into() })?;
                let tokens: Vec<String> = serde_json::from_str(tok)
                    .map_err(|e| AstError::Parse { line: no, msg: format!("bad token list: {e}") })?;
                let closed = !rest.iter().any(|w| *w == "open");
                AstNode::Terminal { ty_name, label, tokens, closed }
            }
            "leaf" => AstNode::Leaf { ty_name, label },
            other => {
                return Err(AstError::Parse { line: no, msg: format!("unknown node kind `{other}`") })
            }
        };
        lines.push(Line { no, depth: indent / 2, node });
    }
    if lines.is_empty() {
        return Err(AstError::Parse { line: 0, msg: "empty input".into() });
    }

    // Rebuild the tree from the indentation structure with a stack of
    // (depth, node) frames.
    let mut stack: Vec<(usize, AstNode)> = Vec::new();
    fn attach(parent: &mut AstNode, child: AstNode, line: usize) -> Result<(), AstError> {
        match parent {
            AstNode::NonTerminal { children, .. } => {
                children.push(child);
                Ok(())
            }
            _ => Err(AstError::Parse { line, msg: "children under a terminal node".into() }),
        }
    }
    for line in lines {
        while let Some((depth, _)) = stack.last() {
            if *depth >= line.depth {
                let (_, done) = stack.pop().expect("stack nonempty");
                match stack.last_mut() {
                    Some((_, parent)) => attach(parent, done, line.no)?,
                    None => {
                        return Err(AstError::Parse {
                            line: line.no,
                            msg: "multiple roots or bad indentation".into(),
                        })
                    }
                }
            } else {
                break;
            }
        }
        if let Some((depth, _)) = stack.last() {
            if line.depth != depth + 1 {
                return Err(AstError::Parse { line: line.no, msg: "indentation jump".into() });
            }
        } else if line.depth != 0 {
            return Err(AstError::Parse { line: line.no, msg: "root must not be indented".into() });
        }
        stack.push((line.depth, line.node));
    }
    let mut current = stack.pop().expect("at least one line").1;
    while let Some((_, mut parent)) = stack.pop() {
        attach(&mut parent, current, 0)?;
        current = parent;
    }
    Ok(current)
}
