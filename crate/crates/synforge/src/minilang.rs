//! The bundled mini-languages: MiniPy (a Python-flavored statement language)
//! and FlowDSL (IFTTT-style trigger/action programs).
//!
//! Each language ships a grammar, a deterministic renderer and the renderer's
//! inverse parser. Token joining inside terminals follows the tokenizer:
//! identifier-like values concatenate their pieces (so camel-case splits
//! recover the original spelling) while string literals join with single
//! spaces inside quotes. Renderers are injective on canonical trees, i.e.
//! trees whose terminal token lists are a fixed point of the tokenizer.

use thiserror::Error;

use crate::ast::AstNode;
use crate::grammar::{load_grammar, Grammar};
use crate::transition::tokenize_terminal;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Language {
    MiniPy,
    FlowDsl,
}

impl Language {
    pub fn name(&self) -> &'static str {
        match self {
            Language::MiniPy => "minipy",
            Language::FlowDsl => "flowdsl",
        }
    }

    pub fn from_name(name: &str) -> Option<Language> {
        match name {
            "minipy" => Some(Language::MiniPy),
            "flowdsl" => Some(Language::FlowDsl),
            _ => None,
        }
    }

    pub fn grammar_text(&self) -> &'static str {
        match self {
            Language::MiniPy => MINIPY_GRAMMAR,
            Language::FlowDsl => FLOWDSL_GRAMMAR.as_str(),
        }
    }

    pub fn grammar(&self) -> Grammar {
        load_grammar(self.grammar_text()).expect("bundled grammar is well-formed")
    }

    pub fn root_type_name(&self) -> &'static str {
        "root"
    }
}

pub const MINIPY_GRAMMAR: &str = "\
# MiniPy abstract grammar: assignments, calls, if/for, lambda, attribute
# access, names, numbers and strings. List-valued fields (stmt*, expr*, kw*)
# expand through fixed-arity productions.
type root
type stmt
type stmt*
type expr
type expr*
type kw*
type keyword
type params
type Expr
type Assign
type If
type For
type Call
type Name
type Num
type Str
type Lambda
type Attribute
type BinOp
type Compare
type operator
type cmpop
type Add op
type Sub op
type Mult op
type Div op
type Lt op
type Gt op
type Eq op
type NotEq op
type ident variable
type number variable
type string variable
rule root -> body:stmt
rule stmt -> s:Expr
rule stmt -> s:Assign
rule stmt -> s:If
rule stmt -> s:For
rule Expr -> value:expr
rule Assign -> target:expr value:expr
rule If -> test:expr body:stmt* orelse:stmt*
rule For -> target:expr iter:expr body:stmt*
rule expr -> e:Call
rule expr -> e:Name
rule expr -> e:Num
rule expr -> e:Str
rule expr -> e:Lambda
rule expr -> e:Attribute
rule expr -> e:BinOp
rule expr -> e:Compare
rule Call -> func:expr args:expr* keywords:kw*
rule Name -> id:ident
rule Num -> n:number
rule Str -> s:string
rule Lambda -> args:params body:expr
rule Attribute -> value:expr attr:ident
rule BinOp -> left:expr op:operator right:expr
rule Compare -> left:expr op:cmpop right:expr
rule operator -> o:Add
rule operator -> o:Sub
rule operator -> o:Mult
rule operator -> o:Div
rule cmpop -> o:Lt
rule cmpop -> o:Gt
rule cmpop -> o:Eq
rule cmpop -> o:NotEq
rule params -> p0:ident
rule stmt* ->
rule stmt* -> s0:stmt
rule stmt* -> s0:stmt s1:stmt
rule expr* ->
rule expr* -> e0:expr
rule expr* -> e0:expr e1:expr
rule expr* -> e0:expr e1:expr e2:expr
rule kw* ->
rule kw* -> k0:keyword
rule keyword -> arg:ident value:expr
";

const FLOW_CHANNELS: &[&str] = &[
    "Instagram", "Dropbox", "Twitter", "Gmail", "Weather", "Calendar", "Feedly", "Facebook",
    "Email", "Sms",
];

const FLOW_FUNCTIONS: &[&str] = &[
    "AnyNewPhotoByYou", "AddFileFromURL", "PostNewTweet", "SendEmail", "TomorrowForecast",
    "EventStarts", "NewArticle", "NewStatusMessage", "SendSms", "NewAttachment", "NewLike",
    "SaveArticle", "CreateEvent", "UploadFile",
];

/// FlowDSL: every leaf is a zero-field production and there are no variable
/// terminals, so the whole program is generated by rule applications alone.
pub static FLOWDSL_GRAMMAR: std::sync::LazyLock<String> = std::sync::LazyLock::new(|| {
    let mut s = String::from("# FlowDSL abstract grammar: IF trigger THEN action.\n");
    for ty in ["root", "trigger", "action", "channel", "func"] {
        s.push_str(&format!("type {ty}\n"));
    }
    for c in FLOW_CHANNELS {
        s.push_str(&format!("type {c}\n"));
    }
    for f in FLOW_FUNCTIONS {
        s.push_str(&format!("type {f}\n"));
    }
    s.push_str("rule root -> trigger:trigger action:action\n");
    s.push_str("rule trigger -> channel:channel function:func\n");
    s.push_str("rule action -> channel:channel function:func\n");
    for c in FLOW_CHANNELS {
        s.push_str(&format!("rule channel -> c:{c}\n"));
    }
    for c in FLOW_CHANNELS {
        s.push_str(&format!("rule {c} ->\n"));
    }
    for f in FLOW_FUNCTIONS {
        s.push_str(&format!("rule func -> f:{f}\n"));
    }
    for f in FLOW_FUNCTIONS {
        s.push_str(&format!("rule {f} ->\n"));
    }
    s
});

pub fn flow_channels() -> &'static [&'static str] {
    FLOW_CHANNELS
}

pub fn flow_functions() -> &'static [&'static str] {
    FLOW_FUNCTIONS
}

#[derive(Debug, Error)]
pub enum LangError {
    #[error("incomplete AST: {0}")]
    Incomplete(String),
    #[error("node type `{0}` is foreign to this language")]
    Foreign(String),
    #[error("parse error at token {at}: {msg}")]
    Parse { at: usize, msg: String },
    #[error("lex error at byte {at}: {msg}")]
    Lex { at: usize, msg: String },
}

// ---------------------------------------------------------------------------
// Lexer, shared by both parsers and by token-level BLEU.
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Number(String),
    /// Contents between single quotes, whitespace-split.
    Str(Vec<String>),
    /// `_STR:<i>_` placeholder.
    Placeholder(String),
    Punct(&'static str),
}

impl Tok {
    /// Surface form used as a BLEU token.
    pub fn surface(&self) -> String {
        match self {
            Tok::Ident(s) | Tok::Number(s) | Tok::Placeholder(s) => s.clone(),
            Tok::Str(parts) => format!("'{}'", parts.join(" ")),
            Tok::Punct(p) => p.to_string(),
        }
    }
}

const PUNCTS: &[&str] = &["==", "!=", "(", ")", ",", ":", ";", "=", ".", "+", "-", "*", "/", "<", ">"];

pub fn lex(code: &str) -> Result<Vec<Tok>, LangError> {
    let bytes: Vec<char> = code.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '\'' {
            let mut j = i + 1;
            while j < bytes.len() && bytes[j] != '\'' {
                j += 1;
            }
            if j >= bytes.len() {
                return Err(LangError::Lex { at: i, msg: "unterminated string literal".into() });
            }
            let contents: String = bytes[i + 1..j].iter().collect();
            toks.push(Tok::Str(contents.split_whitespace().map(str::to_string).collect()));
            i = j + 1;
            continue;
        }
        // Placeholder: _STR:<digits>_
        if c == '_' && bytes[i..].iter().collect::<String>().starts_with("_STR:") {
            let mut j = i + 5;
            let start = j;
            while j < bytes.len() && bytes[j].is_ascii_digit() {
                j += 1;
            }
            if j > start && j < bytes.len() && bytes[j] == '_' {
                let s: String = bytes[i..=j].iter().collect();
                toks.push(Tok::Placeholder(s));
                i = j + 1;
                continue;
            }
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let mut j = i;
            while j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == '_') {
                j += 1;
            }
            toks.push(Tok::Ident(bytes[i..j].iter().collect()));
            i = j;
            continue;
        }
        if c.is_ascii_digit() {
            let mut j = i;
            while j < bytes.len() && bytes[j].is_ascii_digit() {
                j += 1;
            }
            toks.push(Tok::Number(bytes[i..j].iter().collect()));
            i = j;
            continue;
        }
        let rest: String = bytes[i..].iter().take(2).collect();
        let matched = PUNCTS.iter().find(|p| rest.starts_with(**p));
        match matched {
            Some(p) => {
                toks.push(Tok::Punct(p));
                i += p.len();
            }
            None => return Err(LangError::Lex { at: i, msg: format!("unexpected character `{c}`") }),
        }
    }
    Ok(toks)
}

/// Surface-token stream of rendered code, the unit of token-level BLEU.
pub fn surface_tokens(code: &str) -> Result<Vec<String>, LangError> {
    Ok(lex(code)?.iter().map(Tok::surface).collect())
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

/// Renders a complete AST to surface code.
pub fn render(ast: &AstNode, language: Language) -> Result<String, LangError> {
    match language {
        Language::MiniPy => render_minipy_stmt_root(ast),
        Language::FlowDsl => render_flow(ast),
    }
}

fn term_tokens<'a>(node: &'a AstNode, what: &str) -> Result<&'a [String], LangError> {
    match node {
        AstNode::Terminal { tokens, closed, .. } => {
            if !*closed || tokens.is_empty() {
                Err(LangError::Incomplete(format!("{what} terminal is not populated")))
            } else {
                Ok(tokens)
            }
        }
        _ => Err(LangError::Incomplete(format!("expected a {what} terminal"))),
    }
}

fn child<'a>(node: &'a AstNode, idx: usize) -> Result<&'a AstNode, LangError> {
    node.children().get(idx).ok_or_else(|| {
        LangError::Incomplete(format!("node {} is missing child {idx}", node.ty_name()))
    })
}

/// Identifier-like values concatenate their pieces.
fn join_ident(tokens: &[String]) -> String {
    tokens.concat()
}

fn is_placeholder(tok: &str) -> bool {
    tok.strip_prefix("_STR:")
        .and_then(|rest| rest.strip_suffix('_'))
        .map(|digits| !digits.is_empty() && digits.chars().all(|c| c.is_ascii_digit()))
        .unwrap_or(false)
}

fn render_minipy_stmt_root(ast: &AstNode) -> Result<String, LangError> {
    if ast.ty_name() != "root" {
        return Err(LangError::Foreign(ast.ty_name().to_string()));
    }
    render_stmt(child(ast, 0)?)
}

fn render_stmt(stmt: &AstNode) -> Result<String, LangError> {
    if stmt.ty_name() != "stmt" {
        return Err(LangError::Foreign(stmt.ty_name().to_string()));
    }
    let inner = child(stmt, 0)?;
    match inner.ty_name() {
        "Expr" => render_expr_at(child(inner, 0)?, 0),
        "Assign" => Ok(format!(
            "{} = {}",
            render_expr_at(child(inner, 0)?, 3)?,
            render_expr_at(child(inner, 1)?, 0)?
        )),
        "If" => {
            let test = render_expr_at(child(inner, 0)?, 0)?;
            let body = render_suite(child(inner, 1)?)?;
            let orelse = child(inner, 2)?;
            if orelse.children().is_empty() {
                Ok(format!("if {test}: {body} end"))
            } else {
                Ok(format!("if {test}: {body} else: {} end", render_suite(orelse)?))
            }
        }
        "For" => Ok(format!(
            "for {} in {}: {} end",
            render_expr_at(child(inner, 0)?, 3)?,
            render_expr_at(child(inner, 1)?, 0)?,
            render_suite(child(inner, 2)?)?
        )),
        other => Err(LangError::Foreign(other.to_string())),
    }
}

fn render_suite(list: &AstNode) -> Result<String, LangError> {
    let parts = list
        .children()
        .iter()
        .map(render_stmt)
        .collect::<Result<Vec<_>, _>>()?;
    Ok(parts.join("; "))
}

/// Precedence levels: lambda 0, comparison 1, arithmetic 2, postfix/atoms 3.
/// A subexpression rendered in a context requiring a higher level is wrapped
/// in parentheses, which the parser treats as transparent.
fn expr_level(e: &AstNode) -> u8 {
    match e.ty_name() {
        "Lambda" => 0,
        "Compare" => 1,
        "BinOp" => 2,
        _ => 3,
    }
}

fn render_expr_at(expr: &AstNode, required: u8) -> Result<String, LangError> {
    if expr.ty_name() != "expr" {
        return Err(LangError::Foreign(expr.ty_name().to_string()));
    }
    let inner = child(expr, 0)?;
    let text = render_expr_inner(inner)?;
    if expr_level(inner) < required {
        Ok(format!("({text})"))
    } else {
        Ok(text)
    }
}

fn op_symbol(node: &AstNode) -> Result<&'static str, LangError> {
    let leaf = child(node, 0)?;
    Ok(match leaf.ty_name() {
        "Add" => "+",
        "Sub" => "-",
        "Mult" => "*",
        "Div" => "/",
        "Lt" => "<",
        "Gt" => ">",
        "Eq" => "==",
        "NotEq" => "!=",
        other => return Err(LangError::Foreign(other.to_string())),
    })
}

fn render_expr_inner(inner: &AstNode) -> Result<String, LangError> {
    match inner.ty_name() {
        "Name" => Ok(join_ident(term_tokens(child(inner, 0)?, "identifier")?)),
        "Num" => Ok(join_ident(term_tokens(child(inner, 0)?, "number")?)),
        "Str" => {
            let tokens = term_tokens(child(inner, 0)?, "string")?;
            if tokens.len() == 1 && is_placeholder(&tokens[0]) {
                Ok(tokens[0].clone())
            } else {
                Ok(format!("'{}'", tokens.join(" ")))
            }
        }
        "Call" => {
            let func = render_expr_at(child(inner, 0)?, 3)?;
            let mut parts = Vec::new();
            for arg in child(inner, 1)?.children() {
                parts.push(render_expr_at(arg, 0)?);
            }
            for kw in child(inner, 2)?.children() {
                let arg = join_ident(term_tokens(child(kw, 0)?, "keyword name")?);
                parts.push(format!("{arg}={}", render_expr_at(child(kw, 1)?, 0)?));
            }
            Ok(format!("{func}({})", parts.join(", ")))
        }
        "Attribute" => Ok(format!(
            "{}.{}",
            render_expr_at(child(inner, 0)?, 3)?,
            join_ident(term_tokens(child(inner, 1)?, "attribute")?)
        )),
        "Lambda" => {
            let params = child(inner, 0)?;
            let p = join_ident(term_tokens(child(params, 0)?, "parameter")?);
            Ok(format!("lambda {p}: {}", render_expr_at(child(inner, 1)?, 0)?))
        }
        "BinOp" => Ok(format!(
            "{} {} {}",
            render_expr_at(child(inner, 0)?, 2)?,
            op_symbol(child(inner, 1)?)?,
            render_expr_at(child(inner, 2)?, 3)?
        )),
        "Compare" => Ok(format!(
            "{} {} {}",
            render_expr_at(child(inner, 0)?, 2)?,
            op_symbol(child(inner, 1)?)?,
            render_expr_at(child(inner, 2)?, 2)?
        )),
        other => Err(LangError::Foreign(other.to_string())),
    }
}

fn render_flow(ast: &AstNode) -> Result<String, LangError> {
    if ast.ty_name() != "root" {
        return Err(LangError::Foreign(ast.ty_name().to_string()));
    }
    let part = |node: &AstNode| -> Result<String, LangError> {
        let channel = child(child(node, 0)?, 0)?;
        let func = child(child(node, 1)?, 0)?;
        Ok(format!("{}.{}", channel.ty_name(), func.ty_name()))
    };
    Ok(format!("IF {} THEN {}", part(child(ast, 0)?)?, part(child(ast, 1)?)?))
}

// ---------------------------------------------------------------------------
// Parsing (the renderer's inverse)
// ---------------------------------------------------------------------------

/// Parses surface code into an (unresolved) AST of the given language.
pub fn parse(code: &str, language: Language) -> Result<AstNode, LangError> {
    let toks = lex(code)?;
    match language {
        Language::MiniPy => {
            let mut p = Parser { toks, pos: 0 };
            let root = p.parse_root()?;
            p.expect_end()?;
            Ok(root)
        }
        Language::FlowDsl => parse_flow(&toks),
    }
}

const MINIPY_KEYWORDS: &[&str] = &["if", "else", "for", "in", "lambda", "end"];

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Punct(q)) if *q == p) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> Result<(), LangError> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            Err(LangError::Parse { at: self.pos, msg: format!("expected `{p}`") })
        }
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Ident(w)) if w == kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_end(&self) -> Result<(), LangError> {
        if self.pos == self.toks.len() {
            Ok(())
        } else {
            Err(LangError::Parse { at: self.pos, msg: "trailing tokens".into() })
        }
    }

    fn parse_root(&mut self) -> Result<AstNode, LangError> {
        let stmt = self.parse_stmt("body")?;
        Ok(AstNode::nonterminal("root", None).with_child(stmt))
    }

    fn parse_stmt(&mut self, label: &str) -> Result<AstNode, LangError> {
        let inner = if self.eat_keyword("if") {
            let test = self.parse_expr("test")?;
            self.expect_punct(":")?;
            let body = self.parse_suite("body")?;
            let orelse = if self.eat_keyword("else") {
                self.expect_punct(":")?;
                self.parse_suite("orelse")?
            } else {
                AstNode::nonterminal("stmt*", Some("orelse"))
            };
            if !self.eat_keyword("end") {
                return Err(LangError::Parse { at: self.pos, msg: "expected `end`".into() });
            }
            AstNode::nonterminal("If", Some("s")).with_child(test).with_child(body).with_child(orelse)
        } else if self.eat_keyword("for") {
            let target = self.parse_expr("target")?;
            if !self.eat_keyword("in") {
                return Err(LangError::Parse { at: self.pos, msg: "expected `in`".into() });
            }
            let iter = self.parse_expr("iter")?;
            self.expect_punct(":")?;
            let body = self.parse_suite("body")?;
            if !self.eat_keyword("end") {
                return Err(LangError::Parse { at: self.pos, msg: "expected `end`".into() });
            }
            AstNode::nonterminal("For", Some("s")).with_child(target).with_child(iter).with_child(body)
        } else {
            let first = self.parse_expr("value")?;
            if self.eat_punct("=") {
                let mut target = first;
                set_label(&mut target, "target");
                let value = self.parse_expr("value")?;
                AstNode::nonterminal("Assign", Some("s")).with_child(target).with_child(value)
            } else {
                AstNode::nonterminal("Expr", Some("s")).with_child(first)
            }
        };
        Ok(AstNode::nonterminal("stmt", Some(label)).with_child(inner))
    }

    fn parse_suite(&mut self, label: &str) -> Result<AstNode, LangError> {
        let mut list = AstNode::nonterminal("stmt*", Some(label));
        let mut idx = 0;
        loop {
            let stmt = self.parse_stmt(&format!("s{idx}"))?;
            list = list.with_child(stmt);
            idx += 1;
            if !self.eat_punct(";") {
                break;
            }
        }
        Ok(list)
    }

    fn parse_expr(&mut self, label: &str) -> Result<AstNode, LangError> {
        let node = self.parse_compare()?;
        Ok(wrap_expr(node, label))
    }

    /// One optional comparison over arithmetic operands; no chaining.
    fn parse_compare(&mut self) -> Result<AstNode, LangError> {
        let left = self.parse_arith()?;
        let op = match self.peek() {
            Some(Tok::Punct("<")) => Some("Lt"),
            Some(Tok::Punct(">")) => Some("Gt"),
            Some(Tok::Punct("==")) => Some("Eq"),
            Some(Tok::Punct("!=")) => Some("NotEq"),
            _ => None,
        };
        match op {
            None => Ok(left),
            Some(op_ty) => {
                self.pos += 1;
                let right = self.parse_arith()?;
                Ok(AstNode::nonterminal("Compare", Some("e"))
                    .with_child(wrap_expr(left, "left"))
                    .with_child(
                        AstNode::nonterminal("cmpop", Some("op"))
                            .with_child(AstNode::leaf(op_ty, Some("o"))),
                    )
                    .with_child(wrap_expr(right, "right")))
            }
        }
    }

    /// Flat left-associative arithmetic: a single precedence level, so the
    /// renderer parenthesizes any nested operator expression on the right.
    fn parse_arith(&mut self) -> Result<AstNode, LangError> {
        let mut node = self.parse_postfix()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Punct("+")) => Some("Add"),
                Some(Tok::Punct("-")) => Some("Sub"),
                Some(Tok::Punct("*")) => Some("Mult"),
                Some(Tok::Punct("/")) => Some("Div"),
                _ => None,
            };
            let Some(op_ty) = op else { break };
            self.pos += 1;
            let right = self.parse_postfix()?;
            node = AstNode::nonterminal("BinOp", Some("e"))
                .with_child(wrap_expr(node, "left"))
                .with_child(
                    AstNode::nonterminal("operator", Some("op"))
                        .with_child(AstNode::leaf(op_ty, Some("o"))),
                )
                .with_child(wrap_expr(right, "right"));
        }
        Ok(node)
    }

    fn parse_postfix(&mut self) -> Result<AstNode, LangError> {
        let mut node = self.parse_atom()?;
        loop {
            if self.eat_punct(".") {
                let attr = match self.bump() {
                    Some(Tok::Ident(name)) if !MINIPY_KEYWORDS.contains(&name.as_str()) => name,
                    _ => {
                        return Err(LangError::Parse {
                            at: self.pos,
                            msg: "expected attribute name".into(),
                        })
                    }
                };
                node = AstNode::nonterminal("Attribute", Some("e"))
                    .with_child(wrap_expr(node, "value"))
                    .with_child(AstNode::terminal("ident", Some("attr"), tokenize_terminal(&attr)));
            } else if self.eat_punct("(") {
                let mut args = AstNode::nonterminal("expr*", Some("args"));
                let mut kws = AstNode::nonterminal("kw*", Some("keywords"));
                let mut arg_idx = 0;
                let mut kw_idx = 0;
                if !self.eat_punct(")") {
                    loop {
                        // keyword argument: ident `=` value
                        let is_kw = matches!(
                            (self.peek(), self.toks.get(self.pos + 1)),
                            (Some(Tok::Ident(w)), Some(Tok::Punct("=")))
                                if !MINIPY_KEYWORDS.contains(&w.as_str())
                        );
                        if is_kw {
                            let Some(Tok::Ident(name)) = self.bump() else { unreachable!() };
                            self.expect_punct("=")?;
                            let value = self.parse_expr("value")?;
                            kws = kws.with_child(
                                AstNode::nonterminal("keyword", Some(&format!("k{kw_idx}")))
                                    .with_child(AstNode::terminal(
                                        "ident",
                                        Some("arg"),
                                        tokenize_terminal(&name),
                                    ))
                                    .with_child(value),
                            );
                            kw_idx += 1;
                        } else {
                            let arg = self.parse_expr(&format!("e{arg_idx}"))?;
                            args = args.with_child(arg);
                            arg_idx += 1;
                        }
                        if self.eat_punct(")") {
                            break;
                        }
                        self.expect_punct(",")?;
                    }
                }
                node = AstNode::nonterminal("Call", Some("e"))
                    .with_child(wrap_expr(node, "func"))
                    .with_child(args)
                    .with_child(kws);
            } else {
                break;
            }
        }
        Ok(node)
    }

    fn parse_atom(&mut self) -> Result<AstNode, LangError> {
        match self.bump() {
            Some(Tok::Punct("(")) => {
                let inner = self.parse_compare_or_lambda()?;
                self.expect_punct(")")?;
                Ok(inner)
            }
            Some(Tok::Ident(w)) if w == "lambda" => {
                let param = match self.bump() {
                    Some(Tok::Ident(name)) if !MINIPY_KEYWORDS.contains(&name.as_str()) => name,
                    _ => {
                        return Err(LangError::Parse {
                            at: self.pos,
                            msg: "expected lambda parameter".into(),
                        })
                    }
                };
                self.expect_punct(":")?;
                let body = self.parse_expr("body")?;
                Ok(AstNode::nonterminal("Lambda", Some("e"))
                    .with_child(
                        AstNode::nonterminal("params", Some("args")).with_child(
                            AstNode::terminal("ident", Some("p0"), tokenize_terminal(&param)),
                        ),
                    )
                    .with_child(body))
            }
            Some(Tok::Ident(w)) => {
                if MINIPY_KEYWORDS.contains(&w.as_str()) {
                    Err(LangError::Parse { at: self.pos, msg: format!("unexpected keyword `{w}`") })
                } else {
                    Ok(AstNode::nonterminal("Name", Some("e"))
                        .with_child(AstNode::terminal("ident", Some("id"), tokenize_terminal(&w))))
                }
            }
            Some(Tok::Number(n)) => Ok(AstNode::nonterminal("Num", Some("e"))
                .with_child(AstNode::terminal("number", Some("n"), tokenize_terminal(&n)))),
            Some(Tok::Str(parts)) => {
                if parts.is_empty() {
                    return Err(LangError::Parse {
                        at: self.pos,
                        msg: "empty string literal".into(),
                    });
                }
                Ok(AstNode::nonterminal("Str", Some("e"))
                    .with_child(AstNode::terminal("string", Some("s"), parts)))
            }
            Some(Tok::Placeholder(p)) => Ok(AstNode::nonterminal("Str", Some("e"))
                .with_child(AstNode::terminal("string", Some("s"), vec![p]))),
            other => Err(LangError::Parse { at: self.pos, msg: format!("unexpected token {other:?}") }),
        }
    }

    /// Inside parentheses the full expression grammar (including lambda) is
    /// allowed; lambda is otherwise handled at atom level.
    fn parse_compare_or_lambda(&mut self) -> Result<AstNode, LangError> {
        self.parse_compare()
    }
}

fn wrap_expr(inner: AstNode, label: &str) -> AstNode {
    if inner.ty_name() == "expr" {
        let mut node = inner;
        set_label(&mut node, label);
        node
    } else {
        AstNode::nonterminal("expr", Some(label)).with_child(inner)
    }
}

fn set_label(node: &mut AstNode, new_label: &str) {
    match node {
        AstNode::NonTerminal { label, .. }
        | AstNode::Terminal { label, .. }
        | AstNode::Leaf { label, .. } => *label = Some(new_label.to_string()),
    }
}

fn parse_flow(toks: &[Tok]) -> Result<AstNode, LangError> {
    let expect_ident = |idx: usize, what: &str| -> Result<String, LangError> {
        match toks.get(idx) {
            Some(Tok::Ident(w)) => Ok(w.clone()),
            _ => Err(LangError::Parse { at: idx, msg: format!("expected {what}") }),
        }
    };
    let expect_dot = |idx: usize| -> Result<(), LangError> {
        match toks.get(idx) {
            Some(Tok::Punct(".")) => Ok(()),
            _ => Err(LangError::Parse { at: idx, msg: "expected `.`".into() }),
        }
    };
    if expect_ident(0, "`IF`")? != "IF" {
        return Err(LangError::Parse { at: 0, msg: "expected `IF`".into() });
    }
    let t_chan = expect_ident(1, "trigger channel")?;
    expect_dot(2)?;
    let t_func = expect_ident(3, "trigger function")?;
    if expect_ident(4, "`THEN`")? != "THEN" {
        return Err(LangError::Parse { at: 4, msg: "expected `THEN`".into() });
    }
    let a_chan = expect_ident(5, "action channel")?;
    expect_dot(6)?;
    let a_func = expect_ident(7, "action function")?;
    if toks.len() != 8 {
        return Err(LangError::Parse { at: 8, msg: "trailing tokens".into() });
    }
    let part = |ty: &str, chan: &str, func: &str| {
        AstNode::nonterminal(ty, Some(ty))
            .with_child(
                AstNode::nonterminal("channel", Some("channel"))
                    .with_child(AstNode::nonterminal(chan, Some("c"))),
            )
            .with_child(
                AstNode::nonterminal("func", Some("function"))
                    .with_child(AstNode::nonterminal(func, Some("f"))),
            )
    };
    Ok(AstNode::nonterminal("root", None)
        .with_child(part("trigger", &t_chan, &t_func))
        .with_child(part("action", &a_chan, &a_func)))
}
