//! Dataset ingestion: canonicalization of descriptions, placeholder
//! restoration, vocabulary construction and JSON-lines corpus loading.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ast::{resolve_rules, AstNode};
use crate::grammar::Grammar;
use crate::minilang::{parse, Language};
use crate::model::{CLOSE_TOKEN_ID, SRC_UNK_ID, UNK_TOKEN_ID};
use crate::transition::{bind_oracle, oracle_actions, BoundStep, OracleAction};

pub const CLOSE_TOKEN: &str = "</n>";
pub const UNK_TOKEN: &str = "<unk>";

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: malformed JSON: {msg}")]
    MalformedLine { line: usize, msg: String },
    #[error("unknown placeholder index {0}")]
    UnknownPlaceholder(usize),
    #[error("empty dataset")]
    Empty,
}

/// Indexed quoted strings extracted from a description.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlaceholderTable {
    pub values: Vec<String>,
}

impl PlaceholderTable {
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct Canonicalized {
    pub tokens: Vec<String>,
    pub table: PlaceholderTable,
    /// Unbalanced-quote diagnostics; the offending span is left verbatim.
    pub warnings: Vec<String>,
}

fn placeholder_token(idx: usize) -> String {
    format!("_STR:{idx}_")
}

fn is_placeholder_token(tok: &str) -> Option<usize> {
    tok.strip_prefix("_STR:")
        .and_then(|rest| rest.strip_suffix('_'))
        .and_then(|digits| digits.parse().ok())
}

/// Replaces quoted spans with indexed placeholders and tokenizes.
///
/// Quoted spans (single or double quotes, no escapes, non-greedy) become
/// `_STR:i_` tokens. Tokens are whitespace-separated with the punctuation
/// `()[],:='"` detached; dotted references stay whole and additionally
/// append their dot-separated parts, so the pointer network can copy either
/// the full reference or its components. No lowercasing is applied.
pub fn canonicalize(description: &str) -> Canonicalized {
    let mut table = PlaceholderTable::default();
    let mut warnings = Vec::new();
    let chars: Vec<char> = description.chars().collect();
    let mut rewritten = String::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == '\'' || c == '"' {
            match chars[i + 1..].iter().position(|&d| d == c) {
                Some(offset) => {
                    let value: String = chars[i + 1..i + 1 + offset].iter().collect();
                    let idx = table.values.len();
                    table.values.push(value);
                    rewritten.push(' ');
                    rewritten.push_str(&placeholder_token(idx));
                    rewritten.push(' ');
                    i += offset + 2;
                }
                None => {
                    warnings.push(format!("unbalanced quote at character {i}"));
                    rewritten.push(c);
                    i += 1;
                }
            }
        } else {
            rewritten.push(c);
            i += 1;
        }
    }

    let mut tokens = Vec::new();
    for word in rewritten.split_whitespace() {
        for piece in detach_punctuation(word) {
            let dotted: Vec<&str> = piece.split('.').collect();
            let has_expansion = dotted.len() > 1 && dotted.iter().all(|p| !p.is_empty());
            tokens.push(piece.clone());
            if has_expansion && is_placeholder_token(&piece).is_none() {
                tokens.extend(dotted.into_iter().map(str::to_string));
            }
        }
    }
    Canonicalized { tokens, table, warnings }
}

/// Splits out `()[],:='"` as their own tokens; placeholders stay whole, dots
/// stay inside tokens except a trailing sentence period.
fn detach_punctuation(word: &str) -> Vec<String> {
    if is_placeholder_token(word).is_some() {
        return vec![word.to_string()];
    }
    const DETACH: &[char] = &['(', ')', '[', ']', ',', ':', '=', '\'', '"'];
    let mut out = Vec::new();
    let mut current = String::new();
    for c in word.chars() {
        if DETACH.contains(&c) {
            if !current.is_empty() {
                out.push(std::mem::take(&mut current));
            }
            out.push(c.to_string());
        } else {
            current.push(c);
        }
    }
    if !current.is_empty() {
        out.push(current);
    }
    // Sentence-final period: "localedir." is the word plus punctuation, while
    // "self.makekey" is one dotted reference.
    let mut expanded = Vec::new();
    for piece in out {
        if piece.len() > 1 && piece.ends_with('.') {
            expanded.push(piece[..piece.len() - 1].to_string());
            expanded.push(".".to_string());
        } else {
            expanded.push(piece);
        }
    }
    expanded
}

/// Replaces every `_STR:i_` in rendered code with the quoted original value.
pub fn restore_placeholders(code: &str, table: &PlaceholderTable) -> Result<String, DataError> {
    let mut out = String::new();
    let mut rest = code;
    while let Some(pos) = rest.find("_STR:") {
        out.push_str(&rest[..pos]);
        let tail = &rest[pos..];
        let end = tail
            .char_indices()
            .skip(5)
            .find(|(_, c)| !c.is_ascii_digit())
            .filter(|(_, c)| *c == '_')
            .map(|(i, _)| i);
        match end {
            Some(end) if end > 5 => {
                let idx: usize = tail[5..end].parse().expect("digits only");
                let value = table
                    .values
                    .get(idx)
                    .ok_or(DataError::UnknownPlaceholder(idx))?;
                out.push('\'');
                out.push_str(value);
                out.push('\'');
                rest = &tail[end + 1..];
            }
            _ => {
                out.push_str("_STR:");
                rest = &tail[5..];
            }
        }
    }
    out.push_str(rest);
    Ok(out)
}

/// Substitutes quoted literals that match canonicalized description values
/// with their placeholder tokens, aligning code and description.
pub fn apply_placeholders_to_code(code: &str, table: &PlaceholderTable) -> String {
    let mut out = code.to_string();
    for (idx, value) in table.values.iter().enumerate() {
        let tok = placeholder_token(idx);
        out = out.replace(&format!("'{value}'"), &tok);
        out = out.replace(&format!("\"{value}\""), &tok);
    }
    out
}

// ---------------------------------------------------------------------------
// Vocabulary
// ---------------------------------------------------------------------------

/// Source and terminal-token vocabularies with frequency thresholds.
///
/// Terminal row 0 is the close token and row 1 the unknown marker; source
/// row 0 is the unknown marker. Words are ordered by descending frequency,
/// then lexicographically, so construction is independent of input order.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Vocab {
    pub source_words: Vec<String>,
    pub terminal_words: Vec<String>,
    pub d_source: usize,
    pub d_terminal: usize,
    #[serde(skip)]
    source_index: HashMap<String, usize>,
    #[serde(skip)]
    terminal_index: HashMap<String, usize>,
}

fn ranked_words(freq: HashMap<String, usize>, d: usize) -> Vec<String> {
    let mut entries: Vec<(String, usize)> =
        freq.into_iter().filter(|(_, count)| *count >= d).collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    entries.into_iter().map(|(w, _)| w).collect()
}

impl Vocab {
    pub fn build(examples: &[RawExample], d_source: usize, d_terminal: usize) -> Vocab {
        assert!(d_source >= 1 && d_terminal >= 1, "frequency thresholds must be >= 1");
        let mut src_freq: HashMap<String, usize> = HashMap::new();
        let mut term_freq: HashMap<String, usize> = HashMap::new();
        for ex in examples {
            for tok in &ex.src_tokens {
                *src_freq.entry(tok.clone()).or_insert(0) += 1;
            }
            for op in &ex.oracle {
                if let OracleAction::Token(tok) = op {
                    *term_freq.entry(tok.clone()).or_insert(0) += 1;
                }
            }
        }
        let mut source_words = vec![UNK_TOKEN.to_string()];
        source_words.extend(ranked_words(src_freq, d_source));
        let mut terminal_words = vec![CLOSE_TOKEN.to_string(), UNK_TOKEN.to_string()];
        terminal_words.extend(ranked_words(term_freq, d_terminal));
        let mut vocab = Vocab {
            source_words,
            terminal_words,
            d_source,
            d_terminal,
            source_index: HashMap::new(),
            terminal_index: HashMap::new(),
        };
        vocab.rebuild_index();
        vocab
    }

    pub fn rebuild_index(&mut self) {
        self.source_index =
            self.source_words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        self.terminal_index =
            self.terminal_words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
    }

    pub fn lookup_source(&self, word: &str) -> Option<usize> {
        self.source_index.get(word).copied()
    }

    pub fn lookup_terminal(&self, word: &str) -> Option<usize> {
        self.terminal_index.get(word).copied()
    }

    /// Content size excludes the reserved close/unknown rows.
    pub fn terminal_content_size(&self) -> usize {
        self.terminal_words.len() - 2
    }

    pub fn encode_source(&self, tokens: &[String]) -> (Vec<usize>, Vec<bool>) {
        let mut ids = Vec::with_capacity(tokens.len());
        let mut oov = Vec::with_capacity(tokens.len());
        for tok in tokens {
            match self.lookup_source(tok) {
                Some(id) => {
                    ids.push(id);
                    oov.push(false);
                }
                None => {
                    ids.push(SRC_UNK_ID);
                    oov.push(true);
                }
            }
        }
        (ids, oov)
    }

    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        for w in &self.source_words {
            hasher.update(w.as_bytes());
            hasher.update([0]);
        }
        hasher.update([1]);
        for w in &self.terminal_words {
            hasher.update(w.as_bytes());
            hasher.update([0]);
        }
        hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

// ---------------------------------------------------------------------------
// Dataset loading
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize, Serialize)]
pub struct DatasetLine {
    pub id: String,
    pub nl: String,
    pub code: String,
}

/// A loaded example: canonicalized description, gold tree and its oracle
/// action sequence.
#[derive(Clone, Debug)]
pub struct RawExample {
    pub id: String,
    pub nl: String,
    pub code: String,
    pub src_tokens: Vec<String>,
    pub table: PlaceholderTable,
    /// Gold AST with production ids resolved.
    pub ast: AstNode,
    pub oracle: Vec<OracleAction>,
}

#[derive(Debug)]
pub struct LoadReport {
    pub examples: Vec<RawExample>,
    /// (line number, example id, reason)
    pub skipped: Vec<(usize, String, String)>,
}

/// Loads a JSON-lines dataset, parsing each code field with the bundled
/// mini-language parser. Examples whose code does not parse or is not
/// derivable under the grammar are skipped and reported.
pub fn load_dataset(
    text: &str,
    grammar: &Grammar,
    language: Language,
) -> Result<LoadReport, DataError> {
    let mut examples = Vec::new();
    let mut skipped = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: DatasetLine = serde_json::from_str(line)
            .map_err(|e| DataError::MalformedLine { line: line_no, msg: e.to_string() })?;
        let canon = canonicalize(&parsed.nl);
        let code_canonical = apply_placeholders_to_code(&parsed.code, &canon.table);
        let tree = match parse(&code_canonical, language) {
            Ok(t) => t,
            Err(e) => {
                skipped.push((line_no, parsed.id, format!("unparseable code: {e}")));
                continue;
            }
        };
        let (ast, oracle) = match resolve_rules(&tree, grammar)
            .map_err(|e| e.to_string())
            .and_then(|ast| {
                oracle_actions(&ast, grammar)
                    .map(|oracle| (ast, oracle))
                    .map_err(|e| e.to_string())
            }) {
            Ok(pair) => pair,
            Err(reason) => {
                skipped.push((line_no, parsed.id, format!("not derivable: {reason}")));
                continue;
            }
        };
        examples.push(RawExample {
            id: parsed.id,
            nl: parsed.nl,
            code: parsed.code,
            src_tokens: canon.tokens,
            table: canon.table,
            ast,
            oracle,
        });
    }
    Ok(LoadReport { examples, skipped })
}

/// An example bound to a vocabulary, ready for training or evaluation.
#[derive(Clone, Debug)]
pub struct PreparedExample {
    pub id: String,
    pub src_tokens: Vec<String>,
    pub src_ids: Vec<usize>,
    pub src_oov: Vec<bool>,
    pub steps: Vec<BoundStep>,
    pub ast: AstNode,
    pub table: PlaceholderTable,
    /// Gold surface code with placeholders restored (the exact-match target).
    pub gold_code: String,
}

/// Binds examples against a vocabulary. Gold tokens with no vocabulary row
/// and no copyable position fall back to the unknown row so training totals
/// stay finite.
pub fn prepare_examples(
    examples: &[RawExample],
    vocab: &Vocab,
    grammar: &Grammar,
) -> Vec<PreparedExample> {
    examples
        .iter()
        .map(|ex| {
            let (src_ids, src_oov) = vocab.encode_source(&ex.src_tokens);
            let mut steps = bind_oracle(
                &ex.oracle,
                grammar,
                |tok| vocab.lookup_terminal(tok),
                &ex.src_tokens,
            )
            .expect("oracle sequences replay by construction");
            for step in &mut steps {
                if let crate::transition::BoundTarget::Token { vocab_id, copy_positions, .. } =
                    &mut step.target
                {
                    if vocab_id.is_none() && copy_positions.is_empty() {
                        *vocab_id = Some(UNK_TOKEN_ID);
                    }
                }
            }
            PreparedExample {
                id: ex.id.clone(),
                src_tokens: ex.src_tokens.clone(),
                src_ids,
                src_oov,
                steps,
                ast: ex.ast.clone(),
                table: ex.table.clone(),
                gold_code: ex.code.clone(),
            }
        })
        .collect()
}

const _: () = {
    assert!(CLOSE_TOKEN_ID == 0);
    assert!(UNK_TOKEN_ID == 1);
};

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quoted_strings_become_indexed_placeholders() {
        let canon = canonicalize("verbose_name is a string 'cache entry'");
        assert_eq!(canon.table.values, vec!["cache entry".to_string()]);
        assert_eq!(canon.tokens.last().unwrap(), "_STR:0_");
        assert!(canon.warnings.is_empty());
        // Dataset-style double quotes work the same way.
        let canon = canonicalize("set it to \"x y\" and 'z'");
        assert_eq!(canon.table.values, vec!["x y".to_string(), "z".to_string()]);
    }

    #[test]
    fn dotted_references_append_their_parts() {
        let canon = canonicalize("call method self.makekey");
        let toks = &canon.tokens;
        let pos = toks.iter().position(|t| t == "self.makekey").unwrap();
        assert_eq!(&toks[pos..pos + 3], &["self.makekey", "self", "makekey"]);
    }

    #[test]
    fn plain_description_is_untouched() {
        let canon = canonicalize("sort my_list in descending order");
        assert_eq!(canon.tokens, vec!["sort", "my_list", "in", "descending", "order"]);
        assert!(canon.table.is_empty());
    }

    #[test]
    fn unbalanced_quote_warns_and_stays_verbatim() {
        let canon = canonicalize("it's unbalanced");
        assert_eq!(canon.warnings.len(), 1);
        assert!(canon.tokens.iter().any(|t| t.contains("s")));
        assert!(canon.table.is_empty());
    }

    #[test]
    fn punctuation_is_detached_but_placeholders_stay_whole() {
        let canon = canonicalize("call f(x, 'a b') now.");
        assert!(canon.tokens.contains(&"(".to_string()));
        assert!(canon.tokens.contains(&",".to_string()));
        assert!(canon.tokens.contains(&"_STR:0_".to_string()));
        assert!(canon.tokens.contains(&".".to_string()));
        assert!(canon.tokens.contains(&"now".to_string()));
    }

    #[test]
    fn restore_is_inverse_of_substitution() {
        let table = PlaceholderTable { values: vec!["cache entry".into()] };
        let code = "x = _STR:0_";
        assert_eq!(restore_placeholders(code, &table).unwrap(), "x = 'cache entry'");
        assert_eq!(restore_placeholders("y = 1", &table).unwrap(), "y = 1");
    }

    #[test]
    fn unknown_placeholder_index_is_an_error() {
        let table = PlaceholderTable { values: vec!["a".into()] };
        assert!(matches!(
            restore_placeholders("x = _STR:7_", &table),
            Err(DataError::UnknownPlaceholder(7))
        ));
    }

    #[test]
    fn vocab_thresholds_drop_rare_words() {
        let mk = |nl: &str, toks: Vec<&str>| RawExample {
            id: "t".into(),
            nl: nl.into(),
            code: String::new(),
            src_tokens: toks.iter().map(|s| s.to_string()).collect(),
            table: PlaceholderTable::default(),
            ast: AstNode::nonterminal("root", None),
            oracle: vec![
                OracleAction::Token("foo".into()),
                OracleAction::Token("bar".into()),
                OracleAction::Close,
            ],
        };
        let examples = vec![mk("a", vec!["a", "b"]), mk("b", vec!["a"])];
        // d = 1 keeps everything.
        let v1 = Vocab::build(&examples, 1, 1);
        assert!(v1.lookup_source("b").is_some());
        // "foo" appears twice (once per example); with d = 3 it is unknown.
        let v3 = Vocab::build(&examples, 1, 3);
        assert!(v3.lookup_terminal("foo").is_none());
        assert_eq!(v3.terminal_content_size(), 0);
        assert_eq!(v3.terminal_words[CLOSE_TOKEN_ID], CLOSE_TOKEN);
        assert_eq!(v3.terminal_words[UNK_TOKEN_ID], UNK_TOKEN);
    }

    #[test]
    fn vocab_is_order_independent() {
        let mk = |toks: Vec<&str>| RawExample {
            id: "t".into(),
            nl: String::new(),
            code: String::new(),
            src_tokens: toks.iter().map(|s| s.to_string()).collect(),
            table: PlaceholderTable::default(),
            ast: AstNode::nonterminal("root", None),
            oracle: vec![],
        };
        let a = vec![mk(vec!["x", "y"]), mk(vec!["y", "z"])];
        let b = vec![mk(vec!["y", "z"]), mk(vec!["x", "y"])];
        assert_eq!(Vocab::build(&a, 1, 1).source_words, Vocab::build(&b, 1, 1).source_words);
        assert_eq!(Vocab::build(&a, 1, 1).hash(), Vocab::build(&b, 1, 1).hash());
    }

    #[test]
    fn well_formed_dataset_loads_every_line() {
        let g = Language::MiniPy.grammar();
        let text = concat!(
            r#"{"id":"1","nl":"substitute 5 for x","code":"x = 5"}"#,
            "\n",
            r#"{"id":"2","nl":"call f with y","code":"f(y)"}"#,
            "\n",
            r#"{"id":"3","nl":"x is the string 'a b'","code":"x = 'a b'"}"#,
            "\n",
        );
        let report = load_dataset(text, &g, Language::MiniPy).unwrap();
        assert_eq!(report.examples.len(), 3);
        assert!(report.skipped.is_empty());
        // The quoted string is canonicalized on both sides.
        let ex = &report.examples[2];
        assert!(ex.src_tokens.contains(&"_STR:0_".to_string()));
        assert!(ex
            .oracle
            .iter()
            .any(|op| matches!(op, OracleAction::Token(t) if t == "_STR:0_")));
    }

    #[test]
    fn unparseable_code_is_skipped_with_reason() {
        let g = Language::MiniPy.grammar();
        let text = concat!(
            r#"{"id":"1","nl":"ok","code":"x = 5"}"#,
            "\n",
            r#"{"id":"2","nl":"bad","code":"x = = ="}"#,
            "\n",
        );
        let report = load_dataset(text, &g, Language::MiniPy).unwrap();
        assert_eq!(report.examples.len(), 1);
        assert_eq!(report.skipped.len(), 1);
        assert_eq!(report.skipped[0].1, "2");
    }

    #[test]
    fn malformed_json_reports_line_number() {
        let g = Language::MiniPy.grammar();
        let text = "{\"id\":\"1\",\"nl\":\"ok\",\"code\":\"x = 5\"}\nnot json\n";
        match load_dataset(text, &g, Language::MiniPy) {
            Err(DataError::MalformedLine { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected malformed line error, got {other:?}"),
        }
    }

    #[test]
    fn canonicalize_restore_round_trips_through_render() {
        let g = Language::MiniPy.grammar();
        let line = r#"{"id":"1","nl":"name is the string 'cache entry'","code":"name = 'cache entry'"}"#;
        let report = load_dataset(line, &g, Language::MiniPy).unwrap();
        let ex = &report.examples[0];
        let rendered = crate::minilang::render(&ex.ast, Language::MiniPy).unwrap();
        let restored = restore_placeholders(&rendered, &ex.table).unwrap();
        assert_eq!(restored, ex.code);
    }

    #[test]
    fn preparation_falls_back_to_unknown_for_routeless_tokens() {
        let g = Language::MiniPy.grammar();
        let line = r#"{"id":"1","nl":"nothing in common","code":"zzz_unique(qqq_rare)"}"#;
        let report = load_dataset(line, &g, Language::MiniPy).unwrap();
        // Empty-corpus vocab: every code token is unknown and not copyable.
        let vocab = Vocab::build(&[], 1, 1);
        let prepared = prepare_examples(&report.examples, &vocab, &g);
        for step in &prepared[0].steps {
            if let crate::transition::BoundTarget::Token { vocab_id, .. } = &step.target {
                assert_eq!(*vocab_id, Some(UNK_TOKEN_ID));
            }
        }
    }
}
