//! Syntax-driven neural code generation.
//!
//! `synforge` transduces natural-language descriptions into abstract syntax
//! trees by sequentially predicting grammar actions. Because every decoding
//! step is constrained to the actions that are legal for the current frontier
//! node, every complete output is well-formed by construction; trees are then
//! rendered to surface code by a deterministic mini-language renderer.
//!
//! The crate is organized around the derivation pipeline:
//!
//! * [`grammar`] — node types, production rules, grammar induction and
//!   unary-closure extraction;
//! * [`ast`] — the tree data model, structural equality and serialization;
//! * [`minilang`] — renderers and parsers for the bundled MiniPy and FlowDSL
//!   languages;
//! * [`transition`] — the derivation automaton: legal actions, action
//!   application and oracle action sequences;
//! * [`tensor`] — a minimal reverse-mode differentiation stack (dense
//!   tensors, LSTM cell, one-hidden-layer scorers);
//! * [`model`] — the encoder/decoder with attention, parent feeding and the
//!   generate-or-copy token head;
//! * [`train`] — the optimizer loop, batching and checkpoint I/O;
//! * [`infer`] — beam-search and greedy decoding;
//! * [`data`] — dataset loading, canonicalization and vocabularies;
//! * [`evalx`] — exact-match, BLEU-4 and DSL tree metrics.
//!
//! The `examples/` directory contains one runnable walk-through per major
//! capability; `synforge --help` lists the equivalent batch commands.

pub mod ast;
pub mod cli;
pub mod data;
pub mod evalx;
pub mod fixtures;
pub mod grammar;
pub mod infer;
pub mod minilang;
pub mod model;
pub mod tensor;
pub mod train;
pub mod transition;

pub use ast::AstNode;
pub use grammar::{Grammar, NodeKind, NodeTypeId, ProdId, Production};
pub use minilang::Language;
pub use transition::{Action, DerivationState};
