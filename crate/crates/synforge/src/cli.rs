//! Batch command-line interface wiring the library end to end.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on data errors. Errors are
//! printed to standard error with a machine-readable `E:<code>:` prefix.
//! Settings resolve as flags over config-file entries over defaults; the
//! config file is flat `key = value` text. `SYNFORGE_THREADS` caps worker
//! parallelism.

use std::collections::HashMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::ast::resolve_rules;
use crate::data::{
    canonicalize, load_dataset, prepare_examples, restore_placeholders, Vocab,
};
use crate::evalx::{build_report, dsl_accuracy, exact_match, PerExample};
use crate::fixtures;
use crate::grammar::{grammar_stats, induce_grammar, load_grammar, unary_closure, Grammar};
use crate::infer::{beam_search, DecodeInput, DecodeOpts};
use crate::minilang::{parse, render, surface_tokens, Language};
use crate::model::Model;
use crate::train::{
    self, load_checkpoint, save_checkpoint, train as run_train, TrainConfig,
};
use crate::transition::{action_records, bind_oracle};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }

    pub fn message(&self) -> String {
        match self {
            CliError::Usage(msg) => format!("E:usage:{msg}"),
            CliError::Data(msg) => format!("E:data:{msg}"),
        }
    }
}

fn data_err(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

#[derive(Parser, Debug)]
#[command(
    name = "synforge",
    about = "Syntax-driven neural code generation: grammar induction, training, decoding, evaluation",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(clap::Args, Debug, Default, Clone)]
struct CommonOpts {
    /// Flat key=value config file; flags take precedence over its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed behind all randomness.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Induce a grammar from the parsed code of a dataset.
    InduceGrammar {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_parser = parse_language)]
        language: Language,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Add unary-closure rules mined from a corpus to a grammar.
    Closure {
        #[arg(long)]
        grammar: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_parser = parse_language)]
        language: Language,
        /// Minimum chain frequency.
        #[arg(long)]
        closure_k: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Emit oracle action sequences as JSON lines.
    Oracle {
        #[arg(long)]
        grammar: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_parser = parse_language)]
        language: Language,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Grammar and corpus statistics (productions, node types, avg actions).
    Stats {
        #[arg(long)]
        grammar: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_parser = parse_language)]
        language: Language,
        /// Also report the effect of unary closure at this threshold.
        #[arg(long)]
        closure_k: Option<usize>,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Train a model and write a checkpoint (plus `<out>.vocab.json`).
    Train {
        #[arg(long)]
        grammar: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        dev: Option<PathBuf>,
        #[arg(long, value_parser = parse_language)]
        language: Language,
        #[arg(long)]
        out: PathBuf,
        /// JSON-lines training log destination.
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long)]
        dropout: Option<f64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        /// Extract unary closures (threshold from --closure-k) before training.
        #[arg(long)]
        closure: bool,
        #[arg(long)]
        closure_k: Option<usize>,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Beam-decode inputs into code.
    Decode {
        #[arg(long)]
        grammar: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        beam: Option<usize>,
        #[arg(long)]
        max_steps: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Score predictions against a gold dataset.
    Eval {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long, value_parser = parse_language)]
        language: Language,
        #[arg(long)]
        grammar: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Finite-difference check of every parameter group.
    Gradcheck {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Regenerate the bundled fixture corpora and grammars.
    Fixtures {
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
}

fn parse_language(s: &str) -> Result<Language, String> {
    Language::from_name(s).ok_or_else(|| format!("unknown language `{s}` (minipy|flowdsl)"))
}

/// Builds the global thread pool honoring `SYNFORGE_THREADS`.
pub fn init_threads() {
    if let Ok(raw) = std::env::var("SYNFORGE_THREADS") {
        if let Ok(n) = raw.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

/// Entry point: returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not usage errors.
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            eprintln!("E:usage:{e}");
            return 1;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.message());
            e.exit_code()
        }
    }
}

// ---------------------------------------------------------------------------
// Config file handling
// ---------------------------------------------------------------------------

fn read_config(path: Option<&Path>) -> Result<HashMap<String, String>, CliError> {
    let mut map = HashMap::new();
    let Some(path) = path else { return Ok(map) };
    let text = fs::read_to_string(path).map_err(data_err)?;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Usage(format!("config line {}: expected key = value", idx + 1))
        })?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn config_get<T: std::str::FromStr>(
    map: &HashMap<String, String>,
    key: &str,
) -> Result<Option<T>, CliError> {
    match map.get(key) {
        None => Ok(None),
        Some(raw) => raw
            .parse::<T>()
            .map(Some)
            .map_err(|_| CliError::Usage(format!("config key `{key}`: bad value `{raw}`"))),
    }
}

/// Flags > config file > defaults.
fn resolve_train_config(
    map: &HashMap<String, String>,
    seed: Option<u64>,
    dropout: Option<f64>,
    epochs: Option<usize>,
    batch: Option<usize>,
    lr: Option<f64>,
    closure: bool,
    closure_k: Option<usize>,
) -> Result<TrainConfig, CliError> {
    let mut config = TrainConfig::default();
    let dims = &mut config.dims;
    if let Some(v) = config_get::<usize>(map, "embed")? {
        dims.embed = v;
    }
    if let Some(v) = config_get::<usize>(map, "node_type_embed")? {
        dims.node_type_embed = v;
    }
    if let Some(v) = config_get::<usize>(map, "rnn")? {
        dims.rnn = v;
    }
    if let Some(v) = config_get::<usize>(map, "scorer_hidden")? {
        dims.scorer_hidden = v;
    }
    if let Some(v) = config_get::<bool>(map, "masked_applyrule")? {
        dims.masked_applyrule = v;
    }
    if let Some(v) = config_get::<f64>(map, "dropout")? {
        dims.dropout = v;
    }
    if let Some(v) = config_get::<usize>(map, "dev_beam")? {
        config.dev_beam = v;
    }
    if let Some(v) = config_get::<usize>(map, "batch")? {
        config.batch_size = v;
    }
    if let Some(v) = config_get::<usize>(map, "epochs")? {
        config.max_epochs = v;
    }
    if let Some(v) = config_get::<usize>(map, "patience")? {
        config.patience = v;
    }
    if let Some(v) = config_get::<u64>(map, "seed")? {
        config.seed = v;
    }
    if let Some(v) = config_get::<f64>(map, "lr")? {
        config.learning_rate = v;
    }
    if let Some(v) = config_get::<bool>(map, "closure")? {
        config.unary_closure = v;
    }
    if let Some(v) = config_get::<usize>(map, "closure_k")? {
        config.closure_k = v;
    }
    if let Some(v) = config_get::<usize>(map, "dev_every")? {
        config.dev_every = v;
    }
    if let Some(v) = config_get::<f64>(map, "stop_at_dev_acc")? {
        config.stop_at_dev_acc = Some(v);
    }
    if let Some(v) = config_get::<usize>(map, "d_source")? {
        config.d_source = v;
    }
    if let Some(v) = config_get::<usize>(map, "d_terminal")? {
        config.d_terminal = v;
    }

    if let Some(v) = seed {
        config.seed = v;
    }
    if let Some(v) = dropout {
        config.dims.dropout = v;
    }
    if let Some(v) = epochs {
        config.max_epochs = v;
    }
    if let Some(v) = batch {
        config.batch_size = v;
    }
    if let Some(v) = lr {
        config.learning_rate = v;
    }
    if closure {
        config.unary_closure = true;
    }
    if let Some(v) = closure_k {
        config.closure_k = v;
    }
    Ok(config)
}

// ---------------------------------------------------------------------------
// Shared loading helpers
// ---------------------------------------------------------------------------

fn read_grammar(path: &Path) -> Result<Grammar, CliError> {
    let text = fs::read_to_string(path).map_err(data_err)?;
    load_grammar(&text).map_err(data_err)
}

fn read_dataset(
    path: &Path,
    grammar: &Grammar,
    language: Language,
) -> Result<crate::data::LoadReport, CliError> {
    let text = fs::read_to_string(path).map_err(data_err)?;
    let report = load_dataset(&text, grammar, language).map_err(data_err)?;
    for (line, id, reason) in &report.skipped {
        eprintln!("W:skip: line {line} ({id}): {reason}");
    }
    if !report.skipped.is_empty() {
        eprintln!("W:skip: {} example(s) skipped", report.skipped.len());
    }
    Ok(report)
}

#[derive(Debug, Deserialize)]
struct DecodeLine {
    id: String,
    nl: String,
    #[allow(dead_code)]
    #[serde(default)]
    code: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub rank: usize,
    pub score: f64,
    pub actions: Vec<crate::transition::ActionRecord>,
    pub code: String,
    pub complete: bool,
}

// ---------------------------------------------------------------------------
// Command bodies
// ---------------------------------------------------------------------------

fn dispatch(cmd: Cmd) -> Result<(), CliError> {
    match cmd {
        Cmd::InduceGrammar { data, language, out, common } => {
            let _ = read_config(common.config.as_deref())?;
            let text = fs::read_to_string(&data).map_err(data_err)?;
            let mut trees = Vec::new();
            for (idx, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let parsed: crate::data::DatasetLine = serde_json::from_str(line)
                    .map_err(|e| CliError::Data(format!("line {}: {e}", idx + 1)))?;
                let canon = canonicalize(&parsed.nl);
                let code = crate::data::apply_placeholders_to_code(&parsed.code, &canon.table);
                match parse(&code, language) {
                    Ok(tree) => trees.push(tree),
                    Err(e) => eprintln!("W:skip: line {} ({}): {e}", idx + 1, parsed.id),
                }
            }
            let grammar = induce_grammar(&trees, language.root_type_name()).map_err(data_err)?;
            fs::write(&out, grammar.to_text()).map_err(data_err)?;
            println!(
                "induced grammar: {} productions, {} node types -> {}",
                grammar.productions.len(),
                grammar.node_types.len(),
                out.display()
            );
            Ok(())
        }
        Cmd::Closure { grammar, data, language, closure_k, out, common } => {
            let map = read_config(common.config.as_deref())?;
            let k = closure_k
                .or(config_get::<usize>(&map, "closure_k")?)
                .unwrap_or(TrainConfig::default().closure_k);
            let g = read_grammar(&grammar)?;
            let report = read_dataset(&data, &g, language)?;
            let seqs: Vec<_> = report.examples.iter().map(|e| e.oracle.clone()).collect();
            let closed = unary_closure(&g, &seqs, k);
            fs::write(&out, closed.to_text()).map_err(data_err)?;
            println!(
                "closure at k={k}: {} -> {} productions -> {}",
                g.productions.len(),
                closed.productions.len(),
                out.display()
            );
            Ok(())
        }
        Cmd::Oracle { grammar, data, language, out, common } => {
            let _ = read_config(common.config.as_deref())?;
            let g = read_grammar(&grammar)?;
            let report = read_dataset(&data, &g, language)?;
            // Threshold 1 so every gold token has a vocabulary row and the
            // serialized records carry integer arguments.
            let vocab = Vocab::build(&report.examples, 1, 1);
            let mut lines = String::new();
            for ex in &report.examples {
                let steps = bind_oracle(
                    &ex.oracle,
                    &g,
                    |tok| vocab.lookup_terminal(tok),
                    &ex.src_tokens,
                )
                .map_err(data_err)?;
                for record in action_records(&steps) {
                    #[derive(Serialize)]
                    struct Line<'a> {
                        id: &'a str,
                        #[serde(flatten)]
                        record: crate::transition::ActionRecord,
                    }
                    lines.push_str(
                        &serde_json::to_string(&Line { id: &ex.id, record }).map_err(data_err)?,
                    );
                    lines.push('\n');
                }
            }
            fs::write(&out, lines).map_err(data_err)?;
            println!("wrote oracle actions for {} examples -> {}", report.examples.len(), out.display());
            Ok(())
        }
        Cmd::Stats { grammar, data, language, closure_k, common } => {
            let _ = read_config(common.config.as_deref())?;
            let g = read_grammar(&grammar)?;
            let report = read_dataset(&data, &g, language)?;
            let trees: Vec<_> = report.examples.iter().map(|e| e.ast.clone()).collect();
            let stats = grammar_stats(&g, &trees).map_err(data_err)?;
            println!("Statistics of grammar ({} examples)", trees.len());
            println!("  # productions            {}", stats.production_count);
            println!("  # node types             {}", stats.node_type_count);
            println!("  Avg. # actions / example {:.1}", stats.avg_actions_per_example);
            if let Some(k) = closure_k {
                let seqs: Vec<_> = report.examples.iter().map(|e| e.oracle.clone()).collect();
                let closed = unary_closure(&g, &seqs, k);
                let cstats = grammar_stats(&closed, &trees).map_err(data_err)?;
                println!("  w/ unary closure (k={k})");
                println!("  # productions            {}", cstats.production_count);
                println!("  Avg. # actions / example {:.1}", cstats.avg_actions_per_example);
            }
            Ok(())
        }
        Cmd::Train {
            grammar,
            data,
            dev,
            language,
            out,
            log,
            dropout,
            epochs,
            batch,
            lr,
            closure,
            closure_k,
            common,
        } => {
            let map = read_config(common.config.as_deref())?;
            let config = resolve_train_config(
                &map, common.seed, dropout, epochs, batch, lr, closure, closure_k,
            )?;
            config.validate().map_err(data_err)?;
            let base = read_grammar(&grammar)?;
            let train_report = read_dataset(&data, &base, language)?;
            if train_report.examples.is_empty() {
                return Err(CliError::Data("no usable training examples".into()));
            }
            // Closure chains are counted on the training split only.
            let g = if config.unary_closure {
                let seqs: Vec<_> = train_report.examples.iter().map(|e| e.oracle.clone()).collect();
                unary_closure(&base, &seqs, config.closure_k)
            } else {
                base
            };
            // Oracles are re-derived under the closured grammar.
            let train_examples = read_dataset(&data, &g, language)?.examples;
            let dev_examples = match &dev {
                Some(path) => read_dataset(path, &g, language)?.examples,
                None => Vec::new(),
            };
            let vocab = Vocab::build(&train_examples, config.d_source, config.d_terminal);
            let prepared_train = prepare_examples(&train_examples, &vocab, &g);
            let prepared_dev = prepare_examples(&dev_examples, &vocab, &g);

            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(config.seed);
            use rand::SeedableRng;
            let model = Model::for_grammar(
                config.dims,
                &g,
                vocab.source_words.len(),
                vocab.terminal_words.len(),
                &mut rng,
            )
            .map_err(data_err)?;
            let outcome = run_train(
                model,
                &g,
                &vocab,
                language,
                &prepared_train,
                &prepared_dev,
                &config,
            )
            .map_err(data_err)?;

            save_checkpoint(&out, &outcome.model, &g.hash(), &vocab.hash(), &config)
                .map_err(data_err)?;
            let vocab_path = sidecar_vocab_path(&out);
            fs::write(&vocab_path, serde_json::to_string(&vocab).map_err(data_err)?)
                .map_err(data_err)?;
            if config.unary_closure {
                let gpath = out.with_extension("grammar");
                fs::write(&gpath, g.to_text()).map_err(data_err)?;
                println!("closured grammar -> {}", gpath.display());
            }
            if let Some(log_path) = log {
                let mut text = String::new();
                for rec in &outcome.log {
                    text.push_str(&serde_json::to_string(rec).map_err(data_err)?);
                    text.push('\n');
                }
                fs::write(&log_path, text).map_err(data_err)?;
            }
            println!(
                "trained {} epochs, best dev exact match {:.3} -> {}",
                outcome.log.len(),
                outcome.best_dev_acc,
                out.display()
            );
            Ok(())
        }
        Cmd::Decode { grammar, model, input, beam, max_steps, out, common } => {
            let map = read_config(common.config.as_deref())?;
            let g = read_grammar(&grammar)?;
            let loaded = load_checkpoint(&model, Some(&g)).map_err(data_err)?;
            let vocab_path = sidecar_vocab_path(&model);
            let mut vocab: Vocab = serde_json::from_str(
                &fs::read_to_string(&vocab_path).map_err(|e| {
                    CliError::Data(format!("vocabulary sidecar {}: {e}", vocab_path.display()))
                })?,
            )
            .map_err(data_err)?;
            vocab.rebuild_index();
            if vocab.hash() != loaded.vocab_hash {
                return Err(CliError::Data(format!(
                    "vocabulary hash {} does not match checkpoint {}",
                    vocab.hash(),
                    loaded.vocab_hash
                )));
            }
            let mut opts = DecodeOpts::default();
            if let Some(v) = config_get::<usize>(&map, "beam")? {
                opts.beam = v;
            }
            if let Some(v) = config_get::<usize>(&map, "max_steps")? {
                opts.max_steps = v;
            }
            if let Some(v) = beam {
                opts.beam = v;
            }
            if let Some(v) = max_steps {
                opts.max_steps = v;
            }
            if opts.beam == 0 || opts.max_steps == 0 {
                return Err(CliError::Usage("--beam and --max-steps must be >= 1".into()));
            }
            let language = language_of_grammar(&g)?;

            let text = fs::read_to_string(&input).map_err(data_err)?;
            let mut inputs = Vec::new();
            for (idx, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let parsed: DecodeLine = serde_json::from_str(line)
                    .map_err(|e| CliError::Data(format!("line {}: {e}", idx + 1)))?;
                inputs.push(parsed);
            }

            use rayon::prelude::*;
            let model_ref = &loaded.model;
            let vocab_ref = &vocab;
            let g_ref = &g;
            let rows: Vec<Result<String, CliError>> = inputs
                .par_iter()
                .map(|line| {
                    let canon = canonicalize(&line.nl);
                    let (src_ids, src_oov) = vocab_ref.encode_source(&canon.tokens);
                    let decode_input = DecodeInput {
                        src_tokens: &canon.tokens,
                        src_ids: &src_ids,
                        src_oov: &src_oov,
                    };
                    let outcome = beam_search(
                        &decode_input,
                        model_ref,
                        g_ref,
                        &vocab_ref.terminal_words,
                        opts,
                    )
                    .map_err(data_err)?;
                    let best = outcome.best();
                    let code = if best.complete {
                        let rendered = render(&best.ast, language).map_err(data_err)?;
                        restore_placeholders(&rendered, &canon.table).map_err(data_err)?
                    } else {
                        String::new()
                    };
                    let steps = bind_oracle(
                        &best.tree_ops,
                        g_ref,
                        |tok| vocab_ref.lookup_terminal(tok),
                        &canon.tokens,
                    )
                    .map_err(data_err)?;
                    let prediction = Prediction {
                        id: line.id.clone(),
                        rank: 0,
                        score: best.score,
                        actions: action_records(&steps),
                        code,
                        complete: best.complete,
                    };
                    serde_json::to_string(&prediction).map_err(data_err)
                })
                .collect();
            let mut body = String::new();
            for row in rows {
                body.push_str(&row?);
                body.push('\n');
            }
            fs::write(&out, body).map_err(data_err)?;
            println!("decoded {} inputs -> {}", inputs.len(), out.display());
            Ok(())
        }
        Cmd::Eval { gold, pred, language, grammar, out, common } => {
            let _ = read_config(common.config.as_deref())?;
            let g = match &grammar {
                Some(path) => read_grammar(path)?,
                None => language.grammar(),
            };
            let gold_report = read_dataset(&gold, &g, language)?;
            let pred_text = fs::read_to_string(&pred).map_err(data_err)?;
            let mut predictions: HashMap<String, Prediction> = HashMap::new();
            for (idx, line) in pred_text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let p: Prediction = serde_json::from_str(line)
                    .map_err(|e| CliError::Data(format!("line {}: {e}", idx + 1)))?;
                predictions.insert(p.id.clone(), p);
            }

            let mut rows = Vec::new();
            let mut channel_hits = 0usize;
            let mut full_hits = 0usize;
            let mut dsl_n = 0usize;
            for ex in &gold_report.examples {
                let pred_code = predictions.get(&ex.id).map(|p| p.code.as_str()).unwrap_or("");
                let exact = exact_match(pred_code, &ex.code);
                let bleu = match (surface_tokens(pred_code), surface_tokens(&ex.code)) {
                    (Ok(p), Ok(gold_toks)) => crate::evalx::bleu4(&p, &gold_toks).unwrap_or(0.0),
                    _ => 0.0,
                };
                if language == Language::FlowDsl {
                    if let Ok(pred_tree) = parse(pred_code, language) {
                        if let Ok(resolved) = resolve_rules(&pred_tree, &g) {
                            if let Ok(acc) = dsl_accuracy(&resolved, &ex.ast) {
                                dsl_n += 1;
                                channel_hits += acc.channel_correct as usize;
                                full_hits += acc.full_correct as usize;
                            }
                        }
                    } else {
                        dsl_n += 1;
                    }
                }
                rows.push(PerExample {
                    id: ex.id.clone(),
                    exact,
                    bleu4: bleu,
                    gold_nodes: ex.ast.node_count(),
                });
            }
            let report = build_report(rows);
            #[derive(Serialize)]
            struct FullReport<'a> {
                #[serde(flatten)]
                base: &'a crate::evalx::EvalReport,
                #[serde(skip_serializing_if = "Option::is_none")]
                channel_accuracy: Option<f64>,
                #[serde(skip_serializing_if = "Option::is_none")]
                full_tree_accuracy: Option<f64>,
            }
            let wrapped = FullReport {
                base: &report,
                channel_accuracy: (dsl_n > 0).then(|| channel_hits as f64 / dsl_n as f64),
                full_tree_accuracy: (dsl_n > 0).then(|| full_hits as f64 / dsl_n as f64),
            };
            fs::write(&out, serde_json::to_string_pretty(&wrapped).map_err(data_err)?)
                .map_err(data_err)?;
            println!(
                "accuracy {:.3}  bleu4 {:.3}  ({} examples) -> {}",
                report.accuracy,
                report.bleu4,
                report.n_examples,
                out.display()
            );
            Ok(())
        }
        Cmd::Gradcheck { common, out } => {
            let map = read_config(common.config.as_deref())?;
            let seed = common.seed.or(config_get::<u64>(&map, "seed")?).unwrap_or(1);
            let report = train::gradcheck(seed);
            for group in &report.groups {
                println!("  {:<16} max rel err {:.3e}", group.name, group.max_rel_err);
            }
            println!(
                "gradcheck seeds {:?}: max rel err {:.3e} (tolerance {:.0e}) -> {}",
                report.seeds,
                report.max_rel_err,
                report.tolerance,
                if report.pass { "PASS" } else { "FAIL" }
            );
            if let Some(path) = out {
                fs::write(&path, serde_json::to_string_pretty(&report).map_err(data_err)?)
                    .map_err(data_err)?;
            }
            if report.pass {
                Ok(())
            } else {
                Err(CliError::Data("gradient check failed".into()))
            }
        }
        Cmd::Fixtures { out, common } => {
            let map = read_config(common.config.as_deref())?;
            let seed = common
                .seed
                .or(config_get::<u64>(&map, "seed")?)
                .unwrap_or(fixtures::DEFAULT_SEED);
            let manifest = fixtures::write_fixtures(&out, seed).map_err(data_err)?;
            println!(
                "wrote {} datasets and 2 grammars (seed {seed}) -> {}",
                manifest.datasets.len(),
                out.display()
            );
            Ok(())
        }
    }
}

fn sidecar_vocab_path(model: &Path) -> PathBuf {
    let mut name = model.file_name().map(|s| s.to_os_string()).unwrap_or_default();
    name.push(".vocab.json");
    model.with_file_name(name)
}

/// The bundled languages are distinguished by their root production shape.
fn language_of_grammar(g: &Grammar) -> Result<Language, CliError> {
    let root_rule = &g.productions[g.productions_for(g.root_type)[0].0 as usize];
    let is_flow = root_rule
        .fields
        .iter()
        .any(|f| g.node_type(f.ty).name == "trigger");
    if is_flow {
        Ok(Language::FlowDsl)
    } else {
        Ok(Language::MiniPy)
    }
}
