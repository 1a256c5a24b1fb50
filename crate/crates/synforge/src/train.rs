//! Training: Adam over the negative log-likelihood of oracle action
//! sequences, length-bucketed mini-batches, dev-accuracy model selection
//! with patience, checkpoint I/O, and the full-model finite-difference
//! gradient check.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{restore_placeholders, PreparedExample, Vocab};
use crate::evalx::exact_match;
use crate::grammar::Grammar;
use crate::infer::{greedy_decode, DecodeInput, DecodeOpts};
use crate::minilang::{render, surface_tokens, Language};
use crate::model::{Model, ModelDims, ModelError};
use crate::tensor::{GradStore, ParamStore};

pub const GRAD_CLIP_NORM: f64 = 5.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub dims: ModelDims,
    /// Beam size used when decoding the dev set.
    pub dev_beam: usize,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Dev evaluations without improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    pub learning_rate: f64,
    pub unary_closure: bool,
    pub closure_k: usize,
    /// Dev decode cadence in epochs.
    pub dev_every: usize,
    /// Optional early-stop target on dev exact match.
    pub stop_at_dev_acc: Option<f64>,
    pub d_source: usize,
    pub d_terminal: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dims: ModelDims::default(),
            dev_beam: 15,
            batch_size: 10,
            max_epochs: 500,
            patience: 10,
            seed: 1,
            learning_rate: 1e-3,
            unary_closure: false,
            closure_k: 30,
            dev_every: 2,
            stop_at_dev_acc: None,
            d_source: 1,
            d_terminal: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        self.dims.validate()?;
        for (what, v) in [
            ("dev_beam", self.dev_beam),
            ("batch_size", self.batch_size),
            ("max_epochs", self.max_epochs),
            ("dev_every", self.dev_every),
            ("closure_k", self.closure_k),
            ("d_source", self.d_source),
            ("d_terminal", self.d_terminal),
        ] {
            if v == 0 {
                return Err(TrainError::BadConfig(format!("{what} must be >= 1")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("bad training configuration: {0}")]
    BadConfig(String),
    #[error("example {index} ({id}) failed: {reason}")]
    BadExample { index: usize, id: String, reason: String },
    #[error("loss became non-finite at epoch {epoch} (batch {batch}, mean nll {nll})")]
    NanLoss { epoch: usize, batch: usize, nll: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("checkpoint i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint format: {0}")]
    Format(String),
    #[error("checkpoint does not match: {0}")]
    Mismatch(String),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_nll: f64,
    pub dev_acc: f64,
    pub dev_bleu: f64,
    pub lr: f64,
}

pub struct TrainOutcome {
    pub model: Model,
    pub best_dev_acc: f64,
    pub log: Vec<EpochRecord>,
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

pub struct Adam {
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
}

impl Adam {
    pub fn new(store: &ParamStore) -> Self {
        Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: store.tensors.iter().map(|t| vec![0.0; t.len()]).collect(),
            v: store.tensors.iter().map(|t| vec![0.0; t.len()]).collect(),
            t: 0,
        }
    }

    pub fn step(&mut self, store: &mut ParamStore, grads: &GradStore, lr: f64) {
        self.t += 1;
        let b1t = 1.0 - self.beta1.powi(self.t as i32);
        let b2t = 1.0 - self.beta2.powi(self.t as i32);
        for (idx, tensor) in store.tensors.iter_mut().enumerate() {
            let g = &grads.grads[idx];
            let m = &mut self.m[idx];
            let v = &mut self.v[idx];
            for i in 0..tensor.data.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let m_hat = m[i] / b1t;
                let v_hat = v[i] / b2t;
                tensor.data[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}

/// Scales gradients down to the global-norm budget.
pub fn clip_gradients(grads: &mut GradStore, max_norm: f64) -> f64 {
    let norm = grads.l2_norm();
    if norm > max_norm && norm > 0.0 {
        grads.scale(max_norm / norm);
    }
    norm
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

fn batch_grads(
    model: &Model,
    batch: &[&PreparedExample],
    dropout_epoch_seed: Option<u64>,
) -> Result<(GradStore, f64), TrainError> {
    // One gradient buffer per example, computed in parallel, then reduced in
    // example order so the result does not depend on the thread count.
    let per_example: Vec<Result<(GradStore, f64), TrainError>> = batch
        .par_iter()
        .enumerate()
        .map(|(i, ex)| {
            let mut grads = GradStore::zeros_like(&model.store);
            let seed = dropout_epoch_seed.map(|s| s.wrapping_add(i as u64));
            let loss = model
                .example_loss_and_grads(&ex.src_ids, &ex.src_oov, &ex.steps, seed, &mut grads)
                .map_err(|e| TrainError::BadExample {
                    index: i,
                    id: ex.id.clone(),
                    reason: e.to_string(),
                })?;
            Ok((grads, loss))
        })
        .collect();

    let mut total = GradStore::zeros_like(&model.store);
    let mut loss_sum = 0.0;
    for item in per_example {
        let (g, loss) = item?;
        total.add_assign(&g);
        loss_sum += loss;
    }
    let n = batch.len() as f64;
    total.scale(1.0 / n);
    Ok((total, loss_sum / n))
}

/// Greedy-decodes `examples` and reports exact match and BLEU against the
/// restored gold code.
pub fn evaluate_exact_match(
    model: &Model,
    grammar: &Grammar,
    vocab: &Vocab,
    language: Language,
    examples: &[PreparedExample],
    opts: DecodeOpts,
) -> (f64, f64) {
    if examples.is_empty() {
        return (0.0, 0.0);
    }
    let rows: Vec<(bool, f64)> = examples
        .par_iter()
        .map(|ex| {
            let input = DecodeInput {
                src_tokens: &ex.src_tokens,
                src_ids: &ex.src_ids,
                src_oov: &ex.src_oov,
            };
            let decoded = match greedy_decode(&input, model, grammar, &vocab.terminal_words, opts) {
                Ok(out) => out,
                Err(_) => return (false, 0.0),
            };
            let Some(best) = decoded.complete() else { return (false, 0.0) };
            let Ok(rendered) = render(&best.ast, language) else { return (false, 0.0) };
            let Ok(restored) = restore_placeholders(&rendered, &ex.table) else {
                return (false, 0.0);
            };
            let exact = exact_match(&restored, &ex.gold_code);
            let bleu = match (surface_tokens(&restored), surface_tokens(&ex.gold_code)) {
                (Ok(p), Ok(g)) => crate::evalx::bleu4(&p, &g).unwrap_or(0.0),
                _ => 0.0,
            };
            (exact, bleu)
        })
        .collect();
    let n = rows.len() as f64;
    let acc = rows.iter().filter(|(e, _)| *e).count() as f64 / n;
    let bleu = rows.iter().map(|(_, b)| b).sum::<f64>() / n;
    (acc, bleu)
}

/// Trains on the prepared corpus, returning the parameters that achieved the
/// best dev exact match together with the per-epoch log.
pub fn train(
    mut model: Model,
    grammar: &Grammar,
    vocab: &Vocab,
    language: Language,
    train_set: &[PreparedExample],
    dev_set: &[PreparedExample],
    config: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(TrainError::BadConfig("empty training set".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = Adam::new(&model.store);

    // Length-bucketed batches: sort by oracle length once, slice into
    // contiguous batches, shuffle batch order each epoch.
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    order.sort_by_key(|&i| (train_set[i].steps.len(), i));
    let batches: Vec<Vec<usize>> =
        order.chunks(config.batch_size).map(|chunk| chunk.to_vec()).collect();

    let dev_opts = DecodeOpts { beam: 1, ..DecodeOpts::default() };
    let mut log = Vec::new();
    let mut best_dev_acc = f64::NEG_INFINITY;
    let mut best_params: Option<ParamStore> = None;
    let mut evals_since_best = 0usize;

    for epoch in 1..=config.max_epochs {
        let mut batch_order: Vec<usize> = (0..batches.len()).collect();
        for i in (1..batch_order.len()).rev() {
            let j = rng.gen_range(0..=i);
            batch_order.swap(i, j);
        }
        let dropout_seed = if config.dims.dropout > 0.0 {
            Some(config.seed.wrapping_mul(1_000_003).wrapping_add(epoch as u64))
        } else {
            None
        };

        let mut epoch_nll = 0.0;
        for (bi, &b) in batch_order.iter().enumerate() {
            let batch: Vec<&PreparedExample> = batches[b].iter().map(|&i| &train_set[i]).collect();
            let (mut grads, mean_nll) = batch_grads(&model, &batch, dropout_seed)?;
            if !mean_nll.is_finite() {
                return Err(TrainError::NanLoss { epoch, batch: bi, nll: mean_nll });
            }
            clip_gradients(&mut grads, GRAD_CLIP_NORM);
            adam.step(&mut model.store, &grads, config.learning_rate);
            epoch_nll += mean_nll * batch.len() as f64;
        }
        let train_nll = epoch_nll / train_set.len() as f64;

        let evaluate_now = epoch % config.dev_every == 0 || epoch == config.max_epochs;
        let (dev_acc, dev_bleu) = if evaluate_now && !dev_set.is_empty() {
            evaluate_exact_match(&model, grammar, vocab, language, dev_set, dev_opts)
        } else {
            (f64::NAN, f64::NAN)
        };
        log.push(EpochRecord { epoch, train_nll, dev_acc, dev_bleu, lr: config.learning_rate });

        if evaluate_now && !dev_set.is_empty() {
            if dev_acc > best_dev_acc {
                best_dev_acc = dev_acc;
                best_params = Some(model.store.clone());
                evals_since_best = 0;
            } else {
                evals_since_best += 1;
            }
            if let Some(target) = config.stop_at_dev_acc {
                if dev_acc >= target {
                    break;
                }
            }
            if evals_since_best >= config.patience {
                break;
            }
        }
    }

    if let Some(store) = best_params {
        model.store = store;
    }
    if best_dev_acc == f64::NEG_INFINITY {
        best_dev_acc = 0.0;
    }
    Ok(TrainOutcome { model, best_dev_acc, log })
}

// ---------------------------------------------------------------------------
// Checkpoint I/O
// ---------------------------------------------------------------------------

const CKPT_MAGIC: &str = "SYNFORGE-CKPT v1";

#[derive(Debug, Serialize, Deserialize)]
struct TensorMeta {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct CkptManifest {
    format_version: u32,
    grammar_hash: String,
    vocab_hash: String,
    n_src_words: usize,
    n_terminal_words: usize,
    n_rules: usize,
    n_types: usize,
    dims: ModelDims,
    config: TrainConfig,
    tensors: Vec<TensorMeta>,
}

/// Single-file checkpoint: a magic line, a JSON manifest line, then the
/// little-endian 32-bit float payload in manifest order.
pub fn save_checkpoint(
    path: &Path,
    model: &Model,
    grammar_hash: &str,
    vocab_hash: &str,
    config: &TrainConfig,
) -> Result<(), TrainError> {
    let manifest = CkptManifest {
        format_version: 1,
        grammar_hash: grammar_hash.to_string(),
        vocab_hash: vocab_hash.to_string(),
        n_src_words: model.n_src_words,
        n_terminal_words: model.n_terminal_words,
        n_rules: model.n_rules,
        n_types: model.n_types,
        dims: model.dims,
        config: config.clone(),
        tensors: model
            .store
            .tensors
            .iter()
            .map(|t| TensorMeta { name: t.name.clone(), rows: t.rows, cols: t.cols })
            .collect(),
    };
    let mut file = fs::File::create(path)?;
    writeln!(file, "{CKPT_MAGIC}")?;
    writeln!(file, "{}", serde_json::to_string(&manifest).expect("manifest serializes"))?;
    let mut payload = Vec::with_capacity(model.store.total_len() * 4);
    for t in &model.store.tensors {
        for &x in &t.data {
            payload.extend_from_slice(&(x as f32).to_le_bytes());
        }
    }
    file.write_all(&payload)?;
    Ok(())
}

pub struct LoadedCheckpoint {
    pub model: Model,
    pub grammar_hash: String,
    pub vocab_hash: String,
    pub config: TrainConfig,
}

/// Loads a checkpoint; when `expect_grammar` is given, its hash must match
/// the one recorded at save time.
pub fn load_checkpoint(
    path: &Path,
    expect_grammar: Option<&Grammar>,
) -> Result<LoadedCheckpoint, TrainError> {
    let mut file = fs::File::open(path)?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes)?;
    let magic_end = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| TrainError::Format("missing magic line".into()))?;
    let magic = std::str::from_utf8(&bytes[..magic_end])
        .map_err(|_| TrainError::Format("magic is not UTF-8".into()))?;
    if magic != CKPT_MAGIC {
        return Err(TrainError::Format(format!(
            "unsupported checkpoint version (magic `{magic}`)"
        )));
    }
    let rest = &bytes[magic_end + 1..];
    let manifest_end = rest
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| TrainError::Format("missing manifest line".into()))?;
    let manifest: CkptManifest = serde_json::from_slice(&rest[..manifest_end])
        .map_err(|e| TrainError::Format(format!("bad manifest: {e}")))?;
    if manifest.format_version != 1 {
        return Err(TrainError::Format(format!(
            "unsupported format version {}",
            manifest.format_version
        )));
    }
    if let Some(grammar) = expect_grammar {
        let actual = grammar.hash();
        if actual != manifest.grammar_hash {
            return Err(TrainError::Mismatch(format!(
                "grammar hash {actual} does not match checkpoint {}",
                manifest.grammar_hash
            )));
        }
        if grammar.productions.len() != manifest.n_rules
            || grammar.node_types.len() != manifest.n_types
        {
            return Err(TrainError::Mismatch("grammar shape differs from checkpoint".into()));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut model = Model::new(
        manifest.dims,
        manifest.n_src_words,
        manifest.n_terminal_words,
        manifest.n_rules,
        manifest.n_types,
        &mut rng,
    )?;
    if model.store.tensors.len() != manifest.tensors.len() {
        return Err(TrainError::Mismatch("tensor table length differs".into()));
    }
    let payload = &rest[manifest_end + 1..];
    let expected_len: usize = manifest.tensors.iter().map(|t| t.rows * t.cols * 4).sum();
    if payload.len() != expected_len {
        return Err(TrainError::Format(format!(
            "payload length {} does not match manifest total {expected_len}",
            payload.len()
        )));
    }
    let mut offset = 0usize;
    for (tensor, meta) in model.store.tensors.iter_mut().zip(&manifest.tensors) {
        if tensor.name != meta.name || tensor.rows != meta.rows || tensor.cols != meta.cols {
            return Err(TrainError::Mismatch(format!(
                "tensor {} ({}x{}) does not match checkpoint {} ({}x{})",
                tensor.name, tensor.rows, tensor.cols, meta.name, meta.rows, meta.cols
            )));
        }
        for slot in tensor.data.iter_mut() {
            let raw: [u8; 4] = payload[offset..offset + 4].try_into().expect("length checked");
            *slot = f32::from_le_bytes(raw) as f64;
            offset += 4;
        }
    }
    Ok(LoadedCheckpoint {
        model,
        grammar_hash: manifest.grammar_hash,
        vocab_hash: manifest.vocab_hash,
        config: manifest.config,
    })
}

// ---------------------------------------------------------------------------
// Full-model gradient check
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
pub struct GradcheckGroup {
    pub name: String,
    pub max_rel_err: f64,
}

#[derive(Debug, Serialize)]
pub struct GradcheckReport {
    pub seeds: Vec<u64>,
    pub groups: Vec<GradcheckGroup>,
    pub max_rel_err: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Central finite differences against the analytic gradient for every
/// parameter group, through a three-step sequence (rule, token with both
/// generation and copy routes, close) on five seeds.
pub fn gradcheck(base_seed: u64) -> GradcheckReport {
    use crate::grammar::load_grammar;
    use crate::transition::{bind_oracle, OracleAction};
    use crate::grammar::ProdId;

    let grammar = load_grammar("type root\ntype str variable\nrule root -> v:str\n").unwrap();
    let oracle = vec![
        OracleAction::Rule(ProdId(0)),
        OracleAction::Token("w".into()),
        OracleAction::Close,
    ];
    // "w" is in the vocabulary and at input position 0: the token step sums
    // the generation and copy routes, so the selector, vocabulary head and
    // pointer all receive gradient.
    let vocab: Vec<String> = ["</n>", "<unk>", "w"].iter().map(|s| s.to_string()).collect();
    let input: Vec<String> = vec!["w".into(), "z".into()];
    let steps =
        bind_oracle(&oracle, &grammar, |t| vocab.iter().position(|v| v == t), &input).unwrap();
    let src_ids = [1usize, 2];
    let src_oov = [false, true];

    let dims = ModelDims {
        embed: 6,
        node_type_embed: 5,
        rnn: 8,
        scorer_hidden: 7,
        masked_applyrule: false,
        dropout: 0.0,
    };

    let tolerance = 1e-4;
    let seeds: Vec<u64> = (base_seed..base_seed + 5).collect();
    let mut group_errs: Vec<(String, f64)> = Vec::new();

    for &seed in &seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut model = Model::new(
            dims,
            4,
            vocab.len(),
            grammar.productions.len(),
            grammar.node_types.len(),
            &mut rng,
        )
        .unwrap();

        let mut grads = GradStore::zeros_like(&model.store);
        {
            let mut tape = crate::tensor::Tape::new(&model.store);
            let total = model
                .sequence_log_prob_tape(&mut tape, &src_ids, &src_oov, &steps, None)
                .unwrap();
            let loss = tape.scale(total, -1.0);
            tape.backward(loss, &mut grads);
        }

        let eps = 1e-5;
        if group_errs.is_empty() {
            group_errs = model
                .store
                .tensors
                .iter()
                .map(|t| (t.name.clone(), 0.0))
                .collect();
        }
        for t in 0..model.store.tensors.len() {
            for i in 0..model.store.tensors[t].len() {
                let orig = model.store.tensors[t].data[i];
                model.store.tensors[t].data[i] = orig + eps;
                let up = -model.sequence_log_prob(&src_ids, &src_oov, &steps).unwrap();
                model.store.tensors[t].data[i] = orig - eps;
                let down = -model.sequence_log_prob(&src_ids, &src_oov, &steps).unwrap();
                model.store.tensors[t].data[i] = orig;
                let fd = (up - down) / (2.0 * eps);
                let an = grads.grads[t][i];
                let denom = an.abs().max(fd.abs());
                let rel = if denom < 1e-6 {
                    // Near-zero gradients are checked absolutely.
                    if (an - fd).abs() < 1e-8 {
                        0.0
                    } else {
                        (an - fd).abs()
                    }
                } else {
                    (an - fd).abs() / denom
                };
                if rel > group_errs[t].1 {
                    group_errs[t].1 = rel;
                }
            }
        }
    }

    let max_rel_err = group_errs.iter().map(|(_, e)| *e).fold(0.0, f64::max);
    GradcheckReport {
        seeds,
        groups: group_errs
            .into_iter()
            .map(|(name, max_rel_err)| GradcheckGroup { name, max_rel_err })
            .collect(),
        max_rel_err,
        tolerance,
        pass: max_rel_err <= tolerance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{load_dataset, prepare_examples};
    use crate::fixtures;

    fn small_corpus(n: usize) -> (Grammar, Vocab, Vec<PreparedExample>) {
        let g = Language::MiniPy.grammar();
        let text = fixtures::to_jsonl(&fixtures::generate_minipy(n, 5));
        let report = load_dataset(&text, &g, Language::MiniPy).unwrap();
        let vocab = Vocab::build(&report.examples, 1, 1);
        let prepared = prepare_examples(&report.examples, &vocab, &g);
        (g, vocab, prepared)
    }

    fn small_dims() -> ModelDims {
        ModelDims {
            embed: 10,
            node_type_embed: 6,
            rnn: 12,
            scorer_hidden: 8,
            masked_applyrule: false,
            dropout: 0.0,
        }
    }

    fn small_config() -> TrainConfig {
        TrainConfig {
            dims: small_dims(),
            max_epochs: 2,
            batch_size: 4,
            dev_every: 1,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_learning_rate_leaves_parameters_bit_identical() {
        let (g, vocab, prepared) = small_corpus(8);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let model = Model::new(
            small_dims(),
            vocab.source_words.len(),
            vocab.terminal_words.len(),
            g.productions.len(),
            g.node_types.len(),
            &mut rng,
        )
        .unwrap();
        let before: Vec<Vec<f64>> = model.store.tensors.iter().map(|t| t.data.clone()).collect();
        let config = TrainConfig { learning_rate: 0.0, max_epochs: 1, ..small_config() };
        let out = train(model, &g, &vocab, Language::MiniPy, &prepared, &[], &config).unwrap();
        for (t, orig) in out.model.store.tensors.iter().zip(&before) {
            assert_eq!(&t.data, orig, "tensor {} changed at lr 0", t.name);
        }
    }

    #[test]
    fn one_adam_step_decreases_example_loss() {
        let (g, vocab, prepared) = small_corpus(4);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut model = Model::new(
            small_dims(),
            vocab.source_words.len(),
            vocab.terminal_words.len(),
            g.productions.len(),
            g.node_types.len(),
            &mut rng,
        )
        .unwrap();
        let ex = &prepared[0];
        let before = -model.sequence_log_prob(&ex.src_ids, &ex.src_oov, &ex.steps).unwrap();
        let mut grads = GradStore::zeros_like(&model.store);
        model
            .example_loss_and_grads(&ex.src_ids, &ex.src_oov, &ex.steps, None, &mut grads)
            .unwrap();
        clip_gradients(&mut grads, GRAD_CLIP_NORM);
        let mut adam = Adam::new(&model.store);
        adam.step(&mut model.store, &grads, 1e-4);
        let after = -model.sequence_log_prob(&ex.src_ids, &ex.src_oov, &ex.steps).unwrap();
        assert!(after < before, "loss should decrease: {before} -> {after}");
    }

    #[test]
    fn training_is_deterministic_for_a_seed() {
        let (g, vocab, prepared) = small_corpus(6);
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            let model = Model::new(
                small_dims(),
                vocab.source_words.len(),
                vocab.terminal_words.len(),
                g.productions.len(),
                g.node_types.len(),
                &mut rng,
            )
            .unwrap();
            let config = small_config();
            let out =
                train(model, &g, &vocab, Language::MiniPy, &prepared, &prepared, &config).unwrap();
            let weights: Vec<f64> = out
                .model
                .store
                .tensors
                .iter()
                .flat_map(|t| t.data.iter().copied())
                .collect();
            (weights, out.log.iter().map(|r| (r.train_nll, r.dev_acc)).collect::<Vec<_>>())
        };
        let (w1, l1) = run();
        let (w2, l2) = run();
        assert_eq!(w1, w2, "same seed must give identical weights");
        assert_eq!(l1, l2, "same seed must give an identical trajectory");
    }

    #[test]
    fn checkpoint_round_trips_and_validates() {
        let (g, vocab, _) = small_corpus(4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let model = Model::new(
            small_dims(),
            vocab.source_words.len(),
            vocab.terminal_words.len(),
            g.productions.len(),
            g.node_types.len(),
            &mut rng,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let config = small_config();
        save_checkpoint(&path, &model, &g.hash(), &vocab.hash(), &config).unwrap();
        let loaded = load_checkpoint(&path, Some(&g)).unwrap();
        assert_eq!(loaded.grammar_hash, g.hash());
        // Values round-trip through f32.
        for (a, b) in model.store.tensors.iter().zip(&loaded.model.store.tensors) {
            for (x, y) in a.data.iter().zip(&b.data) {
                assert_eq!(*x as f32, *y as f32);
            }
        }

        // Corrupt magic bytes: version error.
        let mut bytes = fs::read(&path).unwrap();
        bytes[0] = b'X';
        let bad = dir.path().join("bad.ckpt");
        fs::write(&bad, &bytes).unwrap();
        assert!(matches!(load_checkpoint(&bad, None), Err(TrainError::Format(_))));

        // Loading against a different grammar: hash mismatch.
        let other = crate::grammar::load_grammar("type root\nrule root ->\n").unwrap();
        assert!(matches!(load_checkpoint(&path, Some(&other)), Err(TrainError::Mismatch(_))));
    }

    #[test]
    fn second_save_load_cycle_is_exact() {
        let (g, vocab, _) = small_corpus(3);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let model = Model::new(
            small_dims(),
            vocab.source_words.len(),
            vocab.terminal_words.len(),
            g.productions.len(),
            g.node_types.len(),
            &mut rng,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.ckpt");
        let p2 = dir.path().join("b.ckpt");
        let config = small_config();
        save_checkpoint(&p1, &model, "h", "v", &config).unwrap();
        let once = load_checkpoint(&p1, None).unwrap();
        save_checkpoint(&p2, &once.model, "h", "v", &config).unwrap();
        let twice = load_checkpoint(&p2, None).unwrap();
        for (a, b) in once.model.store.tensors.iter().zip(&twice.model.store.tensors) {
            assert_eq!(a.data, b.data, "f32 round trip is a fixed point");
        }
    }

    #[test]
    fn gradcheck_passes_at_tolerance() {
        let report = gradcheck(1);
        assert!(
            report.pass,
            "max rel err {} over groups {:?}",
            report.max_rel_err,
            report.groups.iter().map(|g| (&g.name, g.max_rel_err)).collect::<Vec<_>>()
        );
    }
}
