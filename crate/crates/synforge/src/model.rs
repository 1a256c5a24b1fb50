//! The probabilistic model over action sequences: bidirectional LSTM encoder,
//! decoder LSTM with parent feeding and frontier-type embedding, soft
//! attention, and the two probability heads (rule application and token
//! generation with a generate-or-copy marginal).
//!
//! The same forward functions serve training (one persistent tape per
//! example, differentiated) and decoding (a short-lived tape per step, values
//! only). Token actions are scored by the marginal probability of their
//! surface token: a word reachable both from the vocabulary and by copying
//! sums both routes.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grammar::{Grammar, NodeKind, NodeTypeId, ProdId};
use crate::tensor::nn::{
    apply_dropout, dropout_mask, glorot_init, uniform_init, LstmCell, Mlp1, Projection,
    RECURRENT_INIT_BOUND,
};
use crate::tensor::{GradStore, ParamStore, Tape, Var};
use crate::transition::{BoundStep, BoundTarget};

pub const CLOSE_TOKEN_ID: usize = 0;
pub const UNK_TOKEN_ID: usize = 1;
pub const SRC_UNK_ID: usize = 0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelDims {
    /// Action and word embedding width.
    pub embed: usize,
    /// Frontier node-type embedding width.
    pub node_type_embed: usize,
    /// Hidden size of the encoder (per direction) and the decoder.
    pub rnn: usize,
    /// Hidden width of the attention and pointer scorers.
    pub scorer_hidden: usize,
    /// When set, the rule softmax is restricted to the legal subset instead
    /// of ranging over every production (ablation flag).
    pub masked_applyrule: bool,
    pub dropout: f64,
}

impl Default for ModelDims {
    fn default() -> Self {
        ModelDims {
            embed: 128,
            node_type_embed: 64,
            rnn: 256,
            scorer_hidden: 50,
            masked_applyrule: false,
            dropout: 0.0,
        }
    }
}

impl ModelDims {
    pub fn validate(&self) -> Result<(), ModelError> {
        for (what, v) in [
            ("embed", self.embed),
            ("node_type_embed", self.node_type_embed),
            ("rnn", self.rnn),
            ("scorer_hidden", self.scorer_hidden),
        ] {
            if v == 0 {
                return Err(ModelError::BadConfig(format!("{what} must be >= 1")));
            }
        }
        let allowed = [0.0, 0.2, 0.3, 0.4];
        if !allowed.iter().any(|p| (p - self.dropout).abs() < 1e-12) {
            return Err(ModelError::BadConfig(format!(
                "dropout {} not in {{0, 0.2, 0.3, 0.4}}",
                self.dropout
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("bad model configuration: {0}")]
    BadConfig(String),
    #[error("empty input sentence")]
    EmptyInput,
    #[error("unknown node type id {0}")]
    UnknownNodeType(u32),
    #[error("gold action at step {0} has zero probability (vocabulary/preprocessing bug)")]
    ZeroProbGold(usize),
}

/// The embedding fed back as the previous action.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PrevAction {
    /// Dedicated start row, used at t = 1.
    Start,
    Rule(ProdId),
    /// Token row: close is row 0; copied out-of-vocabulary words use the
    /// unknown row so the token matrix stays closed.
    Token(usize),
}

pub struct Model {
    pub dims: ModelDims,
    pub store: ParamStore,
    pub n_rules: usize,
    pub n_types: usize,
    pub n_src_words: usize,
    pub n_terminal_words: usize,
    src_embed: usize,
    enc_fwd: LstmCell,
    enc_bwd: LstmCell,
    dec: LstmCell,
    attn: Mlp1,
    rule_embed: usize,
    rule_bias: usize,
    rule_proj: Projection,
    tok_embed: usize,
    tok_bias: usize,
    gen_proj: Projection,
    selector_w: usize,
    selector_b: usize,
    pointer: Mlp1,
    ntype_embed: usize,
    start_embed: usize,
}

/// Per-sequence dropout state: one variational mask for the decoder input
/// plus fresh output masks per step. Absent in evaluation mode.
pub struct DropoutState {
    input_mask: Vec<f64>,
    rng: ChaCha8Rng,
    p: f64,
}

impl Model {
    pub fn dec_input_size(dims: &ModelDims) -> usize {
        // [a_{t-1} : c_t : p_t : n_{f_t}] with p_t = [parent hidden : parent embedding]
        dims.embed + 2 * dims.rnn + (dims.rnn + dims.embed) + dims.node_type_embed
    }

    pub fn new(
        dims: ModelDims,
        n_src_words: usize,
        n_terminal_words: usize,
        n_rules: usize,
        n_types: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Model, ModelError> {
        dims.validate()?;
        if n_rules == 0 || n_types == 0 || n_src_words == 0 || n_terminal_words < 2 {
            return Err(ModelError::BadConfig("empty grammar or vocabulary".into()));
        }
        let mut store = ParamStore::new();
        let e = dims.embed;
        let r = dims.rnn;
        let src_embed = store.add(
            "src_embed",
            n_src_words,
            e,
            uniform_init(rng, n_src_words * e, RECURRENT_INIT_BOUND),
        );
        let enc_fwd = LstmCell::register(&mut store, "enc_fwd", e, r, rng);
        let enc_bwd = LstmCell::register(&mut store, "enc_bwd", e, r, rng);
        let dec = LstmCell::register(&mut store, "dec", Self::dec_input_size(&dims), r, rng);
        let attn = Mlp1::register(&mut store, "attn", r + 2 * r, dims.scorer_hidden, rng);
        let rule_embed = store.add(
            "rule_embed",
            n_rules,
            e,
            uniform_init(rng, n_rules * e, RECURRENT_INIT_BOUND),
        );
        let rule_bias = store.add("rule_bias", n_rules, 1, vec![0.0; n_rules]);
        let rule_proj = Projection::register(&mut store, "rule_proj", r, e, rng);
        let tok_embed = store.add(
            "tok_embed",
            n_terminal_words,
            e,
            uniform_init(rng, n_terminal_words * e, RECURRENT_INIT_BOUND),
        );
        let tok_bias = store.add("tok_bias", n_terminal_words, 1, vec![0.0; n_terminal_words]);
        let gen_proj = Projection::register(&mut store, "gen_proj", r + 2 * r, e, rng);
        let selector_w = store.add("selector_w", 2, r, glorot_init(rng, 2, r));
        let selector_b = store.add("selector_b", 2, 1, vec![0.0; 2]);
        let pointer = Mlp1::register(&mut store, "pointer", 2 * r + r + 2 * r, dims.scorer_hidden, rng);
        let ntype_embed = store.add(
            "ntype_embed",
            n_types,
            dims.node_type_embed,
            uniform_init(rng, n_types * dims.node_type_embed, RECURRENT_INIT_BOUND),
        );
        let start_embed = store.add("start_embed", e, 1, uniform_init(rng, e, RECURRENT_INIT_BOUND));
        Ok(Model {
            dims,
            store,
            n_rules,
            n_types,
            n_src_words,
            n_terminal_words,
            src_embed,
            enc_fwd,
            enc_bwd,
            dec,
            attn,
            rule_embed,
            rule_bias,
            rule_proj,
            tok_embed,
            tok_bias,
            gen_proj,
            selector_w,
            selector_b,
            pointer,
            ntype_embed,
            start_embed,
        })
    }

    pub fn for_grammar(
        dims: ModelDims,
        grammar: &Grammar,
        n_src_words: usize,
        n_terminal_words: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Model, ModelError> {
        Model::new(
            dims,
            n_src_words,
            n_terminal_words,
            grammar.productions.len(),
            grammar.node_types.len(),
            rng,
        )
    }

    pub fn dropout_state(&self, seed: u64) -> Option<DropoutState> {
        if self.dims.dropout == 0.0 {
            return None;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let input_mask = dropout_mask(&mut rng, Self::dec_input_size(&self.dims), self.dims.dropout);
        Some(DropoutState { input_mask, rng, p: self.dims.dropout })
    }

    // -- encoder ------------------------------------------------------------

    /// Bidirectional encoding: per-word vectors are the concatenation of the
    /// forward and backward states at that position.
    pub fn encode<'t>(
        &self,
        tape: &mut Tape<'t>,
        word_ids: &[usize],
        oov: &[bool],
    ) -> Result<Encoding, ModelError> {
        if word_ids.is_empty() {
            return Err(ModelError::EmptyInput);
        }
        let n = word_ids.len();
        let emb_matrix = tape.param(self.src_embed);
        let embs: Vec<Var> = word_ids.iter().map(|&w| tape.row(emb_matrix, w)).collect();

        let mut fwd = Vec::with_capacity(n);
        let mut h = tape.zeros(self.dims.rnn);
        let mut c = tape.zeros(self.dims.rnn);
        for &x in &embs {
            let (h2, c2) = self.enc_fwd.step(tape, x, h, c);
            fwd.push(h2);
            h = h2;
            c = c2;
        }
        let mut bwd = vec![None; n];
        let mut h = tape.zeros(self.dims.rnn);
        let mut c = tape.zeros(self.dims.rnn);
        for i in (0..n).rev() {
            let (h2, c2) = self.enc_bwd.step(tape, embs[i], h, c);
            bwd[i] = Some(h2);
            h = h2;
            c = c2;
        }
        let states: Vec<Var> = fwd
            .iter()
            .zip(&bwd)
            .map(|(&f, b)| tape.concat(&[f, b.expect("filled above")]))
            .collect();
        let matrix = tape.stack_rows(&states);
        Ok(Encoding { states, matrix, oov: oov.to_vec() })
    }

    // -- attention ----------------------------------------------------------

    /// Soft attention over the encoded positions; returns (weights, context).
    pub fn attend<'t>(&self, tape: &mut Tape<'t>, state: Var, enc: &Encoding) -> (Var, Var) {
        let scores: Vec<Var> = enc
            .states
            .iter()
            .map(|&hi| {
                let joint = tape.concat(&[state, hi]);
                self.attn.score(tape, joint)
            })
            .collect();
        let stacked = tape.stack(&scores);
        let alpha = tape.softmax(stacked);
        let ctx = tape.vecmat(alpha, enc.matrix);
        (alpha, ctx)
    }

    // -- action embedding ---------------------------------------------------

    pub fn action_embedding<'t>(&self, tape: &mut Tape<'t>, prev: PrevAction) -> Var {
        match prev {
            PrevAction::Start => tape.param(self.start_embed),
            PrevAction::Rule(pid) => {
                let m = tape.param(self.rule_embed);
                tape.row(m, pid.0 as usize)
            }
            PrevAction::Token(row) => {
                let m = tape.param(self.tok_embed);
                tape.row(m, row.min(self.n_terminal_words - 1))
            }
        }
    }

    /// Token row used when an action feeds back into the decoder: vocabulary
    /// id when the surface is known, otherwise the unknown row. Close is the
    /// reserved row 0.
    pub fn token_row(&self, vocab_id: Option<usize>) -> usize {
        vocab_id.unwrap_or(UNK_TOKEN_ID)
    }

    // -- decoder ------------------------------------------------------------

    /// One decoder update. `parent` carries the stored hidden state and
    /// action embedding of the step that created the frontier node; `None`
    /// means the frontier is the root (zero parent vector).
    #[allow(clippy::too_many_arguments)]
    pub fn decoder_step<'t>(
        &self,
        tape: &mut Tape<'t>,
        enc: &Encoding,
        prev_h: Var,
        prev_c: Var,
        prev_action: Var,
        parent: Option<(Var, Var)>,
        frontier_ty: NodeTypeId,
        dropout: Option<&mut DropoutState>,
    ) -> Result<StepOutput, ModelError> {
        if frontier_ty.0 as usize >= self.n_types {
            return Err(ModelError::UnknownNodeType(frontier_ty.0));
        }
        let (alpha, ctx) = self.attend(tape, prev_h, enc);
        let (parent_h, parent_emb) = match parent {
            Some((h, e)) => (h, e),
            None => (tape.zeros(self.dims.rnn), tape.zeros(self.dims.embed)),
        };
        let ntype_m = tape.param(self.ntype_embed);
        let ntype = tape.row(ntype_m, frontier_ty.0 as usize);
        let mut x = tape.concat(&[prev_action, ctx, parent_h, parent_emb, ntype]);
        let mut output_mask: Option<Vec<f64>> = None;
        if let Some(state) = dropout {
            x = apply_dropout(tape, x, &state.input_mask);
            output_mask = Some(dropout_mask(&mut state.rng, self.dims.rnn, state.p));
        }
        let (h, c) = self.dec.step(tape, x, prev_h, prev_c);
        let head_h = match &output_mask {
            Some(mask) => apply_dropout(tape, h, mask),
            None => h,
        };
        Ok(StepOutput { h, c, head_h, ctx, alpha })
    }

    // -- probability heads ----------------------------------------------------

    /// Softmax over every production (legality is enforced by the search, not
    /// the distribution).
    pub fn apply_rule_dist<'t>(&self, tape: &mut Tape<'t>, head_h: Var) -> Var {
        let logits = self.rule_logits(tape, head_h);
        tape.softmax(logits)
    }

    pub fn apply_rule_log_dist<'t>(&self, tape: &mut Tape<'t>, head_h: Var) -> Var {
        let logits = self.rule_logits(tape, head_h);
        tape.log_softmax(logits)
    }

    fn rule_logits<'t>(&self, tape: &mut Tape<'t>, head_h: Var) -> Var {
        let g = self.rule_proj.apply_tanh(tape, head_h);
        let emb = tape.param(self.rule_embed);
        let scores = tape.matvec(emb, g);
        let bias = tape.param(self.rule_bias);
        tape.add(scores, bias)
    }

    /// Masked ablation variant: softmax restricted to `legal` rule ids.
    pub fn apply_rule_log_dist_masked<'t>(
        &self,
        tape: &mut Tape<'t>,
        head_h: Var,
        legal: &[ProdId],
    ) -> (Vec<ProdId>, Var) {
        let logits = self.rule_logits(tape, head_h);
        let picked: Vec<Var> = legal.iter().map(|pid| tape.index(logits, pid.0 as usize)).collect();
        let stacked = tape.stack(&picked);
        (legal.to_vec(), tape.log_softmax(stacked))
    }

    /// The three ingredients of the generate-or-copy marginal.
    pub fn gen_token_parts<'t>(
        &self,
        tape: &mut Tape<'t>,
        enc: &Encoding,
        head_h: Var,
        ctx: Var,
    ) -> GenParts {
        let sel_w = tape.param(self.selector_w);
        let sel_b = tape.param(self.selector_b);
        let sel_logits = tape.matvec(sel_w, head_h);
        let sel_logits = tape.add(sel_logits, sel_b);
        let selector = tape.softmax(sel_logits);

        let joint = tape.concat(&[head_h, ctx]);
        let g = self.gen_proj.apply_tanh(tape, joint);
        let emb = tape.param(self.tok_embed);
        let vocab_logits = tape.matvec(emb, g);
        let tok_bias = tape.param(self.tok_bias);
        let vocab_logits = tape.add(vocab_logits, tok_bias);
        let vocab = tape.softmax(vocab_logits);

        let copy_scores: Vec<Var> = enc
            .states
            .iter()
            .map(|&hi| {
                let joint = tape.concat(&[hi, head_h, ctx]);
                self.pointer.score(tape, joint)
            })
            .collect();
        let stacked = tape.stack(&copy_scores);
        let copy = tape.softmax(stacked);

        GenParts { selector, vocab, copy }
    }

    /// Marginal probability of one gold token target (vocabulary route plus
    /// all matching copy routes).
    pub fn token_marginal<'t>(
        &self,
        tape: &mut Tape<'t>,
        parts: &GenParts,
        vocab_id: Option<usize>,
        copy_positions: &[usize],
    ) -> Option<Var> {
        let mut routes: Vec<Var> = Vec::new();
        if let Some(id) = vocab_id {
            let p_gen = tape.index(parts.selector, 0);
            let p_word = tape.index(parts.vocab, id);
            routes.push(tape.mul(p_gen, p_word));
        }
        if !copy_positions.is_empty() {
            let p_copy = tape.index(parts.selector, 1);
            let p_pos = tape.index_sum(parts.copy, copy_positions);
            routes.push(tape.mul(p_copy, p_pos));
        }
        if routes.is_empty() {
            None
        } else {
            Some(tape.add_n(&routes))
        }
    }

    // -- teacher-forced sequence probability -----------------------------------

    /// Log probability of an oracle-bound action sequence under the model.
    /// Returns the scalar tape variable so callers can differentiate it.
    pub fn sequence_log_prob_tape<'t>(
        &self,
        tape: &mut Tape<'t>,
        src_ids: &[usize],
        src_oov: &[bool],
        steps: &[BoundStep],
        mut dropout: Option<&mut DropoutState>,
    ) -> Result<Var, ModelError> {
        let enc = self.encode(tape, src_ids, src_oov)?;
        let zero_h = tape.zeros(self.dims.rnn);
        let zero_c = tape.zeros(self.dims.rnn);
        let start = self.action_embedding(tape, PrevAction::Start);
        // stored[t] = (h, c, action embedding) after step t; index 0 is the
        // pre-derivation state whose parent contribution is all zeros.
        let mut stored_h: Vec<Var> = vec![zero_h];
        let mut stored_c: Vec<Var> = vec![zero_c];
        let mut stored_emb: Vec<Var> = vec![start];
        let mut log_terms: Vec<Var> = Vec::with_capacity(steps.len());

        for (idx, step) in steps.iter().enumerate() {
            let t = idx + 1;
            let prev_h = stored_h[t - 1];
            let prev_c = stored_c[t - 1];
            let prev_action = stored_emb[t - 1];
            let parent = if step.parent == 0 {
                None
            } else {
                Some((stored_h[step.parent], stored_emb[step.parent]))
            };
            let out = self.decoder_step(
                tape,
                &enc,
                prev_h,
                prev_c,
                prev_action,
                parent,
                step.frontier_ty,
                dropout.as_deref_mut(),
            )?;

            let (term, emb) = match &step.target {
                BoundTarget::Rule(pid) => {
                    let ls = self.apply_rule_log_dist(tape, out.head_h);
                    let term = tape.index(ls, pid.0 as usize);
                    let emb = self.action_embedding(tape, PrevAction::Rule(*pid));
                    (term, emb)
                }
                BoundTarget::Close => {
                    let parts = self.gen_token_parts(tape, &enc, out.head_h, out.ctx);
                    let p = self
                        .token_marginal(tape, &parts, Some(CLOSE_TOKEN_ID), &[])
                        .expect("close always has the vocabulary route");
                    let term = tape.log(p);
                    let emb = self.action_embedding(tape, PrevAction::Token(CLOSE_TOKEN_ID));
                    (term, emb)
                }
                BoundTarget::Token { vocab_id, copy_positions, .. } => {
                    let parts = self.gen_token_parts(tape, &enc, out.head_h, out.ctx);
                    let p = self
                        .token_marginal(tape, &parts, *vocab_id, copy_positions)
                        .ok_or(ModelError::ZeroProbGold(t))?;
                    let term = tape.log(p);
                    let emb =
                        self.action_embedding(tape, PrevAction::Token(self.token_row(*vocab_id)));
                    (term, emb)
                }
            };
            log_terms.push(term);
            stored_h.push(out.h);
            stored_c.push(out.c);
            stored_emb.push(emb);
        }
        Ok(tape.add_n(&log_terms))
    }

    /// Value-only convenience wrapper.
    pub fn sequence_log_prob(
        &self,
        src_ids: &[usize],
        src_oov: &[bool],
        steps: &[BoundStep],
    ) -> Result<f64, ModelError> {
        let mut tape = Tape::new(&self.store);
        let total = self.sequence_log_prob_tape(&mut tape, src_ids, src_oov, steps, None)?;
        Ok(tape.scalar(total))
    }

    /// Negative log-likelihood of one example plus its gradients.
    pub fn example_loss_and_grads(
        &self,
        src_ids: &[usize],
        src_oov: &[bool],
        steps: &[BoundStep],
        dropout_seed: Option<u64>,
        grads: &mut GradStore,
    ) -> Result<f64, ModelError> {
        let mut tape = Tape::new(&self.store);
        let mut dropout = dropout_seed.and_then(|s| self.dropout_state(s));
        let total =
            self.sequence_log_prob_tape(&mut tape, src_ids, src_oov, steps, dropout.as_mut())?;
        let loss = tape.scale(total, -1.0);
        tape.backward(loss, grads);
        Ok(tape.scalar(loss))
    }

    // -- value-level decoding interface -----------------------------------------

    pub fn encode_values(
        &self,
        src_ids: &[usize],
        src_oov: &[bool],
    ) -> Result<EncodingValues, ModelError> {
        let mut tape = Tape::new(&self.store);
        let enc = self.encode(&mut tape, src_ids, src_oov)?;
        Ok(EncodingValues {
            states: enc.states.iter().map(|&v| tape.value(v).to_vec()).collect(),
            oov: enc.oov.clone(),
        })
    }

    pub fn start_embedding_values(&self) -> Vec<f64> {
        self.store.get(self.start_embed).data.clone()
    }

    pub fn action_embedding_values(&self, prev: PrevAction) -> Vec<f64> {
        match prev {
            PrevAction::Start => self.store.get(self.start_embed).data.clone(),
            PrevAction::Rule(pid) => {
                let t = self.store.get(self.rule_embed);
                t.data[pid.0 as usize * t.cols..(pid.0 as usize + 1) * t.cols].to_vec()
            }
            PrevAction::Token(row) => {
                let t = self.store.get(self.tok_embed);
                let row = row.min(self.n_terminal_words - 1);
                t.data[row * t.cols..(row + 1) * t.cols].to_vec()
            }
        }
    }

    /// Runs one decoder step on a throwaway tape and extracts the head
    /// distribution as plain values.
    #[allow(clippy::too_many_arguments)]
    pub fn step_values(
        &self,
        enc: &EncodingValues,
        prev_h: &[f64],
        prev_c: &[f64],
        prev_action_emb: &[f64],
        parent: Option<(&[f64], &[f64])>,
        frontier_ty: NodeTypeId,
        frontier_kind: NodeKind,
    ) -> Result<StepValues, ModelError> {
        let mut tape = Tape::new(&self.store);
        let enc_vars = Encoding {
            states: enc.states.iter().map(|s| tape.constant(s.clone())).collect(),
            matrix: {
                let n = enc.states.len();
                let cols = enc.states[0].len();
                let flat: Vec<f64> = enc.states.iter().flatten().copied().collect();
                tape.constant_matrix(n, cols, flat)
            },
            oov: enc.oov.clone(),
        };
        let prev_h_v = tape.constant(prev_h.to_vec());
        let prev_c_v = tape.constant(prev_c.to_vec());
        let prev_a_v = tape.constant(prev_action_emb.to_vec());
        let parent_v = parent.map(|(h, e)| {
            let hv = tape.constant(h.to_vec());
            let ev = tape.constant(e.to_vec());
            (hv, ev)
        });
        let out = self.decoder_step(
            &mut tape,
            &enc_vars,
            prev_h_v,
            prev_c_v,
            prev_a_v,
            parent_v,
            frontier_ty,
            None,
        )?;
        let head = match frontier_kind {
            NodeKind::Nonterminal => {
                let dist = self.apply_rule_dist(&mut tape, out.head_h);
                HeadValues::Rules(tape.value(dist).to_vec())
            }
            NodeKind::VariableTerminal => {
                let parts = self.gen_token_parts(&mut tape, &enc_vars, out.head_h, out.ctx);
                HeadValues::Tokens {
                    selector: tape.value(parts.selector).to_vec(),
                    vocab: tape.value(parts.vocab).to_vec(),
                    copy: tape.value(parts.copy).to_vec(),
                }
            }
            NodeKind::OperationTerminal => {
                return Err(ModelError::BadConfig("operation terminal can not be frontier".into()))
            }
        };
        Ok(StepValues { h: tape.value(out.h).to_vec(), c: tape.value(out.c).to_vec(), head })
    }
}

pub struct Encoding {
    /// Per-word context vectors, each twice the encoder hidden size.
    pub states: Vec<Var>,
    /// The same vectors stacked as an (n x 2R) matrix for attention reads.
    pub matrix: Var,
    pub oov: Vec<bool>,
}

pub struct StepOutput {
    pub h: Var,
    pub c: Var,
    /// Hidden state after output dropout; feeds the probability heads.
    pub head_h: Var,
    pub ctx: Var,
    pub alpha: Var,
}

pub struct GenParts {
    /// `[p(gen), p(copy)]`
    pub selector: Var,
    pub vocab: Var,
    pub copy: Var,
}

#[derive(Clone, Debug)]
pub struct EncodingValues {
    pub states: Vec<Vec<f64>>,
    pub oov: Vec<bool>,
}

#[derive(Clone, Debug)]
pub enum HeadValues {
    Rules(Vec<f64>),
    Tokens { selector: Vec<f64>, vocab: Vec<f64>, copy: Vec<f64> },
}

#[derive(Clone, Debug)]
pub struct StepValues {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
    pub head: HeadValues,
}

impl HeadValues {
    /// Marginal probability of a surface token given its routes.
    pub fn token_marginal(&self, vocab_id: Option<usize>, copy_positions: &[usize]) -> f64 {
        match self {
            HeadValues::Tokens { selector, vocab, copy } => {
                let mut p = 0.0;
                if let Some(id) = vocab_id {
                    p += selector[0] * vocab[id];
                }
                if !copy_positions.is_empty() {
                    p += selector[1] * copy_positions.iter().map(|&i| copy[i]).sum::<f64>();
                }
                p
            }
            HeadValues::Rules(_) => 0.0,
        }
    }
}
