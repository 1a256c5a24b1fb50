//! Neural building blocks on top of the tape: LSTM cell, single-hidden-layer
//! scorer, dropout masks and weight initialization.

use rand::Rng;

use super::tape::{ParamStore, Tape, Var};

pub fn uniform_init(rng: &mut impl Rng, len: usize, bound: f64) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-bound..bound)).collect()
}

/// Scaled-uniform bound for projection matrices.
pub fn glorot_init(rng: &mut impl Rng, rows: usize, cols: usize) -> Vec<f64> {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    uniform_init(rng, rows * cols, bound)
}

pub const RECURRENT_INIT_BOUND: f64 = 0.08;

/// Gated recurrent cell with separate weight matrices per gate.
#[derive(Clone, Copy, Debug)]
pub struct LstmCell {
    pub input_size: usize,
    pub hidden_size: usize,
    // input, forget, output, candidate gates: (W x + U h + b)
    w: [usize; 4],
    u: [usize; 4],
    b: [usize; 4],
}

impl LstmCell {
    pub fn register(
        store: &mut ParamStore,
        prefix: &str,
        input_size: usize,
        hidden_size: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let gate_names = ["i", "f", "o", "g"];
        let mut w = [0; 4];
        let mut u = [0; 4];
        let mut b = [0; 4];
        for (k, gate) in gate_names.iter().enumerate() {
            w[k] = store.add(
                &format!("{prefix}.w{gate}"),
                hidden_size,
                input_size,
                glorot_init(rng, hidden_size, input_size),
            );
            u[k] = store.add(
                &format!("{prefix}.u{gate}"),
                hidden_size,
                hidden_size,
                uniform_init(rng, hidden_size * hidden_size, RECURRENT_INIT_BOUND),
            );
            b[k] = store.add(&format!("{prefix}.b{gate}"), hidden_size, 1, vec![0.0; hidden_size]);
        }
        LstmCell { input_size, hidden_size, w, u, b }
    }

    /// One gated update: returns the next (hidden, cell) pair.
    pub fn step(&self, tape: &mut Tape, x: Var, h: Var, c: Var) -> (Var, Var) {
        assert_eq!(tape.shape(x).0, self.input_size, "lstm input size mismatch");
        assert_eq!(tape.shape(h).0, self.hidden_size, "lstm hidden size mismatch");
        let gate = |tape: &mut Tape, k: usize| {
            let w = tape.param(self.w[k]);
            let u = tape.param(self.u[k]);
            let b = tape.param(self.b[k]);
            let wx = tape.matvec(w, x);
            let uh = tape.matvec(u, h);
            let s = tape.add(wx, uh);
            tape.add(s, b)
        };
        let i_raw = gate(tape, 0);
        let i = tape.sigmoid(i_raw);
        let f_raw = gate(tape, 1);
        let f = tape.sigmoid(f_raw);
        let o_raw = gate(tape, 2);
        let o = tape.sigmoid(o_raw);
        let g_raw = gate(tape, 3);
        let g = tape.tanh(g_raw);
        let fc = tape.mul(f, c);
        let ig = tape.mul(i, g);
        let c_next = tape.add(fc, ig);
        let tc = tape.tanh(c_next);
        let h_next = tape.mul(o, tc);
        (h_next, c_next)
    }
}

/// Single-hidden-layer tanh scorer producing one scalar per call.
#[derive(Clone, Copy, Debug)]
pub struct Mlp1 {
    pub input_size: usize,
    pub hidden_size: usize,
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
}

impl Mlp1 {
    pub fn register(
        store: &mut ParamStore,
        prefix: &str,
        input_size: usize,
        hidden_size: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let w1 = store.add(
            &format!("{prefix}.w1"),
            hidden_size,
            input_size,
            glorot_init(rng, hidden_size, input_size),
        );
        let b1 = store.add(&format!("{prefix}.b1"), hidden_size, 1, vec![0.0; hidden_size]);
        let w2 = store.add(&format!("{prefix}.w2"), hidden_size, 1, glorot_init(rng, hidden_size, 1));
        let b2 = store.add(&format!("{prefix}.b2"), 1, 1, vec![0.0]);
        Mlp1 { input_size, hidden_size, w1, b1, w2, b2 }
    }

    pub fn score(&self, tape: &mut Tape, input: Var) -> Var {
        assert_eq!(tape.shape(input).0, self.input_size, "scorer input size mismatch");
        let w1 = tape.param(self.w1);
        let b1 = tape.param(self.b1);
        let w2 = tape.param(self.w2);
        let b2 = tape.param(self.b2);
        let pre = tape.matvec(w1, input);
        let pre = tape.add(pre, b1);
        let hidden = tape.tanh(pre);
        let s = tape.dot_product(w2, hidden);
        tape.add(s, b2)
    }
}

/// Projection into a fixed output width with a tanh hidden layer, used ahead
/// of the rule and token softmax heads.
#[derive(Clone, Copy, Debug)]
pub struct Projection {
    pub input_size: usize,
    pub output_size: usize,
    w: usize,
    b: usize,
}

impl Projection {
    pub fn register(
        store: &mut ParamStore,
        prefix: &str,
        input_size: usize,
        output_size: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let w = store.add(
            &format!("{prefix}.w"),
            output_size,
            input_size,
            glorot_init(rng, output_size, input_size),
        );
        let b = store.add(&format!("{prefix}.b"), output_size, 1, vec![0.0; output_size]);
        Projection { input_size, output_size, w, b }
    }

    pub fn apply_tanh(&self, tape: &mut Tape, input: Var) -> Var {
        let w = tape.param(self.w);
        let b = tape.param(self.b);
        let pre = tape.matvec(w, input);
        let pre = tape.add(pre, b);
        tape.tanh(pre)
    }

    pub fn apply_linear(&self, tape: &mut Tape, input: Var) -> Var {
        let w = tape.param(self.w);
        let b = tape.param(self.b);
        let pre = tape.matvec(w, input);
        tape.add(pre, b)
    }
}

/// Inverted-dropout mask: keeps activate scale constant in expectation.
/// With `p == 0` the mask is all ones, so training equals evaluation.
pub fn dropout_mask(rng: &mut impl Rng, len: usize, p: f64) -> Vec<f64> {
    assert!((0.0..1.0).contains(&p), "dropout probability must be in [0, 1)");
    if p == 0.0 {
        return vec![1.0; len];
    }
    let keep = 1.0 - p;
    (0..len).map(|_| if rng.gen_bool(keep) { 1.0 / keep } else { 0.0 }).collect()
}

/// Applies a pre-sampled mask; evaluation mode is simply not applying one.
pub fn apply_dropout(tape: &mut Tape, x: Var, mask: &[f64]) -> Var {
    assert_eq!(tape.shape(x).0, mask.len(), "dropout mask length mismatch");
    let m = tape.constant(mask.to_vec());
    tape.mul(x, m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::tape::GradStore;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_weight_lstm_outputs_zero_hidden() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cell = LstmCell::register(&mut store, "cell", 3, 4, &mut rng);
        for t in &mut store.tensors {
            t.data.iter_mut().for_each(|v| *v = 0.0);
        }
        let mut tape = Tape::new(&store);
        let x = tape.constant(vec![0.7, -0.3, 2.0]);
        let h = tape.zeros(4);
        let c = tape.zeros(4);
        let (h1, _) = cell.step(&mut tape, x, h, c);
        assert_eq!(tape.value(h1), &[0.0; 4]);
    }

    #[test]
    fn lstm_output_length_matches_hidden_size() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cell = LstmCell::register(&mut store, "cell", 8, 256, &mut rng);
        let mut tape = Tape::new(&store);
        let x = tape.constant(vec![0.1; 8]);
        let h = tape.zeros(256);
        let c = tape.zeros(256);
        let (h1, c1) = cell.step(&mut tape, x, h, c);
        assert_eq!(tape.shape(h1).0, 256);
        assert_eq!(tape.shape(c1).0, 256);
    }

    #[test]
    fn lstm_gradients_match_finite_differences() {
        for seed in 0..5u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut store = ParamStore::new();
            let cell = LstmCell::register(&mut store, "cell", 3, 4, &mut rng);
            let x_data = vec![0.3, -0.8, 0.5];
            // Two chained steps so recurrent weights get a real gradient.
            let forward = |store: &ParamStore| -> f64 {
                let mut tape = Tape::new(store);
                let x = tape.constant(x_data.clone());
                let h0 = tape.zeros(4);
                let c0 = tape.zeros(4);
                let (h1, c1) = cell.step(&mut tape, x, h0, c0);
                let x2 = tape.constant(x_data.clone());
                let (h2, _) = cell.step(&mut tape, x2, h1, c1);
                let sm = tape.softmax(h2);
                let lg = tape.log(sm);
                let out = tape.index(lg, 2);
                tape.scalar(out)
            };
            let mut grads = GradStore::zeros_like(&store);
            {
                let mut tape = Tape::new(&store);
                let x = tape.constant(x_data.clone());
                let h0 = tape.zeros(4);
                let c0 = tape.zeros(4);
                let (h1, c1) = cell.step(&mut tape, x, h0, c0);
                let x2 = tape.constant(x_data.clone());
                let (h2, _) = cell.step(&mut tape, x2, h1, c1);
                let sm = tape.softmax(h2);
                let lg = tape.log(sm);
                let out = tape.index(lg, 2);
                tape.backward(out, &mut grads);
            }
            let eps = 1e-5;
            for t in 0..store.tensors.len() {
                for i in 0..store.tensors[t].len() {
                    let orig = store.tensors[t].data[i];
                    store.tensors[t].data[i] = orig + eps;
                    let up = forward(&store);
                    store.tensors[t].data[i] = orig - eps;
                    let down = forward(&store);
                    store.tensors[t].data[i] = orig;
                    let fd = (up - down) / (2.0 * eps);
                    let an = grads.grads[t][i];
                    let denom = an.abs().max(fd.abs());
                    if denom < 1e-6 {
                        assert!((an - fd).abs() < 1e-8);
                    } else {
                        assert!((an - fd).abs() / denom <= 1e-4, "rel err too high");
                    }
                }
            }
        }
    }

    #[test]
    fn zero_weight_scorer_returns_bias() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mlp = Mlp1::register(&mut store, "att", 5, 50, &mut rng);
        for t in &mut store.tensors {
            t.data.iter_mut().for_each(|v| *v = 0.0);
        }
        assert_eq!(mlp.hidden_size, 50);
        let mut tape = Tape::new(&store);
        let a = tape.constant(vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        let b = tape.constant(vec![-1.0; 5]);
        let sa = mlp.score(&mut tape, a);
        let sb = mlp.score(&mut tape, b);
        assert_eq!(tape.scalar(sa), 0.0);
        assert_eq!(tape.scalar(sa), tape.scalar(sb));
    }

    #[test]
    fn scorer_gradients_match_finite_differences() {
        for seed in 0..5u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 10);
            let mut store = ParamStore::new();
            let mlp = Mlp1::register(&mut store, "s", 4, 6, &mut rng);
            let input = vec![0.2, -0.4, 0.9, 0.1];
            let forward = |store: &ParamStore| {
                let mut tape = Tape::new(store);
                let x = tape.constant(input.clone());
                let s = mlp.score(&mut tape, x);
                tape.scalar(s)
            };
            let mut grads = GradStore::zeros_like(&store);
            {
                let mut tape = Tape::new(&store);
                let x = tape.constant(input.clone());
                let s = mlp.score(&mut tape, x);
                tape.backward(s, &mut grads);
            }
            let eps = 1e-5;
            for t in 0..store.tensors.len() {
                for i in 0..store.tensors[t].len() {
                    let orig = store.tensors[t].data[i];
                    store.tensors[t].data[i] = orig + eps;
                    let up = forward(&store);
                    store.tensors[t].data[i] = orig - eps;
                    let down = forward(&store);
                    store.tensors[t].data[i] = orig;
                    let fd = (up - down) / (2.0 * eps);
                    let an = grads.grads[t][i];
                    let denom = an.abs().max(fd.abs());
                    if denom < 1e-6 {
                        assert!((an - fd).abs() < 1e-8);
                    } else {
                        assert!((an - fd).abs() / denom <= 1e-4);
                    }
                }
            }
        }
    }

    #[test]
    fn dropout_zero_probability_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mask = dropout_mask(&mut rng, 16, 0.0);
        assert!(mask.iter().all(|&m| m == 1.0));
        let store = ParamStore::new();
        let mut tape = Tape::new(&store);
        let x = tape.constant(vec![0.5; 16]);
        let y = apply_dropout(&mut tape, x, &mask);
        assert_eq!(tape.value(y), tape.value(x));
    }

    #[test]
    fn dropout_mask_scales_kept_units() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for &p in &[0.2, 0.3, 0.4] {
            let mask = dropout_mask(&mut rng, 10_000, p);
            let keep = 1.0 - p;
            assert!(mask.iter().all(|&m| m == 0.0 || (m - 1.0 / keep).abs() < 1e-12));
            let kept = mask.iter().filter(|&&m| m != 0.0).count() as f64 / 10_000.0;
            assert!((kept - keep).abs() < 0.03, "kept fraction {kept} far from {keep}");
        }
    }
}
