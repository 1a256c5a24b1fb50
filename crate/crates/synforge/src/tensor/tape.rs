//! Reverse-mode differentiation over a flat tape of dense f64 tensors.
//!
//! Values are vectors or row-major matrices. A tape borrows the parameter
//! store, so parameter matrices are never copied into the graph; decoding
//! builds a short-lived tape per step and training keeps one tape per
//! example sequence. All arithmetic is 64-bit; checkpoints round to 32-bit
//! at serialization time only.

use std::collections::HashMap;

/// One named learnable tensor. `cols == 1` marks a vector.
#[derive(Clone, Debug)]
pub struct TensorData {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl TensorData {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    pub tensors: Vec<TensorData>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, rows: usize, cols: usize, data: Vec<f64>) -> usize {
        assert_eq!(data.len(), rows * cols, "tensor {name} shape mismatch");
        assert!(data.iter().all(|v| v.is_finite()), "tensor {name} has non-finite init");
        self.tensors.push(TensorData { name: name.to_string(), rows, cols, data });
        self.tensors.len() - 1
    }

    pub fn get(&self, id: usize) -> &TensorData {
        &self.tensors[id]
    }

    pub fn total_len(&self) -> usize {
        self.tensors.iter().map(TensorData::len).sum()
    }
}

/// Per-parameter gradient buffers, same shapes as the store.
#[derive(Clone, Debug)]
pub struct GradStore {
    pub grads: Vec<Vec<f64>>,
}

impl GradStore {
    pub fn zeros_like(store: &ParamStore) -> Self {
        GradStore { grads: store.tensors.iter().map(|t| vec![0.0; t.len()]).collect() }
    }

    pub fn add_assign(&mut self, other: &GradStore) {
        for (a, b) in self.grads.iter_mut().zip(&other.grads) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, k: f64) {
        for g in &mut self.grads {
            for x in g.iter_mut() {
                *x *= k;
            }
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.grads
            .iter()
            .flat_map(|g| g.iter())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Clone, Debug)]
enum Op {
    Const,
    Param(usize),
    MatVec(Var, Var),
    VecMat(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    Tanh(Var),
    Sigmoid(Var),
    Concat(Vec<Var>),
    Stack(Vec<Var>),
    StackRows(Vec<Var>),
    Softmax(Var),
    LogSoftmax(Var),
    Row(Var, usize),
    Index(Var, usize),
    IndexSum(Var, Vec<usize>),
    Dot(Var, Var),
    Scale(Var, f64),
    Log(Var),
    AddN(Vec<Var>),
}

struct Node {
    op: Op,
    rows: usize,
    cols: usize,
    /// Empty for `Param` nodes; their values live in the store.
    value: Vec<f64>,
}

pub struct Tape<'a> {
    store: &'a ParamStore,
    nodes: Vec<Node>,
    param_cache: HashMap<usize, Var>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl<'a> Tape<'a> {
    pub fn new(store: &'a ParamStore) -> Self {
        Tape { store, nodes: Vec::new(), param_cache: HashMap::new() }
    }

    pub fn value(&self, v: Var) -> &[f64] {
        let node = &self.nodes[v.0];
        match node.op {
            Op::Param(id) => &self.store.get(id).data,
            _ => &node.value,
        }
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        let node = &self.nodes[v.0];
        (node.rows, node.cols)
    }

    fn push(&mut self, op: Op, rows: usize, cols: usize, value: Vec<f64>) -> Var {
        self.nodes.push(Node { op, rows, cols, value });
        Var(self.nodes.len() - 1)
    }

    pub fn param(&mut self, id: usize) -> Var {
        if let Some(&v) = self.param_cache.get(&id) {
            return v;
        }
        let t = self.store.get(id);
        let (rows, cols) = (t.rows, t.cols);
        let v = self.push(Op::Param(id), rows, cols, Vec::new());
        self.param_cache.insert(id, v);
        v
    }

    pub fn constant(&mut self, data: Vec<f64>) -> Var {
        let rows = data.len();
        self.push(Op::Const, rows, 1, data)
    }

    pub fn constant_matrix(&mut self, rows: usize, cols: usize, data: Vec<f64>) -> Var {
        assert_eq!(data.len(), rows * cols);
        self.push(Op::Const, rows, cols, data)
    }

    pub fn zeros(&mut self, len: usize) -> Var {
        self.constant(vec![0.0; len])
    }

    /// `(r x c) . (c) -> (r)`
    pub fn matvec(&mut self, m: Var, v: Var) -> Var {
        let (rows, cols) = self.shape(m);
        let (vlen, vcols) = self.shape(v);
        assert_eq!(cols, vlen, "matvec shape mismatch");
        assert_eq!(vcols, 1);
        let mut out = vec![0.0; rows];
        {
            let mdata = self.value(m);
            let vdata = self.value(v);
            for (r, slot) in out.iter_mut().enumerate() {
                *slot = dot(&mdata[r * cols..(r + 1) * cols], vdata);
            }
        }
        self.push(Op::MatVec(m, v), rows, 1, out)
    }

    /// `(r) . (r x c) -> (c)`; used for attention-weighted sums.
    pub fn vecmat(&mut self, v: Var, m: Var) -> Var {
        let (rows, cols) = self.shape(m);
        let (vlen, _) = self.shape(v);
        assert_eq!(rows, vlen, "vecmat shape mismatch");
        let mut out = vec![0.0; cols];
        {
            let mdata = self.value(m);
            let vdata = self.value(v);
            for r in 0..rows {
                let w = vdata[r];
                let row = &mdata[r * cols..(r + 1) * cols];
                for (o, x) in out.iter_mut().zip(row) {
                    *o += w * x;
                }
            }
        }
        self.push(Op::VecMat(v, m), cols, 1, out)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "add shape mismatch");
        let out: Vec<f64> = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x + y).collect();
        let (rows, cols) = self.shape(a);
        self.push(Op::Add(a, b), rows, cols, out)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "mul shape mismatch");
        let out: Vec<f64> = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x * y).collect();
        let (rows, cols) = self.shape(a);
        self.push(Op::Mul(a, b), rows, cols, out)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let out: Vec<f64> = self.value(x).iter().map(|v| v.tanh()).collect();
        let (rows, cols) = self.shape(x);
        self.push(Op::Tanh(x), rows, cols, out)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let out: Vec<f64> = self.value(x).iter().map(|v| 1.0 / (1.0 + (-v).exp())).collect();
        let (rows, cols) = self.shape(x);
        self.push(Op::Sigmoid(x), rows, cols, out)
    }

    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let mut out = Vec::new();
        for &p in parts {
            assert_eq!(self.shape(p).1, 1, "concat expects vectors");
            out.extend_from_slice(self.value(p));
        }
        let rows = out.len();
        self.push(Op::Concat(parts.to_vec()), rows, 1, out)
    }

    /// Scalars into a vector.
    pub fn stack(&mut self, parts: &[Var]) -> Var {
        let mut out = Vec::with_capacity(parts.len());
        for &p in parts {
            assert_eq!(self.shape(p), (1, 1), "stack expects scalars");
            out.push(self.value(p)[0]);
        }
        let rows = out.len();
        self.push(Op::Stack(parts.to_vec()), rows, 1, out)
    }

    /// Equal-length vectors into a matrix, one per row.
    pub fn stack_rows(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty());
        let cols = self.shape(parts[0]).0;
        let mut out = Vec::with_capacity(parts.len() * cols);
        for &p in parts {
            assert_eq!(self.shape(p), (cols, 1), "stack_rows expects equal vectors");
            out.extend_from_slice(self.value(p));
        }
        self.push(Op::StackRows(parts.to_vec()), parts.len(), cols, out)
    }

    /// Numerically stabilized softmax over a vector.
    pub fn softmax(&mut self, x: Var) -> Var {
        let xs = self.value(x);
        assert!(!xs.is_empty(), "softmax over empty scores");
        let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = xs.iter().map(|v| (v - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        let out: Vec<f64> = exps.iter().map(|e| e / sum).collect();
        let rows = out.len();
        self.push(Op::Softmax(x), rows, 1, out)
    }

    pub fn log_softmax(&mut self, x: Var) -> Var {
        let xs = self.value(x);
        assert!(!xs.is_empty(), "log_softmax over empty scores");
        let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let log_sum = xs.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
        let out: Vec<f64> = xs.iter().map(|v| v - log_sum).collect();
        let rows = out.len();
        self.push(Op::LogSoftmax(x), rows, 1, out)
    }

    pub fn row(&mut self, m: Var, idx: usize) -> Var {
        let (rows, cols) = self.shape(m);
        assert!(idx < rows, "row index out of range");
        let out = self.value(m)[idx * cols..(idx + 1) * cols].to_vec();
        self.push(Op::Row(m, idx), cols, 1, out)
    }

    pub fn index(&mut self, v: Var, idx: usize) -> Var {
        assert!(idx < self.shape(v).0, "index out of range");
        let out = vec![self.value(v)[idx]];
        self.push(Op::Index(v, idx), 1, 1, out)
    }

    /// Sum of selected entries; used for summed copy routes.
    pub fn index_sum(&mut self, v: Var, idxs: &[usize]) -> Var {
        let data = self.value(v);
        let out = vec![idxs.iter().map(|&i| data[i]).sum()];
        self.push(Op::IndexSum(v, idxs.to_vec()), 1, 1, out)
    }

    pub fn dot_product(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "dot shape mismatch");
        let out = vec![dot(self.value(a), self.value(b))];
        self.push(Op::Dot(a, b), 1, 1, out)
    }

    pub fn scale(&mut self, x: Var, k: f64) -> Var {
        let out: Vec<f64> = self.value(x).iter().map(|v| v * k).collect();
        let (rows, cols) = self.shape(x);
        self.push(Op::Scale(x, k), rows, cols, out)
    }

    /// Elementwise natural log, clamped away from zero so that vanishing
    /// probabilities yield a large negative value instead of -inf.
    pub fn log(&mut self, x: Var) -> Var {
        let out: Vec<f64> = self.value(x).iter().map(|v| v.max(1e-300).ln()).collect();
        let (rows, cols) = self.shape(x);
        self.push(Op::Log(x), rows, cols, out)
    }

    pub fn add_n(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty());
        let (rows, cols) = self.shape(parts[0]);
        let mut out = vec![0.0; rows * cols];
        for &p in parts {
            assert_eq!(self.shape(p), (rows, cols), "add_n shape mismatch");
            for (o, x) in out.iter_mut().zip(self.value(p)) {
                *o += x;
            }
        }
        self.push(Op::AddN(parts.to_vec()), rows, cols, out)
    }

    pub fn scalar(&self, v: Var) -> f64 {
        assert_eq!(self.shape(v), (1, 1));
        self.value(v)[0]
    }

    /// Reverse pass from a scalar output; gradients for parameter nodes are
    /// accumulated into `grads`.
    pub fn backward(&self, output: Var, grads: &mut GradStore) {
        assert_eq!(self.shape(output), (1, 1), "backward expects a scalar output");
        let mut node_grads: Vec<Vec<f64>> = self
            .nodes
            .iter()
            .map(|n| vec![0.0; n.rows * n.cols])
            .collect();
        node_grads[output.0][0] = 1.0;

        for idx in (0..self.nodes.len()).rev() {
            if node_grads[idx].iter().all(|&g| g == 0.0) {
                continue;
            }
            let g = std::mem::take(&mut node_grads[idx]);
            let node = &self.nodes[idx];
            match &node.op {
                Op::Const => {}
                Op::Param(id) => {
                    for (slot, gi) in grads.grads[*id].iter_mut().zip(&g) {
                        *slot += gi;
                    }
                }
                Op::MatVec(m, v) => {
                    let (_, cols) = self.shape(*m);
                    let vval = self.value(*v).to_vec();
                    // dv = M^T g, dM = g (outer) v
                    let mut dv = vec![0.0; cols];
                    let mut dm = std::mem::take(&mut node_grads[m.0]);
                    {
                        let mval = self.value(*m);
                        for (r, gr) in g.iter().enumerate() {
                            if *gr == 0.0 {
                                continue;
                            }
                            let row = &mval[r * cols..(r + 1) * cols];
                            let dm_row = &mut dm[r * cols..(r + 1) * cols];
                            for c in 0..cols {
                                dv[c] += gr * row[c];
                                dm_row[c] += gr * vval[c];
                            }
                        }
                    }
                    node_grads[m.0] = dm;
                    for (slot, d) in node_grads[v.0].iter_mut().zip(&dv) {
                        *slot += d;
                    }
                }
                Op::VecMat(v, m) => {
                    let (rows, cols) = self.shape(*m);
                    let vval = self.value(*v).to_vec();
                    let mut dv = vec![0.0; rows];
                    let mut dm = std::mem::take(&mut node_grads[m.0]);
                    {
                        let mval = self.value(*m);
                        for r in 0..rows {
                            let row = &mval[r * cols..(r + 1) * cols];
                            dv[r] += dot(row, &g);
                            let w = vval[r];
                            let dm_row = &mut dm[r * cols..(r + 1) * cols];
                            for c in 0..cols {
                                dm_row[c] += w * g[c];
                            }
                        }
                    }
                    node_grads[m.0] = dm;
                    for (slot, d) in node_grads[v.0].iter_mut().zip(&dv) {
                        *slot += d;
                    }
                }
                Op::Add(a, b) => {
                    for (slot, gi) in node_grads[a.0].iter_mut().zip(&g) {
                        *slot += gi;
                    }
                    for (slot, gi) in node_grads[b.0].iter_mut().zip(&g) {
                        *slot += gi;
                    }
                }
                Op::Mul(a, b) => {
                    let av = self.value(*a).to_vec();
                    let bv = self.value(*b).to_vec();
                    for ((slot, gi), y) in node_grads[a.0].iter_mut().zip(&g).zip(&bv) {
                        *slot += gi * y;
                    }
                    for ((slot, gi), x) in node_grads[b.0].iter_mut().zip(&g).zip(&av) {
                        *slot += gi * x;
                    }
                }
                Op::Tanh(x) => {
                    let y = &node.value;
                    for ((slot, gi), yi) in node_grads[x.0].iter_mut().zip(&g).zip(y) {
                        *slot += gi * (1.0 - yi * yi);
                    }
                }
                Op::Sigmoid(x) => {
                    let y = &node.value;
                    for ((slot, gi), yi) in node_grads[x.0].iter_mut().zip(&g).zip(y) {
                        *slot += gi * yi * (1.0 - yi);
                    }
                }
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let len = self.shape(p).0;
                        for (slot, gi) in node_grads[p.0].iter_mut().zip(&g[offset..offset + len]) {
                            *slot += gi;
                        }
                        offset += len;
                    }
                }
                Op::Stack(parts) => {
                    for (i, &p) in parts.iter().enumerate() {
                        node_grads[p.0][0] += g[i];
                    }
                }
                Op::StackRows(parts) => {
                    let cols = node.cols;
                    for (r, &p) in parts.iter().enumerate() {
                        for (slot, gi) in node_grads[p.0].iter_mut().zip(&g[r * cols..(r + 1) * cols]) {
                            *slot += gi;
                        }
                    }
                }
                Op::Softmax(x) => {
                    let y = &node.value;
                    let inner: f64 = g.iter().zip(y).map(|(gi, yi)| gi * yi).sum();
                    for ((slot, gi), yi) in node_grads[x.0].iter_mut().zip(&g).zip(y) {
                        *slot += yi * (gi - inner);
                    }
                }
                Op::LogSoftmax(x) => {
                    let gsum: f64 = g.iter().sum();
                    let y = &node.value;
                    for ((slot, gi), yi) in node_grads[x.0].iter_mut().zip(&g).zip(y) {
                        *slot += gi - yi.exp() * gsum;
                    }
                }
                Op::Row(m, idx) => {
                    let cols = node.rows;
                    let base = idx * cols;
                    for (c, gi) in g.iter().enumerate() {
                        node_grads[m.0][base + c] += gi;
                    }
                }
                Op::Index(v, idx) => {
                    node_grads[v.0][*idx] += g[0];
                }
                Op::IndexSum(v, idxs) => {
                    for &i in idxs {
                        node_grads[v.0][i] += g[0];
                    }
                }
                Op::Dot(a, b) => {
                    let av = self.value(*a).to_vec();
                    let bv = self.value(*b).to_vec();
                    let gi = g[0];
                    for (slot, y) in node_grads[a.0].iter_mut().zip(&bv) {
                        *slot += gi * y;
                    }
                    for (slot, x) in node_grads[b.0].iter_mut().zip(&av) {
                        *slot += gi * x;
                    }
                }
                Op::Scale(x, k) => {
                    for (slot, gi) in node_grads[x.0].iter_mut().zip(&g) {
                        *slot += gi * k;
                    }
                }
                Op::Log(x) => {
                    let xv = self.value(*x).to_vec();
                    for ((slot, gi), xi) in node_grads[x.0].iter_mut().zip(&g).zip(&xv) {
                        *slot += gi / xi.max(1e-300);
                    }
                }
                Op::AddN(parts) => {
                    for &p in parts {
                        for (slot, gi) in node_grads[p.0].iter_mut().zip(&g) {
                            *slot += gi;
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_store(rng: &mut ChaCha8Rng, shapes: &[(&str, usize, usize)]) -> ParamStore {
        let mut store = ParamStore::new();
        for (name, r, c) in shapes {
            let data: Vec<f64> = (0..r * c).map(|_| rng.gen_range(-0.9..0.9)).collect();
            store.add(name, *r, *c, data);
        }
        store
    }

    /// Central finite differences against the tape gradient, over every
    /// scalar parameter and five seeds.
    fn gradcheck(shapes: &[(&str, usize, usize)], f: impl Fn(&mut Tape, &[Var]) -> Var) {
        for seed in 0..5u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut store = rand_store(&mut rng, shapes);
            let loss = |store: &ParamStore| -> f64 {
                let mut tape = Tape::new(store);
                let params: Vec<Var> = (0..store.tensors.len()).map(|i| tape.param(i)).collect();
                let out = f(&mut tape, &params);
                tape.scalar(out)
            };
            let mut grads = GradStore::zeros_like(&store);
            {
                let mut tape = Tape::new(&store);
                let params: Vec<Var> = (0..store.tensors.len()).map(|i| tape.param(i)).collect();
                let out = f(&mut tape, &params);
                tape.backward(out, &mut grads);
            }
            let eps = 1e-5;
            for t in 0..store.tensors.len() {
                for i in 0..store.tensors[t].len() {
                    let orig = store.tensors[t].data[i];
                    store.tensors[t].data[i] = orig + eps;
                    let up = loss(&store);
                    store.tensors[t].data[i] = orig - eps;
                    let down = loss(&store);
                    store.tensors[t].data[i] = orig;
                    let fd = (up - down) / (2.0 * eps);
                    let an = grads.grads[t][i];
                    let denom = an.abs().max(fd.abs());
                    if denom < 1e-6 {
                        assert!((an - fd).abs() < 1e-8, "near-zero grad mismatch: {an} vs {fd}");
                    } else {
                        let rel = (an - fd).abs() / denom;
                        assert!(rel <= 1e-4, "seed {seed} tensor {t} idx {i}: rel err {rel}");
                    }
                }
            }
        }
    }

    #[test]
    fn matvec_chain_gradcheck() {
        gradcheck(&[("m", 4, 3), ("v", 3, 1), ("b", 4, 1)], |tape, p| {
            let y = tape.matvec(p[0], p[1]);
            let y = tape.add(y, p[2]);
            let y = tape.tanh(y);
            let sm = tape.softmax(y);
            let lg = tape.log(sm);
            tape.index(lg, 1)
        });
    }

    #[test]
    fn vecmat_stack_gradcheck() {
        gradcheck(&[("a", 3, 1), ("b", 3, 1), ("w", 2, 3)], |tape, p| {
            let rows = tape.stack_rows(&[p[0], p[1]]);
            let s0 = tape.dot_product(p[0], p[1]);
            let s1 = tape.index(p[0], 0);
            let alpha = tape.stack(&[s0, s1]);
            let alpha = tape.softmax(alpha);
            let ctx = tape.vecmat(alpha, rows);
            let scores = tape.matvec(p[2], ctx);
            let ls = tape.log_softmax(scores);
            tape.index(ls, 0)
        });
    }

    #[test]
    fn mul_sigmoid_concat_gradcheck() {
        gradcheck(&[("a", 3, 1), ("b", 3, 1), ("w", 1, 6)], |tape, p| {
            let m = tape.mul(p[0], p[1]);
            let s = tape.sigmoid(m);
            let cat = tape.concat(&[s, p[1]]);
            let out = tape.matvec(p[2], cat);
            tape.index(out, 0)
        });
    }

    #[test]
    fn index_sum_row_gradcheck() {
        gradcheck(&[("emb", 4, 3), ("v", 3, 1)], |tape, p| {
            let r = tape.row(p[0], 2);
            let d = tape.dot_product(r, p[1]);
            let scores = tape.matvec(p[0], p[1]);
            let sm = tape.softmax(scores);
            let picked = tape.index_sum(sm, &[0, 3]);
            let lp = tape.log(picked);
            let scaled = tape.scale(lp, 0.5);
            tape.add_n(&[d, scaled])
        });
    }

    #[test]
    fn softmax_sums_to_one_and_is_symmetric() {
        let store = ParamStore::new();
        let mut tape = Tape::new(&store);
        let x = tape.constant(vec![0.0, 0.0]);
        let y = tape.softmax(x);
        assert_eq!(tape.value(y), &[0.5, 0.5]);
        let x = tape.constant(vec![500.0, 500.0, 400.0]);
        let y = tape.softmax(x);
        let total: f64 = tape.value(y).iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(tape.value(y).iter().all(|v| v.is_finite()));
    }

    #[test]
    fn forward_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let store = rand_store(&mut rng, &[("m", 8, 8), ("v", 8, 1)]);
        let run = || {
            let mut tape = Tape::new(&store);
            let m = tape.param(0);
            let v = tape.param(1);
            let y = tape.matvec(m, v);
            let y = tape.tanh(y);
            let s = tape.softmax(y);
            tape.value(s).to_vec()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn params_are_cached_per_tape() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let store = rand_store(&mut rng, &[("m", 2, 2)]);
        let mut tape = Tape::new(&store);
        assert_eq!(tape.param(0), tape.param(0));
    }
}
