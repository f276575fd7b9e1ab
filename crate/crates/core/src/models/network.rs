//! Stacked LSTM with optional peepholes and output projections, a softmax
//! output layer, cross-entropy loss and truncated back-propagation through
//! time.
//!
//! Per layer and step, with `r` the (optionally projected) layer output:
//!
//! ```text
//! i = σ(U_i x + W_i r' + p_i ∘ c' + b_i)
//! f = σ(U_f x + W_f r' + p_f ∘ c' + b_f)
//! g = tanh(U_c x + W_c r' + b_c)
//! c = f ∘ c' + i ∘ g
//! o = σ(U_o x + W_o r' + p_o ∘ c + b_o)
//! s = o ∘ tanh(c)
//! r = P s            (r = s without projection)
//! ```
//!
//! Primes denote the previous step. Input and forget peepholes read the
//! previous cell state, the output peephole reads the current one.
//! Gate rows are stored in the order `i, f, o, c`.

use rand::Rng;
use rand_distr::{Distribution, Uniform};

use crate::error::{Error, Result};
use crate::sequences::{Alphabet, GateSequence};

/// Probability floor inside the log of the loss.
pub const PROB_FLOOR: f64 = 1e-12;

/// Default truncation window for back-propagation through time.
pub const DEFAULT_TRUNCATION: usize = 32;

/// Half-width of the uniform weight initialisation.
pub const INIT_SCALE: f64 = 0.08;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerSpec {
    pub units: usize,
    pub peephole: bool,
    /// Projection dimension, strictly below `units` when present.
    pub projection: Option<usize>,
}

impl LayerSpec {
    pub fn plain(units: usize) -> Self {
        LayerSpec { units, peephole: false, projection: None }
    }

    pub fn output_dim(&self) -> usize {
        self.projection.unwrap_or(self.units)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LstmLayer {
    pub input_dim: usize,
    pub hidden: usize,
    pub out_dim: usize,
    /// `4h × input_dim`, row-major.
    pub w_in: Vec<f64>,
    /// `4h × out_dim`, row-major.
    pub w_rec: Vec<f64>,
    /// `4h`.
    pub bias: Vec<f64>,
    /// `3h`: input, forget, output peepholes.
    pub peephole: Option<Vec<f64>>,
    /// `out_dim × h`, row-major.
    pub projection: Option<Vec<f64>>,
}

impl LstmLayer {
    fn zeros(input_dim: usize, spec: &LayerSpec) -> Self {
        let h = spec.units;
        let k = spec.output_dim();
        LstmLayer {
            input_dim,
            hidden: h,
            out_dim: k,
            w_in: vec![0.0; 4 * h * input_dim],
            w_rec: vec![0.0; 4 * h * k],
            bias: vec![0.0; 4 * h],
            peephole: spec.peephole.then(|| vec![0.0; 3 * h]),
            projection: spec.projection.map(|k| vec![0.0; k * h]),
        }
    }

    fn spec(&self) -> LayerSpec {
        LayerSpec {
            units: self.hidden,
            peephole: self.peephole.is_some(),
            projection: self.projection.as_ref().map(|_| self.out_dim),
        }
    }
}

/// Recurrent state of one layer.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerState {
    /// Layer output `r` (dimension `out_dim`).
    pub output: Vec<f64>,
    /// Cell state `c` (dimension `hidden`).
    pub cell: Vec<f64>,
}

/// Weights of the full network.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    pub alphabet_size: usize,
    pub layers: Vec<LstmLayer>,
    /// `alphabet_size × out_dim(last layer)`, row-major.
    pub out_w: Vec<f64>,
    pub out_b: Vec<f64>,
}

/// Shape of a named parameter array.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct Shape(pub usize, pub usize);

impl Network {
    /// All-zero network with the given layer stack.
    pub fn zeros(alphabet_size: usize, specs: &[LayerSpec]) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::InvalidArgument("network needs at least one layer".into()));
        }
        if alphabet_size == 0 {
            return Err(Error::InvalidArgument("alphabet must not be empty".into()));
        }
        let mut layers = Vec::with_capacity(specs.len());
        let mut input = alphabet_size;
        for spec in specs {
            if spec.units == 0 {
                return Err(Error::InvalidArgument("layer needs at least one unit".into()));
            }
            if let Some(k) = spec.projection {
                if k == 0 || k > spec.units {
                    return Err(Error::InvalidArgument(format!(
                        "projection dimension {k} must lie in 1..={}",
                        spec.units
                    )));
                }
            }
            layers.push(LstmLayer::zeros(input, spec));
            input = spec.output_dim();
        }
        Ok(Network {
            alphabet_size,
            layers,
            out_w: vec![0.0; alphabet_size * input],
            out_b: vec![0.0; alphabet_size],
        })
    }

    /// Network with every weight drawn uniformly from `[-scale, scale]`.
    pub fn random<R: Rng + ?Sized>(alphabet_size: usize, specs: &[LayerSpec], scale: f64, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(alphabet_size, specs)?;
        let dist = Uniform::new_inclusive(-scale, scale).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        for p in net.params_mut() {
            for w in p.iter_mut() {
                *w = dist.sample(rng);
            }
        }
        Ok(net)
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(LstmLayer::spec).collect()
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.alphabet_size, &self.specs()).expect("existing network has a valid shape")
    }

    /// Named parameter arrays in a fixed order.
    pub fn params(&self) -> Vec<(String, Shape, &[f64])> {
        let mut out: Vec<(String, Shape, &[f64])> = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            let h4 = 4 * layer.hidden;
            out.push((format!("layer{l}.w_in"), Shape(h4, layer.input_dim), &layer.w_in));
            out.push((format!("layer{l}.w_rec"), Shape(h4, layer.out_dim), &layer.w_rec));
            out.push((format!("layer{l}.bias"), Shape(h4, 1), &layer.bias));
            if let Some(p) = &layer.peephole {
                out.push((format!("layer{l}.peephole"), Shape(3 * layer.hidden, 1), p));
            }
            if let Some(p) = &layer.projection {
                out.push((format!("layer{l}.projection"), Shape(layer.out_dim, layer.hidden), p));
            }
        }
        let k = self.out_w.len() / self.alphabet_size;
        out.push(("output.weight".into(), Shape(self.alphabet_size, k), &self.out_w));
        out.push(("output.bias".into(), Shape(self.alphabet_size, 1), &self.out_b));
        out
    }

    /// Mutable parameter arrays, same order as [`Network::params`].
    pub fn params_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            out.push(&mut layer.w_in);
            out.push(&mut layer.w_rec);
            out.push(&mut layer.bias);
            if let Some(p) = &mut layer.peephole {
                out.push(p);
            }
            if let Some(p) = &mut layer.projection {
                out.push(p);
            }
        }
        out.push(&mut self.out_w);
        out.push(&mut self.out_b);
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.params().iter().map(|(_, _, p)| p.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.params().iter().all(|(_, _, p)| p.iter().all(|x| x.is_finite()))
    }

    pub fn initial_state(&self) -> Vec<LayerState> {
        self.layers
            .iter()
            .map(|l| LayerState { output: vec![0.0; l.out_dim], cell: vec![0.0; l.hidden] })
            .collect()
    }

    /// Advances every layer by one step on input gate `input` and returns the
    /// softmax distribution over the next gate.
    pub fn step(&self, state: &mut [LayerState], input: usize) -> Vec<f64> {
        let mut x = one_hot(input, self.alphabet_size);
        for (layer, st) in self.layers.iter().zip(state.iter_mut()) {
            let rec = layer_step(layer, &x, &st.output, &st.cell);
            st.cell = rec.c;
            st.output = rec.r;
            x = st.output.clone();
        }
        self.output_distribution(&x)
    }

    fn output_distribution(&self, top: &[f64]) -> Vec<f64> {
        let mut logits = self.out_b.clone();
        matvec_acc(&self.out_w, self.alphabet_size, top, &mut logits);
        softmax(&logits)
    }

    /// Runs the network over `inputs` from the zero state.
    pub fn forward(&self, inputs: &[usize]) -> Result<ForwardPass> {
        let mut state = self.initial_state();
        let mut distributions = Vec::with_capacity(inputs.len());
        for (t, &x) in inputs.iter().enumerate() {
            if x >= self.alphabet_size {
                return Err(Error::InvalidArgument(format!("input gate {x} outside alphabet")));
            }
            let p = self.step(&mut state, x);
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("network output at step {t}")));
            }
            distributions.push(p);
        }
        Ok(ForwardPass { distributions, final_state: state })
    }

    /// Mean negative log-likelihood per predicted gate; gate `t` predicts gate `t+1`.
    pub fn loss(&self, batch: &[GateSequence]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::Empty("loss batch".into()));
        }
        let mut total = 0.0;
        let mut count = 0usize;
        for seq in batch {
            let ids: Vec<usize> = seq.ids().map(usize::from).collect();
            if ids.len() < 2 {
                continue;
            }
            let pass = self.forward(&ids[..ids.len() - 1])?;
            for (p, &target) in pass.distributions.iter().zip(&ids[1..]) {
                total -= p[target].max(PROB_FLOOR).ln();
                count += 1;
            }
        }
        if count == 0 {
            return Ok(0.0);
        }
        let loss = total / count as f64;
        if !loss.is_finite() {
            return Err(Error::NonFinite("loss".into()));
        }
        Ok(loss)
    }

    /// Loss and gradients over a batch. Gradients flow back at most
    /// `truncation` steps: sequences are cut into windows of that length and
    /// the state entering a window is treated as a constant.
    pub fn backward(&self, batch: &[GateSequence], truncation: usize) -> Result<(f64, Network)> {
        if batch.is_empty() {
            return Err(Error::Empty("gradient batch".into()));
        }
        if truncation == 0 {
            return Err(Error::InvalidArgument("truncation window must be positive".into()));
        }
        let mut grads = self.zeros_like();
        let count: usize = batch.iter().map(|s| s.len().saturating_sub(1)).sum();
        if count == 0 {
            return Ok((0.0, grads));
        }
        let scale = 1.0 / count as f64;
        let mut total = 0.0;
        for seq in batch {
            if seq.alphabet().size() != self.alphabet_size {
                return Err(Error::Shape("sequence alphabet does not match network output".into()));
            }
            let ids: Vec<usize> = seq.ids().map(usize::from).collect();
            if ids.len() < 2 {
                continue;
            }
            total += self.accumulate_sequence(&ids, truncation, scale, &mut grads)?;
        }
        let loss = total * scale;
        if !loss.is_finite() || !grads.is_finite() {
            return Err(Error::NonFinite("gradients".into()));
        }
        Ok((loss, grads))
    }

    fn accumulate_sequence(&self, ids: &[usize], window: usize, scale: f64, grads: &mut Network) -> Result<f64> {
        let steps = ids.len() - 1;
        let n_layers = self.layers.len();
        let mut state = self.initial_state();
        let mut records: Vec<Vec<StepRecord>> = vec![Vec::with_capacity(steps); n_layers];
        let mut probs = Vec::with_capacity(steps);
        let mut nll = 0.0;
        for t in 0..steps {
            let mut x = one_hot(ids[t], self.alphabet_size);
            for (l, layer) in self.layers.iter().enumerate() {
                let rec = layer_step(layer, &x, &state[l].output, &state[l].cell);
                state[l].output = rec.r.clone();
                state[l].cell = rec.c.clone();
                x = rec.r.clone();
                records[l].push(rec);
            }
            let p = self.output_distribution(&x);
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("network output at step {t}")));
            }
            nll -= p[ids[t + 1]].max(PROB_FLOOR).ln();
            probs.push(p);
        }

        let k_top = self.layers[n_layers - 1].out_dim;
        let mut dr_carry: Vec<Vec<f64>> = self.layers.iter().map(|l| vec![0.0; l.out_dim]).collect();
        let mut dc_carry: Vec<Vec<f64>> = self.layers.iter().map(|l| vec![0.0; l.hidden]).collect();
        for t in (0..steps).rev() {
            if (t + 1) % window == 0 && t + 1 < steps {
                for v in dr_carry.iter_mut().chain(dc_carry.iter_mut()) {
                    v.fill(0.0);
                }
            }
            let mut dz = probs[t].clone();
            dz[ids[t + 1]] -= 1.0;
            for v in &mut dz {
                *v *= scale;
            }
            let top = &records[n_layers - 1][t].r;
            outer_acc(&mut grads.out_w, &dz, top);
            add_assign(&mut grads.out_b, &dz);
            let mut d_in = vec![0.0; k_top];
            matvec_t_acc(&self.out_w, self.alphabet_size, &dz, &mut d_in);

            for l in (0..n_layers).rev() {
                let layer = &self.layers[l];
                let g = &mut grads.layers[l];
                let rec = &records[l][t];
                let h = layer.hidden;
                let mut dr = d_in;
                add_assign(&mut dr, &dr_carry[l]);

                let ds = match &layer.projection {
                    Some(p) => {
                        outer_acc(g.projection.as_mut().expect("grad shape"), &dr, &rec.s);
                        let mut ds = vec![0.0; h];
                        matvec_t_acc(p, layer.out_dim, &dr, &mut ds);
                        ds
                    }
                    None => dr,
                };

                let mut da = vec![0.0; 4 * h];
                let mut dc = dc_carry[l].clone();
                for j in 0..h {
                    let o = rec.o[j];
                    let tc = rec.tc[j];
                    da[2 * h + j] = ds[j] * tc * o * (1.0 - o);
                    dc[j] += ds[j] * o * (1.0 - tc * tc);
                }
                if let (Some(p), Some(gp)) = (&layer.peephole, g.peephole.as_mut()) {
                    for j in 0..h {
                        dc[j] += da[2 * h + j] * p[2 * h + j];
                        gp[2 * h + j] += da[2 * h + j] * rec.c[j];
                    }
                }
                let mut dc_prev = vec![0.0; h];
                for j in 0..h {
                    let (i, f, gc) = (rec.i[j], rec.f[j], rec.g[j]);
                    da[j] = dc[j] * gc * i * (1.0 - i);
                    da[h + j] = dc[j] * rec.c_prev[j] * f * (1.0 - f);
                    da[3 * h + j] = dc[j] * i * (1.0 - gc * gc);
                    dc_prev[j] = dc[j] * f;
                }
                if let (Some(p), Some(gp)) = (&layer.peephole, g.peephole.as_mut()) {
                    for j in 0..h {
                        dc_prev[j] += da[j] * p[j] + da[h + j] * p[h + j];
                        gp[j] += da[j] * rec.c_prev[j];
                        gp[h + j] += da[h + j] * rec.c_prev[j];
                    }
                }
                outer_acc(&mut g.w_in, &da, &rec.x);
                outer_acc(&mut g.w_rec, &da, &rec.r_prev);
                add_assign(&mut g.bias, &da);

                let mut carry = vec![0.0; layer.out_dim];
                matvec_t_acc(&layer.w_rec, 4 * h, &da, &mut carry);
                dr_carry[l] = carry;
                dc_carry[l] = dc_prev;

                d_in = vec![0.0; layer.input_dim];
                if l > 0 {
                    matvec_t_acc(&layer.w_in, 4 * h, &da, &mut d_in);
                }
            }
        }
        Ok(nll)
    }

    /// Autoregressive sample: the first gate is uniform, every later gate is
    /// drawn from the network's distribution given the gates so far.
    pub fn sample<R: Rng + ?Sized>(&self, half_length: usize, alphabet: Alphabet, rng: &mut R) -> Result<GateSequence> {
        if alphabet.size() != self.alphabet_size {
            return Err(Error::Shape("alphabet does not match network output".into()));
        }
        if half_length == 0 {
            return Err(Error::InvalidArgument("half length must be at least 1".into()));
        }
        let mut state = self.initial_state();
        let mut ids = Vec::with_capacity(half_length);
        let mut current = rng.random_range(0..self.alphabet_size);
        ids.push(current as u8);
        while ids.len() < half_length {
            let p = self.step(&mut state, current);
            current = sample_categorical(&p, rng);
            ids.push(current as u8);
        }
        Ok(GateSequence::from_ids(&ids, alphabet))
    }
}

/// Per-step output of [`Network::forward`].
#[derive(Clone, Debug)]
pub struct ForwardPass {
    /// Distribution over the next gate after each input.
    pub distributions: Vec<Vec<f64>>,
    pub final_state: Vec<LayerState>,
}

#[derive(Clone, Debug)]
struct StepRecord {
    x: Vec<f64>,
    r_prev: Vec<f64>,
    c_prev: Vec<f64>,
    i: Vec<f64>,
    f: Vec<f64>,
    o: Vec<f64>,
    g: Vec<f64>,
    c: Vec<f64>,
    tc: Vec<f64>,
    s: Vec<f64>,
    r: Vec<f64>,
}

fn layer_step(layer: &LstmLayer, x: &[f64], r_prev: &[f64], c_prev: &[f64]) -> StepRecord {
    let h = layer.hidden;
    let mut a = layer.bias.clone();
    matvec_acc(&layer.w_in, 4 * h, x, &mut a);
    matvec_acc(&layer.w_rec, 4 * h, r_prev, &mut a);
    if let Some(p) = &layer.peephole {
        for j in 0..h {
            a[j] += p[j] * c_prev[j];
            a[h + j] += p[h + j] * c_prev[j];
        }
    }
    let i: Vec<f64> = a[..h].iter().map(|&v| sigmoid(v)).collect();
    let f: Vec<f64> = a[h..2 * h].iter().map(|&v| sigmoid(v)).collect();
    let g: Vec<f64> = a[3 * h..].iter().map(|&v| v.tanh()).collect();
    let c: Vec<f64> = (0..h).map(|j| f[j] * c_prev[j] + i[j] * g[j]).collect();
    if let Some(p) = &layer.peephole {
        for j in 0..h {
            a[2 * h + j] += p[2 * h + j] * c[j];
        }
    }
    let o: Vec<f64> = a[2 * h..3 * h].iter().map(|&v| sigmoid(v)).collect();
    let tc: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    let s: Vec<f64> = (0..h).map(|j| o[j] * tc[j]).collect();
    let r = match &layer.projection {
        Some(p) => {
            let mut r = vec![0.0; layer.out_dim];
            matvec_acc(p, layer.out_dim, &s, &mut r);
            r
        }
        None => s.clone(),
    };
    StepRecord {
        x: x.to_vec(),
        r_prev: r_prev.to_vec(),
        c_prev: c_prev.to_vec(),
        i,
        f,
        o,
        g,
        c,
        tc,
        s,
        r,
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub(crate) fn sample_categorical<R: Rng + ?Sized>(p: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, &pk) in p.iter().enumerate() {
        acc += pk;
        if u < acc {
            return k;
        }
    }
    // Rounding left `acc` slightly below 1; take the last non-zero entry.
    p.iter().rposition(|&v| v > 0.0).unwrap_or(p.len() - 1)
}

fn one_hot(k: usize, n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[k] = 1.0;
    v
}

/// `out += W x` for row-major `W` with `rows` rows.
fn matvec_acc(w: &[f64], rows: usize, x: &[f64], out: &mut [f64]) {
    let cols = x.len();
    debug_assert_eq!(w.len(), rows * cols);
    for (r, o) in out.iter_mut().enumerate().take(rows) {
        let row = &w[r * cols..(r + 1) * cols];
        *o += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// `out += Wᵀ y` for row-major `W` with `rows` rows.
fn matvec_t_acc(w: &[f64], rows: usize, y: &[f64], out: &mut [f64]) {
    let cols = out.len();
    debug_assert_eq!(w.len(), rows * cols);
    for (r, &yr) in y.iter().enumerate().take(rows) {
        if yr == 0.0 {
            continue;
        }
        let row = &w[r * cols..(r + 1) * cols];
        for (o, a) in out.iter_mut().zip(row) {
            *o += a * yr;
        }
    }
}

/// `g += a bᵀ` for row-major `g`.
fn outer_acc(g: &mut [f64], a: &[f64], b: &[f64]) {
    let cols = b.len();
    for (r, &ar) in a.iter().enumerate() {
        if ar == 0.0 {
            continue;
        }
        let row = &mut g[r * cols..(r + 1) * cols];
        for (x, &bc) in row.iter_mut().zip(b) {
            *x += ar * bc;
        }
    }
}

fn add_assign(a: &mut [f64], b: &[f64]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
}
