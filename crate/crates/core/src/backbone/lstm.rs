use rand::Rng;

use super::{Backbone, BackboneConfig, BehaviorEmbedding, Inference, NextScores};
use crate::error::{LatticeError, Result};
use crate::rng;
use crate::seqcore::{Mode, SeqView};

/// Offsets of each parameter block inside the flat parameter vector.
///
/// Gate rows are ordered input, forget, candidate, output; all matrices are
/// row-major. In continuous mode the input block holds two rows (weight, bias)
/// of the scalar-to-embedding affine map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamLayout {
    pub input_rows: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub output_dim: usize,
    pub input: usize,
    pub w_x: usize,
    pub w_h: usize,
    pub bias: usize,
    pub w_out: usize,
    pub b_out: usize,
    pub total: usize,
}

impl ParamLayout {
    pub fn new(mode: Mode, vocab_size: usize, embed_dim: usize, hidden_dim: usize) -> Self {
        let (input_rows, output_dim) = match mode {
            Mode::Discrete => (vocab_size, vocab_size),
            Mode::Continuous => (2, 1),
        };
        let g = 4 * hidden_dim;
        let input = 0;
        let w_x = input + input_rows * embed_dim;
        let w_h = w_x + g * embed_dim;
        let bias = w_h + g * hidden_dim;
        let w_out = bias + g;
        let b_out = w_out + output_dim * hidden_dim;
        let total = b_out + output_dim;
        ParamLayout {
            input_rows,
            embed_dim,
            hidden_dim,
            output_dim,
            input,
            w_x,
            w_h,
            bias,
            w_out,
            b_out,
            total,
        }
    }

    /// `(name, offset, shape)` for every block, in storage order.
    pub fn blocks(&self) -> [(&'static str, usize, [usize; 2]); 6] {
        let g = 4 * self.hidden_dim;
        [
            ("input", self.input, [self.input_rows, self.embed_dim]),
            ("w_x", self.w_x, [g, self.embed_dim]),
            ("w_h", self.w_h, [g, self.hidden_dim]),
            ("bias", self.bias, [1, g]),
            ("w_out", self.w_out, [self.output_dim, self.hidden_dim]),
            ("b_out", self.b_out, [1, self.output_dim]),
        ]
    }
}

/// Single-layer LSTM with an embedding (or scalar affine) input and a linear
/// output head.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmBackbone {
    pub(crate) config: BackboneConfig,
    pub(crate) vocab_size: Option<usize>,
    pub(crate) layout: ParamLayout,
    pub(crate) params: Vec<f64>,
}

/// Hidden states `h_1..h_n` and the behavior embedding `h_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Forward {
    pub hidden: Vec<Vec<f64>>,
    pub embedding: BehaviorEmbedding,
}

/// Activations kept for backpropagation, one row per time step.
pub(crate) struct Trace {
    n: usize,
    xs: Vec<f64>,
    /// Activated gates (i, f, g, o), 4H per step.
    gates: Vec<f64>,
    cs: Vec<f64>,
    tanh_cs: Vec<f64>,
    hs: Vec<f64>,
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Numerically stable softmax.
pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

impl LstmBackbone {
    /// Parameters drawn uniformly from `[-1/sqrt(H), 1/sqrt(H)]` with the config seed.
    pub fn init(config: BackboneConfig, vocab_size: Option<usize>) -> Result<Self> {
        config.validate()?;
        let v = match (config.mode, vocab_size) {
            (Mode::Discrete, Some(v)) if v > 0 => v,
            (Mode::Discrete, _) => return Err(LatticeError::InvalidConfig("discrete backbone needs a vocabulary".into())),
            (Mode::Continuous, _) => 0,
        };
        let layout = ParamLayout::new(config.mode, v, config.embed_dim, config.hidden_dim);
        let bound = 1.0 / (config.hidden_dim as f64).sqrt();
        let mut rng = rng::rng_for(config.seed, rng::STREAM_INIT, 0);
        let params = (0..layout.total).map(|_| rng.random_range(-bound..bound)).collect();
        Ok(LstmBackbone {
            config,
            vocab_size: (config.mode == Mode::Discrete).then_some(v),
            layout,
            params,
        })
    }

    /// Build from explicit parameters (used by persistence and tests).
    pub fn from_params(config: BackboneConfig, vocab_size: Option<usize>, params: Vec<f64>) -> Result<Self> {
        let v = if config.mode == Mode::Discrete {
            vocab_size.ok_or_else(|| LatticeError::InvalidConfig("discrete backbone needs a vocabulary".into()))?
        } else {
            0
        };
        let layout = ParamLayout::new(config.mode, v, config.embed_dim, config.hidden_dim);
        if params.len() != layout.total {
            return Err(LatticeError::DimensionMismatch {
                expected: layout.total,
                got: params.len(),
            });
        }
        Ok(LstmBackbone {
            config,
            vocab_size: (config.mode == Mode::Discrete).then_some(v),
            layout,
            params,
        })
    }

    pub fn config(&self) -> &BackboneConfig {
        &self.config
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.layout.total
    }

    pub(crate) fn check_input(&self, input: SeqView<'_>) -> Result<()> {
        if input.mode() != self.config.mode {
            return Err(LatticeError::ModeMismatch {
                expected: self.config.mode.name(),
                found: input.mode().name(),
            });
        }
        if input.is_empty() {
            return Err(LatticeError::EmptyDataset);
        }
        if let (SeqView::Items(items), Some(size)) = (input, self.vocab_size) {
            if let Some(&bad) = items.iter().find(|&&i| i >= size) {
                return Err(LatticeError::OutOfVocab { index: bad, size });
            }
        }
        Ok(())
    }

    fn input_vector(&self, input: SeqView<'_>, t: usize, out: &mut [f64]) {
        let l = &self.layout;
        let e = l.embed_dim;
        match input {
            SeqView::Items(items) => {
                let row = l.input + items[t] * e;
                out.copy_from_slice(&self.params[row..row + e]);
            }
            SeqView::Values(values) => {
                let w = &self.params[l.input..l.input + e];
                let b = &self.params[l.input + e..l.input + 2 * e];
                for ((o, wi), bi) in out.iter_mut().zip(w).zip(b) {
                    *o = wi * values[t] + bi;
                }
            }
        }
    }

    /// Run the recurrence over `input`, optionally recording activations.
    pub(crate) fn run(&self, input: SeqView<'_>) -> Trace {
        let l = &self.layout;
        let (e, h) = (l.embed_dim, l.hidden_dim);
        let n = input.len();
        let mut tr = Trace {
            n,
            xs: vec![0.0; n * e],
            gates: vec![0.0; n * 4 * h],
            cs: vec![0.0; n * h],
            tanh_cs: vec![0.0; n * h],
            hs: vec![0.0; n * h],
        };
        let w_x = &self.params[l.w_x..l.w_h];
        let w_h = &self.params[l.w_h..l.bias];
        let bias = &self.params[l.bias..l.w_out];
        let zero = vec![0.0; h];
        for t in 0..n {
            self.input_vector(input, t, &mut tr.xs[t * e..(t + 1) * e]);
            let x = &tr.xs[t * e..(t + 1) * e];
            let (h_prev, c_prev) = if t == 0 {
                (&zero[..], &zero[..])
            } else {
                (&tr.hs[(t - 1) * h..t * h], &tr.cs[(t - 1) * h..t * h])
            };
            let mut z = vec![0.0; 4 * h];
            for (r, zr) in z.iter_mut().enumerate() {
                *zr = bias[r] + dot(&w_x[r * e..(r + 1) * e], x) + dot(&w_h[r * h..(r + 1) * h], h_prev);
            }
            let gates = &mut tr.gates[t * 4 * h..(t + 1) * 4 * h];
            for j in 0..h {
                gates[j] = sigmoid(z[j]);
                gates[h + j] = sigmoid(z[h + j]);
                gates[2 * h + j] = z[2 * h + j].tanh();
                gates[3 * h + j] = sigmoid(z[3 * h + j]);
            }
            let mut c_new = vec![0.0; h];
            for j in 0..h {
                c_new[j] = gates[h + j] * c_prev[j] + gates[j] * gates[2 * h + j];
            }
            for j in 0..h {
                let tc = c_new[j].tanh();
                tr.tanh_cs[t * h + j] = tc;
                tr.hs[t * h + j] = gates[3 * h + j] * tc;
            }
            tr.cs[t * h..(t + 1) * h].copy_from_slice(&c_new);
        }
        tr
    }

    fn head(&self, hidden: &[f64]) -> Vec<f64> {
        let l = &self.layout;
        let h = l.hidden_dim;
        let w_out = &self.params[l.w_out..l.b_out];
        let b_out = &self.params[l.b_out..l.total];
        (0..l.output_dim)
            .map(|o| b_out[o] + dot(&w_out[o * h..(o + 1) * h], hidden))
            .collect()
    }

    fn next_from_hidden(&self, hidden: &[f64]) -> NextScores {
        let out = self.head(hidden);
        match self.config.mode {
            Mode::Discrete => NextScores::Distribution(softmax(&out)),
            Mode::Continuous => NextScores::Value(out[0]),
        }
    }

    /// Hidden states for every step, starting from zero hidden and cell state.
    pub fn forward(&self, input: SeqView<'_>) -> Result<Forward> {
        self.check_input(input)?;
        let tr = self.run(input);
        let h = self.layout.hidden_dim;
        let hidden: Vec<Vec<f64>> = tr.hs.chunks_exact(h).map(<[f64]>::to_vec).collect();
        let embedding = BehaviorEmbedding(hidden[tr.n - 1].clone());
        Ok(Forward { hidden, embedding })
    }

    /// Summed next-step loss over positions `0..n-1` of `input` and the number of
    /// positions. Cross-entropy in discrete mode, squared error in continuous mode.
    /// When `grad` is given, the gradient of the summed loss is added into it.
    pub(crate) fn loss_and_grad(&self, input: SeqView<'_>, grad: Option<&mut [f64]>) -> (f64, usize) {
        let n = input.len();
        if n < 2 {
            return (0.0, 0);
        }
        let l = self.layout;
        let (h, o_dim) = (l.hidden_dim, l.output_dim);
        let tr = self.run(input);
        let positions = n - 1;
        let mut loss = 0.0;
        // dL/dh_t from the output head at each position.
        let mut dh_out = vec![0.0; n * h];
        let mut grad = grad;
        for t in 0..positions {
            let ht = &tr.hs[t * h..(t + 1) * h];
            let out = self.head(ht);
            let dout: Vec<f64> = match input {
                SeqView::Items(items) => {
                    let p = softmax(&out);
                    let y = items[t + 1];
                    loss -= p[y].max(f64::MIN_POSITIVE).ln();
                    let mut d = p;
                    d[y] -= 1.0;
                    d
                }
                SeqView::Values(values) => {
                    let diff = out[0] - values[t + 1];
                    loss += diff * diff;
                    vec![2.0 * diff]
                }
            };
            if let Some(g) = grad.as_deref_mut() {
                let w_out = &self.params[l.w_out..l.b_out];
                let dh = &mut dh_out[t * h..(t + 1) * h];
                for (o, &d) in dout.iter().enumerate().take(o_dim) {
                    if d == 0.0 {
                        continue;
                    }
                    let gw = &mut g[l.w_out + o * h..l.w_out + (o + 1) * h];
                    for j in 0..h {
                        gw[j] += d * ht[j];
                        dh[j] += d * w_out[o * h + j];
                    }
                    g[l.b_out + o] += d;
                }
            }
        }
        if let Some(g) = grad {
            self.backprop(input, &tr, &dh_out, g);
        }
        (loss, positions)
    }

    /// Backpropagation through time given per-step gradients on the hidden states.
    fn backprop(&self, input: SeqView<'_>, tr: &Trace, dh_out: &[f64], g: &mut [f64]) {
        let l = self.layout;
        let (e, h) = (l.embed_dim, l.hidden_dim);
        let w_x = &self.params[l.w_x..l.w_h];
        let w_h = &self.params[l.w_h..l.bias];
        let mut dh_next = vec![0.0; h];
        let mut dc_next = vec![0.0; h];
        let mut dz = vec![0.0; 4 * h];
        for t in (0..tr.n).rev() {
            let gates = &tr.gates[t * 4 * h..(t + 1) * 4 * h];
            for j in 0..h {
                let (i, f, gc, o) = (gates[j], gates[h + j], gates[2 * h + j], gates[3 * h + j]);
                let tc = tr.tanh_cs[t * h + j];
                let c_prev = if t == 0 { 0.0 } else { tr.cs[(t - 1) * h + j] };
                let dh = dh_out[t * h + j] + dh_next[j];
                let d_o = dh * tc;
                let dc = dh * o * (1.0 - tc * tc) + dc_next[j];
                dz[j] = dc * gc * i * (1.0 - i);
                dz[h + j] = dc * c_prev * f * (1.0 - f);
                dz[2 * h + j] = dc * i * (1.0 - gc * gc);
                dz[3 * h + j] = d_o * o * (1.0 - o);
                dc_next[j] = dc * f;
            }
            let x = &tr.xs[t * e..(t + 1) * e];
            let mut dx = vec![0.0; e];
            dh_next.iter_mut().for_each(|v| *v = 0.0);
            for (r, &d) in dz.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let gwx = &mut g[l.w_x + r * e..l.w_x + (r + 1) * e];
                for k in 0..e {
                    gwx[k] += d * x[k];
                    dx[k] += d * w_x[r * e + k];
                }
                if t > 0 {
                    let h_prev = &tr.hs[(t - 1) * h..t * h];
                    let gwh = &mut g[l.w_h + r * h..l.w_h + (r + 1) * h];
                    for k in 0..h {
                        gwh[k] += d * h_prev[k];
                        dh_next[k] += d * w_h[r * h + k];
                    }
                }
                g[l.bias + r] += d;
            }
            match input {
                SeqView::Items(items) => {
                    let row = l.input + items[t] * e;
                    for k in 0..e {
                        g[row + k] += dx[k];
                    }
                }
                SeqView::Values(values) => {
                    for k in 0..e {
                        g[l.input + k] += dx[k] * values[t];
                        g[l.input + e + k] += dx[k];
                    }
                }
            }
        }
    }
}

impl Backbone for LstmBackbone {
    fn mode(&self) -> Mode {
        self.config.mode
    }

    fn hidden_dim(&self) -> usize {
        self.layout.hidden_dim
    }

    fn vocab_size(&self) -> Option<usize> {
        self.vocab_size
    }

    fn infer(&self, input: SeqView<'_>) -> Result<Inference> {
        self.check_input(input)?;
        let tr = self.run(input);
        let h = self.layout.hidden_dim;
        let last = tr.hs[(tr.n - 1) * h..tr.n * h].to_vec();
        let next = self.next_from_hidden(&last);
        Ok(Inference {
            embedding: BehaviorEmbedding(last),
            next,
        })
    }
}
