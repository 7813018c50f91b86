//! Forward pass with recorded intermediates and exact reverse-mode gradients.
//!
//! Per step: dynamic embedding, concatenation with the static embedding,
//! LSTM cell. The last `horizon` hidden states pass through dropout and a
//! shared linear head.

use rand::Rng;

use super::config::ModelConfig;
use super::layers::{Dense, LstmWeights};
use super::linalg::{affine, axpy, dot, matvec_t_acc, outer_acc, sigmoid};
use super::params::{DenseSlot, Layout};
use crate::error::{Error, Result};

/// One input sequence.
#[derive(Debug, Clone, Copy)]
pub struct SequenceInput<'a> {
    /// `window x n_dynamic`, row-major, oldest step first.
    pub dynamic: &'a [f64],
    pub statics: &'a [f64],
}

/// Intermediates of one forward pass, consumed by [`Network::backward`].
#[derive(Debug, Clone)]
pub struct Trace {
    static_act: [Vec<f64>; 3],
    /// Static-embedding share of the gate pre-activations plus the LSTM bias.
    static_pre: Vec<f64>,
    /// Per step, the three dynamic-embedding activations concatenated.
    dyn_act: Vec<f64>,
    /// Per step, activated gates `[i, f, g, o]`.
    gates: Vec<f64>,
    /// `(window + 1) x H`; row 0 is the zero initial state.
    c: Vec<f64>,
    h: Vec<f64>,
    tanh_c: Vec<f64>,
    mask: Option<Vec<f64>>,
    pub outputs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub config: ModelConfig,
    pub layout: Layout,
}

fn slot_dense<'a>(p: &'a [f64], s: &DenseSlot) -> Dense<'a> {
    Dense {
        weight: &p[s.weight..s.weight + s.inputs * s.outputs],
        bias: &p[s.bias..s.bias + s.outputs],
    }
}

fn mlp_trace(p: &[f64], slots: &[DenseSlot; 3], x: &[f64], acts: &mut [&mut [f64]; 3]) {
    for k in 0..3 {
        let d = slot_dense(p, &slots[k]);
        let (before, rest) = acts.split_at_mut(k);
        let out = &mut *rest[0];
        let input: &[f64] = if k == 0 { x } else { &*before[k - 1] };
        affine(d.weight, d.bias, input, out);
        out.iter_mut().for_each(|v| *v = v.tanh());
    }
}

/// Accumulates MLP parameter gradients given the loss gradient at its output.
fn mlp_backward(p: &[f64], slots: &[DenseSlot; 3], x: &[f64], acts: [&[f64]; 3], d_out: &[f64], grad: &mut [f64]) {
    let mut delta: Vec<f64> = d_out.iter().zip(acts[2]).map(|(g, a)| g * (1.0 - a * a)).collect();
    for k in (0..3).rev() {
        let s = &slots[k];
        let prev: &[f64] = if k == 0 { x } else { acts[k - 1] };
        outer_acc(&mut grad[s.weight..s.weight + s.inputs * s.outputs], &delta, prev);
        axpy(1.0, &delta, &mut grad[s.bias..s.bias + s.outputs]);
        if k > 0 {
            let mut dprev = vec![0.0; s.inputs];
            matvec_t_acc(&p[s.weight..s.weight + s.inputs * s.outputs], &delta, &mut dprev);
            delta = dprev.iter().zip(prev).map(|(g, a)| g * (1.0 - a * a)).collect();
        }
    }
}

impl Network {
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(&config);
        Ok(Self { config, layout })
    }

    pub fn n_params(&self) -> usize {
        self.layout.total
    }

    pub fn init_params<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        self.layout.init(rng)
    }

    pub fn dynamic_embedding<'a>(&self, p: &'a [f64]) -> [Dense<'a>; 3] {
        self.layout.dynamic.map(|s| slot_dense(p, &s))
    }

    pub fn static_embedding<'a>(&self, p: &'a [f64]) -> [Dense<'a>; 3] {
        self.layout.statics.map(|s| slot_dense(p, &s))
    }

    pub fn lstm_weights<'a>(&self, p: &'a [f64]) -> LstmWeights<'a> {
        let l = &self.layout;
        let (h4, e) = (4 * l.hidden, 2 * l.embed);
        LstmWeights {
            w_ih: &p[l.w_ih..l.w_ih + h4 * e],
            w_hh: &p[l.w_hh..l.w_hh + h4 * l.hidden],
            bias: &p[l.b_lstm..l.b_lstm + h4],
        }
    }

    pub fn head<'a>(&self, p: &'a [f64]) -> (&'a [f64], f64) {
        let l = &self.layout;
        (&p[l.head_w..l.head_w + l.hidden], p[l.head_b])
    }

    /// Inverted-dropout mask for the output steps, or `None` when dropout is off.
    pub fn sample_mask<R: Rng>(&self, rng: &mut R) -> Option<Vec<f64>> {
        let p = self.config.dropout_p;
        if p <= 0.0 {
            return None;
        }
        let keep = 1.0 / (1.0 - p);
        Some(
            (0..self.config.horizon * self.layout.hidden)
                .map(|_| if rng.random::<f64>() < p { 0.0 } else { keep })
                .collect(),
        )
    }

    fn check_input(&self, input: &SequenceInput<'_>, mask: Option<&[f64]>) -> Result<()> {
        let c = &self.config;
        let shape = |what: &str, expected, got| Error::Shape { what: what.into(), expected, got };
        if input.dynamic.len() != c.window * c.n_dynamic {
            return Err(shape("dynamic sequence", c.window * c.n_dynamic, input.dynamic.len()));
        }
        if input.statics.len() != c.n_static {
            return Err(shape("static inputs", c.n_static, input.statics.len()));
        }
        if let Some(m) = mask {
            if m.len() != c.horizon * self.layout.hidden {
                return Err(shape("dropout mask", c.horizon * self.layout.hidden, m.len()));
            }
        }
        if input.dynamic.iter().chain(input.statics).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("model input".into()));
        }
        Ok(())
    }

    /// Predictions for the last `horizon` steps. `mask` enables dropout.
    pub fn forward(&self, p: &[f64], input: &SequenceInput<'_>, mask: Option<&[f64]>) -> Result<Vec<f64>> {
        Ok(self.forward_trace(p, input, mask)?.outputs)
    }

    pub fn forward_trace(&self, p: &[f64], input: &SequenceInput<'_>, mask: Option<&[f64]>) -> Result<Trace> {
        self.check_input(input, mask)?;
        let l = &self.layout;
        let cfg = &self.config;
        let (hs, de) = (l.hidden, l.embed);
        let e = 2 * de;
        let [w0, w1, w2] = cfg.embed_layers;
        let act_w = w0 + w1 + w2;

        let mut static_act = [vec![0.0; w0], vec![0.0; w1], vec![0.0; w2]];
        {
            let [a, b, c] = &mut static_act;
            mlp_trace(p, &l.statics, input.statics, &mut [a.as_mut_slice(), b.as_mut_slice(), c.as_mut_slice()]);
        }
        let s = &static_act[2];
        let w_ih = &p[l.w_ih..l.w_ih + 4 * hs * e];
        let w_hh = &p[l.w_hh..l.w_hh + 4 * hs * hs];
        let mut static_pre = p[l.b_lstm..l.b_lstm + 4 * hs].to_vec();
        for (r, v) in static_pre.iter_mut().enumerate() {
            *v += dot(&w_ih[r * e + de..(r + 1) * e], s);
        }

        let n = cfg.window;
        let mut tr = Trace {
            static_pre,
            dyn_act: vec![0.0; n * act_w],
            gates: vec![0.0; n * 4 * hs],
            c: vec![0.0; (n + 1) * hs],
            h: vec![0.0; (n + 1) * hs],
            tanh_c: vec![0.0; n * hs],
            mask: mask.map(<[f64]>::to_vec),
            outputs: vec![0.0; cfg.horizon],
            static_act: [Vec::new(), Vec::new(), Vec::new()],
        };
        let (head_w, head_b) = self.head(p);
        let first_out = n - cfg.horizon;
        let mut pre = vec![0.0; 4 * hs];
        for t in 0..n {
            let x = &input.dynamic[t * cfg.n_dynamic..(t + 1) * cfg.n_dynamic];
            let act = &mut tr.dyn_act[t * act_w..(t + 1) * act_w];
            let (a0, rest) = act.split_at_mut(w0);
            let (a1, a2) = rest.split_at_mut(w1);
            mlp_trace(p, &l.dynamic, x, &mut [a0, a1, a2]);
            let d = &tr.dyn_act[t * act_w + w0 + w1..(t + 1) * act_w];

            let h_prev = &tr.h[t * hs..(t + 1) * hs];
            for r in 0..4 * hs {
                pre[r] = tr.static_pre[r]
                    + dot(&w_ih[r * e..r * e + de], d)
                    + dot(&w_hh[r * hs..(r + 1) * hs], h_prev);
            }
            let g = &mut tr.gates[t * 4 * hs..(t + 1) * 4 * hs];
            for j in 0..hs {
                g[j] = sigmoid(pre[j]);
                g[hs + j] = sigmoid(pre[hs + j]);
                g[2 * hs + j] = pre[2 * hs + j].tanh();
                g[3 * hs + j] = sigmoid(pre[3 * hs + j]);
            }
            let (c_prev, c_next) = tr.c.split_at_mut((t + 1) * hs);
            let c_prev = &c_prev[t * hs..];
            let c_next = &mut c_next[..hs];
            let h_next = &mut tr.h[(t + 1) * hs..(t + 2) * hs];
            let tc = &mut tr.tanh_c[t * hs..(t + 1) * hs];
            for j in 0..hs {
                c_next[j] = g[hs + j] * c_prev[j] + g[j] * g[2 * hs + j];
                tc[j] = c_next[j].tanh();
                h_next[j] = g[3 * hs + j] * tc[j];
            }
            if t >= first_out {
                let k = t - first_out;
                let y = match mask {
                    Some(m) => {
                        let m = &m[k * hs..(k + 1) * hs];
                        head_w.iter().zip(h_next.iter()).zip(m).map(|((w, h), m)| w * h * m).sum::<f64>()
                    }
                    None => dot(head_w, h_next),
                };
                tr.outputs[k] = y + head_b;
            }
        }
        tr.static_act = static_act;
        Ok(tr)
    }

    /// Adds `d loss / d params` to `grad`, given `d_out = d loss / d outputs`.
    pub fn backward(&self, p: &[f64], input: &SequenceInput<'_>, tr: &Trace, d_out: &[f64], grad: &mut [f64]) {
        let l = &self.layout;
        let cfg = &self.config;
        let (hs, de) = (l.hidden, l.embed);
        let e = 2 * de;
        let [w0, w1, w2] = cfg.embed_layers;
        let act_w = w0 + w1 + w2;
        let n = cfg.window;
        let first_out = n - cfg.horizon;
        let w_ih = &p[l.w_ih..l.w_ih + 4 * hs * e];
        let w_hh = &p[l.w_hh..l.w_hh + 4 * hs * hs];
        let (head_w, _) = self.head(p);

        let mut dh_next = vec![0.0; hs];
        let mut dc_next = vec![0.0; hs];
        let mut dh = vec![0.0; hs];
        let mut dpre = vec![0.0; 4 * hs];
        let mut dpre_sum = vec![0.0; 4 * hs];
        let mut dd = vec![0.0; de];

        for t in (0..n).rev() {
            dh.copy_from_slice(&dh_next);
            let h_t = &tr.h[(t + 1) * hs..(t + 2) * hs];
            if t >= first_out {
                let k = t - first_out;
                let dy = d_out[k];
                if dy != 0.0 {
                    grad[l.head_b] += dy;
                    match &tr.mask {
                        Some(m) => {
                            let m = &m[k * hs..(k + 1) * hs];
                            for j in 0..hs {
                                grad[l.head_w + j] += dy * h_t[j] * m[j];
                                dh[j] += dy * head_w[j] * m[j];
                            }
                        }
                        None => {
                            axpy(dy, h_t, &mut grad[l.head_w..l.head_w + hs]);
                            axpy(dy, head_w, &mut dh);
                        }
                    }
                }
            }
            let g = &tr.gates[t * 4 * hs..(t + 1) * 4 * hs];
            let tc = &tr.tanh_c[t * hs..(t + 1) * hs];
            let c_prev = &tr.c[t * hs..(t + 1) * hs];
            for j in 0..hs {
                let (i, f, gg, o) = (g[j], g[hs + j], g[2 * hs + j], g[3 * hs + j]);
                let dc = dc_next[j] + dh[j] * o * (1.0 - tc[j] * tc[j]);
                let d_o = dh[j] * tc[j];
                dpre[j] = dc * gg * i * (1.0 - i);
                dpre[hs + j] = dc * c_prev[j] * f * (1.0 - f);
                dpre[2 * hs + j] = dc * i * (1.0 - gg * gg);
                dpre[3 * hs + j] = d_o * o * (1.0 - o);
                dc_next[j] = dc * f;
            }
            let h_prev = &tr.h[t * hs..(t + 1) * hs];
            if t > 0 {
                outer_acc(&mut grad[l.w_hh..l.w_hh + 4 * hs * hs], &dpre, h_prev);
            }
            let act = &tr.dyn_act[t * act_w..(t + 1) * act_w];
            let d_t = &act[w0 + w1..];
            dd.iter_mut().for_each(|v| *v = 0.0);
            for (r, &dr) in dpre.iter().enumerate() {
                if dr != 0.0 {
                    let base = l.w_ih + r * e;
                    axpy(dr, d_t, &mut grad[base..base + de]);
                    axpy(dr, &w_ih[r * e..r * e + de], &mut dd);
                }
            }
            axpy(1.0, &dpre, &mut dpre_sum);
            dh_next.iter_mut().for_each(|v| *v = 0.0);
            matvec_t_acc(w_hh, &dpre, &mut dh_next);

            let x = &input.dynamic[t * cfg.n_dynamic..(t + 1) * cfg.n_dynamic];
            mlp_backward(p, &l.dynamic, x, [&act[..w0], &act[w0..w0 + w1], d_t], &dd, grad);
        }

        axpy(1.0, &dpre_sum, &mut grad[l.b_lstm..l.b_lstm + 4 * hs]);
        let s = &tr.static_act[2];
        let mut ds = vec![0.0; de];
        for (r, &dr) in dpre_sum.iter().enumerate() {
            if dr != 0.0 {
                let base = l.w_ih + r * e + de;
                axpy(dr, s, &mut grad[base..base + de]);
                axpy(dr, &w_ih[r * e + de..(r + 1) * e], &mut ds);
            }
        }
        let sa = &tr.static_act;
        mlp_backward(p, &l.statics, input.statics, [&sa[0], &sa[1], &sa[2]], &ds, grad);
    }
}
