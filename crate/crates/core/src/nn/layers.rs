//! Stand-alone forward functions for the two building blocks.

use super::linalg::{affine, matvec_acc, sigmoid};
use crate::error::{Error, Result};

/// Borrowed dense layer `y = W x + b` with `W` stored row-major.
#[derive(Debug, Clone, Copy)]
pub struct Dense<'a> {
    pub weight: &'a [f64],
    pub bias: &'a [f64],
}

impl Dense<'_> {
    pub fn outputs(&self) -> usize {
        self.bias.len()
    }

    pub fn inputs(&self) -> usize {
        self.weight.len() / self.bias.len().max(1)
    }
}

/// Affine layers each followed by tanh.
pub fn mlp_forward(x: &[f64], layers: &[Dense<'_>]) -> Result<Vec<f64>> {
    let mut cur = x.to_vec();
    for (k, l) in layers.iter().enumerate() {
        if l.weight.len() != l.outputs() * cur.len() {
            return Err(Error::Shape {
                what: format!("embedding layer {k} input"),
                expected: l.inputs(),
                got: cur.len(),
            });
        }
        let mut out = vec![0.0; l.outputs()];
        affine(l.weight, l.bias, &cur, &mut out);
        out.iter_mut().for_each(|v| *v = v.tanh());
        cur = out;
    }
    Ok(cur)
}

/// LSTM weights with gate rows stacked as input, forget, candidate, output.
#[derive(Debug, Clone, Copy)]
pub struct LstmWeights<'a> {
    /// `4H x I`
    pub w_ih: &'a [f64],
    /// `4H x H`
    pub w_hh: &'a [f64],
    /// `4H`
    pub bias: &'a [f64],
}

/// One LSTM cell update, returning the new `(h, c)`.
pub fn lstm_step(x: &[f64], h: &[f64], c: &[f64], w: LstmWeights<'_>) -> Result<(Vec<f64>, Vec<f64>)> {
    let hs = h.len();
    let shape = |what: &str, expected: usize, got: usize| Error::Shape { what: what.into(), expected, got };
    if c.len() != hs {
        return Err(shape("cell state", hs, c.len()));
    }
    if w.bias.len() != 4 * hs {
        return Err(shape("lstm bias", 4 * hs, w.bias.len()));
    }
    if w.w_ih.len() != 4 * hs * x.len() {
        return Err(shape("lstm input weights", 4 * hs * x.len(), w.w_ih.len()));
    }
    if w.w_hh.len() != 4 * hs * hs {
        return Err(shape("lstm recurrent weights", 4 * hs * hs, w.w_hh.len()));
    }
    let mut pre = vec![0.0; 4 * hs];
    affine(w.w_ih, w.bias, x, &mut pre);
    matvec_acc(w.w_hh, h, &mut pre);
    let mut h_new = vec![0.0; hs];
    let mut c_new = vec![0.0; hs];
    for j in 0..hs {
        let i = sigmoid(pre[j]);
        let f = sigmoid(pre[hs + j]);
        let g = pre[2 * hs + j].tanh();
        let o = sigmoid(pre[3 * hs + j]);
        c_new[j] = f * c[j] + i * g;
        h_new[j] = o * c_new[j].tanh();
    }
    Ok((h_new, c_new))
}
