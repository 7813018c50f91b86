use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::ModelConfig;

/// Location of one dense layer inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenseSlot {
    pub weight: usize,
    pub bias: usize,
    pub inputs: usize,
    pub outputs: usize,
}

/// Named tensor inside the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorSpec {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Offsets of every tensor in the flat parameter vector.
///
/// LSTM gate rows are stacked as input, forget, cell candidate, output.
/// The input weight matrix has the dynamic-embedding columns first, then the
/// static-embedding columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub hidden: usize,
    pub embed: usize,
    pub dynamic: [DenseSlot; 3],
    pub statics: [DenseSlot; 3],
    pub w_ih: usize,
    pub w_hh: usize,
    pub b_lstm: usize,
    pub head_w: usize,
    pub head_b: usize,
    pub total: usize,
    pub tensors: Vec<TensorSpec>,
}

impl Layout {
    pub fn new(cfg: &ModelConfig) -> Self {
        let mut tensors = Vec::new();
        let mut offset = 0;
        let mut push = |name: String, rows: usize, cols: usize| {
            tensors.push(TensorSpec { name, rows, cols, offset });
            offset += rows * cols;
            offset - rows * cols
        };
        let mlp = |prefix: &str, n_in: usize, push: &mut dyn FnMut(String, usize, usize) -> usize| {
            let mut prev = n_in;
            let slots: Vec<DenseSlot> = cfg
                .embed_layers
                .iter()
                .enumerate()
                .map(|(k, &width)| {
                    let weight = push(format!("{prefix}.{k}.weight"), width, prev);
                    let bias = push(format!("{prefix}.{k}.bias"), width, 1);
                    let slot = DenseSlot { weight, bias, inputs: prev, outputs: width };
                    prev = width;
                    slot
                })
                .collect();
            [slots[0], slots[1], slots[2]]
        };
        let dynamic = mlp("dynamic_embed", cfg.n_dynamic, &mut push);
        let statics = mlp("static_embed", cfg.n_static, &mut push);
        let h = cfg.hidden_size;
        let e = 2 * cfg.embed_dim();
        let w_ih = push("lstm.weight_ih".into(), 4 * h, e);
        let w_hh = push("lstm.weight_hh".into(), 4 * h, h);
        let b_lstm = push("lstm.bias".into(), 4 * h, 1);
        let head_w = push("head.weight".into(), 1, h);
        let head_b = push("head.bias".into(), 1, 1);
        Layout {
            hidden: h,
            embed: cfg.embed_dim(),
            dynamic,
            statics,
            w_ih,
            w_hh,
            b_lstm,
            head_w,
            head_b,
            total: offset,
            tensors,
        }
    }

    /// Name of the tensor that owns flat index `i`.
    pub fn tensor_of(&self, i: usize) -> &str {
        self.tensors
            .iter()
            .find(|t| t.range().contains(&i))
            .map(|t| t.name.as_str())
            .unwrap_or("<out of range>")
    }

    pub fn tensor(&self, name: &str) -> Option<&TensorSpec> {
        self.tensors.iter().find(|t| t.name == name)
    }

    /// Uniform fan-in initialization; biases zero except the forget gate at +1.
    pub fn init<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let mut p = vec![0.0; self.total];
        for t in &self.tensors {
            if t.name.ends_with("bias") {
                continue;
            }
            let bound = 1.0 / (t.cols as f64).sqrt();
            for v in &mut p[t.range()] {
                *v = rng.random_range(-bound..bound);
            }
        }
        let h = self.hidden;
        for v in &mut p[self.b_lstm + h..self.b_lstm + 2 * h] {
            *v = 1.0;
        }
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn layout_covers_vector_without_gaps() {
        let cfg = ModelConfig { hidden_size: 4, n_dynamic: 3, n_static: 5, embed_layers: [6, 5, 4], ..ModelConfig::default() };
        let l = Layout::new(&cfg);
        let mut end = 0;
        for t in &l.tensors {
            assert_eq!(t.offset, end);
            end += t.len();
        }
        assert_eq!(end, l.total);
        assert_eq!(l.tensor("lstm.weight_ih").unwrap().cols, 8);
        assert_eq!(l.tensor_of(l.head_b), "head.bias");
        let p = l.init(&mut rand_chacha::ChaCha8Rng::seed_from_u64(0));
        assert_eq!(&p[l.b_lstm + 4..l.b_lstm + 8], &[1.0; 4]);
        assert_eq!(p[l.b_lstm], 0.0);
    }
}
