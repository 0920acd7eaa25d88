use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AnsatzHyper, ExtraFactors};

/// What a parameter block is, which decides its initialization and learning
/// rate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParamKind {
    Weight { fan_in: usize, fan_out: usize },
    Bias,
    Gain,
    /// `ln a` of the pooling weights.
    PoolLogWeight,
    /// `(c1, ln(c2 - c1), ln s)`
    Window,
    /// `ln ω` of the Gaussian envelope.
    Envelope,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamBlock {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
    pub kind: ParamKind,
}

impl ParamBlock {
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

/// Describes how the flat parameter vector splits into named blocks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub blocks: Vec<ParamBlock>,
    pub total: usize,
    /// Parameters belonging to the network (a prefix of the vector).
    pub network_len: usize,
    pub window_offset: Option<usize>,
    pub envelope_offset: Option<usize>,
}

impl Layout {
    pub fn new(hyper: &AnsatzHyper, factors: &ExtraFactors) -> Self {
        let k = hyper.embed_dim;
        let f = hyper.ffn_width;
        let mut b = Builder::default();
        for l in 0..hyper.blocks {
            let p = |s: &str| format!("block{l}.{s}");
            b.gain(&p("ln1.gamma"), k);
            b.bias(&p("ln1.beta"), k);
            for w in ["q", "k", "v"] {
                b.weight(&p(&format!("w{w}")), k, k);
                b.bias(&p(&format!("b{w}")), k);
            }
            b.weight(&p("wo"), k, k);
            b.bias(&p("bo"), k);
            b.gain(&p("ln2.gamma"), k);
            b.bias(&p("ln2.beta"), k);
            b.weight(&p("ff1.w"), k, f);
            b.bias(&p("ff1.b"), f);
            b.weight(&p("ff2.w"), f, k);
            b.bias(&p("ff2.b"), k);
        }
        b.push("pool.log_weight", 1, k, ParamKind::PoolLogWeight);
        b.weight("head1.w", k, f);
        b.bias("head1.b", f);
        b.weight("head2.w", f, 1);
        b.bias("head2.b", 1);
        let network_len = b.total;
        let window_offset = factors.window.then(|| {
            let off = b.total;
            b.push("window", 1, 3, ParamKind::Window);
            off
        });
        let envelope_offset = factors.envelope.map(|_| {
            let off = b.total;
            b.push("envelope.log_omega", 1, 1, ParamKind::Envelope);
            off
        });
        Layout {
            blocks: b.blocks,
            total: b.total,
            network_len,
            window_offset,
            envelope_offset,
        }
    }

    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn block(&self, name: &str) -> Option<&ParamBlock> {
        self.blocks.iter().find(|b| b.name == name)
    }

    /// Per-parameter learning-rate multipliers.
    pub fn lr_multipliers(&self, window_multiplier: f64) -> Vec<f64> {
        let mut out = vec![1.0; self.total];
        if let Some(off) = self.window_offset {
            for m in &mut out[off..off + 3] {
                *m = window_multiplier;
            }
        }
        out
    }
}

#[derive(Default)]
struct Builder {
    blocks: Vec<ParamBlock>,
    total: usize,
}

impl Builder {
    fn push(&mut self, name: &str, rows: usize, cols: usize, kind: ParamKind) {
        self.blocks.push(ParamBlock {
            name: name.to_string(),
            rows,
            cols,
            offset: self.total,
            kind,
        });
        self.total += rows * cols;
    }

    fn weight(&mut self, name: &str, fan_in: usize, fan_out: usize) {
        self.push(name, fan_in, fan_out, ParamKind::Weight { fan_in, fan_out });
    }

    fn bias(&mut self, name: &str, len: usize) {
        self.push(name, 1, len, ParamKind::Bias);
    }

    fn gain(&mut self, name: &str, len: usize) {
        self.push(name, 1, len, ParamKind::Gain);
    }
}

/// Flat vector of every trainable parameter, ordered as in [`Layout`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnsatzParams {
    values: Vec<f64>,
}

impl AnsatzParams {
    pub fn from_vec(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn norm(&self) -> f64 {
        crate::numerics::norm(&self.values)
    }

    /// `θ ← θ + δ`
    pub fn apply(&mut self, delta: &[f64]) {
        assert_eq!(delta.len(), self.values.len());
        for (p, d) in self.values.iter_mut().zip(delta) {
            *p += d;
        }
    }
}

/// Xavier-uniform weights, zero biases, unit gains and pooling weights, and a
/// wide-open particle-number window.
pub fn init_params(hyper: &AnsatzHyper, factors: &ExtraFactors, seed: u64) -> AnsatzParams {
    let layout = Layout::new(hyper, factors);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = vec![0.0; layout.total];
    for b in &layout.blocks {
        let slot = &mut values[b.range()];
        match b.kind {
            ParamKind::Weight { fan_in, fan_out } => {
                let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
                for v in slot {
                    *v = rng.gen_range(-a..a);
                }
            }
            ParamKind::Gain => slot.fill(1.0),
            ParamKind::Bias | ParamKind::PoolLogWeight => slot.fill(0.0),
            ParamKind::Window => {
                slot[0] = 0.0;
                slot[1] = (hyper.n_max as f64).ln();
                slot[2] = 0.0;
            }
            ParamKind::Envelope => {
                slot[0] = factors.envelope.unwrap_or(1.0).ln();
            }
        }
    }
    AnsatzParams { values }
}
