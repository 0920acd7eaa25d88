//! The attention network, written once for every [`Tensor`] backend.

use crate::autodiff::{Tensor, Unary};
use crate::numerics::{Matrix, MASK};

use super::layout::Layout;

const LN_EPS: f64 = 1e-5;
const PER_BLOCK: usize = 16;

// Offsets of the per-block tensors, in layout order.
const LN1_G: usize = 0;
const LN1_B: usize = 1;
const WQ: usize = 2;
const BQ: usize = 3;
const WK: usize = 4;
const BK: usize = 5;
const WV: usize = 6;
const BV: usize = 7;
const WO: usize = 8;
const BO: usize = 9;
const LN2_G: usize = 10;
const LN2_B: usize = 11;
const FF1_W: usize = 12;
const FF1_B: usize = 13;
const FF2_W: usize = 14;
const FF2_B: usize = 15;

/// Marks which rows of a padded input are real particles.
pub(crate) struct Padding {
    /// Additive attention mask: `MASK` on padding key columns.
    key_mask: Matrix,
    /// `1` for real rows, `0` for padding.
    row_mask: Matrix,
    n: usize,
}

impl Padding {
    pub fn new(n: usize, n_max: usize) -> Self {
        let mut key_mask = Matrix::zeros(n_max, n_max);
        for i in 0..n_max {
            for j in n..n_max {
                key_mask.set(i, j, MASK);
            }
        }
        let row_mask = Matrix::from_vec(
            n_max,
            1,
            (0..n_max).map(|i| if i < n { 1.0 } else { 0.0 }).collect(),
        );
        Self {
            key_mask,
            row_mask,
            n,
        }
    }
}

/// Network weights as tensors of one backend, in layout order.
pub(crate) struct Net<T> {
    w: Vec<T>,
    blocks: usize,
    heads: usize,
}

impl<T: Tensor> Net<T> {
    pub fn load(layout: &Layout, values: &[f64], blocks: usize, heads: usize, mut mk: impl FnMut(Matrix) -> T) -> Self {
        let w = layout
            .blocks
            .iter()
            .take_while(|b| b.offset < layout.network_len)
            .map(|b| mk(Matrix::from_vec(b.rows, b.cols, values[b.range()].to_vec())))
            .collect();
        Self { w, blocks, heads }
    }

    pub fn tensors(&self) -> &[T] {
        &self.w
    }

    fn bw(&self, block: usize, which: usize) -> &T {
        &self.w[block * PER_BLOCK + which]
    }

    fn tail(&self, which: usize) -> &T {
        &self.w[self.blocks * PER_BLOCK + which]
    }

    /// `ln φ̃` for embedded rows `x`; all rows are real unless `padding` says
    /// otherwise.
    pub fn forward(&self, x: T, padding: Option<&Padding>) -> T {
        let mut x = x;
        for b in 0..self.blocks {
            x = self.block(b, x, padding);
        }
        let pooled = pool(&x, self.tail(0), padding);
        self.head(pooled)
    }

    /// Output on an all-masked input: the head evaluated on a zero pooled
    /// vector.
    pub fn empty(&self) -> T {
        let k = self.tail(0).shape().1;
        let zero = self.tail(0).constant(Matrix::zeros(1, k));
        self.head(zero)
    }

    fn head(&self, pooled: T) -> T {
        pooled
            .matmul(self.tail(1))
            .add_row(self.tail(2))
            .map(Unary::LogCosh)
            .matmul(self.tail(3))
            .add_row(self.tail(4))
    }

    fn block(&self, b: usize, x: T, padding: Option<&Padding>) -> T {
        let h = layer_norm(&x, self.bw(b, LN1_G), self.bw(b, LN1_B));
        let att = self.attention(b, &h, padding);
        let x = x.add(&att);
        let h = layer_norm(&x, self.bw(b, LN2_G), self.bw(b, LN2_B));
        let ff = h
            .matmul(self.bw(b, FF1_W))
            .add_row(self.bw(b, FF1_B))
            .map(Unary::LogCosh)
            .matmul(self.bw(b, FF2_W))
            .add_row(self.bw(b, FF2_B));
        let x = x.add(&ff);
        match padding {
            Some(p) => x.mul_col(&x.constant(p.row_mask.clone())),
            None => x,
        }
    }

    fn attention(&self, b: usize, h: &T, padding: Option<&Padding>) -> T {
        let q = h.matmul(self.bw(b, WQ)).add_row(self.bw(b, BQ));
        let k = h.matmul(self.bw(b, WK)).add_row(self.bw(b, BK));
        let v = h.matmul(self.bw(b, WV)).add_row(self.bw(b, BV));
        let width = q.shape().1;
        let dk = width / self.heads;
        let scale = 1.0 / (dk as f64).sqrt();
        let outs: Vec<T> = (0..self.heads)
            .map(|hd| {
                let qh = q.cols(hd * dk, dk);
                let kh = k.cols(hd * dk, dk);
                let vh = v.cols(hd * dk, dk);
                let mut s = qh.matmul_t(&kh).scale(scale);
                if let Some(p) = padding {
                    s = s.add_const(&p.key_mask);
                }
                softmax_rows(&s).matmul(&vh)
            })
            .collect();
        let cat = if outs.len() == 1 {
            outs.into_iter().next().expect("one head")
        } else {
            T::hcat(&outs)
        };
        cat.matmul(self.bw(b, WO)).add_row(self.bw(b, BO))
    }
}

/// Row-wise softmax; the row maximum is a constant shift, which leaves the
/// result and its derivatives unchanged.
fn softmax_rows<T: Tensor>(s: &T) -> T {
    let (r, c) = s.shape();
    let v = s.value();
    let mut shift = Matrix::zeros(r, c);
    for i in 0..r {
        let m = v.row(i).iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        shift.row_mut(i).fill(-m);
    }
    let e = s.add_const(&shift).map(Unary::Exp);
    let z = e.sum_rows().map(Unary::Recip);
    e.mul_col(&z)
}

fn layer_norm<T: Tensor>(x: &T, gamma: &T, beta: &T) -> T {
    let k = x.shape().1 as f64;
    let mean = x.sum_rows().scale(-1.0 / k);
    let c = x.add_col(&mean);
    let inv = c
        .map(Unary::Square)
        .sum_rows()
        .scale(1.0 / k)
        .add_scalar(LN_EPS)
        .map(Unary::Rsqrt);
    c.mul_col(&inv).mul_row(gamma).add_row(beta)
}

/// Column-wise `ln Σ_i a_c e^{x_ic}` over real rows.
fn pool<T: Tensor>(x: &T, log_weight: &T, padding: Option<&Padding>) -> T {
    let (r, c) = x.shape();
    let real = padding.map_or(r, |p| p.n);
    let v = x.value();
    let mut colmax = vec![f64::NEG_INFINITY; c];
    for i in 0..real {
        for (m, &xv) in colmax.iter_mut().zip(v.row(i)) {
            *m = m.max(xv);
        }
    }
    let mut shift = Matrix::zeros(r, c);
    for i in 0..r {
        for (s, &m) in shift.row_mut(i).iter_mut().zip(&colmax) {
            *s = -m;
        }
    }
    let mut e = x.add_const(&shift).map(Unary::Exp);
    if let Some(p) = padding {
        e = e.mul_col(&x.constant(p.row_mask.clone()));
    }
    e.sum_cols()
        .map(Unary::Ln)
        .add_const(&Matrix::from_vec(1, c, colmax))
        .add_row(log_weight)
}
