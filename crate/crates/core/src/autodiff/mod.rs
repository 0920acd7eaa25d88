//! Derivatives of the log-amplitude.
//!
//! The network is written once against the [`Tensor`] trait and evaluated
//! with three backends:
//!
//! * [`Matrix`]: plain values, used on the sampler hot path;
//! * [`Taylor`]: second-order forward jets along every particle coordinate,
//!   giving the exact coordinate gradient and the diagonal of the Hessian (so
//!   the Laplacian) in a single pass;
//! * [`Var`]: a tensor-level reverse-mode tape for the gradient with respect
//!   to all trainable parameters.

mod tape;
mod taylor;

pub use tape::{Tape, Var};
pub use taylor::Taylor;

use crate::numerics::{log_cosh, Matrix};

/// Elementwise functions the network is allowed to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Unary {
    Exp,
    Ln,
    Square,
    Recip,
    /// `x^(-1/2)`
    Rsqrt,
    LogCosh,
}

impl Unary {
    #[inline]
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Unary::Exp => x.exp(),
            Unary::Ln => x.ln(),
            Unary::Square => x * x,
            Unary::Recip => 1.0 / x,
            Unary::Rsqrt => 1.0 / x.sqrt(),
            Unary::LogCosh => log_cosh(x),
        }
    }

    /// `(f(x), f'(x), f''(x))`
    #[inline]
    pub fn derivs(self, x: f64) -> (f64, f64, f64) {
        match self {
            Unary::Exp => {
                let e = x.exp();
                (e, e, e)
            }
            Unary::Ln => (x.ln(), 1.0 / x, -1.0 / (x * x)),
            Unary::Square => (x * x, 2.0 * x, 2.0),
            Unary::Recip => {
                let r = 1.0 / x;
                (r, -r * r, 2.0 * r * r * r)
            }
            Unary::Rsqrt => {
                let r = 1.0 / x.sqrt();
                let r3 = r * r * r;
                (r, -0.5 * r3, 0.75 * r3 * r * r)
            }
            Unary::LogCosh => {
                let t = x.tanh();
                (log_cosh(x), t, 1.0 - t * t)
            }
        }
    }

    #[inline]
    pub fn d1(self, x: f64) -> f64 {
        self.derivs(x).1
    }
}

/// Matrix-valued quantity that knows how to carry derivatives through the
/// operations the network uses.
///
/// Row/column broadcasts follow the shapes `1×c` and `r×1` respectively.
pub trait Tensor: Clone {
    fn value(&self) -> &Matrix;

    fn shape(&self) -> (usize, usize) {
        self.value().shape()
    }

    /// A derivative-free tensor living in the same context as `self`.
    fn constant(&self, m: Matrix) -> Self;

    /// `self · rhs`
    fn matmul(&self, rhs: &Self) -> Self;
    /// `self · rhsᵀ`
    fn matmul_t(&self, rhs: &Self) -> Self;
    fn add(&self, rhs: &Self) -> Self;
    fn add_row(&self, row: &Self) -> Self;
    fn mul_row(&self, row: &Self) -> Self;
    fn add_col(&self, col: &Self) -> Self;
    fn mul_col(&self, col: &Self) -> Self;
    fn add_const(&self, m: &Matrix) -> Self;
    fn add_scalar(&self, c: f64) -> Self;
    fn scale(&self, c: f64) -> Self;
    fn map(&self, f: Unary) -> Self;
    /// `r×c → r×1`
    fn sum_rows(&self) -> Self;
    /// `r×c → 1×c`
    fn sum_cols(&self) -> Self;
    fn cols(&self, start: usize, len: usize) -> Self;
    fn hcat(parts: &[Self]) -> Self;
}

impl Tensor for Matrix {
    fn value(&self) -> &Matrix {
        self
    }

    fn constant(&self, m: Matrix) -> Self {
        m
    }

    fn matmul(&self, rhs: &Self) -> Self {
        Matrix::matmul(self, rhs)
    }

    fn matmul_t(&self, rhs: &Self) -> Self {
        Matrix::matmul_t(self, rhs)
    }

    fn add(&self, rhs: &Self) -> Self {
        let mut out = self.clone();
        out.add_assign(rhs);
        out
    }

    fn add_row(&self, row: &Self) -> Self {
        let mut out = self.clone();
        broadcast_row(&mut out, row, |a, b| *a += b);
        out
    }

    fn mul_row(&self, row: &Self) -> Self {
        let mut out = self.clone();
        broadcast_row(&mut out, row, |a, b| *a *= b);
        out
    }

    fn add_col(&self, col: &Self) -> Self {
        let mut out = self.clone();
        broadcast_col(&mut out, col, |a, b| *a += b);
        out
    }

    fn mul_col(&self, col: &Self) -> Self {
        let mut out = self.clone();
        broadcast_col(&mut out, col, |a, b| *a *= b);
        out
    }

    fn add_const(&self, m: &Matrix) -> Self {
        Tensor::add(self, m)
    }

    fn add_scalar(&self, c: f64) -> Self {
        self.map(|x| x + c)
    }

    fn scale(&self, c: f64) -> Self {
        self.scaled(c)
    }

    fn map(&self, f: Unary) -> Self {
        Matrix::map(self, |x| f.eval(x))
    }

    fn sum_rows(&self) -> Self {
        let data = (0..self.rows()).map(|i| self.row(i).iter().sum()).collect();
        Matrix::from_vec(self.rows(), 1, data)
    }

    fn sum_cols(&self) -> Self {
        let mut out = vec![0.0; self.cols()];
        for i in 0..self.rows() {
            for (o, v) in out.iter_mut().zip(self.row(i)) {
                *o += v;
            }
        }
        Matrix::from_vec(1, self.cols(), out)
    }

    fn cols(&self, start: usize, len: usize) -> Self {
        slice_cols(self.data(), self.rows(), self.cols(), start, len)
    }

    fn hcat(parts: &[Self]) -> Self {
        hcat_values(parts.iter())
    }
}

pub(crate) fn broadcast_row(m: &mut Matrix, row: &Matrix, f: impl Fn(&mut f64, f64)) {
    assert_eq!(row.shape(), (1, m.cols()), "row broadcast shape");
    let r = row.data();
    for i in 0..m.rows() {
        for (a, &b) in m.row_mut(i).iter_mut().zip(r) {
            f(a, b);
        }
    }
}

pub(crate) fn broadcast_col(m: &mut Matrix, col: &Matrix, f: impl Fn(&mut f64, f64)) {
    assert_eq!(col.shape(), (m.rows(), 1), "column broadcast shape");
    for i in 0..m.rows() {
        let b = col.data()[i];
        for a in m.row_mut(i) {
            f(a, b);
        }
    }
}

pub(crate) fn slice_cols(data: &[f64], rows: usize, cols: usize, start: usize, len: usize) -> Matrix {
    assert!(start + len <= cols, "column slice out of range");
    let mut out = Vec::with_capacity(rows * len);
    for i in 0..rows {
        out.extend_from_slice(&data[i * cols + start..i * cols + start + len]);
    }
    Matrix::from_vec(rows, len, out)
}

pub(crate) fn hcat_values<'a>(parts: impl Iterator<Item = &'a Matrix> + Clone) -> Matrix {
    let rows = parts.clone().next().map_or(0, Matrix::rows);
    let cols: usize = parts.clone().map(Matrix::cols).sum();
    let mut out = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for p in parts.clone() {
            assert_eq!(p.rows(), rows, "hcat row mismatch");
            out.extend_from_slice(p.row(i));
        }
    }
    Matrix::from_vec(rows, cols, out)
}

/// Log-amplitude together with its exact derivatives.
#[derive(Clone, Debug, PartialEq)]
pub struct LogAmpDerivatives {
    /// `ln φₙ`
    pub value: f64,
    /// `∇ ln φₙ`, particle-major (`n·d` entries).
    pub coord_grad: Vec<f64>,
    /// `∇² ln φₙ`
    pub coord_laplacian: f64,
    /// `∂θ ln φₙ` in parameter-layout order, when requested.
    pub param_grad: Option<Vec<f64>>,
}

impl LogAmpDerivatives {
    pub fn grad_norm_sq(&self) -> f64 {
        self.coord_grad.iter().map(|g| g * g).sum()
    }
}

pub use crate::ansatz::differentiate;

#[cfg(test)]
mod tests {
    use super::*;

    /// Sums every entry of a tensor down to `1×1`.
    fn total<T: Tensor>(t: &T) -> T {
        t.sum_rows().sum_cols()
    }

    #[test]
    fn quadratic_log_amplitude_derivatives() {
        // ln φ = -½ ω Σ |r|², ω = 1, one 2D particle at (1, 0).
        let coords = Taylor::seed_coordinates(&[1.0, 0.0], 2);
        let out = total(&coords.map(Unary::Square)).scale(-0.5);
        assert_eq!(out.value().get(0, 0), -0.5);
        assert_eq!(out.gradient(), vec![-1.0, 0.0]);
        assert_eq!(out.laplacian(), -2.0);
    }

    #[test]
    fn unary_derivatives_match_finite_differences() {
        let h = 1e-5;
        for f in [
            Unary::Exp,
            Unary::Ln,
            Unary::Square,
            Unary::Recip,
            Unary::Rsqrt,
            Unary::LogCosh,
        ] {
            for &x in &[0.3, 1.7, 4.0] {
                let (_, d1, d2) = f.derivs(x);
                let fd1 = (f.eval(x + h) - f.eval(x - h)) / (2.0 * h);
                let fd2 = (f.eval(x + h) - 2.0 * f.eval(x) + f.eval(x - h)) / (h * h);
                assert!((d1 - fd1).abs() <= 1e-7 * (1.0 + d1.abs()), "{f:?} d1 at {x}");
                assert!((d2 - fd2).abs() <= 1e-4 * (1.0 + d2.abs()), "{f:?} d2 at {x}");
            }
        }
    }

    /// A small composite exercising every trait operation.
    fn composite<T: Tensor>(x: &T, w: &T, row: &T) -> T {
        let h = x.matmul(w).add_row(row).map(Unary::LogCosh);
        let s = h.matmul_t(&h).scale(0.3);
        let e = s.map(Unary::Exp);
        let z = e.sum_rows().map(Unary::Recip);
        let a = e.mul_col(&z);
        let y = a.matmul(&h);
        let mean = y.sum_rows().scale(1.0 / y.shape().1 as f64);
        let c = y.add_col(&mean.scale(-1.0));
        let inv = c.map(Unary::Square).sum_rows().add_scalar(1e-3).map(Unary::Rsqrt);
        let n = c.mul_col(&inv).mul_row(row);
        let parts = [n.cols(0, 1), n.cols(1, 2)];
        let cat = T::hcat(&parts).add(&n).add_const(&Matrix::filled(n.shape().0, 3, 0.1));
        cat.map(Unary::Square)
            .sum_cols()
            .add_scalar(1.0)
            .map(Unary::Ln)
            .sum_rows()
    }

    fn fixture() -> (Matrix, Matrix, Matrix) {
        let x = Matrix::from_rows(&[vec![0.2, -0.4], vec![0.9, 0.1], vec![-0.3, 0.5]]);
        let w = Matrix::from_rows(&[vec![0.5, -0.2, 0.8], vec![0.1, 0.7, -0.6]]);
        let row = Matrix::from_rows(&[vec![0.3, -0.1, 0.4]]);
        (x, w, row)
    }

    #[test]
    fn backends_agree_on_values() {
        let (x, w, row) = fixture();
        let plain = composite(&x, &w, &row).get(0, 0);
        let tx = Taylor::seed_coordinates(x.data(), 2);
        let jet = composite(&tx, &tx.constant(w.clone()), &tx.constant(row.clone()));
        let tape = Tape::new();
        let vx = tape.constant_var(x.clone());
        let var = composite(&vx, &tape.leaf(w.clone()), &tape.leaf(row.clone()));
        assert_eq!(jet.value().get(0, 0), plain);
        assert_eq!(var.value().get(0, 0), plain);
    }

    #[test]
    fn taylor_matches_finite_differences() {
        let (x, w, row) = fixture();
        let f = |xs: &[f64]| {
            composite(&Matrix::from_vec(3, 2, xs.to_vec()), &w, &row).get(0, 0)
        };
        let tx = Taylor::seed_coordinates(x.data(), 2);
        let out = composite(&tx, &tx.constant(w.clone()), &tx.constant(row.clone()));
        let grad = out.gradient();
        let h = 1e-4;
        let mut lap_fd = 0.0;
        for k in 0..6 {
            let mut p = x.data().to_vec();
            let mut m = x.data().to_vec();
            p[k] += h;
            m[k] -= h;
            let (fp, fm, f0) = (f(&p), f(&m), f(x.data()));
            let g = (fp - fm) / (2.0 * h);
            assert!((grad[k] - g).abs() <= 1e-6 * (1.0 + g.abs()), "grad {k}");
            lap_fd += (fp - 2.0 * f0 + fm) / (h * h);
        }
        let lap = out.laplacian();
        assert!((lap - lap_fd).abs() <= 1e-4 * (1.0 + lap.abs()), "{lap} vs {lap_fd}");
    }

    #[test]
    fn taylor_handles_products_of_two_variable_operands() {
        // f(x) = (x·x)ᵀ-style product: both operands carry tangents.
        let tx = Taylor::seed_coordinates(&[0.7, -1.3], 1);
        let out = tx.matmul_t(&tx).map(Unary::Exp).sum_rows().sum_cols();
        let f = |a: f64, b: f64| (a * a).exp() + 2.0 * (a * b).exp() + (b * b).exp();
        let (a, b): (f64, f64) = (0.7, -1.3);
        let ga = 2.0 * a * (a * a).exp() + 2.0 * b * (a * b).exp();
        let gaa = (2.0 + 4.0 * a * a) * (a * a).exp() + 2.0 * b * b * (a * b).exp();
        let gbb = (2.0 + 4.0 * b * b) * (b * b).exp() + 2.0 * a * a * (a * b).exp();
        assert!((out.value().get(0, 0) - f(a, b)).abs() < 1e-12);
        assert!((out.gradient()[0] - ga).abs() < 1e-12);
        assert!((out.laplacian() - (gaa + gbb)).abs() < 1e-11);
    }

    #[test]
    fn tape_matches_finite_differences() {
        let (x, w, row) = fixture();
        let tape = Tape::new();
        let lw = tape.leaf(w.clone());
        let lr = tape.leaf(row.clone());
        let out = composite(&tape.constant_var(x.clone()), &lw, &lr);
        let grads = tape.gradients(&out);
        let gw = grads.of(&lw).unwrap();
        let gr = grads.of(&lr).unwrap();
        let h = 1e-6;
        for k in 0..6 {
            let mut p = w.clone();
            let mut m = w.clone();
            p.data_mut()[k] += h;
            m.data_mut()[k] -= h;
            let fd = (composite(&x, &p, &row).get(0, 0) - composite(&x, &m, &row).get(0, 0))
                / (2.0 * h);
            assert!((gw.data()[k] - fd).abs() <= 1e-6 * (1.0 + fd.abs()), "w[{k}]");
        }
        for k in 0..3 {
            let mut p = row.clone();
            let mut m = row.clone();
            p.data_mut()[k] += h;
            m.data_mut()[k] -= h;
            let fd = (composite(&x, &w, &p).get(0, 0) - composite(&x, &w, &m).get(0, 0))
                / (2.0 * h);
            assert!((gr.data()[k] - fd).abs() <= 1e-6 * (1.0 + fd.abs()), "row[{k}]");
        }
    }
}
