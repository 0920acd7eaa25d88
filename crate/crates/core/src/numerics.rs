//! Dense kernels shared by every other module.
//!
//! Everything here is 64-bit and row-major. Masked attention entries carry the
//! finite sentinel [`MASK`] rather than `-inf`, so arithmetic on masked rows
//! never produces NaN.

use std::f64::consts::LN_2;

use crate::error::{Error, Result};

/// Additive attention-mask sentinel.
pub const MASK: f64 = -1e30;
/// Entries at or below this value are treated as masked.
pub const MASK_THRESHOLD: f64 = -1e29;

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(rows * cols, data.len(), "matrix data length");
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Self::from_vec(r, c, data)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    /// `self · rhs`
    pub fn matmul(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.cols, rhs.rows, "matmul inner dimension");
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        gemm(
            1.0,
            MatRef::new(self),
            MatRef::new(rhs),
            0.0,
            &mut out,
        );
        out
    }

    /// `self · rhsᵀ`
    pub fn matmul_t(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.cols, rhs.cols, "matmul_t inner dimension");
        let mut out = Matrix::zeros(self.rows, rhs.rows);
        gemm(
            1.0,
            MatRef::new(self),
            MatRef::new(rhs).t(),
            0.0,
            &mut out,
        );
        out
    }

    /// `selfᵀ · rhs`
    pub fn t_matmul(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.rows, rhs.rows, "t_matmul inner dimension");
        let mut out = Matrix::zeros(self.cols, rhs.cols);
        gemm(
            1.0,
            MatRef::new(self).t(),
            MatRef::new(rhs),
            0.0,
            &mut out,
        );
        out
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "matvec dimension");
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// `selfᵀ · v`
    pub fn t_matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.rows, v.len(), "t_matvec dimension");
        let mut out = vec![0.0; self.cols];
        for (i, &vi) in v.iter().enumerate() {
            if vi != 0.0 {
                axpy(vi, self.row(i), &mut out);
            }
        }
        out
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> Matrix {
        self.map(|x| c * x)
    }

    pub fn add_assign(&mut self, other: &Matrix) {
        assert_eq!(self.shape(), other.shape(), "add_assign shape");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// Strided read-only view used to feed `gemm` without materializing transposes.
#[derive(Clone, Copy)]
pub struct MatRef<'a> {
    pub data: &'a [f64],
    pub rows: usize,
    pub cols: usize,
    pub row_stride: isize,
    pub col_stride: isize,
}

impl<'a> MatRef<'a> {
    pub fn new(m: &'a Matrix) -> Self {
        Self::from_slice(&m.data, m.rows, m.cols)
    }

    pub fn from_slice(data: &'a [f64], rows: usize, cols: usize) -> Self {
        debug_assert!(data.len() >= rows * cols);
        Self {
            data,
            rows,
            cols,
            row_stride: cols as isize,
            col_stride: 1,
        }
    }

    pub fn t(self) -> Self {
        Self {
            data: self.data,
            rows: self.cols,
            cols: self.rows,
            row_stride: self.col_stride,
            col_stride: self.row_stride,
        }
    }
}

/// `out = alpha · a · b + beta · out`
pub fn gemm(alpha: f64, a: MatRef<'_>, b: MatRef<'_>, beta: f64, out: &mut Matrix) {
    gemm_into(alpha, a, b, beta, &mut out.data, out.rows, out.cols);
}

/// Same as [`gemm`] writing into a raw row-major block.
pub fn gemm_into(
    alpha: f64,
    a: MatRef<'_>,
    b: MatRef<'_>,
    beta: f64,
    out: &mut [f64],
    rows: usize,
    cols: usize,
) {
    assert_eq!(a.cols, b.rows, "gemm inner dimension");
    assert_eq!((a.rows, b.cols), (rows, cols), "gemm output shape");
    assert!(out.len() >= rows * cols);
    if rows == 0 || cols == 0 {
        return;
    }
    if a.cols == 0 {
        for x in &mut out[..rows * cols] {
            *x *= beta;
        }
        return;
    }
    // SAFETY: the views were built from slices covering every addressed
    // element and `out` is exclusively borrowed with rows·cols capacity.
    unsafe {
        matrixmultiply::dgemm(
            rows,
            a.cols,
            cols,
            alpha,
            a.data.as_ptr(),
            a.row_stride,
            a.col_stride,
            b.data.as_ptr(),
            b.row_stride,
            b.col_stride,
            beta,
            out.as_mut_ptr(),
            cols as isize,
            1,
        );
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Row-wise softmax. Entries at or below [`MASK_THRESHOLD`] map to exactly 0.
pub fn softmax_rows(m: &Matrix) -> Result<Matrix> {
    let mut out = Matrix::zeros(m.rows, m.cols);
    for i in 0..m.rows {
        let row = m.row(i);
        let max = row
            .iter()
            .copied()
            .filter(|&x| x > MASK_THRESHOLD)
            .fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(Error::DegenerateAttentionRow { row: i });
        }
        let dst = out.row_mut(i);
        let mut total = 0.0;
        for (d, &x) in dst.iter_mut().zip(row) {
            if x > MASK_THRESHOLD {
                *d = (x - max).exp();
                total += *d;
            }
        }
        for d in dst.iter_mut() {
            *d /= total;
        }
    }
    Ok(out)
}

/// `ln Σ aᵢ exp(xᵢ)`, evaluated with max subtraction.
pub fn log_sum_exp_weighted(x: &[f64], a: &[f64]) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::EmptyInput("log_sum_exp_weighted"));
    }
    if x.len() != a.len() {
        return Err(Error::Shape(format!(
            "{} values vs {} weights",
            x.len(),
            a.len()
        )));
    }
    if let Some((index, &value)) = a.iter().enumerate().find(|(_, &w)| !(w > 0.0)) {
        return Err(Error::NonPositiveWeight { index, value });
    }
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = x.iter().zip(a).map(|(&xi, &ai)| ai * (xi - max).exp()).sum();
    Ok(max + s.ln())
}

/// `ln cosh x` without overflow for large |x|.
#[inline]
pub fn log_cosh(x: f64) -> f64 {
    let ax = x.abs();
    ax + (-2.0 * ax).exp().ln_1p() - LN_2
}

/// `ln(1 + eˣ)`
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Logistic function `1 / (1 + e⁻ˣ)`.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Row-wise layer normalization with affine scale and offset.
pub fn layer_norm_rows(x: &Matrix, gamma: &[f64], beta: &[f64], eps: f64) -> Matrix {
    let k = x.cols;
    assert_eq!(gamma.len(), k);
    assert_eq!(beta.len(), k);
    let mut out = Matrix::zeros(x.rows, k);
    for i in 0..x.rows {
        let row = x.row(i);
        let mean = row.iter().sum::<f64>() / k as f64;
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / k as f64;
        let inv = 1.0 / (var + eps).sqrt();
        for (j, o) in out.row_mut(i).iter_mut().enumerate() {
            *o = (row[j] - mean) * inv * gamma[j] + beta[j];
        }
    }
    out
}

/// Symmetric system `(matrix + shift·I) x = rhs`.
#[derive(Clone, Debug)]
pub struct SpdSystem {
    pub matrix: Matrix,
    pub rhs: Vec<f64>,
    pub shift: f64,
}

impl SpdSystem {
    pub fn new(matrix: Matrix, rhs: Vec<f64>, shift: f64) -> Result<Self> {
        let n = matrix.rows;
        if matrix.cols != n || rhs.len() != n {
            return Err(Error::Shape(format!(
                "system {}x{} with rhs of length {}",
                matrix.rows,
                matrix.cols,
                rhs.len()
            )));
        }
        if !(shift >= 0.0) {
            return Err(Error::InvalidSettings(format!("negative shift {shift}")));
        }
        let asym = max_asymmetry(&matrix);
        let scale = matrix.data.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if asym > 1e-12 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::NotSymmetric(asym));
        }
        Ok(Self { matrix, rhs, shift })
    }
}

pub fn max_asymmetry(m: &Matrix) -> f64 {
    let n = m.rows;
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..i {
            worst = worst.max((m.get(i, j) - m.get(j, i)).abs());
        }
    }
    worst
}

/// Cholesky factor `L` (lower, row-major) of `a + shift·I`.
pub fn cholesky(a: &Matrix, shift: f64) -> Result<Matrix> {
    let n = a.rows;
    let mut l = Matrix::zeros(n, n);
    let mut smallest = (0usize, f64::INFINITY);
    for i in 0..n {
        for j in 0..=i {
            let s = dot(&l.row(i)[..j], &l.row(j)[..j]);
            if i == j {
                let pivot = a.get(i, i) + shift - s;
                if pivot < smallest.1 {
                    smallest = (i, pivot);
                }
                if !(pivot > 0.0) {
                    return Err(Error::NotPositiveDefinite {
                        index: smallest.0,
                        pivot: smallest.1,
                    });
                }
                l.set(i, i, pivot.sqrt());
            } else {
                let v = (a.get(i, j) - s) / l.get(j, j);
                l.set(i, j, v);
            }
        }
    }
    Ok(l)
}

/// Solves `(A + shift·I) x = b` by Cholesky factorization.
pub fn solve_spd(sys: &SpdSystem) -> Result<Vec<f64>> {
    let l = cholesky(&sys.matrix, sys.shift)?;
    Ok(cholesky_solve(&l, &sys.rhs))
}

pub fn cholesky_solve(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows;
    let mut y = vec![0.0; n];
    for i in 0..n {
        y[i] = (b[i] - dot(&l.row(i)[..i], &y[..i])) / l.get(i, i);
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l.get(k, i) * x[k];
        }
        x[i] = s / l.get(i, i);
    }
    x
}

/// Eigenvalues in ascending order and the matching eigenvectors as columns.
pub fn symmetric_eigen(m: &Matrix) -> (Vec<f64>, Matrix) {
    let n = m.rows;
    assert_eq!(n, m.cols, "symmetric_eigen needs a square matrix");
    let dm = nalgebra::DMatrix::from_fn(n, n, |i, j| 0.5 * (m.get(i, j) + m.get(j, i)));
    let eig = nalgebra::SymmetricEigen::new(dm);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        for i in 0..n {
            vectors.set(i, col, eig.eigenvectors[(i, k)]);
        }
    }
    (values, vectors)
}

/// Minimum-norm solution of a symmetric positive-semidefinite system through
/// its eigendecomposition; eigenvalues below `rcond · λ_max` are discarded.
pub fn solve_psd_pinv(m: &Matrix, b: &[f64], rcond: f64) -> Vec<f64> {
    let (values, vectors) = symmetric_eigen(m);
    let n = values.len();
    let lmax = values.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let cut = rcond * lmax;
    let mut x = vec![0.0; n];
    for (k, &lambda) in values.iter().enumerate() {
        if lambda <= cut {
            continue;
        }
        let proj: f64 = (0..n).map(|i| vectors.get(i, k) * b[i]).sum::<f64>() / lambda;
        for (i, xi) in x.iter_mut().enumerate() {
            *xi += proj * vectors.get(i, k);
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn softmax_examples() {
        let m = Matrix::from_rows(&[vec![0.0, 0.0], vec![2.0, 2.0 + 3f64.ln()], vec![1.0, MASK]]);
        let s = softmax_rows(&m).unwrap();
        assert!(close(s.get(0, 0), 0.5, 1e-15) && close(s.get(0, 1), 0.5, 1e-15));
        assert!(close(s.get(1, 0), 0.25, 1e-14) && close(s.get(1, 1), 0.75, 1e-14));
        assert_eq!(s.get(2, 0), 1.0);
        assert_eq!(s.get(2, 1), 0.0);
    }

    #[test]
    fn softmax_all_masked_row_is_an_error() {
        let m = Matrix::from_rows(&[vec![0.0, 1.0], vec![MASK, MASK]]);
        assert!(matches!(
            softmax_rows(&m),
            Err(Error::DegenerateAttentionRow { row: 1 })
        ));
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = Matrix::from_vec(
            1000,
            7,
            (0..7000).map(|_| rng.gen_range(-50.0..50.0)).collect(),
        );
        let s = softmax_rows(&m).unwrap();
        for i in 0..1000 {
            let total: f64 = s.row(i).iter().sum();
            assert!((total - 1.0).abs() <= 1e-12);
            assert!(s.row(i).iter().all(|&p| p >= 0.0));
        }
    }

    #[test]
    fn lse_examples() {
        assert!(close(
            log_sum_exp_weighted(&[0.0, 0.0], &[1.0, 1.0]).unwrap(),
            LN_2,
            1e-15
        ));
        assert!(close(
            log_sum_exp_weighted(&[1000.0, 1000.0], &[1.0, 1.0]).unwrap(),
            1000.0 + LN_2,
            1e-12
        ));
        assert!(close(
            log_sum_exp_weighted(&[0.0], &[3.0]).unwrap(),
            3f64.ln(),
            1e-15
        ));
        assert!(matches!(
            log_sum_exp_weighted(&[], &[]),
            Err(Error::EmptyInput(_))
        ));
        assert!(log_sum_exp_weighted(&[0.0], &[0.0]).is_err());
    }

    proptest! {
        #[test]
        fn lse_shift_equivariance(
            x in prop::collection::vec(-30.0f64..30.0, 1..12),
            c in -500.0f64..500.0,
        ) {
            let a: Vec<f64> = (0..x.len()).map(|i| 0.5 + i as f64).collect();
            let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
            let lhs = log_sum_exp_weighted(&shifted, &a).unwrap();
            let rhs = log_sum_exp_weighted(&x, &a).unwrap() + c;
            prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + c.abs()));
        }
    }

    #[test]
    fn log_cosh_is_stable() {
        assert!(close(log_cosh(0.0), 0.0, 1e-16));
        assert!(close(log_cosh(0.3), 0.3f64.cosh().ln(), 1e-15));
        assert!(close(log_cosh(-800.0), 800.0 - LN_2, 1e-9));
    }

    #[test]
    fn spd_examples() {
        let sys = SpdSystem::new(Matrix::identity(2), vec![2.0, 3.0], 0.0).unwrap();
        assert_eq!(solve_spd(&sys).unwrap(), vec![2.0, 3.0]);
        let a = Matrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 4.0]]);
        let sys = SpdSystem::new(a, vec![2.0, 4.0], 0.0).unwrap();
        let x = solve_spd(&sys).unwrap();
        assert!(close(x[0], 1.0, 1e-15) && close(x[1], 1.0, 1e-15));
    }

    #[test]
    fn spd_reports_failing_pivot() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        let sys = SpdSystem::new(a, vec![1.0, 1.0], 0.0).unwrap();
        match solve_spd(&sys) {
            Err(Error::NotPositiveDefinite { index, pivot }) => {
                assert_eq!(index, 1);
                assert!(close(pivot, -3.0, 1e-12));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn spd_rejects_asymmetric_input() {
        let a = Matrix::from_rows(&[vec![1.0, 0.5], vec![0.0, 1.0]]);
        assert!(matches!(
            SpdSystem::new(a, vec![1.0, 1.0], 0.0),
            Err(Error::NotSymmetric(_))
        ));
    }

    fn random_gram(rng: &mut ChaCha8Rng, n: usize, extra: usize) -> Matrix {
        let g = Matrix::from_vec(
            n,
            n + extra,
            (0..n * (n + extra)).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        );
        g.matmul_t(&g)
    }

    #[test]
    fn spd_matches_eigen_pseudoinverse_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_gram(&mut rng, 8, 4);
        let b: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
        // Oracle: A⁺ b from nalgebra's eigendecomposition.
        let dm = nalgebra::DMatrix::from_fn(8, 8, |i, j| a.get(i, j));
        let eig = nalgebra::SymmetricEigen::new(dm);
        let db = nalgebra::DVector::from_column_slice(&b);
        let inv = eig.eigenvalues.map(|l| 1.0 / l);
        let oracle = &eig.eigenvectors
            * nalgebra::DMatrix::from_diagonal(&inv)
            * eig.eigenvectors.transpose()
            * db;
        let x = solve_spd(&SpdSystem::new(a, b, 0.0).unwrap()).unwrap();
        for i in 0..8 {
            assert!((x[i] - oracle[i]).abs() <= 1e-8 * (1.0 + oracle[i].abs()));
        }
    }

    #[test]
    fn spd_residual_bound_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for &n in &[3usize, 17, 64, 200, 512] {
            let a = random_gram(&mut rng, n, n / 4 + 2);
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let shift = 1e-3;
            let x = solve_spd(&SpdSystem::new(a.clone(), b.clone(), shift).unwrap()).unwrap();
            let ax = a.matvec(&x);
            let res: Vec<f64> = (0..n).map(|i| ax[i] + shift * x[i] - b[i]).collect();
            assert!(norm(&res) <= 1e-8 * norm(&b), "n = {n}: residual {}", norm(&res));
        }
    }

    #[test]
    fn pinv_solve_handles_rank_deficiency() {
        // rank-1: [[1,1],[1,1]] x = [2,2] has min-norm solution [1,1]
        let a = Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        let x = solve_psd_pinv(&a, &[2.0, 2.0], 1e-12);
        assert!(close(x[0], 1.0, 1e-12) && close(x[1], 1.0, 1e-12));
    }

    #[test]
    fn gemm_transposed_views() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]);
        let b = Matrix::from_rows(&[vec![1.0, 0.0, -1.0], vec![2.0, 1.0, 0.0]]);
        assert_eq!(a.matmul_t(&b), a.matmul(&b.transpose()));
        assert_eq!(a.t_matmul(&b), a.transpose().matmul(&b));
    }

    #[test]
    fn layer_norm_zero_mean_unit_variance() {
        let x = Matrix::from_rows(&[vec![1.0, 2.0, 3.0, 6.0]]);
        let y = layer_norm_rows(&x, &[1.0; 4], &[0.0; 4], 0.0);
        let mean: f64 = y.row(0).iter().sum::<f64>() / 4.0;
        let var: f64 = y.row(0).iter().map(|v| v * v).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-15 && (var - 1.0).abs() < 1e-14);
    }
}
