use crate::numerics::{gemm_into, MatRef, Matrix};

use super::{broadcast_col, broadcast_row, hcat_values, slice_cols, Tensor, Unary};

/// Second-order Taylor jets along a set of input directions.
///
/// For each direction `t` the tensor carries `∂ₜX` and `∂ₜ²X`. Directions are
/// stored back to back, each as a row-major block with the value's shape, so
/// products with a constant right operand become one stacked GEMM.
#[derive(Clone, Debug)]
pub struct Taylor {
    val: Matrix,
    jets: Option<Jets>,
}

#[derive(Clone, Debug)]
struct Jets {
    dirs: usize,
    d1: Vec<f64>,
    d2: Vec<f64>,
}

impl Taylor {
    pub fn constant(val: Matrix) -> Self {
        Self { val, jets: None }
    }

    /// Seeds `coords` (row-major, `cols` per row) as the independent variables:
    /// one direction per entry.
    pub fn seed_coordinates(coords: &[f64], cols: usize) -> Self {
        let len = coords.len();
        let val = Matrix::from_vec(len / cols, cols, coords.to_vec());
        let mut d1 = vec![0.0; len * len];
        for t in 0..len {
            d1[t * len + t] = 1.0;
        }
        Self {
            val,
            jets: Some(Jets {
                dirs: len,
                d1,
                d2: vec![0.0; len * len],
            }),
        }
    }

    /// Builds a tensor from explicit first and second directional derivatives,
    /// stored direction-major.
    pub fn seeded(val: Matrix, dirs: usize, d1: Vec<f64>, d2: Vec<f64>) -> Self {
        let bs = val.rows() * val.cols();
        assert_eq!(d1.len(), dirs * bs);
        assert_eq!(d2.len(), dirs * bs);
        Self {
            val,
            jets: Some(Jets { dirs, d1, d2 }),
        }
    }

    pub fn dirs(&self) -> usize {
        self.jets.as_ref().map_or(0, |j| j.dirs)
    }

    fn block(&self) -> usize {
        self.val.rows() * self.val.cols()
    }

    pub fn first(&self, dir: usize) -> Option<&[f64]> {
        let bs = self.block();
        self.jets.as_ref().map(|j| &j.d1[dir * bs..(dir + 1) * bs])
    }

    pub fn second(&self, dir: usize) -> Option<&[f64]> {
        let bs = self.block();
        self.jets.as_ref().map(|j| &j.d2[dir * bs..(dir + 1) * bs])
    }

    /// Gradient of a `1×1` tensor with respect to the seeded directions.
    pub fn gradient(&self) -> Vec<f64> {
        assert_eq!(self.val.shape(), (1, 1), "gradient needs a scalar");
        match &self.jets {
            Some(j) => j.d1.clone(),
            None => Vec::new(),
        }
    }

    /// Sum of second directional derivatives of a `1×1` tensor.
    pub fn laplacian(&self) -> f64 {
        assert_eq!(self.val.shape(), (1, 1), "laplacian needs a scalar");
        self.jets.as_ref().map_or(0.0, |j| j.d2.iter().sum())
    }

    fn common_dirs(a: &Option<Jets>, b: &Option<Jets>) -> usize {
        match (a, b) {
            (Some(x), Some(y)) => {
                assert_eq!(x.dirs, y.dirs, "direction count mismatch");
                x.dirs
            }
            (Some(x), None) | (None, Some(x)) => x.dirs,
            (None, None) => 0,
        }
    }

    /// Elementwise product `x ⊙ y[idx(i, j)]` where `y` may be broadcast.
    fn product(
        x: &Taylor,
        y: &Taylor,
        val: Matrix,
        idx: impl Fn(usize, usize) -> usize,
    ) -> Taylor {
        if x.jets.is_none() && y.jets.is_none() {
            return Taylor::constant(val);
        }
        let dirs = Self::common_dirs(&x.jets, &y.jets);
        let (r, c) = x.val.shape();
        let bs = r * c;
        let ybs = y.block();
        let mut d1 = vec![0.0; dirs * bs];
        let mut d2 = vec![0.0; dirs * bs];
        let xv = x.val.data();
        let yv = y.val.data();
        for t in 0..dirs {
            let o1 = &mut d1[t * bs..(t + 1) * bs];
            let o2 = &mut d2[t * bs..(t + 1) * bs];
            if let Some(jx) = &x.jets {
                let x1 = &jx.d1[t * bs..(t + 1) * bs];
                let x2 = &jx.d2[t * bs..(t + 1) * bs];
                for i in 0..r {
                    for j in 0..c {
                        let e = i * c + j;
                        let yy = yv[idx(i, j)];
                        o1[e] += x1[e] * yy;
                        o2[e] += x2[e] * yy;
                    }
                }
            }
            if let Some(jy) = &y.jets {
                let y1 = &jy.d1[t * ybs..(t + 1) * ybs];
                let y2 = &jy.d2[t * ybs..(t + 1) * ybs];
                for i in 0..r {
                    for j in 0..c {
                        let e = i * c + j;
                        let k = idx(i, j);
                        o1[e] += xv[e] * y1[k];
                        o2[e] += xv[e] * y2[k];
                    }
                }
                if let Some(jx) = &x.jets {
                    let x1 = &jx.d1[t * bs..(t + 1) * bs];
                    for i in 0..r {
                        for j in 0..c {
                            let e = i * c + j;
                            o2[e] += 2.0 * x1[e] * y1[idx(i, j)];
                        }
                    }
                }
            }
        }
        Taylor::seeded(val, dirs, d1, d2)
    }

    /// `x + y[idx(i, j)]` where `y` may be broadcast.
    fn broadcast_sum(
        x: &Taylor,
        y: &Taylor,
        val: Matrix,
        idx: impl Fn(usize, usize) -> usize,
    ) -> Taylor {
        if x.jets.is_none() && y.jets.is_none() {
            return Taylor::constant(val);
        }
        let dirs = Self::common_dirs(&x.jets, &y.jets);
        let (r, c) = x.val.shape();
        let bs = r * c;
        let (mut d1, mut d2) = match &x.jets {
            Some(j) => (j.d1.clone(), j.d2.clone()),
            None => (vec![0.0; dirs * bs], vec![0.0; dirs * bs]),
        };
        if let Some(jy) = &y.jets {
            let ybs = y.block();
            for t in 0..dirs {
                for i in 0..r {
                    for j in 0..c {
                        let k = t * ybs + idx(i, j);
                        d1[t * bs + i * c + j] += jy.d1[k];
                        d2[t * bs + i * c + j] += jy.d2[k];
                    }
                }
            }
        }
        Taylor::seeded(val, dirs, d1, d2)
    }

    fn map_jets(&self, val: Matrix, f: impl Fn(&[f64], usize) -> Vec<f64>) -> Taylor {
        match &self.jets {
            None => Taylor::constant(val),
            Some(j) => {
                let d1 = f(&j.d1, j.dirs);
                let d2 = f(&j.d2, j.dirs);
                Taylor::seeded(val, j.dirs, d1, d2)
            }
        }
    }
}

impl Tensor for Taylor {
    fn value(&self) -> &Matrix {
        &self.val
    }

    fn constant(&self, m: Matrix) -> Self {
        Taylor::constant(m)
    }

    fn matmul(&self, rhs: &Self) -> Self {
        let val = self.val.matmul(&rhs.val);
        if self.jets.is_none() && rhs.jets.is_none() {
            return Taylor::constant(val);
        }
        let dirs = Self::common_dirs(&self.jets, &rhs.jets);
        let (r, k) = self.val.shape();
        let c = rhs.val.cols();
        let bs = r * c;
        let mut d1 = vec![0.0; dirs * bs];
        let mut d2 = vec![0.0; dirs * bs];
        if let Some(ja) = &self.jets {
            let b = MatRef::new(&rhs.val);
            gemm_into(1.0, MatRef::from_slice(&ja.d1, dirs * r, k), b, 0.0, &mut d1, dirs * r, c);
            gemm_into(1.0, MatRef::from_slice(&ja.d2, dirs * r, k), b, 0.0, &mut d2, dirs * r, c);
        }
        if let Some(jb) = &rhs.jets {
            let a = MatRef::new(&self.val);
            let kb = k * c;
            for t in 0..dirs {
                let o1 = &mut d1[t * bs..(t + 1) * bs];
                gemm_into(1.0, a, MatRef::from_slice(&jb.d1[t * kb..], k, c), 1.0, o1, r, c);
                let o2 = &mut d2[t * bs..(t + 1) * bs];
                gemm_into(1.0, a, MatRef::from_slice(&jb.d2[t * kb..], k, c), 1.0, o2, r, c);
                if let Some(ja) = &self.jets {
                    gemm_into(
                        2.0,
                        MatRef::from_slice(&ja.d1[t * r * k..], r, k),
                        MatRef::from_slice(&jb.d1[t * kb..], k, c),
                        1.0,
                        o2,
                        r,
                        c,
                    );
                }
            }
        }
        Taylor::seeded(val, dirs, d1, d2)
    }

    fn matmul_t(&self, rhs: &Self) -> Self {
        let val = self.val.matmul_t(&rhs.val);
        if self.jets.is_none() && rhs.jets.is_none() {
            return Taylor::constant(val);
        }
        let dirs = Self::common_dirs(&self.jets, &rhs.jets);
        let (r, k) = self.val.shape();
        let c = rhs.val.rows();
        let bs = r * c;
        let mut d1 = vec![0.0; dirs * bs];
        let mut d2 = vec![0.0; dirs * bs];
        if let Some(ja) = &self.jets {
            let bt = MatRef::new(&rhs.val).t();
            gemm_into(1.0, MatRef::from_slice(&ja.d1, dirs * r, k), bt, 0.0, &mut d1, dirs * r, c);
            gemm_into(1.0, MatRef::from_slice(&ja.d2, dirs * r, k), bt, 0.0, &mut d2, dirs * r, c);
        }
        if let Some(jb) = &rhs.jets {
            let a = MatRef::new(&self.val);
            let kb = c * k;
            for t in 0..dirs {
                let b1 = MatRef::from_slice(&jb.d1[t * kb..], c, k).t();
                let b2 = MatRef::from_slice(&jb.d2[t * kb..], c, k).t();
                let o1 = &mut d1[t * bs..(t + 1) * bs];
                gemm_into(1.0, a, b1, 1.0, o1, r, c);
                let o2 = &mut d2[t * bs..(t + 1) * bs];
                gemm_into(1.0, a, b2, 1.0, o2, r, c);
                if let Some(ja) = &self.jets {
                    gemm_into(2.0, MatRef::from_slice(&ja.d1[t * r * k..], r, k), b1, 1.0, o2, r, c);
                }
            }
        }
        Taylor::seeded(val, dirs, d1, d2)
    }

    fn add(&self, rhs: &Self) -> Self {
        assert_eq!(self.val.shape(), rhs.val.shape(), "add shape");
        let val = Tensor::add(&self.val, &rhs.val);
        let c = self.val.cols();
        Taylor::broadcast_sum(self, rhs, val, |i, j| i * c + j)
    }

    fn add_row(&self, row: &Self) -> Self {
        let mut val = self.val.clone();
        broadcast_row(&mut val, &row.val, |a, b| *a += b);
        Taylor::broadcast_sum(self, row, val, |_, j| j)
    }

    fn mul_row(&self, row: &Self) -> Self {
        let mut val = self.val.clone();
        broadcast_row(&mut val, &row.val, |a, b| *a *= b);
        Taylor::product(self, row, val, |_, j| j)
    }

    fn add_col(&self, col: &Self) -> Self {
        let mut val = self.val.clone();
        broadcast_col(&mut val, &col.val, |a, b| *a += b);
        Taylor::broadcast_sum(self, col, val, |i, _| i)
    }

    fn mul_col(&self, col: &Self) -> Self {
        let mut val = self.val.clone();
        broadcast_col(&mut val, &col.val, |a, b| *a *= b);
        Taylor::product(self, col, val, |i, _| i)
    }

    fn add_const(&self, m: &Matrix) -> Self {
        Taylor {
            val: Tensor::add(&self.val, m),
            jets: self.jets.clone(),
        }
    }

    fn add_scalar(&self, c: f64) -> Self {
        Taylor {
            val: self.val.map(|x| x + c),
            jets: self.jets.clone(),
        }
    }

    fn scale(&self, c: f64) -> Self {
        let val = self.val.scaled(c);
        self.map_jets(val, |d, _| d.iter().map(|x| c * x).collect())
    }

    fn map(&self, f: Unary) -> Self {
        let bs = self.block();
        let x = self.val.data();
        let mut out = Vec::with_capacity(bs);
        let mut fp = Vec::with_capacity(bs);
        let mut fpp = Vec::with_capacity(bs);
        for &xi in x {
            let (a, b, c) = f.derivs(xi);
            out.push(a);
            fp.push(b);
            fpp.push(c);
        }
        let val = Matrix::from_vec(self.val.rows(), self.val.cols(), out);
        match &self.jets {
            None => Taylor::constant(val),
            Some(j) => {
                let mut d1 = j.d1.clone();
                let mut d2 = j.d2.clone();
                for t in 0..j.dirs {
                    let o1 = &mut d1[t * bs..(t + 1) * bs];
                    let o2 = &mut d2[t * bs..(t + 1) * bs];
                    for e in 0..bs {
                        let x1 = o1[e];
                        o2[e] = fp[e] * o2[e] + fpp[e] * x1 * x1;
                        o1[e] = fp[e] * x1;
                    }
                }
                Taylor::seeded(val, j.dirs, d1, d2)
            }
        }
    }

    fn sum_rows(&self) -> Self {
        let val = Tensor::sum_rows(&self.val);
        let (r, c) = self.val.shape();
        self.map_jets(val, |d, dirs| {
            let mut out = vec![0.0; dirs * r];
            for (o, chunk) in out.iter_mut().zip(d.chunks_exact(c)) {
                *o = chunk.iter().sum();
            }
            out
        })
    }

    fn sum_cols(&self) -> Self {
        let val = Tensor::sum_cols(&self.val);
        let (r, c) = self.val.shape();
        self.map_jets(val, |d, dirs| {
            let mut out = vec![0.0; dirs * c];
            for t in 0..dirs {
                let o = &mut out[t * c..(t + 1) * c];
                for i in 0..r {
                    for (oj, v) in o.iter_mut().zip(&d[(t * r + i) * c..(t * r + i + 1) * c]) {
                        *oj += v;
                    }
                }
            }
            out
        })
    }

    fn cols(&self, start: usize, len: usize) -> Self {
        let (r, c) = self.val.shape();
        let val = slice_cols(self.val.data(), r, c, start, len);
        self.map_jets(val, |d, dirs| slice_cols(d, dirs * r, c, start, len).into_vec())
    }

    fn hcat(parts: &[Self]) -> Self {
        let val = hcat_values(parts.iter().map(|p| &p.val));
        let dirs = parts.iter().map(Taylor::dirs).max().unwrap_or(0);
        if dirs == 0 {
            return Taylor::constant(val);
        }
        let r = val.rows();
        let zeros: Vec<Matrix> = parts
            .iter()
            .map(|p| Matrix::zeros(dirs * r, p.val.cols()))
            .collect();
        let stack = |second: bool| -> Vec<f64> {
            let mats: Vec<Matrix> = parts
                .iter()
                .zip(&zeros)
                .map(|(p, z)| match &p.jets {
                    Some(j) => Matrix::from_vec(
                        dirs * r,
                        p.val.cols(),
                        if second { j.d2.clone() } else { j.d1.clone() },
                    ),
                    None => z.clone(),
                })
                .collect();
            hcat_values(mats.iter()).into_vec()
        };
        let d1 = stack(false);
        let d2 = stack(true);
        Taylor::seeded(val, dirs, d1, d2)
    }
}
