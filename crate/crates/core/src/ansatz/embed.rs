use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::autodiff::Taylor;
use crate::geometry::{Configuration, Domain};
use crate::numerics::Matrix;

use super::AnsatzHyper;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbeddingKind {
    /// Gaussians centred on a uniform grid spanning the domain.
    Gaussian,
    /// `sin`/`cos` of the first `m` harmonics of the cell.
    Fourier,
}

/// Maps one particle position to a `k`-vector, with exact axis derivatives.
#[derive(Clone, Debug)]
pub(crate) struct Embedding {
    kind: EmbeddingKind,
    dim: usize,
    m: usize,
    lower: f64,
    spacing: f64,
    sigma: f64,
    extent: f64,
    k: usize,
}

/// Per-axis 1D features and their first two derivatives.
struct AxisFeatures {
    v: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
}

impl Embedding {
    pub fn new(hyper: &AnsatzHyper, domain: &Domain) -> Self {
        let m = hyper.grid_points;
        let spacing = domain.extent / (m - 1) as f64;
        Self {
            kind: hyper.embedding,
            dim: domain.dim,
            m,
            lower: domain.lower(),
            spacing,
            sigma: hyper.sigma.unwrap_or(2.0 * spacing),
            extent: domain.extent,
            k: hyper.embed_dim,
        }
    }

    /// Grid point `j` on one axis.
    pub fn grid_point(&self, j: usize) -> f64 {
        self.lower + j as f64 * self.spacing
    }

    fn axis(&self, x: f64) -> AxisFeatures {
        let m = self.m;
        match self.kind {
            EmbeddingKind::Gaussian => {
                let inv = 1.0 / (self.sigma * self.sigma);
                let mut f = AxisFeatures {
                    v: Vec::with_capacity(m),
                    d1: Vec::with_capacity(m),
                    d2: Vec::with_capacity(m),
                };
                for j in 0..m {
                    let u = x - self.grid_point(j);
                    let g = (-0.5 * u * u * inv).exp();
                    f.v.push(g);
                    f.d1.push(-u * inv * g);
                    f.d2.push((u * u * inv - 1.0) * inv * g);
                }
                f
            }
            EmbeddingKind::Fourier => {
                // [sin(κ_j x), cos(κ_j x)] for j = 1..m
                let mut f = AxisFeatures {
                    v: Vec::with_capacity(2 * m),
                    d1: Vec::with_capacity(2 * m),
                    d2: Vec::with_capacity(2 * m),
                };
                for j in 1..=m {
                    let kappa = 2.0 * PI * j as f64 / self.extent;
                    let (s, c) = (kappa * x).sin_cos();
                    f.v.extend([s, c]);
                    f.d1.extend([kappa * c, -kappa * s]);
                    f.d2.extend([-kappa * kappa * s, -kappa * kappa * c]);
                }
                f
            }
        }
    }

    pub fn row(&self, r: &[f64], out: &mut [f64]) {
        let axes: Vec<AxisFeatures> = r.iter().map(|&x| self.axis(x)).collect();
        self.combine(&axes, None, out);
    }

    /// Writes the embedding into `out`; with `deriv = Some((axis, order))`
    /// writes that derivative instead.
    fn combine(&self, axes: &[AxisFeatures], deriv: Option<(usize, u8)>, out: &mut [f64]) {
        let pick = |a: usize, j: usize| -> f64 {
            let f = &axes[a];
            match deriv {
                Some((b, 1)) if b == a => f.d1[j],
                Some((b, 2)) if b == a => f.d2[j],
                _ => f.v[j],
            }
        };
        match self.kind {
            EmbeddingKind::Gaussian => {
                // row-major over the grid, axis 0 outermost
                let m = self.m;
                for (idx, o) in out.iter_mut().enumerate().take(self.k) {
                    let mut rest = idx;
                    let mut p = 1.0;
                    for a in (0..self.dim).rev() {
                        p *= pick(a, rest % m);
                        rest /= m;
                    }
                    *o = p;
                }
            }
            EmbeddingKind::Fourier => {
                // per harmonic: sin of every axis, then cos of every axis
                let d = self.dim;
                for j in 0..self.m {
                    for (t, trig) in [0usize, 1].into_iter().enumerate() {
                        for a in 0..d {
                            let v = match deriv {
                                Some((b, _)) if b != a => 0.0,
                                _ => pick(a, 2 * j + trig),
                            };
                            out[j * 2 * d + t * d + a] = v;
                        }
                    }
                }
            }
        }
    }

    /// Embedded rows seeded with jets along every particle coordinate.
    pub fn taylor(&self, config: &Configuration) -> Taylor {
        let n = config.n();
        let d = self.dim;
        let k = self.k;
        let dirs = n * d;
        let bs = n * k;
        let mut val = Matrix::zeros(n, k);
        let mut d1 = vec![0.0; dirs * bs];
        let mut d2 = vec![0.0; dirs * bs];
        for i in 0..n {
            let axes: Vec<AxisFeatures> = config.particle(i).iter().map(|&x| self.axis(x)).collect();
            self.combine(&axes, None, val.row_mut(i));
            for a in 0..d {
                let t = i * d + a;
                let at = t * bs + i * k;
                self.combine(&axes, Some((a, 1)), &mut d1[at..at + k]);
                self.combine(&axes, Some((a, 2)), &mut d2[at..at + k]);
            }
        }
        Taylor::seeded(val, dirs, d1, d2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::Activation;
    use crate::geometry::Boundary;

    fn hyper(kind: EmbeddingKind, m: usize, k: usize) -> AnsatzHyper {
        AnsatzHyper {
            embed_dim: k,
            blocks: 1,
            heads: 1,
            ffn_width: 4,
            n_max: 4,
            embedding: kind,
            grid_points: m,
            sigma: None,
            activation: Activation::LogCosh,
        }
    }

    #[test]
    fn gaussian_on_grid_point_is_one() {
        let dom = Domain::new(2, 4.0, Boundary::Closed).unwrap();
        let e = Embedding::new(&hyper(EmbeddingKind::Gaussian, 5, 25), &dom);
        let mut out = vec![0.0; 25];
        e.row(&[e.grid_point(1), e.grid_point(3)], &mut out);
        assert_eq!(out[5 + 3], 1.0);
    }

    #[test]
    fn fourier_at_origin_and_periodicity() {
        let dom = Domain::new(1, 3.0, Boundary::Periodic).unwrap();
        let e = Embedding::new(&hyper(EmbeddingKind::Fourier, 4, 8), &dom);
        let mut out = vec![0.0; 8];
        e.row(&[0.0], &mut out);
        for j in 0..4 {
            assert_eq!(out[2 * j], 0.0);
            assert_eq!(out[2 * j + 1], 1.0);
        }
        let mut a = vec![0.0; 8];
        let mut b = vec![0.0; 8];
        e.row(&[0.5], &mut a);
        e.row(&[dom.wrap(0.5 + 3.0)], &mut b);
        assert_eq!(a, b);
    }

    #[test]
    fn seeded_derivatives_match_finite_differences() {
        let h = 1e-5;
        let cases = [
            (Domain::new(2, 4.0, Boundary::TrapWindow).unwrap(), EmbeddingKind::Gaussian, 4, 16, vec![0.3, -1.1]),
            (Domain::new(2, 3.0, Boundary::Periodic).unwrap(), EmbeddingKind::Fourier, 3, 12, vec![0.3, 1.9]),
        ];
        for (dom, kind, m, k, r) in cases {
            let e = Embedding::new(&hyper(kind, m, k), &dom);
            let c = Configuration::new(2, r.clone()).unwrap();
            let t = e.taylor(&c);
            for a in 0..2 {
                let mut p = r.clone();
                let mut q = r.clone();
                p[a] += h;
                q[a] -= h;
                let (mut fp, mut fq, mut f0) = (vec![0.0; k], vec![0.0; k], vec![0.0; k]);
                e.row(&p, &mut fp);
                e.row(&q, &mut fq);
                e.row(&r, &mut f0);
                for j in 0..k {
                    let g = (fp[j] - fq[j]) / (2.0 * h);
                    let hh = (fp[j] - 2.0 * f0[j] + fq[j]) / (h * h);
                    assert!((t.first(a).unwrap()[j] - g).abs() < 1e-7, "{kind:?} d1 axis {a} entry {j}");
                    assert!((t.second(a).unwrap()[j] - hh).abs() < 1e-3, "{kind:?} d2 axis {a} entry {j}");
                }
            }
        }
    }
}
