//! Analytic factors multiplying the network amplitude.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::geometry::{Configuration, Domain};
use crate::numerics::{sigmoid, softplus};

/// Factor forcing the amplitude to vanish on closed walls.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Cutoff {
    #[default]
    None,
    Box1d,
    Box2d,
}

/// Pair factor `Π_{i<j} u(r_i, r_j)` fixing the short-distance behaviour.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Jastrow {
    #[default]
    None,
    /// `|x|/L + 1/(m g L)`
    LiebLiniger { g: f64, mass: f64 },
    /// `(u (1 - u))^λ`, `u = |x|/L`
    Cs1d { lambda: f64 },
    /// `|sin(π x / L)|^λ`, the exact ring ground-state pair factor.
    Sutherland { lambda: f64 },
    /// `|r|^λ`
    Cs2d { lambda: f64 },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtraFactors {
    #[serde(default)]
    pub cutoff: Cutoff,
    #[serde(default)]
    pub jastrow: Jastrow,
    /// Trainable particle-number window `q_n`.
    #[serde(default)]
    pub window: bool,
    /// Trainable Gaussian envelope `exp(-ω |r - center|² / 2)` with the given
    /// initial `ω`.
    #[serde(default)]
    pub envelope: Option<f64>,
    /// Constant added to the log of every pair factor, so that the Jastrow
    /// does not scale sectors by a factor growing like `e^{c n²}`.
    #[serde(default)]
    pub pair_offset: f64,
    /// Divides each sector by the norm of the envelope and 2D Jastrow
    /// product at the initial envelope width, so the analytic factors alone
    /// give every particle number a comparable weight.
    #[serde(default)]
    pub normalize_sectors: bool,
}

/// Value and coordinate derivatives of the log of the coordinate-dependent
/// factors.
#[derive(Clone, Debug, Default)]
pub(crate) struct FactorTerms {
    pub value: f64,
    pub grad: Vec<f64>,
    pub laplacian: f64,
}

impl ExtraFactors {
    pub fn validate(&self, domain: &Domain) -> Result<()> {
        use crate::geometry::Boundary;
        match (self.cutoff, domain.boundary, domain.dim) {
            (Cutoff::None, _, _) => {}
            (Cutoff::Box1d, Boundary::Closed, 1) | (Cutoff::Box2d, Boundary::Closed, 2) => {}
            (c, b, d) => {
                return Err(Error::InvalidHyper(format!(
                    "cutoff {c:?} needs a closed domain of matching dimension (got {b:?}, d={d})"
                )))
            }
        }
        match self.jastrow {
            Jastrow::None => {}
            Jastrow::LiebLiniger { g, mass } => {
                if !(g > 0.0 && mass > 0.0) || domain.dim != 1 {
                    return Err(Error::InvalidHyper(
                        "lieb-liniger jastrow needs g > 0, mass > 0 and d = 1".into(),
                    ));
                }
            }
            Jastrow::Cs1d { lambda } | Jastrow::Sutherland { lambda } => {
                if lambda < 0.0 || domain.dim != 1 {
                    return Err(Error::InvalidHyper("1D jastrow needs λ ≥ 0 and d = 1".into()));
                }
            }
            Jastrow::Cs2d { lambda } => {
                if lambda < 0.0 {
                    return Err(Error::InvalidHyper("cs-2d jastrow needs λ ≥ 0".into()));
                }
            }
        }
        if let Some(w) = self.envelope {
            if !(w > 0.0) {
                return Err(Error::InvalidHyper(format!("envelope width must be positive, got {w}")));
            }
        } else if self.normalize_sectors {
            return Err(Error::InvalidHyper("sector normalization needs an envelope".into()));
        }
        Ok(())
    }

    /// `-½ ln(Z_n / n!)` with `Z_n = ∫ Π_i e^{-ω r_i²} Π_{i<j} |r_ij|^{2λ}`;
    /// exact for `λ ∈ {0, 1}`; elsewhere the 2D plasma product formula is only
/// an approximation that keeps the sector weights from growing factorially.
    pub fn sector_log_norm(&self, n: usize, dim: usize) -> f64 {
        let Some(omega) = self.envelope.filter(|_| self.normalize_sectors) else {
            return 0.0;
        };
        let nf = n as f64;
        let mut log_z = nf * 0.5 * dim as f64 * (std::f64::consts::PI / omega).ln();
        if let (Jastrow::Cs2d { lambda }, 2) = (self.jastrow, dim) {
            log_z -= lambda * 0.5 * nf * (nf - 1.0) * omega.ln();
            log_z += (1..=n).map(|j| ln_gamma(1.0 + j as f64 * lambda) - ln_gamma(1.0 + lambda)).sum::<f64>();
        }
        -0.5 * (log_z - ln_gamma(nf + 1.0))
    }

    /// Log of cutoff and Jastrow factors with exact coordinate derivatives.
    ///
    /// Errors with [`Error::ZeroAmplitude`] on a wall and
    /// [`Error::Coincident`] where the Jastrow factor vanishes.
    pub(crate) fn coordinate_terms(
        &self,
        domain: &Domain,
        config: &Configuration,
    ) -> Result<FactorTerms> {
        let d = config.dim();
        let n = config.n();
        let x = config.coords();
        let mut t = FactorTerms {
            value: 0.0,
            grad: vec![0.0; n * d],
            laplacian: 0.0,
        };
        let l = domain.extent;
        if self.cutoff != Cutoff::None {
            t.value += match self.cutoff {
                Cutoff::Box1d => -0.5 * n as f64 * (l / 30.0).ln(),
                _ => -(n as f64) * (l / 100.0).ln(),
            };
            for (k, &xi) in x.iter().enumerate() {
                let u = xi / l;
                if u <= 0.0 || u >= 1.0 {
                    return Err(Error::ZeroAmplitude);
                }
                t.value += u.ln() + (1.0 - u).ln();
                t.grad[k] += 1.0 / xi - 1.0 / (l - xi);
                t.laplacian += -1.0 / (xi * xi) - 1.0 / ((l - xi) * (l - xi));
            }
        }
        match self.jastrow {
            Jastrow::None => {}
            Jastrow::Cs2d { lambda } => {
                for i in 0..n {
                    for j in i + 1..n {
                        let mut r2 = 0.0;
                        for a in 0..d {
                            let dx = x[i * d + a] - x[j * d + a];
                            r2 += dx * dx;
                        }
                        if r2 == 0.0 {
                            return Err(Error::Coincident { i, j });
                        }
                        t.value += 0.5 * lambda * r2.ln();
                        for a in 0..d {
                            let dx = x[i * d + a] - x[j * d + a];
                            let g = lambda * dx / r2;
                            t.grad[i * d + a] += g;
                            t.grad[j * d + a] -= g;
                            // both particles see the same second derivative
                            t.laplacian += 2.0 * lambda * (r2 - 2.0 * dx * dx) / (r2 * r2);
                        }
                    }
                }
            }
            jastrow => {
                for i in 0..n {
                    for j in i + 1..n {
                        let dx = x[i] - x[j];
                        let (v, g, h) = pair_1d(jastrow, dx, l).ok_or(Error::Coincident { i, j })?;
                        t.value += v;
                        t.grad[i] += g;
                        t.grad[j] -= g;
                        t.laplacian += 2.0 * h;
                    }
                }
            }
        }
        if self.jastrow != Jastrow::None && n > 1 {
            t.value += self.pair_offset * (n * (n - 1) / 2) as f64;
        }
        Ok(t)
    }
}

/// `(ln u, ∂ ln u / ∂x_i, ∂² ln u / ∂x_i²)` for a 1D pair at separation
/// `dx = x_i - x_j`; `None` where the factor vanishes.
fn pair_1d(jastrow: Jastrow, dx: f64, l: f64) -> Option<(f64, f64, f64)> {
    let r = dx.abs();
    let sign = if dx >= 0.0 { 1.0 } else { -1.0 };
    match jastrow {
        Jastrow::LiebLiniger { g, mass } => {
            let f = r / l + 1.0 / (mass * g * l);
            Some((f.ln(), sign / (l * f), -1.0 / (l * l * f * f)))
        }
        Jastrow::Cs1d { lambda } => {
            let u = r / l;
            if u <= 0.0 || u >= 1.0 {
                return None;
            }
            let v = lambda * (u.ln() + (1.0 - u).ln());
            let g = sign * lambda / l * (1.0 / u - 1.0 / (1.0 - u));
            let h = -lambda / (l * l) * (1.0 / (u * u) + 1.0 / ((1.0 - u) * (1.0 - u)));
            Some((v, g, h))
        }
        Jastrow::Sutherland { lambda } => {
            let k = std::f64::consts::PI / l;
            let s = (k * dx).sin();
            if s == 0.0 {
                return None;
            }
            let c = (k * dx).cos();
            Some((lambda * s.abs().ln(), lambda * k * c / s, -lambda * k * k / (s * s)))
        }
        Jastrow::None | Jastrow::Cs2d { .. } => Some((0.0, 0.0, 0.0)),
    }
}

/// Window parameters in their natural form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Window {
    pub c1: f64,
    pub c2: f64,
    pub s: f64,
}

impl Window {
    /// Decodes `(c1, ln(c2 - c1), ln s)`.
    pub fn from_raw(raw: &[f64]) -> Self {
        let c1 = raw[0];
        Window {
            c1,
            c2: c1 + raw[1].exp(),
            s: raw[2].exp(),
        }
    }

    pub fn to_raw(&self) -> [f64; 3] {
        [self.c1, (self.c2 - self.c1).ln(), self.s.ln()]
    }

    /// `ln q_n`
    pub fn log_q(&self, n: usize) -> f64 {
        let n = n as f64;
        -softplus(-self.s * (n - self.c1)) - softplus(self.s * (n - self.c2))
    }

    /// Gradient of `ln q_n` with respect to the raw parameters.
    pub fn log_q_grad(&self, n: usize) -> [f64; 3] {
        let n = n as f64;
        let (c1, c2, s) = (self.c1, self.c2, self.s);
        let a = sigmoid(-s * (n - c1));
        let b = sigmoid(s * (n - c2));
        let d_c1 = -s * a;
        let d_c2 = s * b;
        let d_s = a * (n - c1) - b * (n - c2);
        [d_c1 + d_c2, d_c2 * (c2 - c1), d_s * s]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Boundary;

    fn fd_check(f: &ExtraFactors, domain: &Domain, coords: Vec<f64>) {
        let c = Configuration::new(domain.dim, coords.clone()).unwrap();
        let t = f.coordinate_terms(domain, &c).unwrap();
        let h = 1e-5;
        let mut lap = 0.0;
        for k in 0..coords.len() {
            let mut p = coords.clone();
            let mut m = coords.clone();
            p[k] += h;
            m[k] -= h;
            let vp = f.coordinate_terms(domain, &Configuration::new(domain.dim, p).unwrap()).unwrap().value;
            let vm = f.coordinate_terms(domain, &Configuration::new(domain.dim, m).unwrap()).unwrap().value;
            let g = (vp - vm) / (2.0 * h);
            assert!((t.grad[k] - g).abs() < 1e-6 * (1.0 + g.abs()), "grad {k}: {} vs {g}", t.grad[k]);
            lap += (vp - 2.0 * t.value + vm) / (h * h);
        }
        assert!((t.laplacian - lap).abs() < 1e-3 * (1.0 + lap.abs()), "{} vs {lap}", t.laplacian);
    }

    #[test]
    fn factor_derivatives_match_finite_differences() {
        let line = Domain::new(1, 5.0, Boundary::Closed).unwrap();
        let ring = Domain::new(1, 5.0, Boundary::Periodic).unwrap();
        let square = Domain::new(2, 3.0, Boundary::Closed).unwrap();
        let xs = vec![0.7, 2.1, 4.2, 3.3];
        let ll = ExtraFactors {
            cutoff: Cutoff::Box1d,
            jastrow: Jastrow::LiebLiniger { g: 10.0, mass: 0.5 },
            ..Default::default()
        };
        fd_check(&ll, &line, xs.clone());
        for jastrow in [Jastrow::Cs1d { lambda: 2.1 }, Jastrow::Sutherland { lambda: 2.1 }] {
            let f = ExtraFactors {
                jastrow,
                ..Default::default()
            };
            fd_check(&f, &ring, xs.clone());
        }
        let f2 = ExtraFactors {
            cutoff: Cutoff::Box2d,
            jastrow: Jastrow::Cs2d { lambda: 1.3 },
            ..Default::default()
        };
        fd_check(&f2, &square, vec![0.5, 1.2, 2.2, 0.9, 1.4, 2.5]);
    }

    #[test]
    fn cutoff_normalizations() {
        let line = Domain::new(1, 2.0, Boundary::Closed).unwrap();
        let f = ExtraFactors {
            cutoff: Cutoff::Box1d,
            ..Default::default()
        };
        let c = Configuration::new(1, vec![0.5, 1.0]).unwrap();
        let expected = (2.0f64 / 30.0).powf(-1.0) * (0.25 * 0.75) * (0.5 * 0.5);
        let got = f.coordinate_terms(&line, &c).unwrap().value;
        assert!((got - expected.ln()).abs() < 1e-14);

        let sq = Domain::new(2, 4.0, Boundary::Closed).unwrap();
        let f = ExtraFactors {
            cutoff: Cutoff::Box2d,
            ..Default::default()
        };
        let c = Configuration::new(2, vec![1.0, 2.0]).unwrap();
        let expected = (4.0f64 / 100.0).powi(-1) * (0.25 * 0.75) * (0.5 * 0.5);
        let got = f.coordinate_terms(&sq, &c).unwrap().value;
        assert!((got - expected.ln()).abs() < 1e-14);
    }

    #[test]
    fn particle_on_wall_is_zero_amplitude() {
        let line = Domain::new(1, 1.0, Boundary::Closed).unwrap();
        let f = ExtraFactors {
            cutoff: Cutoff::Box1d,
            ..Default::default()
        };
        let c = Configuration::new(1, vec![0.0, 0.5]).unwrap();
        assert!(matches!(f.coordinate_terms(&line, &c), Err(Error::ZeroAmplitude)));
    }

    #[test]
    fn lieb_liniger_cusp_is_mg() {
        let (g, mass, l) = (7.0, 0.5, 3.0);
        let j = Jastrow::LiebLiniger { g, mass };
        let (_, slope, _) = pair_1d(j, 0.0, l).unwrap();
        assert!((slope - mass * g).abs() < 1e-12);
    }

    #[test]
    fn window_limits_and_gradient() {
        let w = Window {
            c1: 2.0,
            c2: 4.0,
            s: 200.0,
        };
        assert!(w.log_q(3).abs() < 1e-12);
        assert!(w.log_q(6) < -300.0);

        let w = Window {
            c1: 1.5,
            c2: 6.0,
            s: 0.8,
        };
        let raw = w.to_raw();
        let h = 1e-6;
        for n in 0..9 {
            let g = w.log_q_grad(n);
            for k in 0..3 {
                let mut p = raw;
                let mut m = raw;
                p[k] += h;
                m[k] -= h;
                let fd = (Window::from_raw(&p).log_q(n) - Window::from_raw(&m).log_q(n)) / (2.0 * h);
                assert!((g[k] - fd).abs() < 1e-7, "n={n} k={k}");
            }
        }
    }

    fn trap_factors(lambda: f64, omega: f64) -> ExtraFactors {
        ExtraFactors {
            jastrow: if lambda > 0.0 { Jastrow::Cs2d { lambda } } else { Jastrow::None },
            envelope: Some(omega),
            normalize_sectors: true,
            window: false,
            ..Default::default()
        }
    }

    #[test]
    fn sector_norm_matches_gaussian_moments() {
        use std::f64::consts::PI;
        for omega in [0.5, 1.0, 2.3] {
            // free particles: Z_n = (π/ω)^{n d / 2}
            let f = trap_factors(0.0, omega);
            for (n, d) in [(1, 1), (3, 2), (4, 3)] {
                let z = (PI / omega).powf(0.5 * (n * d) as f64);
                let want = -0.5 * (z / (1..=n).product::<usize>() as f64).ln();
                assert!((f.sector_log_norm(n, d) - want).abs() < 1e-12);
            }
            // |r_12|² is exponential with mean 2/ω
            let f = trap_factors(1.0, omega);
            let z2 = (PI / omega).powi(2) * 2.0 / omega;
            assert!((f.sector_log_norm(2, 2) + 0.5 * (z2 / 2.0).ln()).abs() < 1e-12);
        }
        let mut off = trap_factors(1.0, 1.0);
        off.normalize_sectors = false;
        assert_eq!(off.sector_log_norm(5, 2), 0.0);
    }

    #[test]
    fn three_particle_sector_norm_by_sampling() {
        use rand::{Rng, SeedableRng};
        use std::f64::consts::PI;
        let omega: f64 = 1.7;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let sd = (0.5 / omega).sqrt();
        let mut gauss = || {
            let u: f64 = 1.0 - rng.gen::<f64>();
            let v: f64 = rng.gen();
            (-2.0 * u.ln()).sqrt() * (2.0 * PI * v).cos() * sd
        };
        let samples = 400_000;
        let mut sum = 0.0;
        for _ in 0..samples {
            let p: Vec<[f64; 2]> = (0..3).map(|_| [gauss(), gauss()]).collect();
            let d2 = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
            sum += d2(p[0], p[1]) * d2(p[0], p[2]) * d2(p[1], p[2]);
        }
        let z3 = (PI / omega).powi(3) * sum / samples as f64;
        let got = -2.0 * trap_factors(1.0, omega).sector_log_norm(3, 2) + 6f64.ln();
        assert!((got - z3.ln()).abs() < 0.03, "{got} vs {}", z3.ln());
    }
}
