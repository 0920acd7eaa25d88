//! Hamiltonians and local energies of the benchmark systems.
//!
//! `H = -(1/2m) Σ ∇² + Σ (V(r_i) - μ) + Σ_{i<j} W(r_i, r_j) [+ three-body]`.
//! The kinetic prefactor `1/(2m)` is part of the model; the default is `1`
//! (`2m = 1`).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::ansatz::Jastrow;
use crate::autodiff::LogAmpDerivatives;
use crate::error::{Error, Result};
use crate::geometry::{Boundary, Configuration, Domain};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    /// 1D contact interaction in a hard-wall box.
    LiebLiniger,
    /// 1D inverse-sine-square interaction on a ring.
    Cs1d,
    /// 2D harmonic trap with inverse-square two-body and three-body terms.
    Cs2d,
    /// Harmonic trap with a Gaussian pair interaction.
    GaussTrap,
}

fn default_prefactor() -> f64 {
    1.0
}

/// A Hamiltonian together with its sampling domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// Side length `L` of the cell or sampling window.
    pub extent: f64,
    /// Chemical potential `μ`.
    pub mu: f64,
    /// Two-body coupling.
    #[serde(default)]
    pub g: f64,
    /// Three-body coupling (`cs-2d`); equals `g` when absent.
    #[serde(default)]
    pub three_body: Option<f64>,
    /// Trap frequency; `V = ω² r²`.
    #[serde(default)]
    pub omega: Option<f64>,
    /// Interaction range `s` (`gauss-trap`).
    #[serde(default)]
    pub range: Option<f64>,
    /// Spatial dimension for `gauss-trap` (default 2); fixed for other kinds.
    #[serde(default)]
    pub dim: Option<usize>,
    /// Kinetic prefactor `1/(2m)`.
    #[serde(default = "default_prefactor")]
    pub kinetic_prefactor: f64,
}

impl ModelSpec {
    fn base(kind: ModelKind, extent: f64, mu: f64, g: f64) -> Self {
        Self {
            kind,
            extent,
            mu,
            g,
            three_body: None,
            omega: None,
            range: None,
            dim: None,
            kinetic_prefactor: 1.0,
        }
    }

    pub fn lieb_liniger(extent: f64, g: f64, mu: f64) -> Self {
        Self::base(ModelKind::LiebLiniger, extent, mu, g)
    }

    pub fn cs1d(extent: f64, g: f64, mu: f64) -> Self {
        Self::base(ModelKind::Cs1d, extent, mu, g)
    }

    pub fn cs2d(extent: f64, g: f64, omega: f64, mu: f64) -> Self {
        Self {
            omega: Some(omega),
            ..Self::base(ModelKind::Cs2d, extent, mu, g)
        }
    }

    pub fn gauss_trap(extent: f64, g: f64, range: f64, omega: f64, mu: f64) -> Self {
        Self {
            omega: Some(omega),
            range: Some(range),
            ..Self::base(ModelKind::GaussTrap, extent, mu, g)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidModel(m));
        if !(self.extent > 0.0) {
            return bad(format!("extent must be positive, got {}", self.extent));
        }
        if !(self.g >= 0.0) {
            return bad(format!("g must be non-negative, got {}", self.g));
        }
        if !(self.kinetic_prefactor > 0.0) {
            return bad("kinetic_prefactor must be positive".into());
        }
        if !self.mu.is_finite() {
            return bad("mu must be finite".into());
        }
        match self.kind {
            ModelKind::Cs2d | ModelKind::GaussTrap => {
                if !(self.omega.unwrap_or(0.0) > 0.0) {
                    return bad(format!("{:?} needs omega > 0", self.kind));
                }
            }
            _ => {}
        }
        if self.kind == ModelKind::GaussTrap && !(self.range.unwrap_or(0.0) > 0.0) {
            return bad("gauss-trap needs range > 0".into());
        }
        if self.kind == ModelKind::Cs2d {
            if let Some(gg) = self.three_body {
                if gg < 0.0 {
                    return bad("three_body must be non-negative".into());
                }
            }
        }
        if let Some(d) = self.dim {
            let fixed = match self.kind {
                ModelKind::LiebLiniger | ModelKind::Cs1d => Some(1),
                ModelKind::Cs2d => Some(2),
                ModelKind::GaussTrap => None,
            };
            if fixed.is_some_and(|f| f != d) || !(1..=3).contains(&d) {
                return bad(format!("dimension {d} is not valid for {:?}", self.kind));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            ModelKind::LiebLiniger | ModelKind::Cs1d => 1,
            ModelKind::Cs2d => 2,
            ModelKind::GaussTrap => self.dim.unwrap_or(2),
        }
    }

    pub fn boundary(&self) -> Boundary {
        match self.kind {
            ModelKind::LiebLiniger => Boundary::Closed,
            ModelKind::Cs1d => Boundary::Periodic,
            ModelKind::Cs2d | ModelKind::GaussTrap => Boundary::TrapWindow,
        }
    }

    pub fn domain(&self) -> Domain {
        Domain {
            dim: self.dim(),
            extent: self.extent,
            boundary: self.boundary(),
        }
    }

    pub fn mass(&self) -> f64 {
        0.5 / self.kinetic_prefactor
    }

    pub fn omega(&self) -> f64 {
        self.omega.unwrap_or(0.0)
    }

    pub fn is_trapped(&self) -> bool {
        matches!(self.kind, ModelKind::Cs2d | ModelKind::GaussTrap)
    }

    /// Three-body coupling `G`.
    pub fn big_g(&self) -> f64 {
        self.three_body.unwrap_or(self.g)
    }

    /// Exponent of the inverse-sine-square pair factor, `λ(λ-1) = m g`.
    pub fn cs1d_lambda(&self) -> f64 {
        0.5 * (1.0 + (1.0 + 4.0 * self.mass() * self.g).sqrt())
    }

    /// Exponent of the inverse-square pair factor, `λ² = m g`.
    pub fn cs2d_lambda(&self) -> f64 {
        (self.mass() * self.g).sqrt()
    }

    /// The Jastrow factor matched to this model's short-distance behaviour.
    pub fn natural_jastrow(&self) -> Jastrow {
        match self.kind {
            ModelKind::LiebLiniger => Jastrow::LiebLiniger {
                g: self.g,
                mass: self.mass(),
            },
            ModelKind::Cs1d => Jastrow::Cs1d {
                lambda: self.cs1d_lambda(),
            },
            ModelKind::Cs2d => Jastrow::Cs2d {
                lambda: self.cs2d_lambda(),
            },
            ModelKind::GaussTrap => Jastrow::None,
        }
    }

    /// Minus the typical log of one pair factor of [`Self::natural_jastrow`]:
    /// the average over uniform pair separations in the box or on the ring,
    /// and over the oscillator ground state in a trap.
    pub fn natural_pair_offset(&self) -> f64 {
        match self.natural_jastrow() {
            Jastrow::LiebLiniger { g, mass } => {
                // separation density 2(1 - t) on t = r / L
                let a = 1.0 / (mass * g * self.extent);
                let m = 4000;
                let h = 1.0 / m as f64;
                -(0..m)
                    .map(|k| {
                        let t = (k as f64 + 0.5) * h;
                        2.0 * (1.0 - t) * (t + a).ln() * h
                    })
                    .sum::<f64>()
            }
            // E[ln u + ln(1 - u)] = -2 for the triangular separation law
            Jastrow::Cs1d { lambda } => 2.0 * lambda,
            Jastrow::Sutherland { lambda } => lambda * std::f64::consts::LN_2,
            Jastrow::Cs2d { lambda } => {
                // relative coordinate of two oscillator ground states
                const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
                -lambda * 0.5 * ((2.0 / self.omega()).ln() - EULER_GAMMA)
            }
            Jastrow::None => 0.0,
        }
    }

    /// One-body potential `V(r)`.
    pub fn external_potential(&self, r: &[f64]) -> f64 {
        match self.kind {
            ModelKind::LiebLiniger | ModelKind::Cs1d => 0.0,
            ModelKind::Cs2d | ModelKind::GaussTrap => {
                let w = self.omega();
                w * w * r.iter().map(|x| x * x).sum::<f64>()
            }
        }
    }

    /// Two-body potential `W(r, r')`; the contact term of the Lieb-Liniger
    /// model has no support away from coincidence and evaluates to 0.
    pub fn pair_potential(&self, r: &[f64], rp: &[f64]) -> Result<f64> {
        let r2: f64 = r.iter().zip(rp).map(|(a, b)| (a - b) * (a - b)).sum();
        match self.kind {
            ModelKind::LiebLiniger => Ok(0.0),
            ModelKind::Cs1d => {
                let k = PI / self.extent;
                let s = (k * (r[0] - rp[0])).sin();
                if s == 0.0 {
                    return Err(Error::Coincident { i: 0, j: 1 });
                }
                Ok(self.g * k * k / (s * s))
            }
            ModelKind::Cs2d => {
                if r2 == 0.0 {
                    return Err(Error::Coincident { i: 0, j: 1 });
                }
                Ok(self.g / r2)
            }
            ModelKind::GaussTrap => {
                let s = self.range.unwrap_or(1.0);
                Ok(self.g / (PI * s * s) * (-r2 / (s * s)).exp())
            }
        }
    }

    /// `Σ_{i<j} Σ_{k≠i,j} W⁽³⁾(r_i, r_j; r_k)` (cs-2d only).
    pub fn three_body_potential(&self, config: &Configuration) -> Result<f64> {
        if self.kind != ModelKind::Cs2d {
            return Ok(0.0);
        }
        let n = config.n();
        let gg = self.big_g();
        if gg == 0.0 || n < 3 {
            return Ok(0.0);
        }
        let mut total = 0.0;
        for k in 0..n {
            let rk = config.particle(k);
            for i in 0..n {
                if i == k {
                    continue;
                }
                let ri = config.particle(i);
                let (ax, ay) = (rk[0] - ri[0], rk[1] - ri[1]);
                let a2 = ax * ax + ay * ay;
                if a2 == 0.0 {
                    return Err(Error::Coincident { i, j: k });
                }
                for j in i + 1..n {
                    if j == k {
                        continue;
                    }
                    let rj = config.particle(j);
                    let (bx, by) = (rk[0] - rj[0], rk[1] - rj[1]);
                    let b2 = bx * bx + by * by;
                    if b2 == 0.0 {
                        return Err(Error::Coincident { i: j, j: k });
                    }
                    total += (ax * bx + ay * by) / (a2 * b2);
                }
            }
        }
        Ok(gg * total)
    }

    /// `Σ_i (V(r_i) - μ) + Σ_{i<j} W(r_i, r_j) [+ three-body]`.
    pub fn potential_energy(&self, config: &Configuration) -> Result<f64> {
        let n = config.n();
        let mut e = 0.0;
        for i in 0..n {
            e += self.external_potential(config.particle(i)) - self.mu;
        }
        if self.kind != ModelKind::LiebLiniger {
            for i in 0..n {
                for j in i + 1..n {
                    e += self
                        .pair_potential(config.particle(i), config.particle(j))
                        .map_err(|_| Error::Coincident { i, j })?;
                }
            }
        }
        Ok(e + self.three_body_potential(config)?)
    }

    /// `-(1/2m)(∇² ln φ + |∇ ln φ|²)`
    pub fn kinetic_energy(&self, derivs: &LogAmpDerivatives) -> f64 {
        -self.kinetic_prefactor * (derivs.coord_laplacian + derivs.grad_norm_sq())
    }

    /// `E_loc(R) = ⟨R|H|φ⟩ / ⟨R|φ⟩`.
    pub fn local_energy(&self, derivs: &LogAmpDerivatives, config: &Configuration) -> Result<f64> {
        if derivs.coord_grad.len() != config.coords().len() {
            return Err(Error::Shape(format!(
                "gradient has {} entries for {} coordinates",
                derivs.coord_grad.len(),
                config.coords().len()
            )));
        }
        Ok(self.kinetic_energy(derivs) + self.potential_energy(config)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_potential_examples() {
        let gt = ModelSpec::gauss_trap(8.0, 1.0, 0.5, 1.0, 0.0);
        let v = gt.pair_potential(&[0.3, 0.1], &[0.3, 0.1]).unwrap();
        assert!((v - 4.0 / PI).abs() < 1e-12);

        let cs = ModelSpec::cs1d(5.0, 5.0, 0.0);
        let v = cs.pair_potential(&[0.5], &[3.0]).unwrap();
        assert!((v - PI * PI / 5.0).abs() < 1e-12);

        let c2 = ModelSpec::cs2d(10.0, 2.0, 1.0, 0.0);
        assert!((c2.pair_potential(&[0.0, 0.0], &[2.0, 0.0]).unwrap() - 0.5).abs() < 1e-15);
        assert!(c2.pair_potential(&[1.0, 1.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn lambdas_follow_unit_convention() {
        let cs = ModelSpec::cs1d(5.0, 5.0, 0.0);
        assert!((cs.cs1d_lambda() - 0.5 * (1.0 + 11f64.sqrt())).abs() < 1e-15);
        let c2 = ModelSpec::cs2d(10.0, 2.0, 1.0, 0.0);
        assert!((c2.cs2d_lambda() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn empty_configuration_has_zero_energy() {
        let c2 = ModelSpec::cs2d(10.0, 2.0, 1.0, 22.0);
        let d = LogAmpDerivatives {
            value: 0.3,
            coord_grad: vec![],
            coord_laplacian: 0.0,
            param_grad: None,
        };
        assert_eq!(c2.local_energy(&d, &Configuration::empty(2)).unwrap(), 0.0);
    }
}
