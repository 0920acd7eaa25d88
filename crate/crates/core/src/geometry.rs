//! Particle configurations and the simulation domain.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the edges of the simulation cell behave.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    /// Hard walls at `0` and `L` on every axis.
    Closed,
    /// Coordinates live on `[0, L)` and wrap.
    Periodic,
    /// Harmonic confinement sampled inside `[-L/2, L/2]` on every axis.
    TrapWindow,
}

/// A `d`-dimensional hypercube of side `extent`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub dim: usize,
    pub extent: f64,
    pub boundary: Boundary,
}

impl Domain {
    pub fn new(dim: usize, extent: f64, boundary: Boundary) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidModel(format!("dimension {dim} not in 1..=3")));
        }
        if !(extent > 0.0 && extent.is_finite()) {
            return Err(Error::InvalidModel(format!("extent must be positive, got {extent}")));
        }
        Ok(Self {
            dim,
            extent,
            boundary,
        })
    }

    /// Lower corner coordinate, shared by every axis.
    pub fn lower(&self) -> f64 {
        match self.boundary {
            Boundary::Closed | Boundary::Periodic => 0.0,
            Boundary::TrapWindow => -0.5 * self.extent,
        }
    }

    pub fn upper(&self) -> f64 {
        self.lower() + self.extent
    }

    /// `L^d`
    pub fn volume(&self) -> f64 {
        self.extent.powi(self.dim as i32)
    }

    pub fn is_periodic(&self) -> bool {
        self.boundary == Boundary::Periodic
    }

    /// Maps a coordinate into `[0, L)` for periodic domains; identity otherwise.
    pub fn wrap(&self, x: f64) -> f64 {
        if self.is_periodic() {
            let w = x.rem_euclid(self.extent);
            // rem_euclid can round up to exactly L
            if w >= self.extent {
                0.0
            } else {
                w
            }
        } else {
            x
        }
    }

    /// Whether a single coordinate lies strictly inside the sampling window.
    pub fn contains_coord(&self, x: f64) -> bool {
        match self.boundary {
            Boundary::Periodic => x.is_finite(),
            Boundary::Closed | Boundary::TrapWindow => x > self.lower() && x < self.upper(),
        }
    }

    pub fn contains(&self, config: &Configuration) -> bool {
        config.coords().iter().all(|&x| self.contains_coord(x))
    }

    /// A uniformly distributed position inside the domain.
    pub fn sample_position<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.dim)
            .map(|_| self.lower() + self.extent * rng.gen::<f64>())
            .collect()
    }

    /// `n` uniformly distributed particles.
    pub fn sample_configuration<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Configuration {
        let mut c = Configuration::empty(self.dim);
        for _ in 0..n {
            let p = self.sample_position(rng);
            c.push(&p);
        }
        c
    }
}

/// A set of `n` particle positions in `d` dimensions, stored particle-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    dim: usize,
    coords: Vec<f64>,
}

impl Configuration {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 || coords.len() % dim != 0 {
            return Err(Error::Shape(format!(
                "{} coordinates do not split into particles of dimension {dim}",
                coords.len()
            )));
        }
        Ok(Self { dim, coords })
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            coords: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn coords_mut(&mut self) -> &mut [f64] {
        &mut self.coords
    }

    pub fn particle(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn push(&mut self, r: &[f64]) {
        assert_eq!(r.len(), self.dim, "particle dimension");
        self.coords.extend_from_slice(r);
    }

    /// Removes particle `i`, moving the last particle into its slot.
    pub fn swap_remove(&mut self, i: usize) {
        let n = self.n();
        assert!(i < n, "particle index out of range");
        let d = self.dim;
        if i != n - 1 {
            let (head, tail) = self.coords.split_at_mut((n - 1) * d);
            head[i * d..(i + 1) * d].copy_from_slice(tail);
        }
        self.coords.truncate((n - 1) * d);
    }

    /// Reorders particles so that new particle `k` is old particle `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.n());
        let mut coords = Vec::with_capacity(self.coords.len());
        for &p in perm {
            coords.extend_from_slice(self.particle(p));
        }
        Self {
            dim: self.dim,
            coords,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn swap_remove_keeps_remaining_particles() {
        let mut c = Configuration::new(2, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        c.swap_remove(0);
        assert_eq!(c.coords(), &[4.0, 5.0, 2.0, 3.0]);
        c.swap_remove(1);
        assert_eq!(c.coords(), &[4.0, 5.0]);
    }

    #[test]
    fn wrap_stays_in_cell() {
        let d = Domain::new(1, 5.0, Boundary::Periodic).unwrap();
        assert_eq!(d.wrap(5.0), 0.0);
        assert!((d.wrap(-1.0) - 4.0).abs() < 1e-15);
        assert!(d.wrap(-1e-17) < 5.0);
    }
}
