//! Closed-form and cataloged ground states of the benchmark systems, in units
//! with `ħ = 2m = 1`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::ModelSpec;

/// `Σ_{k=1}^{N} k² π² / L²`: free fermions in a hard-wall box.
pub fn tg_box_energy(n: usize, extent: f64) -> f64 {
    let n = n as f64;
    // Σ k² = N(N+1)(2N+1)/6
    PI * PI / (extent * extent) * n * (n + 1.0) * (2.0 * n + 1.0) / 6.0
}

/// `(2/L) Σ_{k=1}^{N} sin²(kπx/L)`.
pub fn tg_box_density(n: usize, extent: f64, x: f64) -> f64 {
    if !(0.0..=extent).contains(&x) {
        return 0.0;
    }
    (1..=n)
        .map(|k| (k as f64 * PI * x / extent).sin().powi(2))
        .sum::<f64>()
        * 2.0
        / extent
}

/// `λ(λ-1) = m g` with `m = 1/2`.
pub fn cs1d_lambda(g: f64) -> f64 {
    0.5 * (1.0 + (1.0 + 2.0 * g).sqrt())
}

/// `π² λ² N (N² - 1) / (3 L²)` on a ring of circumference `L`.
pub fn cs1d_energy(n: usize, extent: f64, g: f64) -> f64 {
    let l = cs1d_lambda(g);
    let n = n as f64;
    PI * PI * l * l * n * (n * n - 1.0) / (3.0 * extent * extent)
}

/// `Λ = √(g/2)`.
pub fn cs2d_lambda(g: f64) -> f64 {
    (0.5 * g).sqrt()
}

/// `[2N + N(N-1)Λ] ω` for `g = G`.
pub fn cs2d_energy(n: usize, g: f64, omega: f64) -> f64 {
    let n = n as f64;
    (2.0 * n + n * (n - 1.0) * cs2d_lambda(g)) * omega
}

/// Radial density `(ω/πΛ) e^{-ωr²} Σ_{p<N} (ωr²)^p / p!`, exact at `Λ = 1`.
pub fn cs2d_density(r: f64, n: usize, omega: f64, lambda: f64) -> Result<f64> {
    if (lambda - 1.0).abs() > 1e-12 {
        return Err(Error::Unsupported(format!(
            "closed-form density is known only at Λ = 1, got {lambda}"
        )));
    }
    let x = omega * r * r;
    let mut term = 1.0;
    let mut sum = 0.0;
    for p in 0..n {
        if p > 0 {
            term *= x / p as f64;
        }
        sum += term;
    }
    Ok(omega / (PI * lambda) * (-x).exp() * sum)
}

/// `N d ω` for non-interacting bosons in `V = ω² r²`.
pub fn free_trap_energy(n: usize, dim: usize, omega: f64) -> f64 {
    (n * dim) as f64 * omega
}

/// Minimizers of `E(N) - μN` over `0..=n_max`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GrandMinimum {
    /// Every `N` attaining the minimum within `tie_tolerance`.
    pub argmin: Vec<usize>,
    pub energy: f64,
}

pub fn grand_minimizer(energy: impl Fn(usize) -> f64, mu: f64, n_max: usize) -> Result<GrandMinimum> {
    let values: Vec<f64> = (0..=n_max).map(|n| energy(n) - mu * n as f64).collect();
    let best = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let tol = 1e-9 * best.abs().max(1.0);
    let argmin: Vec<usize> = (0..=n_max).filter(|&n| values[n] - best <= tol).collect();
    if argmin.contains(&n_max) {
        return Err(Error::WindowTooSmall(n_max));
    }
    Ok(GrandMinimum { argmin, energy: best })
}

/// Oracle for the single-particle density.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DensityOracle {
    None,
    TgBox { n: usize, extent: f64 },
    Cs2dRadial { n: usize, omega: f64 },
}

impl DensityOracle {
    /// Density at `x` (a position in 1D, a radius in 2D).
    pub fn eval(&self, x: f64) -> Option<f64> {
        match *self {
            DensityOracle::None => None,
            DensityOracle::TgBox { n, extent } => Some(tg_box_density(n, extent, x)),
            DensityOracle::Cs2dRadial { n, omega } => cs2d_density(x, n, omega, 1.0).ok(),
        }
    }
}

/// A system with a known grand-canonical ground state.
#[derive(Clone, Debug, Serialize)]
pub struct ExactBenchmark {
    pub name: &'static str,
    pub model: ModelSpec,
    pub energy: f64,
    /// Ground-state particle numbers; two entries for an exact degeneracy.
    pub n0: Vec<usize>,
    pub density: DensityOracle,
    /// Table value when it differs from the closed form.
    pub published_energy: Option<f64>,
}

/// The 1D ring entries: `(g, E₀, N₀)`.
const CS1D_CATALOG: [(f64, f64, usize); 2] = [(5.0, -156.317, 5), (30.0, -5132.76, 10)];

/// `μ = N₀² π² λ² / L²` of a cataloged ring entry at `L = 5`.
fn cs1d_mu(g: f64, n0: usize) -> f64 {
    let l = cs1d_lambda(g);
    (n0 * n0) as f64 * PI * PI * l * l / 25.0
}

/// Cataloged ring benchmark for coupling `g`.
pub fn cs1d_exact(g: f64) -> Result<ExactBenchmark> {
    let &(g, published, n0) = CS1D_CATALOG
        .iter()
        .find(|(cg, _, _)| (cg - g).abs() < 1e-12)
        .ok_or_else(|| Error::Uncataloged(format!("cs-1d at g = {g}")))?;
    Ok(ExactBenchmark {
        name: if n0 == 5 { "cs1d-g5" } else { "cs1d-g30" },
        model: ModelSpec::cs1d(5.0, g, cs1d_mu(g, n0)),
        energy: cs1d_energy(n0, 5.0, g) - cs1d_mu(g, n0) * n0 as f64,
        n0: vec![n0],
        density: DensityOracle::None,
        published_energy: Some(published),
    })
}

/// All benchmarks with known ground states.
pub fn catalog() -> Vec<ExactBenchmark> {
    let tg_mu = (8.75 * PI).powi(2);
    let tg = grand_minimizer(|n| tg_box_energy(n, 1.0), tg_mu, 40).expect("TG minimum inside window");
    let cs2d = |g: f64, mu: f64| grand_minimizer(|n| cs2d_energy(n, g, 1.0), mu, 40).expect("cs-2d minimum inside window");
    let c2 = cs2d(2.0, 22.0);
    let c5 = cs2d(5.0, 25.0);
    let mut out = vec![
        ExactBenchmark {
            name: "tg-box",
            model: ModelSpec::lieb_liniger(1.0, 1e6, tg_mu),
            energy: tg.energy,
            density: DensityOracle::TgBox {
                n: tg.argmin[0],
                extent: 1.0,
            },
            n0: tg.argmin,
            published_energy: Some(-4031.79),
        },
        ExactBenchmark {
            name: "ll-g10",
            model: ModelSpec::lieb_liniger(1.0, 10.0, 115.0),
            energy: -371.81,
            n0: vec![6],
            density: DensityOracle::None,
            published_energy: Some(-371.81),
        },
    ];
    out.extend(CS1D_CATALOG.iter().map(|&(g, _, _)| cs1d_exact(g).expect("cataloged")));
    out.push(ExactBenchmark {
        name: "cs2d-g2",
        model: ModelSpec::cs2d(10.0, 2.0, 1.0, 22.0),
        energy: c2.energy,
        density: DensityOracle::Cs2dRadial { n: 10, omega: 1.0 },
        n0: c2.argmin,
        published_energy: Some(-110.0),
    });
    out.push(ExactBenchmark {
        name: "cs2d-g5",
        model: ModelSpec::cs2d(10.0, 5.0, 1.0, 25.0),
        energy: c5.energy,
        density: DensityOracle::None,
        n0: c5.argmin,
        published_energy: Some(-95.46),
    });
    out.push(ExactBenchmark {
        name: "free-trap-empty",
        model: ModelSpec::gauss_trap(10.0, 0.0, 0.5, 1.0, 1.5),
        energy: 0.0,
        n0: vec![0],
        density: DensityOracle::None,
        published_energy: None,
    });
    out
}

/// Looks up a catalog entry by name.
pub fn benchmark(name: &str) -> Result<ExactBenchmark> {
    catalog()
        .into_iter()
        .find(|b| b.name == name)
        .ok_or_else(|| Error::Uncataloged(name.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tg_examples() {
        assert_eq!(tg_box_energy(0, 1.0), 0.0);
        assert!((tg_box_energy(1, 1.0) - PI * PI).abs() < 1e-12);
        let mu = (8.75 * PI).powi(2);
        let m = grand_minimizer(|n| tg_box_energy(n, 1.0), mu, 20).unwrap();
        assert_eq!(m.argmin, vec![8]);
        assert!((m.energy + 408.5 * PI * PI).abs() < 1e-9);
    }

    #[test]
    fn tg_density_integrates_to_n() {
        let h = 1e-4;
        let s: f64 = (0..10_000).map(|i| tg_box_density(8, 1.0, (i as f64 + 0.5) * h) * h).sum();
        assert!((s - 8.0).abs() < 1e-6);
    }

    #[test]
    fn cs2d_examples() {
        let m = grand_minimizer(|n| cs2d_energy(n, 2.0, 1.0), 22.0, 40).unwrap();
        assert_eq!(m.argmin, vec![10, 11]);
        assert!((m.energy + 110.0).abs() < 1e-12);
        let m = grand_minimizer(|n| cs2d_energy(n, 5.0, 1.0), 25.0, 40).unwrap();
        assert_eq!(m.argmin, vec![8]);
        assert!((m.energy + 95.46).abs() < 5e-3);
        assert_eq!(cs2d_energy(1, 7.0, 1.3), 2.0 * 1.3);
    }

    #[test]
    fn empty_trap_below_gap() {
        let m = grand_minimizer(|n| free_trap_energy(n, 2, 1.0), 1.5, 10).unwrap();
        assert_eq!(m.argmin, vec![0]);
        assert_eq!(m.energy, 0.0);
    }

    #[test]
    fn cs2d_density_sum_rule() {
        assert!((cs2d_density(0.0, 7, 1.3, 1.0).unwrap() - 1.3 / PI).abs() < 1e-15);
        let h = 1e-4;
        let s: f64 = (0..100_000)
            .map(|i| {
                let r = (i as f64 + 0.5) * h;
                cs2d_density(r, 10, 1.0, 1.0).unwrap() * 2.0 * PI * r * h
            })
            .sum();
        assert!((s - 10.0).abs() < 1e-6);
        assert!(cs2d_density(1.0, 3, 1.0, 2.0).is_err());
    }

    #[test]
    fn cs1d_catalog_matches_closed_form() {
        for &(g, e, n0) in &CS1D_CATALOG {
            let mu = cs1d_mu(g, n0);
            let m = grand_minimizer(|n| cs1d_energy(n, 5.0, g), mu, 40).unwrap();
            assert_eq!(m.argmin, vec![n0]);
            assert!((m.energy - e).abs() < 0.01, "{} vs {}", m.energy, e);
        }
        assert!(cs1d_exact(7.0).is_err());
    }

    #[test]
    fn window_edge_is_an_error() {
        assert!(matches!(
            grand_minimizer(|n| -(n as f64), 0.0, 5),
            Err(Error::WindowTooSmall(5))
        ));
    }
}
