//! Checks of the sampler against trial states with closed-form
//! particle-number laws.
//!
//! For an amplitude that depends on `n` only, `P_n ∝ L^{dn} |φ_n|²`.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::ansatz::LogAmp;
use crate::error::{Error, Result};
use crate::geometry::{Boundary, Configuration, Domain};

use super::{FnAmplitude, Sampler, SamplerSettings};

#[derive(Clone, Debug, Serialize)]
pub struct LawReport {
    pub name: String,
    pub samples: usize,
    pub counts: Vec<u64>,
    pub expected: Vec<f64>,
    pub chi2: f64,
    pub dof: usize,
    pub p_value: f64,
}

impl LawReport {
    pub fn passes(&self, alpha: f64) -> bool {
        self.p_value > alpha
    }
}

/// Pearson chi-square of `counts` against probabilities `probs`; adjacent
/// bins are merged until each expects at least 5 counts.
pub fn chi_square(counts: &[u64], probs: &[f64]) -> Result<(f64, usize, f64)> {
    if counts.len() != probs.len() || counts.is_empty() {
        return Err(Error::Shape("counts and probabilities differ in length".into()));
    }
    let total: u64 = counts.iter().sum();
    let norm: f64 = probs.iter().sum();
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    for (&c, &p) in counts.iter().zip(probs) {
        o += c as f64;
        e += p / norm * total as f64;
        if e >= 5.0 {
            bins.push((o, e));
            o = 0.0;
            e = 0.0;
        }
    }
    if e > 0.0 || o > 0.0 {
        match bins.last_mut() {
            Some(last) => {
                last.0 += o;
                last.1 += e;
            }
            None => bins.push((o, e)),
        }
    }
    if bins.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 10,
            got: total as usize,
        });
    }
    let chi2: f64 = bins.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    let dof = bins.len() - 1;
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::InvalidSettings(e.to_string()))?;
    Ok((chi2, dof, 1.0 - dist.cdf(chi2)))
}

/// Runs the sampler on an `n`-only amplitude and compares the `n` histogram
/// with `P_n ∝ L^{dn} exp(2 ln φ_n)`.
pub fn check_number_law(
    name: &str,
    domain: Domain,
    n_max: usize,
    log_phi: impl Fn(usize) -> f64 + Sync,
    settings: SamplerSettings,
    seed: u64,
) -> Result<LawReport> {
    let amp = FnAmplitude {
        domain,
        n_max,
        initial_n: 0,
        f: |c: &Configuration| LogAmp::Finite(log_phi(c.n())),
    };
    let mut sampler = Sampler::new(settings, seed, &amp)?;
    let batch = sampler.run(&amp, 0);
    let mut counts = vec![0u64; n_max + 1];
    for n in batch.particle_numbers() {
        counts[n] += 1;
    }
    let lv = domain.dim as f64 * domain.extent.ln();
    let logw: Vec<f64> = (0..=n_max).map(|n| n as f64 * lv + 2.0 * log_phi(n)).collect();
    let m = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let expected: Vec<f64> = logw.iter().map(|w| (w - m).exp()).collect();
    let z: f64 = expected.iter().sum();
    let expected: Vec<f64> = expected.iter().map(|e| e / z).collect();
    let (chi2, dof, p_value) = chi_square(&counts, &expected)?;
    Ok(LawReport {
        name: name.to_string(),
        samples: batch.len(),
        counts,
        expected,
        chi2,
        dof,
        p_value,
    })
}

/// Settings used by the law checks: `chains × samples` retained samples,
/// thinned enough that successive samples are nearly independent.
pub fn law_settings(chains: usize, samples_per_chain: usize, sweep: usize) -> SamplerSettings {
    SamplerSettings {
        p_pm: 0.25,
        width: None,
        chains,
        sweep,
        samples_per_chain,
        burn_in: 0,
        warmup: 20,
        displacement: Default::default(),
    }
}

/// `φ_n = α^n` in a box of side `L`: `P_n ∝ (α² L^d)^n`.
pub fn geometric_law(alpha: f64, extent: f64, dim: usize, n_max: usize, settings: SamplerSettings, seed: u64) -> Result<LawReport> {
    let domain = Domain::new(dim, extent, Boundary::Periodic)?;
    let la = alpha.ln();
    check_number_law("geometric", domain, n_max, move |n| n as f64 * la, settings, seed)
}

/// `φ_n = α^n / √n!`: `P_n` Poisson with mean `α² L^d`.
pub fn poisson_law(alpha: f64, extent: f64, dim: usize, n_max: usize, settings: SamplerSettings, seed: u64) -> Result<LawReport> {
    let domain = Domain::new(dim, extent, Boundary::Periodic)?;
    let la = alpha.ln();
    check_number_law(
        "poisson",
        domain,
        n_max,
        move |n| n as f64 * la - 0.5 * statrs::function::gamma::ln_gamma(n as f64 + 1.0),
        settings,
        seed,
    )
}

/// Three sectors `n ∈ {0, 1, 2}` with arbitrary amplitudes.
pub fn three_state_law(amps: [f64; 3], extent: f64, settings: SamplerSettings, seed: u64) -> Result<LawReport> {
    let domain = Domain::new(1, extent, Boundary::Periodic)?;
    check_number_law("three-state", domain, 2, move |n| amps[n].ln(), settings, seed)
}

/// The standard set run by `sample-check`.
pub fn standard_suite(seed: u64) -> Result<Vec<LawReport>> {
    Ok(vec![
        geometric_law(0.6, 1.0, 1, 60, law_settings(100, 1000, 40), seed)?,
        poisson_law(2.0, 1.0, 1, 40, law_settings(100, 1000, 40), seed)?,
        three_state_law([1.0, 0.7, 1.3], 1.5, law_settings(100, 1000, 10), seed)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chi_square_of_exact_counts_is_zero() {
        let (chi2, dof, p) = chi_square(&[50, 30, 20], &[0.5, 0.3, 0.2]).unwrap();
        assert!(chi2.abs() < 1e-12);
        assert_eq!(dof, 2);
        assert!((p - 1.0).abs() < 1e-12);
    }
}
