//! Estimators over sampled configurations.
//!
//! Error bars follow the chain-wise rule
//! `ΔX = (1/N_c) sqrt(Σ_c (X̄_c - X̄)²)` on the per-chain means.

use std::f64::consts::PI;

use log::warn;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{Configuration, Domain};
use crate::numerics::{max_asymmetry, symmetric_eigen, Matrix};
use crate::sampler::{chain_rng, Amplitude, SampleBatch};

/// A mean with its chain-wise standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EstimateWithError {
    pub mean: f64,
    pub stderr: f64,
    pub n_chains: usize,
}

impl EstimateWithError {
    /// With a single chain the spread of chain means is undefined.
    pub fn stderr_defined(&self) -> bool {
        self.n_chains >= 2
    }
}

/// Pooled mean of `values` and the spread of per-chain means; `chain[i]` is
/// the chain of `values[i]`.
pub fn chain_estimate(values: &[f64], chain: &[usize]) -> Result<EstimateWithError> {
    if values.is_empty() {
        return Err(Error::EmptyInput("chain_estimate"));
    }
    if values.len() != chain.len() {
        return Err(Error::Shape("values and chain ids differ in length".into()));
    }
    let n_chains = chain.iter().max().map_or(0, |m| m + 1);
    let mut sums = vec![0.0; n_chains];
    let mut counts = vec![0usize; n_chains];
    for (&v, &c) in values.iter().zip(chain) {
        sums[c] += v;
        counts[c] += 1;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let used: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .filter(|(_, &n)| n > 0)
        .map(|(s, &n)| s / n as f64)
        .collect();
    let nc = used.len();
    let ss: f64 = used.iter().map(|m| (m - mean) * (m - mean)).sum();
    if nc < 2 {
        warn!("a single chain gives no error estimate");
    }
    Ok(EstimateWithError {
        mean,
        stderr: ss.sqrt() / nc as f64,
        n_chains: nc,
    })
}

/// Energy estimate from local energies of a batch.
pub fn energy_estimate(batch: &SampleBatch, local_energies: &[f64]) -> Result<EstimateWithError> {
    chain_estimate(local_energies, &batch.chain_ids())
}

/// Mean particle number with error.
pub fn number_estimate(batch: &SampleBatch) -> Result<EstimateWithError> {
    let ns: Vec<f64> = batch.particle_numbers().iter().map(|&n| n as f64).collect();
    chain_estimate(&ns, &batch.chain_ids())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RescaledVariance {
    pub value: f64,
    /// `⟨E⟩` is within three standard errors of zero.
    pub unreliable: bool,
}

/// `N Var(E_loc) / ⟨E⟩²` with `N` the mean particle number.
pub fn rescaled_variance(local_energies: &[f64], mean_n: f64, energy: &EstimateWithError) -> Result<RescaledVariance> {
    if local_energies.is_empty() {
        return Err(Error::EmptyInput("rescaled_variance"));
    }
    let m = local_energies.len() as f64;
    let mean = local_energies.iter().sum::<f64>() / m;
    let var = local_energies.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / m;
    let unreliable = mean.abs() <= 3.0 * energy.stderr || mean == 0.0;
    if unreliable {
        warn!("rescaled variance is unreliable: ⟨E⟩ = {mean} is within 3σ of zero");
    }
    Ok(RescaledVariance {
        value: if mean == 0.0 { f64::NAN } else { mean_n * var / (mean * mean) },
        unreliable,
    })
}

/// Empirical `P_n` for `n = 0..=n_max`.
pub fn number_distribution(ns: &[usize], n_max: usize) -> Vec<f64> {
    let mut p = vec![0.0; n_max + 1];
    if ns.is_empty() {
        return p;
    }
    for &n in ns {
        p[n.min(n_max)] += 1.0;
    }
    let total = ns.len() as f64;
    p.iter_mut().for_each(|v| *v /= total);
    p
}

/// Binned density with per-bin errors.
#[derive(Clone, Debug, Serialize)]
pub struct DensityProfile {
    /// Bin centres, one vector per binned axis (the radius for radial
    /// profiles).
    pub centers: Vec<Vec<f64>>,
    /// Volume (or annulus area) of each bin.
    pub bin_volume: Vec<f64>,
    pub value: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl DensityProfile {
    /// `Σ value × volume`, the mean particle number.
    pub fn integral(&self) -> f64 {
        self.value.iter().zip(&self.bin_volume).map(|(v, w)| v * w).sum()
    }
}

fn binned(
    batch: &SampleBatch,
    n_bins: usize,
    bin_of: impl Fn(&[f64]) -> Option<usize>,
    volume: &[f64],
) -> Result<DensityProfile> {
    if batch.is_empty() {
        return Err(Error::EmptyInput("density_profile"));
    }
    let ns = batch.len() as f64;
    let nc = batch.chains;
    let mut total = vec![0.0; n_bins];
    let mut per_chain = vec![vec![0.0; n_bins]; nc];
    let mut chain_count = vec![0usize; nc];
    for s in &batch.samples {
        chain_count[s.chain] += 1;
        for i in 0..s.config.n() {
            if let Some(b) = bin_of(s.config.particle(i)) {
                total[b] += 1.0;
                per_chain[s.chain][b] += 1.0;
            }
        }
    }
    let value: Vec<f64> = total.iter().zip(volume).map(|(t, v)| t / (v * ns)).collect();
    let live: Vec<usize> = (0..nc).filter(|&c| chain_count[c] > 0).collect();
    let stderr = (0..n_bins)
        .map(|b| {
            let ss: f64 = live
                .iter()
                .map(|&c| {
                    let m = per_chain[c][b] / (volume[b] * chain_count[c] as f64);
                    (m - value[b]) * (m - value[b])
                })
                .sum();
            ss.sqrt() / live.len() as f64
        })
        .collect();
    Ok(DensityProfile {
        centers: Vec::new(),
        bin_volume: volume.to_vec(),
        value,
        stderr,
    })
}

/// Histogram of the particle density on a regular grid over the domain, with
/// `bins` cells per axis (row-major, axis 0 outermost).
pub fn density_profile(batch: &SampleBatch, domain: &Domain, bins: usize) -> Result<DensityProfile> {
    let d = domain.dim;
    let h = domain.extent / bins as f64;
    let lo = domain.lower();
    let n_bins = bins.pow(d as u32);
    let volume = vec![h.powi(d as i32); n_bins];
    let mut p = binned(
        batch,
        n_bins,
        |r| {
            let mut idx = 0;
            for &x in r {
                let x = domain.wrap(x);
                let k = ((x - lo) / h).floor();
                if k < 0.0 || k >= bins as f64 {
                    return None;
                }
                idx = idx * bins + k as usize;
            }
            Some(idx)
        },
        &volume,
    )?;
    p.centers = (0..d)
        .map(|_| (0..bins).map(|k| lo + (k as f64 + 0.5) * h).collect())
        .collect();
    Ok(p)
}

/// Angular average of a 2D density about the origin: annuli of width
/// `r_max / bins`.
pub fn radial_density(batch: &SampleBatch, r_max: f64, bins: usize) -> Result<DensityProfile> {
    let h = r_max / bins as f64;
    let volume: Vec<f64> = (0..bins)
        .map(|k| PI * h * h * ((k + 1) * (k + 1) - k * k) as f64)
        .collect();
    let mut p = binned(
        batch,
        bins,
        |r| {
            let rr = r.iter().map(|x| x * x).sum::<f64>().sqrt();
            let k = (rr / h).floor();
            (k < bins as f64).then_some(k as usize)
        },
        &volume,
    )?;
    p.centers = vec![(0..bins).map(|k| (k as f64 + 0.5) * h).collect()];
    Ok(p)
}

/// `χ²/dof` of a profile against an oracle, skipping bins without an error
/// estimate.
pub fn chi2_per_dof(value: &[f64], stderr: &[f64], oracle: &[f64]) -> f64 {
    let mut chi2 = 0.0;
    let mut dof = 0usize;
    for ((v, s), o) in value.iter().zip(stderr).zip(oracle) {
        if *s > 0.0 {
            chi2 += (v - o) * (v - o) / (s * s);
            dof += 1;
        }
    }
    if dof == 0 {
        f64::NAN
    } else {
        chi2 / dof as f64
    }
}

/// `ρ(s)` at the given displacements with errors.
#[derive(Clone, Debug, Serialize)]
pub struct ObdmCurve {
    pub s: Vec<f64>,
    pub value: Vec<f64>,
    pub stderr: Vec<f64>,
}

/// Translation-invariant one-body density matrix on a ring:
/// `ρ(s) = ⟨(n/L^d) φ(r_1 + s, r_2, …) / φ(r_1, …)⟩` along axis 0, at
/// `points` uniform displacements in `[0, L)`.
pub fn obdm_translation_invariant<A: Amplitude>(batch: &SampleBatch, amp: &A, points: usize) -> Result<ObdmCurve> {
    let domain = *amp.domain();
    if !domain.is_periodic() {
        return Err(Error::NotPeriodic);
    }
    if batch.is_empty() {
        return Err(Error::EmptyInput("obdm_translation_invariant"));
    }
    let l = domain.extent;
    let vol = domain.volume();
    let s: Vec<f64> = (0..points).map(|j| j as f64 * l / points as f64).collect();
    let chains = batch.chain_ids();
    let mut value = Vec::with_capacity(points);
    let mut stderr = Vec::with_capacity(points);
    for &sj in &s {
        let contrib: Vec<f64> = batch
            .samples
            .iter()
            .map(|smp| {
                let n = smp.config.n();
                if n == 0 {
                    return 0.0;
                }
                if sj == 0.0 {
                    return n as f64 / vol;
                }
                let mut c = smp.config.clone();
                let d = c.dim();
                c.coords_mut()[0] = domain.wrap(c.coords()[0] + sj);
                let _ = d;
                let ratio = (amp.log_amp(&c).ln() - smp.log_amp).exp();
                n as f64 / vol * ratio
            })
            .collect();
        let e = chain_estimate(&contrib, &chains)?;
        value.push(e.mean);
        stderr.push(e.stderr);
    }
    Ok(ObdmCurve { s, value, stderr })
}

/// Normalized 2D harmonic-oscillator orbitals `|n_x, n_y⟩` with
/// `ψ_0(r)² = (β²/π) e^{-β² r²}`, plus the Gaussian reference density
/// `(γ²/π) e^{-γ² r²}` the displaced positions are drawn from.
#[derive(Clone, Debug, Serialize)]
pub struct HoBasis {
    pub beta: f64,
    /// `γ`; equal to `β` unless set. The estimator has finite variance only
    /// when the reference is at least as wide as the sampled density.
    pub gamma: f64,
    pub quanta: Vec<(usize, usize)>,
}

impl HoBasis {
    /// All orbitals with `n_x + n_y ≤ shells`.
    pub fn shells(beta: f64, shells: usize) -> Self {
        let mut quanta = Vec::new();
        for s in 0..=shells {
            for nx in (0..=s).rev() {
                quanta.push((nx, s - nx));
            }
        }
        Self { beta, gamma: beta, quanta }
    }

    pub fn with_reference(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn len(&self) -> usize {
        self.quanta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quanta.is_empty()
    }

    fn max_quantum(&self) -> usize {
        self.quanta.iter().map(|&(a, b)| a.max(b)).max().unwrap_or(0)
    }

    /// 1D normalized oscillator functions `ψ_0..=ψ_m` at `x`.
    fn one_d(&self, x: f64, m: usize) -> Vec<f64> {
        let b = self.beta;
        let mut out = Vec::with_capacity(m + 1);
        out.push((b / PI.sqrt()).sqrt() * (-0.5 * b * b * x * x).exp());
        if m >= 1 {
            out.push(2f64.sqrt() * b * x * out[0]);
        }
        for n in 1..m {
            let nf = n as f64;
            let next = (2.0 / (nf + 1.0)).sqrt() * b * x * out[n] - (nf / (nf + 1.0)).sqrt() * out[n - 1];
            out.push(next);
        }
        out
    }

    /// Every orbital at `r`.
    pub fn eval(&self, r: &[f64]) -> Vec<f64> {
        let m = self.max_quantum();
        let fx = self.one_d(r[0], m);
        let fy = self.one_d(r[1], m);
        self.quanta.iter().map(|&(a, b)| fx[a] * fy[b]).collect()
    }

    /// Reference density `(γ²/π) e^{-γ² r²}`.
    pub fn reference_density(&self, r: &[f64]) -> f64 {
        let b2 = self.gamma * self.gamma;
        b2 / PI * (-b2 * (r[0] * r[0] + r[1] * r[1])).exp()
    }

    /// A draw from the reference density.
    pub fn sample_reference<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; 2] {
        // Box-Muller; each axis has variance 1/(2γ²)
        let sd = 1.0 / (self.gamma * 2f64.sqrt());
        let u1: f64 = 1.0 - rng.gen::<f64>();
        let u2: f64 = rng.gen();
        let rad = (-2.0 * u1.ln()).sqrt() * sd;
        [rad * (2.0 * PI * u2).cos(), rad * (2.0 * PI * u2).sin()]
    }
}

/// One-body density matrix projected on a finite orbital basis.
#[derive(Clone, Debug, Serialize)]
pub struct ProjectedObdm {
    pub basis: HoBasis,
    pub matrix: Matrix,
    pub stderr: Matrix,
    pub trace: f64,
    pub trace_stderr: f64,
    pub mean_n: f64,
    /// `|trace - ⟨N⟩|` exceeds both 5% of `⟨N⟩` and three standard errors.
    pub trace_deficit: bool,
    /// Per-chain accumulated matrices, sample counts and particle counts.
    #[serde(skip)]
    chains: Vec<(Matrix, usize, f64)>,
}

impl ProjectedObdm {
    /// [`condensate_fraction`] with a leave-one-chain-out jackknife error.
    pub fn condensate_fraction(&self, tolerance: f64) -> Result<EstimateWithError> {
        let mean = condensate_fraction(&self.matrix, self.mean_n, tolerance)?;
        let k = self.chains.len();
        if k < 2 {
            return Ok(EstimateWithError {
                mean,
                stderr: 0.0,
                n_chains: k,
            });
        }
        let m = self.matrix.rows();
        let mut total = Matrix::zeros(m, m);
        let (mut samples, mut particles) = (0usize, 0.0);
        for (acc, c, n) in &self.chains {
            total.add_assign(acc);
            samples += c;
            particles += n;
        }
        let mut loo = Vec::with_capacity(k);
        for (acc, c, n) in &self.chains {
            let rest = (samples - c) as f64;
            let n_rest = (particles - n) / rest;
            if n_rest <= 0.0 {
                continue;
            }
            let mut r = total.clone();
            r.add_assign(&acc.scaled(-1.0));
            loo.push(condensate_fraction(&symmetrized(&r.scaled(1.0 / rest)), n_rest, tolerance)?);
        }
        let kk = loo.len() as f64;
        let avg = loo.iter().sum::<f64>() / kk;
        let var = (kk - 1.0) / kk * loo.iter().map(|v| (v - avg).powi(2)).sum::<f64>();
        Ok(EstimateWithError {
            mean,
            stderr: var.sqrt(),
            n_chains: k,
        })
    }
}

fn symmetrized(x: &Matrix) -> Matrix {
    let m = x.rows();
    let mut out = Matrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            out.set(i, j, 0.5 * (x.get(i, j) + x.get(j, i)));
        }
    }
    out
}

/// `ρ_ij = ⟨ Σ_k φ_i(r_k) φ_j(r') φ_n(…, r', …) / (ρ(r') φ_n(…, r_k, …)) ⟩`
/// with a fresh `r' ~ ρ` replacing each particle in turn, symmetrized.
pub fn projected_obdm<A: Amplitude>(batch: &SampleBatch, amp: &A, basis: &HoBasis, seed: u64) -> Result<ProjectedObdm> {
    if amp.domain().dim != 2 {
        return Err(Error::Unsupported("projected OBDM is implemented for d = 2".into()));
    }
    if batch.is_empty() {
        return Err(Error::EmptyInput("projected_obdm"));
    }
    let m = basis.len();
    let nc = batch.chains;
    let mut per_chain = vec![Matrix::zeros(m, m); nc];
    let mut counts = vec![0usize; nc];
    let mut chain_n = vec![0.0; nc];
    let mut mean_n = 0.0;
    for (k, s) in batch.samples.iter().enumerate() {
        counts[s.chain] += 1;
        let n = s.config.n();
        mean_n += n as f64;
        chain_n[s.chain] += n as f64;
        if n == 0 {
            continue;
        }
        let mut rng = chain_rng(seed, k as u64, 0);
        let acc = &mut per_chain[s.chain];
        // every particle in turn, each with its own displaced position
        for p in 0..n {
            let rp = basis.sample_reference(&mut rng);
            let mut moved: Configuration = s.config.clone();
            moved.coords_mut()[2 * p..2 * p + 2].copy_from_slice(&rp);
            let ratio = (amp.log_amp(&moved).ln() - s.log_amp).exp();
            if ratio == 0.0 {
                continue;
            }
            let w = ratio / basis.reference_density(&rp);
            let a = basis.eval(s.config.particle(p));
            let b = basis.eval(&rp);
            for i in 0..m {
                for j in 0..m {
                    let v = acc.get(i, j) + w * a[i] * b[j];
                    acc.set(i, j, v);
                }
            }
        }
    }
    mean_n /= batch.len() as f64;
    let total = batch.len() as f64;
    let mut sum = Matrix::zeros(m, m);
    for c in &per_chain {
        sum.add_assign(c);
    }
    let sym = symmetrized;
    let matrix = sym(&sum.scaled(1.0 / total));
    let live: Vec<usize> = (0..nc).filter(|&c| counts[c] > 0).collect();
    let mut stderr = Matrix::zeros(m, m);
    for &c in &live {
        let mc = sym(&per_chain[c].scaled(1.0 / counts[c] as f64));
        for i in 0..m {
            for j in 0..m {
                let dlt = mc.get(i, j) - matrix.get(i, j);
                stderr.set(i, j, stderr.get(i, j) + dlt * dlt);
            }
        }
    }
    let stderr = stderr.map(|v| v.sqrt() / live.len() as f64);
    let trace = matrix.trace();
    let chain_traces: Vec<f64> = live.iter().map(|&c| per_chain[c].trace() / counts[c] as f64).collect();
    let trace_stderr = chain_estimate(&chain_traces, &(0..live.len()).collect::<Vec<_>>())?.stderr;
    let dev = (trace - mean_n).abs();
    let trace_deficit = dev > 0.05 * mean_n.max(1e-300) && dev > 3.0 * trace_stderr;
    if trace_deficit {
        warn!("projected OBDM trace {trace:.4} differs from ⟨N⟩ = {mean_n:.4} by more than 5%; enlarge the basis");
    }
    Ok(ProjectedObdm {
        basis: basis.clone(),
        matrix,
        stderr,
        trace,
        trace_stderr,
        mean_n,
        trace_deficit,
        chains: live.iter().map(|&c| (per_chain[c].clone(), counts[c], chain_n[c])).collect(),
    })
}

/// `λ_max(ρ) / ⟨N⟩`.
pub fn condensate_fraction(obdm: &Matrix, mean_n: f64, tolerance: f64) -> Result<f64> {
    let asym = max_asymmetry(obdm);
    if asym > tolerance {
        return Err(Error::NotSymmetric(asym));
    }
    if !(mean_n > 0.0) {
        return Err(Error::EmptyInput("condensate_fraction"));
    }
    let (vals, _) = symmetric_eigen(obdm);
    Ok(vals.last().copied().unwrap_or(0.0) / mean_n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_chain_error_follows_chain_rule() {
        let est = chain_estimate(&[1.0, 1.0, 3.0, 3.0], &[0, 0, 1, 1]).unwrap();
        assert_eq!(est.mean, 2.0);
        // (1/2) sqrt(1 + 1)
        assert!((est.stderr - 0.5 * 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn constant_values_have_zero_error() {
        let est = chain_estimate(&[4.5; 6], &[0, 0, 1, 1, 2, 2]).unwrap();
        assert_eq!(est.mean, 4.5);
        assert_eq!(est.stderr, 0.0);
    }

    #[test]
    fn condensate_fraction_limits() {
        let mut rho = Matrix::zeros(4, 4);
        rho.set(0, 0, 3.0);
        assert!((condensate_fraction(&rho, 3.0, 1e-12).unwrap() - 1.0).abs() < 1e-12);
        let rho = Matrix::identity(4).scaled(3.0 / 4.0);
        assert!((condensate_fraction(&rho, 3.0, 1e-12).unwrap() - 0.25).abs() < 1e-12);
        let mut bad = Matrix::identity(2);
        bad.set(0, 1, 0.5);
        assert!(condensate_fraction(&bad, 1.0, 1e-9).is_err());
    }

    #[test]
    fn oscillator_basis_is_orthonormal() {
        let b = HoBasis::shells(1.3, 3);
        assert_eq!(b.len(), 10);
        let h = 0.02;
        let mut gram = Matrix::zeros(b.len(), b.len());
        let lim = 7.0;
        let steps = (2.0 * lim / h) as usize;
        for ix in 0..steps {
            for iy in 0..steps {
                let r = [-lim + (ix as f64 + 0.5) * h, -lim + (iy as f64 + 0.5) * h];
                let v = b.eval(&r);
                for i in 0..v.len() {
                    for j in 0..v.len() {
                        gram.set(i, j, gram.get(i, j) + v[i] * v[j] * h * h);
                    }
                }
            }
        }
        assert!(gram.max_abs_diff(&Matrix::identity(b.len())) < 1e-6);
        let r = [0.4, -0.2];
        let p0 = b.eval(&r)[0];
        assert!((p0 * p0 - b.reference_density(&r)).abs() < 1e-14);
    }

    #[test]
    fn number_distribution_sums_to_one() {
        let p = number_distribution(&[0, 1, 1, 2, 5], 5);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(p[1], 0.4);
    }
}
