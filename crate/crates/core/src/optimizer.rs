//! Energy minimization: gradient, stochastic reconfiguration in its
//! parameter-space and sample-space (minSR) forms, and an Adam fallback.

use std::f64::consts::PI;

use log::{debug, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::{Ansatz, AnsatzParams};
use crate::error::{Error, Result};
use crate::models::ModelSpec;
use crate::numerics::{cholesky, cholesky_solve, solve_psd_pinv, Matrix};
use crate::observables::{chain_estimate, rescaled_variance, EstimateWithError};
use crate::sampler::{Acceptance, AnsatzAmplitude, SampleBatch, Sampler, SamplerSettings};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[default]
    Minsr,
    Sr,
    /// First-order Adam on the energy gradient.
    #[serde(alias = "sgd-adam-like")]
    Adam,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Schedule {
    Constant,
    #[default]
    Cosine,
}

fn default_lr() -> f64 {
    1e-2
}
fn default_window_mult() -> f64 {
    10.0
}
fn default_final_fraction() -> f64 {
    0.01
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_adam_eps() -> f64 {
    1e-8
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSettings {
    #[serde(default)]
    pub method: Method,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    /// Diagonal shift of `T` (minSR) or `S` (SR); `relative_shift tr(T) / N_s`
    /// when absent.
    #[serde(default)]
    pub ntk_shift: Option<f64>,
    #[serde(default = "default_relative_shift")]
    pub relative_shift: f64,
    #[serde(default = "default_window_mult")]
    pub window_lr_multiplier: f64,
    #[serde(default)]
    pub iterations: usize,
    #[serde(default)]
    pub schedule: Schedule,
    /// Learning rate at the end of a cosine schedule, relative to the start.
    #[serde(default = "default_final_fraction")]
    pub final_lr_fraction: f64,
    /// Largest allowed `‖Δθ‖`; longer steps are rescaled.
    #[serde(default)]
    pub max_step: Option<f64>,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_adam_eps")]
    pub adam_eps: f64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            method: Method::Minsr,
            learning_rate: default_lr(),
            ntk_shift: None,
            relative_shift: default_relative_shift(),
            window_lr_multiplier: default_window_mult(),
            iterations: 0,
            schedule: Schedule::Cosine,
            final_lr_fraction: default_final_fraction(),
            max_step: None,
            beta1: default_beta1(),
            beta2: default_beta2(),
            adam_eps: default_adam_eps(),
        }
    }
}

impl OptimizerSettings {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSettings(m));
        if !(self.learning_rate > 0.0) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if let Some(s) = self.ntk_shift {
            if !(s >= 0.0) {
                return bad(format!("ntk_shift must be non-negative, got {s}"));
            }
        }
        if !(self.relative_shift >= 0.0) {
            return bad(format!("relative_shift must be non-negative, got {}", self.relative_shift));
        }
        if !(self.window_lr_multiplier > 0.0) {
            return bad("window_lr_multiplier must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.final_lr_fraction) {
            return bad("final_lr_fraction must lie in [0, 1]".into());
        }
        if let Some(m) = self.max_step {
            if !(m > 0.0) {
                return bad("max_step must be positive".into());
            }
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.adam_eps > 0.0) {
            return bad("Adam parameters out of range".into());
        }
        Ok(())
    }

    /// Learning rate at `iteration` of `total`.
    pub fn learning_rate_at(&self, iteration: usize, total: usize) -> f64 {
        match self.schedule {
            Schedule::Constant => self.learning_rate,
            Schedule::Cosine => {
                let t = if total == 0 { 0.0 } else { (iteration as f64 / total as f64).min(1.0) };
                let f = self.final_lr_fraction;
                self.learning_rate * (f + (1.0 - f) * 0.5 * (1.0 + (PI * t).cos()))
            }
        }
    }
}

/// `ε̄ = (E_loc − ⟨E⟩)/√N_s` and `Ō = (O − ⟨O⟩)/√N_s`.
#[derive(Clone, Debug)]
pub struct CenteredStats {
    pub eps_bar: Vec<f64>,
    pub o_bar: Matrix,
    pub mean_energy: f64,
}

impl CenteredStats {
    /// `o` holds one row of `∂θ ln φ` per sample.
    pub fn new(local_energies: &[f64], o: &Matrix) -> Result<Self> {
        let ns = local_energies.len();
        if ns == 0 {
            return Err(Error::EmptyInput("CenteredStats"));
        }
        if o.rows() != ns {
            return Err(Error::Shape(format!("{} energies for {} gradient rows", ns, o.rows())));
        }
        let np = o.cols();
        let scale = 1.0 / (ns as f64).sqrt();
        let mean_energy = local_energies.iter().sum::<f64>() / ns as f64;
        let eps_bar = local_energies.iter().map(|e| (e - mean_energy) * scale).collect();
        let mut mean = vec![0.0; np];
        for i in 0..ns {
            for (m, v) in mean.iter_mut().zip(o.row(i)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= ns as f64);
        let mut o_bar = Matrix::zeros(ns, np);
        for i in 0..ns {
            for ((dst, v), m) in o_bar.row_mut(i).iter_mut().zip(o.row(i)).zip(&mean) {
                *dst = (v - m) * scale;
            }
        }
        Ok(Self {
            eps_bar,
            o_bar,
            mean_energy,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.eps_bar.len()
    }

    pub fn n_params(&self) -> usize {
        self.o_bar.cols()
    }

    /// Sample-space kernel `T = Ō Ōᵀ`.
    pub fn kernel(&self) -> Matrix {
        self.o_bar.matmul_t(&self.o_bar)
    }

    /// Quantum geometric tensor `S = Ōᵀ Ō`.
    pub fn geometric_tensor(&self) -> Matrix {
        self.o_bar.t_matmul(&self.o_bar)
    }

    /// `tr T = tr S`, without forming either.
    pub fn kernel_trace(&self) -> f64 {
        self.o_bar.data().iter().map(|v| v * v).sum()
    }

    /// `Ōᵀ ε̄`, half the energy gradient.
    pub fn force(&self) -> Vec<f64> {
        self.o_bar.t_matvec(&self.eps_bar)
    }
}

/// `g = 2 Ōᵀ ε̄`.
pub fn energy_gradient(stats: &CenteredStats) -> Vec<f64> {
    stats.force().into_iter().map(|f| 2.0 * f).collect()
}

fn default_relative_shift() -> f64 {
    1e-4
}

fn default_shift(t: &Matrix, ns: usize) -> f64 {
    default_relative_shift() * t.trace() / ns as f64
}

/// Solves `(A + shift I) x = b`, falling back to the pseudoinverse when the
/// shift is zero.
fn regularized_solve(a: &Matrix, b: &[f64], shift: f64) -> Result<Vec<f64>> {
    if shift == 0.0 {
        return Ok(solve_psd_pinv(a, b, 1e-12));
    }
    let l = cholesky(a, shift)?;
    Ok(cholesky_solve(&l, b))
}

fn scale_step(mut delta: Vec<f64>, lr: f64, multipliers: Option<&[f64]>) -> Vec<f64> {
    for (i, d) in delta.iter_mut().enumerate() {
        *d *= -lr * multipliers.map_or(1.0, |m| m[i]);
    }
    delta
}

/// `Δθ = −η m ⊙ Ōᵀ (T + shift I)⁻¹ ε̄`.
pub fn minsr_update(stats: &CenteredStats, lr: f64, shift: Option<f64>, multipliers: Option<&[f64]>) -> Result<Vec<f64>> {
    if stats.n_samples() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: stats.n_samples(),
        });
    }
    let t = stats.kernel();
    let shift = shift.unwrap_or_else(|| default_shift(&t, stats.n_samples()));
    let x = regularized_solve(&t, &stats.eps_bar, shift)?;
    Ok(scale_step(stats.o_bar.t_matvec(&x), lr, multipliers))
}

/// `Δθ = −η m ⊙ (S + shift I)⁻¹ Ōᵀ ε̄` in parameter space.
pub fn sr_update(stats: &CenteredStats, lr: f64, shift: Option<f64>, multipliers: Option<&[f64]>) -> Result<Vec<f64>> {
    if stats.n_samples() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: stats.n_samples(),
        });
    }
    let s = stats.geometric_tensor();
    let shift = shift.unwrap_or_else(|| default_shift(&s, stats.n_samples()));
    regularized_solve(&s, &stats.force(), shift).map(|x| scale_step(x, lr, multipliers))
}

/// First and second moment estimates.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn step(&mut self, grad: &[f64], lr: f64, settings: &OptimizerSettings, multipliers: Option<&[f64]>) -> Vec<f64> {
        if self.m.len() != grad.len() {
            self.m = vec![0.0; grad.len()];
            self.v = vec![0.0; grad.len()];
            self.t = 0;
        }
        self.t += 1;
        let (b1, b2) = (settings.beta1, settings.beta2);
        let c1 = 1.0 - b1.powi(self.t as i32);
        let c2 = 1.0 - b2.powi(self.t as i32);
        let mut delta = Vec::with_capacity(grad.len());
        for (i, &g) in grad.iter().enumerate() {
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * g;
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * g * g;
            let step = (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + settings.adam_eps);
            delta.push(-lr * multipliers.map_or(1.0, |m| m[i]) * step);
        }
        delta
    }
}

/// Local energies and log-derivative rows of a batch.
#[derive(Clone, Debug)]
pub struct BatchEvaluation {
    pub local_energies: Vec<f64>,
    /// `N_s × N_p`; empty when gradients were not requested.
    pub o: Matrix,
}

pub fn evaluate_batch(
    model: &ModelSpec,
    ansatz: &Ansatz,
    params: &AnsatzParams,
    batch: &SampleBatch,
    with_gradients: bool,
) -> Result<BatchEvaluation> {
    let np = if with_gradients { ansatz.n_params() } else { 0 };
    let rows: Vec<(f64, Vec<f64>)> = batch
        .samples
        .par_iter()
        .map(|s| {
            let d = ansatz.differentiate(params, &s.config, with_gradients)?;
            let e = model.local_energy(&d, &s.config)?;
            Ok((e, d.param_grad.unwrap_or_default()))
        })
        .collect::<Result<_>>()?;
    let mut o = Matrix::zeros(if with_gradients { rows.len() } else { 0 }, np);
    let mut local_energies = Vec::with_capacity(rows.len());
    for (i, (e, g)) in rows.into_iter().enumerate() {
        local_energies.push(e);
        if with_gradients {
            o.row_mut(i).copy_from_slice(&g);
        }
    }
    Ok(BatchEvaluation { local_energies, o })
}

/// One row of the optimization trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub energy: f64,
    pub energy_stderr: f64,
    pub mean_n: f64,
    pub stderr_n: f64,
    pub rescaled_variance: f64,
    pub accept_disp: f64,
    pub accept_add: f64,
    pub accept_rm: f64,
    pub learning_rate: f64,
    pub step_norm: f64,
}

impl IterationRecord {
    pub const CSV_HEADER: &'static str = "iter,energy,energy_stderr,mean_n,stderr_n,rescaled_variance,accept_disp,accept_add,accept_rm";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.10e},{:.6e},{:.6},{:.6},{:.6e},{:.5},{:.5},{:.5}",
            self.iter,
            self.energy,
            self.energy_stderr,
            self.mean_n,
            self.stderr_n,
            self.rescaled_variance,
            self.accept_disp,
            self.accept_add,
            self.accept_rm
        )
    }
}

/// Summary statistics of one evaluated batch.
#[derive(Clone, Debug)]
pub struct BatchSummary {
    pub energy: EstimateWithError,
    pub n: EstimateWithError,
    pub rescaled_variance: f64,
    pub acceptance: Acceptance,
}

pub fn summarize(batch: &SampleBatch, local_energies: &[f64]) -> Result<BatchSummary> {
    let chains = batch.chain_ids();
    let energy = chain_estimate(local_energies, &chains)?;
    let ns: Vec<f64> = batch.particle_numbers().iter().map(|&n| n as f64).collect();
    let n = chain_estimate(&ns, &chains)?;
    let rv = rescaled_variance(local_energies, n.mean, &energy)?;
    Ok(BatchSummary {
        energy,
        n,
        rescaled_variance: rv.value,
        acceptance: batch.acceptance,
    })
}

/// Sampler, parameters and optimizer state of one run.
pub struct Optimizer {
    pub model: ModelSpec,
    pub ansatz: Ansatz,
    pub params: AnsatzParams,
    pub settings: OptimizerSettings,
    pub sampler: Sampler,
    pub adam: AdamState,
    /// Iterations completed so far.
    pub iteration: usize,
    multipliers: Vec<f64>,
}

impl Optimizer {
    pub fn new(
        model: ModelSpec,
        ansatz: Ansatz,
        params: AnsatzParams,
        settings: OptimizerSettings,
        sampler_settings: SamplerSettings,
        seed: u64,
    ) -> Result<Self> {
        settings.validate()?;
        if params.len() != ansatz.n_params() {
            return Err(Error::LayoutMismatch(format!("{} parameters for a layout of {}", params.len(), ansatz.n_params())));
        }
        let sampler = {
            let amp = AnsatzAmplitude {
                ansatz: &ansatz,
                params: &params,
            };
            Sampler::new(sampler_settings, seed, &amp)?
        };
        let multipliers = ansatz.layout().lr_multipliers(settings.window_lr_multiplier);
        Ok(Self {
            model,
            ansatz,
            params,
            settings,
            sampler,
            adam: AdamState::default(),
            iteration: 0,
            multipliers,
        })
    }

    /// Continues from saved state without warm-up.
    pub fn from_parts(
        model: ModelSpec,
        ansatz: Ansatz,
        params: AnsatzParams,
        settings: OptimizerSettings,
        sampler: Sampler,
        iteration: usize,
        adam: AdamState,
    ) -> Result<Self> {
        settings.validate()?;
        if params.len() != ansatz.n_params() {
            return Err(Error::LayoutMismatch(format!(
                "{} parameters for a layout of {}",
                params.len(),
                ansatz.n_params()
            )));
        }
        let multipliers = ansatz.layout().lr_multipliers(settings.window_lr_multiplier);
        Ok(Self {
            model,
            ansatz,
            params,
            settings,
            sampler,
            adam,
            iteration,
            multipliers,
        })
    }

    /// Draws a batch for `phase` with the current parameters.
    pub fn sample(&mut self, phase: u64) -> SampleBatch {
        let amp = AnsatzAmplitude {
            ansatz: &self.ansatz,
            params: &self.params,
        };
        self.sampler.run(&amp, phase)
    }

    /// Samples and evaluates without updating; `phase` keys the random
    /// streams.
    pub fn evaluate(&mut self, phase: u64) -> Result<(SampleBatch, BatchEvaluation, BatchSummary)> {
        let batch = self.sample(phase);
        let eval = evaluate_batch(&self.model, &self.ansatz, &self.params, &batch, false)?;
        let summary = summarize(&batch, &eval.local_energies)?;
        Ok((batch, eval, summary))
    }

    /// One sample → statistics → update cycle.
    pub fn step(&mut self, total: usize) -> Result<IterationRecord> {
        let it = self.iteration;
        let batch = self.sample(it as u64);
        let eval = evaluate_batch(&self.model, &self.ansatz, &self.params, &batch, true)?;
        if eval.local_energies.iter().any(|e| !e.is_finite()) {
            return Err(Error::NonFiniteEnergy { iteration: it });
        }
        let summary = summarize(&batch, &eval.local_energies)?;
        let stats = CenteredStats::new(&eval.local_energies, &eval.o)?;
        let lr = self.settings.learning_rate_at(it, total);
        let mult = Some(self.multipliers.as_slice());
        let shift = self
            .settings
            .ntk_shift
            .unwrap_or_else(|| self.settings.relative_shift * stats.kernel_trace() / stats.n_samples() as f64);
        let mut delta = match self.settings.method {
            Method::Minsr => minsr_update(&stats, lr, Some(shift), mult)?,
            Method::Sr => sr_update(&stats, lr, Some(shift), mult)?,
            Method::Adam => {
                let g = energy_gradient(&stats);
                self.adam.step(&g, lr, &self.settings, mult)
            }
        };
        let mut norm = delta.iter().map(|d| d * d).sum::<f64>().sqrt();
        if let Some(max) = self.settings.max_step {
            if norm > max {
                let c = max / norm;
                delta.iter_mut().for_each(|d| *d *= c);
                norm = max;
            }
        }
        if !norm.is_finite() {
            return Err(Error::NonFiniteEnergy { iteration: it });
        }
        self.params.apply(&delta);
        self.iteration += 1;
        if batch.stuck {
            warn!("iteration {it}: sampler looks stuck");
        }
        let rec = IterationRecord {
            iter: it,
            energy: summary.energy.mean,
            energy_stderr: summary.energy.stderr,
            mean_n: summary.n.mean,
            stderr_n: summary.n.stderr,
            rescaled_variance: summary.rescaled_variance,
            accept_disp: summary.acceptance.displace.rate(),
            accept_add: summary.acceptance.insert.rate(),
            accept_rm: summary.acceptance.remove.rate(),
            learning_rate: lr,
            step_norm: norm,
        };
        debug!(
            "iter {} E = {:.6} ± {:.2e} <n> = {:.3} |Δθ| = {:.3e}",
            rec.iter, rec.energy, rec.energy_stderr, rec.mean_n, rec.step_norm
        );
        Ok(rec)
    }

    /// Runs until `total` iterations are complete, calling `on_iteration`
    /// after every update. Stops at the first error, leaving the parameters
    /// of the last completed iteration in place.
    pub fn run(&mut self, total: usize, mut on_iteration: impl FnMut(&Self, &IterationRecord) -> Result<()>) -> Result<Vec<IterationRecord>> {
        let mut out = Vec::new();
        while self.iteration < total {
            let before = self.params.clone();
            match self.step(total) {
                Ok(rec) => {
                    on_iteration(self, &rec)?;
                    out.push(rec);
                }
                Err(e) => {
                    self.params = before;
                    return Err(e);
                }
            }
        }
        Ok(out)
    }
}
