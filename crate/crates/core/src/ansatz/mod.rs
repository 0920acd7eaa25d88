//! Attention-based trial wavefunction over Fock space.
//!
//! `ln φ_n(R) = ln φ̃_n(R) + ln C(R) + ln J(R) + ln q_n [+ ln envelope]`, where
//! `φ̃` is the attention network and the remaining factors are analytic.

mod embed;
mod factors;
mod layout;
mod network;

pub use embed::EmbeddingKind;
pub use factors::{Cutoff, ExtraFactors, Jastrow, Window};
pub use layout::{init_params, AnsatzParams, Layout, ParamBlock, ParamKind};

use serde::{Deserialize, Serialize};

use crate::autodiff::{LogAmpDerivatives, Tape, Taylor, Tensor};
use crate::error::{Error, Result};
use crate::geometry::{Configuration, Domain};
use crate::numerics::Matrix;

use embed::Embedding;
use factors::FactorTerms;
use network::{Net, Padding};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    #[default]
    LogCosh,
}

/// Architecture hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnsatzHyper {
    /// Block width `k`.
    pub embed_dim: usize,
    pub blocks: usize,
    pub heads: usize,
    /// Width of the per-row feed-forward layers and of the head network.
    pub ffn_width: usize,
    pub n_max: usize,
    pub embedding: EmbeddingKind,
    /// Grid points (gaussian) or frequencies (fourier) per axis.
    pub grid_points: usize,
    /// Gaussian width; twice the grid spacing when absent.
    #[serde(default)]
    pub sigma: Option<f64>,
    #[serde(default)]
    pub activation: Activation,
}

impl AnsatzHyper {
    /// Width used in the paper-scale configuration.
    pub fn table_iv(n_max: usize) -> Self {
        Self {
            embed_dim: 100,
            blocks: 2,
            heads: 4,
            ffn_width: 100,
            n_max,
            embedding: EmbeddingKind::Gaussian,
            grid_points: 100,
            sigma: None,
            activation: Activation::LogCosh,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidHyper(m));
        if self.heads == 0 || self.embed_dim % self.heads != 0 {
            return bad(format!(
                "embed_dim {} is not divisible by heads {}",
                self.embed_dim, self.heads
            ));
        }
        if self.blocks == 0 {
            return bad("at least one block is required".into());
        }
        if self.n_max == 0 {
            return bad("n_max must be at least 1".into());
        }
        if self.ffn_width == 0 {
            return bad("ffn_width must be positive".into());
        }
        if self.grid_points < 2 {
            return bad(format!("grid_points must be ≥ 2, got {}", self.grid_points));
        }
        let expected = match self.embedding {
            EmbeddingKind::Gaussian => self.grid_points.pow(dim as u32),
            EmbeddingKind::Fourier => 2 * self.grid_points * dim,
        };
        if expected != self.embed_dim {
            return bad(format!(
                "{:?} embedding with {} points in d={dim} has width {expected}, not embed_dim {}",
                self.embedding, self.grid_points, self.embed_dim
            ));
        }
        if let Some(s) = self.sigma {
            if !(s > 0.0) {
                return bad(format!("sigma must be positive, got {s}"));
            }
        }
        Ok(())
    }
}

/// `ln φ_n`, or an exactly vanishing amplitude.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LogAmp {
    Zero,
    Finite(f64),
}

impl LogAmp {
    pub fn finite(self) -> Option<f64> {
        match self {
            LogAmp::Finite(v) => Some(v),
            LogAmp::Zero => None,
        }
    }

    /// `ln φ`, with `-∞` for a vanishing amplitude.
    pub fn ln(self) -> f64 {
        self.finite().unwrap_or(f64::NEG_INFINITY)
    }
}

/// A fully specified trial wavefunction: architecture, analytic factors and
/// domain. Parameters are passed separately.
#[derive(Clone, Debug)]
pub struct Ansatz {
    hyper: AnsatzHyper,
    factors: ExtraFactors,
    domain: Domain,
    layout: Layout,
    embedding: Embedding,
}

impl Ansatz {
    pub fn new(hyper: AnsatzHyper, factors: ExtraFactors, domain: Domain) -> Result<Self> {
        hyper.validate(domain.dim)?;
        factors.validate(&domain)?;
        let layout = Layout::new(&hyper, &factors);
        let embedding = Embedding::new(&hyper, &domain);
        Ok(Self {
            hyper,
            factors,
            domain,
            layout,
            embedding,
        })
    }

    pub fn hyper(&self) -> &AnsatzHyper {
        &self.hyper
    }

    pub fn factors(&self) -> &ExtraFactors {
        &self.factors
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn n_params(&self) -> usize {
        self.layout.total
    }

    pub fn init_params(&self, seed: u64) -> AnsatzParams {
        init_params(&self.hyper, &self.factors, seed)
    }

    pub fn window(&self, params: &AnsatzParams) -> Option<Window> {
        self.layout
            .window_offset
            .map(|o| Window::from_raw(&params.as_slice()[o..o + 3]))
    }

    fn check(&self, params: &AnsatzParams, config: &Configuration) -> Result<()> {
        if params.len() != self.layout.total {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                self.layout.total,
                params.len()
            )));
        }
        if config.dim() != self.domain.dim {
            return Err(Error::Shape(format!(
                "configuration dimension {} differs from domain dimension {}",
                config.dim(),
                self.domain.dim
            )));
        }
        if config.n() > self.hyper.n_max {
            return Err(Error::Capacity {
                n: config.n(),
                n_max: self.hyper.n_max,
            });
        }
        Ok(())
    }

    fn wrapped(&self, config: &Configuration) -> Configuration {
        let mut c = config.clone();
        if self.domain.is_periodic() {
            for x in c.coords_mut() {
                *x = self.domain.wrap(*x);
            }
        }
        c
    }

    /// Embedded configuration padded to `n_max` rows; padding rows are zero.
    pub fn embed(&self, config: &Configuration) -> Result<Matrix> {
        if config.n() > self.hyper.n_max {
            return Err(Error::Capacity {
                n: config.n(),
                n_max: self.hyper.n_max,
            });
        }
        let k = self.hyper.embed_dim;
        let mut out = Matrix::zeros(self.hyper.n_max, k);
        for i in 0..config.n() {
            let r: Vec<f64> = config.particle(i).iter().map(|&x| self.domain.wrap(x)).collect();
            self.embedding.row(&r, out.row_mut(i));
        }
        Ok(out)
    }

    fn net<T: Tensor>(&self, params: &AnsatzParams, mk: impl FnMut(Matrix) -> T) -> Net<T> {
        Net::load(
            &self.layout,
            params.as_slice(),
            self.hyper.blocks,
            self.hyper.heads,
            mk,
        )
    }

    /// Network output `ln φ̃_n` on the unpadded embedding.
    pub fn network_log_amp(&self, params: &AnsatzParams, config: &Configuration) -> Result<f64> {
        self.check(params, config)?;
        Ok(self.network_value(params, &self.wrapped(config)))
    }

    /// Network output on an `n_max`-row input whose rows `n..` are padding.
    /// The result does not depend on the contents of the padding rows.
    pub fn network_log_amp_padded(&self, params: &AnsatzParams, embedded: &Matrix, n: usize) -> Result<f64> {
        let n_max = self.hyper.n_max;
        if embedded.shape() != (n_max, self.hyper.embed_dim) {
            return Err(Error::Shape(format!(
                "padded input must be {n_max}×{}, got {:?}",
                self.hyper.embed_dim,
                embedded.shape()
            )));
        }
        if n > n_max {
            return Err(Error::Capacity { n, n_max });
        }
        let net = self.net(params, |m| m);
        if n == 0 {
            return Ok(net.empty().get(0, 0));
        }
        let padding = Padding::new(n, n_max);
        Ok(net.forward(embedded.clone(), Some(&padding)).get(0, 0))
    }

    fn envelope_center(&self) -> f64 {
        self.domain.lower() + 0.5 * self.domain.extent
    }

    /// `(ln envelope, ω)` for the current configuration.
    fn envelope(&self, params: &AnsatzParams, config: &Configuration) -> Option<(f64, f64)> {
        let off = self.layout.envelope_offset?;
        let omega = params.as_slice()[off].exp();
        let c = self.envelope_center();
        let r2: f64 = config.coords().iter().map(|x| (x - c) * (x - c)).sum();
        Some((-0.5 * omega * r2, omega))
    }

    fn window_log_q(&self, params: &AnsatzParams, n: usize) -> f64 {
        self.window(params).map_or(0.0, |w| w.log_q(n))
    }

    /// `ln φ_n(R)`.
    pub fn log_amplitude(&self, params: &AnsatzParams, config: &Configuration) -> Result<LogAmp> {
        self.check(params, config)?;
        if !self.domain.contains(config) {
            return Ok(LogAmp::Zero);
        }
        let config = self.wrapped(config);
        let terms = match self.factors.coordinate_terms(&self.domain, &config) {
            Ok(t) => t.value,
            Err(Error::ZeroAmplitude | Error::Coincident { .. }) => return Ok(LogAmp::Zero),
            Err(e) => return Err(e),
        };
        let net = self.network_value(params, &config);
        let env = self.envelope(params, &config).map_or(0.0, |e| e.0);
        let v = net + terms + env + self.window_log_q(params, config.n()) + self.factors.sector_log_norm(config.n(), self.domain.dim);
        Ok(if v.is_finite() {
            LogAmp::Finite(v)
        } else {
            LogAmp::Zero
        })
    }

    fn compact_embedding(&self, config: &Configuration) -> Matrix {
        let k = self.hyper.embed_dim;
        let n = config.n();
        let mut x = Matrix::zeros(n, k);
        for i in 0..n {
            self.embedding.row(config.particle(i), x.row_mut(i));
        }
        x
    }

    fn network_value(&self, params: &AnsatzParams, config: &Configuration) -> f64 {
        let net = self.net(params, |m| m);
        if config.n() == 0 {
            net.empty().get(0, 0)
        } else {
            net.forward(self.compact_embedding(config), None).get(0, 0)
        }
    }

    /// Exact log-amplitude derivatives: coordinate gradient and Laplacian by
    /// forward jets, parameter gradient by a reverse sweep.
    pub fn differentiate(
        &self,
        params: &AnsatzParams,
        config: &Configuration,
        want_param_grad: bool,
    ) -> Result<LogAmpDerivatives> {
        self.check(params, config)?;
        if !self.domain.contains(config) {
            return Err(Error::ZeroAmplitude);
        }
        let config = self.wrapped(&config.clone());
        let n = config.n();
        let d = config.dim();
        let FactorTerms {
            value: fvalue,
            mut grad,
            laplacian: flap,
        } = self.factors.coordinate_terms(&self.domain, &config)?;

        let (net_value, net_lap) = if n == 0 {
            (self.net(params, |m| m).empty().get(0, 0), 0.0)
        } else {
            let x = self.embedding.taylor(&config);
            let net = self.net(params, Taylor::constant);
            let out = net.forward(x, None);
            for (g, ng) in grad.iter_mut().zip(out.gradient()) {
                *g += ng;
            }
            (out.value().get(0, 0), out.laplacian())
        };

        let mut value = net_value + fvalue + self.window_log_q(params, n) + self.factors.sector_log_norm(n, d);
        let mut laplacian = flap + net_lap;
        if let Some((ev, omega)) = self.envelope(params, &config) {
            value += ev;
            let c = self.envelope_center();
            for (g, x) in grad.iter_mut().zip(config.coords()) {
                *g -= omega * (x - c);
            }
            laplacian -= omega * (n * d) as f64;
        }

        let param_grad = want_param_grad.then(|| self.param_grad(params, &config));
        Ok(LogAmpDerivatives {
            value,
            coord_grad: grad,
            coord_laplacian: laplacian,
            param_grad,
        })
    }

    /// `∂θ ln φ_n` in layout order.
    pub fn param_grad(&self, params: &AnsatzParams, config: &Configuration) -> Vec<f64> {
        let mut out = vec![0.0; self.layout.total];
        let tape = Tape::new();
        let net = self.net(params, |m| tape.leaf(m));
        let y = if config.n() == 0 {
            net.empty()
        } else {
            let x = tape.constant_var(self.compact_embedding(config));
            net.forward(x, None)
        };
        let grads = tape.gradients(&y);
        for (var, block) in net.tensors().iter().zip(&self.layout.blocks) {
            if let Some(g) = grads.of(var) {
                out[block.range()].copy_from_slice(g.data());
            }
        }
        if let (Some(off), Some(w)) = (self.layout.window_offset, self.window(params)) {
            out[off..off + 3].copy_from_slice(&w.log_q_grad(config.n()));
        }
        if let Some((ev, _)) = self.envelope(params, config) {
            let off = self.layout.envelope_offset.expect("envelope offset");
            // ∂/∂ln ω of -ω r²/2 is the term itself
            out[off] = ev;
        }
        out
    }
}

/// Free-function form of [`Ansatz::differentiate`].
pub fn differentiate(
    ansatz: &Ansatz,
    params: &AnsatzParams,
    config: &Configuration,
    want_param_grad: bool,
) -> Result<LogAmpDerivatives> {
    ansatz.differentiate(params, config, want_param_grad)
}
