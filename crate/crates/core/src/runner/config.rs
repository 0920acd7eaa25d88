use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ansatz::{Ansatz, AnsatzHyper, Cutoff, EmbeddingKind, ExtraFactors, Jastrow};
use crate::error::{Error, Result};
use crate::models::{ModelKind, ModelSpec};
use crate::optimizer::OptimizerSettings;
use crate::sampler::SamplerSettings;

fn yes() -> bool {
    true
}

/// Analytic factors; absent entries follow the model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorsConfig {
    #[serde(default)]
    pub cutoff: Option<Cutoff>,
    #[serde(default)]
    pub jastrow: Option<Jastrow>,
    #[serde(default = "yes")]
    pub window: bool,
    #[serde(default)]
    pub envelope: Option<f64>,
    /// Per-pair log offset of the Jastrow; derived from the model when
    /// absent.
    #[serde(default)]
    pub pair_offset: Option<f64>,
    /// Normalize particle-number sectors by the analytic factors; on by
    /// default whenever an envelope is used.
    #[serde(default)]
    pub normalize_sectors: Option<bool>,
}

impl Default for FactorsConfig {
    fn default() -> Self {
        Self {
            cutoff: None,
            jastrow: None,
            window: true,
            envelope: None,
            pair_offset: None,
            normalize_sectors: None,
        }
    }
}

impl FactorsConfig {
    pub fn resolve(&self, model: &ModelSpec) -> Result<ExtraFactors> {
        let cutoff = self.cutoff.unwrap_or(match model.kind {
            ModelKind::LiebLiniger => Cutoff::Box1d,
            _ => Cutoff::None,
        });
        let natural = model.natural_jastrow();
        let normalize_sectors = self.normalize_sectors.unwrap_or(self.envelope.is_some());
        let pair_offset = match (self.pair_offset, self.jastrow) {
            (Some(c), _) => c,
            // the sector norm already accounts for the 2D pair factor
            (None, None) if normalize_sectors && model.kind == ModelKind::Cs2d => 0.0,
            (None, None) => model.natural_pair_offset(),
            (None, Some(_)) => 0.0,
        };
        let jastrow = match self.jastrow {
            None => natural,
            Some(Jastrow::Cs2d { lambda }) if model.kind == ModelKind::Cs2d => {
                let want = model.cs2d_lambda();
                if (lambda - want).abs() > 1e-12 * want.max(1.0) {
                    return Err(Error::Config(format!(
                        "cs-2d jastrow exponent {lambda} does not match sqrt(m g) = {want}; omit it to derive it"
                    )));
                }
                natural
            }
            Some(j) => j,
        };
        Ok(ExtraFactors {
            cutoff,
            jastrow,
            window: self.window,
            envelope: self.envelope,
            pair_offset,
            normalize_sectors,
        })
    }
}

fn default_bins() -> usize {
    40
}
fn default_obdm_points() -> usize {
    64
}
fn default_shells() -> usize {
    6
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationSettings {
    #[serde(default = "default_bins")]
    pub density_bins: usize,
    /// Outer radius of the radial profile; half the window when absent.
    #[serde(default)]
    pub radial_max: Option<f64>,
    #[serde(default = "default_obdm_points")]
    pub obdm_points: usize,
    /// Oscillator shells of the projection basis (`6` gives 28 orbitals).
    #[serde(default = "default_shells")]
    pub obdm_shells: usize,
    /// `γ` of the reference density `(γ²/π) e^{-γ² r²}`; when absent it is
    /// set from the sampled `⟨r²⟩` so the reference is 1.5 times wider.
    #[serde(default)]
    pub obdm_reference_width: Option<f64>,
    /// Samples per chain for evaluation; the sampler value when absent.
    #[serde(default)]
    pub samples_per_chain: Option<usize>,
}

impl Default for EvaluationSettings {
    fn default() -> Self {
        Self {
            density_bins: default_bins(),
            radial_max: None,
            obdm_points: default_obdm_points(),
            obdm_shells: default_shells(),
            obdm_reference_width: None,
            samples_per_chain: None,
        }
    }
}

fn default_out() -> PathBuf {
    PathBuf::from("runs/out")
}
fn default_checkpoint_every() -> usize {
    50
}

/// One run: model, ansatz, sampler, optimizer, seed and outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    #[serde(default = "default_checkpoint_every")]
    pub checkpoint_every: usize,
    /// Seed of the parameter initialization; `seed` when absent.
    #[serde(default)]
    pub init_seed: Option<u64>,
    pub model: ModelSpec,
    pub ansatz: AnsatzHyper,
    #[serde(default)]
    pub factors: FactorsConfig,
    #[serde(default)]
    pub sampler: SamplerSettings,
    #[serde(default)]
    pub optimizer: OptimizerSettings,
    #[serde(default)]
    pub evaluation: EvaluationSettings,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Field checks plus the cross-field rules.
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        let domain = self.model.domain();
        self.ansatz.validate(domain.dim)?;
        self.sampler.validate()?;
        self.optimizer.validate()?;
        let periodic = domain.is_periodic();
        match (self.ansatz.embedding, periodic) {
            (EmbeddingKind::Fourier, false) => {
                return Err(Error::Config("fourier embedding requires a periodic model".into()))
            }
            (EmbeddingKind::Gaussian, true) => {
                return Err(Error::Config("periodic models require the fourier embedding".into()))
            }
            _ => {}
        }
        if self.evaluation.density_bins == 0 || self.evaluation.obdm_points == 0 {
            return Err(Error::Config("density_bins and obdm_points must be positive".into()));
        }
        if let Some(g) = self.evaluation.obdm_reference_width {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::Config(format!("obdm_reference_width must be positive, got {g}")));
            }
        }
        self.factors.resolve(&self.model)?.validate(&domain)?;
        Ok(())
    }

    pub fn extra_factors(&self) -> Result<ExtraFactors> {
        self.factors.resolve(&self.model)
    }

    pub fn build_ansatz(&self) -> Result<Ansatz> {
        Ansatz::new(self.ansatz.clone(), self.extra_factors()?, self.model.domain())
    }

    pub fn init_seed(&self) -> u64 {
        self.init_seed.unwrap_or(self.seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CS1D: &str = r#"
seed = 3
[model]
kind = "cs1d"
extent = 5.0
mu = 45.98
g = 5.0
[ansatz]
embed_dim = 16
blocks = 1
heads = 2
ffn_width = 16
n_max = 12
embedding = "fourier"
grid_points = 8
"#;

    #[test]
    fn parses_with_defaults() {
        let cfg = RunConfig::from_toml_str(CS1D).unwrap();
        assert_eq!(cfg.seed, 3);
        assert!(cfg.factors.window);
        assert_eq!(cfg.sampler.chains, 100);
        let f = cfg.extra_factors().unwrap();
        assert!(matches!(f.jastrow, Jastrow::Cs1d { .. }));
    }

    #[test]
    fn unknown_key_reports_location() {
        let bad = CS1D.replace("blocks = 1", "blocks = 1\nbloks = 2");
        let err = RunConfig::from_toml_str(&bad).unwrap_err().to_string();
        assert!(err.contains("bloks"), "{err}");
        assert!(err.contains("line"), "{err}");
    }

    #[test]
    fn embedding_must_match_boundary() {
        let bad = CS1D.replace("\"fourier\"", "\"gaussian\"");
        assert!(RunConfig::from_toml_str(&bad).is_err());
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = RunConfig::from_toml_str(CS1D).unwrap();
        let again = RunConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(cfg, again);
    }
}
