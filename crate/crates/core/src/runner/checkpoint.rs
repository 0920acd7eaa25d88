//! Binary checkpoints: `BFCK`, a little-endian `u32` format version, a
//! `u64` header length, the JSON header, then the parameters as
//! little-endian `f64`.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ansatz::{Ansatz, AnsatzHyper, AnsatzParams, ExtraFactors};
use crate::error::{Error, Result};
use crate::geometry::Configuration;
use crate::models::ModelSpec;
use crate::optimizer::AdamState;

pub const MAGIC: &[u8; 4] = b"BFCK";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub model: ModelSpec,
    pub hyper: AnsatzHyper,
    pub factors: ExtraFactors,
    /// Root seed; with `iteration` it fixes every later random stream.
    pub seed: u64,
    pub iteration: usize,
    pub n_params: usize,
    /// Chain positions at save time.
    #[serde(default)]
    pub chains: Vec<Configuration>,
    #[serde(default)]
    pub adam: Option<AdamState>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub params: AnsatzParams,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_vec(&self.header)?;
        let mut out = Vec::with_capacity(16 + header.len() + 8 * self.params.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for v in self.params.as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let corrupt = |m: &str| Error::CorruptCheckpoint(m.to_string());
        if bytes.len() < 16 {
            return Err(corrupt("file shorter than the fixed prefix"));
        }
        if &bytes[..4] != MAGIC {
            return Err(corrupt("bad magic"));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let hlen = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let body = &bytes[16..];
        if body.len() < hlen {
            return Err(corrupt("truncated header"));
        }
        let header: CheckpointHeader =
            serde_json::from_slice(&body[..hlen]).map_err(|e| Error::CorruptCheckpoint(format!("header: {e}")))?;
        let raw = &body[hlen..];
        if raw.len() != 8 * header.n_params {
            return Err(Error::CorruptCheckpoint(format!(
                "expected {} parameter bytes, found {}",
                8 * header.n_params,
                raw.len()
            )));
        }
        let params = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Ok(Self {
            header,
            params: AnsatzParams::from_vec(params),
        })
    }

    /// Writes through a temporary file so an interrupted save leaves the
    /// previous checkpoint intact.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("ckpt.tmp");
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&self.to_bytes()?)?;
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = match fs::read(path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(Error::CheckpointNotFound(path.to_path_buf()))
            }
            Err(e) => return Err(e.into()),
        };
        Self::from_bytes(&bytes)
    }

    /// Fails unless the parameters fit `ansatz`.
    pub fn check_layout(&self, ansatz: &Ansatz) -> Result<()> {
        if &self.header.hyper != ansatz.hyper() {
            return Err(Error::LayoutMismatch("architecture hyperparameters differ".into()));
        }
        if self.header.factors.window != ansatz.factors().window
            || self.header.factors.envelope.is_some() != ansatz.factors().envelope.is_some()
        {
            return Err(Error::LayoutMismatch("trainable factors differ".into()));
        }
        if self.params.len() != ansatz.n_params() {
            return Err(Error::LayoutMismatch(format!(
                "{} stored parameters, layout needs {}",
                self.params.len(),
                ansatz.n_params()
            )));
        }
        Ok(())
    }
}
