//! Run configuration: one TOML document covering every stage.
//!
//! Precedence is built-in defaults < config file < command-line flags. All
//! randomness derives from the single `seed`; the per-stage seeds below are
//! always recomputed from it by [`RunConfig::effective`].

use serde::{Deserialize, Serialize};

use crate::channel::ChannelParams;
use crate::clustering::ClusterParams;
use crate::decode::DecodeParams;
use crate::ecc::{EccConfig, Scheme};
use crate::error::{Error, Result};
use crate::layout::LayoutParams;
use crate::motif::{MotifConstraints, MotifDictionary};
use crate::prng::{derive_seed, tags};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MotifConfig {
    #[serde(flatten)]
    pub constraints: MotifConstraints,
    pub bits_per_motif: u32,
}

impl Default for MotifConfig {
    fn default() -> Self {
        MotifConfig { constraints: MotifConstraints::default(), bits_per_motif: 12 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    #[serde(with = "crate::prng::hex_u64")]
    pub seed: u64,
    pub motif: MotifConfig,
    pub ecc: EccConfig,
    pub layout: LayoutParams,
    pub channel: ChannelParams,
    pub cluster: ClusterParams,
    pub decode: DecodeParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0x5eed,
            motif: MotifConfig::default(),
            ecc: EccConfig::default(),
            layout: LayoutParams::default(),
            channel: ChannelParams::default(),
            cluster: ClusterParams::default(),
            decode: DecodeParams::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg.effective())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Copy with every stage seed derived from the global seed.
    pub fn effective(&self) -> Self {
        let mut c = self.clone();
        c.ecc.ldpc.seed = derive_seed(self.seed, tags::LDPC_MATRIX);
        c.channel.seed = self.seed;
        c.cluster.seed = self.seed;
        if c.ecc.scheme == Scheme::Rs {
            c.ecc.field_poly = c.ecc.resolved_field_poly();
        }
        c
    }

    pub fn validate(&self) -> Result<()> {
        self.motif.constraints.validate()?;
        self.ecc.validate()?;
        self.channel.validate()?;
        self.decode.validate()?;
        if self.ecc.symbol_bits != self.motif.bits_per_motif {
            return Err(Error::Config(format!(
                "ecc.symbol_bits ({}) must equal motif.bits_per_motif ({})",
                self.ecc.symbol_bits, self.motif.bits_per_motif
            )));
        }
        Ok(())
    }

    pub fn dictionary(&self) -> Result<MotifDictionary> {
        MotifDictionary::new(self.motif.constraints.clone(), self.motif.bits_per_motif)
    }
}
