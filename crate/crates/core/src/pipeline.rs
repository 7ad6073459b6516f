//! End-to-end helpers tying the stages together under one [`RunConfig`].

use crate::channel::{amplify_extent, sample_reads, ChannelParams, ReadRecord};
use crate::config::RunConfig;
use crate::decode::{decode_pool, Grouping, PoolDecode};
use crate::ecc::EccCodec;
use crate::error::Result;
use crate::layout::{encode_pool, extent_count, plan_layout, OligoRecord, PoolManifest};
use crate::metrics::TrialOutcome;
use crate::motif::MotifDictionary;
use crate::primers::generate_primers;
use crate::prng::{derive_seed, tags};

/// An encoded pool with its manifest and the tables needed to decode it.
#[derive(Debug, Clone)]
pub struct Pool {
    pub manifest: PoolManifest,
    pub oligos: Vec<OligoRecord>,
    pub dict: MotifDictionary,
    pub codec: EccCodec,
}

impl Pool {
    /// Rebuilds the dictionary and codec for a stored manifest.
    pub fn from_parts(manifest: PoolManifest, oligos: Vec<OligoRecord>) -> Result<Self> {
        let dict = manifest.dictionary()?;
        let codec = manifest.codec()?;
        Ok(Pool { manifest, oligos, dict, codec })
    }

    pub fn sample(&self, channel: &ChannelParams) -> Result<Vec<ReadRecord>> {
        sample_reads(&self.oligos, &self.manifest, channel)
    }

    pub fn amplify(&self, oe: usize, channel: &ChannelParams) -> Result<Vec<ReadRecord>> {
        amplify_extent(&self.oligos, &self.manifest, oe, channel)
    }

    pub fn decode(&self, reads: &[ReadRecord], cfg: &RunConfig, grouping: &Grouping, extents: Option<&[usize]>) -> Result<PoolDecode> {
        decode_pool(reads, &self.manifest, &self.dict, &self.codec, &cfg.decode, grouping, extents)
    }

    /// Full oligo (primers included) for a read's provenance.
    pub fn source_sequence(&self, read: &ReadRecord) -> Option<Vec<u8>> {
        let s = read.source?;
        let o = self.oligos.get(s.ob * self.manifest.geometry.oligos_per_ob + s.row)?;
        Some(o.full_sequence(&self.manifest.extents.get(o.oe)?.primers))
    }
}

/// Plans, checksums and encodes `input`.
pub fn encode_input(input: &[u8], cfg: &RunConfig) -> Result<Pool> {
    let cfg = cfg.effective();
    cfg.validate()?;
    let dict = cfg.dictionary()?;
    let count = extent_count(input.len() as u64, &cfg.layout, &cfg.ecc)?;
    let primers = generate_primers(count, cfg.layout.primer_len, cfg.seed)?;
    let mut manifest = plan_layout(input.len() as u64, &cfg.layout, &cfg.ecc, &dict, &primers, cfg.seed)?;
    manifest.record_checksums(input)?;
    let codec = manifest.codec()?;
    let oligos = encode_pool(input, &manifest, &dict, &codec)?;
    Ok(Pool { manifest, oligos, dict, codec })
}

/// Channel seed for trial `trial` of a coverage search.
pub fn trial_seed(seed: u64, trial: u32) -> u64 {
    derive_seed(seed, tags::TRIAL ^ trial as u64)
}

/// One simulate-and-decode trial at the given error rate and coverage.
/// Decoding stops at the first failed block; `blocks_failed` counts the
/// skipped blocks too.
pub fn run_trial(pool: &Pool, cfg: &RunConfig, grouping: &Grouping, error_rate: f64, coverage: u32, trial: u32) -> Result<TrialOutcome> {
    let channel = ChannelParams {
        error_rate,
        coverage: coverage as f64,
        seed: trial_seed(cfg.seed, trial),
        ..cfg.channel.clone()
    };
    let reads = pool.sample(&channel)?;
    let mut cfg = cfg.clone();
    cfg.decode.stop_on_failure = true;
    let out = pool.decode(&reads, &cfg, grouping, None)?;
    let recovered = out.report.crc_match && out.report.blocks_failed == 0;
    Ok(TrialOutcome { recovered, blocks_failed: out.report.blocks_failed })
}
