//! Synthesis, amplification and sequencing channel.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layout::{OligoRecord, PoolManifest};
use crate::prng::{derive_seed, stream_rng, tags, SplitMix64};
use crate::seq::{reverse_complement, BASES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorMix {
    pub sub: f64,
    pub ins: f64,
    pub del: f64,
}

impl Default for ErrorMix {
    fn default() -> Self {
        ErrorMix { sub: 1.0, ins: 1.0, del: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelParams {
    /// Mean reads per oligo.
    pub coverage: f64,
    /// Mean per-nucleotide error probability.
    pub error_rate: f64,
    pub error_mix: ErrorMix,
    /// Per-read error count sd as a fraction of its mean.
    pub error_sd_factor: f64,
    pub copy_bias_sigma: f64,
    pub improper_binding_rate: f64,
    /// Emit the reverse complement of each read with probability 0.5.
    pub reverse_complement: bool,
    #[serde(with = "crate::prng::hex_u64")]
    pub seed: u64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams {
            coverage: 10.0,
            error_rate: 0.01,
            error_mix: ErrorMix::default(),
            error_sd_factor: 0.5,
            copy_bias_sigma: 0.0,
            improper_binding_rate: 0.0,
            reverse_complement: false,
            seed: 0,
        }
    }
}

/// Copy-bias sigma that drops about 8% of oligos at 4x coverage.
pub const DROPOUT_SIGMA_4X: f64 = 1.07;

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(what.to_string()));
        if !(self.coverage > 0.0 && self.coverage.is_finite()) {
            return bad("coverage must be positive");
        }
        if !(0.0..=1.0).contains(&self.error_rate) {
            return bad("error_rate must be in [0, 1]");
        }
        if !(0.0..1.0).contains(&self.improper_binding_rate) {
            return bad("improper_binding_rate must be in [0, 1)");
        }
        let m = &self.error_mix;
        if m.sub < 0.0 || m.ins < 0.0 || m.del < 0.0 || m.sub + m.ins + m.del <= 0.0 {
            return bad("error_mix weights must be nonnegative with a positive sum");
        }
        if self.copy_bias_sigma < 0.0 || self.error_sd_factor < 0.0 {
            return bad("copy_bias_sigma and error_sd_factor must be nonnegative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EditKind {
    Sub(u8),
    Ins(u8),
    Del,
}

/// An edit at a position of the original sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edit {
    pub pos: usize,
    pub kind: EditKind,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EditCounts {
    pub sub: u32,
    pub ins: u32,
    pub del: u32,
}

impl EditCounts {
    pub fn total(&self) -> u32 {
        self.sub + self.ins + self.del
    }
}

/// Applies edits in ascending position order. An insertion at `pos` goes
/// before the original base `pos`; positions past the end append.
pub fn apply_edits(seq: &[u8], edits: &[Edit]) -> (Vec<u8>, EditCounts) {
    let mut edits = edits.to_vec();
    edits.sort_by_key(|e| e.pos);
    let mut out = Vec::with_capacity(seq.len() + edits.len());
    let mut counts = EditCounts::default();
    let mut next = 0;
    let mut consumed = vec![false; seq.len()];
    for e in &edits {
        let pos = e.pos.min(seq.len());
        if pos > next {
            out.extend_from_slice(&seq[next..pos]);
            next = pos;
        }
        match e.kind {
            EditKind::Ins(b) => {
                out.push(b);
                counts.ins += 1;
            }
            // a base already removed or replaced is not edited twice
            EditKind::Sub(_) | EditKind::Del if pos >= seq.len() || consumed[pos] => {}
            EditKind::Sub(b) => {
                out.push(b);
                consumed[pos] = true;
                next = pos + 1;
                counts.sub += 1;
            }
            EditKind::Del => {
                consumed[pos] = true;
                next = pos + 1;
                counts.del += 1;
            }
        }
    }
    out.extend_from_slice(&seq[next.min(seq.len())..]);
    (out, counts)
}

/// Draws the per-read edits for `seq`.
pub fn draw_edits(len: usize, params: &ChannelParams, rng: &mut ChaCha8Rng, seq: &[u8]) -> Vec<Edit> {
    let mean = params.error_rate * len as f64;
    if mean <= 0.0 {
        return Vec::new();
    }
    let sd = params.error_sd_factor * mean;
    let x = if sd > 0.0 { Normal::new(mean, sd).expect("finite sd").sample(rng) } else { mean };
    let count = x.max(0.0).round() as usize;
    let m = &params.error_mix;
    let total = m.sub + m.ins + m.del;
    let mut edits: Vec<Edit> = (0..count)
        .map(|_| {
            let pos = rng.random_range(0..len.max(1));
            let t = rng.random::<f64>() * total;
            let kind = if t < m.sub {
                let old = seq.get(pos).copied().unwrap_or(b'A');
                let choices: Vec<u8> = BASES.iter().copied().filter(|&b| b != old).collect();
                EditKind::Sub(choices[rng.random_range(0..3)])
            } else if t < m.sub + m.ins {
                EditKind::Ins(BASES[rng.random_range(0..4)])
            } else {
                EditKind::Del
            };
            Edit { pos, kind }
        })
        .collect();
    edits.sort_by_key(|e| e.pos);
    edits
}

/// Injects substitutions, insertions and deletions at uniform positions.
pub fn inject_errors(seq: &[u8], params: &ChannelParams, rng: &mut ChaCha8Rng) -> (Vec<u8>, EditCounts) {
    let edits = draw_edits(seq.len(), params, rng, seq);
    apply_edits(seq, &edits)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Source {
    pub oe: usize,
    pub ob: usize,
    pub row: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OffTarget {
    /// A read of an oligo from another extent.
    Foreign,
    /// A target-extent read whose primer region was corrupted.
    PrimerCorrupt,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReadRecord {
    pub sequence: Vec<u8>,
    pub source: Option<Source>,
    pub off_target: Option<OffTarget>,
    pub reversed: bool,
    /// Ground-truth edits injected by the simulator.
    pub edits: EditCounts,
}

impl ReadRecord {
    pub fn plain(sequence: Vec<u8>) -> Self {
        ReadRecord { sequence, source: None, off_target: None, reversed: false, edits: EditCounts::default() }
    }
}

fn global_ordinal(manifest: &PoolManifest, o: &OligoRecord) -> u64 {
    (o.ob * manifest.geometry.oligos_per_ob + o.row) as u64
}

/// Per-oligo copy counts `round(coverage * w_i / mean(w))`, `w_i` lognormal.
/// Weight `i` comes from the stream of `ordinals[i]`.
pub fn copy_counts(ordinals: &[u64], params: &ChannelParams) -> Vec<u32> {
    let seed = derive_seed(params.seed, tags::CHANNEL);
    let weights: Vec<f64> = ordinals.par_iter().map(|&o| copy_weight(seed, o, params.copy_bias_sigma).0).collect();
    let mean = weights.iter().sum::<f64>() / weights.len().max(1) as f64;
    weights.iter().map(|w| (params.coverage * w / mean).round() as u32).collect()
}

fn copy_weight(seed: u64, ordinal: u64, sigma: f64) -> (f64, ChaCha8Rng) {
    let mut rng = stream_rng(seed, ordinal);
    let w = if sigma > 0.0 { LogNormal::new(0.0, sigma).expect("sigma > 0").sample(&mut rng) } else { 1.0 };
    (w, rng)
}

fn read_copies(seq: &[u8], copies: u32, params: &ChannelParams, rng: &mut ChaCha8Rng, source: Source) -> Vec<ReadRecord> {
    (0..copies)
        .map(|_| {
            let (mut sequence, edits) = inject_errors(seq, params, rng);
            let reversed = params.reverse_complement && rng.random::<bool>();
            if reversed {
                sequence = reverse_complement(&sequence);
            }
            ReadRecord { sequence, source: Some(source), off_target: None, reversed, edits }
        })
        .collect()
}

fn shuffle<T>(items: &mut [T], seed: u64) {
    let mut g = SplitMix64::new(derive_seed(seed, tags::SHUFFLE));
    for i in (1..items.len()).rev() {
        let j = g.below(i as u64 + 1) as usize;
        items.swap(i, j);
    }
}

fn sample_subset(pool: &[&OligoRecord], manifest: &PoolManifest, params: &ChannelParams) -> Result<Vec<ReadRecord>> {
    let ordinals: Vec<u64> = pool.iter().map(|o| global_ordinal(manifest, o)).collect();
    let counts = copy_counts(&ordinals, params);
    let seed = derive_seed(params.seed, tags::CHANNEL);
    let reads: Vec<Vec<ReadRecord>> = pool
        .par_iter()
        .zip(&ordinals)
        .zip(&counts)
        .map(|((o, &ord), &copies)| {
            let (_, mut rng) = copy_weight(seed, ord, params.copy_bias_sigma);
            let primers = &manifest.extent(o.oe)?.primers;
            let source = Source { oe: o.oe, ob: o.ob, row: o.row };
            Ok(read_copies(&o.full_sequence(primers), copies, params, &mut rng, source))
        })
        .collect::<Result<_>>()?;
    Ok(reads.into_iter().flatten().collect())
}

/// Sequences the whole pool; reads come back in a seeded random order.
pub fn sample_reads(pool: &[OligoRecord], manifest: &PoolManifest, params: &ChannelParams) -> Result<Vec<ReadRecord>> {
    params.validate()?;
    let refs: Vec<&OligoRecord> = pool.iter().collect();
    let mut reads = sample_subset(&refs, manifest, params)?;
    shuffle(&mut reads, params.seed);
    Ok(reads)
}

/// PCR-selects extent `target_oe` and sequences it, with a fraction
/// `improper_binding_rate` of off-target reads.
pub fn amplify_extent(pool: &[OligoRecord], manifest: &PoolManifest, target_oe: usize, params: &ChannelParams) -> Result<Vec<ReadRecord>> {
    params.validate()?;
    let target_primers = &manifest.extent(target_oe)?.primers;
    let target: Vec<&OligoRecord> = pool.iter().filter(|o| o.oe == target_oe).collect();
    let foreign: Vec<&OligoRecord> = pool.iter().filter(|o| o.oe != target_oe).collect();
    let mut reads = sample_subset(&target, manifest, params)?;
    let rate = params.improper_binding_rate;
    let off = (reads.len() as f64 * rate / (1.0 - rate)).round() as usize;
    let n_foreign = if foreign.is_empty() { 0 } else { off / 2 };
    let off_seed = derive_seed(params.seed, tags::OFF_TARGET);
    let extra: Vec<ReadRecord> = (0..off)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(off_seed, i as u64);
            if i < n_foreign {
                let o = foreign[rng.random_range(0..foreign.len())];
                let primers = &manifest.extent(o.oe)?.primers;
                let mut r = read_copies(&o.full_sequence(primers), 1, params, &mut rng, Source { oe: o.oe, ob: o.ob, row: o.row });
                r[0].off_target = Some(OffTarget::Foreign);
                Ok(r.pop().expect("one copy"))
            } else {
                let o = target[rng.random_range(0..target.len())];
                let mut seq = o.full_sequence(target_primers);
                let plen = target_primers.left.len();
                let start = if rng.random::<bool>() { 0 } else { seq.len() - plen };
                for b in &mut seq[start..start + plen] {
                    *b = BASES[rng.random_range(0..4)];
                }
                let mut r = read_copies(&seq, 1, params, &mut rng, Source { oe: o.oe, ob: o.ob, row: o.row });
                r[0].off_target = Some(OffTarget::PrimerCorrupt);
                Ok(r.pop().expect("one copy"))
            }
        })
        .collect::<Result<_>>()?;
    reads.extend(extra);
    shuffle(&mut reads, params.seed ^ target_oe as u64);
    Ok(reads)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(rate: f64) -> ChannelParams {
        ChannelParams { error_rate: rate, ..ChannelParams::default() }
    }

    #[test]
    fn zero_rate_is_identity() {
        let mut rng = stream_rng(1, 0);
        let seq = b"ACGTACGTTGCA".to_vec();
        assert_eq!(inject_errors(&seq, &params(0.0), &mut rng).0, seq);
    }

    #[test]
    fn forced_deletion() {
        let (out, c) = apply_edits(b"GTACACTGATCT", &[Edit { pos: 5, kind: EditKind::Del }]);
        assert_eq!(out, b"GTACATGATCT");
        assert_eq!(c, EditCounts { sub: 0, ins: 0, del: 1 });
    }

    #[test]
    fn edits_apply_left_to_right() {
        let edits = [
            Edit { pos: 0, kind: EditKind::Ins(b'T') },
            Edit { pos: 1, kind: EditKind::Sub(b'G') },
            Edit { pos: 1, kind: EditKind::Del },
            Edit { pos: 4, kind: EditKind::Ins(b'C') },
        ];
        assert_eq!(apply_edits(b"AAAA", &edits).0, b"TAGAAC");
    }

    #[test]
    fn mean_edit_count() {
        let p = params(0.01);
        let seq = vec![b'A'; 200];
        let mut total = 0u64;
        for i in 0..10_000u64 {
            let mut rng = stream_rng(5, i);
            total += draw_edits(seq.len(), &p, &mut rng, &seq).len() as u64;
        }
        let mean = total as f64 / 10_000.0;
        assert!((mean - 2.0).abs() < 0.1, "{mean}");
    }

    #[test]
    fn dropout_calibration() {
        let ordinals: Vec<u64> = (0..44_376).collect();
        let p = ChannelParams { coverage: 4.0, copy_bias_sigma: DROPOUT_SIGMA_4X, seed: 3, ..ChannelParams::default() };
        let counts = copy_counts(&ordinals, &p);
        let dropped = counts.iter().filter(|&&c| c == 0).count() as f64 / counts.len() as f64;
        assert!((dropped - 0.08).abs() < 0.01, "{dropped}");
        let total: u64 = counts.iter().map(|&c| c as u64).sum();
        assert!((total as f64 / (4.0 * 44_376.0) - 1.0).abs() < 0.02);
    }
}
