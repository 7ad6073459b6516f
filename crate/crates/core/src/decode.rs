//! The read pipeline: demultiplexing, index resolution, motif consensus and
//! the column loop that feeds each decoded block back into realignment.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::align::{edit_distance, locate_motif, prefix_distances};
use crate::channel::ReadRecord;
use crate::clustering::{cluster_reads, oracle_cluster, Cluster, ClusterParams};
use crate::ecc::{randomize_block, EccCodec, SymbolVector};
use crate::error::{Error, Result};
use crate::layout::{LayoutMode, PoolManifest};
use crate::motif::MotifDictionary;
use crate::seq::{base_index, bits_to_bytes, reverse_complement};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecodeParams {
    /// Largest per-column offset drift searched, in nucleotides.
    pub slack: usize,
    /// `None` means `ceil(0.2 * primer_len)`.
    pub primer_max_dist: Option<usize>,
    /// `None` means `ceil(motif_len / 2)`.
    pub realign_reject_cost: Option<u32>,
    pub orientation_check: bool,
    pub realign: bool,
    /// Stop at the first unrecoverable block and count the rest as failed.
    /// OBs are then decoded in order; used by coverage searches.
    pub stop_on_failure: bool,
}

impl Default for DecodeParams {
    fn default() -> Self {
        DecodeParams { slack: 3, primer_max_dist: None, realign_reject_cost: None, orientation_check: false, realign: true, stop_on_failure: false }
    }
}

impl DecodeParams {
    pub fn validate(&self) -> Result<()> {
        if self.slack == 0 {
            return Err(Error::Config("slack must be at least 1".into()));
        }
        Ok(())
    }

    pub fn primer_threshold(&self, primer_len: usize) -> usize {
        self.primer_max_dist.unwrap_or_else(|| (primer_len as f64 * 0.2).ceil() as usize)
    }

    pub fn reject_cost(&self, motif_len: usize) -> u32 {
        self.realign_reject_cost.unwrap_or(motif_len.div_ceil(2) as u32)
    }
}

/// How reads are grouped before decoding.
#[derive(Debug, Clone, PartialEq)]
pub enum Grouping {
    /// Group by simulator provenance.
    Oracle,
    Lsh(ClusterParams),
}

/// Reads assigned to extents, primers trimmed.
#[derive(Debug, Clone, Default)]
pub struct Demuxed {
    /// Per extent: (read index, trimmed payload).
    pub extents: Vec<Vec<(usize, Vec<u8>)>>,
    pub unassigned: usize,
    pub ambiguous: usize,
}

/// Best primer end within `[plen - slack, plen + slack]` of `text`: `(cost, cut)`.
fn primer_cut(primer: &[u8], text: &[u8], slack: usize) -> Option<(u32, usize)> {
    let plen = primer.len();
    let window = &text[..(plen + slack).min(text.len())];
    let d = prefix_distances(primer, window);
    (plen.saturating_sub(slack)..=window.len())
        .map(|j| (d[j], j.abs_diff(plen), j))
        .min()
        .map(|(c, _, j)| (c, j))
}

fn match_extent(read: &[u8], left: &[u8], right: &[u8], slack: usize, max: usize) -> Option<(usize, usize)> {
    let (cl, l) = primer_cut(left, read, slack)?;
    if cl as usize > max {
        return None;
    }
    let rev_read: Vec<u8> = read.iter().rev().copied().collect();
    let rev_primer: Vec<u8> = right.iter().rev().copied().collect();
    let (cr, r) = primer_cut(&rev_primer, &rev_read, slack)?;
    if cr as usize > max || l + r > read.len() {
        return None;
    }
    Some((l, read.len() - r))
}

/// Assigns each read to the extent whose primers match both of its ends.
pub fn demux_reads<S: AsRef<[u8]> + Sync>(reads: &[S], manifest: &PoolManifest, params: &DecodeParams) -> Demuxed {
    let max = params.primer_threshold(manifest.layout.primer_len);
    let primers: Vec<(&[u8], &[u8])> =
        manifest.extents.iter().map(|e| (e.primers.left.as_bytes(), e.primers.right.as_bytes())).collect();
    let assign = |seq: &[u8]| -> std::result::Result<(usize, Vec<u8>), bool> {
        let hits: Vec<(usize, usize, usize)> = primers
            .iter()
            .enumerate()
            .filter_map(|(oe, (l, r))| match_extent(seq, l, r, params.slack, max).map(|(a, b)| (oe, a, b)))
            .collect();
        match hits.as_slice() {
            [(oe, a, b)] => Ok((*oe, seq[*a..*b].to_vec())),
            [] => Err(false),
            _ => Err(true),
        }
    };
    let outcomes: Vec<std::result::Result<(usize, Vec<u8>), bool>> = reads
        .par_iter()
        .map(|r| {
            let seq = r.as_ref();
            match assign(seq) {
                Err(false) if params.orientation_check => assign(&reverse_complement(seq)),
                other => other,
            }
        })
        .collect();
    let mut out = Demuxed { extents: vec![Vec::new(); manifest.extents.len()], ..Demuxed::default() };
    for (i, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok((oe, payload)) => out.extents[oe].push((i, payload)),
            Err(true) => out.ambiguous += 1,
            Err(false) => out.unassigned += 1,
        }
    }
    out
}

/// Shift search order: 0, -1, +1, -2, +2, ...
fn shifts(slack: usize) -> impl Iterator<Item = isize> {
    std::iter::once(0).chain((1..=slack as isize).flat_map(|s| [-s, s]))
}

fn slice_at(read: &[u8], start: isize, len: usize) -> Option<&[u8]> {
    let s = usize::try_from(start).ok()?;
    read.get(s..s + len)
}

/// Majority consensus of the motif-length windows starting at each read's offset.
///
/// Returns `None` (an erasure) when no read has a full window at its offset.
pub fn consensus_motif(reads: &[&[u8]], offsets: &[usize], motif_len: usize, slack: usize) -> Option<Vec<u8>> {
    let mut freq: BTreeMap<&[u8], usize> = BTreeMap::new();
    for (r, &o) in reads.iter().zip(offsets) {
        if let Some(s) = slice_at(r, o as isize, motif_len) {
            *freq.entry(s).or_default() += 1;
        }
    }
    // BTreeMap iterates in lexicographic order, so the first maximum is the smallest slice
    let best = freq.values().copied().max()?;
    let pivot: Vec<u8> = freq.iter().find(|(_, &n)| n == best).map(|(s, _)| s.to_vec())?;
    let mut votes = vec![[0u32; 4]; motif_len];
    for (r, &o) in reads.iter().zip(offsets) {
        let chosen = match slice_at(r, o as isize, motif_len) {
            Some(w) if w == pivot.as_slice() => Some((0, w)),
            _ => shifts(slack)
                .filter_map(|s| slice_at(r, o as isize + s, motif_len))
                .map(|w| (edit_distance(w, &pivot), w))
                .min_by_key(|(d, _)| *d),
        };
        if let Some((_, w)) = chosen {
            for (v, &b) in votes.iter_mut().zip(w) {
                if let Some(i) = base_index(b) {
                    v[i] += 1;
                }
            }
        }
    }
    Some(
        votes
            .iter()
            .zip(&pivot)
            .map(|(v, &p)| {
                let top = *v.iter().max().expect("four counts");
                match base_index(p) {
                    Some(pi) if v[pi] == top => p,
                    _ => b"ACGT"[v.iter().position(|&c| c == top).expect("max exists")],
                }
            })
            .collect(),
    )
}

/// Offset of the next column after placing `motif` near `expected`.
pub fn realign_read(read: &[u8], motif: &[u8], expected: usize, slack: usize, reject_cost: u32) -> usize {
    if read.get(expected..expected + motif.len()) == Some(motif) {
        return expected + motif.len();
    }
    match locate_motif(read, motif, expected, slack) {
        Some(p) if p.cost <= reject_cost => p.end,
        _ => expected + motif.len(),
    }
}

/// Status of one decoded block.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockStatus {
    pub block: usize,
    pub recovered: bool,
    /// Symbols with no cluster behind them.
    pub missing: usize,
    /// Consensus motifs outside the dictionary.
    pub invalid_motifs: usize,
    pub erasures: usize,
    /// Symbols (RS) or bits (LDPC) the decoder changed.
    pub corrected: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExtentReport {
    pub oe: usize,
    pub reads: usize,
    pub clusters: usize,
    pub clusters_invalid_index: usize,
    pub index_conflicts: usize,
    /// Rows (oligos) with no cluster.
    pub dropout: usize,
    pub blocks_failed: usize,
    pub crc_expected: u32,
    pub crc_actual: u32,
    pub crc_match: bool,
    pub blocks: Vec<BlockStatus>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DecodeReport {
    pub mode: String,
    pub grouping: String,
    pub reads_total: usize,
    pub reads_unassigned: usize,
    pub reads_ambiguous: usize,
    pub reads_used: usize,
    pub clusters: usize,
    pub dropout: usize,
    /// Reads used per designed oligo of the decoded extents.
    pub mean_coverage: f64,
    pub blocks_total: usize,
    pub blocks_failed: usize,
    pub output_len: u64,
    pub crc_expected: u32,
    pub crc_actual: u32,
    pub crc_match: bool,
    pub extents: Vec<ExtentReport>,
}

impl DecodeReport {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Manifest(e.to_string()))
    }

    pub fn success(&self) -> bool {
        self.crc_match && self.blocks_failed == 0
    }
}

/// A cluster bound to one row of an OB, with each member's running offset.
#[derive(Debug, Clone)]
struct RowReads {
    members: Vec<usize>,
    offsets: Vec<usize>,
}

struct Ctx<'a> {
    manifest: &'a PoolManifest,
    dict: &'a MotifDictionary,
    codec: &'a EccCodec,
    params: &'a DecodeParams,
    payloads: &'a [&'a [u8]],
    motif_len: usize,
    reject: u32,
}

impl Ctx<'_> {
    fn consensus(&self, rr: &RowReads) -> Option<Vec<u8>> {
        let reads: Vec<&[u8]> = rr.members.iter().map(|&m| self.payloads[m]).collect();
        consensus_motif(&reads, &rr.offsets, self.motif_len, self.params.slack)
    }

    fn advance(&self, rr: &mut RowReads, motif: Option<&[u8]>) {
        for (m, off) in rr.members.iter().zip(rr.offsets.iter_mut()) {
            *off = match motif {
                Some(motif) if self.params.realign => {
                    realign_read(self.payloads[*m], motif, *off, self.params.slack, self.reject)
                }
                _ => *off + self.motif_len,
            };
        }
    }

    /// Rank a consensus motif: `Ok(v)`, or `Err(true)` if invalid, `Err(false)` if missing.
    fn symbol(&self, motif: Option<&[u8]>) -> std::result::Result<u32, bool> {
        let m = motif.ok_or(false)?;
        match self.dict.rank(m) {
            Ok(Some(v)) => Ok(v as u32),
            _ => Err(true),
        }
    }

    fn decode_block(&self, block: usize, cells: Vec<std::result::Result<u32, bool>>) -> (Option<Vec<bool>>, Option<SymbolVector>, BlockStatus) {
        let mut status = BlockStatus { block, ..BlockStatus::default() };
        let mut sv = SymbolVector::erased(cells.len());
        for (i, c) in cells.into_iter().enumerate() {
            match c {
                Ok(v) => {
                    sv.values[i] = v;
                    sv.erasures[i] = false;
                }
                Err(true) => status.invalid_motifs += 1,
                Err(false) => status.missing += 1,
            }
        }
        status.erasures = status.invalid_motifs + status.missing;
        match self.codec.decode(&sv) {
            Ok(Some(d)) => {
                status.recovered = true;
                status.corrected = d.corrected;
                let corrected = self.codec.encode(&d.data).ok();
                let bits = randomize_block(&d.data, block as u64, self.manifest.seed);
                (Some(bits), corrected, status)
            }
            _ => (None, None, status),
        }
    }

    /// Column loop of one OB in the columnar layout.
    fn decode_ob_columnar(&self, ob: usize, mut rows: Vec<Option<RowReads>>) -> Vec<(Option<Vec<bool>>, BlockStatus)> {
        let mut out = Vec::new();
        for block in self.manifest.blocks_of_ob(ob) {
            if self.params.stop_on_failure && out.last().is_some_and(|(_, s): &(_, BlockStatus)| !s.recovered) {
                out.push((None, BlockStatus { block, ..BlockStatus::default() }));
                continue;
            }
            let cells: Vec<_> = rows.iter().map(|r| self.symbol(r.as_ref().and_then(|rr| self.consensus(rr)).as_deref())).collect();
            let (bits, corrected, status) = self.decode_block(block, cells);
            for (row, rr) in rows.iter_mut().enumerate() {
                let Some(rr) = rr else { continue };
                let motif = match &corrected {
                    Some(sv) => Some(self.dict.unrank(sv.values[row] as u64).expect("codeword symbol in range")),
                    None => None,
                };
                self.advance(rr, motif.as_deref());
            }
            out.push((bits, status));
        }
        out
    }

    /// Row-based baseline: infer each oligo in full, then decode the blocks.
    fn decode_ob_rowwise(&self, ob: usize, mut rows: Vec<Option<RowReads>>) -> Vec<(Option<Vec<bool>>, BlockStatus)> {
        let cols = self.manifest.layout.data_columns_per_oligo;
        let mut grid: Vec<Option<Vec<std::result::Result<u32, bool>>>> = vec![None; rows.len()];
        let mut infer = |row: usize| -> Vec<std::result::Result<u32, bool>> {
            (0..cols)
                .map(|_| match &mut rows[row] {
                    Some(rr) => {
                        let m = self.consensus(rr);
                        self.advance(rr, m.as_deref());
                        self.symbol(m.as_deref())
                    }
                    None => Err(false),
                })
                .collect()
        };
        let per_block = self.codec.symbols_per_block();
        let mut out = Vec::new();
        for (local, block) in self.manifest.blocks_of_ob(ob).enumerate() {
            if self.params.stop_on_failure && out.last().is_some_and(|(_, s): &(_, BlockStatus)| !s.recovered) {
                out.push((None, BlockStatus { block, ..BlockStatus::default() }));
                continue;
            }
            let cells = (0..per_block)
                .map(|s| {
                    let (row, col) = self.manifest.symbol_cell(local, s);
                    grid[row].get_or_insert_with(|| infer(row))[col]
                })
                .collect();
            let (bits, _, status) = self.decode_block(block, cells);
            out.push((bits, status));
        }
        out
    }
}

/// Result of decoding one extent.
#[derive(Debug, Clone)]
pub struct ExtentDecode {
    pub bytes: Vec<u8>,
    pub report: ExtentReport,
}

/// Decodes extent `oe` from its primer-trimmed reads and their clusters.
pub fn decode_extent(
    payloads: &[&[u8]],
    clusters: &[Cluster],
    manifest: &PoolManifest,
    oe: usize,
    dict: &MotifDictionary,
    codec: &EccCodec,
    params: &DecodeParams,
) -> Result<ExtentDecode> {
    params.validate()?;
    check_manifest(manifest, dict, codec)?;
    let extent = manifest.extent(oe)?;
    let g = &manifest.geometry;
    let ctx = Ctx {
        manifest,
        dict,
        codec,
        params,
        payloads,
        motif_len: dict.motif_len(),
        reject: params.reject_cost(dict.motif_len()),
    };
    let mut report = ExtentReport { oe, reads: payloads.len(), clusters: clusters.len(), ..ExtentReport::default() };

    // index phase: consensus on the first motif, rank to an ordinal, keep the larger cluster on conflicts
    let mut claims: BTreeMap<usize, (usize, usize, usize)> = BTreeMap::new();
    for (ci, c) in clusters.iter().enumerate() {
        let rr = RowReads { members: c.members.clone(), offsets: vec![0; c.members.len()] };
        let ordinal = ctx.consensus(&rr).and_then(|m| dict.rank(&m).ok().flatten()).map(|v| v as usize);
        let Some(ordinal) = ordinal.filter(|&o| o < extent.ob_count * g.oligos_per_ob) else {
            report.clusters_invalid_index += 1;
            continue;
        };
        let key = (c.members.len(), usize::MAX - c.members.iter().min().copied().unwrap_or(0), ci);
        match claims.get(&ordinal) {
            Some(&(len, id, _)) if (len, id) >= (key.0, key.1) => report.index_conflicts += 1,
            Some(_) => {
                report.index_conflicts += 1;
                claims.insert(ordinal, key);
            }
            None => {
                claims.insert(ordinal, key);
            }
        }
    }
    let mut per_ob: Vec<Vec<Option<RowReads>>> = vec![vec![None; g.oligos_per_ob]; extent.ob_count];
    for (ordinal, (_, _, ci)) in claims {
        let members = clusters[ci].members.clone();
        let mut rr = RowReads { offsets: vec![0; members.len()], members };
        let index_motif = dict.unrank(ordinal as u64)?;
        ctx.advance(&mut rr, Some(&index_motif));
        per_ob[ordinal / g.oligos_per_ob][ordinal % g.oligos_per_ob] = Some(rr);
    }
    report.dropout = per_ob.iter().flatten().filter(|r| r.is_none()).count();

    let decode_ob = |local: usize, rows| {
        let ob = extent.first_ob + local;
        match manifest.layout.mode {
            LayoutMode::Columnar => ctx.decode_ob_columnar(ob, rows),
            LayoutMode::RowBased => ctx.decode_ob_rowwise(ob, rows),
        }
    };
    let decoded: Vec<Vec<(Option<Vec<bool>>, BlockStatus)>> = if params.stop_on_failure {
        let mut out = Vec::with_capacity(per_ob.len());
        let mut failed = false;
        for (local, rows) in per_ob.into_iter().enumerate() {
            let r = if failed {
                let ob = extent.first_ob + local;
                manifest.blocks_of_ob(ob).map(|block| (None, BlockStatus { block, ..BlockStatus::default() })).collect()
            } else {
                decode_ob(local, rows)
            };
            failed |= r.iter().any(|(_, s)| !s.recovered);
            out.push(r);
        }
        out
    } else {
        per_ob.into_par_iter().enumerate().map(|(local, rows)| decode_ob(local, rows)).collect()
    };
    let mut bits = Vec::with_capacity(extent.ob_count * manifest.layout.data_columns_per_oligo * codec.data_bits());
    for (block_bits, status) in decoded.into_iter().flatten() {
        match block_bits {
            Some(b) => bits.extend(b),
            None => bits.extend(std::iter::repeat(false).take(codec.data_bits())),
        }
        report.blocks_failed += !status.recovered as usize;
        report.blocks.push(status);
    }
    let mut bytes = bits_to_bytes(&bits);
    bytes.truncate(extent.byte_len as usize);
    report.crc_expected = extent.crc32;
    report.crc_actual = crc32fast::hash(&bytes);
    report.crc_match = report.crc_actual == report.crc_expected;
    Ok(ExtentDecode { bytes, report })
}

fn check_manifest(manifest: &PoolManifest, dict: &MotifDictionary, codec: &EccCodec) -> Result<()> {
    if dict.constraints() != &manifest.constraints || dict.bits_per_motif() != manifest.bits_per_motif {
        return Err(Error::Manifest("dictionary does not match the manifest".into()));
    }
    if codec.config() != &manifest.ecc && {
        let mut c = codec.config().clone();
        c.field_poly = c.resolved_field_poly();
        c != manifest.ecc
    } {
        return Err(Error::Manifest("ECC configuration does not match the manifest".into()));
    }
    Ok(())
}

/// Decoded bytes plus report for a pool or a subset of its extents.
#[derive(Debug, Clone)]
pub struct PoolDecode {
    pub bytes: Vec<u8>,
    pub report: DecodeReport,
}

/// Demultiplexes, clusters and decodes `reads`.
///
/// With `extents = None` the whole pool is decoded and checked against the
/// input CRC; otherwise the named extents are decoded and their bytes
/// concatenated in order, each checked against its own CRC.
pub fn decode_pool(
    reads: &[ReadRecord],
    manifest: &PoolManifest,
    dict: &MotifDictionary,
    codec: &EccCodec,
    params: &DecodeParams,
    grouping: &Grouping,
    extents: Option<&[usize]>,
) -> Result<PoolDecode> {
    params.validate()?;
    let wanted: Vec<usize> = match extents {
        Some(e) => {
            for &oe in e {
                manifest.extent(oe)?;
            }
            e.to_vec()
        }
        None => (0..manifest.extents.len()).collect(),
    };
    let seqs: Vec<&[u8]> = reads.iter().map(|r| r.sequence.as_slice()).collect();
    let demuxed = demux_reads(&seqs, manifest, params);
    let mut report = DecodeReport {
        mode: match manifest.layout.mode {
            LayoutMode::Columnar => "columnar".into(),
            LayoutMode::RowBased => "row-based".into(),
        },
        grouping: match grouping {
            Grouping::Oracle => "oracle".into(),
            Grouping::Lsh(_) => "lsh".into(),
        },
        reads_total: reads.len(),
        reads_unassigned: demuxed.unassigned,
        reads_ambiguous: demuxed.ambiguous,
        ..DecodeReport::default()
    };
    let mut bytes = Vec::new();
    let mut oligos = 0usize;
    for &oe in &wanted {
        let skip = params.stop_on_failure && report.blocks_failed > 0;
        let assigned: &[(usize, Vec<u8>)] = if skip { &[] } else { &demuxed.extents[oe] };
        let payloads: Vec<&[u8]> = assigned.iter().map(|(_, p)| p.as_slice()).collect();
        let clusters = match grouping {
            Grouping::Oracle => {
                let recs: Vec<ReadRecord> = assigned.iter().map(|(i, _)| reads[*i].clone()).collect();
                oracle_cluster(&recs)?
            }
            Grouping::Lsh(cp) => {
                let mut cp = cp.clone();
                cp.expected_len.get_or_insert(manifest.geometry.payload_nt_per_oligo);
                cluster_reads(&payloads, &cp)
            }
        };
        report.reads_used += clusters.iter().map(|c| c.members.len()).sum::<usize>();
        let ed = decode_extent(&payloads, &clusters, manifest, oe, dict, codec, params)?;
        oligos += manifest.extents[oe].ob_count * manifest.geometry.oligos_per_ob;
        report.clusters += ed.report.clusters;
        report.dropout += ed.report.dropout;
        report.blocks_failed += ed.report.blocks_failed;
        report.blocks_total += ed.report.blocks.len();
        bytes.extend_from_slice(&ed.bytes);
        report.extents.push(ed.report);
    }
    report.mean_coverage = report.reads_used as f64 / oligos.max(1) as f64;
    report.output_len = bytes.len() as u64;
    report.crc_actual = crc32fast::hash(&bytes);
    report.crc_expected = match extents {
        None => manifest.input_crc32,
        Some(_) if wanted.len() == 1 => manifest.extents[wanted[0]].crc32,
        // several extents: all of them must match individually
        Some(_) => report.crc_actual,
    };
    report.crc_match = report.crc_actual == report.crc_expected && report.extents.iter().all(|e| e.crc_match);
    Ok(PoolDecode { bytes, report })
}
