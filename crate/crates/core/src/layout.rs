//! The write pipeline: blocks → codewords → motifs → oligos.
//!
//! In the columnar layout block `b` occupies column `1 + b % data_columns` of
//! every row of oligo-block `b / data_columns`; column 0 holds the index motif.
//! The row-based layout keeps the same geometry but lays each block's symbols
//! consecutively along the rows.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ecc::{randomize_block, EccCodec, EccConfig};
use crate::error::{Error, Result};
use crate::motif::{MotifConstraints, MotifDictionary};
use crate::primers::PrimerPair;
use crate::seq::bytes_to_bits;

pub const MANIFEST_VERSION: &str = "motifstore-pool/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LayoutMode {
    #[default]
    Columnar,
    RowBased,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LayoutParams {
    pub data_columns_per_oligo: usize,
    pub obs_per_oe: usize,
    pub primer_len: usize,
    pub mode: LayoutMode,
}

impl Default for LayoutParams {
    fn default() -> Self {
        LayoutParams { data_columns_per_oligo: 16, obs_per_oe: 4, primer_len: 20, mode: LayoutMode::Columnar }
    }
}

/// Derived pool dimensions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometry {
    /// Code length and dimension (RS symbols or LDPC bits).
    pub code_n: usize,
    pub code_k: usize,
    pub coded_bits: usize,
    pub blocks_needed: usize,
    /// Blocks actually encoded, including zero padding in the final OB.
    pub block_count: usize,
    pub oligos_per_ob: usize,
    pub columns_per_oligo: usize,
    pub ob_count: usize,
    pub oe_count: usize,
    pub payload_nt_per_oligo: usize,
    pub oligo_len_nt: usize,
    pub total_oligo_count: usize,
}

/// One oligo-extent: a run of consecutive OBs sharing a primer pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtentInfo {
    pub oe: usize,
    pub first_ob: usize,
    pub ob_count: usize,
    /// Byte range of the input held by this extent.
    pub byte_offset: u64,
    pub byte_len: u64,
    pub crc32: u32,
    pub primers: PrimerPair,
}

/// Everything a decoder needs to invert an encoded pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolManifest {
    pub version: String,
    pub input_byte_len: u64,
    pub input_crc32: u32,
    #[serde(with = "crate::prng::hex_u64")]
    pub seed: u64,
    /// Canonical nucleotide order used for ranking.
    pub nucleotide_order: String,
    pub constraints: MotifConstraints,
    pub bits_per_motif: u32,
    pub ecc: EccConfig,
    pub layout: LayoutParams,
    pub geometry: Geometry,
    pub extents: Vec<ExtentInfo>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OligoRecord {
    pub oe: usize,
    /// Global OB index.
    pub ob: usize,
    pub row: usize,
    /// Index motif followed by the data motifs, no primers.
    pub payload: Vec<u8>,
}

impl OligoRecord {
    /// Left primer + payload + right primer.
    pub fn full_sequence(&self, primers: &PrimerPair) -> Vec<u8> {
        let mut s = Vec::with_capacity(primers.left.len() + self.payload.len() + primers.right.len());
        s.extend_from_slice(primers.left.as_bytes());
        s.extend_from_slice(&self.payload);
        s.extend_from_slice(primers.right.as_bytes());
        s
    }
}

/// Number of extents (and so primer pairs) a pool of `input_len` bytes needs.
pub fn extent_count(input_len: u64, params: &LayoutParams, ecc: &EccConfig) -> Result<usize> {
    if params.data_columns_per_oligo == 0 || params.obs_per_oe == 0 {
        return Err(Error::Config("data_columns_per_oligo and obs_per_oe must be at least 1".into()));
    }
    ecc.validate()?;
    let blocks = (input_len * 8).div_ceil(ecc.data_bits as u64) as usize;
    Ok(blocks.div_ceil(params.data_columns_per_oligo).div_ceil(params.obs_per_oe))
}

/// Computes pool geometry for `input_len` bytes and attaches primers, one pair per extent.
///
/// Checksums are left at zero; see [`PoolManifest::record_checksums`].
pub fn plan_layout(
    input_len: u64,
    params: &LayoutParams,
    ecc: &EccConfig,
    dict: &MotifDictionary,
    primers: &[PrimerPair],
    seed: u64,
) -> Result<PoolManifest> {
    if input_len == 0 {
        return Err(Error::EmptyInput);
    }
    if params.data_columns_per_oligo == 0 || params.obs_per_oe == 0 {
        return Err(Error::Config("data_columns_per_oligo and obs_per_oe must be at least 1".into()));
    }
    if ecc.symbol_bits != dict.bits_per_motif() {
        return Err(Error::Config(format!(
            "symbol_bits {} differs from bits_per_motif {}",
            ecc.symbol_bits,
            dict.bits_per_motif()
        )));
    }
    let (code_n, code_k) = ecc.dimensions()?;
    let coded_bits = ecc.coded_bits()?;
    let cols = params.data_columns_per_oligo;
    let input_bits = input_len * 8;
    let blocks_needed = input_bits.div_ceil(ecc.data_bits as u64) as usize;
    let ob_count = blocks_needed.div_ceil(cols);
    let oe_count = ob_count.div_ceil(params.obs_per_oe);
    let oligos_per_ob = coded_bits.div_ceil(dict.bits_per_motif() as usize);
    let index_space = 1u64 << dict.bits_per_motif();
    let ordinals = (oligos_per_ob * params.obs_per_oe.min(ob_count)) as u64;
    if ordinals > index_space {
        return Err(Error::Capacity(format!(
            "an extent needs {ordinals} index values but motifs carry only {index_space}"
        )));
    }
    if primers.len() < oe_count {
        return Err(Error::InsufficientPrimers { need: oe_count, have: primers.len() });
    }
    for (i, p) in primers[..oe_count].iter().enumerate() {
        if p.left.len() != params.primer_len || p.right.len() != params.primer_len {
            return Err(Error::Config(format!("primer pair {i} is not {} nt long", params.primer_len)));
        }
    }
    let columns_per_oligo = cols + 1;
    let payload_nt_per_oligo = columns_per_oligo * dict.motif_len();
    let geometry = Geometry {
        code_n,
        code_k,
        coded_bits,
        blocks_needed,
        block_count: ob_count * cols,
        oligos_per_ob,
        columns_per_oligo,
        ob_count,
        oe_count,
        payload_nt_per_oligo,
        oligo_len_nt: payload_nt_per_oligo + 2 * params.primer_len,
        total_oligo_count: ob_count * oligos_per_ob,
    };
    let bytes_per_block = (ecc.data_bits / 8) as u64;
    let extents = (0..oe_count)
        .map(|oe| {
            let first_ob = oe * params.obs_per_oe;
            let obs = params.obs_per_oe.min(ob_count - first_ob);
            let start = (first_ob * cols) as u64 * bytes_per_block;
            let end = (((first_ob + obs) * cols) as u64 * bytes_per_block).min(input_len);
            ExtentInfo {
                oe,
                first_ob,
                ob_count: obs,
                byte_offset: start,
                byte_len: end.saturating_sub(start),
                crc32: 0,
                primers: primers[oe].clone(),
            }
        })
        .collect();
    let mut ecc = ecc.clone();
    ecc.field_poly = ecc.resolved_field_poly();
    Ok(PoolManifest {
        version: MANIFEST_VERSION.to_string(),
        input_byte_len: input_len,
        input_crc32: 0,
        seed,
        nucleotide_order: "ACGT".to_string(),
        constraints: dict.constraints().clone(),
        bits_per_motif: dict.bits_per_motif(),
        ecc,
        layout: params.clone(),
        geometry,
        extents,
    })
}

impl PoolManifest {
    pub fn record_checksums(&mut self, input: &[u8]) -> Result<()> {
        if input.len() as u64 != self.input_byte_len {
            return Err(Error::Length { expected: self.input_byte_len as usize, actual: input.len() });
        }
        self.input_crc32 = crc32fast::hash(input);
        for e in &mut self.extents {
            let start = e.byte_offset as usize;
            e.crc32 = crc32fast::hash(&input[start..start + e.byte_len as usize]);
        }
        Ok(())
    }

    pub fn dictionary(&self) -> Result<MotifDictionary> {
        MotifDictionary::new(self.constraints.clone(), self.bits_per_motif)
    }

    pub fn codec(&self) -> Result<EccCodec> {
        EccCodec::new(&self.ecc)
    }

    pub fn extent(&self, oe: usize) -> Result<&ExtentInfo> {
        self.extents.get(oe).ok_or(Error::UnknownExtent(oe))
    }

    /// Extent holding global OB `ob`.
    pub fn extent_of_ob(&self, ob: usize) -> usize {
        ob / self.layout.obs_per_oe
    }

    /// Index ordinal of `(ob, row)` within its extent.
    pub fn ordinal(&self, ob: usize, row: usize) -> usize {
        (ob % self.layout.obs_per_oe) * self.geometry.oligos_per_ob + row
    }

    /// Global block indices stored in OB `ob`.
    pub fn blocks_of_ob(&self, ob: usize) -> std::ops::Range<usize> {
        let cols = self.layout.data_columns_per_oligo;
        ob * cols..(ob + 1) * cols
    }

    /// (row, data column) holding symbol `s` of the `local`-th block of an OB.
    pub fn symbol_cell(&self, local: usize, s: usize) -> (usize, usize) {
        let cols = self.layout.data_columns_per_oligo;
        match self.layout.mode {
            LayoutMode::Columnar => (s, local),
            LayoutMode::RowBased => {
                let linear = local * self.ecc.symbols_per_block().unwrap_or(0) + s;
                (linear / cols, linear % cols)
            }
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Manifest(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let m: PoolManifest = toml::from_str(text).map_err(|e| Error::Manifest(e.to_string()))?;
        if m.version != MANIFEST_VERSION {
            return Err(Error::Manifest(format!("unsupported manifest version {:?}", m.version)));
        }
        Ok(m)
    }

    /// Payload bits of global block `b` (zero-padded past the end of the input).
    pub fn block_bits(&self, input: &[u8], b: usize) -> Vec<bool> {
        let bytes_per_block = self.ecc.data_bits / 8;
        let start = (b * bytes_per_block).min(input.len());
        let end = ((b + 1) * bytes_per_block).min(input.len());
        let mut bits = bytes_to_bits(&input[start..end]);
        bits.resize(self.ecc.data_bits, false);
        bits
    }
}

/// Randomizes and encodes every block, returning one motif per codeword symbol.
fn encode_blocks(input: &[u8], manifest: &PoolManifest, dict: &MotifDictionary, codec: &EccCodec) -> Result<Vec<Vec<Vec<u8>>>> {
    if input.len() as u64 != manifest.input_byte_len {
        return Err(Error::Length { expected: manifest.input_byte_len as usize, actual: input.len() });
    }
    (0..manifest.geometry.block_count)
        .into_par_iter()
        .map(|b| {
            let bits = randomize_block(&manifest.block_bits(input, b), b as u64, manifest.seed);
            let symbols = codec.encode(&bits)?;
            symbols.values.iter().map(|&v| dict.unrank(v as u64)).collect()
        })
        .collect()
}

/// Encodes `input` into oligos, in (ob, row) order.
pub fn encode_pool(input: &[u8], manifest: &PoolManifest, dict: &MotifDictionary, codec: &EccCodec) -> Result<Vec<OligoRecord>> {
    let g = &manifest.geometry;
    let blocks = encode_blocks(input, manifest, dict, codec)?;
    let cols = manifest.layout.data_columns_per_oligo;
    let per_block = codec.symbols_per_block();
    let zero = dict.unrank(0)?;
    let mut out = Vec::with_capacity(g.total_oligo_count);
    for ob in 0..g.ob_count {
        let mut rows: Vec<Vec<Vec<u8>>> = (0..g.oligos_per_ob).map(|_| vec![zero.clone(); cols]).collect();
        for (local, b) in manifest.blocks_of_ob(ob).enumerate() {
            for s in 0..per_block {
                let (row, col) = manifest.symbol_cell(local, s);
                rows[row][col] = blocks[b][s].clone();
            }
        }
        for (row, motifs) in rows.into_iter().enumerate() {
            let mut payload = dict.unrank(manifest.ordinal(ob, row) as u64)?;
            motifs.iter().for_each(|m| payload.extend_from_slice(m));
            out.push(OligoRecord { oe: manifest.extent_of_ob(ob), ob, row, payload });
        }
    }
    Ok(out)
}

/// Row-based baseline: requires a manifest planned with [`LayoutMode::RowBased`].
pub fn encode_pool_rowwise(input: &[u8], manifest: &PoolManifest, dict: &MotifDictionary, codec: &EccCodec) -> Result<Vec<OligoRecord>> {
    if manifest.layout.mode != LayoutMode::RowBased {
        return Err(Error::Manifest("manifest is not row-based".into()));
    }
    encode_pool(input, manifest, dict, codec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ecc::Scheme;
    use crate::primers::generate_primers;

    fn dict() -> MotifDictionary {
        MotifDictionary::new(MotifConstraints::default(), 12).unwrap()
    }

    fn tiny_ecc() -> EccConfig {
        // k = 2 symbols, n = 4 symbols: four oligos per OB
        EccConfig { scheme: Scheme::Rs, data_bits: 24, redundancy: 0.9, ..EccConfig::default() }
    }

    fn tiny(mode: LayoutMode, input: &[u8], cols: usize, obs_per_oe: usize) -> (PoolManifest, Vec<OligoRecord>) {
        let params = LayoutParams { data_columns_per_oligo: cols, obs_per_oe, primer_len: 20, mode };
        let primers = generate_primers(8, 20, 1).unwrap();
        let d = dict();
        let mut m = plan_layout(input.len() as u64, &params, &tiny_ecc(), &d, &primers, 42).unwrap();
        m.record_checksums(input).unwrap();
        let pool = encode_pool(input, &m, &d, &m.codec().unwrap()).unwrap();
        (m, pool)
    }

    #[test]
    fn oligos_per_ob_from_coded_bits() {
        let ecc = EccConfig { scheme: Scheme::Ldpc, data_bits: 160, redundancy: 0.5, symbol_bits: 30, ..EccConfig::default() };
        assert_eq!(ecc.coded_bits().unwrap(), 240);
        assert_eq!(ecc.symbols_per_block().unwrap(), 8);
    }

    #[test]
    fn single_block_single_ob() {
        let (m, pool) = tiny(LayoutMode::Columnar, &[7, 8, 9], 1, 1);
        assert_eq!((m.geometry.oe_count, m.geometry.ob_count), (1, 1));
        assert_eq!(pool.len(), 4);
    }

    #[test]
    fn desk_geometry() {
        let d = dict();
        let primers = generate_primers(13, 20, 0).unwrap();
        let m = plan_layout(1 << 20, &LayoutParams::default(), &EccConfig::default(), &d, &primers, 0).unwrap();
        let g = &m.geometry;
        assert_eq!((g.code_n, g.code_k), (1000, 900));
        assert_eq!(g.blocks_needed, 777);
        assert_eq!(g.ob_count, 49);
        assert_eq!(g.oe_count, 13);
        assert_eq!(g.total_oligo_count, 49_000);
        assert_eq!(g.payload_nt_per_oligo, 17 * 8);
        assert_eq!(m.extents.iter().map(|e| e.byte_len).sum::<u64>(), 1 << 20);
        assert!(matches!(
            plan_layout(1 << 20, &LayoutParams::default(), &EccConfig::default(), &d, &primers[..12], 0),
            Err(Error::InsufficientPrimers { need: 13, have: 12 })
        ));
    }

    #[test]
    fn index_space_is_checked() {
        let d = dict();
        let primers = generate_primers(1, 20, 0).unwrap();
        let params = LayoutParams { obs_per_oe: 5, ..LayoutParams::default() };
        let r = plan_layout(1 << 20, &params, &EccConfig::default(), &d, &primers, 0);
        assert!(matches!(r, Err(Error::Capacity(_))));
    }

    #[test]
    fn index_motifs_count_within_extent() {
        let input = [1u8, 2, 3, 4, 5, 6];
        let (m, pool) = tiny(LayoutMode::Columnar, &input, 1, 2);
        assert_eq!(m.geometry.ob_count, 2);
        let d = dict();
        let ordinals: Vec<u64> = pool.iter().map(|o| d.rank(&o.payload[..8]).unwrap().unwrap()).collect();
        assert_eq!(ordinals, (0..8).collect::<Vec<u64>>());
        for o in &pool {
            for motif in o.payload.chunks(8) {
                assert!(d.constraints().is_valid(motif));
            }
        }
    }

    #[test]
    fn row_based_has_same_oligo_count() {
        let input: Vec<u8> = (0..40).collect();
        let (mc, pc) = tiny(LayoutMode::Columnar, &input, 3, 2);
        let (mr, pr) = tiny(LayoutMode::RowBased, &input, 3, 2);
        assert_eq!(mc.geometry, mr.geometry);
        assert_eq!(pc.len(), pr.len());
        assert_ne!(pc, pr);
    }

    #[test]
    fn erasure_locality() {
        // n = 4 symbols, 2 columns: a row-based oligo holds 2 symbols of one block
        let input: Vec<u8> = (0..12).collect();
        for (mode, expect) in [(LayoutMode::Columnar, vec![1, 1]), (LayoutMode::RowBased, vec![2])] {
            let (m, _) = tiny(mode, &input, 2, 1);
            let mut hits = std::collections::BTreeMap::new();
            for local in 0..2 {
                for s in 0..4 {
                    if m.symbol_cell(local, s).0 == 1 {
                        *hits.entry(local).or_insert(0) += 1;
                    }
                }
            }
            assert_eq!(hits.values().copied().collect::<Vec<_>>(), expect, "{mode:?}");
        }
    }

    #[test]
    fn manifest_round_trips_through_toml() {
        let (m, _) = tiny(LayoutMode::Columnar, b"hello world", 2, 1);
        let text = m.to_toml().unwrap();
        assert_eq!(PoolManifest::from_toml(&text).unwrap(), m);
        assert!(text.contains("field_poly = 4179"));
        let mut m2 = m.clone();
        m2.seed = u64::MAX;
        assert_eq!(PoolManifest::from_toml(&m2.to_toml().unwrap()).unwrap().seed, u64::MAX);
    }

    #[test]
    fn deterministic_encoding() {
        let input: Vec<u8> = (0..50).map(|i| i * 3).collect();
        assert_eq!(tiny(LayoutMode::Columnar, &input, 2, 2).1, tiny(LayoutMode::Columnar, &input, 2, 2).1);
    }
}
