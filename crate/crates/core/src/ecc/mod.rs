//! Block randomization and error-control coding.
//!
//! A block of `data_bits` payload bits is XOR-randomized, encoded into a
//! systematic codeword and split into `symbol_bits`-wide symbols, one per motif.

pub mod gf;
pub mod ldpc;
pub mod rs;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prng::{splitmix64_next, GOLDEN_GAMMA};
use crate::seq::{bits_to_symbols, symbols_to_bits};
use gf::GaloisField;
use ldpc::LdpcCode;
use rs::ReedSolomon;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Rs,
    Ldpc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LdpcParams {
    pub var_degree: usize,
    pub max_iterations: usize,
    /// Parity-check matrix construction seed.
    #[serde(with = "crate::prng::hex_u64")]
    pub seed: u64,
}

impl Default for LdpcParams {
    fn default() -> Self {
        LdpcParams { var_degree: 3, max_iterations: 60, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EccConfig {
    pub scheme: Scheme,
    pub data_bits: usize,
    /// Parity overhead relative to the data: `parity = ceil(k * redundancy)`.
    pub redundancy: f64,
    /// Bits per code symbol; equal to the motif width.
    pub symbol_bits: u32,
    /// RS field polynomial; `None` selects the built-in primitive polynomial.
    pub field_poly: Option<u32>,
    pub ldpc: LdpcParams,
}

impl Default for EccConfig {
    /// RS(1000, 900) over GF(2^12).
    fn default() -> Self {
        EccConfig {
            scheme: Scheme::Rs,
            data_bits: 900 * 12,
            redundancy: 1.0 / 9.0,
            symbol_bits: 12,
            field_poly: None,
            ldpc: LdpcParams::default(),
        }
    }
}

impl EccConfig {
    fn parity_for(&self, k: usize) -> usize {
        (k as f64 * self.redundancy - 1e-9).ceil().max(1.0) as usize
    }

    /// Code length and dimension in code units (RS symbols or LDPC bits).
    pub fn dimensions(&self) -> Result<(usize, usize)> {
        self.validate()?;
        let sb = self.symbol_bits as usize;
        Ok(match self.scheme {
            Scheme::Rs => {
                let k = self.data_bits / sb;
                (k + self.parity_for(k), k)
            }
            Scheme::Ldpc => {
                let k = self.data_bits;
                ((k + self.parity_for(k)).next_multiple_of(sb), k)
            }
        })
    }

    pub fn coded_bits(&self) -> Result<usize> {
        let (n, _) = self.dimensions()?;
        Ok(match self.scheme {
            Scheme::Rs => n * self.symbol_bits as usize,
            Scheme::Ldpc => n,
        })
    }

    /// Symbols (motifs) per coded block.
    pub fn symbols_per_block(&self) -> Result<usize> {
        Ok(self.coded_bits()?.div_ceil(self.symbol_bits as usize))
    }

    pub fn resolved_field_poly(&self) -> Option<u32> {
        match self.scheme {
            Scheme::Rs => self.field_poly.or_else(|| gf::default_primitive_poly(self.symbol_bits)),
            Scheme::Ldpc => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.redundancy > 0.0 && self.redundancy < 1.0) {
            return Err(Error::Config(format!("redundancy {} must be in (0, 1)", self.redundancy)));
        }
        if self.data_bits == 0 || self.data_bits % 8 != 0 {
            return Err(Error::Config(format!("data_bits {} must be a positive multiple of 8", self.data_bits)));
        }
        match self.scheme {
            Scheme::Rs => {
                if !(2..=16).contains(&self.symbol_bits) {
                    return Err(Error::Config(format!("RS symbol_bits {} outside 2..=16", self.symbol_bits)));
                }
                if self.data_bits % self.symbol_bits as usize != 0 {
                    return Err(Error::Config(format!(
                        "data_bits {} not divisible by symbol_bits {}",
                        self.data_bits, self.symbol_bits
                    )));
                }
                let k = self.data_bits / self.symbol_bits as usize;
                let n = k + self.parity_for(k);
                if n >= 1 << self.symbol_bits {
                    return Err(Error::Config(format!(
                        "RS length {n} exceeds GF(2^{}) limit {}",
                        self.symbol_bits,
                        (1u32 << self.symbol_bits) - 1
                    )));
                }
            }
            Scheme::Ldpc => {
                if !(1..=32).contains(&self.symbol_bits) {
                    return Err(Error::Config(format!("symbol_bits {} outside 1..=32", self.symbol_bits)));
                }
                if self.ldpc.max_iterations == 0 {
                    return Err(Error::Config("LDPC max_iterations must be positive".into()));
                }
            }
        }
        Ok(())
    }
}

/// Decoder input: one value per symbol plus erasure flags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolVector {
    pub values: Vec<u32>,
    pub erasures: Vec<bool>,
}

impl SymbolVector {
    pub fn new(values: Vec<u32>) -> Self {
        let erasures = vec![false; values.len()];
        SymbolVector { values, erasures }
    }

    /// All-erased vector of `len` symbols.
    pub fn erased(len: usize) -> Self {
        SymbolVector { values: vec![0; len], erasures: vec![true; len] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn erase(&mut self, i: usize) {
        self.values[i] = 0;
        self.erasures[i] = true;
    }

    pub fn erasure_count(&self) -> usize {
        self.erasures.iter().filter(|&&e| e).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodedBlock {
    pub data: Vec<bool>,
    /// Symbols changed by the decoder (RS), or bits (LDPC).
    pub corrected: usize,
}

#[derive(Debug, Clone)]
enum Inner {
    Rs(ReedSolomon),
    Ldpc(LdpcCode),
}

/// A ready-to-use encoder/decoder for one [`EccConfig`]; cheap to share across threads.
#[derive(Debug, Clone)]
pub struct EccCodec {
    config: EccConfig,
    inner: Inner,
    symbols: usize,
}

impl EccCodec {
    pub fn new(config: &EccConfig) -> Result<Self> {
        let (n, k) = config.dimensions()?;
        let inner = match config.scheme {
            Scheme::Rs => {
                let poly = config.resolved_field_poly().expect("validated symbol width");
                Inner::Rs(ReedSolomon::new(GaloisField::new(config.symbol_bits, poly)?, n, k)?)
            }
            Scheme::Ldpc => Inner::Ldpc(LdpcCode::new(n, k, config.ldpc.var_degree, config.ldpc.seed)?),
        };
        Ok(EccCodec { config: config.clone(), inner, symbols: config.symbols_per_block()? })
    }

    pub fn config(&self) -> &EccConfig {
        &self.config
    }

    pub fn data_bits(&self) -> usize {
        self.config.data_bits
    }

    pub fn symbols_per_block(&self) -> usize {
        self.symbols
    }

    pub fn symbol_bits(&self) -> u32 {
        self.config.symbol_bits
    }

    pub fn encode(&self, data: &[bool]) -> Result<SymbolVector> {
        if data.len() != self.config.data_bits {
            return Err(Error::Length { expected: self.config.data_bits, actual: data.len() });
        }
        let sb = self.config.symbol_bits as usize;
        let values = match &self.inner {
            Inner::Rs(rs) => {
                let syms: Vec<u16> = bits_to_symbols(data, sb).into_iter().map(|s| s as u16).collect();
                rs.encode(&syms)?.into_iter().map(u32::from).collect()
            }
            Inner::Ldpc(code) => bits_to_symbols(&code.encode(data)?, sb),
        };
        Ok(SymbolVector::new(values))
    }

    /// Returns `None` when the block cannot be decoded.
    pub fn decode(&self, received: &SymbolVector) -> Result<Option<DecodedBlock>> {
        if received.values.len() != self.symbols || received.erasures.len() != self.symbols {
            return Err(Error::Length { expected: self.symbols, actual: received.values.len() });
        }
        let sb = self.config.symbol_bits as usize;
        let limit = 1u64 << sb;
        if let Some(&v) = received.values.iter().find(|&&v| v as u64 >= limit) {
            return Err(Error::OutOfRange { value: v as u64, limit });
        }
        match &self.inner {
            Inner::Rs(rs) => {
                let word: Vec<u16> = received.values.iter().map(|&v| v as u16).collect();
                let erasures: Vec<usize> = (0..self.symbols).filter(|&i| received.erasures[i]).collect();
                Ok(rs.decode(&word, &erasures)?.map(|c| DecodedBlock {
                    data: symbols_to_bits(&c.data.iter().map(|&s| s as u32).collect::<Vec<_>>(), sb),
                    corrected: c.corrected,
                }))
            }
            Inner::Ldpc(code) => {
                let bits = symbols_to_bits(&received.values, sb);
                let erased: Vec<bool> = received.erasures.iter().flat_map(|&e| std::iter::repeat(e).take(sb)).collect();
                let out = code.decode(&bits[..code.n()], &erased[..code.n()], self.config.ldpc.max_iterations)?;
                Ok(out.map(|d| {
                    let corrected = bits.iter().zip(&code.encode(&d.data).expect("k bits")).filter(|(a, b)| a != b).count();
                    DecodedBlock { data: d.data, corrected }
                }))
            }
        }
    }
}

/// XORs `bits` with the keystream of block `block_index`; applying it twice is the identity.
pub fn randomize_block(bits: &[bool], block_index: u64, seed: u64) -> Vec<bool> {
    let mut state = seed ^ block_index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA);
    let mut out = Vec::with_capacity(bits.len());
    for chunk in bits.chunks(64) {
        let (next, word) = splitmix64_next(state);
        state = next;
        out.extend(chunk.iter().enumerate().map(|(i, &b)| b ^ (word >> (63 - i) & 1 == 1)));
    }
    out
}
