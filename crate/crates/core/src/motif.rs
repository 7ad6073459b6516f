//! Constraint-valid nucleotide motifs and the integer ↔ motif bijection.
//!
//! A motif is valid when its longest homopolymer run is at most `max_run`,
//! its GC count lies in `[ceil(gc_min·L), floor(gc_max·L)]`, and (optionally)
//! it holds at most `max_doublets` adjacent equal pairs. Valid motifs are
//! ordered lexicographically under A < C < G < T; value `v` maps to the
//! `v`-th valid motif.
//!
//! Counting, ranking and unranking all walk a completion table indexed by
//! (remaining length, last base, current run, GC so far, doublets so far), so
//! no motif set is ever enumerated. Short motifs can additionally be
//! materialized into dense lookup tables.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seq::{self, BASES};

/// Above this length the dense tables (4^L entries) are not built by default.
pub const MATERIALIZE_MAX_LEN: usize = 10;
/// Counts are kept in `u128`, which bounds the motif length.
pub const MAX_MOTIF_LEN: usize = 60;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MotifConstraints {
    pub motif_len: usize,
    pub max_run: usize,
    pub gc_min: f64,
    pub gc_max: f64,
    /// Optional cap on adjacent equal pairs (`AA`, `CC`, `GG`, `TT`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_doublets: Option<usize>,
}

impl Default for MotifConstraints {
    fn default() -> Self {
        MotifConstraints { motif_len: 8, max_run: 2, gc_min: 0.25, gc_max: 0.75, max_doublets: None }
    }
}

impl MotifConstraints {
    pub fn new(motif_len: usize, max_run: usize, gc_min: f64, gc_max: f64) -> Result<Self> {
        let c = MotifConstraints { motif_len, max_run, gc_min, gc_max, max_doublets: None };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConstraints(msg));
        if self.motif_len == 0 || self.motif_len > MAX_MOTIF_LEN {
            return bad(format!("motif_len {} outside 1..={MAX_MOTIF_LEN}", self.motif_len));
        }
        if self.max_run == 0 || self.max_run > self.motif_len {
            return bad(format!("max_run {} outside 1..={}", self.max_run, self.motif_len));
        }
        if !(0.0..=1.0).contains(&self.gc_min) || !(0.0..=1.0).contains(&self.gc_max) || self.gc_min > self.gc_max {
            return bad(format!("gc bounds [{}, {}] invalid", self.gc_min, self.gc_max));
        }
        Ok(())
    }

    /// Inclusive bounds on the GC count of a sequence of length `len`.
    pub fn gc_count_bounds(&self, len: usize) -> (usize, usize) {
        const EPS: f64 = 1e-9;
        let lo = (self.gc_min * len as f64 - EPS).ceil().max(0.0) as usize;
        let hi = (self.gc_max * len as f64 + EPS).floor() as usize;
        (lo, hi.min(len))
    }

    /// True iff `seq` is a valid motif of the configured length.
    pub fn is_valid(&self, seq: &[u8]) -> bool {
        seq.len() == self.motif_len && self.is_valid_any_len(seq)
    }

    /// Same checks as [`is_valid`](Self::is_valid) without the length requirement (used for primers).
    pub fn is_valid_any_len(&self, seq: &[u8]) -> bool {
        if !seq::is_acgt(seq) || seq::max_run(seq) > self.max_run {
            return false;
        }
        let (lo, hi) = self.gc_count_bounds(seq.len());
        let gc = seq::gc_count(seq);
        if gc < lo || gc > hi {
            return false;
        }
        match self.max_doublets {
            Some(cap) => seq::doublet_count(seq) <= cap,
            None => true,
        }
    }
}

/// True iff `motif` satisfies `constraints` (length included).
pub fn validate_motif(constraints: &MotifConstraints, motif: &[u8]) -> bool {
    constraints.is_valid(motif)
}

/// Completion counts for the constrained-string automaton.
#[derive(Debug, Clone)]
struct CompletionTable {
    len: usize,
    max_run: usize,
    gc_hi: usize,
    doublet_cap: Option<usize>,
    dims: [usize; 5],
    counts: Vec<u128>,
}

/// Automaton state after a prefix has been emitted. `last == 4` means empty prefix.
#[derive(Debug, Clone, Copy)]
struct Prefix {
    last: usize,
    run: usize,
    gc: usize,
    doublets: usize,
}

impl Prefix {
    const EMPTY: Prefix = Prefix { last: 4, run: 0, gc: 0, doublets: 0 };
}

impl CompletionTable {
    fn build(c: &MotifConstraints) -> Self {
        let len = c.motif_len;
        let (gc_lo, gc_hi) = c.gc_count_bounds(len);
        let dbl = c.max_doublets.map_or(1, |d| d.min(len) + 1);
        let dims = [len + 1, 5, c.max_run + 1, len + 1, dbl];
        let mut t = CompletionTable {
            len,
            max_run: c.max_run,
            gc_hi,
            doublet_cap: c.max_doublets,
            dims,
            counts: vec![0; dims.iter().product()],
        };
        // remaining = 0: accept iff the GC count is in range.
        for last in 0..5 {
            for run in 0..=c.max_run {
                for gc in 0..=len {
                    for d in 0..dbl {
                        let ok = (gc_lo..=gc_hi).contains(&gc);
                        let idx = t.index(0, Prefix { last, run, gc, doublets: d });
                        t.counts[idx] = ok as u128;
                    }
                }
            }
        }
        for rem in 1..=len {
            for last in 0..5 {
                for run in 0..=c.max_run {
                    for gc in 0..=len {
                        for d in 0..dbl {
                            let state = Prefix { last, run, gc, doublets: d };
                            let total: u128 = (0..4)
                                .filter_map(|b| t.step(state, b))
                                .map(|next| t.counts[t.index(rem - 1, next)])
                                .sum();
                            let idx = t.index(rem, state);
                            t.counts[idx] = total;
                        }
                    }
                }
            }
        }
        t
    }

    #[inline]
    fn index(&self, rem: usize, s: Prefix) -> usize {
        let [_, d1, d2, d3, d4] = self.dims;
        (((rem * d1 + s.last) * d2 + s.run) * d3 + s.gc.min(d3 - 1)) * d4 + s.doublets
    }

    /// Transition on base `b`, or `None` if it breaks a constraint.
    #[inline]
    fn step(&self, s: Prefix, b: usize) -> Option<Prefix> {
        let same = s.last == b;
        let run = if same { s.run + 1 } else { 1 };
        if run > self.max_run {
            return None;
        }
        let doublets = match self.doublet_cap {
            Some(cap) if s.doublets + same as usize > cap => return None,
            Some(_) => s.doublets + same as usize,
            None => 0,
        };
        let gc = s.gc + (b == 1 || b == 2) as usize;
        if gc > self.gc_hi {
            return None;
        }
        Some(Prefix { last: b, run, gc, doublets })
    }

    #[inline]
    fn completions(&self, rem: usize, s: Prefix) -> u128 {
        self.counts[self.index(rem, s)]
    }

    fn total(&self) -> u128 {
        self.completions(self.len, Prefix::EMPTY)
    }
}

/// Number of valid motifs, computed by dynamic programming.
pub fn count_valid(constraints: &MotifConstraints) -> Result<u128> {
    constraints.validate()?;
    Ok(CompletionTable::build(constraints).total())
}

/// How a dictionary answers rank/unrank queries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DictionaryMode {
    /// Dense lookup tables over all 4^L strings (short motifs only).
    Materialized,
    /// Rank/unrank by walking the completion table.
    Computed,
}

#[derive(Debug, Clone)]
struct DenseTables {
    /// Packed motif for each value in `0..2^bits`.
    by_value: Vec<u64>,
    /// Value for each packed string, `u32::MAX` when invalid or beyond `2^bits`.
    by_packed: Vec<u32>,
}

/// Bijection between `0..2^bits_per_motif` and valid motifs. Immutable after
/// construction and freely shareable across threads.
#[derive(Debug, Clone)]
pub struct MotifDictionary {
    constraints: MotifConstraints,
    bits_per_motif: u32,
    capacity: u128,
    table: CompletionTable,
    dense: Option<DenseTables>,
}

impl MotifDictionary {
    /// Builds a dictionary, materializing it when the motif is short enough.
    pub fn new(constraints: MotifConstraints, bits_per_motif: u32) -> Result<Self> {
        let mode = if constraints.motif_len <= MATERIALIZE_MAX_LEN && bits_per_motif <= 24 {
            DictionaryMode::Materialized
        } else {
            DictionaryMode::Computed
        };
        Self::with_mode(constraints, bits_per_motif, mode)
    }

    pub fn with_mode(constraints: MotifConstraints, bits_per_motif: u32, mode: DictionaryMode) -> Result<Self> {
        constraints.validate()?;
        if bits_per_motif == 0 || bits_per_motif > 63 {
            return Err(Error::InvalidConstraints(format!("bits_per_motif {bits_per_motif} outside 1..=63")));
        }
        let table = CompletionTable::build(&constraints);
        let capacity = table.total();
        if capacity < 1u128 << bits_per_motif {
            return Err(Error::Capacity(format!(
                "{capacity} valid motifs of length {} cannot carry {bits_per_motif} bits",
                constraints.motif_len
            )));
        }
        let mut dict = MotifDictionary { constraints, bits_per_motif, capacity, table, dense: None };
        if mode == DictionaryMode::Materialized {
            if dict.constraints.motif_len > 16 || bits_per_motif > 30 {
                return Err(Error::InvalidConstraints("materialized mode needs motif_len <= 16 and <= 30 bits".into()));
            }
            let by_value: Vec<u64> = (0..1u64 << bits_per_motif)
                .map(|v| seq::pack(&dict.unrank_computed(v as u128)))
                .collect();
            let mut by_packed = vec![u32::MAX; 1usize << (2 * dict.constraints.motif_len)];
            for (v, &p) in by_value.iter().enumerate() {
                by_packed[p as usize] = v as u32;
            }
            dict.dense = Some(DenseTables { by_value, by_packed });
        }
        Ok(dict)
    }

    pub fn constraints(&self) -> &MotifConstraints {
        &self.constraints
    }

    pub fn motif_len(&self) -> usize {
        self.constraints.motif_len
    }

    pub fn bits_per_motif(&self) -> u32 {
        self.bits_per_motif
    }

    /// Number of valid motifs (at least `2^bits_per_motif`).
    pub fn capacity(&self) -> u128 {
        self.capacity
    }

    /// Number of values the encoder uses: `2^bits_per_motif`.
    pub fn value_count(&self) -> u64 {
        1u64 << self.bits_per_motif
    }

    pub fn mode(&self) -> DictionaryMode {
        if self.dense.is_some() {
            DictionaryMode::Materialized
        } else {
            DictionaryMode::Computed
        }
    }

    /// Payload bits per nucleotide.
    pub fn density(&self) -> f64 {
        self.bits_per_motif as f64 / self.constraints.motif_len as f64
    }

    /// The `value`-th valid motif. `value` must be below `2^bits_per_motif`.
    pub fn unrank(&self, value: u64) -> Result<Vec<u8>> {
        if value >= self.value_count() {
            return Err(Error::OutOfRange { value, limit: self.value_count() });
        }
        Ok(match &self.dense {
            Some(d) => seq::unpack(d.by_value[value as usize], self.constraints.motif_len),
            None => self.unrank_computed(value as u128),
        })
    }

    /// Unranks any index below [`capacity`](Self::capacity), including values the
    /// encoder never emits.
    pub fn unrank_any(&self, index: u128) -> Result<Vec<u8>> {
        if index >= self.capacity {
            return Err(Error::OutOfRange { value: index as u64, limit: self.capacity as u64 });
        }
        Ok(self.unrank_computed(index))
    }

    fn unrank_computed(&self, mut index: u128) -> Vec<u8> {
        let len = self.constraints.motif_len;
        let mut out = Vec::with_capacity(len);
        let mut state = Prefix::EMPTY;
        for pos in 0..len {
            let rem = len - pos - 1;
            for b in 0..4 {
                let Some(next) = self.table.step(state, b) else { continue };
                let n = self.table.completions(rem, next);
                if index < n {
                    out.push(BASES[b]);
                    state = next;
                    break;
                }
                index -= n;
            }
        }
        debug_assert_eq!(out.len(), len);
        out
    }

    /// Value carried by `motif`: `Ok(None)` when the motif violates the
    /// constraints or its rank is not below `2^bits_per_motif`.
    pub fn rank(&self, motif: &[u8]) -> Result<Option<u64>> {
        let len = self.constraints.motif_len;
        if motif.len() != len {
            return Err(Error::Length { expected: len, actual: motif.len() });
        }
        if let Some(d) = &self.dense {
            if !seq::is_acgt(motif) {
                return Ok(None);
            }
            let v = d.by_packed[seq::pack(motif) as usize];
            return Ok((v != u32::MAX).then_some(v as u64));
        }
        Ok(self.rank_any(motif).filter(|&r| r < self.value_count() as u128).map(|r| r as u64))
    }

    /// Lexicographic rank among all valid motifs, or `None` if invalid.
    pub fn rank_any(&self, motif: &[u8]) -> Option<u128> {
        let len = self.constraints.motif_len;
        if motif.len() != len || !self.constraints.is_valid(motif) {
            return None;
        }
        let mut state = Prefix::EMPTY;
        let mut rank = 0u128;
        for (pos, &ch) in motif.iter().enumerate() {
            let b = seq::base_index(ch)?;
            let rem = len - pos - 1;
            for smaller in 0..b {
                if let Some(next) = self.table.step(state, smaller) {
                    rank += self.table.completions(rem, next);
                }
            }
            state = self.table.step(state, b)?;
        }
        Some(rank)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force(c: &MotifConstraints) -> Vec<Vec<u8>> {
        let l = c.motif_len;
        (0..1u64 << (2 * l))
            .map(|p| seq::unpack(p, l))
            .filter(|m| c.is_valid(m))
            .collect()
    }

    fn cons(l: usize, run: usize, lo: f64, hi: f64) -> MotifConstraints {
        MotifConstraints::new(l, run, lo, hi).unwrap()
    }

    #[test]
    fn trivial_counts() {
        assert_eq!(count_valid(&cons(1, 1, 0.0, 1.0)).unwrap(), 4);
        assert_eq!(count_valid(&cons(3, 2, 0.0, 1.0)).unwrap(), 60);
    }

    #[test]
    fn validate_examples() {
        let c = cons(4, 2, 0.25, 0.75);
        assert!(validate_motif(&c, b"ACAC"));
        assert!(!validate_motif(&c, b"GGGA"));
        assert!(!validate_motif(&c, b"AATT"));
        assert!(!validate_motif(&c, b"ACA"));
    }

    #[test]
    fn unrank_small_examples() {
        let c = cons(3, 2, 0.0, 1.0);
        let all = brute_force(&c);
        assert_eq!(all.len(), 60);
        // 5 bits -> 32 values; use computed mode for the full range via unrank_any
        let dict = MotifDictionary::with_mode(c, 5, DictionaryMode::Computed).unwrap();
        assert_eq!(dict.unrank(0).unwrap(), b"AAC");
        assert_eq!(dict.unrank_any(59).unwrap(), all[59]);
        assert_eq!(dict.unrank_any(59).unwrap(), b"TTG");
        assert_eq!(dict.rank(b"AAA").unwrap(), None);
    }

    #[test]
    fn rank_matches_brute_force_position() {
        let c = cons(4, 2, 0.25, 0.75);
        let all = brute_force(&c);
        let dict = MotifDictionary::with_mode(c, 7, DictionaryMode::Computed).unwrap();
        let pos = all.iter().position(|m| m == b"ACGT").unwrap();
        assert_eq!(dict.rank_any(b"ACGT"), Some(pos as u128));
    }

    #[test]
    fn wrong_length_is_an_error() {
        let dict = MotifDictionary::new(cons(4, 2, 0.0, 1.0), 6).unwrap();
        assert!(matches!(dict.rank(b"ACG"), Err(Error::Length { .. })));
        assert!(matches!(dict.unrank(64), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn rank_beyond_bits_is_invalid() {
        let c = cons(3, 2, 0.0, 1.0);
        let all = brute_force(&c);
        let dict = MotifDictionary::new(c, 5).unwrap();
        assert_eq!(dict.rank(&all[31]).unwrap(), Some(31));
        assert_eq!(dict.rank(&all[32]).unwrap(), None);
    }

    #[test]
    fn insufficient_capacity_rejected() {
        assert!(matches!(MotifDictionary::new(cons(3, 2, 0.0, 1.0), 6), Err(Error::Capacity(_))));
    }

    #[test]
    fn desk_default_has_room_for_twelve_bits() {
        let c = MotifConstraints::default();
        let n = count_valid(&c).unwrap();
        assert_eq!(n, brute_force(&c).len() as u128);
        assert!(n >= 4096, "{n}");
    }

    #[test]
    fn doublet_cap_matches_brute_force() {
        let mut c = cons(7, 2, 0.25, 0.75);
        c.max_doublets = Some(1);
        assert_eq!(count_valid(&c).unwrap(), brute_force(&c).len() as u128);
    }

    #[test]
    fn materialized_and_computed_agree() {
        for l in 4..=8usize {
            let c = cons(l, 2, 0.25, 0.75);
            let cap = count_valid(&c).unwrap();
            let bits = 127 - cap.leading_zeros();
            let a = MotifDictionary::with_mode(c.clone(), bits, DictionaryMode::Materialized).unwrap();
            let b = MotifDictionary::with_mode(c.clone(), bits, DictionaryMode::Computed).unwrap();
            for v in 0..a.value_count() {
                let m = a.unrank(v).unwrap();
                assert_eq!(m, b.unrank(v).unwrap());
                assert_eq!(a.rank(&m).unwrap(), Some(v));
                assert_eq!(b.rank(&m).unwrap(), Some(v));
            }
            for p in 0..1u64 << (2 * l) {
                let m = seq::unpack(p, l);
                assert_eq!(a.rank(&m).unwrap(), b.rank(&m).unwrap());
            }
        }
    }
}
