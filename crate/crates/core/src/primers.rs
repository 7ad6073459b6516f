//! Primer pairs that select one extent each.

use serde::{Deserialize, Serialize};

use crate::align::edit_distance;
use crate::error::{Error, Result};
use crate::motif::MotifConstraints;
use crate::prng::{derive_seed, tags, SplitMix64};
use crate::seq::BASES;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimerPair {
    pub left: String,
    pub right: String,
}

/// Homopolymer and GC limits applied to generated primers.
pub fn primer_constraints(len: usize) -> MotifConstraints {
    MotifConstraints { motif_len: len, max_run: 3, gc_min: 0.4, gc_max: 0.6, max_doublets: None }
}

/// Draws `count` primer pairs by rejection sampling: every primer satisfies
/// [`primer_constraints`] and all `2 * count` primers are pairwise at edit
/// distance at least `ceil(len / 3)`.
pub fn generate_primers(count: usize, len: usize, seed: u64) -> Result<Vec<PrimerPair>> {
    if len < 6 {
        return Err(Error::Config(format!("primer length {len} too short")));
    }
    let constraints = primer_constraints(len);
    let min_dist = len.div_ceil(3) as u32;
    let mut g = SplitMix64::new(derive_seed(seed, tags::PRIMERS));
    let mut accepted: Vec<Vec<u8>> = Vec::with_capacity(2 * count);
    let mut attempts = 0usize;
    while accepted.len() < 2 * count {
        attempts += 1;
        if attempts > 10_000 * (2 * count + 1) {
            return Err(Error::InsufficientPrimers { need: count, have: accepted.len() / 2 });
        }
        let cand: Vec<u8> = (0..len).map(|_| BASES[g.below(4) as usize]).collect();
        if !constraints.is_valid(&cand) {
            continue;
        }
        if accepted.iter().all(|p| edit_distance(p, &cand) >= min_dist) {
            accepted.push(cand);
        }
    }
    let text = |v: &Vec<u8>| String::from_utf8(v.clone()).expect("ACGT");
    Ok(accepted.chunks(2).map(|c| PrimerPair { left: text(&c[0]), right: text(&c[1]) }).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_primers_are_valid_and_separated() {
        let pairs = generate_primers(16, 20, 3).unwrap();
        assert_eq!(pairs.len(), 16);
        let all: Vec<&[u8]> = pairs.iter().flat_map(|p| [p.left.as_bytes(), p.right.as_bytes()]).collect();
        for (i, a) in all.iter().enumerate() {
            assert!(primer_constraints(20).is_valid(a));
            for b in &all[i + 1..] {
                assert!(edit_distance(a, b) >= 7);
            }
        }
        assert_eq!(pairs, generate_primers(16, 20, 3).unwrap());
    }
}
