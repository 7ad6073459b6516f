//! Edit-distance kernels used by demultiplexing, consensus, realignment,
//! clustering verification and error profiling.
//!
//! Unit costs throughout. Patterns of up to 64 symbols run through the
//! bit-parallel recurrence of Myers (global variant), longer ones fall back to
//! the textbook dynamic program.

use crate::seq::base_index;

const WORD: usize = 64;

fn peq_table(pattern: &[u8]) -> [u64; 5] {
    let mut peq = [0u64; 5];
    for (i, &b) in pattern.iter().enumerate() {
        peq[base_index(b).unwrap_or(4)] |= 1 << i;
    }
    // Non-ACGT symbols never match anything, including each other.
    peq[4] = 0;
    peq
}

/// `out[j] = edit(pattern, text[..j])` for every `j` in `0..=text.len()`.
pub fn prefix_distances(pattern: &[u8], text: &[u8]) -> Vec<u32> {
    let m = pattern.len();
    if m == 0 {
        return (0..=text.len() as u32).collect();
    }
    if m > WORD {
        return prefix_distances_dp(pattern, text);
    }
    let peq = peq_table(pattern);
    let high = 1u64 << (m - 1);
    let mut pv = u64::MAX;
    let mut mv = 0u64;
    let mut score = m as u32;
    let mut out = Vec::with_capacity(text.len() + 1);
    out.push(score);
    for &c in text {
        let eq = peq[base_index(c).unwrap_or(4)];
        let xv = eq | mv;
        let xh = (((eq & pv).wrapping_add(pv)) ^ pv) | eq;
        let mut ph = mv | !(xh | pv);
        let mut mh = pv & xh;
        if ph & high != 0 {
            score += 1;
        } else if mh & high != 0 {
            score -= 1;
        }
        ph = (ph << 1) | 1;
        mh <<= 1;
        pv = mh | !(xv | ph);
        mv = ph & xv;
        out.push(score);
    }
    out
}

fn prefix_distances_dp(pattern: &[u8], text: &[u8]) -> Vec<u32> {
    // Column-major over the text so that the last row is available per column.
    let m = pattern.len();
    let mut col: Vec<u32> = (0..=m as u32).collect();
    let mut out = Vec::with_capacity(text.len() + 1);
    out.push(m as u32);
    for (j, &t) in text.iter().enumerate() {
        let mut diag = col[0];
        col[0] = j as u32 + 1;
        for i in 1..=m {
            let sub = diag + (pattern[i - 1] != t || base_index(t).is_none()) as u32;
            diag = col[i];
            col[i] = sub.min(col[i] + 1).min(col[i - 1] + 1);
        }
        out.push(col[m]);
    }
    out
}

/// Levenshtein distance with unit costs.
pub fn edit_distance(a: &[u8], b: &[u8]) -> u32 {
    let (p, t) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    if p.len() <= WORD {
        *prefix_distances(p, t).last().unwrap()
    } else {
        *prefix_distances_dp(p, t).last().unwrap()
    }
}

/// Edit distance restricted to a diagonal band of half-width `band`.
///
/// Returns `None` when the lengths differ by more than the band or when every
/// path inside the band costs more than `max_cost`.
pub fn banded_edit_distance(a: &[u8], b: &[u8], band: usize, max_cost: u32) -> Option<u32> {
    let (n, m) = (a.len(), b.len());
    if n.abs_diff(m) > band {
        return None;
    }
    const INF: u32 = u32::MAX / 2;
    let width = 2 * band + 1;
    // Row i keeps columns j in [i - band, i + band]; slot = j + band - i.
    let mut prev = vec![INF; width];
    let mut cur = vec![INF; width];
    for j in 0..=band.min(m) {
        prev[j + band] = j as u32;
    }
    for i in 1..=n {
        cur.iter_mut().for_each(|c| *c = INF);
        let lo = i.saturating_sub(band);
        let hi = (i + band).min(m);
        let mut row_min = INF;
        for j in lo..=hi {
            let slot = j + band - i;
            let mut best = INF;
            if j == 0 {
                best = i as u32;
            } else {
                // diagonal: (i-1, j-1) sits at the same slot of the previous row
                let diag = prev[slot];
                if diag < INF {
                    best = diag + (a[i - 1] != b[j - 1]) as u32;
                }
                if slot > 0 && cur[slot - 1] < INF {
                    best = best.min(cur[slot - 1] + 1);
                }
            }
            if slot + 1 < width && prev[slot + 1] < INF {
                best = best.min(prev[slot + 1] + 1);
            }
            cur[slot] = best;
            row_min = row_min.min(best);
        }
        if row_min > max_cost {
            return None;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let d = prev[m + band - n];
    (d <= max_cost).then_some(d)
}

/// Best placement of `motif` in `read` near `expected`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Placement {
    pub cost: u32,
    pub start: usize,
    pub end: usize,
}

/// Aligns `motif` against `read` with its start anywhere in
/// `[expected - slack, expected + slack]` and its end anywhere in
/// `[start + len - slack, start + len + slack]`.
///
/// Minimal cost wins; ties go to the start nearest `expected` (left first),
/// then to the span nearest the motif length, then to the shorter end.
pub fn locate_motif(read: &[u8], motif: &[u8], expected: usize, slack: usize) -> Option<Placement> {
    let l = motif.len();
    let ws = expected.saturating_sub(slack);
    if ws > read.len() {
        return None;
    }
    let we = (expected + slack + l + slack).min(read.len());
    let text = &read[ws..we];
    let t = text.len();
    // cells carry (cost, start distance from expected, start); compared lexicographically
    type Cell = (u32, u32, u32);
    const INF: Cell = (u32::MAX / 2, u32::MAX, u32::MAX);
    let max_start = expected + slack;
    let mut prev: Vec<Cell> = (0..=t)
        .map(|j| {
            let pos = ws + j;
            if pos <= max_start {
                (0, pos.abs_diff(expected) as u32, pos as u32)
            } else {
                INF
            }
        })
        .collect();
    let mut cur = vec![INF; t + 1];
    let bump = |c: Cell, by: u32| if c.0 < INF.0 { (c.0 + by, c.1, c.2) } else { INF };
    for &mc in motif {
        cur[0] = bump(prev[0], 1);
        for j in 1..=t {
            let diag = bump(prev[j - 1], (mc != text[j - 1]) as u32);
            cur[j] = diag.min(bump(prev[j], 1)).min(bump(cur[j - 1], 1));
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev.iter()
        .enumerate()
        .filter(|(_, c)| c.0 < INF.0)
        .filter_map(|(j, &(cost, dist, start))| {
            let (start, end) = (start as usize, ws + j);
            let span = end - start;
            (span + slack >= l && span <= l + slack).then_some(((cost, dist, start, span.abs_diff(l), end), Placement { cost, start, end }))
        })
        .min_by_key(|(key, _)| *key)
        .map(|(_, p)| p)
}

/// One column of a pairwise alignment of a read against its reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlignOp {
    Match,
    /// Reference base replaced.
    Sub,
    /// Extra read base inserted before the current reference position.
    Ins,
    /// Reference base missing from the read.
    Del,
}

/// Global alignment with traceback. Among optimal alignments the traceback
/// prefers diagonal moves, which places gaps as far left as possible.
pub fn global_alignment(reference: &[u8], read: &[u8]) -> Vec<AlignOp> {
    let (n, m) = (reference.len(), read.len());
    let w = m + 1;
    let mut dp = vec![0u32; (n + 1) * w];
    for j in 0..=m {
        dp[j] = j as u32;
    }
    for i in 1..=n {
        dp[i * w] = i as u32;
        for j in 1..=m {
            let sub = dp[(i - 1) * w + j - 1] + (reference[i - 1] != read[j - 1]) as u32;
            let del = dp[(i - 1) * w + j] + 1;
            let ins = dp[i * w + j - 1] + 1;
            dp[i * w + j] = sub.min(del).min(ins);
        }
    }
    let mut ops = Vec::with_capacity(n.max(m));
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = dp[i * w + j];
        if i > 0 && j > 0 {
            let mismatch = (reference[i - 1] != read[j - 1]) as u32;
            if dp[(i - 1) * w + j - 1] + mismatch == here {
                ops.push(if mismatch == 1 { AlignOp::Sub } else { AlignOp::Match });
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && dp[(i - 1) * w + j] + 1 == here {
            ops.push(AlignOp::Del);
            i -= 1;
        } else {
            ops.push(AlignOp::Ins);
            j -= 1;
        }
    }
    ops.reverse();
    ops
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn naive(a: &[u8], b: &[u8]) -> u32 {
        let mut d = vec![vec![0u32; b.len() + 1]; a.len() + 1];
        for (i, row) in d.iter_mut().enumerate() {
            row[0] = i as u32;
        }
        for j in 0..=b.len() {
            d[0][j] = j as u32;
        }
        for i in 1..=a.len() {
            for j in 1..=b.len() {
                d[i][j] = (d[i - 1][j - 1] + (a[i - 1] != b[j - 1]) as u32)
                    .min(d[i - 1][j] + 1)
                    .min(d[i][j - 1] + 1);
            }
        }
        d[a.len()][b.len()]
    }

    fn dna(max: usize) -> impl Strategy<Value = Vec<u8>> {
        proptest::collection::vec(prop::sample::select(b"ACGT".to_vec()), 0..max)
    }

    proptest! {
        #[test]
        fn myers_matches_naive(a in dna(70), b in dna(90)) {
            prop_assert_eq!(edit_distance(&a, &b), naive(&a, &b));
        }

        #[test]
        fn prefix_distances_match_naive(a in dna(20), b in dna(30)) {
            let d = prefix_distances(&a, &b);
            for j in 0..=b.len() {
                prop_assert_eq!(d[j], naive(&a, &b[..j]));
            }
        }

        #[test]
        fn banded_agrees_when_inside_band(a in dna(40), b in dna(40)) {
            let exact = naive(&a, &b);
            match banded_edit_distance(&a, &b, 40, u32::MAX / 4) {
                Some(d) => prop_assert_eq!(d, exact),
                None => prop_assert!(false),
            }
            if let Some(d) = banded_edit_distance(&a, &b, 5, 8) {
                prop_assert!(d >= exact);
            }
        }

        #[test]
        fn alignment_cost_is_optimal(a in dna(40), b in dna(40)) {
            let ops = global_alignment(&a, &b);
            let cost = ops.iter().filter(|o| **o != AlignOp::Match).count() as u32;
            prop_assert_eq!(cost, naive(&a, &b));
            let consumed_ref = ops.iter().filter(|o| **o != AlignOp::Ins).count();
            prop_assert_eq!(consumed_ref, a.len());
        }
    }

    #[test]
    fn locate_exact_and_shifted() {
        let read = b"GTACACTGATCT";
        let p = locate_motif(read, b"ACTG", 4, 2).unwrap();
        assert_eq!(p, Placement { cost: 0, start: 4, end: 8 });
        // deletion of C at 5: GTACA-TGATCT
        let read = b"GTACATGATCT";
        let p = locate_motif(read, b"GTAC", 0, 1).unwrap();
        assert_eq!((p.cost, p.end), (0, 4));
        let p = locate_motif(read, b"ACTG", 4, 1).unwrap();
        assert_eq!(p.cost, 1);
        assert_eq!(p.end, 7);
    }

    #[test]
    fn periodic_motif_stays_put() {
        // ACACACAC also matches two bases to the left; the expected start wins
        let read = b"GGACACACACACTT";
        let p = locate_motif(read, b"ACACACAC", 4, 3).unwrap();
        assert_eq!(p, Placement { cost: 0, start: 4, end: 12 });
    }

    #[test]
    fn gaps_go_left() {
        let ops = global_alignment(b"AAAC", b"AAC");
        assert_eq!(ops, vec![AlignOp::Del, AlignOp::Match, AlignOp::Match, AlignOp::Match]);
    }
}
