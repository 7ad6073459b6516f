//! Read clustering: CGK edit-to-Hamming embedding, bucketing on sampled
//! embedding positions and verification by banded edit distance.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::align::banded_edit_distance;
use crate::channel::{ReadRecord, Source};
use crate::error::{Error, Result};
use crate::prng::{derive_seed, splitmix64_next, tags, SplitMix64};
use crate::seq::base_index;

pub const PAD: u8 = b'#';

#[derive(Debug, Clone)]
pub struct EmbeddingFunction {
    max_input_len: usize,
    /// Bit `(j, symbol)` at index `4 * j + symbol`.
    bits: Vec<u64>,
}

impl EmbeddingFunction {
    pub fn new(seed: u64, max_input_len: usize) -> Self {
        let mut g = SplitMix64::new(seed);
        let words = (4 * 3 * max_input_len).div_ceil(64);
        EmbeddingFunction { max_input_len, bits: (0..words).map(|_| g.next_u64()).collect() }
    }

    pub fn max_input_len(&self) -> usize {
        self.max_input_len
    }

    pub fn output_len(&self) -> usize {
        3 * self.max_input_len
    }

    #[inline]
    fn bit(&self, j: usize, symbol: usize) -> usize {
        let i = 4 * j + symbol;
        (self.bits[i / 64] >> (i % 64) & 1) as usize
    }
}

pub fn cgk_embed(seq: &[u8], f: &EmbeddingFunction) -> Result<Vec<u8>> {
    if seq.len() > f.max_input_len {
        return Err(Error::Length { expected: f.max_input_len, actual: seq.len() });
    }
    let mut out = Vec::with_capacity(f.output_len());
    let mut i = 0;
    for j in 0..f.output_len() {
        match seq.get(i) {
            Some(&c) => {
                out.push(c);
                i += f.bit(j, base_index(c).unwrap_or(0));
            }
            None => out.push(PAD),
        }
    }
    Ok(out)
}

pub fn hamming(a: &[u8], b: &[u8]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count() + a.len().abs_diff(b.len())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClusterParams {
    pub num_embeddings: usize,
    pub signature_positions: usize,
    pub verify_threshold_frac: f64,
    /// Band half-width as a fraction of the expected length.
    pub band_frac: f64,
    /// Expected read length; `None` uses the median read length.
    pub expected_len: Option<usize>,
    #[serde(with = "crate::prng::hex_u64")]
    pub seed: u64,
}

impl Default for ClusterParams {
    fn default() -> Self {
        ClusterParams {
            num_embeddings: 16,
            signature_positions: 12,
            verify_threshold_frac: 0.3,
            band_frac: 0.15,
            expected_len: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cluster {
    /// Read indices, ascending.
    pub members: Vec<usize>,
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// The smaller index becomes the root, so a root is its set's first member.
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

fn signature(embedded: &[u8], positions: &[usize]) -> u64 {
    positions.iter().fold(0x5151_5151u64, |h, &p| splitmix64_next(h ^ embedded[p] as u64).1)
}

/// Groups reads that are likely copies of the same oligo.
///
/// The result is a partition of `0..reads.len()`, ordered by first member,
/// and does not depend on the number of worker threads.
pub fn cluster_reads<S: AsRef<[u8]> + Sync>(reads: &[S], params: &ClusterParams) -> Vec<Cluster> {
    if reads.is_empty() {
        return Vec::new();
    }
    let max_len = reads.iter().map(|r| r.as_ref().len()).max().unwrap_or(0).max(1);
    let expected = params.expected_len.unwrap_or_else(|| {
        let mut lens: Vec<usize> = reads.iter().map(|r| r.as_ref().len()).collect();
        lens.sort_unstable();
        lens[lens.len() / 2]
    });
    let threshold = (params.verify_threshold_frac * expected as f64).floor() as u32;
    let band = (params.band_frac * expected as f64).ceil() as usize;
    let mut uf = UnionFind { parent: (0..reads.len()).collect() };
    let base_seed = derive_seed(params.seed, tags::CLUSTER);
    for round in 0..params.num_embeddings {
        let round_seed = derive_seed(base_seed, round as u64);
        let f = EmbeddingFunction::new(round_seed, max_len);
        let mut g = SplitMix64::new(round_seed ^ 1);
        // sample distinct positions from the part of the embedding a typical read fills
        let span = (2 * expected).clamp(1, f.output_len());
        let take = params.signature_positions.min(span);
        let mut pool: Vec<usize> = (0..span).collect();
        for i in 0..take {
            let j = i + g.below((span - i) as u64) as usize;
            pool.swap(i, j);
        }
        let positions = &pool[..take];
        let mut keyed: Vec<(u64, usize)> = reads
            .par_iter()
            .enumerate()
            .map(|(i, r)| (signature(&cgk_embed(r.as_ref(), &f).expect("max_len bound"), positions), i))
            .collect();
        keyed.sort_unstable();
        let roots: Vec<usize> = (0..reads.len()).map(|i| uf.find(i)).collect();
        let groups: Vec<&[(u64, usize)]> = keyed.chunk_by(|a, b| a.0 == b.0).filter(|g| g.len() > 1).collect();
        let merges: Vec<Vec<(usize, usize)>> = groups
            .par_iter()
            .map(|group| {
                // clusters seen in this bucket, by root; verification uses the root read
                let mut reps: Vec<usize> = Vec::new();
                let mut joined: BTreeMap<usize, usize> = BTreeMap::new();
                let mut out = Vec::new();
                for &(_, i) in group.iter() {
                    let root = roots[i];
                    if joined.contains_key(&root) {
                        continue;
                    }
                    let hit = reps.iter().copied().find(|&rep| {
                        banded_edit_distance(reads[rep].as_ref(), reads[i].as_ref(), band, threshold).is_some_and(|d| d <= threshold)
                    });
                    match hit {
                        Some(rep) => {
                            out.push((rep, i));
                            joined.insert(root, rep);
                        }
                        None => {
                            reps.push(root);
                            joined.insert(root, root);
                        }
                    }
                }
                out
            })
            .collect();
        for (a, b) in merges.into_iter().flatten() {
            uf.union(a, b);
        }
    }
    let mut by_root: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..reads.len() {
        let r = uf.find(i);
        by_root.entry(r).or_default().push(i);
    }
    by_root.into_values().map(|members| Cluster { members }).collect()
}

/// Perfect clusters from provenance; off-target reads are left out.
pub fn oracle_cluster(reads: &[ReadRecord]) -> Result<Vec<Cluster>> {
    let mut groups: BTreeMap<Source, Vec<usize>> = BTreeMap::new();
    for (i, r) in reads.iter().enumerate() {
        let src = r.source.ok_or(Error::MissingProvenance(i))?;
        if r.off_target.is_none() {
            groups.entry(src).or_default().push(i);
        }
    }
    let mut clusters: Vec<Cluster> = groups.into_values().map(|members| Cluster { members }).collect();
    clusters.sort_by_key(|c| c.members[0]);
    Ok(clusters)
}

/// Purity and completeness of `clusters` against the read sources.
///
/// Purity: share of clustered reads that belong to their cluster's majority
/// source. Completeness: share of reads that sit in the cluster holding most
/// reads of their source.
pub fn cluster_quality(clusters: &[Cluster], sources: &[Source]) -> (f64, f64) {
    let total: usize = clusters.iter().map(|c| c.members.len()).sum();
    if total == 0 {
        return (1.0, 1.0);
    }
    let mut majority = 0;
    let mut best: BTreeMap<Source, usize> = BTreeMap::new();
    for c in clusters {
        let mut counts: BTreeMap<Source, usize> = BTreeMap::new();
        for &m in &c.members {
            *counts.entry(sources[m]).or_default() += 1;
        }
        majority += counts.values().max().copied().unwrap_or(0);
        for (s, n) in counts {
            let e = best.entry(s).or_default();
            *e = (*e).max(n);
        }
    }
    let complete: usize = best.values().sum();
    (majority as f64 / total as f64, complete as f64 / total as f64)
}

/// One line per cluster: `cluster <id>: <read ids>`.
pub fn dump_clusters(clusters: &[Cluster]) -> String {
    let mut s = String::new();
    for (id, c) in clusters.iter().enumerate() {
        let ids: Vec<String> = c.members.iter().map(|m| m.to_string()).collect();
        writeln!(s, "cluster {id}: {}", ids.join(" ")).expect("string write");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{apply_edits, Edit, EditKind};

    fn random_seq(g: &mut SplitMix64, len: usize) -> Vec<u8> {
        (0..len).map(|_| b"ACGT"[g.below(4) as usize]).collect()
    }

    #[test]
    fn embedding_basics() {
        let f = EmbeddingFunction::new(1, 50);
        let s = b"ACGTTGCA";
        assert_eq!(cgk_embed(s, &f).unwrap(), cgk_embed(s, &f).unwrap());
        assert_eq!(cgk_embed(s, &f).unwrap().len(), 150);
        assert_eq!(cgk_embed(b"", &f).unwrap(), vec![PAD; 150]);
        assert!(cgk_embed(&[b'A'; 51], &f).is_err());
    }

    #[test]
    fn embedding_distortion() {
        let mut g = SplitMix64::new(7);
        let (mut near, mut far) = (0usize, 0usize);
        for t in 0..1000u64 {
            let f = EmbeddingFunction::new(t, 101);
            let a = random_seq(&mut g, 100);
            let pos = g.below(100) as usize;
            let kind = match g.below(3) {
                0 => EditKind::Sub(if a[pos] == b'A' { b'C' } else { b'A' }),
                1 => EditKind::Ins(b"ACGT"[g.below(4) as usize]),
                _ => EditKind::Del,
            };
            let b = apply_edits(&a, &[Edit { pos, kind }]).0;
            let c = random_seq(&mut g, 100);
            near += hamming(&cgk_embed(&a, &f).unwrap(), &cgk_embed(&b, &f).unwrap());
            far += hamming(&cgk_embed(&a, &f).unwrap(), &cgk_embed(&c, &f).unwrap());
        }
        assert!((near as f64) < 0.25 * far as f64, "near {near} far {far}");
    }

    #[test]
    fn exact_copies_cluster_perfectly() {
        let mut g = SplitMix64::new(2);
        let oligos: Vec<Vec<u8>> = (0..200).map(|_| random_seq(&mut g, 120)).collect();
        let mut reads = Vec::new();
        let mut sources = Vec::new();
        for (i, o) in oligos.iter().enumerate() {
            for _ in 0..3 {
                reads.push(o.clone());
                sources.push(Source { oe: 0, ob: 0, row: i });
            }
        }
        let clusters = cluster_reads(&reads, &ClusterParams::default());
        assert_eq!(clusters.len(), 200);
        assert_eq!(cluster_quality(&clusters, &sources), (1.0, 1.0));
        let covered: usize = clusters.iter().map(|c| c.members.len()).sum();
        assert_eq!(covered, reads.len());
    }

    #[test]
    fn dump_format() {
        let c = vec![Cluster { members: vec![0, 2] }, Cluster { members: vec![1] }];
        assert_eq!(dump_clusters(&c), "cluster 0: 0 2\ncluster 1: 1\n");
    }
}

