//! Cost, bias and error metrics, and the minimum-coverage search.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::align::{global_alignment, AlignOp};
use crate::channel::ReadRecord;
use crate::error::{Error, Result};
use crate::layout::PoolManifest;
use crate::seq::reverse_complement;

/// Bits in a kilobyte as used in the published cost tables (1 KB = 1024 bytes).
pub const KB_BITS: f64 = 8.0 * 1024.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostInputs {
    pub oligo_count: f64,
    pub oligo_len_nt: f64,
    pub input_bits: f64,
    /// Sequenced nucleotides; when absent `coverage` is used.
    pub read_nt_total: Option<f64>,
    pub coverage: Option<f64>,
}

impl CostInputs {
    pub fn new(oligo_count: f64, oligo_len_nt: f64, input_bits: f64) -> Self {
        CostInputs { oligo_count, oligo_len_nt, input_bits, read_nt_total: None, coverage: None }
    }
}

/// Synthesized nucleotides per stored bit.
pub fn write_cost(c: &CostInputs) -> Result<f64> {
    if c.input_bits <= 0.0 {
        return Err(Error::Config("input_bits must be positive".into()));
    }
    Ok(c.oligo_count * c.oligo_len_nt / c.input_bits)
}

/// Sequenced nucleotides per recovered bit.
pub fn read_cost(c: &CostInputs) -> Result<f64> {
    let w = write_cost(c)?;
    match (c.read_nt_total, c.coverage) {
        (Some(nt), _) => Ok(nt / c.input_bits),
        (None, Some(cov)) => Ok(cov * w),
        (None, None) => Err(Error::Config("read cost needs read_nt_total or coverage".into())),
    }
}

/// Payload-only and full-length (primers included) write costs of a pool.
pub fn pool_write_costs(manifest: &PoolManifest) -> (f64, f64) {
    let g = &manifest.geometry;
    let bits = (manifest.input_byte_len * 8) as f64;
    let n = g.total_oligo_count as f64;
    (n * g.payload_nt_per_oligo as f64 / bits, n * g.oligo_len_nt as f64 / bits)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectFraction {
    pub object: usize,
    pub raw_count: u64,
    pub read_count: u64,
    pub p_raw: f64,
    pub p_seq: f64,
    /// `p_seq / p_raw`; 1 means unbiased.
    pub frac_change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractionChangeReport {
    pub objects: Vec<ObjectFraction>,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// Population standard deviation of the fraction changes.
    pub std: f64,
}

impl FractionChangeReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("object,raw_count,read_count,p_raw,p_seq,frac_change\n");
        for o in &self.objects {
            writeln!(s, "{},{},{},{},{},{}", o.object, o.raw_count, o.read_count, o.p_raw, o.p_seq, o.frac_change)
                .expect("string write");
        }
        s
    }
}

/// Population fractions before (`raw`) and after (`reads`) sequencing.
pub fn population_fraction_change(raw: &[u64], reads: &[u64]) -> Result<FractionChangeReport> {
    if raw.len() != reads.len() || raw.is_empty() {
        return Err(Error::Length { expected: raw.len(), actual: reads.len() });
    }
    if let Some(i) = raw.iter().position(|&r| r == 0) {
        return Err(Error::Config(format!("object {i} has a zero raw count")));
    }
    let raw_total: u64 = raw.iter().sum();
    let read_total: u64 = reads.iter().sum();
    if read_total == 0 {
        return Err(Error::Config("no reads".into()));
    }
    let objects: Vec<ObjectFraction> = raw
        .iter()
        .zip(reads)
        .enumerate()
        .map(|(i, (&r, &s))| {
            let p_raw = r as f64 / raw_total as f64;
            let p_seq = s as f64 / read_total as f64;
            ObjectFraction { object: i, raw_count: r, read_count: s, p_raw, p_seq, frac_change: p_seq / p_raw }
        })
        .collect();
    let cs: Vec<f64> = objects.iter().map(|o| o.frac_change).collect();
    let mean = cs.iter().sum::<f64>() / cs.len() as f64;
    let std = (cs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / cs.len() as f64).sqrt();
    Ok(FractionChangeReport {
        min: cs.iter().copied().fold(f64::INFINITY, f64::min),
        max: cs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mean,
        std,
        objects,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorProfile {
    /// Per reference position: substitution, insertion and deletion rates.
    pub positions: Vec<(f64, f64, f64)>,
    pub reads: usize,
    pub sub_rate: f64,
    pub ins_rate: f64,
    pub del_rate: f64,
    /// Edits found by alignment.
    pub aligned_edits: u64,
    /// Edits the simulator recorded as injected.
    pub injected_edits: u64,
}

impl ErrorProfile {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("position,sub_rate,ins_rate,del_rate\n");
        for (i, (a, b, c)) in self.positions.iter().enumerate() {
            writeln!(s, "{i},{a},{b},{c}").expect("string write");
        }
        s
    }
}

/// Aligns each read to its source oligo and tallies edits per reference position.
///
/// Off-target reads are skipped; an insertion is charged to the reference
/// position it precedes (or the last position at the end).
pub fn error_profile<F>(reads: &[ReadRecord], source_of: F) -> Result<ErrorProfile>
where
    F: Fn(&ReadRecord) -> Option<Vec<u8>> + Sync,
{
    let usable: Vec<(usize, &ReadRecord)> = reads.iter().enumerate().filter(|(_, r)| r.off_target.is_none()).collect();
    let counted: Vec<(Vec<[u32; 3]>, u64)> = usable
        .par_iter()
        .map(|&(i, r)| {
            let reference = source_of(r).ok_or(Error::MissingProvenance(i))?;
            let seq = if r.reversed { reverse_complement(&r.sequence) } else { r.sequence.clone() };
            let mut counts = vec![[0u32; 3]; reference.len()];
            let last = reference.len().saturating_sub(1);
            let mut pos = 0;
            for op in global_alignment(&reference, &seq) {
                match op {
                    AlignOp::Match => pos += 1,
                    AlignOp::Sub => {
                        counts[pos][0] += 1;
                        pos += 1;
                    }
                    AlignOp::Ins => counts[pos.min(last)][1] += 1,
                    AlignOp::Del => {
                        counts[pos][2] += 1;
                        pos += 1;
                    }
                }
            }
            Ok((counts, r.edits.total() as u64))
        })
        .collect::<Result<_>>()?;
    let len = counted.iter().map(|(c, _)| c.len()).max().unwrap_or(0);
    let mut totals = vec![[0u64; 3]; len];
    let mut injected = 0;
    for (c, inj) in &counted {
        injected += inj;
        for (t, v) in totals.iter_mut().zip(c) {
            for k in 0..3 {
                t[k] += v[k] as u64;
            }
        }
    }
    let n = counted.len().max(1) as f64;
    let sums: [u64; 3] = [0, 1, 2].map(|k| totals.iter().map(|t| t[k]).sum());
    let denom = n * len.max(1) as f64;
    Ok(ErrorProfile {
        positions: totals.iter().map(|t| (t[0] as f64 / n, t[1] as f64 / n, t[2] as f64 / n)).collect(),
        reads: counted.len(),
        sub_rate: sums[0] as f64 / denom,
        ins_rate: sums[1] as f64 / denom,
        del_rate: sums[2] as f64 / denom,
        aligned_edits: sums.iter().sum(),
        injected_edits: injected,
    })
}

/// Outcome of one simulated decode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub recovered: bool,
    pub blocks_failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub error_rate: f64,
    pub coverage: u32,
    pub trial: u32,
    pub recovered: bool,
    pub blocks_failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinCoverage {
    pub error_rate: f64,
    /// `None` when no coverage in the range recovered every trial.
    pub min_coverage: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinCoverageResult {
    pub minima: Vec<MinCoverage>,
    pub grid: Vec<GridRow>,
}

impl MinCoverageResult {
    pub fn grid_csv(&self) -> String {
        let mut s = String::from("error_rate,coverage,trial,recovered,blocks_failed\n");
        for r in &self.grid {
            writeln!(s, "{},{},{},{},{}", r.error_rate, r.coverage, r.trial, r.recovered, r.blocks_failed).expect("string write");
        }
        s
    }

    pub fn minima_csv(&self) -> String {
        let mut s = String::from("error_rate,min_coverage\n");
        for m in &self.minima {
            let v = m.min_coverage.map_or("unbounded".to_string(), |c| c.to_string());
            writeln!(s, "{},{v}", m.error_rate).expect("string write");
        }
        s
    }

    /// True when the minimum never decreases as the error rate grows.
    pub fn is_monotone(&self) -> bool {
        let key = |m: &MinCoverage| m.min_coverage.unwrap_or(u32::MAX);
        let mut sorted = self.minima.clone();
        sorted.sort_by(|a, b| a.error_rate.total_cmp(&b.error_rate));
        sorted.windows(2).all(|w| key(&w[0]) <= key(&w[1]))
    }
}

/// Scans coverages upward for each error rate and returns the first one at
/// which all `trials` recover. A coverage level stops at its first failing
/// trial; the scan stops at the first fully successful level.
pub fn min_coverage_search<F>(error_rates: &[f64], coverages: std::ops::RangeInclusive<u32>, trials: u32, run: F) -> Result<MinCoverageResult>
where
    F: Fn(f64, u32, u32) -> Result<TrialOutcome> + Sync,
{
    let per_rate: Vec<(MinCoverage, Vec<GridRow>)> = error_rates
        .par_iter()
        .map(|&error_rate| {
            let mut rows = Vec::new();
            for coverage in coverages.clone() {
                let mut all = true;
                for trial in 0..trials {
                    let o = run(error_rate, coverage, trial)?;
                    rows.push(GridRow { error_rate, coverage, trial, recovered: o.recovered, blocks_failed: o.blocks_failed });
                    if !o.recovered {
                        all = false;
                        break;
                    }
                }
                if all {
                    return Ok((MinCoverage { error_rate, min_coverage: Some(coverage) }, rows));
                }
            }
            Ok((MinCoverage { error_rate, min_coverage: None }, rows))
        })
        .collect::<Result<_>>()?;
    let (minima, grids): (Vec<_>, Vec<_>) = per_rate.into_iter().unzip();
    Ok(MinCoverageResult { minima, grid: grids.into_iter().flatten().collect() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_costs() {
        let c = CostInputs { coverage: Some(1.0), ..CostInputs::new(100.0, 100.0, 10_000.0) };
        assert_eq!(write_cost(&c).unwrap(), 1.0);
        assert_eq!(read_cost(&c).unwrap(), 1.0);
        assert!(write_cost(&CostInputs::new(1.0, 1.0, 0.0)).is_err());
    }

    #[test]
    fn uniform_sampling_is_unbiased() {
        let r = population_fraction_change(&[10, 20, 30], &[100, 200, 300]).unwrap();
        assert!(r.objects.iter().all(|o| (o.frac_change - 1.0).abs() < 1e-12));
        assert!(r.std < 1e-12);
        assert!(population_fraction_change(&[0, 1], &[1, 1]).is_err());
    }

    #[test]
    fn weighted_mean_of_change_is_one() {
        let r = population_fraction_change(&[5, 50, 500], &[70, 20, 900]).unwrap();
        let w: f64 = r.objects.iter().map(|o| o.p_raw * o.frac_change).sum();
        assert!((w - 1.0).abs() < 1e-12);
        assert!((r.objects.iter().map(|o| o.p_seq).sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn single_deletion_profile() {
        let oligo = b"GTACACTGATCT".to_vec();
        let mut read = ReadRecord::plain(b"GTACATGATCT".to_vec());
        read.edits.del = 1;
        let p = error_profile(&[read], |_| Some(oligo.clone())).unwrap();
        let dels: Vec<f64> = p.positions.iter().map(|x| x.2).collect();
        // the deleted C sits at position 5
        assert_eq!(dels.iter().filter(|&&d| d == 1.0).count(), 1);
        assert_eq!(dels[5], 1.0);
        assert!(p.positions.iter().all(|x| x.0 == 0.0 && x.1 == 0.0));
        assert_eq!((p.aligned_edits, p.injected_edits), (1, 1));
    }

    #[test]
    fn search_stops_at_first_success() {
        let r = min_coverage_search(&[0.0, 0.1], 1..=10, 3, |e, c, _| {
            let need = if e == 0.0 { 1 } else { 4 };
            Ok(TrialOutcome { recovered: c >= need, blocks_failed: (c < need) as usize })
        })
        .unwrap();
        assert_eq!(r.minima[0].min_coverage, Some(1));
        assert_eq!(r.minima[1].min_coverage, Some(4));
        assert!(r.is_monotone());
        assert_eq!(r.grid.len(), 3 + 3 + 3);
        assert!(r.grid_csv().starts_with("error_rate,coverage,trial,recovered,blocks_failed\n0,1,0,true,0\n"));
    }
}
