//! Regular-column-weight LDPC codes with a seed-derived parity-check matrix.
//!
//! Every variable node has degree `var_degree`; check degrees differ by at most
//! one. Codeword bit `i` is the `i`-th column of `H`, the first `k` bits carry
//! the data and the remaining bits are parity.

use crate::error::{Error, Result};
use crate::prng::SplitMix64;

/// Checks left over after an erasure solve before the result is trusted.
const SPARE_CHECKS: usize = 20;
const MIN_SUM_SCALE: f32 = 0.75;

#[derive(Debug, Clone)]
pub struct LdpcCode {
    n: usize,
    k: usize,
    var_degree: usize,
    /// check index lists, one per variable (flattened, `var_degree` each)
    var_checks: Vec<u32>,
    check_vars: Vec<Vec<u32>>,
    rank: usize,
    /// For each parity bit, the packed set of data bits it sums (k bits per row).
    parity_rows: Vec<Vec<u64>>,
    /// Codeword positions fed by `parity_rows`, in the same order.
    parity_positions: Vec<u32>,
}

enum ErasureSolve {
    Solved(Vec<bool>),
    /// Known bits are consistent but do not pin down the erased ones.
    Ambiguous,
    /// Some known bit is wrong.
    Inconsistent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LdpcMethod {
    Clean,
    Erasure,
    BeliefPropagation { iterations: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LdpcDecoded {
    pub data: Vec<bool>,
    pub method: LdpcMethod,
}

fn words(bits: usize) -> usize {
    bits.div_ceil(64)
}

#[inline]
fn get(row: &[u64], i: usize) -> bool {
    row[i / 64] >> (i % 64) & 1 == 1
}

#[inline]
fn flip(row: &mut [u64], i: usize) {
    row[i / 64] ^= 1 << (i % 64);
}

fn xor_into(dst: &mut [u64], src: &[u64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d ^= s;
    }
}

/// Reduces `rows` in place over GF(2) and returns the pivot column of each
/// independent row (rows beyond the rank end up zero and are moved last).
fn eliminate(rows: &mut [Vec<u64>], cols: impl Iterator<Item = usize>) -> Vec<usize> {
    let mut pivots = Vec::new();
    for c in cols {
        let r = pivots.len();
        if r == rows.len() {
            break;
        }
        let Some(p) = (r..rows.len()).find(|&i| get(&rows[i], c)) else {
            continue;
        };
        rows.swap(r, p);
        let (head, tail) = rows.split_at_mut(r);
        let (pivot, tail) = tail.split_first_mut().unwrap();
        for row in head.iter_mut().chain(tail.iter_mut()) {
            if get(row, c) {
                xor_into(row, pivot);
            }
        }
        pivots.push(c);
    }
    pivots
}

impl LdpcCode {
    /// Builds an `(n, k)` code whose variables all have degree `var_degree`.
    pub fn new(n: usize, k: usize, var_degree: usize, seed: u64) -> Result<Self> {
        let m = n.checked_sub(k).filter(|&m| m > 0 && k > 0).ok_or_else(|| {
            Error::Config(format!("LDPC dimensions n={n}, k={k} need 0 < k < n"))
        })?;
        if var_degree < 2 || var_degree > m {
            return Err(Error::Config(format!("LDPC variable degree {var_degree} must be in 2..={m}")));
        }
        let sockets = n * var_degree;
        // check socket table: socket s belongs to check s % m, so degrees differ by <= 1
        let mut owner: Vec<u32> = (0..sockets).map(|s| (s % m) as u32).collect();
        let mut g = SplitMix64::new(seed);
        for i in (1..sockets).rev() {
            let j = g.below(i as u64 + 1) as usize;
            owner.swap(i, j);
        }
        // variable v takes sockets v*dv .. (v+1)*dv; repair repeated checks by swapping
        let dv = var_degree;
        let has_dup = |owner: &[u32], v: usize| {
            let s = &owner[v * dv..(v + 1) * dv];
            (0..dv).any(|a| (a + 1..dv).any(|b| s[a] == s[b]))
        };
        for v in 0..n {
            let mut guard = 0;
            while has_dup(&owner, v) {
                guard += 1;
                if guard > 10_000 {
                    return Err(Error::Config("LDPC matrix construction did not converge".into()));
                }
                let a = v * dv + g.below(dv as u64) as usize;
                let b = g.below(sockets as u64) as usize;
                let w = b / dv;
                if w == v {
                    continue;
                }
                owner.swap(a, b);
                if has_dup(&owner, w) {
                    owner.swap(a, b);
                }
            }
        }
        let mut check_vars = vec![Vec::new(); m];
        for (s, &c) in owner.iter().enumerate() {
            check_vars[c as usize].push((s / dv) as u32);
        }
        for c in &mut check_vars {
            c.sort_unstable();
        }
        let mut code = LdpcCode {
            n,
            k,
            var_degree,
            var_checks: Vec::new(),
            check_vars,
            rank: 0,
            parity_rows: Vec::new(),
            parity_positions: Vec::new(),
        };
        code.build_encoder();
        Ok(code)
    }

    /// Permutes columns so that the data positions are free in `H`, then
    /// derives the parity equations from the reduced matrix.
    fn build_encoder(&mut self) {
        let (n, k) = (self.n, self.k);
        let mut rows: Vec<Vec<u64>> = self
            .check_vars
            .iter()
            .map(|vars| {
                let mut r = vec![0u64; words(n)];
                vars.iter().for_each(|&v| flip(&mut r, v as usize));
                r
            })
            .collect();
        // Pivot from the right so that the leftmost columns tend to stay free.
        let pivots = eliminate(&mut rows, (0..n).rev());
        self.rank = pivots.len();
        let mut is_pivot = vec![false; n];
        pivots.iter().for_each(|&p| is_pivot[p] = true);
        let free: Vec<usize> = (0..n).filter(|&c| !is_pivot[c]).collect();
        // position order: k data columns, then every remaining column
        let data_cols = &free[..k];
        let mut order: Vec<usize> = data_cols.to_vec();
        let mut used = vec![false; n];
        data_cols.iter().for_each(|&c| used[c] = true);
        order.extend((0..n).filter(|&c| !used[c]));
        let mut position_of = vec![0u32; n];
        for (pos, &col) in order.iter().enumerate() {
            position_of[col] = pos as u32;
        }
        self.parity_rows = pivots
            .iter()
            .enumerate()
            .map(|(r, _)| {
                let mut packed = vec![0u64; words(k)];
                for (d, &c) in data_cols.iter().enumerate() {
                    if get(&rows[r], c) {
                        flip(&mut packed, d);
                    }
                }
                packed
            })
            .collect();
        self.parity_positions = pivots.iter().map(|&p| position_of[p]).collect();
        for vars in &mut self.check_vars {
            for v in vars.iter_mut() {
                *v = position_of[*v as usize];
            }
            vars.sort_unstable();
        }
        let mut var_checks = vec![Vec::with_capacity(self.var_degree); n];
        for (c, vars) in self.check_vars.iter().enumerate() {
            for &v in vars {
                var_checks[v as usize].push(c as u32);
            }
        }
        self.var_checks = var_checks.into_iter().flatten().collect();
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn var_degree(&self) -> usize {
        self.var_degree
    }

    /// Rank of the parity-check matrix; `n - rank >= k` free bits.
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn check_degrees(&self) -> (usize, usize) {
        let degs = self.check_vars.iter().map(Vec::len);
        (degs.clone().min().unwrap_or(0), degs.max().unwrap_or(0))
    }

    fn checks_of(&self, v: usize) -> &[u32] {
        &self.var_checks[v * self.var_degree..(v + 1) * self.var_degree]
    }

    pub fn encode(&self, data: &[bool]) -> Result<Vec<bool>> {
        if data.len() != self.k {
            return Err(Error::Length { expected: self.k, actual: data.len() });
        }
        let mut packed = vec![0u64; words(self.k)];
        for (i, _) in data.iter().enumerate().filter(|(_, &b)| b) {
            flip(&mut packed, i);
        }
        let mut cw = data.to_vec();
        cw.resize(self.n, false);
        for (row, &pos) in self.parity_rows.iter().zip(&self.parity_positions) {
            let ones: u32 = row.iter().zip(&packed).map(|(a, b)| (a & b).count_ones()).sum();
            cw[pos as usize] = ones % 2 == 1;
        }
        Ok(cw)
    }

    pub fn is_codeword(&self, bits: &[bool]) -> bool {
        bits.len() == self.n
            && self.check_vars.iter().all(|vars| !vars.iter().fold(false, |acc, &v| acc ^ bits[v as usize]))
    }

    /// Decodes hard bits with per-bit erasure flags.
    pub fn decode(&self, bits: &[bool], erased: &[bool], max_iterations: usize) -> Result<Option<LdpcDecoded>> {
        if bits.len() != self.n {
            return Err(Error::Length { expected: self.n, actual: bits.len() });
        }
        if erased.len() != self.n {
            return Err(Error::Length { expected: self.n, actual: erased.len() });
        }
        let n_erased = erased.iter().filter(|&&e| e).count();
        if n_erased == 0 && self.is_codeword(bits) {
            return Ok(Some(LdpcDecoded { data: bits[..self.k].to_vec(), method: LdpcMethod::Clean }));
        }
        if n_erased > self.rank {
            return Ok(None);
        }
        if n_erased > 0 {
            match self.solve_erasures(bits, erased) {
                ErasureSolve::Solved(word) => {
                    return Ok(Some(LdpcDecoded { data: word[..self.k].to_vec(), method: LdpcMethod::Erasure }));
                }
                ErasureSolve::Ambiguous => return Ok(None),
                ErasureSolve::Inconsistent => {}
            }
        }
        Ok(self.min_sum(bits, erased, max_iterations))
    }

    /// Peeling followed by Gaussian elimination over the stopping set.
    fn solve_erasures(&self, bits: &[bool], erased: &[bool]) -> ErasureSolve {
        let mut word: Vec<bool> = bits.iter().zip(erased).map(|(&b, &e)| b && !e).collect();
        let mut unknown = erased.to_vec();
        let mut pending: Vec<usize> = self.check_vars.iter().map(|vars| vars.iter().filter(|&&v| unknown[v as usize]).count()).collect();
        let mut queue: Vec<usize> = (0..pending.len()).filter(|&c| pending[c] == 1).collect();
        while let Some(c) = queue.pop() {
            if pending[c] != 1 {
                continue;
            }
            let vars = &self.check_vars[c];
            let target = *vars.iter().find(|&&v| unknown[v as usize]).expect("pending count") as usize;
            let value = vars.iter().filter(|&&v| v as usize != target).fold(false, |acc, &v| acc ^ word[v as usize]);
            word[target] = value;
            unknown[target] = false;
            for &c2 in self.checks_of(target) {
                pending[c2 as usize] -= 1;
                if pending[c2 as usize] == 1 {
                    queue.push(c2 as usize);
                }
            }
        }
        let rest: Vec<usize> = (0..self.n).filter(|&v| unknown[v]).collect();
        if rest.is_empty() {
            return if self.is_codeword(&word) { ErasureSolve::Solved(word) } else { ErasureSolve::Inconsistent };
        }
        let mut col_of = vec![usize::MAX; self.n];
        rest.iter().enumerate().for_each(|(i, &v)| col_of[v] = i);
        let e = rest.len();
        // one extra column carries the right-hand side
        let mut rows: Vec<Vec<u64>> = (0..self.check_vars.len())
            .filter(|&c| pending[c] > 0)
            .map(|c| {
                let mut r = vec![0u64; words(e + 1)];
                let mut rhs = false;
                for &v in &self.check_vars[c] {
                    match col_of[v as usize] {
                        usize::MAX => rhs ^= word[v as usize],
                        i => flip(&mut r, i),
                    }
                }
                if rhs {
                    flip(&mut r, e);
                }
                r
            })
            .collect();
        let pivots = eliminate(&mut rows, 0..e);
        if rows[pivots.len()..].iter().any(|r| get(r, e)) {
            return ErasureSolve::Inconsistent;
        }
        if pivots.len() < e || self.rank < e + SPARE_CHECKS {
            return ErasureSolve::Ambiguous;
        }
        for (r, &col) in pivots.iter().enumerate() {
            word[rest[col]] = get(&rows[r], e);
        }
        if self.is_codeword(&word) {
            ErasureSolve::Solved(word)
        } else {
            ErasureSolve::Inconsistent
        }
    }

    /// Normalized min-sum on hard decisions: known bits enter at ±1, erasures at 0.
    fn min_sum(&self, bits: &[bool], erased: &[bool], max_iterations: usize) -> Option<LdpcDecoded> {
        let channel: Vec<f32> =
            bits.iter().zip(erased).map(|(&b, &e)| if e { 0.0 } else if b { -1.0 } else { 1.0 }).collect();
        // messages indexed like check_vars (check-major)
        let offsets: Vec<usize> = std::iter::once(0)
            .chain(self.check_vars.iter().scan(0, |acc, v| {
                *acc += v.len();
                Some(*acc)
            }))
            .collect();
        let mut c2v = vec![0f32; offsets[offsets.len() - 1]];
        let mut total = channel.clone();
        let mut hard = vec![false; self.n];
        for it in 1..=max_iterations {
            for (c, vars) in self.check_vars.iter().enumerate() {
                let msgs = &mut c2v[offsets[c]..offsets[c + 1]];
                let (mut min1, mut min2, mut idx, mut sign) = (f32::INFINITY, f32::INFINITY, 0, false);
                let inputs: Vec<f32> = vars.iter().zip(msgs.iter()).map(|(&v, &m)| total[v as usize] - m).collect();
                for (i, &x) in inputs.iter().enumerate() {
                    let a = x.abs();
                    sign ^= x < 0.0;
                    if a < min1 {
                        min2 = min1;
                        min1 = a;
                        idx = i;
                    } else if a < min2 {
                        min2 = a;
                    }
                }
                for (i, (&v, m)) in vars.iter().zip(msgs.iter_mut()).enumerate() {
                    let mag = MIN_SUM_SCALE * if i == idx { min2 } else { min1 };
                    let negative = sign ^ (inputs[i] < 0.0);
                    let new = if negative { -mag } else { mag };
                    total[v as usize] += new - *m;
                    *m = new;
                }
            }
            for (h, &t) in hard.iter_mut().zip(&total) {
                *h = t < 0.0;
            }
            if self.is_codeword(&hard) {
                return Some(LdpcDecoded { data: hard[..self.k].to_vec(), method: LdpcMethod::BeliefPropagation { iterations: it } });
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_bits(g: &mut SplitMix64, len: usize) -> Vec<bool> {
        (0..len).map(|_| g.next_u64() & 1 == 1).collect()
    }

    #[test]
    fn structure_is_regular() {
        let code = LdpcCode::new(1200, 900, 3, 5).unwrap();
        assert_eq!(code.check_degrees(), (12, 12));
        for v in 0..1200 {
            let mut c = code.checks_of(v).to_vec();
            c.dedup();
            assert_eq!(c.len(), 3);
        }
        assert!(code.rank() <= 300);
    }

    #[test]
    fn encode_gives_codewords() {
        let code = LdpcCode::new(600, 400, 3, 1).unwrap();
        let mut g = SplitMix64::new(3);
        for _ in 0..20 {
            let d = random_bits(&mut g, 400);
            let cw = code.encode(&d).unwrap();
            assert!(code.is_codeword(&cw));
            assert_eq!(cw[..400], d[..]);
            let out = code.decode(&cw, &vec![false; 600], 50).unwrap().unwrap();
            assert_eq!(out.data, d);
        }
    }

    #[test]
    fn same_seed_same_matrix() {
        let a = LdpcCode::new(500, 400, 3, 77).unwrap();
        let b = LdpcCode::new(500, 400, 3, 77).unwrap();
        let c = LdpcCode::new(500, 400, 3, 78).unwrap();
        assert_eq!(a.check_vars, b.check_vars);
        assert_ne!(a.check_vars, c.check_vars);
    }

    #[test]
    fn recovers_erasures_and_flips() {
        let code = LdpcCode::new(2400, 1800, 3, 11).unwrap();
        let mut g = SplitMix64::new(8);
        let d = random_bits(&mut g, 1800);
        let cw = code.encode(&d).unwrap();
        let mut erased = vec![false; 2400];
        let mut rx = cw.clone();
        for _ in 0..200 {
            let p = g.below(2400) as usize;
            erased[p] = true;
            rx[p] = g.next_u64() & 1 == 1;
        }
        assert_eq!(code.decode(&rx, &erased, 50).unwrap().unwrap().data, d);
        let mut rx = cw.clone();
        for _ in 0..10 {
            let p = g.below(2400) as usize;
            rx[p] = !rx[p];
        }
        let out = code.decode(&rx, &vec![false; 2400], 100).unwrap().unwrap();
        assert_eq!(out.data, d);
    }

    #[test]
    fn hopeless_input_is_reported() {
        let code = LdpcCode::new(600, 500, 3, 2).unwrap();
        let erased = vec![true; 600];
        assert_eq!(code.decode(&vec![false; 600], &erased, 20).unwrap(), None);
        let mut g = SplitMix64::new(1);
        let noise = random_bits(&mut g, 600);
        assert_eq!(code.decode(&noise, &vec![false; 600], 20).unwrap(), None);
    }
}

#[cfg(test)]
mod threshold {
    use super::*;

    /// Erasure fraction 0.7 * redundancy over 1000 seeded trials.
    fn success_rate(k: usize, redundancy: f64, trials: u64) -> f64 {
        success_rate_dv(k, redundancy, trials, 3)
    }

    fn success_rate_dv(k: usize, redundancy: f64, trials: u64, dv: usize) -> f64 {
        let parity = (k as f64 * redundancy).ceil() as usize;
        let n = k + parity;
        let code = LdpcCode::new(n, k, dv, 0xC0DE).unwrap();
        let erasures = (0.7 * redundancy * n as f64).floor() as usize;
        let mut ok = 0;
        for t in 0..trials {
            let mut g = SplitMix64::new(t);
            let data: Vec<bool> = (0..k).map(|_| g.next_u64() & 1 == 1).collect();
            let cw = code.encode(&data).unwrap();
            let mut pos: Vec<usize> = (0..n).collect();
            let mut rx = cw.clone();
            let mut erased = vec![false; n];
            for i in 0..erasures {
                let j = i + g.below((n - i) as u64) as usize;
                pos.swap(i, j);
                erased[pos[i]] = true;
                rx[pos[i]] = g.next_u64() & 1 == 1;
            }
            match code.decode(&rx, &erased, 60).unwrap() {
                Some(d) => {
                    assert_eq!(d.data, data, "erasure decode returned wrong data");
                    ok += 1;
                }
                None => {}
            }
        }
        ok as f64 / trials as f64
    }

    #[test]
    fn erasure_threshold_low_redundancy() {
        let rate = success_rate(4096, 0.1, 1000);
        assert!(rate >= 0.99, "success rate {rate}");
    }

    #[test]
    fn erasure_threshold_high_redundancy() {
        let rate = success_rate(2048, 0.3, 1000);
        assert!(rate >= 0.99, "success rate {rate}");
    }
}

