//! Systematic Reed–Solomon codes over GF(2^m), shortened to any length
//! `n <= 2^m - 1`, with errors-and-erasures decoding.
//!
//! Codeword symbol `i` is the coefficient of `x^(n-1-i)`: the `k` data symbols
//! come first, followed by `n - k` parity symbols. The generator polynomial is
//! `g(x) = (x - α^0)(x - α^1)…(x - α^(n-k-1))`.

use super::gf::GaloisField;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct ReedSolomon {
    field: GaloisField,
    n: usize,
    k: usize,
    /// Generator coefficients, highest degree first (monic, length n-k+1).
    generator: Vec<u16>,
}

/// Outcome of a successful decode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corrected {
    pub data: Vec<u16>,
    /// Symbols changed, erasures included.
    pub corrected: usize,
}

impl ReedSolomon {
    pub fn new(field: GaloisField, n: usize, k: usize) -> Result<Self> {
        if k == 0 || k >= n || n > field.order() {
            return Err(Error::Config(format!(
                "RS({n},{k}) impossible over GF(2^{}) (n must be < {})",
                field.bits(),
                field.order() + 1
            )));
        }
        let mut generator = vec![1u16];
        for i in 0..(n - k) {
            // multiply by (x + α^i)
            let root = field.alpha_pow(i as i64);
            let mut next = vec![0u16; generator.len() + 1];
            for (j, &g) in generator.iter().enumerate() {
                next[j] ^= g;
                next[j + 1] ^= field.mul(g, root);
            }
            generator = next;
        }
        Ok(ReedSolomon { field, n, k, generator })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn parity_len(&self) -> usize {
        self.n - self.k
    }

    pub fn field(&self) -> &GaloisField {
        &self.field
    }

    pub fn generator(&self) -> &[u16] {
        &self.generator
    }

    /// Appends `n - k` parity symbols to `data` (length `k`).
    pub fn encode(&self, data: &[u16]) -> Result<Vec<u16>> {
        if data.len() != self.k {
            return Err(Error::Length { expected: self.k, actual: data.len() });
        }
        let f = &self.field;
        let nk = self.parity_len();
        // LFSR division of data(x)·x^(n-k) by g(x).
        let mut rem = vec![0u16; nk];
        for &d in data {
            let feedback = d ^ rem[0];
            rem.rotate_left(1);
            rem[nk - 1] = 0;
            if feedback != 0 {
                for (r, &g) in rem.iter_mut().zip(&self.generator[1..]) {
                    *r ^= f.mul(feedback, g);
                }
            }
        }
        let mut out = Vec::with_capacity(self.n);
        out.extend_from_slice(data);
        out.extend_from_slice(&rem);
        Ok(out)
    }

    fn syndromes(&self, word: &[u16]) -> Vec<u16> {
        let f = &self.field;
        (0..self.parity_len())
            .map(|j| {
                let x = f.alpha_pow(j as i64);
                word.iter().fold(0u16, |acc, &c| f.mul(acc, x) ^ c)
            })
            .collect()
    }

    /// Corrects any pattern with `2·errors + erasures <= n - k`.
    ///
    /// Returns `None` when the word cannot be decoded; the returned data is
    /// always that of a codeword within the correction radius of `received`.
    pub fn decode(&self, received: &[u16], erasures: &[usize]) -> Result<Option<Corrected>> {
        if received.len() != self.n {
            return Err(Error::Length { expected: self.n, actual: received.len() });
        }
        let f = &self.field;
        let nk = self.parity_len();
        let mut erasures: Vec<usize> = erasures.to_vec();
        erasures.sort_unstable();
        erasures.dedup();
        if erasures.iter().any(|&e| e >= self.n) || erasures.len() > nk {
            return Ok(None);
        }
        let mut word = received.to_vec();
        for &e in &erasures {
            word[e] = 0;
        }
        let synd = self.syndromes(&word);
        if synd.iter().all(|&s| s == 0) {
            return Ok(Some(Corrected { data: word[..self.k].to_vec(), corrected: 0 }));
        }
        // Locator X_i = α^(n-1-i) for codeword index i.
        let locator_of = |i: usize| f.alpha_pow((self.n - 1 - i) as i64);

        // Erasure locator Γ(x) = Π (1 - X_j x), lowest degree first.
        let mut lambda = vec![1u16];
        for &e in &erasures {
            let x = locator_of(e);
            let mut next = vec![0u16; lambda.len() + 1];
            for (j, &c) in lambda.iter().enumerate() {
                next[j] ^= c;
                next[j + 1] ^= f.mul(c, x);
            }
            lambda = next;
        }
        // Berlekamp–Massey seeded with the erasure locator.
        let nu = erasures.len();
        let mut b = lambda.clone();
        let mut l = nu;
        for r in nu..nk {
            let mut delta = 0u16;
            for (i, &c) in lambda.iter().enumerate() {
                if i <= r {
                    delta ^= f.mul(c, synd[r - i]);
                }
            }
            // b <- x·b (shift), then combine
            b.insert(0, 0);
            if delta != 0 {
                let mut t = lambda.clone();
                if t.len() < b.len() {
                    t.resize(b.len(), 0);
                }
                for (ti, &bi) in t.iter_mut().zip(&b) {
                    *ti ^= f.mul(delta, bi);
                }
                if 2 * l <= r + nu {
                    l = r + 1 + nu - l;
                    let inv = f.inv(delta);
                    b = lambda.iter().map(|&c| f.mul(c, inv)).collect();
                }
                lambda = t;
            }
        }
        while lambda.len() > 1 && *lambda.last().unwrap() == 0 {
            lambda.pop();
        }
        let degree = lambda.len() - 1;
        if degree != l || 2 * (l - nu) + nu > nk {
            return Ok(None);
        }
        // Chien search restricted to the shortened positions.
        let mut positions = Vec::with_capacity(degree);
        for i in 0..self.n {
            let xinv = f.alpha_pow(-((self.n - 1 - i) as i64));
            let v = lambda.iter().rev().fold(0u16, |acc, &c| f.mul(acc, xinv) ^ c);
            if v == 0 {
                positions.push(i);
            }
        }
        if positions.len() != degree {
            return Ok(None);
        }
        // Ω(x) = S(x)Λ(x) mod x^(n-k)
        let mut omega = vec![0u16; nk];
        for (i, &li) in lambda.iter().enumerate() {
            for (j, &sj) in synd.iter().enumerate() {
                if i + j < nk {
                    omega[i + j] ^= f.mul(li, sj);
                }
            }
        }
        // Formal derivative: only odd-degree terms survive in characteristic 2.
        let derivative: Vec<u16> = (1..lambda.len()).map(|i| if i % 2 == 1 { lambda[i] } else { 0 }).collect();
        let eval = |poly: &[u16], x: u16| poly.iter().rev().fold(0u16, |acc, &c| f.mul(acc, x) ^ c);
        for &i in &positions {
            let x = locator_of(i);
            let xinv = f.inv(x);
            let denom = eval(&derivative, xinv);
            if denom == 0 {
                return Ok(None);
            }
            let magnitude = f.mul(x, f.div(eval(&omega, xinv), denom));
            word[i] ^= magnitude;
        }
        if self.syndromes(&word).iter().any(|&s| s != 0) {
            return Ok(None);
        }
        let corrected = word.iter().zip(received).filter(|(a, b)| a != b).count()
            + erasures.iter().filter(|&&e| word[e] == received[e]).count();
        Ok(Some(Corrected { data: word[..self.k].to_vec(), corrected }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rs15() -> ReedSolomon {
        ReedSolomon::new(GaloisField::with_default_poly(4).unwrap(), 15, 11).unwrap()
    }

    /// Independent parity oracle: schoolbook long division of data(x)·x^(n-k) by g(x),
    /// with the field multiplication done by shift-and-add against the raw polynomial.
    fn oracle_parity(data: &[u16], n: usize, k: usize, bits: u32, poly: u32) -> Vec<u16> {
        let mul = |mut a: u32, mut b: u32| {
            let mut p = 0u32;
            while b != 0 {
                if b & 1 != 0 {
                    p ^= a;
                }
                b >>= 1;
                a <<= 1;
                if a & (1 << bits) != 0 {
                    a ^= poly;
                }
            }
            p
        };
        // g(x) built from scratch, highest degree first
        let mut g = vec![1u32];
        let mut alpha_i = 1u32;
        for _ in 0..(n - k) {
            let mut next = vec![0u32; g.len() + 1];
            for (j, &c) in g.iter().enumerate() {
                next[j] ^= c;
                next[j + 1] ^= mul(c, alpha_i);
            }
            g = next;
            alpha_i = mul(alpha_i, 2);
        }
        let mut dividend: Vec<u32> = data.iter().map(|&d| d as u32).collect();
        dividend.extend(std::iter::repeat(0).take(n - k));
        for i in 0..k {
            let coef = dividend[i];
            if coef != 0 {
                for (j, &gj) in g.iter().enumerate() {
                    dividend[i + j] ^= mul(coef, gj);
                }
            }
        }
        dividend[k..].iter().map(|&v| v as u16).collect()
    }

    #[test]
    fn parity_count() {
        let rs = ReedSolomon::new(GaloisField::with_default_poly(8).unwrap(), 255, 223).unwrap();
        assert_eq!(rs.parity_len(), 32);
        assert_eq!(rs.encode(&[0; 223]).unwrap().len(), 255);
    }

    #[test]
    fn parity_matches_long_division_oracle() {
        let rs = rs15();
        let zeros = [0u16; 11];
        assert_eq!(rs.encode(&zeros).unwrap()[11..], oracle_parity(&zeros, 15, 11, 4, 0x13)[..]);
        assert!(rs.encode(&zeros).unwrap().iter().all(|&s| s == 0));
        let data: Vec<u16> = (1..=11).collect();
        assert_eq!(rs.encode(&data).unwrap()[11..], oracle_parity(&data, 15, 11, 4, 0x13)[..]);
        let rs12 = ReedSolomon::new(GaloisField::with_default_poly(12).unwrap(), 40, 30).unwrap();
        let data: Vec<u16> = (0..30).map(|i| (i * 137 + 11) % 4096).collect();
        assert_eq!(rs12.encode(&data).unwrap()[30..], oracle_parity(&data, 40, 30, 12, 0x1053)[..]);
    }

    #[test]
    fn every_two_error_pattern_corrected() {
        let rs = rs15();
        let data: Vec<u16> = (0..11).map(|i| (i * 7 + 3) % 16).collect();
        let cw = rs.encode(&data).unwrap();
        for p1 in 0..15 {
            for p2 in p1 + 1..15 {
                for m1 in 1..16u16 {
                    for m2 in 1..16u16 {
                        let mut r = cw.clone();
                        r[p1] ^= m1;
                        r[p2] ^= m2;
                        let out = rs.decode(&r, &[]).unwrap().expect("correctable");
                        assert_eq!(out.data, data);
                        assert_eq!(out.corrected, 2);
                    }
                }
            }
        }
    }

    #[test]
    fn every_four_erasure_subset_corrected() {
        let rs = rs15();
        let data: Vec<u16> = (0..11).map(|i| (i * 5 + 1) % 16).collect();
        let cw = rs.encode(&data).unwrap();
        for mask in 0u32..(1 << 15) {
            if mask.count_ones() > 4 {
                continue;
            }
            let erased: Vec<usize> = (0..15).filter(|i| mask & (1 << i) != 0).collect();
            let mut r = cw.clone();
            for &e in &erased {
                r[e] = 0xF ^ r[e];
            }
            let out = rs.decode(&r, &erased).unwrap().expect("erasures within bound");
            assert_eq!(out.data, data);
        }
    }

    #[test]
    fn mixed_errors_and_erasures_within_bound() {
        let rs = rs15();
        let data: Vec<u16> = (0..11).map(|i| (i * 3 + 9) % 16).collect();
        let cw = rs.encode(&data).unwrap();
        // one error + two erasures: 2·1 + 2 = 4
        for e in 0..15 {
            for a in 0..15 {
                for b in a + 1..15 {
                    if e == a || e == b {
                        continue;
                    }
                    let mut r = cw.clone();
                    r[e] ^= 6;
                    r[a] = 0;
                    r[b] ^= 1;
                    let out = rs.decode(&r, &[a, b]).unwrap().expect("2e+s = 4");
                    assert_eq!(out.data, data);
                }
            }
        }
    }

    #[test]
    fn too_many_erasures_fail_cleanly() {
        let rs = rs15();
        let cw = rs.encode(&[1; 11]).unwrap();
        assert_eq!(rs.decode(&cw, &[0, 1, 2, 3, 4]).unwrap(), None);
    }

    #[test]
    fn beyond_radius_output_is_always_a_nearby_codeword() {
        // Three errors exceed t = 2: the decoder may fail or land on another
        // codeword, but whatever it returns must re-encode to a word within t.
        let rs = rs15();
        let data: Vec<u16> = (0..11).collect();
        let cw = rs.encode(&data).unwrap();
        let mut g = crate::prng::SplitMix64::new(9);
        let (mut failed, mut wrong) = (0, 0);
        for _ in 0..2000 {
            let mut r = cw.clone();
            let mut pos: Vec<usize> = (0..15).collect();
            for i in 0..3 {
                let j = i + g.below((15 - i) as u64) as usize;
                pos.swap(i, j);
                r[pos[i]] ^= 1 + g.below(15) as u16;
            }
            match rs.decode(&r, &[]).unwrap() {
                None => failed += 1,
                Some(out) => {
                    let again = rs.encode(&out.data).unwrap();
                    let dist = again.iter().zip(&r).filter(|(a, b)| a != b).count();
                    assert!(dist <= 2);
                    assert_ne!(out.data, data);
                    wrong += 1;
                }
            }
        }
        assert_eq!(failed + wrong, 2000);
        assert!(failed > wrong);
    }

    #[test]
    fn large_field_beyond_radius_is_detected() {
        let rs = ReedSolomon::new(GaloisField::with_default_poly(12).unwrap(), 1000, 900).unwrap();
        let data: Vec<u16> = (0..900).map(|i| (i * 31 % 4096) as u16).collect();
        let cw = rs.encode(&data).unwrap();
        let mut g = crate::prng::SplitMix64::new(4);
        for _ in 0..5 {
            let mut r = cw.clone();
            let mut pos: Vec<usize> = (0..1000).collect();
            for i in 0..51 {
                let j = i + g.below((1000 - i) as u64) as usize;
                pos.swap(i, j);
                r[pos[i]] ^= 1 + g.below(4095) as u16;
            }
            assert_eq!(rs.decode(&r, &[]).unwrap(), None);
        }
        let mut r = cw.clone();
        for p in (0..1000).step_by(20) {
            r[p] ^= 0x5A5;
        }
        assert_eq!(rs.decode(&r, &[]).unwrap().unwrap().data, data);
    }
}
