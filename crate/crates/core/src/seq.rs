//! Nucleotide helpers. Sequences are uppercase ASCII `A`, `C`, `G`, `T`.

/// Canonical nucleotide order used for every enumeration: A < C < G < T.
pub const BASES: [u8; 4] = [b'A', b'C', b'G', b'T'];

/// Index of a base in [`BASES`], or `None` for anything else.
#[inline]
pub fn base_index(b: u8) -> Option<usize> {
    match b {
        b'A' => Some(0),
        b'C' => Some(1),
        b'G' => Some(2),
        b'T' => Some(3),
        _ => None,
    }
}

#[inline]
pub fn is_gc(b: u8) -> bool {
    b == b'G' || b == b'C'
}

pub fn gc_count(seq: &[u8]) -> usize {
    seq.iter().filter(|&&b| is_gc(b)).count()
}

/// Length of the longest homopolymer run.
pub fn max_run(seq: &[u8]) -> usize {
    let mut best = 0;
    let mut run = 0;
    let mut prev = None;
    for &b in seq {
        run = if Some(b) == prev { run + 1 } else { 1 };
        prev = Some(b);
        best = best.max(run);
    }
    best
}

/// Number of adjacent equal pairs (`AA`, `CC`, ...); a run of three counts twice.
pub fn doublet_count(seq: &[u8]) -> usize {
    seq.windows(2).filter(|w| w[0] == w[1]).count()
}

pub fn complement(b: u8) -> u8 {
    match b {
        b'A' => b'T',
        b'C' => b'G',
        b'G' => b'C',
        b'T' => b'A',
        other => other,
    }
}

pub fn reverse_complement(seq: &[u8]) -> Vec<u8> {
    seq.iter().rev().map(|&b| complement(b)).collect()
}

pub fn is_acgt(seq: &[u8]) -> bool {
    seq.iter().all(|&b| base_index(b).is_some())
}

/// Packs up to 32 bases into a `u64`, two bits per base, first base most significant.
#[inline]
pub fn pack(seq: &[u8]) -> u64 {
    debug_assert!(seq.len() <= 32);
    seq.iter()
        .fold(0u64, |acc, &b| (acc << 2) | base_index(b).unwrap_or(0) as u64)
}

pub fn unpack(mut packed: u64, len: usize) -> Vec<u8> {
    let mut out = vec![b'A'; len];
    for slot in out.iter_mut().rev() {
        *slot = BASES[(packed & 3) as usize];
        packed >>= 2;
    }
    out
}

/// Bytes to bits, most significant bit first.
pub fn bytes_to_bits(bytes: &[u8]) -> Vec<bool> {
    bytes
        .iter()
        .flat_map(|&byte| (0..8).rev().map(move |i| (byte >> i) & 1 == 1))
        .collect()
}

/// Bits to bytes, most significant bit first; a trailing partial byte is zero-padded.
pub fn bits_to_bytes(bits: &[bool]) -> Vec<u8> {
    bits.chunks(8)
        .map(|chunk| {
            chunk
                .iter()
                .enumerate()
                .fold(0u8, |acc, (i, &bit)| acc | ((bit as u8) << (7 - i)))
        })
        .collect()
}

/// Groups bits into integers of `width` bits, most significant bit first.
pub fn bits_to_symbols(bits: &[bool], width: usize) -> Vec<u32> {
    bits.chunks(width)
        .map(|chunk| {
            let v = chunk.iter().fold(0u32, |acc, &bit| (acc << 1) | bit as u32);
            v << (width - chunk.len())
        })
        .collect()
}

pub fn symbols_to_bits(symbols: &[u32], width: usize) -> Vec<bool> {
    symbols
        .iter()
        .flat_map(|&v| (0..width).rev().map(move |i| (v >> i) & 1 == 1))
        .collect()
}
