//! Binary extension fields GF(2^m) for 2 <= m <= 16, backed by log/antilog tables.

use crate::error::{Error, Result};

/// Default primitive polynomial per field width (bit m set), indexed by m.
const PRIMITIVE_POLYS: [u32; 17] = [
    0, 0, 0x7, 0xB, 0x13, 0x25, 0x43, 0x89, 0x11D, 0x211, 0x409, 0x805, 0x1053, 0x201B, 0x4443, 0x8003,
    0x1100B,
];

pub fn default_primitive_poly(bits: u32) -> Option<u32> {
    PRIMITIVE_POLYS.get(bits as usize).copied().filter(|&p| p != 0)
}

#[derive(Debug, Clone)]
pub struct GaloisField {
    bits: u32,
    poly: u32,
    /// exp[i] = α^i for i in 0..2·order (doubled to skip a modulo in `mul`).
    exp: Vec<u16>,
    log: Vec<u16>,
}

impl GaloisField {
    /// Builds GF(2^bits) over `poly`; fails unless `poly` is primitive.
    pub fn new(bits: u32, poly: u32) -> Result<Self> {
        if !(2..=16).contains(&bits) {
            return Err(Error::Config(format!("symbol_bits {bits} outside 2..=16")));
        }
        if poly >> bits != 1 {
            return Err(Error::Config(format!("field polynomial {poly:#x} is not of degree {bits}")));
        }
        let size = 1usize << bits;
        let order = size - 1;
        let mut exp = vec![0u16; 2 * order];
        let mut log = vec![0u16; size];
        let mut x = 1u32;
        for i in 0..order {
            if i > 0 && x == 1 {
                return Err(Error::Config(format!("field polynomial {poly:#x} is not primitive")));
            }
            exp[i] = x as u16;
            log[x as usize] = i as u16;
            x <<= 1;
            if x & (1 << bits) != 0 {
                x ^= poly;
            }
        }
        if x != 1 {
            return Err(Error::Config(format!("field polynomial {poly:#x} is not primitive")));
        }
        for i in order..2 * order {
            exp[i] = exp[i - order];
        }
        Ok(GaloisField { bits, poly, exp, log })
    }

    pub fn with_default_poly(bits: u32) -> Result<Self> {
        let poly = default_primitive_poly(bits).ok_or_else(|| Error::Config(format!("no field of {bits} bits")))?;
        Self::new(bits, poly)
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn poly(&self) -> u32 {
        self.poly
    }

    /// Multiplicative group order 2^m - 1.
    pub fn order(&self) -> usize {
        (1 << self.bits) - 1
    }

    #[inline]
    pub fn mul(&self, a: u16, b: u16) -> u16 {
        if a == 0 || b == 0 {
            0
        } else {
            self.exp[self.log[a as usize] as usize + self.log[b as usize] as usize]
        }
    }

    #[inline]
    pub fn div(&self, a: u16, b: u16) -> u16 {
        assert!(b != 0, "division by zero in GF(2^{})", self.bits);
        if a == 0 {
            0
        } else {
            self.exp[self.log[a as usize] as usize + self.order() - self.log[b as usize] as usize]
        }
    }

    #[inline]
    pub fn inv(&self, a: u16) -> u16 {
        self.div(1, a)
    }

    /// α^e for any integer exponent.
    #[inline]
    pub fn alpha_pow(&self, e: i64) -> u16 {
        self.exp[e.rem_euclid(self.order() as i64) as usize]
    }

    #[inline]
    pub fn log(&self, a: u16) -> usize {
        debug_assert!(a != 0);
        self.log[a as usize] as usize
    }
}
