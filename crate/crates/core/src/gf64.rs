//! Arithmetic over GF(2^6) with primitive polynomial `p(x) = 1 + x + x^6`.
//!
//! Elements are 6-bit values where bit `i` is the coefficient of `x^i`.
//! Multiplication and inversion are table driven; the tables are built at
//! compile time.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, MulAssign};

use thiserror::Error;

/// Number of field elements.
pub const ORDER: usize = 64;

/// `p(x) = x^6 + x + 1`, including the `x^6` term.
pub const PRIMITIVE_POLY: u8 = 0b100_0011;

/// Width of one symbol in bits.
pub const SYMBOL_BITS: usize = 6;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum GfError {
    #[error("zero has no multiplicative inverse")]
    ZeroInverse,
    #[error("value {0} is not a GF(64) element")]
    OutOfRange(u8),
}

/// Precomputed exp/log tables for the generator `alpha = x`.
pub struct Gf64Tables {
    /// `exp[k] = alpha^k` for `k` in `0..126`; the second half repeats the
    /// first so that `exp[log a + log b]` needs no reduction.
    pub exp: [u8; 126],
    /// `log[a]` for nonzero `a`; `log[0]` is unused.
    pub log: [u8; 64],
}

const fn build_tables() -> Gf64Tables {
    let mut exp = [0u8; 126];
    let mut log = [0u8; 64];
    let mut x: u8 = 1;
    let mut k = 0;
    while k < 63 {
        exp[k] = x;
        exp[k + 63] = x;
        log[x as usize] = k as u8;
        x <<= 1;
        if x & 0b100_0000 != 0 {
            x ^= PRIMITIVE_POLY;
        }
        k += 1;
    }
    Gf64Tables { exp, log }
}

/// The process-wide tables.
pub static TABLES: Gf64Tables = build_tables();

/// One element of GF(64).
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Gf64(u8);

impl Gf64 {
    pub const ZERO: Gf64 = Gf64(0);
    pub const ONE: Gf64 = Gf64(1);
    /// The primitive element `x`.
    pub const ALPHA: Gf64 = Gf64(2);

    /// Builds an element, rejecting values above 63.
    pub fn new(value: u8) -> Result<Self, GfError> {
        if value < 64 {
            Ok(Gf64(value))
        } else {
            Err(GfError::OutOfRange(value))
        }
    }

    /// Builds an element from the low 6 bits of `value`.
    #[inline]
    pub const fn from_low_bits(value: u8) -> Self {
        Gf64(value & 0x3f)
    }

    #[inline]
    pub const fn value(self) -> u8 {
        self.0
    }

    #[inline]
    pub const fn is_zero(self) -> bool {
        self.0 == 0
    }

    /// All 64 elements in value order.
    pub fn all() -> impl Iterator<Item = Gf64> {
        (0..64u8).map(Gf64)
    }

    /// `alpha^k` for any integer `k`.
    pub fn alpha_pow(k: i64) -> Gf64 {
        Gf64(TABLES.exp[k.rem_euclid(63) as usize])
    }

    /// Discrete logarithm base `alpha`, `None` for zero.
    pub fn log(self) -> Option<u8> {
        (self.0 != 0).then(|| TABLES.log[self.0 as usize])
    }

    #[inline]
    pub fn add(self, rhs: Gf64) -> Gf64 {
        Gf64(self.0 ^ rhs.0)
    }

    #[inline]
    pub fn mul(self, rhs: Gf64) -> Gf64 {
        if self.0 == 0 || rhs.0 == 0 {
            return Gf64::ZERO;
        }
        let l = TABLES.log[self.0 as usize] as usize + TABLES.log[rhs.0 as usize] as usize;
        Gf64(TABLES.exp[l])
    }

    pub fn inv(self) -> Result<Gf64, GfError> {
        if self.0 == 0 {
            return Err(GfError::ZeroInverse);
        }
        let l = TABLES.log[self.0 as usize] as usize;
        Ok(Gf64(TABLES.exp[(63 - l) % 63]))
    }

    pub fn div(self, rhs: Gf64) -> Result<Gf64, GfError> {
        Ok(self.mul(rhs.inv()?))
    }
}

/// XOR of the two 6-bit values.
#[inline]
pub fn gf_add(a: Gf64, b: Gf64) -> Gf64 {
    a.add(b)
}

/// Polynomial product reduced modulo `p(x)`.
#[inline]
pub fn gf_mul(a: Gf64, b: Gf64) -> Gf64 {
    a.mul(b)
}

/// Multiplicative inverse; zero is an error.
#[inline]
pub fn gf_inv(a: Gf64) -> Result<Gf64, GfError> {
    a.inv()
}

impl Add for Gf64 {
    type Output = Gf64;
    #[inline]
    fn add(self, rhs: Gf64) -> Gf64 {
        Gf64::add(self, rhs)
    }
}

impl AddAssign for Gf64 {
    #[inline]
    fn add_assign(&mut self, rhs: Gf64) {
        self.0 ^= rhs.0;
    }
}

impl Mul for Gf64 {
    type Output = Gf64;
    #[inline]
    fn mul(self, rhs: Gf64) -> Gf64 {
        Gf64::mul(self, rhs)
    }
}

impl MulAssign for Gf64 {
    #[inline]
    fn mul_assign(&mut self, rhs: Gf64) {
        *self = Gf64::mul(*self, rhs);
    }
}

impl fmt::Debug for Gf64 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Gf64({})", self.0)
    }
}

impl fmt::Display for Gf64 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl TryFrom<u8> for Gf64 {
    type Error = GfError;
    fn try_from(v: u8) -> Result<Self, GfError> {
        Gf64::new(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Shift-and-add multiply, used as an independent check on the tables.
    fn slow_mul(a: u8, b: u8) -> u8 {
        let mut acc: u16 = 0;
        for i in 0..6 {
            if b >> i & 1 == 1 {
                acc ^= (a as u16) << i;
            }
        }
        for bit in (6..12).rev() {
            if acc >> bit & 1 == 1 {
                acc ^= (PRIMITIVE_POLY as u16) << (bit - 6);
            }
        }
        acc as u8
    }

    fn g(v: u8) -> Gf64 {
        Gf64::new(v).unwrap()
    }

    #[test]
    fn addition_examples() {
        assert_eq!(gf_add(g(0), g(0b101010)), g(0b101010));
        assert_eq!(gf_add(g(0b101010), g(0b101010)), g(0));
        assert_eq!(gf_add(g(0b000011), g(0b000101)), g(0b000110));
    }

    #[test]
    fn multiplication_examples() {
        for a in Gf64::all() {
            assert_eq!(gf_mul(Gf64::ZERO, a), Gf64::ZERO);
            assert_eq!(gf_mul(Gf64::ONE, a), a);
        }
        // x^5 * x = x^6 = x + 1
        assert_eq!(gf_mul(g(0b100000), g(0b000010)), g(0b000011));
    }

    #[test]
    fn table_multiply_matches_shift_and_add() {
        for a in 0..64u8 {
            for b in 0..64u8 {
                assert_eq!(gf_mul(g(a), g(b)).value(), slow_mul(a, b), "{a}*{b}");
            }
        }
    }

    #[test]
    fn inverses() {
        assert_eq!(gf_inv(Gf64::ONE).unwrap(), Gf64::ONE);
        assert_eq!(gf_inv(Gf64::ZERO), Err(GfError::ZeroInverse));
        for a in 1..64u8 {
            let inv = gf_inv(g(a)).unwrap();
            assert_eq!(gf_mul(g(a), inv), Gf64::ONE);
            assert_eq!(gf_inv(inv).unwrap(), g(a));
        }
    }

    #[test]
    fn tables_round_trip() {
        assert_eq!(TABLES.exp[0], 1);
        let mut seen = [false; 64];
        for k in 0..63 {
            let v = TABLES.exp[k] as usize;
            assert!(!seen[v] && v != 0);
            seen[v] = true;
        }
        for a in 1..64u8 {
            assert_eq!(TABLES.exp[TABLES.log[a as usize] as usize], a);
        }
    }

    #[test]
    fn alpha_has_order_63() {
        let mut x = Gf64::ALPHA;
        for k in 1..63 {
            assert_ne!(x, Gf64::ONE, "alpha^{k} = 1");
            x = x * Gf64::ALPHA;
        }
        assert_eq!(x, Gf64::ONE);
    }

    #[test]
    fn out_of_range_rejected() {
        assert_eq!(Gf64::new(64), Err(GfError::OutOfRange(64)));
    }
}
