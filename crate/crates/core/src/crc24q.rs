//! CRC-24Q over bit sequences.
//!
//! Register conventions: MSB first, zero initial value, no reflection and no
//! final XOR. Inputs are bit slices (one `u8` per bit, 0 or 1) because the
//! protected message body is 462 bits long and not byte aligned.

use thiserror::Error;

/// Generator polynomial without the `x^24` term.
pub const POLY: u32 = 0x86_4CFB;

/// Length of the protected body: 6-bit type plus 456 data bits.
pub const BODY_BITS: usize = 462;

pub const CRC_BITS: usize = 24;

const MASK: u32 = 0xFF_FFFF;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CrcError {
    #[error("message body has {0} bits, expected {BODY_BITS}")]
    BodyLength(usize),
}

/// A 24-bit CRC value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Crc24(u32);

impl Crc24 {
    pub fn new(value: u32) -> Option<Self> {
        (value <= MASK).then_some(Crc24(value))
    }

    pub fn value(self) -> u32 {
        self.0
    }

    /// The 24 bits of the CRC, MSB first.
    pub fn to_bits(self) -> Vec<u8> {
        (0..CRC_BITS).rev().map(|i| (self.0 >> i & 1) as u8).collect()
    }

    /// Builds a CRC from 24 bits, MSB first. Extra bits beyond 24 are ignored.
    pub fn from_bits(bits: &[u8]) -> Self {
        Crc24(bits.iter().take(CRC_BITS).fold(0, |acc, &b| acc << 1 | (b & 1) as u32))
    }
}

const fn build_table() -> [u32; 256] {
    let mut table = [0u32; 256];
    let mut i = 0;
    while i < 256 {
        let mut reg = (i as u32) << 16;
        let mut k = 0;
        while k < 8 {
            reg <<= 1;
            if reg & 0x100_0000 != 0 {
                reg ^= POLY;
            }
            k += 1;
        }
        table[i] = reg & MASK;
        i += 1;
    }
    table
}

static TABLE: [u32; 256] = build_table();

#[inline]
fn step_bit(reg: u32, bit: u8) -> u32 {
    let top = (reg >> 23 & 1) ^ (bit & 1) as u32;
    let reg = (reg << 1) & MASK;
    if top == 1 {
        reg ^ POLY
    } else {
        reg
    }
}

/// Bit-serial CRC.
pub fn crc24q_bitwise(bits: &[u8]) -> Crc24 {
    Crc24(bits.iter().fold(0, |reg, &b| step_bit(reg, b)))
}

/// CRC of a bit sequence: table-driven over whole-byte chunks with a
/// bit-serial tail.
pub fn crc24q_compute(bits: &[u8]) -> Crc24 {
    let mut reg = 0u32;
    let mut chunks = bits.chunks_exact(8);
    for chunk in &mut chunks {
        let byte = chunk.iter().fold(0u32, |acc, &b| acc << 1 | (b & 1) as u32);
        reg = ((reg << 8) & MASK) ^ TABLE[((reg >> 16) ^ byte) as usize & 0xff];
    }
    for &b in chunks.remainder() {
        reg = step_bit(reg, b);
    }
    Crc24(reg)
}

/// CRC of a byte string read MSB first.
pub fn crc24q_bytes(bytes: &[u8]) -> Crc24 {
    Crc24(bytes.iter().fold(0u32, |reg, &byte| {
        ((reg << 8) & MASK) ^ TABLE[((reg >> 16) ^ byte as u32) as usize & 0xff]
    }))
}

/// True iff the 462-bit body followed by `crc` leaves a zero remainder.
pub fn crc24q_verify(body: &[u8], crc: Crc24) -> Result<bool, CrcError> {
    if body.len() != BODY_BITS {
        return Err(CrcError::BodyLength(body.len()));
    }
    Ok(crc24q_compute(body) == crc)
}

/// Appends the CRC to a body, returning `body ∥ crc`.
pub fn append_crc(body: &[u8]) -> Vec<u8> {
    let mut out = body.to_vec();
    out.extend(crc24q_compute(body).to_bits());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_bits(rng: &mut ChaCha8Rng, n: usize) -> Vec<u8> {
        (0..n).map(|_| rng.random_range(0..2u8)).collect()
    }

    #[test]
    fn empty_is_zero() {
        assert_eq!(crc24q_compute(&[]).value(), 0);
    }

    #[test]
    fn appended_crc_leaves_zero_residue() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let body = random_bits(&mut rng, BODY_BITS);
            assert_eq!(crc24q_compute(&append_crc(&body)).value(), 0);
        }
    }

    #[test]
    fn table_and_bitwise_agree_on_random_lengths() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let n = rng.random_range(0..600);
            let bits = random_bits(&mut rng, n);
            assert_eq!(crc24q_compute(&bits), crc24q_bitwise(&bits));
        }
    }

    #[test]
    fn verify_rejects_wrong_length() {
        assert_eq!(crc24q_verify(&[0; 10], Crc24::default()), Err(CrcError::BodyLength(10)));
    }

    #[test]
    fn crc_flip_sweep() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let body = random_bits(&mut rng, BODY_BITS);
        let crc = crc24q_compute(&body);
        assert!(crc24q_verify(&body, crc).unwrap());
        for i in 0..BODY_BITS {
            let mut b = body.clone();
            b[i] ^= 1;
            assert!(!crc24q_verify(&b, crc).unwrap(), "body bit {i}");
        }
        for i in 0..CRC_BITS {
            let bad = Crc24(crc.value() ^ (1 << i));
            assert!(!crc24q_verify(&body, bad).unwrap(), "crc bit {i}");
        }
    }

    #[test]
    fn bytes_and_bits_agree() {
        let data = b"123456789";
        let bits: Vec<u8> = data.iter().flat_map(|&b| (0..8).rev().map(move |i| b >> i & 1)).collect();
        assert_eq!(crc24q_bytes(data), crc24q_compute(&bits));
    }

    #[test]
    fn crc_bits_round_trip() {
        let c = Crc24::new(0xA5_5A3C).unwrap();
        assert_eq!(Crc24::from_bits(&c.to_bits()), c);
        assert!(Crc24::new(1 << 24).is_none());
    }
}
