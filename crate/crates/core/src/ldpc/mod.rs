//! The 64-ary LDPC(162,81) code carried in each PPP-B2b frame.
//!
//! A frame's 486 message bits are packed MSB-first into 81 GF(64) symbols,
//! encoded systematically into 162 symbols (information first, parity
//! second), and transmitted as 972 binary symbols.

mod decoder;
mod generator;
mod matrix;
mod synthetic;

pub use decoder::{decode, DecodeResult, Decoder, ReceivedSequence};
pub use generator::{derive_generator, encode, GeneratorMatrix};
pub use matrix::{load_parity_matrix, syndrome, ParityCheckMatrix};
pub use synthetic::{synthetic_parity_matrix, SYNTHETIC_SEED};

use thiserror::Error;

use crate::gf64::{Gf64, SYMBOL_BITS};

/// Codeword length in symbols.
pub const N: usize = 162;
/// Information length in symbols.
pub const K: usize = 81;
/// Number of parity checks.
pub const M: usize = N - K;
/// Message length in bits.
pub const MESSAGE_BITS: usize = K * SYMBOL_BITS;
/// Codeword length in bits.
pub const CODE_BITS: usize = N * SYMBOL_BITS;

/// Codeword positions holding the information symbols.
pub const INFO_POSITIONS: std::ops::Range<usize> = 0..K;

/// Default iteration cap for the decoder.
pub const DEFAULT_ITR_MAX: usize = 10;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LdpcError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("matrix dimension mismatch: {0}")]
    Dimension(String),
    #[error("entry ({row}, {col}) is out of range")]
    OutOfRange { row: usize, col: usize },
    #[error("entry ({row}, {col}) has element 0")]
    ZeroElement { row: usize, col: usize },
    #[error("duplicate entry ({row}, {col})")]
    Duplicate { row: usize, col: usize },
    #[error("parity-check matrix is rank deficient: no pivot for row {pivot_row}")]
    RankDeficient { pivot_row: usize },
    #[error("parity part of the matrix is singular at pivot row {pivot_row}; information-first systematic form impossible")]
    SingularParityBlock { pivot_row: usize },
    #[error("bit length {0} is not divisible by 6")]
    BitLength(usize),
    #[error("expected {expected} symbols, got {got}")]
    SymbolCount { expected: usize, got: usize },
}

/// 162 GF(64) symbols.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Codeword(pub Vec<Gf64>);

impl Codeword {
    pub fn zero() -> Self {
        Codeword(vec![Gf64::ZERO; N])
    }

    pub fn symbols(&self) -> &[Gf64] {
        &self.0
    }

    /// Information part of a systematic codeword.
    pub fn message(&self) -> &[Gf64] {
        &self.0[INFO_POSITIONS]
    }

    pub fn to_bits(&self) -> Vec<u8> {
        symbols_to_bits(&self.0)
    }
}

/// Packs bits into symbols: the first bit of each group of six is the MSB,
/// i.e. the coefficient of `x^5`.
pub fn bits_to_symbols(bits: &[u8]) -> Result<Vec<Gf64>, LdpcError> {
    if bits.len() % SYMBOL_BITS != 0 {
        return Err(LdpcError::BitLength(bits.len()));
    }
    Ok(bits
        .chunks_exact(SYMBOL_BITS)
        .map(|c| Gf64::from_low_bits(c.iter().fold(0u8, |acc, &b| acc << 1 | (b & 1))))
        .collect())
}

/// Inverse of [`bits_to_symbols`].
pub fn symbols_to_bits(symbols: &[Gf64]) -> Vec<u8> {
    symbols
        .iter()
        .flat_map(|s| (0..SYMBOL_BITS).rev().map(move |i| s.value() >> i & 1))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_bits_to_zero_symbols() {
        let s = bits_to_symbols(&[0; MESSAGE_BITS]).unwrap();
        assert_eq!(s.len(), K);
        assert!(s.iter().all(|x| x.is_zero()));
    }

    #[test]
    fn msb_first_mapping() {
        assert_eq!(bits_to_symbols(&[1, 0, 0, 0, 0, 0]).unwrap(), vec![Gf64::new(32).unwrap()]);
        assert_eq!(bits_to_symbols(&[0, 0, 0, 0, 1, 1]).unwrap(), vec![Gf64::new(3).unwrap()]);
    }

    #[test]
    fn length_must_divide_by_six() {
        assert_eq!(bits_to_symbols(&[0; 7]), Err(LdpcError::BitLength(7)));
    }

    proptest! {
        #[test]
        fn bits_round_trip(bits in proptest::collection::vec(0u8..2, 0..100).prop_map(|mut v| { v.truncate(v.len() / 6 * 6); v })) {
            let s = bits_to_symbols(&bits).unwrap();
            prop_assert_eq!(symbols_to_bits(&s), bits);
        }
    }
}
