//! Frame synchronization on the 1000 sps symbol stream: preamble search,
//! one-second partner confirmation and the PRN field check.
//!
//! Symbols map to bits as `+1 -> 0`, `-1 -> 1`.

use thiserror::Error;

use crate::scalar::Real;

pub const PREAMBLE: u16 = 0xEB90;
pub const PREAMBLE_LEN: usize = 16;
pub const PRN_FIELD_LEN: usize = 6;
pub const RESERVED_LEN: usize = 6;
pub const HEADER_LEN: usize = PREAMBLE_LEN + PRN_FIELD_LEN + RESERVED_LEN;
pub const CODE_SYMBOLS: usize = 972;
pub const FRAME_LEN: usize = HEADER_LEN + CODE_SYMBOLS;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FrameError {
    #[error("frame at {start} needs {need} symbols, stream has {have}")]
    Insufficient { start: usize, need: usize, have: usize },
    #[error("expected {CODE_SYMBOLS} code bits, got {0}")]
    CodeLength(usize),
    #[error("PRN {0} does not fit the 6-bit field")]
    Prn(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarity {
    Normal,
    Inverted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PreambleHit {
    pub position: usize,
    pub polarity: Polarity,
    /// Hard correlation with the preamble, +16 or -16.
    pub correlation: i32,
    /// PRN field as read, before polarity correction; `None` when the
    /// stream ends inside it.
    pub raw_prn_field: Option<u8>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Confirmation {
    pub confirmed: Vec<PreambleHit>,
    pub no_partner: usize,
    pub prn_mismatch: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame<T: Real> {
    pub start: usize,
    pub polarity: Polarity,
    /// Polarity-corrected PRN field.
    pub prn_field: u8,
    pub reserved: u8,
    /// Polarity-corrected soft values.
    pub code_symbols: Vec<T>,
    pub source_prn: u8,
}

impl<T: Real> Frame<T> {
    pub fn hard_bits(&self) -> Vec<u8> {
        self.code_symbols.iter().map(|&s| hard_bit(s)).collect()
    }
}

#[inline]
fn hard_bit<T: Real>(s: T) -> u8 {
    (s < T::zero()) as u8
}

fn read_field<T: Real>(symbols: &[T], from: usize, len: usize) -> Option<u8> {
    let s = symbols.get(from..from + len)?;
    Some(s.iter().fold(0u8, |acc, &v| acc << 1 | hard_bit(v)))
}

/// Positions where all 16 hard-decided symbols match the preamble or its
/// complement.
pub fn find_preambles<T: Real>(symbols: &[T]) -> Vec<PreambleHit> {
    let mut hits = Vec::new();
    let mut reg: u16 = 0;
    for (i, &s) in symbols.iter().enumerate() {
        reg = reg << 1 | hard_bit(s) as u16;
        if i + 1 < PREAMBLE_LEN {
            continue;
        }
        let polarity = if reg == PREAMBLE {
            Polarity::Normal
        } else if reg == !PREAMBLE {
            Polarity::Inverted
        } else {
            continue;
        };
        let position = i + 1 - PREAMBLE_LEN;
        hits.push(PreambleHit {
            position,
            polarity,
            correlation: if polarity == Polarity::Normal { 16 } else { -16 },
            raw_prn_field: read_field(symbols, position + PREAMBLE_LEN, PRN_FIELD_LEN),
        });
    }
    hits
}

/// Keeps hits with a same-polarity partner exactly one frame away whose
/// PRN field agrees with `source_prn` (complemented fields sum to 63).
pub fn confirm_frame_start(hits: &[PreambleHit], source_prn: u8) -> Confirmation {
    let mut out = Confirmation::default();
    for h in hits {
        let partner = hits.iter().any(|o| {
            o.polarity == h.polarity && (o.position == h.position + FRAME_LEN || o.position + FRAME_LEN == h.position)
        });
        if !partner {
            out.no_partner += 1;
            continue;
        }
        let prn_ok = match (h.raw_prn_field, h.polarity) {
            (None, _) => true,
            (Some(f), Polarity::Normal) => f == source_prn,
            (Some(f), Polarity::Inverted) => f as u16 + source_prn as u16 == 63,
        };
        if prn_ok {
            out.confirmed.push(*h);
        } else {
            out.prn_mismatch += 1;
        }
    }
    out
}

/// Slices one frame and undoes inversion.
pub fn extract_frame<T: Real>(symbols: &[T], start: &PreambleHit, source_prn: u8) -> Result<Frame<T>, FrameError> {
    let p = start.position;
    if symbols.len() < p + FRAME_LEN {
        return Err(FrameError::Insufficient { start: p, need: FRAME_LEN, have: symbols.len().saturating_sub(p) });
    }
    let sign = if start.polarity == Polarity::Inverted { -T::one() } else { T::one() };
    let s: Vec<T> = symbols[p..p + FRAME_LEN].iter().map(|&v| v * sign).collect();
    Ok(Frame {
        start: p,
        polarity: start.polarity,
        prn_field: read_field(&s, PREAMBLE_LEN, PRN_FIELD_LEN).expect("in bounds"),
        reserved: read_field(&s, PREAMBLE_LEN + PRN_FIELD_LEN, RESERVED_LEN).expect("in bounds"),
        code_symbols: s[HEADER_LEN..].to_vec(),
        source_prn,
    })
}

/// Transmit side: the 1000 +/-1 symbols of one frame.
pub fn frame_symbols(prn: u8, code_bits: &[u8]) -> Result<Vec<i8>, FrameError> {
    if prn >= 64 {
        return Err(FrameError::Prn(prn));
    }
    if code_bits.len() != CODE_SYMBOLS {
        return Err(FrameError::CodeLength(code_bits.len()));
    }
    let level = |b: u8| if b & 1 == 0 { 1i8 } else { -1 };
    let mut s = Vec::with_capacity(FRAME_LEN);
    s.extend((0..PREAMBLE_LEN).rev().map(|i| level((PREAMBLE >> i) as u8)));
    s.extend((0..PRN_FIELD_LEN).rev().map(|i| level(prn >> i)));
    s.extend(std::iter::repeat_n(1i8, RESERVED_LEN));
    s.extend(code_bits.iter().map(|&b| level(b)));
    Ok(s)
}
