//! Ranging-code generation: Gold codes from two 13-stage LFSRs, continued
//! cyclically to 10230 chips.
//!
//! Code-table text format, one PRN per line:
//!
//! ```text
//! # prn taps1 seed1 taps2 seed2 phase_offset
//! 59 1,3,4,13 1010110011101 9,10,12,13 0110011100101 317
//! ```
//!
//! Taps are comma-separated stage indices (1..=13). Seeds are 13 binary
//! digits, leftmost digit is stage 1. Chip `k` is
//! `s1[k mod P1] xor s2[(k + phase_offset) mod P2]`, where `s1`, `s2` are one
//! period of each register's output, mapped `0 -> +1`, `1 -> -1`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

/// Number of LFSR stages.
pub const STAGES: usize = 13;
/// Chips per ranging-code period.
pub const CODE_LENGTH: usize = 10230;
/// Chipping rate in chips per second.
pub const CHIP_RATE_HZ: f64 = 10.23e6;
/// Carrier frequency in Hz.
pub const CARRIER_HZ: f64 = 1207.14e6;
/// Duration of one code period in seconds.
pub const CODE_PERIOD_S: f64 = CODE_LENGTH as f64 / CHIP_RATE_HZ;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodeError {
    #[error("LFSR needs at least one tap")]
    NoTaps,
    #[error("tap {0} outside 1..=13")]
    BadTap(u8),
    #[error("LFSR initial state is all zero")]
    ZeroState,
    #[error("unknown PRN {0}")]
    UnknownPrn(u8),
    #[error("duplicate PRN {0} in code table")]
    DuplicatePrn(u8),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// A Fibonacci LFSR: the feedback is the XOR of the tapped stages, shifted
/// into stage 1; the output is stage 13.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LfsrSpec {
    taps: Vec<u8>,
    /// Bit `i` is stage `i + 1`.
    initial_state: u16,
}

impl LfsrSpec {
    pub fn new(taps: &[u8], initial_state: u16) -> Result<Self, CodeError> {
        if taps.is_empty() {
            return Err(CodeError::NoTaps);
        }
        if let Some(&t) = taps.iter().find(|&&t| t == 0 || t as usize > STAGES) {
            return Err(CodeError::BadTap(t));
        }
        let initial_state = initial_state & ((1 << STAGES) - 1);
        if initial_state == 0 {
            return Err(CodeError::ZeroState);
        }
        let mut taps = taps.to_vec();
        taps.sort_unstable();
        taps.dedup();
        Ok(LfsrSpec { taps, initial_state })
    }

    /// Parses `"1,3,4,13"` and a 13-digit binary seed (leftmost = stage 1).
    pub fn parse(taps: &str, seed: &str) -> Result<Self, String> {
        let taps = taps
            .split(',')
            .map(|t| t.trim().parse::<u8>().map_err(|_| format!("bad tap `{t}`")))
            .collect::<Result<Vec<_>, _>>()?;
        if seed.len() != STAGES || !seed.chars().all(|c| c == '0' || c == '1') {
            return Err(format!("seed `{seed}` is not {STAGES} binary digits"));
        }
        let state = seed
            .chars()
            .enumerate()
            .fold(0u16, |acc, (i, c)| if c == '1' { acc | 1 << i } else { acc });
        Self::new(&taps, state).map_err(|e| e.to_string())
    }

    pub fn taps(&self) -> &[u8] {
        &self.taps
    }

    pub fn initial_state(&self) -> u16 {
        self.initial_state
    }

    fn taps_text(&self) -> String {
        self.taps.iter().map(u8::to_string).collect::<Vec<_>>().join(",")
    }

    fn seed_text(&self) -> String {
        (0..STAGES).map(|i| if self.initial_state >> i & 1 == 1 { '1' } else { '0' }).collect()
    }

    fn tap_mask(&self) -> u16 {
        self.taps.iter().fold(0u16, |m, &t| m | 1 << (t - 1))
    }
}

/// Output bits of the register, one per clock.
pub fn lfsr_sequence(spec: &LfsrSpec, length: usize) -> Vec<u8> {
    let mask = spec.tap_mask();
    let mut state = spec.initial_state;
    let mut out = Vec::with_capacity(length);
    for _ in 0..length {
        out.push((state >> (STAGES - 1) & 1) as u8);
        let fb = (state & mask).count_ones() as u16 & 1;
        state = ((state << 1) | fb) & ((1 << STAGES) - 1);
    }
    out
}

/// State-cycle length of the register from its initial state, or `None` if
/// the state never returns (cannot happen for a shift register whose
/// feedback includes stage 13, but can for degenerate tap sets).
pub fn lfsr_period(spec: &LfsrSpec) -> Option<usize> {
    let mask = spec.tap_mask();
    let mut state = spec.initial_state;
    for k in 1..=(1usize << STAGES) {
        let fb = (state & mask).count_ones() as u16 & 1;
        state = ((state << 1) | fb) & ((1 << STAGES) - 1);
        if state == spec.initial_state {
            return Some(k);
        }
    }
    None
}

/// One table row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeEntry {
    pub lfsr1: LfsrSpec,
    pub lfsr2: LfsrSpec,
    /// Advance of register 2's output relative to register 1.
    pub phase_offset: usize,
}

/// A satellite's 10230-chip ranging code, chips in {+1, -1}.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RangingCode {
    pub prn: u8,
    chips: Vec<i8>,
}

impl RangingCode {
    pub fn chips(&self) -> &[i8] {
        &self.chips
    }

    pub fn len(&self) -> usize {
        self.chips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chips.is_empty()
    }
}

/// PRN-indexed code table.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CodeTable {
    entries: BTreeMap<u8, CodeEntry>,
}

impl CodeTable {
    pub fn insert(&mut self, prn: u8, entry: CodeEntry) -> Result<(), CodeError> {
        if self.entries.contains_key(&prn) {
            return Err(CodeError::DuplicatePrn(prn));
        }
        self.entries.insert(prn, entry);
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, CodeError> {
        let mut table = CodeTable::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let l = raw.split('#').next().unwrap_or("").trim();
            if l.is_empty() {
                continue;
            }
            let f: Vec<&str> = l.split_whitespace().collect();
            let err = |msg: String| CodeError::Parse { line, msg };
            let [prn, t1, s1, t2, s2, off] = f.as_slice() else {
                return Err(err(format!("expected 6 fields, got {}", f.len())));
            };
            let prn: u8 = prn.parse().map_err(|_| err(format!("bad prn `{prn}`")))?;
            let entry = CodeEntry {
                lfsr1: LfsrSpec::parse(t1, s1).map_err(err)?,
                lfsr2: LfsrSpec::parse(t2, s2).map_err(err)?,
                phase_offset: off.parse().map_err(|_| err(format!("bad phase offset `{off}`")))?,
            };
            table.insert(prn, entry).map_err(|e| err(e.to_string()))?;
        }
        Ok(table)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("# prn taps1 seed1 taps2 seed2 phase_offset\n");
        for (prn, e) in &self.entries {
            let _ = writeln!(
                s,
                "{prn} {} {} {} {} {}",
                e.lfsr1.taps_text(),
                e.lfsr1.seed_text(),
                e.lfsr2.taps_text(),
                e.lfsr2.seed_text(),
                e.phase_offset
            );
        }
        s
    }

    pub fn prns(&self) -> impl Iterator<Item = u8> + '_ {
        self.entries.keys().copied()
    }

    pub fn get(&self, prn: u8) -> Option<&CodeEntry> {
        self.entries.get(&prn)
    }

    pub fn contains(&self, prn: u8) -> bool {
        self.entries.contains_key(&prn)
    }

    /// The shipped synthetic table: PRNs 54..=63 over two maximal-length
    /// registers with distinct per-PRN seeds and phase offsets.
    pub fn synthetic() -> Self {
        Self::parse(SYNTHETIC_TABLE).expect("shipped table parses")
    }
}

/// The shipped synthetic code table text.
pub const SYNTHETIC_TABLE: &str = include_str!("../data/synthetic_codes.txt");

/// Generates the 10230-chip code for `prn`.
pub fn generate_code(prn: u8, table: &CodeTable) -> Result<RangingCode, CodeError> {
    let e = table.get(prn).ok_or(CodeError::UnknownPrn(prn))?;
    let p1 = lfsr_period(&e.lfsr1).unwrap_or(1 << STAGES);
    let p2 = lfsr_period(&e.lfsr2).unwrap_or(1 << STAGES);
    let s1 = lfsr_sequence(&e.lfsr1, p1);
    let s2 = lfsr_sequence(&e.lfsr2, p2);
    let chips = (0..CODE_LENGTH)
        .map(|k| if s1[k % p1] ^ s2[(k + e.phase_offset) % p2] == 0 { 1 } else { -1 })
        .collect();
    Ok(RangingCode { prn, chips })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn maximal(taps: &[u8]) -> LfsrSpec {
        LfsrSpec::new(taps, 0b1).unwrap()
    }

    #[test]
    fn maximal_taps_have_full_period() {
        for taps in [[1u8, 3, 4, 13].as_slice(), &[9, 10, 12, 13]] {
            let spec = maximal(taps);
            assert_eq!(lfsr_period(&spec), Some(8191));
            let seq = lfsr_sequence(&spec, 2 * 8191);
            assert_eq!(&seq[..8191], &seq[8191..]);
            // No shorter period dividing 8191 (8191 is prime, so only 1).
            assert!(seq[..8191].windows(2).any(|w| w[0] != w[1]));
            let ones = seq[..8191].iter().filter(|&&b| b == 1).count();
            assert_eq!(ones, 4096);
            assert_eq!(8191 - ones, 4095);
        }
    }

    #[test]
    fn single_tap_is_degenerate() {
        let spec = LfsrSpec::new(&[13], 0b1).unwrap();
        let p = lfsr_period(&spec).unwrap();
        assert!(p < 8191);
        assert_eq!(p, 13);
    }

    #[test]
    fn invalid_specs() {
        assert_eq!(LfsrSpec::new(&[], 1), Err(CodeError::NoTaps));
        assert_eq!(LfsrSpec::new(&[14], 1), Err(CodeError::BadTap(14)));
        assert_eq!(LfsrSpec::new(&[13], 0), Err(CodeError::ZeroState));
    }

    #[test]
    fn code_length_and_determinism() {
        let t = CodeTable::synthetic();
        assert_eq!(t.prns().count(), 10);
        for prn in t.prns() {
            let a = generate_code(prn, &t).unwrap();
            assert_eq!(a.len(), CODE_LENGTH);
            assert_eq!(a, generate_code(prn, &t).unwrap());
        }
        assert_eq!(generate_code(1, &t), Err(CodeError::UnknownPrn(1)));
    }

    #[test]
    fn code_period_is_one_millisecond() {
        assert!((CODE_PERIOD_S - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn table_text_round_trip() {
        let t = CodeTable::synthetic();
        assert_eq!(CodeTable::parse(&t.to_text()).unwrap(), t);
        assert!(matches!(CodeTable::parse("59 1,3 0101"), Err(CodeError::Parse { line: 1, .. })));
        let dup = "59 1,3,4,13 1000000000000 9,10,12,13 1000000000000 1\n59 1,3,4,13 1000000000000 9,10,12,13 1000000000000 2\n";
        assert!(matches!(CodeTable::parse(dup), Err(CodeError::Parse { line: 2, .. })));
    }

    /// Periodic correlation at every lag, computed directly.
    fn periodic_correlation(a: &[i8], b: &[i8]) -> Vec<i32> {
        let n = a.len();
        (0..n)
            .map(|lag| (0..n).map(|k| a[k] as i32 * b[(k + lag) % n] as i32).sum())
            .collect()
    }

    #[test]
    fn autocorrelation_peak_and_sidelobes() {
        let t = CodeTable::synthetic();
        for prn in [54, 59] {
            let c = generate_code(prn, &t).unwrap();
            let r = periodic_correlation(c.chips(), c.chips());
            assert_eq!(r[0], CODE_LENGTH as i32);
            // The 8191-chip registers wrap inside the code, so lags 8191 and
            // 10230 - 8191 carry a partial repeat of about 2039 chips.
            let wrap = [8191usize, CODE_LENGTH - 8191];
            for lag in wrap {
                assert!((r[lag] - 2039).abs() < 250, "PRN {prn} lag {lag}: {}", r[lag]);
            }
            let side = (1..CODE_LENGTH).filter(|l| !wrap.contains(l)).map(|l| r[l].abs()).max().unwrap();
            assert!((side as f64) < 0.05 * CODE_LENGTH as f64, "PRN {prn} sidelobe {side}");
        }
    }

    #[test]
    fn cross_correlation_is_small() {
        let t = CodeTable::synthetic();
        let codes: Vec<RangingCode> = t.prns().map(|p| generate_code(p, &t).unwrap()).collect();
        let bound = 0.1 * CODE_LENGTH as f64;
        // Zero lag for every pair.
        for i in 0..codes.len() {
            for j in i + 1..codes.len() {
                let r0: i32 = codes[i].chips().iter().zip(codes[j].chips()).map(|(&a, &b)| a as i32 * b as i32).sum();
                assert!((r0.abs() as f64) <= bound, "PRNs {} {}", codes[i].prn, codes[j].prn);
            }
        }
        // All lags for a few pairs.
        for (i, j) in [(0, 1), (3, 7), (5, 9)] {
            let r = periodic_correlation(codes[i].chips(), codes[j].chips());
            let peak = r.iter().map(|v| v.abs()).max().unwrap();
            assert!(peak as f64 <= bound, "PRNs {} {}: {peak}", codes[i].prn, codes[j].prn);
        }
    }
}
