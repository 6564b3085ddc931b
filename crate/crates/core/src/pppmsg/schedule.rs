//! The 48 s broadcast cycle.
//!
//! Slot 0 carries the mask. Slots 1..=45 form fifteen 3 s units in which
//! clock messages (odd slots) alternate with the orbit/bias/null stream
//! (even slots). That stream carries one round of code biases, then one
//! round of orbits, then null messages. Slots 46 and 47 are null.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use super::{
    BiasEntry, BiasMessage, ClockCorrection, ClockMessage, CodeBias, MessageContent, MessageSchema, OrbitCorrection,
    OrbitDelta, OrbitMessage, SatId, SatelliteMask, NULL_TYPE,
};

pub const CYCLE_SECONDS: u32 = 48;
pub const FINAL_FILL_SECONDS: u32 = 2;
pub const TYPE4_EPOCH_STEP: u32 = 6;
/// Orbit and bias epochs trail the mask epoch by this many seconds.
pub const ORBIT_EPOCH_LAG: u32 = 7;
const DAY: i64 = 86_400;

#[derive(Debug, Error, PartialEq)]
pub enum ScheduleError {
    #[error("correction state has no satellites")]
    Empty,
    #[error("{} records do not fit one cycle", dropped.len())]
    Overflow { dropped: Vec<(u8, SatId)> },
}

/// Everything the broadcaster knows at cycle start.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionState {
    /// Epoch is replaced by the cycle start.
    pub mask: SatelliteMask,
    pub orbits: Vec<OrbitCorrection>,
    pub clocks: Vec<ClockCorrection>,
    pub biases: Vec<CodeBias>,
}

impl CorrectionState {
    /// Random but plausible corrections for every satellite in the mask.
    pub fn synthetic(bds: &[u8], gps: &[u8], seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mask = SatelliteMask {
            epoch: 0,
            iod_ssr: 1,
            iodp: 3,
            bds: bds.iter().copied().collect(),
            gps: gps.iter().copied().collect(),
        };
        let q = |v: f64, lsb: f64| (v / lsb).round() * lsb;
        let sats: Vec<SatId> = mask.satellites().collect();
        let mut orbits = Vec::new();
        let mut clocks = Vec::new();
        let mut biases = Vec::new();
        for &sat in &sats {
            let iod = rng.random_range(0..16);
            orbits.push(OrbitCorrection {
                sat,
                iod,
                delta: Some(OrbitDelta {
                    radial: q(rng.random_range(-0.5..0.5), 0.0016),
                    along: q(rng.random_range(-1.5..1.5), 0.0016),
                    cross: q(rng.random_range(-1.0..1.0), 0.0016),
                }),
                ura_index: rng.random_range(0..64),
            });
            clocks.push(ClockCorrection { sat, iod, c0: Some(q(rng.random_range(-2.0..2.0), 0.0016)) });
            if sat.system == super::System::Bds {
                let entries = [0u8, 1]
                    .iter()
                    .map(|&mode| BiasEntry { mode, bias: Some(q(rng.random_range(-5.0..5.0), 0.017)) })
                    .collect();
                biases.push(CodeBias { sat, entries });
            }
        }
        CorrectionState { mask, orbits, clocks, biases }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduledFrame {
    pub slot: u32,
    /// Broadcast second (seconds of day).
    pub time: u32,
    pub content: MessageContent,
}

fn wrap(e: i64) -> u32 {
    e.rem_euclid(DAY) as u32
}

fn chunks<T: Clone>(v: &[T], n: usize) -> Vec<Vec<T>> {
    if n == 0 {
        return Vec::new();
    }
    v.chunks(n).map(<[T]>::to_vec).collect()
}

/// One 48 s cycle starting at `start_epoch`.
pub fn generate_schedule(
    state: &CorrectionState,
    start_epoch: u32,
    schema: &MessageSchema,
) -> Result<Vec<ScheduledFrame>, ScheduleError> {
    if state.mask.satellites().next().is_none() && state.orbits.is_empty() && state.clocks.is_empty() {
        return Err(ScheduleError::Empty);
    }
    let cap = |t: u8| schema.layout(t).map_or(0, |l| l.capacity());
    let (cap2, cap3, cap4) = (cap(2), cap(3), cap(4));
    let iod_ssr = state.mask.iod_ssr;
    let lagged = wrap(start_epoch as i64 - ORBIT_EPOCH_LAG as i64);

    // Types 2/3 in one round on the even slots.
    // Whole satellites per message so one bias round never repeats a sat.
    let mut stream: Vec<MessageContent> = Vec::new();
    let mut records: Vec<CodeBias> = Vec::new();
    let mut used = 0;
    for b in &state.biases {
        if used + b.entries.len() > cap3 && !records.is_empty() {
            stream.push(MessageContent::Bias(BiasMessage { epoch: lagged, iod_ssr, records: std::mem::take(&mut records) }));
            used = 0;
        }
        used += b.entries.len();
        records.push(b.clone());
    }
    if !records.is_empty() {
        stream.push(MessageContent::Bias(BiasMessage { epoch: lagged, iod_ssr, records }));
    }
    for records in chunks(&state.orbits, cap2) {
        stream.push(MessageContent::Orbit(OrbitMessage { epoch: lagged, iod_ssr, records }));
    }
    let even_slots = (2..=45).step_by(2).count();
    let clock_chunks = chunks(&state.clocks, cap4);
    // Every 6 s window must refresh every clock record; the last window
    // only has two clock slots.
    let mut dropped: Vec<(u8, SatId)> = Vec::new();
    if clock_chunks.len() > 2 {
        dropped.extend(clock_chunks[2..].iter().flatten().map(|c| (4, c.sat)));
    }
    if stream.len() > even_slots {
        for m in &stream[even_slots..] {
            match m {
                MessageContent::Bias(b) => dropped.extend(b.records.iter().map(|r| (3, r.sat))),
                MessageContent::Orbit(o) => dropped.extend(o.records.iter().map(|r| (2, r.sat))),
                _ => {}
            }
        }
    }
    if !dropped.is_empty() {
        return Err(ScheduleError::Overflow { dropped });
    }

    let mut frames = Vec::with_capacity(CYCLE_SECONDS as usize);
    let mut mask = state.mask.clone();
    mask.epoch = start_epoch;
    frames.push(MessageContent::Mask(mask));
    let mut stream = stream.into_iter();
    for slot in 1..CYCLE_SECONDS {
        let content = if slot > CYCLE_SECONDS - 1 - FINAL_FILL_SECONDS {
            MessageContent::Null
        } else if slot % 2 == 1 {
            let window_start = slot - slot % TYPE4_EPOCH_STEP;
            let nth_in_window = (slot - window_start) / 2;
            let records = if clock_chunks.is_empty() {
                Vec::new()
            } else {
                clock_chunks[nth_in_window as usize % clock_chunks.len()].clone()
            };
            MessageContent::Clock(ClockMessage {
                epoch: wrap(start_epoch as i64 + window_start as i64),
                iod_ssr,
                iodp: state.mask.iodp,
                records,
            })
        } else {
            stream.next().unwrap_or(MessageContent::Null)
        };
        frames.push(content);
    }
    Ok(frames
        .into_iter()
        .enumerate()
        .map(|(slot, content)| ScheduledFrame {
            slot: slot as u32,
            time: wrap(start_epoch as i64 + slot as i64),
            content,
        })
        .collect())
}

/// What the analyzer needs to know about one received message.
#[derive(Debug, Clone, PartialEq)]
pub struct TimedMessage {
    pub time: u32,
    pub mestype: u8,
    pub epoch: Option<u32>,
    pub sats: Vec<SatId>,
}

impl TimedMessage {
    pub fn from_content(time: u32, c: &MessageContent) -> Self {
        let sats = match c {
            MessageContent::Orbit(m) => m.records.iter().map(|r| r.sat).collect(),
            MessageContent::Clock(m) => m.records.iter().map(|r| r.sat).collect(),
            MessageContent::Bias(m) => m.records.iter().map(|r| r.sat).collect(),
            _ => Vec::new(),
        };
        TimedMessage { time, mestype: c.mestype(), epoch: c.epoch(), sats }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Deviation {
    pub rule: u8,
    pub time: u32,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochGap {
    pub mestype: u8,
    pub from: u32,
    pub to: u32,
    pub gap: i64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ScheduleReport {
    pub messages: usize,
    pub counts: BTreeMap<u8, usize>,
    pub complete_cycles: usize,
    pub type1_spacing: Vec<i64>,
    /// Distinct-epoch update intervals per type, as interval -> count.
    pub epoch_intervals: BTreeMap<u8, BTreeMap<i64, usize>>,
    /// Mask epoch minus orbit/bias epoch, per cycle.
    pub orbit_epoch_offsets: Vec<i64>,
    pub epoch_gaps: Vec<EpochGap>,
    pub missing_seconds: Vec<u32>,
    pub deviations: Vec<Deviation>,
}

fn diff(a: u32, b: u32) -> i64 {
    let d = (b as i64 - a as i64).rem_euclid(DAY);
    if d > DAY / 2 {
        d - DAY
    } else {
        d
    }
}

fn is_stream(t: u8) -> bool {
    matches!(t, 2 | 3 | NULL_TYPE)
}

/// Checks a time-ordered message sequence against the cycle rules.
pub fn analyze_schedule(messages: &[TimedMessage]) -> ScheduleReport {
    let mut r = ScheduleReport { messages: messages.len(), ..Default::default() };
    let mut dev = |rule: u8, time: u32, detail: String| r.deviations.push(Deviation { rule, time, detail });
    for w in messages.windows(2) {
        let d = diff(w[0].time, w[1].time);
        for k in 1..d.max(1) {
            r.missing_seconds.push(wrap(w[0].time as i64 + k));
        }
    }
    for m in messages {
        *r.counts.entry(m.mestype).or_default() += 1;
    }

    // Rule 1: one mask per 48 s.
    let t1: Vec<usize> = messages.iter().enumerate().filter(|(_, m)| m.mestype == 1).map(|(i, _)| i).collect();
    for w in t1.windows(2) {
        let s = diff(messages[w[0]].time, messages[w[1]].time);
        r.type1_spacing.push(s);
        if s != CYCLE_SECONDS as i64 {
            dev(1, messages[w[1]].time, format!("type 1 spacing {s} s"));
        }
    }

    // Per-cycle slot rules.
    for (k, &i0) in t1.iter().enumerate() {
        let t0 = messages[i0].time;
        let end = t1.get(k + 1).copied().unwrap_or(messages.len());
        let slots: BTreeMap<i64, &TimedMessage> = messages[i0..end]
            .iter()
            .map(|m| (diff(t0, m.time), m))
            .filter(|(s, _)| (0..CYCLE_SECONDS as i64).contains(s))
            .collect();
        if slots.len() == CYCLE_SECONDS as usize {
            r.complete_cycles += 1;
        }
        let ty = |s: i64| slots.get(&s).map(|m| m.mestype);
        let mut seen: BTreeMap<u8, BTreeSet<SatId>> = BTreeMap::new();
        let mut stream_phase = 0u8;
        let mut lag: Option<i64> = None;
        for (&s, m) in &slots {
            if s == 0 {
                continue;
            }
            // Rule 2: only 2, 3, 4, 63 after the mask.
            if !matches!(m.mestype, 2 | 3 | 4 | NULL_TYPE) {
                dev(2, m.time, format!("type {} in slot {s}", m.mestype));
            }
            if s >= (CYCLE_SECONDS - FINAL_FILL_SECONDS) as i64 {
                if m.mestype != NULL_TYPE {
                    dev(6, m.time, format!("type {} in final slot {s}", m.mestype));
                }
                continue;
            }
            // Rules 3 and 4: clock alternates with the 2/3/63 stream.
            if let Some(next) = ty(s + 1) {
                if s + 1 < (CYCLE_SECONDS - FINAL_FILL_SECONDS) as i64 && (m.mestype == 4) == (next == 4) {
                    dev(4, m.time, format!("slots {s} and {} not alternating", s + 1));
                }
            }
            // Rule 6: one round of 3, then one of 2, then null fill.
            if is_stream(m.mestype) {
                let phase = match m.mestype {
                    3 => 0,
                    2 => 1,
                    _ => 2,
                };
                if phase < stream_phase {
                    dev(6, m.time, format!("type {} after its round ended", m.mestype));
                }
                stream_phase = stream_phase.max(phase);
            }
            if matches!(m.mestype, 2 | 3) {
                let set = seen.entry(m.mestype).or_default();
                for sat in &m.sats {
                    if !set.insert(*sat) {
                        dev(6, m.time, format!("{sat} repeated in type {} round", m.mestype));
                    }
                }
                if let (Some(e), Some(e1)) = (m.epoch, messages[i0].epoch) {
                    let off = diff(e, e1);
                    match lag {
                        None => lag = Some(off),
                        Some(l) if l != off => dev(6, m.time, "types 2/3 epochs differ within a cycle".into()),
                        _ => {}
                    }
                }
            }
        }
        if let Some(l) = lag {
            r.orbit_epoch_offsets.push(l);
        }
    }

    // Rule 5 and stale epochs: distinct-epoch update intervals.
    for (t, nominal, rule) in [(4u8, TYPE4_EPOCH_STEP as i64, 5u8), (2, CYCLE_SECONDS as i64, 6), (3, CYCLE_SECONDS as i64, 6)] {
        let mut last: Option<u32> = None;
        let hist = r.epoch_intervals.entry(t).or_default();
        for m in messages.iter().filter(|m| m.mestype == t) {
            let Some(e) = m.epoch else { continue };
            if let Some(prev) = last {
                let d = diff(prev, e);
                if d == 0 {
                    continue;
                }
                *hist.entry(d).or_default() += 1;
                if d != nominal {
                    r.epoch_gaps.push(EpochGap { mestype: t, from: prev, to: e, gap: d });
                    r.deviations.push(Deviation {
                        rule,
                        time: m.time,
                        detail: format!("type {t} epoch gap {d} s, expected {nominal} s"),
                    });
                }
            }
            last = Some(e);
        }
        if hist.is_empty() {
            r.epoch_intervals.remove(&t);
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state() -> CorrectionState {
        CorrectionState::synthetic(&[19, 21, 22, 29, 34, 35, 38, 39, 40, 44], &[2, 5, 6, 7, 9, 12, 13, 15, 18, 19, 25, 29, 30], 1)
    }

    fn timed(frames: &[ScheduledFrame]) -> Vec<TimedMessage> {
        frames.iter().map(|f| TimedMessage::from_content(f.time, &f.content)).collect()
    }

    #[test]
    fn cycle_structure() {
        let f = generate_schedule(&state(), 17998, &MessageSchema::default()).unwrap();
        assert_eq!(f.len(), 48);
        assert_eq!(f.iter().filter(|x| x.content.mestype() == 1).count(), 1);
        assert_eq!(f[0].content.mestype(), 1);
        assert_eq!(f[46].content, MessageContent::Null);
        assert_eq!(f[47].content, MessageContent::Null);
        assert_eq!(f[1].content.mestype(), 4);
        assert_eq!(f[2].content.mestype(), 3);
        for x in &f {
            if x.content.mestype() == 4 {
                assert_eq!(x.content.epoch().unwrap(), 17998 + 6 * (x.slot / 6));
            }
            if matches!(x.content.mestype(), 2 | 3) {
                assert_eq!(x.content.epoch().unwrap(), 17991);
            }
        }
    }

    #[test]
    fn generator_is_analyzer_fixed_point() {
        let s = state();
        let schema = MessageSchema::default();
        let mut all = Vec::new();
        for k in 0..3 {
            all.extend(timed(&generate_schedule(&s, 17998 + 48 * k, &schema).unwrap()));
        }
        let r = analyze_schedule(&all);
        assert!(r.deviations.is_empty(), "{:?}", r.deviations);
        assert_eq!(r.complete_cycles, 3);
        assert_eq!(r.type1_spacing, vec![48, 48]);
        assert_eq!(r.orbit_epoch_offsets, vec![7, 7, 7]);
        assert_eq!(r.epoch_intervals[&4].keys().copied().collect::<Vec<_>>(), vec![6]);
        assert_eq!(r.epoch_intervals[&2].keys().copied().collect::<Vec<_>>(), vec![48]);
        assert!(r.missing_seconds.is_empty());
    }

    #[test]
    fn injected_faults() {
        let s = state();
        let schema = MessageSchema::default();
        let mut a = timed(&generate_schedule(&s, 1000, &schema).unwrap());
        let b = timed(&generate_schedule(&s, 1049, &schema).unwrap());
        a.push(TimedMessage { time: 1048, mestype: 63, epoch: None, sats: vec![] });
        a.extend(b);
        let r = analyze_schedule(&a);
        assert!(r.deviations.iter().any(|d| d.rule == 1), "{:?}", r.deviations);

        // Stale type-4 epoch: epochs 1006 repeated instead of 1012.
        let mut c = timed(&generate_schedule(&s, 1000, &schema).unwrap());
        for m in c.iter_mut().filter(|m| m.mestype == 4 && m.epoch == Some(1012)) {
            m.epoch = Some(1006);
        }
        let r = analyze_schedule(&c);
        assert!(r.epoch_gaps.iter().any(|g| g.mestype == 4 && g.gap == 12), "{:?}", r.epoch_gaps);
        assert!(r.deviations.iter().any(|d| d.rule == 5));
    }

    #[test]
    fn missing_seconds_reported() {
        let mut c = timed(&generate_schedule(&state(), 500, &MessageSchema::default()).unwrap());
        c.remove(10);
        let r = analyze_schedule(&c);
        assert_eq!(r.missing_seconds, vec![510]);
    }

    #[test]
    fn overflow_lists_dropped() {
        let bds: Vec<u8> = (1..=40).collect();
        let s = CorrectionState::synthetic(&bds, &[], 2);
        let e = generate_schedule(&s, 0, &MessageSchema::default()).unwrap_err();
        let ScheduleError::Overflow { dropped } = e else { panic!() };
        assert_eq!(dropped.iter().filter(|d| d.0 == 4).count(), 10);
        let empty = CorrectionState { mask: SatelliteMask::default(), orbits: vec![], clocks: vec![], biases: vec![] };
        assert_eq!(generate_schedule(&empty, 0, &MessageSchema::default()), Err(ScheduleError::Empty));
    }

    #[test]
    fn day_wrap() {
        let f = generate_schedule(&state(), 86_399, &MessageSchema::default()).unwrap();
        assert_eq!(f[1].time, 0);
        assert_eq!(f[2].content.epoch(), Some(86_392));
        let r = analyze_schedule(&timed(&f));
        assert!(r.deviations.is_empty(), "{:?}", r.deviations);
    }
}
