//! Per-satellite completeness of the orbit and clock streams.
//!
//! Abnormal time is the sum of the gaps between consecutive available
//! epochs that exceed the nominal update interval (6 s for clocks, 48 s
//! for orbits); the span edges count as available. Unavailable records
//! (sentinel values) count as missing.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{CorrectionKind, SatId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimedRecord {
    pub sat: SatId,
    pub kind: CorrectionKind,
    pub epoch: u32,
    pub available: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IntegrityRow {
    pub sat: SatId,
    pub epoch_start: u32,
    pub epoch_end: u32,
    pub total_s: u32,
    pub orbit_abnormal_s: u32,
    pub orbit_completeness_bp: u32,
    pub clock_abnormal_s: u32,
    pub clock_completeness_bp: u32,
}

/// `(total - abnormal) / total` in hundredths of a percent, rounded half
/// up; 10000 when `total` is zero.
pub fn completeness_bp(total: u32, abnormal: u32) -> u32 {
    if total == 0 {
        return 10_000;
    }
    let (t, a) = (total as u64, abnormal.min(total) as u64);
    (((t - a) * 20_000 + t) / (2 * t)) as u32
}

pub fn format_percent(bp: u32) -> String {
    format!("{}.{:02}%", bp / 100, bp % 100)
}

fn abnormal(start: u32, end: u32, epochs: &BTreeSet<u32>, nominal: u32) -> u32 {
    let mut points = vec![start];
    points.extend(epochs.range(start..=end).copied());
    points.push(end);
    points.dedup();
    let mut sum = 0;
    for w in points.windows(2) {
        let d = w[1] - w[0];
        if d > nominal {
            sum += d;
        }
    }
    // A satellite with no available record at all is abnormal throughout.
    if epochs.range(start..=end).next().is_none() {
        return end - start;
    }
    sum
}

/// Completeness table over `[window.0, window.1]` (epochs, seconds of day,
/// no day wrap inside the window).
pub fn integrity_report(records: &[TimedRecord], window: (u32, u32)) -> Vec<IntegrityRow> {
    let (w0, w1) = window;
    let mut by_sat: BTreeMap<SatId, Vec<&TimedRecord>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.epoch >= w0 && r.epoch <= w1) {
        by_sat.entry(r.sat).or_default().push(r);
    }
    let mut rows = Vec::new();
    for (sat, recs) in by_sat {
        let start = recs.iter().map(|r| r.epoch).min().expect("nonempty");
        let end = recs.iter().map(|r| r.epoch).max().expect("nonempty");
        let total = end - start;
        let avail = |k: CorrectionKind| -> BTreeSet<u32> {
            recs.iter().filter(|r| r.kind == k && r.available).map(|r| r.epoch).collect()
        };
        let oa = abnormal(start, end, &avail(CorrectionKind::Orbit), 48);
        let ca = abnormal(start, end, &avail(CorrectionKind::Clock), 6);
        rows.push(IntegrityRow {
            sat,
            epoch_start: start,
            epoch_end: end,
            total_s: total,
            orbit_abnormal_s: oa,
            orbit_completeness_bp: completeness_bp(total, oa),
            clock_abnormal_s: ca,
            clock_completeness_bp: completeness_bp(total, ca),
        });
    }
    rows
}

pub fn integrity_csv(rows: &[IntegrityRow]) -> String {
    let mut s = String::from(
        "system,prn,epoch_start,epoch_end,total_s,orbit_abnormal_s,orbit_completeness,clock_abnormal_s,clock_completeness\n",
    );
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.sat.system,
            r.sat.prn,
            r.epoch_start,
            r.epoch_end,
            r.total_s,
            r.orbit_abnormal_s,
            format_percent(r.orbit_completeness_bp),
            r.clock_abnormal_s,
            format_percent(r.clock_completeness_bp)
        ));
    }
    s
}
