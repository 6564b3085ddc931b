use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use log::warn;
use serde::Serialize;

use ppp_b2b::pppmsg::{
    analyze_schedule, integrity_csv, integrity_report, CorrectionRecord, IntegrityRow, ScheduleReport, TimedMessage,
};

use crate::output::{with_suffix, write_json, MessageLine};
use crate::Outcome;

enum Line {
    Message(MessageLine),
    Record(CorrectionRecord),
}

fn parse_line(s: &str) -> Result<Line> {
    let v: serde_json::Value = serde_json::from_str(s)?;
    if v.get("bits").is_some() {
        Ok(Line::Message(serde_json::from_value(v)?))
    } else {
        Ok(Line::Record(serde_json::from_value(v)?))
    }
}

#[derive(Serialize)]
struct ScheduleFile {
    /// Per source PRN.
    channels: BTreeMap<u8, ScheduleReport>,
}

#[derive(Serialize)]
struct IntegrityFile<'a> {
    rows: &'a [IntegrityRow],
}

pub fn run(input: &Path, out: &Path) -> Result<Outcome> {
    for suffix in [".schedule.json", ".integrity.json", ".integrity.csv"] {
        if with_suffix(out, suffix) == input {
            bail!("output {suffix} would overwrite the input");
        }
    }
    let text = std::fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    let mut messages = Vec::new();
    let mut records = Vec::new();
    for (i, l) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        match parse_line(l).with_context(|| format!("{}:{}", input.display(), i + 1))? {
            Line::Message(m) => {
                records.extend(m.records.iter().cloned());
                messages.push(m);
            }
            Line::Record(r) => records.push(r),
        }
    }
    if messages.is_empty() && records.is_empty() {
        warn!("{} holds no messages; writing empty reports", input.display());
    } else if messages.is_empty() {
        warn!("correction stream has no message framing; schedule report left empty");
    }

    let mut by_prn: BTreeMap<u8, Vec<TimedMessage>> = BTreeMap::new();
    let mut unanchored = 0;
    for m in messages.iter().filter(|m| m.crc_ok) {
        let (Some(time), Some(mestype)) = (m.time, m.mestype) else {
            unanchored += 1;
            continue;
        };
        let list = by_prn.entry(m.source_prn).or_default();
        if list.iter().any(|x| x.time == time) {
            continue;
        }
        let sats = if matches!(mestype, 2..=4) { m.sats.clone() } else { Vec::new() };
        list.push(TimedMessage { time, mestype, epoch: m.epoch, sats });
    }
    if unanchored > 0 {
        warn!("{unanchored} message(s) without a broadcast time left out of the schedule analysis");
    }
    let channels = by_prn
        .into_iter()
        .map(|(prn, mut v)| {
            v.sort_by_key(|m| m.time);
            (prn, analyze_schedule(&v))
        })
        .collect();

    let timed: Vec<_> = records.iter().filter_map(CorrectionRecord::timed).collect();
    let rows = integrity_report(&timed, (0, 86_399));

    write_json(&with_suffix(out, ".schedule.json"), &ScheduleFile { channels })?;
    write_json(&with_suffix(out, ".integrity.json"), &IntegrityFile { rows: &rows })?;
    let csv = with_suffix(out, ".integrity.csv");
    std::fs::write(&csv, integrity_csv(&rows)).with_context(|| format!("writing {}", csv.display()))?;
    Ok(Outcome::Ok)
}
