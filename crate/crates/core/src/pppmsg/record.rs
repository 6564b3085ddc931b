//! Flat per-satellite correction records, one JSON object per line.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{MessageContent, PppMessage, System, TimedRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrectionKind {
    Orbit,
    Clock,
    Bias,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionRecord {
    /// Receive time in seconds from the start of the recording.
    pub time: f64,
    pub source_prn: u8,
    pub system: System,
    pub prn: u8,
    pub epoch: u32,
    #[serde(rename = "type")]
    pub mestype: u8,
    pub kind: CorrectionKind,
    pub iod: Option<u8>,
    pub available: bool,
    /// Metres; keyed by component (`radial`, `c0`, `mode_0`, ...).
    pub values: BTreeMap<String, f64>,
}

impl CorrectionRecord {
    pub fn timed(&self) -> Option<TimedRecord> {
        let sat = super::SatId::new(self.system, self.prn);
        (self.kind != CorrectionKind::Bias).then_some(TimedRecord {
            sat,
            kind: self.kind,
            epoch: self.epoch,
            available: self.available,
        })
    }
}

/// Records carried by an orbit, bias or clock message; empty otherwise.
pub fn records_from_message(msg: &PppMessage, time: f64) -> Vec<CorrectionRecord> {
    let base = |sat: super::SatId, epoch, kind, iod, available, values| CorrectionRecord {
        time,
        source_prn: msg.source_prn,
        system: sat.system,
        prn: sat.prn,
        epoch,
        mestype: msg.mestype,
        kind,
        iod,
        available,
        values,
    };
    match &msg.content {
        MessageContent::Orbit(m) => m
            .records
            .iter()
            .map(|r| {
                let mut v = BTreeMap::new();
                if let Some(d) = r.delta {
                    v.insert("radial".into(), d.radial);
                    v.insert("along".into(), d.along);
                    v.insert("cross".into(), d.cross);
                }
                v.insert("ura_index".into(), r.ura_index as f64);
                base(r.sat, m.epoch, CorrectionKind::Orbit, Some(r.iod), r.delta.is_some(), v)
            })
            .collect(),
        MessageContent::Clock(m) => m
            .records
            .iter()
            .map(|r| {
                let v = r.c0.map(|c| ("c0".to_string(), c)).into_iter().collect();
                base(r.sat, m.epoch, CorrectionKind::Clock, Some(r.iod), r.c0.is_some(), v)
            })
            .collect(),
        MessageContent::Bias(m) => m
            .records
            .iter()
            .map(|r| {
                let v: BTreeMap<String, f64> =
                    r.entries.iter().filter_map(|e| Some((format!("mode_{}", e.mode), e.bias?))).collect();
                let avail = r.entries.iter().all(|e| e.bias.is_some());
                base(r.sat, m.epoch, CorrectionKind::Bias, None, avail, v)
            })
            .collect(),
        MessageContent::Mask(_) | MessageContent::Null => Vec::new(),
    }
}
