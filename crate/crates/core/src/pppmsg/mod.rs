//! PPP correction messages: schema-driven parsing and serialization,
//! IOD matching, broadcast schedule generation/analysis and integrity
//! statistics.

mod integrity;
mod record;
mod schedule;
mod schema;
mod store;

pub use integrity::{completeness_bp, format_percent, integrity_csv, integrity_report, IntegrityRow, TimedRecord};
pub use record::{records_from_message, CorrectionKind, CorrectionRecord};
pub use schedule::{
    analyze_schedule, generate_schedule, CorrectionState, ScheduleError, ScheduleReport, ScheduledFrame,
    TimedMessage, CYCLE_SECONDS, FINAL_FILL_SECONDS, ORBIT_EPOCH_LAG, TYPE4_EPOCH_STEP,
};
pub use schema::{FieldDesc, MessageSchema, RawFields, SchemaError, Signedness, TypeLayout, DEFAULT_SCHEMA};
pub use store::{ingest_message, CorrectionSet, CorrectionStore};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crc24q::{crc24q_compute, Crc24, BODY_BITS, CRC_BITS};
use crate::ldpc::MESSAGE_BITS;

pub const MESTYPE_BITS: usize = 6;
pub const DATA_BITS: usize = BODY_BITS - MESTYPE_BITS;
pub const NULL_TYPE: u8 = 63;

#[derive(Debug, Error, PartialEq)]
pub enum MsgError {
    #[error("expected {MESSAGE_BITS} bits, got {0}")]
    BodyLength(usize),
    #[error("CRC mismatch: computed {computed:06X}, received {received:06X}")]
    Crc { computed: u32, received: u32 },
    #[error("schema has no layout for type {0}")]
    MissingLayout(u8),
    #[error("type {mestype} layout lacks field `{name}`")]
    MissingField { mestype: u8, name: String },
    #[error("field `{field}` value {value} not representable")]
    OutOfRange { field: String, value: f64 },
    #[error("type {mestype}: {count} records exceed capacity {capacity}")]
    Capacity { mestype: u8, count: usize, capacity: usize },
    #[error("satellite slot {0} is not assigned")]
    Slot(u32),
    #[error("cannot serialize type {0}")]
    Unsupported(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum System {
    #[serde(rename = "BDS")]
    Bds,
    #[serde(rename = "GPS")]
    Gps,
    #[serde(rename = "GAL")]
    Galileo,
    #[serde(rename = "GLO")]
    Glonass,
}

impl System {
    pub fn tag(self) -> &'static str {
        match self {
            System::Bds => "BDS",
            System::Gps => "GPS",
            System::Galileo => "GAL",
            System::Glonass => "GLO",
        }
    }

    fn slot_base(self) -> (u32, u8) {
        match self {
            System::Bds => (0, 63),
            System::Gps => (63, 37),
            System::Galileo => (100, 37),
            System::Glonass => (137, 37),
        }
    }
}

impl fmt::Display for System {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// A satellite in some constellation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SatId {
    pub system: System,
    pub prn: u8,
}

impl SatId {
    pub fn new(system: System, prn: u8) -> Self {
        SatId { system, prn }
    }

    pub fn bds(prn: u8) -> Self {
        SatId::new(System::Bds, prn)
    }

    pub fn gps(prn: u8) -> Self {
        SatId::new(System::Gps, prn)
    }

    /// Slot numbering: 1-63 BDS, 64-100 GPS, 101-137 Galileo, 138-174
    /// GLONASS; 0 marks an empty record.
    pub fn from_slot(slot: u32) -> Option<Self> {
        [System::Bds, System::Gps, System::Galileo, System::Glonass].into_iter().find_map(|s| {
            let (base, count) = s.slot_base();
            (slot > base && slot <= base + count as u32).then(|| SatId::new(s, (slot - base) as u8))
        })
    }

    pub fn slot(self) -> Option<u32> {
        let (base, count) = self.system.slot_base();
        (self.prn >= 1 && self.prn <= count).then_some(base + self.prn as u32)
    }
}

impl fmt::Display for SatId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{:02}", self.system, self.prn)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SatelliteMask {
    pub epoch: u32,
    pub iod_ssr: u8,
    pub iodp: u8,
    pub bds: BTreeSet<u8>,
    pub gps: BTreeSet<u8>,
}

impl SatelliteMask {
    pub fn contains(&self, sat: SatId) -> bool {
        match sat.system {
            System::Bds => self.bds.contains(&sat.prn),
            System::Gps => self.gps.contains(&sat.prn),
            _ => false,
        }
    }

    pub fn satellites(&self) -> impl Iterator<Item = SatId> + '_ {
        self.bds.iter().map(|&p| SatId::bds(p)).chain(self.gps.iter().map(|&p| SatId::gps(p)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitDelta {
    pub radial: f64,
    pub along: f64,
    pub cross: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrbitCorrection {
    pub sat: SatId,
    pub iod: u8,
    /// `None` when any component carries the unavailable code.
    pub delta: Option<OrbitDelta>,
    pub ura_index: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrbitMessage {
    pub epoch: u32,
    pub iod_ssr: u8,
    pub records: Vec<OrbitCorrection>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasEntry {
    pub mode: u8,
    pub bias: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodeBias {
    pub sat: SatId,
    pub entries: Vec<BiasEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiasMessage {
    pub epoch: u32,
    pub iod_ssr: u8,
    pub records: Vec<CodeBias>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClockCorrection {
    pub sat: SatId,
    pub iod: u8,
    /// `None` when unavailable.
    pub c0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClockMessage {
    pub epoch: u32,
    pub iod_ssr: u8,
    pub iodp: u8,
    pub records: Vec<ClockCorrection>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MessageContent {
    Mask(SatelliteMask),
    Orbit(OrbitMessage),
    Bias(BiasMessage),
    Clock(ClockMessage),
    Null,
}

impl MessageContent {
    pub fn mestype(&self) -> u8 {
        match self {
            MessageContent::Mask(_) => 1,
            MessageContent::Orbit(_) => 2,
            MessageContent::Bias(_) => 3,
            MessageContent::Clock(_) => 4,
            MessageContent::Null => NULL_TYPE,
        }
    }

    pub fn epoch(&self) -> Option<u32> {
        match self {
            MessageContent::Mask(m) => Some(m.epoch),
            MessageContent::Orbit(m) => Some(m.epoch),
            MessageContent::Bias(m) => Some(m.epoch),
            MessageContent::Clock(m) => Some(m.epoch),
            MessageContent::Null => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MessageClass {
    Supported,
    /// Defined types not handled here (5-7).
    Unimplemented,
    /// 0 and 8-62.
    Reserved,
}

pub fn classify(mestype: u8) -> MessageClass {
    match mestype {
        1..=4 | NULL_TYPE => MessageClass::Supported,
        5..=7 => MessageClass::Unimplemented,
        _ => MessageClass::Reserved,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PppMessage {
    pub mestype: u8,
    pub epoch: Option<u32>,
    pub source_prn: u8,
    pub payload: Vec<u8>,
    pub crc: Crc24,
    pub content: MessageContent,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Parsed {
    Message(PppMessage),
    Skipped { mestype: u8, class: MessageClass },
}

fn bits_value(bits: &[u8]) -> u32 {
    bits.iter().fold(0u32, |a, &b| a << 1 | (b & 1) as u32)
}

fn need<'a>(l: &'a TypeLayout, name: &str, record: bool) -> Result<&'a FieldDesc, MsgError> {
    let f = if record { l.record_field(name) } else { l.field(name) };
    f.ok_or_else(|| MsgError::MissingField { mestype: l.mestype, name: name.to_string() })
}

fn get(m: &BTreeMap<String, i128>, name: &str) -> i128 {
    m.get(name).copied().unwrap_or(0)
}

fn mask_bits(code: i128, width: usize) -> BTreeSet<u8> {
    (0..width).filter(|i| (code >> (width - 1 - i)) & 1 == 1).map(|i| i as u8 + 1).collect()
}

fn mask_code(prns: &BTreeSet<u8>, width: usize, field: &str) -> Result<i128, MsgError> {
    let mut c = 0i128;
    for &p in prns {
        if p == 0 || p as usize > width {
            return Err(MsgError::OutOfRange { field: field.to_string(), value: p as f64 });
        }
        c |= 1i128 << (width - p as usize);
    }
    Ok(c)
}

fn record_sat(r: &BTreeMap<String, i128>) -> Result<Option<SatId>, MsgError> {
    let slot = get(r, "sat_slot") as u32;
    if slot == 0 {
        return Ok(None);
    }
    SatId::from_slot(slot).map(Some).ok_or(MsgError::Slot(slot))
}

fn typed(l: &TypeLayout, raw: &RawFields, schema: &MessageSchema) -> Result<MessageContent, MsgError> {
    let h = &raw.fields;
    let epoch = get(h, "epoch") as u32;
    let iod_ssr = get(h, "iod_ssr") as u8;
    Ok(match l.mestype {
        1 => {
            let bw = need(l, "bds_mask", false)?.width;
            let gw = need(l, "gps_mask", false)?.width;
            need(l, "iodp", false)?;
            MessageContent::Mask(SatelliteMask {
                epoch,
                iod_ssr,
                iodp: get(h, "iodp") as u8,
                bds: mask_bits(get(h, "bds_mask"), bw),
                gps: mask_bits(get(h, "gps_mask"), gw),
            })
        }
        2 => {
            let comps = ["radial", "along", "cross"].map(|n| need(l, n, true));
            let [r, a, c] = comps;
            let (r, a, c) = (r?, a?, c?);
            need(l, "iod", true)?;
            let mut records = Vec::new();
            for rec in &raw.records {
                let Some(sat) = record_sat(rec)? else { continue };
                let delta = match (r.physical(get(rec, "radial")), a.physical(get(rec, "along")), c.physical(get(rec, "cross"))) {
                    (Some(radial), Some(along), Some(cross)) => Some(OrbitDelta { radial, along, cross }),
                    _ => None,
                };
                records.push(OrbitCorrection { sat, iod: get(rec, "iod") as u8, delta, ura_index: get(rec, "ura") as u8 });
            }
            MessageContent::Orbit(OrbitMessage { epoch, iod_ssr, records })
        }
        3 => {
            let b = need(l, "bias", true)?;
            need(l, "mode", true)?;
            let mut records: Vec<CodeBias> = Vec::new();
            for rec in &raw.records {
                let Some(sat) = record_sat(rec)? else { continue };
                let mode = get(rec, "mode") as u8;
                if !schema.bias_modes.is_empty() && !schema.bias_modes.contains(&mode) {
                    log::warn!("{sat}: signal mode {mode} outside the configured set");
                }
                let entry = BiasEntry { mode, bias: b.physical(get(rec, "bias")) };
                match records.last_mut() {
                    Some(last) if last.sat == sat => last.entries.push(entry),
                    _ => records.push(CodeBias { sat, entries: vec![entry] }),
                }
            }
            MessageContent::Bias(BiasMessage { epoch, iod_ssr, records })
        }
        4 => {
            let c0 = need(l, "c0", true)?;
            need(l, "iod", true)?;
            need(l, "iodp", false)?;
            let mut records = Vec::new();
            for rec in &raw.records {
                let Some(sat) = record_sat(rec)? else { continue };
                records.push(ClockCorrection { sat, iod: get(rec, "iod") as u8, c0: c0.physical(get(rec, "c0")) });
            }
            MessageContent::Clock(ClockMessage { epoch, iod_ssr, iodp: get(h, "iodp") as u8, records })
        }
        t => return Err(MsgError::Unsupported(t)),
    })
}

/// Parses a decoded 486-bit body (type, data, CRC). The CRC is checked
/// before any field is read.
pub fn parse_message(bits: &[u8], schema: &MessageSchema, source_prn: u8) -> Result<Parsed, MsgError> {
    if bits.len() != MESSAGE_BITS {
        return Err(MsgError::BodyLength(bits.len()));
    }
    let (body, crc_bits) = bits.split_at(BODY_BITS);
    let received = Crc24::from_bits(crc_bits);
    let computed = crc24q_compute(body);
    if computed != received {
        return Err(MsgError::Crc { computed: computed.value(), received: received.value() });
    }
    let mestype = bits_value(&body[..MESTYPE_BITS]) as u8;
    let payload = body[MESTYPE_BITS..].to_vec();
    let class = classify(mestype);
    if class != MessageClass::Supported {
        return Ok(Parsed::Skipped { mestype, class });
    }
    let content = if mestype == NULL_TYPE {
        MessageContent::Null
    } else {
        let l = schema.layout(mestype).ok_or(MsgError::MissingLayout(mestype))?;
        typed(l, &l.decode(&payload), schema)?
    };
    Ok(Parsed::Message(PppMessage { mestype, epoch: content.epoch(), source_prn, payload, crc: received, content }))
}

fn code(d: &FieldDesc, v: Option<f64>) -> Result<i128, MsgError> {
    match v {
        None => d.sentinel.ok_or_else(|| MsgError::OutOfRange { field: d.name.clone(), value: f64::NAN }),
        Some(x) => d.code_for(x).ok_or_else(|| MsgError::OutOfRange { field: d.name.clone(), value: x }),
    }
}

fn int_field(d: &FieldDesc, v: u64) -> Result<i128, MsgError> {
    let (lo, hi) = d.code_range();
    let c = v as i128;
    if c < lo || c > hi {
        return Err(MsgError::OutOfRange { field: d.name.clone(), value: v as f64 });
    }
    Ok(c)
}

fn sat_code(l: &TypeLayout, sat: SatId) -> Result<i128, MsgError> {
    let slot = sat.slot().ok_or(MsgError::OutOfRange { field: "sat_slot".into(), value: sat.prn as f64 })?;
    int_field(need(l, "sat_slot", true)?, slot as u64)
}

fn header(l: &TypeLayout, raw: &mut RawFields, epoch: u32, iod_ssr: u8) -> Result<(), MsgError> {
    raw.fields.insert("epoch".into(), int_field(need(l, "epoch", false)?, epoch as u64)?);
    raw.fields.insert("iod_ssr".into(), int_field(need(l, "iod_ssr", false)?, iod_ssr as u64)?);
    Ok(())
}

fn capacity(l: &TypeLayout, count: usize) -> Result<(), MsgError> {
    if count > l.capacity() {
        return Err(MsgError::Capacity { mestype: l.mestype, count, capacity: l.capacity() });
    }
    Ok(())
}

/// Builds the 486-bit body (type, data, CRC) for `content`.
pub fn serialize_message(content: &MessageContent, schema: &MessageSchema) -> Result<Vec<u8>, MsgError> {
    let mestype = content.mestype();
    let payload = if let MessageContent::Null = content {
        vec![0u8; DATA_BITS]
    } else {
        let l = schema.layout(mestype).ok_or(MsgError::MissingLayout(mestype))?;
        let mut raw = RawFields::default();
        match content {
            MessageContent::Mask(m) => {
                header(l, &mut raw, m.epoch, m.iod_ssr)?;
                raw.fields.insert("iodp".into(), int_field(need(l, "iodp", false)?, m.iodp as u64)?);
                for (name, set) in [("bds_mask", &m.bds), ("gps_mask", &m.gps)] {
                    raw.fields.insert(name.into(), mask_code(set, need(l, name, false)?.width, name)?);
                }
            }
            MessageContent::Orbit(m) => {
                header(l, &mut raw, m.epoch, m.iod_ssr)?;
                capacity(l, m.records.len())?;
                for r in &m.records {
                    let mut rec = BTreeMap::new();
                    rec.insert("sat_slot".into(), sat_code(l, r.sat)?);
                    rec.insert("iod".into(), int_field(need(l, "iod", true)?, r.iod as u64)?);
                    let comps = r.delta.map(|d| [d.radial, d.along, d.cross]);
                    for (k, name) in ["radial", "along", "cross"].into_iter().enumerate() {
                        rec.insert(name.into(), code(need(l, name, true)?, comps.map(|c| c[k]))?);
                    }
                    if let Some(d) = l.record_field("ura") {
                        rec.insert("ura".into(), int_field(d, r.ura_index as u64)?);
                    }
                    raw.records.push(rec);
                }
            }
            MessageContent::Bias(m) => {
                header(l, &mut raw, m.epoch, m.iod_ssr)?;
                let count = m.records.iter().map(|r| r.entries.len()).sum();
                capacity(l, count)?;
                for r in &m.records {
                    for e in &r.entries {
                        if !schema.bias_modes.is_empty() && !schema.bias_modes.contains(&e.mode) {
                            return Err(MsgError::OutOfRange { field: "mode".into(), value: e.mode as f64 });
                        }
                        let mut rec = BTreeMap::new();
                        rec.insert("sat_slot".into(), sat_code(l, r.sat)?);
                        rec.insert("mode".into(), int_field(need(l, "mode", true)?, e.mode as u64)?);
                        rec.insert("bias".into(), code(need(l, "bias", true)?, e.bias)?);
                        raw.records.push(rec);
                    }
                }
            }
            MessageContent::Clock(m) => {
                header(l, &mut raw, m.epoch, m.iod_ssr)?;
                raw.fields.insert("iodp".into(), int_field(need(l, "iodp", false)?, m.iodp as u64)?);
                capacity(l, m.records.len())?;
                for r in &m.records {
                    let mut rec = BTreeMap::new();
                    rec.insert("sat_slot".into(), sat_code(l, r.sat)?);
                    rec.insert("iod".into(), int_field(need(l, "iod", true)?, r.iod as u64)?);
                    rec.insert("c0".into(), code(need(l, "c0", true)?, r.c0)?);
                    raw.records.push(rec);
                }
            }
            MessageContent::Null => unreachable!(),
        }
        l.encode(&raw).map_err(|_| MsgError::Capacity { mestype, count: raw.records.len(), capacity: l.capacity() })?
    };
    let mut body: Vec<u8> = (0..MESTYPE_BITS).rev().map(|i| mestype >> i & 1).collect();
    body.extend(payload);
    let crc = crc24q_compute(&body);
    body.extend(crc.to_bits());
    debug_assert_eq!(body.len(), BODY_BITS + CRC_BITS);
    Ok(body)
}

#[cfg(test)]
mod tests;
