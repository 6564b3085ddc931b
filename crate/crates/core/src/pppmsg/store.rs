//! Latest-state store that binds mask, orbit and clock records by IOD.
//!
//! A satellite's corrections are consistent when the orbit and clock
//! messages carry the mask's `iod_ssr`, the clock message carries the
//! mask's `iodp`, and the orbit and clock records share the same `iod`.

use std::collections::{BTreeMap, BTreeSet};

use super::{ClockCorrection, CodeBias, MessageContent, OrbitCorrection, PppMessage, SatId, SatelliteMask, System};

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionSet {
    pub sat: SatId,
    pub iod_ssr: u8,
    pub iodp: u8,
    pub iod: u8,
    pub orbit_epoch: u32,
    pub clock_epoch: u32,
    pub orbit: OrbitCorrection,
    pub clock: ClockCorrection,
    pub bias: Option<CodeBias>,
    /// Receive time of the record that completed the set.
    pub received: f64,
}

#[derive(Debug, Clone, PartialEq)]
struct Stamped<R> {
    epoch: u32,
    iod_ssr: u8,
    iodp: u8,
    record: R,
    received: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
struct SatState {
    orbit: Option<Stamped<OrbitCorrection>>,
    clock: Option<Stamped<ClockCorrection>>,
    bias: Option<Stamped<CodeBias>>,
    last: Option<(u32, u32, u8, u8, u8)>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorrectionStore {
    mask: Option<SatelliteMask>,
    sats: BTreeMap<SatId, SatState>,
    orphaned: BTreeSet<SatId>,
    unexpected: BTreeSet<SatId>,
}

impl CorrectionStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn mask(&self) -> Option<&SatelliteMask> {
        self.mask.as_ref()
    }

    /// Satellites that received records while absent from the active mask.
    pub fn orphaned(&self) -> &BTreeSet<SatId> {
        &self.orphaned
    }

    /// Non-BDS satellites that received code-bias records.
    pub fn unexpected_bias(&self) -> &BTreeSet<SatId> {
        &self.unexpected
    }

    pub fn latest_orbit(&self, sat: SatId) -> Option<(u32, &OrbitCorrection)> {
        self.sats.get(&sat)?.orbit.as_ref().map(|s| (s.epoch, &s.record))
    }

    pub fn latest_clock(&self, sat: SatId) -> Option<(u32, &ClockCorrection)> {
        self.sats.get(&sat)?.clock.as_ref().map(|s| (s.epoch, &s.record))
    }

    pub fn latest_bias(&self, sat: SatId) -> Option<&CodeBias> {
        self.sats.get(&sat)?.bias.as_ref().map(|s| &s.record)
    }

    fn touch(&mut self, sat: SatId) -> &mut SatState {
        if !self.mask.as_ref().is_some_and(|m| m.contains(sat)) {
            self.orphaned.insert(sat);
        }
        self.sats.entry(sat).or_default()
    }

    /// Updates the store and returns the sets that became consistent.
    /// Re-ingesting a message already seen emits nothing.
    pub fn ingest(&mut self, content: &MessageContent, received: f64) -> Vec<CorrectionSet> {
        let mut affected: Vec<SatId> = Vec::new();
        match content {
            MessageContent::Null => return Vec::new(),
            MessageContent::Mask(m) => {
                self.mask = Some(m.clone());
                affected.extend(m.satellites());
            }
            MessageContent::Orbit(m) => {
                for r in &m.records {
                    let st = Stamped { epoch: m.epoch, iod_ssr: m.iod_ssr, iodp: 0, record: r.clone(), received };
                    self.touch(r.sat).orbit = Some(st);
                    affected.push(r.sat);
                }
            }
            MessageContent::Clock(m) => {
                for r in &m.records {
                    let st = Stamped { epoch: m.epoch, iod_ssr: m.iod_ssr, iodp: m.iodp, record: r.clone(), received };
                    self.touch(r.sat).clock = Some(st);
                    affected.push(r.sat);
                }
            }
            MessageContent::Bias(m) => {
                for r in &m.records {
                    if r.sat.system != System::Bds {
                        self.unexpected.insert(r.sat);
                    }
                    let st = Stamped { epoch: m.epoch, iod_ssr: m.iod_ssr, iodp: 0, record: r.clone(), received };
                    self.touch(r.sat).bias = Some(st);
                }
            }
        }
        let Some(mask) = self.mask.clone() else { return Vec::new() };
        let mut out = Vec::new();
        for sat in affected {
            if !mask.contains(sat) {
                continue;
            }
            let Some(st) = self.sats.get_mut(&sat) else { continue };
            let (Some(o), Some(c)) = (&st.orbit, &st.clock) else { continue };
            let consistent = o.iod_ssr == mask.iod_ssr
                && c.iod_ssr == mask.iod_ssr
                && c.iodp == mask.iodp
                && o.record.iod == c.record.iod;
            if !consistent {
                continue;
            }
            let key = (o.epoch, c.epoch, mask.iod_ssr, mask.iodp, c.record.iod);
            if st.last == Some(key) {
                continue;
            }
            st.last = Some(key);
            out.push(CorrectionSet {
                sat,
                iod_ssr: mask.iod_ssr,
                iodp: mask.iodp,
                iod: c.record.iod,
                orbit_epoch: o.epoch,
                clock_epoch: c.epoch,
                orbit: o.record.clone(),
                clock: c.record.clone(),
                bias: st.bias.as_ref().map(|b| b.record.clone()),
                received,
            });
        }
        out
    }
}

/// Convenience wrapper over [`CorrectionStore::ingest`].
pub fn ingest_message(store: &mut CorrectionStore, msg: &PppMessage, received: f64) -> Vec<CorrectionSet> {
    store.ingest(&msg.content, received)
}
