//! File formats shared by the subcommands.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use ppp_b2b::framing::Polarity;
use ppp_b2b::pipeline::{bits_to_hex, DecodedFrame, TruthFrame};
use ppp_b2b::pppmsg::{records_from_message, CorrectionRecord, MessageClass, MessageContent, SatId};

pub fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<()> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(f);
    for it in items {
        serde_json::to_writer(&mut w, &it)?;
        w.write_all(b"\n")?;
    }
    w.flush().with_context(|| format!("writing {}", path.display()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruthChannel {
    pub prn: u8,
    pub doppler_hz: f64,
    pub code_phase_chips: f64,
    pub cn0_dbhz: f64,
    pub frames: Vec<TruthFrameTiming>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruthFrameTiming {
    #[serde(flatten)]
    pub frame: TruthFrame,
    pub start_time_s: f64,
    pub start_sample: u64,
    pub complete_in_recording: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Truth {
    pub seed: u64,
    pub sample_rate_hz: f64,
    pub center_offset_hz: f64,
    pub duration_s: f64,
    pub samples: u64,
    pub format: String,
    pub start_epoch: u32,
    pub channels: Vec<TruthChannel>,
}

/// One decoded frame of the message dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageLine {
    pub source_prn: u8,
    pub rx_time_s: f64,
    /// Broadcast second of day when a mask anchored the channel.
    pub time: Option<u32>,
    pub start_symbol: usize,
    pub start_sample: u64,
    pub inverted: bool,
    pub iterations: usize,
    pub converged: bool,
    pub crc_ok: bool,
    pub mestype: Option<u8>,
    pub epoch: Option<u32>,
    pub class: Option<MessageClass>,
    pub sats: Vec<SatId>,
    pub records: Vec<CorrectionRecord>,
    pub bits: String,
}

impl MessageLine {
    pub fn from_frame(f: &DecodedFrame) -> Self {
        let (mestype, epoch, class, sats, records) = match (&f.message, f.skipped) {
            (Some(m), _) => {
                let sats = match &m.content {
                    MessageContent::Orbit(o) => o.records.iter().map(|r| r.sat).collect(),
                    MessageContent::Clock(c) => c.records.iter().map(|r| r.sat).collect(),
                    MessageContent::Bias(b) => b.records.iter().map(|r| r.sat).collect(),
                    MessageContent::Mask(k) => k.satellites().collect(),
                    MessageContent::Null => Vec::new(),
                };
                (Some(m.mestype), m.epoch, Some(MessageClass::Supported), sats, records_from_message(m, f.rx_time_s))
            }
            (None, Some((t, c))) => (Some(t), None, Some(c), Vec::new(), Vec::new()),
            (None, None) => (None, None, None, Vec::new(), Vec::new()),
        };
        MessageLine {
            source_prn: f.source_prn,
            rx_time_s: f.rx_time_s,
            time: f.broadcast_time,
            start_symbol: f.start_symbol,
            start_sample: f.start_sample,
            inverted: f.polarity == Polarity::Inverted,
            iterations: f.iterations,
            converged: f.converged,
            crc_ok: f.crc_ok,
            mestype,
            epoch,
            class,
            sats,
            records,
            bits: bits_to_hex(&f.bits),
        }
    }
}
