//! Transmit chain (schedule to symbols) and the streaming receive chain
//! (acquire, track, frame, LDPC, CRC, parse, store).

use std::collections::BTreeMap;

use log::{debug, info, warn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::framing::{confirm_frame_start, extract_frame, find_preambles, frame_symbols, FrameError, Polarity, FRAME_LEN};
use crate::ldpc::{
    bits_to_symbols, derive_generator, encode, synthetic_parity_matrix, DecodeResult, Decoder, GeneratorMatrix,
    LdpcError, ParityCheckMatrix, ReceivedSequence, DEFAULT_ITR_MAX,
};
use crate::pppmsg::{
    generate_schedule, parse_message, records_from_message, serialize_message, CorrectionRecord, CorrectionState,
    CorrectionStore, MessageClass, MessageContent, MessageSchema, MsgError, Parsed, PppMessage, ScheduleError,
    CYCLE_SECONDS,
};
use crate::prncode::{generate_code, CodeError, CodeTable, RangingCode, CHIP_RATE_HZ, CODE_PERIOD_S};
use crate::rfchain::{
    acquire, samples_per_code, AcqError, AcquisitionConfig, SampleBlock, TrackError, TrackStatus, TrackedSymbol,
    Tracker, TrackingConfig, TrackingOutput,
};
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Ldpc(#[from] LdpcError),
    #[error(transparent)]
    Message(#[from] MsgError),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Code(#[from] CodeError),
    #[error(transparent)]
    Acquisition(#[from] AcqError),
    #[error(transparent)]
    Track(#[from] TrackError),
    #[error("sample rate changed from {0} Hz to {1} Hz")]
    SampleRate(f64, f64),
}

/// Message schema plus the LDPC code in both directions.
pub struct Codec {
    pub schema: MessageSchema,
    h: ParityCheckMatrix,
    g: GeneratorMatrix,
    decoder: Decoder,
}

impl Codec {
    pub fn new(schema: MessageSchema, h: ParityCheckMatrix, itr_max: usize) -> Result<Self, PipelineError> {
        let g = derive_generator(&h)?;
        let decoder = Decoder::new(&h, itr_max);
        Ok(Codec { schema, h, g, decoder })
    }

    /// Default schema, shipped synthetic H.
    pub fn synthetic() -> Self {
        Codec::new(MessageSchema::default(), synthetic_parity_matrix(), DEFAULT_ITR_MAX).expect("shipped H is valid")
    }

    pub fn parity_matrix(&self) -> &ParityCheckMatrix {
        &self.h
    }

    pub fn itr_max(&self) -> usize {
        self.decoder.itr_max()
    }

    /// 486 message bits to 972 code bits.
    pub fn encode_bits(&self, message_bits: &[u8]) -> Result<Vec<u8>, PipelineError> {
        Ok(encode(&bits_to_symbols(message_bits)?, &self.g)?.to_bits())
    }

    /// Message bits and the 1000 frame symbols for `prn`.
    pub fn frame(&self, content: &MessageContent, prn: u8) -> Result<(Vec<u8>, Vec<i8>), PipelineError> {
        let bits = serialize_message(content, &self.schema)?;
        let symbols = frame_symbols(prn, &self.encode_bits(&bits)?)?;
        Ok((bits, symbols))
    }

    /// Decodes 972 polarity-corrected soft code symbols (positive for bit 0).
    pub fn decode_soft<T: Real>(&self, soft: &[T]) -> Result<DecodeResult, PipelineError> {
        let scale = soft.iter().map(|s| s.abs()).fold(T::zero(), |a, b| a + b) / T::of(soft.len().max(1) as f64);
        let norm: Vec<T> = if scale > T::zero() { soft.iter().map(|&s| s / scale).collect() } else { soft.to_vec() };
        Ok(self.decoder.decode(&ReceivedSequence::from_bit_soft(&norm)?))
    }
}

/// One transmitted frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFrame {
    pub index: usize,
    /// Broadcast second of day.
    pub time: u32,
    pub mestype: u8,
    pub epoch: Option<u32>,
    pub bits: String,
}

/// Consecutive broadcast cycles from `start_epoch`, truncated to
/// `n_frames`, as symbols for `prn`.
pub fn broadcast(
    codec: &Codec,
    state: &CorrectionState,
    start_epoch: u32,
    n_frames: usize,
    prn: u8,
) -> Result<(Vec<i8>, Vec<TruthFrame>), PipelineError> {
    let mut symbols = Vec::with_capacity(n_frames * FRAME_LEN);
    let mut truth = Vec::with_capacity(n_frames);
    let cycles = n_frames.div_ceil(CYCLE_SECONDS as usize);
    for c in 0..cycles {
        let start = (start_epoch + c as u32 * CYCLE_SECONDS) % 86_400;
        for f in generate_schedule(state, start, &codec.schema)? {
            if truth.len() == n_frames {
                break;
            }
            let (bits, s) = codec.frame(&f.content, prn)?;
            symbols.extend(s);
            truth.push(TruthFrame {
                index: truth.len(),
                time: f.time,
                mestype: f.content.mestype(),
                epoch: f.content.epoch(),
                bits: bits_to_hex(&bits),
            });
        }
    }
    Ok((symbols, truth))
}

/// MSB-first hex, zero-padded to whole bytes.
pub fn bits_to_hex(bits: &[u8]) -> String {
    bits.chunks(8)
        .map(|c| {
            let v = c.iter().enumerate().fold(0u8, |a, (i, &b)| a | (b & 1) << (7 - i));
            format!("{v:02x}")
        })
        .collect()
}

/// Inverse of [`bits_to_hex`], truncated to `n` bits.
pub fn hex_to_bits(hex: &str, n: usize) -> Option<Vec<u8>> {
    let mut bits = Vec::with_capacity(hex.len() * 4);
    for i in (0..hex.len()).step_by(2) {
        let v = u8::from_str_radix(hex.get(i..i + 2)?, 16).ok()?;
        bits.extend((0..8).rev().map(|k| v >> k & 1));
    }
    (bits.len() >= n).then(|| bits[..n].to_vec())
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReceiverConfig {
    pub acquisition: AcquisitionConfig,
    pub tracking: TrackingConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AcquisitionSummary {
    pub prn: u8,
    pub detected: bool,
    pub doppler_hz: f64,
    pub code_phase_samples: usize,
    /// Code phase converted to chips into the code period.
    pub code_phase_chips: f64,
    pub peak_metric: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelReport {
    pub prn: u8,
    pub tracked_epochs: usize,
    pub lock_lost_epoch: Option<u64>,
    pub mean_doppler_hz: f64,
    pub preambles: usize,
    pub frames_found: usize,
    pub frames_crc_passed: usize,
    pub ldpc_not_converged: usize,
    pub iteration_histogram: BTreeMap<usize, usize>,
    pub messages_by_type: BTreeMap<u8, usize>,
    pub anomalies: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub sample_rate_hz: f64,
    pub samples: u64,
    pub acquisition: Vec<AcquisitionSummary>,
    pub channels: Vec<ChannelReport>,
    pub correction_sets: usize,
    pub orphaned: Vec<String>,
    pub anomalies: Vec<String>,
}

impl RunReport {
    pub fn frames_crc_passed(&self) -> usize {
        self.channels.iter().map(|c| c.frames_crc_passed).sum()
    }
}

/// One frame pulled out of a tracked symbol stream.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedFrame {
    pub source_prn: u8,
    pub start_symbol: usize,
    pub start_sample: u64,
    /// Seconds from the first sample of the recording.
    pub rx_time_s: f64,
    /// Second of day, from the nearest mask epoch on the same channel.
    pub broadcast_time: Option<u32>,
    pub polarity: Polarity,
    pub iterations: usize,
    pub converged: bool,
    pub crc_ok: bool,
    pub bits: Vec<u8>,
    pub message: Option<PppMessage>,
    pub skipped: Option<(u8, MessageClass)>,
}

pub struct RunOutput<T: Real> {
    pub report: RunReport,
    pub frames: Vec<DecodedFrame>,
    pub records: Vec<CorrectionRecord>,
    pub tracking: Vec<TrackingOutput<T>>,
}

/// Streaming receiver over a single sample stream.
pub struct Receiver<'a, T: Real> {
    codec: &'a Codec,
    cfg: ReceiverConfig,
    codes: Vec<RangingCode>,
    pending: Vec<SampleBlock<T>>,
    pending_len: usize,
    trackers: Option<Vec<Tracker<T>>>,
    acquisition: Vec<AcquisitionSummary>,
    fs: f64,
    samples: u64,
}

impl<'a, T: Real> Receiver<'a, T> {
    pub fn new(codec: &'a Codec, table: &CodeTable, prns: &[u8], cfg: ReceiverConfig) -> Result<Self, PipelineError> {
        let codes = prns.iter().map(|&p| generate_code(p, table)).collect::<Result<Vec<_>, _>>()?;
        Ok(Receiver {
            codec,
            cfg,
            codes,
            pending: Vec::new(),
            pending_len: 0,
            trackers: None,
            acquisition: Vec::new(),
            fs: 0.0,
            samples: 0,
        })
    }

    pub fn push(&mut self, block: SampleBlock<T>) -> Result<(), PipelineError> {
        if self.fs == 0.0 {
            self.fs = block.sample_rate;
        } else if (block.sample_rate - self.fs).abs() > 1e-6 * self.fs {
            return Err(PipelineError::SampleRate(self.fs, block.sample_rate));
        }
        self.samples += block.len() as u64;
        if let Some(trackers) = &mut self.trackers {
            for t in trackers.iter_mut() {
                t.push(&block)?;
            }
            return Ok(());
        }
        self.pending_len += block.len();
        self.pending.push(block);
        let need = samples_per_code(self.fs) * (self.cfg.acquisition.max_periods.max(1) + 1);
        if self.pending_len >= need {
            self.start_tracking()?;
        }
        Ok(())
    }

    fn start_tracking(&mut self) -> Result<(), PipelineError> {
        let mut trackers = Vec::new();
        let Some(buf) = SampleBlock::concat(&self.pending) else {
            self.trackers = Some(trackers);
            return Ok(());
        };
        for code in &self.codes {
            let acq = match acquire(&buf, code, &self.cfg.acquisition) {
                Ok(a) => a,
                Err(AcqError::TooShort { .. }) => {
                    warn!("PRN {}: recording too short to acquire", code.prn);
                    continue;
                }
                Err(e) => return Err(e.into()),
            };
            let chips = acq.code_phase as f64 * CHIP_RATE_HZ / buf.sample_rate;
            info!(
                "PRN {}: {} doppler {:+.1} Hz code phase {:.2} chips metric {:.2}",
                code.prn,
                if acq.detected { "acquired" } else { "not found" },
                acq.doppler_hz,
                chips,
                acq.peak_metric
            );
            self.acquisition.push(AcquisitionSummary {
                prn: code.prn,
                detected: acq.detected,
                doppler_hz: acq.doppler_hz,
                code_phase_samples: acq.code_phase,
                code_phase_chips: chips,
                peak_metric: acq.peak_metric,
            });
            if acq.detected {
                let mut t = Tracker::new(
                    code,
                    &acq,
                    buf.start_index,
                    buf.sample_rate,
                    buf.center_offset,
                    self.cfg.tracking.clone(),
                )?;
                t.push(&buf)?;
                trackers.push(t);
            }
        }
        self.pending.clear();
        self.trackers = Some(trackers);
        Ok(())
    }

    pub fn finish(mut self) -> Result<RunOutput<T>, PipelineError> {
        if self.trackers.is_none() {
            self.start_tracking()?;
        }
        let outputs = self.trackers.take().unwrap_or_default().into_iter().map(Tracker::finish).collect();
        Ok(assemble(self.codec, outputs, self.fs, self.samples, std::mem::take(&mut self.acquisition)))
    }
}

/// Frames, decodes and stores an already tracked soft-symbol stream, one
/// symbol per code period.
pub fn decode_symbols<T: Real>(codec: &Codec, prn: u8, soft: &[T]) -> RunOutput<T> {
    let symbols = soft
        .iter()
        .enumerate()
        .map(|(i, &s)| TrackedSymbol { epoch: i as u64, start_sample: i as u64, soft: s, quadrature: T::zero() })
        .collect();
    let out = TrackingOutput { prn, symbols, lock: Vec::new(), status: TrackStatus::Finished };
    let rate = 1.0 / CODE_PERIOD_S;
    assemble(codec, vec![out], rate, soft.len() as u64, Vec::new())
}

fn assemble<T: Real>(
    codec: &Codec,
    outputs: Vec<TrackingOutput<T>>,
    fs: f64,
    samples: u64,
    acquisition: Vec<AcquisitionSummary>,
) -> RunOutput<T> {
    let mut report = RunReport {
        sample_rate_hz: fs,
        samples,
        acquisition,
        channels: Vec::new(),
        correction_sets: 0,
        orphaned: Vec::new(),
        anomalies: Vec::new(),
    };
    let mut frames = Vec::new();
    for out in &outputs {
        let (ch, mut f) = decode_channel(codec, out, fs);
        report.channels.push(ch);
        frames.append(&mut f);
    }
    frames.sort_by(|a, b| a.rx_time_s.total_cmp(&b.rx_time_s).then(a.source_prn.cmp(&b.source_prn)));

    let mut store = CorrectionStore::new();
    let mut records = Vec::new();
    for f in &frames {
        let Some(m) = &f.message else { continue };
        report.correction_sets += store.ingest(&m.content, f.rx_time_s).len();
        records.extend(records_from_message(m, f.rx_time_s));
    }
    report.orphaned = store.orphaned().iter().map(|s| s.to_string()).collect();
    if !report.orphaned.is_empty() {
        report.anomalies.push(format!("records for satellites outside the mask: {}", report.orphaned.join(" ")));
    }
    if !store.unexpected_bias().is_empty() {
        report.anomalies.push(format!("code bias for non-BDS satellites: {}", store.unexpected_bias().len()));
    }
    RunOutput { report, frames, records, tracking: outputs }
}

fn decode_channel<T: Real>(codec: &Codec, out: &TrackingOutput<T>, fs: f64) -> (ChannelReport, Vec<DecodedFrame>) {
    let prn = out.prn;
    let soft = out.soft_symbols();
    let hits = find_preambles(&soft);
    let conf = confirm_frame_start(&hits, prn);
    let mut ch = ChannelReport {
        prn,
        tracked_epochs: soft.len(),
        lock_lost_epoch: match out.status {
            TrackStatus::LockLost { epoch } => Some(epoch),
            _ => None,
        },
        mean_doppler_hz: if out.lock.is_empty() {
            0.0
        } else {
            out.lock.iter().map(|l| l.doppler_hz).sum::<f64>() / out.lock.len() as f64
        },
        preambles: hits.len(),
        frames_found: 0,
        frames_crc_passed: 0,
        ldpc_not_converged: 0,
        iteration_histogram: BTreeMap::new(),
        messages_by_type: BTreeMap::new(),
        anomalies: Vec::new(),
    };
    if let Some(e) = ch.lock_lost_epoch {
        ch.anomalies.push(format!("lock lost at epoch {e}"));
    }
    if conf.no_partner > 0 {
        ch.anomalies.push(format!("{} preamble hits without a partner one frame away", conf.no_partner));
    }
    if conf.prn_mismatch > 0 {
        ch.anomalies.push(format!("{} preamble hits with a mismatched PRN field", conf.prn_mismatch));
    }
    let mut frames = Vec::new();
    for hit in &conf.confirmed {
        let Ok(frame) = extract_frame(&soft, hit, prn) else {
            debug!("PRN {prn}: frame at symbol {} runs past the recording", hit.position);
            continue;
        };
        ch.frames_found += 1;
        let res = match codec.decode_soft(&frame.code_symbols) {
            Ok(r) => r,
            Err(e) => {
                ch.anomalies.push(format!("frame at symbol {}: {e}", hit.position));
                continue;
            }
        };
        *ch.iteration_histogram.entry(res.iterations_used).or_default() += 1;
        if !res.converged {
            ch.ldpc_not_converged += 1;
        }
        let bits = res.message_bits();
        let start_sample = out.symbols[hit.position].start_sample;
        let mut df = DecodedFrame {
            source_prn: prn,
            start_symbol: hit.position,
            start_sample,
            rx_time_s: start_sample as f64 / fs,
            broadcast_time: None,
            polarity: hit.polarity,
            iterations: res.iterations_used,
            converged: res.converged,
            crc_ok: false,
            bits,
            message: None,
            skipped: None,
        };
        match parse_message(&df.bits, &codec.schema, prn) {
            Ok(Parsed::Message(m)) => {
                df.crc_ok = true;
                *ch.messages_by_type.entry(m.mestype).or_default() += 1;
                df.message = Some(m);
            }
            Ok(Parsed::Skipped { mestype, class }) => {
                df.crc_ok = true;
                *ch.messages_by_type.entry(mestype).or_default() += 1;
                df.skipped = Some((mestype, class));
            }
            Err(MsgError::Crc { .. }) => {
                ch.anomalies.push(format!("CRC failure in frame at symbol {}", hit.position));
            }
            Err(e) => {
                // The CRC is checked before anything else can fail.
                df.crc_ok = true;
                ch.anomalies.push(format!("frame at symbol {}: {e}", hit.position));
            }
        }
        if df.crc_ok {
            ch.frames_crc_passed += 1;
        }
        frames.push(df);
    }
    assign_broadcast_times(&mut frames);
    (ch, frames)
}

/// Mask epochs equal their broadcast second, which anchors the rest.
fn assign_broadcast_times(frames: &mut [DecodedFrame]) {
    let anchors: Vec<(f64, u32)> = frames
        .iter()
        .filter_map(|f| match &f.message {
            Some(PppMessage { content: MessageContent::Mask(m), .. }) => Some((f.rx_time_s, m.epoch)),
            _ => None,
        })
        .collect();
    for f in frames.iter_mut() {
        let Some(&(t0, e0)) = anchors.iter().min_by(|a, b| (a.0 - f.rx_time_s).abs().total_cmp(&(b.0 - f.rx_time_s).abs()))
        else {
            continue;
        };
        let dt = (f.rx_time_s - t0).round() as i64;
        f.broadcast_time = Some((e0 as i64 + dt).rem_euclid(86_400) as u32);
    }
}
