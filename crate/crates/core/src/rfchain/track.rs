//! Carrier and code tracking. A short open-loop segment right after the
//! acquired epoch is used to refine frequency, phase and code offset
//! before closing the loops; those samples are then tracked again, so the
//! first symbols are not lost to pull-in.

use num_complex::Complex;
use thiserror::Error;

use super::acquire::AcquisitionResult;
use super::SampleBlock;
use crate::prncode::{RangingCode, CARRIER_HZ, CHIP_RATE_HZ, CODE_LENGTH};
use crate::scalar::Real;

const PAD: usize = 2;

#[derive(Debug, Error, PartialEq)]
pub enum TrackError {
    #[error("sample gap: expected index {expected}, block starts at {got}")]
    Gap { expected: u64, got: u64 },
    #[error("sample rate mismatch: tracker {tracker} Hz, block {block} Hz")]
    SampleRate { tracker: f64, block: f64 },
    #[error("invalid tracking configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackingConfig {
    pub pll_bandwidth_hz: f64,
    pub dll_bandwidth_hz: f64,
    pub damping: f64,
    /// Offset of early and late replicas from prompt, in chips.
    pub correlator_spacing_chips: f64,
    /// Open-loop epochs used to refine the initial estimates; 0 disables.
    pub fine_init_epochs: usize,
    /// Search half-width of the fine frequency estimate, in Hz.
    pub fine_search_hz: f64,
    /// Smoothing factor of the lock indicator.
    pub lock_alpha: f64,
    pub lock_threshold: f64,
    /// Consecutive epochs below threshold before declaring loss of lock.
    pub lock_dwell_epochs: usize,
    /// Epochs at the start exempt from lock decisions.
    pub settle_epochs: usize,
}

impl Default for TrackingConfig {
    fn default() -> Self {
        TrackingConfig {
            pll_bandwidth_hz: 25.0,
            dll_bandwidth_hz: 2.0,
            damping: 0.707,
            correlator_spacing_chips: 0.25,
            fine_init_epochs: 50,
            fine_search_hz: 200.0,
            lock_alpha: 0.02,
            lock_threshold: 0.3,
            lock_dwell_epochs: 300,
            settle_epochs: 200,
        }
    }
}

impl TrackingConfig {
    fn validate(&self) -> Result<(), TrackError> {
        let bad = |m: &str| Err(TrackError::Config(m.to_string()));
        if !(self.pll_bandwidth_hz > 0.0 && self.dll_bandwidth_hz > 0.0) {
            return bad("loop bandwidths must be positive");
        }
        if !(self.damping > 0.0) {
            return bad("damping must be positive");
        }
        if !(self.correlator_spacing_chips > 0.0 && self.correlator_spacing_chips < 1.0) {
            return bad("correlator spacing must lie in (0, 1) chips");
        }
        if !(self.lock_alpha > 0.0 && self.lock_alpha <= 1.0) {
            return bad("lock_alpha must lie in (0, 1]");
        }
        Ok(())
    }
}

/// One integrated code period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackedSymbol<T: Real> {
    /// Epoch count from the first tracked epoch.
    pub epoch: u64,
    /// Absolute sample index where the epoch starts.
    pub start_sample: u64,
    /// Prompt in-phase value, the soft symbol.
    pub soft: T,
    /// Prompt quadrature value.
    pub quadrature: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LockMetrics {
    /// Smoothed `(I^2 - Q^2) / (I^2 + Q^2)`.
    pub phase_lock: f64,
    pub doppler_hz: f64,
    pub code_error_chips: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackStatus {
    Running,
    Finished,
    LockLost { epoch: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackingOutput<T: Real> {
    pub prn: u8,
    pub symbols: Vec<TrackedSymbol<T>>,
    pub lock: Vec<LockMetrics>,
    pub status: TrackStatus,
}

impl<T: Real> TrackingOutput<T> {
    pub fn soft_symbols(&self) -> Vec<T> {
        self.symbols.iter().map(|s| s.soft).collect()
    }

    /// Mean `I^2` over mean `Q^2` across all epochs.
    pub fn iq_power_ratio(&self) -> f64 {
        let (i2, q2) = self.symbols.iter().fold((0.0, 0.0), |(a, b), s| {
            (a + s.soft.to_f64_lossy().powi(2), b + s.quadrature.to_f64_lossy().powi(2))
        });
        i2 / q2.max(f64::MIN_POSITIVE)
    }

    /// Mean `Q^2` over mean `I^2` for epochs at or after `skip`.
    pub fn quadrature_ratio(&self, skip: usize) -> f64 {
        let (i2, q2) = self.symbols.iter().skip(skip).fold((0.0, 0.0), |(a, b), s| {
            (a + s.soft.to_f64_lossy().powi(2), b + s.quadrature.to_f64_lossy().powi(2))
        });
        q2 / i2.max(f64::MIN_POSITIVE)
    }
}

#[derive(Debug, Clone, Copy)]
struct Nco {
    carrier_hz: f64,
    /// Carrier phase at `pos`, cycles.
    phase: f64,
    code_rate: f64,
    /// Replica chip position at `pos`.
    rem: f64,
    pos: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Stage {
    Fine,
    Track,
    Done,
}

struct Loop2 {
    wn: f64,
    zeta: f64,
    integ: f64,
}

impl Loop2 {
    fn new(bandwidth: f64, zeta: f64) -> Self {
        Loop2 { wn: 8.0 * zeta * bandwidth / (4.0 * zeta * zeta + 1.0), zeta, integ: 0.0 }
    }

    fn update(&mut self, err: f64, dt: f64) -> f64 {
        self.integ += self.wn * self.wn * dt * err;
        self.integ + 2.0 * self.zeta * self.wn * err
    }
}

/// Push-based single-channel tracker.
pub struct Tracker<T: Real> {
    prn: u8,
    cfg: TrackingConfig,
    fs: f64,
    center_offset: f64,
    code: Vec<T>,
    buf: Vec<Complex<T>>,
    buf_start: u64,
    start: Nco,
    nco: Nco,
    base_hz: f64,
    pll: Loop2,
    dll: Loop2,
    stage: Stage,
    fine: Vec<(f64, Complex<f64>, f64)>,
    lock_smooth: Option<f64>,
    below: usize,
    epoch: u64,
    out: TrackingOutput<T>,
}

impl<T: Real> Tracker<T> {
    /// `block_start` is the absolute index of the block that was acquired;
    /// `fs` and `center_offset` describe the stream.
    pub fn new(
        code: &RangingCode,
        acq: &AcquisitionResult,
        block_start: u64,
        fs: f64,
        center_offset: f64,
        cfg: TrackingConfig,
    ) -> Result<Self, TrackError> {
        cfg.validate()?;
        let chips = code.chips();
        let ext = (0..CODE_LENGTH + 2 * PAD)
            .map(|i| T::of(chips[(i + CODE_LENGTH - PAD) % CODE_LENGTH] as f64))
            .collect();
        let carrier_hz = center_offset + acq.doppler_hz;
        let nco = Nco {
            carrier_hz,
            phase: 0.0,
            code_rate: CHIP_RATE_HZ * (1.0 + acq.doppler_hz / CARRIER_HZ),
            rem: 0.0,
            pos: block_start + acq.code_phase as u64,
        };
        let stage = if cfg.fine_init_epochs == 0 { Stage::Track } else { Stage::Fine };
        Ok(Tracker {
            prn: code.prn,
            pll: Loop2::new(cfg.pll_bandwidth_hz, cfg.damping),
            dll: Loop2::new(cfg.dll_bandwidth_hz, cfg.damping),
            cfg,
            fs,
            center_offset,
            code: ext,
            buf: Vec::new(),
            buf_start: block_start,
            start: nco,
            nco,
            base_hz: carrier_hz,
            stage,
            fine: Vec::new(),
            lock_smooth: None,
            below: 0,
            epoch: 0,
            out: TrackingOutput { prn: code.prn, symbols: Vec::new(), lock: Vec::new(), status: TrackStatus::Running },
        })
    }

    pub fn prn(&self) -> u8 {
        self.prn
    }

    pub fn status(&self) -> TrackStatus {
        self.out.status
    }

    /// Output accumulated so far.
    pub fn output(&self) -> &TrackingOutput<T> {
        &self.out
    }

    /// Feeds the next contiguous block of the stream.
    pub fn push(&mut self, block: &SampleBlock<T>) -> Result<(), TrackError> {
        if self.stage == Stage::Done {
            return Ok(());
        }
        if (block.sample_rate - self.fs).abs() > 1e-6 * self.fs {
            return Err(TrackError::SampleRate { tracker: self.fs, block: block.sample_rate });
        }
        let end = self.buf_start + self.buf.len() as u64;
        if block.start_index > end {
            return Err(TrackError::Gap { expected: end, got: block.start_index });
        }
        let skip = (end - block.start_index) as usize;
        if skip < block.len() {
            self.buf.extend_from_slice(&block.samples[skip..]);
        }
        self.run();
        Ok(())
    }

    /// Ends the stream and returns everything tracked.
    pub fn finish(mut self) -> TrackingOutput<T> {
        if self.stage == Stage::Fine && !self.fine.is_empty() {
            self.refine();
            self.run();
        }
        if self.out.status == TrackStatus::Running {
            self.out.status = TrackStatus::Finished;
        }
        self.out
    }

    fn epoch_len(&self, n: &Nco) -> usize {
        let step = n.code_rate / self.fs;
        ((CODE_LENGTH as f64 - n.rem) / step).ceil() as usize
    }

    fn run(&mut self) {
        loop {
            if self.stage == Stage::Done {
                self.buf.clear();
                return;
            }
            let n = self.nco;
            if n.pos < self.buf_start {
                // Tracker started before the buffered data (cannot happen
                // with a correct acquisition block); skip ahead.
                self.nco.pos = self.buf_start;
                continue;
            }
            let off = (n.pos - self.buf_start) as usize;
            let len = self.epoch_len(&n);
            if off + len > self.buf.len() {
                break;
            }
            let [e, p, l] = self.correlate(off, len, &n);
            let dt = len as f64 / self.fs;
            self.nco.pos += len as u64;
            self.nco.phase = (n.phase + n.carrier_hz * dt).rem_euclid(1.0);
            self.nco.rem = n.rem + len as f64 * n.code_rate / self.fs - CODE_LENGTH as f64;
            match self.stage {
                Stage::Fine => {
                    let d = self.cfg.correlator_spacing_chips;
                    let (ea, la) = (e.norm(), l.norm());
                    let disc = if ea + la > 0.0 { (la - ea) / (ea + la) * (1.0 - d) } else { 0.0 };
                    let t_mid = (n.pos - self.start.pos) as f64 / self.fs + dt / 2.0;
                    self.fine.push((t_mid, p, disc));
                    if self.fine.len() >= self.cfg.fine_init_epochs {
                        self.refine();
                    }
                }
                Stage::Track => self.close_loops(n, e, p, l, dt),
                Stage::Done => unreachable!(),
            }
        }
        if self.stage == Stage::Track {
            let keep = (self.nco.pos.saturating_sub(self.buf_start) as usize).min(self.buf.len());
            self.buf.drain(..keep);
            self.buf_start += keep as u64;
        }
    }

    /// Estimates frequency and phase from the squared prompts (immune to
    /// data) and the code offset from the mean early/late discriminator, then
    /// rewinds to the first epoch.
    fn refine(&mut self) {
        let sq: Vec<(f64, Complex<f64>)> = self.fine.iter().map(|&(t, p, _)| (t, p * p)).collect();
        let score = |df: f64| -> Complex<f64> {
            sq.iter().map(|&(t, z)| z * Complex::from_polar(1.0, -2.0 * std::f64::consts::TAU * df * t)).sum()
        };
        let span = self.fine.last().map_or(1e-3, |f| f.0 + 1e-3);
        let coarse = (0.1 / span).max(0.01);
        let search = |lo: f64, hi: f64, step: f64| {
            let steps = ((hi - lo) / step).ceil() as usize;
            (0..=steps).map(|i| lo + i as f64 * step).max_by(|a, b| score(*a).norm().total_cmp(&score(*b).norm()))
        };
        let h = self.cfg.fine_search_hz;
        let mut df = search(-h, h, coarse).unwrap_or(0.0);
        df = search(df - coarse, df + coarse, coarse / 50.0).unwrap_or(df);
        let phase_err = score(df).arg() / 2.0;
        let code_err = self.fine.iter().map(|f| f.2).sum::<f64>() / self.fine.len() as f64;

        let mut n = self.start;
        n.carrier_hz += df;
        n.phase = (n.phase + phase_err / std::f64::consts::TAU).rem_euclid(1.0);
        n.code_rate = CHIP_RATE_HZ * (1.0 + (n.carrier_hz - self.center_offset) / CARRIER_HZ);
        n.rem = code_err.clamp(-0.5, 0.5);
        if n.rem < 0.0 {
            // Keep the replica position non-negative by starting one sample
            // later.
            n.rem += n.code_rate / self.fs;
            n.pos += 1;
            n.phase = (n.phase + n.carrier_hz / self.fs).rem_euclid(1.0);
        }
        self.base_hz = n.carrier_hz;
        self.nco = n;
        self.fine.clear();
        self.stage = Stage::Track;
    }

    fn close_loops(&mut self, n: Nco, e: Complex<f64>, p: Complex<f64>, l: Complex<f64>, dt: f64) {
        let pll_err = if p.re != 0.0 { (p.im / p.re).atan() } else { std::f64::consts::FRAC_PI_2 };
        let fadj = self.pll.update(pll_err, dt) / std::f64::consts::TAU;
        self.nco.carrier_hz = self.base_hz + fadj;
        let d = self.cfg.correlator_spacing_chips;
        let (ea, la) = (e.norm(), l.norm());
        let code_err = if ea + la > 0.0 { (la - ea) / (ea + la) * (1.0 - d) } else { 0.0 };
        let cadj = self.dll.update(code_err, dt);
        let doppler = self.nco.carrier_hz - self.center_offset;
        self.nco.code_rate = CHIP_RATE_HZ * (1.0 + doppler / CARRIER_HZ) + cadj;

        let i2 = p.re * p.re;
        let q2 = p.im * p.im;
        let c2 = if i2 + q2 > 0.0 { (i2 - q2) / (i2 + q2) } else { 0.0 };
        let s = match self.lock_smooth {
            None => c2,
            Some(s) => s + self.cfg.lock_alpha * (c2 - s),
        };
        self.lock_smooth = Some(s);
        self.out.symbols.push(TrackedSymbol {
            epoch: self.epoch,
            start_sample: n.pos,
            soft: T::of(p.re),
            quadrature: T::of(p.im),
        });
        self.out.lock.push(LockMetrics { phase_lock: s, doppler_hz: doppler, code_error_chips: code_err });
        if self.epoch >= self.cfg.settle_epochs as u64 && s < self.cfg.lock_threshold {
            self.below += 1;
            if self.below >= self.cfg.lock_dwell_epochs {
                log::warn!("PRN {}: loss of lock at epoch {}", self.prn, self.epoch);
                self.out.status = TrackStatus::LockLost { epoch: self.epoch };
                self.stage = Stage::Done;
            }
        } else {
            self.below = 0;
        }
        self.epoch += 1;
    }

    /// Early, prompt and late correlations over `len` samples at `off`.
    fn correlate(&self, off: usize, len: usize, n: &Nco) -> [Complex<f64>; 3] {
        let x = &self.buf[off..off + len];
        let step = n.code_rate / self.fs;
        let d = self.cfg.correlator_spacing_chips;
        let mut rot64 = Complex::from_polar(1.0, -std::f64::consts::TAU * n.phase);
        let dphi64 = Complex::from_polar(1.0, -std::f64::consts::TAU * n.carrier_hz / self.fs);
        let dphi = Complex::new(T::of(dphi64.re), T::of(dphi64.im));
        let z = Complex::new(T::zero(), T::zero());
        let (mut ea, mut pa, mut la) = (z, z, z);
        let pad = PAD as f64;
        let mut cp = n.rem + pad;
        let last = self.code.len() - 1;
        // Replica averaged over each sample interval, as a front end would.
        let chip = |at: f64| -> T {
            let i = (at as usize).min(last);
            let over = at + step - (i + 1) as f64;
            if over > 0.0 && i < last {
                let f = T::of(over / step);
                self.code[i] * (T::one() - f) + self.code[i + 1] * f
            } else {
                self.code[i]
            }
        };
        // Resynchronize the single-precision phasor periodically.
        for chunk in x.chunks(1024) {
            let mut rot = Complex::new(T::of(rot64.re), T::of(rot64.im));
            for s in chunk {
                let v = *s * rot;
                let ce = chip(cp - d);
                let cpr = chip(cp);
                let cl = chip(cp + d);
                ea = ea + v * ce;
                pa = pa + v * cpr;
                la = la + v * cl;
                rot = rot * dphi;
                cp += step;
            }
            rot64 *= dphi64.powu(chunk.len() as u32);
        }
        let c = |a: Complex<T>| Complex::new(a.re.to_f64_lossy(), a.im.to_f64_lossy());
        [c(ea), c(pa), c(la)]
    }
}

/// Tracks one PRN over a whole in-memory block.
pub fn track<T: Real>(
    block: &SampleBlock<T>,
    code: &RangingCode,
    acq: &AcquisitionResult,
    cfg: &TrackingConfig,
) -> Result<TrackingOutput<T>, TrackError> {
    let mut t = Tracker::new(code, acq, block.start_index, block.sample_rate, block.center_offset, cfg.clone())?;
    t.push(block)?;
    Ok(t.finish())
}
