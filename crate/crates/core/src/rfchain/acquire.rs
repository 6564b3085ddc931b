use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

use super::SampleBlock;
use crate::prncode::{RangingCode, CHIP_RATE_HZ, CODE_LENGTH};
use crate::scalar::Real;

#[derive(Debug, Error, PartialEq)]
pub enum AcqError {
    #[error("block holds {got} samples, need at least one code period ({need})")]
    TooShort { got: usize, need: usize },
    #[error("invalid search grid: range {range} Hz, step {step} Hz")]
    Grid { range: f64, step: f64 },
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcquisitionConfig {
    /// Search is `center +/- doppler_range_hz`.
    pub doppler_range_hz: f64,
    pub doppler_step_hz: f64,
    /// Peak-to-second-peak ratio required for detection.
    pub threshold: f64,
    /// Upper bound on 1 ms periods summed non-coherently.
    pub max_periods: usize,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        AcquisitionConfig { doppler_range_hz: 1000.0, doppler_step_hz: 250.0, threshold: 2.0, max_periods: 10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcquisitionResult {
    pub prn: u8,
    pub detected: bool,
    /// Samples from the block start to the next code epoch.
    pub code_phase: usize,
    /// Doppler relative to the block's center offset.
    pub doppler_hz: f64,
    pub peak_metric: f64,
    /// Peak power for each Doppler bin (ascending frequency).
    pub doppler_profile: Vec<f64>,
}

/// Replica sampled at `fs` for one period.
pub(crate) fn sampled_code(code: &RangingCode, fs: f64, n: usize) -> Vec<f64> {
    let chips = code.chips();
    (0..n).map(|i| chips[((i as f64 * CHIP_RATE_HZ / fs) as usize) % CODE_LENGTH] as f64).collect()
}

/// Parallel code-phase search: for every Doppler bin, one FFT correlation
/// per 1 ms period, powers summed over periods.
pub fn acquire<T: Real>(
    block: &SampleBlock<T>,
    code: &RangingCode,
    cfg: &AcquisitionConfig,
) -> Result<AcquisitionResult, AcqError> {
    let fs = block.sample_rate;
    let n = block.samples_per_code();
    if block.len() < n || n == 0 {
        return Err(AcqError::TooShort { got: block.len(), need: n });
    }
    if !(cfg.doppler_step_hz > 0.0) || !(cfg.doppler_range_hz >= 0.0) {
        return Err(AcqError::Grid { range: cfg.doppler_range_hz, step: cfg.doppler_step_hz });
    }
    let periods = (block.len() / n).min(cfg.max_periods.max(1));
    let mut planner = FftPlanner::<T>::new();
    let fwd: Arc<dyn Fft<T>> = planner.plan_fft_forward(n);
    let inv: Arc<dyn Fft<T>> = planner.plan_fft_inverse(n);

    let mut code_f: Vec<Complex<T>> =
        sampled_code(code, fs, n).into_iter().map(|c| Complex::new(T::of(c), T::zero())).collect();
    fwd.process(&mut code_f);
    code_f.iter_mut().for_each(|c| *c = c.conj());

    let bins = (2.0 * cfg.doppler_range_hz / cfg.doppler_step_hz).floor() as usize + 1;
    let mut best = (f64::MIN, 0usize, 0usize);
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(bins);
    let mut buf = vec![Complex::new(T::zero(), T::zero()); n];
    for b in 0..bins {
        let fd = -cfg.doppler_range_hz + b as f64 * cfg.doppler_step_hz;
        let f = block.center_offset + fd;
        let dphi = Complex::from_polar(1.0, -std::f64::consts::TAU * f / fs);
        let mut row = vec![0.0f64; n];
        for p in 0..periods {
            let base = p * n;
            let mut rot = Complex::from_polar(1.0, -std::f64::consts::TAU * f * base as f64 / fs);
            for (o, s) in buf.iter_mut().zip(&block.samples[base..base + n]) {
                *o = *s * Complex::new(T::of(rot.re), T::of(rot.im));
                rot *= dphi;
            }
            fwd.process(&mut buf);
            for (o, c) in buf.iter_mut().zip(&code_f) {
                *o = *o * *c;
            }
            inv.process(&mut buf);
            for (r, v) in row.iter_mut().zip(&buf) {
                *r += v.norm_sqr().to_f64_lossy();
            }
        }
        let (idx, &pk) = row.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).expect("nonempty");
        if pk > best.0 {
            best = (pk, b, idx);
        }
        rows.push(row);
    }
    let (peak, bin, phase) = best;
    let guard = (fs / CHIP_RATE_HZ).ceil() as usize;
    let row = &rows[bin];
    let second = row
        .iter()
        .enumerate()
        .filter(|&(i, _)| {
            let d = i.abs_diff(phase);
            d.min(n - d) > guard
        })
        .map(|(_, &v)| v)
        .fold(0.0f64, f64::max);
    let metric = if second > 0.0 { peak / second } else { f64::INFINITY };
    let bin = if periods > 1 { aligned_bin(block, code, cfg, bins, phase, periods).unwrap_or(bin) } else { bin };
    Ok(AcquisitionResult {
        prn: code.prn,
        detected: metric >= cfg.threshold,
        code_phase: phase,
        doppler_hz: -cfg.doppler_range_hz + bin as f64 * cfg.doppler_step_hz,
        peak_metric: metric,
        doppler_profile: rows.iter().map(|r| r.iter().copied().fold(0.0, f64::max)).collect(),
    })
}

/// Re-ranks the Doppler bins with windows that start on code epochs, so
/// no window straddles a symbol transition.
fn aligned_bin<T: Real>(
    block: &SampleBlock<T>,
    code: &RangingCode,
    cfg: &AcquisitionConfig,
    bins: usize,
    phase: usize,
    periods: usize,
) -> Option<usize> {
    let fs = block.sample_rate;
    let n = block.samples_per_code();
    let windows = ((block.len() - phase) / n).min(periods);
    if windows == 0 {
        return None;
    }
    let replica = sampled_code(code, fs, n);
    let mut best = (f64::MIN, 0);
    for b in 0..bins {
        let f = block.center_offset - cfg.doppler_range_hz + b as f64 * cfg.doppler_step_hz;
        let dphi = Complex::from_polar(1.0, -std::f64::consts::TAU * f / fs);
        let mut power = 0.0;
        for w in 0..windows {
            let base = phase + w * n;
            let mut rot = Complex::from_polar(1.0, -std::f64::consts::TAU * f * base as f64 / fs);
            let mut acc = Complex::new(0.0, 0.0);
            for (s, &c) in block.samples[base..base + n].iter().zip(&replica) {
                let s = Complex::new(s.re.to_f64_lossy(), s.im.to_f64_lossy());
                acc += s * rot * c;
                rot *= dphi;
            }
            power += acc.norm_sqr();
        }
        if power > best.0 {
            best = (power, b);
        }
    }
    Some(best.1)
}
