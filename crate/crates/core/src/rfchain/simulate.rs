use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use super::{samples_per_code, Quantization, SampleBlock, MIN_SAMPLE_RATE_HZ};
use crate::prncode::{generate_code, CodeError, CodeTable, CARRIER_HZ, CHIP_RATE_HZ, CODE_LENGTH};
use crate::scalar::Real;

/// Largest Doppler the simulator accepts, in Hz.
pub const MAX_DOPPLER_HZ: f64 = 50_000.0;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("sample rate {0} Hz is below twice the chipping rate")]
    SampleRate(f64),
    #[error("duration must be positive, got {0} s")]
    Duration(f64),
    #[error("Doppler {0} Hz out of range")]
    Doppler(f64),
    #[error("code phase {0} chips out of range")]
    CodePhase(f64),
    #[error(transparent)]
    Code(#[from] CodeError),
}

/// One transmitting satellite.
#[derive(Debug, Clone, PartialEq)]
pub struct SimChannel {
    pub prn: u8,
    pub doppler_hz: f64,
    /// Chips from the start of the recording to the first code epoch.
    pub code_phase_chips: f64,
    pub carrier_phase_rad: f64,
    pub cn0_dbhz: f64,
    /// One +/-1 symbol per code period, starting at the first epoch.
    /// Before the first epoch and past the end the symbol is +1.
    pub symbols: Vec<i8>,
}

impl SimChannel {
    pub fn new(prn: u8, doppler_hz: f64, code_phase_chips: f64, cn0_dbhz: f64) -> Self {
        SimChannel { prn, doppler_hz, code_phase_chips, carrier_phase_rad: 0.0, cn0_dbhz, symbols: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimScenario {
    pub sample_rate_hz: f64,
    pub duration_s: f64,
    pub center_offset_hz: f64,
    pub seed: u64,
    /// Suppress noise entirely.
    pub noiseless: bool,
    pub quantization: Quantization,
    /// Samples per emitted block; 0 means one code period.
    pub block_len: usize,
    pub channels: Vec<SimChannel>,
}

impl Default for SimScenario {
    fn default() -> Self {
        SimScenario {
            sample_rate_hz: 3.0 * CHIP_RATE_HZ,
            duration_s: 0.01,
            center_offset_hz: 0.0,
            seed: 0,
            noiseless: false,
            quantization: Quantization::Float,
            block_len: 0,
            channels: Vec::new(),
        }
    }
}

struct ChannelState {
    code: Vec<i8>,
    amp: f64,
    carrier_hz: f64,
    phase0_cycles: f64,
    code_rate: f64,
    offset_chips: f64,
    symbols: Vec<i8>,
}

/// Streaming signal generator; yields consecutive sample blocks.
pub struct Simulator<T: Real> {
    fs: f64,
    center_offset: f64,
    quantization: Quantization,
    block_len: usize,
    total: u64,
    next: u64,
    noise_sigma: f64,
    quant_sigma: f64,
    channels: Vec<ChannelState>,
    rng: ChaCha8Rng,
    acc: Vec<Complex<f64>>,
    _t: std::marker::PhantomData<T>,
}

impl<T: Real> Simulator<T> {
    pub fn new(scenario: &SimScenario, codes: &CodeTable) -> Result<Self, SimError> {
        let fs = scenario.sample_rate_hz;
        if !(fs >= MIN_SAMPLE_RATE_HZ) {
            return Err(SimError::SampleRate(fs));
        }
        if !(scenario.duration_s > 0.0) {
            return Err(SimError::Duration(scenario.duration_s));
        }
        let cn0_ref = scenario.channels.iter().map(|c| c.cn0_dbhz).fold(f64::NEG_INFINITY, f64::max);
        // Strongest channel has amplitude 1/sqrt(2); noise density follows
        // from its C/N0. Noise alone gets unit variance per component.
        let noise_density = if cn0_ref.is_finite() { 0.5 / 10f64.powf(cn0_ref / 10.0) } else { 2.0 / fs };
        let noise_sigma = if scenario.noiseless { 0.0 } else { (noise_density * fs / 2.0).sqrt() };
        let mut channels = Vec::with_capacity(scenario.channels.len());
        let mut signal_power = 0.0;
        for ch in &scenario.channels {
            if !(ch.doppler_hz.abs() <= MAX_DOPPLER_HZ) {
                return Err(SimError::Doppler(ch.doppler_hz));
            }
            if !(0.0..CODE_LENGTH as f64).contains(&ch.code_phase_chips) {
                return Err(SimError::CodePhase(ch.code_phase_chips));
            }
            let code = generate_code(ch.prn, codes)?.chips().to_vec();
            let amp = (0.5 * 10f64.powf((ch.cn0_dbhz - cn0_ref) / 10.0)).sqrt();
            signal_power += amp * amp;
            channels.push(ChannelState {
                code,
                amp,
                carrier_hz: scenario.center_offset_hz + ch.doppler_hz,
                phase0_cycles: ch.carrier_phase_rad / std::f64::consts::TAU,
                code_rate: CHIP_RATE_HZ * (1.0 + ch.doppler_hz / CARRIER_HZ),
                offset_chips: ch.code_phase_chips,
                symbols: ch.symbols.clone(),
            });
        }
        let quant_sigma = (noise_sigma * noise_sigma + signal_power / 2.0).sqrt().max(f64::MIN_POSITIVE);
        let block_len = if scenario.block_len == 0 { samples_per_code(fs) } else { scenario.block_len };
        Ok(Simulator {
            fs,
            center_offset: scenario.center_offset_hz,
            quantization: scenario.quantization,
            block_len,
            total: (scenario.duration_s * fs).round() as u64,
            next: 0,
            noise_sigma,
            quant_sigma,
            channels,
            rng: ChaCha8Rng::seed_from_u64(scenario.seed),
            acc: Vec::new(),
            _t: std::marker::PhantomData,
        })
    }

    pub fn total_samples(&self) -> u64 {
        self.total
    }

    pub fn sample_rate(&self) -> f64 {
        self.fs
    }

    /// Per-component noise standard deviation before quantization.
    pub fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }

    /// Scale applied before rounding to 8-bit counts.
    pub fn int8_gain(&self) -> f64 {
        32.0 / self.quant_sigma
    }

    fn render(&mut self, n0: u64, len: usize) {
        self.acc.clear();
        self.acc.resize(len, Complex::new(0.0, 0.0));
        let fs = self.fs;
        let t0 = n0 as f64 / fs;
        for ch in &self.channels {
            let step = ch.code_rate / fs;
            let pos = ch.code_rate * t0 - ch.offset_chips;
            let period = (pos / CODE_LENGTH as f64).floor();
            let mut sym = period as i64;
            let mut cp = pos - period * CODE_LENGTH as f64;
            let cycles = ch.carrier_hz * t0 + ch.phase0_cycles;
            let ph = (cycles - cycles.floor()) * std::f64::consts::TAU;
            let mut rot = Complex::from_polar(ch.amp, ph);
            let dphi = Complex::from_polar(1.0, std::f64::consts::TAU * ch.carrier_hz / fs);
            let mut d = symbol_at(&ch.symbols, sym);
            for a in self.acc.iter_mut() {
                let chip = (ch.code[(cp as usize).min(CODE_LENGTH - 1)] * d) as f64;
                *a += rot * chip;
                rot *= dphi;
                cp += step;
                if cp >= CODE_LENGTH as f64 {
                    cp -= CODE_LENGTH as f64;
                    sym += 1;
                    d = symbol_at(&ch.symbols, sym);
                }
            }
        }
        if self.noise_sigma > 0.0 {
            for a in self.acc.iter_mut() {
                let re: f64 = StandardNormal.sample(&mut self.rng);
                let im: f64 = StandardNormal.sample(&mut self.rng);
                *a += Complex::new(re, im) * self.noise_sigma;
            }
        }
    }

    fn quantize(&self, x: f64) -> f64 {
        match self.quantization {
            Quantization::Float => x,
            Quantization::Int8 => (x * self.int8_gain()).round().clamp(-127.0, 127.0),
            Quantization::Packed2 => {
                let mag = if x.abs() > 0.9 * self.quant_sigma { 3.0 } else { 1.0 };
                if x < 0.0 {
                    -mag
                } else {
                    mag
                }
            }
        }
    }
}

fn symbol_at(symbols: &[i8], idx: i64) -> i8 {
    if idx < 0 {
        return 1;
    }
    symbols.get(idx as usize).copied().unwrap_or(1)
}

impl<T: Real> Iterator for Simulator<T> {
    type Item = SampleBlock<T>;

    fn next(&mut self) -> Option<SampleBlock<T>> {
        if self.next >= self.total {
            return None;
        }
        let n0 = self.next;
        let len = (self.total - n0).min(self.block_len as u64) as usize;
        self.render(n0, len);
        let samples = self
            .acc
            .iter()
            .map(|a| Complex::new(T::of(self.quantize(a.re)), T::of(self.quantize(a.im))))
            .collect();
        self.next += len as u64;
        Some(SampleBlock {
            samples,
            sample_rate: self.fs,
            center_offset: self.center_offset,
            quantization: self.quantization,
            start_index: n0,
        })
    }
}

/// Renders the whole scenario into one block.
pub fn simulate<T: Real>(scenario: &SimScenario, codes: &CodeTable) -> Result<SampleBlock<T>, SimError> {
    let sim = Simulator::<T>::new(scenario, codes)?;
    let fs = sim.fs;
    let mut out = SampleBlock::new(Vec::with_capacity(sim.total as usize), fs);
    out.center_offset = scenario.center_offset_hz;
    out.quantization = scenario.quantization;
    for b in sim {
        out.samples.extend(b.samples);
    }
    Ok(out)
}
