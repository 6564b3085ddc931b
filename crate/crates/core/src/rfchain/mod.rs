//! Sample-domain front end: signal synthesis, IQ file I/O, acquisition and
//! code/carrier tracking.

mod acquire;
mod iqfile;
mod simulate;
mod track;

pub use acquire::{acquire, AcqError, AcquisitionConfig, AcquisitionResult};
pub use iqfile::{
    header_path, ingest, read_header, write_header, IqError, Ingest, SampleFormat, SampleHeader, SampleWriter,
};
pub use simulate::{simulate, SimChannel, SimError, SimScenario, Simulator, MAX_DOPPLER_HZ};
pub use track::{
    track, LockMetrics, TrackError, TrackStatus, TrackedSymbol, Tracker, TrackingConfig, TrackingOutput,
};

use num_complex::Complex;

use crate::prncode::{CARRIER_HZ, CHIP_RATE_HZ};
use crate::scalar::Real;

/// Doppler per unit radial velocity at the carrier, in Hz per km/h.
pub fn doppler_per_kmh() -> f64 {
    let c = 299_792_458.0;
    CARRIER_HZ * (1000.0 / 3600.0) / c
}

/// Minimum sample rate for a decodable signal: twice the chipping rate.
pub const MIN_SAMPLE_RATE_HZ: f64 = 2.0 * CHIP_RATE_HZ;

/// How sample values were produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Quantization {
    /// Unquantized floating point.
    #[default]
    Float,
    /// Signed 8-bit integers per component.
    Int8,
    /// Sign-magnitude 2-bit per component, values in {-3, -1, 1, 3}.
    Packed2,
}

impl Quantization {
    pub fn bits_per_component(self) -> Option<u32> {
        match self {
            Quantization::Float => None,
            Quantization::Int8 => Some(8),
            Quantization::Packed2 => Some(2),
        }
    }
}

/// A contiguous run of complex baseband samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBlock<T: Real> {
    pub samples: Vec<Complex<T>>,
    pub sample_rate: f64,
    /// IF of the recording; 0 for true baseband.
    pub center_offset: f64,
    pub quantization: Quantization,
    /// Absolute index of the first sample in its stream.
    pub start_index: u64,
}

impl<T: Real> SampleBlock<T> {
    pub fn new(samples: Vec<Complex<T>>, sample_rate: f64) -> Self {
        SampleBlock { samples, sample_rate, center_offset: 0.0, quantization: Quantization::Float, start_index: 0 }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Samples in one 1 ms code period (rounded).
    pub fn samples_per_code(&self) -> usize {
        samples_per_code(self.sample_rate)
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    /// Mean of `|x|^2`.
    pub fn mean_power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|s| s.norm_sqr().to_f64_lossy()).sum::<f64>() / self.samples.len() as f64
    }

    /// Joins consecutive blocks into one. Metadata comes from the first.
    pub fn concat(blocks: &[SampleBlock<T>]) -> Option<Self> {
        let first = blocks.first()?;
        let mut samples = Vec::with_capacity(blocks.iter().map(|b| b.len()).sum());
        for b in blocks {
            samples.extend_from_slice(&b.samples);
        }
        Some(SampleBlock { samples, ..first.clone_meta() })
    }

    fn clone_meta(&self) -> Self {
        SampleBlock {
            samples: Vec::new(),
            sample_rate: self.sample_rate,
            center_offset: self.center_offset,
            quantization: self.quantization,
            start_index: self.start_index,
        }
    }

    /// Sub-block `[from, to)` in block-relative sample indices.
    pub fn slice(&self, from: usize, to: usize) -> Self {
        SampleBlock {
            samples: self.samples[from..to].to_vec(),
            start_index: self.start_index + from as u64,
            ..self.clone_meta()
        }
    }
}

pub fn samples_per_code(sample_rate: f64) -> usize {
    (sample_rate * crate::prncode::CODE_PERIOD_S).round() as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn doppler_per_velocity_from_phase_accumulation() {
        use crate::prncode::CodeTable;
        // 100 km/h towards the satellite; measure the simulated carrier
        // rotation across one code period (same chip at both ends).
        let fd = 100.0 * doppler_per_kmh();
        let s = SimScenario {
            noiseless: true,
            duration_s: 0.003,
            channels: vec![SimChannel::new(59, fd, 0.0, 45.0)],
            ..Default::default()
        };
        let b = simulate::<f64>(&s, &CodeTable::synthetic()).unwrap();
        let n = b.samples_per_code();
        let rot: Complex<f64> = (100..n).step_by(50).map(|k| b.samples[k + n] * b.samples[k].conj()).sum();
        let measured = rot.arg() / (std::f64::consts::TAU * n as f64 / b.sample_rate) / 100.0;
        let physical = CARRIER_HZ / 299_792_458.0 / 3.6;
        assert!((measured - physical).abs() / physical < 0.01, "{measured} vs {physical}");
        assert!((physical - 1.118).abs() < 0.001);
    }
}
