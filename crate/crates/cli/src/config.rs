//! Pipeline configuration and simulation scenarios, both TOML.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use ppp_b2b::ldpc::{synthetic_parity_matrix, ParityCheckMatrix, DEFAULT_ITR_MAX};
use ppp_b2b::pipeline::{Codec, ReceiverConfig};
use ppp_b2b::pppmsg::{CorrectionState, MessageSchema};
use ppp_b2b::prncode::CodeTable;
use ppp_b2b::rfchain::{AcquisitionConfig, SampleFormat, TrackingConfig, MIN_SAMPLE_RATE_HZ};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineFile {
    /// Paths are relative to the config file.
    pub code_table: Option<PathBuf>,
    pub h_matrix: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub itr_max: Option<usize>,
    /// Channels to search; all PRNs of the code table when absent.
    pub prns: Option<Vec<u8>>,
    pub acquisition: AcquisitionConfig,
    pub tracking: TrackingConfig,
}

/// Everything loaded and checked before any sample is touched.
pub struct Pipeline {
    pub codes: CodeTable,
    pub codec: Codec,
    pub prns: Vec<u8>,
    pub receiver: ReceiverConfig,
}

fn read(base: &Path, p: &Path) -> Result<String> {
    let full = if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
    std::fs::read_to_string(&full).with_context(|| format!("reading {}", full.display()))
}

impl Pipeline {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let file: PipelineFile = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let codes = match &file.code_table {
            Some(p) => CodeTable::parse(&read(base, p)?).context("code table")?,
            None => CodeTable::synthetic(),
        };
        let h: ParityCheckMatrix = match &file.h_matrix {
            Some(p) => ParityCheckMatrix::parse(&read(base, p)?).context("parity-check matrix")?,
            None => synthetic_parity_matrix(),
        };
        let schema = match &file.schema {
            Some(p) => MessageSchema::parse(&read(base, p)?).context("message schema")?,
            None => MessageSchema::default(),
        };
        let itr_max = file.itr_max.unwrap_or(DEFAULT_ITR_MAX);
        if itr_max == 0 {
            bail!("itr_max must be at least 1");
        }
        let codec = Codec::new(schema, h, itr_max).context("LDPC code")?;
        let prns = file.prns.clone().unwrap_or_else(|| codes.prns().collect());
        for p in &prns {
            if !codes.contains(*p) {
                bail!("PRN {p} is not in the code table");
            }
        }
        let acq = &file.acquisition;
        if !(acq.doppler_step_hz > 0.0 && acq.doppler_range_hz >= 0.0 && acq.max_periods >= 1) {
            bail!("acquisition grid needs a positive step, non-negative range and at least one period");
        }
        Ok(Pipeline { codes, codec, prns, receiver: ReceiverConfig { acquisition: file.acquisition, tracking: file.tracking } })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioChannel {
    pub prn: u8,
    pub cn0_dbhz: f64,
    #[serde(default)]
    pub doppler_hz: f64,
    #[serde(default)]
    pub code_phase_chips: f64,
    #[serde(default)]
    pub carrier_phase_rad: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Corrections {
    #[serde(default)]
    pub bds: Vec<u8>,
    #[serde(default)]
    pub gps: Vec<u8>,
    /// Seeds the correction values; the command-line seed when absent.
    pub seed: Option<u64>,
}

fn default_rate() -> f64 {
    30.69e6
}

fn default_format() -> String {
    "int8_iq".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub duration_s: f64,
    #[serde(default = "default_rate")]
    pub sample_rate_hz: f64,
    #[serde(default)]
    pub center_offset_hz: f64,
    #[serde(default = "default_format")]
    pub format: String,
    /// Mask epoch of the first broadcast frame, seconds of day.
    #[serde(default)]
    pub start_epoch: u32,
    #[serde(default)]
    pub noiseless: bool,
    pub corrections: Corrections,
    #[serde(default)]
    pub channels: Vec<ScenarioChannel>,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading scenario {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing scenario {}", path.display()))
    }

    pub fn sample_format(&self) -> Option<SampleFormat> {
        SampleFormat::from_tag(&self.format).ok()
    }

    /// Every problem found, not just the first.
    pub fn validate(&self, codes: &CodeTable) -> Vec<String> {
        let mut e = Vec::new();
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            e.push(format!("duration_s must be positive, got {}", self.duration_s));
        }
        if !(self.sample_rate_hz >= MIN_SAMPLE_RATE_HZ && self.sample_rate_hz.is_finite()) {
            e.push(format!("sample_rate_hz must be at least {MIN_SAMPLE_RATE_HZ}, got {}", self.sample_rate_hz));
        }
        if self.sample_format().is_none() {
            e.push(format!("unknown format `{}` (int8_iq or packed2_iq)", self.format));
        }
        if self.start_epoch >= 86_400 {
            e.push(format!("start_epoch must be below 86400, got {}", self.start_epoch));
        }
        if self.channels.is_empty() {
            e.push("no channels".into());
        }
        let mut seen = std::collections::BTreeSet::new();
        for (i, c) in self.channels.iter().enumerate() {
            let tag = format!("channel {i} (PRN {})", c.prn);
            if !codes.contains(c.prn) {
                e.push(format!("{tag}: PRN not in the code table"));
            }
            if !seen.insert(c.prn) {
                e.push(format!("{tag}: duplicate PRN"));
            }
            if !(c.cn0_dbhz.is_finite() && (0.0..=80.0).contains(&c.cn0_dbhz)) {
                e.push(format!("{tag}: cn0_dbhz must lie in [0, 80], got {}", c.cn0_dbhz));
            }
            if !(c.doppler_hz.abs() <= ppp_b2b::rfchain::MAX_DOPPLER_HZ) {
                e.push(format!("{tag}: doppler_hz out of range: {}", c.doppler_hz));
            }
            if !(0.0..ppp_b2b::prncode::CODE_LENGTH as f64).contains(&c.code_phase_chips) {
                e.push(format!("{tag}: code_phase_chips must lie in [0, 10230), got {}", c.code_phase_chips));
            }
        }
        let c = &self.corrections;
        if c.bds.is_empty() && c.gps.is_empty() {
            e.push("corrections: no satellites".into());
        }
        if let Some(p) = c.bds.iter().find(|p| !(1..=63).contains(*p)) {
            e.push(format!("corrections: BDS PRN {p} outside 1..=63"));
        }
        if let Some(p) = c.gps.iter().find(|p| !(1..=37).contains(*p)) {
            e.push(format!("corrections: GPS PRN {p} outside 1..=37"));
        }
        e
    }

    pub fn correction_state(&self, seed: u64) -> CorrectionState {
        CorrectionState::synthetic(&self.corrections.bds, &self.corrections.gps, self.corrections.seed.unwrap_or(seed))
    }
}
