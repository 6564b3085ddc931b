use std::path::Path;

use anyhow::{bail, Context, Result};
use log::info;

use ppp_b2b::framing::FRAME_LEN;
use ppp_b2b::pipeline::broadcast;
use ppp_b2b::pppmsg::generate_schedule;
use ppp_b2b::prncode::{CARRIER_HZ, CHIP_RATE_HZ, CODE_LENGTH};
use ppp_b2b::rfchain::{SampleHeader, SampleWriter, SimChannel, SimScenario, Simulator};

use crate::config::{Pipeline, Scenario};
use crate::output::{with_suffix, write_json, Truth, TruthChannel, TruthFrameTiming};
use crate::Outcome;

pub fn run(scenario_path: &Path, config: &Path, seed: u64, out: &Path) -> Result<Outcome> {
    let pipe = Pipeline::load(config)?;
    let sc = Scenario::load(scenario_path)?;
    let mut errors = sc.validate(&pipe.codes);
    let state = sc.correction_state(seed);
    if errors.is_empty() {
        if let Err(e) = generate_schedule(&state, sc.start_epoch, &pipe.codec.schema) {
            errors.push(format!("corrections: {e}"));
        }
    }
    if !errors.is_empty() {
        for e in &errors {
            eprintln!("scenario: {e}");
        }
        bail!("{} scenario error(s) in {}", errors.len(), scenario_path.display());
    }
    let format = sc.sample_format().expect("validated");
    let fs = sc.sample_rate_hz;
    let n_frames = sc.duration_s.ceil() as usize + 1;

    let mut channels = Vec::new();
    let mut truth = Vec::new();
    for c in &sc.channels {
        let (symbols, frames) = broadcast(&pipe.codec, &state, sc.start_epoch, n_frames, c.prn)?;
        let code_rate = CHIP_RATE_HZ * (1.0 + c.doppler_hz / CARRIER_HZ);
        let frame_chips = (FRAME_LEN * CODE_LENGTH) as f64;
        let frames = frames
            .into_iter()
            .map(|f| {
                let t0 = (c.code_phase_chips + f.index as f64 * frame_chips) / code_rate;
                let t1 = t0 + frame_chips / code_rate;
                TruthFrameTiming {
                    start_time_s: t0,
                    start_sample: (t0 * fs).round() as u64,
                    complete_in_recording: t1 <= sc.duration_s,
                    frame: f,
                }
            })
            .filter(|f: &TruthFrameTiming| f.start_time_s < sc.duration_s)
            .collect();
        truth.push(TruthChannel {
            prn: c.prn,
            doppler_hz: c.doppler_hz,
            code_phase_chips: c.code_phase_chips,
            cn0_dbhz: c.cn0_dbhz,
            frames,
        });
        channels.push(SimChannel {
            prn: c.prn,
            doppler_hz: c.doppler_hz,
            code_phase_chips: c.code_phase_chips,
            carrier_phase_rad: c.carrier_phase_rad,
            cn0_dbhz: c.cn0_dbhz,
            symbols,
        });
    }
    let sim_sc = SimScenario {
        sample_rate_hz: fs,
        duration_s: sc.duration_s,
        center_offset_hz: sc.center_offset_hz,
        seed,
        noiseless: sc.noiseless,
        quantization: format.quantization(),
        block_len: 0,
        channels,
    };
    let sim = Simulator::<f32>::new(&sim_sc, &pipe.codes)?;
    let total = sim.total_samples();
    let iq = with_suffix(out, ".iq");
    let header = SampleHeader { sample_rate_hz: fs, format, center_offset_hz: sc.center_offset_hz };
    let mut w = SampleWriter::create(&iq, &header)?;
    info!("writing {total} samples to {}", iq.display());
    for b in sim {
        w.write_block(&b)?;
    }
    let written = w.finish()?;
    let t = Truth {
        seed,
        sample_rate_hz: fs,
        center_offset_hz: sc.center_offset_hz,
        duration_s: sc.duration_s,
        samples: written,
        format: format.tag().to_string(),
        start_epoch: sc.start_epoch,
        channels: truth,
    };
    write_json(&with_suffix(out, ".truth.json"), &t).context("truth file")?;
    Ok(Outcome::Ok)
}
