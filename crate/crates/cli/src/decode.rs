use std::path::Path;

use anyhow::{bail, Context, Result};
use log::{info, warn};

use ppp_b2b::ldpc::ParityCheckMatrix;
use ppp_b2b::pipeline::{decode_symbols, Codec, Receiver, RunOutput};
use ppp_b2b::rfchain::{ingest, samples_per_code};

use crate::config::Pipeline;
use crate::output::{with_suffix, write_json, write_jsonl, MessageLine};
use crate::Outcome;

fn is_symbol_dump(p: &Path) -> bool {
    p.extension().is_some_and(|e| e == "sym")
}

/// One soft value per line; `#` starts a comment.
fn read_symbols(p: &Path) -> Result<Vec<f32>> {
    let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| l.parse::<f32>().with_context(|| format!("{}:{}: bad soft symbol", p.display(), i + 1)))
        .collect()
}

pub fn run(input: &Path, config: &Path, out: &Path, prns: Option<Vec<u8>>, itr_max: Option<usize>) -> Result<Outcome> {
    let mut pipe = Pipeline::load(config)?;
    if let Some(n) = itr_max {
        if n == 0 {
            bail!("--itr-max must be at least 1");
        }
        let h: ParityCheckMatrix = pipe.codec.parity_matrix().clone();
        pipe.codec = Codec::new(pipe.codec.schema.clone(), h, n)?;
    }
    if let Some(p) = prns {
        if let Some(bad) = p.iter().find(|p| !pipe.codes.contains(**p)) {
            bail!("PRN {bad} is not in the code table");
        }
        pipe.prns = p;
    }
    let result: RunOutput<f32> = if is_symbol_dump(input) {
        let [prn] = pipe.prns[..] else { bail!("a symbol dump needs exactly one --prn") };
        decode_symbols(&pipe.codec, prn, &read_symbols(input)?)
    } else {
        let header = ppp_b2b::rfchain::read_header(input)?;
        let samples = ingest::<f32>(input, samples_per_code(header.sample_rate_hz))?;
        let mut rx = Receiver::new(&pipe.codec, &pipe.codes, &pipe.prns, pipe.receiver.clone())?;
        for b in samples {
            rx.push(b?)?;
        }
        rx.finish()?
    };
    let r = &result.report;
    write_jsonl(&with_suffix(out, ".corrections.jsonl"), &result.records)?;
    write_jsonl(&with_suffix(out, ".messages.jsonl"), result.frames.iter().map(MessageLine::from_frame))?;
    write_json(&with_suffix(out, ".report.json"), r)?;
    let passed = r.frames_crc_passed();
    info!(
        "{} channel(s), {} frame(s) found, {passed} passed CRC, {} correction set(s)",
        r.channels.len(),
        r.channels.iter().map(|c| c.frames_found).sum::<usize>(),
        r.correction_sets
    );
    if r.channels.is_empty() || passed == 0 {
        warn!("no frame decoded");
        return Ok(Outcome::NoSignal);
    }
    Ok(Outcome::Ok)
}
