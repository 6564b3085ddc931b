//! Raw IQ recordings with a small text sidecar (`<file>.hdr`) holding the
//! sample rate, sample format and IF.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex;
use thiserror::Error;

use super::{Quantization, SampleBlock};
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum IqError {
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("unknown sample format `{0}`")]
    UnknownFormat(String),
    #[error("header {path}: {msg}")]
    Header { path: PathBuf, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleFormat {
    /// Interleaved signed bytes I, Q.
    Int8Iq,
    /// One byte per two samples: low nibble first. Each nibble holds I in
    /// bits 1..0 and Q in bits 3..2, each as (sign, magnitude) with
    /// magnitude bit set meaning 3.
    Packed2Iq,
}

impl SampleFormat {
    pub fn tag(self) -> &'static str {
        match self {
            SampleFormat::Int8Iq => "int8_iq",
            SampleFormat::Packed2Iq => "packed2_iq",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self, IqError> {
        match tag {
            "int8_iq" => Ok(SampleFormat::Int8Iq),
            "packed2_iq" => Ok(SampleFormat::Packed2Iq),
            other => Err(IqError::UnknownFormat(other.to_string())),
        }
    }

    pub fn quantization(self) -> Quantization {
        match self {
            SampleFormat::Int8Iq => Quantization::Int8,
            SampleFormat::Packed2Iq => Quantization::Packed2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleHeader {
    pub sample_rate_hz: f64,
    pub format: SampleFormat,
    pub center_offset_hz: f64,
}

pub fn header_path(data: &Path) -> PathBuf {
    let mut s = data.as_os_str().to_owned();
    s.push(".hdr");
    PathBuf::from(s)
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> IqError + '_ {
    move |source| IqError::Io { path: path.to_path_buf(), source }
}

pub fn write_header(data: &Path, h: &SampleHeader) -> Result<(), IqError> {
    let p = header_path(data);
    let text = format!(
        "sample_rate_hz={}\nformat={}\ncenter_offset_hz={}\n",
        h.sample_rate_hz,
        h.format.tag(),
        h.center_offset_hz
    );
    std::fs::write(&p, text).map_err(io_err(&p))
}

pub fn read_header(data: &Path) -> Result<SampleHeader, IqError> {
    let p = header_path(data);
    let text = std::fs::read_to_string(&p).map_err(io_err(&p))?;
    let bad = |msg: String| IqError::Header { path: p.clone(), msg };
    let (mut rate, mut format, mut offset) = (None, None, 0.0);
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
        let (k, v) = line.split_once('=').ok_or_else(|| bad(format!("malformed line `{line}`")))?;
        let (k, v) = (k.trim(), v.trim());
        let num = |v: &str| v.parse::<f64>().map_err(|e| bad(format!("{k}: {e}")));
        match k {
            "sample_rate_hz" => rate = Some(num(v)?),
            "format" => format = Some(SampleFormat::from_tag(v)?),
            "center_offset_hz" => offset = num(v)?,
            _ => log::debug!("ignoring header key `{k}`"),
        }
    }
    Ok(SampleHeader {
        sample_rate_hz: rate.ok_or_else(|| bad("missing sample_rate_hz".into()))?,
        format: format.ok_or_else(|| bad("missing format".into()))?,
        center_offset_hz: offset,
    })
}

fn level2(v: f64) -> u8 {
    let sign = (v < 0.0) as u8;
    let mag = (v.abs() >= 2.0) as u8;
    sign << 1 | mag
}

fn unlevel2(bits: u8) -> f64 {
    let mag = if bits & 1 == 1 { 3.0 } else { 1.0 };
    if bits & 2 == 2 {
        -mag
    } else {
        mag
    }
}

/// Writes quantized samples (integer counts for `Int8Iq`, levels
/// {-3,-1,1,3} for `Packed2Iq`) and the sidecar header.
pub struct SampleWriter {
    path: PathBuf,
    out: BufWriter<File>,
    format: SampleFormat,
    pending: Option<u8>,
    written: u64,
}

impl SampleWriter {
    pub fn create(path: &Path, header: &SampleHeader) -> Result<Self, IqError> {
        write_header(path, header)?;
        let f = File::create(path).map_err(io_err(path))?;
        Ok(SampleWriter { path: path.to_path_buf(), out: BufWriter::new(f), format: header.format, pending: None, written: 0 })
    }

    pub fn write_block<T: Real>(&mut self, block: &SampleBlock<T>) -> Result<(), IqError> {
        let mut buf = Vec::with_capacity(block.len() * 2);
        for s in &block.samples {
            let (re, im) = (s.re.to_f64_lossy(), s.im.to_f64_lossy());
            match self.format {
                SampleFormat::Int8Iq => {
                    buf.push(re.round().clamp(-128.0, 127.0) as i8 as u8);
                    buf.push(im.round().clamp(-128.0, 127.0) as i8 as u8);
                }
                SampleFormat::Packed2Iq => {
                    let nib = level2(im) << 2 | level2(re);
                    match self.pending.take() {
                        None => self.pending = Some(nib),
                        Some(lo) => buf.push(nib << 4 | lo),
                    }
                }
            }
        }
        self.written += block.len() as u64;
        self.out.write_all(&buf).map_err(io_err(&self.path))
    }

    /// Flushes; an odd trailing packed sample is padded with a zero nibble.
    pub fn finish(mut self) -> Result<u64, IqError> {
        if let Some(lo) = self.pending.take() {
            self.out.write_all(&[lo]).map_err(io_err(&self.path))?;
        }
        self.out.flush().map_err(io_err(&self.path))?;
        Ok(self.written)
    }
}

/// Lazily reads a recording as blocks of `block_len` samples.
pub struct Ingest<T: Real> {
    path: PathBuf,
    reader: BufReader<File>,
    header: SampleHeader,
    block_len: usize,
    next_index: u64,
    done: bool,
    _t: std::marker::PhantomData<T>,
}

/// Opens `path` using its sidecar header.
pub fn ingest<T: Real>(path: &Path, block_len: usize) -> Result<Ingest<T>, IqError> {
    let header = read_header(path)?;
    Ingest::with_header(path, header, block_len)
}

impl<T: Real> Ingest<T> {
    pub fn with_header(path: &Path, header: SampleHeader, block_len: usize) -> Result<Self, IqError> {
        let f = File::open(path).map_err(io_err(path))?;
        Ok(Ingest {
            path: path.to_path_buf(),
            reader: BufReader::with_capacity(1 << 20, f),
            header,
            block_len: block_len.max(2),
            next_index: 0,
            done: false,
            _t: std::marker::PhantomData,
        })
    }

    pub fn header(&self) -> &SampleHeader {
        &self.header
    }

    fn fill(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        let mut got = 0;
        while got < buf.len() {
            match self.reader.read(&mut buf[got..]) {
                Ok(0) => break,
                Ok(n) => got += n,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e),
            }
        }
        Ok(got)
    }

    fn read_block(&mut self) -> Result<Option<Vec<Complex<T>>>, IqError> {
        let want = match self.header.format {
            SampleFormat::Int8Iq => self.block_len * 2,
            SampleFormat::Packed2Iq => self.block_len.div_ceil(2),
        };
        let mut buf = vec![0u8; want];
        let got = self.fill(&mut buf).map_err(io_err(&self.path))?;
        if got < want {
            self.done = true;
        }
        let samples: Vec<Complex<T>> = match self.header.format {
            SampleFormat::Int8Iq => {
                if got % 2 == 1 {
                    log::warn!("{}: dropping truncated trailing sample", self.path.display());
                }
                buf[..got - got % 2]
                    .chunks_exact(2)
                    .map(|p| Complex::new(T::of(p[0] as i8 as f64), T::of(p[1] as i8 as f64)))
                    .collect()
            }
            SampleFormat::Packed2Iq => buf[..got]
                .iter()
                .flat_map(|&b| [b & 0xF, b >> 4])
                .map(|nib| Complex::new(T::of(unlevel2(nib & 3)), T::of(unlevel2(nib >> 2))))
                .collect(),
        };
        Ok(if samples.is_empty() { None } else { Some(samples) })
    }
}

impl<T: Real> Iterator for Ingest<T> {
    type Item = Result<SampleBlock<T>, IqError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.read_block() {
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
            Ok(None) => None,
            Ok(Some(samples)) => {
                let start = self.next_index;
                self.next_index += samples.len() as u64;
                Some(Ok(SampleBlock {
                    samples,
                    sample_rate: self.header.sample_rate_hz,
                    center_offset: self.header.center_offset_hz,
                    quantization: self.header.format.quantization(),
                    start_index: start,
                }))
            }
        }
    }
}
