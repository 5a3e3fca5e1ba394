//! Mono WAV input and output.
//!
//! The reader is a small RIFF walker so malformed files can be reported with
//! the byte offset of the problem. Accepted encodings: 16- and 24-bit integer
//! PCM and 32-bit IEEE float, mono only. Output is always 32-bit float.

use std::fmt;
use std::fs;
use std::path::Path;

const FORMAT_PCM: u16 = 1;
const FORMAT_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xfffe;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleFormat {
    Int16,
    Int24,
    Float32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WavData {
    pub sample_rate: u32,
    pub format: SampleFormat,
    pub samples: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WavError {
    /// Structurally broken file; `offset` is where parsing failed.
    Malformed {
        offset: usize,
        reason: String,
    },
    Unsupported(String),
}

impl fmt::Display for WavError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WavError::Malformed { offset, reason } => write!(f, "malformed WAV at byte {offset}: {reason}"),
            WavError::Unsupported(reason) => write!(f, "unsupported WAV: {reason}"),
        }
    }
}

impl std::error::Error for WavError {}

fn malformed(offset: usize, reason: impl Into<String>) -> WavError {
    WavError::Malformed {
        offset,
        reason: reason.into(),
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], WavError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(malformed(self.pos, format!("truncated {what}"))),
        }
    }

    fn u16(&mut self, what: &str) -> Result<u16, WavError> {
        let b = self.take(2, what)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self, what: &str) -> Result<u32, WavError> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

struct Format {
    tag: u16,
    channels: u16,
    sample_rate: u32,
    block_align: u16,
    bits: u16,
}

fn parse_fmt(body: &[u8], base: usize) -> Result<Format, WavError> {
    if body.len() < 16 {
        return Err(malformed(
            base,
            format!("fmt chunk is {} bytes, need at least 16", body.len()),
        ));
    }
    let mut c = Cursor { bytes: body, pos: 0 };
    let mut fmt = Format {
        tag: c.u16("format tag")?,
        channels: c.u16("channel count")?,
        sample_rate: c.u32("sample rate")?,
        block_align: 0,
        bits: 0,
    };
    let _byte_rate = c.u32("byte rate")?;
    fmt.block_align = c.u16("block align")?;
    fmt.bits = c.u16("bits per sample")?;
    if fmt.tag == FORMAT_EXTENSIBLE {
        // cbSize, valid bits, channel mask, then the sub-format GUID whose
        // first two bytes carry the actual format tag
        if body.len() < 40 {
            return Err(malformed(
                base + body.len(),
                "extensible fmt chunk shorter than 40 bytes",
            ));
        }
        fmt.tag = u16::from_le_bytes([body[24], body[25]]);
    }
    Ok(fmt)
}

/// Parses a complete WAV file image.
pub fn parse(bytes: &[u8]) -> Result<WavData, WavError> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(4, "RIFF header")? != b"RIFF" {
        return Err(malformed(0, "missing RIFF magic"));
    }
    let _riff_size = c.u32("RIFF size")?;
    if c.take(4, "WAVE tag")? != b"WAVE" {
        return Err(malformed(8, "missing WAVE tag"));
    }
    let mut fmt: Option<Format> = None;
    let mut data: Option<(usize, &[u8])> = None;
    while c.pos < bytes.len() && data.is_none() {
        let header_at = c.pos;
        let id = c.take(4, "chunk id")?;
        let size = c.u32("chunk size")? as usize;
        let body_at = c.pos;
        let body = c.take(size, &format!("'{}' chunk", String::from_utf8_lossy(id)))?;
        if size % 2 == 1 && c.pos < bytes.len() {
            c.pos += 1;
        }
        match id {
            b"fmt " => fmt = Some(parse_fmt(body, body_at)?),
            b"data" => {
                if fmt.is_none() {
                    return Err(malformed(header_at, "data chunk before fmt chunk"));
                }
                data = Some((body_at, body));
            }
            _ => {}
        }
    }
    let fmt = fmt.ok_or_else(|| malformed(bytes.len(), "no fmt chunk"))?;
    let (data_at, body) = data.ok_or_else(|| malformed(bytes.len(), "no data chunk"))?;
    if fmt.channels != 1 {
        return Err(WavError::Unsupported(format!(
            "{} channels, only mono is accepted",
            fmt.channels
        )));
    }
    let format = match (fmt.tag, fmt.bits) {
        (FORMAT_PCM, 16) => SampleFormat::Int16,
        (FORMAT_PCM, 24) => SampleFormat::Int24,
        (FORMAT_FLOAT, 32) => SampleFormat::Float32,
        (tag, bits) => {
            return Err(WavError::Unsupported(format!(
                "format tag {tag} with {bits} bits per sample"
            )))
        }
    };
    let width = fmt.bits as usize / 8;
    if fmt.block_align as usize != width {
        return Err(WavError::Unsupported(format!(
            "block align {} does not match {}-bit mono",
            fmt.block_align, fmt.bits
        )));
    }
    if body.len() % width != 0 {
        return Err(malformed(
            data_at + body.len() - body.len() % width,
            format!("data chunk of {} bytes ends mid-sample", body.len()),
        ));
    }
    let samples = body
        .chunks_exact(width)
        .map(|b| match format {
            SampleFormat::Int16 => i16::from_le_bytes([b[0], b[1]]) as f64 / 32768.0,
            SampleFormat::Int24 => (i32::from_le_bytes([0, b[0], b[1], b[2]]) >> 8) as f64 / 8_388_608.0,
            SampleFormat::Float32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
        })
        .collect();
    Ok(WavData {
        sample_rate: fmt.sample_rate,
        format,
        samples,
    })
}

pub fn read(path: &Path) -> std::io::Result<Result<WavData, WavError>> {
    Ok(parse(&fs::read(path)?))
}

/// Writes mono 32-bit float samples.
pub fn write(path: &Path, samples: &[f64], sample_rate: u32) -> Result<(), hound::Error> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut w = hound::WavWriter::create(path, spec)?;
    for &s in samples {
        w.write_sample(s as f32)?;
    }
    w.finalize()
}
