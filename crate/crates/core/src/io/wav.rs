//! 16 kHz mono PCM16 WAV.
//!
//! Samples are clipped to [-1, 1] and scaled by 32767 with rounding; reading
//! divides by 32767.

use std::io::Cursor;
use std::path::Path;

use serde::Serialize;

use crate::dsp::{Waveform, SAMPLE_RATE};
use crate::error::{invalid_arg, Error, Result};

pub const PCM_SCALE: f32 = 32767.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct WavSummary {
    pub bytes: usize,
    pub samples: usize,
    /// Samples outside [-1, 1] before quantization.
    pub clipped: usize,
}

fn spec() -> hound::WavSpec {
    hound::WavSpec {
        channels: 1,
        sample_rate: SAMPLE_RATE,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    }
}

fn wav_err(e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(e) => Error::Io(e),
        other => Error::Malformed(format!("wav: {other}")),
    }
}

pub fn quantize(x: f32) -> (i16, bool) {
    let clipped = !(-1.0..=1.0).contains(&x);
    ((x.clamp(-1.0, 1.0) * PCM_SCALE).round() as i16, clipped)
}

pub fn encode_wav(wave: &Waveform) -> Result<(Vec<u8>, WavSummary)> {
    if !wave.is_finite() {
        return Err(invalid_arg!("waveform holds non-finite samples"));
    }
    let mut cursor = Cursor::new(Vec::new());
    let mut clipped = 0;
    {
        let mut w = hound::WavWriter::new(&mut cursor, spec()).map_err(wav_err)?;
        let mut samples = w.get_i16_writer(wave.len() as u32);
        for &x in wave.samples() {
            let (q, c) = quantize(x);
            clipped += c as usize;
            samples.write_sample(q);
        }
        samples.flush().map_err(wav_err)?;
        w.finalize().map_err(wav_err)?;
    }
    let bytes = cursor.into_inner();
    let summary = WavSummary {
        bytes: bytes.len(),
        samples: wave.len(),
        clipped,
    };
    Ok((bytes, summary))
}

pub fn write_wav(wave: &Waveform, path: impl AsRef<Path>) -> Result<WavSummary> {
    let (bytes, summary) = encode_wav(wave)?;
    std::fs::write(path, bytes)?;
    Ok(summary)
}

/// Accepts only 16 kHz mono 16-bit integer PCM.
pub fn decode_wav(bytes: &[u8]) -> Result<Waveform> {
    let reader = hound::WavReader::new(Cursor::new(bytes)).map_err(wav_err)?;
    let s = reader.spec();
    if s != spec() {
        return Err(Error::Malformed(format!(
            "wav must be {} Hz mono 16-bit PCM, got {} Hz, {} channel(s), {} bits {:?}",
            SAMPLE_RATE, s.sample_rate, s.channels, s.bits_per_sample, s.sample_format
        )));
    }
    let samples = reader
        .into_samples::<i16>()
        .map(|v| v.map(|q| q as f32 / PCM_SCALE).map_err(wav_err))
        .collect::<Result<Vec<_>>>()?;
    Ok(Waveform::new(samples))
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    decode_wav(&std::fs::read(path)?)
}
