//! Mono 16 kHz waveforms and the RIFF/WAVE reader and writer.
//!
//! Only two sample encodings are read: 16-bit linear PCM (format tag 1) and
//! 32-bit IEEE float (format tag 3). Files are always written as 16-bit PCM.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// The only sample rate accepted by the pipeline.
pub const SAMPLE_RATE_HZ: u32 = 16_000;

const FORMAT_PCM: u16 = 1;
const FORMAT_IEEE_FLOAT: u16 = 3;

/// A finite, non-empty mono signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate_hz: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyAudio);
        }
        if sample_rate_hz == 0 {
            return Err(Error::InvalidWaveform(
                "sample rate must be positive".into(),
            ));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::InvalidWaveform(format!("sample {i} is not finite")));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    /// Shorthand for a 16 kHz waveform.
    pub fn from_samples(samples: Vec<f64>) -> Result<Self> {
        Self::new(samples, SAMPLE_RATE_HZ)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    /// Always false; kept for API symmetry with `len`.
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    /// Sum of squared samples.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s * s).sum()
    }

    pub(crate) fn require_pipeline_rate(&self) -> Result<()> {
        if self.sample_rate_hz != SAMPLE_RATE_HZ {
            return Err(Error::UnsupportedFormat(format!(
                "sample rate {} Hz, expected {SAMPLE_RATE_HZ} Hz",
                self.sample_rate_hz
            )));
        }
        Ok(())
    }
}

/// Reads a mono 16 kHz WAV file.
pub fn read_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    let bytes = fs::read(path)?;
    decode_wav(&bytes)
}

/// Writes `w` as a 16-bit PCM mono file.
pub fn write_wav(path: impl AsRef<Path>, w: &Waveform) -> Result<()> {
    fs::write(path, encode_wav(w))?;
    Ok(())
}

/// Maps a real sample onto the 16-bit grid, clipping to `[-1, 1 - 2^-15]`.
pub fn quantize_pcm16(sample: f64) -> i16 {
    let max = 1.0 - 1.0 / 32768.0;
    let clipped = sample.clamp(-1.0, max);
    (clipped * 32768.0).round() as i16
}

pub fn encode_wav(w: &Waveform) -> Vec<u8> {
    let data_len = (w.len() * 2) as u32;
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&w.sample_rate_hz.to_le_bytes());
    out.extend_from_slice(&(w.sample_rate_hz * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in &w.samples {
        out.extend_from_slice(&quantize_pcm16(s).to_le_bytes());
    }
    out
}

#[derive(Debug, Clone, Copy)]
struct FmtChunk {
    format_tag: u16,
    channels: u16,
    sample_rate: u32,
    block_align: u16,
    bits_per_sample: u16,
}

fn le_u16(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn le_u32(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

pub fn decode_wav(bytes: &[u8]) -> Result<Waveform> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(Error::CorruptHeader("missing RIFF/WAVE signature".into()));
    }
    let mut fmt: Option<FmtChunk> = None;
    let mut data: Option<&[u8]> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = le_u32(bytes, pos + 4) as usize;
        let body_start = pos + 8;
        let body_end = body_start
            .checked_add(size)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| {
                Error::CorruptHeader(format!(
                    "chunk {:?} claims {size} bytes past end of file",
                    String::from_utf8_lossy(id)
                ))
            })?;
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => {
                if body.len() < 16 {
                    return Err(Error::CorruptHeader(format!(
                        "fmt chunk is {} bytes, need 16",
                        body.len()
                    )));
                }
                fmt = Some(FmtChunk {
                    format_tag: le_u16(body, 0),
                    channels: le_u16(body, 2),
                    sample_rate: le_u32(body, 4),
                    block_align: le_u16(body, 12),
                    bits_per_sample: le_u16(body, 14),
                });
            }
            b"data" => data = Some(body),
            _ => {}
        }
        // chunks are word aligned
        pos = body_end + (size & 1);
    }

    let fmt = fmt.ok_or_else(|| Error::CorruptHeader("no fmt chunk".into()))?;
    check_format(&fmt)?;
    let data = data.ok_or_else(|| Error::CorruptHeader("no data chunk".into()))?;
    let bytes_per_sample = (fmt.bits_per_sample / 8) as usize;
    if fmt.block_align as usize != bytes_per_sample {
        return Err(Error::CorruptHeader(format!(
            "block align {} does not match {} bits mono",
            fmt.block_align, fmt.bits_per_sample
        )));
    }
    if data.len() % bytes_per_sample != 0 {
        return Err(Error::CorruptHeader(format!(
            "data chunk of {} bytes is not a whole number of samples",
            data.len()
        )));
    }
    if data.is_empty() {
        return Err(Error::EmptyAudio);
    }

    let samples: Vec<f64> = match fmt.format_tag {
        FORMAT_PCM => data
            .chunks_exact(2)
            .map(|c| i16::from_le_bytes([c[0], c[1]]) as f64 / 32768.0)
            .collect(),
        _ => data
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect(),
    };
    Waveform::new(samples, fmt.sample_rate)
}

fn check_format(fmt: &FmtChunk) -> Result<()> {
    match (fmt.format_tag, fmt.bits_per_sample) {
        (FORMAT_PCM, 16) | (FORMAT_IEEE_FLOAT, 32) => {}
        (tag, bits) => {
            return Err(Error::UnsupportedFormat(format!(
                "format tag {tag:#06x} with {bits} bits per sample"
            )))
        }
    }
    if fmt.channels != 1 {
        return Err(Error::UnsupportedFormat(format!(
            "{} channels, expected mono",
            fmt.channels
        )));
    }
    if fmt.sample_rate != SAMPLE_RATE_HZ {
        return Err(Error::UnsupportedFormat(format!(
            "sample rate {} Hz, expected {SAMPLE_RATE_HZ} Hz",
            fmt.sample_rate
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn header(tag: u16, channels: u16, rate: u32, bits: u16, data: &[u8]) -> Vec<u8> {
        let block = channels * bits / 8;
        let mut out = Vec::new();
        out.extend_from_slice(b"RIFF");
        out.extend_from_slice(&(36 + data.len() as u32).to_le_bytes());
        out.extend_from_slice(b"WAVE");
        out.extend_from_slice(b"fmt ");
        out.extend_from_slice(&16u32.to_le_bytes());
        out.extend_from_slice(&tag.to_le_bytes());
        out.extend_from_slice(&channels.to_le_bytes());
        out.extend_from_slice(&rate.to_le_bytes());
        out.extend_from_slice(&(rate * block as u32).to_le_bytes());
        out.extend_from_slice(&block.to_le_bytes());
        out.extend_from_slice(&bits.to_le_bytes());
        out.extend_from_slice(b"data");
        out.extend_from_slice(&(data.len() as u32).to_le_bytes());
        out.extend_from_slice(data);
        out
    }

    #[test]
    fn reads_max_pcm_sample() {
        let bytes = header(1, 1, 16000, 16, &32767i16.to_le_bytes());
        let w = decode_wav(&bytes).unwrap();
        assert_eq!(w.samples(), &[32767.0 / 32768.0]);
        assert_eq!(w.sample_rate_hz(), 16000);
    }

    #[test]
    fn reads_float32() {
        let mut data = Vec::new();
        for v in [0.25f32, -0.5, 1.0] {
            data.extend_from_slice(&v.to_le_bytes());
        }
        let w = decode_wav(&header(3, 1, 16000, 32, &data)).unwrap();
        assert_eq!(w.samples(), &[0.25, -0.5, 1.0]);
    }

    #[test]
    fn rejects_44k() {
        let bytes = header(1, 1, 44100, 16, &[0, 0]);
        assert!(matches!(
            decode_wav(&bytes),
            Err(Error::UnsupportedFormat(_))
        ));
    }

    #[test]
    fn one_second_of_zeros() {
        let bytes = header(1, 1, 16000, 16, &vec![0u8; 32000]);
        let w = decode_wav(&bytes).unwrap();
        assert_eq!(w.len(), 16000);
        assert!(w.samples().iter().all(|&s| s == 0.0));
        assert_eq!(w.duration_s(), 1.0);
    }

    #[test]
    fn rejects_every_unsupported_header() {
        let tags = [0u16, 1, 2, 3, 6, 7, 0x11, 0x55, 0xfffe];
        let bits = [8u16, 16, 24, 32, 64];
        let channels = [1u16, 2, 6];
        let rates = [8000u32, 16000, 22050, 44100, 48000];
        for &tag in &tags {
            for &b in &bits {
                for &ch in &channels {
                    for &rate in &rates {
                        let data = vec![0u8; (ch * b / 8) as usize * 4];
                        let res = decode_wav(&header(tag, ch, rate, b, &data));
                        let supported = ((tag == 1 && b == 16) || (tag == 3 && b == 32))
                            && ch == 1
                            && rate == 16000;
                        if supported {
                            assert!(res.is_ok(), "tag {tag} bits {b} ch {ch} rate {rate}");
                        } else {
                            assert!(
                                matches!(res, Err(Error::UnsupportedFormat(_))),
                                "tag {tag} bits {b} ch {ch} rate {rate}: {res:?}"
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn corrupt_and_empty() {
        assert!(matches!(
            decode_wav(b"RIFX0000WAVE"),
            Err(Error::CorruptHeader(_))
        ));
        let mut truncated = header(1, 1, 16000, 16, &[1, 2, 3, 4]);
        truncated.truncate(truncated.len() - 2);
        assert!(matches!(
            decode_wav(&truncated),
            Err(Error::CorruptHeader(_))
        ));
        let odd = header(1, 1, 16000, 16, &[1, 2, 3]);
        assert!(matches!(decode_wav(&odd), Err(Error::CorruptHeader(_))));
        assert!(matches!(
            decode_wav(&header(1, 1, 16000, 16, &[])),
            Err(Error::EmptyAudio)
        ));
    }

    #[test]
    fn skips_unknown_chunks() {
        let base = header(1, 1, 16000, 16, &[0x00, 0x40]);
        let mut bytes = base[..12].to_vec();
        bytes.extend_from_slice(b"LIST");
        bytes.extend_from_slice(&3u32.to_le_bytes());
        bytes.extend_from_slice(&[1, 2, 3, 0]);
        bytes.extend_from_slice(&base[12..]);
        let w = decode_wav(&bytes).unwrap();
        assert_eq!(w.samples(), &[0.5]);
    }

    #[test]
    fn zeros_write_zero_bytes_and_clipping() {
        let w = Waveform::from_samples(vec![0.0; 10]).unwrap();
        let bytes = encode_wav(&w);
        assert!(bytes[44..].iter().all(|&b| b == 0));
        assert_eq!(quantize_pcm16(2.0), 32767);
        assert_eq!(quantize_pcm16(-3.0), -32768);
        assert_eq!(quantize_pcm16(1.0), 32767);
    }

    #[test]
    fn waveform_invariants() {
        assert!(matches!(
            Waveform::from_samples(vec![]),
            Err(Error::EmptyAudio)
        ));
        assert!(Waveform::from_samples(vec![f64::NAN]).is_err());
        assert!(Waveform::from_samples(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.wav");
        let w = Waveform::from_samples(vec![0.1, -0.2, 0.3]).unwrap();
        write_wav(&path, &w).unwrap();
        let back = read_wav(&path).unwrap();
        for (a, b) in w.samples().iter().zip(back.samples()) {
            assert!((a - b).abs() <= 1.0 / 32768.0);
        }
    }

    proptest! {
        #[test]
        fn round_trip_within_one_step(samples in proptest::collection::vec(-1.0f64..1.0, 1..400)) {
            let w = Waveform::from_samples(samples).unwrap();
            let back = decode_wav(&encode_wav(&w)).unwrap();
            let step = 2f64.powi(-15);
            for (a, b) in w.samples().iter().zip(back.samples()) {
                prop_assert!((a - b).abs() <= step);
            }
        }
    }
}
