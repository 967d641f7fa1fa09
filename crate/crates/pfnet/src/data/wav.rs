//! Minimal RIFF/WAVE reader and writer: PCM 16-bit mono only.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

fn u16_at(buf: &[u8], off: usize) -> u16 {
    u16::from_le_bytes([buf[off], buf[off + 1]])
}

fn u32_at(buf: &[u8], off: usize) -> u32 {
    u32::from_le_bytes([buf[off], buf[off + 1], buf[off + 2], buf[off + 3]])
}

/// Read a PCM16 mono WAV; integer samples are scaled by 1/32768 into [−1, 1).
pub fn wav_read(path: &Path) -> Result<(Vec<f64>, f64)> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    if buf.len() < 12 || &buf[0..4] != b"RIFF" {
        return Err(Error::format("riff_magic", "file does not start with RIFF"));
    }
    if &buf[8..12] != b"WAVE" {
        return Err(Error::format("wave_magic", "RIFF form type is not WAVE"));
    }

    let mut pos = 12;
    let mut sample_rate = None;
    let mut data: Option<&[u8]> = None;
    while pos + 8 <= buf.len() {
        let id = &buf[pos..pos + 4];
        let size = u32_at(&buf, pos + 4) as usize;
        let body_start = pos + 8;
        if body_start + size > buf.len() {
            return Err(Error::format(
                "chunk_size",
                format!(
                    "chunk {:?} claims {size} bytes past end of file",
                    String::from_utf8_lossy(id)
                ),
            ));
        }
        let body = &buf[body_start..body_start + size];
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(Error::format("fmt_chunk", format!("only {size} bytes")));
                }
                let audio_format = u16_at(body, 0);
                if audio_format != 1 {
                    return Err(Error::format(
                        "audio_format",
                        format!("expected PCM (1), got {audio_format}"),
                    ));
                }
                let channels = u16_at(body, 2);
                if channels != 1 {
                    return Err(Error::format(
                        "num_channels",
                        format!("expected mono (1), got {channels}"),
                    ));
                }
                let bits = u16_at(body, 14);
                if bits != 16 {
                    return Err(Error::format(
                        "bits_per_sample",
                        format!("expected 16, got {bits}"),
                    ));
                }
                sample_rate = Some(u32_at(body, 4) as f64);
            }
            b"data" => data = Some(body),
            _ => {}
        }
        // chunks are word-aligned
        pos = body_start + size + (size & 1);
    }

    let sample_rate = sample_rate.ok_or_else(|| Error::format("fmt_chunk", "missing"))?;
    let data = data.ok_or_else(|| Error::format("data_chunk", "missing"))?;
    if data.len() % 2 != 0 {
        return Err(Error::format(
            "data_chunk",
            "odd byte count for 16-bit samples",
        ));
    }
    let samples = data
        .chunks_exact(2)
        .map(|b| i16::from_le_bytes([b[0], b[1]]) as f64 / 32768.0)
        .collect();
    Ok((samples, sample_rate))
}

/// Write samples as PCM16 mono; values are scaled by 32768 and clamped.
pub fn wav_write(path: &Path, samples: &[f64], sample_rate: f64) -> Result<()> {
    let rate = sample_rate.round() as u32;
    let data_len = samples.len() * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&rate.to_le_bytes());
    out.extend_from_slice(&(rate * 2).to_le_bytes()); // byte rate
    out.extend_from_slice(&2u16.to_le_bytes()); // block align
    out.extend_from_slice(&16u16.to_le_bytes()); // bits
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in samples {
        let q = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    std::fs::File::create(path)?.write_all(&out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn temp_path(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("pfnet-wav-tests");
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn known_integer_samples_scale_exactly() {
        let path = temp_path("scale.wav");
        // 0, 16384, −32768 → 0.0, 0.5, −1.0
        let samples = [0.0, 16384.0 / 32768.0, -1.0];
        wav_write(&path, &samples, 16000.0).unwrap();
        let (read, rate) = wav_read(&path).unwrap();
        assert_eq!(rate, 16000.0);
        assert_eq!(read, vec![0.0, 0.5, -1.0]);
    }

    #[test]
    fn round_trip_is_bitwise() {
        let path = temp_path("roundtrip.wav");
        let samples: Vec<f64> = (0..500)
            .map(|i| ((i * 37) % 101) as f64 / 128.0 - 0.4)
            .collect();
        wav_write(&path, &samples, 8000.0).unwrap();
        let (once, _) = wav_read(&path).unwrap();
        let path2 = temp_path("roundtrip2.wav");
        wav_write(&path2, &once, 8000.0).unwrap();
        let (twice, _) = wav_read(&path2).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn stereo_is_rejected_naming_the_field() {
        let path = temp_path("stereo.wav");
        // hand-build a stereo header
        let mut out = Vec::new();
        out.extend_from_slice(b"RIFF");
        out.extend_from_slice(&40u32.to_le_bytes());
        out.extend_from_slice(b"WAVE");
        out.extend_from_slice(b"fmt ");
        out.extend_from_slice(&16u32.to_le_bytes());
        out.extend_from_slice(&1u16.to_le_bytes());
        out.extend_from_slice(&2u16.to_le_bytes()); // stereo
        out.extend_from_slice(&16000u32.to_le_bytes());
        out.extend_from_slice(&64000u32.to_le_bytes());
        out.extend_from_slice(&4u16.to_le_bytes());
        out.extend_from_slice(&16u16.to_le_bytes());
        out.extend_from_slice(b"data");
        out.extend_from_slice(&0u32.to_le_bytes());
        std::fs::write(&path, &out).unwrap();
        match wav_read(&path) {
            Err(Error::Format { field, .. }) => assert_eq!(field, "num_channels"),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_magic_is_rejected() {
        let path = temp_path("bad.wav");
        std::fs::write(&path, b"NOT A WAV FILE AT ALL......").unwrap();
        match wav_read(&path) {
            Err(Error::Format { field, .. }) => assert_eq!(field, "riff_magic"),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn skips_unknown_chunks() {
        let path = temp_path("extra_chunk.wav");
        let mut out = Vec::new();
        out.extend_from_slice(b"RIFF");
        out.extend_from_slice(&0u32.to_le_bytes()); // size patched below
        out.extend_from_slice(b"WAVE");
        out.extend_from_slice(b"LIST");
        out.extend_from_slice(&4u32.to_le_bytes());
        out.extend_from_slice(b"INFO");
        out.extend_from_slice(b"fmt ");
        out.extend_from_slice(&16u32.to_le_bytes());
        out.extend_from_slice(&1u16.to_le_bytes());
        out.extend_from_slice(&1u16.to_le_bytes());
        out.extend_from_slice(&8000u32.to_le_bytes());
        out.extend_from_slice(&16000u32.to_le_bytes());
        out.extend_from_slice(&2u16.to_le_bytes());
        out.extend_from_slice(&16u16.to_le_bytes());
        out.extend_from_slice(b"data");
        out.extend_from_slice(&4u32.to_le_bytes());
        out.extend_from_slice(&1000i16.to_le_bytes());
        out.extend_from_slice(&(-1000i16).to_le_bytes());
        let total = out.len() as u32 - 8;
        out[4..8].copy_from_slice(&total.to_le_bytes());
        std::fs::write(&path, &out).unwrap();
        let (samples, rate) = wav_read(&path).unwrap();
        assert_eq!(rate, 8000.0);
        assert_eq!(samples.len(), 2);
        assert!((samples[0] - 1000.0 / 32768.0).abs() < 1e-12);
    }
}
