//! RIFF/WAVE reader and writer.
//!
//! Read: PCM-16, PCM-24, IEEE float-32; mono or stereo; little-endian.
//! Write: PCM-16 (round-to-nearest, clipped to [-1, 1 - 2^-15]) or float-32
//! (bit-exact round trip). Integer samples are scaled by 2^(bits-1).

use std::fs;
use std::path::Path;

use crate::audio::AudioBuffer;
use crate::error::{Error, Result};

const FORMAT_PCM: u16 = 1;
const FORMAT_IEEE_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

/// Output sample encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavEncoding {
    Pcm16,
    Float32,
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioBuffer> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_wav(&bytes).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Parse WAV bytes into a planar buffer.
pub fn parse_wav(bytes: &[u8]) -> Result<AudioBuffer> {
    if bytes.len() < 12 {
        return Err(Error::Format("file too small for a RIFF header".into()));
    }
    if &bytes[0..4] != b"RIFF" {
        return Err(Error::Format("missing RIFF tag".into()));
    }
    if &bytes[8..12] != b"WAVE" {
        return Err(Error::Format("missing WAVE tag".into()));
    }

    let mut fmt: Option<(u16, u16, u32, u16)> = None; // (format, channels, rate, bits)
    let mut data: Option<&[u8]> = None;
    let mut pos = 12usize;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let body_start = pos + 8;
        let body_end = body_start
            .checked_add(size)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| Error::Format(format!("chunk '{}' overruns file", chunk_name(id))))?;
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => {
                if body.len() < 16 {
                    return Err(Error::Format("fmt chunk truncated".into()));
                }
                let mut format = u16::from_le_bytes(body[0..2].try_into().unwrap());
                let channels = u16::from_le_bytes(body[2..4].try_into().unwrap());
                let rate = u32::from_le_bytes(body[4..8].try_into().unwrap());
                let bits = u16::from_le_bytes(body[14..16].try_into().unwrap());
                if format == FORMAT_EXTENSIBLE {
                    // Sub-format GUID starts at offset 24; first two bytes
                    // carry the base format code.
                    if body.len() >= 26 {
                        format = u16::from_le_bytes(body[24..26].try_into().unwrap());
                    } else {
                        return Err(Error::Format(
                            "extensible fmt chunk missing sub-format".into(),
                        ));
                    }
                }
                fmt = Some((format, channels, rate, bits));
            }
            b"data" => data = Some(body),
            _ => {}
        }
        // Chunks are word-aligned.
        pos = body_end + (size & 1);
    }

    let (format, channels, rate, bits) = fmt.ok_or_else(|| Error::Format("no fmt chunk".into()))?;
    let data = data.ok_or_else(|| Error::Format("no data chunk".into()))?;

    if channels == 0 || channels > 2 {
        return Err(Error::Format(format!(
            "unsupported channel count: {channels} (expected 1 or 2)"
        )));
    }
    if rate == 0 {
        return Err(Error::Format("sample rate field is zero".into()));
    }

    let ch = channels as usize;
    let samples: Vec<f64> = match (format, bits) {
        (FORMAT_PCM, 16) => data
            .chunks_exact(2)
            .map(|b| i16::from_le_bytes([b[0], b[1]]) as f64 / 32768.0)
            .collect(),
        (FORMAT_PCM, 24) => data
            .chunks_exact(3)
            .map(|b| {
                let v = ((b[2] as i32) << 16 | (b[1] as i32) << 8 | b[0] as i32) << 8 >> 8;
                v as f64 / 8388608.0
            })
            .collect(),
        (FORMAT_IEEE_FLOAT, 32) => data
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
            .collect(),
        (f, b) => {
            return Err(Error::Format(format!(
                "unsupported encoding: format code {f}, {b} bits per sample"
            )))
        }
    };

    if !samples.len().is_multiple_of(ch) {
        return Err(Error::Format(
            "data chunk length is not a whole number of frames".into(),
        ));
    }
    let frames = samples.len() / ch;
    let mut planar = vec![Vec::with_capacity(frames); ch];
    for (i, &s) in samples.iter().enumerate() {
        planar[i % ch].push(s);
    }
    AudioBuffer::new(planar, rate)
}

pub fn write_wav(
    buffer: &AudioBuffer,
    path: impl AsRef<Path>,
    encoding: WavEncoding,
) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_wav(buffer, encoding);
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Serialize a buffer to WAV bytes.
pub fn encode_wav(buffer: &AudioBuffer, encoding: WavEncoding) -> Vec<u8> {
    let channels = buffer.num_channels() as u16;
    let frames = buffer.len();
    let (format, bits): (u16, u16) = match encoding {
        WavEncoding::Pcm16 => (FORMAT_PCM, 16),
        WavEncoding::Float32 => (FORMAT_IEEE_FLOAT, 32),
    };
    let bytes_per_sample = (bits / 8) as usize;
    let data_len = frames * channels as usize * bytes_per_sample;
    let block_align = channels * bits / 8;
    let byte_rate = buffer.sample_rate() * block_align as u32;

    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&format.to_le_bytes());
    out.extend_from_slice(&channels.to_le_bytes());
    out.extend_from_slice(&buffer.sample_rate().to_le_bytes());
    out.extend_from_slice(&byte_rate.to_le_bytes());
    out.extend_from_slice(&block_align.to_le_bytes());
    out.extend_from_slice(&bits.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());

    for frame in 0..frames {
        for c in 0..channels as usize {
            let v = buffer.channel(c)[frame];
            match encoding {
                WavEncoding::Pcm16 => {
                    let clipped = v.clamp(-1.0, 1.0 - f64::powi(2.0, -15));
                    let word = (clipped * 32768.0).round() as i32;
                    let word = word.clamp(i16::MIN as i32, i16::MAX as i32) as i16;
                    out.extend_from_slice(&word.to_le_bytes());
                }
                WavEncoding::Float32 => {
                    out.extend_from_slice(&(v as f32).to_le_bytes());
                }
            }
        }
    }
    out
}

fn chunk_name(id: &[u8]) -> String {
    id.iter()
        .map(|&b| if b.is_ascii_graphic() { b as char } else { '?' })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_support::{audio_grid_buffer, audio_grid_stereo};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pcm16_scaling() {
        // One 16-bit mono sample of 16384 -> 0.5.
        let mut bytes = encode_wav(
            &AudioBuffer::mono(vec![0.0], 22050).unwrap(),
            WavEncoding::Pcm16,
        );
        let n = bytes.len();
        bytes[n - 2..].copy_from_slice(&16384i16.to_le_bytes());
        let buf = parse_wav(&bytes).unwrap();
        assert_eq!(buf.channel(0), &[0.5]);
        assert_eq!(buf.sample_rate(), 22050);
    }

    #[test]
    fn empty_data_chunk_is_valid() {
        let bytes = encode_wav(
            &AudioBuffer::mono(vec![], 8000).unwrap(),
            WavEncoding::Pcm16,
        );
        let buf = parse_wav(&bytes).unwrap();
        assert_eq!(buf.len(), 0);
    }

    #[test]
    fn pcm16_write_zero_is_word_zero() {
        let bytes = encode_wav(
            &AudioBuffer::mono(vec![0.0], 44100).unwrap(),
            WavEncoding::Pcm16,
        );
        assert_eq!(&bytes[bytes.len() - 2..], &[0, 0]);
    }

    #[test]
    fn pcm16_write_clips_overrange() {
        let bytes = encode_wav(
            &AudioBuffer::mono(vec![2.0, -2.0], 44100).unwrap(),
            WavEncoding::Pcm16,
        );
        let hi = i16::from_le_bytes([bytes[44], bytes[45]]);
        let lo = i16::from_le_bytes([bytes[46], bytes[47]]);
        assert_eq!(hi, i16::MAX);
        assert_eq!(lo, i16::MIN);
    }

    #[test]
    fn float32_roundtrip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let buf = audio_grid_stereo(&mut rng, 333, 44100);
        let bytes = encode_wav(&buf, WavEncoding::Float32);
        let back = parse_wav(&bytes).unwrap();
        assert_eq!(back.channel(0), buf.channel(0));
        assert_eq!(back.channel(1), buf.channel(1));
        assert_eq!(back.sample_rate(), 44100);
    }

    #[test]
    fn pcm16_roundtrip_within_one_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let buf = audio_grid_buffer(&mut rng, 500, 22050);
        let bytes = encode_wav(&buf, WavEncoding::Pcm16);
        let back = parse_wav(&bytes).unwrap();
        for (a, b) in buf.channel(0).iter().zip(back.channel(0)) {
            assert!((a - b).abs() <= 1.0 / 32768.0, "{a} vs {b}");
        }
    }

    #[test]
    fn pcm24_read() {
        // Hand-build a 24-bit PCM file with one sample = 2^22 (-> 0.5).
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"RIFF");
        bytes.extend_from_slice(&(36u32 + 3).to_le_bytes());
        bytes.extend_from_slice(b"WAVE");
        bytes.extend_from_slice(b"fmt ");
        bytes.extend_from_slice(&16u32.to_le_bytes());
        bytes.extend_from_slice(&1u16.to_le_bytes());
        bytes.extend_from_slice(&1u16.to_le_bytes());
        bytes.extend_from_slice(&48000u32.to_le_bytes());
        bytes.extend_from_slice(&(48000u32 * 3).to_le_bytes());
        bytes.extend_from_slice(&3u16.to_le_bytes());
        bytes.extend_from_slice(&24u16.to_le_bytes());
        bytes.extend_from_slice(b"data");
        bytes.extend_from_slice(&3u32.to_le_bytes());
        bytes.extend_from_slice(&[0x00, 0x00, 0x40]); // 0x400000 = 2^22
        let buf = parse_wav(&bytes).unwrap();
        assert_eq!(buf.channel(0), &[0.5]);
    }

    #[test]
    fn rejects_unsupported_bits() {
        let mut bytes = encode_wav(
            &AudioBuffer::mono(vec![0.0], 8000).unwrap(),
            WavEncoding::Pcm16,
        );
        bytes[34..36].copy_from_slice(&8u16.to_le_bytes()); // claim 8-bit
        let err = parse_wav(&bytes).unwrap_err();
        assert!(err.to_string().contains("8 bits"), "{err}");
    }

    #[test]
    fn rejects_three_channels() {
        let mut bytes = encode_wav(
            &AudioBuffer::mono(vec![0.0, 0.0, 0.0], 8000).unwrap(),
            WavEncoding::Pcm16,
        );
        bytes[22..24].copy_from_slice(&3u16.to_le_bytes());
        let err = parse_wav(&bytes).unwrap_err();
        assert!(err.to_string().contains("channel count"), "{err}");
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_wav(b"not a wav file at all").is_err());
        assert!(parse_wav(b"RIFF\0\0\0\0JUNK").is_err());
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.wav");
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let buf = audio_grid_buffer(&mut rng, 64, 44100);
        write_wav(&buf, &path, WavEncoding::Float32).unwrap();
        let back = read_wav(&path).unwrap();
        assert_eq!(back.channel(0), buf.channel(0));
    }

    #[test]
    fn missing_file_error_names_path() {
        let err = read_wav("/nonexistent/nowhere.wav").unwrap_err();
        assert!(err.to_string().contains("nowhere.wav"));
    }
}
