//! Time-domain PCM containers and mid/side stereo DSP.
//!
//! Samples are stored planar (one `Vec<f64>` per channel), dimensionless,
//! nominal range [-1, 1]. Stereo order is left then right.
//!
//! Numerical contract: pipeline audio lives on the PCM-24 sample grid
//! (step 2^-23, ~-138 dBFS). Grid values are integers scaled by 2^-23, so
//! double-precision sums of in-range samples are exact; that is what makes
//! the mid/side round trip and downmix recovery bit-exact rather than
//! merely close. The halved mid/side values land on the 2^-24 grid, which
//! float-32 WAV holds exactly below full scale, so the guarantee also
//! survives the file round trip. Every PCM source already sits on this
//! grid, and the resampler, width control, and generator outputs snap to
//! it.

use crate::error::{Error, Result};

/// Reciprocal of the pipeline sample grid step (2^23, the PCM-24 step).
const GRID_SCALE: f64 = 8_388_608.0;

/// Snap a sample to the pipeline grid.
pub fn quantize_sample(v: f64) -> f64 {
    (v * GRID_SCALE).round() / GRID_SCALE
}

/// PCM samples with sample rate and channel layout (1 = mono, 2 = stereo L/R).
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    channels: Vec<Vec<f64>>,
    sample_rate: u32,
}

impl AudioBuffer {
    /// Build a mono buffer.
    pub fn mono(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        Self::new(vec![samples], sample_rate)
    }

    /// Build a stereo buffer from left/right channels of equal length.
    pub fn stereo(left: Vec<f64>, right: Vec<f64>, sample_rate: u32) -> Result<Self> {
        Self::new(vec![left, right], sample_rate)
    }

    pub fn new(channels: Vec<Vec<f64>>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::Dimension("sample_rate must be positive".into()));
        }
        match channels.len() {
            1 => {}
            2 => {
                if channels[0].len() != channels[1].len() {
                    return Err(Error::Dimension(format!(
                        "channel length mismatch: left {} vs right {}",
                        channels[0].len(),
                        channels[1].len()
                    )));
                }
            }
            n => {
                return Err(Error::Dimension(format!(
                    "unsupported channel count {n} (expected 1 or 2)"
                )))
            }
        }
        Ok(Self {
            channels,
            sample_rate,
        })
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    /// Samples per channel.
    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channel(&self, index: usize) -> &[f64] {
        &self.channels[index]
    }

    pub fn channel_mut(&mut self, index: usize) -> &mut [f64] {
        &mut self.channels[index]
    }

    pub fn duration_seconds(&self) -> f64 {
        self.len() as f64 / self.sample_rate as f64
    }

    /// RMS over all channels (cross-channel).
    pub fn rms(&self) -> f64 {
        let total: usize = self.channels.iter().map(|c| c.len()).sum();
        if total == 0 {
            return 0.0;
        }
        let energy: f64 = self
            .channels
            .iter()
            .flat_map(|c| c.iter())
            .map(|&x| x * x)
            .sum();
        (energy / total as f64).sqrt()
    }

    fn expect_mono(&self, what: &str) -> Result<()> {
        if self.num_channels() != 1 {
            return Err(Error::Dimension(format!(
                "{what} expects a mono buffer, got {} channels",
                self.num_channels()
            )));
        }
        Ok(())
    }

    fn expect_stereo(&self, what: &str) -> Result<()> {
        if self.num_channels() != 2 {
            return Err(Error::Dimension(format!(
                "{what} expects a stereo buffer, got {} channel(s)",
                self.num_channels()
            )));
        }
        Ok(())
    }
}

/// Stereo width control in decibels; `alpha = 10^(gamma_db/20)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WidthControl {
    pub gamma_db: f64,
}

impl WidthControl {
    pub fn new(gamma_db: f64) -> Self {
        Self { gamma_db }
    }

    /// Linear side gain. Exactly 1.0 at gamma_db = 0.
    pub fn alpha(&self) -> f64 {
        10f64.powf(self.gamma_db / 20.0)
    }
}

/// Mid/side encode: M[n] = (L[n]+R[n])/2, S[n] = (L[n]-R[n])/2.
pub fn mid_side_encode(stereo: &AudioBuffer) -> Result<(AudioBuffer, AudioBuffer)> {
    stereo.expect_stereo("mid_side_encode")?;
    let (l, r) = (stereo.channel(0), stereo.channel(1));
    let mid: Vec<f64> = l.iter().zip(r).map(|(&a, &b)| (a + b) / 2.0).collect();
    let side: Vec<f64> = l.iter().zip(r).map(|(&a, &b)| (a - b) / 2.0).collect();
    Ok((
        AudioBuffer::mono(mid, stereo.sample_rate())?,
        AudioBuffer::mono(side, stereo.sample_rate())?,
    ))
}

/// Mid/side decode: L[n] = M[n]+S[n], R[n] = M[n]-S[n].
pub fn mid_side_decode(mid: &AudioBuffer, side: &AudioBuffer) -> Result<AudioBuffer> {
    mid.expect_mono("mid_side_decode (mid)")?;
    side.expect_mono("mid_side_decode (side)")?;
    if mid.len() != side.len() {
        return Err(Error::Dimension(format!(
            "mid/side length mismatch: {} vs {}",
            mid.len(),
            side.len()
        )));
    }
    if mid.sample_rate() != side.sample_rate() {
        return Err(Error::Dimension(format!(
            "mid/side sample rate mismatch: {} vs {}",
            mid.sample_rate(),
            side.sample_rate()
        )));
    }
    let (m, s) = (mid.channel(0), side.channel(0));
    let left: Vec<f64> = m.iter().zip(s).map(|(&a, &b)| a + b).collect();
    let right: Vec<f64> = m.iter().zip(s).map(|(&a, &b)| a - b).collect();
    AudioBuffer::stereo(left, right, mid.sample_rate())
}

/// Mono downmix: out[n] = (L[n]+R[n])/2.
pub fn downmix(stereo: &AudioBuffer) -> Result<AudioBuffer> {
    stereo.expect_stereo("downmix")?;
    let (l, r) = (stereo.channel(0), stereo.channel(1));
    let out: Vec<f64> = l.iter().zip(r).map(|(&a, &b)| (a + b) / 2.0).collect();
    AudioBuffer::mono(out, stereo.sample_rate())
}

/// Width application result: the rescaled side plus a flag for all-zero side
/// input, where the energy-matching gain is undefined.
#[derive(Debug, Clone)]
pub struct WidthOutcome {
    pub side: AudioBuffer,
    pub no_spatial_content: bool,
}

/// Energy-match the side to the mid (0 dB ratio), then scale by
/// `alpha = 10^(gamma_db/20)`: side' = alpha * (rms(mid)/rms(side)) * side.
///
/// The mid is never modified. The scaled side snaps to the sample grid
/// (unless the scale is exactly 1.0) so downstream mid/side sums stay exact
/// in double precision.
pub fn apply_width(
    mid: &AudioBuffer,
    side: &AudioBuffer,
    ctl: WidthControl,
) -> Result<WidthOutcome> {
    mid.expect_mono("apply_width (mid)")?;
    side.expect_mono("apply_width (side)")?;
    if mid.len() != side.len() {
        return Err(Error::Dimension(format!(
            "apply_width length mismatch: mid {} vs side {}",
            mid.len(),
            side.len()
        )));
    }
    let side_rms = side.rms();
    if side_rms == 0.0 {
        return Ok(WidthOutcome {
            side: side.clone(),
            no_spatial_content: true,
        });
    }
    let scale = ctl.alpha() * (mid.rms() / side_rms);
    let samples = if scale == 1.0 {
        side.channel(0).to_vec()
    } else {
        side.channel(0)
            .iter()
            .map(|&x| quantize_sample(scale * x))
            .collect()
    };
    Ok(WidthOutcome {
        side: AudioBuffer::mono(samples, side.sample_rate())?,
        no_spatial_content: false,
    })
}

/// Scale so that 20*log10(cross-channel RMS) equals `target_dbfs`.
pub fn loudness_normalize(x: &AudioBuffer, target_dbfs: f64) -> Result<AudioBuffer> {
    let rms = x.rms();
    if rms == 0.0 {
        return Err(Error::Data(
            "silent input: loudness normalization has no valid gain".into(),
        ));
    }
    let gain = 10f64.powf(target_dbfs / 20.0) / rms;
    let channels = x
        .channels
        .iter()
        .map(|c| c.iter().map(|&v| v * gain).collect())
        .collect();
    AudioBuffer::new(channels, x.sample_rate())
}
