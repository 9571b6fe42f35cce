//! Objective evaluation: mel distance, multi-resolution STFT distance,
//! SI-SDR, band-split variants, and the real-time factor.

use serde::{Deserialize, Serialize};

use crate::audio::AudioBuffer;
use crate::error::{Error, Result};
use crate::spectral::{default_loss_configs, log_mel, stft, MelConfig, StftConfig};

/// Log floor for the STFT-D log-magnitude term.
const STFT_LOG_FLOOR: f64 = 1e-5;
/// SI-SDR cap when the residual is numerically zero.
pub const SI_SDR_CAP_DB: f64 = 100.0;

/// One file pair's objective scores.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub mel_d: f64,
    pub stft_d: f64,
    pub si_sdr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub low_band: Option<BandPair>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub high_band: Option<BandPair>,
}

/// (mel, stft) distances restricted to one band.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BandPair {
    pub mel_d: f64,
    pub stft_d: f64,
}

/// STFT-D resolutions: windows {2048, 1024, 512}, hop = window/4.
pub fn stft_distance_configs() -> Vec<StftConfig> {
    [2048usize, 1024, 512]
        .iter()
        .map(|&w| StftConfig::new(w, w / 4))
        .collect()
}

fn check_pair(reference: &AudioBuffer, estimate: &AudioBuffer) -> Result<()> {
    if reference.sample_rate() != estimate.sample_rate() {
        return Err(Error::Eval(format!(
            "sample rate mismatch: reference {} Hz vs estimate {} Hz",
            reference.sample_rate(),
            estimate.sample_rate()
        )));
    }
    if reference.num_channels() != estimate.num_channels() {
        return Err(Error::Eval(format!(
            "channel count mismatch: reference {} vs estimate {}",
            reference.num_channels(),
            estimate.num_channels()
        )));
    }
    Ok(())
}

/// Trim both signals to the shorter length. Returns mono views per channel.
fn trimmed_mono(buffer: &AudioBuffer, len: usize, channel: usize) -> AudioBuffer {
    AudioBuffer::mono(
        buffer.channel(channel)[..len].to_vec(),
        buffer.sample_rate(),
    )
    .expect("valid trim")
}

fn mel_distance_with(
    reference: &AudioBuffer,
    estimate: &AudioBuffer,
    configs: &[(StftConfig, MelConfig)],
) -> Result<f64> {
    check_pair(reference, estimate)?;
    let len = reference.len().min(estimate.len());
    if len == 0 {
        return Err(Error::Eval("empty signals".into()));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for ch in 0..reference.num_channels() {
        let r = trimmed_mono(reference, len, ch);
        let e = trimmed_mono(estimate, len, ch);
        for (s, m) in configs {
            let mr = log_mel(&r, s, m)?;
            let me = log_mel(&e, s, m)?;
            let l1: f64 = mr
                .values()
                .iter()
                .zip(me.values())
                .map(|(a, b)| (a - b).abs())
                .sum();
            total += l1 / mr.values().len() as f64;
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// Mean over the default multi-resolution set (and channels) of the mean
/// absolute log-mel difference.
pub fn mel_distance(reference: &AudioBuffer, estimate: &AudioBuffer) -> Result<f64> {
    let configs = default_loss_configs(reference.sample_rate());
    mel_distance_with(reference, estimate, &configs)
}

fn stft_distance_bins(
    reference: &AudioBuffer,
    estimate: &AudioBuffer,
    band: Option<(f64, f64)>,
) -> Result<f64> {
    check_pair(reference, estimate)?;
    let len = reference.len().min(estimate.len());
    if len == 0 {
        return Err(Error::Eval("empty signals".into()));
    }
    let nyquist = reference.sample_rate() as f64 / 2.0;
    let mut total = 0.0;
    let mut count = 0usize;
    for ch in 0..reference.num_channels() {
        let r = trimmed_mono(reference, len, ch);
        let e = trimmed_mono(estimate, len, ch);
        for cfg in stft_distance_configs() {
            let sr = stft(&r, &cfg)?;
            let se = stft(&e, &cfg)?;
            let (b_lo, b_hi) = match band {
                None => (0usize, cfg.bins()),
                Some((lo_hz, hi_hz)) => {
                    let hz_per_bin = nyquist / (cfg.bins() - 1) as f64;
                    let lo = (lo_hz / hz_per_bin).ceil() as usize;
                    let hi = ((hi_hz / hz_per_bin).floor() as usize + 1).min(cfg.bins());
                    (lo.min(cfg.bins()), hi)
                }
            };
            if b_lo >= b_hi {
                return Err(Error::Eval("band contains no STFT bins".into()));
            }
            let mut ref_energy = 0.0;
            let mut diff_energy = 0.0;
            let mut log_l1 = 0.0;
            let mut n = 0usize;
            for f in 0..sr.frames() {
                for b in b_lo..b_hi {
                    let mr = sr.magnitude(b, f);
                    let me = se.magnitude(b, f);
                    ref_energy += mr * mr;
                    diff_energy += (mr - me) * (mr - me);
                    log_l1 += (mr.max(STFT_LOG_FLOOR).ln() - me.max(STFT_LOG_FLOOR).ln()).abs();
                    n += 1;
                }
            }
            if ref_energy == 0.0 {
                return Err(Error::Eval(
                    "silent reference: spectral convergence is undefined".into(),
                ));
            }
            let sc = (diff_energy / ref_energy).sqrt();
            total += sc + log_l1 / n as f64;
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// Mean over resolutions (and channels) of spectral convergence plus mean
/// absolute log-magnitude difference.
pub fn stft_distance(reference: &AudioBuffer, estimate: &AudioBuffer) -> Result<f64> {
    stft_distance_bins(reference, estimate, None)
}

/// Scale-invariant source-to-distortion ratio in dB, capped at +100 dB when
/// the scaled residual is numerically zero.
pub fn si_sdr(reference: &AudioBuffer, estimate: &AudioBuffer) -> Result<f64> {
    check_pair(reference, estimate)?;
    if reference.num_channels() != 1 {
        return Err(Error::Eval("si_sdr expects mono buffers".into()));
    }
    if reference.len() != estimate.len() {
        return Err(Error::Eval(format!(
            "si_sdr length mismatch: {} vs {}",
            reference.len(),
            estimate.len()
        )));
    }
    let r = reference.channel(0);
    let e = estimate.channel(0);
    let ref_energy: f64 = r.iter().map(|&v| v * v).sum();
    if ref_energy == 0.0 {
        return Err(Error::Eval("silent reference: SI-SDR undefined".into()));
    }
    let dot: f64 = r.iter().zip(e).map(|(&a, &b)| a * b).sum();
    let alpha = dot / ref_energy;
    let target_energy = alpha * alpha * ref_energy;
    let residual: f64 = r
        .iter()
        .zip(e)
        .map(|(&a, &b)| {
            let d = alpha * a - b;
            d * d
        })
        .sum();
    if residual <= 0.0 || target_energy / residual >= 1e10 {
        return Ok(SI_SDR_CAP_DB);
    }
    Ok((10.0 * (target_energy / residual).log10()).min(SI_SDR_CAP_DB))
}

/// Band-restricted scores below/above `split_hz`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BandScores {
    pub low: BandPair,
    pub high: BandPair,
}

/// Mel/STFT distances with filterbanks and bins restricted below and above
/// the split (default 11025 Hz, the low-resolution Nyquist).
pub fn band_split_scores(
    reference: &AudioBuffer,
    estimate: &AudioBuffer,
    split_hz: f64,
) -> Result<BandScores> {
    let nyquist = reference.sample_rate() as f64 / 2.0;
    if !(split_hz > 0.0 && split_hz < nyquist) {
        return Err(Error::Config(format!(
            "band split {split_hz} Hz outside (0, {nyquist})"
        )));
    }
    let band_mel = |f_min: f64, f_max: f64| -> Vec<(StftConfig, MelConfig)> {
        default_loss_configs(reference.sample_rate())
            .into_iter()
            .map(|(s, mut m)| {
                // Keep the band resolvable at every resolution: at least
                // enough mels for the resolution rule, fewer if the band is
                // a small fraction of the full range.
                let frac = (f_max - f_min) / nyquist;
                m.n_mels = ((m.n_mels as f64 * frac).round() as usize).max(1);
                m.f_min = f_min;
                m.f_max = f_max;
                (s, m)
            })
            .collect()
    };
    let low = BandPair {
        mel_d: mel_distance_with(reference, estimate, &band_mel(0.0, split_hz))?,
        stft_d: stft_distance_bins(reference, estimate, Some((0.0, split_hz)))?,
    };
    let high = BandPair {
        mel_d: mel_distance_with(reference, estimate, &band_mel(split_hz, nyquist))?,
        stft_d: stft_distance_bins(reference, estimate, Some((split_hz, nyquist)))?,
    };
    Ok(BandScores { low, high })
}

/// Real-time factor: seconds of audio processed per wall-clock second.
pub fn rtf(audio_seconds: f64, wall_seconds: f64) -> Result<f64> {
    if wall_seconds <= 0.0 {
        return Err(Error::Contract(format!(
            "wall time must be positive, got {wall_seconds}"
        )));
    }
    Ok(audio_seconds / wall_seconds)
}

/// Wall-clock RTF of the network-free DSP path (mel frontend, mid/side
/// codec, width control, 2x resampling) on a synthetic stereo clip of the
/// given duration at 44.1 kHz.
pub fn dsp_benchmark_rtf(duration_seconds: f64) -> Result<f64> {
    use crate::audio::{apply_width, downmix, mid_side_decode, mid_side_encode, WidthControl};
    use crate::resample::{sinc_resample, ResampleFactor, DEFAULT_TAPS};

    let len = (duration_seconds * 44100.0) as usize;
    let clip = crate::trainer::synthetic_clip(len, 0x5EED);
    let start = std::time::Instant::now();
    let (mid, side) = mid_side_encode(&clip)?;
    let widened = apply_width(&mid, &side, WidthControl::new(-6.0))?;
    let stereo = mid_side_decode(&mid, &widened.side)?;
    let mono = downmix(&stereo)?;
    let low = sinc_resample(&mono, ResampleFactor::Down2, DEFAULT_TAPS)?;
    let _up = sinc_resample(&low, ResampleFactor::Up2, DEFAULT_TAPS)?;
    let frontend = crate::nets::StageFrontend::m2s();
    let mel = log_mel(&mono, &frontend.stft, &frontend.mel)?;
    // Fold the results into a checksum so the work cannot be elided.
    let sink: f64 = mel.values().iter().take(8).sum::<f64>() + _up.channel(0)[0];
    let elapsed = start.elapsed().as_secs_f64() + (sink.abs() * 0.0);
    rtf(duration_seconds, elapsed)
}

/// Full evaluation of one pair.
pub fn evaluate_pair(
    reference: &AudioBuffer,
    estimate: &AudioBuffer,
    band_split: Option<f64>,
) -> Result<EvalReport> {
    let mel_d = mel_distance(reference, estimate)?;
    let stft_d = stft_distance(reference, estimate)?;
    let si = if reference.num_channels() == 1 && reference.len() == estimate.len() {
        Some(si_sdr(reference, estimate)?)
    } else {
        None
    };
    let bands = band_split
        .map(|hz| band_split_scores(reference, estimate, hz))
        .transpose()?;
    Ok(EvalReport {
        mel_d,
        stft_d,
        si_sdr: si,
        low_band: bands.map(|b| b.low),
        high_band: bands.map(|b| b.high),
    })
}
