//! STFT and log-mel frontends.
//!
//! Used by generators (input features), losses (multi-resolution mel
//! reconstruction, complex-spectrogram discriminators), and metrics.

use num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::audio::AudioBuffer;
use crate::error::{Error, Result};

/// Analysis window shape. Hann (periodic) everywhere in production; the
/// rectangular variant exists for energy-conservation tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum WindowKind {
    #[default]
    Hann,
    Rect,
}

/// STFT settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StftConfig {
    pub window_size: usize,
    pub hop_size: usize,
    pub fft_size: usize,
    /// Reflect-pad by window_size/2 on both sides.
    pub center: bool,
    #[serde(default)]
    pub window: WindowKind,
}

impl StftConfig {
    /// window = fft = `window_size`, centered Hann.
    pub fn new(window_size: usize, hop_size: usize) -> Self {
        Self {
            window_size,
            hop_size,
            fft_size: window_size,
            center: true,
            window: WindowKind::Hann,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hop_size == 0
            || self.hop_size > self.window_size
            || self.window_size > self.fft_size
        {
            return Err(Error::Config(format!(
                "stft config must satisfy 0 < hop ({}) <= window ({}) <= fft ({})",
                self.hop_size, self.window_size, self.fft_size
            )));
        }
        if !self.window_size.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "window_size must be even, got {}",
                self.window_size
            )));
        }
        Ok(())
    }

    pub fn bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Frame count for an input of `len` samples:
    /// floor((padded - window)/hop) + 1, or 0 if the (padded) signal is
    /// shorter than one window.
    pub fn num_frames(&self, len: usize) -> usize {
        let padded = if self.center {
            len + self.window_size
        } else {
            len
        };
        if padded < self.window_size {
            0
        } else {
            (padded - self.window_size) / self.hop_size + 1
        }
    }

    pub fn window_values(&self) -> Vec<f64> {
        window_values(self.window, self.window_size)
    }
}

pub(crate) fn window_values(kind: WindowKind, size: usize) -> Vec<f64> {
    match kind {
        WindowKind::Hann => (0..size)
            .map(|n| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / size as f64).cos())
            .collect(),
        WindowKind::Rect => vec![1.0; size],
    }
}

/// Mel filterbank settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MelConfig {
    pub n_mels: usize,
    pub sample_rate: u32,
    pub f_min: f64,
    pub f_max: f64,
    /// Clamp applied to filterbank outputs before the (natural) log.
    pub log_floor: f64,
}

impl MelConfig {
    /// `n_mels` bands over 0..Nyquist with the standard 1e-5 floor.
    pub fn new(n_mels: usize, sample_rate: u32) -> Self {
        Self {
            n_mels,
            sample_rate,
            f_min: 0.0,
            f_max: sample_rate as f64 / 2.0,
            log_floor: 1e-5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_mels == 0 {
            return Err(Error::Config("n_mels must be at least 1".into()));
        }
        let nyquist = self.sample_rate as f64 / 2.0;
        if !(self.f_min >= 0.0 && self.f_min < self.f_max && self.f_max <= nyquist) {
            return Err(Error::Config(format!(
                "mel range must satisfy 0 <= f_min ({}) < f_max ({}) <= nyquist ({nyquist})",
                self.f_min, self.f_max
            )));
        }
        if self.log_floor <= 0.0 {
            return Err(Error::Config("log_floor must be positive".into()));
        }
        Ok(())
    }
}

/// HTK mel scale.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Complex STFT matrix, bins x frames.
#[derive(Debug, Clone)]
pub struct ComplexSpec {
    bins: usize,
    frames: usize,
    /// Frame-major storage: data[frame * bins + bin].
    data: Vec<Complex<f64>>,
    pub config: StftConfig,
}

impl ComplexSpec {
    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn at(&self, bin: usize, frame: usize) -> Complex<f64> {
        self.data[frame * self.bins + bin]
    }

    pub fn frame(&self, frame: usize) -> &[Complex<f64>] {
        &self.data[frame * self.bins..(frame + 1) * self.bins]
    }

    pub fn magnitude(&self, bin: usize, frame: usize) -> f64 {
        self.at(bin, frame).norm()
    }
}

/// Log-mel matrix, n_mels x frames (mel-major storage).
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpec {
    n_mels: usize,
    frames: usize,
    /// data[mel * frames + frame].
    data: Vec<f64>,
    pub stft_config: StftConfig,
    pub mel_config: MelConfig,
}

impl MelSpec {
    pub fn n_mels(&self) -> usize {
        self.n_mels
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn at(&self, mel: usize, frame: usize) -> f64 {
        self.data[mel * self.frames + frame]
    }

    pub fn band(&self, mel: usize) -> &[f64] {
        &self.data[mel * self.frames..(mel + 1) * self.frames]
    }

    /// Row-major (mel-major) values.
    pub fn values(&self) -> &[f64] {
        &self.data
    }

    /// Drop trailing frames, keeping the first `frames`.
    pub fn truncated(&self, frames: usize) -> MelSpec {
        assert!(frames <= self.frames);
        let mut data = Vec::with_capacity(self.n_mels * frames);
        for m in 0..self.n_mels {
            data.extend_from_slice(&self.band(m)[..frames]);
        }
        MelSpec {
            n_mels: self.n_mels,
            frames,
            data,
            stft_config: self.stft_config,
            mel_config: self.mel_config,
        }
    }

    pub fn from_parts(
        n_mels: usize,
        frames: usize,
        data: Vec<f64>,
        stft_config: StftConfig,
        mel_config: MelConfig,
    ) -> Result<Self> {
        if data.len() != n_mels * frames {
            return Err(Error::Shape(format!(
                "mel data length {} does not match {n_mels}x{frames}",
                data.len()
            )));
        }
        Ok(MelSpec {
            n_mels,
            frames,
            data,
            stft_config,
            mel_config,
        })
    }
}

/// Reflect ("bounce") index into [0, n): ..., 2, 1, 0, 1, 2, ..., n-1, n-2, ...
pub(crate) fn reflect_index(i: isize, n: usize) -> usize {
    debug_assert!(n > 0);
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let mut j = i.rem_euclid(period);
    if j >= n as isize {
        j = period - j;
    }
    j as usize
}

/// Windowed DFT frames. Center padding is reflection by window/2.
pub fn stft(x: &AudioBuffer, cfg: &StftConfig) -> Result<ComplexSpec> {
    cfg.validate()?;
    if x.num_channels() != 1 {
        return Err(Error::Dimension(format!(
            "stft expects a mono buffer, got {} channels",
            x.num_channels()
        )));
    }
    if x.is_empty() {
        return Err(Error::Data("stft input must have at least 1 sample".into()));
    }
    let samples = x.channel(0);
    let frames = cfg.num_frames(samples.len());
    let bins = cfg.bins();
    let window = cfg.window_values();
    let pad = if cfg.center { cfg.window_size / 2 } else { 0 };

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(cfg.fft_size);
    let mut buf = vec![Complex::new(0.0, 0.0); cfg.fft_size];
    let mut data = Vec::with_capacity(frames * bins);
    for f in 0..frames {
        let start = f as isize * cfg.hop_size as isize - pad as isize;
        for (n, w) in window.iter().enumerate() {
            let idx = start + n as isize;
            let v = if idx >= 0 && (idx as usize) < samples.len() {
                samples[idx as usize]
            } else if cfg.center {
                samples[reflect_index(idx, samples.len())]
            } else {
                0.0
            };
            buf[n] = Complex::new(v * w, 0.0);
        }
        for b in buf[cfg.window_size..].iter_mut() {
            *b = Complex::new(0.0, 0.0);
        }
        fft.process(&mut buf);
        data.extend_from_slice(&buf[..bins]);
    }
    Ok(ComplexSpec {
        bins,
        frames,
        data,
        config: *cfg,
    })
}

/// Triangular mel filterbank with peak 1.0 and HTK-scale centers.
/// Rows are stored sparsely as (first bin, weights).
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    pub n_mels: usize,
    pub bins: usize,
    /// Per filter: bin index of the first weight, then the weights.
    rows: Vec<(usize, Vec<f64>)>,
    /// Filter center frequencies in Hz.
    centers: Vec<f64>,
    /// Filter support edges in Hz (n_mels + 2 points).
    edges: Vec<f64>,
}

impl MelFilterbank {
    pub fn center_frequencies(&self) -> &[f64] {
        &self.centers
    }

    /// Dense weight of filter `mel` at `bin`.
    pub fn weight(&self, mel: usize, bin: usize) -> f64 {
        let (start, ref w) = self.rows[mel];
        if bin >= start && bin < start + w.len() {
            w[bin - start]
        } else {
            0.0
        }
    }

    /// The triangle function of filter `mel` evaluated at an arbitrary
    /// frequency; peaks at exactly 1.0 at the center.
    pub fn response_at(&self, mel: usize, hz: f64) -> f64 {
        triangle(
            self.edges[mel],
            self.edges[mel + 1],
            self.edges[mel + 2],
            hz,
        )
    }

    /// Apply to a magnitude frame (length `bins`).
    pub fn apply(&self, magnitudes: &[f64], out: &mut [f64]) {
        debug_assert_eq!(magnitudes.len(), self.bins);
        debug_assert_eq!(out.len(), self.n_mels);
        for (m, (start, w)) in self.rows.iter().enumerate() {
            out[m] = w
                .iter()
                .zip(&magnitudes[*start..*start + w.len()])
                .map(|(a, b)| a * b)
                .sum();
        }
    }

    /// Dense n_mels x bins matrix, row-major.
    pub fn dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_mels * self.bins];
        for (m, (start, w)) in self.rows.iter().enumerate() {
            out[m * self.bins + start..m * self.bins + start + w.len()].copy_from_slice(w);
        }
        out
    }
}

fn triangle(lo: f64, center: f64, hi: f64, f: f64) -> f64 {
    if f <= lo || f >= hi {
        if f == center {
            // Degenerate zero-width triangle; keep the peak definition.
            1.0
        } else {
            0.0
        }
    } else if f < center {
        (f - lo) / (center - lo)
    } else if f > center {
        (hi - f) / (hi - center)
    } else {
        1.0
    }
}

/// Build the filterbank. Errors when the mel resolution outstrips the bin
/// resolution (fewer than 2 bins per filter on average).
pub fn mel_filterbank(stft_cfg: &StftConfig, mel_cfg: &MelConfig) -> Result<MelFilterbank> {
    stft_cfg.validate()?;
    mel_cfg.validate()?;
    let bins = stft_cfg.bins();
    if bins.saturating_sub(1) < 2 * mel_cfg.n_mels {
        return Err(Error::Config(format!(
            "n_mels {} too large for bin resolution: {} bins gives filters spanning < 2 bins",
            mel_cfg.n_mels, bins
        )));
    }
    let mel_lo = hz_to_mel(mel_cfg.f_min);
    let mel_hi = hz_to_mel(mel_cfg.f_max);
    let edges: Vec<f64> = (0..mel_cfg.n_mels + 2)
        .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (mel_cfg.n_mels + 1) as f64))
        .collect();
    let bin_hz = mel_cfg.sample_rate as f64 / stft_cfg.fft_size as f64;
    let mut rows = Vec::with_capacity(mel_cfg.n_mels);
    for m in 0..mel_cfg.n_mels {
        let (lo, center, hi) = (edges[m], edges[m + 1], edges[m + 2]);
        let first = (lo / bin_hz).ceil() as usize;
        let last = ((hi / bin_hz).floor() as usize).min(bins - 1);
        let mut start = first.min(bins);
        let mut weights: Vec<f64> = (start..=last.max(start).min(bins.saturating_sub(1)))
            .map(|b| triangle(lo, center, hi, b as f64 * bin_hz))
            .collect();
        while let Some(&w) = weights.first() {
            if w == 0.0 {
                weights.remove(0);
                start += 1;
            } else {
                break;
            }
        }
        while weights.last() == Some(&0.0) {
            weights.pop();
        }
        if weights.is_empty() {
            // Filter narrower than the bin grid at this frequency: legal but
            // empty; it clamps to the log floor downstream.
            rows.push((0, Vec::new()));
        } else {
            rows.push((start, weights));
        }
    }
    Ok(MelFilterbank {
        n_mels: mel_cfg.n_mels,
        bins,
        rows,
        centers: edges[1..=mel_cfg.n_mels].to_vec(),
        edges,
    })
}

/// log(max(filterbank . |STFT|, log_floor)), natural log.
pub fn log_mel(x: &AudioBuffer, stft_cfg: &StftConfig, mel_cfg: &MelConfig) -> Result<MelSpec> {
    if x.sample_rate() != mel_cfg.sample_rate {
        return Err(Error::Config(format!(
            "sample rate mismatch: buffer {} Hz vs mel config {} Hz",
            x.sample_rate(),
            mel_cfg.sample_rate
        )));
    }
    let fb = mel_filterbank(stft_cfg, mel_cfg)?;
    let spec = stft(x, stft_cfg)?;
    Ok(log_mel_of_spec(&spec, &fb, stft_cfg, mel_cfg))
}

pub(crate) fn log_mel_of_spec(
    spec: &ComplexSpec,
    fb: &MelFilterbank,
    stft_cfg: &StftConfig,
    mel_cfg: &MelConfig,
) -> MelSpec {
    let frames = spec.frames();
    let mut data = vec![0.0f64; mel_cfg.n_mels * frames];
    let mut mags = vec![0.0f64; spec.bins()];
    let mut mel_frame = vec![0.0f64; mel_cfg.n_mels];
    for f in 0..frames {
        for (b, m) in spec.frame(f).iter().zip(mags.iter_mut()) {
            *m = b.norm();
        }
        fb.apply(&mags, &mut mel_frame);
        for (m, &v) in mel_frame.iter().enumerate() {
            data[m * frames + f] = v.max(mel_cfg.log_floor).ln();
        }
    }
    MelSpec {
        n_mels: mel_cfg.n_mels,
        frames,
        data,
        stft_config: *stft_cfg,
        mel_config: *mel_cfg,
    }
}

/// Element-wise [`log_mel`] over a list of resolutions.
pub fn multi_res_mels(
    x: &AudioBuffer,
    configs: &[(StftConfig, MelConfig)],
) -> Result<Vec<MelSpec>> {
    if configs.is_empty() {
        return Err(Error::Config("empty multi-resolution config list".into()));
    }
    configs.iter().map(|(s, m)| log_mel(x, s, m)).collect()
}

/// Default multi-resolution set for the reconstruction loss: windows
/// {2048, 1024, 512, 256, 128, 64}, hop = window/4, mel bands
/// {128, 128, 64, 64, 32, 16}.
pub fn default_loss_configs(sample_rate: u32) -> Vec<(StftConfig, MelConfig)> {
    const WINDOWS: [usize; 6] = [2048, 1024, 512, 256, 128, 64];
    const MELS: [usize; 6] = [128, 128, 64, 64, 32, 16];
    WINDOWS
        .iter()
        .zip(MELS)
        .map(|(&w, m)| (StftConfig::new(w, w / 4), MelConfig::new(m, sample_rate)))
        .collect()
}
