//! Windowed-sinc 2x resampling.
//!
//! Up2 zero-stuffs and convolves with a Kaiser-windowed sinc low-pass at the
//! original Nyquist (gain-compensated by 2); down2 low-passes at the new
//! Nyquist and decimates. Filters are linear-phase and the group delay is
//! trimmed, so output sample n aligns with time n/(new rate). The signal is
//! treated as zero outside its support.

use crate::audio::AudioBuffer;
use crate::error::{Error, Result};

/// Kaiser beta giving roughly -80 dB stopband attenuation.
pub const KAISER_BETA: f64 = 8.6;
/// Default filter length.
pub const DEFAULT_TAPS: usize = 255;

/// Resampling direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResampleFactor {
    Up2,
    Down2,
}

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..=40 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < sum * 1e-18 {
            break;
        }
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Kaiser-windowed sinc low-pass kernel. `cutoff` is in cycles/sample
/// (0.25 = half Nyquist), `gain` scales the whole kernel. Taps must be odd
/// so the kernel is centered on a sample.
pub fn kaiser_sinc_kernel(taps: usize, cutoff: f64, gain: f64, beta: f64) -> Vec<f64> {
    assert!(taps % 2 == 1, "kernel taps must be odd");
    let center = (taps / 2) as isize;
    let denom = bessel_i0(beta);
    (0..taps as isize)
        .map(|k| {
            let n = (k - center) as f64;
            let t = n / center.max(1) as f64;
            let window = bessel_i0(beta * (1.0 - t * t).max(0.0).sqrt()) / denom;
            gain * 2.0 * cutoff * sinc(2.0 * cutoff * n) * window
        })
        .collect()
}

/// Interpolation kernel for 2x upsampling: cutoff 0.25 at the doubled rate,
/// gain 2. Even offsets from center are exactly {1, 0, 0, ...}, so input
/// samples pass through untouched.
pub fn up2_kernel(taps: usize) -> Vec<f64> {
    let mut kernel = kaiser_sinc_kernel(taps, 0.25, 2.0, KAISER_BETA);
    // sinc(n/2) is exactly zero at even n != 0; pin the taps so the
    // pass-through of input samples is sample-exact.
    let center = taps / 2;
    for (k, v) in kernel.iter_mut().enumerate() {
        if (k as isize - center as isize) % 2 == 0 {
            *v = if k == center { 1.0 } else { 0.0 };
        }
    }
    kernel
}

/// Anti-alias kernel for 2x decimation: cutoff 0.25 at the input rate, gain 1.
pub fn down2_kernel(taps: usize) -> Vec<f64> {
    kaiser_sinc_kernel(taps, 0.25, 1.0, KAISER_BETA)
}

/// Upsample by 2 with an explicit kernel (odd length). Output length 2N;
/// out[2n] == x[n] exactly for the standard kernel.
pub fn upsample2_with_kernel(x: &[f64], kernel: &[f64]) -> Vec<f64> {
    let taps = kernel.len();
    let center = (taps / 2) as isize;
    let n_in = x.len() as isize;
    let n_out = 2 * x.len();
    let mut out = vec![0.0f64; n_out];
    for (m, o) in out.iter_mut().enumerate() {
        // Contributions from x[n] where kernel index k = m + center - 2n.
        let m = m as isize;
        let n_lo = (m + center - (taps as isize - 1) + 1) / 2; // ceil((m+c-taps+1)/2)
        let n_lo = n_lo.max(0);
        let n_hi = ((m + center) / 2).min(n_in - 1);
        let mut acc = 0.0;
        let mut n = n_lo;
        while n <= n_hi {
            let k = m + center - 2 * n;
            if k >= 0 && k < taps as isize {
                acc += x[n as usize] * kernel[k as usize];
            }
            n += 1;
        }
        *o = acc;
    }
    out
}

/// Downsample by 2 with an explicit kernel (odd length). Output length
/// ceil(N/2); out[n] aligns with in[2n].
pub fn downsample2_with_kernel(x: &[f64], kernel: &[f64]) -> Vec<f64> {
    let taps = kernel.len() as isize;
    let center = taps / 2;
    let n_in = x.len() as isize;
    let n_out = x.len().div_ceil(2);
    let mut out = vec![0.0f64; n_out];
    for (j, o) in out.iter_mut().enumerate() {
        let base = 2 * j as isize - center;
        let k_lo = (-base).max(0);
        let k_hi = (n_in - base).min(taps);
        let mut acc = 0.0;
        for k in k_lo..k_hi {
            acc += kernel[k as usize] * x[(base + k) as usize];
        }
        *o = acc;
    }
    out
}

/// 2x sinc resampling of a mono buffer. Output samples snap to the pipeline
/// sample grid (see module notes in [`crate::audio`]); the up2 pass-through
/// of input samples is untouched by that rounding when the input is on grid.
pub fn sinc_resample(x: &AudioBuffer, factor: ResampleFactor, taps: usize) -> Result<AudioBuffer> {
    if x.num_channels() != 1 {
        return Err(Error::Dimension(format!(
            "sinc_resample expects a mono buffer, got {} channels",
            x.num_channels()
        )));
    }
    if taps.is_multiple_of(2) {
        return Err(Error::Parameter(format!(
            "sinc_resample taps must be odd, got {taps}"
        )));
    }
    if taps < 31 {
        return Err(Error::Parameter(format!(
            "sinc_resample taps must be at least 31, got {taps}"
        )));
    }
    let (samples, rate) = match factor {
        ResampleFactor::Up2 => (
            upsample2_with_kernel(x.channel(0), &up2_kernel(taps)),
            x.sample_rate() * 2,
        ),
        ResampleFactor::Down2 => {
            if !x.sample_rate().is_multiple_of(2) {
                return Err(Error::Parameter(format!(
                    "down2 needs an even sample rate, got {}",
                    x.sample_rate()
                )));
            }
            (
                downsample2_with_kernel(x.channel(0), &down2_kernel(taps)),
                x.sample_rate() / 2,
            )
        }
    };
    let samples = samples
        .into_iter()
        .map(crate::audio::quantize_sample)
        .collect();
    AudioBuffer::mono(samples, rate)
}
