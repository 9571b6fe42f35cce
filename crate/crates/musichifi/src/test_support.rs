//! Deterministic signal generators shared by the unit and acceptance suites.
//!
//! Random audio is drawn on the pipeline's PCM-24 sample grid — the
//! value class every PCM source and every cascade stage output lives on —
//! so double-precision mid/side algebra over it is exact.

use crate::audio::AudioBuffer;
use rand::Rng;

/// Uniform sample in [-1, 1) on the pipeline sample grid.
pub fn grid_sample<R: Rng>(rng: &mut R) -> f64 {
    let x: f64 = rng.gen_range(-1.0..1.0);
    crate::audio::quantize_sample(x)
}

/// Mono buffer of grid samples.
pub fn audio_grid_buffer<R: Rng>(rng: &mut R, len: usize, sample_rate: u32) -> AudioBuffer {
    let samples = (0..len).map(|_| grid_sample(rng)).collect();
    AudioBuffer::mono(samples, sample_rate).expect("valid mono buffer")
}

/// Stereo buffer of grid samples.
pub fn audio_grid_stereo<R: Rng>(rng: &mut R, len: usize, sample_rate: u32) -> AudioBuffer {
    let left = (0..len).map(|_| grid_sample(rng)).collect();
    let right = (0..len).map(|_| grid_sample(rng)).collect();
    AudioBuffer::stereo(left, right, sample_rate).expect("valid stereo buffer")
}

/// Sum of sines with the given (frequency, amplitude) pairs, on the grid.
pub fn sine_mix(pairs: &[(f64, f64)], len: usize, sample_rate: u32) -> AudioBuffer {
    let sr = sample_rate as f64;
    let samples: Vec<f64> = (0..len)
        .map(|n| {
            let t = n as f64 / sr;
            let v: f64 = pairs
                .iter()
                .map(|&(f, a)| a * (2.0 * std::f64::consts::PI * f * t).sin())
                .sum();
            crate::audio::quantize_sample(v)
        })
        .collect();
    AudioBuffer::mono(samples, sample_rate).expect("valid mono buffer")
}
