//! MusicHiFi: a three-stage cascade that turns low-resolution mel
//! spectrograms into stereo high-resolution audio.
//!
//! The cascade is vocoding (mel -> mono 22.05 kHz), residual bandwidth
//! extension (mono 22.05 kHz -> mono 44.1 kHz), and downmix-compatible
//! mono-to-stereo upmixing via mid/side coding (mono 44.1 kHz -> stereo).
//! All three stages share one GAN generator/discriminator architecture and
//! training objective, implemented here at desk scale on a small
//! reverse-mode autodiff engine, together with the deterministic DSP the
//! stages are built on and an objective metric suite.

pub mod audio;
pub mod cascade;
pub mod error;
pub mod matrix_io;
pub mod metrics;
pub mod nets;
pub mod objectives;
pub mod resample;
pub mod spectral;
pub mod tensor;
pub mod test_support;
pub mod trainer;
pub mod wav;

pub use audio::{AudioBuffer, WidthControl};
pub use error::{Error, Result};
