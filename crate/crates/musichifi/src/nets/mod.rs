//! Shared generator architecture and the MPD + MMSD discriminator ensemble.

mod checkpoint;
mod discriminator;
mod generator;

pub use checkpoint::{
    load_checkpoint_raw, load_generator, save_generator, CheckpointMeta, RawParam,
};
pub use discriminator::{
    build_discriminator, DiscOutput, DiscriminatorConfig, DiscriminatorEnsemble,
};
pub use generator::{build_generator, Generator, GeneratorConfig};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{MelConfig, StftConfig};
use crate::tensor::{Scalar, Tensor};

/// Cascade stage tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageKind {
    Vocoder,
    Bwe,
    M2s,
}

impl StageKind {
    pub fn name(&self) -> &'static str {
        match self {
            StageKind::Vocoder => "vocoder",
            StageKind::Bwe => "bwe",
            StageKind::M2s => "m2s",
        }
    }
}

impl std::str::FromStr for StageKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vocoder" => Ok(StageKind::Vocoder),
            "bwe" => Ok(StageKind::Bwe),
            "m2s" => Ok(StageKind::M2s),
            other => Err(Error::Config(format!(
                "unknown stage '{other}' (expected vocoder, bwe, or m2s)"
            ))),
        }
    }
}

/// Mel frontend and rate contract of one cascade stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageFrontend {
    pub stage: StageKind,
    /// Rate of the audio the mel features are computed from.
    pub input_sample_rate: u32,
    /// Rate of the generated waveform.
    pub output_sample_rate: u32,
    pub stft: StftConfig,
    pub mel: MelConfig,
}

impl StageFrontend {
    /// Vocoder: 1024-window / 256-hop / 128-mel at 22.05 kHz.
    pub fn vocoder() -> Self {
        StageFrontend {
            stage: StageKind::Vocoder,
            input_sample_rate: 22050,
            output_sample_rate: 22050,
            stft: StftConfig::new(1024, 256),
            mel: MelConfig::new(128, 22050),
        }
    }

    /// Bandwidth extension: the vocoder frontend with window and hop halved
    /// (512/128), so the frame sequence is twice as long; output at 44.1 kHz.
    pub fn bwe() -> Self {
        StageFrontend {
            stage: StageKind::Bwe,
            input_sample_rate: 22050,
            output_sample_rate: 44100,
            stft: StftConfig::new(512, 128),
            mel: MelConfig::new(128, 22050),
        }
    }

    /// Mono-to-stereo: the vocoder STFT settings at 44.1 kHz (mid channel in,
    /// side channel out).
    pub fn m2s() -> Self {
        StageFrontend {
            stage: StageKind::M2s,
            input_sample_rate: 44100,
            output_sample_rate: 44100,
            stft: StftConfig::new(1024, 256),
            mel: MelConfig::new(128, 44100),
        }
    }

    pub fn for_stage(stage: StageKind) -> Self {
        match stage {
            StageKind::Vocoder => Self::vocoder(),
            StageKind::Bwe => Self::bwe(),
            StageKind::M2s => Self::m2s(),
        }
    }

    /// Samples generated per mel frame at the output rate.
    pub fn samples_per_frame(&self) -> usize {
        self.stft.hop_size * (self.output_sample_rate / self.input_sample_rate) as usize
    }

    pub fn validate(&self) -> Result<()> {
        self.stft.validate()?;
        self.mel.validate()?;
        if self.mel.sample_rate != self.input_sample_rate {
            return Err(Error::Config(format!(
                "frontend mel rate {} must match input rate {}",
                self.mel.sample_rate, self.input_sample_rate
            )));
        }
        if !self
            .output_sample_rate
            .is_multiple_of(self.input_sample_rate)
        {
            return Err(Error::Config(format!(
                "output rate {} must be a multiple of input rate {}",
                self.output_sample_rate, self.input_sample_rate
            )));
        }
        Ok(())
    }

    /// The generator's total upsampling must produce exactly
    /// `samples_per_frame()` output samples per input frame.
    pub fn validate_generator(&self, cfg: &GeneratorConfig) -> Result<()> {
        self.validate()?;
        cfg.validate()?;
        let product: usize = cfg.upsample_rates.iter().product();
        if product != self.samples_per_frame() {
            return Err(Error::Config(format!(
                "{} stage needs upsample product {} (hop {} x rate factor {}), got {}",
                self.stage.name(),
                self.samples_per_frame(),
                self.stft.hop_size,
                self.output_sample_rate / self.input_sample_rate,
                product
            )));
        }
        if cfg.mel_bands != self.mel.n_mels {
            return Err(Error::Config(format!(
                "generator expects {} mel bands but the frontend produces {}",
                cfg.mel_bands, self.mel.n_mels
            )));
        }
        Ok(())
    }
}

/// Ordered, uniquely named trainable tensors of one network.
pub struct ParamSet<T: Scalar> {
    entries: Vec<(String, Tensor<T>)>,
}

impl<T: Scalar> Default for ParamSet<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> ParamSet<T> {
    pub fn new() -> Self {
        ParamSet {
            entries: Vec::new(),
        }
    }

    pub(crate) fn register(
        &mut self,
        name: &str,
        data: Vec<T>,
        shape: &[usize],
    ) -> Result<Tensor<T>> {
        if self.entries.iter().any(|(n, _)| n == name) {
            return Err(Error::Contract(format!(
                "duplicate parameter name '{name}'"
            )));
        }
        let t = Tensor::param(name, data, shape)?;
        self.entries.push((name.to_string(), t.clone()));
        Ok(t)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.entries
            .iter()
            .find_map(|(n, t)| (n == name).then_some(t))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total scalar parameter count.
    pub fn num_values(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.numel()).sum()
    }

    /// Order-insensitive digest of all parameter bytes; used to assert that
    /// an optimizer step touched nothing it should not have.
    pub fn digest(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        for (name, t) in &self.entries {
            for b in name.as_bytes() {
                h = (h ^ *b as u64).wrapping_mul(0x100000001b3);
            }
            for v in t.data().iter() {
                for b in v.as_f64().to_le_bytes() {
                    h = (h ^ b as u64).wrapping_mul(0x100000001b3);
                }
            }
        }
        h
    }
}
