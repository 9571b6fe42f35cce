//! Inference pipeline: mel -> mono 22.05 kHz -> mono 44.1 kHz -> stereo
//! 44.1 kHz, composing the three frozen generators.

use std::path::Path;

use crate::audio::{apply_width, mid_side_decode, AudioBuffer, WidthControl};
use crate::error::{Error, Result};
use crate::nets::{load_generator, Generator, StageFrontend, StageKind};
use crate::resample::{sinc_resample, ResampleFactor, DEFAULT_TAPS};
use crate::spectral::{log_mel, MelSpec};
use crate::tensor::Tensor;

fn stage_err(stage: &'static str, message: impl Into<String>) -> Error {
    Error::Stage {
        stage,
        message: message.into(),
    }
}

/// One frozen stage: generator plus its frontend contract.
pub struct StageModel {
    pub generator: Generator<f32>,
    pub frontend: StageFrontend,
}

impl StageModel {
    pub fn load(path: impl AsRef<Path>, expected: StageKind) -> Result<Self> {
        let (generator, frontend) = load_generator::<f32>(&path)?;
        if frontend.stage != expected {
            return Err(Error::Checkpoint(format!(
                "{} holds a {} checkpoint, expected {}",
                path.as_ref().display(),
                frontend.stage.name(),
                expected.name()
            )));
        }
        Ok(StageModel {
            generator,
            frontend,
        })
    }

    fn forward_mel(&self, mel: &MelSpec) -> Result<Vec<f64>> {
        let t = Tensor::<f32>::from_f64_slice(mel.values(), &[mel.n_mels(), mel.frames()])?;
        Ok(self
            .generator
            .forward(&t)?
            .to_f64_vec()
            .into_iter()
            .map(crate::audio::quantize_sample)
            .collect())
    }

    /// Mel -> mono waveform at this stage's output rate (vocoder stage).
    pub fn vocode(&self, mel: &MelSpec) -> Result<AudioBuffer> {
        if self.frontend.stage != StageKind::Vocoder {
            return Err(stage_err("vocoder", "checkpoint is not a vocoder stage"));
        }
        if mel.n_mels() != self.frontend.mel.n_mels {
            return Err(stage_err(
                "vocoder",
                format!(
                    "mel has {} bands, vocoder frontend expects {}",
                    mel.n_mels(),
                    self.frontend.mel.n_mels
                ),
            ));
        }
        if mel.frames() == 0 {
            return Err(stage_err("vocoder", "mel input has zero frames"));
        }
        let samples = self.forward_mel(mel)?;
        AudioBuffer::mono(samples, self.frontend.output_sample_rate)
    }

    /// Mono low-rate -> doubled-rate waveform with sinc residual (bwe stage).
    pub fn bandwidth_extend(&self, low: &AudioBuffer) -> Result<AudioBuffer> {
        let f = &self.frontend;
        if f.stage != StageKind::Bwe {
            return Err(stage_err("bwe", "checkpoint is not a bwe stage"));
        }
        if low.num_channels() != 1 {
            return Err(stage_err("bwe", "input must be mono"));
        }
        if low.sample_rate() != f.input_sample_rate {
            return Err(stage_err(
                "bwe",
                format!(
                    "input rate {} Hz, expected {} Hz",
                    low.sample_rate(),
                    f.input_sample_rate
                ),
            ));
        }
        if low.is_empty() {
            return Err(stage_err("bwe", "empty input"));
        }
        let mel = log_mel(low, &f.stft, &f.mel)?;
        let generated = self.forward_mel(&mel)?;
        let residual = sinc_resample(low, ResampleFactor::Up2, DEFAULT_TAPS)?;
        let out_len = 2 * low.len();
        // Framing may overshoot by up to one frame of samples; trim (or
        // zero-pad, for degenerate inputs) to the exact 2N contract.
        let mut samples = vec![0.0f64; out_len];
        let copy = out_len.min(generated.len());
        samples[..copy].copy_from_slice(&generated[..copy]);
        for (s, r) in samples.iter_mut().zip(residual.channel(0)) {
            *s += r;
        }
        AudioBuffer::mono(samples, f.output_sample_rate)
    }

    /// Mono -> stereo via generated side, width control, and mid/side
    /// decode (m2s stage); the mid passes through untouched.
    pub fn mono_to_stereo(&self, mono: &AudioBuffer, gamma_db: f64) -> Result<M2sOutput> {
        let f = &self.frontend;
        if f.stage != StageKind::M2s {
            return Err(stage_err("m2s", "checkpoint is not an m2s stage"));
        }
        if mono.num_channels() != 1 {
            return Err(stage_err("m2s", "input must be mono"));
        }
        if mono.sample_rate() != f.input_sample_rate {
            return Err(stage_err(
                "m2s",
                format!(
                    "input rate {} Hz, expected {} Hz",
                    mono.sample_rate(),
                    f.input_sample_rate
                ),
            ));
        }
        if mono.is_empty() {
            return Err(stage_err("m2s", "empty input"));
        }
        let mel = log_mel(mono, &f.stft, &f.mel)?;
        let generated = self.forward_mel(&mel)?;
        // Trim/zero-pad the generated side to the mid's length.
        let mut side = vec![0.0f64; mono.len()];
        let copy = mono.len().min(generated.len());
        side[..copy].copy_from_slice(&generated[..copy]);
        let side = AudioBuffer::mono(side, f.input_sample_rate)?;
        let widened = apply_width(mono, &side, WidthControl::new(gamma_db))?;
        let stereo = mid_side_decode(mono, &widened.side)?;
        Ok(M2sOutput {
            stereo,
            no_spatial_content: widened.no_spatial_content,
        })
    }
}

/// The three-stage ensemble.
pub struct CascadeModels {
    pub vocoder: StageModel,
    pub bwe: StageModel,
    pub m2s: StageModel,
}

/// Stereo output plus the zero-side flag from width application.
#[derive(Debug, Clone)]
pub struct M2sOutput {
    pub stereo: AudioBuffer,
    pub no_spatial_content: bool,
}

impl CascadeModels {
    /// Load and cross-validate the three stage checkpoints.
    pub fn load(
        vocoder_path: impl AsRef<Path>,
        bwe_path: impl AsRef<Path>,
        m2s_path: impl AsRef<Path>,
    ) -> Result<Self> {
        let vocoder = StageModel::load(vocoder_path, StageKind::Vocoder)?;
        let bwe = StageModel::load(bwe_path, StageKind::Bwe)?;
        let m2s = StageModel::load(m2s_path, StageKind::M2s)?;
        if vocoder.frontend.output_sample_rate != bwe.frontend.input_sample_rate {
            return Err(Error::Config(format!(
                "vocoder outputs {} Hz but bwe expects {} Hz",
                vocoder.frontend.output_sample_rate, bwe.frontend.input_sample_rate
            )));
        }
        if bwe.frontend.output_sample_rate != m2s.frontend.input_sample_rate {
            return Err(Error::Config(format!(
                "bwe outputs {} Hz but m2s expects {} Hz",
                bwe.frontend.output_sample_rate, m2s.frontend.input_sample_rate
            )));
        }
        Ok(CascadeModels { vocoder, bwe, m2s })
    }

    /// Mel (vocoder frontend) -> mono waveform at 22.05 kHz; length is
    /// frames x hop.
    pub fn vocode(&self, mel: &MelSpec) -> Result<AudioBuffer> {
        self.vocoder.vocode(mel)
    }

    /// Mono 22.05 kHz -> mono 44.1 kHz: half-hop mel features through the
    /// generator, plus the sinc-interpolated input as a residual.
    pub fn bwe(&self, low: &AudioBuffer) -> Result<AudioBuffer> {
        self.bwe.bandwidth_extend(low)
    }

    /// Mono 44.1 kHz -> stereo 44.1 kHz. The side channel is generated from
    /// the mid's mel, energy-matched, scaled by 10^(gamma_db/20), and the
    /// mid is passed through untouched, so the downmix of the output equals
    /// the input.
    pub fn m2s(&self, mono: &AudioBuffer, gamma_db: f64) -> Result<M2sOutput> {
        self.m2s.mono_to_stereo(mono, gamma_db)
    }

    /// vocode -> bwe -> m2s; output length = frames x 256 x 2 at 44.1 kHz.
    pub fn full_cascade(&self, mel: &MelSpec, gamma_db: f64) -> Result<M2sOutput> {
        let low = self.vocode(mel)?;
        let high = self.bwe(&low)?;
        self.m2s(&high, gamma_db)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::downmix;
    use crate::nets::{build_generator, save_generator, GeneratorConfig};
    use crate::spectral::StftConfig;
    use crate::test_support::sine_mix;
    use std::path::PathBuf;

    fn small_gen(stage: StageKind, base: usize, seed: u64) -> (GeneratorConfig, StageFrontend) {
        let cfg = GeneratorConfig {
            mel_bands: 128,
            base_channels: base,
            upsample_rates: vec![8, 8, 4],
            amp_kernel_sizes: vec![3],
            amp_dilations: vec![vec![1]],
            use_antialiased_activation: false,
            output_tanh: true,
        };
        let _ = seed;
        (cfg, StageFrontend::for_stage(stage))
    }

    fn write_stage(dir: &Path, stage: StageKind, seed: u64) -> PathBuf {
        let (cfg, frontend) = small_gen(stage, 8, seed);
        let gen = build_generator::<f32>(&cfg, seed).unwrap();
        let path = dir.join(format!("{}.ckpt", stage.name()));
        save_generator(&gen, &frontend, &path).unwrap();
        path
    }

    fn models(dir: &Path) -> CascadeModels {
        let v = write_stage(dir, StageKind::Vocoder, 1);
        let b = write_stage(dir, StageKind::Bwe, 2);
        let m = write_stage(dir, StageKind::M2s, 3);
        CascadeModels::load(v, b, m).unwrap()
    }

    fn mel_of(buffer: &AudioBuffer, frontend: &StageFrontend) -> MelSpec {
        log_mel(buffer, &frontend.stft, &frontend.mel).unwrap()
    }

    #[test]
    fn vocode_length_contract() {
        let dir = tempfile::tempdir().unwrap();
        let m = models(dir.path());
        let x = sine_mix(&[(440.0, 0.5)], 16384, 22050);
        let mel = mel_of(&x, &m.vocoder.frontend).truncated(64);
        let out = m.vocode(&mel).unwrap();
        assert_eq!(out.len(), 64 * 256);
        assert_eq!(out.sample_rate(), 22050);
        assert!(out.channel(0).iter().all(|&v| v.abs() < 1.0));
    }

    #[test]
    fn vocode_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let m = models(dir.path());
        let x = sine_mix(&[(700.0, 0.4)], 8192, 22050);
        let mel = mel_of(&x, &m.vocoder.frontend);
        let a = m.vocode(&mel).unwrap();
        let b = m.vocode(&mel).unwrap();
        assert_eq!(a.channel(0), b.channel(0));
    }

    #[test]
    fn vocode_rejects_band_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let m = models(dir.path());
        let x = sine_mix(&[(700.0, 0.4)], 4096, 22050);
        let mut frontend = m.vocoder.frontend.clone();
        frontend.mel.n_mels = 64;
        let mel = mel_of(&x, &frontend);
        assert!(matches!(
            m.vocode(&mel),
            Err(Error::Stage {
                stage: "vocoder",
                ..
            })
        ));
    }

    #[test]
    fn bwe_zero_generator_is_exact_sinc_residual() {
        let dir = tempfile::tempdir().unwrap();
        let m = models(dir.path());
        m.bwe.generator.fill_params("post.conv", 0.0);
        let x = sine_mix(&[(1000.0, 0.6), (4000.0, 0.2)], 8192, 22050);
        let out = m.bwe(&x).unwrap();
        let oracle = sinc_resample(&x, ResampleFactor::Up2, DEFAULT_TAPS).unwrap();
        assert_eq!(out.len(), 16384);
        assert_eq!(out.sample_rate(), 44100);
        assert_eq!(out.channel(0), oracle.channel(0));
    }

    #[test]
    fn bwe_length_doubles() {
        let dir = tempfile::tempdir().unwrap();
        let m = models(dir.path());
        for n in [1000usize, 8192, 10001] {
            let x = sine_mix(&[(500.0, 0.3)], n, 22050);
            assert_eq!(m.bwe(&x).unwrap().len(), 2 * n, "n = {n}");
        }
    }

    #[test]
    fn bwe_rejects_wrong_rate() {
        let dir = tempfile::tempdir().unwrap();
        let m = models(dir.path());
        let x = sine_mix(&[(500.0, 0.3)], 4096, 44100);
        assert!(matches!(m.bwe(&x), Err(Error::Stage { stage: "bwe", .. })));
    }

    #[test]
    fn m2s_downmix_recovers_input_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let m = models(dir.path());
        let x = sine_mix(&[(440.0, 0.4), (2000.0, 0.2)], 16384, 44100);
        for gamma in [-18.0, -12.0, -6.0, 0.0] {
            let out = m.m2s(&x, gamma).unwrap();
            assert!(!out.no_spatial_content);
            let back = downmix(&out.stereo).unwrap();
            assert_eq!(back.channel(0), x.channel(0), "gamma {gamma}");
        }
    }

    #[test]
    fn m2s_zero_generator_flags_dual_mono() {
        let dir = tempfile::tempdir().unwrap();
        let m = models(dir.path());
        m.m2s.generator.fill_params("post.conv", 0.0);
        let x = sine_mix(&[(440.0, 0.4)], 8192, 44100);
        let out = m.m2s(&x, 0.0).unwrap();
        assert!(out.no_spatial_content);
        assert_eq!(out.stereo.channel(0), x.channel(0));
        assert_eq!(out.stereo.channel(1), x.channel(0));
    }

    #[test]
    fn m2s_very_negative_gamma_is_near_dual_mono() {
        let dir = tempfile::tempdir().unwrap();
        let m = models(dir.path());
        let x = sine_mix(&[(440.0, 0.4)], 8192, 44100);
        let out = m.m2s(&x, -120.0).unwrap();
        for (l, r) in out.stereo.channel(0).iter().zip(out.stereo.channel(1)) {
            assert!((l - r).abs() < 1e-5);
        }
    }

    #[test]
    fn m2s_width_is_monotone_in_gamma() {
        let dir = tempfile::tempdir().unwrap();
        let m = models(dir.path());
        let x = sine_mix(&[(630.0, 0.5)], 8192, 44100);
        let mut last = -1.0;
        for gamma in [-18.0, -12.0, -6.0, 0.0] {
            let out = m.m2s(&x, gamma).unwrap();
            let (mid, side) = crate::audio::mid_side_encode(&out.stereo).unwrap();
            let _ = mid;
            let r = side.rms();
            assert!(r > last, "side rms not increasing at gamma {gamma}");
            last = r;
        }
    }

    #[test]
    fn full_cascade_length_and_composition() {
        let dir = tempfile::tempdir().unwrap();
        let m = models(dir.path());
        let x = sine_mix(&[(440.0, 0.5)], 16384, 22050);
        let mel = mel_of(&x, &m.vocoder.frontend).truncated(64);
        let full = m.full_cascade(&mel, -6.0).unwrap();
        assert_eq!(full.stereo.len(), 64 * 256 * 2);
        assert_eq!(full.stereo.sample_rate(), 44100);
        // Referential transparency: equals the manual three-call sequence.
        let low = m.vocode(&mel).unwrap();
        let high = m.bwe(&low).unwrap();
        let manual = m.m2s(&high, -6.0).unwrap();
        assert_eq!(full.stereo.channel(0), manual.stereo.channel(0));
        assert_eq!(full.stereo.channel(1), manual.stereo.channel(1));
    }

    #[test]
    fn full_cascade_downmix_recovers_bwe_output() {
        // The signature property held end-to-end: downmixing the stereo
        // output recovers the (f32-representable) mono fed into m2s.
        let dir = tempfile::tempdir().unwrap();
        let m = models(dir.path());
        let x = sine_mix(&[(550.0, 0.5)], 8192, 22050);
        let mel = mel_of(&x, &m.vocoder.frontend).truncated(32);
        let low = m.vocode(&mel).unwrap();
        let high = m.bwe(&low).unwrap();
        let out = m.m2s(&high, -6.0).unwrap();
        let back = downmix(&out.stereo).unwrap();
        assert_eq!(back.channel(0), high.channel(0));
    }

    #[test]
    fn load_rejects_stage_mixup() {
        let dir = tempfile::tempdir().unwrap();
        let v = write_stage(dir.path(), StageKind::Vocoder, 1);
        let b = write_stage(dir.path(), StageKind::Bwe, 2);
        let m = write_stage(dir.path(), StageKind::M2s, 3);
        assert!(CascadeModels::load(&b, &v, &m).is_err());
    }

    #[test]
    fn stft_config_sanity() {
        // The m2s frontend runs the vocoder STFT settings at 44.1 kHz.
        let f = StageFrontend::m2s();
        assert_eq!(f.stft, StftConfig::new(1024, 256));
        assert_eq!(f.mel.sample_rate, 44100);
    }
}
