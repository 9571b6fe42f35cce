//! Desk-scale alternating GAN training for the three cascade stages.
//!
//! Per step: sample a batch, minimize L_D, then minimize L_G. Every
//! `validation_every` steps the multi-resolution STFT distance on a fixed
//! validation pair selects the best checkpoint. Fully deterministic under
//! the seed: one RNG stream, single-threaded, fixed reduction order.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::audio::{downmix, mid_side_encode, AudioBuffer};
use crate::error::{Error, Result};
use crate::metrics::stft_distance;
use crate::nets::{
    build_discriminator, build_generator, save_generator, DiscriminatorConfig, Generator,
    GeneratorConfig, ParamSet, StageFrontend, StageKind,
};
use crate::objectives::{
    discriminator_objective, objective_from_fake, GeneratorLosses, LossReport, LossWeights,
    MelLossContext, SubLoss,
};
use crate::resample::{sinc_resample, ResampleFactor, DEFAULT_TAPS};
use crate::spectral::{default_loss_configs, log_mel, MelSpec};
use crate::tensor::{backward, Gradients, Scalar, Tensor};

/// Stage preparation recipe.
#[derive(Debug, Clone, Copy)]
pub struct StagePrep {
    pub stage: StageKind,
    pub crop_length: usize,
}

impl StagePrep {
    pub fn new(stage: StageKind) -> Self {
        StagePrep {
            stage,
            crop_length: 16384,
        }
    }
}

/// Optimization settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Discriminator learning rate; generator lr when omitted.
    #[serde(default)]
    pub d_lr: Option<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub seed: u64,
    pub validation_every: usize,
    pub lambda_fm: f64,
    pub lambda_rc: f64,
    #[serde(default = "default_crop")]
    pub crop_length: usize,
}

fn default_crop() -> usize {
    16384
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps: 2000,
            batch_size: 4,
            lr: 2e-4,
            d_lr: None,
            beta1: 0.8,
            beta2: 0.99,
            seed: 0,
            validation_every: 200,
            lambda_fm: 1.0,
            lambda_rc: 360.0,
            crop_length: 16384,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.batch_size == 0 {
            return Err(Error::Config("steps and batch_size must be >= 1".into()));
        }
        if self.validation_every == 0 {
            return Err(Error::Config("validation_every must be >= 1".into()));
        }
        if self.crop_length == 0 {
            return Err(Error::Config("crop_length must be >= 1".into()));
        }
        Ok(())
    }

    pub fn weights(&self) -> LossWeights {
        LossWeights {
            lambda_fm: self.lambda_fm,
            lambda_rc: self.lambda_rc,
        }
    }
}

/// One reconstruction-loss resolution as written in config files.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RcResolution {
    pub window: usize,
    pub hop: usize,
    pub n_mels: usize,
}

/// Everything the `train` CLI reads from its config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainSpec {
    pub train: TrainConfig,
    pub generator: GeneratorConfig,
    #[serde(default)]
    pub discriminator: DiscriminatorConfig,
    /// Multi-resolution reconstruction-loss set; the standard six-window
    /// default when omitted.
    #[serde(default)]
    pub rc_resolutions: Option<Vec<RcResolution>>,
}

impl TrainSpec {
    /// Desk-scale defaults per stage (base 32 channels; 24 for BWE).
    pub fn desk_default(stage: StageKind) -> Self {
        let base = match stage {
            StageKind::Bwe => 24,
            _ => 32,
        };
        TrainSpec {
            train: TrainConfig::default(),
            generator: GeneratorConfig::desk(128, base),
            discriminator: DiscriminatorConfig::default(),
            rc_resolutions: None,
        }
    }

    /// The reconstruction-loss config set at the stage's output rate.
    pub fn rc_configs(
        &self,
        sample_rate: u32,
    ) -> Vec<(crate::spectral::StftConfig, crate::spectral::MelConfig)> {
        match &self.rc_resolutions {
            None => default_loss_configs(sample_rate),
            Some(list) => list
                .iter()
                .map(|r| {
                    let mut stft = crate::spectral::StftConfig::new(r.window, r.hop);
                    stft.hop_size = r.hop;
                    (stft, crate::spectral::MelConfig::new(r.n_mels, sample_rate))
                })
                .collect(),
        }
    }
}

/// One training example: the generator input plus the waveform target at the
/// stage's output rate.
#[derive(Debug, Clone)]
pub enum PairInput {
    /// Log-mel features (vocoder, m2s), trimmed so frames * hop == target.
    Mel(MelSpec),
    /// Low-rate waveform (bwe); the step computes the half-hop mel and the
    /// sinc residual from it.
    Wave(AudioBuffer),
}

#[derive(Debug, Clone)]
pub struct TrainPair {
    pub input: PairInput,
    pub target: AudioBuffer,
}

/// Crop + module-specific preprocessing of one stereo 44.1 kHz clip.
pub fn make_pair<R: Rng>(prep: &StagePrep, clip: &AudioBuffer, rng: &mut R) -> Result<TrainPair> {
    if clip.num_channels() != 2 {
        return Err(Error::Data(format!(
            "training clips must be stereo, got {} channel(s)",
            clip.num_channels()
        )));
    }
    if clip.sample_rate() != 44100 {
        return Err(Error::Data(format!(
            "training clips must be 44.1 kHz, got {}",
            clip.sample_rate()
        )));
    }
    let frontend = StageFrontend::for_stage(prep.stage);
    let crop = prep.crop_length;
    let hop = frontend.stft.hop_size;
    if !crop.is_multiple_of(frontend.samples_per_frame()) {
        return Err(Error::Config(format!(
            "crop length {crop} is not a multiple of {} output samples per frame",
            frontend.samples_per_frame()
        )));
    }

    let crop_range = |len: usize, need: usize, rng: &mut R| -> Result<usize> {
        if len < need {
            return Err(Error::Data(format!(
                "clip too short: need {need} samples, have {len}"
            )));
        }
        Ok(rng.gen_range(0..=(len - need)))
    };

    match prep.stage {
        StageKind::Vocoder => {
            let mono44 = downmix(clip)?;
            let mono22 = sinc_resample(&mono44, ResampleFactor::Down2, DEFAULT_TAPS)?;
            let start = crop_range(mono22.len(), crop, rng)?;
            let target = AudioBuffer::mono(mono22.channel(0)[start..start + crop].to_vec(), 22050)?;
            let mel = log_mel(&target, &frontend.stft, &frontend.mel)?.truncated(crop / hop);
            Ok(TrainPair {
                input: PairInput::Mel(mel),
                target,
            })
        }
        StageKind::Bwe => {
            let mono44 = downmix(clip)?;
            let start = crop_range(mono44.len(), crop, rng)?;
            let target = AudioBuffer::mono(mono44.channel(0)[start..start + crop].to_vec(), 44100)?;
            let input = sinc_resample(&target, ResampleFactor::Down2, DEFAULT_TAPS)?;
            Ok(TrainPair {
                input: PairInput::Wave(input),
                target,
            })
        }
        StageKind::M2s => {
            let (mid, side) = mid_side_encode(clip)?;
            let start = crop_range(mid.len(), crop, rng)?;
            let mid_crop = AudioBuffer::mono(mid.channel(0)[start..start + crop].to_vec(), 44100)?;
            let target = AudioBuffer::mono(side.channel(0)[start..start + crop].to_vec(), 44100)?;
            let mel = log_mel(&mid_crop, &frontend.stft, &frontend.mel)?.truncated(crop / hop);
            Ok(TrainPair {
                input: PairInput::Mel(mel),
                target,
            })
        }
    }
}

/// Adam with bias correction; state keyed by parameter name.
pub struct Adam<T: Scalar> {
    lr: T,
    beta1: T,
    beta2: T,
    eps: T,
    t: i32,
    m: BTreeMap<String, Vec<T>>,
    v: BTreeMap<String, Vec<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(lr: f64, beta1: f64, beta2: f64) -> Self {
        Adam {
            lr: T::of_f64(lr),
            beta1: T::of_f64(beta1),
            beta2: T::of_f64(beta2),
            eps: T::of_f64(1e-8),
            t: 0,
            m: BTreeMap::new(),
            v: BTreeMap::new(),
        }
    }

    pub fn step(&mut self, params: &ParamSet<T>, grads: &Gradients<T>) {
        self.t += 1;
        let bc1 = T::one() - self.beta1.powi(self.t);
        let bc2 = T::one() - self.beta2.powi(self.t);
        for (name, p) in params.iter() {
            let Some(g) = grads.get(name) else { continue };
            let g = g.data();
            let m = self
                .m
                .entry(name.to_string())
                .or_insert_with(|| vec![T::zero(); g.len()]);
            let v = self
                .v
                .entry(name.to_string())
                .or_insert_with(|| vec![T::zero(); g.len()]);
            let mut values = p.to_vec();
            for i in 0..g.len() {
                m[i] = self.beta1 * m[i] + (T::one() - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (T::one() - self.beta2) * g[i] * g[i];
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                values[i] = values[i] - self.lr * mhat / (vhat.sqrt() + self.eps);
            }
            p.set_data(&values);
        }
    }
}

/// One JSONL record per training step.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub adv_g: f64,
    pub fm: f64,
    pub rc: f64,
    pub total_g: f64,
    pub adv_d: f64,
    pub subs: Vec<SubLoss>,
}

/// Result summary of a training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub steps_run: usize,
    pub best_step: usize,
    pub best_validation: f64,
    pub first_report: LossReport,
    pub last_report: LossReport,
    pub log_path: PathBuf,
    pub best_checkpoint: PathBuf,
    pub final_checkpoint: PathBuf,
}

fn wave_tensor(buffer: &AudioBuffer) -> Result<Tensor<f32>> {
    Tensor::from_f64_slice(buffer.channel(0), &[buffer.len()])
}

fn mel_tensor(mel: &MelSpec) -> Result<Tensor<f32>> {
    Tensor::from_f64_slice(mel.values(), &[mel.n_mels(), mel.frames()])
}

/// Generator forward for one pair, including the BWE sinc residual.
fn stage_fake(
    gen: &Generator<f32>,
    frontend: &StageFrontend,
    pair: &TrainPair,
) -> Result<Tensor<f32>> {
    match &pair.input {
        PairInput::Mel(mel) => gen.forward(&mel_tensor(mel)?),
        PairInput::Wave(low) => {
            let hop = frontend.stft.hop_size;
            let mel = log_mel(low, &frontend.stft, &frontend.mel)?.truncated(low.len() / hop);
            let out = gen.forward(&mel_tensor(&mel)?)?;
            let residual = sinc_resample(low, ResampleFactor::Up2, DEFAULT_TAPS)?;
            out.add(&wave_tensor(&residual)?)
        }
    }
}

fn tensor_wave(t: &Tensor<f32>, sample_rate: u32) -> Result<AudioBuffer> {
    AudioBuffer::mono(t.to_f64_vec(), sample_rate)
}

/// Validation distance: multi-resolution STFT distance between the target
/// and the generated waveform (lower is better).
fn validation_distance(
    gen: &Generator<f32>,
    frontend: &StageFrontend,
    pair: &TrainPair,
) -> Result<f64> {
    let fake = stage_fake(gen, frontend, pair)?;
    let wave = tensor_wave(&fake, frontend.output_sample_rate)?;
    stft_distance(&pair.target, &wave)
}

/// Alternating GAN training. Writes `train_log.jsonl`, periodic
/// `step_NNNNNN.ckpt` checkpoints, a final checkpoint, and a `best` marker
/// naming the minimum-validation checkpoint (earliest step wins ties).
pub fn train(
    stage: StageKind,
    dataset: &[AudioBuffer],
    spec: &TrainSpec,
    out_dir: impl AsRef<Path>,
) -> Result<TrainOutcome> {
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let cfg = &spec.train;
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::Data("empty training dataset".into()));
    }
    let frontend = StageFrontend::for_stage(stage);
    frontend.validate_generator(&spec.generator)?;
    let prep = StagePrep {
        stage,
        crop_length: cfg.crop_length,
    };

    let gen = build_generator::<f32>(&spec.generator, cfg.seed)?;
    let disc = build_discriminator::<f32>(&spec.discriminator, cfg.seed.wrapping_add(1))?;
    let mut adam_g = Adam::<f32>::new(cfg.lr, cfg.beta1, cfg.beta2);
    let mut adam_d = Adam::<f32>::new(cfg.d_lr.unwrap_or(cfg.lr), cfg.beta1, cfg.beta2);
    let mel_ctx = MelLossContext::<f32>::new(&spec.rc_configs(frontend.output_sample_rate))?;
    let weights = cfg.weights();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    // Fixed validation pair: last clip, deterministic crop.
    let val_pair = {
        let mut val_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x5EED));
        make_pair(&prep, dataset.last().unwrap(), &mut val_rng)?
    };

    let log_path = out_dir.join("train_log.jsonl");
    let mut log = fs::File::create(&log_path).map_err(|e| Error::io(&log_path, e))?;

    let mut best: Option<(f64, usize, PathBuf)> = None;
    let mut first_report: Option<LossReport> = None;
    let mut last_report: Option<LossReport> = None;

    for step in 1..=cfg.steps {
        let pairs: Vec<TrainPair> = (0..cfg.batch_size)
            .map(|_| {
                let idx = rng.gen_range(0..dataset.len());
                make_pair(&prep, &dataset[idx], &mut rng)
            })
            .collect::<Result<Vec<_>>>()?;

        // Discriminator step: fakes detached, generator untouched.
        let gen_digest_before = gen.params().digest();
        let mut d_total: Option<Tensor<f32>> = None;
        let mut d_subs: Vec<Vec<SubLoss>> = Vec::with_capacity(pairs.len());
        for pair in &pairs {
            let fake = stage_fake(&gen, &frontend, pair)?.detach();
            let target = wave_tensor(&pair.target)?;
            let (loss, subs) = discriminator_objective(&disc, &target, &fake)?;
            d_subs.push(subs);
            d_total = Some(match d_total {
                None => loss,
                Some(prev) => prev.add(&loss)?,
            });
        }
        let d_total = d_total.unwrap().mul_scalar(1.0 / cfg.batch_size as f32);
        let adv_d = d_total.item() as f64;
        let d_grads = backward(&d_total)?;
        drop(d_total);
        adam_d.step(disc.params(), &d_grads);
        debug_assert_eq!(
            gen.params().digest(),
            gen_digest_before,
            "D step must not touch generator parameters"
        );

        // Generator step.
        let disc_digest_before = disc.params().digest();
        let mut g_total: Option<Tensor<f32>> = None;
        let mut g_reports: Vec<LossReport> = Vec::with_capacity(pairs.len());
        for pair in &pairs {
            let fake = stage_fake(&gen, &frontend, pair)?;
            let target = wave_tensor(&pair.target)?;
            let GeneratorLosses { total, report } =
                objective_from_fake(&disc, &target, &fake, &mel_ctx, &weights)?;
            g_reports.push(report);
            g_total = Some(match g_total {
                None => total,
                Some(prev) => prev.add(&total)?,
            });
        }
        let g_total = g_total.unwrap().mul_scalar(1.0 / cfg.batch_size as f32);
        let total_value = g_total.item() as f64;
        if !total_value.is_finite() {
            return Err(Error::Diverged(format!(
                "total_g = {total_value} at step {step}"
            )));
        }
        let g_grads = backward(&g_total)?;
        drop(g_total);
        adam_g.step(gen.params(), &g_grads);
        debug_assert_eq!(
            disc.params().digest(),
            disc_digest_before,
            "G step must not touch discriminator parameters"
        );

        // Averaged report for the log.
        let nb = pairs.len() as f64;
        let mut report = LossReport {
            adv_g: g_reports.iter().map(|r| r.adv_g).sum::<f64>() / nb,
            fm: g_reports.iter().map(|r| r.fm).sum::<f64>() / nb,
            rc: g_reports.iter().map(|r| r.rc).sum::<f64>() / nb,
            total_g: g_reports.iter().map(|r| r.total_g).sum::<f64>() / nb,
            adv_d,
            subs: g_reports[0].subs.clone(),
        };
        for (subs, d) in report.subs.iter_mut().zip(&d_subs[0]) {
            subs.adv_d_real = d.adv_d_real;
            subs.adv_d_fake = d.adv_d_fake;
        }
        let record = StepRecord {
            step,
            adv_g: report.adv_g,
            fm: report.fm,
            rc: report.rc,
            total_g: report.total_g,
            adv_d: report.adv_d,
            subs: report.subs.clone(),
        };
        let line = serde_json::to_string(&record)
            .map_err(|e| Error::Contract(format!("log serialization: {e}")))?;
        writeln!(log, "{line}").map_err(|e| Error::io(&log_path, e))?;

        if first_report.is_none() {
            first_report = Some(report.clone());
        }
        last_report = Some(report);

        if step % cfg.validation_every == 0 || step == cfg.steps {
            let dist = validation_distance(&gen, &frontend, &val_pair)?;
            let ckpt = out_dir.join(format!("step_{step:06}.ckpt"));
            save_generator(&gen, &frontend, &ckpt)?;
            // Strict less-than: earliest step wins ties.
            if best.as_ref().is_none_or(|(b, _, _)| dist < *b) {
                best = Some((dist, step, ckpt));
            }
        }
    }

    let (best_validation, best_step, best_checkpoint) = best.expect("at least one validation");
    let final_checkpoint = out_dir.join("final.ckpt");
    save_generator(&gen, &frontend, &final_checkpoint)?;
    let marker = out_dir.join("best");
    fs::write(
        &marker,
        format!(
            "{}\nstep {best_step}\nstft_distance {best_validation}\n",
            best_checkpoint.file_name().unwrap().to_string_lossy()
        ),
    )
    .map_err(|e| Error::io(&marker, e))?;

    Ok(TrainOutcome {
        steps_run: cfg.steps,
        best_step,
        best_validation,
        first_report: first_report.expect("at least one step"),
        last_report: last_report.expect("at least one step"),
        log_path,
        best_checkpoint,
        final_checkpoint,
    })
}

/// Deterministic stereo test clip: different sine mixes per channel plus
/// seeded noise, long enough for every stage prep.
pub fn synthetic_clip(len: usize, seed: u64) -> AudioBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sr = 44100.0;
    let mk = |freqs: &[(f64, f64)], rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..len)
            .map(|n| {
                let t = n as f64 / sr;
                let mut v: f64 = freqs
                    .iter()
                    .map(|&(f, a)| a * (2.0 * std::f64::consts::PI * f * t).sin())
                    .sum();
                v += rng.gen_range(-0.05..0.05);
                crate::audio::quantize_sample(v)
            })
            .collect()
    };
    let left = mk(
        &[(220.0, 0.35), (997.0, 0.25), (3500.0, 0.15), (9000.0, 0.08)],
        &mut rng,
    );
    let right = mk(
        &[
            (330.0, 0.35),
            (1490.0, 0.25),
            (5200.0, 0.15),
            (12000.0, 0.08),
        ],
        &mut rng,
    );
    AudioBuffer::stereo(left, right, 44100).expect("valid clip")
}
