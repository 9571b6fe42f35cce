//! Temporary probe for overfit-gate tuning (not part of the deliverable).

use musichifi::audio::AudioBuffer;
use musichifi::nets::{DiscriminatorConfig, GeneratorConfig, StageKind};
use musichifi::trainer::{train, TrainConfig, TrainSpec};

fn three_sine_clip(len: usize, seed: u64) -> AudioBuffer {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let sr = 44100.0;
    let mk = |f: [f64; 3], rng: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> {
        (0..len)
            .map(|n| {
                let t = n as f64 / sr;
                let v = 0.35 * (2.0 * std::f64::consts::PI * f[0] * t).sin()
                    + 0.25 * (2.0 * std::f64::consts::PI * f[1] * t).sin()
                    + 0.15 * (2.0 * std::f64::consts::PI * f[2] * t).sin()
                    + rng.gen_range(-0.05..0.05);
                musichifi::audio::quantize_sample(v)
            })
            .collect()
    };
    // Frame-rate multiples (k * 22050/256 Hz) so the stationary part is
    // hop-periodic and conv-representable.
    let fr = 22050.0 / 256.0;
    let l = mk([3.0 * fr, 12.0 * fr, 154.0 * fr], &mut rng);
    let r = mk([4.0 * fr, 17.0 * fr, 113.0 * fr], &mut rng);
    AudioBuffer::stereo(l, r, 44100).unwrap()
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let steps: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(100);
    let stage = match args.get(2).map(|s| s.as_str()) {
        Some("bwe") => StageKind::Bwe,
        Some("m2s") => StageKind::M2s,
        _ => StageKind::Vocoder,
    };
    let clip_len = match stage {
        StageKind::Vocoder => 32768, // down2 gives exactly 16384: offset pinned 0
        _ => 16384,
    };
    let clip = three_sine_clip(clip_len, 42);
    let base = if stage == StageKind::Bwe { 24 } else { 32 };
    let lr: f64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(2e-4);
    let d_lr: Option<f64> = args.get(4).and_then(|s| s.parse().ok());
    let beta1: f64 = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(0.8);
    let mmsd_ch: usize = args.get(6).and_then(|s| s.parse().ok()).unwrap_or(4);
    let mut disc = DiscriminatorConfig::default();
    disc.mmsd_channels = mmsd_ch;
    if mmsd_ch > 4 {
        disc.mpd_channels = vec![8, 16, 32];
    }
    let spec = TrainSpec {
        train: TrainConfig {
            steps,
            batch_size: 1,
            seed: 5,
            lr,
            d_lr,
            beta1,
            validation_every: 500,
            ..TrainConfig::default()
        },
        generator: GeneratorConfig::desk(128, base),
        discriminator: disc,
        rc_resolutions: None,
    };
    let dir_tag = format!("{}_{}_{:?}_{}_{}", stage.name(), steps, d_lr, beta1, mmsd_ch);
    let _ = dir_tag;
    let dir = std::env::temp_dir().join(format!("probe_{}_{}_{:?}_{}_{}", stage.name(), steps, d_lr, beta1, mmsd_ch));
    let t0 = std::time::Instant::now();
    let outcome = train(stage, &[clip], &spec, &dir).unwrap();
    let dt = t0.elapsed().as_secs_f64();
    println!(
        "stage {} steps {} wall {:.1}s ({:.3}s/step)",
        stage.name(),
        steps,
        dt,
        dt / steps as f64
    );
    println!(
        "rc first {:.4} last {:.4} (ratio {:.3})",
        outcome.first_report.rc,
        outcome.last_report.rc,
        outcome.last_report.rc / outcome.first_report.rc
    );
    println!(
        "adv_g {:.4} fm {:.4} adv_d {:.4} total {:.2}",
        outcome.last_report.adv_g,
        outcome.last_report.fm,
        outcome.last_report.adv_d,
        outcome.last_report.total_g
    );
    // SI-SDR of the trained output vs the target on the training pair.
    use musichifi::cascade::StageModel;
    use musichifi::trainer::{make_pair, PairInput, StagePrep};
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5u64.wrapping_add(0x5EED));
    let clip2 = three_sine_clip(clip_len, 42);
    let pair = make_pair(&StagePrep::new(stage), &clip2, &mut rng).unwrap();
    let model = StageModel::load(&outcome.final_checkpoint, stage).unwrap();
    let out = match (&pair.input, stage) {
        (PairInput::Mel(mel), StageKind::Vocoder) => model.vocode(mel).unwrap(),
        (PairInput::Wave(low), StageKind::Bwe) => model.bandwidth_extend(low).unwrap(),
        (PairInput::Mel(_), StageKind::M2s) => {
            // side target; compare generated side directly
            let f = &model.frontend;
            let PairInput::Mel(mel) = &pair.input else {
                unreachable!()
            };
            let _ = f;
            model.vocode(mel).err().map(|_| ()).unwrap_or(());
            return;
        }
        _ => unreachable!(),
    };
    let si = musichifi::metrics::si_sdr(&pair.target, &out);
    println!("si_sdr {:?}", si);
    if stage == StageKind::Bwe {
        let up = musichifi::resample::sinc_resample(
            match &pair.input {
                PairInput::Wave(w) => w,
                _ => unreachable!(),
            },
            musichifi::resample::ResampleFactor::Up2,
            255,
        )
        .unwrap();
        let d_out = musichifi::metrics::stft_distance(&pair.target, &out).unwrap();
        let d_base = musichifi::metrics::stft_distance(&pair.target, &up).unwrap();
        println!(
            "bwe stft_d out {:.4} baseline {:.4} ratio {:.3}",
            d_out,
            d_base,
            d_out / d_base
        );
    }
}
