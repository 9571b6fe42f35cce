//! Acceptance suite: one test per criterion, each printing a PASS line.
//! Run with `cargo test --test acceptance -- --nocapture`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use musichifi::audio::{
    apply_width, downmix, mid_side_decode, mid_side_encode, quantize_sample, AudioBuffer,
    WidthControl,
};
use musichifi::cascade::StageModel;
use musichifi::metrics::{
    band_split_scores, dsp_benchmark_rtf, mel_distance, si_sdr, stft_distance, SI_SDR_CAP_DB,
};
use musichifi::nets::{
    build_discriminator, build_generator, save_generator, DiscriminatorConfig, GeneratorConfig,
    StageFrontend, StageKind,
};
use musichifi::objectives::{
    adv_loss_d, adv_loss_g, feature_matching_loss, objective_from_fake, reconstruction_loss,
    LossWeights, MelLossContext,
};
use musichifi::resample::{sinc_resample, ResampleFactor, DEFAULT_TAPS};
use musichifi::spectral::{MelConfig, StftConfig};
use musichifi::tensor::gradcheck::{check_case, standard_op_suite};
use musichifi::tensor::{backward, Scalar, Tensor};
use musichifi::test_support::{audio_grid_buffer, audio_grid_stereo};
use musichifi::trainer::{train, TrainConfig, TrainSpec};

// --- shared fixtures ------------------------------------------------------

/// Stereo clip of three sines plus noise per channel, on the sample grid.
/// The left channel carries a component above 11.025 kHz so the BWE gate
/// has real high-band content to reconstruct.
fn three_sine_clip(len: usize, seed: u64) -> AudioBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sr = 44100.0;
    let mut mk = |f: [f64; 3]| -> Vec<f64> {
        let noise: Vec<f64> = (0..len).map(|_| rng.gen_range(-0.05..0.05)).collect();
        (0..len)
            .map(|n| {
                let t = n as f64 / sr;
                let v = 0.35 * (2.0 * std::f64::consts::PI * f[0] * t).sin()
                    + 0.25 * (2.0 * std::f64::consts::PI * f[1] * t).sin()
                    + 0.15 * (2.0 * std::f64::consts::PI * f[2] * t).sin()
                    + noise[n];
                quantize_sample(v)
            })
            .collect()
    };
    let left = mk([220.0, 997.0, 13297.0]);
    let right = mk([330.0, 1490.0, 9801.0]);
    AudioBuffer::stereo(left, right, 44100).expect("valid clip")
}

fn small_generator(stage: StageKind, seed: u64) -> StageModel {
    let cfg = GeneratorConfig {
        mel_bands: 128,
        base_channels: 8,
        upsample_rates: vec![8, 8, 4],
        amp_kernel_sizes: vec![3],
        amp_dilations: vec![vec![1]],
        use_antialiased_activation: false,
        output_tanh: true,
    };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.ckpt");
    let gen = build_generator::<f32>(&cfg, seed).unwrap();
    save_generator(&gen, &StageFrontend::for_stage(stage), &path).unwrap();
    StageModel::load(&path, stage).unwrap()
}

// --- criterion 1 ----------------------------------------------------------

#[test]
fn acceptance_01_mid_side_algebra() {
    let start = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xA1);
    for i in 0..1000 {
        let len = 64 + (i % 64) * 16;
        let st = audio_grid_stereo(&mut rng, len, 44100);
        let (m, s) = mid_side_encode(&st).unwrap();
        // Formulas: M=(L+R)/2, S=(L-R)/2; inverse L=M+S, R=M-S.
        for n in (0..len).step_by(17) {
            assert_eq!(m.channel(0)[n], (st.channel(0)[n] + st.channel(1)[n]) / 2.0);
            assert_eq!(s.channel(0)[n], (st.channel(0)[n] - st.channel(1)[n]) / 2.0);
        }
        let back = mid_side_decode(&m, &s).unwrap();
        assert_eq!(back.channel(0), st.channel(0), "buffer {i}");
        assert_eq!(back.channel(1), st.channel(1), "buffer {i}");
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    println!("ACCEPTANCE 1 (mid-side algebra, 1000 buffers, {elapsed:?}): PASS");
}

// --- criterion 2 ----------------------------------------------------------

#[test]
fn acceptance_02_downmix_compatibility() {
    let model = small_generator(StageKind::M2s, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(0xA2);
    for trial in 0..4 {
        let mono = audio_grid_buffer(&mut rng, 8192, 44100);
        for gamma in [-18.0, -12.0, -6.0, 0.0] {
            let out = model.mono_to_stereo(&mono, gamma).unwrap();
            let back = downmix(&out.stereo).unwrap();
            assert_eq!(
                back.channel(0),
                mono.channel(0),
                "trial {trial} gamma {gamma}: double-precision downmix must be bit-exact"
            );
            // Single-precision pipeline: max abs error <= 1e-6.
            let mut max_err: f64 = 0.0;
            let (m, s) = mid_side_encode(&out.stereo).unwrap();
            let _ = m;
            for n in 0..mono.len() {
                let mf = mono.channel(0)[n] as f32;
                let sf = s.channel(0)[n] as f32;
                let l = mf + sf;
                let r = mf - sf;
                let back32 = (l + r) / 2.0;
                max_err = max_err.max((back32 as f64 - mono.channel(0)[n]).abs());
            }
            assert!(max_err <= 1e-6, "f32 path err {max_err}");
        }
    }
    println!("ACCEPTANCE 2 (downmix compatibility over gamma grid): PASS");
}

// --- criterion 3 ----------------------------------------------------------

#[test]
fn acceptance_03_width_calibration() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xA3);
    let mid = audio_grid_buffer(&mut rng, 16384, 44100);
    let side = audio_grid_buffer(&mut rng, 16384, 44100);
    let mut last = -1.0f64;
    for gamma in [-18.0, -12.0, -6.0, 0.0] {
        let out = apply_width(&mid, &side, WidthControl::new(gamma)).unwrap();
        let ratio = out.side.rms() / mid.rms();
        let expect = 10f64.powf(gamma / 20.0);
        let rel = (ratio - expect).abs() / expect;
        assert!(
            rel <= 1e-6,
            "gamma {gamma}: ratio {ratio} vs {expect} (rel {rel})"
        );
        assert!(
            out.side.rms() > last,
            "rms not strictly increasing at {gamma}"
        );
        last = out.side.rms();
    }
    println!("ACCEPTANCE 3 (width calibration 10^(gamma/20) and monotonicity): PASS");
}

// --- criterion 4 ----------------------------------------------------------

/// FFT-domain 2x upsampling oracle (zero-pad the spectrum).
fn fft_up2_oracle(x: &[f64]) -> Vec<f64> {
    use rustfft::{num_complex::Complex, FftPlanner};
    let n = x.len();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let mut spec: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fwd.process(&mut spec);
    let mut padded = vec![Complex::new(0.0, 0.0); 2 * n];
    let half = n / 2;
    for k in 0..half {
        padded[k] = spec[k];
    }
    padded[half] = spec[half] * 0.5;
    padded[2 * n - half] = spec[half] * 0.5;
    for k in (half + 1)..n {
        padded[n + k] = spec[k];
    }
    planner.plan_fft_inverse(2 * n).process(&mut padded);
    padded.iter().map(|c| 2.0 * c.re / (2 * n) as f64).collect()
}

#[test]
fn acceptance_04_bwe_residual_identity_and_sinc_oracle() {
    // Zero-weight generator: bwe output equals the sinc upsample exactly.
    let model = small_generator(StageKind::Bwe, 4);
    model.generator.fill_params("post.conv", 0.0);
    let clip = three_sine_clip(16384, 0xA4);
    let low = sinc_resample(
        &downmix(&clip).unwrap(),
        ResampleFactor::Down2,
        DEFAULT_TAPS,
    )
    .unwrap();
    let out = model.bandwidth_extend(&low).unwrap();
    let oracle = sinc_resample(&low, ResampleFactor::Up2, DEFAULT_TAPS).unwrap();
    assert_eq!(out.channel(0), oracle.channel(0), "residual identity");

    // Sinc resampler vs FFT-domain oracle on band-limited signals.
    let n = 4096;
    let mut best_margin: f64 = 0.0;
    for &cycles in &[41.0f64, 93.0, 171.0, 333.0] {
        let x: Vec<f64> = (0..n)
            .map(|i| {
                quantize_sample(
                    0.7 * (2.0 * std::f64::consts::PI * cycles * i as f64 / n as f64).sin(),
                )
            })
            .collect();
        let buf = AudioBuffer::mono(x.clone(), 22050).unwrap();
        let up = sinc_resample(&buf, ResampleFactor::Up2, 255).unwrap();
        let oracle = fft_up2_oracle(&x);
        let margin = 300;
        let mut max_err: f64 = 0.0;
        for i in margin..(2 * n - margin) {
            max_err = max_err.max((up.channel(0)[i] - oracle[i]).abs());
        }
        assert!(max_err <= 1e-3, "cycles {cycles}: interior err {max_err}");
        best_margin = best_margin.max(max_err);
    }
    println!(
        "ACCEPTANCE 4 (BWE residual identity exact; sinc vs FFT oracle, worst interior err {best_margin:.2e}): PASS"
    );
}

// --- criterion 5 ----------------------------------------------------------

/// FD check of d(sum of score means)/d(wave) through the full discriminator
/// ensemble at precision T against a double-precision forward oracle.
fn disc_path_gradcheck<T: Scalar>(draws: usize, tol: f64, seed: u64) -> f64 {
    let cfg = DiscriminatorConfig {
        periods: vec![2, 3],
        mpd_channels: vec![2, 4],
        mmsd_windows: vec![16, 8],
        mmsd_band_fractions: vec![0.0, 0.5, 1.0],
        mmsd_channels: 2,
    };
    let loss_f64 = |values: &[f64], seed: u64| -> f64 {
        let d = build_discriminator::<f64>(&cfg, seed).unwrap();
        let wave = Tensor::<f64>::from_vec(values.to_vec(), &[values.len()]).unwrap();
        let outs = d.forward(&wave).unwrap();
        let mut total: Option<Tensor<f64>> = None;
        for o in outs {
            let l = o.score.mean();
            total = Some(match total {
                None => l,
                Some(prev) => prev.add(&l).unwrap(),
            });
        }
        total.unwrap().item()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for draw in 0..draws {
        let net_seed = seed.wrapping_add(draw as u64);
        let n = 48;
        let values: Vec<f64> = (0..n)
            .map(|_| (rng.gen_range(-0.9..0.9) as f32) as f64)
            .collect();
        // Analytic gradient at precision T.
        let d = build_discriminator::<T>(&cfg, net_seed).unwrap();
        let wave = Tensor::<T>::param("wave", values.iter().map(|&v| T::of_f64(v)).collect(), &[n])
            .unwrap();
        let outs = d.forward(&wave).unwrap();
        let mut total: Option<Tensor<T>> = None;
        for o in outs {
            let l = o.score.mean();
            total = Some(match total {
                None => l,
                Some(prev) => prev.add(&l).unwrap(),
            });
        }
        let grads = backward(&total.unwrap()).unwrap();
        let analytic = grads["wave"].to_f64_vec();
        for j in 0..n {
            let h = 1e-5 * values[j].abs().max(1.0);
            let mut plus = values.clone();
            plus[j] += h;
            let mut minus = values.clone();
            minus[j] -= h;
            let fd = (loss_f64(&plus, net_seed) - loss_f64(&minus, net_seed)) / (2.0 * h);
            let err = (analytic[j] - fd).abs() / fd.abs().max(1.0);
            worst = worst.max(err);
        }
    }
    assert!(worst <= tol, "{}: worst rel err {worst}", T::NAME);
    worst
}

#[test]
fn acceptance_05_gradient_correctness() {
    let start = std::time::Instant::now();
    for case in standard_op_suite() {
        let worst = check_case::<f64>(&case, 50, 0xA5);
        assert!(worst <= 1e-6, "{} (f64): worst rel err {worst}", case.name);
        let worst = check_case::<f32>(&case, 50, 0x5A);
        assert!(worst <= 1e-4, "{} (f32): worst rel err {worst}", case.name);
    }
    let w64 = disc_path_gradcheck::<f64>(50, 1e-6, 0xD15C);
    let w32 = disc_path_gradcheck::<f32>(50, 1e-4, 0xD15C + 1);
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 300.0, "took {elapsed:?}");
    println!(
        "ACCEPTANCE 5 (gradient checks: {} ops x 50 draws x 2 precisions; discriminator paths worst {w64:.2e}/{w32:.2e}; {elapsed:?}): PASS",
        standard_op_suite().len()
    );
}

// --- criterion 6 ----------------------------------------------------------

#[test]
fn acceptance_06_objective_composition() {
    let weights = LossWeights::default();
    assert_eq!(weights.lambda_fm, 1.0);
    assert_eq!(weights.lambda_rc, 360.0);

    // Decomposition identity on random batches through real nets.
    let gen_cfg = GeneratorConfig {
        mel_bands: 16,
        base_channels: 8,
        upsample_rates: vec![4, 4],
        amp_kernel_sizes: vec![3],
        amp_dilations: vec![vec![1]],
        use_antialiased_activation: false,
        output_tanh: true,
    };
    let disc_cfg = DiscriminatorConfig {
        periods: vec![2, 3],
        mpd_channels: vec![2, 4],
        mmsd_windows: vec![64],
        mmsd_band_fractions: vec![0.0, 0.5, 1.0],
        mmsd_channels: 2,
    };
    let rc_configs = vec![
        (StftConfig::new(64, 16), MelConfig::new(8, 22050)),
        (StftConfig::new(32, 8), MelConfig::new(4, 22050)),
    ];
    let mel_ctx = MelLossContext::<f32>::new(&rc_configs).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0xA6);
    for trial in 0..5 {
        let gen = build_generator::<f32>(&gen_cfg, trial).unwrap();
        let disc = build_discriminator::<f32>(&disc_cfg, trial + 100).unwrap();
        let frames = 16;
        let mel: Vec<f32> = (0..16 * frames).map(|_| rng.gen_range(-3.0..1.0)).collect();
        let mel = Tensor::from_vec(mel, &[16, frames]).unwrap();
        let target: Vec<f32> = (0..frames * 16).map(|_| rng.gen_range(-0.8..0.8)).collect();
        let target = Tensor::from_vec(target, &[frames * 16]).unwrap();
        let fake = gen.forward(&mel).unwrap();
        let losses = objective_from_fake(&disc, &target, &fake, &mel_ctx, &weights).unwrap();
        let residual = losses.report.decomposition_residual(&weights);
        assert!(residual <= 1e-6, "trial {trial}: residual {residual}");
        assert!(losses.report.adv_g >= 0.0 && losses.report.fm >= 0.0 && losses.report.rc >= 0.0);
    }

    // Loss identities: zero at matched inputs, closed forms at known offsets.
    let ones = Tensor::<f64>::from_vec(vec![1.0; 12], &[12]).unwrap();
    let zeros = Tensor::<f64>::zeros(&[12]);
    assert_eq!(
        adv_loss_g(&[ones.clone(), ones.clone()]).unwrap().item(),
        0.0
    );
    assert_eq!(
        adv_loss_g(&[zeros.clone(), zeros.clone(), zeros.clone()])
            .unwrap()
            .item(),
        3.0
    );
    assert_eq!(
        adv_loss_d(&[ones.clone()], &[zeros.clone()])
            .unwrap()
            .item(),
        0.0
    );
    assert_eq!(
        adv_loss_d(
            &[zeros.clone(), zeros.clone()],
            &[ones.clone(), ones.clone()]
        )
        .unwrap()
        .item(),
        4.0
    );
    let feats = vec![vec![ones.clone(), zeros.clone()]];
    assert_eq!(feature_matching_loss(&feats, &feats).unwrap().item(), 0.0);
    let offset: Vec<Vec<Tensor<f64>>> = vec![vec![
        ones.add_scalar(0.5).detach(),
        zeros.add_scalar(0.5).detach(),
    ]];
    assert_eq!(feature_matching_loss(&feats, &offset).unwrap().item(), 1.0);
    let mut rng2 = ChaCha8Rng::seed_from_u64(0x66);
    let sig: Vec<f64> = (0..1024).map(|_| rng2.gen_range(-0.8..0.8)).collect();
    let x = Tensor::from_vec(sig, &[1024]).unwrap();
    let cfgs = vec![(StftConfig::new(128, 32), MelConfig::new(16, 22050))];
    assert_eq!(reconstruction_loss(&x, &x, &cfgs).unwrap().item(), 0.0);
    println!("ACCEPTANCE 6 (Eq. 1 composition at lambda_fm=1, lambda_rc=360): PASS");
}

// --- criterion 7: toy overfit gates ---------------------------------------

fn overfit_spec(stage: StageKind, seed: u64) -> TrainSpec {
    let base = if stage == StageKind::Bwe { 24 } else { 32 };
    TrainSpec {
        train: TrainConfig {
            steps: 2000,
            batch_size: 1,
            seed,
            validation_every: 500,
            ..TrainConfig::default()
        },
        generator: GeneratorConfig::desk(128, base),
        discriminator: DiscriminatorConfig::default(),
        rc_resolutions: None,
    }
}

#[test]
fn acceptance_07a_vocoder_overfit() {
    let start = std::time::Instant::now();
    // Source sized so the 22.05 kHz mono is exactly one 16384-sample clip.
    let clip = three_sine_clip(32768, 0x7A);
    let dir = tempfile::tempdir().unwrap();
    let spec = overfit_spec(StageKind::Vocoder, 5);
    let outcome = train(StageKind::Vocoder, &[clip.clone()], &spec, dir.path()).unwrap();
    let ratio = outcome.last_report.rc / outcome.first_report.rc;
    assert!(
        ratio <= 0.1,
        "final L_rc {} vs initial {} (ratio {ratio})",
        outcome.last_report.rc,
        outcome.first_report.rc
    );

    // SI-SDR of the trained output against the target clip.
    use musichifi::trainer::{make_pair, PairInput, StagePrep};
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let pair = make_pair(&StagePrep::new(StageKind::Vocoder), &clip, &mut rng).unwrap();
    let model = StageModel::load(&outcome.final_checkpoint, StageKind::Vocoder).unwrap();
    let PairInput::Mel(mel) = &pair.input else {
        panic!()
    };
    let out = model.vocode(mel).unwrap();
    let si = si_sdr(&pair.target, &out).unwrap();
    assert!(si >= 5.0, "SI-SDR {si:.2} dB < 5 dB");
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1800.0, "took {elapsed:?}");
    println!(
        "ACCEPTANCE 7a (vocoder overfit: L_rc ratio {ratio:.4} <= 0.1, SI-SDR {si:.2} dB >= 5, {elapsed:?}): PASS"
    );
}

#[test]
fn acceptance_07b_bwe_overfit() {
    let start = std::time::Instant::now();
    let clip = three_sine_clip(16384, 0x7B);
    let dir = tempfile::tempdir().unwrap();
    let spec = overfit_spec(StageKind::Bwe, 5);
    let outcome = train(StageKind::Bwe, &[clip.clone()], &spec, dir.path()).unwrap();

    use musichifi::trainer::{make_pair, PairInput, StagePrep};
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let pair = make_pair(&StagePrep::new(StageKind::Bwe), &clip, &mut rng).unwrap();
    let PairInput::Wave(low) = &pair.input else {
        panic!()
    };
    let model = StageModel::load(&outcome.final_checkpoint, StageKind::Bwe).unwrap();
    let out = model.bandwidth_extend(low).unwrap();
    let baseline = sinc_resample(low, ResampleFactor::Up2, DEFAULT_TAPS).unwrap();
    let d_out = stft_distance(&pair.target, &out).unwrap();
    let d_base = stft_distance(&pair.target, &baseline).unwrap();
    assert!(
        d_out <= 0.5 * d_base,
        "STFT-D {d_out:.4} vs 0.5 x baseline {d_base:.4}"
    );
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1800.0, "took {elapsed:?}");
    println!(
        "ACCEPTANCE 7b (bwe overfit: STFT-D {d_out:.4} <= 0.5 x {d_base:.4}, {elapsed:?}): PASS"
    );
}

#[test]
fn acceptance_07c_m2s_overfit() {
    let start = std::time::Instant::now();
    let clip = three_sine_clip(16384, 0x7C);
    let dir = tempfile::tempdir().unwrap();
    let spec = overfit_spec(StageKind::M2s, 5);
    let outcome = train(StageKind::M2s, &[clip], &spec, dir.path()).unwrap();
    let ratio = outcome.last_report.rc / outcome.first_report.rc;
    assert!(
        ratio <= 0.5,
        "side L_rc decreased only to {ratio:.3} of initial"
    );
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1800.0, "took {elapsed:?}");
    println!("ACCEPTANCE 7c (m2s overfit: side L_rc ratio {ratio:.4} <= 0.5, {elapsed:?}): PASS");
}

// --- criterion 8 ----------------------------------------------------------

#[test]
fn acceptance_08_checkpoint_roundtrip() {
    let cfg = GeneratorConfig::desk(128, 16);
    let gen = build_generator::<f32>(&cfg, 8).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.ckpt");
    save_generator(&gen, &StageFrontend::vocoder(), &path).unwrap();
    let (loaded, _) = musichifi::nets::load_generator::<f32>(&path).unwrap();
    let mel = Tensor::from_vec(vec![0.1f32; 128 * 8], &[128, 8]).unwrap();
    let a = gen.forward(&mel).unwrap();
    let b = loaded.forward(&mel).unwrap();
    assert_eq!(a.to_vec(), b.to_vec(), "forward outputs must be bit-exact");
    println!("ACCEPTANCE 8 (checkpoint round trip bit-exact): PASS");
}

// --- criterion 9 ----------------------------------------------------------

#[test]
fn acceptance_09_metrics_sanity() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xA9);
    let x = audio_grid_buffer(&mut rng, 16384, 44100);
    assert_eq!(mel_distance(&x, &x).unwrap(), 0.0);
    assert_eq!(stft_distance(&x, &x).unwrap(), 0.0);
    assert_eq!(si_sdr(&x, &x).unwrap(), SI_SDR_CAP_DB);

    // Orthogonal noise at 10:1 amplitude: exactly 20 dB.
    let raw = audio_grid_buffer(&mut rng, 16384, 44100);
    let xx: f64 = x.channel(0).iter().map(|v| v * v).sum();
    let dot: f64 = x
        .channel(0)
        .iter()
        .zip(raw.channel(0))
        .map(|(a, b)| a * b)
        .sum();
    let mut ortho: Vec<f64> = raw
        .channel(0)
        .iter()
        .zip(x.channel(0))
        .map(|(r, a)| r - dot / xx * a)
        .collect();
    let oo: f64 = ortho.iter().map(|v| v * v).sum();
    let scale = (xx / 100.0 / oo).sqrt();
    for v in ortho.iter_mut() {
        *v *= scale;
    }
    let est: Vec<f64> = x
        .channel(0)
        .iter()
        .zip(&ortho)
        .map(|(a, b)| a + b)
        .collect();
    let si = si_sdr(&x, &AudioBuffer::mono(est, 44100).unwrap()).unwrap();
    assert!(
        (si - 20.0).abs() <= 0.01,
        "SI-SDR {si} dB vs closed-form 20 dB"
    );

    // Band-split isolates a synthetic high-band corruption (the FFT-domain
    // band-replacement construction of criterion 4's oracle family).
    use rustfft::{num_complex::Complex, FftPlanner};
    let n = 16384;
    let corrupt = audio_grid_buffer(&mut rng, n, 44100);
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n);
    let mut sx: Vec<Complex<f64>> = x.channel(0).iter().map(|&v| Complex::new(v, 0.0)).collect();
    let mut sc: Vec<Complex<f64>> = corrupt
        .channel(0)
        .iter()
        .map(|&v| Complex::new(v, 0.0))
        .collect();
    fft.process(&mut sx);
    fft.process(&mut sc);
    let split_bin = (11025.0 / 44100.0 * n as f64) as usize;
    for k in split_bin..=(n - split_bin) {
        sx[k] = sc[k];
    }
    planner.plan_fft_inverse(n).process(&mut sx);
    let est: Vec<f64> = sx.iter().map(|c| c.re / n as f64).collect();
    let est = AudioBuffer::mono(est, 44100).unwrap();
    let scores = band_split_scores(&x, &est, 11025.0).unwrap();
    assert!(
        scores.low.stft_d < 0.1 * scores.high.stft_d,
        "low {:?} vs high {:?}",
        scores.low,
        scores.high
    );
    let same = band_split_scores(&x, &x, 11025.0).unwrap();
    assert_eq!(same.low.mel_d, 0.0);
    assert_eq!(same.high.stft_d, 0.0);
    println!("ACCEPTANCE 9 (metrics sanity: zeros, +100 dB cap, 20 dB closed form {si:.3}, band isolation): PASS");
}

// --- criterion 10 ---------------------------------------------------------

#[test]
fn acceptance_10_determinism() {
    let clip = three_sine_clip(20000, 0x10);
    let spec = TrainSpec {
        train: TrainConfig {
            steps: 3,
            batch_size: 1,
            seed: 7,
            validation_every: 1,
            crop_length: 4096,
            ..TrainConfig::default()
        },
        generator: GeneratorConfig {
            mel_bands: 128,
            base_channels: 8,
            upsample_rates: vec![8, 8, 4],
            amp_kernel_sizes: vec![3],
            amp_dilations: vec![vec![1]],
            use_antialiased_activation: false,
            output_tanh: true,
        },
        discriminator: DiscriminatorConfig {
            periods: vec![2, 3],
            mpd_channels: vec![2, 4],
            mmsd_windows: vec![512],
            mmsd_band_fractions: vec![0.0, 0.5, 1.0],
            mmsd_channels: 2,
        },
        rc_resolutions: None,
    };
    let run = |dir: &std::path::Path| -> (String, Vec<u8>) {
        let outcome = train(StageKind::Vocoder, &[clip.clone()], &spec, dir).unwrap();
        (
            std::fs::read_to_string(&outcome.log_path).unwrap(),
            std::fs::read(&outcome.final_checkpoint).unwrap(),
        )
    };
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    let (log1, ckpt1) = run(d1.path());
    let (log2, ckpt2) = run(d2.path());
    assert_eq!(log1, log2, "logs must be bit-identical under seed 7");
    assert_eq!(
        ckpt1, ckpt2,
        "checkpoints must be bit-identical under seed 7"
    );
    println!("ACCEPTANCE 10 (determinism: bit-identical logs and checkpoints at seed 7): PASS");
}

// --- criterion 11 ---------------------------------------------------------

#[test]
fn acceptance_11_dsp_rtf() {
    let rtf = dsp_benchmark_rtf(30.0).unwrap();
    assert!(rtf >= 1.0, "DSP-only RTF {rtf:.2} < 1");
    println!("ACCEPTANCE 11 (DSP-only path RTF {rtf:.1} >= 1 on a 30 s clip): PASS");
}
