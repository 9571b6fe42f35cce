//! End-to-end tests of the `musichifi` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use musichifi::audio::AudioBuffer;
use musichifi::matrix_io::write_mel;
use musichifi::nets::{build_generator, save_generator, GeneratorConfig, StageFrontend, StageKind};
use musichifi::spectral::log_mel;
use musichifi::test_support::{audio_grid_stereo, sine_mix};
use musichifi::wav::{read_wav, write_wav, WavEncoding};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_musichifi"))
}

fn run_ok(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("binary runs");
    assert!(
        out.status.success(),
        "command {:?} failed: {}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn small_generator_cfg(base: usize) -> GeneratorConfig {
    GeneratorConfig {
        mel_bands: 128,
        base_channels: base,
        upsample_rates: vec![8, 8, 4],
        amp_kernel_sizes: vec![3],
        amp_dilations: vec![vec![1]],
        use_antialiased_activation: false,
        output_tanh: true,
    }
}

fn write_stage_ckpt(dir: &Path, stage: StageKind, seed: u64) -> PathBuf {
    let cfg = small_generator_cfg(8);
    let gen = build_generator::<f32>(&cfg, seed).unwrap();
    let path = dir.join(format!("{}.ckpt", stage.name()));
    save_generator(&gen, &StageFrontend::for_stage(stage), &path).unwrap();
    path
}

#[test]
fn encode_decode_roundtrip_via_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(1);
    let stereo = audio_grid_stereo(&mut rng, 2048, 44100);
    let input = dir.path().join("in.wav");
    write_wav(&stereo, &input, WavEncoding::Float32).unwrap();

    let mid = dir.path().join("mid.wav");
    let side = dir.path().join("side.wav");
    run_ok(&[
        "encode-ms",
        "--in",
        input.to_str().unwrap(),
        "--mid",
        mid.to_str().unwrap(),
        "--side",
        side.to_str().unwrap(),
    ]);
    let out = dir.path().join("back.wav");
    run_ok(&[
        "decode-ms",
        "--mid",
        mid.to_str().unwrap(),
        "--side",
        side.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    let back = read_wav(&out).unwrap();
    assert_eq!(back.channel(0), stereo.channel(0));
    assert_eq!(back.channel(1), stereo.channel(1));
}

#[test]
fn m2s_then_encode_recovers_original_mid() {
    // m2s --gamma-db 0, then encode-ms: the mid equals the original mono.
    let dir = tempfile::tempdir().unwrap();
    let ckpt = write_stage_ckpt(dir.path(), StageKind::M2s, 3);
    let mono = sine_mix(&[(440.0, 0.4), (1200.0, 0.2)], 8192, 44100);
    let input = dir.path().join("mono.wav");
    write_wav(&mono, &input, WavEncoding::Float32).unwrap();

    let stereo = dir.path().join("stereo.wav");
    run_ok(&[
        "m2s",
        "--in",
        input.to_str().unwrap(),
        "--ckpt",
        ckpt.to_str().unwrap(),
        "--gamma-db",
        "0",
        "--out",
        stereo.to_str().unwrap(),
    ]);
    let mid = dir.path().join("mid.wav");
    let side = dir.path().join("side.wav");
    run_ok(&[
        "encode-ms",
        "--in",
        stereo.to_str().unwrap(),
        "--mid",
        mid.to_str().unwrap(),
        "--side",
        side.to_str().unwrap(),
    ]);
    let recovered = read_wav(&mid).unwrap();
    assert_eq!(recovered.channel(0), mono.channel(0));
}

#[test]
fn cascade_from_mel_matrix_length_contract() {
    let dir = tempfile::tempdir().unwrap();
    let v = write_stage_ckpt(dir.path(), StageKind::Vocoder, 1);
    let b = write_stage_ckpt(dir.path(), StageKind::Bwe, 2);
    let m = write_stage_ckpt(dir.path(), StageKind::M2s, 3);

    // 64-frame mel matrix from a 16384-sample clip.
    let f = StageFrontend::vocoder();
    let x = sine_mix(&[(500.0, 0.5)], 16384, 22050);
    let mel = log_mel(&x, &f.stft, &f.mel).unwrap().truncated(64);
    let mel_path = dir.path().join("mel.mhmx");
    write_mel(&mel, &mel_path).unwrap();

    let out = dir.path().join("stereo.wav");
    run_ok(&[
        "cascade",
        "--mel",
        mel_path.to_str().unwrap(),
        "--vocoder",
        v.to_str().unwrap(),
        "--bwe",
        b.to_str().unwrap(),
        "--m2s",
        m.to_str().unwrap(),
        "--gamma-db",
        "-6",
        "--out",
        out.to_str().unwrap(),
    ]);
    let stereo = read_wav(&out).unwrap();
    assert_eq!(stereo.num_channels(), 2);
    assert_eq!(stereo.len(), 32768);
    assert_eq!(stereo.sample_rate(), 44100);
}

#[test]
fn resample_up2_doubles_length() {
    let dir = tempfile::tempdir().unwrap();
    let x = sine_mix(&[(1000.0, 0.5)], 3000, 22050);
    let input = dir.path().join("in.wav");
    write_wav(&x, &input, WavEncoding::Float32).unwrap();
    let out = dir.path().join("out.wav");
    run_ok(&[
        "resample",
        "--in",
        input.to_str().unwrap(),
        "--factor",
        "up2",
        "--out",
        out.to_str().unwrap(),
    ]);
    let y = read_wav(&out).unwrap();
    assert_eq!(y.len(), 6000);
    assert_eq!(y.sample_rate(), 44100);
}

#[test]
fn eval_identical_dirs_reports_zero() {
    let dir = tempfile::tempdir().unwrap();
    let refs = dir.path().join("ref");
    let ests = dir.path().join("est");
    std::fs::create_dir_all(&refs).unwrap();
    std::fs::create_dir_all(&ests).unwrap();
    for i in 0..2 {
        let x = sine_mix(&[(300.0 + 100.0 * i as f64, 0.5)], 8192, 22050);
        write_wav(&x, refs.join(format!("c{i}.wav")), WavEncoding::Float32).unwrap();
        write_wav(&x, ests.join(format!("c{i}.wav")), WavEncoding::Float32).unwrap();
    }
    let report = dir.path().join("report.jsonl");
    run_ok(&[
        "eval",
        "--ref",
        refs.to_str().unwrap(),
        "--est",
        ests.to_str().unwrap(),
        "--report",
        report.to_str().unwrap(),
    ]);
    let text = std::fs::read_to_string(&report).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3); // 2 pairs + summary
    for line in &lines[..2] {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["mel_d"].as_f64().unwrap(), 0.0);
        assert_eq!(v["stft_d"].as_f64().unwrap(), 0.0);
        assert_eq!(v["si_sdr"].as_f64().unwrap(), 100.0);
    }
    let summary: serde_json::Value = serde_json::from_str(lines[2]).unwrap();
    assert!(summary["summary"]["dsp_rtf"].as_f64().unwrap() > 0.0);
}

#[test]
fn info_prints_config() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = write_stage_ckpt(dir.path(), StageKind::Vocoder, 5);
    let out = run_ok(&["info", "--ckpt", ckpt.to_str().unwrap()]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("kind: generator"));
    assert!(text.contains("stage: vocoder"));
    assert!(text.contains("upsample_rates [8, 8, 4]"));
    assert!(text.contains("parameters:"));
}

#[test]
fn train_seed_is_deterministic_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    std::fs::create_dir_all(&data).unwrap();
    let clip = musichifi::trainer::synthetic_clip(20000, 11);
    write_wav(&clip, data.join("clip.wav"), WavEncoding::Float32).unwrap();

    let config = dir.path().join("train.toml");
    std::fs::write(
        &config,
        r#"
[train]
steps = 2
batch_size = 1
lr = 2e-4
beta1 = 0.8
beta2 = 0.99
seed = 7
validation_every = 1
lambda_fm = 1.0
lambda_rc = 360.0
crop_length = 4096

[generator]
mel_bands = 128
base_channels = 8
upsample_rates = [8, 8, 4]
amp_kernel_sizes = [3]
amp_dilations = [[1]]
use_antialiased_activation = false
output_tanh = true

[discriminator]
periods = [2, 3]
mpd_channels = [2, 4]
mmsd_windows = [512]
mmsd_band_fractions = [0.0, 0.5, 1.0]
mmsd_channels = 2
"#,
    )
    .unwrap();

    let run_train = |out: &Path| {
        run_ok(&[
            "train",
            "--stage",
            "vocoder",
            "--data",
            data.to_str().unwrap(),
            "--config",
            config.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--seed",
            "7",
        ]);
        (
            std::fs::read_to_string(out.join("train_log.jsonl")).unwrap(),
            std::fs::read(out.join("final.ckpt")).unwrap(),
        )
    };
    let (log1, ckpt1) = run_train(&dir.path().join("run1"));
    let (log2, ckpt2) = run_train(&dir.path().join("run2"));
    assert_eq!(log1, log2, "training logs must be bit-identical");
    assert_eq!(ckpt1, ckpt2, "checkpoints must be bit-identical");
}

#[test]
fn usage_error_exits_1() {
    let out = bin().args(["frobnicate"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = bin().args(["m2s", "--nonsense"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn data_error_exits_2_and_names_file() {
    let out = bin()
        .args([
            "resample",
            "--in",
            "/nonexistent/x.wav",
            "--factor",
            "up2",
            "--out",
            "/tmp/y.wav",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("x.wav"));
}

#[test]
fn inputs_are_never_modified() {
    let dir = tempfile::tempdir().unwrap();
    let x = sine_mix(&[(700.0, 0.5)], 2000, 22050);
    let input = dir.path().join("in.wav");
    write_wav(&x, &input, WavEncoding::Float32).unwrap();
    let before = std::fs::read(&input).unwrap();
    let out = dir.path().join("out.wav");
    run_ok(&[
        "resample",
        "--in",
        input.to_str().unwrap(),
        "--factor",
        "down2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(std::fs::read(&input).unwrap(), before);
}
