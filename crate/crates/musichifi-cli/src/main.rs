//! Command-line surface for the cascade: per-stage inference, the full
//! pipeline, training, objective evaluation, and the mid/side + resampling
//! utilities.
//!
//! Exit codes: 0 success, 1 usage error, 2 data/format error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use musichifi::audio::{mid_side_decode, mid_side_encode, AudioBuffer};
use musichifi::cascade::{CascadeModels, StageModel};
use musichifi::error::Error;
use musichifi::matrix_io::read_mel;
use musichifi::metrics::{dsp_benchmark_rtf, evaluate_pair, EvalReport};
use musichifi::nets::{load_checkpoint_raw, StageFrontend, StageKind};
use musichifi::resample::{sinc_resample, ResampleFactor, DEFAULT_TAPS};
use musichifi::spectral::{log_mel, MelSpec};
use musichifi::trainer::{train, TrainSpec};
use musichifi::wav::{read_wav, write_wav, WavEncoding};

#[derive(Parser)]
#[command(
    name = "musichifi",
    about = "Mel vocoding, bandwidth extension, and downmix-compatible stereo upmixing",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum StageArg {
    Vocoder,
    Bwe,
    M2s,
}

impl From<StageArg> for StageKind {
    fn from(s: StageArg) -> StageKind {
        match s {
            StageArg::Vocoder => StageKind::Vocoder,
            StageArg::Bwe => StageKind::Bwe,
            StageArg::M2s => StageKind::M2s,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FactorArg {
    Up2,
    Down2,
}

#[derive(Args)]
struct MelInput {
    /// Mel spectrogram as an MHMX1 matrix file.
    #[arg(long, conflicts_with = "from_wav")]
    mel: Option<PathBuf>,
    /// Compute the mel input from this mono WAV instead.
    #[arg(long)]
    from_wav: Option<PathBuf>,
}

impl MelInput {
    fn load(&self, frontend: &StageFrontend) -> Result<MelSpec, Error> {
        match (&self.mel, &self.from_wav) {
            (Some(path), None) => read_mel(path, frontend.stft, frontend.mel),
            (None, Some(path)) => {
                let wav = read_wav(path)?;
                if wav.num_channels() != 1 {
                    return Err(Error::Data(format!(
                        "{}: mel source must be mono, got {} channels",
                        path.display(),
                        wav.num_channels()
                    )));
                }
                log_mel(&wav, &frontend.stft, &frontend.mel)
            }
            _ => Err(Error::Data(
                "exactly one of --mel or --from-wav is required".into(),
            )),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Mel spectrogram -> mono 22.05 kHz WAV.
    Vocode {
        #[command(flatten)]
        mel: MelInput,
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mono 22.05 kHz WAV -> mono 44.1 kHz WAV (bandwidth extension).
    Bwe {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mono 44.1 kHz WAV -> stereo WAV (downmix-compatible upmix).
    M2s {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        ckpt: PathBuf,
        /// Side/mid energy ratio in dB (alpha = 10^(gamma/20)).
        #[arg(
            long = "gamma-db",
            default_value_t = 0.0,
            allow_negative_numbers = true
        )]
        gamma_db: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Full pipeline: mel -> stereo 44.1 kHz WAV.
    Cascade {
        #[command(flatten)]
        mel: MelInput,
        #[arg(long)]
        vocoder: PathBuf,
        #[arg(long)]
        bwe: PathBuf,
        #[arg(long)]
        m2s: PathBuf,
        #[arg(
            long = "gamma-db",
            default_value_t = 0.0,
            allow_negative_numbers = true
        )]
        gamma_db: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one stage on a directory of stereo 44.1 kHz WAV clips.
    Train {
        #[arg(long)]
        stage: StageArg,
        #[arg(long)]
        data: PathBuf,
        /// TOML file with [train], [generator], [discriminator] tables;
        /// desk-scale defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed from the config file.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Objective metrics over paired WAV directories (matched filenames).
    Eval {
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        est: PathBuf,
        #[arg(long)]
        report: PathBuf,
        /// Also report low/high band scores split at 11025 Hz.
        #[arg(long = "band-split")]
        band_split: bool,
    },
    /// Stereo WAV -> mid and side mono WAVs.
    EncodeMs {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        mid: PathBuf,
        #[arg(long)]
        side: PathBuf,
    },
    /// Mid and side mono WAVs -> stereo WAV.
    DecodeMs {
        #[arg(long)]
        mid: PathBuf,
        #[arg(long)]
        side: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// 2x sinc resampling of a mono WAV.
    Resample {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        factor: FactorArg,
        #[arg(long, default_value_t = DEFAULT_TAPS)]
        taps: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print a checkpoint's config block and parameter table.
    Info {
        #[arg(long)]
        ckpt: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version print to stdout with success status.
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn read_mono(path: &Path, what: &str) -> Result<AudioBuffer, Error> {
    let wav = read_wav(path)?;
    if wav.num_channels() != 1 {
        return Err(Error::Data(format!(
            "{}: {what} expects a mono WAV, got {} channels",
            path.display(),
            wav.num_channels()
        )));
    }
    Ok(wav)
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Vocode { mel, ckpt, out } => {
            let stage = StageModel::load(&ckpt, StageKind::Vocoder)?;
            let spec = mel.load(&stage.frontend)?;
            let wave = stage.vocode(&spec)?;
            write_wav(&wave, &out, WavEncoding::Float32)
        }
        Command::Bwe { input, ckpt, out } => {
            let stage = StageModel::load(&ckpt, StageKind::Bwe)?;
            let low = read_mono(&input, "bwe")?;
            let wave = stage.bandwidth_extend(&low)?;
            write_wav(&wave, &out, WavEncoding::Float32)
        }
        Command::M2s {
            input,
            ckpt,
            gamma_db,
            out,
        } => {
            let stage = StageModel::load(&ckpt, StageKind::M2s)?;
            let mono = read_mono(&input, "m2s")?;
            let result = stage.mono_to_stereo(&mono, gamma_db)?;
            if result.no_spatial_content {
                eprintln!(
                    "note: generated side is silent (no spatial content); output is dual mono"
                );
            }
            write_wav(&result.stereo, &out, WavEncoding::Float32)
        }
        Command::Cascade {
            mel,
            vocoder,
            bwe,
            m2s,
            gamma_db,
            out,
        } => {
            let models = CascadeModels::load(&vocoder, &bwe, &m2s)?;
            let spec = mel.load(&models.vocoder.frontend)?;
            let result = models.full_cascade(&spec, gamma_db)?;
            if result.no_spatial_content {
                eprintln!(
                    "note: generated side is silent (no spatial content); output is dual mono"
                );
            }
            write_wav(&result.stereo, &out, WavEncoding::Float32)
        }
        Command::Train {
            stage,
            data,
            config,
            out,
            seed,
        } => {
            let stage: StageKind = stage.into();
            let mut spec = match config {
                Some(path) => {
                    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                    toml::from_str::<TrainSpec>(&text)
                        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
                }
                None => TrainSpec::desk_default(stage),
            };
            if let Some(seed) = seed {
                spec.train.seed = seed;
            }
            let dataset = load_dataset(&data)?;
            let outcome = train(stage, &dataset, &spec, &out)?;
            println!(
                "trained {} steps; best checkpoint {} (validation stft distance {:.6} at step {})",
                outcome.steps_run,
                outcome.best_checkpoint.display(),
                outcome.best_validation,
                outcome.best_step
            );
            Ok(())
        }
        Command::Eval {
            reference,
            est,
            report,
            band_split,
        } => run_eval(&reference, &est, &report, band_split),
        Command::EncodeMs { input, mid, side } => {
            let stereo = read_wav(&input)?;
            let (m, s) = mid_side_encode(&stereo)?;
            write_wav(&m, &mid, WavEncoding::Float32)?;
            write_wav(&s, &side, WavEncoding::Float32)
        }
        Command::DecodeMs { mid, side, out } => {
            let m = read_mono(&mid, "decode-ms")?;
            let s = read_mono(&side, "decode-ms")?;
            let stereo = mid_side_decode(&m, &s)?;
            write_wav(&stereo, &out, WavEncoding::Float32)
        }
        Command::Resample {
            input,
            factor,
            taps,
            out,
        } => {
            let x = read_mono(&input, "resample")?;
            let factor = match factor {
                FactorArg::Up2 => ResampleFactor::Up2,
                FactorArg::Down2 => ResampleFactor::Down2,
            };
            let y = sinc_resample(&x, factor, taps)?;
            write_wav(&y, &out, WavEncoding::Float32)
        }
        Command::Info { ckpt } => {
            let (meta, params) = load_checkpoint_raw(&ckpt)?;
            println!("kind: {}", meta.kind);
            println!("stage: {}", meta.frontend.stage.name());
            println!(
                "frontend: {} Hz in, {} Hz out, window {}, hop {}, {} mels",
                meta.frontend.input_sample_rate,
                meta.frontend.output_sample_rate,
                meta.frontend.stft.window_size,
                meta.frontend.stft.hop_size,
                meta.frontend.mel.n_mels
            );
            println!(
                "generator: base_channels {}, upsample_rates {:?}, amp kernels {:?}",
                meta.generator.base_channels,
                meta.generator.upsample_rates,
                meta.generator.amp_kernel_sizes
            );
            let mut total = 0usize;
            for p in &params {
                let n: usize = p.shape.iter().product();
                total += n;
                println!("  {}  {:?}  ({n})", p.name, p.shape);
            }
            println!("parameters: {} tensors, {total} values", params.len());
            Ok(())
        }
    }
}

fn load_dataset(dir: &Path) -> Result<Vec<AudioBuffer>, Error> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "wav"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Data(format!(
            "{}: no .wav files found",
            dir.display()
        )));
    }
    paths.iter().map(read_wav).collect()
}

fn run_eval(
    ref_dir: &Path,
    est_dir: &Path,
    report_path: &Path,
    band_split: bool,
) -> Result<(), Error> {
    use std::io::Write;

    let mut names: Vec<String> = std::fs::read_dir(ref_dir)
        .map_err(|e| Error::io(ref_dir, e))?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().extension().is_some_and(|x| x == "wav"))
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(Error::Data(format!(
            "{}: no .wav files found",
            ref_dir.display()
        )));
    }

    let split = band_split.then_some(11025.0);
    let workers: usize = std::env::var("MUSICHIFI_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(1)
        .max(1);

    let evaluate = |name: &String| -> Result<(String, EvalReport), Error> {
        let ref_path = ref_dir.join(name);
        let est_path = est_dir.join(name);
        let reference = read_wav(&ref_path)?;
        let estimate = read_wav(&est_path)?;
        if reference.len() != estimate.len() {
            eprintln!(
                "warning: {name}: lengths differ ({} vs {}), trimming to the shorter",
                reference.len(),
                estimate.len()
            );
        }
        let report = evaluate_pair(&reference, &estimate, split)?;
        Ok((name.clone(), report))
    };

    let results: Vec<(String, EvalReport)> = if workers <= 1 {
        names.iter().map(evaluate).collect::<Result<_, _>>()?
    } else {
        // Per-file isolation; chunk order keeps the report deterministic.
        std::thread::scope(|scope| {
            let chunks: Vec<Vec<String>> = names
                .chunks(names.len().div_ceil(workers))
                .map(|c| c.to_vec())
                .collect();
            let handles: Vec<_> = chunks
                .into_iter()
                .map(|chunk| {
                    scope.spawn(move || {
                        chunk
                            .iter()
                            .map(evaluate)
                            .collect::<Result<Vec<_>, Error>>()
                    })
                })
                .collect();
            let mut all = Vec::new();
            for h in handles {
                all.extend(h.join().expect("eval worker panicked")?);
            }
            Ok::<_, Error>(all)
        })?
    };

    let mut file = std::fs::File::create(report_path).map_err(|e| Error::io(report_path, e))?;
    for (name, report) in &results {
        let mut line = serde_json::json!({
            "file": name,
            "mel_d": report.mel_d,
            "stft_d": report.stft_d,
        });
        if let Some(si) = report.si_sdr {
            line["si_sdr"] = si.into();
        }
        if let (Some(lo), Some(hi)) = (&report.low_band, &report.high_band) {
            line["low_band"] = serde_json::json!({"mel_d": lo.mel_d, "stft_d": lo.stft_d});
            line["high_band"] = serde_json::json!({"mel_d": hi.mel_d, "stft_d": hi.stft_d});
        }
        writeln!(file, "{line}").map_err(|e| Error::io(report_path, e))?;
    }

    let mean_std = |values: &[f64]| -> (f64, f64) {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        (mean, var.sqrt())
    };
    let mels: Vec<f64> = results.iter().map(|(_, r)| r.mel_d).collect();
    let stfts: Vec<f64> = results.iter().map(|(_, r)| r.stft_d).collect();
    let (mel_mean, mel_std) = mean_std(&mels);
    let (stft_mean, stft_std) = mean_std(&stfts);
    let dsp_rtf = dsp_benchmark_rtf(30.0)?;
    let summary = serde_json::json!({
        "summary": {
            "files": results.len(),
            "mel_d_mean": mel_mean,
            "mel_d_std": mel_std,
            "stft_d_mean": stft_mean,
            "stft_d_std": stft_std,
            "dsp_rtf": dsp_rtf,
        }
    });
    writeln!(file, "{summary}").map_err(|e| Error::io(report_path, e))?;
    println!(
        "evaluated {} pairs: mel_d {mel_mean:.6} +/- {mel_std:.6}, stft_d {stft_mean:.6} +/- {stft_std:.6}, dsp_rtf {dsp_rtf:.1}",
        results.len()
    );
    Ok(())
}
