//! Temporary diagnostic: per-sine amplitude/phase of overfit output vs target.

use musichifi::cascade::StageModel;
use musichifi::nets::StageKind;
use musichifi::trainer::{make_pair, PairInput, StagePrep};
use rand::{Rng, SeedableRng};

fn three_sine_clip(len: usize, seed: u64) -> musichifi::AudioBuffer {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
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
                musichifi::audio::quantize_sample(v)
            })
            .collect()
    };
    let fr = 22050.0 / 256.0;
    let l = mk([3.0 * fr, 12.0 * fr, 154.0 * fr]);
    let r = mk([4.0 * fr, 17.0 * fr, 113.0 * fr]);
    musichifi::AudioBuffer::stereo(l, r, 44100).unwrap()
}

fn main() {
    let ckpt = std::env::args().nth(1).expect("ckpt path");
    let clip = three_sine_clip(32768, 42);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    let pair = make_pair(&StagePrep::new(StageKind::Vocoder), &clip, &mut rng).unwrap();
    let model = StageModel::load(&ckpt, StageKind::Vocoder).unwrap();
    let PairInput::Mel(mel) = &pair.input else { unreachable!() };
    let out = model.vocode(mel).unwrap();

    use rustfft::{num_complex::Complex, FftPlanner};
    let n = 16384;
    let dft = |x: &[f64]| -> Vec<Complex<f64>> {
        let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        buf
    };
    let st = dft(pair.target.channel(0));
    let so = dft(out.channel(0));
    println!("target rms {:.4} output rms {:.4}", pair.target.rms(), out.rms());
    for k in [3usize, 4, 12, 17, 113] {
        let bin = 64 * k;
        let t = st[bin];
        let o = so[bin];
        println!(
            "k={k:3} bin {bin:5}: target amp {:.4} phase {:+.2}; output amp {:.4} phase {:+.2}; dphi {:+.2} rad",
            2.0 * t.norm() / n as f64,
            t.arg(),
            2.0 * o.norm() / n as f64,
            o.arg(),
            (o.arg() - t.arg() + std::f64::consts::PI).rem_euclid(2.0 * std::f64::consts::PI)
                - std::f64::consts::PI
        );
    }
    println!("si_sdr {:?}", musichifi::metrics::si_sdr(&pair.target, &out));
}
