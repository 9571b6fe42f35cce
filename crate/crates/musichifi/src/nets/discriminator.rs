//! The discriminator ensemble: time-domain multi-period discriminators and
//! multi-band multi-resolution complex-spectrogram discriminators.

use serde::{Deserialize, Serialize};

use super::ParamSet;
use crate::error::{Error, Result};
use crate::tensor::{dft_bins, Scalar, Tensor};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const LEAKY_SLOPE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorConfig {
    /// MPD reshape periods.
    pub periods: Vec<usize>,
    /// MPD conv channel progression (input is 1 channel).
    pub mpd_channels: Vec<usize>,
    /// MMSD DFT window sizes; hop is window/4.
    pub mmsd_windows: Vec<usize>,
    /// Frequency-axis split points as fractions of the bin count; must
    /// start at 0, end at 1, and strictly increase.
    pub mmsd_band_fractions: Vec<f64>,
    /// Channel width of the per-band conv stacks.
    pub mmsd_channels: usize,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        DiscriminatorConfig {
            periods: vec![2, 3, 5, 7, 11],
            mpd_channels: vec![4, 8, 16],
            mmsd_windows: vec![2048, 1024, 512],
            mmsd_band_fractions: vec![0.0, 0.1, 0.25, 0.5, 0.75, 1.0],
            mmsd_channels: 4,
        }
    }
}

impl DiscriminatorConfig {
    /// Shrunken variant for gradient-check harnesses.
    pub fn tiny() -> Self {
        DiscriminatorConfig {
            periods: vec![2, 3],
            mpd_channels: vec![2, 4],
            mmsd_windows: vec![16],
            mmsd_band_fractions: vec![0.0, 0.5, 1.0],
            mmsd_channels: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.periods.is_empty() || self.periods.contains(&0) {
            return Err(Error::Config("periods must be non-empty positive".into()));
        }
        if self.mpd_channels.is_empty() {
            return Err(Error::Config("mpd_channels must be non-empty".into()));
        }
        if self.mmsd_windows.is_empty() || self.mmsd_windows.iter().any(|&w| w < 8 || w % 4 != 0) {
            return Err(Error::Config(
                "mmsd windows must be >= 8 and divisible by 4".into(),
            ));
        }
        let f = &self.mmsd_band_fractions;
        if f.len() < 2
            || f[0] != 0.0
            || *f.last().unwrap() != 1.0
            || f.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::Config(
                "band fractions must strictly increase from 0.0 to 1.0".into(),
            ));
        }
        if self.mmsd_channels == 0 {
            return Err(Error::Config("mmsd_channels must be positive".into()));
        }
        Ok(())
    }

    /// Bin ranges [start, end) partitioning `bins` per the fractions.
    pub fn band_ranges(&self, bins: usize) -> Vec<(usize, usize)> {
        let f = &self.mmsd_band_fractions;
        let mut edges: Vec<usize> = f
            .iter()
            .map(|&x| (x * bins as f64).floor() as usize)
            .collect();
        *edges.last_mut().unwrap() = bins;
        edges[0] = 0;
        // Collapse accidental duplicates from flooring on tiny bin counts.
        let mut ranges = Vec::new();
        for w in edges.windows(2) {
            if w[1] > w[0] {
                ranges.push((w[0], w[1]));
            }
        }
        ranges
    }

    pub fn num_sub_discriminators(&self) -> usize {
        self.periods.len() + self.mmsd_windows.len()
    }
}

struct Conv2dLayer<T: Scalar> {
    w: Tensor<T>,
    b: Tensor<T>,
    stride: (usize, usize),
    padding: (usize, usize),
}

impl<T: Scalar> Conv2dLayer<T> {
    fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        x.conv2d(&self.w, Some(&self.b), self.stride, self.padding)
    }
}

struct PeriodDiscriminator<T: Scalar> {
    period: usize,
    convs: Vec<Conv2dLayer<T>>,
    post: Conv2dLayer<T>,
}

struct BandStack<T: Scalar> {
    convs: Vec<Conv2dLayer<T>>,
}

struct ResolutionDiscriminator<T: Scalar> {
    window: usize,
    hop: usize,
    bands: Vec<BandStack<T>>,
    post: Conv2dLayer<T>,
}

/// Score map plus the intermediate feature maps of one sub-discriminator.
pub struct DiscOutput<T: Scalar> {
    pub name: String,
    pub score: Tensor<T>,
    pub features: Vec<Tensor<T>>,
}

pub struct DiscriminatorEnsemble<T: Scalar> {
    pub config: DiscriminatorConfig,
    mpd: Vec<PeriodDiscriminator<T>>,
    mmsd: Vec<ResolutionDiscriminator<T>>,
    params: ParamSet<T>,
}

struct Builder<T: Scalar> {
    rng: ChaCha8Rng,
    normal: Normal<f64>,
    params: ParamSet<T>,
}

impl<T: Scalar> Builder<T> {
    fn conv2d(
        &mut self,
        name: &str,
        c_in: usize,
        c_out: usize,
        kernel: (usize, usize),
        stride: (usize, usize),
        padding: (usize, usize),
    ) -> Result<Conv2dLayer<T>> {
        let shape = [c_out, c_in, kernel.0, kernel.1];
        let n: usize = shape.iter().product();
        let data: Vec<T> = (0..n)
            .map(|_| T::of_f64(self.normal.sample(&mut self.rng)))
            .collect();
        Ok(Conv2dLayer {
            w: self.params.register(&format!("{name}.w"), data, &shape)?,
            b: self
                .params
                .register(&format!("{name}.b"), vec![T::zero(); c_out], &[c_out])?,
            stride,
            padding,
        })
    }
}

/// Build the ensemble with N(0, 0.01) weights; deterministic under `seed`.
pub fn build_discriminator<T: Scalar>(
    cfg: &DiscriminatorConfig,
    seed: u64,
) -> Result<DiscriminatorEnsemble<T>> {
    cfg.validate()?;
    let mut b = Builder::<T> {
        rng: ChaCha8Rng::seed_from_u64(seed),
        normal: Normal::new(0.0, 0.01).expect("valid normal"),
        params: ParamSet::new(),
    };
    let mut mpd = Vec::with_capacity(cfg.periods.len());
    for &p in &cfg.periods {
        let name = format!("mpd.p{p}");
        let mut convs = Vec::new();
        let mut c_in = 1usize;
        for (i, &c_out) in cfg.mpd_channels.iter().enumerate() {
            convs.push(b.conv2d(&format!("{name}.c{i}"), c_in, c_out, (5, 1), (3, 1), (2, 0))?);
            c_in = c_out;
        }
        let post = b.conv2d(&format!("{name}.post"), c_in, 1, (3, 1), (1, 1), (1, 0))?;
        mpd.push(PeriodDiscriminator {
            period: p,
            convs,
            post,
        });
    }
    let mut mmsd = Vec::with_capacity(cfg.mmsd_windows.len());
    for &w in &cfg.mmsd_windows {
        let name = format!("mmsd.w{w}");
        let bins = dft_bins(w);
        let n_bands = cfg.band_ranges(bins).len();
        let mut bands = Vec::with_capacity(n_bands);
        let ch = cfg.mmsd_channels;
        for band in 0..n_bands {
            let convs = vec![
                b.conv2d(
                    &format!("{name}.band{band}.c0"),
                    2,
                    ch,
                    (3, 3),
                    (1, 1),
                    (1, 1),
                )?,
                b.conv2d(
                    &format!("{name}.band{band}.c1"),
                    ch,
                    ch,
                    (3, 3),
                    (1, 2),
                    (1, 1),
                )?,
            ];
            bands.push(BandStack { convs });
        }
        let post = b.conv2d(&format!("{name}.post"), ch, 1, (3, 3), (1, 1), (1, 1))?;
        mmsd.push(ResolutionDiscriminator {
            window: w,
            hop: w / 4,
            bands,
            post,
        });
    }
    Ok(DiscriminatorEnsemble {
        config: cfg.clone(),
        mpd,
        mmsd,
        params: b.params,
    })
}

impl<T: Scalar> PeriodDiscriminator<T> {
    fn forward(&self, wave: &Tensor<T>) -> Result<DiscOutput<T>> {
        let t = wave.numel();
        let p = self.period;
        let pad = (p - t % p) % p;
        let padded = if pad > 0 {
            wave.reflect_pad_end(pad)?
        } else {
            wave.clone()
        };
        let rows = (t + pad) / p;
        let mut x = padded.reshape(&[1, rows, p])?;
        let mut features = Vec::with_capacity(self.convs.len() + 1);
        for conv in &self.convs {
            x = conv.forward(&x)?.leaky_relu(T::of_f64(LEAKY_SLOPE));
            features.push(x.clone());
        }
        let score = self.post.forward(&x)?;
        features.push(score.clone());
        Ok(DiscOutput {
            name: format!("mpd.p{p}"),
            score,
            features,
        })
    }
}

impl<T: Scalar> ResolutionDiscriminator<T> {
    fn forward(&self, wave: &Tensor<T>, cfg: &DiscriminatorConfig) -> Result<DiscOutput<T>> {
        let spec = wave.framed_dft(self.window, self.hop, false)?;
        let bins = spec.shape()[1];
        let mut band_outs = Vec::new();
        let mut features = Vec::new();
        for ((start, end), stack) in cfg.band_ranges(bins).into_iter().zip(&self.bands) {
            let mut x = spec.narrow(1, start, end - start)?;
            for conv in &stack.convs {
                x = conv.forward(&x)?.leaky_relu(T::of_f64(LEAKY_SLOPE));
                features.push(x.clone());
            }
            band_outs.push(x);
        }
        let merged = Tensor::concat(&band_outs, 1)?;
        let score = self.post.forward(&merged)?;
        features.push(score.clone());
        Ok(DiscOutput {
            name: format!("mmsd.w{}", self.window),
            score,
            features,
        })
    }
}

impl<T: Scalar> DiscriminatorEnsemble<T> {
    pub fn params(&self) -> &ParamSet<T> {
        &self.params
    }

    /// All K = |periods| + |windows| sub-discriminator outputs for a rank-1
    /// waveform.
    pub fn forward(&self, wave: &Tensor<T>) -> Result<Vec<DiscOutput<T>>> {
        if wave.shape().len() != 1 {
            return Err(Error::Shape(format!(
                "discriminator expects a rank-1 waveform, got {:?}",
                wave.shape()
            )));
        }
        let t = wave.numel();
        let max_period = *self.config.periods.iter().max().unwrap();
        if t < max_period {
            return Err(Error::Data(format!(
                "input of {t} samples is shorter than the largest period {max_period}"
            )));
        }
        let max_window = *self.config.mmsd_windows.iter().max().unwrap();
        if t < max_window {
            return Err(Error::Data(format!(
                "input of {t} samples is shorter than the largest window {max_window}"
            )));
        }
        let mut outs = Vec::with_capacity(self.config.num_sub_discriminators());
        for d in &self.mpd {
            outs.push(d.forward(wave)?);
        }
        for d in &self.mmsd {
            outs.push(d.forward(wave, &self.config)?);
        }
        Ok(outs)
    }
}
