//! The shared generator: transposed-convolution upsampling stack with
//! multi-dilation residual snake-conv blocks, used by all three stages.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::ParamSet;
use crate::error::{Error, Result};
use crate::resample;
use crate::tensor::{Scalar, Tensor};

/// Anti-aliasing filters around snake activations: cutoff pulled below the
/// half-band point so content just above the fold lands in the stopband
/// rather than the transition band.
const AA_TAPS: usize = 63;
const AA_CUTOFF: f64 = 0.23;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub mel_bands: usize,
    /// Channels after the input conv; halved after every upsample stage.
    pub base_channels: usize,
    pub upsample_rates: Vec<usize>,
    pub amp_kernel_sizes: Vec<usize>,
    pub amp_dilations: Vec<Vec<usize>>,
    pub use_antialiased_activation: bool,
    pub output_tanh: bool,
}

impl GeneratorConfig {
    /// Desk-scale defaults: three 256x stages with [3, 7, 11] kernels and
    /// two dilated convs per branch.
    pub fn desk(mel_bands: usize, base_channels: usize) -> Self {
        GeneratorConfig {
            mel_bands,
            base_channels,
            upsample_rates: vec![8, 8, 4],
            amp_kernel_sizes: vec![3, 7, 11],
            amp_dilations: vec![vec![1, 3], vec![1, 3], vec![1, 3]],
            use_antialiased_activation: false,
            output_tanh: true,
        }
    }

    pub fn upsample_product(&self) -> usize {
        self.upsample_rates.iter().product()
    }

    pub fn validate(&self) -> Result<()> {
        if self.mel_bands == 0 || self.base_channels == 0 {
            return Err(Error::Config(
                "mel_bands and base_channels must be positive".into(),
            ));
        }
        if self.upsample_rates.is_empty() || self.upsample_rates.contains(&0) {
            return Err(Error::Config(
                "upsample_rates must be non-empty positive".into(),
            ));
        }
        if self.base_channels >> self.upsample_rates.len() < 1 {
            return Err(Error::Config(format!(
                "base_channels {} cannot halve across {} stages and stay >= 1",
                self.base_channels,
                self.upsample_rates.len()
            )));
        }
        if self.amp_kernel_sizes.is_empty()
            || self.amp_kernel_sizes.len() != self.amp_dilations.len()
        {
            return Err(Error::Config(
                "amp_kernel_sizes and amp_dilations must be non-empty and equal length".into(),
            ));
        }
        if self.amp_kernel_sizes.iter().any(|&k| k % 2 == 0 || k == 0) {
            return Err(Error::Config("amp kernel sizes must be odd".into()));
        }
        if self
            .amp_dilations
            .iter()
            .any(|d| d.is_empty() || d.contains(&0))
        {
            return Err(Error::Config(
                "amp dilation lists must be non-empty positive".into(),
            ));
        }
        Ok(())
    }
}

pub(super) struct Conv1dLayer<T: Scalar> {
    pub w: Tensor<T>,
    pub b: Tensor<T>,
    pub stride: usize,
    pub padding: usize,
    pub dilation: usize,
}

impl<T: Scalar> Conv1dLayer<T> {
    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        x.conv1d(
            &self.w,
            Some(&self.b),
            self.stride,
            self.padding,
            self.dilation,
        )
    }
}

pub(super) struct ConvT1dLayer<T: Scalar> {
    pub w: Tensor<T>,
    pub b: Tensor<T>,
    pub stride: usize,
    pub padding: usize,
}

impl<T: Scalar> ConvT1dLayer<T> {
    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        x.conv_transpose1d(&self.w, Some(&self.b), self.stride, self.padding)
    }
}

/// Snake activation with per-channel log-parameterized frequency; the log
/// storage keeps alpha strictly positive by construction.
pub(super) struct SnakeLayer<T: Scalar> {
    pub log_alpha: Tensor<T>,
    /// Anti-aliasing sinc kernels (up, down) when enabled.
    pub aa: Option<(Vec<f64>, Vec<f64>)>,
}

impl<T: Scalar> SnakeLayer<T> {
    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        match &self.aa {
            None => x.snake(&self.log_alpha),
            Some((up, down)) => x.sinc_up2(up)?.snake(&self.log_alpha)?.sinc_down2(down),
        }
    }
}

/// One residual branch: y <- y + conv_k,d(snake(y)) per dilation.
pub(super) struct AmpBranch<T: Scalar> {
    pub steps: Vec<(SnakeLayer<T>, Conv1dLayer<T>)>,
}

impl<T: Scalar> AmpBranch<T> {
    fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let mut y = x.clone();
        for (snake, conv) in &self.steps {
            y = y.add(&conv.forward(&snake.forward(&y)?)?)?;
        }
        Ok(y)
    }
}

/// Multi-kernel residual block; output is the branch mean so zeroed conv
/// weights give the exact identity.
pub(super) struct AmpBlock<T: Scalar> {
    pub branches: Vec<AmpBranch<T>>,
}

impl<T: Scalar> AmpBlock<T> {
    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let mut acc: Option<Tensor<T>> = None;
        for b in &self.branches {
            let y = b.forward(x)?;
            acc = Some(match acc {
                None => y,
                Some(prev) => prev.add(&y)?,
            });
        }
        let sum = acc.expect("validated non-empty branches");
        Ok(sum.mul_scalar(T::of_f64(1.0 / self.branches.len() as f64)))
    }
}

struct UpStage<T: Scalar> {
    up: ConvT1dLayer<T>,
    amp: AmpBlock<T>,
}

/// Mel-to-waveform generator.
pub struct Generator<T: Scalar> {
    pub config: GeneratorConfig,
    pre: Conv1dLayer<T>,
    stages: Vec<UpStage<T>>,
    post_snake: SnakeLayer<T>,
    post_conv: Conv1dLayer<T>,
    params: ParamSet<T>,
}

struct Builder<T: Scalar> {
    rng: ChaCha8Rng,
    normal: Normal<f64>,
    params: ParamSet<T>,
}

impl<T: Scalar> Builder<T> {
    fn new(seed: u64) -> Self {
        Builder {
            rng: ChaCha8Rng::seed_from_u64(seed),
            normal: Normal::new(0.0, 0.01).expect("valid normal"),
            params: ParamSet::new(),
        }
    }

    fn weight(&mut self, name: &str, shape: &[usize]) -> Result<Tensor<T>> {
        let n: usize = shape.iter().product();
        let data: Vec<T> = (0..n)
            .map(|_| T::of_f64(self.normal.sample(&mut self.rng)))
            .collect();
        self.params.register(name, data, shape)
    }

    fn zeros(&mut self, name: &str, shape: &[usize]) -> Result<Tensor<T>> {
        let n: usize = shape.iter().product();
        self.params.register(name, vec![T::zero(); n], shape)
    }

    fn conv1d(
        &mut self,
        name: &str,
        c_in: usize,
        c_out: usize,
        k: usize,
        dilation: usize,
    ) -> Result<Conv1dLayer<T>> {
        Ok(Conv1dLayer {
            w: self.weight(&format!("{name}.w"), &[c_out, c_in, k])?,
            b: self.zeros(&format!("{name}.b"), &[c_out])?,
            stride: 1,
            padding: dilation * (k - 1) / 2,
            dilation,
        })
    }

    fn conv_t1d(
        &mut self,
        name: &str,
        c_in: usize,
        c_out: usize,
        rate: usize,
    ) -> Result<ConvT1dLayer<T>> {
        // Kernel/padding chosen so output length is exactly T * rate.
        let (k, padding) = if rate.is_multiple_of(2) {
            (2 * rate, rate / 2)
        } else {
            (2 * rate + 1, rate.div_ceil(2))
        };
        Ok(ConvT1dLayer {
            w: self.weight(&format!("{name}.w"), &[c_in, c_out, k])?,
            b: self.zeros(&format!("{name}.b"), &[c_out])?,
            stride: rate,
            padding,
        })
    }

    fn snake(&mut self, name: &str, channels: usize, antialiased: bool) -> Result<SnakeLayer<T>> {
        Ok(SnakeLayer {
            log_alpha: self.zeros(&format!("{name}.alpha"), &[channels])?,
            aa: antialiased.then(|| {
                (
                    resample::kaiser_sinc_kernel(AA_TAPS, AA_CUTOFF, 2.0, resample::KAISER_BETA),
                    resample::kaiser_sinc_kernel(AA_TAPS, AA_CUTOFF, 1.0, resample::KAISER_BETA),
                )
            }),
        })
    }
}

/// Build a generator with N(0, 0.01) weights, zero biases, and snake alpha
/// 1.0; bit-deterministic under `seed`.
pub fn build_generator<T: Scalar>(cfg: &GeneratorConfig, seed: u64) -> Result<Generator<T>> {
    cfg.validate()?;
    let mut b = Builder::<T>::new(seed);
    let pre = b.conv1d("pre", cfg.mel_bands, cfg.base_channels, 7, 1)?;
    let mut channels = cfg.base_channels;
    let mut stages = Vec::with_capacity(cfg.upsample_rates.len());
    for (i, &rate) in cfg.upsample_rates.iter().enumerate() {
        let out_ch = channels / 2;
        let up = b.conv_t1d(&format!("up{i}"), channels, out_ch, rate)?;
        let mut branches = Vec::with_capacity(cfg.amp_kernel_sizes.len());
        for (bi, (&k, dils)) in cfg
            .amp_kernel_sizes
            .iter()
            .zip(&cfg.amp_dilations)
            .enumerate()
        {
            let mut steps = Vec::with_capacity(dils.len());
            for (si, &d) in dils.iter().enumerate() {
                let prefix = format!("up{i}.amp.b{bi}.s{si}");
                let snake = b.snake(&prefix, out_ch, cfg.use_antialiased_activation)?;
                let conv = b.conv1d(&format!("{prefix}.conv"), out_ch, out_ch, k, d)?;
                steps.push((snake, conv));
            }
            branches.push(AmpBranch { steps });
        }
        stages.push(UpStage {
            up,
            amp: AmpBlock { branches },
        });
        channels = out_ch;
    }
    let post_snake = b.snake("post.snake", channels, cfg.use_antialiased_activation)?;
    let post_conv = b.conv1d("post.conv", channels, 1, 7, 1)?;
    Ok(Generator {
        config: cfg.clone(),
        pre,
        stages,
        post_snake,
        post_conv,
        params: b.params,
    })
}

impl<T: Scalar> Generator<T> {
    pub fn params(&self) -> &ParamSet<T> {
        &self.params
    }

    /// Mel [mel_bands, frames] -> waveform [frames * product(upsample_rates)].
    pub fn forward(&self, mel: &Tensor<T>) -> Result<Tensor<T>> {
        let s = mel.shape();
        if s.len() != 2 || s[0] != self.config.mel_bands {
            return Err(Error::Shape(format!(
                "generator expects mel [{}, frames], got {s:?}",
                self.config.mel_bands
            )));
        }
        let mut x = self.pre.forward(mel)?;
        for stage in &self.stages {
            x = stage.up.forward(&x)?;
            x = stage.amp.forward(&x)?;
        }
        x = self.post_snake.forward(&x)?;
        x = self.post_conv.forward(&x)?;
        if self.config.output_tanh {
            x = x.tanh();
        }
        let n = x.numel();
        x.reshape(&[n])
    }

    /// Standalone AMP block forward, exposed for the anti-aliasing harness.
    pub fn amp_forward(&self, stage: usize, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.stages[stage].amp.forward(x)
    }

    /// Set every parameter whose name contains `fragment` to a constant.
    pub fn fill_params(&self, fragment: &str, value: T) {
        for (name, t) in self.params.iter() {
            if name.contains(fragment) {
                t.set_data(&vec![value; t.numel()]);
            }
        }
    }
}
