//! Differentiable framed DFT.
//!
//! Forward: reflect-pad (optional), slice into hop-spaced Hann-windowed
//! frames, DFT each frame, keep the non-negative-frequency bins, stack
//! real/imag as two channels: [T] -> [2, bins, frames].
//!
//! Backward is the exact adjoint: zero-pad the bin gradient to a full
//! spectrum, run an unnormalized inverse FFT, take the real part, window,
//! and scatter frames (and the reflection) back onto the signal. The values
//! are identical to multiplying windowed frames by fixed DFT cos/sin
//! matrices; the FFT is just the fast path.

use std::collections::HashMap;

use num_complex::Complex;
use rustfft::FftPlanner;

use super::{Op, Scalar, Tensor};
use crate::error::{Error, Result};
use crate::spectral::{reflect_index, window_values, WindowKind};

pub fn dft_bins(window: usize) -> usize {
    window / 2 + 1
}

fn frame_layout(len: usize, window: usize, hop: usize, center: bool) -> Result<(usize, usize)> {
    if window == 0 || hop == 0 || hop > window || !window.is_multiple_of(2) {
        return Err(Error::Config(format!(
            "framed_dft needs 0 < hop ({hop}) <= window ({window}), window even"
        )));
    }
    if len == 0 {
        return Err(Error::Shape("framed_dft on empty input".into()));
    }
    let padded = if center { len + window } else { len };
    if padded < window {
        return Err(Error::Shape(format!(
            "input of {len} samples is shorter than one {window}-sample window"
        )));
    }
    Ok((
        (padded - window) / hop + 1,
        if center { window / 2 } else { 0 },
    ))
}

pub(super) fn framed_dft<T: Scalar>(
    x: &Tensor<T>,
    window: usize,
    hop: usize,
    center: bool,
) -> Result<Tensor<T>> {
    if x.shape().len() != 1 {
        return Err(Error::Shape(format!(
            "framed_dft expects a rank-1 signal, got {:?}",
            x.shape()
        )));
    }
    let len = x.numel();
    let (frames, pad) = frame_layout(len, window, hop, center)?;
    let bins = dft_bins(window);
    let win: Vec<T> = window_values(WindowKind::Hann, window)
        .into_iter()
        .map(T::of_f64)
        .collect();

    let xd = x.data();
    let mut planner = FftPlanner::<T>::new();
    let fft = planner.plan_fft_forward(window);
    let mut buf = vec![Complex::new(T::zero(), T::zero()); window];
    // Layout: data[c*(bins*frames) + b*frames + f]
    let mut data = vec![T::zero(); 2 * bins * frames];
    for f in 0..frames {
        let start = (f * hop) as isize - pad as isize;
        for n in 0..window {
            let idx = start + n as isize;
            let v = if idx >= 0 && (idx as usize) < len {
                xd[idx as usize]
            } else if center {
                xd[reflect_index(idx, len)]
            } else {
                T::zero()
            };
            buf[n] = Complex::new(v * win[n], T::zero());
        }
        fft.process(&mut buf);
        for b in 0..bins {
            data[b * frames + f] = buf[b].re;
            data[bins * frames + b * frames + f] = buf[b].im;
        }
    }
    drop(xd);
    Ok(Tensor::new_node(
        vec![2, bins, frames],
        data,
        Op::FramedDft {
            x: x.clone(),
            window,
            hop,
            center,
        },
    ))
}

pub(super) fn framed_dft_backward<T: Scalar>(
    x: &Tensor<T>,
    window: usize,
    hop: usize,
    center: bool,
    grad: &[T],
    grads: &mut HashMap<u64, Vec<T>>,
) {
    let len = x.numel();
    let (frames, pad) = frame_layout(len, window, hop, center).expect("validated in forward");
    let bins = dft_bins(window);
    let win: Vec<T> = window_values(WindowKind::Hann, window)
        .into_iter()
        .map(T::of_f64)
        .collect();

    let mut planner = FftPlanner::<T>::new();
    // Unnormalized inverse: sum_k X[k] e^{+i 2 pi k n / N}, exactly the
    // adjoint of the forward DFT restricted to the kept bins.
    let ifft = planner.plan_fft_inverse(window);
    let mut buf = vec![Complex::new(T::zero(), T::zero()); window];
    let mut dx = vec![T::zero(); len];
    for f in 0..frames {
        for b in 0..bins {
            buf[b] = Complex::new(grad[b * frames + f], grad[bins * frames + b * frames + f]);
        }
        for b in buf[bins..].iter_mut() {
            *b = Complex::new(T::zero(), T::zero());
        }
        ifft.process(&mut buf);
        let start = (f * hop) as isize - pad as isize;
        for n in 0..window {
            let idx = start + n as isize;
            let g = buf[n].re * win[n];
            if idx >= 0 && (idx as usize) < len {
                dx[idx as usize] = dx[idx as usize] + g;
            } else if center {
                let j = reflect_index(idx, len);
                dx[j] = dx[j] + g;
            }
        }
    }
    let gx = grads
        .entry(x.id())
        .or_insert_with(|| vec![T::zero(); x.numel()]);
    for i in 0..len {
        gx[i] = gx[i] + dx[i];
    }
}
