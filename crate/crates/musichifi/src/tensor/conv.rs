//! 1-D/2-D (transposed) convolution and fixed-kernel 2x resampling ops.
//!
//! Cross-correlation convention throughout. Inner loops run over the time
//! axis with precomputed valid ranges so the hot path is branch-free.
// Strided gather/scatter loops index several slices at stride-dependent
// offsets; iterator adaptors obscure them without making them faster.
#![allow(clippy::needless_range_loop)]

use std::collections::HashMap;

use super::{Op, Scalar, Tensor};
use crate::error::{Error, Result};

fn entry<'a, T: Scalar>(grads: &'a mut HashMap<u64, Vec<T>>, parent: &Tensor<T>) -> &'a mut Vec<T> {
    grads
        .entry(parent.id())
        .or_insert_with(|| vec![T::zero(); parent.numel()])
}

/// Valid output range [t_lo, t_hi) such that 0 <= t*stride + off < limit.
fn valid_range(off: isize, stride: usize, limit: usize, out_len: usize) -> (usize, usize) {
    let s = stride as isize;
    let lo = (-off + s - 1).div_euclid(s).max(0) as usize;
    let hi = ((limit as isize - 1 - off).div_euclid(s) + 1).max(0) as usize;
    (lo.min(out_len), hi.min(out_len))
}

pub(super) fn conv1d<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    stride: usize,
    padding: usize,
    dilation: usize,
) -> Result<Tensor<T>> {
    let (xs, ws) = (x.shape(), w.shape());
    if xs.len() != 2 || ws.len() != 3 {
        return Err(Error::Shape(format!(
            "conv1d expects x [C_in, T] and w [C_out, C_in, K], got {xs:?} and {ws:?}"
        )));
    }
    let (c_in, t_in) = (xs[0], xs[1]);
    let (c_out, w_cin, k) = (ws[0], ws[1], ws[2]);
    if w_cin != c_in {
        return Err(Error::Shape(format!(
            "conv1d channel mismatch: x has {c_in}, w expects {w_cin}"
        )));
    }
    if stride == 0 || dilation == 0 || k == 0 {
        return Err(Error::Shape(
            "conv1d stride/dilation/kernel must be positive".into(),
        ));
    }
    if let Some(b) = bias {
        if b.shape() != [c_out] {
            return Err(Error::Shape(format!(
                "conv1d bias shape {:?} does not match {c_out} output channels",
                b.shape()
            )));
        }
    }
    let span = dilation * (k - 1) + 1;
    let t_out_signed = (t_in + 2 * padding) as isize - span as isize;
    if t_out_signed < 0 {
        return Err(Error::Shape(format!(
            "conv1d output would be empty: T={t_in}, padding={padding}, K={k}, dilation={dilation}"
        )));
    }
    let t_out = t_out_signed as usize / stride + 1;

    let xd = x.data();
    let wd = w.data();
    let mut out = vec![T::zero(); c_out * t_out];
    if let Some(b) = bias {
        let bd = b.data();
        for oc in 0..c_out {
            out[oc * t_out..(oc + 1) * t_out].fill(bd[oc]);
        }
    }
    for oc in 0..c_out {
        let orow = &mut out[oc * t_out..(oc + 1) * t_out];
        for ic in 0..c_in {
            let xrow = &xd[ic * t_in..(ic + 1) * t_in];
            for kk in 0..k {
                let wv = wd[(oc * c_in + ic) * k + kk];
                if wv == T::zero() {
                    continue;
                }
                let off = (kk * dilation) as isize - padding as isize;
                let (lo, hi) = valid_range(off, stride, t_in, t_out);
                if lo >= hi {
                    continue;
                }
                if stride == 1 {
                    let base = (lo as isize + off) as usize;
                    for (o, &xv) in orow[lo..hi].iter_mut().zip(&xrow[base..base + (hi - lo)]) {
                        *o = *o + wv * xv;
                    }
                } else {
                    for t in lo..hi {
                        let i = (t * stride) as isize + off;
                        orow[t] = orow[t] + wv * xrow[i as usize];
                    }
                }
            }
        }
    }
    drop(xd);
    drop(wd);
    Ok(Tensor::new_node(
        vec![c_out, t_out],
        out,
        Op::Conv1d {
            x: x.clone(),
            w: w.clone(),
            bias: bias.cloned(),
            stride,
            padding,
            dilation,
        },
    ))
}

#[allow(clippy::too_many_arguments)]
pub(super) fn conv1d_backward<T: Scalar>(
    out: &Tensor<T>,
    x: &Tensor<T>,
    w: &Tensor<T>,
    bias: &Option<Tensor<T>>,
    stride: usize,
    padding: usize,
    dilation: usize,
    grad: &[T],
    grads: &mut HashMap<u64, Vec<T>>,
) {
    let (c_in, t_in) = (x.shape()[0], x.shape()[1]);
    let (c_out, _, k) = (w.shape()[0], w.shape()[1], w.shape()[2]);
    let t_out = out.shape()[1];

    // d x
    {
        let wd = w.data();
        let mut dx = vec![T::zero(); c_in * t_in];
        for oc in 0..c_out {
            let grow = &grad[oc * t_out..(oc + 1) * t_out];
            for ic in 0..c_in {
                let xrow = &mut dx[ic * t_in..(ic + 1) * t_in];
                for kk in 0..k {
                    let wv = wd[(oc * c_in + ic) * k + kk];
                    if wv == T::zero() {
                        continue;
                    }
                    let off = (kk * dilation) as isize - padding as isize;
                    let (lo, hi) = valid_range(off, stride, t_in, t_out);
                    for t in lo..hi {
                        let i = ((t * stride) as isize + off) as usize;
                        xrow[i] = xrow[i] + wv * grow[t];
                    }
                }
            }
        }
        drop(wd);
        let gx = entry(grads, x);
        for i in 0..dx.len() {
            gx[i] = gx[i] + dx[i];
        }
    }
    // d w
    {
        let xd = x.data();
        let mut dw = vec![T::zero(); w.numel()];
        for oc in 0..c_out {
            let grow = &grad[oc * t_out..(oc + 1) * t_out];
            for ic in 0..c_in {
                let xrow = &xd[ic * t_in..(ic + 1) * t_in];
                for kk in 0..k {
                    let off = (kk * dilation) as isize - padding as isize;
                    let (lo, hi) = valid_range(off, stride, t_in, t_out);
                    let mut acc = T::zero();
                    if lo < hi {
                        if stride == 1 {
                            let base = (lo as isize + off) as usize;
                            for (&g, &xv) in grow[lo..hi].iter().zip(&xrow[base..base + (hi - lo)])
                            {
                                acc = acc + g * xv;
                            }
                        } else {
                            for t in lo..hi {
                                let i = ((t * stride) as isize + off) as usize;
                                acc = acc + grow[t] * xrow[i];
                            }
                        }
                    }
                    dw[(oc * c_in + ic) * k + kk] = acc;
                }
            }
        }
        drop(xd);
        let gw = entry(grads, w);
        for i in 0..dw.len() {
            gw[i] = gw[i] + dw[i];
        }
    }
    // d bias
    if let Some(b) = bias {
        let gb = entry(grads, b);
        for oc in 0..c_out {
            let mut acc = T::zero();
            for &g in &grad[oc * t_out..(oc + 1) * t_out] {
                acc = acc + g;
            }
            gb[oc] = gb[oc] + acc;
        }
    }
}

pub(super) fn conv_transpose1d<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    stride: usize,
    padding: usize,
) -> Result<Tensor<T>> {
    let (xs, ws) = (x.shape(), w.shape());
    if xs.len() != 2 || ws.len() != 3 {
        return Err(Error::Shape(format!(
            "conv_transpose1d expects x [C_in, T] and w [C_in, C_out, K], got {xs:?} and {ws:?}"
        )));
    }
    let (c_in, t_in) = (xs[0], xs[1]);
    let (w_cin, c_out, k) = (ws[0], ws[1], ws[2]);
    if w_cin != c_in {
        return Err(Error::Shape(format!(
            "conv_transpose1d channel mismatch: x has {c_in}, w expects {w_cin}"
        )));
    }
    if stride == 0 || k == 0 || t_in == 0 {
        return Err(Error::Shape(
            "conv_transpose1d stride/kernel/input must be positive".into(),
        ));
    }
    if let Some(b) = bias {
        if b.shape() != [c_out] {
            return Err(Error::Shape(format!(
                "conv_transpose1d bias shape {:?} does not match {c_out} output channels",
                b.shape()
            )));
        }
    }
    let t_out_signed = ((t_in - 1) * stride + k) as isize - 2 * padding as isize;
    if t_out_signed <= 0 {
        return Err(Error::Shape(format!(
            "conv_transpose1d output would be empty: T={t_in}, stride={stride}, K={k}, padding={padding}"
        )));
    }
    let t_out = t_out_signed as usize;

    let xd = x.data();
    let wd = w.data();
    let mut out = vec![T::zero(); c_out * t_out];
    if let Some(b) = bias {
        let bd = b.data();
        for oc in 0..c_out {
            out[oc * t_out..(oc + 1) * t_out].fill(bd[oc]);
        }
    }
    for ic in 0..c_in {
        let xrow = &xd[ic * t_in..(ic + 1) * t_in];
        for oc in 0..c_out {
            let orow = &mut out[oc * t_out..(oc + 1) * t_out];
            for kk in 0..k {
                let wv = wd[(ic * c_out + oc) * k + kk];
                if wv == T::zero() {
                    continue;
                }
                let off = kk as isize - padding as isize;
                let (lo, hi) = valid_range(off, stride, t_out, t_in);
                for t in lo..hi {
                    let j = ((t * stride) as isize + off) as usize;
                    orow[j] = orow[j] + wv * xrow[t];
                }
            }
        }
    }
    drop(xd);
    drop(wd);
    Ok(Tensor::new_node(
        vec![c_out, t_out],
        out,
        Op::ConvTranspose1d {
            x: x.clone(),
            w: w.clone(),
            bias: bias.cloned(),
            stride,
            padding,
        },
    ))
}

#[allow(clippy::too_many_arguments)]
pub(super) fn conv_transpose1d_backward<T: Scalar>(
    out: &Tensor<T>,
    x: &Tensor<T>,
    w: &Tensor<T>,
    bias: &Option<Tensor<T>>,
    stride: usize,
    padding: usize,
    grad: &[T],
    grads: &mut HashMap<u64, Vec<T>>,
) {
    let (c_in, t_in) = (x.shape()[0], x.shape()[1]);
    let (_, c_out, k) = (w.shape()[0], w.shape()[1], w.shape()[2]);
    let t_out = out.shape()[1];

    // d x: gx[ic, t] = sum_{oc,k} w[ic,oc,k] * grad[oc, t*s - p + k]
    {
        let wd = w.data();
        let mut dx = vec![T::zero(); c_in * t_in];
        for ic in 0..c_in {
            let xrow = &mut dx[ic * t_in..(ic + 1) * t_in];
            for oc in 0..c_out {
                let grow = &grad[oc * t_out..(oc + 1) * t_out];
                for kk in 0..k {
                    let wv = wd[(ic * c_out + oc) * k + kk];
                    if wv == T::zero() {
                        continue;
                    }
                    let off = kk as isize - padding as isize;
                    let (lo, hi) = valid_range(off, stride, t_out, t_in);
                    for t in lo..hi {
                        let j = ((t * stride) as isize + off) as usize;
                        xrow[t] = xrow[t] + wv * grow[j];
                    }
                }
            }
        }
        drop(wd);
        let gx = entry(grads, x);
        for i in 0..dx.len() {
            gx[i] = gx[i] + dx[i];
        }
    }
    // d w: gw[ic,oc,k] = sum_t x[ic,t] * grad[oc, t*s - p + k]
    {
        let xd = x.data();
        let mut dw = vec![T::zero(); w.numel()];
        for ic in 0..c_in {
            let xrow = &xd[ic * t_in..(ic + 1) * t_in];
            for oc in 0..c_out {
                let grow = &grad[oc * t_out..(oc + 1) * t_out];
                for kk in 0..k {
                    let off = kk as isize - padding as isize;
                    let (lo, hi) = valid_range(off, stride, t_out, t_in);
                    let mut acc = T::zero();
                    for t in lo..hi {
                        let j = ((t * stride) as isize + off) as usize;
                        acc = acc + xrow[t] * grow[j];
                    }
                    dw[(ic * c_out + oc) * k + kk] = acc;
                }
            }
        }
        drop(xd);
        let gw = entry(grads, w);
        for i in 0..dw.len() {
            gw[i] = gw[i] + dw[i];
        }
    }
    if let Some(b) = bias {
        let gb = entry(grads, b);
        for oc in 0..c_out {
            let mut acc = T::zero();
            for &g in &grad[oc * t_out..(oc + 1) * t_out] {
                acc = acc + g;
            }
            gb[oc] = gb[oc] + acc;
        }
    }
}

pub(super) fn conv2d<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    stride: (usize, usize),
    padding: (usize, usize),
) -> Result<Tensor<T>> {
    let (xs, ws) = (x.shape(), w.shape());
    if xs.len() != 3 || ws.len() != 4 {
        return Err(Error::Shape(format!(
            "conv2d expects x [C_in, H, W] and w [C_out, C_in, KH, KW], got {xs:?} and {ws:?}"
        )));
    }
    let (c_in, h_in, w_in) = (xs[0], xs[1], xs[2]);
    let (c_out, w_cin, kh, kw) = (ws[0], ws[1], ws[2], ws[3]);
    if w_cin != c_in {
        return Err(Error::Shape(format!(
            "conv2d channel mismatch: x has {c_in}, w expects {w_cin}"
        )));
    }
    let (sh, sw) = stride;
    let (ph, pw) = padding;
    if sh == 0 || sw == 0 || kh == 0 || kw == 0 {
        return Err(Error::Shape("conv2d stride/kernel must be positive".into()));
    }
    if let Some(b) = bias {
        if b.shape() != [c_out] {
            return Err(Error::Shape(format!(
                "conv2d bias shape {:?} does not match {c_out} output channels",
                b.shape()
            )));
        }
    }
    let h_sig = (h_in + 2 * ph) as isize - kh as isize;
    let w_sig = (w_in + 2 * pw) as isize - kw as isize;
    if h_sig < 0 || w_sig < 0 {
        return Err(Error::Shape(format!(
            "conv2d output would be empty for input {h_in}x{w_in}, kernel {kh}x{kw}, padding {ph}x{pw}"
        )));
    }
    let h_out = h_sig as usize / sh + 1;
    let w_out = w_sig as usize / sw + 1;

    let xd = x.data();
    let wd = w.data();
    let mut out = vec![T::zero(); c_out * h_out * w_out];
    if let Some(b) = bias {
        let bd = b.data();
        for oc in 0..c_out {
            out[oc * h_out * w_out..(oc + 1) * h_out * w_out].fill(bd[oc]);
        }
    }
    for oc in 0..c_out {
        for ic in 0..c_in {
            let xplane = &xd[ic * h_in * w_in..(ic + 1) * h_in * w_in];
            for khh in 0..kh {
                let hoff = khh as isize - ph as isize;
                let (ilo, ihi) = valid_range(hoff, sh, h_in, h_out);
                for kww in 0..kw {
                    let wv = wd[((oc * c_in + ic) * kh + khh) * kw + kww];
                    if wv == T::zero() {
                        continue;
                    }
                    let woff = kww as isize - pw as isize;
                    let (jlo, jhi) = valid_range(woff, sw, w_in, w_out);
                    if jlo >= jhi {
                        continue;
                    }
                    for i in ilo..ihi {
                        let xr = ((i * sh) as isize + hoff) as usize;
                        let xrow = &xplane[xr * w_in..(xr + 1) * w_in];
                        let orow = &mut out[(oc * h_out + i) * w_out..(oc * h_out + i + 1) * w_out];
                        if sw == 1 {
                            let base = (jlo as isize + woff) as usize;
                            for (o, &xv) in orow[jlo..jhi]
                                .iter_mut()
                                .zip(&xrow[base..base + (jhi - jlo)])
                            {
                                *o = *o + wv * xv;
                            }
                        } else {
                            for j in jlo..jhi {
                                let xc = ((j * sw) as isize + woff) as usize;
                                orow[j] = orow[j] + wv * xrow[xc];
                            }
                        }
                    }
                }
            }
        }
    }
    drop(xd);
    drop(wd);
    Ok(Tensor::new_node(
        vec![c_out, h_out, w_out],
        out,
        Op::Conv2d {
            x: x.clone(),
            w: w.clone(),
            bias: bias.cloned(),
            stride,
            padding,
        },
    ))
}

#[allow(clippy::too_many_arguments)]
pub(super) fn conv2d_backward<T: Scalar>(
    out: &Tensor<T>,
    x: &Tensor<T>,
    w: &Tensor<T>,
    bias: &Option<Tensor<T>>,
    stride: (usize, usize),
    padding: (usize, usize),
    grad: &[T],
    grads: &mut HashMap<u64, Vec<T>>,
) {
    let (c_in, h_in, w_in) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (c_out, _, kh, kw) = (w.shape()[0], w.shape()[1], w.shape()[2], w.shape()[3]);
    let (h_out, w_out) = (out.shape()[1], out.shape()[2]);
    let (sh, sw) = stride;
    let (ph, pw) = padding;

    {
        let wd = w.data();
        let mut dx = vec![T::zero(); x.numel()];
        for oc in 0..c_out {
            for ic in 0..c_in {
                let xplane = &mut dx[ic * h_in * w_in..(ic + 1) * h_in * w_in];
                for khh in 0..kh {
                    let hoff = khh as isize - ph as isize;
                    let (ilo, ihi) = valid_range(hoff, sh, h_in, h_out);
                    for kww in 0..kw {
                        let wv = wd[((oc * c_in + ic) * kh + khh) * kw + kww];
                        if wv == T::zero() {
                            continue;
                        }
                        let woff = kww as isize - pw as isize;
                        let (jlo, jhi) = valid_range(woff, sw, w_in, w_out);
                        for i in ilo..ihi {
                            let xr = ((i * sh) as isize + hoff) as usize;
                            let grow =
                                &grad[(oc * h_out + i) * w_out..(oc * h_out + i + 1) * w_out];
                            for j in jlo..jhi {
                                let xc = ((j * sw) as isize + woff) as usize;
                                xplane[xr * w_in + xc] = xplane[xr * w_in + xc] + wv * grow[j];
                            }
                        }
                    }
                }
            }
        }
        drop(wd);
        let gx = entry(grads, x);
        for i in 0..dx.len() {
            gx[i] = gx[i] + dx[i];
        }
    }
    {
        let xd = x.data();
        let mut dw = vec![T::zero(); w.numel()];
        for oc in 0..c_out {
            for ic in 0..c_in {
                let xplane = &xd[ic * h_in * w_in..(ic + 1) * h_in * w_in];
                for khh in 0..kh {
                    let hoff = khh as isize - ph as isize;
                    let (ilo, ihi) = valid_range(hoff, sh, h_in, h_out);
                    for kww in 0..kw {
                        let woff = kww as isize - pw as isize;
                        let (jlo, jhi) = valid_range(woff, sw, w_in, w_out);
                        let mut acc = T::zero();
                        for i in ilo..ihi {
                            let xr = ((i * sh) as isize + hoff) as usize;
                            let xrow = &xplane[xr * w_in..(xr + 1) * w_in];
                            let grow =
                                &grad[(oc * h_out + i) * w_out..(oc * h_out + i + 1) * w_out];
                            for j in jlo..jhi {
                                let xc = ((j * sw) as isize + woff) as usize;
                                acc = acc + grow[j] * xrow[xc];
                            }
                        }
                        dw[((oc * c_in + ic) * kh + khh) * kw + kww] = acc;
                    }
                }
            }
        }
        drop(xd);
        let gw = entry(grads, w);
        for i in 0..dw.len() {
            gw[i] = gw[i] + dw[i];
        }
    }
    if let Some(b) = bias {
        let gb = entry(grads, b);
        for oc in 0..c_out {
            let mut acc = T::zero();
            for &g in &grad[oc * h_out * w_out..(oc + 1) * h_out * w_out] {
                acc = acc + g;
            }
            gb[oc] = gb[oc] + acc;
        }
    }
}

fn check_sinc_input<T: Scalar>(
    x: &Tensor<T>,
    kernel: &[f64],
    what: &str,
) -> Result<(usize, usize)> {
    let s = x.shape();
    if s.len() != 2 {
        return Err(Error::Shape(format!("{what} expects [C, T], got {s:?}")));
    }
    if kernel.len().is_multiple_of(2) {
        return Err(Error::Parameter(format!(
            "{what} kernel must have odd length, got {}",
            kernel.len()
        )));
    }
    Ok((s[0], s[1]))
}

pub(super) fn sinc_up2<T: Scalar>(x: &Tensor<T>, kernel: &[f64]) -> Result<Tensor<T>> {
    let (c, t_in) = check_sinc_input(x, kernel, "sinc_up2")?;
    let k: Vec<T> = kernel.iter().map(|&v| T::of_f64(v)).collect();
    let taps = k.len() as isize;
    let center = taps / 2;
    let t_out = 2 * t_in;
    let xd = x.data();
    let mut out = vec![T::zero(); c * t_out];
    for ch in 0..c {
        let xrow = &xd[ch * t_in..(ch + 1) * t_in];
        let orow = &mut out[ch * t_out..(ch + 1) * t_out];
        for (n, &xv) in xrow.iter().enumerate() {
            if xv == T::zero() {
                continue;
            }
            let base = 2 * n as isize - center;
            let k_lo = (-base).max(0);
            let k_hi = (t_out as isize - base).min(taps);
            for kk in k_lo..k_hi {
                let m = (base + kk) as usize;
                orow[m] = orow[m] + xv * k[kk as usize];
            }
        }
    }
    drop(xd);
    Ok(Tensor::new_node(
        vec![c, t_out],
        out,
        Op::SincUp2 {
            x: x.clone(),
            kernel: k,
        },
    ))
}

pub(super) fn sinc_up2_backward<T: Scalar>(
    x: &Tensor<T>,
    kernel: &[T],
    grad: &[T],
    grads: &mut HashMap<u64, Vec<T>>,
) {
    let (c, t_in) = (x.shape()[0], x.shape()[1]);
    let taps = kernel.len() as isize;
    let center = taps / 2;
    let t_out = 2 * t_in;
    let mut dx = vec![T::zero(); c * t_in];
    for ch in 0..c {
        let grow = &grad[ch * t_out..(ch + 1) * t_out];
        let xrow = &mut dx[ch * t_in..(ch + 1) * t_in];
        for (n, o) in xrow.iter_mut().enumerate() {
            let base = 2 * n as isize - center;
            let k_lo = (-base).max(0);
            let k_hi = (t_out as isize - base).min(taps);
            let mut acc = T::zero();
            for kk in k_lo..k_hi {
                acc = acc + grow[(base + kk) as usize] * kernel[kk as usize];
            }
            *o = acc;
        }
    }
    let gx = entry(grads, x);
    for i in 0..dx.len() {
        gx[i] = gx[i] + dx[i];
    }
}

pub(super) fn sinc_down2<T: Scalar>(x: &Tensor<T>, kernel: &[f64]) -> Result<Tensor<T>> {
    let (c, t_in) = check_sinc_input(x, kernel, "sinc_down2")?;
    if t_in == 0 {
        return Err(Error::Shape("sinc_down2 on empty input".into()));
    }
    let k: Vec<T> = kernel.iter().map(|&v| T::of_f64(v)).collect();
    let taps = k.len() as isize;
    let center = taps / 2;
    let t_out = t_in.div_ceil(2);
    let xd = x.data();
    let mut out = vec![T::zero(); c * t_out];
    for ch in 0..c {
        let xrow = &xd[ch * t_in..(ch + 1) * t_in];
        let orow = &mut out[ch * t_out..(ch + 1) * t_out];
        for (j, o) in orow.iter_mut().enumerate() {
            let base = 2 * j as isize - center;
            let k_lo = (-base).max(0);
            let k_hi = (t_in as isize - base).min(taps);
            let mut acc = T::zero();
            for kk in k_lo..k_hi {
                acc = acc + k[kk as usize] * xrow[(base + kk) as usize];
            }
            *o = acc;
        }
    }
    drop(xd);
    Ok(Tensor::new_node(
        vec![c, t_out],
        out,
        Op::SincDown2 {
            x: x.clone(),
            kernel: k,
        },
    ))
}

pub(super) fn sinc_down2_backward<T: Scalar>(
    x: &Tensor<T>,
    kernel: &[T],
    grad: &[T],
    grads: &mut HashMap<u64, Vec<T>>,
) {
    let (c, t_in) = (x.shape()[0], x.shape()[1]);
    let taps = kernel.len() as isize;
    let center = taps / 2;
    let t_out = t_in.div_ceil(2);
    let mut dx = vec![T::zero(); c * t_in];
    for ch in 0..c {
        let grow = &grad[ch * t_out..(ch + 1) * t_out];
        let xrow = &mut dx[ch * t_in..(ch + 1) * t_in];
        for (j, &g) in grow.iter().enumerate() {
            if g == T::zero() {
                continue;
            }
            let base = 2 * j as isize - center;
            let k_lo = (-base).max(0);
            let k_hi = (t_in as isize - base).min(taps);
            for kk in k_lo..k_hi {
                let i = (base + kk) as usize;
                xrow[i] = xrow[i] + g * kernel[kk as usize];
            }
        }
    }
    let gx = entry(grads, x);
    for i in 0..dx.len() {
        gx[i] = gx[i] + dx[i];
    }
}
