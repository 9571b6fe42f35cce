//! Forward builders and the backward dispatch for every tensor op.

use std::collections::HashMap;

use super::{conv, dft, Op, Scalar, Tensor};
use crate::error::{Error, Result};

/// Broadcast layout: either identical shapes, or the smaller operand's shape
/// (ignoring leading 1s) is a suffix of the larger's and is tiled along the
/// leading dimensions.
enum Broadcast {
    Same,
    /// Left operand is the smaller (tiled) one.
    LeftSmall,
    /// Right operand is the smaller (tiled) one.
    RightSmall,
}

fn strip_leading_ones(shape: &[usize]) -> &[usize] {
    let mut s = shape;
    while s.first() == Some(&1) {
        s = &s[1..];
    }
    s
}

fn is_suffix(small: &[usize], big: &[usize]) -> bool {
    small.len() <= big.len() && &big[big.len() - small.len()..] == small
}

fn broadcast_layout(a: &[usize], b: &[usize]) -> Result<(Vec<usize>, Broadcast)> {
    if a == b {
        return Ok((a.to_vec(), Broadcast::Same));
    }
    let sa = strip_leading_ones(a);
    let sb = strip_leading_ones(b);
    if is_suffix(sb, sa) {
        Ok((a.to_vec(), Broadcast::RightSmall))
    } else if is_suffix(sa, sb) {
        Ok((b.to_vec(), Broadcast::LeftSmall))
    } else {
        Err(Error::Shape(format!(
            "incompatible shapes for element-wise op: {a:?} vs {b:?}"
        )))
    }
}

/// Sum a tile-broadcast gradient back to the smaller operand's size.
fn reduce_tiled<T: Scalar>(grad: &[T], small_n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); small_n];
    for (i, &g) in grad.iter().enumerate() {
        out[i % small_n] = out[i % small_n] + g;
    }
    out
}

impl<T: Scalar> Tensor<T> {
    fn binary(
        &self,
        rhs: &Tensor<T>,
        f: impl Fn(T, T) -> T,
        op: impl Fn(Tensor<T>, Tensor<T>) -> Op<T>,
    ) -> Result<Tensor<T>> {
        let (out_shape, layout) = broadcast_layout(self.shape(), rhs.shape())?;
        let a = self.data();
        let b = rhs.data();
        let data: Vec<T> = match layout {
            Broadcast::Same => a.iter().zip(b.iter()).map(|(&x, &y)| f(x, y)).collect(),
            Broadcast::RightSmall => {
                let n = b.len();
                a.iter().enumerate().map(|(i, &x)| f(x, b[i % n])).collect()
            }
            Broadcast::LeftSmall => {
                let n = a.len();
                b.iter().enumerate().map(|(i, &y)| f(a[i % n], y)).collect()
            }
        };
        drop(a);
        drop(b);
        Ok(Tensor::new_node(
            out_shape,
            data,
            op(self.clone(), rhs.clone()),
        ))
    }

    pub fn add(&self, rhs: &Tensor<T>) -> Result<Tensor<T>> {
        self.binary(rhs, |x, y| x + y, Op::Add)
    }

    pub fn sub(&self, rhs: &Tensor<T>) -> Result<Tensor<T>> {
        self.binary(rhs, |x, y| x - y, Op::Sub)
    }

    pub fn mul(&self, rhs: &Tensor<T>) -> Result<Tensor<T>> {
        self.binary(rhs, |x, y| x * y, Op::Mul)
    }

    fn unary(&self, f: impl Fn(T) -> T, op: Op<T>) -> Tensor<T> {
        let data = self.data().iter().map(|&x| f(x)).collect();
        Tensor::new_node(self.node.shape.clone(), data, op)
    }

    pub fn add_scalar(&self, c: T) -> Tensor<T> {
        self.unary(|x| x + c, Op::AddScalar(self.clone()))
    }

    pub fn mul_scalar(&self, c: T) -> Tensor<T> {
        self.unary(|x| x * c, Op::MulScalar(self.clone(), c))
    }

    pub fn neg(&self) -> Tensor<T> {
        self.mul_scalar(-T::one())
    }

    pub fn tanh(&self) -> Tensor<T> {
        self.unary(|x| x.tanh(), Op::Tanh(self.clone()))
    }

    pub fn abs(&self) -> Tensor<T> {
        self.unary(|x| x.abs(), Op::Abs(self.clone()))
    }

    /// Natural log.
    pub fn ln(&self) -> Tensor<T> {
        self.unary(|x| x.ln(), Op::Ln(self.clone()))
    }

    pub fn exp(&self) -> Tensor<T> {
        self.unary(|x| x.exp(), Op::Exp(self.clone()))
    }

    pub fn sqr(&self) -> Tensor<T> {
        self.unary(|x| x * x, Op::Sqr(self.clone()))
    }

    pub fn sqrt(&self) -> Tensor<T> {
        self.unary(|x| x.sqrt(), Op::Sqrt(self.clone()))
    }

    pub fn leaky_relu(&self, slope: T) -> Tensor<T> {
        self.unary(
            |x| if x >= T::zero() { x } else { x * slope },
            Op::LeakyRelu(self.clone(), slope),
        )
    }

    pub fn clamp_min(&self, floor: T) -> Tensor<T> {
        self.unary(|x| x.max(floor), Op::ClampMin(self.clone(), floor))
    }

    pub fn mean(&self) -> Tensor<T> {
        let n = T::from_usize(self.numel().max(1)).unwrap();
        let s = self.data().iter().fold(T::zero(), |acc, &x| acc + x);
        Tensor::new_node(vec![], vec![s / n], Op::Mean(self.clone()))
    }

    pub fn sum(&self) -> Tensor<T> {
        let s = self.data().iter().fold(T::zero(), |acc, &x| acc + x);
        Tensor::new_node(vec![], vec![s], Op::Sum(self.clone()))
    }

    /// [m, k] x [k, n] -> [m, n].
    pub fn matmul(&self, rhs: &Tensor<T>) -> Result<Tensor<T>> {
        let (a_shape, b_shape) = (self.shape(), rhs.shape());
        if a_shape.len() != 2 || b_shape.len() != 2 || a_shape[1] != b_shape[0] {
            return Err(Error::Shape(format!(
                "matmul shapes {a_shape:?} x {b_shape:?}"
            )));
        }
        let (m, k, n) = (a_shape[0], a_shape[1], b_shape[1]);
        let a = self.data();
        let b = rhs.data();
        let data = matmul_raw(&a, &b, m, k, n);
        drop(a);
        drop(b);
        Ok(Tensor::new_node(
            vec![m, n],
            data,
            Op::Matmul(self.clone(), rhs.clone()),
        ))
    }

    /// [m, n] -> [n, m].
    pub fn transpose2(&self) -> Result<Tensor<T>> {
        let s = self.shape();
        if s.len() != 2 {
            return Err(Error::Shape(format!(
                "transpose2 expects rank 2, got {s:?}"
            )));
        }
        let (m, n) = (s[0], s[1]);
        let a = self.data();
        let mut data = vec![T::zero(); m * n];
        for i in 0..m {
            for j in 0..n {
                data[j * m + i] = a[i * n + j];
            }
        }
        drop(a);
        Ok(Tensor::new_node(
            vec![n, m],
            data,
            Op::Transpose2(self.clone()),
        ))
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor<T>> {
        if shape.iter().product::<usize>() != self.numel() {
            return Err(Error::Shape(format!(
                "cannot reshape {:?} ({} elements) to {shape:?}",
                self.shape(),
                self.numel()
            )));
        }
        Ok(Tensor::new_node(
            shape.to_vec(),
            self.to_vec(),
            Op::Reshape(self.clone()),
        ))
    }

    pub fn concat(parts: &[Tensor<T>], axis: usize) -> Result<Tensor<T>> {
        if parts.is_empty() {
            return Err(Error::Contract("concat of an empty list".into()));
        }
        let rank = parts[0].shape().len();
        if axis >= rank {
            return Err(Error::Shape(format!(
                "concat axis {axis} out of rank {rank}"
            )));
        }
        let mut out_shape = parts[0].shape().to_vec();
        let mut axis_total = 0usize;
        for p in parts {
            let s = p.shape();
            if s.len() != rank {
                return Err(Error::Shape("concat rank mismatch".into()));
            }
            for (d, (&a, &b)) in s.iter().zip(&out_shape).enumerate() {
                if d != axis && a != b {
                    return Err(Error::Shape(format!(
                        "concat shape mismatch on dim {d}: {s:?} vs {:?}",
                        out_shape
                    )));
                }
            }
            axis_total += s[axis];
        }
        out_shape[axis] = axis_total;
        let outer: usize = out_shape[..axis].iter().product();
        let inner: usize = out_shape[axis + 1..].iter().product();
        let mut data = vec![T::zero(); out_shape.iter().product()];
        let mut offset = 0usize;
        for p in parts {
            let len = p.shape()[axis];
            let src = p.data();
            for o in 0..outer {
                let dst_base = (o * axis_total + offset) * inner;
                let src_base = o * len * inner;
                data[dst_base..dst_base + len * inner]
                    .copy_from_slice(&src[src_base..src_base + len * inner]);
            }
            offset += len;
        }
        Ok(Tensor::new_node(
            out_shape,
            data,
            Op::Concat(parts.to_vec(), axis),
        ))
    }

    pub fn narrow(&self, axis: usize, start: usize, len: usize) -> Result<Tensor<T>> {
        let s = self.shape();
        if axis >= s.len() || start + len > s[axis] || len == 0 {
            return Err(Error::Shape(format!(
                "narrow(axis {axis}, start {start}, len {len}) out of bounds for {s:?}"
            )));
        }
        let outer: usize = s[..axis].iter().product();
        let inner: usize = s[axis + 1..].iter().product();
        let mut out_shape = s.to_vec();
        out_shape[axis] = len;
        let src = self.data();
        let mut data = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = (o * s[axis] + start) * inner;
            data.extend_from_slice(&src[base..base + len * inner]);
        }
        drop(src);
        Ok(Tensor::new_node(
            out_shape,
            data,
            Op::Narrow {
                x: self.clone(),
                axis,
                start,
                len,
            },
        ))
    }

    /// Reflect-pad a rank-1 tensor on the right ("bounce" reflection).
    pub fn reflect_pad_end(&self, pad: usize) -> Result<Tensor<T>> {
        if self.shape().len() != 1 {
            return Err(Error::Shape(format!(
                "reflect_pad_end expects rank 1, got {:?}",
                self.shape()
            )));
        }
        let n = self.numel();
        if n == 0 {
            return Err(Error::Shape("reflect_pad_end on empty tensor".into()));
        }
        let src = self.data();
        let mut data = Vec::with_capacity(n + pad);
        data.extend_from_slice(&src);
        for j in 0..pad {
            data.push(src[crate::spectral::reflect_index((n + j) as isize, n)]);
        }
        drop(src);
        Ok(Tensor::new_node(
            vec![n + pad],
            data,
            Op::ReflectPadEnd(self.clone(), pad),
        ))
    }

    /// Snake activation x + sin^2(a*x)/a with per-channel a = exp(log_alpha).
    /// x is [C, T], log_alpha is [C].
    pub fn snake(&self, log_alpha: &Tensor<T>) -> Result<Tensor<T>> {
        let s = self.shape();
        if s.len() != 2 {
            return Err(Error::Shape(format!("snake expects [C, T], got {s:?}")));
        }
        if log_alpha.shape() != [s[0]] {
            return Err(Error::Shape(format!(
                "snake log_alpha shape {:?} does not match {} channels",
                log_alpha.shape(),
                s[0]
            )));
        }
        let (c, t) = (s[0], s[1]);
        let x = self.data();
        let la = log_alpha.data();
        let mut data = vec![T::zero(); c * t];
        for ch in 0..c {
            let a = la[ch].exp();
            for i in 0..t {
                let v = x[ch * t + i];
                let sn = (a * v).sin();
                data[ch * t + i] = v + sn * sn / a;
            }
        }
        drop(x);
        drop(la);
        Ok(Tensor::new_node(
            vec![c, t],
            data,
            Op::Snake {
                x: self.clone(),
                log_alpha: log_alpha.clone(),
            },
        ))
    }

    pub fn conv1d(
        &self,
        w: &Tensor<T>,
        bias: Option<&Tensor<T>>,
        stride: usize,
        padding: usize,
        dilation: usize,
    ) -> Result<Tensor<T>> {
        conv::conv1d(self, w, bias, stride, padding, dilation)
    }

    pub fn conv_transpose1d(
        &self,
        w: &Tensor<T>,
        bias: Option<&Tensor<T>>,
        stride: usize,
        padding: usize,
    ) -> Result<Tensor<T>> {
        conv::conv_transpose1d(self, w, bias, stride, padding)
    }

    pub fn conv2d(
        &self,
        w: &Tensor<T>,
        bias: Option<&Tensor<T>>,
        stride: (usize, usize),
        padding: (usize, usize),
    ) -> Result<Tensor<T>> {
        conv::conv2d(self, w, bias, stride, padding)
    }

    /// Depthwise 2x sinc upsampling with a fixed odd-length kernel: [C, T] -> [C, 2T].
    pub fn sinc_up2(&self, kernel: &[f64]) -> Result<Tensor<T>> {
        conv::sinc_up2(self, kernel)
    }

    /// Depthwise 2x sinc decimation: [C, T] -> [C, ceil(T/2)].
    pub fn sinc_down2(&self, kernel: &[f64]) -> Result<Tensor<T>> {
        conv::sinc_down2(self, kernel)
    }

    /// Windowed DFT of a rank-1 signal: [T] -> [2, bins, frames] with
    /// real/imag stacked as channels. Hann (periodic) window; reflect
    /// center padding when `center`.
    pub fn framed_dft(&self, window: usize, hop: usize, center: bool) -> Result<Tensor<T>> {
        dft::framed_dft(self, window, hop, center)
    }
}

pub(crate) fn matmul_raw<T: Scalar>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); m * n];
    for i in 0..m {
        for kk in 0..k {
            let av = a[i * k + kk];
            if av == T::zero() {
                continue;
            }
            let brow = &b[kk * n..(kk + 1) * n];
            let orow = &mut out[i * n..(i + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o = *o + av * bv;
            }
        }
    }
    out
}

pub(crate) fn op_parents<T: Scalar>(op: &Op<T>) -> Vec<&Tensor<T>> {
    match op {
        Op::Leaf { .. } => vec![],
        Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::Matmul(a, b) => vec![a, b],
        Op::AddScalar(a)
        | Op::MulScalar(a, _)
        | Op::Tanh(a)
        | Op::Abs(a)
        | Op::Ln(a)
        | Op::Exp(a)
        | Op::Sqr(a)
        | Op::Sqrt(a)
        | Op::LeakyRelu(a, _)
        | Op::ClampMin(a, _)
        | Op::Mean(a)
        | Op::Sum(a)
        | Op::Transpose2(a)
        | Op::Reshape(a)
        | Op::ReflectPadEnd(a, _) => vec![a],
        Op::Concat(parts, _) => parts.iter().collect(),
        Op::Narrow { x, .. } => vec![x],
        Op::Snake { x, log_alpha } => vec![x, log_alpha],
        Op::Conv1d { x, w, bias, .. }
        | Op::ConvTranspose1d { x, w, bias, .. }
        | Op::Conv2d { x, w, bias, .. } => {
            let mut v = vec![x, w];
            if let Some(b) = bias {
                v.push(b);
            }
            v
        }
        Op::SincUp2 { x, .. } | Op::SincDown2 { x, .. } => vec![x],
        Op::FramedDft { x, .. } => vec![x],
    }
}

fn entry<'a, T: Scalar>(grads: &'a mut HashMap<u64, Vec<T>>, parent: &Tensor<T>) -> &'a mut Vec<T> {
    grads
        .entry(parent.id())
        .or_insert_with(|| vec![T::zero(); parent.numel()])
}

/// Propagate `grad` (d loss / d node) into the node's parents.
pub(crate) fn accumulate_parent_grads<T: Scalar>(
    tensor: &Tensor<T>,
    grad: &[T],
    grads: &mut HashMap<u64, Vec<T>>,
) {
    match &tensor.node.op {
        Op::Leaf { .. } => {}
        Op::Add(a, b) => {
            add_broadcast_grad(grads, a, grad, false);
            add_broadcast_grad(grads, b, grad, false);
        }
        Op::Sub(a, b) => {
            add_broadcast_grad(grads, a, grad, false);
            add_broadcast_grad(grads, b, grad, true);
        }
        Op::Mul(a, b) => {
            let scaled_a: Vec<T> = {
                let bd = b.data();
                let n = bd.len();
                grad.iter()
                    .enumerate()
                    .map(|(i, &g)| g * bd[i % n])
                    .collect()
            };
            add_broadcast_grad(grads, a, &scaled_a, false);
            let scaled_b: Vec<T> = {
                let ad = a.data();
                let n = ad.len();
                grad.iter()
                    .enumerate()
                    .map(|(i, &g)| g * ad[i % n])
                    .collect()
            };
            add_broadcast_grad(grads, b, &scaled_b, false);
        }
        Op::AddScalar(a) => {
            let ga = entry(grads, a);
            for (o, &g) in ga.iter_mut().zip(grad) {
                *o = *o + g;
            }
        }
        Op::MulScalar(a, c) => {
            let ga = entry(grads, a);
            for (o, &g) in ga.iter_mut().zip(grad) {
                *o = *o + g * *c;
            }
        }
        Op::Tanh(a) => {
            let y = tensor.data();
            let ga = entry(grads, a);
            for i in 0..grad.len() {
                ga[i] = ga[i] + grad[i] * (T::one() - y[i] * y[i]);
            }
        }
        Op::Abs(a) => {
            let x = a.data();
            let sign: Vec<T> = x
                .iter()
                .map(|&v| {
                    if v > T::zero() {
                        T::one()
                    } else if v < T::zero() {
                        -T::one()
                    } else {
                        T::zero() // subgradient 0 at 0
                    }
                })
                .collect();
            drop(x);
            let ga = entry(grads, a);
            for i in 0..grad.len() {
                ga[i] = ga[i] + grad[i] * sign[i];
            }
        }
        Op::Ln(a) => {
            let x = a.data();
            let dx: Vec<T> = grad.iter().zip(x.iter()).map(|(&g, &v)| g / v).collect();
            drop(x);
            let ga = entry(grads, a);
            for i in 0..dx.len() {
                ga[i] = ga[i] + dx[i];
            }
        }
        Op::Exp(a) => {
            let y = tensor.data();
            let dx: Vec<T> = grad.iter().zip(y.iter()).map(|(&g, &v)| g * v).collect();
            drop(y);
            let ga = entry(grads, a);
            for i in 0..dx.len() {
                ga[i] = ga[i] + dx[i];
            }
        }
        Op::Sqr(a) => {
            let x = a.data();
            let two = T::of_f64(2.0);
            let dx: Vec<T> = grad
                .iter()
                .zip(x.iter())
                .map(|(&g, &v)| g * two * v)
                .collect();
            drop(x);
            let ga = entry(grads, a);
            for i in 0..dx.len() {
                ga[i] = ga[i] + dx[i];
            }
        }
        Op::Sqrt(a) => {
            let y = tensor.data();
            let half = T::of_f64(0.5);
            let dx: Vec<T> = grad
                .iter()
                .zip(y.iter())
                .map(|(&g, &v)| g * half / v)
                .collect();
            drop(y);
            let ga = entry(grads, a);
            for i in 0..dx.len() {
                ga[i] = ga[i] + dx[i];
            }
        }
        Op::LeakyRelu(a, slope) => {
            let x = a.data();
            let dx: Vec<T> = grad
                .iter()
                .zip(x.iter())
                .map(|(&g, &v)| if v >= T::zero() { g } else { g * *slope })
                .collect();
            drop(x);
            let ga = entry(grads, a);
            for i in 0..dx.len() {
                ga[i] = ga[i] + dx[i];
            }
        }
        Op::ClampMin(a, floor) => {
            let x = a.data();
            let dx: Vec<T> = grad
                .iter()
                .zip(x.iter())
                .map(|(&g, &v)| if v > *floor { g } else { T::zero() })
                .collect();
            drop(x);
            let ga = entry(grads, a);
            for i in 0..dx.len() {
                ga[i] = ga[i] + dx[i];
            }
        }
        Op::Mean(a) => {
            let g0 = grad[0] / T::from_usize(a.numel().max(1)).unwrap();
            let ga = entry(grads, a);
            for o in ga.iter_mut() {
                *o = *o + g0;
            }
        }
        Op::Sum(a) => {
            let g0 = grad[0];
            let ga = entry(grads, a);
            for o in ga.iter_mut() {
                *o = *o + g0;
            }
        }
        Op::Matmul(a, b) => {
            let (m, k) = (a.shape()[0], a.shape()[1]);
            let n = b.shape()[1];
            // ga += g . b^T
            {
                let bd = b.data();
                let mut bt = vec![T::zero(); n * k];
                for kk in 0..k {
                    for j in 0..n {
                        bt[j * k + kk] = bd[kk * n + j];
                    }
                }
                drop(bd);
                let dga = matmul_raw(grad, &bt, m, n, k);
                let ga = entry(grads, a);
                for i in 0..dga.len() {
                    ga[i] = ga[i] + dga[i];
                }
            }
            // gb += a^T . g
            {
                let ad = a.data();
                let mut at = vec![T::zero(); k * m];
                for i in 0..m {
                    for kk in 0..k {
                        at[kk * m + i] = ad[i * k + kk];
                    }
                }
                drop(ad);
                let dgb = matmul_raw(&at, grad, k, m, n);
                let gb = entry(grads, b);
                for i in 0..dgb.len() {
                    gb[i] = gb[i] + dgb[i];
                }
            }
        }
        Op::Transpose2(a) => {
            let (m, n) = (a.shape()[0], a.shape()[1]);
            let ga = entry(grads, a);
            // `tensor` is [n, m]; grad indexed [j, i].
            for j in 0..n {
                for i in 0..m {
                    ga[i * n + j] = ga[i * n + j] + grad[j * m + i];
                }
            }
        }
        Op::Reshape(a) => {
            let ga = entry(grads, a);
            for i in 0..grad.len() {
                ga[i] = ga[i] + grad[i];
            }
        }
        Op::Concat(parts, axis) => {
            let out_shape = tensor.shape();
            let outer: usize = out_shape[..*axis].iter().product();
            let inner: usize = out_shape[*axis + 1..].iter().product();
            let axis_total = out_shape[*axis];
            let mut offset = 0usize;
            for p in parts {
                let len = p.shape()[*axis];
                let gp = entry(grads, p);
                for o in 0..outer {
                    let src_base = (o * axis_total + offset) * inner;
                    let dst_base = o * len * inner;
                    for i in 0..len * inner {
                        gp[dst_base + i] = gp[dst_base + i] + grad[src_base + i];
                    }
                }
                offset += len;
            }
        }
        Op::Narrow {
            x,
            axis,
            start,
            len,
        } => {
            let s = x.shape().to_vec();
            let outer: usize = s[..*axis].iter().product();
            let inner: usize = s[*axis + 1..].iter().product();
            let gx = entry(grads, x);
            for o in 0..outer {
                let dst_base = (o * s[*axis] + start) * inner;
                let src_base = o * len * inner;
                for i in 0..len * inner {
                    gx[dst_base + i] = gx[dst_base + i] + grad[src_base + i];
                }
            }
        }
        Op::ReflectPadEnd(a, pad) => {
            let n = a.numel();
            let ga = entry(grads, a);
            for i in 0..n {
                ga[i] = ga[i] + grad[i];
            }
            for j in 0..*pad {
                let src = crate::spectral::reflect_index((n + j) as isize, n);
                ga[src] = ga[src] + grad[n + j];
            }
        }
        Op::Snake { x, log_alpha } => {
            let s = x.shape().to_vec();
            let (c, t) = (s[0], s[1]);
            let xd = x.data();
            let la = log_alpha.data();
            let mut dx = vec![T::zero(); c * t];
            let mut dla = vec![T::zero(); c];
            let two = T::of_f64(2.0);
            for ch in 0..c {
                let a = la[ch].exp();
                let mut acc = T::zero();
                for i in 0..t {
                    let v = xd[ch * t + i];
                    let g = grad[ch * t + i];
                    let sn = (a * v).sin();
                    let s2 = (two * a * v).sin();
                    // dy/dx = 1 + sin(2ax)
                    dx[ch * t + i] = g * (T::one() + s2);
                    // dy/d(log a) = a * dy/da = x*sin(2ax) - sin^2(ax)/a
                    acc = acc + g * (v * s2 - sn * sn / a);
                }
                dla[ch] = acc;
            }
            drop(xd);
            drop(la);
            {
                let gx = entry(grads, x);
                for i in 0..dx.len() {
                    gx[i] = gx[i] + dx[i];
                }
            }
            {
                let gla = entry(grads, log_alpha);
                for i in 0..dla.len() {
                    gla[i] = gla[i] + dla[i];
                }
            }
        }
        Op::Conv1d {
            x,
            w,
            bias,
            stride,
            padding,
            dilation,
        } => conv::conv1d_backward(
            tensor, x, w, bias, *stride, *padding, *dilation, grad, grads,
        ),
        Op::ConvTranspose1d {
            x,
            w,
            bias,
            stride,
            padding,
        } => conv::conv_transpose1d_backward(tensor, x, w, bias, *stride, *padding, grad, grads),
        Op::Conv2d {
            x,
            w,
            bias,
            stride,
            padding,
        } => conv::conv2d_backward(tensor, x, w, bias, *stride, *padding, grad, grads),
        Op::SincUp2 { x, kernel } => conv::sinc_up2_backward(x, kernel, grad, grads),
        Op::SincDown2 { x, kernel } => conv::sinc_down2_backward(x, kernel, grad, grads),
        Op::FramedDft {
            x,
            window,
            hop,
            center,
        } => dft::framed_dft_backward(x, *window, *hop, *center, grad, grads),
    }
}

/// Accumulate `delta` (shaped like the op output) into `parent`, reducing
/// over tiles when the parent was broadcast, optionally negated.
fn add_broadcast_grad<T: Scalar>(
    grads: &mut HashMap<u64, Vec<T>>,
    parent: &Tensor<T>,
    delta: &[T],
    negate: bool,
) {
    let n = parent.numel();
    let reduced;
    let src: &[T] = if n == delta.len() {
        delta
    } else {
        reduced = reduce_tiled(delta, n);
        &reduced
    };
    let gp = entry(grads, parent);
    if negate {
        for (o, &d) in gp.iter_mut().zip(src) {
            *o = *o - d;
        }
    } else {
        for (o, &d) in gp.iter_mut().zip(src) {
            *o = *o + d;
        }
    }
}
