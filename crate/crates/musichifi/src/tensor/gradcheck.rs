//! Central-finite-difference gradient verification.
//!
//! Every differentiable op is registered in [`standard_op_suite`]; the same
//! case list drives the unit tests and the acceptance gate. The finite
//! difference oracle always runs in double precision and is built from
//! forward passes only, independent of the reverse-mode path it checks.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{backward, Scalar, Tensor};
use crate::error::Result;
use crate::resample;

/// A small graph exercising one op, reduced to a scalar by a fixed
/// pseudo-random weighted sum so no gradient component can hide.
#[derive(Debug, Clone)]
pub enum OpKind {
    Add,
    AddBroadcast,
    Sub,
    Mul,
    MulBroadcast,
    AddScalar,
    MulScalar,
    Tanh,
    Abs,
    Ln,
    Exp,
    Sqr,
    Sqrt,
    LeakyRelu,
    ClampMin,
    Mean,
    Sum,
    Matmul,
    Transpose2,
    Reshape,
    Concat,
    Narrow,
    ReflectPadEnd,
    Snake,
    Conv1d {
        stride: usize,
        padding: usize,
        dilation: usize,
    },
    ConvTranspose1d {
        stride: usize,
        padding: usize,
    },
    Conv2d {
        stride: (usize, usize),
        padding: (usize, usize),
    },
    SincUp2,
    SincDown2,
    FramedDft {
        center: bool,
    },
}

/// One gradient-check case: op, input shapes, and value ranges safe for
/// finite differences (away from kinks and domain edges).
#[derive(Debug, Clone)]
pub struct OpCase {
    pub name: &'static str,
    pub kind: OpKind,
    pub shapes: Vec<Vec<usize>>,
    /// Per-input sampling range (lo, hi); values below `min_abs` in
    /// magnitude are pushed outward to stay clear of kinks.
    pub ranges: Vec<(f64, f64)>,
    pub min_abs: f64,
}

/// Deterministic reduction weights (distinct, sign-varying).
fn reduction_weights(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let v = ((i as u64).wrapping_mul(2654435761) % 1000) as f64 / 1000.0 - 0.45;
            (v as f32) as f64
        })
        .collect()
}

/// Build the case's scalar loss from leaf inputs.
pub fn build_case<T: Scalar>(kind: &OpKind, inputs: &[Tensor<T>]) -> Result<Tensor<T>> {
    let out = match kind {
        OpKind::Add => inputs[0].add(&inputs[1])?,
        OpKind::AddBroadcast => inputs[0].add(&inputs[1])?,
        OpKind::Sub => inputs[0].sub(&inputs[1])?,
        OpKind::Mul => inputs[0].mul(&inputs[1])?,
        OpKind::MulBroadcast => inputs[0].mul(&inputs[1])?,
        OpKind::AddScalar => inputs[0].add_scalar(T::of_f64(0.7)),
        OpKind::MulScalar => inputs[0].mul_scalar(T::of_f64(-1.3)),
        OpKind::Tanh => inputs[0].tanh(),
        OpKind::Abs => inputs[0].abs(),
        OpKind::Ln => inputs[0].ln(),
        OpKind::Exp => inputs[0].exp(),
        OpKind::Sqr => inputs[0].sqr(),
        OpKind::Sqrt => inputs[0].sqrt(),
        OpKind::LeakyRelu => inputs[0].leaky_relu(T::of_f64(0.1)),
        OpKind::ClampMin => inputs[0].clamp_min(T::of_f64(0.3)),
        OpKind::Mean => inputs[0].mean(),
        OpKind::Sum => inputs[0].sum(),
        OpKind::Matmul => inputs[0].matmul(&inputs[1])?,
        OpKind::Transpose2 => inputs[0].transpose2()?,
        OpKind::Reshape => {
            let n = inputs[0].numel();
            inputs[0].reshape(&[n])?
        }
        OpKind::Concat => Tensor::concat(&[inputs[0].clone(), inputs[1].clone()], 1)?,
        OpKind::Narrow => inputs[0].narrow(1, 1, 3)?,
        OpKind::ReflectPadEnd => inputs[0].reflect_pad_end(5)?,
        OpKind::Snake => inputs[0].snake(&inputs[1])?,
        OpKind::Conv1d {
            stride,
            padding,
            dilation,
        } => inputs[0].conv1d(&inputs[1], Some(&inputs[2]), *stride, *padding, *dilation)?,
        OpKind::ConvTranspose1d { stride, padding } => {
            inputs[0].conv_transpose1d(&inputs[1], Some(&inputs[2]), *stride, *padding)?
        }
        OpKind::Conv2d { stride, padding } => {
            inputs[0].conv2d(&inputs[1], Some(&inputs[2]), *stride, *padding)?
        }
        OpKind::SincUp2 => inputs[0].sinc_up2(&resample::up2_kernel(31))?,
        OpKind::SincDown2 => inputs[0].sinc_down2(&resample::down2_kernel(31))?,
        OpKind::FramedDft { center } => inputs[0].framed_dft(8, 4, *center)?,
    };
    if out.numel() == 1 {
        // Mean/Sum are already scalar.
        return Ok(out);
    }
    let w = Tensor::from_f64_slice(&reduction_weights(out.numel()), &[out.numel()])?;
    Ok(out.reshape(&[out.numel()])?.mul(&w)?.sum())
}

/// The registered differentiable ops with FD-safe input distributions.
pub fn standard_op_suite() -> Vec<OpCase> {
    let r = (-2.0, 2.0);
    let pos = (0.4, 2.5);
    let mut cases = vec![
        OpCase {
            name: "add",
            kind: OpKind::Add,
            shapes: vec![vec![3, 4], vec![3, 4]],
            ranges: vec![r, r],
            min_abs: 0.0,
        },
        OpCase {
            name: "add_broadcast",
            kind: OpKind::AddBroadcast,
            shapes: vec![vec![3, 4], vec![4]],
            ranges: vec![r, r],
            min_abs: 0.0,
        },
        OpCase {
            name: "sub",
            kind: OpKind::Sub,
            shapes: vec![vec![3, 4], vec![3, 4]],
            ranges: vec![r, r],
            min_abs: 0.0,
        },
        OpCase {
            name: "mul",
            kind: OpKind::Mul,
            shapes: vec![vec![3, 4], vec![3, 4]],
            ranges: vec![r, r],
            min_abs: 0.0,
        },
        OpCase {
            name: "mul_broadcast",
            kind: OpKind::MulBroadcast,
            shapes: vec![vec![2, 3, 4], vec![3, 4]],
            ranges: vec![r, r],
            min_abs: 0.0,
        },
        OpCase {
            name: "add_scalar",
            kind: OpKind::AddScalar,
            shapes: vec![vec![7]],
            ranges: vec![r],
            min_abs: 0.0,
        },
        OpCase {
            name: "mul_scalar",
            kind: OpKind::MulScalar,
            shapes: vec![vec![7]],
            ranges: vec![r],
            min_abs: 0.0,
        },
        OpCase {
            name: "tanh",
            kind: OpKind::Tanh,
            shapes: vec![vec![9]],
            ranges: vec![r],
            min_abs: 0.0,
        },
        OpCase {
            name: "abs",
            kind: OpKind::Abs,
            shapes: vec![vec![9]],
            ranges: vec![r],
            min_abs: 0.05,
        },
        OpCase {
            name: "ln",
            kind: OpKind::Ln,
            shapes: vec![vec![9]],
            ranges: vec![pos],
            min_abs: 0.0,
        },
        OpCase {
            name: "exp",
            kind: OpKind::Exp,
            shapes: vec![vec![9]],
            ranges: vec![r],
            min_abs: 0.0,
        },
        OpCase {
            name: "sqr",
            kind: OpKind::Sqr,
            shapes: vec![vec![9]],
            ranges: vec![r],
            min_abs: 0.0,
        },
        OpCase {
            name: "sqrt",
            kind: OpKind::Sqrt,
            shapes: vec![vec![9]],
            ranges: vec![pos],
            min_abs: 0.0,
        },
        OpCase {
            name: "leaky_relu",
            kind: OpKind::LeakyRelu,
            shapes: vec![vec![9]],
            ranges: vec![r],
            min_abs: 0.05,
        },
        // Keep clear of the clamp floor at 0.3.
        OpCase {
            name: "clamp_min",
            kind: OpKind::ClampMin,
            shapes: vec![vec![9]],
            ranges: vec![(0.45, 2.0)],
            min_abs: 0.0,
        },
        OpCase {
            name: "mean",
            kind: OpKind::Mean,
            shapes: vec![vec![3, 5]],
            ranges: vec![r],
            min_abs: 0.0,
        },
        OpCase {
            name: "sum",
            kind: OpKind::Sum,
            shapes: vec![vec![3, 5]],
            ranges: vec![r],
            min_abs: 0.0,
        },
        OpCase {
            name: "matmul",
            kind: OpKind::Matmul,
            shapes: vec![vec![3, 4], vec![4, 2]],
            ranges: vec![r, r],
            min_abs: 0.0,
        },
        OpCase {
            name: "transpose2",
            kind: OpKind::Transpose2,
            shapes: vec![vec![3, 4]],
            ranges: vec![r],
            min_abs: 0.0,
        },
        OpCase {
            name: "reshape",
            kind: OpKind::Reshape,
            shapes: vec![vec![3, 4]],
            ranges: vec![r],
            min_abs: 0.0,
        },
        OpCase {
            name: "concat",
            kind: OpKind::Concat,
            shapes: vec![vec![2, 3], vec![2, 2]],
            ranges: vec![r, r],
            min_abs: 0.0,
        },
        OpCase {
            name: "narrow",
            kind: OpKind::Narrow,
            shapes: vec![vec![2, 6]],
            ranges: vec![r],
            min_abs: 0.0,
        },
        OpCase {
            name: "reflect_pad_end",
            kind: OpKind::ReflectPadEnd,
            shapes: vec![vec![9]],
            ranges: vec![r],
            min_abs: 0.0,
        },
        OpCase {
            name: "snake",
            kind: OpKind::Snake,
            shapes: vec![vec![3, 7], vec![3]],
            ranges: vec![r, (-0.7, 0.7)],
            min_abs: 0.0,
        },
        OpCase {
            name: "sinc_up2",
            kind: OpKind::SincUp2,
            shapes: vec![vec![2, 12]],
            ranges: vec![r],
            min_abs: 0.0,
        },
        OpCase {
            name: "sinc_down2",
            kind: OpKind::SincDown2,
            shapes: vec![vec![2, 12]],
            ranges: vec![r],
            min_abs: 0.0,
        },
        OpCase {
            name: "framed_dft_center",
            kind: OpKind::FramedDft { center: true },
            shapes: vec![vec![20]],
            ranges: vec![r],
            min_abs: 0.0,
        },
        OpCase {
            name: "framed_dft_nocenter",
            kind: OpKind::FramedDft { center: false },
            shapes: vec![vec![20]],
            ranges: vec![r],
            min_abs: 0.0,
        },
    ];
    for (name, stride, padding, dilation) in [
        ("conv1d_s1", 1usize, 1usize, 1usize),
        ("conv1d_s2", 2, 2, 1),
        ("conv1d_dilated", 1, 2, 2),
    ] {
        cases.push(OpCase {
            name,
            kind: OpKind::Conv1d {
                stride,
                padding,
                dilation,
            },
            shapes: vec![vec![2, 9], vec![3, 2, 3], vec![3]],
            ranges: vec![r, r, r],
            min_abs: 0.0,
        });
    }
    for (name, stride, padding) in [("convT1d_s1", 1usize, 1usize), ("convT1d_s2", 2, 2)] {
        cases.push(OpCase {
            name,
            kind: OpKind::ConvTranspose1d { stride, padding },
            shapes: vec![vec![2, 7], vec![2, 3, 4], vec![3]],
            ranges: vec![r, r, r],
            min_abs: 0.0,
        });
    }
    for (name, stride, padding) in [
        ("conv2d_s11", (1usize, 1usize), (1usize, 1usize)),
        ("conv2d_s31", (3, 1), (2, 0)),
        ("conv2d_s12", (1, 2), (1, 1)),
    ] {
        cases.push(OpCase {
            name,
            kind: OpKind::Conv2d { stride, padding },
            shapes: vec![vec![2, 6, 7], vec![2, 2, 3, 3], vec![2]],
            ranges: vec![r, r, r],
            min_abs: 0.0,
        });
    }
    cases
}

/// Draw FD-safe f32-grid values for a case.
pub fn sample_inputs(case: &OpCase, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    case.shapes
        .iter()
        .zip(&case.ranges)
        .map(|(shape, &(lo, hi))| {
            (0..shape.iter().product::<usize>())
                .map(|_| {
                    let mut v: f64 = rng.gen_range(lo..hi);
                    if v.abs() < case.min_abs {
                        v = if v >= 0.0 {
                            v + case.min_abs
                        } else {
                            v - case.min_abs
                        };
                    }
                    (v as f32) as f64
                })
                .collect()
        })
        .collect()
}

/// Forward-only loss evaluation in double precision.
fn loss_at(kind: &OpKind, shapes: &[Vec<usize>], values: &[Vec<f64>]) -> f64 {
    let inputs: Vec<Tensor<f64>> = shapes
        .iter()
        .zip(values)
        .map(|(s, v)| Tensor::from_vec(v.clone(), s).expect("case shapes"))
        .collect();
    build_case::<f64>(kind, &inputs)
        .expect("case builds")
        .item()
}

/// Worst deviation between analytic and FD gradients over all inputs of one
/// draw: |analytic - fd| / max(1, |fd|).
pub fn max_gradient_error<T: Scalar>(case: &OpCase, values: &[Vec<f64>]) -> f64 {
    // Analytic gradients at precision T.
    let inputs: Vec<Tensor<T>> = case
        .shapes
        .iter()
        .zip(values)
        .enumerate()
        .map(|(i, (s, v))| {
            Tensor::param(
                format!("in{i}"),
                v.iter().map(|&x| T::of_f64(x)).collect(),
                s,
            )
            .expect("case shapes")
        })
        .collect();
    let loss = build_case::<T>(&case.kind, &inputs).expect("case builds");
    let grads = backward(&loss).expect("backward");

    let mut worst: f64 = 0.0;
    for (i, vals) in values.iter().enumerate() {
        let name = format!("in{i}");
        let analytic = grads
            .get(&name)
            .map(|g| g.to_f64_vec())
            .unwrap_or_else(|| vec![0.0; vals.len()]);
        for j in 0..vals.len() {
            let h = 1e-5 * vals[j].abs().max(1.0);
            let mut plus = values.to_vec();
            plus[i][j] += h;
            let mut minus = values.to_vec();
            minus[i][j] -= h;
            let fd = (loss_at(&case.kind, &case.shapes, &plus)
                - loss_at(&case.kind, &case.shapes, &minus))
                / (2.0 * h);
            let err = (analytic[j] - fd).abs() / fd.abs().max(1.0);
            worst = worst.max(err);
        }
    }
    worst
}

/// Run `draws` random draws of one case at precision T; returns the worst
/// error seen.
pub fn check_case<T: Scalar>(case: &OpCase, draws: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..draws {
        let values = sample_inputs(case, &mut rng);
        worst = worst.max(max_gradient_error::<T>(case, &values));
    }
    worst
}
