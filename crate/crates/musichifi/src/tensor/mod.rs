//! Minimal n-dimensional array with reverse-mode differentiation.
//!
//! Covers exactly what the generator, the discriminator ensemble, and the
//! loss terms need: element-wise math, reductions, matmul, 1-D/2-D
//! (transposed) convolution, the snake activation, fixed sinc 2x up/down
//! resampling, and a differentiable framed DFT.
//!
//! A graph is confined to one thread from forward through backward; leaves
//! (parameters and constants) outlive graphs and may be updated between
//! steps via [`Tensor::set_data`].

mod conv;
mod dft;
mod ops;

pub mod gradcheck;

use std::cell::{Ref, RefCell};
use std::collections::BTreeMap;
use std::collections::HashMap;
use std::fmt;
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};

pub use dft::dft_bins;

/// Element type of tensors: `f32` for training speed, `f64` for oracle and
/// gradient tests.
pub trait Scalar:
    num_traits::Float + num_traits::FromPrimitive + rustfft::FftNum + Default + fmt::Display
{
    const NAME: &'static str;

    fn of_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    const NAME: &'static str = "f32";

    fn of_f64(v: f64) -> Self {
        v as f32
    }

    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    const NAME: &'static str = "f64";

    fn of_f64(v: f64) -> Self {
        v
    }

    fn as_f64(self) -> f64 {
        self
    }
}

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

pub(crate) struct Node<T: Scalar> {
    id: u64,
    shape: Vec<usize>,
    data: RefCell<Vec<T>>,
    op: Op<T>,
}

pub(crate) enum Op<T: Scalar> {
    Leaf {
        name: Option<String>,
    },
    Add(Tensor<T>, Tensor<T>),
    Sub(Tensor<T>, Tensor<T>),
    Mul(Tensor<T>, Tensor<T>),
    AddScalar(Tensor<T>),
    MulScalar(Tensor<T>, T),
    Tanh(Tensor<T>),
    Abs(Tensor<T>),
    Ln(Tensor<T>),
    Exp(Tensor<T>),
    Sqr(Tensor<T>),
    Sqrt(Tensor<T>),
    LeakyRelu(Tensor<T>, T),
    ClampMin(Tensor<T>, T),
    Mean(Tensor<T>),
    Sum(Tensor<T>),
    Matmul(Tensor<T>, Tensor<T>),
    Transpose2(Tensor<T>),
    Reshape(Tensor<T>),
    Concat(Vec<Tensor<T>>, usize),
    Narrow {
        x: Tensor<T>,
        axis: usize,
        start: usize,
        len: usize,
    },
    ReflectPadEnd(Tensor<T>, usize),
    Snake {
        x: Tensor<T>,
        log_alpha: Tensor<T>,
    },
    Conv1d {
        x: Tensor<T>,
        w: Tensor<T>,
        bias: Option<Tensor<T>>,
        stride: usize,
        padding: usize,
        dilation: usize,
    },
    ConvTranspose1d {
        x: Tensor<T>,
        w: Tensor<T>,
        bias: Option<Tensor<T>>,
        stride: usize,
        padding: usize,
    },
    Conv2d {
        x: Tensor<T>,
        w: Tensor<T>,
        bias: Option<Tensor<T>>,
        stride: (usize, usize),
        padding: (usize, usize),
    },
    SincUp2 {
        x: Tensor<T>,
        kernel: Vec<T>,
    },
    SincDown2 {
        x: Tensor<T>,
        kernel: Vec<T>,
    },
    FramedDft {
        x: Tensor<T>,
        window: usize,
        hop: usize,
        center: bool,
    },
}

/// Shared handle to a graph node.
pub struct Tensor<T: Scalar> {
    pub(crate) node: Rc<Node<T>>,
}

impl<T: Scalar> Clone for Tensor<T> {
    fn clone(&self) -> Self {
        Tensor {
            node: Rc::clone(&self.node),
        }
    }
}

impl<T: Scalar> fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tensor(id={}, shape={:?})", self.node.id, self.shape())
    }
}

impl<T: Scalar> Tensor<T> {
    pub(crate) fn new_node(shape: Vec<usize>, data: Vec<T>, op: Op<T>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Tensor {
            node: Rc::new(Node {
                id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
                shape,
                data: RefCell::new(data),
                op,
            }),
        }
    }

    /// Constant (unnamed) leaf.
    pub fn from_vec(data: Vec<T>, shape: &[usize]) -> Result<Self> {
        if shape.iter().product::<usize>() != data.len() {
            return Err(Error::Shape(format!(
                "data length {} does not match shape {:?}",
                data.len(),
                shape
            )));
        }
        Ok(Self::new_node(
            shape.to_vec(),
            data,
            Op::Leaf { name: None },
        ))
    }

    pub fn from_f64_slice(data: &[f64], shape: &[usize]) -> Result<Self> {
        Self::from_vec(data.iter().map(|&v| T::of_f64(v)).collect(), shape)
    }

    /// Named leaf participating in gradient collection.
    pub fn param(name: impl Into<String>, data: Vec<T>, shape: &[usize]) -> Result<Self> {
        if shape.iter().product::<usize>() != data.len() {
            return Err(Error::Shape(format!(
                "data length {} does not match shape {:?}",
                data.len(),
                shape
            )));
        }
        Ok(Self::new_node(
            shape.to_vec(),
            data,
            Op::Leaf {
                name: Some(name.into()),
            },
        ))
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::new_node(
            shape.to_vec(),
            vec![T::zero(); shape.iter().product()],
            Op::Leaf { name: None },
        )
    }

    pub fn scalar(v: T) -> Self {
        Self::new_node(vec![], vec![v], Op::Leaf { name: None })
    }

    pub fn shape(&self) -> &[usize] {
        &self.node.shape
    }

    pub fn numel(&self) -> usize {
        self.node.data.borrow().len()
    }

    pub fn data(&self) -> Ref<'_, Vec<T>> {
        self.node.data.borrow()
    }

    pub fn to_vec(&self) -> Vec<T> {
        self.node.data.borrow().clone()
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.node.data.borrow().iter().map(|v| v.as_f64()).collect()
    }

    /// Single value of a scalar (or one-element) tensor.
    pub fn item(&self) -> T {
        debug_assert_eq!(self.numel(), 1);
        self.node.data.borrow()[0]
    }

    pub fn name(&self) -> Option<String> {
        match &self.node.op {
            Op::Leaf { name } => name.clone(),
            _ => None,
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self.node.op, Op::Leaf { .. })
    }

    /// Overwrite a leaf's values (optimizer updates). Only valid on leaves;
    /// graphs built from the old values must already be dropped.
    pub fn set_data(&self, values: &[T]) {
        debug_assert!(self.is_leaf(), "set_data on a non-leaf tensor");
        debug_assert_eq!(values.len(), self.numel());
        self.node.data.borrow_mut().copy_from_slice(values);
    }

    /// Constant copy severed from the graph.
    pub fn detach(&self) -> Tensor<T> {
        Self::new_node(
            self.node.shape.clone(),
            self.to_vec(),
            Op::Leaf { name: None },
        )
    }

    pub(crate) fn id(&self) -> u64 {
        self.node.id
    }
}

/// Gradients keyed by parameter name, in name order.
pub type Gradients<T> = BTreeMap<String, Tensor<T>>;

/// Reverse-mode gradients of a scalar loss with respect to every named leaf
/// reachable from it. Accumulation across shared parameters is additive; the
/// graph is freed when the caller drops the loss and intermediates.
pub fn backward<T: Scalar>(loss: &Tensor<T>) -> Result<Gradients<T>> {
    if loss.numel() != 1 {
        return Err(Error::Contract(format!(
            "backward expects a scalar loss, got shape {:?}",
            loss.shape()
        )));
    }

    // Post-order over the graph (parents before dependents), iteratively.
    let order = topo_order(loss);

    let mut grads: HashMap<u64, Vec<T>> = HashMap::new();
    grads.insert(loss.id(), vec![T::one()]);

    let mut named: Gradients<T> = BTreeMap::new();
    for tensor in order.iter().rev() {
        let Some(grad) = grads.remove(&tensor.id()) else {
            continue;
        };
        if let Op::Leaf { name } = &tensor.node.op {
            if let Some(name) = name {
                match named.entry(name.clone()) {
                    std::collections::btree_map::Entry::Vacant(e) => {
                        e.insert(Tensor::new_node(
                            tensor.node.shape.clone(),
                            grad,
                            Op::Leaf { name: None },
                        ));
                    }
                    std::collections::btree_map::Entry::Occupied(e) => {
                        let mut acc = e.get().node.data.borrow_mut();
                        for (a, g) in acc.iter_mut().zip(&grad) {
                            *a = *a + *g;
                        }
                    }
                }
            }
            continue;
        }
        ops::accumulate_parent_grads(tensor, &grad, &mut grads);
    }
    Ok(named)
}

/// Topological order of the graph below `root`: every node appears after all
/// of its parents. Iterative DFS so deep graphs cannot overflow the stack.
fn topo_order<T: Scalar>(root: &Tensor<T>) -> Vec<Tensor<T>> {
    let mut order: Vec<Tensor<T>> = Vec::new();
    let mut visited: HashMap<u64, bool> = HashMap::new(); // false = open, true = done
    let mut stack: Vec<(Tensor<T>, usize)> = vec![(root.clone(), 0)];
    while let Some((tensor, child_idx)) = stack.pop() {
        if child_idx == 0 {
            match visited.get(&tensor.id()) {
                Some(_) => continue,
                None => {
                    visited.insert(tensor.id(), false);
                }
            }
        }
        let parents = ops::op_parents(&tensor.node.op);
        if child_idx < parents.len() {
            let next = parents[child_idx].clone();
            stack.push((tensor, child_idx + 1));
            if !visited.contains_key(&next.id()) {
                stack.push((next, 0));
            }
        } else {
            visited.insert(tensor.id(), true);
            order.push(tensor);
        }
    }
    order
}
