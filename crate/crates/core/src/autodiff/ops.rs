//! Primitive differentiable operations.
//!
//! Each forward method on [`Value`] computes its output eagerly, records the
//! node, and rejects non-finite results. [`backward_rule`] holds the matching
//! vector-Jacobian products.

use super::graph::Value;
use super::tensor::{axis_split, Tensor};
use crate::error::{Error, Result};
use crate::scalar::{canonical_sum, Scalar};

/// How the two operands of an elementwise op line up.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Broadcast {
    Same,
    /// rhs has the trailing shape of lhs and is repeated along lhs's leading axis.
    Rhs,
    /// lhs has the trailing shape of rhs.
    Lhs,
}

#[derive(Clone, Debug)]
pub(crate) enum Op<T> {
    Leaf,
    MatMul,
    Add(Broadcast),
    Sub(Broadcast),
    Mul(Broadcast),
    Scale(T),
    Offset,
    Concat { axis: usize },
    Slice { axis: usize, start: usize },
    Sum { axis: usize },
    SumAll,
    Max { axis: usize, argmax: Vec<usize> },
    Exp,
    Log,
    Tanh,
    Sigmoid,
    Relu,
    LeakyRelu(T),
    Elu,
    Softplus,
    Softmax { axis: usize },
    L2Norm { axis: usize },
    L1Norm { axis: usize },
    Broadcast,
    Reshape,
    Transpose,
    Gather { indices: Vec<usize> },
}

impl<T> Op<T> {
    pub(crate) fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::MatMul => "matmul",
            Op::Add(_) => "add",
            Op::Sub(_) => "sub",
            Op::Mul(_) => "mul",
            Op::Scale(_) => "scale",
            Op::Offset => "offset",
            Op::Concat { .. } => "concat",
            Op::Slice { .. } => "slice",
            Op::Sum { .. } => "sum",
            Op::SumAll => "sum_all",
            Op::Max { .. } => "max",
            Op::Exp => "exp",
            Op::Log => "log",
            Op::Tanh => "tanh",
            Op::Sigmoid => "sigmoid",
            Op::Relu => "relu",
            Op::LeakyRelu(_) => "leaky_relu",
            Op::Elu => "elu",
            Op::Softplus => "softplus",
            Op::Softmax { .. } => "softmax",
            Op::L2Norm { .. } => "l2_norm",
            Op::L1Norm { .. } => "l1_norm",
            Op::Broadcast => "broadcast",
            Op::Reshape => "reshape",
            Op::Transpose => "transpose",
            Op::Gather { .. } => "gather",
        }
    }
}

fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

fn softplus<T: Scalar>(x: T) -> T {
    x.max(T::zero()) + (-x.abs()).exp().ln_1p()
}

fn check_axis(op: &'static str, shape: &[usize], axis: usize) -> Result<()> {
    if axis >= shape.len() {
        return Err(Error::dim(op, shape, &[axis]));
    }
    Ok(())
}

fn broadcast_mode(op: &'static str, lhs: &[usize], rhs: &[usize]) -> Result<Broadcast> {
    if lhs == rhs {
        Ok(Broadcast::Same)
    } else if !lhs.is_empty() && &lhs[1..] == rhs {
        Ok(Broadcast::Rhs)
    } else if !rhs.is_empty() && &rhs[1..] == lhs {
        Ok(Broadcast::Lhs)
    } else {
        Err(Error::dim(op, lhs, rhs))
    }
}

fn matmul_kernel<T: Scalar>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); m * n];
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == T::zero() {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o = *o + aip * bv;
            }
        }
    }
    out
}

/// Matrix product whose inner sums are taken in ascending value order, so
/// permuting the rows of `b` together with the columns of `a` permutes nothing
/// in the result's bits.
fn matmul_canonical<T: Scalar>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); m * n];
    let mut terms = vec![T::zero(); k];
    for i in 0..m {
        for j in 0..n {
            for (p, t) in terms.iter_mut().enumerate() {
                *t = a[i * k + p] * b[p * n + j];
            }
            out[i * n + j] = canonical_sum(&mut terms);
        }
    }
    out
}

fn transpose_kernel<T: Scalar>(x: &[T], rows: usize, cols: usize) -> Vec<T> {
    let mut out = vec![T::zero(); rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            out[j * rows + i] = x[i * cols + j];
        }
    }
    out
}

impl<'g, T: Scalar> Value<'g, T> {
    fn unary(self, op: Op<T>, f: impl Fn(T) -> T) -> Result<Self> {
        let out = self.graph.with_value(self.id, |x| x.map(f));
        self.graph.record(op, &[self.id], out)
    }

    fn binary(self, rhs: Self, op_name: &'static str, f: impl Fn(T, T) -> T) -> Result<Self> {
        let lhs_shape = self.shape();
        let rhs_shape = rhs.shape();
        let mode = broadcast_mode(op_name, &lhs_shape, &rhs_shape)?;
        let a = self.tensor();
        let b = rhs.tensor();
        let (big_shape, n_small) = match mode {
            Broadcast::Same | Broadcast::Rhs => (lhs_shape, b.numel()),
            Broadcast::Lhs => (rhs_shape, a.numel()),
        };
        let len: usize = big_shape.iter().product();
        let data: Vec<T> = match mode {
            Broadcast::Same => a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect(),
            Broadcast::Rhs => (0..len).map(|i| f(a.data()[i], b.data()[i % n_small])).collect(),
            Broadcast::Lhs => (0..len).map(|i| f(a.data()[i % n_small], b.data()[i])).collect(),
        };
        let op = match op_name {
            "add" => Op::Add(mode),
            "sub" => Op::Sub(mode),
            _ => Op::Mul(mode),
        };
        self.graph.record(op, &[self.id, rhs.id], Tensor::new(big_shape, data)?)
    }

    fn check_same_graph(&self, other: &Self) -> Result<()> {
        if !std::ptr::eq(self.graph, other.graph) {
            return Err(Error::contract("operands belong to different graphs"));
        }
        Ok(())
    }

    /// `[m, k] x [k, n] -> [m, n]`.
    pub fn matmul(self, rhs: Self) -> Result<Self> {
        self.matmul_impl(rhs, false)
    }

    /// Matrix product with order-independent inner sums.
    pub fn matmul_canonical(self, rhs: Self) -> Result<Self> {
        self.matmul_impl(rhs, true)
    }

    fn matmul_impl(self, rhs: Self, canonical: bool) -> Result<Self> {
        self.check_same_graph(&rhs)?;
        let a = self.tensor();
        let b = rhs.tensor();
        if a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0] {
            return Err(Error::dim("matmul", a.shape(), b.shape()));
        }
        let (m, k, n) = (a.shape()[0], a.shape()[1], b.shape()[1]);
        let data = if canonical {
            matmul_canonical(a.data(), b.data(), m, k, n)
        } else {
            matmul_kernel(a.data(), b.data(), m, k, n)
        };
        self.graph
            .record(Op::MatMul, &[self.id, rhs.id], Tensor::new(vec![m, n], data)?)
    }

    pub fn add(self, rhs: Self) -> Result<Self> {
        self.check_same_graph(&rhs)?;
        self.binary(rhs, "add", |a, b| a + b)
    }

    pub fn sub(self, rhs: Self) -> Result<Self> {
        self.check_same_graph(&rhs)?;
        self.binary(rhs, "sub", |a, b| a - b)
    }

    /// Elementwise product.
    pub fn mul(self, rhs: Self) -> Result<Self> {
        self.check_same_graph(&rhs)?;
        self.binary(rhs, "mul", |a, b| a * b)
    }

    pub fn scale(self, factor: T) -> Result<Self> {
        self.unary(Op::Scale(factor), |x| x * factor)
    }

    pub fn neg(self) -> Result<Self> {
        self.scale(-T::one())
    }

    /// Adds a constant to every element.
    pub fn offset(self, c: T) -> Result<Self> {
        self.unary(Op::Offset, |x| x + c)
    }

    pub fn square(self) -> Result<Self> {
        self.mul(self)
    }

    pub fn concat(parts: &[Self], axis: usize) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::contract("concat of zero values"))?;
        let graph = first.graph;
        let tensors: Vec<Tensor<T>> = parts.iter().map(Value::tensor).collect();
        let base = tensors[0].shape().to_vec();
        check_axis("concat", &base, axis)?;
        for (p, t) in parts.iter().zip(&tensors) {
            first.check_same_graph(p)?;
            let s = t.shape();
            if s.len() != base.len()
                || s.iter()
                    .zip(&base)
                    .enumerate()
                    .any(|(d, (x, y))| d != axis && x != y)
            {
                return Err(Error::dim("concat", &base, s));
            }
        }
        let mut shape = base.clone();
        shape[axis] = tensors.iter().map(|t| t.shape()[axis]).sum();
        let (outer, _, inner) = axis_split(&base, axis);
        let mut data = Vec::with_capacity(shape.iter().product());
        for o in 0..outer {
            for t in &tensors {
                let chunk = t.shape()[axis] * inner;
                data.extend_from_slice(&t.data()[o * chunk..(o + 1) * chunk]);
            }
        }
        let ids: Vec<_> = parts.iter().map(|p| p.id).collect();
        graph.record(Op::Concat { axis }, &ids, Tensor::new(shape, data)?)
    }

    /// Elements `start..end` along `axis`.
    pub fn slice(self, axis: usize, start: usize, end: usize) -> Result<Self> {
        let x = self.tensor();
        check_axis("slice", x.shape(), axis)?;
        if start >= end || end > x.shape()[axis] {
            return Err(Error::dim("slice", x.shape(), &[start, end]));
        }
        let (outer, len, inner) = axis_split(x.shape(), axis);
        let mut shape = x.shape().to_vec();
        shape[axis] = end - start;
        let mut data = Vec::with_capacity(outer * (end - start) * inner);
        for o in 0..outer {
            let base = o * len * inner;
            data.extend_from_slice(&x.data()[base + start * inner..base + end * inner]);
        }
        self.graph
            .record(Op::Slice { axis, start }, &[self.id], Tensor::new(shape, data)?)
    }

    pub fn sum(self, axis: usize) -> Result<Self> {
        let x = self.tensor();
        check_axis("sum", x.shape(), axis)?;
        let (outer, len, inner) = axis_split(x.shape(), axis);
        let mut data = vec![T::zero(); outer * inner];
        for o in 0..outer {
            for l in 0..len {
                for i in 0..inner {
                    data[o * inner + i] = data[o * inner + i] + x.data()[(o * len + l) * inner + i];
                }
            }
        }
        let mut shape = x.shape().to_vec();
        shape.remove(axis);
        self.graph.record(Op::Sum { axis }, &[self.id], Tensor::new(shape, data)?)
    }

    /// Sum of every element, as a rank-0 value.
    pub fn sum_all(self) -> Result<Self> {
        let total = self.graph.with_value(self.id, |x| x.data().iter().copied().sum());
        self.graph.record(Op::SumAll, &[self.id], Tensor::scalar(total))
    }

    pub fn mean_all(self) -> Result<Self> {
        let n = self.graph.with_value(self.id, Tensor::numel);
        self.sum_all()?.scale(T::one() / T::lit(n as f64))
    }

    /// Maximum along `axis`; ties resolve to the lowest index.
    pub fn max(self, axis: usize) -> Result<Self> {
        let x = self.tensor();
        check_axis("max", x.shape(), axis)?;
        let (outer, len, inner) = axis_split(x.shape(), axis);
        let mut data = vec![T::zero(); outer * inner];
        let mut argmax = vec![0; outer * inner];
        for o in 0..outer {
            for i in 0..inner {
                let mut best = x.data()[o * len * inner + i];
                let mut at = 0;
                for l in 1..len {
                    let v = x.data()[(o * len + l) * inner + i];
                    if v > best {
                        best = v;
                        at = l;
                    }
                }
                data[o * inner + i] = best;
                argmax[o * inner + i] = at;
            }
        }
        let mut shape = x.shape().to_vec();
        shape.remove(axis);
        self.graph
            .record(Op::Max { axis, argmax }, &[self.id], Tensor::new(shape, data)?)
    }

    /// Minimum along `axis`, as `-max(-x)`.
    pub fn min(self, axis: usize) -> Result<Self> {
        self.neg()?.max(axis)?.neg()
    }

    pub fn exp(self) -> Result<Self> {
        self.unary(Op::Exp, T::exp)
    }

    pub fn log(self) -> Result<Self> {
        self.unary(Op::Log, T::ln)
    }

    pub fn tanh(self) -> Result<Self> {
        self.unary(Op::Tanh, T::tanh)
    }

    pub fn sigmoid(self) -> Result<Self> {
        self.unary(Op::Sigmoid, sigmoid)
    }

    pub fn relu(self) -> Result<Self> {
        self.unary(Op::Relu, |x| x.max(T::zero()))
    }

    pub fn leaky_relu(self, slope: T) -> Result<Self> {
        self.unary(Op::LeakyRelu(slope), |x| if x > T::zero() { x } else { slope * x })
    }

    /// Exponential linear unit with unit scale.
    pub fn elu(self) -> Result<Self> {
        self.unary(Op::Elu, |x| if x > T::zero() { x } else { x.exp_m1() })
    }

    /// `ln(1 + e^x)`, evaluated without overflow.
    pub fn softplus(self) -> Result<Self> {
        self.unary(Op::Softplus, softplus)
    }

    pub fn softmax(self, axis: usize) -> Result<Self> {
        let x = self.tensor();
        check_axis("softmax", x.shape(), axis)?;
        let (outer, len, inner) = axis_split(x.shape(), axis);
        let mut data = x.data().to_vec();
        let mut exps = vec![T::zero(); len];
        for o in 0..outer {
            for i in 0..inner {
                let at = |l: usize| (o * len + l) * inner + i;
                let m = (0..len)
                    .map(|l| x.data()[at(l)])
                    .fold(T::neg_infinity(), T::max);
                for (l, e) in exps.iter_mut().enumerate() {
                    *e = (x.data()[at(l)] - m).exp();
                }
                let mut sorted = exps.clone();
                let z = canonical_sum(&mut sorted);
                for (l, e) in exps.iter().enumerate() {
                    data[at(l)] = *e / z;
                }
            }
        }
        self.graph
            .record(Op::Softmax { axis }, &[self.id], Tensor::new(x.shape().to_vec(), data)?)
    }

    /// Euclidean norm along `axis`.
    pub fn l2_norm(self, axis: usize) -> Result<Self> {
        self.reduce_norm(axis, Op::L2Norm { axis }, |xs| {
            xs.iter().fold(T::zero(), |a, &x| a + x * x).sqrt()
        })
    }

    /// Sum of absolute values along `axis`.
    pub fn l1_norm(self, axis: usize) -> Result<Self> {
        self.reduce_norm(axis, Op::L1Norm { axis }, |xs| {
            xs.iter().fold(T::zero(), |a, &x| a + x.abs())
        })
    }

    fn reduce_norm(self, axis: usize, op: Op<T>, f: impl Fn(&[T]) -> T) -> Result<Self> {
        let x = self.tensor();
        check_axis(op.name(), x.shape(), axis)?;
        let (outer, len, inner) = axis_split(x.shape(), axis);
        let mut data = Vec::with_capacity(outer * inner);
        let mut buf = vec![T::zero(); len];
        for o in 0..outer {
            for i in 0..inner {
                for (l, b) in buf.iter_mut().enumerate() {
                    *b = x.data()[(o * len + l) * inner + i];
                }
                data.push(f(&buf));
            }
        }
        let mut shape = x.shape().to_vec();
        shape.remove(axis);
        self.graph.record(op, &[self.id], Tensor::new(shape, data)?)
    }

    /// Repeats this value `count` times along a new leading axis.
    pub fn broadcast(self, count: usize) -> Result<Self> {
        let x = self.tensor();
        let mut shape = vec![count];
        shape.extend_from_slice(x.shape());
        let mut data = Vec::with_capacity(count * x.numel());
        for _ in 0..count {
            data.extend_from_slice(x.data());
        }
        self.graph.record(Op::Broadcast, &[self.id], Tensor::new(shape, data)?)
    }

    pub fn reshape(self, shape: &[usize]) -> Result<Self> {
        let x = self.tensor().reshaped(shape.to_vec())?;
        self.graph.record(Op::Reshape, &[self.id], x)
    }

    /// Transpose of a 2-D value.
    pub fn transpose(self) -> Result<Self> {
        let x = self.tensor();
        if x.rank() != 2 {
            return Err(Error::dim("transpose", x.shape(), &[2]));
        }
        let (r, c) = (x.shape()[0], x.shape()[1]);
        let data = transpose_kernel(x.data(), r, c);
        self.graph.record(Op::Transpose, &[self.id], Tensor::new(vec![c, r], data)?)
    }

    /// Selects rows of a 2-D value; indices may repeat.
    pub fn gather_rows(self, indices: &[usize]) -> Result<Self> {
        let x = self.tensor();
        if x.rank() != 2 {
            return Err(Error::dim("gather", x.shape(), &[2]));
        }
        let (rows, cols) = (x.shape()[0], x.shape()[1]);
        let mut data = Vec::with_capacity(indices.len() * cols);
        for &r in indices {
            if r >= rows {
                return Err(Error::dim("gather", x.shape(), &[r]));
            }
            data.extend_from_slice(x.row(r));
        }
        self.graph.record(
            Op::Gather {
                indices: indices.to_vec(),
            },
            &[self.id],
            Tensor::new(vec![indices.len(), cols], data)?,
        )
    }
}

fn reduce_leading<T: Scalar>(g: &Tensor<T>, small_shape: &[usize]) -> Tensor<T> {
    let n: usize = small_shape.iter().product();
    let mut data = vec![T::zero(); n];
    for (i, &v) in g.data().iter().enumerate() {
        data[i % n] = data[i % n] + v;
    }
    Tensor::new(small_shape.to_vec(), data).expect("reduced shape")
}

fn elementwise<T: Scalar>(x: &Tensor<T>, g: &Tensor<T>, f: impl Fn(T, T) -> T) -> Tensor<T> {
    let data = x.data().iter().zip(g.data()).map(|(&a, &b)| f(a, b)).collect();
    Tensor::new(x.shape().to_vec(), data).expect("same shape")
}

/// Gradient of `upstream` with respect to each input of a recorded node.
/// Entries for inputs that do not require a gradient are `None`.
pub(crate) fn backward_rule<T: Scalar>(
    op: &Op<T>,
    inputs: &[&Tensor<T>],
    out: &Tensor<T>,
    g: &Tensor<T>,
    needs: &[bool],
) -> Vec<Option<Tensor<T>>> {
    let x = inputs[0];
    let one = |t: Tensor<T>| vec![Some(t)];
    match op {
        Op::Leaf => Vec::new(),
        Op::MatMul => {
            let (a, b) = (inputs[0], inputs[1]);
            let (m, k, n) = (a.shape()[0], a.shape()[1], b.shape()[1]);
            let da = needs[0].then(|| {
                let bt = transpose_kernel(b.data(), k, n);
                Tensor::new(vec![m, k], matmul_kernel(g.data(), &bt, m, n, k)).unwrap()
            });
            let db = needs[1].then(|| {
                let at = transpose_kernel(a.data(), m, k);
                Tensor::new(vec![k, n], matmul_kernel(&at, g.data(), k, m, n)).unwrap()
            });
            vec![da, db]
        }
        Op::Add(mode) | Op::Sub(mode) => {
            let sign = if matches!(op, Op::Sub(_)) { -T::one() } else { T::one() };
            let (a, b) = (inputs[0], inputs[1]);
            let ga = match mode {
                Broadcast::Lhs => reduce_leading(g, a.shape()),
                _ => g.clone(),
            };
            let gb = match mode {
                Broadcast::Rhs => reduce_leading(g, b.shape()),
                _ => g.clone(),
            };
            vec![needs[0].then_some(ga), needs[1].then(|| gb.map(|v| v * sign))]
        }
        Op::Mul(mode) => {
            let (a, b) = (inputs[0], inputs[1]);
            let expand = |small: &Tensor<T>| -> Vec<T> {
                let n = small.numel();
                (0..g.numel()).map(|i| small.data()[i % n]).collect()
            };
            let a_full = if *mode == Broadcast::Lhs { expand(a) } else { a.data().to_vec() };
            let b_full = if *mode == Broadcast::Rhs { expand(b) } else { b.data().to_vec() };
            let ga = needs[0].then(|| {
                let full = Tensor::new(
                    g.shape().to_vec(),
                    g.data().iter().zip(&b_full).map(|(&u, &v)| u * v).collect(),
                )
                .unwrap();
                if *mode == Broadcast::Lhs {
                    reduce_leading(&full, a.shape())
                } else {
                    full
                }
            });
            let gb = needs[1].then(|| {
                let full = Tensor::new(
                    g.shape().to_vec(),
                    g.data().iter().zip(&a_full).map(|(&u, &v)| u * v).collect(),
                )
                .unwrap();
                if *mode == Broadcast::Rhs {
                    reduce_leading(&full, b.shape())
                } else {
                    full
                }
            });
            vec![ga, gb]
        }
        Op::Scale(c) => one(g.map(|v| v * *c)),
        Op::Offset | Op::Reshape => one(Tensor::new(x.shape().to_vec(), g.data().to_vec()).unwrap()),
        Op::Concat { axis } => {
            let (outer, _, inner) = axis_split(out.shape(), *axis);
            let total = out.shape()[*axis];
            let mut offset = 0;
            inputs
                .iter()
                .zip(needs)
                .map(|(t, &need)| {
                    let len = t.shape()[*axis];
                    let grad = need.then(|| {
                        let mut data = Vec::with_capacity(t.numel());
                        for o in 0..outer {
                            let base = (o * total + offset) * inner;
                            data.extend_from_slice(&g.data()[base..base + len * inner]);
                        }
                        Tensor::new(t.shape().to_vec(), data).unwrap()
                    });
                    offset += len;
                    grad
                })
                .collect()
        }
        Op::Slice { axis, start } => {
            let (outer, len, inner) = axis_split(x.shape(), *axis);
            let width = out.shape()[*axis];
            let mut data = vec![T::zero(); x.numel()];
            for o in 0..outer {
                let src = o * width * inner;
                let dst = (o * len + start) * inner;
                data[dst..dst + width * inner].copy_from_slice(&g.data()[src..src + width * inner]);
            }
            one(Tensor::new(x.shape().to_vec(), data).unwrap())
        }
        Op::Sum { axis } => {
            let (outer, len, inner) = axis_split(x.shape(), *axis);
            let mut data = vec![T::zero(); x.numel()];
            for o in 0..outer {
                for l in 0..len {
                    for i in 0..inner {
                        data[(o * len + l) * inner + i] = g.data()[o * inner + i];
                    }
                }
            }
            one(Tensor::new(x.shape().to_vec(), data).unwrap())
        }
        Op::SumAll => one(Tensor::filled(x.shape().to_vec(), g.data()[0])),
        Op::Max { axis, argmax } => {
            let (outer, len, inner) = axis_split(x.shape(), *axis);
            let mut data = vec![T::zero(); x.numel()];
            for o in 0..outer {
                for i in 0..inner {
                    let l = argmax[o * inner + i];
                    data[(o * len + l) * inner + i] = g.data()[o * inner + i];
                }
            }
            one(Tensor::new(x.shape().to_vec(), data).unwrap())
        }
        Op::Exp => one(elementwise(out, g, |y, u| y * u)),
        Op::Log => one(elementwise(x, g, |v, u| u / v)),
        Op::Tanh => one(elementwise(out, g, |y, u| u * (T::one() - y * y))),
        Op::Sigmoid => one(elementwise(out, g, |y, u| u * y * (T::one() - y))),
        Op::Relu => one(elementwise(x, g, |v, u| if v > T::zero() { u } else { T::zero() })),
        Op::LeakyRelu(slope) => one(elementwise(x, g, |v, u| if v > T::zero() { u } else { u * *slope })),
        Op::Elu => one(elementwise(x, g, |v, u| if v > T::zero() { u } else { u * v.exp() })),
        Op::Softplus => one(elementwise(x, g, |v, u| u * sigmoid(v))),
        Op::Softmax { axis } => {
            let (outer, len, inner) = axis_split(x.shape(), *axis);
            let mut data = vec![T::zero(); x.numel()];
            for o in 0..outer {
                for i in 0..inner {
                    let at = |l: usize| (o * len + l) * inner + i;
                    let dot = (0..len).fold(T::zero(), |acc, l| acc + g.data()[at(l)] * out.data()[at(l)]);
                    for l in 0..len {
                        data[at(l)] = out.data()[at(l)] * (g.data()[at(l)] - dot);
                    }
                }
            }
            one(Tensor::new(x.shape().to_vec(), data).unwrap())
        }
        Op::L2Norm { axis } | Op::L1Norm { axis } => {
            let l2 = matches!(op, Op::L2Norm { .. });
            let (outer, len, inner) = axis_split(x.shape(), *axis);
            let mut data = vec![T::zero(); x.numel()];
            for o in 0..outer {
                for i in 0..inner {
                    let r = o * inner + i;
                    for l in 0..len {
                        let at = (o * len + l) * inner + i;
                        let v = x.data()[at];
                        data[at] = if l2 {
                            if out.data()[r] > T::zero() {
                                g.data()[r] * v / out.data()[r]
                            } else {
                                T::zero()
                            }
                        } else if v > T::zero() {
                            g.data()[r]
                        } else if v < T::zero() {
                            -g.data()[r]
                        } else {
                            T::zero()
                        };
                    }
                }
            }
            one(Tensor::new(x.shape().to_vec(), data).unwrap())
        }
        Op::Broadcast => one(reduce_leading(g, x.shape())),
        Op::Transpose => {
            let (r, c) = (x.shape()[0], x.shape()[1]);
            one(Tensor::new(vec![r, c], transpose_kernel(g.data(), c, r)).unwrap())
        }
        Op::Gather { indices } => {
            let cols = x.shape()[1];
            let mut data = vec![T::zero(); x.numel()];
            for (k, &r) in indices.iter().enumerate() {
                for c in 0..cols {
                    data[r * cols + c] = data[r * cols + c] + g.data()[k * cols + c];
                }
            }
            one(Tensor::new(x.shape().to_vec(), data).unwrap())
        }
    }
}
