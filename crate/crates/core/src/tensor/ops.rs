use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::tape::Node;
use super::{Real, Tensor, TensorError, Var};

pub(crate) enum Op<T> {
    Leaf,
    MatMul { a: usize, b: usize, m: usize, k: usize, n: usize },
    BatchMatMul { a: usize, b: usize, batch: usize, m: usize, k: usize, n: usize },
    Add { a: usize, b: usize },
    Mul { a: usize, b: usize },
    Scale { a: usize, c: T },
    Relu { a: usize },
    Softmax { a: usize, axis: usize },
    LayerNorm { x: usize, gain: usize, bias: usize, axis: usize, xhat: Vec<T>, rstd: Vec<f64> },
    Embedding { table: usize, ids: Vec<usize> },
    Concat { inputs: Vec<usize>, axis: usize },
    Slice { a: usize, axis: usize, start: usize, end: usize },
    Dropout { a: usize, mask: Vec<T> },
    CrossEntropy { logits: usize, targets: Vec<usize>, ignore: usize, probs: Vec<T>, count: usize },
    Sum { a: usize },
    Mean { a: usize },
    Transpose { a: usize, ax1: usize, ax2: usize },
    Reshape { a: usize },
}

impl<T> Op<T> {
    pub fn inputs(&self) -> Vec<usize> {
        match self {
            Op::Leaf => vec![],
            Op::MatMul { a, b, .. }
            | Op::BatchMatMul { a, b, .. }
            | Op::Add { a, b }
            | Op::Mul { a, b } => vec![*a, *b],
            Op::LayerNorm { x, gain, bias, .. } => vec![*x, *gain, *bias],
            Op::Embedding { table, .. } => vec![*table],
            Op::Concat { inputs, .. } => inputs.clone(),
            Op::CrossEntropy { logits, .. } => vec![*logits],
            Op::Scale { a, .. }
            | Op::Relu { a }
            | Op::Softmax { a, .. }
            | Op::Slice { a, .. }
            | Op::Dropout { a, .. }
            | Op::Sum { a }
            | Op::Mean { a }
            | Op::Transpose { a, .. }
            | Op::Reshape { a } => vec![*a],
        }
    }
}

/// (outer, len, inner) view of a shape around `axis`.
fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

/// Number of repetitions when `b` broadcasts over the leading axes of `a`.
fn suffix_reps(a: &[usize], b: &[usize]) -> Option<usize> {
    if b.len() > a.len() || a[a.len() - b.len()..] != *b {
        return None;
    }
    Some(a[..a.len() - b.len()].iter().product())
}

fn shape_err(op: &'static str, left: &[usize], right: &[usize]) -> TensorError {
    TensorError::Shape {
        op,
        left: left.to_vec(),
        right: right.to_vec(),
    }
}

fn swap_axes<T: Copy>(data: &[T], shape: &[usize], ax1: usize, ax2: usize) -> Vec<T> {
    let rank = shape.len();
    let mut strides = vec![1usize; rank];
    for d in (0..rank.saturating_sub(1)).rev() {
        strides[d] = strides[d + 1] * shape[d + 1];
    }
    let mut out_shape = shape.to_vec();
    out_shape.swap(ax1, ax2);
    let mut src_strides = strides.clone();
    src_strides.swap(ax1, ax2);

    let mut out = Vec::with_capacity(data.len());
    let mut idx = vec![0usize; rank];
    for _ in 0..data.len() {
        let src: usize = idx.iter().zip(&src_strides).map(|(i, s)| i * s).sum();
        out.push(data[src]);
        for d in (0..rank).rev() {
            idx[d] += 1;
            if idx[d] < out_shape[d] {
                break;
            }
            idx[d] = 0;
        }
    }
    out
}

impl<'t, T: Real> Var<'t, T> {
    /// `[..., k] x [k, n] -> [..., n]`.
    pub fn matmul(&self, other: &Var<'t, T>) -> Result<Var<'t, T>, TensorError> {
        let (out, op) = {
            let a = self.value();
            let b = other.value();
            if a.rank() < 1 || b.rank() != 2 || a.shape[a.rank() - 1] != b.shape[0] {
                return Err(shape_err("matmul", &a.shape, &b.shape));
            }
            let (k, n) = (b.shape[0], b.shape[1]);
            let m = a.numel() / k.max(1);
            let mut c = vec![T::zero(); m * n];
            T::gemm(m, k, n, &a.data, (k, 1), &b.data, (n, 1), T::zero(), &mut c, n);
            let mut shape = a.shape.clone();
            *shape.last_mut().unwrap() = n;
            (
                Tensor { shape, data: c },
                Op::MatMul { a: self.id, b: other.id, m, k, n },
            )
        };
        self.tape.push("matmul", out, op)
    }

    /// Batched `[B, m, k] x [B, k, n] -> [B, m, n]`.
    pub fn bmm(&self, other: &Var<'t, T>) -> Result<Var<'t, T>, TensorError> {
        let (out, op) = {
            let a = self.value();
            let b = other.value();
            if a.rank() != 3 || b.rank() != 3 || a.shape[0] != b.shape[0] || a.shape[2] != b.shape[1]
            {
                return Err(shape_err("bmm", &a.shape, &b.shape));
            }
            let (batch, m, k, n) = (a.shape[0], a.shape[1], a.shape[2], b.shape[2]);
            let mut c = vec![T::zero(); batch * m * n];
            for i in 0..batch {
                T::gemm(
                    m,
                    k,
                    n,
                    &a.data[i * m * k..(i + 1) * m * k],
                    (k, 1),
                    &b.data[i * k * n..(i + 1) * k * n],
                    (n, 1),
                    T::zero(),
                    &mut c[i * m * n..(i + 1) * m * n],
                    n,
                );
            }
            (
                Tensor { shape: vec![batch, m, n], data: c },
                Op::BatchMatMul { a: self.id, b: other.id, batch, m, k, n },
            )
        };
        self.tape.push("bmm", out, op)
    }

    /// Elementwise sum; `other` may broadcast over leading axes (its shape must
    /// be a suffix of `self`'s).
    pub fn add(&self, other: &Var<'t, T>) -> Result<Var<'t, T>, TensorError> {
        self.binary("add", other, |x, y| x + y, |a, b| Op::Add { a, b })
    }

    /// Elementwise product with the same broadcasting rule as [`Var::add`].
    pub fn mul(&self, other: &Var<'t, T>) -> Result<Var<'t, T>, TensorError> {
        self.binary("mul", other, |x, y| x * y, |a, b| Op::Mul { a, b })
    }

    fn binary(
        &self,
        name: &'static str,
        other: &Var<'t, T>,
        f: impl Fn(T, T) -> T,
        op: impl FnOnce(usize, usize) -> Op<T>,
    ) -> Result<Var<'t, T>, TensorError> {
        let out = {
            let a = self.value();
            let b = other.value();
            if suffix_reps(&a.shape, &b.shape).is_none() {
                return Err(shape_err(name, &a.shape, &b.shape));
            }
            let nb = b.numel();
            let data = a
                .data
                .chunks(nb.max(1))
                .flat_map(|chunk| chunk.iter().zip(&b.data).map(|(&x, &y)| f(x, y)))
                .collect();
            Tensor { shape: a.shape.clone(), data }
        };
        self.tape.push(name, out, op(self.id, other.id))
    }

    pub fn scale(&self, c: f64) -> Result<Var<'t, T>, TensorError> {
        let c = T::of(c);
        let out = {
            let a = self.value();
            Tensor {
                shape: a.shape.clone(),
                data: a.data.iter().map(|&x| x * c).collect(),
            }
        };
        self.tape.push("scale", out, Op::Scale { a: self.id, c })
    }

    pub fn relu(&self) -> Result<Var<'t, T>, TensorError> {
        let out = {
            let a = self.value();
            Tensor {
                shape: a.shape.clone(),
                data: a.data.iter().map(|&x| if x > T::zero() { x } else { T::zero() }).collect(),
            }
        };
        self.tape.push("relu", out, Op::Relu { a: self.id })
    }

    pub fn softmax(&self, axis: usize) -> Result<Var<'t, T>, TensorError> {
        let out = {
            let a = self.value();
            if axis >= a.rank() {
                return Err(TensorError::Invalid {
                    op: "softmax",
                    msg: format!("axis {axis} out of range for shape {:?}", a.shape),
                });
            }
            let (outer, n, inner) = split_axis(&a.shape, axis);
            let mut data = vec![T::zero(); a.numel()];
            for o in 0..outer {
                for i in 0..inner {
                    let at = |j: usize| o * n * inner + j * inner + i;
                    let max = (0..n).map(|j| a.data[at(j)]).fold(T::neg_infinity(), T::max);
                    let mut total = 0.0f64;
                    for j in 0..n {
                        let e = (a.data[at(j)] - max).exp();
                        data[at(j)] = e;
                        total += e.f64();
                    }
                    let inv = T::of(1.0 / total);
                    for j in 0..n {
                        data[at(j)] = data[at(j)] * inv;
                    }
                }
            }
            Tensor { shape: a.shape.clone(), data }
        };
        self.tape.push("softmax", out, Op::Softmax { a: self.id, axis })
    }

    /// Normalises along `axis` to zero mean and unit variance, then applies
    /// `gain` and `bias` (both shaped `[len(axis)]`).
    pub fn layer_norm(
        &self,
        gain: &Var<'t, T>,
        bias: &Var<'t, T>,
        axis: usize,
        eps: f64,
    ) -> Result<Var<'t, T>, TensorError> {
        let (out, xhat, rstd) = {
            let x = self.value();
            let g = gain.value();
            let b = bias.value();
            if axis >= x.rank() {
                return Err(TensorError::Invalid {
                    op: "layer_norm",
                    msg: format!("axis {axis} out of range for shape {:?}", x.shape),
                });
            }
            let (outer, n, inner) = split_axis(&x.shape, axis);
            if g.shape != [n] || b.shape != [n] {
                return Err(shape_err("layer_norm", &x.shape, &g.shape));
            }
            let mut y = vec![T::zero(); x.numel()];
            let mut xhat = vec![T::zero(); x.numel()];
            let mut rstd = Vec::with_capacity(outer * inner);
            for o in 0..outer {
                for i in 0..inner {
                    let at = |j: usize| o * n * inner + j * inner + i;
                    let mean = (0..n).map(|j| x.data[at(j)].f64()).sum::<f64>() / n as f64;
                    let var = (0..n)
                        .map(|j| (x.data[at(j)].f64() - mean).powi(2))
                        .sum::<f64>()
                        / n as f64;
                    let r = 1.0 / (var + eps).sqrt();
                    for j in 0..n {
                        let h = (x.data[at(j)].f64() - mean) * r;
                        xhat[at(j)] = T::of(h);
                        y[at(j)] = T::of(h * g.data[j].f64() + b.data[j].f64());
                    }
                    rstd.push(r);
                }
            }
            (Tensor { shape: x.shape.clone(), data: y }, xhat, rstd)
        };
        self.tape.push(
            "layer_norm",
            out,
            Op::LayerNorm { x: self.id, gain: gain.id, bias: bias.id, axis, xhat, rstd },
        )
    }

    /// Gathers rows of a `[V, d]` table: output shape is `ids_shape + [d]`.
    pub fn embedding(&self, ids: &[usize], ids_shape: &[usize]) -> Result<Var<'t, T>, TensorError> {
        let out = {
            let table = self.value();
            if table.rank() != 2 {
                return Err(shape_err("embedding", &table.shape, ids_shape));
            }
            if ids_shape.iter().product::<usize>() != ids.len() {
                return Err(TensorError::Length {
                    expected: ids_shape.iter().product(),
                    got: ids.len(),
                });
            }
            let (v, d) = (table.shape[0], table.shape[1]);
            let mut data = Vec::with_capacity(ids.len() * d);
            for &id in ids {
                if id >= v {
                    return Err(TensorError::Invalid {
                        op: "embedding",
                        msg: format!("id {id} out of range for table of {v} rows"),
                    });
                }
                data.extend_from_slice(&table.data[id * d..(id + 1) * d]);
            }
            let mut shape = ids_shape.to_vec();
            shape.push(d);
            Tensor { shape, data }
        };
        self.tape.push("embedding", out, Op::Embedding { table: self.id, ids: ids.to_vec() })
    }

    pub fn concat(parts: &[Var<'t, T>], axis: usize) -> Result<Var<'t, T>, TensorError> {
        let first = parts.first().ok_or_else(|| TensorError::Invalid {
            op: "concat",
            msg: "no inputs".into(),
        })?;
        let tape = first.tape;
        let out = {
            let values: Vec<_> = parts.iter().map(|p| p.value()).collect();
            let base = &values[0].shape;
            if axis >= base.len() {
                return Err(TensorError::Invalid {
                    op: "concat",
                    msg: format!("axis {axis} out of range for shape {base:?}"),
                });
            }
            for v in &values[1..] {
                let ok = v.rank() == base.len()
                    && v.shape.iter().zip(base).enumerate().all(|(d, (x, y))| d == axis || x == y);
                if !ok {
                    return Err(shape_err("concat", base, &v.shape));
                }
            }
            let (outer, _, inner) = split_axis(base, axis);
            let total: usize = values.iter().map(|v| v.shape[axis]).sum();
            let mut data = Vec::with_capacity(outer * total * inner);
            for o in 0..outer {
                for v in &values {
                    let w = v.shape[axis] * inner;
                    data.extend_from_slice(&v.data[o * w..(o + 1) * w]);
                }
            }
            let mut shape = base.clone();
            shape[axis] = total;
            Tensor { shape, data }
        };
        let inputs = parts.iter().map(|p| p.id).collect();
        tape.push("concat", out, Op::Concat { inputs, axis })
    }

    pub fn slice(&self, axis: usize, start: usize, end: usize) -> Result<Var<'t, T>, TensorError> {
        let out = {
            let a = self.value();
            if axis >= a.rank() || start >= end || end > a.shape[axis] {
                return Err(TensorError::Invalid {
                    op: "slice",
                    msg: format!("range {start}..{end} on axis {axis} of {:?}", a.shape),
                });
            }
            let (outer, n, inner) = split_axis(&a.shape, axis);
            let mut data = Vec::with_capacity(outer * (end - start) * inner);
            for o in 0..outer {
                data.extend_from_slice(&a.data[(o * n + start) * inner..(o * n + end) * inner]);
            }
            let mut shape = a.shape.clone();
            shape[axis] = end - start;
            Tensor { shape, data }
        };
        self.tape.push("slice", out, Op::Slice { a: self.id, axis, start, end })
    }

    /// Inverted dropout: survivors are scaled by `1 / (1 - p)`. The mask is a
    /// pure function of `seed`; `p == 0` returns `self` unchanged.
    pub fn dropout(&self, p: f64, seed: u64) -> Result<Var<'t, T>, TensorError> {
        if !(0.0..1.0).contains(&p) {
            return Err(TensorError::Invalid {
                op: "dropout",
                msg: format!("p = {p} outside [0, 1)"),
            });
        }
        if p == 0.0 {
            return Ok(*self);
        }
        let (out, mask) = {
            let a = self.value();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let keep = T::of(1.0 / (1.0 - p));
            let mask: Vec<T> = (0..a.numel())
                .map(|_| if rng.random::<f64>() < p { T::zero() } else { keep })
                .collect();
            let data = a.data.iter().zip(&mask).map(|(&x, &m)| x * m).collect();
            (Tensor { shape: a.shape.clone(), data }, mask)
        };
        self.tape.push("dropout", out, Op::Dropout { a: self.id, mask })
    }

    /// Mean negative log-likelihood over rows of `[..., V]` logits whose target
    /// is not `ignore_index`. Returns 0 when every row is ignored.
    pub fn cross_entropy(
        &self,
        targets: &[usize],
        ignore_index: usize,
    ) -> Result<Var<'t, T>, TensorError> {
        let (out, probs, count) = {
            let a = self.value();
            let v = *a.shape.last().ok_or_else(|| shape_err("cross_entropy", &a.shape, &[]))?;
            let rows = a.numel() / v.max(1);
            if targets.len() != rows {
                return Err(TensorError::Length { expected: rows, got: targets.len() });
            }
            let mut probs = vec![T::zero(); a.numel()];
            let mut total = 0.0f64;
            let mut count = 0usize;
            for (r, &t) in targets.iter().enumerate() {
                if t == ignore_index {
                    continue;
                }
                if t >= v {
                    return Err(TensorError::Invalid {
                        op: "cross_entropy",
                        msg: format!("target {t} out of range for {v} classes"),
                    });
                }
                let row = &a.data[r * v..(r + 1) * v];
                let max = row.iter().fold(f64::NEG_INFINITY, |m, x| m.max(x.f64()));
                let sum: f64 = row.iter().map(|x| (x.f64() - max).exp()).sum();
                let lse = max + sum.ln();
                total += lse - row[t].f64();
                for (p, x) in probs[r * v..(r + 1) * v].iter_mut().zip(row) {
                    *p = T::of((x.f64() - lse).exp());
                }
                count += 1;
            }
            let loss = if count == 0 { 0.0 } else { total / count as f64 };
            (Tensor::scalar(T::of(loss)), probs, count)
        };
        self.tape.push(
            "cross_entropy",
            out,
            Op::CrossEntropy { logits: self.id, targets: targets.to_vec(), ignore: ignore_index, probs, count },
        )
    }

    pub fn sum(&self) -> Result<Var<'t, T>, TensorError> {
        let out = Tensor::scalar(T::of(self.value().data.iter().map(|x| x.f64()).sum()));
        self.tape.push("sum", out, Op::Sum { a: self.id })
    }

    pub fn mean(&self) -> Result<Var<'t, T>, TensorError> {
        let out = {
            let a = self.value();
            let n = a.numel().max(1) as f64;
            Tensor::scalar(T::of(a.data.iter().map(|x| x.f64()).sum::<f64>() / n))
        };
        self.tape.push("mean", out, Op::Mean { a: self.id })
    }

    pub fn transpose(&self, ax1: usize, ax2: usize) -> Result<Var<'t, T>, TensorError> {
        let out = {
            let a = self.value();
            if ax1 >= a.rank() || ax2 >= a.rank() {
                return Err(TensorError::Invalid {
                    op: "transpose",
                    msg: format!("axes ({ax1}, {ax2}) for shape {:?}", a.shape),
                });
            }
            let mut shape = a.shape.clone();
            shape.swap(ax1, ax2);
            Tensor { data: swap_axes(&a.data, &a.shape, ax1, ax2), shape }
        };
        self.tape.push("transpose", out, Op::Transpose { a: self.id, ax1, ax2 })
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Var<'t, T>, TensorError> {
        let out = self.value().clone().reshaped(shape)?;
        self.tape.push("reshape", out, Op::Reshape { a: self.id })
    }
}

/// Vector-Jacobian products of node `id` given its output gradient `g`.
/// Only inputs for which `needs` holds are returned.
pub(crate) fn vjp<T: Real>(
    nodes: &[Node<T>],
    id: usize,
    g: &[T],
    needs: &dyn Fn(usize) -> bool,
) -> Vec<(usize, Vec<T>)> {
    let val = |i: usize| &nodes[i].value;
    let mut out = Vec::new();
    match &nodes[id].op {
        Op::Leaf => {}
        &Op::MatMul { a, b, m, k, n } => {
            if needs(a) {
                let mut da = vec![T::zero(); m * k];
                T::gemm(m, n, k, g, (n, 1), &val(b).data, (1, n), T::zero(), &mut da, k);
                out.push((a, da));
            }
            if needs(b) {
                let mut db = vec![T::zero(); k * n];
                T::gemm(k, m, n, &val(a).data, (1, k), g, (n, 1), T::zero(), &mut db, n);
                out.push((b, db));
            }
        }
        &Op::BatchMatMul { a, b, batch, m, k, n } => {
            if needs(a) {
                let mut da = vec![T::zero(); batch * m * k];
                for i in 0..batch {
                    T::gemm(
                        m,
                        n,
                        k,
                        &g[i * m * n..(i + 1) * m * n],
                        (n, 1),
                        &val(b).data[i * k * n..(i + 1) * k * n],
                        (1, n),
                        T::zero(),
                        &mut da[i * m * k..(i + 1) * m * k],
                        k,
                    );
                }
                out.push((a, da));
            }
            if needs(b) {
                let mut db = vec![T::zero(); batch * k * n];
                for i in 0..batch {
                    T::gemm(
                        k,
                        m,
                        n,
                        &val(a).data[i * m * k..(i + 1) * m * k],
                        (1, k),
                        &g[i * m * n..(i + 1) * m * n],
                        (n, 1),
                        T::zero(),
                        &mut db[i * k * n..(i + 1) * k * n],
                        n,
                    );
                }
                out.push((b, db));
            }
        }
        &Op::Add { a, b } => {
            if needs(a) {
                out.push((a, g.to_vec()));
            }
            if needs(b) {
                let nb = val(b).numel();
                let mut db = vec![T::zero(); nb];
                for chunk in g.chunks(nb.max(1)) {
                    db.iter_mut().zip(chunk).for_each(|(d, &x)| *d = *d + x);
                }
                out.push((b, db));
            }
        }
        &Op::Mul { a, b } => {
            let (va, vb) = (&val(a).data, &val(b).data);
            let nb = vb.len().max(1);
            if needs(a) {
                let da = g.iter().enumerate().map(|(i, &x)| x * vb[i % nb]).collect();
                out.push((a, da));
            }
            if needs(b) {
                let mut db = vec![T::zero(); vb.len()];
                for (i, (&x, &y)) in g.iter().zip(va).enumerate() {
                    db[i % nb] = db[i % nb] + x * y;
                }
                out.push((b, db));
            }
        }
        &Op::Scale { a, c } => out.push((a, g.iter().map(|&x| x * c).collect())),
        &Op::Relu { a } => {
            let da = g
                .iter()
                .zip(&val(a).data)
                .map(|(&x, &v)| if v > T::zero() { x } else { T::zero() })
                .collect();
            out.push((a, da));
        }
        &Op::Softmax { a, axis } => {
            let y = &nodes[id].value;
            let (outer, n, inner) = split_axis(&y.shape, axis);
            let mut da = vec![T::zero(); y.numel()];
            for o in 0..outer {
                for i in 0..inner {
                    let at = |j: usize| o * n * inner + j * inner + i;
                    let dot: f64 = (0..n).map(|j| (g[at(j)] * y.data[at(j)]).f64()).sum();
                    let dot = T::of(dot);
                    for j in 0..n {
                        da[at(j)] = y.data[at(j)] * (g[at(j)] - dot);
                    }
                }
            }
            out.push((a, da));
        }
        Op::LayerNorm { x, gain, bias, axis, xhat, rstd } => {
            let shape = &val(*x).shape;
            let (outer, n, inner) = split_axis(shape, *axis);
            let gd = &val(*gain).data;
            if needs(*gain) {
                let mut dg = vec![0.0f64; n];
                for (idx, (&gv, &h)) in g.iter().zip(xhat).enumerate() {
                    dg[(idx / inner) % n] += (gv * h).f64();
                }
                out.push((*gain, dg.into_iter().map(T::of).collect()));
            }
            if needs(*bias) {
                let mut db = vec![0.0f64; n];
                for (idx, &gv) in g.iter().enumerate() {
                    db[(idx / inner) % n] += gv.f64();
                }
                out.push((*bias, db.into_iter().map(T::of).collect()));
            }
            if needs(*x) {
                let mut dx = vec![T::zero(); g.len()];
                for o in 0..outer {
                    for i in 0..inner {
                        let at = |j: usize| o * n * inner + j * inner + i;
                        let r = rstd[o * inner + i];
                        let mut m1 = 0.0f64;
                        let mut m2 = 0.0f64;
                        for j in 0..n {
                            let dh = g[at(j)].f64() * gd[j].f64();
                            m1 += dh;
                            m2 += dh * xhat[at(j)].f64();
                        }
                        m1 /= n as f64;
                        m2 /= n as f64;
                        for j in 0..n {
                            let dh = g[at(j)].f64() * gd[j].f64();
                            dx[at(j)] = T::of(r * (dh - m1 - xhat[at(j)].f64() * m2));
                        }
                    }
                }
                out.push((*x, dx));
            }
        }
        Op::Embedding { table, ids } => {
            let t = val(*table);
            let d = t.shape[1];
            let mut dt = vec![T::zero(); t.numel()];
            for (r, &row) in ids.iter().enumerate() {
                for c in 0..d {
                    dt[row * d + c] = dt[row * d + c] + g[r * d + c];
                }
            }
            out.push((*table, dt));
        }
        Op::Concat { inputs, axis } => {
            let shape = &nodes[id].value.shape;
            let (outer, total, inner) = split_axis(shape, *axis);
            let mut offset = 0;
            for &inp in inputs {
                let len = val(inp).shape[*axis];
                if needs(inp) {
                    let mut d = Vec::with_capacity(outer * len * inner);
                    for o in 0..outer {
                        let base = (o * total + offset) * inner;
                        d.extend_from_slice(&g[base..base + len * inner]);
                    }
                    out.push((inp, d));
                }
                offset += len;
            }
        }
        &Op::Slice { a, axis, start, end } => {
            let shape = &val(a).shape;
            let (outer, n, inner) = split_axis(shape, axis);
            let w = (end - start) * inner;
            let mut da = vec![T::zero(); val(a).numel()];
            for o in 0..outer {
                let base = (o * n + start) * inner;
                da[base..base + w].copy_from_slice(&g[o * w..(o + 1) * w]);
            }
            out.push((a, da));
        }
        Op::Dropout { a, mask } => {
            out.push((*a, g.iter().zip(mask).map(|(&x, &m)| x * m).collect()));
        }
        Op::CrossEntropy { logits, targets, ignore, probs, count } => {
            let v = *val(*logits).shape.last().unwrap();
            let mut dl = vec![T::zero(); probs.len()];
            if *count > 0 {
                let s = g[0] / T::of(*count as f64);
                for (r, &t) in targets.iter().enumerate() {
                    if t == *ignore {
                        continue;
                    }
                    for c in 0..v {
                        dl[r * v + c] = probs[r * v + c] * s;
                    }
                    dl[r * v + t] = dl[r * v + t] - s;
                }
            }
            out.push((*logits, dl));
        }
        &Op::Sum { a } => out.push((a, vec![g[0]; val(a).numel()])),
        &Op::Mean { a } => {
            let n = val(a).numel();
            out.push((a, vec![g[0] / T::of(n.max(1) as f64); n]));
        }
        &Op::Transpose { a, ax1, ax2 } => {
            let shape = &nodes[id].value.shape;
            out.push((a, swap_axes(g, shape, ax1, ax2)));
        }
        &Op::Reshape { a } => out.push((a, g.to_vec())),
    }
    out
}
