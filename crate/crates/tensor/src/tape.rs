// Indexed loops stay: the matrix kernels address strided slices where
// iterator chains obscure the access pattern.
#![allow(clippy::needless_range_loop)]

use std::collections::HashMap;

use crate::params::{ParamId, ParamSet};
use crate::rng::SeedStream;
use crate::tensor::Tensor;
use crate::{Result, TensorError};

/// Probability floor used when taking logs of softmax outputs.
pub const LOG_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TensorRef(usize);

#[derive(Debug)]
enum Op {
    Leaf { param: Option<ParamId> },
    Matmul(usize, usize),
    Matvec(usize, usize),
    Vecmat(usize, usize),
    Add(usize, usize),
    AddN(Vec<usize>),
    Mul(usize, usize),
    Scale(usize, f64),
    Concat(Vec<usize>),
    StackRows(Vec<usize>),
    Row(usize, usize),
    MeanRows(usize),
    Mean(usize),
    Tanh(usize),
    Sigmoid(usize),
    Softmax { x: usize, axis: usize },
    Pick { x: usize, index: usize },
    LnClamped(usize),
    EmbeddingLookup { table: usize, ids: Vec<usize> },
    // Noise is treated as a constant offset: identity gradient.
    NoiseAdd(usize),
    // scale[i] is 0 or 1/(1-p); the same mask applies in backward.
    DropoutMask { x: usize, scale: Vec<f64> },
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Tensor,
    needs_grad: bool,
}

/// Records a forward computation; values are evaluated eagerly at record
/// time so `value()` is always available. One tape belongs to one logical
/// forward/backward execution.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn shape_err(op: &'static str, detail: String) -> TensorError {
    TensorError::ShapeMismatch { op, detail }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, r: TensorRef) -> &Tensor {
        &self.nodes[r.0].value
    }

    fn push(&mut self, op: Op, value: Tensor, needs_grad: bool) -> TensorRef {
        self.nodes.push(Node {
            op,
            value,
            needs_grad,
        });
        TensorRef(self.nodes.len() - 1)
    }

    fn needs(&self, idx: usize) -> bool {
        self.nodes[idx].needs_grad
    }

    /// Register a leaf; gradient is tracked when the tensor asks for it.
    pub fn leaf(&mut self, t: &Tensor) -> TensorRef {
        let needs = t.requires_grad();
        self.push(Op::Leaf { param: None }, t.clone(), needs)
    }

    /// Register a constant leaf regardless of the tensor's grad flag.
    pub fn constant(&mut self, t: &Tensor) -> TensorRef {
        self.push(Op::Leaf { param: None }, t.clone(), false)
    }

    pub fn scalar(&mut self, v: f64) -> TensorRef {
        self.push(Op::Leaf { param: None }, Tensor::scalar(v), false)
    }

    /// Register a parameter leaf; its gradient is reported under `id`.
    pub fn param(&mut self, id: ParamId, t: &Tensor) -> TensorRef {
        self.push(Op::Leaf { param: Some(id) }, t.clone(), true)
    }

    pub fn matmul(&mut self, a: TensorRef, b: TensorRef) -> Result<TensorRef> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape().len() != 2 || tb.shape().len() != 2 || ta.cols() != tb.rows() {
            return Err(shape_err(
                "matmul",
                format!("{:?} x {:?}", ta.shape(), tb.shape()),
            ));
        }
        let (r, c, k) = (ta.rows(), ta.cols(), tb.cols());
        let mut out = vec![0.0; r * k];
        for i in 0..r {
            for j in 0..c {
                let av = ta.data()[i * c + j];
                for t in 0..k {
                    out[i * k + t] += av * tb.data()[j * k + t];
                }
            }
        }
        let needs = self.needs(a.0) || self.needs(b.0);
        Ok(self.push(Op::Matmul(a.0, b.0), Tensor::new(vec![r, k], out)?, needs))
    }

    pub fn matvec(&mut self, m: TensorRef, v: TensorRef) -> Result<TensorRef> {
        let (tm, tv) = (self.value(m), self.value(v));
        if tm.shape().len() != 2 || tv.shape().len() != 1 || tm.cols() != tv.len() {
            return Err(shape_err(
                "matvec",
                format!("{:?} x {:?}", tm.shape(), tv.shape()),
            ));
        }
        let (r, c) = (tm.rows(), tm.cols());
        let mut out = vec![0.0; r];
        for i in 0..r {
            let mut acc = 0.0;
            for j in 0..c {
                acc += tm.data()[i * c + j] * tv.data()[j];
            }
            out[i] = acc;
        }
        let needs = self.needs(m.0) || self.needs(v.0);
        Ok(self.push(Op::Matvec(m.0, v.0), Tensor::from_vec(out), needs))
    }

    pub fn vecmat(&mut self, v: TensorRef, m: TensorRef) -> Result<TensorRef> {
        let (tv, tm) = (self.value(v), self.value(m));
        if tv.shape().len() != 1 || tm.shape().len() != 2 || tv.len() != tm.rows() {
            return Err(shape_err(
                "vecmat",
                format!("{:?} x {:?}", tv.shape(), tm.shape()),
            ));
        }
        let (n, k) = (tm.rows(), tm.cols());
        let mut out = vec![0.0; k];
        for i in 0..n {
            let vi = tv.data()[i];
            for j in 0..k {
                out[j] += vi * tm.data()[i * k + j];
            }
        }
        let needs = self.needs(v.0) || self.needs(m.0);
        Ok(self.push(Op::Vecmat(v.0, m.0), Tensor::from_vec(out), needs))
    }

    pub fn add(&mut self, a: TensorRef, b: TensorRef) -> Result<TensorRef> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(shape_err(
                "add",
                format!("{:?} + {:?}", ta.shape(), tb.shape()),
            ));
        }
        let data = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(x, y)| x + y)
            .collect();
        let value = Tensor::new(ta.shape().to_vec(), data)?;
        let needs = self.needs(a.0) || self.needs(b.0);
        Ok(self.push(Op::Add(a.0, b.0), value, needs))
    }

    pub fn add_n(&mut self, xs: &[TensorRef]) -> Result<TensorRef> {
        let Some(first) = xs.first() else {
            return Err(TensorError::InvalidArgument("add_n of no tensors".into()));
        };
        let shape = self.value(*first).shape().to_vec();
        let mut data = vec![0.0; self.value(*first).len()];
        for x in xs {
            let tx = self.value(*x);
            if tx.shape() != shape.as_slice() {
                return Err(shape_err(
                    "add_n",
                    format!("{:?} vs {:?}", shape, tx.shape()),
                ));
            }
            for (acc, v) in data.iter_mut().zip(tx.data()) {
                *acc += v;
            }
        }
        let needs = xs.iter().any(|x| self.needs(x.0));
        let ids = xs.iter().map(|x| x.0).collect();
        Ok(self.push(Op::AddN(ids), Tensor::new(shape, data)?, needs))
    }

    pub fn mul(&mut self, a: TensorRef, b: TensorRef) -> Result<TensorRef> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(shape_err(
                "mul",
                format!("{:?} * {:?}", ta.shape(), tb.shape()),
            ));
        }
        let data = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(x, y)| x * y)
            .collect();
        let value = Tensor::new(ta.shape().to_vec(), data)?;
        let needs = self.needs(a.0) || self.needs(b.0);
        Ok(self.push(Op::Mul(a.0, b.0), value, needs))
    }

    pub fn scale(&mut self, x: TensorRef, c: f64) -> Result<TensorRef> {
        let tx = self.value(x);
        let data = tx.data().iter().map(|v| v * c).collect();
        let value = Tensor::new(tx.shape().to_vec(), data)?;
        let needs = self.needs(x.0);
        Ok(self.push(Op::Scale(x.0, c), value, needs))
    }

    /// Concatenate 1-D tensors in order.
    pub fn concat(&mut self, xs: &[TensorRef]) -> Result<TensorRef> {
        if xs.is_empty() {
            return Err(TensorError::InvalidArgument("concat of no tensors".into()));
        }
        let mut data = Vec::new();
        for x in xs {
            let tx = self.value(*x);
            if tx.shape().len() != 1 {
                return Err(shape_err("concat", format!("rank {:?} input", tx.shape())));
            }
            data.extend_from_slice(tx.data());
        }
        let needs = xs.iter().any(|x| self.needs(x.0));
        let ids = xs.iter().map(|x| x.0).collect();
        Ok(self.push(Op::Concat(ids), Tensor::from_vec(data), needs))
    }

    /// Stack equal-length 1-D tensors as rows of a rank-2 tensor.
    pub fn stack_rows(&mut self, rows: &[TensorRef]) -> Result<TensorRef> {
        let Some(first) = rows.first() else {
            return Err(TensorError::InvalidArgument("stack_rows of no rows".into()));
        };
        let width = self.value(*first).len();
        let mut data = Vec::with_capacity(rows.len() * width);
        for r in rows {
            let tr = self.value(*r);
            if tr.shape().len() != 1 || tr.len() != width {
                return Err(shape_err(
                    "stack_rows",
                    format!("expected [{}], got {:?}", width, tr.shape()),
                ));
            }
            data.extend_from_slice(tr.data());
        }
        let needs = rows.iter().any(|r| self.needs(r.0));
        let ids = rows.iter().map(|r| r.0).collect();
        let value = Tensor::new(vec![rows.len(), width], data)?;
        Ok(self.push(Op::StackRows(ids), value, needs))
    }

    /// Extract row `i` of a rank-2 tensor as a 1-D tensor.
    pub fn row(&mut self, m: TensorRef, i: usize) -> Result<TensorRef> {
        let tm = self.value(m);
        if tm.shape().len() != 2 || i >= tm.rows() {
            return Err(shape_err("row", format!("row {} of {:?}", i, tm.shape())));
        }
        let value = Tensor::from_vec(tm.row(i).to_vec());
        let needs = self.needs(m.0);
        Ok(self.push(Op::Row(m.0, i), value, needs))
    }

    /// Mean over axis 0 of a rank-2 tensor.
    pub fn mean_rows(&mut self, m: TensorRef) -> Result<TensorRef> {
        let tm = self.value(m);
        if tm.shape().len() != 2 || tm.rows() == 0 {
            return Err(shape_err("mean_rows", format!("{:?}", tm.shape())));
        }
        let (n, k) = (tm.rows(), tm.cols());
        let mut out = vec![0.0; k];
        for i in 0..n {
            for j in 0..k {
                out[j] += tm.data()[i * k + j];
            }
        }
        for v in &mut out {
            *v /= n as f64;
        }
        let needs = self.needs(m.0);
        Ok(self.push(Op::MeanRows(m.0), Tensor::from_vec(out), needs))
    }

    /// Mean of a 1-D tensor as a scalar.
    pub fn mean(&mut self, x: TensorRef) -> Result<TensorRef> {
        let tx = self.value(x);
        if tx.shape().len() != 1 || tx.is_empty() {
            return Err(shape_err("mean", format!("{:?}", tx.shape())));
        }
        let m = tx.data().iter().sum::<f64>() / tx.len() as f64;
        let needs = self.needs(x.0);
        Ok(self.push(Op::Mean(x.0), Tensor::scalar(m), needs))
    }

    pub fn tanh(&mut self, x: TensorRef) -> Result<TensorRef> {
        let tx = self.value(x);
        let data = tx.data().iter().map(|v| v.tanh()).collect();
        let value = Tensor::new(tx.shape().to_vec(), data)?;
        let needs = self.needs(x.0);
        Ok(self.push(Op::Tanh(x.0), value, needs))
    }

    pub fn sigmoid(&mut self, x: TensorRef) -> Result<TensorRef> {
        let tx = self.value(x);
        let data = tx.data().iter().map(|v| sigmoid(*v)).collect();
        let value = Tensor::new(tx.shape().to_vec(), data)?;
        let needs = self.needs(x.0);
        Ok(self.push(Op::Sigmoid(x.0), value, needs))
    }

    /// Numerically stabilized softmax along `axis` (rank 1: axis 0;
    /// rank 2: axis 0 over columns or 1 over rows).
    pub fn softmax(&mut self, x: TensorRef, axis: usize) -> Result<TensorRef> {
        let tx = self.value(x);
        if tx.is_empty() {
            return Err(TensorError::InvalidArgument(
                "softmax over empty axis".into(),
            ));
        }
        let rank = tx.shape().len();
        if !(rank == 1 && axis == 0 || rank == 2 && axis <= 1) {
            return Err(shape_err(
                "softmax",
                format!("axis {} of {:?}", axis, tx.shape()),
            ));
        }
        let mut data = tx.data().to_vec();
        let n_total = data.len();
        match (rank, axis) {
            (1, _) => softmax_slice(&mut data, 0, 1, n_total),
            (2, 1) => {
                let (n, k) = (tx.rows(), tx.cols());
                for i in 0..n {
                    softmax_slice(&mut data, i * k, 1, k);
                }
            }
            (2, 0) => {
                let (n, k) = (tx.rows(), tx.cols());
                for j in 0..k {
                    softmax_slice(&mut data, j, k, n);
                }
            }
            _ => unreachable!(),
        }
        let value = Tensor::new(tx.shape().to_vec(), data)?;
        let needs = self.needs(x.0);
        Ok(self.push(Op::Softmax { x: x.0, axis }, value, needs))
    }

    /// Select entry `index` of a 1-D tensor as a scalar.
    pub fn pick(&mut self, x: TensorRef, index: usize) -> Result<TensorRef> {
        let tx = self.value(x);
        if tx.shape().len() != 1 || index >= tx.len() {
            return Err(shape_err(
                "pick",
                format!("index {} of {:?}", index, tx.shape()),
            ));
        }
        let value = Tensor::scalar(tx.data()[index]);
        let needs = self.needs(x.0);
        Ok(self.push(Op::Pick { x: x.0, index }, value, needs))
    }

    /// Elementwise natural log with inputs clamped at [`LOG_CLAMP`].
    /// NaN inputs stay NaN (`f64::max` would silently swallow them and mask
    /// a diverged forward pass).
    pub fn ln_clamped(&mut self, x: TensorRef) -> Result<TensorRef> {
        let tx = self.value(x);
        let data = tx
            .data()
            .iter()
            .map(|v| {
                if v.is_nan() {
                    f64::NAN
                } else {
                    v.max(LOG_CLAMP).ln()
                }
            })
            .collect();
        let value = Tensor::new(tx.shape().to_vec(), data)?;
        let needs = self.needs(x.0);
        Ok(self.push(Op::LnClamped(x.0), value, needs))
    }

    /// Gather rows of `table` by id; output is `[ids.len(), dim]`.
    pub fn embedding_lookup(&mut self, table: TensorRef, ids: &[usize]) -> Result<TensorRef> {
        let tt = self.value(table);
        if tt.shape().len() != 2 {
            return Err(shape_err(
                "embedding_lookup",
                format!("table {:?}", tt.shape()),
            ));
        }
        if ids.is_empty() {
            return Err(TensorError::InvalidArgument(
                "embedding_lookup of no ids".into(),
            ));
        }
        let (v, d) = (tt.rows(), tt.cols());
        if let Some(bad) = ids.iter().find(|&&id| id >= v) {
            return Err(TensorError::InvalidArgument(format!(
                "embedding id {} out of range for table with {} rows",
                bad, v
            )));
        }
        let mut data = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            data.extend_from_slice(tt.row(id));
        }
        let value = Tensor::new(vec![ids.len(), d], data)?;
        let needs = self.needs(table.0);
        Ok(self.push(
            Op::EmbeddingLookup {
                table: table.0,
                ids: ids.to_vec(),
            },
            value,
            needs,
        ))
    }

    /// Add i.i.d. `N(0, sigma^2)` noise in train mode; identity in eval mode.
    /// The noise is a constant for differentiation purposes.
    pub fn gaussian_noise(
        &mut self,
        x: TensorRef,
        sigma: f64,
        mode: Mode,
        rng: &mut SeedStream,
    ) -> Result<TensorRef> {
        if sigma < 0.0 {
            return Err(TensorError::InvalidArgument(format!(
                "negative sigma {}",
                sigma
            )));
        }
        if mode == Mode::Eval || sigma == 0.0 {
            return Ok(x);
        }
        let tx = self.value(x);
        let data = tx
            .data()
            .iter()
            .map(|v| v + rng.normal(0.0, sigma))
            .collect();
        let value = Tensor::new(tx.shape().to_vec(), data)?;
        let needs = self.needs(x.0);
        Ok(self.push(Op::NoiseAdd(x.0), value, needs))
    }

    /// Inverted dropout: zero entries with probability `p` and scale
    /// survivors by `1/(1-p)` in train mode; identity in eval mode.
    pub fn dropout(
        &mut self,
        x: TensorRef,
        p: f64,
        mode: Mode,
        rng: &mut SeedStream,
    ) -> Result<TensorRef> {
        if !(0.0..1.0).contains(&p) {
            return Err(TensorError::InvalidArgument(format!(
                "dropout probability {} outside [0, 1)",
                p
            )));
        }
        if mode == Mode::Eval || p == 0.0 {
            return Ok(x);
        }
        let keep = 1.0 / (1.0 - p);
        let tx = self.value(x);
        let scale: Vec<f64> = (0..tx.len())
            .map(|_| if rng.unit() < p { 0.0 } else { keep })
            .collect();
        let data = tx.data().iter().zip(&scale).map(|(v, s)| v * s).collect();
        let value = Tensor::new(tx.shape().to_vec(), data)?;
        let needs = self.needs(x.0);
        Ok(self.push(Op::DropoutMask { x: x.0, scale }, value, needs))
    }

    /// Reverse-mode gradient accumulation from a scalar loss. Parameters
    /// never touched by the recorded graph simply have no entry; see
    /// [`Gradients::dense`].
    pub fn backward(&self, loss: TensorRef) -> Result<Gradients> {
        let lt = self.value(loss);
        if !lt.is_scalar() {
            return Err(TensorError::NonScalarLoss(lt.shape().to_vec()));
        }
        let mut adj: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        adj[loss.0] = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            if !self.nodes[i].needs_grad {
                continue;
            }
            let Some(dy) = adj[i].take() else { continue };
            self.accumulate(i, &dy, &mut adj);
            adj[i] = Some(dy);
        }

        let mut by_param: HashMap<usize, Tensor> = HashMap::new();
        for (i, node) in self.nodes.iter().enumerate() {
            if let Op::Leaf { param: Some(pid) } = node.op {
                if let Some(g) = &adj[i] {
                    let entry = by_param
                        .entry(pid.index())
                        .or_insert_with(|| Tensor::zeros(node.value.shape().to_vec()));
                    for (acc, v) in entry.data_mut().iter_mut().zip(g) {
                        *acc += v;
                    }
                }
            }
        }
        Ok(Gradients { by_param })
    }

    fn accumulate(&self, i: usize, dy: &[f64], adj: &mut [Option<Vec<f64>>]) {
        let mut into = |idx: usize, f: &mut dyn FnMut(&mut [f64])| {
            if !self.nodes[idx].needs_grad {
                return;
            }
            let slot = adj[idx].get_or_insert_with(|| vec![0.0; self.nodes[idx].value.len()]);
            f(slot);
        };
        match &self.nodes[i].op {
            Op::Leaf { .. } => {}
            Op::Matmul(a, b) => {
                let (ta, tb) = (&self.nodes[*a].value, &self.nodes[*b].value);
                let (r, c, k) = (ta.rows(), ta.cols(), tb.cols());
                into(*a, &mut |da| {
                    for x in 0..r {
                        for j in 0..c {
                            let mut acc = 0.0;
                            for t in 0..k {
                                acc += dy[x * k + t] * tb.data()[j * k + t];
                            }
                            da[x * c + j] += acc;
                        }
                    }
                });
                into(*b, &mut |db| {
                    for j in 0..c {
                        for t in 0..k {
                            let mut acc = 0.0;
                            for x in 0..r {
                                acc += ta.data()[x * c + j] * dy[x * k + t];
                            }
                            db[j * k + t] += acc;
                        }
                    }
                });
            }
            Op::Matvec(m, v) => {
                let (tm, tv) = (&self.nodes[*m].value, &self.nodes[*v].value);
                let (r, c) = (tm.rows(), tm.cols());
                into(*m, &mut |dm| {
                    for x in 0..r {
                        for j in 0..c {
                            dm[x * c + j] += dy[x] * tv.data()[j];
                        }
                    }
                });
                into(*v, &mut |dv| {
                    for j in 0..c {
                        let mut acc = 0.0;
                        for x in 0..r {
                            acc += tm.data()[x * c + j] * dy[x];
                        }
                        dv[j] += acc;
                    }
                });
            }
            Op::Vecmat(v, m) => {
                let (tv, tm) = (&self.nodes[*v].value, &self.nodes[*m].value);
                let (n, k) = (tm.rows(), tm.cols());
                into(*v, &mut |dv| {
                    for x in 0..n {
                        let mut acc = 0.0;
                        for j in 0..k {
                            acc += tm.data()[x * k + j] * dy[j];
                        }
                        dv[x] += acc;
                    }
                });
                into(*m, &mut |dm| {
                    for x in 0..n {
                        for j in 0..k {
                            dm[x * k + j] += tv.data()[x] * dy[j];
                        }
                    }
                });
            }
            Op::Add(a, b) => {
                into(*a, &mut |da| add_into(da, dy));
                into(*b, &mut |db| add_into(db, dy));
            }
            Op::AddN(xs) => {
                for x in xs {
                    into(*x, &mut |dx| add_into(dx, dy));
                }
            }
            Op::Mul(a, b) => {
                let (ta, tb) = (&self.nodes[*a].value, &self.nodes[*b].value);
                into(*a, &mut |da| {
                    for ((d, g), o) in da.iter_mut().zip(dy).zip(tb.data()) {
                        *d += g * o;
                    }
                });
                into(*b, &mut |db| {
                    for ((d, g), o) in db.iter_mut().zip(dy).zip(ta.data()) {
                        *d += g * o;
                    }
                });
            }
            Op::Scale(x, c) => {
                into(*x, &mut |dx| {
                    for (d, g) in dx.iter_mut().zip(dy) {
                        *d += c * g;
                    }
                });
            }
            Op::Concat(xs) => {
                let mut offset = 0;
                for x in xs {
                    let len = self.nodes[*x].value.len();
                    into(*x, &mut |dx| add_into(dx, &dy[offset..offset + len]));
                    offset += len;
                }
            }
            Op::StackRows(rows) => {
                let width = if rows.is_empty() {
                    0
                } else {
                    self.nodes[rows[0]].value.len()
                };
                for (r, row) in rows.iter().enumerate() {
                    into(*row, &mut |dr| {
                        add_into(dr, &dy[r * width..(r + 1) * width])
                    });
                }
            }
            Op::Row(m, r) => {
                let cols = self.nodes[*m].value.cols();
                into(*m, &mut |dm| {
                    add_into(&mut dm[r * cols..(r + 1) * cols], dy)
                });
            }
            Op::MeanRows(m) => {
                let tm = &self.nodes[*m].value;
                let (n, k) = (tm.rows(), tm.cols());
                let inv = 1.0 / n as f64;
                into(*m, &mut |dm| {
                    for x in 0..n {
                        for j in 0..k {
                            dm[x * k + j] += dy[j] * inv;
                        }
                    }
                });
            }
            Op::Mean(x) => {
                let n = self.nodes[*x].value.len();
                let g = dy[0] / n as f64;
                into(*x, &mut |dx| {
                    for d in dx.iter_mut() {
                        *d += g;
                    }
                });
            }
            Op::Tanh(x) => {
                let y = &self.nodes[i].value;
                into(*x, &mut |dx| {
                    for ((d, g), v) in dx.iter_mut().zip(dy).zip(y.data()) {
                        *d += g * (1.0 - v * v);
                    }
                });
            }
            Op::Sigmoid(x) => {
                let y = &self.nodes[i].value;
                into(*x, &mut |dx| {
                    for ((d, g), v) in dx.iter_mut().zip(dy).zip(y.data()) {
                        *d += g * v * (1.0 - v);
                    }
                });
            }
            Op::Softmax { x, axis } => {
                let y = &self.nodes[i].value;
                let rank = y.shape().len();
                into(*x, &mut |dx| match (rank, *axis) {
                    (1, _) => softmax_backward_slice(dx, dy, y.data(), 0, 1, y.len()),
                    (2, 1) => {
                        let (n, k) = (y.rows(), y.cols());
                        for r in 0..n {
                            softmax_backward_slice(dx, dy, y.data(), r * k, 1, k);
                        }
                    }
                    (2, 0) => {
                        let (n, k) = (y.rows(), y.cols());
                        for c in 0..k {
                            softmax_backward_slice(dx, dy, y.data(), c, k, n);
                        }
                    }
                    _ => unreachable!(),
                });
            }
            Op::Pick { x, index } => {
                let idx = *index;
                into(*x, &mut |dx| dx[idx] += dy[0]);
            }
            Op::LnClamped(x) => {
                let tx = &self.nodes[*x].value;
                into(*x, &mut |dx| {
                    for ((d, g), v) in dx.iter_mut().zip(dy).zip(tx.data()) {
                        if *v > LOG_CLAMP {
                            *d += g / v;
                        }
                    }
                });
            }
            Op::EmbeddingLookup { table, ids } => {
                let d = self.nodes[*table].value.cols();
                into(*table, &mut |dt| {
                    for (r, &id) in ids.iter().enumerate() {
                        add_into(&mut dt[id * d..(id + 1) * d], &dy[r * d..(r + 1) * d]);
                    }
                });
            }
            Op::NoiseAdd(x) => {
                into(*x, &mut |dx| add_into(dx, dy));
            }
            Op::DropoutMask { x, scale } => {
                into(*x, &mut |dx| {
                    for ((d, g), s) in dx.iter_mut().zip(dy).zip(scale) {
                        *d += g * s;
                    }
                });
            }
        }
    }
}

fn add_into(acc: &mut [f64], src: &[f64]) {
    for (a, s) in acc.iter_mut().zip(src) {
        *a += s;
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// In-place softmax over a strided slice (max-subtraction stabilized).
fn softmax_slice(data: &mut [f64], start: usize, stride: usize, count: usize) {
    let mut max = f64::NEG_INFINITY;
    for c in 0..count {
        max = max.max(data[start + c * stride]);
    }
    let mut sum = 0.0;
    for c in 0..count {
        let idx = start + c * stride;
        data[idx] = (data[idx] - max).exp();
        sum += data[idx];
    }
    for c in 0..count {
        data[start + c * stride] /= sum;
    }
}

fn softmax_backward_slice(
    dx: &mut [f64],
    dy: &[f64],
    y: &[f64],
    start: usize,
    stride: usize,
    count: usize,
) {
    let mut dot = 0.0;
    for c in 0..count {
        let idx = start + c * stride;
        dot += dy[idx] * y[idx];
    }
    for c in 0..count {
        let idx = start + c * stride;
        dx[idx] += y[idx] * (dy[idx] - dot);
    }
}

/// Per-parameter gradients produced by [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients {
    by_param: HashMap<usize, Tensor>,
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> Option<&Tensor> {
        self.by_param.get(&id.index())
    }

    /// Gradients aligned with `params`, zero-filled for parameters the
    /// recorded graph never touched.
    pub fn dense(&self, params: &ParamSet) -> Vec<Tensor> {
        params
            .ids()
            .map(|id| match self.by_param.get(&id.index()) {
                Some(g) => g.clone(),
                None => Tensor::zeros(params.get(id).shape().to_vec()),
            })
            .collect()
    }
}
