//! Define-by-run computation tape.
//!
//! Every operation validates shapes, computes its value immediately, and
//! appends a node recording the op kind, parent ids, and whatever forward
//! context the backward pass needs (pooling argmaxes, clamp thresholds,
//! analysis geometry). `backward` walks the tape once in reverse; because
//! nodes only ever reference earlier nodes, tape order is already a
//! topological order and every node is visited exactly once.

use crate::dsp::fft;
use crate::dsp::StftGeometry;
use crate::error::{Error, Result};
use crate::tensor::{kernels, Tensor};

/// Handle to a node in a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TensorId(pub(crate) usize);

/// Pooling flavor for [`Graph::pool2d`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PoolMode {
    Max,
    Avg,
}

#[derive(Debug)]
enum Op {
    Leaf,
    Add,
    Sub,
    Mul,
    Div,
    Scale(f64),
    Matmul,
    Sigmoid,
    Tanh,
    Relu,
    Softplus,
    Exp,
    Sqrt,
    LogClamped { eps: f64 },
    Softmax { axis: usize },
    Sum,
    Mean,
    Concat { axis: usize },
    Slice { axis: usize, start: usize },
    Reshape,
    Conv2d { stride: (usize, usize), pad: (usize, usize) },
    ConvTranspose2d { stride: (usize, usize), pad: (usize, usize) },
    ScaleChannels,
    MulSpatial,
    Pool2d { mode: PoolMode, window: (usize, usize), stride: (usize, usize), argmax: Vec<usize> },
    ChannelMax { argmax: Vec<usize> },
    ChannelMean,
    SpatialMean,
    ComplexMag,
    Stft { geom: StftGeometry },
    IstftFixedPhase { geom: StftGeometry, cos_p: Vec<f64>, sin_p: Vec<f64> },
}

struct Node {
    op: Op,
    parents: Vec<TensorId>,
    value: Tensor,
    requires_grad: bool,
    grad: Option<Vec<f64>>,
}

/// A single-use computation tape. Build a fresh one per training step.
pub struct Graph {
    nodes: Vec<Node>,
    backward_done: bool,
}

impl Default for Graph {
    fn default() -> Self {
        Self::new()
    }
}

impl Graph {
    pub fn new() -> Self {
        Graph { nodes: Vec::new(), backward_done: false }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Insert a leaf holding `value`. Leaves with `requires_grad` accumulate
    /// gradients during [`Graph::backward`].
    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> TensorId {
        self.push(Op::Leaf, vec![], value, requires_grad)
    }

    /// Leaf that never receives gradients.
    pub fn constant(&mut self, value: Tensor) -> TensorId {
        self.leaf(value, false)
    }

    pub fn scalar(&mut self, v: f64) -> TensorId {
        self.constant(Tensor::scalar(v))
    }

    /// Copy a node's current value into a fresh gradient-stopping leaf.
    pub fn detach(&mut self, a: TensorId) -> TensorId {
        let v = self.value(a).clone();
        self.constant(v)
    }

    pub fn value(&self, id: TensorId) -> &Tensor {
        &self.nodes[id.0].value
    }

    /// Gradient buffer accumulated for `id`, if backward reached it.
    pub fn grad(&self, id: TensorId) -> Option<&[f64]> {
        self.nodes[id.0].grad.as_deref()
    }

    pub fn requires_grad(&self, id: TensorId) -> bool {
        self.nodes[id.0].requires_grad
    }

    fn push(&mut self, op: Op, parents: Vec<TensorId>, value: Tensor, requires_grad: bool) -> TensorId {
        self.nodes.push(Node { op, parents, value, requires_grad, grad: None });
        TensorId(self.nodes.len() - 1)
    }

    fn push_derived(&mut self, op: Op, parents: Vec<TensorId>, value: Tensor) -> TensorId {
        let rg = parents.iter().any(|p| self.nodes[p.0].requires_grad);
        self.push(op, parents, value, rg)
    }

    // ── Elementwise arithmetic ──────────────────────────────────────────────

    fn broadcast_shapes(&self, a: TensorId, b: TensorId, what: &str) -> Result<Vec<usize>> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa == sb {
            Ok(sa.to_vec())
        } else if self.value(a).is_scalar() {
            Ok(sb.to_vec())
        } else if self.value(b).is_scalar() {
            Ok(sa.to_vec())
        } else {
            Err(Error::Shape(format!("{what}: {sa:?} vs {sb:?} (only exact or scalar broadcast)")))
        }
    }

    fn zip_eval(&self, a: TensorId, b: TensorId, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let (va, vb) = (self.value(a), self.value(b));
        match (va.is_scalar(), vb.is_scalar(), va.numel() == vb.numel()) {
            (_, _, true) => va.data().iter().zip(vb.data()).map(|(&x, &y)| f(x, y)).collect(),
            (true, _, _) => vb.data().iter().map(|&y| f(va.data()[0], y)).collect(),
            _ => va.data().iter().map(|&x| f(x, vb.data()[0])).collect(),
        }
    }

    pub fn add(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        let shape = self.broadcast_shapes(a, b, "add")?;
        let data = self.zip_eval(a, b, |x, y| x + y);
        Ok(self.push_derived(Op::Add, vec![a, b], Tensor::new(shape, data)?))
    }

    pub fn sub(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        let shape = self.broadcast_shapes(a, b, "sub")?;
        let data = self.zip_eval(a, b, |x, y| x - y);
        Ok(self.push_derived(Op::Sub, vec![a, b], Tensor::new(shape, data)?))
    }

    pub fn mul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        let shape = self.broadcast_shapes(a, b, "mul")?;
        let data = self.zip_eval(a, b, |x, y| x * y);
        Ok(self.push_derived(Op::Mul, vec![a, b], Tensor::new(shape, data)?))
    }

    pub fn div(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        let shape = self.broadcast_shapes(a, b, "div")?;
        let data = self.zip_eval(a, b, |x, y| x / y);
        Ok(self.push_derived(Op::Div, vec![a, b], Tensor::new(shape, data)?))
    }

    /// Multiply by a compile-time constant (not a graph node).
    pub fn scale(&mut self, a: TensorId, c: f64) -> TensorId {
        let v = self.value(a);
        let t = Tensor { shape: v.shape().to_vec(), data: v.data().iter().map(|&x| x * c).collect() };
        self.push_derived(Op::Scale(c), vec![a], t)
    }

    // ── Unary maps ──────────────────────────────────────────────────────────

    fn unary(&mut self, a: TensorId, op: Op, f: impl Fn(f64) -> f64) -> TensorId {
        let v = self.value(a);
        let t = Tensor { shape: v.shape().to_vec(), data: v.data().iter().map(|&x| f(x)).collect() };
        self.push_derived(op, vec![a], t)
    }

    pub fn sigmoid(&mut self, a: TensorId) -> TensorId {
        self.unary(a, Op::Sigmoid, |x| 1.0 / (1.0 + (-x).exp()))
    }

    pub fn tanh(&mut self, a: TensorId) -> TensorId {
        self.unary(a, Op::Tanh, f64::tanh)
    }

    pub fn relu(&mut self, a: TensorId) -> TensorId {
        self.unary(a, Op::Relu, |x| x.max(0.0))
    }

    pub fn softplus(&mut self, a: TensorId) -> TensorId {
        self.unary(a, Op::Softplus, |x| x.max(0.0) + (-x.abs()).exp().ln_1p())
    }

    pub fn exp(&mut self, a: TensorId) -> TensorId {
        self.unary(a, Op::Exp, f64::exp)
    }

    /// Square root; differentiable only on strictly positive inputs.
    pub fn sqrt(&mut self, a: TensorId) -> TensorId {
        self.unary(a, Op::Sqrt, f64::sqrt)
    }

    /// ln(max(x, eps)): the clamp keeps silence finite, and clamped inputs
    /// receive zero gradient.
    pub fn log_clamped(&mut self, a: TensorId, eps: f64) -> TensorId {
        self.unary(a, Op::LogClamped { eps }, |x| x.max(eps).ln())
    }

    // ── Reductions and probability ──────────────────────────────────────────

    pub fn sum(&mut self, a: TensorId) -> TensorId {
        let s: f64 = self.value(a).data().iter().sum();
        self.push_derived(Op::Sum, vec![a], Tensor::scalar(s))
    }

    pub fn mean(&mut self, a: TensorId) -> TensorId {
        let v = self.value(a);
        let s: f64 = v.data().iter().sum();
        let m = s / v.numel() as f64;
        self.push_derived(Op::Mean, vec![a], Tensor::scalar(m))
    }

    /// Softmax along `axis`, max-shifted per lane for stability.
    pub fn softmax(&mut self, a: TensorId, axis: usize) -> Result<TensorId> {
        let v = self.value(a);
        let shape = v.shape().to_vec();
        if axis >= shape.len() {
            return Err(Error::Shape(format!("softmax axis {axis} out of range for {shape:?}")));
        }
        let lane = shape[axis];
        let inner: usize = shape[axis + 1..].iter().product();
        let outer: usize = shape[..axis].iter().product();
        let mut data = v.data().to_vec();
        for o in 0..outer {
            for i in 0..inner {
                let at = |l: usize| o * lane * inner + l * inner + i;
                let mut m = f64::NEG_INFINITY;
                for l in 0..lane {
                    m = m.max(data[at(l)]);
                }
                let mut z = 0.0;
                for l in 0..lane {
                    let e = (data[at(l)] - m).exp();
                    data[at(l)] = e;
                    z += e;
                }
                for l in 0..lane {
                    data[at(l)] /= z;
                }
            }
        }
        Ok(self.push_derived(Op::Softmax { axis }, vec![a], Tensor::new(shape, data)?))
    }

    // ── Shape plumbing ──────────────────────────────────────────────────────

    pub fn reshape(&mut self, a: TensorId, shape: Vec<usize>) -> Result<TensorId> {
        let t = self.value(a).reshaped(shape)?;
        Ok(self.push_derived(Op::Reshape, vec![a], t))
    }

    /// Concatenate along `axis`; all other dimensions must agree.
    pub fn concat(&mut self, axis: usize, parts: &[TensorId]) -> Result<TensorId> {
        if parts.is_empty() {
            return Err(Error::InvalidArgument("concat of zero tensors".into()));
        }
        let first = self.value(parts[0]).shape().to_vec();
        if axis >= first.len() {
            return Err(Error::Shape(format!("concat axis {axis} out of range for {first:?}")));
        }
        let mut total = 0usize;
        for &p in parts {
            let s = self.value(p).shape();
            if s.len() != first.len()
                || s.iter().zip(&first).enumerate().any(|(i, (a, b))| i != axis && a != b)
            {
                return Err(Error::Shape(format!("concat shapes {first:?} vs {s:?} on axis {axis}")));
            }
            total += s[axis];
        }
        let mut shape = first.clone();
        shape[axis] = total;
        let inner: usize = first[axis + 1..].iter().product();
        let outer: usize = first[..axis].iter().product();
        let mut data = vec![0.0; shape.iter().product()];
        let out_lane = total * inner;
        let mut offset = 0usize;
        for &p in parts {
            let v = self.value(p);
            let plen = v.shape()[axis] * inner;
            for o in 0..outer {
                let src = &v.data()[o * plen..(o + 1) * plen];
                data[o * out_lane + offset..o * out_lane + offset + plen].copy_from_slice(src);
            }
            offset += plen;
        }
        Ok(self.push_derived(Op::Concat { axis }, parts.to_vec(), Tensor::new(shape, data)?))
    }

    /// Take `len` consecutive positions along `axis` starting at `start`.
    pub fn slice(&mut self, a: TensorId, axis: usize, start: usize, len: usize) -> Result<TensorId> {
        let v = self.value(a);
        let shape = v.shape().to_vec();
        if axis >= shape.len() || start + len > shape[axis] || len == 0 {
            return Err(Error::Shape(format!(
                "slice [{start}, {start}+{len}) on axis {axis} of {shape:?}"
            )));
        }
        let inner: usize = shape[axis + 1..].iter().product();
        let outer: usize = shape[..axis].iter().product();
        let in_lane = shape[axis] * inner;
        let mut out_shape = shape.clone();
        out_shape[axis] = len;
        let mut data = vec![0.0; outer * len * inner];
        for o in 0..outer {
            let src = &v.data()[o * in_lane + start * inner..o * in_lane + (start + len) * inner];
            data[o * len * inner..(o + 1) * len * inner].copy_from_slice(src);
        }
        Ok(self.push_derived(Op::Slice { axis, start }, vec![a], Tensor::new(out_shape, data)?))
    }

    // ── Linear algebra ──────────────────────────────────────────────────────

    /// `[m, k] x [k, n] -> [m, n]`.
    pub fn matmul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(Error::Shape(format!("matmul {sa:?} x {sb:?}")));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let data = kernels::matmul(self.value(a).data(), self.value(b).data(), m, k, n);
        Ok(self.push_derived(Op::Matmul, vec![a, b], Tensor::new(vec![m, n], data)?))
    }

    // ── Convolution, pooling, channel ops ───────────────────────────────────

    fn rank3(&self, a: TensorId, what: &str) -> Result<(usize, usize, usize)> {
        let s = self.value(a).shape();
        if s.len() != 3 {
            return Err(Error::Shape(format!("{what} expects rank-3 [c, f, t], got {s:?}")));
        }
        Ok((s[0], s[1], s[2]))
    }

    /// 2-D convolution. Input `[ci, f, t]`, kernel `[co, ci, kf, kt]`,
    /// optional bias `[co]`.
    pub fn conv2d(
        &mut self,
        input: TensorId,
        kernel: TensorId,
        bias: Option<TensorId>,
        stride: (usize, usize),
        pad: (usize, usize),
    ) -> Result<TensorId> {
        let (ci, fi, ti) = self.rank3(input, "conv2d input")?;
        let ks = self.value(kernel).shape().to_vec();
        if ks.len() != 4 || ks[1] != ci {
            return Err(Error::Shape(format!("conv2d kernel {ks:?} against input channels {ci}")));
        }
        if stride.0 == 0 || stride.1 == 0 {
            return Err(Error::InvalidArgument("conv2d stride must be positive".into()));
        }
        let (co, kf, kt) = (ks[0], ks[2], ks[3]);
        if fi + 2 * pad.0 < kf || ti + 2 * pad.1 < kt {
            return Err(Error::Shape(format!(
                "conv2d kernel {kf}x{kt} larger than padded input {fi}x{ti}"
            )));
        }
        let fo = (fi + 2 * pad.0 - kf) / stride.0 + 1;
        let to = (ti + 2 * pad.1 - kt) / stride.1 + 1;
        if let Some(b) = bias {
            let bs = self.value(b).shape();
            if bs != [co] {
                return Err(Error::Shape(format!("conv2d bias {bs:?}, want [{co}]")));
            }
        }
        let data = kernels::conv2d_forward(
            self.value(input).data(),
            (ci, fi, ti),
            self.value(kernel).data(),
            (co, kf, kt),
            bias.map(|b| self.value(b).data()),
            stride,
            pad,
            (fo, to),
        );
        let mut parents = vec![input, kernel];
        if let Some(b) = bias {
            parents.push(b);
        }
        Ok(self.push_derived(Op::Conv2d { stride, pad }, parents, Tensor::new(vec![co, fo, to], data)?))
    }

    /// Transposed 2-D convolution. Input `[ci, f, t]`, kernel
    /// `[ci, co, kf, kt]`, optional bias `[co]`.
    pub fn conv_transpose2d(
        &mut self,
        input: TensorId,
        kernel: TensorId,
        bias: Option<TensorId>,
        stride: (usize, usize),
        pad: (usize, usize),
    ) -> Result<TensorId> {
        let (ci, fi, ti) = self.rank3(input, "conv_transpose2d input")?;
        let ks = self.value(kernel).shape().to_vec();
        if ks.len() != 4 || ks[0] != ci {
            return Err(Error::Shape(format!(
                "conv_transpose2d kernel {ks:?} against input channels {ci}"
            )));
        }
        let (co, kf, kt) = (ks[1], ks[2], ks[3]);
        let fo = (fi - 1) * stride.0 + kf;
        let to = (ti - 1) * stride.1 + kt;
        if fo < 2 * pad.0 + 1 || to < 2 * pad.1 + 1 {
            return Err(Error::Shape("conv_transpose2d padding swallows entire output".into()));
        }
        let (fo, to) = (fo - 2 * pad.0, to - 2 * pad.1);
        if let Some(b) = bias {
            let bs = self.value(b).shape();
            if bs != [co] {
                return Err(Error::Shape(format!("conv_transpose2d bias {bs:?}, want [{co}]")));
            }
        }
        let data = kernels::conv_transpose2d_forward(
            self.value(input).data(),
            (ci, fi, ti),
            self.value(kernel).data(),
            (co, kf, kt),
            bias.map(|b| self.value(b).data()),
            stride,
            pad,
            (fo, to),
        );
        let mut parents = vec![input, kernel];
        if let Some(b) = bias {
            parents.push(b);
        }
        Ok(self.push_derived(
            Op::ConvTranspose2d { stride, pad },
            parents,
            Tensor::new(vec![co, fo, to], data)?,
        ))
    }

    /// Per-channel gating: out[c, f, t] = x[c, f, t] * gate[c].
    pub fn scale_channels(&mut self, x: TensorId, gate: TensorId) -> Result<TensorId> {
        let (c, f, t) = self.rank3(x, "scale_channels input")?;
        if self.value(gate).shape() != [c] {
            return Err(Error::Shape(format!(
                "scale_channels gate {:?}, want [{c}]",
                self.value(gate).shape()
            )));
        }
        let plane = f * t;
        let mut data = self.value(x).data().to_vec();
        for ch in 0..c {
            let g = self.value(gate).data()[ch];
            for v in &mut data[ch * plane..(ch + 1) * plane] {
                *v *= g;
            }
        }
        Ok(self.push_derived(Op::ScaleChannels, vec![x, gate], Tensor::new(vec![c, f, t], data)?))
    }

    /// Broadcast a single-channel map over all channels:
    /// out[c, f, t] = x[c, f, t] * m[0, f, t].
    pub fn mul_spatial(&mut self, x: TensorId, m: TensorId) -> Result<TensorId> {
        let (c, f, t) = self.rank3(x, "mul_spatial input")?;
        if self.value(m).shape() != [1, f, t] {
            return Err(Error::Shape(format!(
                "mul_spatial map {:?}, want [1, {f}, {t}]",
                self.value(m).shape()
            )));
        }
        let plane = f * t;
        let mut data = self.value(x).data().to_vec();
        for ch in 0..c {
            for (v, &mv) in data[ch * plane..(ch + 1) * plane].iter_mut().zip(self.value(m).data()) {
                *v *= mv;
            }
        }
        Ok(self.push_derived(Op::MulSpatial, vec![x, m], Tensor::new(vec![c, f, t], data)?))
    }

    /// Max or average pooling over non-padded windows.
    pub fn pool2d(
        &mut self,
        x: TensorId,
        mode: PoolMode,
        window: (usize, usize),
        stride: (usize, usize),
    ) -> Result<TensorId> {
        let (c, fi, ti) = self.rank3(x, "pool2d input")?;
        if window.0 == 0 || window.1 == 0 || stride.0 == 0 || stride.1 == 0 {
            return Err(Error::InvalidArgument("pool2d window/stride must be positive".into()));
        }
        if fi < window.0 || ti < window.1 {
            return Err(Error::Shape(format!("pool2d window {window:?} on input {fi}x{ti}")));
        }
        let fo = (fi - window.0) / stride.0 + 1;
        let to = (ti - window.1) / stride.1 + 1;
        let (data, argmax) = kernels::pool2d_forward(
            self.value(x).data(),
            (c, fi, ti),
            mode == PoolMode::Max,
            window,
            stride,
            (fo, to),
        );
        Ok(self.push_derived(
            Op::Pool2d { mode, window, stride, argmax },
            vec![x],
            Tensor::new(vec![c, fo, to], data)?,
        ))
    }

    /// Channel-axis max: `[c, f, t] -> [1, f, t]` (first max wins on ties).
    pub fn channel_max(&mut self, x: TensorId) -> Result<TensorId> {
        let (c, f, t) = self.rank3(x, "channel_max input")?;
        let plane = f * t;
        let xv = self.value(x).data();
        let mut data = vec![f64::NEG_INFINITY; plane];
        let mut argmax = vec![0usize; plane];
        for ch in 0..c {
            for i in 0..plane {
                let v = xv[ch * plane + i];
                if v > data[i] {
                    data[i] = v;
                    argmax[i] = ch * plane + i;
                }
            }
        }
        Ok(self.push_derived(Op::ChannelMax { argmax }, vec![x], Tensor::new(vec![1, f, t], data)?))
    }

    /// Channel-axis mean: `[c, f, t] -> [1, f, t]`.
    pub fn channel_mean(&mut self, x: TensorId) -> Result<TensorId> {
        let (c, f, t) = self.rank3(x, "channel_mean input")?;
        let plane = f * t;
        let xv = self.value(x).data();
        let mut data = vec![0.0; plane];
        for ch in 0..c {
            for i in 0..plane {
                data[i] += xv[ch * plane + i];
            }
        }
        for v in &mut data {
            *v /= c as f64;
        }
        Ok(self.push_derived(Op::ChannelMean, vec![x], Tensor::new(vec![1, f, t], data)?))
    }

    /// Global average over the spatial plane: `[c, f, t] -> [c]`.
    pub fn spatial_mean(&mut self, x: TensorId) -> Result<TensorId> {
        let (c, f, t) = self.rank3(x, "spatial_mean input")?;
        let plane = f * t;
        let xv = self.value(x).data();
        let data: Vec<f64> =
            (0..c).map(|ch| xv[ch * plane..(ch + 1) * plane].iter().sum::<f64>() / plane as f64).collect();
        Ok(self.push_derived(Op::SpatialMean, vec![x], Tensor::new(vec![c], data)?))
    }

    /// Magnitude of a `[2, f, t]` re/im pair -> `[f, t]`.
    pub fn complex_mag(&mut self, x: TensorId) -> Result<TensorId> {
        let (c, f, t) = self.rank3(x, "complex_mag input")?;
        if c != 2 {
            return Err(Error::Shape(format!("complex_mag wants [2, f, t], got [{c}, {f}, {t}]")));
        }
        let plane = f * t;
        let xv = self.value(x).data();
        let data: Vec<f64> = (0..plane).map(|i| xv[i].hypot(xv[plane + i])).collect();
        Ok(self.push_derived(Op::ComplexMag, vec![x], Tensor::new(vec![f, t], data)?))
    }

    // ── Differentiable analysis / synthesis ─────────────────────────────────

    /// Centered short-time analysis of a rank-1 waveform; output is
    /// `[2, bins, frames]` with the real plane first.
    pub fn stft(&mut self, x: TensorId, geom: &StftGeometry) -> Result<TensorId> {
        let s = self.value(x).shape();
        if s.len() != 1 {
            return Err(Error::Shape(format!("stft expects rank-1 waveform, got {s:?}")));
        }
        let len = s[0];
        if len < geom.hop {
            return Err(Error::InvalidArgument(format!(
                "waveform of {len} samples is shorter than one hop ({})",
                geom.hop
            )));
        }
        let (re, im, frames) = fft::stft_planes(self.value(x).data(), geom);
        let bins = geom.bins();
        let mut data = re;
        data.extend_from_slice(&im);
        Ok(self.push_derived(
            Op::Stft { geom: geom.clone() },
            vec![x],
            Tensor::new(vec![2, bins, frames], data)?,
        ))
    }

    /// Weighted overlap-add synthesis of a magnitude grid under a fixed phase
    /// grid (`cos_p`/`sin_p`, both `[bins * frames]`). Returns `out_len`
    /// samples; the phase is constant context, so gradients flow only into
    /// the magnitudes.
    pub fn istft_fixed_phase(
        &mut self,
        mag: TensorId,
        cos_p: &[f64],
        sin_p: &[f64],
        geom: &StftGeometry,
        out_len: usize,
    ) -> Result<TensorId> {
        let s = self.value(mag).shape();
        if s.len() != 2 || s[0] != geom.bins() {
            return Err(Error::Shape(format!(
                "istft_fixed_phase magnitude {s:?}, want [{}, frames]",
                geom.bins()
            )));
        }
        let frames = s[1];
        if cos_p.len() != s[0] * frames || sin_p.len() != s[0] * frames {
            return Err(Error::Shape("istft_fixed_phase phase grid size mismatch".into()));
        }
        if frames != 1 + out_len / geom.hop {
            return Err(Error::Shape(format!(
                "{frames} frames cannot synthesize {out_len} samples at hop {}",
                geom.hop
            )));
        }
        let data = fft::istft_fixed_phase_forward(self.value(mag).data(), cos_p, sin_p, frames, geom, out_len)?;
        Ok(self.push_derived(
            Op::IstftFixedPhase { geom: geom.clone(), cos_p: cos_p.to_vec(), sin_p: sin_p.to_vec() },
            vec![mag],
            Tensor::new(vec![out_len], data)?,
        ))
    }

    // ── Backward ────────────────────────────────────────────────────────────

    /// Reverse sweep from a scalar loss. Each reachable node is visited once;
    /// leaf gradients stay available through [`Graph::grad`]. Calling this a
    /// second time on the same graph is an error.
    pub fn backward(&mut self, loss: TensorId) -> Result<()> {
        if self.backward_done {
            return Err(Error::InvalidArgument(
                "backward was already run on this graph; build a fresh graph instead".into(),
            ));
        }
        if !self.value(loss).is_scalar() {
            return Err(Error::Shape(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        if !self.nodes[loss.0].requires_grad {
            return Err(Error::InvalidArgument(
                "loss does not depend on any gradient-tracked leaf".into(),
            ));
        }
        self.backward_done = true;
        self.nodes[loss.0].grad = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            if !self.nodes[i].requires_grad || self.nodes[i].grad.is_none() {
                continue;
            }
            let (head, tail) = self.nodes.split_at_mut(i);
            let node = &mut tail[0];
            let gout = node.grad.take().expect("checked above");
            let contribs = op_backward(node, &gout, head);
            node.grad = Some(gout);
            for (parent, contrib) in contribs {
                let p = &mut head[parent];
                let slot = p.grad.get_or_insert_with(|| vec![0.0; p.value.numel()]);
                for (s, c) in slot.iter_mut().zip(&contrib) {
                    *s += c;
                }
            }
        }
        Ok(())
    }
}

/// Per-op vector-Jacobian products. Returns (parent index, contribution)
/// pairs for parents that track gradients.
fn op_backward(node: &Node, gout: &[f64], head: &[Node]) -> Vec<(usize, Vec<f64>)> {
    let mut out: Vec<(usize, Vec<f64>)> = Vec::new();
    let parents = &node.parents;
    let needs = |p: TensorId| head[p.0].requires_grad;
    let pval = |p: TensorId| head[p.0].value.data();
    let pshape = |p: TensorId| head[p.0].value.shape();
    let y = node.value.data();

    // Reduce an elementwise contribution back to a scalar operand if needed.
    let fit = |p: TensorId, contrib: Vec<f64>| -> Vec<f64> {
        if head[p.0].value.is_scalar() && contrib.len() > 1 {
            vec![contrib.iter().sum()]
        } else {
            contrib
        }
    };

    match &node.op {
        Op::Leaf => {}
        Op::Add => {
            for &p in parents.iter().take(2) {
                if needs(p) {
                    out.push((p.0, fit(p, gout.to_vec())));
                }
            }
        }
        Op::Sub => {
            let (a, b) = (parents[0], parents[1]);
            if needs(a) {
                out.push((a.0, fit(a, gout.to_vec())));
            }
            if needs(b) {
                out.push((b.0, fit(b, gout.iter().map(|g| -g).collect())));
            }
        }
        Op::Mul => {
            let (a, b) = (parents[0], parents[1]);
            let (va, vb) = (pval(a), pval(b));
            let pick = |v: &[f64], i: usize| if v.len() == 1 { v[0] } else { v[i] };
            if needs(a) {
                let c: Vec<f64> = gout.iter().enumerate().map(|(i, g)| g * pick(vb, i)).collect();
                out.push((a.0, fit(a, c)));
            }
            if needs(b) {
                let c: Vec<f64> = gout.iter().enumerate().map(|(i, g)| g * pick(va, i)).collect();
                out.push((b.0, fit(b, c)));
            }
        }
        Op::Div => {
            let (a, b) = (parents[0], parents[1]);
            let (va, vb) = (pval(a), pval(b));
            let pick = |v: &[f64], i: usize| if v.len() == 1 { v[0] } else { v[i] };
            if needs(a) {
                let c: Vec<f64> = gout.iter().enumerate().map(|(i, g)| g / pick(vb, i)).collect();
                out.push((a.0, fit(a, c)));
            }
            if needs(b) {
                let c: Vec<f64> = gout
                    .iter()
                    .enumerate()
                    .map(|(i, g)| {
                        let d = pick(vb, i);
                        -g * pick(va, i) / (d * d)
                    })
                    .collect();
                out.push((b.0, fit(b, c)));
            }
        }
        Op::Scale(c) => {
            let a = parents[0];
            if needs(a) {
                out.push((a.0, gout.iter().map(|g| g * c).collect()));
            }
        }
        Op::Sigmoid => {
            let a = parents[0];
            if needs(a) {
                out.push((a.0, gout.iter().zip(y).map(|(g, &s)| g * s * (1.0 - s)).collect()));
            }
        }
        Op::Tanh => {
            let a = parents[0];
            if needs(a) {
                out.push((a.0, gout.iter().zip(y).map(|(g, &t)| g * (1.0 - t * t)).collect()));
            }
        }
        Op::Relu => {
            let a = parents[0];
            if needs(a) {
                let x = pval(a);
                out.push((a.0, gout.iter().zip(x).map(|(g, &v)| if v > 0.0 { *g } else { 0.0 }).collect()));
            }
        }
        Op::Softplus => {
            let a = parents[0];
            if needs(a) {
                let x = pval(a);
                out.push((a.0, gout.iter().zip(x).map(|(g, &v)| g / (1.0 + (-v).exp())).collect()));
            }
        }
        Op::Exp => {
            let a = parents[0];
            if needs(a) {
                out.push((a.0, gout.iter().zip(y).map(|(g, &e)| g * e).collect()));
            }
        }
        Op::Sqrt => {
            let a = parents[0];
            if needs(a) {
                out.push((a.0, gout.iter().zip(y).map(|(g, &s)| 0.5 * g / s).collect()));
            }
        }
        Op::LogClamped { eps } => {
            let a = parents[0];
            if needs(a) {
                let x = pval(a);
                out.push((
                    a.0,
                    gout.iter().zip(x).map(|(g, &v)| if v > *eps { g / v } else { 0.0 }).collect(),
                ));
            }
        }
        Op::Softmax { axis } => {
            let a = parents[0];
            if needs(a) {
                let shape = node.value.shape();
                let lane = shape[*axis];
                let inner: usize = shape[*axis + 1..].iter().product();
                let outer: usize = shape[..*axis].iter().product();
                let mut gin = vec![0.0; y.len()];
                for o in 0..outer {
                    for i in 0..inner {
                        let at = |l: usize| o * lane * inner + l * inner + i;
                        let mut dot = 0.0;
                        for l in 0..lane {
                            dot += gout[at(l)] * y[at(l)];
                        }
                        for l in 0..lane {
                            gin[at(l)] = y[at(l)] * (gout[at(l)] - dot);
                        }
                    }
                }
                out.push((a.0, gin));
            }
        }
        Op::Sum => {
            let a = parents[0];
            if needs(a) {
                out.push((a.0, vec![gout[0]; head[a.0].value.numel()]));
            }
        }
        Op::Mean => {
            let a = parents[0];
            if needs(a) {
                let n = head[a.0].value.numel();
                out.push((a.0, vec![gout[0] / n as f64; n]));
            }
        }
        Op::Concat { axis } => {
            let shape = node.value.shape();
            let inner: usize = shape[*axis + 1..].iter().product();
            let outer: usize = shape[..*axis].iter().product();
            let out_lane = shape[*axis] * inner;
            let mut offset = 0usize;
            for &p in parents {
                let plen = pshape(p)[*axis] * inner;
                if needs(p) {
                    let mut c = vec![0.0; head[p.0].value.numel()];
                    for o in 0..outer {
                        c[o * plen..(o + 1) * plen]
                            .copy_from_slice(&gout[o * out_lane + offset..o * out_lane + offset + plen]);
                    }
                    out.push((p.0, c));
                }
                offset += plen;
            }
        }
        Op::Slice { axis, start } => {
            let a = parents[0];
            if needs(a) {
                let in_shape = pshape(a);
                let out_shape = node.value.shape();
                let inner: usize = in_shape[*axis + 1..].iter().product();
                let outer: usize = in_shape[..*axis].iter().product();
                let in_lane = in_shape[*axis] * inner;
                let len = out_shape[*axis];
                let mut c = vec![0.0; head[a.0].value.numel()];
                for o in 0..outer {
                    c[o * in_lane + start * inner..o * in_lane + (start + len) * inner]
                        .copy_from_slice(&gout[o * len * inner..(o + 1) * len * inner]);
                }
                out.push((a.0, c));
            }
        }
        Op::Reshape => {
            let a = parents[0];
            if needs(a) {
                out.push((a.0, gout.to_vec()));
            }
        }
        Op::Matmul => {
            let (a, b) = (parents[0], parents[1]);
            let (m, k) = (pshape(a)[0], pshape(a)[1]);
            let n = pshape(b)[1];
            if needs(a) {
                let bt = kernels::transpose(pval(b), k, n);
                out.push((a.0, kernels::matmul(gout, &bt, m, n, k)));
            }
            if needs(b) {
                let at = kernels::transpose(pval(a), m, k);
                out.push((b.0, kernels::matmul(&at, gout, k, m, n)));
            }
        }
        Op::Conv2d { stride, pad } => {
            let (input, kernel) = (parents[0], parents[1]);
            let is = pshape(input);
            let ks = pshape(kernel);
            let (ci, fi, ti) = (is[0], is[1], is[2]);
            let (co, kf, kt) = (ks[0], ks[2], ks[3]);
            let os = node.value.shape();
            let (fo, to) = (os[1], os[2]);
            if needs(input) {
                out.push((
                    input.0,
                    kernels::conv2d_backward_input(
                        gout,
                        (ci, fi, ti),
                        pval(kernel),
                        (co, kf, kt),
                        *stride,
                        *pad,
                        (fo, to),
                    ),
                ));
            }
            if needs(kernel) {
                out.push((
                    kernel.0,
                    kernels::conv2d_backward_kernel(
                        gout,
                        pval(input),
                        (ci, fi, ti),
                        (co, kf, kt),
                        *stride,
                        *pad,
                        (fo, to),
                    ),
                ));
            }
            if parents.len() == 3 && needs(parents[2]) {
                let plane = fo * to;
                let gb: Vec<f64> =
                    (0..co).map(|oc| gout[oc * plane..(oc + 1) * plane].iter().sum()).collect();
                out.push((parents[2].0, gb));
            }
        }
        Op::ConvTranspose2d { stride, pad } => {
            let (input, kernel) = (parents[0], parents[1]);
            let is = pshape(input);
            let ks = pshape(kernel);
            let (ci, fi, ti) = (is[0], is[1], is[2]);
            let (co, kf, kt) = (ks[1], ks[2], ks[3]);
            let os = node.value.shape();
            let (fo, to) = (os[1], os[2]);
            if needs(input) {
                out.push((
                    input.0,
                    kernels::conv_transpose2d_backward_input(
                        gout,
                        (ci, fi, ti),
                        pval(kernel),
                        (co, kf, kt),
                        *stride,
                        *pad,
                        (fo, to),
                    ),
                ));
            }
            if needs(kernel) {
                out.push((
                    kernel.0,
                    kernels::conv_transpose2d_backward_kernel(
                        gout,
                        pval(input),
                        (ci, fi, ti),
                        (co, kf, kt),
                        *stride,
                        *pad,
                        (fo, to),
                    ),
                ));
            }
            if parents.len() == 3 && needs(parents[2]) {
                let plane = fo * to;
                let gb: Vec<f64> =
                    (0..co).map(|oc| gout[oc * plane..(oc + 1) * plane].iter().sum()).collect();
                out.push((parents[2].0, gb));
            }
        }
        Op::ScaleChannels => {
            let (x, gate) = (parents[0], parents[1]);
            let s = pshape(x);
            let (c, plane) = (s[0], s[1] * s[2]);
            if needs(x) {
                let gv = pval(gate);
                let mut gx = gout.to_vec();
                for ch in 0..c {
                    for v in &mut gx[ch * plane..(ch + 1) * plane] {
                        *v *= gv[ch];
                    }
                }
                out.push((x.0, gx));
            }
            if needs(gate) {
                let xv = pval(x);
                let gg: Vec<f64> = (0..c)
                    .map(|ch| {
                        gout[ch * plane..(ch + 1) * plane]
                            .iter()
                            .zip(&xv[ch * plane..(ch + 1) * plane])
                            .map(|(g, v)| g * v)
                            .sum()
                    })
                    .collect();
                out.push((gate.0, gg));
            }
        }
        Op::MulSpatial => {
            let (x, m) = (parents[0], parents[1]);
            let s = pshape(x);
            let (c, plane) = (s[0], s[1] * s[2]);
            if needs(x) {
                let mv = pval(m);
                let mut gx = gout.to_vec();
                for ch in 0..c {
                    for (v, &mm) in gx[ch * plane..(ch + 1) * plane].iter_mut().zip(mv) {
                        *v *= mm;
                    }
                }
                out.push((x.0, gx));
            }
            if needs(m) {
                let xv = pval(x);
                let mut gm = vec![0.0; plane];
                for ch in 0..c {
                    for i in 0..plane {
                        gm[i] += gout[ch * plane + i] * xv[ch * plane + i];
                    }
                }
                out.push((m.0, gm));
            }
        }
        Op::Pool2d { mode, window, stride, argmax } => {
            let x = parents[0];
            if needs(x) {
                let s = pshape(x);
                let os = node.value.shape();
                out.push((
                    x.0,
                    kernels::pool2d_backward(
                        gout,
                        argmax,
                        (s[0], s[1], s[2]),
                        *mode == PoolMode::Max,
                        *window,
                        *stride,
                        (os[1], os[2]),
                    ),
                ));
            }
        }
        Op::ChannelMax { argmax } => {
            let x = parents[0];
            if needs(x) {
                let mut gx = vec![0.0; head[x.0].value.numel()];
                for (i, &src) in argmax.iter().enumerate() {
                    gx[src] += gout[i];
                }
                out.push((x.0, gx));
            }
        }
        Op::ChannelMean => {
            let x = parents[0];
            if needs(x) {
                let s = pshape(x);
                let (c, plane) = (s[0], s[1] * s[2]);
                let mut gx = vec![0.0; c * plane];
                for ch in 0..c {
                    for i in 0..plane {
                        gx[ch * plane + i] = gout[i] / c as f64;
                    }
                }
                out.push((x.0, gx));
            }
        }
        Op::SpatialMean => {
            let x = parents[0];
            if needs(x) {
                let s = pshape(x);
                let (c, plane) = (s[0], s[1] * s[2]);
                let mut gx = vec![0.0; c * plane];
                for ch in 0..c {
                    let g = gout[ch] / plane as f64;
                    for v in &mut gx[ch * plane..(ch + 1) * plane] {
                        *v = g;
                    }
                }
                out.push((x.0, gx));
            }
        }
        Op::ComplexMag => {
            let x = parents[0];
            if needs(x) {
                let xv = pval(x);
                let plane = y.len();
                let mut gx = vec![0.0; 2 * plane];
                for i in 0..plane {
                    let denom = y[i].max(1e-12);
                    gx[i] = gout[i] * xv[i] / denom;
                    gx[plane + i] = gout[i] * xv[plane + i] / denom;
                }
                out.push((x.0, gx));
            }
        }
        Op::Stft { geom } => {
            let x = parents[0];
            if needs(x) {
                let frames = node.value.shape()[2];
                let bins = geom.bins();
                let xlen = pshape(x)[0];
                let (gre, gim) = gout.split_at(bins * frames);
                out.push((x.0, fft::stft_adjoint(gre, gim, frames, geom, xlen)));
            }
        }
        Op::IstftFixedPhase { geom, cos_p, sin_p } => {
            let mag = parents[0];
            if needs(mag) {
                let frames = pshape(mag)[1];
                let out_len = node.value.shape()[0];
                out.push((mag.0, fft::istft_fixed_phase_adjoint(gout, cos_p, sin_p, frames, geom, out_len)));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn all_ones_convolution_sums_the_window() {
        let mut g = Graph::new();
        let x = g.constant(Tensor::full(vec![1, 3, 3], 1.0));
        let k = g.constant(Tensor::full(vec![1, 1, 3, 3], 1.0));
        let y = g.conv2d(x, k, None, (1, 1), (0, 0)).unwrap();
        assert_eq!(g.value(y).shape(), &[1, 1, 1]);
        assert!((g.value(y).data()[0] - 9.0).abs() < 1e-12);
    }

    #[test]
    fn identity_kernel_reproduces_input() {
        let mut g = Graph::new();
        let x = g.constant(t(&[1, 2, 3], &[1.0, -2.0, 3.0, 4.0, 5.0, -6.0]));
        let k = g.constant(t(&[1, 1, 1, 1], &[1.0]));
        let y = g.conv2d(x, k, None, (1, 1), (0, 0)).unwrap();
        assert_eq!(g.value(y).data(), g.value(x).data());
    }

    #[test]
    fn pooling_on_a_2x2_example() {
        let mut g = Graph::new();
        let x = g.constant(t(&[1, 2, 2], &[1.0, 2.0, 3.0, 4.0]));
        let mx = g.pool2d(x, PoolMode::Max, (2, 2), (2, 2)).unwrap();
        let av = g.pool2d(x, PoolMode::Avg, (2, 2), (2, 2)).unwrap();
        assert_eq!(g.value(mx).data(), &[4.0]);
        assert_eq!(g.value(av).data(), &[2.5]);
    }

    #[test]
    fn max_pool_routes_gradient_to_the_argmax_only() {
        let mut g = Graph::new();
        let x = g.leaf(t(&[1, 2, 2], &[1.0, 2.0, 3.0, 4.0]), true);
        let y = g.pool2d(x, PoolMode::Max, (2, 2), (2, 2)).unwrap();
        let s = g.sum(y);
        g.backward(s).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn avg_pool_gradient_is_uniform_and_sums_to_one() {
        let mut g = Graph::new();
        let x = g.leaf(t(&[1, 2, 2], &[1.0, 2.0, 3.0, 4.0]), true);
        let y = g.pool2d(x, PoolMode::Avg, (2, 2), (2, 2)).unwrap();
        let s = g.sum(y);
        g.backward(s).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[0.25; 4]);
    }

    #[test]
    fn sigmoid_at_zero_and_softmax_of_equal_logits() {
        let mut g = Graph::new();
        let x = g.constant(t(&[2], &[0.0, 0.0]));
        let s = g.sigmoid(x);
        assert_eq!(g.value(s).data(), &[0.5, 0.5]);
        let p = g.softmax(x, 0).unwrap();
        assert_eq!(g.value(p).data(), &[0.5, 0.5]);
    }

    #[test]
    fn sum_of_squares_gradient_is_two_x() {
        let mut g = Graph::new();
        let x = g.leaf(t(&[3], &[1.0, 2.0, 3.0]), true);
        let sq = g.mul(x, x).unwrap();
        let s = g.sum(sq);
        g.backward(s).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[2.0, 4.0, 6.0]);
    }

    #[test]
    fn sum_gradient_is_all_ones() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::full(vec![2, 3], 0.3), true);
        let s = g.sum(x);
        g.backward(s).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[1.0; 6]);
    }

    #[test]
    fn backward_twice_is_rejected() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::scalar(2.0), true);
        let y = g.mul(x, x).unwrap();
        g.backward(y).unwrap();
        assert!(g.backward(y).is_err());
    }

    #[test]
    fn non_scalar_loss_is_rejected() {
        let mut g = Graph::new();
        let x = g.leaf(t(&[2], &[1.0, 2.0]), true);
        assert!(g.backward(x).is_err());
    }

    #[test]
    fn detach_blocks_gradient_flow() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::scalar(3.0), true);
        let d = g.detach(x);
        let c = g.scalar(1.0);
        let y = g.mul(x, c).unwrap();
        let z = g.add(y, d).unwrap();
        g.backward(z).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[1.0]);
        assert!(!g.requires_grad(d));
    }

    #[test]
    fn scalar_broadcast_works_both_ways_and_bad_shapes_fail() {
        let mut g = Graph::new();
        let v = g.leaf(t(&[3], &[1.0, 2.0, 3.0]), true);
        let c = g.leaf(Tensor::scalar(10.0), true);
        let a = g.mul(v, c).unwrap();
        assert_eq!(g.value(a).data(), &[10.0, 20.0, 30.0]);
        let b = g.mul(c, v).unwrap();
        assert_eq!(g.value(b).data(), &[10.0, 20.0, 30.0]);
        let s1 = g.sum(a);
        g.backward(s1).unwrap();
        // d(10*(x1+x2+x3))/dc collects the elementwise contributions.
        assert_eq!(g.grad(c).unwrap(), &[6.0]);
        assert_eq!(g.grad(v).unwrap(), &[10.0, 10.0, 10.0]);

        let mut g2 = Graph::new();
        let p = g2.constant(t(&[2], &[1.0, 2.0]));
        let q = g2.constant(t(&[3], &[1.0, 2.0, 3.0]));
        assert!(g2.add(p, q).is_err());
    }

    #[test]
    fn concat_and_slice_round_trip() {
        let mut g = Graph::new();
        let a = g.constant(t(&[1, 2, 2], &[1.0, 2.0, 3.0, 4.0]));
        let b = g.constant(t(&[2, 2, 2], &[5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 11.0, 12.0]));
        let c = g.concat(0, &[a, b]).unwrap();
        assert_eq!(g.value(c).shape(), &[3, 2, 2]);
        let back = g.slice(c, 0, 1, 2).unwrap();
        assert_eq!(g.value(back).data(), g.value(b).data());
        let t_ax = g.concat(2, &[a, a]).unwrap();
        assert_eq!(g.value(t_ax).data(), &[1.0, 2.0, 1.0, 2.0, 3.0, 4.0, 3.0, 4.0]);
    }

    #[test]
    fn gradients_are_bitwise_reproducible() {
        let run = || {
            let mut g = Graph::new();
            let x = g.leaf(
                Tensor::new(vec![2, 5, 7], (0..70).map(|i| ((i * 37 % 19) as f64 - 9.0) / 5.0).collect())
                    .unwrap(),
                true,
            );
            let k = g.leaf(
                Tensor::new(vec![3, 2, 3, 3], (0..54).map(|i| ((i * 11 % 23) as f64 - 11.0) / 7.0).collect())
                    .unwrap(),
                true,
            );
            let c = g.conv2d(x, k, None, (1, 1), (1, 1)).unwrap();
            let s = g.sigmoid(c);
            let l = g.mean(s);
            g.backward(l).unwrap();
            (g.grad(x).unwrap().to_vec(), g.grad(k).unwrap().to_vec())
        };
        let (gx1, gk1) = run();
        let (gx2, gk2) = run();
        assert!(gx1.iter().zip(&gx2).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert!(gk1.iter().zip(&gk2).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}
