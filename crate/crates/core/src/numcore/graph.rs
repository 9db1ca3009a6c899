//! Define-by-run reverse-mode differentiation tape.
//!
//! A [`Graph`] records every differentiable op as it executes. Each node
//! stores its output value, its parent node ids and a closure that maps the
//! node's output gradient to parent gradient contributions. [`Graph::backward`]
//! replays the record once in reverse order, visiting each node exactly once,
//! and accumulates gradients on `requires_grad` leaves. A tape is single-owner:
//! one forward/backward pass at a time.

use super::kernels::{self, PadMode};
use super::{Result, Tensor, TensorError};

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

const GELU_C: f64 = 0.044715;

fn gelu_value(x: f64) -> f64 {
    let u = (2.0 / std::f64::consts::PI).sqrt() * (x + GELU_C * x * x * x);
    0.5 * x * (1.0 + u.tanh())
}

fn gelu_derivative(x: f64) -> f64 {
    let k = (2.0 / std::f64::consts::PI).sqrt();
    let u = k * (x + GELU_C * x * x * x);
    let t = u.tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * k * (1.0 + 3.0 * GELU_C * x * x)
}

type BackwardFn = Box<dyn Fn(&Tensor, &[&Tensor], &[bool]) -> Result<Vec<Option<Tensor>>>>;

struct Node {
    value: Tensor,
    op: &'static str,
    parents: Vec<usize>,
    backward: Option<BackwardFn>,
    needs_grad: bool,
    requires_grad: bool,
    grad: Option<Tensor>,
}

/// Topologically ordered record of executed differentiable ops.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Accumulated gradient of a `requires_grad` leaf (after backward).
    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.nodes[v.0].grad.as_ref()
    }

    /// Clear accumulated leaf gradients.
    pub fn reset_grads(&mut self) {
        for node in &mut self.nodes {
            node.grad = None;
        }
    }

    /// Register a leaf tensor. Gradients accumulate on it when
    /// `requires_grad` is set.
    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: "leaf",
            parents: Vec::new(),
            backward: None,
            needs_grad: requires_grad,
            requires_grad,
            grad: None,
        });
        Var(self.nodes.len() - 1)
    }

    /// Leaf that never receives gradients.
    pub fn input(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    /// Leaf that accumulates gradients.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.leaf(value, true)
    }

    fn push(
        &mut self,
        op: &'static str,
        value: Tensor,
        parents: Vec<usize>,
        backward: BackwardFn,
    ) -> Result<Var> {
        if !value.is_finite() {
            return Err(TensorError::NonFinite { op });
        }
        let needs_grad = parents.iter().any(|&p| self.nodes[p].needs_grad);
        self.nodes.push(Node {
            value,
            op,
            parents,
            backward: Some(backward),
            needs_grad,
            requires_grad: false,
            grad: None,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    // -- elementwise -------------------------------------------------------

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = kernels::ew_zip("add", self.value(a), self.value(b), |x, y| x + y)?;
        self.push("add", v, vec![a.0, b.0], Box::new(|g, _, _| {
            Ok(vec![Some(g.clone()), Some(g.clone())])
        }))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = kernels::ew_zip("sub", self.value(a), self.value(b), |x, y| x - y)?;
        self.push("sub", v, vec![a.0, b.0], Box::new(|g, _, _| {
            Ok(vec![Some(g.clone()), Some(g.map(|x| -x))])
        }))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = kernels::ew_zip("mul", self.value(a), self.value(b), |x, y| x * y)?;
        self.push("mul", v, vec![a.0, b.0], Box::new(|g, p, need| {
            let da = if need[0] {
                Some(kernels::ew_zip("mul_bwd", g, p[1], |gv, bv| gv * bv)?)
            } else {
                None
            };
            let db = if need[1] {
                Some(kernels::ew_zip("mul_bwd", g, p[0], |gv, av| gv * av)?)
            } else {
                None
            };
            Ok(vec![da, db])
        }))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        let v = self.value(a).map(|x| c * x);
        self.push("scale", v, vec![a.0], Box::new(move |g, _, _| {
            Ok(vec![Some(g.map(|x| c * x))])
        }))
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Result<Var> {
        let v = self.value(a).map(|x| x + c);
        self.push("add_scalar", v, vec![a.0], Box::new(|g, _, _| {
            Ok(vec![Some(g.clone())])
        }))
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a).map(|x| x.max(0.0));
        self.push("relu", v, vec![a.0], Box::new(|g, p, _| {
            Ok(vec![Some(kernels::ew_zip("relu_bwd", g, p[0], |gv, xv| {
                if xv > 0.0 {
                    gv
                } else {
                    0.0
                }
            })?)])
        }))
    }

    /// GELU (tanh approximation). Smooth everywhere, so finite-difference
    /// checks of networks built on it are well-posed at any point.
    pub fn gelu(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a).map(gelu_value);
        self.push("gelu", v, vec![a.0], Box::new(|g, p, _| {
            Ok(vec![Some(kernels::ew_zip("gelu_bwd", g, p[0], |gv, xv| {
                gv * gelu_derivative(xv)
            })?)])
        }))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a).map(|x| 1.0 / (1.0 + (-x).exp()));
        let y = v.clone();
        self.push("sigmoid", v, vec![a.0], Box::new(move |g, _, _| {
            Ok(vec![Some(kernels::ew_zip("sigmoid_bwd", g, &y, |gv, yv| {
                gv * yv * (1.0 - yv)
            })?)])
        }))
    }

    pub fn sqrt(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a).map(f64::sqrt);
        let y = v.clone();
        self.push("sqrt", v, vec![a.0], Box::new(move |g, _, _| {
            Ok(vec![Some(kernels::ew_zip("sqrt_bwd", g, &y, |gv, yv| {
                gv * 0.5 / yv
            })?)])
        }))
    }

    /// Natural logarithm (requires strictly positive input).
    pub fn ln(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a).map(f64::ln);
        self.push("ln", v, vec![a.0], Box::new(|g, p, _| {
            Ok(vec![Some(kernels::ew_zip("ln_bwd", g, p[0], |gv, xv| {
                gv / xv
            })?)])
        }))
    }

    // -- linear algebra ----------------------------------------------------

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = kernels::matmul(self.value(a), self.value(b))?;
        self.push("matmul", v, vec![a.0, b.0], Box::new(|g, p, need| {
            let da = if need[0] {
                Some(kernels::matmul(g, &kernels::transpose2(p[1])?)?)
            } else {
                None
            };
            let db = if need[1] {
                Some(kernels::matmul(&kernels::transpose2(p[0])?, g)?)
            } else {
                None
            };
            Ok(vec![da, db])
        }))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let v = kernels::transpose2(self.value(a))?;
        self.push("transpose", v, vec![a.0], Box::new(|g, _, _| {
            Ok(vec![Some(kernels::transpose2(g)?)])
        }))
    }

    pub fn reshape(&mut self, a: Var, shape: Vec<usize>) -> Result<Var> {
        let v = self.value(a).reshaped(shape)?;
        let orig = self.value(a).shape().to_vec();
        self.push("reshape", v, vec![a.0], Box::new(move |g, _, _| {
            Ok(vec![Some(g.reshaped(orig.clone())?)])
        }))
    }

    /// Add a `[m]` bias row to every row of a `[n,m]` tensor.
    pub fn add_row_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let xv = self.value(x);
        let bv = self.value(bias);
        if xv.rank() != 2 || bv.numel() != xv.shape()[1] {
            return Err(TensorError::ShapeMismatch {
                op: "add_row_bias",
                expected: vec![xv.shape()[1]],
                got: bv.shape().to_vec(),
            });
        }
        let (n, m) = (xv.shape()[0], xv.shape()[1]);
        let mut data = xv.data().to_vec();
        for r in 0..n {
            for j in 0..m {
                data[r * m + j] += bv.data()[j];
            }
        }
        let v = Tensor::new(vec![n, m], data)?;
        self.push("add_row_bias", v, vec![x.0, bias.0], Box::new(move |g, _, need| {
            let db = if need[1] {
                let mut acc = vec![0.0; m];
                for r in 0..n {
                    for (j, a) in acc.iter_mut().enumerate() {
                        *a += g.data()[r * m + j];
                    }
                }
                Some(Tensor::new(vec![m], acc)?)
            } else {
                None
            };
            Ok(vec![Some(g.clone()), db])
        }))
    }

    /// Add a `[C]` bias to every spatial position of a `[C,H,W]` tensor.
    pub fn add_chan_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let xv = self.value(x);
        let bv = self.value(bias);
        if xv.rank() != 3 || bv.numel() != xv.shape()[0] {
            return Err(TensorError::ShapeMismatch {
                op: "add_chan_bias",
                expected: vec![xv.shape()[0]],
                got: bv.shape().to_vec(),
            });
        }
        let (c, hw) = (xv.shape()[0], xv.shape()[1] * xv.shape()[2]);
        let mut data = xv.data().to_vec();
        for ch in 0..c {
            let b = bv.data()[ch];
            for v in &mut data[ch * hw..(ch + 1) * hw] {
                *v += b;
            }
        }
        let v = Tensor::new(xv.shape().to_vec(), data)?;
        self.push("add_chan_bias", v, vec![x.0, bias.0], Box::new(move |g, _, need| {
            let db = if need[1] {
                let mut acc = vec![0.0; c];
                for (ch, a) in acc.iter_mut().enumerate() {
                    *a = g.data()[ch * hw..(ch + 1) * hw].iter().sum();
                }
                Some(Tensor::new(vec![c], acc)?)
            } else {
                None
            };
            Ok(vec![Some(g.clone()), db])
        }))
    }

    /// Repeat a `[m]` row `n` times into a `[n,m]` tensor.
    pub fn broadcast_row(&mut self, row: Var, n: usize) -> Result<Var> {
        let rv = self.value(row);
        let m = rv.numel();
        let mut data = Vec::with_capacity(n * m);
        for _ in 0..n {
            data.extend_from_slice(rv.data());
        }
        let v = Tensor::new(vec![n, m], data)?;
        self.push("broadcast_row", v, vec![row.0], Box::new(move |g, _, _| {
            let mut acc = vec![0.0; m];
            for r in 0..n {
                for (j, a) in acc.iter_mut().enumerate() {
                    *a += g.data()[r * m + j];
                }
            }
            Ok(vec![Some(Tensor::new(vec![m], acc)?)])
        }))
    }

    /// Columns `[start, start+len)` of a `[n,m]` tensor.
    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let xv = self.value(x);
        if xv.rank() != 2 || start + len > xv.shape()[1] {
            return Err(TensorError::InvalidArgument {
                op: "slice_cols",
                reason: format!("slice {start}..{} of {:?}", start + len, xv.shape()),
            });
        }
        let (n, m) = (xv.shape()[0], xv.shape()[1]);
        let mut data = Vec::with_capacity(n * len);
        for r in 0..n {
            data.extend_from_slice(&xv.data()[r * m + start..r * m + start + len]);
        }
        let v = Tensor::new(vec![n, len], data)?;
        self.push("slice_cols", v, vec![x.0], Box::new(move |g, _, _| {
            let mut acc = vec![0.0; n * m];
            for r in 0..n {
                acc[r * m + start..r * m + start + len]
                    .copy_from_slice(&g.data()[r * len..(r + 1) * len]);
            }
            Ok(vec![Some(Tensor::new(vec![n, m], acc)?)])
        }))
    }

    /// Concatenate equal-height 2-D tensors along columns.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(TensorError::InvalidArgument {
                op: "concat_cols",
                reason: "no parts".into(),
            });
        }
        let n = self.value(parts[0]).shape()[0];
        let widths: Vec<usize> = parts.iter().map(|&p| self.value(p).shape()[1]).collect();
        let m: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(n * m);
        for r in 0..n {
            for (&p, &w) in parts.iter().zip(&widths) {
                let pv = self.value(p);
                if pv.shape()[0] != n {
                    return Err(TensorError::ShapeMismatch {
                        op: "concat_cols",
                        expected: vec![n],
                        got: vec![pv.shape()[0]],
                    });
                }
                data.extend_from_slice(&pv.data()[r * w..(r + 1) * w]);
            }
        }
        let v = Tensor::new(vec![n, m], data)?;
        let ws = widths.clone();
        self.push(
            "concat_cols",
            v,
            parts.iter().map(|p| p.0).collect(),
            Box::new(move |g, _, _| {
                let mut outs = Vec::with_capacity(ws.len());
                let mut off = 0;
                for &w in &ws {
                    let mut part = Vec::with_capacity(n * w);
                    for r in 0..n {
                        part.extend_from_slice(&g.data()[r * m + off..r * m + off + w]);
                    }
                    outs.push(Some(Tensor::new(vec![n, w], part)?));
                    off += w;
                }
                Ok(outs)
            }),
        )
    }

    // -- reductions --------------------------------------------------------

    pub fn sum_all(&mut self, a: Var) -> Result<Var> {
        let shape = self.value(a).shape().to_vec();
        let v = Tensor::scalar(self.value(a).data().iter().sum());
        self.push("sum_all", v, vec![a.0], Box::new(move |g, _, _| {
            Ok(vec![Some(Tensor::full(shape.clone(), g.item()))])
        }))
    }

    pub fn mean_all(&mut self, a: Var) -> Result<Var> {
        let shape = self.value(a).shape().to_vec();
        let n = self.value(a).numel() as f64;
        let v = Tensor::scalar(self.value(a).data().iter().sum::<f64>() / n);
        self.push("mean_all", v, vec![a.0], Box::new(move |g, _, _| {
            Ok(vec![Some(Tensor::full(shape.clone(), g.item() / n))])
        }))
    }

    /// Column means of a `[n,m]` tensor (mean over axis 0) -> `[m]`.
    pub fn mean_rows(&mut self, a: Var) -> Result<Var> {
        let av = self.value(a);
        if av.rank() != 2 {
            return Err(TensorError::InvalidArgument {
                op: "mean_rows",
                reason: format!("expected rank 2, got {}", av.rank()),
            });
        }
        let (n, m) = (av.shape()[0], av.shape()[1]);
        let mut out = vec![0.0; m];
        for r in 0..n {
            for (j, o) in out.iter_mut().enumerate() {
                *o += av.data()[r * m + j];
            }
        }
        for o in &mut out {
            *o /= n as f64;
        }
        let v = Tensor::new(vec![m], out)?;
        self.push("mean_rows", v, vec![a.0], Box::new(move |g, _, _| {
            let mut acc = vec![0.0; n * m];
            for r in 0..n {
                for j in 0..m {
                    acc[r * m + j] = g.data()[j] / n as f64;
                }
            }
            Ok(vec![Some(Tensor::new(vec![n, m], acc)?)])
        }))
    }

    // -- fused neural ops ----------------------------------------------------

    pub fn softmax_axis(&mut self, x: Var, axis: usize) -> Result<Var> {
        let v = kernels::softmax(self.value(x), axis)?;
        let y = v.clone();
        let shape = v.shape().to_vec();
        let len = shape[axis];
        let inner: usize = shape[axis + 1..].iter().product();
        let outer: usize = shape[..axis].iter().product();
        self.push("softmax", v, vec![x.0], Box::new(move |g, _, _| {
            let mut dx = vec![0.0; y.numel()];
            let yd = y.data();
            let gd = g.data();
            for o in 0..outer {
                for i in 0..inner {
                    let idx = |k: usize| (o * len + k) * inner + i;
                    let mut dot = 0.0;
                    for k in 0..len {
                        dot += gd[idx(k)] * yd[idx(k)];
                    }
                    for k in 0..len {
                        dx[idx(k)] = yd[idx(k)] * (gd[idx(k)] - dot);
                    }
                }
            }
            Ok(vec![Some(Tensor::new(y.shape().to_vec(), dx)?)])
        }))
    }

    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
        let v = kernels::layer_norm(self.value(x), self.value(gamma), self.value(beta), eps)?;
        self.push(
            "layer_norm",
            v,
            vec![x.0, gamma.0, beta.0],
            Box::new(move |g, p, need| {
                let (xv, gammav) = (p[0], p[1]);
                let m = *xv.shape().last().unwrap();
                let rows = xv.numel() / m;
                let xd = xv.data();
                let gam = gammav.data();
                let gd = g.data();
                let mut dx = vec![0.0; xv.numel()];
                let mut dgamma = vec![0.0; m];
                let mut dbeta = vec![0.0; m];
                for r in 0..rows {
                    let row = &xd[r * m..(r + 1) * m];
                    let grow = &gd[r * m..(r + 1) * m];
                    let mean = row.iter().sum::<f64>() / m as f64;
                    let var =
                        row.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / m as f64;
                    let inv = 1.0 / (var + eps).sqrt();
                    let mut mean_dxhat = 0.0;
                    let mut mean_dxhat_xhat = 0.0;
                    for j in 0..m {
                        let xhat = (row[j] - mean) * inv;
                        let dxhat = grow[j] * gam[j];
                        dgamma[j] += grow[j] * xhat;
                        dbeta[j] += grow[j];
                        mean_dxhat += dxhat;
                        mean_dxhat_xhat += dxhat * xhat;
                    }
                    mean_dxhat /= m as f64;
                    mean_dxhat_xhat /= m as f64;
                    for j in 0..m {
                        let xhat = (row[j] - mean) * inv;
                        let dxhat = grow[j] * gam[j];
                        dx[r * m + j] = (dxhat - mean_dxhat - xhat * mean_dxhat_xhat) * inv;
                    }
                }
                Ok(vec![
                    Some(Tensor::new(xv.shape().to_vec(), dx)?),
                    if need[1] {
                        Some(Tensor::new(vec![m], dgamma)?)
                    } else {
                        None
                    },
                    if need[2] {
                        Some(Tensor::new(vec![m], dbeta)?)
                    } else {
                        None
                    },
                ])
            }),
        )
    }

    // -- spatial ops ---------------------------------------------------------

    pub fn conv2d(
        &mut self,
        x: Var,
        kernel: Var,
        stride: usize,
        pad: usize,
        mode: PadMode,
    ) -> Result<Var> {
        let v = kernels::conv2d(self.value(x), self.value(kernel), stride, pad, mode)?;
        self.push("conv2d", v, vec![x.0, kernel.0], Box::new(move |g, p, need| {
            let (din, dker) =
                kernels::conv2d_backward(p[0], p[1], g, stride, pad, mode, need[0], need[1])?;
            Ok(vec![din, dker])
        }))
    }

    pub fn upsample_nearest2(&mut self, x: Var) -> Result<Var> {
        let v = kernels::upsample_nearest2(self.value(x))?;
        self.push("upsample_nearest2", v, vec![x.0], Box::new(|g, _, _| {
            Ok(vec![Some(kernels::upsample_nearest2_backward(g)?)])
        }))
    }

    pub fn adaptive_avg_pool2d(&mut self, x: Var, out_h: usize, out_w: usize) -> Result<Var> {
        let v = kernels::adaptive_avg_pool2d(self.value(x), out_h, out_w)?;
        let (h, w) = (self.value(x).shape()[1], self.value(x).shape()[2]);
        self.push("adaptive_avg_pool2d", v, vec![x.0], Box::new(move |g, _, _| {
            Ok(vec![Some(kernels::adaptive_avg_pool2d_backward(g, h, w)?)])
        }))
    }

    pub fn resize_bilinear(&mut self, x: Var, out_h: usize, out_w: usize) -> Result<Var> {
        let v = kernels::resize_bilinear(self.value(x), out_h, out_w)?;
        let (h, w) = (self.value(x).shape()[1], self.value(x).shape()[2]);
        self.push("resize_bilinear", v, vec![x.0], Box::new(move |g, _, _| {
            Ok(vec![Some(kernels::resize_bilinear_backward(g, h, w)?)])
        }))
    }

    // -- backward ------------------------------------------------------------

    /// Propagate gradients from a scalar loss to every `requires_grad` leaf.
    /// Each node is visited exactly once, in reverse topological (recording)
    /// order; repeated runs over the same graph produce bit-identical
    /// gradients.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let loss_node = &self.nodes[loss.0];
        if !loss_node.value.is_scalar() {
            return Err(TensorError::NonScalarLoss {
                shape: loss_node.value.shape().to_vec(),
            });
        }
        let mut grads: Vec<Option<Tensor>> = Vec::with_capacity(loss.0 + 1);
        grads.resize_with(loss.0 + 1, || None);
        grads[loss.0] = Some(Tensor::full(loss_node.value.shape().to_vec(), 1.0));

        for id in (0..=loss.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            if !self.nodes[id].needs_grad {
                continue;
            }
            if !g.is_finite() {
                return Err(TensorError::BackwardNonFinite {
                    op: self.nodes[id].op,
                });
            }
            if self.nodes[id].backward.is_some() {
                let node = &self.nodes[id];
                let pvals: Vec<&Tensor> =
                    node.parents.iter().map(|&p| &self.nodes[p].value).collect();
                let need: Vec<bool> = node
                    .parents
                    .iter()
                    .map(|&p| self.nodes[p].needs_grad)
                    .collect();
                let contribs = (node.backward.as_ref().unwrap())(&g, &pvals, &need)?;
                debug_assert_eq!(contribs.len(), node.parents.len());
                let op = node.op;
                let parents = node.parents.clone();
                for (p, contrib) in parents.into_iter().zip(contribs) {
                    if !self.nodes[p].needs_grad {
                        continue;
                    }
                    let Some(c) = contrib else { continue };
                    if !c.is_finite() {
                        return Err(TensorError::BackwardNonFinite { op });
                    }
                    match &mut grads[p] {
                        Some(acc) => {
                            for (a, b) in acc.data_mut().iter_mut().zip(c.data()) {
                                *a += b;
                            }
                        }
                        slot => *slot = Some(c),
                    }
                }
            } else if self.nodes[id].requires_grad {
                let node = &mut self.nodes[id];
                match &mut node.grad {
                    Some(acc) => {
                        for (a, b) in acc.data_mut().iter_mut().zip(g.data()) {
                            *a += b;
                        }
                    }
                    slot => *slot = Some(g),
                }
            }
        }
        Ok(())
    }
}
