//! Plain (non-recorded) numeric kernels. The autodiff graph wraps these for
//! its forward passes; other modules call them directly when no gradients
//! are needed.

use super::{Result, Tensor, TensorError};

/// Border handling for [`conv2d`] and the smoothing code built on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PadMode {
    Zero,
    Replicate,
}

// ---------------------------------------------------------------------------
// Elementwise / linear algebra helpers
// ---------------------------------------------------------------------------

pub(crate) fn ew_zip(
    op: &'static str,
    a: &Tensor,
    b: &Tensor,
    f: impl Fn(f64, f64) -> f64,
) -> Result<Tensor> {
    if !a.same_shape(b) {
        return Err(TensorError::ShapeMismatch {
            op,
            expected: a.shape().to_vec(),
            got: b.shape().to_vec(),
        });
    }
    let data = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| f(x, y))
        .collect();
    Tensor::new(a.shape().to_vec(), data)
}

pub(crate) fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0] {
        return Err(TensorError::ShapeMismatch {
            op: "matmul",
            expected: a.shape().to_vec(),
            got: b.shape().to_vec(),
        });
    }
    let (n, k) = (a.shape()[0], a.shape()[1]);
    let m = b.shape()[1];
    let mut out = vec![0.0; n * m];
    let ad = a.data();
    let bd = b.data();
    for i in 0..n {
        let arow = &ad[i * k..(i + 1) * k];
        let orow = &mut out[i * m..(i + 1) * m];
        for (p, &av) in arow.iter().enumerate() {
            let brow = &bd[p * m..(p + 1) * m];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    Tensor::new(vec![n, m], out)
}

pub(crate) fn transpose2(a: &Tensor) -> Result<Tensor> {
    if a.rank() != 2 {
        return Err(TensorError::InvalidArgument {
            op: "transpose",
            reason: format!("expected rank 2, got {}", a.rank()),
        });
    }
    let (n, m) = (a.shape()[0], a.shape()[1]);
    let ad = a.data();
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        for j in 0..m {
            out[j * n + i] = ad[i * m + j];
        }
    }
    Tensor::new(vec![m, n], out)
}

// ---------------------------------------------------------------------------
// softmax
// ---------------------------------------------------------------------------

/// Numerically stable softmax along `axis` (max subtraction).
pub fn softmax(x: &Tensor, axis: usize) -> Result<Tensor> {
    if axis >= x.rank() {
        return Err(TensorError::InvalidAxis {
            axis,
            rank: x.rank(),
        });
    }
    if !x.is_finite() {
        return Err(TensorError::NonFinite { op: "softmax" });
    }
    let shape = x.shape();
    let len = shape[axis];
    let inner: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    let xd = x.data();
    let mut out = vec![0.0; xd.len()];
    for o in 0..outer {
        for i in 0..inner {
            let idx = |k: usize| (o * len + k) * inner + i;
            let mut max = f64::NEG_INFINITY;
            for k in 0..len {
                max = max.max(xd[idx(k)]);
            }
            let mut sum = 0.0;
            for k in 0..len {
                let e = (xd[idx(k)] - max).exp();
                out[idx(k)] = e;
                sum += e;
            }
            for k in 0..len {
                out[idx(k)] /= sum;
            }
        }
    }
    Tensor::new(shape.to_vec(), out)
}

// ---------------------------------------------------------------------------
// layer norm
// ---------------------------------------------------------------------------

/// Layer normalization over the last axis with biased variance and affine
/// parameters `gamma`, `beta` of that axis's extent.
pub fn layer_norm(x: &Tensor, gamma: &Tensor, beta: &Tensor, eps: f64) -> Result<Tensor> {
    if eps <= 0.0 {
        return Err(TensorError::NonPositive {
            what: "layer_norm eps",
            value: eps,
        });
    }
    let m = *x.shape().last().ok_or(TensorError::InvalidArgument {
        op: "layer_norm",
        reason: "rank-0 input".into(),
    })?;
    if gamma.numel() != m || beta.numel() != m {
        return Err(TensorError::ShapeMismatch {
            op: "layer_norm",
            expected: vec![m],
            got: vec![gamma.numel(), beta.numel()],
        });
    }
    let rows = x.numel() / m;
    let xd = x.data();
    let gd = gamma.data();
    let bd = beta.data();
    let mut out = vec![0.0; x.numel()];
    for r in 0..rows {
        let row = &xd[r * m..(r + 1) * m];
        let mean = row.iter().sum::<f64>() / m as f64;
        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / m as f64;
        let inv = 1.0 / (var + eps).sqrt();
        let orow = &mut out[r * m..(r + 1) * m];
        for j in 0..m {
            orow[j] = gd[j] * (row[j] - mean) * inv + bd[j];
        }
    }
    Tensor::new(x.shape().to_vec(), out)
}

// ---------------------------------------------------------------------------
// conv2d
// ---------------------------------------------------------------------------

pub(crate) fn pad_plane(
    src: &[f64],
    h: usize,
    w: usize,
    pad: usize,
    mode: PadMode,
) -> Vec<f64> {
    if pad == 0 {
        return src.to_vec();
    }
    let (ph, pw) = (h + 2 * pad, w + 2 * pad);
    let mut out = vec![0.0; ph * pw];
    for py in 0..ph {
        for px in 0..pw {
            let v = match mode {
                PadMode::Zero => {
                    if py < pad || px < pad || py >= pad + h || px >= pad + w {
                        0.0
                    } else {
                        src[(py - pad) * w + (px - pad)]
                    }
                }
                PadMode::Replicate => {
                    let sy = py.saturating_sub(pad).min(h - 1);
                    let sx = px.saturating_sub(pad).min(w - 1);
                    src[sy * w + sx]
                }
            };
            out[py * pw + px] = v;
        }
    }
    out
}

/// Fold gradients on a padded plane back onto the unpadded source.
pub(crate) fn unpad_accumulate(
    dpad: &[f64],
    h: usize,
    w: usize,
    pad: usize,
    mode: PadMode,
    dst: &mut [f64],
) {
    let pw = w + 2 * pad;
    if pad == 0 {
        for (d, s) in dst.iter_mut().zip(dpad) {
            *d += s;
        }
        return;
    }
    let ph = h + 2 * pad;
    for py in 0..ph {
        for px in 0..pw {
            let g = dpad[py * pw + px];
            if g == 0.0 {
                continue;
            }
            match mode {
                PadMode::Zero => {
                    if py >= pad && px >= pad && py < pad + h && px < pad + w {
                        dst[(py - pad) * w + (px - pad)] += g;
                    }
                }
                PadMode::Replicate => {
                    let sy = py.saturating_sub(pad).min(h - 1);
                    let sx = px.saturating_sub(pad).min(w - 1);
                    dst[sy * w + sx] += g;
                }
            }
        }
    }
}

fn conv2d_check(input: &Tensor, kernel: &Tensor, stride: usize, pad: usize) -> Result<[usize; 6]> {
    if input.rank() != 3 || kernel.rank() != 4 {
        return Err(TensorError::InvalidArgument {
            op: "conv2d",
            reason: format!(
                "expected input [C,H,W] and kernel [Co,Ci,k,k], got ranks {} and {}",
                input.rank(),
                kernel.rank()
            ),
        });
    }
    let (ci, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let (co, kci, kh, kw) = (
        kernel.shape()[0],
        kernel.shape()[1],
        kernel.shape()[2],
        kernel.shape()[3],
    );
    if kci != ci {
        return Err(TensorError::ShapeMismatch {
            op: "conv2d",
            expected: vec![co, ci, kh, kw],
            got: kernel.shape().to_vec(),
        });
    }
    if stride == 0 {
        return Err(TensorError::InvalidArgument {
            op: "conv2d",
            reason: "stride must be >= 1".into(),
        });
    }
    if kh > h + 2 * pad || kw > w + 2 * pad {
        return Err(TensorError::InvalidArgument {
            op: "conv2d",
            reason: format!("kernel {kh}x{kw} exceeds padded extent"),
        });
    }
    Ok([ci, h, w, co, kh, kw])
}

/// Standard cross-correlation of a `[C_in,H,W]` input with a
/// `[C_out,C_in,k,k]` kernel. Output extents are
/// `floor((H + 2*pad - k)/stride) + 1`.
pub fn conv2d(
    input: &Tensor,
    kernel: &Tensor,
    stride: usize,
    pad: usize,
    mode: PadMode,
) -> Result<Tensor> {
    let [ci, h, w, co, kh, kw] = conv2d_check(input, kernel, stride, pad)?;
    let (ph, pw) = (h + 2 * pad, w + 2 * pad);
    let oh = (ph - kh) / stride + 1;
    let ow = (pw - kw) / stride + 1;
    let padded: Vec<Vec<f64>> = (0..ci)
        .map(|c| pad_plane(&input.data()[c * h * w..(c + 1) * h * w], h, w, pad, mode))
        .collect();
    let kd = kernel.data();
    let mut out = vec![0.0; co * oh * ow];
    for oc in 0..co {
        let oplane = &mut out[oc * oh * ow..(oc + 1) * oh * ow];
        for icn in 0..ci {
            let plane = &padded[icn];
            for ky in 0..kh {
                for kx in 0..kw {
                    let kv = kd[((oc * ci + icn) * kh + ky) * kw + kx];
                    if kv == 0.0 {
                        continue;
                    }
                    for oy in 0..oh {
                        let prow = &plane[(oy * stride + ky) * pw..];
                        let orow = &mut oplane[oy * ow..(oy + 1) * ow];
                        for (ox, o) in orow.iter_mut().enumerate() {
                            *o += kv * prow[ox * stride + kx];
                        }
                    }
                }
            }
        }
    }
    Tensor::new(vec![co, oh, ow], out)
}

/// Gradients of [`conv2d`] w.r.t. input and kernel. Either side can be
/// skipped when the corresponding parent needs no gradient.
#[allow(clippy::too_many_arguments)]
pub(crate) fn conv2d_backward(
    input: &Tensor,
    kernel: &Tensor,
    grad_out: &Tensor,
    stride: usize,
    pad: usize,
    mode: PadMode,
    need_input: bool,
    need_kernel: bool,
) -> Result<(Option<Tensor>, Option<Tensor>)> {
    let [ci, h, w, co, kh, kw] = conv2d_check(input, kernel, stride, pad)?;
    let (ph, pw) = (h + 2 * pad, w + 2 * pad);
    let (oh, ow) = (grad_out.shape()[1], grad_out.shape()[2]);
    let padded: Vec<Vec<f64>> = (0..ci)
        .map(|c| pad_plane(&input.data()[c * h * w..(c + 1) * h * w], h, w, pad, mode))
        .collect();
    let kd = kernel.data();
    let gd = grad_out.data();

    let mut dker = if need_kernel {
        Some(vec![0.0; kd.len()])
    } else {
        None
    };
    let mut dpad = if need_input {
        Some(vec![vec![0.0; ph * pw]; ci])
    } else {
        None
    };

    for oc in 0..co {
        let gplane = &gd[oc * oh * ow..(oc + 1) * oh * ow];
        for icn in 0..ci {
            let plane = &padded[icn];
            for ky in 0..kh {
                for kx in 0..kw {
                    let kidx = ((oc * ci + icn) * kh + ky) * kw + kx;
                    let kv = kd[kidx];
                    let mut kacc = 0.0;
                    for oy in 0..oh {
                        let base = (oy * stride + ky) * pw + kx;
                        let grow = &gplane[oy * ow..(oy + 1) * ow];
                        if let Some(dp) = dpad.as_mut() {
                            let drow = &mut dp[icn];
                            for (ox, &g) in grow.iter().enumerate() {
                                drow[base + ox * stride] += kv * g;
                            }
                        }
                        if need_kernel {
                            let prow = &plane[oy * stride * pw..];
                            let roff = ky * pw + kx;
                            for (ox, &g) in grow.iter().enumerate() {
                                kacc += g * prow[roff + ox * stride];
                            }
                        }
                    }
                    if let Some(dk) = dker.as_mut() {
                        dk[kidx] += kacc;
                    }
                }
            }
        }
    }

    let din = match dpad {
        Some(planes) => {
            let mut din = vec![0.0; ci * h * w];
            for (c, plane) in planes.iter().enumerate() {
                unpad_accumulate(plane, h, w, pad, mode, &mut din[c * h * w..(c + 1) * h * w]);
            }
            Some(Tensor::new(vec![ci, h, w], din)?)
        }
        None => None,
    };
    let dk = match dker {
        Some(d) => Some(Tensor::new(kernel.shape().to_vec(), d)?),
        None => None,
    };
    Ok((din, dk))
}

// ---------------------------------------------------------------------------
// bilinear resize
// ---------------------------------------------------------------------------

#[inline]
fn resize_axis_map(out_len: usize, in_len: usize, i: usize) -> (usize, usize, f64) {
    if out_len == 1 || in_len == 1 {
        return (0, 0, 0.0);
    }
    let scale = (in_len - 1) as f64 / (out_len - 1) as f64;
    let s = i as f64 * scale;
    let lo = (s.floor() as usize).min(in_len - 1);
    let hi = (lo + 1).min(in_len - 1);
    (lo, hi, s - lo as f64)
}

/// Bilinear resize of a `[C,H,W]` tensor with the align-corners convention
/// (endpoints map to endpoints). Interpolation uses the lerp form
/// `a + w*(b - a)`, which reproduces constants exactly and is the identity
/// when the output size equals the input size.
pub fn resize_bilinear(x: &Tensor, out_h: usize, out_w: usize) -> Result<Tensor> {
    if x.rank() != 3 {
        return Err(TensorError::InvalidArgument {
            op: "resize_bilinear",
            reason: format!("expected [C,H,W], got rank {}", x.rank()),
        });
    }
    if out_h == 0 || out_w == 0 {
        return Err(TensorError::InvalidArgument {
            op: "resize_bilinear",
            reason: "output extents must be >= 1".into(),
        });
    }
    let (c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let xd = x.data();
    let mut out = vec![0.0; c * out_h * out_w];
    for ch in 0..c {
        let plane = &xd[ch * h * w..(ch + 1) * h * w];
        let oplane = &mut out[ch * out_h * out_w..(ch + 1) * out_h * out_w];
        for oy in 0..out_h {
            let (y0, y1, wy) = resize_axis_map(out_h, h, oy);
            for ox in 0..out_w {
                let (x0, x1, wx) = resize_axis_map(out_w, w, ox);
                let p00 = plane[y0 * w + x0];
                let p01 = plane[y0 * w + x1];
                let p10 = plane[y1 * w + x0];
                let p11 = plane[y1 * w + x1];
                let top = p00 + wx * (p01 - p00);
                let bot = p10 + wx * (p11 - p10);
                oplane[oy * out_w + ox] = top + wy * (bot - top);
            }
        }
    }
    Tensor::new(vec![c, out_h, out_w], out)
}

/// Scatter-transpose of [`resize_bilinear`].
pub(crate) fn resize_bilinear_backward(
    grad_out: &Tensor,
    in_h: usize,
    in_w: usize,
) -> Result<Tensor> {
    let (c, oh, ow) = (
        grad_out.shape()[0],
        grad_out.shape()[1],
        grad_out.shape()[2],
    );
    let gd = grad_out.data();
    let mut din = vec![0.0; c * in_h * in_w];
    for ch in 0..c {
        let gplane = &gd[ch * oh * ow..(ch + 1) * oh * ow];
        let dplane = &mut din[ch * in_h * in_w..(ch + 1) * in_h * in_w];
        for oy in 0..oh {
            let (y0, y1, wy) = resize_axis_map(oh, in_h, oy);
            for ox in 0..ow {
                let (x0, x1, wx) = resize_axis_map(ow, in_w, ox);
                let g = gplane[oy * ow + ox];
                dplane[y0 * in_w + x0] += (1.0 - wy) * (1.0 - wx) * g;
                dplane[y0 * in_w + x1] += (1.0 - wy) * wx * g;
                dplane[y1 * in_w + x0] += wy * (1.0 - wx) * g;
                dplane[y1 * in_w + x1] += wy * wx * g;
            }
        }
    }
    Tensor::new(vec![c, in_h, in_w], din)
}

// ---------------------------------------------------------------------------
// adaptive average pooling
// ---------------------------------------------------------------------------

#[inline]
fn pool_bin(i: usize, out_len: usize, in_len: usize) -> (usize, usize) {
    let start = i * in_len / out_len;
    let end = ((i + 1) * in_len).div_ceil(out_len);
    (start, end)
}

/// Average-pool a `[C,H,W]` tensor onto an `out_h x out_w` grid. Bins follow
/// the floor/ceil convention, so non-divisible extents overlap by at most one
/// cell. The bin mean is computed as `first + mean(others - first)`, which
/// maps constant inputs to the same constant bit-for-bit.
pub fn adaptive_avg_pool2d(x: &Tensor, out_h: usize, out_w: usize) -> Result<Tensor> {
    if x.rank() != 3 {
        return Err(TensorError::InvalidArgument {
            op: "adaptive_avg_pool2d",
            reason: format!("expected [C,H,W], got rank {}", x.rank()),
        });
    }
    let (c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    if out_h == 0 || out_w == 0 || out_h > h || out_w > w {
        return Err(TensorError::InvalidArgument {
            op: "adaptive_avg_pool2d",
            reason: format!("cannot pool {h}x{w} to {out_h}x{out_w}"),
        });
    }
    let xd = x.data();
    let mut out = vec![0.0; c * out_h * out_w];
    for ch in 0..c {
        let plane = &xd[ch * h * w..(ch + 1) * h * w];
        for oy in 0..out_h {
            let (ys, ye) = pool_bin(oy, out_h, h);
            for ox in 0..out_w {
                let (xs, xe) = pool_bin(ox, out_w, w);
                let first = plane[ys * w + xs];
                let mut acc = 0.0;
                let count = (ye - ys) * (xe - xs);
                for y in ys..ye {
                    for x in xs..xe {
                        acc += plane[y * w + x] - first;
                    }
                }
                out[(ch * out_h + oy) * out_w + ox] = first + acc / count as f64;
            }
        }
    }
    Tensor::new(vec![c, out_h, out_w], out)
}

pub(crate) fn adaptive_avg_pool2d_backward(
    grad_out: &Tensor,
    in_h: usize,
    in_w: usize,
) -> Result<Tensor> {
    let (c, oh, ow) = (
        grad_out.shape()[0],
        grad_out.shape()[1],
        grad_out.shape()[2],
    );
    let gd = grad_out.data();
    let mut din = vec![0.0; c * in_h * in_w];
    for ch in 0..c {
        let dplane = &mut din[ch * in_h * in_w..(ch + 1) * in_h * in_w];
        for oy in 0..oh {
            let (ys, ye) = pool_bin(oy, oh, in_h);
            for ox in 0..ow {
                let (xs, xe) = pool_bin(ox, ow, in_w);
                let count = ((ye - ys) * (xe - xs)) as f64;
                let g = gd[(ch * oh + oy) * ow + ox] / count;
                for y in ys..ye {
                    for x in xs..xe {
                        dplane[y * in_w + x] += g;
                    }
                }
            }
        }
    }
    Tensor::new(vec![c, in_h, in_w], din)
}

// ---------------------------------------------------------------------------
// nearest-neighbour upsampling (x2)
// ---------------------------------------------------------------------------

pub(crate) fn upsample_nearest2(x: &Tensor) -> Result<Tensor> {
    if x.rank() != 3 {
        return Err(TensorError::InvalidArgument {
            op: "upsample_nearest2",
            reason: format!("expected [C,H,W], got rank {}", x.rank()),
        });
    }
    let (c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let xd = x.data();
    let (oh, ow) = (2 * h, 2 * w);
    let mut out = vec![0.0; c * oh * ow];
    for ch in 0..c {
        for y in 0..oh {
            for x2 in 0..ow {
                out[(ch * oh + y) * ow + x2] = xd[(ch * h + y / 2) * w + x2 / 2];
            }
        }
    }
    Tensor::new(vec![c, oh, ow], out)
}

pub(crate) fn upsample_nearest2_backward(grad_out: &Tensor) -> Result<Tensor> {
    let (c, oh, ow) = (
        grad_out.shape()[0],
        grad_out.shape()[1],
        grad_out.shape()[2],
    );
    let (h, w) = (oh / 2, ow / 2);
    let gd = grad_out.data();
    let mut din = vec![0.0; c * h * w];
    for ch in 0..c {
        for y in 0..oh {
            for x in 0..ow {
                din[(ch * h + y / 2) * w + x / 2] += gd[(ch * oh + y) * ow + x];
            }
        }
    }
    Tensor::new(vec![c, h, w], din)
}

// ---------------------------------------------------------------------------
// orthonormal 2-D DCT
// ---------------------------------------------------------------------------

fn dct_basis(n: usize) -> Vec<f64> {
    let mut t = vec![0.0; n * n];
    let norm0 = (1.0 / n as f64).sqrt();
    let norm = (2.0 / n as f64).sqrt();
    for u in 0..n {
        let a = if u == 0 { norm0 } else { norm };
        for x in 0..n {
            t[u * n + x] =
                a * (std::f64::consts::PI * (2 * x + 1) as f64 * u as f64 / (2 * n) as f64).cos();
        }
    }
    t
}

/// Orthonormal 2-D DCT-II of a square `[N,N]` block (Parseval-preserving).
pub fn dct2d(block: &Tensor) -> Result<Tensor> {
    if block.rank() != 2 || block.shape()[0] != block.shape()[1] {
        return Err(TensorError::InvalidArgument {
            op: "dct2d",
            reason: format!("expected square [N,N] block, got {:?}", block.shape()),
        });
    }
    let n = block.shape()[0];
    let t = dct_basis(n);
    let bd = block.data();
    // tmp[x][v] = sum_y B[x][y] T[v][y]
    let mut tmp = vec![0.0; n * n];
    for x in 0..n {
        for v in 0..n {
            let mut acc = 0.0;
            for y in 0..n {
                acc += bd[x * n + y] * t[v * n + y];
            }
            tmp[x * n + v] = acc;
        }
    }
    let mut out = vec![0.0; n * n];
    for u in 0..n {
        for v in 0..n {
            let mut acc = 0.0;
            for x in 0..n {
                acc += t[u * n + x] * tmp[x * n + v];
            }
            out[u * n + v] = acc;
        }
    }
    Tensor::new(vec![n, n], out)
}

/// Inverse of [`dct2d`] (orthonormal DCT-III); used as the round-trip oracle.
pub fn idct2d(coeffs: &Tensor) -> Result<Tensor> {
    if coeffs.rank() != 2 || coeffs.shape()[0] != coeffs.shape()[1] {
        return Err(TensorError::InvalidArgument {
            op: "idct2d",
            reason: format!("expected square [N,N] block, got {:?}", coeffs.shape()),
        });
    }
    let n = coeffs.shape()[0];
    let t = dct_basis(n);
    let cd = coeffs.data();
    // tmp[u][y] = sum_v C[u][v] T[v][y]
    let mut tmp = vec![0.0; n * n];
    for u in 0..n {
        for y in 0..n {
            let mut acc = 0.0;
            for v in 0..n {
                acc += cd[u * n + v] * t[v * n + y];
            }
            tmp[u * n + y] = acc;
        }
    }
    let mut out = vec![0.0; n * n];
    for x in 0..n {
        for y in 0..n {
            let mut acc = 0.0;
            for u in 0..n {
                acc += t[u * n + x] * tmp[u * n + y];
            }
            out[x * n + y] = acc;
        }
    }
    Tensor::new(vec![n, n], out)
}
