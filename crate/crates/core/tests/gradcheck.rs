//! Finite-difference verification of every differentiable primitive at
//! random points, and of composed attention arithmetic at toy dimensions.

use sonogen_core::numcore::{grad_check, Graph, PadMode, SplitMix64, Tensor, Var};

const H: f64 = 1e-5;
const TOL: f64 = 1e-4;

/// Run grad_check at three seeded random points and return the worst error.
fn check3(shape: &[usize], f: impl Fn(&mut Graph, Var) -> sonogen_core::numcore::Result<Var>) -> f64 {
    let mut worst = 0.0f64;
    for seed in [11u64, 22, 33] {
        let mut rng = SplitMix64::new(seed);
        let point = Tensor::rand_uniform(shape.to_vec(), -1.0, 1.0, &mut rng);
        let err = grad_check(&f, &point, H).expect("grad check runs");
        worst = worst.max(err);
    }
    worst
}

macro_rules! assert_small {
    ($err:expr, $name:literal) => {{
        let err = $err;
        assert!(err < TOL, concat!($name, " grad error {}"), err);
    }};
}

#[test]
fn elementwise_ops() {
    let aux = {
        let mut rng = SplitMix64::new(5);
        Tensor::rand_uniform(vec![3, 4], -1.0, 1.0, &mut rng)
    };
    let a = aux.clone();
    assert_small!(
        check3(&[3, 4], move |g, x| {
            let other = g.input(a.clone());
            let s = g.add(x, other)?;
            let m = g.mul(s, s)?;
            g.mean_all(m)
        }),
        "add/mul"
    );
    let a = aux.clone();
    assert_small!(
        check3(&[3, 4], move |g, x| {
            let other = g.input(a.clone());
            let d = g.sub(x, other)?;
            let sc = g.scale(d, 2.5)?;
            let sh = g.add_scalar(sc, 0.7)?;
            let m = g.mul(sh, sh)?;
            g.sum_all(m)
        }),
        "sub/scale/add_scalar"
    );
}

#[test]
fn nonlinearities() {
    assert_small!(
        check3(&[10], |g, x| {
            let r = g.relu(x)?;
            let m = g.mul(r, r)?;
            g.sum_all(m)
        }),
        "relu"
    );
    assert_small!(
        check3(&[10], |g, x| {
            let s = g.sigmoid(x)?;
            let m = g.mul(s, s)?;
            g.sum_all(m)
        }),
        "sigmoid"
    );
    assert_small!(
        check3(&[10], |g, x| {
            let s = g.gelu(x)?;
            let m = g.mul(s, s)?;
            g.sum_all(m)
        }),
        "gelu"
    );
    // sqrt and ln need positive input; shift well away from zero.
    assert_small!(
        check3(&[10], |g, x| {
            let pos = g.add_scalar(x, 3.0)?;
            let r = g.sqrt(pos)?;
            g.sum_all(r)
        }),
        "sqrt"
    );
    assert_small!(
        check3(&[10], |g, x| {
            let pos = g.add_scalar(x, 3.0)?;
            let r = g.ln(pos)?;
            g.sum_all(r)
        }),
        "ln"
    );
}

#[test]
fn linear_algebra_ops() {
    let b = {
        let mut rng = SplitMix64::new(6);
        Tensor::rand_uniform(vec![4, 3], -1.0, 1.0, &mut rng)
    };
    let bc = b.clone();
    assert_small!(
        check3(&[2, 4], move |g, x| {
            let w = g.input(bc.clone());
            let y = g.matmul(x, w)?;
            let m = g.mul(y, y)?;
            g.sum_all(m)
        }),
        "matmul lhs"
    );
    let a = {
        let mut rng = SplitMix64::new(7);
        Tensor::rand_uniform(vec![2, 4], -1.0, 1.0, &mut rng)
    };
    assert_small!(
        check3(&[4, 3], move |g, x| {
            let lhs = g.input(a.clone());
            let y = g.matmul(lhs, x)?;
            let m = g.mul(y, y)?;
            g.sum_all(m)
        }),
        "matmul rhs"
    );
    assert_small!(
        check3(&[3, 5], |g, x| {
            let t = g.transpose(x)?;
            let m = g.mul(t, t)?;
            g.mean_all(m)
        }),
        "transpose"
    );
    assert_small!(
        check3(&[4, 6], |g, x| {
            let a = g.slice_cols(x, 1, 3)?;
            let b = g.slice_cols(x, 3, 2)?;
            let cat = g.concat_cols(&[a, b])?;
            let m = g.mul(cat, cat)?;
            g.sum_all(m)
        }),
        "slice/concat"
    );
    assert_small!(
        check3(&[5], |g, x| {
            let b = g.broadcast_row(x, 4)?;
            let m = g.mul(b, b)?;
            g.sum_all(m)
        }),
        "broadcast_row"
    );
    assert_small!(
        check3(&[4, 5], |g, x| {
            let mu = g.mean_rows(x)?;
            let m = g.mul(mu, mu)?;
            g.sum_all(m)
        }),
        "mean_rows"
    );
    let bias = Tensor::from_vec(vec![0.3, -0.2, 0.9]);
    assert_small!(
        check3(&[4, 3], move |g, x| {
            let b = g.input(bias.clone());
            let y = g.add_row_bias(x, b)?;
            let m = g.mul(y, y)?;
            g.sum_all(m)
        }),
        "add_row_bias x"
    );
    let base = {
        let mut rng = SplitMix64::new(8);
        Tensor::rand_uniform(vec![4, 3], -1.0, 1.0, &mut rng)
    };
    assert_small!(
        check3(&[3], move |g, x| {
            let xs = g.input(base.clone());
            let y = g.add_row_bias(xs, x)?;
            let m = g.mul(y, y)?;
            g.sum_all(m)
        }),
        "add_row_bias bias"
    );
}

#[test]
fn softmax_and_layer_norm() {
    assert_small!(
        check3(&[3, 6], |g, x| {
            let s = g.softmax_axis(x, 1)?;
            let m = g.mul(s, s)?;
            g.sum_all(m)
        }),
        "softmax"
    );
    let gamma = Tensor::from_vec(vec![1.1, 0.9, 1.3, 0.7]);
    let beta = Tensor::from_vec(vec![0.1, -0.2, 0.0, 0.4]);
    let (gm, bt) = (gamma.clone(), beta.clone());
    assert_small!(
        check3(&[3, 4], move |g, x| {
            let gamma = g.input(gm.clone());
            let beta = g.input(bt.clone());
            let y = g.layer_norm(x, gamma, beta, 1e-5)?;
            let m = g.mul(y, y)?;
            g.sum_all(m)
        }),
        "layer_norm x"
    );
    let point = {
        let mut rng = SplitMix64::new(9);
        Tensor::rand_uniform(vec![3, 4], -1.0, 1.0, &mut rng)
    };
    let (pt, bt) = (point.clone(), beta.clone());
    assert_small!(
        check3(&[4], move |g, x| {
            let xs = g.input(pt.clone());
            let beta = g.input(bt.clone());
            let y = g.layer_norm(xs, x, beta, 1e-5)?;
            let m = g.mul(y, y)?;
            g.sum_all(m)
        }),
        "layer_norm gamma"
    );
    let pt = point.clone();
    let gm = gamma.clone();
    assert_small!(
        check3(&[4], move |g, x| {
            let xs = g.input(pt.clone());
            let gamma = g.input(gm.clone());
            let y = g.layer_norm(xs, gamma, x, 1e-5)?;
            let m = g.mul(y, y)?;
            g.sum_all(m)
        }),
        "layer_norm beta"
    );
}

#[test]
fn spatial_ops() {
    let kernel = {
        let mut rng = SplitMix64::new(10);
        Tensor::rand_uniform(vec![3, 2, 3, 3], -0.5, 0.5, &mut rng)
    };
    for mode in [PadMode::Zero, PadMode::Replicate] {
        let k = kernel.clone();
        assert_small!(
            check3(&[2, 5, 5], move |g, x| {
                let ker = g.input(k.clone());
                let y = g.conv2d(x, ker, 1, 1, mode)?;
                let m = g.mul(y, y)?;
                g.sum_all(m)
            }),
            "conv2d input"
        );
        let input = {
            let mut rng = SplitMix64::new(11);
            Tensor::rand_uniform(vec![2, 5, 5], -1.0, 1.0, &mut rng)
        };
        assert_small!(
            check3(&[3, 2, 3, 3], move |g, x| {
                let inp = g.input(input.clone());
                let y = g.conv2d(inp, x, 1, 1, mode)?;
                let m = g.mul(y, y)?;
                g.sum_all(m)
            }),
            "conv2d kernel"
        );
    }
    // Strided conv (the patch-embedding configuration).
    let k2 = {
        let mut rng = SplitMix64::new(12);
        Tensor::rand_uniform(vec![4, 1, 2, 2], -0.5, 0.5, &mut rng)
    };
    assert_small!(
        check3(&[1, 6, 6], move |g, x| {
            let ker = g.input(k2.clone());
            let y = g.conv2d(x, ker, 2, 0, PadMode::Zero)?;
            let m = g.mul(y, y)?;
            g.sum_all(m)
        }),
        "conv2d strided"
    );
    assert_small!(
        check3(&[2, 3, 3], |g, x| {
            let y = g.upsample_nearest2(x)?;
            let m = g.mul(y, y)?;
            g.sum_all(m)
        }),
        "upsample_nearest2"
    );
    assert_small!(
        check3(&[2, 6, 6], |g, x| {
            let y = g.adaptive_avg_pool2d(x, 3, 2)?;
            let m = g.mul(y, y)?;
            g.sum_all(m)
        }),
        "adaptive_avg_pool2d"
    );
    assert_small!(
        check3(&[2, 3, 4], |g, x| {
            let y = g.resize_bilinear(x, 7, 5)?;
            let m = g.mul(y, y)?;
            g.sum_all(m)
        }),
        "resize_bilinear up"
    );
    assert_small!(
        check3(&[2, 6, 6], |g, x| {
            let y = g.resize_bilinear(x, 4, 3)?;
            let m = g.mul(y, y)?;
            g.sum_all(m)
        }),
        "resize_bilinear down"
    );
    assert_small!(
        check3(&[1, 4, 4], |g, x| {
            let chan = g.reshape(x, vec![1, 16])?;
            let t = g.transpose(chan)?;
            let m = g.mul(t, t)?;
            g.sum_all(m)
        }),
        "reshape"
    );
    let bias = Tensor::from_vec(vec![0.2, -0.4]);
    assert_small!(
        check3(&[2, 3, 3], move |g, x| {
            let b = g.input(bias.clone());
            let y = g.add_chan_bias(x, b)?;
            let m = g.mul(y, y)?;
            g.sum_all(m)
        }),
        "add_chan_bias"
    );
}

/// Composed single-head attention block at toy dims against central finite
/// differences, perturbing the input tokens.
#[test]
fn composed_attention_block() {
    let mut rng = SplitMix64::new(77);
    let d = 4;
    let wq = Tensor::rand_uniform(vec![d, d], -0.5, 0.5, &mut rng);
    let wk = Tensor::rand_uniform(vec![d, d], -0.5, 0.5, &mut rng);
    let wv = Tensor::rand_uniform(vec![d, d], -0.5, 0.5, &mut rng);

    let attention = move |g: &mut Graph, x: Var| -> sonogen_core::numcore::Result<Var> {
        let wq = g.input(wq.clone());
        let wk = g.input(wk.clone());
        let wv = g.input(wv.clone());
        let q = g.matmul(x, wq)?;
        let k = g.matmul(x, wk)?;
        let v = g.matmul(x, wv)?;
        let kt = g.transpose(k)?;
        let scores = g.matmul(q, kt)?;
        let scaled = g.scale(scores, 0.5)?;
        let attn = g.softmax_axis(scaled, 1)?;
        let out = g.matmul(attn, v)?;
        let m = g.mul(out, out)?;
        g.sum_all(m)
    };

    let err = check3(&[3, 4], attention);
    assert!(err < TOL, "attention block grad error {err}");
}
