//! Optical-image preparation: grayscale conversion, trimap-guided foreground
//! matting, compositing onto a featureless background, Gaussian smoothing and
//! optional multiplicative speckle noise.
//!
//! The stages compose left to right into [`prepare_content`]:
//! grayscale -> (matte + composite) -> smooth -> resize.

use crate::imageio::Image;
use crate::numcore::{resize_bilinear, SplitMix64};

#[derive(Debug, thiserror::Error)]
pub enum PreprocessError {
    #[error("trimap is {got_w}x{got_h} but image is {img_w}x{img_h}")]
    TrimapSizeMismatch {
        got_w: usize,
        got_h: usize,
        img_w: usize,
        img_h: usize,
    },
    #[error("trimap has unknown pixels but no {missing} labels to interpolate from")]
    TrimapNoBoundary { missing: &'static str },
    #[error("sigma must be non-negative, got {sigma}")]
    NegativeSigma { sigma: f64 },
    #[error("matte is {got_w}x{got_h} but image is {img_w}x{img_h}")]
    MatteSizeMismatch {
        got_w: usize,
        got_h: usize,
        img_w: usize,
        img_h: usize,
    },
    #[error("tensor error: {0}")]
    Tensor(#[from] crate::numcore::TensorError),
    #[error("image error: {0}")]
    Image(#[from] crate::imageio::ImageIoError),
}

pub type Result<T> = std::result::Result<T, PreprocessError>;

// ---------------------------------------------------------------------------
// grayscale
// ---------------------------------------------------------------------------

/// Rec.601 luma conversion. Grayscale input passes through unchanged.
pub fn to_grayscale(img: &Image) -> Image {
    if img.is_gray() {
        return img.clone();
    }
    let (w, h) = (img.width(), img.height());
    let plane = w * h;
    let px = img.pixels();
    let pixels = (0..plane)
        .map(|i| 0.299 * px[i] + 0.587 * px[plane + i] + 0.114 * px[2 * plane + i])
        .collect();
    Image::new(w, h, 1, pixels).expect("luma of in-range pixels stays in range")
}

// ---------------------------------------------------------------------------
// trimap + alpha matte
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrimapLabel {
    Fg,
    Bg,
    Unknown,
}

/// Per-pixel FG/BG/UNKNOWN labeling guiding the matte solve.
#[derive(Debug, Clone)]
pub struct Trimap {
    width: usize,
    height: usize,
    labels: Vec<TrimapLabel>,
}

impl Trimap {
    pub fn new(width: usize, height: usize, labels: Vec<TrimapLabel>) -> Self {
        debug_assert_eq!(labels.len(), width * height);
        Self {
            width,
            height,
            labels,
        }
    }

    /// Interpret a grayscale image as a trimap: byte 255 is FG, 0 is BG,
    /// anything else UNKNOWN.
    pub fn from_image(img: &Image) -> Self {
        let gray = to_grayscale(img);
        let labels = gray
            .pixels()
            .iter()
            .map(|&v| {
                let byte = (v * 255.0).round() as u8;
                match byte {
                    255 => TrimapLabel::Fg,
                    0 => TrimapLabel::Bg,
                    _ => TrimapLabel::Unknown,
                }
            })
            .collect();
        Self::new(gray.width(), gray.height(), labels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn label(&self, y: usize, x: usize) -> TrimapLabel {
        self.labels[y * self.width + x]
    }
}

/// Per-pixel foreground opacity in `[0,1]`.
#[derive(Debug, Clone)]
pub struct Matte {
    width: usize,
    height: usize,
    alpha: Vec<f64>,
}

impl Matte {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            alpha: vec![value.clamp(0.0, 1.0); width * height],
        }
    }
}

/// Result of a matte solve, with the Gauss-Seidel iteration outcome.
#[derive(Debug, Clone)]
pub struct MatteSolution {
    pub matte: Matte,
    pub converged: bool,
    pub iterations: usize,
}

/// Harmonic interpolation of alpha over UNKNOWN pixels: the 4-neighbour
/// Laplace equation with Dirichlet boundary alpha=1 on FG and alpha=0 on BG,
/// swept by Gauss-Seidel until the largest update drops below `tol` or
/// `max_iter` is reached. Neighbours outside the image do not participate,
/// so the discrete maximum principle keeps alpha within [0,1].
pub fn solve_alpha_matte(trimap: &Trimap, tol: f64, max_iter: usize) -> Result<MatteSolution> {
    let (w, h) = (trimap.width, trimap.height);
    let mut alpha: Vec<f64> = vec![0.0; w * h];
    let mut unknown = Vec::new();
    let mut has_fg = false;
    let mut has_bg = false;
    for y in 0..h {
        for x in 0..w {
            match trimap.label(y, x) {
                TrimapLabel::Fg => {
                    alpha[y * w + x] = 1.0;
                    has_fg = true;
                }
                TrimapLabel::Bg => {
                    has_bg = true;
                }
                TrimapLabel::Unknown => {
                    alpha[y * w + x] = 0.5;
                    unknown.push((y, x));
                }
            }
        }
    }
    if !unknown.is_empty() {
        if !has_fg {
            return Err(PreprocessError::TrimapNoBoundary { missing: "FG" });
        }
        if !has_bg {
            return Err(PreprocessError::TrimapNoBoundary { missing: "BG" });
        }
    }

    let mut converged = unknown.is_empty();
    let mut iterations = 0;
    for it in 0..max_iter {
        if unknown.is_empty() {
            break;
        }
        let mut max_update = 0.0f64;
        for &(y, x) in &unknown {
            let mut sum = 0.0;
            let mut count = 0.0;
            if y > 0 {
                sum += alpha[(y - 1) * w + x];
                count += 1.0;
            }
            if y + 1 < h {
                sum += alpha[(y + 1) * w + x];
                count += 1.0;
            }
            if x > 0 {
                sum += alpha[y * w + x - 1];
                count += 1.0;
            }
            if x + 1 < w {
                sum += alpha[y * w + x + 1];
                count += 1.0;
            }
            let new = sum / count;
            max_update = max_update.max((new - alpha[y * w + x]).abs());
            alpha[y * w + x] = new;
        }
        iterations = it + 1;
        if max_update < tol {
            converged = true;
            break;
        }
    }
    if unknown.is_empty() {
        converged = true;
    }

    Ok(MatteSolution {
        matte: Matte {
            width: w,
            height: h,
            alpha,
        },
        converged,
        iterations,
    })
}

/// Blend the image onto a featureless black background: `out = alpha * img`.
pub fn composite_foreground(img: &Image, matte: &Matte) -> Result<Image> {
    if img.width() != matte.width || img.height() != matte.height || !img.is_gray() {
        return Err(PreprocessError::MatteSizeMismatch {
            got_w: matte.width,
            got_h: matte.height,
            img_w: img.width(),
            img_h: img.height(),
        });
    }
    let pixels = img
        .pixels()
        .iter()
        .zip(&matte.alpha)
        .map(|(&p, &a)| (a * p).clamp(0.0, 1.0))
        .collect();
    Ok(Image::new(img.width(), img.height(), 1, pixels)?)
}

// ---------------------------------------------------------------------------
// Gaussian smoothing
// ---------------------------------------------------------------------------

/// Normalized symmetric 1-D Gaussian taps with radius `ceil(3*sigma)`.
#[derive(Debug, Clone)]
pub struct GaussianKernel {
    pub sigma: f64,
    pub radius: usize,
    pub taps: Vec<f64>,
}

impl GaussianKernel {
    pub fn new(sigma: f64) -> Result<Self> {
        if sigma < 0.0 {
            return Err(PreprocessError::NegativeSigma { sigma });
        }
        if sigma == 0.0 {
            return Ok(Self {
                sigma,
                radius: 0,
                taps: vec![1.0],
            });
        }
        let radius = (3.0 * sigma).ceil() as usize;
        let mut taps: Vec<f64> = (-(radius as isize)..=radius as isize)
            .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
            .collect();
        let sum: f64 = taps.iter().sum();
        for t in &mut taps {
            *t /= sum;
        }
        Ok(Self {
            sigma,
            radius,
            taps,
        })
    }
}

fn smooth_axis(src: &[f64], w: usize, h: usize, kernel: &GaussianKernel, horizontal: bool) -> Vec<f64> {
    let r = kernel.radius as isize;
    let mut out = vec![0.0; src.len()];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (ti, &t) in kernel.taps.iter().enumerate() {
                let o = ti as isize - r;
                let (sy, sx) = if horizontal {
                    (y as isize, (x as isize + o).clamp(0, w as isize - 1))
                } else {
                    ((y as isize + o).clamp(0, h as isize - 1), x as isize)
                };
                acc += t * src[sy as usize * w + sx as usize];
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// Separable Gaussian smoothing with replicate borders. `sigma = 0` is the
/// identity; a normalized kernel maps constants to themselves and never
/// leaves the input range.
pub fn gaussian_smooth(img: &Image, sigma: f64) -> Result<Image> {
    let kernel = GaussianKernel::new(sigma)?;
    if kernel.radius == 0 {
        return Ok(img.clone());
    }
    let (w, h) = (img.width(), img.height());
    let plane = w * h;
    let mut pixels = Vec::with_capacity(img.pixels().len());
    for c in 0..img.channels() {
        let src = &img.pixels()[c * plane..(c + 1) * plane];
        let tmp = smooth_axis(src, w, h, &kernel, true);
        let done = smooth_axis(&tmp, w, h, &kernel, false);
        pixels.extend(done.into_iter().map(|v| v.clamp(0.0, 1.0)));
    }
    Ok(Image::new(w, h, img.channels(), pixels)?)
}

// ---------------------------------------------------------------------------
// speckle noise
// ---------------------------------------------------------------------------

/// Multiplicative speckle: `out = clamp(img * (1 + intensity * n), 0, 1)`
/// with `n` standard normal from an explicitly seeded stream.
pub fn add_speckle_noise(img: &Image, intensity: f64, seed: u64) -> Image {
    if intensity == 0.0 {
        return img.clone();
    }
    let mut rng = SplitMix64::new(seed);
    let pixels = img
        .pixels()
        .iter()
        .map(|&p| (p * (1.0 + intensity * rng.next_normal())).clamp(0.0, 1.0))
        .collect();
    Image::new(img.width(), img.height(), img.channels(), pixels)
        .expect("clamped pixels stay in range")
}

// ---------------------------------------------------------------------------
// full pipeline
// ---------------------------------------------------------------------------

/// The full content-preparation pipeline: grayscale -> (optional matting and
/// black-background compositing) -> Gaussian smoothing -> bilinear resize to
/// `target` (height, width).
pub fn prepare_content(
    img: &Image,
    trimap: Option<&Trimap>,
    sigma: f64,
    target: (usize, usize),
) -> Result<Image> {
    let mut gray = to_grayscale(img);
    if let Some(tm) = trimap {
        if tm.width() != gray.width() || tm.height() != gray.height() {
            return Err(PreprocessError::TrimapSizeMismatch {
                got_w: tm.width(),
                got_h: tm.height(),
                img_w: gray.width(),
                img_h: gray.height(),
            });
        }
        let solution = solve_alpha_matte(tm, 1e-6, 20_000)?;
        if !solution.converged {
            log::warn!(
                "matte solve did not converge within {} iterations",
                solution.iterations
            );
        }
        gray = composite_foreground(&gray, &solution.matte)?;
        if gray.pixels().iter().all(|&v| v == 0.0) {
            log::warn!("matte removed the entire image (all-background trimap?)");
        }
    }
    gray = gaussian_smooth(&gray, sigma)?;
    let (th, tw) = target;
    if th != gray.height() || tw != gray.width() {
        let resized = resize_bilinear(&gray.to_tensor(), th, tw)?;
        gray = Image::from_tensor_clamped(&resized)?;
    }
    Ok(gray)
}

/// Resize helper shared by the style-preparation path (grayscale + resize,
/// no matting or smoothing).
pub fn prepare_style(img: &Image, target: (usize, usize)) -> Result<Image> {
    let gray = to_grayscale(img);
    let (th, tw) = target;
    if th == gray.height() && tw == gray.width() {
        return Ok(gray);
    }
    let resized = resize_bilinear(&gray.to_tensor(), th, tw)?;
    Ok(Image::from_tensor_clamped(&resized)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rgb(w: usize, h: usize, r: f64, g: f64, b: f64) -> Image {
        let plane = w * h;
        let mut px = vec![0.0; 3 * plane];
        px[..plane].fill(r);
        px[plane..2 * plane].fill(g);
        px[2 * plane..].fill(b);
        Image::new(w, h, 3, px).unwrap()
    }

    #[test]
    fn luma_of_white_is_one() {
        let img = rgb(2, 2, 1.0, 1.0, 1.0);
        let gray = to_grayscale(&img);
        for &v in gray.pixels() {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn luma_of_pure_red() {
        let img = rgb(1, 1, 1.0, 0.0, 0.0);
        assert!((to_grayscale(&img).pixels()[0] - 0.299).abs() < 1e-12);
    }

    #[test]
    fn gray_input_passes_through() {
        let img = Image::new(2, 1, 1, vec![0.3, 0.7]).unwrap();
        assert_eq!(to_grayscale(&img), img);
    }

    fn strip_trimap(w: usize, h: usize) -> Trimap {
        let mut labels = vec![TrimapLabel::Unknown; w * h];
        for y in 0..h {
            labels[y * w] = TrimapLabel::Fg;
            labels[y * w + w - 1] = TrimapLabel::Bg;
        }
        Trimap::new(w, h, labels)
    }

    #[test]
    fn matte_strip_matches_linear_ramp() {
        // 1-D Laplace with Dirichlet ends has the closed-form solution
        // alpha(x) = 1 - x/(W-1).
        let (w, h) = (34, 4);
        let sol = solve_alpha_matte(&strip_trimap(w, h), 1e-6, 100_000).unwrap();
        assert!(sol.converged);
        for y in 0..h {
            for x in 0..w {
                let expected = 1.0 - x as f64 / (w - 1) as f64;
                let got = sol.matte.alpha()[y * w + x];
                assert!(
                    (got - expected).abs() < 1e-3,
                    "alpha({x},{y}) = {got}, expected {expected}"
                );
            }
        }
    }

    #[test]
    fn matte_without_unknown_is_binary_mask() {
        let labels = vec![
            TrimapLabel::Fg,
            TrimapLabel::Bg,
            TrimapLabel::Bg,
            TrimapLabel::Fg,
        ];
        let sol = solve_alpha_matte(&Trimap::new(2, 2, labels), 1e-6, 10).unwrap();
        assert!(sol.converged);
        assert_eq!(sol.matte.alpha(), &[1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn all_fg_trimap_is_all_ones() {
        let labels = vec![TrimapLabel::Fg; 9];
        let sol = solve_alpha_matte(&Trimap::new(3, 3, labels), 1e-6, 10).unwrap();
        assert!(sol.matte.alpha().iter().all(|&a| a == 1.0));
    }

    #[test]
    fn unknown_without_boundary_errors() {
        let mut labels = vec![TrimapLabel::Unknown; 4];
        labels[0] = TrimapLabel::Fg;
        assert!(matches!(
            solve_alpha_matte(&Trimap::new(2, 2, labels), 1e-6, 10),
            Err(PreprocessError::TrimapNoBoundary { missing: "BG" })
        ));
    }

    #[test]
    fn matte_respects_maximum_principle() {
        let sol = solve_alpha_matte(&strip_trimap(20, 6), 1e-8, 100_000).unwrap();
        for &a in sol.matte.alpha() {
            assert!((0.0..=1.0).contains(&a));
        }
    }

    #[test]
    fn composite_opaque_and_transparent() {
        let img = Image::new(2, 1, 1, vec![0.8, 0.4]).unwrap();
        let ones = Matte::constant(2, 1, 1.0);
        assert_eq!(composite_foreground(&img, &ones).unwrap(), img);
        let zeros = Matte::constant(2, 1, 0.0);
        assert!(composite_foreground(&img, &zeros)
            .unwrap()
            .pixels()
            .iter()
            .all(|&v| v == 0.0));
        let half = Matte::constant(2, 1, 0.5);
        assert!((composite_foreground(&img, &half).unwrap().pixels()[0] - 0.4).abs() < 1e-12);
    }

    #[test]
    fn smooth_sigma_zero_is_identity() {
        let img = Image::new(3, 3, 1, (0..9).map(|i| i as f64 / 10.0).collect()).unwrap();
        assert_eq!(gaussian_smooth(&img, 0.0).unwrap(), img);
    }

    #[test]
    fn smooth_constant_stays_constant() {
        let img = Image::new(5, 4, 1, vec![0.42; 20]).unwrap();
        let out = gaussian_smooth(&img, 1.7).unwrap();
        for &v in out.pixels() {
            assert!((v - 0.42).abs() < 1e-12);
        }
    }

    #[test]
    fn smooth_impulse_center_matches_direct_2d_kernel() {
        // Separable smoothing of a unit impulse must equal the direct 2-D
        // kernel evaluated at the centre: product of the centre 1-D taps.
        let mut px = vec![0.0; 81];
        px[4 * 9 + 4] = 1.0;
        let img = Image::new(9, 9, 1, px).unwrap();
        let sigma = 1.0;
        let out = gaussian_smooth(&img, sigma).unwrap();
        let k = GaussianKernel::new(sigma).unwrap();
        let center = k.taps[k.radius] * k.taps[k.radius];
        assert!((out.get(0, 4, 4) - center).abs() < 1e-12);
        // And the full field matches the outer product of the taps.
        for y in 1..8 {
            for x in 1..8 {
                let expected = k.taps[(y as isize - 4 + k.radius as isize) as usize]
                    * k.taps[(x as isize - 4 + k.radius as isize) as usize];
                assert!((out.get(0, y, x) - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn smooth_rejects_negative_sigma() {
        let img = Image::zeros(2, 2, 1);
        assert!(gaussian_smooth(&img, -0.5).is_err());
    }

    #[test]
    fn smooth_preserves_mean_of_border_padded_image() {
        // Replicate borders redistribute clipped taps onto edge pixels; with
        // a constant border band of kernel-radius width the mean is
        // preserved.
        let mut rng = SplitMix64::new(9);
        let (w, h) = (24, 18);
        let sigma = 1.0;
        let r = GaussianKernel::new(sigma).unwrap().radius;
        let mut px = vec![0.0; w * h];
        for y in r..h - r {
            for x in r..w - r {
                px[y * w + x] = rng.next_f64();
            }
        }
        let img = Image::new(w, h, 1, px).unwrap();
        let out = gaussian_smooth(&img, sigma).unwrap();
        let mean_in: f64 = img.pixels().iter().sum::<f64>() / (w * h) as f64;
        let mean_out: f64 = out.pixels().iter().sum::<f64>() / (w * h) as f64;
        assert!((mean_in - mean_out).abs() < 1e-6);
    }

    #[test]
    fn smooth_stays_within_input_range() {
        let mut rng = SplitMix64::new(31);
        let px: Vec<f64> = (0..64).map(|_| rng.next_f64()).collect();
        let lo = px.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = px.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let img = Image::new(8, 8, 1, px).unwrap();
        let out = gaussian_smooth(&img, 2.0).unwrap();
        for &v in out.pixels() {
            assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
        }
    }

    #[test]
    fn kernel_taps_normalized_and_symmetric() {
        for sigma in [0.5, 1.0, 2.3] {
            let k = GaussianKernel::new(sigma).unwrap();
            let sum: f64 = k.taps.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            for i in 0..k.taps.len() / 2 {
                assert_eq!(k.taps[i], k.taps[k.taps.len() - 1 - i]);
            }
            assert_eq!(k.radius, (3.0 * sigma).ceil() as usize);
        }
    }

    #[test]
    fn speckle_zero_intensity_is_identity() {
        let img = Image::new(2, 2, 1, vec![0.1, 0.5, 0.9, 0.3]).unwrap();
        assert_eq!(add_speckle_noise(&img, 0.0, 7), img);
    }

    #[test]
    fn speckle_is_deterministic_per_seed() {
        let img = Image::new(4, 4, 1, vec![0.5; 16]).unwrap();
        let a = add_speckle_noise(&img, 0.2, 99);
        let b = add_speckle_noise(&img, 0.2, 99);
        assert_eq!(a, b);
        let c = add_speckle_noise(&img, 0.2, 100);
        assert_ne!(a, c);
    }

    #[test]
    fn speckle_relative_std_matches_intensity() {
        // Monte-Carlo: on mid-gray, per-pixel relative std approximates the
        // intensity parameter.
        let img = Image::new(64, 64, 1, vec![0.5; 64 * 64]).unwrap();
        let intensity = 0.1;
        let mut values = Vec::new();
        for seed in 0..40 {
            let noised = add_speckle_noise(&img, intensity, seed);
            values.extend(noised.pixels().iter().map(|&v| v / 0.5 - 1.0));
        }
        let n = values.len() as f64;
        let mean: f64 = values.iter().sum::<f64>() / n;
        let std = (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
        assert!(
            (std - intensity).abs() < 0.01,
            "relative std {std} vs intensity {intensity}"
        );
    }

    #[test]
    fn prepare_content_identity_when_all_stages_trivial() {
        let img = Image::new(4, 4, 1, (0..16).map(|i| i as f64 / 16.0).collect()).unwrap();
        let out = prepare_content(&img, None, 0.0, (4, 4)).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn prepare_content_full_pipeline_matches_stagewise_oracle() {
        // RGB fish-on-white with a full-FG trimap: result must equal the
        // hand-composed stages.
        let mut px = vec![0.9; 3 * 36];
        px[2 * 6 + 3] = 0.1; // a dark spot in the red plane
        let img = Image::new(6, 6, 3, px).unwrap();
        let trimap = Trimap::new(6, 6, vec![TrimapLabel::Fg; 36]);
        let sigma = 0.8;
        let out = prepare_content(&img, Some(&trimap), sigma, (4, 4)).unwrap();

        let gray = to_grayscale(&img);
        let smoothed = gaussian_smooth(&gray, sigma).unwrap();
        let resized = resize_bilinear(&smoothed.to_tensor(), 4, 4).unwrap();
        let expected = Image::from_tensor_clamped(&resized).unwrap();
        assert_eq!(out, expected);
    }

    #[test]
    fn prepare_content_is_deterministic() {
        let img = Image::new(5, 5, 1, (0..25).map(|i| i as f64 / 25.0).collect()).unwrap();
        let a = prepare_content(&img, None, 1.0, (8, 8)).unwrap();
        let b = prepare_content(&img, None, 1.0, (8, 8)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn prepare_content_all_background_trimap_yields_black_image() {
        // Legal degenerate matte: everything is background, so the content
        // image goes fully black (a warning is logged, not an error).
        let img = Image::new(4, 4, 1, (0..16).map(|i| 0.2 + i as f64 / 32.0).collect()).unwrap();
        let trimap = Trimap::new(4, 4, vec![TrimapLabel::Bg; 16]);
        let out = prepare_content(&img, Some(&trimap), 0.0, (4, 4)).unwrap();
        assert!(out.pixels().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn composite_is_idempotent_for_binary_mattes() {
        let img = Image::new(2, 2, 1, vec![0.2, 0.4, 0.6, 0.8]).unwrap();
        let matte = Matte {
            width: 2,
            height: 2,
            alpha: vec![1.0, 0.0, 1.0, 0.0],
        };
        let once = composite_foreground(&img, &matte).unwrap();
        let twice = composite_foreground(&once, &matte).unwrap();
        assert_eq!(once, twice);
    }
}
