//! Similarity evaluation between generated pseudo-acoustic images and real
//! acoustic frames: mean-centered cosine similarity, a DCT perceptual hash
//! with normalized Hamming similarity, and their average.

use crate::imageio::Image;
use crate::numcore::{dct2d, resize_bilinear, Tensor};
use crate::preprocess::to_grayscale;

/// 64-bit perceptual hash digest.
///
/// Bit `i` (for `i < 63`) is the threshold decision for the `i`-th AC
/// coefficient of the top-left 8x8 DCT block read in raster order with the
/// DC term dropped; bit 63 is fixed to 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashDigest(pub u64);

impl HashDigest {
    pub fn hamming(self, other: HashDigest) -> u32 {
        (self.0 ^ other.0).count_ones()
    }
}

/// One evaluated (pseudo, real) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityReport {
    pub pair_id: String,
    pub cosine: f64,
    pub phash: f64,
    pub average: f64,
}

impl SimilarityReport {
    pub const CSV_HEADER: &'static str = "pair_id,cosine,phash,average";

    /// CSV row with 4-decimal half-up formatting.
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{}",
            self.pair_id,
            format_4dp(self.cosine),
            format_4dp(self.phash),
            format_4dp(self.average)
        )
    }
}

/// Evaluation knobs for [`evaluate_pair`].
#[derive(Debug, Clone, Copy)]
pub struct SimilarityParams {
    /// Side length both images are resized to before cosine similarity.
    pub cosine_side: usize,
}

impl Default for SimilarityParams {
    fn default() -> Self {
        Self { cosine_side: 64 }
    }
}

fn resized_gray_vector(img: &Image, side: usize) -> Vec<f64> {
    let gray = to_grayscale(img);
    let t = gray.to_tensor();
    if gray.height() == side && gray.width() == side {
        return t.into_data();
    }
    resize_bilinear(&t, side, side)
        .expect("resize of a valid image cannot fail")
        .into_data()
}

/// Cosine similarity of mean-centered, `side x side`-resized grayscale pixel
/// vectors. A zero-norm vector (constant image) compares as 0 with a warning.
pub fn cosine_similarity(a: &Image, b: &Image, side: usize) -> f64 {
    let va = resized_gray_vector(a, side);
    let vb = resized_gray_vector(b, side);
    let center = |v: &mut [f64]| {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        for x in v.iter_mut() {
            *x -= mean;
        }
    };
    let mut va = va;
    let mut vb = vb;
    center(&mut va);
    center(&mut vb);
    let dot: f64 = va.iter().zip(&vb).map(|(x, y)| x * y).sum();
    let na: f64 = va.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = vb.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        log::warn!("cosine similarity of a constant image is defined as 0");
        return 0.0;
    }
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

/// DCT perceptual hash: grayscale, resize to `32x32`, orthonormal 2-D DCT,
/// keep the top-left 8x8 block, drop DC, threshold the remaining 63
/// coefficients at their median (ties map to 0). Exactly invariant to
/// positive affine intensity changes that do not clamp: gain scales the AC
/// coefficients and their median alike, and offsets land only in the
/// discarded DC term.
pub fn phash(img: &Image) -> HashDigest {
    const SIDE: usize = 32;
    let vec = resized_gray_vector(img, SIDE);
    let block = Tensor::new(vec![SIDE, SIDE], vec).expect("length matches side^2");
    let coeffs = dct2d(&block).expect("square block");
    // Transform roundoff leaves ~1e-14-scale residue on coefficients that
    // are analytically zero (e.g. every AC term of a constant image); snap
    // those to exact zero so the median tie rule sees them as ties.
    let snap = 1e-12 * coeffs.data()[0].abs();
    let mut ac = Vec::with_capacity(63);
    for u in 0..8 {
        for v in 0..8 {
            if u == 0 && v == 0 {
                continue;
            }
            let c = coeffs.data()[u * SIDE + v];
            ac.push(if c.abs() <= snap { 0.0 } else { c });
        }
    }
    let mut sorted = ac.clone();
    sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let median = sorted[31];
    let mut bits = 0u64;
    for (i, &c) in ac.iter().enumerate() {
        if c > median {
            bits |= 1 << i;
        }
    }
    HashDigest(bits)
}

/// Normalized Hamming similarity: `1 - popcount(h1 ^ h2)/64`.
pub fn hash_similarity(h1: HashDigest, h2: HashDigest) -> f64 {
    1.0 - h1.hamming(h2) as f64 / 64.0
}

/// Arithmetic mean of the two similarities, with negative cosine clamped to
/// 0 first so the average stays in `[0,1]`.
pub fn average_similarity(cosine: f64, phash: f64) -> f64 {
    (cosine.max(0.0) + phash) / 2.0
}

/// Assemble the full similarity row for a (pseudo, real) pair.
pub fn evaluate_pair(
    pair_id: &str,
    pseudo: &Image,
    real: &Image,
    params: SimilarityParams,
) -> SimilarityReport {
    let cosine = cosine_similarity(pseudo, real, params.cosine_side);
    let ph = hash_similarity(phash(pseudo), phash(real));
    SimilarityReport {
        pair_id: pair_id.to_string(),
        cosine,
        phash: ph,
        average: average_similarity(cosine, ph),
    }
}

/// Round half-up to 4 decimals. A 1e-9 nudge keeps decimal halves that sit
/// just below .5 in binary (e.g. 0.76605) rounding upward, matching the
/// reported-table convention.
pub fn round_half_up_4dp(x: f64) -> f64 {
    ((x * 10_000.0 + 0.5 + 1e-9).floor()) / 10_000.0
}

/// Format with exactly 4 decimals after half-up rounding.
pub fn format_4dp(x: f64) -> String {
    format!("{:.4}", round_half_up_4dp(x))
}
