//! Shared synthetic-image fixtures for the acceptance suite.
#![allow(dead_code)] // each test binary uses its own subset

use sonogen_core::imageio::Image;
use sonogen_core::numcore::SplitMix64;

/// Elliptical bright blob on black: stands in for a segmented fish photo.
pub fn blob_image(side: usize, seed: u64) -> Image {
    let mut rng = SplitMix64::new(seed);
    let s = side as f64;
    let cx = rng.next_range(0.3 * s, 0.7 * s);
    let cy = rng.next_range(0.3 * s, 0.7 * s);
    let rx = rng.next_range(0.15 * s, 0.3 * s);
    let ry = rng.next_range(0.12 * s, 0.28 * s);
    let bright = rng.next_range(0.6, 0.95);
    let mut px = vec![0.0; side * side];
    for y in 0..side {
        for x in 0..side {
            let dx = (x as f64 - cx) / rx;
            let dy = (y as f64 - cy) / ry;
            let d = dx * dx + dy * dy;
            if d < 1.0 {
                px[y * side + x] = bright * (1.0 - d).sqrt();
            }
        }
    }
    Image::new(side, side, 1, px).unwrap()
}

/// Banded noisy texture: stands in for a sonar frame.
pub fn texture_image(side: usize, seed: u64) -> Image {
    let mut rng = SplitMix64::new(seed);
    let px = (0..side * side)
        .map(|i| {
            let y = i / side;
            let base = 0.25 + 0.2 * ((y as f64) * 0.4).sin().abs();
            (base + 0.35 * rng.next_f64()).clamp(0.0, 1.0)
        })
        .collect();
    Image::new(side, side, 1, px).unwrap()
}

/// Smooth structure plus pixel noise: block sharpness varies, which the
/// NIQE selection rule needs.
pub fn natural_image(side: usize, seed: u64) -> Image {
    let mut rng = SplitMix64::new(seed);
    let p1 = rng.next_range(4.0, 9.0);
    let p2 = rng.next_range(6.0, 12.0);
    let mut px = vec![0.0; side * side];
    for y in 0..side {
        for x in 0..side {
            let fx = x as f64 / side as f64;
            let fy = y as f64 / side as f64;
            let base = 0.45 + 0.18 * (p1 * fx + 0.7 * p2 * fy).sin() + 0.12 * (p2 * fy).cos();
            px[y * side + x] = (base + 0.22 * rng.next_f64()).clamp(0.0, 1.0);
        }
    }
    Image::new(side, side, 1, px).unwrap()
}

/// Pure white noise.
pub fn noise_image(side: usize, seed: u64) -> Image {
    let mut rng = SplitMix64::new(seed);
    let px = (0..side * side).map(|_| rng.next_f64()).collect();
    Image::new(side, side, 1, px).unwrap()
}
