//! Synthetic test images and seeded Gaussian noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One standard normal sample by Box–Muller (the sine branch is discarded).
pub fn gaussian(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.gen::<f64>().max(1e-300);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Adds `σ`-scaled noise from a ChaCha8 stream and clamps to `[0, 1]`.
pub fn add_noise(values: &[f64], sigma: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    values
        .iter()
        .map(|&x| (x + sigma * gaussian(&mut rng)).clamp(0.0, 1.0))
        .collect()
}

/// `0.5 + 0.35 sin(6x) cos(4y + 0.5)` on an `n × n` grid over `[0, 1)²`.
pub fn smooth_image(n: usize) -> Vec<f64> {
    (0..n * n)
        .map(|p| {
            let (x, y) = ((p % n) as f64 / n as f64, (p / n) as f64 / n as f64);
            0.5 + 0.35 * (6.0 * x).sin() * (4.0 * y + 0.5).cos()
        })
        .collect()
}

/// The convex test image: [`smooth_image`] of size 64 with `σ = 0.1` noise,
/// seed 1, quantized to 8 bits.
pub fn convex_test_image() -> Vec<f64> {
    add_noise(&smooth_image(64), 0.1, 1)
        .into_iter()
        .map(|x| (x * 255.0).round() / 255.0)
        .collect()
}

/// Linear ramp over `[lo, hi]` sampled at pixel centers.
pub fn ramp(n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|j| lo + (hi - lo) * (j as f64 + 0.5) / n as f64).collect()
}

/// Piecewise smooth RGB phantom: a tilted background gradient and a disc with
/// its own gradient, separated by a sharp edge. Returns three planes.
pub fn phantom(width: usize, height: usize) -> Vec<Vec<f64>> {
    let mut planes: Vec<Vec<f64>> = (0..3).map(|_| Vec::with_capacity(width * height)).collect();
    for r in 0..height {
        for c in 0..width {
            let x = (c as f64 + 0.5) / width as f64;
            let y = (r as f64 + 0.5) / height as f64;
            let inside = (x - 0.55).powi(2) + (y - 0.45).powi(2) < 0.28f64.powi(2);
            let rgb = if inside {
                [0.85 - 0.4 * y, 0.25 + 0.5 * x, 0.15 + 0.3 * (x + y) / 2.0]
            } else {
                [0.15 + 0.35 * x, 0.7 - 0.3 * y, 0.9 - 0.5 * x * y]
            };
            for (plane, v) in planes.iter_mut().zip(rgb) {
                plane.push(v);
            }
        }
    }
    planes
}

/// Peak signal-to-noise ratio in dB for signals in `[0, 1]`.
pub fn psnr(estimate: &[f64], truth: &[f64]) -> f64 {
    assert_eq!(estimate.len(), truth.len());
    let mse = estimate.iter().zip(truth).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / truth.len() as f64;
    if mse == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * mse.log10()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_is_seeded() {
        let base = vec![0.5; 1000];
        let a = add_noise(&base, 0.1, 7);
        assert_eq!(a, add_noise(&base, 0.1, 7));
        assert_ne!(a, add_noise(&base, 0.1, 8));
        let mean = a.iter().sum::<f64>() / 1000.0;
        let sd = (a.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 999.0).sqrt();
        assert!((mean - 0.5).abs() < 0.01 && (sd - 0.1).abs() < 0.01, "{mean} {sd}");
    }

    #[test]
    fn ramp_samples_centers() {
        assert_eq!(ramp(4, 0.0, 1.0), vec![0.125, 0.375, 0.625, 0.875]);
    }

    #[test]
    fn psnr_of_known_error() {
        assert!((psnr(&[0.1, 0.1], &[0.0, 0.0]) - 20.0).abs() < 1e-12);
        assert_eq!(psnr(&[0.3], &[0.3]), f64::INFINITY);
    }

    #[test]
    fn phantom_has_edge() {
        let p = phantom(32, 32);
        assert_eq!(p.len(), 3);
        assert!(p.iter().flatten().all(|v| (0.0..=1.0).contains(v)));
        // horizontal neighbours across the disc boundary differ sharply
        let jump = (0..31).map(|c| (p[0][16 * 32 + c + 1] - p[0][16 * 32 + c]).abs()).fold(0.0, f64::max);
        assert!(jump > 0.3);
    }
}
