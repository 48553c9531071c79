//! Forward-difference gradient with Neumann boundary and its negative adjoint.
//!
//! Fields are row-major `width × height`; vector fields interleave the two
//! components per pixel as `[∂x, ∂y]`.

/// `∇u`, zero across the last column / row.
pub fn gradient(u: &[f64], width: usize, height: usize) -> Vec<f64> {
    assert_eq!(u.len(), width * height);
    let mut g = vec![0.0; 2 * u.len()];
    for r in 0..height {
        for c in 0..width {
            let p = r * width + c;
            if c + 1 < width {
                g[2 * p] = u[p + 1] - u[p];
            }
            if r + 1 < height {
                g[2 * p + 1] = u[p + width] - u[p];
            }
        }
    }
    g
}

/// `div p` with `⟨∇u, p⟩ = -⟨u, div p⟩`.
pub fn divergence(p: &[f64], width: usize, height: usize) -> Vec<f64> {
    assert_eq!(p.len(), 2 * width * height);
    let mut d = vec![0.0; width * height];
    for r in 0..height {
        for c in 0..width {
            d[r * width + c] = divergence_at(p, 2, 0, width, height, r, c);
        }
    }
    d
}

/// Divergence of the component pair at `offset` within per-pixel records of
/// `stride` values.
#[inline]
pub(crate) fn divergence_at(
    p: &[f64],
    stride: usize,
    offset: usize,
    width: usize,
    height: usize,
    r: usize,
    c: usize,
) -> f64 {
    let at = |rr: usize, cc: usize, comp: usize| p[(rr * width + cc) * stride + offset + comp];
    let mut d = 0.0;
    if c + 1 < width {
        d += at(r, c, 0);
    }
    if c > 0 {
        d -= at(r, c - 1, 0);
    }
    if r + 1 < height {
        d += at(r, c, 1);
    }
    if r > 0 {
        d -= at(r - 1, c, 1);
    }
    d
}

/// `div ∇ u`.
pub fn laplacian(u: &[f64], width: usize, height: usize) -> Vec<f64> {
    divergence(&gradient(u, width, height), width, height)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_has_zero_gradient() {
        assert!(gradient(&[0.7; 12], 4, 3).iter().all(|&g| g == 0.0));
    }

    #[test]
    fn ramp_gradient() {
        let (w, h) = (5, 4);
        let u: Vec<f64> = (0..w * h).map(|p| (p % w) as f64).collect();
        let g = gradient(&u, w, h);
        for r in 0..h {
            for c in 0..w - 1 {
                let p = r * w + c;
                assert_eq!((g[2 * p], g[2 * p + 1]), (1.0, 0.0));
            }
        }
    }

    #[test]
    fn adjointness() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (w, h) = (16, 16);
        for _ in 0..100 {
            let u: Vec<f64> = (0..w * h).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let p: Vec<f64> = (0..2 * w * h).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let lhs: f64 = gradient(&u, w, h).iter().zip(&p).map(|(a, b)| a * b).sum();
            let rhs: f64 = -divergence(&p, w, h).iter().zip(&u).map(|(a, b)| a * b).sum::<f64>();
            assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
        }
    }
}
