//! Exact minimizer of `Σ (u - f)² + λ Σ |∇u|²` by conjugate gradients.

use crate::ops::{gradient, laplacian};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgReport {
    pub iterations: usize,
    /// Final `‖(I - λΔ) u - f‖₂`.
    pub residual: f64,
    pub converged: bool,
}

/// Solves `(I - λΔ) u = f` with the Neumann Laplacian of [`crate::ops`].
pub fn direct_quadratic_solve(f: &[f64], width: usize, height: usize, lambda: f64) -> (Vec<f64>, CgReport) {
    assert!(lambda >= 0.0, "lambda must be nonnegative");
    assert_eq!(f.len(), width * height);
    let apply = |u: &[f64]| -> Vec<f64> {
        let lap = laplacian(u, width, height);
        u.iter().zip(&lap).map(|(a, l)| a - lambda * l).collect()
    };
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let tol = 1e-10;
    let mut u = f.to_vec();
    let au = apply(&u);
    let mut r: Vec<f64> = f.iter().zip(&au).map(|(a, b)| a - b).collect();
    let mut d = r.clone();
    let mut rr = dot(&r, &r);
    let max_iter = 10 * f.len() + 100;
    let mut iterations = 0;
    while rr.sqrt() > tol && iterations < max_iter {
        let ad = apply(&d);
        let alpha = rr / dot(&d, &ad);
        for i in 0..u.len() {
            u[i] += alpha * d[i];
            r[i] -= alpha * ad[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..d.len() {
            d[i] = r[i] + beta * d[i];
        }
        iterations += 1;
    }
    // report the true residual, not the recursive one
    let au = apply(&u);
    let residual = au.iter().zip(f).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    (
        u,
        CgReport {
            iterations,
            residual,
            converged: residual <= tol * 10.0,
        },
    )
}

/// `Σ (u - f)² + λ Σ |∇u|²`.
pub fn quadratic_energy(u: &[f64], f: &[f64], width: usize, height: usize, lambda: f64) -> f64 {
    let data: f64 = u.iter().zip(f).map(|(a, b)| (a - b) * (a - b)).sum();
    let smooth: f64 = gradient(u, width, height).iter().map(|g| g * g).sum();
    data + lambda * smooth
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_lambda_is_identity() {
        let f = [0.1, 0.7, 0.3, 0.9];
        assert_eq!(direct_quadratic_solve(&f, 2, 2, 0.0).0, f);
    }

    #[test]
    fn constants_are_fixed() {
        let (u, _) = direct_quadratic_solve(&[0.6; 20], 5, 4, 3.0);
        assert!(u.iter().all(|&x| (x - 0.6).abs() < 1e-12));
    }

    #[test]
    fn random_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f: Vec<f64> = (0..256).map(|_| rng.gen()).collect();
        let (u, report) = direct_quadratic_solve(&f, 16, 16, 1.0);
        assert!(report.converged);
        let lap = laplacian(&u, 16, 16);
        let worst = u
            .iter()
            .zip(&lap)
            .zip(&f)
            .map(|((a, l), b)| (a - l - b).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-8);
    }

    #[test]
    fn solution_minimizes_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f: Vec<f64> = (0..64).map(|_| rng.gen()).collect();
        let (u, _) = direct_quadratic_solve(&f, 8, 8, 0.5);
        let e = quadratic_energy(&u, &f, 8, 8, 0.5);
        for _ in 0..20 {
            let pert: Vec<f64> = u.iter().map(|x| x + rng.gen_range(-1e-3..1e-3)).collect();
            assert!(quadratic_energy(&pert, &f, 8, 8, 0.5) >= e);
        }
    }
}
