//! Partial-sum constraints `‖Σ_{l=i}^{j} φ_x(l)‖ ≤ κ(γ_{j+1} - γ_i)/h`.

use crate::grid::LabelGrid;
use crate::regularizer::Kappa;

/// Upper-triangular table of jump bounds, `k × k`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpConstraintSet {
    k: usize,
    bounds: Vec<f64>,
    per_entry: bool,
}

impl JumpConstraintSet {
    /// `None` when `κ` is infinite and no jump constraints exist.
    pub fn new(kappa: &Kappa, grid: &LabelGrid) -> Option<Self> {
        if matches!(kappa, Kappa::Infinite) {
            return None;
        }
        let k = grid.k();
        let h = grid.h();
        let labels = grid.labels();
        let mut bounds = vec![f64::INFINITY; k * k];
        for i in 0..k {
            for j in i..k {
                bounds[i * k + j] = kappa.eval(labels[j + 1] - labels[i]) / h;
            }
        }
        Some(Self::from_bounds(k, bounds))
    }

    /// Entries below the diagonal are ignored.
    pub fn from_bounds(k: usize, bounds: Vec<f64>) -> Self {
        assert_eq!(bounds.len(), k * k);
        // The per-entry balls imply every partial-sum constraint exactly when
        // each bound dominates the sum of its diagonal bounds.
        let mut per_entry = true;
        for i in 0..k {
            let mut diag = 0.0;
            for j in i..k {
                diag += bounds[j * k + j];
                let b = bounds[i * k + j];
                if b < diag * (1.0 - 1e-12) {
                    per_entry = false;
                }
            }
        }
        Self { k, bounds, per_entry }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn bound(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i <= j && j < self.k);
        self.bounds[i * self.k + j]
    }

    /// Whether the per-entry balls alone describe the set.
    pub fn is_per_entry(&self) -> bool {
        self.per_entry
    }

    pub fn pair_count(&self) -> usize {
        self.k * (self.k + 1) / 2
    }

    /// Scratch length needed by [`project_jump`] for `n`-vectors.
    pub fn scratch_len(&self, n: usize) -> usize {
        self.pair_count() * n + n
    }
}

/// Outcome of [`project_jump`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JumpProjection {
    pub converged: bool,
    pub sweeps: usize,
}

/// Worst partial-sum violation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpViolation {
    pub max_violation: f64,
    pub worst: Option<(usize, usize)>,
}

impl JumpViolation {
    pub fn is_feasible(&self) -> bool {
        self.worst.is_none()
    }
}

/// `phi` holds `k` consecutive `n`-vectors. Pairs are scanned by increasing
/// span, so ties report the shortest offending range.
pub fn check_jump(phi: &[f64], n: usize, set: &JumpConstraintSet, tol: f64) -> JumpViolation {
    let k = set.k;
    debug_assert_eq!(phi.len(), k * n);
    let mut prefix = vec![0.0; (k + 1) * n];
    for l in 0..k {
        for d in 0..n {
            prefix[(l + 1) * n + d] = prefix[l * n + d] + phi[l * n + d];
        }
    }
    let mut max_violation: f64 = 0.0;
    let mut worst = None;
    for span in 0..k {
        for i in 0..k - span {
            let j = i + span;
            let norm = (0..n)
                .map(|d| {
                    let s = prefix[(j + 1) * n + d] - prefix[i * n + d];
                    s * s
                })
                .sum::<f64>()
                .sqrt();
            let v = norm - set.bound(i, j);
            if v > max_violation {
                max_violation = v;
                if v > tol {
                    worst = Some((i, j));
                }
            }
        }
    }
    JumpViolation { max_violation, worst }
}

/// Projects `phi` (k consecutive `n`-vectors) onto the jump set in place.
///
/// Exact one-pass ball projections when the set is per-entry, otherwise
/// Dykstra over the pairs `(i, j)` in lexicographic order. `scratch` is resized
/// as needed and may be reused across calls.
pub fn project_jump(
    phi: &mut [f64],
    n: usize,
    set: &JumpConstraintSet,
    tol: f64,
    max_iter: usize,
    scratch: &mut Vec<f64>,
) -> JumpProjection {
    scratch.clear();
    scratch.resize(set.scratch_len(n), 0.0);
    let (incr, sum) = scratch.split_at_mut(set.pair_count() * n);
    project_jump_warm(phi, n, set, tol, max_iter, incr, sum)
}

/// [`project_jump`] started from stored Dykstra corrections.
///
/// `incr` holds `pair_count() * n` corrections from an earlier call on a
/// nearby input (zeros for a cold start) and is updated in place. `sum` is
/// `n` entries of scratch. Per-entry sets ignore both buffers.
pub fn project_jump_warm(
    phi: &mut [f64],
    n: usize,
    set: &JumpConstraintSet,
    tol: f64,
    max_iter: usize,
    incr: &mut [f64],
    sum: &mut [f64],
) -> JumpProjection {
    let k = set.k;
    debug_assert_eq!(phi.len(), k * n);
    if set.per_entry {
        for (l, v) in phi.chunks_exact_mut(n).enumerate() {
            clip_ball(v, set.bound(l, l));
        }
        return JumpProjection {
            converged: true,
            sweeps: 1,
        };
    }
    debug_assert_eq!(incr.len(), set.pair_count() * n);
    if check_jump(phi, n, set, 0.0).is_feasible() {
        incr.iter_mut().for_each(|d| *d = 0.0);
        return JumpProjection {
            converged: true,
            sweeps: 0,
        };
    }
    // Dykstra is block ascent on the dual, so any stored corrections are a
    // valid start: x = z - sum of corrections over each pair's range
    let mut pair = 0;
    for i in 0..k {
        for j in i..k {
            let d = &incr[pair * n..(pair + 1) * n];
            pair += 1;
            for l in i..=j {
                for (x, dx) in phi[l * n..(l + 1) * n].iter_mut().zip(d) {
                    *x -= dx;
                }
            }
        }
    }
    for sweep in 1..=max_iter {
        let mut change: f64 = 0.0;
        let mut pair = 0;
        for i in 0..k {
            for j in i..k {
                let d = &mut incr[pair * n..(pair + 1) * n];
                pair += 1;
                let m = (j - i + 1) as f64;
                // y = x + previous correction, then project the partial sum
                for l in i..=j {
                    for (x, dx) in phi[l * n..(l + 1) * n].iter_mut().zip(d.iter()) {
                        *x += dx;
                    }
                }
                sum.iter_mut().for_each(|x| *x = 0.0);
                for l in i..=j {
                    for (s, x) in sum.iter_mut().zip(&phi[l * n..(l + 1) * n]) {
                        *s += x;
                    }
                }
                let norm = crate::regularizer::norm(sum);
                let bound = set.bound(i, j);
                let scale = if norm > bound { (1.0 - bound / norm) / m } else { 0.0 };
                for (dx, s) in d.iter_mut().zip(sum.iter()) {
                    let new = scale * s;
                    change = change.max((new - *dx).abs() * m);
                    *dx = new;
                }
                for l in i..=j {
                    for (x, dx) in phi[l * n..(l + 1) * n].iter_mut().zip(d.iter()) {
                        *x -= dx;
                    }
                }
            }
        }
        if change < tol && check_jump(phi, n, set, tol).is_feasible() {
            return JumpProjection {
                converged: true,
                sweeps: sweep,
            };
        }
    }
    JumpProjection {
        converged: false,
        sweeps: max_iter,
    }
}

fn clip_ball(v: &mut [f64], radius: f64) {
    let norm = crate::regularizer::norm(v);
    if norm > radius {
        let s = radius / norm;
        v.iter_mut().for_each(|x| *x *= s);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(k: usize) -> LabelGrid {
        LabelGrid::new(0.0, 1.0, k + 1).unwrap()
    }

    #[test]
    fn bounds_follow_kappa() {
        let g = grid(3);
        let set = JumpConstraintSet::new(&Kappa::ConstantJump { height: 0.6 }, &g).unwrap();
        for i in 0..3 {
            for j in i..3 {
                assert!((set.bound(i, j) - 0.6 * 3.0).abs() < 1e-12);
            }
        }
        assert!(!set.is_per_entry());
        let tv = JumpConstraintSet::new(&Kappa::Linear { slope: 1.0 }, &g).unwrap();
        assert!(tv.is_per_entry());
        assert!((tv.bound(0, 0) - 1.0).abs() < 1e-12);
        assert!(JumpConstraintSet::new(&Kappa::Infinite, &g).is_none());
    }

    #[test]
    fn single_ball() {
        let set = JumpConstraintSet::from_bounds(1, vec![1.5]);
        let mut phi = vec![3.0 * 0.6, 3.0 * 0.8];
        let mut scratch = Vec::new();
        project_jump(&mut phi, 2, &set, 1e-12, 10, &mut scratch);
        assert!((phi[0] - 0.9).abs() < 1e-15 && (phi[1] - 1.2).abs() < 1e-15);
    }

    #[test]
    fn zero_field_and_huge_entry() {
        let set = JumpConstraintSet::new(&Kappa::ConstantJump { height: 1.0 }, &grid(4)).unwrap();
        let zero = vec![0.0; 8];
        let rep = check_jump(&zero, 2, &set, 1e-12);
        assert!(rep.is_feasible() && rep.max_violation == 0.0);
        let mut big = vec![0.0; 8];
        big[4] = 100.0;
        assert_eq!(check_jump(&big, 2, &set, 1e-12).worst, Some((2, 2)));
    }

    #[test]
    fn constant_jump_dykstra_feasible() {
        let set = JumpConstraintSet::new(&Kappa::ConstantJump { height: 0.5 }, &grid(3)).unwrap();
        let mut phi = vec![1.2, -0.3, 0.9, 0.4, 1.1, 0.2];
        let mut scratch = Vec::new();
        let rep = project_jump(&mut phi, 2, &set, 1e-12, 10_000, &mut scratch);
        assert!(rep.converged);
        assert!(check_jump(&phi, 2, &set, 1e-8).is_feasible());
    }

    #[test]
    fn warm_start_matches_cold() {
        let set = JumpConstraintSet::new(&Kappa::ConstantJump { height: 0.4 }, &grid(4)).unwrap();
        let first = vec![1.2, -0.3, 0.9, 0.4, 1.1, 0.2, -0.7, 0.5];
        let mut incr = vec![0.0; set.pair_count() * 2];
        let mut sum = [0.0; 2];
        let mut phi = first.clone();
        project_jump_warm(&mut phi, 2, &set, 1e-13, 20_000, &mut incr, &mut sum);
        let second: Vec<f64> = first.iter().enumerate().map(|(i, v)| v + 0.05 * (i as f64).sin()).collect();
        let mut warm = second.clone();
        let rep = project_jump_warm(&mut warm, 2, &set, 1e-13, 20_000, &mut incr, &mut sum);
        let mut cold = second;
        project_jump(&mut cold, 2, &set, 1e-13, 20_000, &mut Vec::new());
        assert!(rep.converged);
        for (a, b) in warm.iter().zip(&cold) {
            assert!((a - b).abs() < 1e-9, "{a} {b}");
        }
    }
}
