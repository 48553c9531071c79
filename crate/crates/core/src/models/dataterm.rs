//! Pointwise data term of the piecewise linear discretization, evaluated two
//! independent ways: as a primal minimization over interval weights and
//! offsets, and as the maximum of the lifted dual at fixed coefficients.

use crate::grid::LabelGrid;
use crate::regularizer::{Eta, Kappa};
use crate::solver::{run_channel, SolverConfig, SolverError};
use crate::unaries::{EnvelopeTable, UnaryModel};

use super::{assemble, DualMode, ModelSpec, RegularizerSpec};

/// Lower-triangular `k × k` matrix, row-major: `-γ_i/h` on the diagonal and
/// ones below it.
pub fn integration_operator(grid: &LabelGrid) -> Vec<f64> {
    let k = grid.k();
    let h = grid.h();
    let mut m = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..i {
            m[i * k + j] = 1.0;
        }
        m[i * k + i] = -grid.labels()[i] / h;
    }
    m
}

/// Samples of each tabulated envelope used by the primal oracle.
const ENVELOPE_SAMPLES: usize = 4_001;
const ZOOM_ROUNDS: usize = 8;

/// `min Σ x_i ρ_i**(y_i / x_i)` over `x` in the simplex with
/// `v̂ = y/h + Iᵀx`, `+∞` when no such pair exists.
///
/// Writing `T_i = Σ_{j≥i} x_j` turns the feasible set into a chain of boxes
/// `T_i ∈ [v̂_i, v̂_{i-1}]` (`T_1 = 1`, `T_{k+1} = 0`), so the grid search over
/// `resolution` points per coordinate is exact dynamic programming along the
/// chain. The grid is then repeatedly narrowed around the best point.
pub fn dataterm_primal_oracle(v_hat: &[f64], grid: &LabelGrid, unary: &UnaryModel, resolution: usize) -> f64 {
    let k = grid.k();
    assert_eq!(v_hat.len(), k);
    assert!(resolution >= 2);
    let tol = 1e-12;
    if v_hat.iter().any(|&v| !(-tol..=1.0 + tol).contains(&v)) || v_hat.windows(2).any(|p| p[1] > p[0] + tol) {
        return f64::INFINITY;
    }
    let envelopes: Vec<EnvelopeTable> = (0..k).map(|i| EnvelopeTable::new(unary, i, grid, ENVELOPE_SAMPLES)).collect();
    let integ = integration_operator(grid);
    let h = grid.h();
    let labels = grid.labels();

    // cost of interval i given x_i and its offset
    let term = |i: usize, x: &[f64]| -> f64 {
        let xi = x[i];
        // y_i = h (v̂ - Iᵀ x)_i
        let it_x: f64 = (0..k).map(|r| integ[r * k + i] * x[r]).sum();
        let y = h * (v_hat[i] - it_x);
        if xi <= 1e-15 {
            return 0.0;
        }
        let t = (y / xi).clamp(labels[i], labels[i + 1]);
        xi * envelopes[i].eval(t)
    };

    // box for T_2..T_k
    let mut lo: Vec<f64> = (1..k).map(|i| v_hat[i]).collect();
    let mut hi: Vec<f64> = (1..k).map(|i| v_hat[i - 1]).collect();
    let mut best = (f64::INFINITY, Vec::new());
    for _ in 0..ZOOM_ROUNDS {
        best = chain_search(k, &lo, &hi, resolution, &term);
        for (j, &t) in best.1.iter().enumerate() {
            let width = (hi[j] - lo[j]) * 4.0 / (resolution - 1) as f64;
            lo[j] = (t - width).max(v_hat[j + 1]);
            hi[j] = (t + width).min(v_hat[j]);
        }
    }
    best.0
}

/// Dynamic programming over `T_2..T_k` on a grid of the given boxes.
fn chain_search(
    k: usize,
    lo: &[f64],
    hi: &[f64],
    resolution: usize,
    term: &dyn Fn(usize, &[f64]) -> f64,
) -> (f64, Vec<f64>) {
    let nodes = |j: usize| -> Vec<f64> {
        if hi[j] - lo[j] <= 0.0 {
            vec![lo[j]]
        } else {
            (0..resolution)
                .map(|s| lo[j] + (hi[j] - lo[j]) * s as f64 / (resolution - 1) as f64)
                .collect()
        }
    };
    // T values per chain position 1..=k+1 (0-based 0..=k)
    let mut levels: Vec<Vec<f64>> = vec![vec![1.0]];
    for j in 0..k - 1 {
        levels.push(nodes(j));
    }
    levels.push(vec![0.0]);

    // interval i depends on (T_i, T_{i+1}) only; x is assembled locally
    let cost = |i: usize, t_i: f64, t_next: f64| -> f64 {
        let mut x = vec![0.0; k];
        x[i] = t_i - t_next;
        // (Iᵀx)_i sees x_r for r > i only through their sum T_{i+1}
        if i + 1 < k {
            x[i + 1] = t_next;
        }
        term(i, &x)
    };

    let mut value: Vec<f64> = vec![0.0];
    let mut back: Vec<Vec<usize>> = Vec::new();
    for i in 0..k {
        let (cur, next) = (&levels[i], &levels[i + 1]);
        let mut nv = vec![f64::INFINITY; next.len()];
        let mut nb = vec![0; next.len()];
        for (b, &tn) in next.iter().enumerate() {
            for (a, &tc) in cur.iter().enumerate() {
                if tc + 1e-15 < tn {
                    continue;
                }
                let c = value[a] + cost(i, tc, tn);
                if c < nv[b] {
                    nv[b] = c;
                    nb[b] = a;
                }
            }
        }
        value = nv;
        back.push(nb);
    }
    let mut idx = 0;
    let mut ts = vec![0.0; k - 1];
    for i in (1..k).rev() {
        idx = back[i][idx];
        ts[i - 1] = levels[i][idx];
    }
    (value[0], ts)
}

/// Result of the dual evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualEval {
    pub value: f64,
    pub converged: bool,
}

/// `max_φ -φ_t(0) + Σ_i v̂_i (φ_t(i) - φ_t(i+1))` subject to the interval
/// constraints, by running the solver on a single pixel with `v̂` held fixed.
///
/// The returned value belongs to a feasible dual: the final iterate is shifted
/// by its largest constraint violation, and `converged` reports whether that
/// shift was negligible.
pub fn dataterm_dual_eval(
    v_hat: &[f64],
    grid: &LabelGrid,
    unary: &UnaryModel,
    inner_iters: usize,
) -> Result<DualEval, SolverError> {
    let k = grid.k();
    assert_eq!(v_hat.len(), k);
    let spec = ModelSpec {
        width: 1,
        height: 1,
        channels: 1,
        grid: grid.clone(),
        unaries: vec![unary.clone()],
        reg: RegularizerSpec::new(Eta::SquaredNorm { weight: 1.0 }, Kappa::Infinite),
        dual_mode: DualMode::PiecewiseLinear,
    };
    let mut model = assemble(&spec)
        .map_err(|_| SolverError::InvalidConfig("unary cannot be assembled"))?
        .channels
        .remove(0);
    model.fix_primal(v_hat);
    let config = SolverConfig {
        max_iters: inner_iters,
        // slow drift can look like a stall; run the full budget
        stop_tol: 1e-300,
        check_every: 50,
        dykstra_tol: 1e-11,
        dykstra_max_iter: 1_000,
        execution: crate::par::Execution::Sequential,
        ..Default::default()
    };
    let sol = run_channel(&model, &config)?;
    let phi = &sol.dual.phi_t;
    let shift = (0..k)
        .map(|i| model.local_conjugate(0, i, phi[i] - phi[i + 1]) - phi[i])
        .fold(0.0, f64::max);
    let value = -(phi[0] + shift) + (0..k).map(|i| v_hat[i] * (phi[i] - phi[i + 1])).sum::<f64>();
    Ok(DualEval {
        value,
        converged: shift <= 1e-8,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::unaries::TruncatedTerm;

    fn grid(ell: usize) -> LabelGrid {
        LabelGrid::new(0.0, 1.0, ell).unwrap()
    }

    #[test]
    fn operator_shape() {
        let g = grid(4);
        let m = integration_operator(&g);
        let h = g.h();
        assert_eq!(m.len(), 9);
        assert_eq!(m[0], 0.0);
        assert!((m[4] + g.labels()[1] / h).abs() < 1e-15);
        assert_eq!((m[3], m[6], m[7], m[1]), (1.0, 1.0, 1.0, 0.0));
    }

    #[test]
    fn label_gives_sparse_solution() {
        let g = grid(4);
        let u = UnaryModel::mixture(vec![TruncatedTerm::new(0.2, 5.0, 0.4), TruncatedTerm::new(0.1, 8.0, 0.9)]).unwrap();
        let gamma = g.labels()[2];
        let v = g.lift(gamma);
        let d = dataterm_primal_oracle(&v, &g, &u, 100);
        let expect = u.convex_envelope_eval(2, &g, gamma).unwrap();
        assert!((d - expect).abs() < 1e-6, "{d} vs {expect}");
    }

    #[test]
    fn single_interval_is_envelope() {
        let g = grid(2);
        let u = UnaryModel::mixture(vec![TruncatedTerm::new(0.3, 6.0, 0.2), TruncatedTerm::new(0.2, 6.0, 0.8)]).unwrap();
        for w in [0.0, 0.25, 0.5, 0.9] {
            let d = dataterm_primal_oracle(&[w], &g, &u, 50);
            let expect = u.convex_envelope_eval(0, &g, w).unwrap();
            assert!((d - expect).abs() < 1e-6);
        }
    }

    #[test]
    fn convex_unary_at_binary_lift() {
        let g = grid(5);
        let u = UnaryModel::quadratic(1.0, 0.4);
        let v = [1.0, 1.0, 0.0, 0.0];
        let d = dataterm_primal_oracle(&v, &g, &u, 60);
        assert!((d - u.eval(g.recover_sublabel(&v))).abs() < 1e-6);
    }

    #[test]
    fn non_monotone_is_infeasible() {
        let g = grid(3);
        let u = UnaryModel::quadratic(1.0, 0.4);
        assert_eq!(dataterm_primal_oracle(&[0.2, 0.6], &g, &u, 20), f64::INFINITY);
    }

    #[test]
    fn dual_at_zero_is_first_label_cost() {
        let g = grid(3);
        let u = UnaryModel::quadratic(1.0, 0.7);
        let d = dataterm_dual_eval(&[0.0, 0.0], &g, &u, 20_000).unwrap();
        assert!((d.value - 0.49).abs() < 1e-3, "{d:?}");
    }

    #[test]
    fn zero_unary_dual_is_zero() {
        let g = grid(4);
        let u = UnaryModel::quadratic(0.0, 0.3);
        let d = dataterm_dual_eval(&[1.0, 0.4, 0.1], &g, &u, 5_000).unwrap();
        assert!(d.value.abs() < 1e-6, "{d:?}");
    }
}
