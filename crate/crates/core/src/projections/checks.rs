//! Feasibility checks for the dual data-term constraints.
//!
//! Per interval `Γ_i` the dual must satisfy
//! `inf_{t ∈ Γ_i} φ_t(i)(γ_{i+1} - t)/h + φ_t(i+1)(t - γ_i)/h + ρ(t) ≥ η*(φ_x(i))`.
//! The affine part equals `c_i - r_i t` with `r_i = (φ_t(i) - φ_t(i+1))/h` and
//! `c_i = (φ_t(i) γ_{i+1} - φ_t(i+1) γ_i)/h`, so the infimum is
//! `c_i - ρ_i*(r_i)`. Both forms are evaluated independently here.

use crate::grid::LabelGrid;
use crate::unaries::UnaryModel;

use super::epigraph::{project_epi_max, project_onto_lines, EpigraphPoint};

/// Largest constraint violation over the intervals (0 when feasible).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualViolation {
    pub max_violation: f64,
    pub worst_interval: Option<usize>,
}

impl DualViolation {
    pub fn is_feasible(&self, tol: f64) -> bool {
        self.max_violation <= tol
    }

    fn record(&mut self, i: usize, v: f64) {
        if v > self.max_violation {
            self.max_violation = v;
            self.worst_interval = Some(i);
        }
    }
}

impl Default for DualViolation {
    fn default() -> Self {
        Self {
            max_violation: 0.0,
            worst_interval: None,
        }
    }
}

/// Slope `r_i` and offset `c_i` of the affine part on interval `i`.
pub fn interval_affine(phi_t: &[f64], grid: &LabelGrid, i: usize) -> (f64, f64) {
    let h = grid.h();
    let (lo, hi) = grid.interval(i);
    let r = (phi_t[i] - phi_t[i + 1]) / h;
    let c = (phi_t[i] * hi - phi_t[i + 1] * lo) / h;
    (r, c)
}

/// Infimum form, evaluated at `t_samples` equidistant points per interval.
///
/// `eta_star[i]` is `η*(φ_x(i))`, possibly `+∞`.
pub fn check_linear_dual_feasibility(
    phi_t: &[f64],
    eta_star: &[f64],
    unary: &UnaryModel,
    grid: &LabelGrid,
    t_samples: usize,
) -> DualViolation {
    assert!(t_samples >= 2, "need at least two samples per interval");
    assert_eq!(phi_t.len(), grid.ell());
    let h = grid.h();
    let mut report = DualViolation::default();
    for i in 0..grid.k() {
        let (lo, hi) = grid.interval(i);
        let inf = (0..t_samples)
            .map(|j| {
                let t = lo + (hi - lo) * j as f64 / (t_samples - 1) as f64;
                phi_t[i] * (hi - t) / h + phi_t[i + 1] * (t - lo) / h + unary.eval(t)
            })
            .fold(f64::INFINITY, f64::min);
        report.record(i, eta_star[i] - inf);
    }
    report
}

/// Split form: violation of `ρ_i*(r_i) + η*(φ_x(i)) ≤ c_i`.
pub fn check_epigraph_split(phi_t: &[f64], eta_star: &[f64], unary: &UnaryModel, grid: &LabelGrid) -> DualViolation {
    assert_eq!(phi_t.len(), grid.ell());
    let mut report = DualViolation::default();
    for i in 0..grid.k() {
        let (r, c) = interval_affine(phi_t, grid, i);
        report.record(i, unary.conjugate_on_interval(i, grid, r) + eta_star[i] - c);
    }
    report
}

/// Projects the split point `(r_i, c_i - η*(φ_x(i)))` onto `epi ρ_i*` and
/// returns the worst deviation from what an exact projection must produce:
/// the identity on feasible points and a point on the graph otherwise.
pub fn split_projection_residual(
    phi_t: &[f64],
    eta_star: &[f64],
    unary: &UnaryModel,
    grid: &LabelGrid,
) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..grid.k() {
        let (r, c) = interval_affine(phi_t, grid, i);
        let z = EpigraphPoint::new(r, c - eta_star[i]);
        let p = project_epi_rho(z, unary, grid, i);
        let conj = unary.conjugate_on_interval(i, grid, p.slope);
        let residual = if z.height >= unary.conjugate_on_interval(i, grid, z.slope) {
            z.dist2(&p).sqrt()
        } else {
            (conj - p.height).abs()
        };
        worst = worst.max(residual);
    }
    worst
}

/// Projection onto `epi ρ_i*` in global coordinates.
pub fn project_epi_rho(z: EpigraphPoint, unary: &UnaryModel, grid: &LabelGrid, i: usize) -> EpigraphPoint {
    match unary {
        UnaryModel::SampledTable(table) => {
            let (lo, hi) = grid.interval(i);
            project_onto_lines(z, &table.lower_hull_on(lo, hi))
        }
        _ => {
            let pieces = unary.pieces_on_interval(i, grid).expect("analytic unary");
            project_epi_max(z, &pieces, 1e-13, 20_000).point
        }
    }
}
