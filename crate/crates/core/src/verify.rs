//! Randomized property suites for the constraint sets, the data term and the
//! two-label equivalence, each checked against an independent oracle.
//!
//! Every suite is deterministic in its seed and returns a [`SuiteReport`].

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::LabelGrid;
use crate::models::dataterm::{dataterm_dual_eval, dataterm_primal_oracle};
use crate::models::{assemble, DualMode, ModelSpec, RegularizerSpec};
use crate::projections::{
    check_epigraph_split, check_jump, check_linear_dual_feasibility, project_epi_interval_quadratic, project_epi_max,
    project_epi_parabola, project_jump, project_onto_lines, project_radial_epi, split_projection_residual,
    EpigraphPoint, JumpConstraintSet,
};
use crate::regularizer::{ConcaveTable, Eta, Kappa};
use crate::solver::{
    constraint_violation, infconv_reference_solve, run_channel, DualFields, Execution, InfconvConfig, SolverConfig,
};
use crate::unaries::{QuadPiece, TruncatedTerm, UnaryModel};

/// Outcome of one property suite.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub name: &'static str,
    pub cases: usize,
    pub failures: usize,
    /// Largest observed error (or disagreement count for accept/reject suites).
    pub worst: f64,
    pub tolerance: f64,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<12} {:>6} cases {:>4} failures  worst {:.3e}  tol {:.0e}  {}",
            self.name,
            self.cases,
            self.failures,
            self.worst,
            self.tolerance,
            if self.passed() { "PASS" } else { "FAIL" }
        )
    }
}

/// Case counts of [`selftest`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SuiteSizes {
    pub jump_continuum: usize,
    pub min_pooling: usize,
    pub split: usize,
    pub tv: usize,
    pub dataterm: usize,
    pub infconv: usize,
    pub projections: usize,
}

impl Default for SuiteSizes {
    fn default() -> Self {
        Self {
            jump_continuum: 1000,
            min_pooling: 200,
            split: 1000,
            tv: 1000,
            dataterm: 100,
            infconv: 6,
            projections: 200,
        }
    }
}

/// Runs every suite with fixed seeds.
pub fn selftest(sizes: SuiteSizes) -> Vec<SuiteReport> {
    vec![
        jump_continuum(1, sizes.jump_continuum),
        min_pooling(2, sizes.min_pooling),
        epigraph_split(3, sizes.split),
        tv_reduction(4, sizes.tv),
        dataterm_duality(5, sizes.dataterm),
        two_label_infconv(6, sizes.infconv),
        projections(7, sizes.projections),
    ]
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn unit_grid(k: usize) -> LabelGrid {
    LabelGrid::new(0.0, 1.0, k + 1).expect("valid grid")
}

/// Random concave jump penalty of one of the supported shapes.
pub fn random_kappa(r: &mut impl Rng) -> Kappa {
    match r.gen_range(0..4) {
        0 => Kappa::Linear { slope: r.gen_range(0.2..3.0) },
        1 => Kappa::ConstantJump { height: r.gen_range(0.1..2.0) },
        2 => Kappa::TruncatedLinear {
            slope: r.gen_range(0.5..4.0),
            cap: r.gen_range(0.1..2.0),
        },
        _ => {
            let m = r.gen_range(1..6);
            let mut a: Vec<f64> = (0..m).map(|_| r.gen_range(0.01..1.2)).collect();
            a.sort_by(f64::total_cmp);
            a.dedup_by(|x, y| (*x - *y).abs() < 1e-3);
            a.insert(0, 0.0);
            let mut slopes: Vec<f64> = (1..a.len()).map(|_| r.gen_range(0.0..3.0)).collect();
            slopes.sort_by(|x, y| y.total_cmp(x));
            slopes[0] = slopes[0].max(0.05);
            let mut values = vec![0.0];
            for (j, s) in slopes.iter().enumerate() {
                let v = values[j] + s * (a[j + 1] - a[j]);
                values.push(v.max(values[j] + 1e-6));
            }
            Kappa::Table(ConcaveTable::new(a, values).expect("concave by construction"))
        }
    }
}

fn random_phi(r: &mut impl Rng, k: usize, n: usize) -> Vec<f64> {
    (0..k * n).map(|_| r.gen_range(-1.0..1.0)).collect()
}

/// Scales `phi` so that its worst partial-sum ratio is near one.
fn scale_to_boundary(phi: &mut [f64], n: usize, set: &JumpConstraintSet, factor: f64) {
    let k = set.k();
    let mut worst: f64 = 0.0;
    for i in 0..k {
        let mut sum = vec![0.0; n];
        for j in i..k {
            for d in 0..n {
                sum[d] += phi[j * n + d];
            }
            let norm = sum.iter().map(|x| x * x).sum::<f64>().sqrt();
            worst = worst.max(norm / set.bound(i, j));
        }
    }
    if worst > 0.0 {
        phi.iter_mut().for_each(|x| *x *= factor / worst);
    }
}

/// Continuum jump constraints sampled on an `(α, β)` grid.
///
/// For `i < j` the left end moves inside interval `i` and the right end inside
/// interval `j`; for `i = j` the sub-interval `[γ_i^α, γ_i^β]`, `α ≤ β`, is used.
pub fn continuum_jump_feasible(phi: &[f64], n: usize, kappa: &Kappa, grid: &LabelGrid, samples: usize, tol: f64) -> bool {
    let k = grid.k();
    let h = grid.h();
    let labels = grid.labels();
    let gamma_at = |i: usize, t: f64| (1.0 - t) * labels[i] + t * labels[i + 1];
    let frac = |s: usize| s as f64 / (samples - 1) as f64;
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    for i in 0..k {
        for j in i..k {
            let mut inner = vec![0.0; n];
            for l in i + 1..j {
                for d in 0..n {
                    inner[d] += phi[l * n + d];
                }
            }
            for sa in 0..samples {
                let alpha = frac(sa);
                for sb in 0..samples {
                    let beta = frac(sb);
                    let (lhs, span) = if i == j {
                        if beta < alpha {
                            continue;
                        }
                        let w = beta - alpha;
                        (w * norm(&phi[i * n..(i + 1) * n]), w * h)
                    } else {
                        let v: Vec<f64> = (0..n)
                            .map(|d| (1.0 - alpha) * phi[i * n + d] + inner[d] + beta * phi[j * n + d])
                            .collect();
                        (norm(&v), gamma_at(j, beta) - gamma_at(i, alpha))
                    };
                    if lhs > kappa.eval(span) / h + tol {
                        return false;
                    }
                }
            }
        }
    }
    true
}

/// Partial-sum jump constraints versus the sampled continuum constraints.
pub fn jump_continuum(seed: u64, cases: usize) -> SuiteReport {
    let mut r = rng(seed);
    let tol = 1e-9;
    let mut failures = 0;
    for _ in 0..cases {
        let k = r.gen_range(1..=6);
        let grid = unit_grid(k);
        let kappa = random_kappa(&mut r);
        let set = JumpConstraintSet::new(&kappa, &grid).expect("finite kappa");
        let mut phi = random_phi(&mut r, k, 2);
        scale_to_boundary(&mut phi, 2, &set, r.gen_range(0.7..1.3));
        let partial = check_jump(&phi, 2, &set, tol).is_feasible();
        let continuum = continuum_jump_feasible(&phi, 2, &kappa, &grid, 21, tol);
        if partial != continuum {
            failures += 1;
        }
    }
    SuiteReport {
        name: "jump-sets",
        cases,
        failures,
        worst: failures as f64,
        tolerance: tol,
    }
}

/// Random truncated-quadratic mixture on `[0, 1]`.
pub fn random_mixture(r: &mut impl Rng) -> UnaryModel {
    let m = r.gen_range(1..=3);
    let terms = (0..m)
        .map(|_| TruncatedTerm::new(r.gen_range(0.05..0.5), r.gen_range(0.5..20.0), r.gen_range(0.0..1.0)))
        .collect();
    UnaryModel::mixture(terms).expect("valid terms")
}

fn dense_min(u: &UnaryModel, lo: f64, hi: f64) -> f64 {
    let n = 20_001;
    (0..n)
        .map(|j| u.eval(lo + (hi - lo) * j as f64 / (n - 1) as f64))
        .fold(f64::INFINITY, f64::min)
}

/// Piecewise constant duals with a one-homogeneous `η` reduce to capacity
/// constraints `-φ_t(i) ≤ min ρ` over the dual cell of each label.
pub fn min_pooling(seed: u64, cases: usize) -> SuiteReport {
    let mut r = rng(seed);
    let tol = 1e-6;
    let mut failures = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let k = r.gen_range(1..=5);
        let grid = unit_grid(k);
        let unary = random_mixture(&mut r);
        let weight = r.gen_range(0.2..2.0);
        let spec = ModelSpec {
            width: 1,
            height: 1,
            channels: 1,
            grid: grid.clone(),
            unaries: vec![unary.clone()],
            reg: RegularizerSpec::total_variation(weight),
            dual_mode: DualMode::PiecewiseConstant,
        };
        let model = assemble(&spec).expect("valid model").channels.remove(0);
        // capacities from the assembled model against an independent scan
        let labels = grid.labels();
        let h = grid.h();
        let mut caps = Vec::with_capacity(k + 1);
        for l in 0..=k {
            let lo = if l == 0 { labels[0] } else { labels[l] - h / 2.0 };
            let hi = if l == k { labels[k] } else { labels[l] + h / 2.0 };
            let assembled = match (l > 0, l < k) {
                (true, true) => model.pooled_upper[l - 1].min(model.pooled_lower[l]),
                (false, _) => model.pooled_lower[0],
                (_, false) => model.pooled_upper[k - 1],
            };
            let cap = dense_min(&unary, lo, hi);
            let err = (assembled - cap).abs();
            worst = worst.max(err);
            if err > tol {
                failures += 1;
            }
            caps.push(cap);
        }
        // accept/reject of a random dual
        let phi_t: Vec<f64> = caps.iter().map(|c| -c + r.gen_range(-0.05..0.2)).collect();
        let phi_x: Vec<f64> = (0..2 * k).map(|_| r.gen_range(-0.7..0.7) * weight).collect();
        let expected = caps.iter().zip(&phi_t).all(|(c, p)| -p <= c + tol)
            && phi_x.chunks(2).all(|v| v[0].hypot(v[1]) <= weight + tol);
        let dual = DualFields { phi_t, phi_x };
        let accepted = constraint_violation(&model, &dual, Execution::Sequential) <= tol;
        if accepted != expected {
            failures += 1;
        }
    }
    SuiteReport {
        name: "min-pooling",
        cases,
        failures,
        worst,
        tolerance: tol,
    }
}

/// Split epigraph constraints versus the sampled infimum form, plus exactness
/// of the data epigraph projection on the same duals.
pub fn epigraph_split(seed: u64, cases: usize) -> SuiteReport {
    let mut r = rng(seed);
    let tol = 1e-6;
    let mut failures = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let k = r.gen_range(1..=4);
        let grid = unit_grid(k);
        let unary = random_mixture(&mut r);
        let eta = Eta::SquaredNorm { weight: r.gen_range(0.2..2.0) }.conjugate();
        let phi_t: Vec<f64> = (0..=k).map(|_| r.gen_range(-1.0..1.0)).collect();
        let eta_star: Vec<f64> = (0..k).map(|_| eta.eval_norm(r.gen_range(0.0..0.6))).collect();
        let split = check_epigraph_split(&phi_t, &eta_star, &unary, &grid);
        let sampled = check_linear_dual_feasibility(&phi_t, &eta_star, &unary, &grid, 20_001);
        if split.is_feasible(tol) != sampled.is_feasible(tol) {
            failures += 1;
        }
        let residual = split_projection_residual(&phi_t, &eta_star, &unary, &grid);
        worst = worst.max(residual);
        if residual > 1e-8 {
            failures += 1;
        }
    }
    SuiteReport {
        name: "split-form",
        cases,
        failures,
        worst,
        tolerance: tol,
    }
}

/// With `η = ‖·‖` and `κ(a) = a` the jump set equals the per-entry unit balls.
pub fn tv_reduction(seed: u64, cases: usize) -> SuiteReport {
    let mut r = rng(seed);
    let tol = 1e-9;
    let mut failures = 0;
    for _ in 0..cases {
        let k = r.gen_range(1..=6);
        let grid = unit_grid(k);
        let unary = random_mixture(&mut r);
        let kappa = Kappa::Linear { slope: 1.0 };
        let assembled = JumpConstraintSet::new(&kappa, &grid).expect("finite kappa");
        // every partial sum, without the per-entry shortcut
        let mut bounds = vec![f64::INFINITY; k * k];
        for i in 0..k {
            for j in i..k {
                bounds[i * k + j] = (j - i + 1) as f64;
            }
        }
        let full = JumpConstraintSet::from_bounds(k, bounds.clone());
        let mut phi = random_phi(&mut r, k, 2);
        let factor = r.gen_range(0.6..1.4);
        phi.iter_mut().for_each(|x| *x *= factor);
        let phi_t: Vec<f64> = (0..=k).map(|_| r.gen_range(-0.5..0.5)).collect();
        let eta_star = vec![0.0; k];
        let data_ok = check_epigraph_split(&phi_t, &eta_star, &unary, &grid).is_feasible(tol);
        let balls_ok = phi.chunks(2).all(|v| v[0].hypot(v[1]) <= 1.0 + tol);
        let full_ok = data_ok && check_jump(&phi, 2, &full, tol).is_feasible();
        let reduced_ok = data_ok && balls_ok;
        // the assembled set must use the per-entry projection and agree with it
        let mut projected = phi.clone();
        project_jump(&mut projected, 2, &assembled, 1e-12, 1000, &mut Vec::new());
        let proj_ok = assembled.is_per_entry() && check_jump(&projected, 2, &full, 1e-12).is_feasible();
        if full_ok != reduced_ok || !proj_ok {
            failures += 1;
        }
    }
    SuiteReport {
        name: "tv-balls",
        cases,
        failures,
        worst: failures as f64,
        tolerance: tol,
    }
}

/// Primal data-term minimization versus the lifted dual at fixed coefficients.
pub fn dataterm_duality(seed: u64, cases: usize) -> SuiteReport {
    let mut r = rng(seed);
    let tol = 1e-3;
    let mut failures = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let k = r.gen_range(1..=3);
        let grid = unit_grid(k);
        let unary = random_mixture(&mut r);
        let mut v: Vec<f64> = (0..k).map(|_| r.gen()).collect();
        v.sort_by(|a, b| b.total_cmp(a));
        let primal = dataterm_primal_oracle(&v, &grid, &unary, 200);
        let err = match dataterm_dual_eval(&v, &grid, &unary, 10_000) {
            Ok(d) => (primal - d.value).abs(),
            Err(_) => f64::INFINITY,
        };
        worst = worst.max(err);
        if !(err <= tol) {
            failures += 1;
        }
    }
    SuiteReport {
        name: "dataterm",
        cases,
        failures,
        worst,
        tolerance: tol,
    }
}

/// Two-label lifted solution versus the unlifted Huber-type reference.
pub fn two_label_infconv(seed: u64, cases: usize) -> SuiteReport {
    let mut r = rng(seed);
    let tol = 1e-3;
    let n = 8;
    let mut failures = 0;
    let mut worst: f64 = 0.0;
    for case in 0..cases {
        let unaries: Vec<UnaryModel> = (0..n * n)
            .map(|_| {
                if case % 2 == 0 {
                    UnaryModel::quadratic(r.gen_range(0.5..2.0), r.gen())
                } else {
                    // strongly convex part keeps the minimizer unique
                    UnaryModel::mixture(vec![
                        TruncatedTerm::new(100.0, r.gen_range(0.5..2.0), r.gen()),
                        TruncatedTerm::new(r.gen_range(0.05..0.2), r.gen_range(1.0..10.0), r.gen()),
                    ])
                    .expect("valid terms")
                }
            })
            .collect();
        let spec = ModelSpec {
            width: n,
            height: n,
            channels: 1,
            grid: unit_grid(1),
            unaries,
            reg: RegularizerSpec::mumford_shah(r.gen_range(0.2..2.0), r.gen_range(0.05..0.5)),
            dual_mode: DualMode::PiecewiseLinear,
        };
        let model = assemble(&spec).expect("valid model").channels.remove(0);
        let config = SolverConfig {
            max_iters: 100_000,
            stop_tol: 1e-9,
            dykstra_max_iter: 2000,
            execution: Execution::Sequential,
            ..Default::default()
        };
        let err = match (run_channel(&model, &config), infconv_reference_solve(&model, &InfconvConfig::default())) {
            (Ok(sol), Ok(reference)) => sol
                .primal
                .recover(&model.grid)
                .iter()
                .zip(&reference)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max),
            _ => f64::INFINITY,
        };
        worst = worst.max(err);
        if !(err <= tol) {
            failures += 1;
        }
    }
    SuiteReport {
        name: "two-label",
        cases,
        failures,
        worst,
        tolerance: tol,
    }
}

/// Nearest point of the closed epigraph of `g` restricted to `[lo, hi]`
/// (vertical walls at finite ends), by scanning the boundary.
pub fn brute_epigraph_point(z: EpigraphPoint, g: &dyn Fn(f64) -> f64, lo: f64, hi: f64) -> EpigraphPoint {
    let s0 = z.slope.clamp(lo, hi);
    if z.slope == s0 && z.height >= g(s0) {
        return z;
    }
    // the nearest point is no farther than the point above or beside z
    let reach = ((z.slope - s0).powi(2) + (g(s0) - z.height).max(0.0).powi(2)).sqrt();
    let (a, b) = ((z.slope - reach).max(lo), (z.slope + reach).min(hi));
    let d2 = |s: f64| (s - z.slope).powi(2) + (g(s) - z.height).powi(2);
    let n = 200_000;
    let mut best = (f64::INFINITY, a);
    for j in 0..=n {
        let s = a + (b - a) * j as f64 / n as f64;
        let d = d2(s);
        if d < best.0 {
            best = (d, s);
        }
    }
    let step = (b - a) / n as f64;
    let (mut l, mut u) = ((best.1 - step).max(a), (best.1 + step).min(b));
    for _ in 0..100 {
        let m1 = l + (u - l) / 3.0;
        let m2 = u - (u - l) / 3.0;
        if d2(m1) <= d2(m2) {
            u = m2;
        } else {
            l = m1;
        }
    }
    let s = 0.5 * (l + u);
    let mut out = EpigraphPoint::new(s, g(s));
    for end in [lo, hi] {
        if end.is_finite() {
            let wall = EpigraphPoint::new(end, z.height.max(g(end)));
            if wall.dist2(&z) < out.dist2(&z) {
                out = wall;
            }
        }
    }
    out
}

/// Nearest point of `{x ∈ ℝ^k : |Σ_{l=i}^{j} x_l| ≤ b_ij}` by enumerating
/// active sets of up to `k` constraints.
pub fn brute_jump_1d(z: &[f64], set: &JumpConstraintSet) -> Vec<f64> {
    let k = set.k();
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for i in 0..k {
        for j in i..k {
            let a: Vec<f64> = (0..k).map(|l| if (i..=j).contains(&l) { 1.0 } else { 0.0 }).collect();
            let b = set.bound(i, j);
            rows.push((a.clone(), b));
            rows.push((a.iter().map(|x| -x).collect(), b));
        }
    }
    let feasible = |x: &[f64]| {
        rows.iter()
            .all(|(a, b)| a.iter().zip(x).map(|(p, q)| p * q).sum::<f64>() <= b + 1e-10)
    };
    if feasible(z) {
        return z.to_vec();
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    let m = rows.len();
    let mut subset = Vec::new();
    fn visit(
        start: usize,
        m: usize,
        k: usize,
        subset: &mut Vec<usize>,
        f: &mut dyn FnMut(&[usize]),
    ) {
        if !subset.is_empty() {
            f(subset);
        }
        if subset.len() == k {
            return;
        }
        for c in start..m {
            subset.push(c);
            visit(c + 1, m, k, subset, f);
            subset.pop();
        }
    }
    visit(0, m, k, &mut subset, &mut |active: &[usize]| {
        // x = z - Aᵀ μ with A x = b on the active rows
        let p = active.len();
        let mut gram = vec![0.0; p * p];
        let mut rhs = vec![0.0; p];
        for (r, &ar) in active.iter().enumerate() {
            let (a, b) = &rows[ar];
            rhs[r] = a.iter().zip(z).map(|(x, y)| x * y).sum::<f64>() - b;
            for (c, &ac) in active.iter().enumerate() {
                gram[r * p + c] = a.iter().zip(&rows[ac].0).map(|(x, y)| x * y).sum();
            }
        }
        let Some(mu) = solve_dense(&mut gram, &mut rhs, p) else {
            return;
        };
        if mu.iter().any(|&m| m < -1e-12) {
            return;
        }
        let mut x = z.to_vec();
        for (r, &ar) in active.iter().enumerate() {
            for l in 0..k {
                x[l] -= mu[r] * rows[ar].0[l];
            }
        }
        if feasible(&x) {
            let d: f64 = x.iter().zip(z).map(|(a, b)| (a - b).powi(2)).sum();
            if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                best = Some((d, x));
            }
        }
    });
    best.expect("nonempty polytope").1
}

/// Gaussian elimination with partial pivoting; `None` if singular.
fn solve_dense(a: &mut [f64], b: &mut [f64], n: usize) -> Option<Vec<f64>> {
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| a[i * n + c].abs().total_cmp(&a[j * n + c].abs()))?;
        if a[piv * n + c].abs() < 1e-12 {
            return None;
        }
        if piv != c {
            for j in 0..n {
                a.swap(piv * n + j, c * n + j);
            }
            b.swap(piv, c);
        }
        for r in c + 1..n {
            let f = a[r * n + c] / a[c * n + c];
            for j in c..n {
                a[r * n + j] -= f * a[c * n + j];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|j| a[r * n + j] * x[j]).sum();
        x[r] = (b[r] - s) / a[r * n + r];
    }
    Some(x)
}

/// Idempotence, nonexpansiveness, membership and agreement with the
/// brute-force nearest point, for every projection used by the solver.
pub fn projections(seed: u64, cases: usize) -> SuiteReport {
    let mut r = rng(seed);
    let mut failures = 0;
    // worst distance to the brute-force nearest point
    let mut worst: f64 = 0.0;
    let record = |err: f64, tol: f64, failures: &mut usize| {
        if !(err <= tol) {
            *failures += 1;
        }
    };
    let dist = |a: EpigraphPoint, b: EpigraphPoint| a.dist2(&b).sqrt();
    let random_point = |r: &mut ChaCha8Rng| EpigraphPoint::new(r.gen_range(-3.0..3.0), r.gen_range(-3.0..3.0));

    type Proj<'a> = Box<dyn Fn(EpigraphPoint) -> EpigraphPoint + 'a>;
    type Func<'a> = Box<dyn Fn(f64) -> f64 + 'a>;
    for _ in 0..cases {
        // one random instance of each epigraph family
        let curv = r.gen_range(0.1..3.0);
        let shift = (r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0));
        let lo = r.gen_range(-1.0..0.5);
        let piece = QuadPiece::new(
            if r.gen_bool(0.3) { 0.0 } else { r.gen_range(0.1..5.0) },
            r.gen_range(-1.0..1.0),
            r.gen_range(-1.0..1.0),
            lo,
            lo + r.gen_range(0.05..1.0),
        );
        let unary = random_mixture(&mut r);
        let pieces = unary.pieces_on(0.0, 1.0).expect("analytic unary");
        let mut pts: Vec<(f64, f64)> = (0..6).map(|_| (r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0))).collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let lines = crate::unaries::lower_convex_hull(&pts);
        let quad = r.gen_range(0.0..2.0);
        let radius = r.gen_range(0.2..2.0);

        let families: Vec<(Proj, Func, f64, f64)> = vec![
            (
                Box::new(move |z| project_epi_parabola(z, curv, shift)),
                Box::new(move |s| curv * (s - shift.0).powi(2) + shift.1),
                f64::NEG_INFINITY,
                f64::INFINITY,
            ),
            (
                Box::new(move |z| project_epi_interval_quadratic(z, &piece)),
                Box::new(move |s| piece.conjugate(s)),
                f64::NEG_INFINITY,
                f64::INFINITY,
            ),
            (
                Box::new(|z| project_epi_max(z, &pieces, 1e-13, 20_000).point),
                Box::new(|s| pieces.iter().map(|p| p.conjugate(s)).fold(f64::NEG_INFINITY, f64::max)),
                f64::NEG_INFINITY,
                f64::INFINITY,
            ),
            (
                Box::new(|z| project_onto_lines(z, &lines)),
                Box::new(|s| lines.iter().map(|&(t, v)| t * s - v).fold(f64::NEG_INFINITY, f64::max)),
                f64::NEG_INFINITY,
                f64::INFINITY,
            ),
            (
                Box::new(move |z| {
                    // radial slice of epi(η*): the slope plays the role of ‖p‖ ≥ 0
                    let (s, b) = project_radial_epi(z.slope, z.height, quad, radius);
                    EpigraphPoint::new(s, b)
                }),
                Box::new(move |s| quad * s * s),
                0.0,
                radius,
            ),
        ];
        for (fam, (project, g, dom_lo, dom_hi)) in families.iter().enumerate() {
            let mut z = random_point(&mut r);
            let mut y = random_point(&mut r);
            if fam == 4 {
                z.slope = z.slope.abs();
                y.slope = y.slope.abs();
            }
            let pz = project(z);
            let py = project(y);
            // membership
            let inside = pz.slope >= dom_lo - 1e-12 && pz.slope <= dom_hi + 1e-12;
            record(if inside { (g(pz.slope) - pz.height).max(0.0) } else { f64::INFINITY }, 1e-8, &mut failures);
            // idempotence
            record(dist(project(pz), pz), 1e-10, &mut failures);
            // nonexpansive
            record((dist(pz, py) - dist(z, y)).max(0.0), 1e-9, &mut failures);
            // brute force
            let oracle = brute_epigraph_point(z, g.as_ref(), *dom_lo, *dom_hi);
            worst = worst.max(dist(pz, oracle));
            record(dist(pz, oracle), 1e-4, &mut failures);
        }

        // jump sets: membership, idempotence, nonexpansive in 2-D; oracle in 1-D
        let k = r.gen_range(1..=4);
        let grid = unit_grid(k);
        let kappa = random_kappa(&mut r);
        let set = JumpConstraintSet::new(&kappa, &grid).expect("finite kappa");
        let mut scratch = Vec::new();
        let mut proj = |x: &[f64], n: usize| {
            let mut out = x.to_vec();
            project_jump(&mut out, n, &set, 1e-13, 20_000, &mut scratch);
            out
        };
        let l2 = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let mut x = random_phi(&mut r, k, 2);
        let mut y = random_phi(&mut r, k, 2);
        scale_to_boundary(&mut x, 2, &set, 2.0);
        scale_to_boundary(&mut y, 2, &set, 2.0);
        let px = proj(&x, 2);
        let py = proj(&y, 2);
        record(check_jump(&px, 2, &set, 0.0).max_violation, 1e-8, &mut failures);
        record(l2(&proj(&px, 2), &px), 1e-10, &mut failures);
        record((l2(&px, &py) - l2(&x, &y)).max(0.0), 1e-9, &mut failures);
        let mut z1 = random_phi(&mut r, k.min(3), 1);
        let set1 = JumpConstraintSet::new(&kappa, &unit_grid(k.min(3))).expect("finite kappa");
        scale_to_boundary(&mut z1, 1, &set1, 2.0);
        let mut p1 = z1.clone();
        project_jump(&mut p1, 1, &set1, 1e-13, 20_000, &mut Vec::new());
        let err = l2(&p1, &brute_jump_1d(&z1, &set1));
        worst = worst.max(err);
        record(err, 1e-4, &mut failures);
    }
    SuiteReport {
        name: "projections",
        cases,
        failures,
        worst,
        tolerance: 1e-4,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brute_jump_matches_ball() {
        let set = JumpConstraintSet::from_bounds(1, vec![0.5]);
        assert_eq!(brute_jump_1d(&[2.0], &set), vec![0.5]);
        assert_eq!(brute_jump_1d(&[-0.2], &set), vec![-0.2]);
    }

    #[test]
    fn continuum_check_includes_partial_sums() {
        // α = 0, β = 1 reproduces every partial-sum constraint
        let grid = unit_grid(2);
        let kappa = Kappa::ConstantJump { height: 0.5 };
        let phi = [0.6, 0.0, 0.6, 0.0];
        assert!(!continuum_jump_feasible(&phi, 2, &kappa, &grid, 2, 1e-9));
        let phi = [0.2, 0.0, -0.2, 0.0];
        assert!(continuum_jump_feasible(&phi, 2, &kappa, &grid, 21, 1e-9));
    }

    #[test]
    fn small_suites_pass() {
        for report in [
            jump_continuum(11, 50),
            min_pooling(12, 20),
            epigraph_split(13, 20),
            tv_reduction(14, 50),
            projections(15, 5),
        ] {
            assert!(report.passed(), "{report}");
        }
    }
}
