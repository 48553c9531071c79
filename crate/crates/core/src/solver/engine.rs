//! Chambolle-Pock iterations on the assembled per-pixel template.
//!
//! `min_x max_y ⟨K x, y⟩ + ⟨g, x⟩ + ⟨e, y⟩` over the primal box and the dual
//! constraint sets, with
//! `y ← P_Y(y + σ(K x̄ + e))`, `x ← P_X(x - τ(Kᵀ y + g))`, `x̄ = x + θ(x - x_old)`.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::models::{Blocks, ChannelModel, LocalConj, Model};
use crate::ops::divergence_at;
use crate::par::{for_each_row, for_each_row2, map_rows};
use crate::projections::{
    project_epi_interval_quadratic, project_epi_max, project_jump_warm, project_onto_lines, EpigraphPoint,
};

use super::energy::{bilinear_value, constraint_violation, unlifted_energy};
use super::{ChannelSolution, Diagnostics, DualFields, LiftedPrimal, SolverConfig, SolverError, StepRule};

/// Solves every channel in turn with the same configuration.
pub fn run(model: &Model, config: &SolverConfig) -> Result<Vec<ChannelSolution>, SolverError> {
    model.channels.iter().map(|c| run_channel(c, config)).collect()
}

pub fn run_channel(model: &ChannelModel, config: &SolverConfig) -> Result<ChannelSolution, SolverError> {
    config.validate()?;
    let norm = operator_norm(model, config) * 1.01;
    let (tau, sigma) = match config.steps {
        StepRule::Auto { ratio } => (1.0 / (ratio * norm), ratio / norm),
        StepRule::Fixed { tau, sigma } => {
            let product = tau * sigma * norm * norm;
            if product > 1.0 {
                return Err(SolverError::StepTooLarge(product));
            }
            (tau, sigma)
        }
    };
    let mut state = State::new(model);
    let start = Instant::now();
    let mut history = Vec::new();
    let mut stalled = 0;
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=config.max_iters {
        iterations = it;
        state.dual_step(model, config, sigma);
        let check = it % config.check_every == 0 || it == config.max_iters;
        let change = state.primal_step(model, config, tau, check);
        if !check {
            continue;
        }
        let runtime_ms = if config.timing { start.elapsed().as_millis() as u64 } else { 0 };
        history.push(state.diagnostics(model, config, it, runtime_ms));
        if change < config.stop_tol {
            stalled += 1;
        } else {
            stalled = 0;
        }
        if stalled >= config.patience {
            converged = true;
            break;
        }
    }
    Ok(state.into_solution(model, history, converged, iterations, tau, sigma))
}

struct State {
    x: Vec<f64>,
    xbar: Vec<f64>,
    y: Vec<f64>,
    /// Jump-set Dykstra corrections per pixel, kept across iterations.
    jump_incr: Vec<f64>,
}

impl State {
    /// Primal start at the pointwise data minimizer, duals at zero.
    fn new(model: &ChannelModel) -> Self {
        let (nx, ny, k) = (model.nx(), model.ny(), model.k());
        let n = model.pixels();
        let mut x = vec![0.0; n * nx];
        let grid = &model.grid;
        for p in 0..n {
            let u = model.unaries[p].argmin_on(grid.gamma_first(), grid.gamma_last());
            let v = &mut x[p * nx..p * nx + k];
            grid.lift_into(u, v);
            for (i, vi) in v.iter_mut().enumerate() {
                *vi = vi.clamp(v_lo(model, p, i), v_hi(model, p, i));
            }
        }
        Self {
            xbar: x.clone(),
            x,
            y: vec![0.0; n * ny],
            jump_incr: vec![0.0; n * jump_stride(model)],
        }
    }

    fn dual_step(&mut self, model: &ChannelModel, config: &SolverConfig, sigma: f64) {
        let (w, ny) = (model.width, model.ny());
        let xbar = &self.xbar;
        let js = jump_stride(model);
        for_each_row2(config.execution, &mut self.y, w * ny, &mut self.jump_incr, w * js, |r, row, incr| {
            let mut kx = vec![0.0; ny];
            let mut sum = [0.0; 2];
            for c in 0..w {
                let p = r * w + c;
                kx.iter_mut().for_each(|v| *v = 0.0);
                apply_k_pixel(model, xbar, r, c, &mut kx);
                kx[0] -= 1.0;
                let yl = &mut row[c * ny..(c + 1) * ny];
                for (y, d) in yl.iter_mut().zip(&kx) {
                    *y += sigma * d;
                }
                project_dual(model, config, p, yl, &mut incr[c * js..(c + 1) * js], &mut sum);
            }
        });
    }

    /// Returns the relative change of the tracked primal entries when
    /// `measure` is set, else 0.
    fn primal_step(&mut self, model: &ChannelModel, config: &SolverConfig, tau: f64, measure: bool) -> f64 {
        let (w, nx) = (model.width, model.nx());
        let y = &self.y;
        let theta = config.theta;
        let k = model.k();
        // stop on the lifted coefficients; on the multipliers when those are held fixed
        let tracked = if fixed_primal(model) { k..nx } else { 0..k };
        let rows = std::sync::Mutex::new(vec![(0.0, 0.0); model.height]);
        for_each_row2(config.execution, &mut self.x, w * nx, &mut self.xbar, w * nx, |r, xr, xbr| {
            let mut dx2 = 0.0;
            let mut x2 = 0.0;
            for c in 0..w {
                let p = r * w + c;
                for l in 0..nx {
                    let grad = apply_kt_pixel(model, y, r, c, l) + linear_primal(model, p, l);
                    let old = xr[c * nx + l];
                    let new = project_primal(model, p, l, old - tau * grad);
                    xr[c * nx + l] = new;
                    xbr[c * nx + l] = new + theta * (new - old);
                    if measure && tracked.contains(&l) {
                        dx2 += (new - old) * (new - old);
                        x2 += new * new;
                    }
                }
            }
            if measure {
                rows.lock().unwrap()[r] = (dx2, x2);
            }
        });
        if !measure {
            return 0.0;
        }
        let (dx2, x2) = rows
            .into_inner()
            .unwrap()
            .into_iter()
            .fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
        dx2.sqrt() / x2.sqrt().max(1e-12)
    }

    fn diagnostics(&self, model: &ChannelModel, config: &SolverConfig, iteration: usize, runtime_ms: u64) -> Diagnostics {
        let primal = self.primal(model);
        let dual = self.dual(model);
        let u = primal.recover(&model.grid);
        let bilinear = bilinear_value(model, &primal, &dual, config.execution);
        let energy = unlifted_energy(&u, model);
        Diagnostics {
            iteration,
            bilinear_value: bilinear,
            unlifted_energy: energy,
            gap_bound: (energy - bilinear).abs(),
            max_constraint_violation: constraint_violation(model, &dual, config.execution),
            runtime_ms,
        }
    }

    fn primal(&self, model: &ChannelModel) -> LiftedPrimal {
        let (nx, k) = (model.nx(), model.k());
        LiftedPrimal {
            width: model.width,
            height: model.height,
            k,
            v: self.x.chunks_exact(nx).flat_map(|c| c[..k].iter().copied()).collect(),
        }
    }

    fn dual(&self, model: &ChannelModel) -> DualFields {
        let (ny, ell, k) = (model.ny(), model.grid.ell(), model.k());
        let off = model.phi_x_offset();
        DualFields {
            phi_t: self.y.chunks_exact(ny).flat_map(|c| c[..ell].iter().copied()).collect(),
            phi_x: self
                .y
                .chunks_exact(ny)
                .flat_map(|c| c[off..off + 2 * k].iter().copied())
                .collect(),
        }
    }

    fn into_solution(
        self,
        model: &ChannelModel,
        history: Vec<Diagnostics>,
        converged: bool,
        iterations: usize,
        tau: f64,
        sigma: f64,
    ) -> ChannelSolution {
        ChannelSolution {
            primal: self.primal(model),
            dual: self.dual(model),
            history,
            converged,
            iterations,
            tau,
            sigma,
        }
    }
}

fn fixed_primal(model: &ChannelModel) -> bool {
    model.v_bounds.as_ref().is_some_and(|(lo, hi)| lo == hi)
}

#[inline]
fn v_lo(model: &ChannelModel, p: usize, i: usize) -> f64 {
    model.v_bounds.as_ref().map_or(0.0, |b| b.0[p * model.k() + i])
}

#[inline]
fn v_hi(model: &ChannelModel, p: usize, i: usize) -> f64 {
    model.v_bounds.as_ref().map_or(1.0, |b| b.1[p * model.k() + i])
}

#[inline]
fn project_primal(model: &ChannelModel, p: usize, l: usize, value: f64) -> f64 {
    if l < model.k() {
        value.clamp(v_lo(model, p, l), v_hi(model, p, l))
    } else if model.nonneg.contains(&l) {
        value.max(0.0)
    } else {
        value
    }
}

/// Primal linear term: the pooled unaries weight the capacity multipliers.
#[inline]
fn linear_primal(model: &ChannelModel, p: usize, l: usize) -> f64 {
    let k = model.k();
    if let Blocks::Constant { .. } = model.blocks {
        if (k..2 * k).contains(&l) {
            return model.pooled_lower[p * k + l - k];
        }
        if (2 * k..3 * k).contains(&l) {
            return model.pooled_upper[p * k + l - 2 * k];
        }
    }
    0.0
}

/// `out += (K x)` at pixel `(r, c)`, without the constant term.
#[inline]
fn apply_k_pixel(model: &ChannelModel, x: &[f64], r: usize, c: usize, out: &mut [f64]) {
    let (w, h_img, nx) = (model.width, model.height, model.nx());
    let p = r * w + c;
    let xl = &x[p * nx..(p + 1) * nx];
    model.op.apply_add(xl, out);
    let h = model.grid.h();
    let off = model.phi_x_offset();
    for i in 0..model.k() {
        let gx = if c + 1 < w { x[(p + 1) * nx + i] - xl[i] } else { 0.0 };
        let gy = if r + 1 < h_img { x[(p + w) * nx + i] - xl[i] } else { 0.0 };
        out[off + 2 * i] += h * gx;
        out[off + 2 * i + 1] += h * gy;
    }
}

/// `(Kᵀ y)_l` at pixel `(r, c)`.
#[inline]
fn apply_kt_pixel(model: &ChannelModel, y: &[f64], r: usize, c: usize, l: usize) -> f64 {
    let ny = model.ny();
    let p = r * model.width + c;
    let mut s = model.op.apply_t_at(&y[p * ny..(p + 1) * ny], l);
    if l < model.k() {
        let off = model.phi_x_offset() + 2 * l;
        s -= model.grid.h() * divergence_at(y, ny, off, model.width, model.height, r, c);
    }
    s
}

/// Dykstra corrections stored per pixel; at least one entry so rows never
/// have zero length.
fn jump_stride(model: &ChannelModel) -> usize {
    match &model.jump {
        Some(set) if !set.is_per_entry() => 2 * set.pair_count(),
        _ => 1,
    }
}

fn project_dual(model: &ChannelModel, config: &SolverConfig, p: usize, y: &mut [f64], incr: &mut [f64], sum: &mut [f64]) {
    let k = model.k();
    let eta = &model.eta_conj;
    match model.blocks {
        Blocks::Linear { w, a, b, p: pp } => {
            for i in 0..k {
                let z = EpigraphPoint::new(y[w + i], y[a + i]);
                let out = match &model.conj[p * k + i] {
                    LocalConj::Piece(piece) => project_epi_interval_quadratic(z, piece),
                    LocalConj::Pieces(range) => {
                        project_epi_max(z, &model.pieces[range.clone()], config.dykstra_tol, config.dykstra_max_iter).point
                    }
                    LocalConj::Lines(range) => project_onto_lines(z, &model.lines[range.clone()]),
                };
                y[w + i] = out.slope;
                y[a + i] = out.height;
                project_eta(eta, y, b + i, pp + 2 * i);
            }
        }
        Blocks::Constant { b_lo, b_hi, p_lo, p_hi } => {
            for i in 0..k {
                project_eta(eta, y, b_lo + i, p_lo + 2 * i);
                project_eta(eta, y, b_hi + i, p_hi + 2 * i);
            }
        }
    }
    if let Some(set) = &model.jump {
        let off = model.phi_x_offset();
        let incr = if set.is_per_entry() { &mut incr[..0] } else { incr };
        project_jump_warm(
            &mut y[off..off + 2 * k],
            2,
            set,
            config.dykstra_tol,
            config.dykstra_max_iter,
            incr,
            sum,
        );
    }
}

#[inline]
fn project_eta(eta: &crate::regularizer::EtaConjugate, y: &mut [f64], b: usize, p: usize) {
    let mut pv = [y[p], y[p + 1]];
    let mut bv = y[b];
    eta.project_epi(&mut pv, &mut bv);
    y[p] = pv[0];
    y[p + 1] = pv[1];
    y[b] = bv;
}

/// Operator norm of the full linear map by power iteration on `KᵀK`.
pub fn operator_norm(model: &ChannelModel, config: &SolverConfig) -> f64 {
    let (nx, ny, w) = (model.nx(), model.ny(), model.width);
    let n = model.pixels();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut x: Vec<f64> = (0..n * nx).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut y = vec![0.0; n * ny];
    let mut estimate = 0.0;
    for _ in 0..50 {
        let nrm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if nrm == 0.0 {
            break;
        }
        x.iter_mut().for_each(|v| *v /= nrm);
        {
            let xs = &x;
            for_each_row(config.execution, &mut y, w * ny, |r, row| {
                row.iter_mut().for_each(|v| *v = 0.0);
                for c in 0..w {
                    apply_k_pixel(model, xs, r, c, &mut row[c * ny..(c + 1) * ny]);
                }
            });
        }
        {
            let ys = &y;
            for_each_row(config.execution, &mut x, w * nx, |r, row| {
                for c in 0..w {
                    for l in 0..nx {
                        row[c * nx + l] = apply_kt_pixel(model, ys, r, c, l);
                    }
                }
            });
        }
        // ‖KᵀK x‖ with ‖x‖ = 1
        let partial = map_rows(config.execution, model.height, |r| {
            x[r * w * nx..(r + 1) * w * nx].iter().map(|v| v * v).sum::<f64>()
        });
        estimate = partial.iter().sum::<f64>().sqrt().sqrt();
    }
    estimate
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::LabelGrid;
    use crate::models::{assemble, DualMode, ModelSpec, RegularizerSpec};
    use crate::unaries::UnaryModel;

    fn single_pixel(ell: usize, target: f64, mode: DualMode) -> ChannelModel {
        let spec = ModelSpec {
            width: 1,
            height: 1,
            channels: 1,
            grid: LabelGrid::new(0.0, 1.0, ell).unwrap(),
            unaries: vec![UnaryModel::quadratic(1.0, target)],
            reg: RegularizerSpec::quadratic(1.0),
            dual_mode: mode,
        };
        assemble(&spec).unwrap().channels.remove(0)
    }

    #[test]
    fn one_pixel_reaches_minimizer() {
        let model = single_pixel(2, 0.37, DualMode::PiecewiseLinear);
        let config = SolverConfig {
            max_iters: 10_000,
            stop_tol: 1e-10,
            ..Default::default()
        };
        let sol = run_channel(&model, &config).unwrap();
        let u = sol.primal.recover(&model.grid)[0];
        assert!((u - 0.37).abs() < 1e-6, "u = {u}");
    }

    #[test]
    fn fixed_steps_are_checked() {
        let model = single_pixel(3, 0.2, DualMode::PiecewiseConstant);
        let config = SolverConfig {
            steps: StepRule::Fixed { tau: 1.0, sigma: 1.0 },
            ..Default::default()
        };
        assert!(matches!(run_channel(&model, &config), Err(SolverError::StepTooLarge(_))));
    }
}
