//! Per-pixel operator template and constraint data.
//!
//! Linear couplings between dual blocks are moved into the primal problem as
//! Lagrange multipliers, so every dual block is a simple set with a cheap
//! projection. Every pixel carries the same small sparse matrix `A`; the
//! spatial part `h ∇v_i → φ_x(i)` is applied on top of it.
//!
//! Piecewise linear duals, per interval `i` (interval-local coordinates):
//!   dual   `φ_t`, `φ_x(i)`, `w_i`, `a_i`, `b_i`, `p_i`
//!   sets   `(w_i, a_i) ∈ epi ρ̃_i*`, `(p_i, b_i) ∈ epi η*`, `φ_x ∈` jump set
//!   links  `w_i = φ_t(i) - φ_t(i+1)` (λ), `a_i + b_i ≤ φ_t(i)` (μ ≥ 0),
//!          `p_i = φ_x(i)` (ν)
//!
//! Piecewise constant duals:
//!   dual   `φ_t`, `φ_x(i)`, `b⁻_i`, `b⁺_i`, `p⁻_i`, `p⁺_i`
//!   sets   `(p±_i, b±_i) ∈ epi η*`, `φ_x ∈` jump set
//!   links  `b⁻_i ≤ φ_t(i) + m⁻_i`, `b⁺_i ≤ φ_t(i+1) + m⁺_i` (μ± ≥ 0),
//!          `p±_i = φ_x(i)` (ν±)
//! where `m±` are the min-pooled unaries on the two halves of `Γ_i`.

use std::ops::Range;

use crate::grid::LabelGrid;
use crate::projections::JumpConstraintSet;
use crate::regularizer::EtaConjugate;
use crate::unaries::{QuadPiece, UnaryModel};

use super::{DualMode, ModelSpec, RegularizerSpec};

/// Representation of `ρ̃_i*` for one pixel and interval.
#[derive(Debug, Clone, PartialEq)]
pub enum LocalConj {
    Piece(QuadPiece),
    /// Range into [`ChannelModel::pieces`]; the conjugate is their maximum.
    Pieces(Range<usize>),
    /// Range into [`ChannelModel::lines`], `(t, v)` vertices of a convex polyline.
    Lines(Range<usize>),
}

/// Sparse matrix stored both row- and column-wise.
#[derive(Debug, Clone)]
pub(crate) struct LocalOperator {
    pub nx: usize,
    pub ny: usize,
    row_ptr: Vec<usize>,
    row_col: Vec<usize>,
    row_val: Vec<f64>,
    col_ptr: Vec<usize>,
    col_row: Vec<usize>,
    col_val: Vec<f64>,
}

impl LocalOperator {
    fn from_triplets(nx: usize, ny: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let compress = |n: usize, key: &dyn Fn(&(usize, usize, f64)) -> (usize, usize)| {
            let mut sorted: Vec<_> = triplets.to_vec();
            sorted.sort_by_key(|t| key(t));
            let mut ptr = vec![0; n + 1];
            for t in &sorted {
                ptr[key(t).0 + 1] += 1;
            }
            for j in 0..n {
                ptr[j + 1] += ptr[j];
            }
            let idx = sorted.iter().map(|t| key(t).1).collect();
            let val = sorted.iter().map(|t| t.2).collect();
            (ptr, idx, val)
        };
        let (row_ptr, row_col, row_val) = compress(ny, &|t| (t.0, t.1));
        let (col_ptr, col_row, col_val) = compress(nx, &|t| (t.1, t.0));
        Self {
            nx,
            ny,
            row_ptr,
            row_col,
            row_val,
            col_ptr,
            col_row,
            col_val,
        }
    }

    /// `out += A x`.
    #[inline]
    pub fn apply_add(&self, x: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            let mut s = 0.0;
            for e in self.row_ptr[j]..self.row_ptr[j + 1] {
                s += self.row_val[e] * x[self.row_col[e]];
            }
            *o += s;
        }
    }

    /// `(Aᵀ y)_l`.
    #[inline]
    pub fn apply_t_at(&self, y: &[f64], l: usize) -> f64 {
        let mut s = 0.0;
        for e in self.col_ptr[l]..self.col_ptr[l + 1] {
            s += self.col_val[e] * y[self.col_row[e]];
        }
        s
    }
}

/// Offsets of the dual blocks within one pixel's record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Blocks {
    Linear { w: usize, a: usize, b: usize, p: usize },
    Constant { b_lo: usize, b_hi: usize, p_lo: usize, p_hi: usize },
}

/// One scalar channel, ready for the solver.
#[derive(Debug, Clone)]
pub struct ChannelModel {
    pub width: usize,
    pub height: usize,
    pub grid: LabelGrid,
    pub mode: DualMode,
    pub reg: RegularizerSpec,
    pub eta_conj: EtaConjugate,
    pub jump: Option<JumpConstraintSet>,
    pub unaries: Vec<UnaryModel>,
    pub(crate) op: LocalOperator,
    pub(crate) blocks: Blocks,
    /// Primal multipliers constrained to be nonnegative.
    pub(crate) nonneg: Range<usize>,
    /// Per pixel and interval, piecewise linear mode only.
    pub conj: Vec<LocalConj>,
    pub pieces: Vec<QuadPiece>,
    pub lines: Vec<(f64, f64)>,
    /// Per pixel and interval, piecewise constant mode only.
    pub pooled_lower: Vec<f64>,
    pub pooled_upper: Vec<f64>,
    /// Optional per-pixel bounds on the lifted coefficients (default `[0, 1]`).
    pub v_bounds: Option<(Vec<f64>, Vec<f64>)>,
}

/// All channels of an assembled problem; they are solved independently.
#[derive(Debug, Clone)]
pub struct Model {
    pub width: usize,
    pub height: usize,
    pub channels: Vec<ChannelModel>,
}

impl ChannelModel {
    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn k(&self) -> usize {
        self.grid.k()
    }

    pub(crate) fn nx(&self) -> usize {
        self.op.nx
    }

    pub(crate) fn ny(&self) -> usize {
        self.op.ny
    }

    /// Offset of `φ_x` within a dual record (`φ_t` starts at 0).
    pub(crate) fn phi_x_offset(&self) -> usize {
        self.grid.ell()
    }

    /// Fixes the lifted coefficients to `v` (pixel-major, `k` per pixel).
    pub fn fix_primal(&mut self, v: &[f64]) {
        assert_eq!(v.len(), self.pixels() * self.k());
        self.v_bounds = Some((v.to_vec(), v.to_vec()));
    }

    /// `ρ̃_i*(w)` at one pixel.
    pub fn local_conjugate(&self, pixel: usize, i: usize, w: f64) -> f64 {
        match &self.conj[pixel * self.k() + i] {
            LocalConj::Piece(p) => p.conjugate(w),
            LocalConj::Pieces(r) => self.pieces[r.clone()]
                .iter()
                .map(|p| p.conjugate(w))
                .fold(f64::NEG_INFINITY, f64::max),
            LocalConj::Lines(r) => self.lines[r.clone()]
                .iter()
                .map(|&(t, v)| t * w - v)
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

pub(super) fn build(spec: &ModelSpec) -> Model {
    let n = spec.pixels();
    let channels = (0..spec.channels)
        .map(|c| build_channel(spec, &spec.unaries[c * n..(c + 1) * n]))
        .collect();
    Model {
        width: spec.width,
        height: spec.height,
        channels,
    }
}

fn build_channel(spec: &ModelSpec, unaries: &[UnaryModel]) -> ChannelModel {
    let grid = &spec.grid;
    let (k, ell) = (grid.k(), grid.ell());
    let phi_x = ell;
    let mut triplets = Vec::new();
    // v_i couples to φ_t(i) - φ_t(i+1)
    for i in 0..k {
        triplets.push((i, i, 1.0));
        triplets.push((i + 1, i, -1.0));
    }
    let (nx, ny, blocks, nonneg) = match spec.dual_mode {
        DualMode::PiecewiseLinear => {
            let (w, a, b, p) = (phi_x + 2 * k, phi_x + 3 * k, phi_x + 4 * k, phi_x + 5 * k);
            let (lam, mu, nu) = (k, 2 * k, 3 * k);
            for i in 0..k {
                triplets.extend([(w + i, lam + i, 1.0), (i, lam + i, -1.0), (i + 1, lam + i, 1.0)]);
                triplets.extend([(i, mu + i, 1.0), (a + i, mu + i, -1.0), (b + i, mu + i, -1.0)]);
                for d in 0..2 {
                    let col = nu + 2 * i + d;
                    triplets.extend([(phi_x + 2 * i + d, col, 1.0), (p + 2 * i + d, col, -1.0)]);
                }
            }
            (5 * k, p + 2 * k, Blocks::Linear { w, a, b, p }, mu..mu + k)
        }
        DualMode::PiecewiseConstant => {
            let (b_lo, b_hi, p_lo, p_hi) = (phi_x + 2 * k, phi_x + 3 * k, phi_x + 4 * k, phi_x + 6 * k);
            let (mu_lo, mu_hi, nu_lo, nu_hi) = (k, 2 * k, 3 * k, 5 * k);
            for i in 0..k {
                triplets.extend([(i, mu_lo + i, 1.0), (b_lo + i, mu_lo + i, -1.0)]);
                triplets.extend([(i + 1, mu_hi + i, 1.0), (b_hi + i, mu_hi + i, -1.0)]);
                for d in 0..2 {
                    let phi = phi_x + 2 * i + d;
                    triplets.extend([(phi, nu_lo + 2 * i + d, 1.0), (p_lo + 2 * i + d, nu_lo + 2 * i + d, -1.0)]);
                    triplets.extend([(phi, nu_hi + 2 * i + d, 1.0), (p_hi + 2 * i + d, nu_hi + 2 * i + d, -1.0)]);
                }
            }
            (7 * k, p_hi + 2 * k, Blocks::Constant { b_lo, b_hi, p_lo, p_hi }, mu_lo..mu_hi + k)
        }
    };
    let op = LocalOperator::from_triplets(nx, ny, &triplets);

    let mut conj = Vec::new();
    let mut pieces = Vec::new();
    let mut lines = Vec::new();
    let mut pooled_lower = Vec::new();
    let mut pooled_upper = Vec::new();
    match spec.dual_mode {
        DualMode::PiecewiseLinear => {
            conj.reserve(unaries.len() * k);
            for u in unaries {
                for i in 0..k {
                    conj.push(local_conj(u, grid, i, &mut pieces, &mut lines));
                }
            }
        }
        DualMode::PiecewiseConstant => {
            for u in unaries {
                let pool = u.min_pool(grid);
                pooled_lower.extend(pool.lower);
                pooled_upper.extend(pool.upper);
            }
        }
    }

    ChannelModel {
        width: spec.width,
        height: spec.height,
        grid: grid.clone(),
        mode: spec.dual_mode,
        reg: spec.reg.clone(),
        eta_conj: spec.reg.eta.conjugate(),
        jump: JumpConstraintSet::new(&spec.reg.kappa, grid),
        unaries: unaries.to_vec(),
        op,
        blocks,
        nonneg,
        conj,
        pieces,
        lines,
        pooled_lower,
        pooled_upper,
        v_bounds: None,
    }
}

/// `ρ̃_i(s) = ρ(γ_i + h s)` on `s ∈ [0, 1]`.
fn local_conj(
    u: &UnaryModel,
    grid: &LabelGrid,
    i: usize,
    pieces: &mut Vec<QuadPiece>,
    lines: &mut Vec<(f64, f64)>,
) -> LocalConj {
    let (lo, hi) = grid.interval(i);
    let h = grid.h();
    let to_local = |t: f64| ((t - lo) / h).clamp(0.0, 1.0);
    match u {
        UnaryModel::SampledTable(table) => {
            let start = lines.len();
            lines.extend(table.lower_hull_on(lo, hi).into_iter().map(|(t, v)| (to_local(t), v)));
            LocalConj::Lines(start..lines.len())
        }
        _ => {
            let mut local: Vec<QuadPiece> = u
                .pieces_on(lo, hi)
                .expect("analytic unary")
                .iter()
                .map(|p| {
                    let mut q = p.to_local(lo, h);
                    q.lo = to_local(p.lo);
                    q.hi = to_local(p.hi);
                    q
                })
                .collect();
            if local.len() == 1 {
                LocalConj::Piece(local.pop().unwrap())
            } else {
                let start = pieces.len();
                pieces.extend(local);
                LocalConj::Pieces(start..pieces.len())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regularizer::{Eta, Kappa};
    use crate::unaries::TruncatedTerm;

    fn spec(mode: DualMode, unary: UnaryModel, ell: usize) -> ModelSpec {
        ModelSpec {
            width: 1,
            height: 1,
            channels: 1,
            grid: LabelGrid::new(0.0, 1.0, ell).unwrap(),
            unaries: vec![unary],
            reg: RegularizerSpec::new(Eta::Norm { weight: 1.0 }, Kappa::Linear { slope: 1.0 }),
            dual_mode: mode,
        }
    }

    #[test]
    fn transpose_is_consistent() {
        for mode in [DualMode::PiecewiseLinear, DualMode::PiecewiseConstant] {
            let m = super::super::assemble(&spec(mode, UnaryModel::quadratic(1.0, 0.3), 4)).unwrap();
            let c = &m.channels[0];
            let x: Vec<f64> = (0..c.nx()).map(|j| (j as f64 * 0.37).sin()).collect();
            let y: Vec<f64> = (0..c.ny()).map(|j| (j as f64 * 0.91).cos()).collect();
            let mut ax = vec![0.0; c.ny()];
            c.op.apply_add(&x, &mut ax);
            let lhs: f64 = ax.iter().zip(&y).map(|(a, b)| a * b).sum();
            let rhs: f64 = (0..c.nx()).map(|l| c.op.apply_t_at(&y, l) * x[l]).sum();
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn local_conjugate_matches_global() {
        // ρ_i*(w/h) = w γ_i/h + ρ̃_i*(w)
        let u = UnaryModel::mixture(vec![TruncatedTerm::new(0.05, 4.0, 0.45)]).unwrap();
        let m = super::super::assemble(&spec(DualMode::PiecewiseLinear, u.clone(), 4)).unwrap();
        let c = &m.channels[0];
        let g = &c.grid;
        for i in 0..g.k() {
            for w in [-3.0, -0.2, 0.0, 0.4, 2.5] {
                let global = u.conjugate_on_interval(i, g, w / g.h());
                let local = w * g.labels()[i] / g.h() + c.local_conjugate(0, i, w);
                assert!((global - local).abs() < 1e-12, "{global} vs {local}");
            }
        }
    }

    #[test]
    fn channels_share_geometry() {
        let mut s = spec(DualMode::PiecewiseLinear, UnaryModel::quadratic(1.0, 0.2), 3);
        s.channels = 3;
        s.unaries = vec![
            UnaryModel::quadratic(1.0, 0.2),
            UnaryModel::quadratic(1.0, 0.5),
            UnaryModel::quadratic(1.0, 0.9),
        ];
        let m = super::super::assemble(&s).unwrap();
        assert_eq!(m.channels.len(), 3);
        assert!(m.channels.iter().all(|c| c.nx() == m.channels[0].nx() && c.ny() == m.channels[0].ny()));
        assert_eq!(m.channels[2].unaries[0], UnaryModel::quadratic(1.0, 0.9));
    }

    #[test]
    fn constant_mode_pools_unaries() {
        let m = super::super::assemble(&spec(DualMode::PiecewiseConstant, UnaryModel::quadratic(1.0, 0.3), 3))
            .unwrap();
        let c = &m.channels[0];
        let expect_lo = [0.0025, 0.04];
        let expect_hi = [0.0, 0.2025];
        for i in 0..2 {
            assert!((c.pooled_lower[i] - expect_lo[i]).abs() < 1e-12);
            assert!((c.pooled_upper[i] - expect_hi[i]).abs() < 1e-12);
        }
    }
}
