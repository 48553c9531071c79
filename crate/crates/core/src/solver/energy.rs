//! Energies and feasibility measures reported in the diagnostics.

use crate::models::{Blocks, ChannelModel};
use crate::par::{map_rows, Execution};
use crate::projections::check_jump;
use crate::regularizer::{EtaConjugate, Kappa};

use super::{DualFields, LiftedPrimal};

/// Discrete energy of a label field `u` (one value per pixel).
///
/// Data terms plus, for finite `κ`, `min(η(|Δu|), κ(|Δu|))` summed over the
/// forward edges; for `κ = ∞` the isotropic `η(|∇u|)` per pixel.
pub fn unlifted_energy(u: &[f64], model: &ChannelModel) -> f64 {
    let (w, h) = (model.width, model.height);
    assert_eq!(u.len(), w * h);
    let eta = &model.reg.eta;
    let kappa = &model.reg.kappa;
    let rows = map_rows(Execution::Sequential, h, |r| {
        let mut s = 0.0;
        for c in 0..w {
            let p = r * w + c;
            s += model.unaries[p].eval(u[p]);
            let dx = if c + 1 < w { u[p + 1] - u[p] } else { 0.0 };
            let dy = if r + 1 < h { u[p + w] - u[p] } else { 0.0 };
            if let Kappa::Infinite = kappa {
                s += eta.eval_norm(dx.hypot(dy));
            } else {
                for d in [dx, dy] {
                    s += eta.eval_norm(d.abs()).min(kappa.eval(d.abs()));
                }
            }
        }
        s
    });
    rows.iter().sum()
}

/// `-Σ φ_t(0) + Σ_i v_i (φ_t(i) - φ_t(i+1)) + h Σ_i ⟨∇v_i, φ_x(i)⟩`.
pub fn bilinear_value(model: &ChannelModel, primal: &LiftedPrimal, dual: &DualFields, exec: Execution) -> f64 {
    let (w, ht) = (model.width, model.height);
    let (k, ell) = (model.k(), model.grid.ell());
    let h = model.grid.h();
    let v = &primal.v;
    let rows = map_rows(exec, ht, |r| {
        let mut s = 0.0;
        for c in 0..w {
            let p = r * w + c;
            let phi_t = &dual.phi_t[p * ell..(p + 1) * ell];
            let phi_x = &dual.phi_x[p * 2 * k..(p + 1) * 2 * k];
            s -= phi_t[0];
            for i in 0..k {
                let vi = v[p * k + i];
                s += vi * (phi_t[i] - phi_t[i + 1]);
                let gx = if c + 1 < w { v[(p + 1) * k + i] - vi } else { 0.0 };
                let gy = if r + 1 < ht { v[(p + w) * k + i] - vi } else { 0.0 };
                s += h * (gx * phi_x[2 * i] + gy * phi_x[2 * i + 1]);
            }
        }
        s
    });
    rows.iter().sum()
}

/// Largest violation of the dual constraints over all pixels and intervals.
pub fn constraint_violation(model: &ChannelModel, dual: &DualFields, exec: Execution) -> f64 {
    let (k, ell) = (model.k(), model.grid.ell());
    let eta = &model.eta_conj;
    let w = model.width;
    let rows = map_rows(exec, model.height, |r| {
        let mut worst: f64 = 0.0;
        for c in 0..w {
            let p = r * w + c;
            let phi_t = &dual.phi_t[p * ell..(p + 1) * ell];
            let phi_x = &dual.phi_x[p * 2 * k..(p + 1) * 2 * k];
            for i in 0..k {
                let e = eta_value(eta, &phi_x[2 * i..2 * i + 2]);
                match model.blocks {
                    Blocks::Linear { .. } => {
                        let conj = model.local_conjugate(p, i, phi_t[i] - phi_t[i + 1]);
                        worst = worst.max(conj + e - phi_t[i]);
                    }
                    Blocks::Constant { .. } => {
                        worst = worst.max(e - phi_t[i] - model.pooled_lower[p * k + i]);
                        worst = worst.max(e - phi_t[i + 1] - model.pooled_upper[p * k + i]);
                    }
                }
            }
            if let Some(set) = &model.jump {
                worst = worst.max(check_jump(phi_x, 2, set, 0.0).max_violation);
            }
        }
        worst
    });
    rows.into_iter().fold(0.0, f64::max)
}

/// `η*` with the distance to its domain added instead of `+∞`.
fn eta_value(eta: &EtaConjugate, p: &[f64]) -> f64 {
    let n = p[0].hypot(p[1]);
    let inside = n.min(eta.radius);
    eta.quad * inside * inside + (n - inside)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::LabelGrid;
    use crate::models::{assemble, DualMode, ModelSpec, RegularizerSpec};

    fn model(width: usize, height: usize, f: &[f64], reg: RegularizerSpec) -> ChannelModel {
        let spec = ModelSpec::quadratic_data(
            width,
            height,
            1,
            f,
            1.0,
            LabelGrid::new(0.0, 1.0, 3).unwrap(),
            reg,
            DualMode::PiecewiseLinear,
        );
        assemble(&spec).unwrap().channels.remove(0)
    }

    #[test]
    fn constant_field_at_data_has_zero_energy() {
        let m = model(4, 3, &[0.4; 12], RegularizerSpec::mumford_shah(1.0, 0.5));
        assert_eq!(unlifted_energy(&[0.4; 12], &m), 0.0);
    }

    #[test]
    fn quadratic_model_matches_closed_form() {
        let f: Vec<f64> = (0..12).map(|p| (p as f64 * 0.7).sin().abs()).collect();
        let u: Vec<f64> = (0..12).map(|p| (p as f64 * 0.3).cos().abs()).collect();
        let lambda = 0.8;
        let m = model(4, 3, &f, RegularizerSpec::quadratic(lambda));
        let g = crate::ops::gradient(&u, 4, 3);
        let expect: f64 = u.iter().zip(&f).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
            + lambda * g.iter().map(|x| x * x).sum::<f64>();
        assert!((unlifted_energy(&u, &m) - expect).abs() < 1e-12);
    }

    #[test]
    fn single_jump_costs_lambda() {
        let f = [0.2, 0.2, 0.9, 0.9];
        let m = model(4, 1, &f, RegularizerSpec::mumford_shah(1e6, 0.3));
        assert!((unlifted_energy(&f, &m) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn lifted_pair_bilinear_value() {
        // feasible zero dual gives zero
        let m = model(2, 2, &[0.1, 0.5, 0.7, 0.2], RegularizerSpec::quadratic(1.0));
        let primal = LiftedPrimal {
            width: 2,
            height: 2,
            k: 2,
            v: vec![0.5; 8],
        };
        let dual = DualFields {
            phi_t: vec![0.0; 12],
            phi_x: vec![0.0; 16],
        };
        assert_eq!(bilinear_value(&m, &primal, &dual, Execution::Sequential), 0.0);
        assert!(constraint_violation(&m, &dual, Execution::Sequential) <= 1e-12);
    }
}
