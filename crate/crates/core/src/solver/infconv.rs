//! Unlifted reference solver for two-label models.
//!
//! With two labels the lifted problem is equivalent to the convex problem
//! `Σ ρ**(u) + Σ H(∇u)` where `H = η □ (κ(h)/h)|·|`. This solves that problem
//! with primal-dual iterations on `u` directly.

use crate::models::ChannelModel;
use crate::ops::{divergence, gradient};
use crate::regularizer::EtaConjugate;
use crate::unaries::{EnvelopeTable, UnaryModel};

use super::SolverError;

#[derive(Debug, Clone, PartialEq)]
pub struct InfconvConfig {
    pub max_iters: usize,
    /// Relative change of `u` below which an iteration counts as stalled.
    pub stop_tol: f64,
    pub patience: usize,
    /// Samples of the tabulated convex envelope for non-quadratic unaries.
    pub envelope_samples: usize,
}

impl Default for InfconvConfig {
    fn default() -> Self {
        Self {
            max_iters: 200_000,
            stop_tol: 1e-11,
            patience: 20,
            envelope_samples: 40_001,
        }
    }
}

/// Solves the equivalent unlifted problem of a channel with `ℓ = 2`.
pub fn infconv_reference_solve(model: &ChannelModel, config: &InfconvConfig) -> Result<Vec<f64>, SolverError> {
    let grid = &model.grid;
    if grid.ell() != 2 {
        return Err(SolverError::InvalidConfig("reference solver needs exactly two labels"));
    }
    let (w, ht) = (model.width, model.height);
    let n = w * ht;
    let (lo, hi) = grid.interval(0);
    let h = grid.h();
    let gamma = model.reg.kappa.eval(h) / h;
    let dual: EtaConjugate = model.eta_conj.capped(gamma);
    let envelopes: Vec<Option<EnvelopeTable>> = model
        .unaries
        .iter()
        .map(|u| match u {
            UnaryModel::Quadratic { .. } => None,
            _ => Some(EnvelopeTable::new(u, 0, grid, config.envelope_samples)),
        })
        .collect();

    // ‖∇‖² ≤ 8
    let step = 0.99 / 8f64.sqrt();
    let (tau, sigma) = (step, step);
    let mut u: Vec<f64> = model.unaries.iter().map(|r| r.argmin_on(lo, hi)).collect();
    let mut ubar = u.clone();
    let mut p = vec![0.0; 2 * n];
    let mut stalled = 0;
    for _ in 0..config.max_iters {
        let g = gradient(&ubar, w, ht);
        for (pi, gi) in p.chunks_exact_mut(2).zip(g.chunks_exact(2)) {
            pi[0] += sigma * gi[0];
            pi[1] += sigma * gi[1];
            dual.prox_in_place(sigma, pi);
        }
        let div = divergence(&p, w, ht);
        let (mut dx2, mut x2) = (0.0, 0.0);
        for j in 0..n {
            let z = u[j] + tau * div[j];
            let new = match (&model.unaries[j], &envelopes[j]) {
                (UnaryModel::Quadratic { weight, target }, _) => {
                    ((z + 2.0 * tau * weight * target) / (1.0 + 2.0 * tau * weight)).clamp(lo, hi)
                }
                (_, Some(env)) => env.prox(z, tau),
                _ => unreachable!(),
            };
            dx2 += (new - u[j]) * (new - u[j]);
            x2 += new * new;
            ubar[j] = 2.0 * new - u[j];
            u[j] = new;
        }
        if dx2.sqrt() < config.stop_tol * x2.sqrt().max(1e-12) {
            stalled += 1;
            if stalled >= config.patience {
                break;
            }
        } else {
            stalled = 0;
        }
    }
    Ok(u)
}
