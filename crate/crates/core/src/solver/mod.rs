//! First-order primal-dual solver for the lifted saddle-point problem, and the
//! reference solvers used to validate it.

mod direct;
mod energy;
mod engine;
mod infconv;

use std::fmt;
use std::io::{self, Write};

use thiserror::Error;

pub use crate::par::Execution;
pub use direct::{direct_quadratic_solve, quadratic_energy, CgReport};
pub use energy::{bilinear_value, constraint_violation, unlifted_energy};
pub use engine::{operator_norm, run, run_channel};
pub use infconv::{infconv_reference_solve, InfconvConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("step sizes violate σ·τ·L² ≤ 1 (σ·τ·L² = {0})")]
    StepTooLarge(f64),
    #[error("invalid solver setting: {0}")]
    InvalidConfig(&'static str),
}

/// Choice of primal and dual step sizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    /// `τ = 1/(r L)`, `σ = r/L` from the estimated operator norm `L`.
    Auto { ratio: f64 },
    /// Explicit steps; checked against the estimated operator norm.
    Fixed { tau: f64, sigma: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub max_iters: usize,
    pub steps: StepRule,
    /// Over-relaxation `θ ∈ [0, 1]`.
    pub theta: f64,
    /// Relative primal change below which an iteration counts as stalled.
    pub stop_tol: f64,
    /// Diagnostics and stopping are evaluated every this many iterations.
    pub check_every: usize,
    /// Consecutive stalled checks required to stop.
    pub patience: usize,
    /// Seed of the power iteration start vector.
    pub seed: u64,
    pub execution: Execution,
    /// Record wall-clock time in the diagnostics (otherwise reported as 0).
    pub timing: bool,
    pub dykstra_tol: f64,
    pub dykstra_max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 20_000,
            steps: StepRule::Auto { ratio: 1.0 },
            theta: 1.0,
            stop_tol: 1e-6,
            check_every: 10,
            patience: 10,
            seed: 0,
            execution: Execution::default(),
            timing: false,
            dykstra_tol: 1e-9,
            dykstra_max_iter: 100,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(SolverError::InvalidConfig("theta must lie in [0, 1]"));
        }
        if self.check_every == 0 || self.patience == 0 {
            return Err(SolverError::InvalidConfig("check interval and patience must be positive"));
        }
        match self.steps {
            StepRule::Auto { ratio } if !(ratio > 0.0) => Err(SolverError::InvalidConfig("step ratio must be positive")),
            StepRule::Fixed { tau, sigma } if !(tau > 0.0 && sigma > 0.0) => {
                Err(SolverError::InvalidConfig("steps must be positive"))
            }
            _ => Ok(()),
        }
    }
}

/// Lifted coefficients of one channel, `k` per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedPrimal {
    pub width: usize,
    pub height: usize,
    pub k: usize,
    pub v: Vec<f64>,
}

impl LiftedPrimal {
    pub fn pixel(&self, p: usize) -> &[f64] {
        &self.v[p * self.k..(p + 1) * self.k]
    }

    /// Sublabel-accurate recovery `γ_1 + h Σ_i v_i` per pixel.
    pub fn recover(&self, grid: &crate::grid::LabelGrid) -> Vec<f64> {
        self.v.chunks_exact(self.k).map(|c| grid.recover_sublabel(c)).collect()
    }

    pub fn threshold(&self, grid: &crate::grid::LabelGrid, level: f64) -> Vec<f64> {
        self.v
            .chunks_exact(self.k)
            .map(|c| grid.recover_threshold(c, level))
            .collect()
    }
}

/// Dual coefficient fields of one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct DualFields {
    /// `ℓ` values per pixel.
    pub phi_t: Vec<f64>,
    /// `k` two-vectors per pixel.
    pub phi_x: Vec<f64>,
}

/// One line of the diagnostics stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub iteration: usize,
    pub bilinear_value: f64,
    pub unlifted_energy: f64,
    /// `|E(û) - bilinear value|`.
    pub gap_bound: f64,
    pub max_constraint_violation: f64,
    pub runtime_ms: u64,
}

impl Diagnostics {
    pub const CSV_HEADER: &'static str = "iter,bilinear,energy,gap,violation,ms";
}

impl fmt::Display for Diagnostics {
    /// One CSV record.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{:.12e},{:.12e},{:.6e},{:.6e},{}",
            self.iteration,
            self.bilinear_value,
            self.unlifted_energy,
            self.gap_bound,
            self.max_constraint_violation,
            self.runtime_ms
        )
    }
}

pub fn write_diagnostics_csv(history: &[Diagnostics], mut out: impl Write) -> io::Result<()> {
    writeln!(out, "{}", Diagnostics::CSV_HEADER)?;
    for d in history {
        writeln!(out, "{d}")?;
    }
    Ok(())
}

/// Result of solving one channel.
#[derive(Debug, Clone)]
pub struct ChannelSolution {
    pub primal: LiftedPrimal,
    pub dual: DualFields,
    pub history: Vec<Diagnostics>,
    pub converged: bool,
    pub iterations: usize,
    pub tau: f64,
    pub sigma: f64,
}
