//! Problem instances: which dual discretization, which data terms and which
//! regularizers, assembled into the per-pixel operator the solver iterates on.

mod assemble;
pub mod dataterm;

use thiserror::Error;

use crate::grid::LabelGrid;
use crate::regularizer::{Eta, Kappa, RegularizerError};
use crate::unaries::UnaryModel;

pub use assemble::{ChannelModel, LocalConj, Model};
pub(crate) use assemble::Blocks;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("expected {expected} unaries for a {width}×{height}×{channels} model, got {found}")]
    UnaryCount {
        expected: usize,
        found: usize,
        width: usize,
        height: usize,
        channels: usize,
    },
    #[error("image must have positive size")]
    EmptyImage,
    #[error("channel count must be at least 1")]
    NoChannels,
    #[error("sampled table at pixel {0} does not cover the extended label range")]
    TableCoverage(usize),
    #[error(transparent)]
    Regularizer(#[from] RegularizerError),
}

/// Smoothness term and jump penalty of the model.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularizerSpec {
    pub eta: Eta,
    pub kappa: Kappa,
}

impl RegularizerSpec {
    pub fn new(eta: Eta, kappa: Kappa) -> Self {
        Self { eta, kappa }
    }

    /// `α‖∇u‖²` with jumps of any height costing `λ`.
    pub fn mumford_shah(alpha: f64, lambda: f64) -> Self {
        Self::new(Eta::SquaredNorm { weight: alpha }, Kappa::ConstantJump { height: lambda })
    }

    /// `λ‖∇u‖²` without jumps.
    pub fn quadratic(lambda: f64) -> Self {
        Self::new(Eta::SquaredNorm { weight: lambda }, Kappa::Infinite)
    }

    /// Total variation with weight `w`.
    pub fn total_variation(weight: f64) -> Self {
        Self::new(Eta::Norm { weight }, Kappa::Linear { slope: weight })
    }

    pub fn validate(&self) -> Result<(), RegularizerError> {
        self.eta.validate()?;
        self.kappa.validate()
    }
}

/// Finite-dimensional representation of the dual variable `φ_t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DualMode {
    /// Piecewise constant on the dual cells: min-pooled unaries (baseline).
    PiecewiseConstant,
    /// Continuous piecewise linear: sublabel-accurate (proposed).
    PiecewiseLinear,
}

/// A complete problem description.
///
/// `unaries` holds one data term per pixel and channel, channel-major: the
/// unary of pixel `p` in channel `c` is `unaries[c * width * height + p]`.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub grid: LabelGrid,
    pub unaries: Vec<UnaryModel>,
    pub reg: RegularizerSpec,
    pub dual_mode: DualMode,
}

impl ModelSpec {
    /// Quadratic data term `weight (t - f(x))²` for every sample of `f`.
    pub fn quadratic_data(
        width: usize,
        height: usize,
        channels: usize,
        f: &[f64],
        weight: f64,
        grid: LabelGrid,
        reg: RegularizerSpec,
        dual_mode: DualMode,
    ) -> Self {
        let unaries = f.iter().map(|&t| UnaryModel::quadratic(weight, t)).collect();
        Self {
            width,
            height,
            channels,
            grid,
            unaries,
            reg,
            dual_mode,
        }
    }

    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.width == 0 || self.height == 0 {
            return Err(ModelError::EmptyImage);
        }
        if self.channels == 0 {
            return Err(ModelError::NoChannels);
        }
        let expected = self.pixels() * self.channels;
        if self.unaries.len() != expected {
            return Err(ModelError::UnaryCount {
                expected,
                found: self.unaries.len(),
                width: self.width,
                height: self.height,
                channels: self.channels,
            });
        }
        self.reg.validate()?;
        let (lo, hi) = (self.grid.ghost_low(), self.grid.ghost_high());
        for (p, u) in self.unaries.iter().enumerate() {
            if let UnaryModel::SampledTable(t) = u {
                if !t.covers(lo, hi) {
                    return Err(ModelError::TableCoverage(p));
                }
            }
        }
        Ok(())
    }
}

pub fn assemble(spec: &ModelSpec) -> Result<Model, ModelError> {
    spec.validate()?;
    Ok(assemble::build(spec))
}
