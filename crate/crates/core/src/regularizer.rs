//! Smooth regularizers `η` and concave jump penalties `κ`.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegularizerError {
    #[error("regularizer weight must be positive, got {0}")]
    NonPositiveWeight(f64),
    #[error("jump table must start at (0, 0)")]
    TableOrigin,
    #[error("jump table positions must be strictly increasing")]
    TableNotIncreasing,
    #[error("jump table is not concave at sample {0}")]
    NotConcave(usize),
    #[error("jump table must be positive away from zero (sample {0})")]
    NotPositive(usize),
}

/// Convex, isotropic smoothness term acting on `∇u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Eta {
    /// `α ‖g‖²`.
    SquaredNorm { weight: f64 },
    /// `w ‖g‖`.
    Norm { weight: f64 },
    /// `w · huber_ε(‖g‖)` with `huber_ε(r) = r²/(2ε)` for `r ≤ ε`, `r - ε/2` beyond.
    Huber { weight: f64, threshold: f64 },
}

impl Eta {
    pub fn validate(&self) -> Result<(), RegularizerError> {
        let w = match *self {
            Eta::SquaredNorm { weight } | Eta::Norm { weight } => weight,
            Eta::Huber { weight, threshold } => {
                if !(threshold > 0.0) {
                    return Err(RegularizerError::NonPositiveWeight(threshold));
                }
                weight
            }
        };
        if w > 0.0 {
            Ok(())
        } else {
            Err(RegularizerError::NonPositiveWeight(w))
        }
    }

    pub fn conjugate(&self) -> EtaConjugate {
        match *self {
            Eta::SquaredNorm { weight } => EtaConjugate {
                quad: 0.25 / weight,
                radius: f64::INFINITY,
            },
            Eta::Norm { weight } => EtaConjugate {
                quad: 0.0,
                radius: weight,
            },
            Eta::Huber { weight, threshold } => EtaConjugate {
                quad: threshold / (2.0 * weight),
                radius: weight,
            },
        }
    }

    /// `η(g)` as a function of `‖g‖`.
    pub fn eval_norm(&self, norm: f64) -> f64 {
        self.conjugate().primal_value(norm)
    }

    /// One-homogeneous regularizers have an indicator function as conjugate.
    pub fn is_one_homogeneous(&self) -> bool {
        matches!(self, Eta::Norm { .. })
    }
}

/// Radial conjugate `η*(p) = quad ‖p‖² + δ{‖p‖ ≤ radius}`.
///
/// Every [`Eta`] variant, and its infimal convolution with `γ‖·‖`, has a
/// conjugate of this form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaConjugate {
    pub quad: f64,
    pub radius: f64,
}

impl EtaConjugate {
    /// `+∞` outside the domain.
    pub fn eval_norm(&self, norm: f64) -> f64 {
        if norm > self.radius {
            f64::INFINITY
        } else {
            self.quad * norm * norm
        }
    }

    pub fn eval(&self, p: &[f64]) -> f64 {
        self.eval_norm(norm(p))
    }

    /// Conjugate of `η* + δ{‖·‖ ≤ γ}`, i.e. `η □ γ‖·‖`.
    pub fn capped(&self, gamma: f64) -> Self {
        Self {
            quad: self.quad,
            radius: self.radius.min(gamma),
        }
    }

    /// The primal function `(η*)*` evaluated at a gradient of norm `norm`.
    pub fn primal_value(&self, norm: f64) -> f64 {
        if self.quad <= 0.0 {
            return self.radius * norm;
        }
        let p = (norm / (2.0 * self.quad)).min(self.radius);
        norm * p - self.quad * p * p
    }

    /// Proximal map of `σ η*` applied in place.
    pub fn prox_in_place(&self, sigma: f64, p: &mut [f64]) {
        let shrink = 1.0 / (1.0 + 2.0 * sigma * self.quad);
        let n = norm(p) * shrink;
        let scale = if n > self.radius { shrink * self.radius / n } else { shrink };
        p.iter_mut().for_each(|x| *x *= scale);
    }

    /// Euclidean projection of `(p, b)` onto `epi(η*)`, in place.
    pub fn project_epi(&self, p: &mut [f64], b: &mut f64) {
        let s = norm(p);
        let (s_new, b_new) = crate::projections::project_radial_epi(s, *b, self.quad, self.radius);
        if s > 0.0 {
            let scale = s_new / s;
            p.iter_mut().for_each(|x| *x *= scale);
        }
        *b = b_new;
    }
}

pub(crate) fn norm(p: &[f64]) -> f64 {
    p.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Concave jump penalty `κ : [0, ∞) → [0, ∞]` with `κ(a) = 0 ⇔ a = 0`.
#[derive(Debug, Clone, PartialEq)]
pub enum Kappa {
    /// `κ(a) = slope · a` (total variation).
    Linear { slope: f64 },
    /// `κ(a) = λ [a > 0]` (Mumford-Shah).
    ConstantJump { height: f64 },
    /// `κ(a) = min(slope · a, cap)`.
    TruncatedLinear { slope: f64, cap: f64 },
    Table(ConcaveTable),
    /// `κ(a) = +∞` for `a > 0`: jumps are forbidden, no jump constraints.
    Infinite,
}

impl Kappa {
    pub fn eval(&self, a: f64) -> f64 {
        let a = a.abs();
        if a == 0.0 {
            return 0.0;
        }
        match self {
            Kappa::Linear { slope } => slope * a,
            Kappa::ConstantJump { height } => *height,
            Kappa::TruncatedLinear { slope, cap } => (slope * a).min(*cap),
            Kappa::Table(t) => t.eval(a),
            Kappa::Infinite => f64::INFINITY,
        }
    }

    pub fn validate(&self) -> Result<(), RegularizerError> {
        match *self {
            Kappa::Linear { slope } => positive(slope),
            Kappa::ConstantJump { height } => positive(height),
            Kappa::TruncatedLinear { slope, cap } => positive(slope).and(positive(cap)),
            Kappa::Table(_) | Kappa::Infinite => Ok(()),
        }
    }
}

fn positive(x: f64) -> Result<(), RegularizerError> {
    if x > 0.0 {
        Ok(())
    } else {
        Err(RegularizerError::NonPositiveWeight(x))
    }
}

/// User-supplied `κ`, linearly interpolated between samples and constant past
/// the last one.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcaveTable {
    a: Vec<f64>,
    values: Vec<f64>,
}

impl ConcaveTable {
    pub fn new(a: Vec<f64>, values: Vec<f64>) -> Result<Self, RegularizerError> {
        assert_eq!(a.len(), values.len());
        if a.is_empty() || a[0] != 0.0 || values[0] != 0.0 {
            return Err(RegularizerError::TableOrigin);
        }
        if a.windows(2).any(|w| w[1] <= w[0]) {
            return Err(RegularizerError::TableNotIncreasing);
        }
        if let Some(j) = values.iter().skip(1).position(|&v| !(v > 0.0)) {
            return Err(RegularizerError::NotPositive(j + 1));
        }
        let slopes: Vec<f64> = a
            .windows(2)
            .zip(values.windows(2))
            .map(|(x, y)| (y[1] - y[0]) / (x[1] - x[0]))
            .collect();
        // discrete second differences ≤ 0; the constant extension needs a
        // nonnegative final slope
        for (j, w) in slopes.windows(2).enumerate() {
            if w[1] > w[0] + 1e-12 * w[0].abs().max(1.0) {
                return Err(RegularizerError::NotConcave(j + 1));
            }
        }
        if slopes.last().is_some_and(|&s| s < 0.0) {
            return Err(RegularizerError::NotConcave(a.len() - 1));
        }
        Ok(Self { a, values })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.a.len();
        if x >= self.a[n - 1] {
            return self.values[n - 1];
        }
        let j = self.a.partition_point(|&s| s <= x);
        let w = (x - self.a[j - 1]) / (self.a[j] - self.a[j - 1]);
        (1.0 - w) * self.values[j - 1] + w * self.values[j]
    }
}
