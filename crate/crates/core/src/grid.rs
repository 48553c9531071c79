//! Label complexes on the range `Γ = [γ_1, γ_ℓ]` and the conversion between
//! scalar values and lifted coefficient vectors.
//!
//! The range is split into `k = ℓ - 1` equidistant intervals `Γ_i = [γ_i, γ_{i+1}]`.
//! A value `u` is represented by `k` coefficients in `[0, 1]`, coefficient `i`
//! being the mean of the subgraph indicator `[t < u]` over `Γ_i`.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("label count must be at least 2, got {0}")]
    TooFewLabels(usize),
    #[error("empty label range [{lo}, {hi}]")]
    EmptyRange { lo: f64, hi: f64 },
}

/// Primal and dual label complexes for an equidistant discretization of `Γ`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelGrid {
    labels: Vec<f64>,
    dual_nodes: Vec<f64>,
    h: f64,
}

impl LabelGrid {
    pub fn new(gamma_first: f64, gamma_last: f64, ell: usize) -> Result<Self, GridError> {
        if ell < 2 {
            return Err(GridError::TooFewLabels(ell));
        }
        if !(gamma_last > gamma_first) || !gamma_first.is_finite() || !gamma_last.is_finite() {
            return Err(GridError::EmptyRange {
                lo: gamma_first,
                hi: gamma_last,
            });
        }
        let k = ell - 1;
        let h = (gamma_last - gamma_first) / k as f64;
        let mut labels: Vec<f64> = (0..ell).map(|i| gamma_first + h * i as f64).collect();
        // pin the last label so Γ is reproduced exactly
        labels[k] = gamma_last;
        let dual_nodes = labels.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        Ok(Self {
            labels,
            dual_nodes,
            h,
        })
    }

    pub fn gamma_first(&self) -> f64 {
        self.labels[0]
    }

    pub fn gamma_last(&self) -> f64 {
        self.labels[self.labels.len() - 1]
    }

    /// Number of labels `ℓ`.
    pub fn ell(&self) -> usize {
        self.labels.len()
    }

    /// Number of intervals `k = ℓ - 1`.
    pub fn k(&self) -> usize {
        self.labels.len() - 1
    }

    /// Label spacing.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    /// Midpoints `γ*_i` of the intervals.
    pub fn dual_nodes(&self) -> &[f64] {
        &self.dual_nodes
    }

    /// `γ_0 = γ_1 - h`.
    pub fn ghost_low(&self) -> f64 {
        self.gamma_first() - self.h
    }

    /// `γ_{ℓ+1} = γ_ℓ + h`.
    pub fn ghost_high(&self) -> f64 {
        self.gamma_last() + self.h
    }

    /// Zero-based interval `[γ_i, γ_{i+1}]`.
    pub fn interval(&self, i: usize) -> (f64, f64) {
        (self.labels[i], self.labels[i + 1])
    }

    /// Length of the whole range.
    pub fn range(&self) -> f64 {
        self.gamma_last() - self.gamma_first()
    }

    pub fn clamp(&self, u: f64) -> f64 {
        u.clamp(self.gamma_first(), self.gamma_last())
    }

    /// Lifted coefficients of `u`; values outside `Γ` are clamped.
    pub fn lift(&self, u: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.k()];
        self.lift_into(u, &mut out);
        out
    }

    pub fn lift_into(&self, u: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.k());
        let u = self.clamp(u);
        for (i, c) in out.iter_mut().enumerate() {
            let (lo, hi) = self.interval(i);
            *c = if hi <= u {
                1.0
            } else if lo >= u {
                0.0
            } else {
                ((u - lo) / self.h).clamp(0.0, 1.0)
            };
        }
    }

    /// Inverse of [`lift`](Self::lift): `γ_1 + h Σ_i v_i`, clamped to `Γ`.
    pub fn recover_sublabel(&self, coefficients: &[f64]) -> f64 {
        debug_assert_eq!(coefficients.len(), self.k());
        let mass: f64 = coefficients.iter().sum();
        self.clamp(self.gamma_first() + self.h * mass)
    }

    /// Thresholding recovery `sup { t : v(t) > level }` of the piecewise-constant
    /// reconstruction, with `v = 1` left of `Γ`.
    pub fn recover_threshold(&self, coefficients: &[f64], level: f64) -> f64 {
        debug_assert_eq!(coefficients.len(), self.k());
        // v is 1 left of Γ, so the supremum is at least γ_1.
        let mut value = self.gamma_first();
        for (i, &c) in coefficients.iter().enumerate() {
            if c > level {
                value = self.labels[i + 1];
            }
        }
        value
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn five_labels_on_unit_range() {
        let g = LabelGrid::new(0.0, 1.0, 5).unwrap();
        assert_eq!(g.labels(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(g.h(), 0.25);
        assert_eq!(g.dual_nodes(), &[0.125, 0.375, 0.625, 0.875]);
        assert_eq!(g.k(), 4);
    }

    #[test]
    fn minimal_grid() {
        let g = LabelGrid::new(0.0, 1.0, 2).unwrap();
        assert_eq!(g.labels(), &[0.0, 1.0]);
        assert_eq!(g.k(), 1);
        assert_eq!(g.h(), 1.0);
    }

    #[test]
    fn ghost_nodes() {
        let g = LabelGrid::new(-1.0, 3.0, 5).unwrap();
        assert_eq!(g.h(), 1.0);
        assert_eq!(g.ghost_low(), -2.0);
        assert_eq!(g.ghost_high(), 4.0);
    }

    #[test]
    fn rejects_bad_discretizations() {
        assert_eq!(LabelGrid::new(0.0, 1.0, 1), Err(GridError::TooFewLabels(1)));
        assert!(matches!(
            LabelGrid::new(1.0, 1.0, 3),
            Err(GridError::EmptyRange { .. })
        ));
        assert!(LabelGrid::new(2.0, 1.0, 3).is_err());
    }

    #[test]
    fn lift_sublabel_pattern() {
        // u between γ_3 and γ_4 with interpolation factor 0.4
        let g = LabelGrid::new(0.0, 1.0, 5).unwrap();
        let v = g.lift(0.5 + 0.4 * 0.25);
        let expect = [1.0, 1.0, 0.4, 0.0];
        for (a, b) in v.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(g.lift(0.0), vec![0.0; 4]);
        assert_eq!(g.lift(1.0), vec![1.0; 4]);
        // lenient clamping
        assert_eq!(g.lift(-3.0), vec![0.0; 4]);
        assert_eq!(g.lift(7.0), vec![1.0; 4]);
    }

    #[test]
    fn recover_sublabel_values() {
        let g = LabelGrid::new(0.0, 1.0, 5).unwrap();
        assert!((g.recover_sublabel(&[1.0, 1.0, 0.4, 0.0]) - 0.6).abs() < 1e-12);
        assert_eq!(g.recover_sublabel(&[0.0; 4]), 0.0);
        assert_eq!(g.recover_sublabel(&[1.0; 4]), 1.0);
    }

    #[test]
    fn recover_threshold_values() {
        let g = LabelGrid::new(0.0, 1.0, 5).unwrap();
        assert_eq!(g.recover_threshold(&[1.0, 1.0, 0.0, 0.0], 0.5), 0.5);
        assert_eq!(g.recover_threshold(&[1.0, 1.0, 0.4, 0.0], 0.5), 0.5);
        assert_eq!(g.recover_threshold(&[0.0; 4], 0.5), 0.0);
    }

    #[test]
    fn threshold_matches_direct_scan() {
        // scan the piecewise-constant reconstruction on a fine grid
        let g = LabelGrid::new(0.0, 1.0, 5).unwrap();
        let v = [1.0, 1.0, 0.4, 0.0];
        let mut best = g.gamma_first();
        for s in 1..=10_000 {
            let t = s as f64 / 10_000.0;
            // t ∈ (γ_i, γ_{i+1}]
            let i = ((t / g.h()).ceil() as usize - 1).min(g.k() - 1);
            if v[i] > 0.5 {
                best = t;
            }
        }
        assert!((g.recover_threshold(&v, 0.5) - best).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn lift_recover_identity(ell in 2usize..=64, lo in -5.0f64..5.0, width in 0.1f64..10.0,
                                 fracs in proptest::collection::vec(0.0f64..=1.0, 1000)) {
            let g = LabelGrid::new(lo, lo + width, ell).unwrap();
            for f in fracs {
                let u = lo + f * width;
                let v = g.lift(u);
                prop_assert!((g.recover_sublabel(&v) - u).abs() < 1e-12 * (1.0 + u.abs()).max(width));
                prop_assert!(v.windows(2).all(|w| w[0] >= w[1]));
                prop_assert!(v.iter().all(|&c| (0.0..=1.0).contains(&c)));
            }
        }

        #[test]
        fn refinement_consistency(ell in 2usize..=32, f in 0.0f64..=1.0) {
            let coarse = LabelGrid::new(0.0, 2.0, ell).unwrap();
            let fine = LabelGrid::new(0.0, 2.0, 2 * ell - 1).unwrap();
            let u = 2.0 * f;
            let a = coarse.recover_sublabel(&coarse.lift(u));
            let b = fine.recover_sublabel(&fine.lift(u));
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn threshold_equals_sublabel_on_binary(ell in 2usize..=20, j in 0usize..20) {
            let g = LabelGrid::new(0.0, 1.0, ell).unwrap();
            let j = j % (g.k() + 1);
            let v: Vec<f64> = (0..g.k()).map(|i| if i < j { 1.0 } else { 0.0 }).collect();
            prop_assert_eq!(g.recover_threshold(&v, 0.5), g.recover_sublabel(&v));
        }
    }
}
