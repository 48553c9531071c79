//! Pointwise data terms `ρ(x, ·)`.
//!
//! Three representations are supported: a weighted quadratic, a sum of
//! truncated quadratics `Σ_m min{ν_m, α_m (t - f_m)²}` and a sampled table that
//! is interpreted as its piecewise-linear interpolant.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::grid::LabelGrid;

#[derive(Debug, Error)]
pub enum UnaryError {
    #[error("sampled table needs at least two samples")]
    TooFewSamples,
    #[error("table sample positions must be strictly increasing (index {0})")]
    NotIncreasing(usize),
    #[error("table contains a non-finite value at index {0}")]
    NonFinite(usize),
    #[error("sampled tables have no exact quadratic pieces")]
    NoExactPieces,
    #[error("truncated quadratic term {0} has a non-positive weight")]
    BadTerm(usize),
    #[error("table file is truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("t = {t} lies outside interval [{lo}, {hi}]")]
    OutsideInterval { t: f64, lo: f64, hi: f64 },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// One summand `min{ν, α (t - f)²}` of a truncated quadratic mixture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedTerm {
    pub nu: f64,
    pub alpha: f64,
    pub f: f64,
}

impl TruncatedTerm {
    pub fn new(nu: f64, alpha: f64, f: f64) -> Self {
        Self { nu, alpha, f }
    }

    fn radius(&self) -> f64 {
        (self.nu / self.alpha).sqrt()
    }

    fn eval(&self, t: f64) -> f64 {
        let d = t - self.f;
        (self.alpha * d * d).min(self.nu)
    }
}

/// A function tabulated at increasing sample positions, linearly interpolated
/// in between and held constant outside the sampled range.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledTable {
    t: Vec<f64>,
    values: Vec<f64>,
}

impl SampledTable {
    pub fn new(t: Vec<f64>, values: Vec<f64>) -> Result<Self, UnaryError> {
        assert_eq!(t.len(), values.len(), "sample and value counts differ");
        if t.len() < 2 {
            return Err(UnaryError::TooFewSamples);
        }
        for (i, (&ti, &vi)) in t.iter().zip(&values).enumerate() {
            if !ti.is_finite() || !vi.is_finite() {
                return Err(UnaryError::NonFinite(i));
            }
            if i > 0 && ti <= t[i - 1] {
                return Err(UnaryError::NotIncreasing(i));
            }
        }
        Ok(Self { t, values })
    }

    /// Tabulates `f` at `samples` equidistant points on `[lo, hi]`.
    pub fn tabulate(lo: f64, hi: f64, samples: usize, f: impl Fn(f64) -> f64) -> Self {
        assert!(samples >= 2 && hi > lo);
        let t: Vec<f64> = (0..samples)
            .map(|s| lo + (hi - lo) * s as f64 / (samples - 1) as f64)
            .collect();
        let values = t.iter().map(|&x| f(x)).collect();
        Self { t, values }
    }

    pub fn samples(&self) -> &[f64] {
        &self.t
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn covers(&self, lo: f64, hi: f64) -> bool {
        self.t[0] <= lo && *self.t.last().unwrap() >= hi
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.t.len();
        if x <= self.t[0] {
            return self.values[0];
        }
        if x >= self.t[n - 1] {
            return self.values[n - 1];
        }
        let j = self.t.partition_point(|&s| s <= x);
        let (t0, t1) = (self.t[j - 1], self.t[j]);
        let w = (x - t0) / (t1 - t0);
        (1.0 - w) * self.values[j - 1] + w * self.values[j]
    }

    /// Vertices of the interpolant restricted to `[lo, hi]`, endpoints included.
    pub fn vertices_on(&self, lo: f64, hi: f64) -> Vec<(f64, f64)> {
        let mut out = vec![(lo, self.eval(lo))];
        for (&t, &v) in self.t.iter().zip(&self.values) {
            if t > lo && t < hi {
                out.push((t, v));
            }
        }
        if hi > lo {
            out.push((hi, self.eval(hi)));
        }
        out
    }

    /// Lower convex hull of the interpolant on `[lo, hi]`, as vertices with
    /// increasing `t`.
    pub fn lower_hull_on(&self, lo: f64, hi: f64) -> Vec<(f64, f64)> {
        lower_convex_hull(&self.vertices_on(lo, hi))
    }

    /// Serializes as a little-endian sample count followed by `(t, value)` pairs.
    pub fn write_to(&self, mut w: impl Write) -> io::Result<()> {
        w.write_all(&(self.t.len() as u64).to_le_bytes())?;
        for (&t, &v) in self.t.iter().zip(&self.values) {
            w.write_all(&t.to_le_bytes())?;
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self, UnaryError> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, UnaryError> {
        if bytes.len() < 8 {
            return Err(UnaryError::Truncated {
                expected: 8,
                found: bytes.len(),
            });
        }
        let count = u64::from_le_bytes(bytes[..8].try_into().unwrap()) as usize;
        let expected = count
            .checked_mul(16)
            .and_then(|n| n.checked_add(8))
            .unwrap_or(usize::MAX);
        if bytes.len() < expected {
            return Err(UnaryError::Truncated {
                expected,
                found: bytes.len(),
            });
        }
        let read = |off: usize| f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
        let mut t = Vec::with_capacity(count);
        let mut values = Vec::with_capacity(count);
        for s in 0..count {
            t.push(read(8 + 16 * s));
            values.push(read(16 + 16 * s));
        }
        Self::new(t, values)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, UnaryError> {
        Self::read_from(fs::File::open(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), UnaryError> {
        let mut f = io::BufWriter::new(fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()?;
        Ok(())
    }
}

/// Andrew's monotone chain, lower half only. Input sorted by `t`.
pub(crate) fn lower_convex_hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(points.len());
    for &p in points {
        while hull.len() >= 2 {
            let (o, a) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (a.0 - o.0) * (p.1 - o.1) - (a.1 - o.1) * (p.0 - o.0);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull
}

/// `a t² + b t + c` restricted to `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadPiece {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub lo: f64,
    pub hi: f64,
}

impl QuadPiece {
    pub fn new(a: f64, b: f64, c: f64, lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi);
        Self { a, b, c, lo, hi }
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.a * t + self.b) * t + self.c
    }

    pub fn derivative(&self, t: f64) -> f64 {
        2.0 * self.a * t + self.b
    }

    pub fn argmin(&self) -> f64 {
        if self.a > 0.0 {
            (-self.b / (2.0 * self.a)).clamp(self.lo, self.hi)
        } else if self.eval(self.lo) <= self.eval(self.hi) {
            self.lo
        } else {
            self.hi
        }
    }

    pub fn min_value(&self) -> f64 {
        self.eval(self.argmin())
    }

    /// Maximizer of `s t - q(t)` over the piece's interval.
    pub fn conjugate_argmax(&self, slope: f64) -> f64 {
        if self.a > 0.0 {
            ((slope - self.b) / (2.0 * self.a)).clamp(self.lo, self.hi)
        } else if slope * self.lo - self.eval(self.lo) >= slope * self.hi - self.eval(self.hi) {
            self.lo
        } else {
            self.hi
        }
    }

    /// `q*(s) = sup_{t ∈ [lo, hi]} s t - q(t)`.
    pub fn conjugate(&self, slope: f64) -> f64 {
        let t = self.conjugate_argmax(slope);
        slope * t - self.eval(t)
    }

    /// Re-expresses the piece in the interval-local coordinate `t = origin + scale · s`.
    pub fn to_local(&self, origin: f64, scale: f64) -> QuadPiece {
        QuadPiece {
            a: self.a * scale * scale,
            b: (2.0 * self.a * origin + self.b) * scale,
            c: (self.a * origin + self.b) * origin + self.c,
            lo: (self.lo - origin) / scale,
            hi: (self.hi - origin) / scale,
        }
    }
}

/// Data term of a single pixel.
#[derive(Debug, Clone, PartialEq)]
pub enum UnaryModel {
    /// `λ_d (t - f)²`.
    Quadratic { weight: f64, target: f64 },
    /// `Σ_m min{ν_m, α_m (t - f_m)²}`.
    TruncatedQuadraticMixture(Vec<TruncatedTerm>),
    SampledTable(SampledTable),
}

impl UnaryModel {
    pub fn quadratic(weight: f64, target: f64) -> Self {
        UnaryModel::Quadratic { weight, target }
    }

    pub fn mixture(terms: Vec<TruncatedTerm>) -> Result<Self, UnaryError> {
        for (i, t) in terms.iter().enumerate() {
            if !(t.nu > 0.0 && t.alpha > 0.0) || !t.f.is_finite() {
                return Err(UnaryError::BadTerm(i));
            }
        }
        Ok(UnaryModel::TruncatedQuadraticMixture(terms))
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            UnaryModel::Quadratic { weight, target } => weight * (t - target) * (t - target),
            UnaryModel::TruncatedQuadraticMixture(terms) => terms.iter().map(|m| m.eval(t)).sum(),
            UnaryModel::SampledTable(table) => table.eval(t),
        }
    }

    /// Quadratic pieces whose pointwise minimum is `ρ` on `[lo, hi]`.
    pub fn pieces_on(&self, lo: f64, hi: f64) -> Result<Vec<QuadPiece>, UnaryError> {
        match self {
            UnaryModel::Quadratic { weight, target } => Ok(vec![QuadPiece::new(
                *weight,
                -2.0 * weight * target,
                weight * target * target,
                lo,
                hi,
            )]),
            UnaryModel::TruncatedQuadraticMixture(terms) => Ok(mixture_pieces(terms, lo, hi)),
            UnaryModel::SampledTable(_) => Err(UnaryError::NoExactPieces),
        }
    }

    pub fn pieces_on_interval(&self, i: usize, grid: &LabelGrid) -> Result<Vec<QuadPiece>, UnaryError> {
        let (lo, hi) = grid.interval(i);
        self.pieces_on(lo, hi)
    }

    /// `inf_{t ∈ [lo, hi]} ρ(t)`.
    pub fn inf_on(&self, lo: f64, hi: f64) -> f64 {
        match self {
            UnaryModel::SampledTable(table) => table
                .vertices_on(lo, hi)
                .into_iter()
                .map(|(_, v)| v)
                .fold(f64::INFINITY, f64::min),
            _ => self
                .pieces_on(lo, hi)
                .expect("analytic unary")
                .iter()
                .map(QuadPiece::min_value)
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// A minimizer of `ρ` on `[lo, hi]`.
    pub fn argmin_on(&self, lo: f64, hi: f64) -> f64 {
        match self {
            UnaryModel::SampledTable(table) => table
                .vertices_on(lo, hi)
                .into_iter()
                .fold((lo, f64::INFINITY), |best, (t, v)| if v < best.1 { (t, v) } else { best })
                .0,
            _ => self
                .pieces_on(lo, hi)
                .expect("analytic unary")
                .iter()
                .map(|p| (p.argmin(), p.min_value()))
                .fold((lo, f64::INFINITY), |best, c| if c.1 < best.1 { c } else { best })
                .0,
        }
    }

    /// Min-pooled unaries over the dual cells.
    pub fn min_pool(&self, grid: &LabelGrid) -> MinPool {
        let k = grid.k();
        let mut lower = Vec::with_capacity(k);
        let mut upper = Vec::with_capacity(k);
        for i in 0..k {
            let (lo, hi) = grid.interval(i);
            let mid = grid.dual_nodes()[i];
            lower.push(self.inf_on(lo, mid));
            upper.push(self.inf_on(mid, hi));
        }
        MinPool::from_halves(lower, upper)
    }

    /// `sup_{t ∈ [lo, hi]} s t - ρ(t)`.
    pub fn conjugate_on(&self, lo: f64, hi: f64, slope: f64) -> f64 {
        match self {
            UnaryModel::SampledTable(table) => table
                .vertices_on(lo, hi)
                .into_iter()
                .map(|(t, v)| slope * t - v)
                .fold(f64::NEG_INFINITY, f64::max),
            _ => self
                .pieces_on(lo, hi)
                .expect("analytic unary")
                .iter()
                .map(|p| p.conjugate(slope))
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// `ρ_i*(slope)` with `ρ_i = ρ + δ{t ∈ Γ_i}`.
    pub fn conjugate_on_interval(&self, i: usize, grid: &LabelGrid, slope: f64) -> f64 {
        let (lo, hi) = grid.interval(i);
        self.conjugate_on(lo, hi, slope)
    }

    /// Upper bound on `|ρ'|` over `[lo, hi]`.
    pub fn slope_bound(&self, lo: f64, hi: f64) -> f64 {
        match self {
            UnaryModel::SampledTable(table) => {
                let v = table.vertices_on(lo, hi);
                v.windows(2)
                    .map(|w| ((w[1].1 - w[0].1) / (w[1].0 - w[0].0)).abs())
                    .fold(0.0, f64::max)
            }
            _ => self
                .pieces_on(lo, hi)
                .expect("analytic unary")
                .iter()
                .map(|p| p.derivative(p.lo).abs().max(p.derivative(p.hi).abs()))
                .fold(0.0, f64::max),
        }
    }

    /// Convex envelope `ρ_i**(t)` on `Γ_i`, evaluated as a dense biconjugate.
    ///
    /// This is a test oracle; the solver never calls it.
    pub fn convex_envelope_eval(&self, i: usize, grid: &LabelGrid, t: f64) -> Result<f64, UnaryError> {
        let (lo, hi) = grid.interval(i);
        let tol = 1e-12 * grid.range();
        if t < lo - tol || t > hi + tol {
            return Err(UnaryError::OutsideInterval { t, lo, hi });
        }
        let t = t.clamp(lo, hi);
        let conj_fn = conjugate_fn(self, lo, hi);
        let slopes = envelope_slopes(self, lo, hi);
        let conj: Vec<f64> = slopes.iter().map(|&s| conj_fn(s)).collect();
        let j = grid_argmax(&slopes, &conj, t, 0);
        Ok(biconjugate_at(&conj_fn, &slopes, &conj, t, j))
    }
}

/// `ρ*` on `[lo, hi]` with the pieces or vertices computed once.
fn conjugate_fn(unary: &UnaryModel, lo: f64, hi: f64) -> impl Fn(f64) -> f64 {
    let (pieces, vertices) = match unary {
        UnaryModel::SampledTable(table) => (Vec::new(), table.vertices_on(lo, hi)),
        _ => (unary.pieces_on(lo, hi).expect("analytic unary"), Vec::new()),
    };
    move |s: f64| {
        let a = pieces.iter().map(|p| p.conjugate(s)).fold(f64::NEG_INFINITY, f64::max);
        vertices.iter().map(|&(t, v)| s * t - v).fold(a, f64::max)
    }
}

/// Slope grid for the biconjugate oracle: 4096 slopes on `[-L, L]` with `L`
/// four times the slope bound.
fn envelope_slopes(unary: &UnaryModel, lo: f64, hi: f64) -> Vec<f64> {
    const SLOPES: usize = 4096;
    let bound = 4.0 * unary.slope_bound(lo, hi).max(1e-6);
    (0..SLOPES)
        .map(|j| -bound + 2.0 * bound * j as f64 / (SLOPES - 1) as f64)
        .collect()
}

/// First maximizer of `s t - ρ*(s)` over the slope grid at or after `from`.
///
/// The objective is concave in `s`, so walking up from any index left of the
/// maximizer finds it; the maximizer is nondecreasing in `t`.
fn grid_argmax(slopes: &[f64], conj: &[f64], t: f64, from: usize) -> usize {
    let value = |j: usize| slopes[j] * t - conj[j];
    let mut j = from;
    while j + 1 < slopes.len() && value(j + 1) > value(j) {
        j += 1;
    }
    j
}

/// `sup_s s t - ρ*(s)`, refined by golden-section search in the bracket
/// around the best grid slope `j`.
fn biconjugate_at(conj_fn: &dyn Fn(f64) -> f64, slopes: &[f64], conj: &[f64], t: f64, j: usize) -> f64 {
    let best = slopes[j] * t - conj[j];
    let f = |s: f64| s * t - conj_fn(s);
    let mut a = slopes[j.saturating_sub(1)];
    let mut b = slopes[(j + 1).min(slopes.len() - 1)];
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - ratio * (b - a);
    let mut x2 = a + ratio * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    // the bracket spans two grid cells; 50 rounds reach rounding level
    for _ in 0..50 {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + ratio * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - ratio * (b - a);
            f1 = f(x1);
        }
    }
    best.max(f1).max(f2)
}

/// Tabulated convex envelope `ρ_i**` on one interval, linearly interpolated.
///
/// Built from the same biconjugate as [`UnaryModel::convex_envelope_eval`];
/// used where the oracle needs many evaluations.
#[derive(Debug, Clone)]
pub struct EnvelopeTable {
    lo: f64,
    hi: f64,
    values: Vec<f64>,
}

impl EnvelopeTable {
    pub fn new(unary: &UnaryModel, i: usize, grid: &LabelGrid, samples: usize) -> Self {
        let (lo, hi) = grid.interval(i);
        let conj_fn = conjugate_fn(unary, lo, hi);
        let slopes = envelope_slopes(unary, lo, hi);
        let conj: Vec<f64> = slopes.iter().map(|&s| conj_fn(s)).collect();
        let mut at = 0;
        let values = (0..samples)
            .map(|j| {
                let t = lo + (hi - lo) * j as f64 / (samples - 1) as f64;
                at = grid_argmax(&slopes, &conj, t, at);
                biconjugate_at(&conj_fn, &slopes, &conj, t, at)
            })
            .collect();
        Self { lo, hi, values }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.values.len();
        let x = ((t - self.lo) / (self.hi - self.lo)).clamp(0.0, 1.0) * (n - 1) as f64;
        let j = (x.floor() as usize).min(n - 2);
        let w = x - j as f64;
        (1.0 - w) * self.values[j] + w * self.values[j + 1]
    }

    /// `argmin_t env(t) + (t - z)²/(2τ)` over the interval, exact for the
    /// interpolated table.
    pub fn prox(&self, z: f64, tau: f64) -> f64 {
        let n = self.values.len();
        let dt = (self.hi - self.lo) / (n - 1) as f64;
        let node = |j: usize| self.lo + dt * j as f64;
        let slope = |j: usize| (self.values[j + 1] - self.values[j]) / dt;
        // first segment whose right end already passes z; t + τ·env' is monotone
        let (mut a, mut b) = (0, n - 1);
        while a < b {
            let m = (a + b) / 2;
            if node(m + 1) + tau * slope(m) >= z {
                b = m;
            } else {
                a = m + 1;
            }
        }
        if a == n - 1 {
            return self.hi;
        }
        (z - tau * slope(a)).clamp(node(a), node(a + 1))
    }
}

fn mixture_pieces(terms: &[TruncatedTerm], lo: f64, hi: f64) -> Vec<QuadPiece> {
    let tol = 1e-12 * (hi - lo).abs().max(1.0);
    let mut breaks = vec![lo, hi];
    for term in terms {
        let r = term.radius();
        for b in [term.f - r, term.f + r] {
            if b > lo && b < hi {
                breaks.push(b);
            }
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|b, a| (*b - *a).abs() <= tol);
    if breaks.len() == 1 {
        breaks.push(hi);
    }
    breaks
        .windows(2)
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
            for term in terms {
                if term.alpha * (mid - term.f).powi(2) < term.nu {
                    a += term.alpha;
                    b -= 2.0 * term.alpha * term.f;
                    c += term.alpha * term.f * term.f;
                } else {
                    c += term.nu;
                }
            }
            QuadPiece::new(a, b, c, w[0], w[1])
        })
        .collect()
}

/// Infima of `ρ` over the two halves of every interval, and the pooled
/// per-label values over the dual cells.
#[derive(Debug, Clone, PartialEq)]
pub struct MinPool {
    /// `inf ρ` on `[γ_i, γ*_i]`.
    pub lower: Vec<f64>,
    /// `inf ρ` on `[γ*_i, γ_{i+1}]`.
    pub upper: Vec<f64>,
    /// One value per label: `inf ρ` over the (half) dual cell around `γ_i`.
    pub pooled: Vec<f64>,
}

impl MinPool {
    fn from_halves(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        let k = lower.len();
        let mut pooled = Vec::with_capacity(k + 1);
        pooled.push(lower[0]);
        for i in 1..k {
            pooled.push(upper[i - 1].min(lower[i]));
        }
        pooled.push(upper[k - 1]);
        Self {
            lower,
            upper,
            pooled,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scan_min(u: &UnaryModel, lo: f64, hi: f64, n: usize) -> f64 {
        (0..=n)
            .map(|j| u.eval(lo + (hi - lo) * j as f64 / n as f64))
            .fold(f64::INFINITY, f64::min)
    }

    fn scan_conj(u: &UnaryModel, lo: f64, hi: f64, s: f64, n: usize) -> f64 {
        (0..=n)
            .map(|j| {
                let t = lo + (hi - lo) * j as f64 / n as f64;
                s * t - u.eval(t)
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn min_pool_quadratic() {
        let g = LabelGrid::new(0.0, 1.0, 3).unwrap();
        let u = UnaryModel::quadratic(1.0, 0.3);
        let pool = u.min_pool(&g);
        let expect = [0.0025, 0.0, 0.2025];
        for (j, (&a, b)) in pool.pooled.iter().zip(expect).enumerate() {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            // dense-scan oracle over the dual cell
            let cells = [(0.0, 0.25), (0.25, 0.75), (0.75, 1.0)];
            let (lo, hi) = cells[j];
            assert!((a - scan_min(&u, lo, hi, 100_000)).abs() < 1e-9);
        }
    }

    #[test]
    fn min_pool_constant_table() {
        let g = LabelGrid::new(0.0, 1.0, 6).unwrap();
        let u = UnaryModel::SampledTable(SampledTable::tabulate(-1.0, 2.0, 31, |_| 0.7));
        assert!(u.min_pool(&g).pooled.iter().all(|&v| v == 0.7));
    }

    #[test]
    fn min_pool_zero_at_label() {
        let g = LabelGrid::new(0.0, 1.0, 5).unwrap();
        for (i, &label) in g.labels().iter().enumerate() {
            let u = UnaryModel::quadratic(2.0, label);
            assert_eq!(u.min_pool(&g).pooled[i], 0.0);
        }
    }

    #[test]
    fn single_truncated_term_pieces() {
        let g = LabelGrid::new(0.0, 1.0, 2).unwrap();
        let u = UnaryModel::mixture(vec![TruncatedTerm::new(0.04, 1.0, 0.5)]).unwrap();
        let pieces = u.pieces_on_interval(0, &g).unwrap();
        assert_eq!(pieces.len(), 3);
        let close = |a: f64, b: f64| (a - b).abs() < 1e-12;
        assert!(close(pieces[0].lo, 0.0) && close(pieces[0].hi, 0.3));
        assert!(close(pieces[0].a, 0.0) && close(pieces[0].c, 0.04));
        assert!(close(pieces[1].lo, 0.3) && close(pieces[1].hi, 0.7));
        assert!(close(pieces[1].a, 1.0) && close(pieces[1].b, -1.0) && close(pieces[1].c, 0.25));
        assert!(close(pieces[2].lo, 0.7) && close(pieces[2].hi, 1.0) && close(pieces[2].c, 0.04));
    }

    #[test]
    fn quadratic_is_one_piece() {
        let g = LabelGrid::new(0.0, 1.0, 4).unwrap();
        let u = UnaryModel::quadratic(3.0, 0.2);
        for i in 0..g.k() {
            let p = u.pieces_on_interval(i, &g).unwrap();
            assert_eq!(p.len(), 1);
            assert_eq!((p[0].lo, p[0].hi), g.interval(i));
        }
    }

    #[test]
    fn duplicate_terms_share_breakpoints() {
        let g = LabelGrid::new(0.0, 1.0, 2).unwrap();
        let one = UnaryModel::mixture(vec![TruncatedTerm::new(0.04, 1.0, 0.5)]).unwrap();
        let two = UnaryModel::mixture(vec![TruncatedTerm::new(0.04, 1.0, 0.5); 2]).unwrap();
        let p1 = one.pieces_on_interval(0, &g).unwrap();
        let p2 = two.pieces_on_interval(0, &g).unwrap();
        assert_eq!(p1.len(), p2.len());
        for (a, b) in p1.iter().zip(&p2) {
            assert_eq!((a.lo, a.hi), (b.lo, b.hi));
            assert!((2.0 * a.a - b.a).abs() < 1e-12 && (2.0 * a.c - b.c).abs() < 1e-12);
        }
    }

    #[test]
    fn tables_have_no_pieces() {
        let u = UnaryModel::SampledTable(SampledTable::tabulate(0.0, 1.0, 5, |t| t));
        assert!(matches!(u.pieces_on(0.0, 1.0), Err(UnaryError::NoExactPieces)));
    }

    #[test]
    fn conjugate_examples() {
        let g = LabelGrid::new(0.0, 1.0, 2).unwrap();
        let zero = UnaryModel::quadratic(0.0, 0.0);
        assert!((zero.conjugate_on_interval(0, &g, 2.0) - 2.0).abs() < 1e-15);
        let q = UnaryModel::quadratic(1.0, 0.5);
        assert!(q.conjugate_on_interval(0, &g, 0.0).abs() < 1e-15);
        let v = q.conjugate_on_interval(0, &g, 3.0);
        assert!((v - 2.75).abs() < 1e-12);
        assert!((v - scan_conj(&q, 0.0, 1.0, 3.0, 100_000)).abs() < 1e-9);
    }

    #[test]
    fn envelope_of_convex_is_itself() {
        let g = LabelGrid::new(0.0, 1.0, 3).unwrap();
        let q = UnaryModel::quadratic(2.0, 0.3);
        for i in 0..g.k() {
            let (lo, hi) = g.interval(i);
            for j in 0..=20 {
                let t = lo + (hi - lo) * j as f64 / 20.0;
                let env = q.convex_envelope_eval(i, &g, t).unwrap();
                assert!((env - q.eval(t)).abs() < 1e-6, "{env} vs {}", q.eval(t));
            }
        }
    }

    #[test]
    fn envelope_of_truncated_quadratic() {
        let g = LabelGrid::new(0.0, 1.0, 2).unwrap();
        let u = UnaryModel::mixture(vec![TruncatedTerm::new(0.04, 1.0, 0.5)]).unwrap();
        assert!(u.convex_envelope_eval(0, &g, 0.5).unwrap().abs() < 1e-9);
        // lower convex hull of 10^4 samples
        let pts: Vec<(f64, f64)> = (0..=10_000)
            .map(|j| {
                let t = j as f64 / 10_000.0;
                (t, u.eval(t))
            })
            .collect();
        let hull = lower_convex_hull(&pts);
        let hull_at = |t: f64| {
            let j = hull.partition_point(|p| p.0 <= t).clamp(1, hull.len() - 1);
            let (a, b) = (hull[j - 1], hull[j]);
            a.1 + (b.1 - a.1) * (t - a.0) / (b.0 - a.0)
        };
        for t in [0.1, 0.2, 0.35, 0.6, 0.9] {
            let env = u.convex_envelope_eval(0, &g, t).unwrap();
            assert!((env - hull_at(t)).abs() < 1e-4, "t={t}: {env} vs {}", hull_at(t));
        }
        assert!(u.convex_envelope_eval(0, &g, 1.5).is_err());
    }

    #[test]
    fn table_file_round_trip_and_errors() {
        let table = SampledTable::tabulate(-1.0, 2.0, 7, |t| t * t);
        let mut buf = Vec::new();
        table.write_to(&mut buf).unwrap();
        assert_eq!(buf.len(), 8 + 7 * 16);
        assert_eq!(SampledTable::from_bytes(&buf).unwrap(), table);
        assert!(matches!(
            SampledTable::from_bytes(&buf[..40]),
            Err(UnaryError::Truncated { .. })
        ));
        assert!(matches!(
            SampledTable::new(vec![0.0, 0.0], vec![1.0, 1.0]),
            Err(UnaryError::NotIncreasing(1))
        ));
    }

    #[test]
    fn local_coordinates_preserve_values() {
        let p = QuadPiece::new(1.5, -0.4, 0.2, 0.25, 0.5);
        let l = p.to_local(0.25, 0.25);
        for j in 0..=10 {
            let s = j as f64 / 10.0;
            assert!((l.eval(s) - p.eval(0.25 + 0.25 * s)).abs() < 1e-14);
        }
        assert!((l.lo - 0.0).abs() < 1e-15 && (l.hi - 1.0).abs() < 1e-15);
    }

    fn arb_unary() -> impl Strategy<Value = UnaryModel> {
        prop_oneof![
            (0.0f64..5.0, -0.5f64..1.5).prop_map(|(w, f)| UnaryModel::quadratic(w, f)),
            proptest::collection::vec((0.01f64..1.0, 0.5f64..20.0, -0.2f64..1.2), 1..4).prop_map(
                |terms| UnaryModel::mixture(
                    terms.into_iter().map(|(n, a, f)| TruncatedTerm::new(n, a, f)).collect()
                )
                .unwrap()
            ),
        ]
    }

    proptest! {
        #[test]
        fn fenchel_young(u in arb_unary(), ell in 2usize..6, s in -20.0f64..20.0,
                         fr in 0.0f64..=1.0, ii in 0usize..5) {
            let g = LabelGrid::new(0.0, 1.0, ell).unwrap();
            let i = ii % g.k();
            let (lo, hi) = g.interval(i);
            let t = lo + fr * (hi - lo);
            let conj = u.conjugate_on_interval(i, &g, s);
            prop_assert!(s * t <= u.eval(t) + conj + 1e-9);
            // equality at the maximizer
            let best = u.pieces_on(lo, hi).unwrap().into_iter()
                .map(|p| p.conjugate_argmax(s))
                .max_by(|&a, &b| (s * a - u.eval(a)).total_cmp(&(s * b - u.eval(b))))
                .unwrap();
            prop_assert!((s * best - u.eval(best) - conj).abs() < 1e-9);
        }

        #[test]
        fn pieces_reproduce_unary(u in arb_unary(), ell in 2usize..6,
                                  frs in proptest::collection::vec(0.0f64..=1.0, 1000)) {
            let g = LabelGrid::new(0.0, 1.0, ell).unwrap();
            for (j, fr) in frs.into_iter().enumerate() {
                let i = j % g.k();
                let (lo, hi) = g.interval(i);
                let t = lo + fr * (hi - lo);
                let m = u.pieces_on(lo, hi).unwrap().iter()
                    .filter(|p| t >= p.lo && t <= p.hi)
                    .map(|p| p.eval(t))
                    .fold(f64::INFINITY, f64::min);
                prop_assert!((m - u.eval(t)).abs() < 1e-12);
            }
        }

        #[test]
        fn min_pool_matches_scan(u in arb_unary(), ell in 2usize..6) {
            let g = LabelGrid::new(0.0, 1.0, ell).unwrap();
            let pool = u.min_pool(&g);
            for i in 0..g.k() {
                let (lo, hi) = g.interval(i);
                let mid = g.dual_nodes()[i];
                prop_assert!((pool.lower[i] - scan_min(&u, lo, mid, 20_000)).abs() < 1e-6);
                prop_assert!((pool.upper[i] - scan_min(&u, mid, hi, 20_000)).abs() < 1e-6);
                prop_assert!(pool.lower[i] <= scan_min(&u, lo, mid, 20_000) + 1e-12);
            }
        }

        #[test]
        fn envelope_is_convex_minorant(u in arb_unary(), a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let g = LabelGrid::new(0.0, 1.0, 2).unwrap();
            let env = |t: f64| u.convex_envelope_eval(0, &g, t).unwrap();
            prop_assert!(env(a) <= u.eval(a) + 1e-9);
            let m = 0.5 * (a + b);
            prop_assert!(env(m) <= 0.5 * (env(a) + env(b)) + 1e-7);
        }
    }
}
