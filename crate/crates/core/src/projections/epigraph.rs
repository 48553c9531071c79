//! Euclidean projections onto epigraphs of one-dimensional conjugates.

use crate::unaries::QuadPiece;

/// A point `(s, r)` in the plane: `s` is the conjugate argument, `r` the
/// epigraph ordinate. Membership in `epi g*` means `height ≥ g*(slope)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EpigraphPoint {
    pub slope: f64,
    pub height: f64,
}

impl EpigraphPoint {
    pub fn new(slope: f64, height: f64) -> Self {
        Self { slope, height }
    }

    pub fn dist2(&self, other: &Self) -> f64 {
        let ds = self.slope - other.slope;
        let dr = self.height - other.height;
        ds * ds + dr * dr
    }
}

/// Projection onto `{(s, r) : r ≥ c (s - s0)² + r0}` with `shift = (s0, r0)`.
///
/// The foot point `x = s - s0` solves `2c² x³ + (1 - 2c r') x - s' = 0`.
pub fn project_epi_parabola(point: EpigraphPoint, curvature: f64, shift: (f64, f64)) -> EpigraphPoint {
    let (s0, r0) = shift;
    let s = point.slope - s0;
    let r = point.height - r0;
    let c = curvature;
    if r >= c * s * s {
        return point;
    }
    if c <= 0.0 {
        return EpigraphPoint::new(point.slope, r0);
    }
    let p = (1.0 - 2.0 * c * r) / (2.0 * c * c);
    let q = -s / (2.0 * c * c);
    let cost = |x: f64| {
        let dr = c * x * x - r;
        (x - s) * (x - s) + dr * dr
    };
    let mut x = depressed_cubic_roots(p, q)
        .into_iter()
        .flatten()
        .min_by(|a, b| cost(*a).total_cmp(&cost(*b)))
        .unwrap_or(0.0);
    for _ in 0..3 {
        let d = 3.0 * x * x + p;
        if d == 0.0 {
            break;
        }
        let step = (x * x * x + p * x + q) / d;
        if !step.is_finite() {
            break;
        }
        x -= step;
    }
    EpigraphPoint::new(x + s0, c * x * x + r0)
}

/// Real roots of `x³ + p x + q`.
fn depressed_cubic_roots(p: f64, q: f64) -> [Option<f64>; 3] {
    let half_q = 0.5 * q;
    let third_p = p / 3.0;
    let disc = half_q * half_q + third_p * third_p * third_p;
    if disc >= 0.0 {
        // Cardano, arranged to avoid cancellation: u v = -p/3
        let u = -(half_q.abs() + disc.sqrt()).cbrt() * half_q.signum();
        let x = if u == 0.0 { 0.0 } else { u - third_p / u };
        [Some(x), None, None]
    } else {
        let m = 2.0 * (-third_p).sqrt();
        let arg = (3.0 * q / (2.0 * p) * (-3.0 / p).sqrt()).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        let tau = 2.0 * std::f64::consts::PI / 3.0;
        [
            Some(m * theta.cos()),
            Some(m * (theta - tau).cos()),
            Some(m * (theta - 2.0 * tau).cos()),
        ]
    }
}

/// Pieces whose quadratic coefficient is at most this are treated as affine.
const FLAT: f64 = 1e-14;

/// Projection onto `epi q*` for `q(t) = a t² + b t + c + δ{t ∈ [lo, hi]}`.
///
/// `q*` is a line of slope `lo` up to `s_lo = 2a lo + b`, a parabola up to
/// `s_hi = 2a hi + b` and a line of slope `hi` beyond; for `a = 0` the
/// parabola collapses to a kink.
pub fn project_epi_interval_quadratic(point: EpigraphPoint, piece: &QuadPiece) -> EpigraphPoint {
    debug_assert!(piece.a >= 0.0);
    if point.height >= piece.conjugate(point.slope) {
        return point;
    }
    let out = if piece.a <= FLAT || piece.hi <= piece.lo {
        let mut lines = vec![(piece.lo, piece.eval(piece.lo))];
        if piece.hi > piece.lo {
            lines.push((piece.hi, piece.eval(piece.hi)));
        }
        project_onto_lines(point, &lines)
    } else {
        project_curved(point, piece)
    };
    corrupt(out)
}

#[cfg(not(feature = "fault-injection"))]
#[inline(always)]
fn corrupt(p: EpigraphPoint) -> EpigraphPoint {
    p
}

/// Deliberately wrong projection used to check that the test suites notice.
#[cfg(feature = "fault-injection")]
fn corrupt(p: EpigraphPoint) -> EpigraphPoint {
    EpigraphPoint::new(p.slope, p.height - 1e-3)
}

fn project_curved(point: EpigraphPoint, piece: &QuadPiece) -> EpigraphPoint {
    let QuadPiece { a, b, lo, hi, .. } = *piece;
    let s_lo = 2.0 * a * lo + b;
    let s_hi = 2.0 * a * hi + b;
    // cap: q*(s) = (s - b)²/(4a) - c on [s_lo, s_hi]
    let cap = project_epi_parabola(point, 0.25 / a, (b, -piece.c));
    let s_cap = cap.slope.clamp(s_lo, s_hi);
    let candidates = [
        line_foot(point, lo, piece.eval(lo), f64::NEG_INFINITY, s_lo),
        EpigraphPoint::new(s_cap, piece.conjugate(s_cap)),
        line_foot(point, hi, piece.eval(hi), s_hi, f64::INFINITY),
    ];
    nearest(point, &candidates)
}

/// Nearest point on the segment of `r = t s - v` with `s ∈ [s_min, s_max]`.
fn line_foot(point: EpigraphPoint, t: f64, v: f64, s_min: f64, s_max: f64) -> EpigraphPoint {
    let s = ((point.slope + t * (point.height + v)) / (1.0 + t * t)).clamp(s_min, s_max);
    EpigraphPoint::new(s, t * s - v)
}

fn nearest(point: EpigraphPoint, candidates: &[EpigraphPoint]) -> EpigraphPoint {
    *candidates
        .iter()
        .min_by(|x, y| point.dist2(x).total_cmp(&point.dist2(y)))
        .expect("at least one candidate")
}

/// Projection onto the epigraph of `max_m (t_m s - v_m)` for lines sorted by
/// strictly increasing `t_m`, every one of which is active somewhere.
///
/// This is the conjugate of a convex polyline with vertices `(t_m, v_m)`.
pub fn project_onto_lines(point: EpigraphPoint, lines: &[(f64, f64)]) -> EpigraphPoint {
    let value = lines
        .iter()
        .map(|&(t, v)| t * point.slope - v)
        .fold(f64::NEG_INFINITY, f64::max);
    if point.height >= value {
        return point;
    }
    let n = lines.len();
    let mut best = EpigraphPoint::default();
    let mut best_d = f64::INFINITY;
    for m in 0..n {
        let (t, v) = lines[m];
        let s_min = if m == 0 { f64::NEG_INFINITY } else { kink(lines[m - 1], lines[m]) };
        let s_max = if m + 1 == n { f64::INFINITY } else { kink(lines[m], lines[m + 1]) };
        let cand = line_foot(point, t, v, s_min, s_max);
        let d = point.dist2(&cand);
        if d < best_d {
            best_d = d;
            best = cand;
        }
    }
    best
}

fn kink(l: (f64, f64), r: (f64, f64)) -> f64 {
    (r.1 - l.1) / (r.0 - l.0)
}

/// Result of an iterative projection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projected<T> {
    pub point: T,
    pub converged: bool,
    pub sweeps: usize,
}

/// Projection onto `⋂_j epi q_j*` by cyclic Dykstra over the pieces.
pub fn project_epi_max(
    point: EpigraphPoint,
    pieces: &[QuadPiece],
    tol: f64,
    max_iter: usize,
) -> Projected<EpigraphPoint> {
    assert!(!pieces.is_empty(), "need at least one piece");
    let conj_max = |s: f64| {
        pieces
            .iter()
            .map(|p| p.conjugate(s))
            .fold(f64::NEG_INFINITY, f64::max)
    };
    if pieces.len() == 1 || point.height >= conj_max(point.slope) {
        let out = if point.height >= conj_max(point.slope) {
            point
        } else {
            project_epi_interval_quadratic(point, &pieces[0])
        };
        return Projected {
            point: out,
            converged: true,
            sweeps: 0,
        };
    }
    let mut x = point;
    let mut incr = vec![(0.0, 0.0); pieces.len()];
    for sweep in 1..=max_iter {
        let prev = x;
        // the iterate can repeat while the corrections still move
        let mut moved: f64 = 0.0;
        for (piece, inc) in pieces.iter().zip(incr.iter_mut()) {
            let y = EpigraphPoint::new(x.slope + inc.0, x.height + inc.1);
            let p = project_epi_interval_quadratic(y, piece);
            let next = (y.slope - p.slope, y.height - p.height);
            moved = moved.max((next.0 - inc.0).abs()).max((next.1 - inc.1).abs());
            *inc = next;
            x = p;
        }
        if x.dist2(&prev).sqrt() < tol && moved < tol && conj_max(x.slope) - x.height <= tol {
            return Projected {
                point: x,
                converged: true,
                sweeps: sweep,
            };
        }
    }
    Projected {
        point: x,
        converged: false,
        sweeps: max_iter,
    }
}

/// Projection of `(s, b)` with `s ≥ 0` onto `{b ≥ c s², s ≤ R}`.
///
/// Radial reduction of the epigraph of `c‖p‖² + δ{‖p‖ ≤ R}`.
pub fn project_radial_epi(s: f64, b: f64, c: f64, radius: f64) -> (f64, f64) {
    if s <= radius && b >= c * s * s {
        return (s, b);
    }
    let (ps, pb) = if c > 0.0 {
        let p = project_epi_parabola(EpigraphPoint::new(s, b), c, (0.0, 0.0));
        (p.slope, p.height)
    } else {
        (s, b.max(0.0))
    };
    if ps <= radius {
        (ps, pb)
    } else {
        (radius, b.max(c * radius * radius))
    }
}
