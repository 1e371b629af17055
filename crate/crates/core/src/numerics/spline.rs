//! Cubic splines: not-a-knot on an interval and periodic on a circle.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Knots closer than this are treated as duplicates.
pub const KNOT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SplineError {
    #[error("need at least {needed} distinct knots, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("knots and values differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("non-finite knot or value")]
    NonFinite,
}

/// One cubic piece `a + b t + c t^2 + d t^3` with `t = x - x_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Segment {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
}

impl Segment {
    fn from_moments(y0: f64, y1: f64, m0: f64, m1: f64, h: f64) -> Segment {
        Segment {
            a: y0,
            b: (y1 - y0) / h - h * (2.0 * m0 + m1) / 6.0,
            c: 0.5 * m0,
            d: (m1 - m0) / (6.0 * h),
        }
    }

    #[inline]
    fn eval(&self, t: f64) -> f64 {
        self.a + t * (self.b + t * (self.c + t * self.d))
    }

    fn derivative(&self, t: f64) -> f64 {
        self.b + t * (2.0 * self.c + 3.0 * t * self.d)
    }
}

/// Sort by `x` and drop knots within [`KNOT_TOLERANCE`] of their predecessor.
pub fn dedup_sorted(xs: &[f64], ys: &[f64]) -> Result<(Vec<f64>, Vec<f64>), SplineError> {
    if xs.len() != ys.len() {
        return Err(SplineError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(SplineError::NonFinite);
    }
    let mut pts: Vec<(f64, f64)> = xs.iter().copied().zip(ys.iter().copied()).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out_x: Vec<f64> = Vec::with_capacity(pts.len());
    let mut out_y = Vec::with_capacity(pts.len());
    for (x, y) in pts {
        if out_x.last().is_some_and(|&last| x - last <= KNOT_TOLERANCE) {
            continue;
        }
        out_x.push(x);
        out_y.push(y);
    }
    Ok((out_x, out_y))
}

/// Not-a-knot cubic spline; extrapolates with the terminal cubic pieces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubicSpline {
    knots: Vec<f64>,
    segments: Vec<Segment>,
}

impl CubicSpline {
    pub fn new(xs: &[f64], ys: &[f64]) -> Result<CubicSpline, SplineError> {
        let (x, y) = dedup_sorted(xs, ys)?;
        let n = x.len();
        if n < 3 {
            return Err(SplineError::TooFewPoints { needed: 3, got: n });
        }
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        // second derivatives at the knots; not-a-knot ends (third derivative
        // continuous across the first and last interior knots), which for
        // three knots gives the interpolating parabola
        let mut a = DMatrix::<f64>::zeros(n, n);
        let mut rhs = DVector::<f64>::zeros(n);
        for k in 1..n - 1 {
            a[(k, k - 1)] = h[k - 1];
            a[(k, k)] = 2.0 * (h[k - 1] + h[k]);
            a[(k, k + 1)] = h[k];
            rhs[k] = 6.0 * ((y[k + 1] - y[k]) / h[k] - (y[k] - y[k - 1]) / h[k - 1]);
        }
        if n == 3 {
            a[(0, 0)] = 1.0;
            a[(0, 1)] = -1.0;
            a[(2, 1)] = 1.0;
            a[(2, 2)] = -1.0;
        } else {
            a[(0, 0)] = h[1];
            a[(0, 1)] = -(h[0] + h[1]);
            a[(0, 2)] = h[0];
            a[(n - 1, n - 3)] = h[n - 2];
            a[(n - 1, n - 2)] = -(h[n - 3] + h[n - 2]);
            a[(n - 1, n - 1)] = h[n - 3];
        }
        let m: Vec<f64> = a.lu().solve(&rhs).ok_or(SplineError::NonFinite)?.iter().copied().collect();
        let segments = (0..n - 1)
            .map(|k| Segment::from_moments(y[k], y[k + 1], m[k], m[k + 1], h[k]))
            .collect();
        Ok(CubicSpline { knots: x, segments })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.knots[0], self.knots[self.knots.len() - 1])
    }

    pub fn contains(&self, x: f64) -> bool {
        let (lo, hi) = self.domain();
        x >= lo && x <= hi
    }

    fn segment_index(&self, x: f64) -> usize {
        let last = self.segments.len() - 1;
        match self.knots.partition_point(|&k| k <= x) {
            0 => 0,
            i => (i - 1).min(last),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let k = self.segment_index(x);
        self.segments[k].eval(x - self.knots[k])
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let k = self.segment_index(x);
        self.segments[k].derivative(x - self.knots[k])
    }

    pub fn values(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.segments.iter().map(|s| s.a).collect();
        let (h, last) = (
            self.knots[self.knots.len() - 1] - self.knots[self.knots.len() - 2],
            self.segments[self.segments.len() - 1],
        );
        v.push(last.eval(h));
        v
    }

    /// True when the knot values are strictly increasing or strictly decreasing.
    pub fn is_monotone(&self) -> bool {
        let v = self.values();
        v.windows(2).all(|w| w[1] > w[0]) || v.windows(2).all(|w| w[1] < w[0])
    }

    /// All `x` in the knot range with `spline(x) = y`.
    pub fn roots(&self, y: f64) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for (k, seg) in self.segments.iter().enumerate() {
            let h = self.knots[k + 1] - self.knots[k];
            for t in cubic_roots_in(seg.a - y, seg.b, seg.c, seg.d, h) {
                let x = self.knots[k] + t;
                if out.last().map_or(true, |&p| (x - p).abs() > 1e-12 * x.abs().max(1.0)) {
                    out.push(x);
                }
            }
        }
        out
    }

    /// Inverse lookup: the root inside the knot range nearest to the
    /// piecewise-linear estimate of `y`'s position.
    pub fn inverse(&self, y: f64) -> Option<f64> {
        let roots = self.roots(y);
        if roots.len() <= 1 {
            return roots.first().copied();
        }
        let vals = self.values();
        let guess = self
            .knots
            .windows(2)
            .zip(vals.windows(2))
            .find_map(|(kx, ky)| {
                let (lo, hi) = (ky[0].min(ky[1]), ky[0].max(ky[1]));
                (y >= lo && y <= hi && hi > lo)
                    .then(|| kx[0] + (y - ky[0]) / (ky[1] - ky[0]) * (kx[1] - kx[0]))
            })
            .unwrap_or(roots[0]);
        roots.into_iter().min_by(|a, b| (a - guess).abs().total_cmp(&(b - guess).abs()))
    }
}

/// Real roots of `a + b t + c t^2 + d t^3` on `[0, h]`, ascending.
fn cubic_roots_in(a: f64, b: f64, c: f64, d: f64, h: f64) -> Vec<f64> {
    let f = |t: f64| a + t * (b + t * (c + t * d));
    let df = |t: f64| b + t * (2.0 * c + 3.0 * t * d);
    // split [0, h] at the critical points so each piece is monotone
    let mut cuts = vec![0.0];
    let (qa, qb, qc) = (3.0 * d, 2.0 * c, b);
    if qa.abs() > 1e-300 {
        let disc = qb * qb - 4.0 * qa * qc;
        if disc > 0.0 {
            let s = disc.sqrt();
            let mut r = [(-qb - s) / (2.0 * qa), (-qb + s) / (2.0 * qa)];
            r.sort_by(f64::total_cmp);
            cuts.extend(r.into_iter().filter(|&t| t > 0.0 && t < h));
        }
    } else if qb.abs() > 1e-300 {
        let t = -qc / qb;
        if t > 0.0 && t < h {
            cuts.push(t);
        }
    }
    cuts.push(h);
    let mut roots = Vec::new();
    for w in cuts.windows(2) {
        let (mut lo, mut hi) = (w[0], w[1]);
        let (flo, fhi) = (f(lo), f(hi));
        if flo == 0.0 {
            roots.push(lo);
            continue;
        }
        if fhi == 0.0 {
            if hi == h {
                roots.push(hi);
            }
            continue;
        }
        if flo.signum() == fhi.signum() {
            continue;
        }
        let increasing = fhi > flo;
        let mut t = 0.5 * (lo + hi);
        for _ in 0..200 {
            let v = f(t);
            if v == 0.0 {
                break;
            }
            if (v > 0.0) == increasing {
                hi = t;
            } else {
                lo = t;
            }
            let slope = df(t);
            let newton = t - v / slope;
            t = if slope != 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            if hi - lo < 1e-15 * h.max(1e-300) {
                break;
            }
        }
        roots.push(t);
    }
    roots
}

/// Cubic spline with period `2π` and matching value, slope and curvature
/// at the wrap point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicCubicSpline {
    knots: Vec<f64>,
    segments: Vec<Segment>,
    period: f64,
}

impl PeriodicCubicSpline {
    /// `angles` may include the wrap knot `a_0 + 2π`; it is checked for a
    /// matching value and dropped. Angles are reduced into `[a_0, a_0 + 2π)`.
    pub fn new(angles: &[f64], values: &[f64]) -> Result<PeriodicCubicSpline, SplineError> {
        Self::with_period(angles, values, std::f64::consts::TAU)
    }

    pub fn with_period(xs: &[f64], ys: &[f64], period: f64) -> Result<PeriodicCubicSpline, SplineError> {
        if xs.len() != ys.len() {
            return Err(SplineError::LengthMismatch(xs.len(), ys.len()));
        }
        if xs.is_empty() {
            return Err(SplineError::TooFewPoints { needed: 1, got: 0 });
        }
        let origin = xs[0];
        let reduced: Vec<f64> = xs
            .iter()
            .map(|&x| {
                let r = (x - origin).rem_euclid(period);
                // the wrap knot itself folds onto the origin
                if period - r <= KNOT_TOLERANCE { 0.0 } else { r }
            })
            .collect();
        let (rx, y) = dedup_sorted(&reduced, ys)?;
        let x: Vec<f64> = rx.iter().map(|r| origin + r).collect();
        let n = x.len();
        let mut h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        h.push(x[0] + period - x[n - 1]);
        let mut m = vec![0.0; n];
        if n >= 2 {
            let mut a = DMatrix::<f64>::zeros(n, n);
            let mut rhs = DVector::<f64>::zeros(n);
            for k in 0..n {
                let prev = (k + n - 1) % n;
                let next = (k + 1) % n;
                let (hp, hk) = (h[prev], h[k]);
                a[(k, prev)] += hp;
                a[(k, k)] += 2.0 * (hp + hk);
                a[(k, next)] += hk;
                rhs[k] = 6.0 * ((y[next] - y[k]) / hk - (y[k] - y[prev]) / hp);
            }
            if let Some(sol) = a.lu().solve(&rhs) {
                m = sol.iter().copied().collect();
            }
        }
        let segments = (0..n)
            .map(|k| {
                let next = (k + 1) % n;
                Segment::from_moments(y[k], y[next], m[k], m[next], h[k])
            })
            .collect();
        Ok(PeriodicCubicSpline { knots: x, segments, period })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let origin = self.knots[0];
        let r = origin + (x - origin).rem_euclid(self.period);
        let k = match self.knots.partition_point(|&k| k <= r) {
            0 => 0,
            i => i - 1,
        };
        self.segments[k].eval(r - self.knots[k])
    }
}

/// Interpolant that degrades gracefully when there are too few knots for
/// a cubic spline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Interpolant {
    Cubic(CubicSpline),
    /// Piecewise linear through two or more knots; linear extrapolation.
    Linear { xs: Vec<f64>, ys: Vec<f64> },
    Constant(f64),
}

impl Interpolant {
    /// Cubic when at least three distinct knots exist, otherwise a linear
    /// (or constant) fallback. The flag is true when degraded.
    pub fn fit(xs: &[f64], ys: &[f64]) -> Result<(Interpolant, bool), SplineError> {
        match CubicSpline::new(xs, ys) {
            Ok(s) => Ok((Interpolant::Cubic(s), false)),
            Err(SplineError::TooFewPoints { got, .. }) => {
                let (xs, ys) = dedup_sorted(xs, ys)?;
                match got {
                    0 => Err(SplineError::TooFewPoints { needed: 1, got }),
                    1 => Ok((Interpolant::Constant(ys[0]), true)),
                    _ => Ok((Interpolant::Linear { xs, ys }, true)),
                }
            }
            Err(e) => Err(e),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Interpolant::Cubic(s) => s.eval(x),
            Interpolant::Constant(c) => *c,
            Interpolant::Linear { xs, ys } => {
                let k = xs.partition_point(|&k| k <= x).clamp(1, xs.len() - 1) - 1;
                ys[k] + (x - xs[k]) / (xs[k + 1] - xs[k]) * (ys[k + 1] - ys[k])
            }
        }
    }

    pub fn domain(&self) -> (f64, f64) {
        match self {
            Interpolant::Cubic(s) => s.domain(),
            Interpolant::Linear { xs, .. } => (xs[0], xs[xs.len() - 1]),
            Interpolant::Constant(_) => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        let (lo, hi) = self.domain();
        x >= lo && x <= hi
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    #[test]
    fn reproduces_a_straight_line() {
        let xs: Vec<f64> = (0..6).map(|k| k as f64 * 0.7).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 1.0).collect();
        let s = CubicSpline::new(&xs, &ys).unwrap();
        for k in 0..50 {
            let x = -0.5 + k as f64 * 0.1;
            assert!((s.eval(x) - (3.0 * x - 1.0)).abs() < 1e-12);
        }
        let y = 2.345;
        assert!((s.inverse(y).unwrap() - (y + 1.0) / 3.0).abs() < 1e-12);
        assert!(s.is_monotone());
    }

    #[test]
    fn interpolates_knots_exactly() {
        let xs = [0.0, 0.3, 1.1, 1.5, 2.8];
        let ys = [1.0, -2.0, 0.5, 0.7, 3.0];
        let s = CubicSpline::new(&xs, &ys).unwrap();
        for (x, y) in xs.iter().zip(ys) {
            assert!((s.eval(*x) - y).abs() < 1e-14);
        }
    }

    #[test]
    fn collapses_duplicate_knots() {
        let s = CubicSpline::new(&[0.0, 1.0, 1.0 + 1e-13, 2.0, 3.0], &[0.0, 1.0, 5.0, 4.0, 9.0]).unwrap();
        assert_eq!(s.knots(), &[0.0, 1.0, 2.0, 3.0]);
        assert!((s.eval(1.0) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn too_few_points_degrades_to_linear() {
        assert_eq!(
            CubicSpline::new(&[0.0, 1.0], &[0.0, 1.0]),
            Err(SplineError::TooFewPoints { needed: 3, got: 2 })
        );
        let (interp, degraded) = Interpolant::fit(&[0.0, 2.0, 2.0], &[1.0, 5.0, 7.0]).unwrap();
        assert!(degraded);
        assert!((interp.eval(1.0) - 3.0).abs() < 1e-15);
        assert!((interp.eval(3.0) - 7.0).abs() < 1e-15);
    }

    #[test]
    fn fourth_order_convergence() {
        let max_err = |n: usize| {
            let xs: Vec<f64> = (0..=n).map(|k| 2.0 * k as f64 / n as f64).collect();
            let ys: Vec<f64> = xs.iter().map(|x| x.exp()).collect();
            let s = CubicSpline::new(&xs, &ys).unwrap();
            (0..1000).map(|k| 2.0 * (k as f64 + 0.5) / 1000.0).map(|x| (s.eval(x) - x.exp()).abs()).fold(0.0, f64::max)
        };
        let ratio = max_err(10) / max_err(20);
        assert!(ratio > 12.0 && ratio < 20.0, "ratio {ratio}");
    }

    #[test]
    fn roots_and_non_monotone_inverse() {
        let xs: Vec<f64> = (0..=20).map(|k| -2.0 + 0.2 * k as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let s = CubicSpline::new(&xs, &ys).unwrap();
        assert!(!s.is_monotone());
        let roots = s.roots(1.0);
        assert_eq!(roots.len(), 2);
        assert!((roots[0] + 1.0).abs() < 1e-3 && (roots[1] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn periodic_sine_accuracy() {
        let xs: Vec<f64> = (0..20).map(|k| TAU * k as f64 / 20.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x.sin()).collect();
        let s = PeriodicCubicSpline::new(&xs, &ys).unwrap();
        let err = (0..20)
            .map(|k| TAU * (k as f64 + 0.5) / 20.0)
            .map(|x| (s.eval(x) - x.sin()).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn periodic_wraps() {
        let xs = [-0.4, 0.9, 2.5, 3.3, -0.4 + TAU];
        let ys = [1.0, 2.0, 0.5, 1.7, 1.0];
        let s = PeriodicCubicSpline::new(&xs, &ys).unwrap();
        for k in 0..100 {
            let x = -7.0 + 0.14 * k as f64;
            assert!((s.eval(x) - s.eval(x + TAU)).abs() < 1e-10);
        }
        for (x, y) in xs.iter().zip(ys) {
            assert!((s.eval(*x) - y).abs() < 1e-12);
        }
    }

    #[test]
    fn periodic_constant_values_stay_constant() {
        let s = PeriodicCubicSpline::new(&[-1.0, 0.5, 2.0, 2.2], &[0.3; 4]).unwrap();
        for k in 0..30 {
            assert!((s.eval(k as f64 * 0.3) - 0.3).abs() < 1e-14);
        }
    }
}
