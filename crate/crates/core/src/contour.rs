//! Pairwise confidence-region contours built from two profile traces.
//!
//! Each trace `j` also records how the other parameters move while `θ_j` is
//! held fixed. Mapping trace `j`'s `θ_i` through trace `i`'s `θ → τ` spline
//! gives the angle `g_ij(τ_j) = arccos(τ_i / c)` between the two profile
//! traces in the normalized `τ` plane. Four anchor angles (each trace at
//! `τ = ±c`) are interpolated around the circle with a periodic spline and
//! the contour is drawn as
//!
//! ```text
//! τ_i = c cos(a + d(a)/2),   τ_j = c cos(a − d(a)/2)
//! ```
//!
//! then mapped back through each trace's `τ → θ` spline. For a linear model
//! `d` is constant and the curve is the exact joint confidence ellipse.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fit::{FitError, FitResult};
use crate::numerics::{f_quantile, DistError, Interpolant, PeriodicCubicSpline, SplineError};
use crate::profile::ProfileTrace;

pub const DEFAULT_STEPS: usize = 100;


#[derive(Debug, Clone, PartialEq, Error)]
pub enum ContourError {
    #[error("contour of theta[{i}] vs theta[{j}] unavailable: {reason}")]
    Unavailable { i: usize, j: usize, reason: String },
    #[error("need at least 3 steps, got {0}")]
    Steps(usize),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error(transparent)]
    Spline(#[from] SplineError),
}

/// Closed polyline approximating the `1 - alpha` joint region of two
/// parameters. The first and last points coincide.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourCurve {
    pub i: usize,
    pub j: usize,
    pub alpha: f64,
    pub tau_scale: f64,
    pub points: Vec<(f64, f64)>,
    /// `(τ_i, τ_j)` of every point before mapping back to parameter space.
    pub taus: Vec<(f64, f64)>,
    /// Some point needed a spline outside its sampled range.
    pub extrapolated: bool,
}

/// `c = sqrt(p F(1 - alpha, p, n - p))`.
pub fn tau_scale(p: usize, dof: usize, alpha: f64) -> Result<f64, ContourError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(FitError::Alpha(alpha).into());
    }
    Ok((p as f64 * f_quantile(1.0 - alpha, p, dof)?).sqrt())
}

/// The `|τ|` a trace must reach for contours at every level in `alphas`.
pub fn required_tau(p: usize, dof: usize, alphas: &[f64]) -> Result<f64, ContourError> {
    alphas.iter().try_fold(0.0f64, |acc, &a| Ok(acc.max(tau_scale(p, dof, a)?)))
}

/// `g_ij(τ_j / c) = arccos(τ_i / c)` along trace `j`.
///
/// The cosine `τ_i / c` is interpolated and `arccos` applied afterwards: the
/// cosine is smooth (linear for a linear model) while the angle has a square
/// root singularity where `|τ_i / c|` reaches 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleSpline {
    pub cosine: Interpolant,
}

impl AngleSpline {
    pub fn eval(&self, normalized_tau: f64) -> f64 {
        self.cosine.eval(normalized_tau).clamp(-1.0, 1.0).acos()
    }
}

/// Angle spline for the pair, plus whether any point of trace `j` within
/// the level needed trace `i`'s `θ → τ` spline outside its sampled range.
pub fn prepare_spline(
    trace_i: &ProfileTrace,
    trace_j: &ProfileTrace,
    tau_scale: f64,
) -> Result<(AngleSpline, bool), ContourError> {
    let (i, j) = (trace_i.index, trace_j.index);
    let mut extrapolated = false;
    let mut pts: Vec<(f64, f64)> = Vec::with_capacity(trace_j.points.len());
    for pt in &trace_j.points {
        let theta_i = pt.theta[i];
        if pt.tau.abs() <= tau_scale && !trace_i.theta_to_tau.contains(theta_i) {
            extrapolated = true;
        }
        pts.push((pt.tau / tau_scale, trace_i.theta_to_tau.eval(theta_i) / tau_scale));
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts.dedup_by(|b, a| b.0 <= a.0);
    if pts.iter().filter(|p| p.0 < 0.0).count() < 2 || pts.iter().filter(|p| p.0 > 0.0).count() < 2 {
        return Err(ContourError::Unavailable { i, j, reason: format!("trace of theta[{j}] has too few points") });
    }
    let (kx, ky): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    let (cosine, _) = Interpolant::fit(&kx, &ky)?;
    Ok((AngleSpline { cosine }, extrapolated))
}

fn check_reach(trace: &ProfileTrace, other: usize, tau_scale: f64) -> Result<(), ContourError> {
    let (i, j) = (trace.index, other);
    if !trace.monotone {
        return Err(ContourError::Unavailable { i, j, reason: format!("profile of theta[{i}] is not monotone") });
    }
    let (lo, hi) = trace.tau_range();
    if lo > -tau_scale || hi < tau_scale {
        return Err(ContourError::Unavailable {
            i,
            j,
            reason: format!(
                "profile of theta[{i}] covers tau in [{lo:.3}, {hi:.3}] but the level needs +/-{tau_scale:.3}"
            ),
        });
    }
    Ok(())
}

/// Approximate contour of the `1 - alpha` joint region of `θ_i` and `θ_j`.
pub fn profile_contour(
    trace_i: &ProfileTrace,
    trace_j: &ProfileTrace,
    fit: &FitResult,
    alpha: f64,
    steps: usize,
) -> Result<ContourCurve, ContourError> {
    if steps < 3 {
        return Err(ContourError::Steps(steps));
    }
    let (i, j) = (trace_i.index, trace_j.index);
    let c = tau_scale(fit.p, fit.dof(), alpha)?;
    check_reach(trace_i, j, c)?;
    check_reach(trace_j, i, c)?;

    let (g_ij, ext_ij) = prepare_spline(trace_i, trace_j, c)?;
    let (g_ji, ext_ji) = prepare_spline(trace_j, trace_i, c)?;

    // (α_i, α_j) with τ = c cos(α)
    let anchors = [(0.0, g_ji.eval(1.0)), (g_ij.eval(1.0), 0.0), (PI, g_ji.eval(-1.0)), (g_ij.eval(-1.0), PI)];
    let mut ad: Vec<(f64, f64)> = anchors
        .iter()
        .map(|&(ai, aj)| {
            let (a, d) = ((ai + aj) / 2.0, ai - aj);
            if d < 0.0 {
                (-a, -d)
            } else {
                (a, d)
            }
        })
        .collect();
    let a0 = ad[0].0;
    for (a, _) in ad.iter_mut() {
        *a = a0 + (*a - a0).rem_euclid(2.0 * PI);
    }
    ad.sort_by(|x, y| x.0.total_cmp(&y.0));
    ad.push((ad[0].0 + 2.0 * PI, ad[0].1));
    let (angles, diffs): (Vec<f64>, Vec<f64>) = ad.into_iter().unzip();
    let a_to_d = PeriodicCubicSpline::new(&angles, &diffs)?;

    let mut extrapolated = ext_ij || ext_ji;
    let (mut points, mut taus) = (Vec::with_capacity(steps), Vec::with_capacity(steps));
    for k in 0..steps {
        let x = -PI + 2.0 * PI * k as f64 / (steps - 1) as f64;
        let y = a_to_d.eval(x).clamp(0.0, PI);
        let tau_i = c * (x + y / 2.0).cos();
        let tau_j = c * (x - y / 2.0).cos();
        extrapolated |= !trace_i.tau_to_theta.contains(tau_i) || !trace_j.tau_to_theta.contains(tau_j);
        points.push((trace_i.tau_to_theta.eval(tau_i), trace_j.tau_to_theta.eval(tau_j)));
        taus.push((tau_i, tau_j));
    }
    // close exactly; x = ±π give the same point up to rounding
    points[steps - 1] = points[0];
    taus[steps - 1] = taus[0];
    Ok(ContourCurve { i, j, alpha, tau_scale: c, points, taus, extrapolated })
}
