//! Likelihood profiles, profile-based confidence intervals and profile
//! prediction intervals.
//!
//! For parameter `i` the profile is
//!
//! ```text
//! τ(θ_i) = sign(θ_i − θ̂_i) / s · sqrt(SSR̄(θ_i) − SSR(θ̂))
//! ```
//!
//! where `SSR̄(θ_i)` is the residual sum of squares with `θ_i` held fixed
//! and all other parameters re-optimized. The profile is sampled outward
//! from `θ̂_i` in both directions, with step sizes adapted to the local
//! slope of `τ`, and interpolated with cubic splines in both directions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Dataset;
use crate::fit::{self, FitError, FitOptions, FitResult};
use crate::model::{reparameterize, ModelError, ParamModel};
use crate::numerics::{f_quantile, t_quantile, DistError, Interpolant, SplineError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProfileError {
    /// A conditional refit beat the incumbent optimum.
    #[error("better optimum found while profiling (SSR {ssr} < {incumbent})")]
    BetterOptimum { theta: Vec<f64>, ssr: f64, incumbent: f64 },
    #[error("gave up after {0} restarts on better optima")]
    RestartLimit(usize),
    #[error("standard error of theta[{index}] is {se}; cannot choose a profile step")]
    BadStandardError { index: usize, se: f64 },
    #[error("trace for theta[{}] is not monotone", .0.index)]
    NonMonotone(Box<ProfileTrace>),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error(transparent)]
    Spline(#[from] SplineError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileOptions {
    /// Initial step is `se_i / step`.
    pub step: f64,
    /// Maximum points per direction.
    pub k_max: usize,
    /// Sampling stops once `|τ|` exceeds the `1 - tau_max_level` level.
    pub tau_max_level: f64,
    pub max_restarts: usize,
    /// Extra lower bound on the stopping level, for callers that need the
    /// trace to reach a given `|τ|` (wide prediction cutoffs, contours).
    pub tau_floor: f64,
    pub fit: FitOptions,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        ProfileOptions {
            step: 8.0,
            k_max: 30,
            tau_max_level: 0.01,
            max_restarts: 10,
            tau_floor: 0.0,
            fit: FitOptions::default(),
        }
    }
}

impl ProfileOptions {
    /// `|τ|` at which a direction counts as bounded: the larger of
    /// `sqrt(F(1 - level, p, n - p))`, the matching two-sided t quantile
    /// and `tau_floor`.
    pub fn tau_stop(&self, p: usize, dof: usize) -> Result<f64, DistError> {
        let f = f_quantile(1.0 - self.tau_max_level, p, dof)?.sqrt();
        let t = t_quantile(dof, self.tau_max_level / 2.0)?;
        Ok(f.max(t).max(self.tau_floor))
    }

    /// Step divisor actually used: `step`, reduced when `k_max` points of
    /// roughly `1/step` each could not reach `tau_stop`.
    pub fn effective_step(&self, tau_stop: f64) -> f64 {
        self.step.min(0.75 * self.k_max as f64 / tau_stop)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub tau: f64,
    pub theta: Vec<f64>,
}

/// Sampled profile of one parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileTrace {
    pub index: usize,
    /// Ordered by `θ_i`, including the anchor `(0, θ̂)`.
    pub points: Vec<TracePoint>,
    pub tau_to_theta: Interpolant,
    pub theta_to_tau: Interpolant,
    /// `|τ|` exceeded the stopping level on the low / high side.
    pub bounded_left: bool,
    pub bounded_right: bool,
    /// The direction stopped short of the bound: a refit failed or
    /// `k_max` points were used up.
    pub truncated_left: bool,
    pub truncated_right: bool,
    /// False when `τ` decreases by more than the noise tolerance somewhere.
    pub monotone: bool,
    /// Fewer than three distinct knots; splines degraded to linear.
    pub degraded: bool,
    pub unconverged_refits: usize,
    pub tau_stop: f64,
    pub theta_hat: f64,
}

/// `τ` decreases smaller than this are attributed to optimizer noise.
pub const MONOTONE_TOLERANCE: f64 = 1e-6;

impl ProfileTrace {
    pub fn taus(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.tau).collect()
    }

    pub fn tau_range(&self) -> (f64, f64) {
        self.points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.tau), hi.max(p.tau)))
    }

    /// Points on one side of the anchor (`side < 0` low, `side > 0` high).
    pub fn side_len(&self, side: f64) -> usize {
        self.points.iter().filter(|p| p.tau * side > 0.0).count()
    }

    fn assemble(
        index: usize,
        theta_hat: &[f64],
        left: Vec<TracePoint>,
        right: Vec<TracePoint>,
        flags: [bool; 4],
        unconverged_refits: usize,
        tau_stop: f64,
    ) -> Result<ProfileTrace, ProfileError> {
        let mut points: Vec<TracePoint> = left.into_iter().rev().collect();
        points.push(TracePoint { tau: 0.0, theta: theta_hat.to_vec() });
        points.extend(right);

        let monotone = points.windows(2).all(|w| w[1].tau >= w[0].tau - MONOTONE_TOLERANCE);
        // τ → θ needs strictly increasing knots: walk outward from the anchor
        // and keep each point only if it extends the running |τ| range
        let anchor = points.iter().position(|p| p.tau == 0.0 && p.theta[index] == theta_hat[index]).unwrap_or(0);
        let mut keep = vec![anchor];
        let mut hi = 0.0;
        for k in anchor + 1..points.len() {
            if points[k].tau > hi {
                hi = points[k].tau;
                keep.push(k);
            }
        }
        let mut lo = 0.0;
        for k in (0..anchor).rev() {
            if points[k].tau < lo {
                lo = points[k].tau;
                keep.push(k);
            }
        }
        let tau_knots: Vec<f64> = keep.iter().map(|&k| points[k].tau).collect();
        let theta_at: Vec<f64> = keep.iter().map(|&k| points[k].theta[index]).collect();
        let (tau_to_theta, d1) = Interpolant::fit(&tau_knots, &theta_at)?;

        let thetas: Vec<f64> = points.iter().map(|p| p.theta[index]).collect();
        let taus: Vec<f64> = points.iter().map(|p| p.tau).collect();
        let (theta_to_tau, d2) = Interpolant::fit(&thetas, &taus)?;

        let [bounded_left, bounded_right, truncated_left, truncated_right] = flags;
        Ok(ProfileTrace {
            index,
            points,
            tau_to_theta,
            theta_to_tau,
            bounded_left,
            bounded_right,
            truncated_left,
            truncated_right,
            monotone,
            degraded: d1 || d2,
            unconverged_refits,
            tau_stop,
            theta_hat: theta_hat[index],
        })
    }
}

/// Sample the profile of parameter `index` around the optimum in `fit`.
///
/// Returns [`ProfileError::BetterOptimum`] when a conditional refit finds a
/// lower SSR than `fit.ssr`; the caller is expected to refit and restart
/// (see [`profile_all`]).
pub fn profile_parameter(
    model: &ParamModel,
    data: &Dataset,
    fit: &FitResult,
    index: usize,
    opts: &ProfileOptions,
) -> Result<ProfileTrace, ProfileError> {
    let p = model.n_params();
    if index >= p {
        return Err(FitError::FixedIndex { index, p }.into());
    }
    let se = fit.se[index];
    if !(se.is_finite() && se > 0.0) {
        return Err(ProfileError::BadStandardError { index, se });
    }
    let tau_stop = opts.tau_stop(p, fit.dof())?;
    let step = opts.effective_step(tau_stop);
    let theta_hat = &fit.theta_hat;
    let restart_margin = 1e-10 * (1.0 + fit.ssr);
    let mut sides: Vec<(Vec<TracePoint>, bool, bool)> = Vec::with_capacity(2);
    let mut unconverged = 0;

    for direction in [-1.0, 1.0] {
        let delta = direction * se / step;
        let mut t = 1.0;
        let mut warm = theta_hat.clone();
        let mut points = Vec::new();
        let (mut bounded, mut truncated) = (false, false);
        for _ in 0..opts.k_max {
            let value = theta_hat[index] + delta * t;
            let refit = match fit::fit_with_fixed(model, data, &warm, index, value, &opts.fit) {
                Ok(r) if r.ssr.is_finite() => r,
                _ => {
                    truncated = true;
                    break;
                }
            };
            if !refit.converged {
                unconverged += 1;
            }
            let excess = refit.ssr - fit.ssr;
            if excess < -restart_margin {
                return Err(ProfileError::BetterOptimum { theta: refit.theta, ssr: refit.ssr, incumbent: fit.ssr });
            }
            let tau = direction * excess.max(0.0).sqrt() / fit.s;

            let resid = model.residuals(data, &refit.theta);
            let eps_dot_j: f64 = data
                .rows()
                .zip(&resid)
                .map(|(x, e)| e * model.partial(index).eval(&refit.theta, x))
                .sum();
            let inv_slope = if eps_dot_j.abs() < 1e-300 {
                4.0
            } else {
                (tau * fit.s2 / (se * eps_dot_j)).abs().clamp(1.0 / 16.0, 4.0)
            };
            t += inv_slope;

            points.push(TracePoint { tau, theta: refit.theta.clone() });
            warm = refit.theta;
            if tau.abs() > tau_stop {
                bounded = true;
                break;
            }
        }
        truncated |= !bounded;
        sides.push((points, bounded, truncated));
    }
    let (right, bounded_right, truncated_right) = sides.pop().expect("two directions");
    let (left, bounded_left, truncated_left) = sides.pop().expect("two directions");
    ProfileTrace::assemble(
        index,
        theta_hat,
        left,
        right,
        [bounded_left, bounded_right, truncated_left, truncated_right],
        unconverged,
        tau_stop,
    )
}

/// Profiles for a set of parameters, all relative to the same optimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSet {
    /// The optimum the traces refer to (may differ from the input fit
    /// after restarts).
    pub fit: FitResult,
    pub traces: Vec<Result<ProfileTrace, String>>,
    pub restarts: usize,
}

impl ProfileSet {
    pub fn trace(&self, index: usize) -> Option<&ProfileTrace> {
        self.traces.iter().filter_map(|t| t.as_ref().ok()).find(|t| t.index == index)
    }
}

fn run_profiles(
    model: &ParamModel,
    data: &Dataset,
    fit: &FitResult,
    params: &[usize],
    opts: &ProfileOptions,
) -> Vec<Result<ProfileTrace, ProfileError>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        params.par_iter().map(|&i| profile_parameter(model, data, fit, i, opts)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        params.iter().map(|&i| profile_parameter(model, data, fit, i, opts)).collect()
    }
}

/// Profile every parameter in `params`, restarting from scratch whenever a
/// better optimum turns up. Per-parameter failures other than restarts are
/// kept as error strings in the result.
pub fn profile_all(
    model: &ParamModel,
    data: &Dataset,
    fit: &FitResult,
    params: &[usize],
    opts: &ProfileOptions,
) -> Result<ProfileSet, ProfileError> {
    let mut current = fit.clone();
    let mut restarts = 0;
    loop {
        let results = run_profiles(model, data, &current, params, opts);
        let better = results
            .iter()
            .filter_map(|r| match r {
                Err(ProfileError::BetterOptimum { theta, ssr, .. }) => Some((theta, *ssr)),
                _ => None,
            })
            .min_by(|a, b| a.1.total_cmp(&b.1));
        if let Some((theta, _)) = better {
            restarts += 1;
            if restarts > opts.max_restarts {
                return Err(ProfileError::RestartLimit(opts.max_restarts));
            }
            current = fit::fit(model, data, theta, &opts.fit)?;
            continue;
        }
        let traces = results.into_iter().map(|r| r.map_err(|e| e.to_string())).collect();
        return Ok(ProfileSet { fit: current, traces, restarts });
    }
}

/// Interval `{θ_i : |τ(θ_i)| ≤ cutoff}` read off the `τ → θ` spline; a side
/// whose samples never reach the cutoff is unbounded (±∞).
pub fn profile_interval(trace: &ProfileTrace, cutoff: f64) -> Result<(f64, f64), ProfileError> {
    if !trace.monotone {
        return Err(ProfileError::NonMonotone(Box::new(trace.clone())));
    }
    let (lo_tau, hi_tau) = trace.tau_range();
    // the anchor counts toward the three points a side needs
    let lower = if lo_tau <= -cutoff && trace.side_len(-1.0) + 1 >= 3 {
        trace.tau_to_theta.eval(-cutoff)
    } else {
        f64::NEG_INFINITY
    };
    let upper = if hi_tau >= cutoff && trace.side_len(1.0) + 1 >= 3 {
        trace.tau_to_theta.eval(cutoff)
    } else {
        f64::INFINITY
    };
    // the spline must bracket the estimate; anything else is interpolation
    // overshoot between badly spaced knots
    if !(lower < trace.theta_hat && trace.theta_hat < upper) {
        return Err(ProfileError::NonMonotone(Box::new(trace.clone())));
    }
    Ok((lower, upper))
}

/// Profile confidence interval at level `1 - alpha`.
pub fn profile_ci(trace: &ProfileTrace, fit: &FitResult, alpha: f64) -> Result<(f64, f64), ProfileError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(FitError::Alpha(alpha).into());
    }
    let cutoff = t_quantile(fit.dof(), alpha / 2.0)?;
    profile_interval(trace, cutoff)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PredictionMethod {
    Profile,
    /// Re-parameterization or profiling failed; linear interval substituted.
    LinearFallback,
}

/// Prediction intervals at one point from a single profile of the
/// re-parameterized model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfilePrediction {
    pub x0: Vec<f64>,
    pub center: f64,
    /// Interval for the expectation function.
    pub expectation: (f64, f64),
    /// Interval including the noise term.
    pub full: (f64, f64),
    pub rse: f64,
    pub pivot: usize,
    pub restarts: usize,
}

/// Profile prediction intervals at `x0` for both the expectation function
/// and the full model.
///
/// The model is rewritten so that one parameter equals `f(x0, θ)`, the
/// rewritten model is refitted on the training data, and that parameter is
/// profiled. The expectation interval uses the cutoff `t(n-p, α/2)`; the
/// full-model interval scales it by `(rse + s)/rse`, which reproduces
/// `f ± (rse + s) t` exactly for linear models.
pub fn profile_prediction(
    model: &ParamModel,
    data: &Dataset,
    fit: &FitResult,
    x0: &[f64],
    alpha: f64,
    opts: &ProfileOptions,
) -> Result<ProfilePrediction, ProfileError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(FitError::Alpha(alpha).into());
    }
    let rep = reparameterize(model, &fit.theta_hat, x0)?;
    let pivot = rep.pivot;
    let mut refit = fit::fit(&rep.model, data, &rep.theta_prime0, &opts.fit)?;
    let t = t_quantile(fit.dof(), alpha / 2.0)?;
    let mut restarts = 0;
    loop {
        let rse = refit.se[pivot];
        let noise_cutoff = t * (rse + refit.s) / rse;
        let floor = |cutoff: f64| ProfileOptions { tau_floor: opts.tau_floor.max(1.05 * cutoff), ..*opts };
        let narrow = floor(t);
        // When s dwarfs rse the noise cutoff sits far beyond the usual stop
        // level; one trace reaching it would be too coarse near ±t, so the
        // full-model interval gets its own trace.
        let result = profile_parameter(&rep.model, data, &refit, pivot, &narrow).and_then(|trace| {
            let expectation = profile_interval(&trace, t)?;
            let full = if trace.tau_stop >= 1.05 * noise_cutoff {
                profile_interval(&trace, noise_cutoff)?
            } else {
                let wide = profile_parameter(&rep.model, data, &refit, pivot, &floor(noise_cutoff))?;
                profile_interval(&wide, noise_cutoff)?
            };
            Ok((expectation, full))
        });
        match result {
            Ok((expectation, full)) => {
                return Ok(ProfilePrediction {
                    x0: x0.to_vec(),
                    center: refit.theta_hat[pivot],
                    expectation,
                    full,
                    rse,
                    pivot,
                    restarts,
                });
            }
            Err(ProfileError::BetterOptimum { theta, .. }) => {
                restarts += 1;
                if restarts > opts.max_restarts {
                    return Err(ProfileError::RestartLimit(opts.max_restarts));
                }
                refit = fit::fit(&rep.model, data, &theta, &opts.fit)?;
            }
            Err(e) => return Err(e),
        }
    }
}

/// `(center, lower, upper)` of the profile prediction interval at `x0`.
pub fn profile_prediction_interval(
    model: &ParamModel,
    data: &Dataset,
    fit: &FitResult,
    x0: &[f64],
    alpha: f64,
    include_noise: bool,
    opts: &ProfileOptions,
) -> Result<(f64, f64, f64), ProfileError> {
    let pred = profile_prediction(model, data, fit, x0, alpha, opts)?;
    let (lo, hi) = if include_noise { pred.full } else { pred.expectation };
    Ok((pred.center, lo, hi))
}

/// One row of a prediction band: profile intervals where available, the
/// linear intervals always.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandPoint {
    pub x: Vec<f64>,
    pub center: f64,
    pub linear_expectation: (f64, f64),
    pub linear_full: (f64, f64),
    pub profile_expectation: (f64, f64),
    pub profile_full: (f64, f64),
    pub method: PredictionMethod,
    pub note: Option<String>,
}

/// Linear and profile prediction intervals over a set of points. Points
/// where the profile route fails fall back to the linear intervals.
pub fn prediction_band(
    model: &ParamModel,
    data: &Dataset,
    fit: &FitResult,
    points: &[Vec<f64>],
    alpha: f64,
    opts: &ProfileOptions,
) -> Result<Vec<BandPoint>, ProfileError> {
    let one = |x: &Vec<f64>| -> Result<BandPoint, ProfileError> {
        let lin_e = fit::linear_prediction(fit, model, x, alpha, false)?;
        let lin_f = fit::linear_prediction(fit, model, x, alpha, true)?;
        let base = BandPoint {
            x: x.clone(),
            center: lin_e.center,
            linear_expectation: (lin_e.lower, lin_e.upper),
            linear_full: (lin_f.lower, lin_f.upper),
            profile_expectation: (lin_e.lower, lin_e.upper),
            profile_full: (lin_f.lower, lin_f.upper),
            method: PredictionMethod::LinearFallback,
            note: None,
        };
        Ok(match profile_prediction(model, data, fit, x, alpha, opts) {
            Ok(pred) => BandPoint {
                profile_expectation: pred.expectation,
                profile_full: pred.full,
                method: PredictionMethod::Profile,
                ..base
            },
            Err(e @ ProfileError::RestartLimit(_)) => return Err(e),
            Err(e) => BandPoint { note: Some(e.to_string()), ..base },
        })
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        points.par_iter().map(one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        points.iter().map(one).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::fit::fit;

    fn line_data() -> Dataset {
        let x: Vec<f64> = (0..15).map(|k| k as f64 * 0.4).collect();
        let noise = [0.3, -0.2, 0.1, 0.05, -0.4, 0.25, -0.1, 0.0, 0.2, -0.3, 0.15, -0.05, 0.12, -0.22, 0.08];
        let y: Vec<f64> = x.iter().zip(noise).map(|(x, e)| 1.5 - 0.7 * x + e).collect();
        Dataset::from_columns(&x, &y, "x").unwrap()
    }

    fn line() -> ParamModel {
        ParamModel::new(parse("theta[0] + theta[1]*x", &["x"]).unwrap(), vec![0.0, 0.0], 1).unwrap()
    }

    #[test]
    fn linear_trace_is_exactly_linear() {
        let (m, d) = (line(), line_data());
        let f = fit(&m, &d, &[0.0, 0.0], &FitOptions::default()).unwrap();
        for i in 0..2 {
            let tr = profile_parameter(&m, &d, &f, i, &ProfileOptions::default()).unwrap();
            assert!(tr.bounded_left && tr.bounded_right && tr.monotone);
            for pt in &tr.points {
                let want = (pt.theta[i] - f.theta_hat[i]) / f.se[i];
                assert!((pt.tau - want).abs() < 1e-8, "{} vs {}", pt.tau, want);
            }
            // unit inverse slope: k-th point sits at τ = k / step
            assert!(tr.points.len() <= 2 * 30 + 1);
            let ci = profile_ci(&tr, &f, 0.05).unwrap();
            let lin = fit::linear_ci(&f, 0.05).unwrap()[i];
            assert!((ci.0 - lin.0).abs() < 1e-6 * lin.0.abs().max(1.0));
            assert!((ci.1 - lin.1).abs() < 1e-6 * lin.1.abs().max(1.0));
        }
    }

    #[test]
    fn anchor_is_present() {
        let (m, d) = (line(), line_data());
        let f = fit(&m, &d, &[0.0, 0.0], &FitOptions::default()).unwrap();
        let tr = profile_parameter(&m, &d, &f, 1, &ProfileOptions::default()).unwrap();
        assert!(tr.points.iter().any(|p| p.tau == 0.0 && p.theta == f.theta_hat));
        assert!(tr.theta_to_tau.eval(f.theta_hat[1]).abs() < 1e-12);
        for p in &tr.points {
            assert_eq!(p.tau.signum() * (p.theta[1] - f.theta_hat[1]).signum() >= 0.0, true);
        }
    }

    #[test]
    fn unbounded_side_gives_infinite_bound() {
        let (m, d) = (line(), line_data());
        let f = fit(&m, &d, &[0.0, 0.0], &FitOptions::default()).unwrap();
        let mut tr = profile_parameter(&m, &d, &f, 0, &ProfileOptions::default()).unwrap();
        tr.points.retain(|p| p.tau > -0.5);
        let (lo, hi) = profile_ci(&tr, &f, 0.05).unwrap();
        assert_eq!(lo, f64::NEG_INFINITY);
        assert!(hi.is_finite());
    }

    #[test]
    fn restart_on_perturbed_start() {
        let (m, d) = (line(), line_data());
        let good = fit(&m, &d, &[0.0, 0.0], &FitOptions::default()).unwrap();
        let mut bad_theta = good.theta_hat.clone();
        bad_theta[0] += 0.3;
        let bad = fit::statistics(&m, &d, &bad_theta).unwrap();
        assert!(matches!(
            profile_parameter(&m, &d, &bad, 1, &ProfileOptions::default()),
            Err(ProfileError::BetterOptimum { .. })
        ));
        let set = profile_all(&m, &d, &bad, &[0, 1], &ProfileOptions::default()).unwrap();
        assert!(set.restarts >= 1);
        for (a, b) in set.fit.theta_hat.iter().zip(&good.theta_hat) {
            assert!((a - b).abs() < 1e-6);
        }
        let none = ProfileOptions { max_restarts: 0, ..Default::default() };
        assert_eq!(profile_all(&m, &d, &bad, &[0, 1], &none), Err(ProfileError::RestartLimit(0)));
    }

    #[test]
    fn linear_prediction_matches_closed_form() {
        let (m, d) = (line(), line_data());
        let f = fit(&m, &d, &[0.0, 0.0], &FitOptions::default()).unwrap();
        for x in [0.0, 2.3, 7.0] {
            let pred = profile_prediction(&m, &d, &f, &[x], 0.05, &ProfileOptions::default()).unwrap();
            let lin_e = fit::linear_prediction(&f, &m, &[x], 0.05, false).unwrap();
            let lin_f = fit::linear_prediction(&f, &m, &[x], 0.05, true).unwrap();
            assert!((pred.center - lin_e.center).abs() < 1e-12);
            assert!((pred.expectation.0 - lin_e.lower).abs() < 1e-6);
            assert!((pred.expectation.1 - lin_e.upper).abs() < 1e-6);
            assert!((pred.full.0 - lin_f.lower).abs() < 1e-6);
            assert!((pred.full.1 - lin_f.upper).abs() < 1e-6);
        }
    }

    #[test]
    fn band_falls_back_without_extractable_parameter() {
        let m = ParamModel::new(parse("sin(theta[0]*x) + theta[0]", &["x"]).unwrap(), vec![0.5], 1).unwrap();
        let x: Vec<f64> = (0..10).map(|k| 0.1 * k as f64).collect();
        let y: Vec<f64> = x.iter().map(|x| (0.4 * x).sin() + 0.4 + 0.01 * (x * 7.0).cos()).collect();
        let d = Dataset::from_columns(&x, &y, "x").unwrap();
        let f = fit(&m, &d, &[0.5], &FitOptions::default()).unwrap();
        let band = prediction_band(&m, &d, &f, &[vec![0.5]], 0.05, &ProfileOptions::default()).unwrap();
        assert_eq!(band[0].method, PredictionMethod::LinearFallback);
        assert_eq!(band[0].profile_expectation, band[0].linear_expectation);
        assert!(band[0].note.is_some());
    }
}
