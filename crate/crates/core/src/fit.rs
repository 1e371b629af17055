//! Nonlinear least squares (Levenberg–Marquardt) and the linear
//! approximation of parameter and prediction uncertainty.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Dataset;
use crate::model::{ModelError, ParamModel};
use crate::numerics::{t_quantile, DistError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("need more observations than parameters (n = {n}, p = {p})")]
    TooFewObservations { n: usize, p: usize },
    #[error("model has no parameters")]
    NoParameters,
    #[error("objective is not finite at the starting point")]
    NonFiniteStart,
    #[error("fixed parameter index {index} out of range for {p} parameters")]
    FixedIndex { index: usize, p: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error("alpha {0} is not in (0, 1)")]
    Alpha(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub max_iters: usize,
    /// Relative SSR decrease threshold.
    pub tol_f: f64,
    /// Relative parameter step threshold.
    pub tol_x: f64,
    /// Gradient max-norm threshold.
    pub tol_grad: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { max_iters: 200, tol_f: 1e-10, tol_x: 1e-8, tol_grad: 1e-12 }
    }
}

/// Columns whose pivoted `|r_ii|` falls below this fraction of `|r_00|`
/// are treated as linearly dependent.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// Maximum-likelihood estimate and its linear-approximation statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub theta_hat: Vec<f64>,
    pub ssr: f64,
    pub s2: f64,
    pub s: f64,
    pub se: Vec<f64>,
    /// `P R⁻¹` for the column-pivoted QR `J P = Q R`, so row `i` belongs to
    /// parameter `i` and `r_inv r_invᵀ = (JᵀJ)⁻¹`.
    pub r_inv: Vec<Vec<f64>>,
    pub corr: Vec<Vec<f64>>,
    pub n: usize,
    pub p: usize,
    pub converged: bool,
    pub iterations: usize,
    /// Parameters in the numerically dependent part of the Jacobian.
    pub deficient: Vec<usize>,
}

impl FitResult {
    pub fn dof(&self) -> usize {
        self.n - self.p
    }
}

/// Outcome of a fit with some parameters held fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalFit {
    pub theta: Vec<f64>,
    pub ssr: f64,
    pub converged: bool,
    pub iterations: usize,
}

fn ssr_of(residuals: &[f64]) -> f64 {
    residuals.iter().map(|r| r * r).sum()
}

/// SSR at `theta`, or `+∞` when any residual is not finite.
fn objective(model: &ParamModel, data: &Dataset, theta: &[f64]) -> (Vec<f64>, f64) {
    let r = model.residuals(data, theta);
    let ssr = ssr_of(&r);
    (r, if ssr.is_finite() { ssr } else { f64::INFINITY })
}

/// Levenberg–Marquardt over the parameters listed in `free`.
fn levenberg_marquardt(
    model: &ParamModel,
    data: &Dataset,
    theta_start: &[f64],
    free: &[usize],
    opts: &FitOptions,
) -> Result<ConditionalFit, FitError> {
    let mut theta = theta_start.to_vec();
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(FitError::NonFiniteStart);
    }
    let (mut resid, mut ssr) = objective(model, data, &theta);
    if !ssr.is_finite() {
        return Err(FitError::NonFiniteStart);
    }
    if free.is_empty() {
        return Ok(ConditionalFit { theta, ssr, converged: true, iterations: 0 });
    }
    let (n, q) = (data.n(), free.len());
    let mut lambda = f64::NAN;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iters {
        iterations += 1;
        let jac = DMatrix::from_fn(n, q, |k, c| model.partial(free[c]).eval(&theta, data.row(k)));
        if jac.iter().any(|v| !v.is_finite()) {
            break;
        }
        let r = DVector::from_column_slice(&resid);
        let grad = jac.tr_mul(&r);
        if grad.amax() < opts.tol_grad {
            converged = true;
            break;
        }
        if lambda.is_nan() {
            let mean_diag = jac.column_iter().map(|c| c.norm_squared()).sum::<f64>() / q as f64;
            lambda = 1e-3 * if mean_diag > 0.0 { mean_diag } else { 1.0 };
        }
        let lambda_cap = 1e16 * lambda.max(1e-300);
        let mut accepted = false;
        while lambda <= lambda_cap {
            // min ‖J δ − r‖² + λ‖δ‖² via QR of the augmented system
            let mut aug = DMatrix::<f64>::zeros(n + q, q);
            aug.view_mut((0, 0), (n, q)).copy_from(&jac);
            let sl = lambda.sqrt();
            for c in 0..q {
                aug[(n + c, c)] = sl;
            }
            let mut rhs = DVector::<f64>::zeros(n + q);
            rhs.rows_mut(0, n).copy_from(&r);
            let qr = aug.qr();
            let qtb = qr.q().tr_mul(&rhs);
            let Some(delta) = qr.r().solve_upper_triangular(&qtb) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial = theta.clone();
            for (c, &idx) in free.iter().enumerate() {
                trial[idx] += delta[c];
            }
            let (trial_resid, trial_ssr) = objective(model, data, &trial);
            if trial_ssr < ssr {
                let rel_f = (ssr - trial_ssr) / ssr.max(f64::MIN_POSITIVE);
                let rel_x = free
                    .iter()
                    .enumerate()
                    .map(|(c, &idx)| delta[c].abs() / (theta[idx].abs() + 1e-12))
                    .fold(0.0, f64::max);
                theta = trial;
                resid = trial_resid;
                ssr = trial_ssr;
                lambda /= 10.0;
                accepted = true;
                if rel_f < opts.tol_f && rel_x < opts.tol_x {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if converged {
            break;
        }
        if !accepted {
            // no descent direction left at working precision
            converged = grad.amax() <= 1e-6 * (1.0 + ssr);
            break;
        }
    }
    Ok(ConditionalFit { theta, ssr, converged, iterations })
}

fn check_sizes(model: &ParamModel, data: &Dataset) -> Result<(), FitError> {
    model.check_data(data)?;
    let (n, p) = (data.n(), model.n_params());
    if p == 0 {
        return Err(FitError::NoParameters);
    }
    if n <= p {
        return Err(FitError::TooFewObservations { n, p });
    }
    Ok(())
}

/// Least-squares fit of all parameters starting from `theta_start`.
pub fn fit(model: &ParamModel, data: &Dataset, theta_start: &[f64], opts: &FitOptions) -> Result<FitResult, FitError> {
    check_sizes(model, data)?;
    if theta_start.len() != model.n_params() {
        return Err(ModelError::ThetaLength { expected: model.n_params(), got: theta_start.len() }.into());
    }
    let free: Vec<usize> = (0..model.n_params()).collect();
    let outcome = levenberg_marquardt(model, data, theta_start, &free, opts)?;
    let mut result = statistics(model, data, &outcome.theta)?;
    result.converged = outcome.converged;
    result.iterations = outcome.iterations;
    Ok(result)
}

/// Minimize SSR over every parameter except `fixed_index`, which is held
/// at `fixed_value`. The fixed column is removed from the subproblem.
pub fn fit_with_fixed(
    model: &ParamModel,
    data: &Dataset,
    theta_start: &[f64],
    fixed_index: usize,
    fixed_value: f64,
    opts: &FitOptions,
) -> Result<ConditionalFit, FitError> {
    check_sizes(model, data)?;
    let p = model.n_params();
    if fixed_index >= p {
        return Err(FitError::FixedIndex { index: fixed_index, p });
    }
    if theta_start.len() != p {
        return Err(ModelError::ThetaLength { expected: p, got: theta_start.len() }.into());
    }
    let mut start = theta_start.to_vec();
    start[fixed_index] = fixed_value;
    let free: Vec<usize> = (0..p).filter(|&j| j != fixed_index).collect();
    levenberg_marquardt(model, data, &start, &free, opts)
}

/// Linear-approximation statistics at `theta` without optimizing
/// (`converged` is reported as false).
pub fn statistics(model: &ParamModel, data: &Dataset, theta: &[f64]) -> Result<FitResult, FitError> {
    check_sizes(model, data)?;
    let (n, p) = (data.n(), model.n_params());
    let (_, ssr) = objective(model, data, theta);
    if !ssr.is_finite() {
        return Err(FitError::NonFiniteStart);
    }
    let jac = model.jacobian(data, theta)?;
    let s2 = ssr / (n - p) as f64;
    let s = s2.sqrt();

    let qr = jac.col_piv_qr();
    let r = qr.r();
    let mut perm = DMatrix::<f64>::identity(p, p);
    qr.p().permute_columns(&mut perm);
    let r00 = r[(0, 0)].abs();
    let rank = (0..p).take_while(|&k| r[(k, k)].abs() > RANK_TOLERANCE * r00 && r00 > 0.0).count();
    // R⁻¹ of the well-determined leading block, zero elsewhere
    let mut r_inv_perm = DMatrix::<f64>::zeros(p, p);
    if rank > 0 {
        let r11 = r.view((0, 0), (rank, rank)).into_owned();
        if let Some(inv) = r11.solve_upper_triangular(&DMatrix::identity(rank, rank)) {
            r_inv_perm.view_mut((0, 0), (rank, rank)).copy_from(&inv);
        }
    }
    let r_inv = &perm * r_inv_perm;
    // column k of J P is column perm_index[k] of J
    let perm_index: Vec<usize> = (0..p).map(|k| (0..p).find(|&i| perm[(i, k)] == 1.0).unwrap_or(k)).collect();
    let mut deficient: Vec<usize> = perm_index[rank..].to_vec();
    deficient.sort_unstable();

    let row_norms: Vec<f64> = (0..p).map(|i| r_inv.row(i).norm()).collect();
    let se: Vec<f64> = (0..p)
        .map(|i| if deficient.contains(&i) { f64::INFINITY } else { s * row_norms[i] })
        .collect();
    let corr = (0..p)
        .map(|i| {
            (0..p)
                .map(|j| {
                    if i == j {
                        1.0
                    } else if deficient.contains(&i) || deficient.contains(&j) {
                        f64::NAN
                    } else {
                        r_inv.row(i).dot(&r_inv.row(j)) / (row_norms[i] * row_norms[j])
                    }
                })
                .collect()
        })
        .collect();
    let r_inv = (0..p).map(|i| r_inv.row(i).iter().copied().collect()).collect();
    Ok(FitResult {
        theta_hat: theta.to_vec(),
        ssr,
        s2,
        s,
        se,
        r_inv,
        corr,
        n,
        p,
        converged: false,
        iterations: 0,
        deficient,
    })
}

fn check_alpha(alpha: f64) -> Result<(), FitError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(FitError::Alpha(alpha))
    }
}

/// `θ̂_i ± se_i t(n-p, α/2)` for every parameter.
pub fn linear_ci(fit: &FitResult, alpha: f64) -> Result<Vec<(f64, f64)>, FitError> {
    check_alpha(alpha)?;
    let t = t_quantile(fit.dof(), alpha / 2.0)?;
    Ok(fit.theta_hat.iter().zip(&fit.se).map(|(th, se)| (th - se * t, th + se * t)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub center: f64,
    pub lower: f64,
    pub upper: f64,
    /// Delta-method standard error of the prediction.
    pub rse: f64,
}

/// Delta-method standard error `s ‖J(x) P R⁻¹‖` of the prediction at `x`.
pub fn prediction_se(fit: &FitResult, model: &ParamModel, x: &[f64]) -> f64 {
    let grad = model.jacobian_row(&fit.theta_hat, x);
    let p = fit.p;
    let norm2: f64 = (0..p)
        .map(|c| (0..p).map(|j| grad[j] * fit.r_inv[j][c]).sum::<f64>().powi(2))
        .sum();
    fit.s * norm2.sqrt()
}

/// Linear-approximation prediction interval at `x_new`; `include_noise`
/// widens the half-width from `rse·t` to `(rse + s)·t`.
pub fn linear_prediction(
    fit: &FitResult,
    model: &ParamModel,
    x_new: &[f64],
    alpha: f64,
    include_noise: bool,
) -> Result<Prediction, FitError> {
    check_alpha(alpha)?;
    if let Some(k) = model.expr().max_var().filter(|&k| k >= x_new.len()) {
        return Err(ModelError::VariableCount { needed: k, available: x_new.len() }.into());
    }
    let t = t_quantile(fit.dof(), alpha / 2.0)?;
    let center = model.predict(&fit.theta_hat, x_new);
    let rse = prediction_se(fit, model, x_new);
    let half = if include_noise { (rse + fit.s) * t } else { rse * t };
    Ok(Prediction { center, lower: center - half, upper: center + half, rse })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn line() -> ParamModel {
        ParamModel::new(parse("theta[0] + theta[1]*x", &["x"]).unwrap(), vec![0.0, 0.0], 1).unwrap()
    }

    fn noisy_line() -> Dataset {
        let x: Vec<f64> = (0..12).map(|k| k as f64 * 0.5).collect();
        let noise = [0.3, -0.2, 0.1, 0.05, -0.4, 0.25, -0.1, 0.0, 0.2, -0.3, 0.15, -0.05];
        let y: Vec<f64> = x.iter().zip(noise).map(|(x, e)| 1.5 - 0.7 * x + e).collect();
        Dataset::from_columns(&x, &y, "x").unwrap()
    }

    #[test]
    fn exact_line_is_interpolated() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|x| 2.0 * x + 1.0).collect();
        let data = Dataset::from_columns(&x, &y, "x").unwrap();
        let f = fit(&line(), &data, &[0.0, 0.0], &FitOptions::default()).unwrap();
        assert!(f.converged);
        assert!((f.theta_hat[0] - 1.0).abs() < 1e-10 && (f.theta_hat[1] - 2.0).abs() < 1e-10);
        assert!(f.ssr < 1e-20);
    }

    #[test]
    fn qr_route_matches_normal_equations() {
        let data = noisy_line();
        let f = fit(&line(), &data, &[0.0, 0.0], &FitOptions::default()).unwrap();
        let j = line().jacobian(&data, &f.theta_hat).unwrap();
        let inv = (j.transpose() * &j).try_inverse().unwrap();
        for i in 0..2 {
            let se = f.s * inv[(i, i)].sqrt();
            assert!((f.se[i] - se).abs() < 1e-8 * se);
        }
        let c01 = inv[(0, 1)] / (inv[(0, 0)] * inv[(1, 1)]).sqrt();
        assert!((f.corr[0][1] - c01).abs() < 1e-10);
        assert!((f.s2 - f.ssr / 10.0).abs() < 1e-15);
    }

    #[test]
    fn conditional_fit_closed_form() {
        let data = noisy_line();
        let c = -0.5;
        let cf = fit_with_fixed(&line(), &data, &[0.0, 0.0], 1, c, &FitOptions::default()).unwrap();
        let x = data.column(0);
        let shifted: Vec<f64> = data.y().iter().zip(&x).map(|(y, x)| y - c * x).collect();
        let mean = shifted.iter().sum::<f64>() / shifted.len() as f64;
        let ssr: f64 = shifted.iter().map(|v| (v - mean).powi(2)).sum();
        assert_eq!(cf.theta[1], c);
        assert!((cf.theta[0] - mean).abs() < 1e-10);
        assert!((cf.ssr - ssr).abs() < 1e-10 * ssr);
    }

    #[test]
    fn conditional_fit_at_optimum_keeps_optimum() {
        let data = noisy_line();
        let f = fit(&line(), &data, &[0.0, 0.0], &FitOptions::default()).unwrap();
        let cf = fit_with_fixed(&line(), &data, &f.theta_hat, 1, f.theta_hat[1], &FitOptions::default()).unwrap();
        assert!((cf.ssr - f.ssr).abs() < 1e-12);
        assert!((cf.theta[0] - f.theta_hat[0]).abs() < 1e-9);
    }

    #[test]
    fn single_parameter_fixed_returns_ssr_at_point() {
        let m = ParamModel::new(parse("theta[0]*x", &["x"]).unwrap(), vec![1.0], 1).unwrap();
        let data = noisy_line();
        let cf = fit_with_fixed(&m, &data, &[1.0], 0, 0.0, &FitOptions::default()).unwrap();
        let yy: f64 = data.y().iter().map(|y| y * y).sum();
        assert!((cf.ssr - yy).abs() < 1e-12);
        assert_eq!(cf.iterations, 0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let m = line();
        let d = Dataset::from_columns(&[1.0, 2.0], &[1.0, 2.0], "x").unwrap();
        assert_eq!(fit(&m, &d, &[0.0, 0.0], &FitOptions::default()), Err(FitError::TooFewObservations { n: 2, p: 2 }));
        let logm = ParamModel::new(parse("log(theta[0]*x)", &["x"]).unwrap(), vec![1.0], 1).unwrap();
        assert_eq!(fit(&logm, &noisy_line(), &[-1.0], &FitOptions::default()), Err(FitError::NonFiniteStart));
    }

    #[test]
    fn rank_deficiency_is_reported() {
        let m = ParamModel::new(parse("theta[0]*theta[1]*x + theta[2]", &["x"]).unwrap(), vec![1.0, 1.0, 0.0], 1).unwrap();
        let f = fit(&m, &noisy_line(), &[1.0, 1.0, 0.0], &FitOptions::default()).unwrap();
        assert_eq!(f.deficient.len(), 1);
        assert!(f.se.iter().any(|s| s.is_infinite()));
    }

    #[test]
    fn linear_ci_collapses_as_alpha_approaches_one() {
        let f = fit(&line(), &noisy_line(), &[0.0, 0.0], &FitOptions::default()).unwrap();
        let wide = linear_ci(&f, 0.05).unwrap();
        let narrow = linear_ci(&f, 0.999_999).unwrap();
        for i in 0..2 {
            assert!(narrow[i].1 - narrow[i].0 < 1e-5 * (wide[i].1 - wide[i].0));
        }
        assert_eq!(linear_ci(&f, 1.0), Err(FitError::Alpha(1.0)));
    }

    #[test]
    fn leverage_widens_prediction() {
        let data = noisy_line();
        let f = fit(&line(), &data, &[0.0, 0.0], &FitOptions::default()).unwrap();
        let centre = linear_prediction(&f, &line(), &[2.75], 0.05, false).unwrap();
        let edge = linear_prediction(&f, &line(), &[5.5], 0.05, false).unwrap();
        assert!(edge.rse > centre.rse);
        let full = linear_prediction(&f, &line(), &[2.75], 0.05, true).unwrap();
        assert!(full.upper - full.lower > centre.upper - centre.lower);
    }
}
