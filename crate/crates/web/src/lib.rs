//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every entry point takes a JSON request and returns a JSON response, so
//! the page needs no generated type glue. Errors come back as
//! `{"error": "..."}` rather than exceptions.

use nlprofile::contour::tau_scale;
use nlprofile::fit::{fit, linear_ci, FitResult};
use nlprofile::profile::{prediction_band, profile_all, profile_ci, ProfileOptions, ProfileSet};
use nlprofile::{parameterize, parse, profile_contour, Dataset, FitOptions, ParamModel};
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

/// A single-input problem: `y ≈ f(x)` with `f` given as text.
#[derive(Debug, Clone, Deserialize)]
pub struct Problem {
    pub expr: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

fn default_alpha() -> f64 {
    0.05
}

#[derive(Debug, Deserialize)]
pub struct ContourRequest {
    #[serde(flatten)]
    pub problem: Problem,
    pub i: usize,
    pub j: usize,
    #[serde(default = "default_steps")]
    pub steps: usize,
}

fn default_steps() -> usize {
    100
}

#[derive(Debug, Deserialize)]
pub struct BandRequest {
    #[serde(flatten)]
    pub problem: Problem,
    /// Evaluation points; defaults to 50 points spanning the data.
    #[serde(default)]
    pub at: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct Interval {
    pub estimate: f64,
    pub se: f64,
    pub linear: (f64, f64),
    /// `null` ends are unbounded.
    pub profile: Option<(Option<f64>, Option<f64>)>,
    /// `(θ_i, τ)` samples of the profile, for plotting.
    pub trace: Vec<(f64, f64)>,
}

#[derive(Debug, Serialize)]
pub struct FitSummary {
    pub model: String,
    pub s2: f64,
    pub dof: usize,
    pub restarts: usize,
    pub parameters: Vec<Interval>,
    pub correlation: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize)]
pub struct Contour {
    pub profile: Vec<(f64, f64)>,
    pub linear: Vec<(f64, f64)>,
    pub estimate: (f64, f64),
    pub extrapolated: bool,
}

#[derive(Debug, Serialize)]
pub struct BandRow {
    pub x: f64,
    pub center: f64,
    pub linear_expectation: (f64, f64),
    pub profile_expectation: (Option<f64>, Option<f64>),
    pub linear_full: (f64, f64),
    pub profile_full: (Option<f64>, Option<f64>),
    pub fallback: bool,
}

type Result<T> = std::result::Result<T, String>;

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

struct Fitted {
    model: ParamModel,
    data: Dataset,
    set: ProfileSet,
}

impl Fitted {
    fn new(problem: &Problem, contour_alpha: Option<f64>) -> Result<Fitted> {
        let source = parse(&problem.expr, &["x"]).map_err(|e| e.to_string())?;
        let model = parameterize(&source, 1).map_err(|e| e.to_string())?;
        if model.n_params() == 0 {
            return Err("the expression has no numeric constants to estimate".into());
        }
        let data = Dataset::from_columns(&problem.x, &problem.y, "x").map_err(|e| e.to_string())?;
        let first = fit(&model, &data, model.theta0(), &FitOptions::default()).map_err(|e| e.to_string())?;
        if !first.converged {
            return Err(format!("fit did not converge after {} iterations", first.iterations));
        }
        let mut opts = ProfileOptions::default();
        if let Some(alpha) = contour_alpha {
            opts.tau_floor = 1.05 * tau_scale(first.p, first.dof(), alpha).map_err(|e| e.to_string())?;
        }
        let params: Vec<usize> = (0..first.p).collect();
        let set = profile_all(&model, &data, &first, &params, &opts).map_err(|e| e.to_string())?;
        Ok(Fitted { model, data, set })
    }

    fn fit(&self) -> &FitResult {
        &self.set.fit
    }
}

/// Fit, then linear and profile intervals for every parameter.
pub fn fit_intervals(problem: &Problem) -> Result<FitSummary> {
    let f = Fitted::new(problem, None)?;
    let fit = f.fit();
    let linear = linear_ci(fit, problem.alpha).map_err(|e| e.to_string())?;
    let parameters = (0..fit.p)
        .map(|i| {
            let trace = f.set.trace(i);
            Interval {
                estimate: fit.theta_hat[i],
                se: fit.se[i],
                linear: linear[i],
                profile: trace
                    .and_then(|t| profile_ci(t, fit, problem.alpha).ok())
                    .map(|(lo, hi)| (finite(lo), finite(hi))),
                trace: trace.map_or(Vec::new(), |t| t.points.iter().map(|pt| (pt.theta[i], pt.tau)).collect()),
            }
        })
        .collect();
    Ok(FitSummary {
        model: f.model.expr().display(&["x".to_string()]).to_string(),
        s2: fit.s2,
        dof: fit.dof(),
        restarts: f.set.restarts,
        parameters,
        correlation: fit.corr.clone(),
    })
}

/// Joint `1 - alpha` region of `θ_i`, `θ_j`: profile contour and the
/// linear-approximation ellipse.
pub fn pair_contour(req: &ContourRequest) -> Result<Contour> {
    let alpha = req.problem.alpha;
    let f = Fitted::new(&req.problem, Some(alpha))?;
    let fit = f.fit();
    if req.i == req.j || req.i >= fit.p || req.j >= fit.p {
        return Err(format!("need two distinct parameters below {}", fit.p));
    }
    let trace = |k: usize| f.set.trace(k).ok_or_else(|| format!("theta[{k}] could not be profiled"));
    let curve = profile_contour(trace(req.i)?, trace(req.j)?, fit, alpha, req.steps).map_err(|e| e.to_string())?;
    let c = tau_scale(fit.p, fit.dof(), alpha).map_err(|e| e.to_string())?;
    Ok(Contour {
        profile: curve.points,
        linear: ellipse(fit, req.i, req.j, c, req.steps),
        estimate: (fit.theta_hat[req.i], fit.theta_hat[req.j]),
        extrapolated: curve.extrapolated,
    })
}

/// `θ̂ + c L u(φ)` where `L Lᵀ` is the 2×2 covariance block.
fn ellipse(fit: &FitResult, i: usize, j: usize, c: f64, steps: usize) -> Vec<(f64, f64)> {
    let cov = |a: usize, b: usize| fit.s2 * (0..fit.p).map(|k| fit.r_inv[a][k] * fit.r_inv[b][k]).sum::<f64>();
    let l11 = cov(i, i).sqrt();
    let l21 = cov(i, j) / l11;
    let l22 = (cov(j, j) - l21 * l21).max(0.0).sqrt();
    (0..=steps)
        .map(|k| {
            let phi = std::f64::consts::TAU * k as f64 / steps as f64;
            let (u, v) = (phi.cos(), phi.sin());
            (fit.theta_hat[i] + c * l11 * u, fit.theta_hat[j] + c * (l21 * u + l22 * v))
        })
        .collect()
}

/// Expectation and full prediction bands, linear and profile.
pub fn prediction_bands(req: &BandRequest) -> Result<Vec<BandRow>> {
    let f = Fitted::new(&req.problem, None)?;
    let at = if req.at.is_empty() {
        let lo = req.problem.x.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = req.problem.x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (0..50).map(|k| lo + (hi - lo) * k as f64 / 49.0).collect()
    } else {
        req.at.clone()
    };
    let points: Vec<Vec<f64>> = at.iter().map(|&x| vec![x]).collect();
    let band = prediction_band(&f.model, &f.data, f.fit(), &points, req.problem.alpha, &ProfileOptions::default())
        .map_err(|e| e.to_string())?;
    let pair = |(a, b): (f64, f64)| (finite(a), finite(b));
    Ok(band
        .into_iter()
        .map(|b| BandRow {
            x: b.x[0],
            center: b.center,
            linear_expectation: b.linear_expectation,
            profile_expectation: pair(b.profile_expectation),
            linear_full: b.linear_full,
            profile_full: pair(b.profile_full),
            fallback: b.method == nlprofile::profile::PredictionMethod::LinearFallback,
        })
        .collect())
}

fn respond<Req: for<'de> Deserialize<'de>, Resp: Serialize>(request: &str, run: impl Fn(&Req) -> Result<Resp>) -> String {
    let out = serde_json::from_str::<Req>(request).map_err(|e| format!("bad request: {e}")).and_then(|r| run(&r));
    match out {
        Ok(v) => serde_json::to_string(&v).unwrap_or_else(|e| error_json(&e.to_string())),
        Err(e) => error_json(&e),
    }
}

fn error_json(message: &str) -> String {
    serde_json::json!({ "error": message }).to_string()
}

#[wasm_bindgen(js_name = fitIntervals)]
pub fn fit_intervals_json(request: &str) -> String {
    respond(request, fit_intervals)
}

#[wasm_bindgen(js_name = pairContour)]
pub fn pair_contour_json(request: &str) -> String {
    respond(request, pair_contour)
}

#[wasm_bindgen(js_name = predictionBands)]
pub fn prediction_bands_json(request: &str) -> String {
    respond(request, prediction_bands)
}
