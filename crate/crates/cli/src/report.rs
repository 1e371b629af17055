//! The analysis report: fit summary, interval table, warnings and the
//! manifest of files written alongside it.

use nlprofile::fit::FitResult;
use nlprofile::model::{check_identifiability, FixedConstant};
use nlprofile::profile::ProfileTrace;
use serde::{Deserialize, Serialize};

/// Warning codes. Stable; scripts match on them.
pub mod code {
    pub const NOT_CONVERGED: &str = "fit.not_converged";
    pub const INFINITE_SE: &str = "fit.infinite_se";
    pub const RANK_DEFICIENT: &str = "identifiability.rank_deficient";
    pub const CORRELATED: &str = "identifiability.correlated";
    pub const WEAK: &str = "identifiability.weak";
    pub const ZERO: &str = "identifiability.zero";
    pub const RESTART: &str = "profile.restart";
    pub const FAILED: &str = "profile.failed";
    pub const UNBOUNDED: &str = "profile.unbounded";
    pub const TRUNCATED: &str = "profile.truncated";
    pub const NON_MONOTONE: &str = "profile.non_monotone";
    pub const DEGRADED: &str = "profile.degraded";
    pub const REFIT_UNCONVERGED: &str = "profile.refit_unconverged";
    pub const CONTOUR_UNAVAILABLE: &str = "contour.unavailable";
    pub const CONTOUR_EXTRAPOLATED: &str = "contour.extrapolated";
    pub const LINEAR_FALLBACK: &str = "predict.linear_fallback";
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Warning {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterRow {
    pub index: usize,
    pub estimate: f64,
    /// `null` when infinite (rank-deficient Jacobian).
    pub se: Option<f64>,
}

/// Linear and profile bounds side by side; a `null` profile bound means
/// that side is unbounded at this level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalRow {
    pub index: usize,
    pub alpha: f64,
    pub estimate: f64,
    pub linear_lo: Option<f64>,
    pub linear_hi: Option<f64>,
    pub profile_lo: Option<f64>,
    pub profile_hi: Option<f64>,
    pub bounded_lo: bool,
    pub bounded_hi: bool,
}

/// Shape of one profile trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSummary {
    pub index: usize,
    pub points: usize,
    pub tau_min: f64,
    pub tau_max: f64,
    /// `|τ|` at which a side counts as bounded.
    pub tau_stop: f64,
    pub bounded_left: bool,
    pub bounded_right: bool,
    pub truncated_left: bool,
    pub truncated_right: bool,
    pub monotone: bool,
}

impl ProfileSummary {
    pub fn of(trace: &ProfileTrace) -> ProfileSummary {
        let (tau_min, tau_max) = trace.tau_range();
        ProfileSummary {
            index: trace.index,
            points: trace.points.len(),
            tau_min,
            tau_max,
            tau_stop: trace.tau_stop,
            bounded_left: trace.bounded_left,
            bounded_right: trace.bounded_right,
            truncated_left: trace.truncated_left,
            truncated_right: trace.truncated_right,
            monotone: trace.monotone,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub kind: String,
    /// Relative to the output directory.
    pub path: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnavailableContour {
    pub i: usize,
    pub j: usize,
    pub alpha: f64,
    pub code: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    /// Canonical print of the parameterized model.
    pub model: String,
    pub source: String,
    pub target: String,
    pub vars: Vec<String>,
    pub n: usize,
    pub p: usize,
    pub ssr: f64,
    pub s2: f64,
    pub converged: bool,
    pub iterations: usize,
    pub restarts: usize,
    pub parameters: Vec<ParameterRow>,
    /// Lower triangle, row `i` holds `corr(θ_i, θ_0..=θ_i)`.
    pub correlation: Vec<Vec<Option<f64>>>,
    pub fixed_constants: Vec<FixedConstant>,
    pub intervals: Vec<IntervalRow>,
    pub profiles: Vec<ProfileSummary>,
    pub unavailable_contours: Vec<UnavailableContour>,
    pub warnings: Vec<Warning>,
    pub files: Vec<FileEntry>,
}

pub fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

impl Report {
    pub fn new(model: String, source: String, target: String, vars: Vec<String>, fixed: Vec<FixedConstant>, fit: &FitResult) -> Report {
        let mut r = Report {
            model,
            source,
            target,
            vars,
            n: fit.n,
            p: fit.p,
            ssr: 0.0,
            s2: 0.0,
            converged: false,
            iterations: 0,
            restarts: 0,
            parameters: Vec::new(),
            correlation: Vec::new(),
            fixed_constants: fixed,
            intervals: Vec::new(),
            profiles: Vec::new(),
            unavailable_contours: Vec::new(),
            warnings: Vec::new(),
            files: Vec::new(),
        };
        r.set_fit(fit);
        r
    }

    /// Replace the fit summary (after a profiling restart) and recompute
    /// the fit-level warnings.
    pub fn set_fit(&mut self, fit: &FitResult) {
        self.ssr = fit.ssr;
        self.s2 = fit.s2;
        self.converged = fit.converged;
        self.iterations = fit.iterations;
        self.parameters = (0..fit.p)
            .map(|i| ParameterRow { index: i, estimate: fit.theta_hat[i], se: finite(fit.se[i]) })
            .collect();
        self.correlation = (0..fit.p).map(|i| (0..=i).map(|j| finite(fit.corr[i][j])).collect()).collect();

        self.warnings.retain(|w| !w.code.starts_with("fit.") && !w.code.starts_with("identifiability."));
        if !fit.converged {
            self.warn(code::NOT_CONVERGED, format!("optimizer stopped after {} iterations without converging", fit.iterations));
        }
        for (i, se) in fit.se.iter().enumerate() {
            if !se.is_finite() {
                self.warn(code::INFINITE_SE, format!("theta[{i}] has infinite standard error; its intervals are unbounded"));
            }
        }
        let ident = check_identifiability(fit);
        if let Some(msg) = ident.rank_deficient {
            self.warn(code::RANK_DEFICIENT, msg);
        }
        for (i, j, c) in ident.correlated_pairs {
            self.warn(code::CORRELATED, format!("corr(theta[{i}], theta[{j}]) = {c:.6}"));
        }
        for i in ident.weak_parameters {
            self.warn(code::WEAK, format!("theta[{i}] is poorly determined (se/|estimate| = {:.3e})", ident.se_ratio[i]));
        }
        for i in ident.zero_parameters {
            self.warn(code::ZERO, format!("theta[{i}] is estimated as exactly zero"));
        }
    }

    pub fn warn(&mut self, code: &str, message: impl Into<String>) {
        self.warnings.push(Warning { code: code.to_string(), message: message.into() });
    }

    pub fn add_file(&mut self, kind: &str, path: impl Into<String>) {
        self.files.push(FileEntry { kind: kind.to_string(), path: path.into() });
    }

    pub fn has_warning(&self, code: &str) -> bool {
        self.warnings.iter().any(|w| w.code == code)
    }

    pub fn theta_hat(&self) -> Vec<f64> {
        self.parameters.iter().map(|p| p.estimate).collect()
    }

    /// Full symmetric correlation matrix rebuilt from the stored triangle.
    pub fn correlation_matrix(&self) -> Vec<Vec<f64>> {
        let p = self.correlation.len();
        let at = |i: usize, j: usize| self.correlation[i.max(j)][i.min(j)].unwrap_or(f64::NAN);
        (0..p).map(|i| (0..p).map(|j| at(i, j)).collect()).collect()
    }
}
