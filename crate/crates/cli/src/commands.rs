//! The subcommands. Each one fits the model, runs the requested analyses
//! and writes `report.json` plus plot data into the output directory.

use std::path::{Path, PathBuf};

use nlprofile::contour::{profile_contour, required_tau, ContourError, DEFAULT_STEPS};
use nlprofile::fit::{fit, linear_ci, FitResult};
use nlprofile::profile::{prediction_band, profile_all, profile_ci, PredictionMethod, ProfileSet, TracePoint};
use nlprofile::{parameterize, parse, Dataset, ParamModel};
use serde::Serialize;

use crate::config::{AnalysisConfig, Format};
use crate::data::{build_dataset, read_table};
use crate::error::{CliError, Result};
use crate::kotanchek;
use crate::output::{self, BandKind};
use crate::report::{code, finite, IntervalRow, ProfileSummary, Report, UnavailableContour};

pub const REPORT_FILE: &str = "report.json";
pub const FAILURE_FILE: &str = "profile_failure.json";

/// Which analyses to run after the fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Stages {
    pub profile: bool,
    pub contour: bool,
    pub predict: bool,
}

impl Stages {
    pub const FIT: Stages = Stages { profile: false, contour: false, predict: false };
    pub const PROFILE: Stages = Stages { profile: true, contour: false, predict: false };
    pub const CONTOUR: Stages = Stages { profile: true, contour: true, predict: false };
    pub const PREDICT: Stages = Stages { profile: false, contour: false, predict: true };
}

/// Model and data ready to fit.
pub struct Problem {
    pub source: String,
    pub model: ParamModel,
    pub data: Dataset,
}

pub fn load_problem(cfg: &AnalysisConfig) -> Result<Problem> {
    cfg.validate()?;
    let table = read_table(cfg.data_path()?)?;
    let data = build_dataset(&table, cfg.target()?, &cfg.vars)?;
    let source = cfg.expression_text()?;
    let model = build_model(&source, &cfg.vars, cfg.theta0.as_deref())?;
    model.check_data(&data)?;
    Ok(Problem { source, model, data })
}

/// Parse `source`. Written with `theta[i]` it needs explicit starting
/// values; otherwise numeric literals become the parameters.
pub fn build_model(source: &str, vars: &[String], theta0: Option<&[f64]>) -> Result<ParamModel> {
    let expr = parse(source, vars).map_err(|e| CliError::Expr { context: "model".into(), source: e })?;
    if expr.has_params() {
        let theta0 = theta0.ok_or_else(|| CliError::Input("model uses theta[i]; give starting values with --theta0".into()))?;
        Ok(ParamModel::new(expr, theta0.to_vec(), vars.len())?)
    } else {
        if theta0.is_some() {
            return Err(CliError::Input("--theta0 only applies to models written with theta[i]".into()));
        }
        Ok(parameterize(&expr, vars.len())?)
    }
}

struct Writer<'a> {
    dir: &'a Path,
    format: Format,
}

impl Writer<'_> {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn ext(&self) -> &'static str {
        match self.format {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Serialize)]
struct TraceFile<'a> {
    index: usize,
    points: &'a [TracePoint],
}

#[derive(Serialize)]
struct Failure<'a> {
    error: String,
    fit: &'a FitResult,
}

/// Run the pipeline. The report is written even when a later stage fails,
/// so non-convergence (exit 2) and profile failures (exit 3) still leave
/// diagnostics behind.
pub fn analyze(cfg: &AnalysisConfig, stages: Stages) -> Result<Report> {
    let problem = load_problem(cfg)?;
    let Problem { source, model, data } = &problem;
    std::fs::create_dir_all(&cfg.out).map_err(|e| CliError::io(&cfg.out, e))?;
    let w = Writer { dir: &cfg.out, format: cfg.format };

    let first = fit(model, data, model.theta0(), &cfg.optimizer)?;
    let mut report = Report::new(
        model.expr().display(&cfg.vars).to_string(),
        source.clone(),
        cfg.target()?.to_string(),
        cfg.vars.clone(),
        model.fixed_constants().to_vec(),
        &first,
    );
    let finish = |mut report: Report, outcome: Result<()>| -> Result<Report> {
        report.add_file("report", REPORT_FILE);
        output::write_json(&w.path(REPORT_FILE), &report)?;
        outcome.map(|_| report)
    };

    for &alpha in &cfg.alphas {
        let lin = linear_ci(&first, alpha)?;
        report.intervals.extend(lin.iter().enumerate().map(|(i, &(lo, hi))| linear_row(i, alpha, first.theta_hat[i], lo, hi)));
    }
    if !first.converged {
        return finish(report, Err(CliError::NonConvergence(first.iterations)));
    }

    let mut current = first;
    if stages.profile || stages.contour {
        let mut opts = cfg.profile_options();
        if stages.contour {
            opts.tau_floor = 1.05 * required_tau(current.p, current.dof(), &cfg.contour_alphas).map_err(contour_err)?;
        }
        let params: Vec<usize> = (0..current.p).collect();
        let set = match profile_all(model, data, &current, &params, &opts) {
            Ok(set) => set,
            Err(e) => {
                output::write_json(&w.path(FAILURE_FILE), &Failure { error: e.to_string(), fit: &current })?;
                report.add_file("failure", FAILURE_FILE);
                return finish(report, Err(e.into()));
            }
        };
        if set.restarts > 0 {
            report.warn(code::RESTART, format!("better optimum found while profiling; refitted {} time(s)", set.restarts));
            report.restarts = set.restarts;
            current = set.fit.clone();
            report.set_fit(&current);
        }
        record_profiles(&mut report, &set, cfg, &w)?;
        if !set.traces.iter().any(|t| t.is_ok()) {
            return finish(report, Err(CliError::Profile("no parameter could be profiled".into())));
        }
        if stages.contour {
            write_contours(&mut report, &set, cfg, &w)?;
        }
    }

    if stages.predict {
        let points = cfg.prediction_points()?;
        let opts = cfg.profile_options();
        for &alpha in &cfg.alphas {
            let band = match prediction_band(model, data, &current, &points, alpha, &opts) {
                Ok(b) => b,
                Err(e) => return finish(report, Err(e.into())),
            };
            for b in band.iter().filter(|b| b.method == PredictionMethod::LinearFallback) {
                let why = b.note.as_deref().unwrap_or("profile unavailable");
                report.warn(code::LINEAR_FALLBACK, format!("x = {:?}, alpha = {alpha}: {why}", b.x));
            }
            let suffix = if cfg.alphas.len() > 1 { format!("_a{alpha}") } else { String::new() };
            for (kind, name) in [(BandKind::Expectation, "band_expectation"), (BandKind::Full, "band_full")] {
                let file = format!("{name}{suffix}.{}", w.ext());
                match w.format {
                    Format::Csv => output::write_band_csv(&w.path(&file), &cfg.vars, &band, kind)?,
                    Format::Json => output::write_json(&w.path(&file), &band_json(&band, kind))?,
                }
                report.add_file(name, file);
            }
        }
    }
    finish(report, Ok(()))
}

fn linear_row(index: usize, alpha: f64, estimate: f64, lo: f64, hi: f64) -> IntervalRow {
    IntervalRow {
        index,
        alpha,
        estimate,
        linear_lo: finite(lo),
        linear_hi: finite(hi),
        profile_lo: None,
        profile_hi: None,
        bounded_lo: false,
        bounded_hi: false,
    }
}

fn contour_err(e: ContourError) -> CliError {
    CliError::Profile(e.to_string())
}

fn record_profiles(report: &mut Report, set: &ProfileSet, cfg: &AnalysisConfig, w: &Writer) -> Result<()> {
    let fit = &set.fit;
    report.intervals.clear();
    for &alpha in &cfg.alphas {
        let lin = linear_ci(fit, alpha)?;
        for (i, &(lo, hi)) in lin.iter().enumerate() {
            let mut row = linear_row(i, alpha, fit.theta_hat[i], lo, hi);
            if let Some(trace) = set.trace(i) {
                let (plo, phi) = profile_ci(trace, fit, alpha)?;
                row.profile_lo = finite(plo);
                row.profile_hi = finite(phi);
                row.bounded_lo = plo.is_finite();
                row.bounded_hi = phi.is_finite();
            }
            report.intervals.push(row);
        }
    }
    for (i, result) in set.traces.iter().enumerate() {
        let trace = match result {
            Ok(t) => t,
            Err(msg) => {
                report.warn(code::FAILED, format!("theta[{i}]: {msg}"));
                continue;
            }
        };
        report.profiles.push(ProfileSummary::of(trace));
        for (side, bounded, truncated) in
            [("lower", trace.bounded_left, trace.truncated_left), ("upper", trace.bounded_right, trace.truncated_right)]
        {
            if truncated {
                report.warn(code::TRUNCATED, format!("theta[{i}] {side} side stopped before |tau| = {:.4}", trace.tau_stop));
            } else if !bounded {
                report.warn(code::UNBOUNDED, format!("theta[{i}] {side} side never reaches |tau| = {:.4}", trace.tau_stop));
            }
        }
        if !trace.monotone {
            report.warn(code::NON_MONOTONE, format!("theta[{i}] trace is not monotone"));
        }
        if trace.degraded {
            report.warn(code::DEGRADED, format!("theta[{i}] has fewer than 3 distinct points; linear interpolation used"));
        }
        if trace.unconverged_refits > 0 {
            report.warn(code::REFIT_UNCONVERGED, format!("theta[{i}]: {} conditional refits hit the iteration limit", trace.unconverged_refits));
        }
        let file = format!("trace_theta{i}.{}", w.ext());
        match w.format {
            Format::Csv => output::write_trace_csv(&w.path(&file), trace)?,
            Format::Json => output::write_json(&w.path(&file), &TraceFile { index: i, points: &trace.points })?,
        }
        report.add_file("trace", file);
    }
    Ok(())
}

fn write_contours(report: &mut Report, set: &ProfileSet, cfg: &AnalysisConfig, w: &Writer) -> Result<()> {
    let p = set.fit.p;
    let pairs: Vec<(usize, usize)> = if cfg.pairs.is_empty() {
        (0..p).flat_map(|i| (i + 1..p).map(move |j| (i, j))).collect()
    } else {
        cfg.pairs.clone()
    };
    if let Some(&(i, j)) = pairs.iter().find(|&&(i, j)| i >= p || j >= p || i == j) {
        return Err(CliError::Input(format!("contour pair ({i}, {j}) is not two distinct parameters below {p}")));
    }
    for &alpha in &cfg.contour_alphas {
        for &(i, j) in &pairs {
            let mut unavailable = |code: &str, reason: String| {
                report.unavailable_contours.push(UnavailableContour { i, j, alpha, code: code.into(), reason: reason.clone() });
                report.warn(code::CONTOUR_UNAVAILABLE, format!("({i}, {j}) at alpha {alpha}: {reason}"));
            };
            let (Some(ti), Some(tj)) = (set.trace(i), set.trace(j)) else {
                unavailable("missing_trace", "a profile trace failed".into());
                continue;
            };
            let curve = match profile_contour(ti, tj, &set.fit, alpha, DEFAULT_STEPS) {
                Ok(c) => c,
                Err(ContourError::Unavailable { reason, .. }) => {
                    unavailable("trace_range", reason);
                    continue;
                }
                Err(e) => {
                    unavailable("failed", e.to_string());
                    continue;
                }
            };
            if curve.extrapolated {
                report.warn(code::CONTOUR_EXTRAPOLATED, format!("({i}, {j}) at alpha {alpha} extrapolates a trace spline"));
            }
            let file = format!("contour_{i}_{j}_a{alpha}.{}", w.ext());
            match w.format {
                Format::Csv => output::write_contour_csv(&w.path(&file), &curve)?,
                Format::Json => output::write_json(&w.path(&file), &curve)?,
            }
            report.add_file("contour", file);
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct BandJson<'a> {
    x: &'a [f64],
    center: f64,
    linear: (f64, f64),
    profile: (f64, f64),
    method: &'static str,
}

fn band_json(band: &[nlprofile::profile::BandPoint], kind: BandKind) -> Vec<BandJson<'_>> {
    band.iter()
        .map(|b| {
            let (linear, profile) = match kind {
                BandKind::Expectation => (b.linear_expectation, b.profile_expectation),
                BandKind::Full => (b.linear_full, b.profile_full),
            };
            BandJson { x: &b.x, center: b.center, linear, profile, method: output::method_flag(b.method) }
        })
        .collect()
}

/// Write `kotanchek_train.csv` and `kotanchek_test.csv` into `out`.
pub fn gen_kotanchek(out: &Path, seed: u64) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let train = out.join("kotanchek_train.csv");
    let test = out.join("kotanchek_test.csv");
    output::write_table(&train, &kotanchek::training_set(seed))?;
    output::write_table(&test, &kotanchek::test_grid())?;
    Ok(vec![train, test])
}

