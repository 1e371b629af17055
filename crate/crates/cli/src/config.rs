//! Analysis configuration: a JSON file, overridden by command-line flags.

use std::path::{Path, PathBuf};

use nlprofile::fit::FitOptions;
use nlprofile::profile::ProfileOptions;
use serde::{Deserialize, Serialize};

use crate::data::read_table;
use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    /// Plot data as JSON next to the report.
    Json,
    /// Plot data as CSV.
    #[default]
    Csv,
}

/// One axis of a prediction grid, `start..=stop` in steps of `step`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub var: String,
    pub start: f64,
    pub step: f64,
    pub stop: f64,
}

impl GridAxis {
    /// Parses `name=start:step:stop`.
    pub fn parse(text: &str) -> Result<GridAxis> {
        let bad = || CliError::Input(format!("grid '{text}' is not of the form name=start:step:stop"));
        let (var, range) = text.split_once('=').ok_or_else(bad)?;
        let nums: Vec<f64> = range.split(':').map(|s| s.trim().parse::<f64>()).collect::<std::result::Result<_, _>>().map_err(|_| bad())?;
        let [start, step, stop] = nums[..] else { return Err(bad()) };
        let axis = GridAxis { var: var.trim().to_string(), start, step, stop };
        axis.values()?;
        Ok(axis)
    }

    pub fn values(&self) -> Result<Vec<f64>> {
        if !(self.step > 0.0) || !self.start.is_finite() || !self.stop.is_finite() || self.stop < self.start {
            return Err(CliError::Input(format!("grid axis '{}' needs start <= stop and step > 0", self.var)));
        }
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        if count > 1_000_000 {
            return Err(CliError::Input(format!("grid axis '{}' has {count} points", self.var)));
        }
        // multiply rather than accumulate so 0.1 steps stay clean
        Ok((0..count).map(|k| self.start + k as f64 * self.step).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointsSource {
    Csv(PathBuf),
    Grid(Vec<GridAxis>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileSettings {
    pub step: f64,
    pub k_max: usize,
    pub tau_max_level: f64,
    pub max_restarts: usize,
}

impl Default for ProfileSettings {
    fn default() -> Self {
        let d = ProfileOptions::default();
        ProfileSettings { step: d.step, k_max: d.k_max, tau_max_level: d.tau_max_level, max_restarts: d.max_restarts }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Inline model text.
    pub expr: Option<String>,
    pub expr_file: Option<PathBuf>,
    /// Starting values when the expression is written with `theta[i]`.
    pub theta0: Option<Vec<f64>>,
    pub data: Option<PathBuf>,
    /// Column name or expression over columns.
    pub target: Option<String>,
    pub vars: Vec<String>,
    pub alphas: Vec<f64>,
    pub contour_alphas: Vec<f64>,
    /// Parameter pairs for contours; empty means all pairs.
    pub pairs: Vec<(usize, usize)>,
    pub profile: ProfileSettings,
    pub optimizer: FitOptions,
    pub points: Option<PointsSource>,
    pub out: PathBuf,
    pub format: Format,
    pub seed: u64,
}

pub const DEFAULT_SEED: u64 = 20_240_611;

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            expr: None,
            expr_file: None,
            theta0: None,
            data: None,
            target: None,
            vars: Vec::new(),
            alphas: vec![0.05],
            contour_alphas: vec![0.2, 0.5],
            pairs: Vec::new(),
            profile: ProfileSettings::default(),
            optimizer: FitOptions::default(),
            points: None,
            out: PathBuf::from("out"),
            format: Format::Csv,
            seed: DEFAULT_SEED,
        }
    }
}

impl AnalysisConfig {
    /// Load a config file; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<AnalysisConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg: AnalysisConfig = serde_json::from_str(&text).map_err(|e| CliError::Table {
            path: path.to_path_buf(),
            line: e.line() as u64,
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        cfg.expr_file.as_mut().map(rebase);
        cfg.data.as_mut().map(rebase);
        if let Some(PointsSource::Csv(p)) = cfg.points.as_mut() {
            rebase(p);
        }
        Ok(cfg)
    }

    pub fn profile_options(&self) -> ProfileOptions {
        ProfileOptions {
            step: self.profile.step,
            k_max: self.profile.k_max,
            tau_max_level: self.profile.tau_max_level,
            max_restarts: self.profile.max_restarts,
            fit: self.optimizer,
            ..ProfileOptions::default()
        }
    }

    pub fn expression_text(&self) -> Result<String> {
        match (&self.expr, &self.expr_file) {
            (Some(e), None) => Ok(e.clone()),
            (None, Some(path)) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                Ok(text.trim().to_string())
            }
            (Some(_), Some(_)) => Err(CliError::Input("give either --expr or --expr-file, not both".into())),
            (None, None) => Err(CliError::Input("no model expression (--expr or --expr-file)".into())),
        }
    }

    pub fn data_path(&self) -> Result<&Path> {
        self.data.as_deref().ok_or_else(|| CliError::Input("no dataset (--data)".into()))
    }

    pub fn target(&self) -> Result<&str> {
        self.target.as_deref().ok_or_else(|| CliError::Input("no target column (--target)".into()))
    }

    pub fn validate(&self) -> Result<()> {
        for &a in self.alphas.iter().chain(&self.contour_alphas) {
            if !(a > 0.0 && a < 1.0) {
                return Err(CliError::Input(format!("alpha {a} is not in (0, 1)")));
            }
        }
        if self.alphas.is_empty() {
            return Err(CliError::Input("alpha list is empty".into()));
        }
        let p = &self.profile;
        if !(p.step > 0.0) || p.k_max < 2 || !(p.tau_max_level > 0.0 && p.tau_max_level < 1.0) {
            return Err(CliError::Input("profile options need step > 0, kmax >= 2 and tau level in (0, 1)".into()));
        }
        if let Some(t) = &self.target {
            if self.vars.iter().any(|v| v == t) {
                return Err(CliError::Input(format!("'{t}' is both target and input variable")));
            }
        }
        Ok(())
    }

    /// Prediction points in `vars` order.
    pub fn prediction_points(&self) -> Result<Vec<Vec<f64>>> {
        match &self.points {
            None => Err(CliError::Input("no prediction points (--points or --grid)".into())),
            Some(PointsSource::Csv(path)) => {
                let table = read_table(path)?;
                let cols: Vec<usize> = self
                    .vars
                    .iter()
                    .map(|v| {
                        table.column_index(v).ok_or_else(|| {
                            CliError::Input(format!("{}: no column '{v}' for prediction points", path.display()))
                        })
                    })
                    .collect::<Result<_>>()?;
                Ok(table.rows.iter().map(|r| cols.iter().map(|&k| r[k]).collect()).collect())
            }
            Some(PointsSource::Grid(axes)) => {
                let mut points = vec![Vec::new()];
                for v in &self.vars {
                    let axis = axes
                        .iter()
                        .find(|a| &a.var == v)
                        .ok_or_else(|| CliError::Input(format!("grid has no axis for variable '{v}'")))?;
                    let values = axis.values()?;
                    points = points
                        .iter()
                        .flat_map(|prefix| {
                            values.iter().map(move |&x| {
                                let mut p = prefix.clone();
                                p.push(x);
                                p
                            })
                        })
                        .collect();
                }
                if let Some(extra) = axes.iter().find(|a| !self.vars.contains(&a.var)) {
                    return Err(CliError::Input(format!("grid axis '{}' is not an input variable", extra.var)));
                }
                Ok(points)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_axis_parses() {
        let a = GridAxis::parse("age=0:0.5:2").unwrap();
        assert_eq!(a.values().unwrap(), vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        let k = GridAxis::parse("x=-0.2:0.1:4.2").unwrap().values().unwrap();
        assert_eq!(k.len(), 45);
        assert!(GridAxis::parse("x=1:0:2").is_err());
        assert!(GridAxis::parse("x=1:2").is_err());
        assert!(GridAxis::parse("1:1:2").is_err());
    }

    #[test]
    fn grid_is_cartesian_in_var_order() {
        let cfg = AnalysisConfig {
            vars: vec!["a".into(), "b".into()],
            points: Some(PointsSource::Grid(vec![
                GridAxis::parse("b=0:1:1").unwrap(),
                GridAxis::parse("a=5:1:7").unwrap(),
            ])),
            ..Default::default()
        };
        let pts = cfg.prediction_points().unwrap();
        assert_eq!(pts.len(), 6);
        assert_eq!(pts[0], vec![5.0, 0.0]);
        assert_eq!(pts[1], vec![5.0, 1.0]);
    }

    #[test]
    fn config_round_trips_and_rejects_unknown_fields() {
        let cfg = AnalysisConfig { expr: Some("a*x".into()), ..Default::default() };
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<AnalysisConfig>(&text).unwrap(), cfg);
        assert!(serde_json::from_str::<AnalysisConfig>(r#"{"exprs": "x"}"#).is_err());
        let bad = AnalysisConfig { alphas: vec![1.5], ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
