use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nlprofile_cli::commands::{analyze, gen_kotanchek, Stages};
use nlprofile_cli::config::{AnalysisConfig, Format, GridAxis, PointsSource, DEFAULT_SEED};
use nlprofile_cli::{CliError, Report, Result};

/// Fit symbolic nonlinear regression models and compute linear and
/// likelihood-profile intervals, pairwise regions and prediction bands.
#[derive(Parser)]
#[command(name = "nlprofile", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the model and write the fit report.
    Fit(Common),
    /// Profile every parameter; writes traces and the interval table.
    Profile(Common),
    /// Profile-based pairwise confidence regions.
    Contour {
        #[command(flatten)]
        common: Common,
        /// Pairs as `i,j`; repeat for several. Default: all pairs.
        #[arg(long = "pair", value_parser = parse_pair)]
        pairs: Vec<(usize, usize)>,
        /// Contour levels (default 0.2 and 0.5).
        #[arg(long = "contour-alpha")]
        contour_alphas: Vec<f64>,
    },
    /// Linear and profile prediction bands.
    Predict(Common),
    /// Everything: fit, profiles, contours and (with points) bands.
    Report {
        #[command(flatten)]
        common: Common,
        /// Pairs as `i,j`; repeat for several. Default: all pairs.
        #[arg(long = "pair", value_parser = parse_pair)]
        pairs: Vec<(usize, usize)>,
        /// Contour levels (default 0.2 and 0.5).
        #[arg(long = "contour-alpha")]
        contour_alphas: Vec<f64>,
    },
    /// Write the Kotanchek training sample and test grid.
    GenKotanchek {
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
}

#[derive(Args)]
struct Common {
    /// JSON analysis config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model expression; numeric constants become parameters.
    #[arg(long, allow_hyphen_values = true)]
    expr: Option<String>,
    /// Read the model expression from a file.
    #[arg(long)]
    expr_file: Option<PathBuf>,
    /// Starting values for models written with theta[i], comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    theta0: Option<Vec<f64>>,
    /// CSV data with a header row.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Column name or expression over columns, e.g. `log(conc)`.
    #[arg(long)]
    target: Option<String>,
    /// Input columns, comma separated, in model order.
    #[arg(long, value_delimiter = ',')]
    vars: Option<Vec<String>>,
    /// Interval level is 1 - alpha; repeat for several (default 0.05).
    #[arg(long = "alpha")]
    alphas: Vec<f64>,
    /// Profile step divisor: the first step is se/step.
    #[arg(long)]
    step: Option<f64>,
    /// Maximum profile points per direction.
    #[arg(long)]
    kmax: Option<usize>,
    /// Profiling stops past the 1 - tau-level quantile.
    #[arg(long)]
    tau_level: Option<f64>,
    /// Refits allowed when profiling finds a better optimum.
    #[arg(long)]
    max_restarts: Option<usize>,
    /// Optimizer iteration limit.
    #[arg(long)]
    max_iters: Option<usize>,
    /// Relative SSR change at convergence.
    #[arg(long)]
    tol_f: Option<f64>,
    /// Relative parameter change at convergence.
    #[arg(long)]
    tol_x: Option<f64>,
    /// CSV of prediction points with one column per input variable.
    #[arg(long, conflicts_with = "grid")]
    points: Option<PathBuf>,
    /// Grid axis `name=start:step:stop`; repeat per variable.
    #[arg(long, value_parser = GridAxis::parse)]
    grid: Vec<GridAxis>,
    /// Output directory (default `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Format of plot data files; the report is always JSON.
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Accepted for symmetry with gen-kotanchek; analyses are deterministic.
    #[arg(long)]
    seed: Option<u64>,
}

fn parse_pair(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("pair '{s}' is not i,j"))?;
    let n = |t: &str| t.trim().parse::<usize>().map_err(|_| format!("pair '{s}' is not i,j"));
    Ok((n(a)?, n(b)?))
}

impl Common {
    fn into_config(self) -> Result<AnalysisConfig> {
        let mut cfg = match &self.config {
            Some(path) => AnalysisConfig::load(path)?,
            None => AnalysisConfig::default(),
        };
        if self.expr.is_some() || self.expr_file.is_some() {
            cfg.expr = self.expr;
            cfg.expr_file = self.expr_file;
        }
        macro_rules! set {
            ($($field:expr => $value:expr),* $(,)?) => { $(if let Some(v) = $value { $field = v; })* };
        }
        set! {
            cfg.vars => self.vars,
            cfg.profile.step => self.step,
            cfg.profile.k_max => self.kmax,
            cfg.profile.tau_max_level => self.tau_level,
            cfg.profile.max_restarts => self.max_restarts,
            cfg.optimizer.max_iters => self.max_iters,
            cfg.optimizer.tol_f => self.tol_f,
            cfg.optimizer.tol_x => self.tol_x,
            cfg.out => self.out,
            cfg.format => self.format,
            cfg.seed => self.seed,
        }
        if self.theta0.is_some() {
            cfg.theta0 = self.theta0;
        }
        if self.data.is_some() {
            cfg.data = self.data;
        }
        if self.target.is_some() {
            cfg.target = self.target;
        }
        if !self.alphas.is_empty() {
            cfg.alphas = self.alphas;
        }
        if let Some(p) = self.points {
            cfg.points = Some(PointsSource::Csv(p));
        } else if !self.grid.is_empty() {
            cfg.points = Some(PointsSource::Grid(self.grid));
        }
        Ok(cfg)
    }
}

fn with_contours(common: Common, pairs: Vec<(usize, usize)>, alphas: Vec<f64>) -> Result<AnalysisConfig> {
    let mut cfg = common.into_config()?;
    if !pairs.is_empty() {
        cfg.pairs = pairs;
    }
    if !alphas.is_empty() {
        cfg.contour_alphas = alphas;
    }
    Ok(cfg)
}

fn summarize(report: &Report) {
    println!("{}", report.model);
    println!("n = {}  p = {}  SSR = {:.6e}  s2 = {:.6e}", report.n, report.p, report.ssr, report.s2);
    for row in &report.parameters {
        let se = row.se.map_or("inf".to_string(), |s| format!("{s:.6e}"));
        println!("theta[{}] = {:+.6e}  se {se}", row.index, row.estimate);
    }
    let end = |v: Option<f64>, unbounded: &str| v.map_or(unbounded.to_string(), |v| format!("{v:+.6e}"));
    for row in &report.intervals {
        let level = 100.0 * (1.0 - row.alpha);
        let linear = format!("[{}, {}]", end(row.linear_lo, "-inf"), end(row.linear_hi, "inf"));
        let profile = if report.profiles.iter().any(|p| p.index == row.index) {
            format!("  profile [{}, {}]", end(row.profile_lo, "-inf"), end(row.profile_hi, "inf"))
        } else {
            String::new()
        };
        println!("theta[{}] {level}%: linear {linear}{profile}", row.index);
    }
    for w in &report.warnings {
        eprintln!("warning [{}]: {}", w.code, w.message);
    }
}

fn run(cli: Cli) -> Result<()> {
    let (cfg, stages) = match cli.command {
        Command::Fit(c) => (c.into_config()?, Stages::FIT),
        Command::Profile(c) => (c.into_config()?, Stages::PROFILE),
        Command::Predict(c) => (c.into_config()?, Stages::PREDICT),
        Command::Contour { common, pairs, contour_alphas } => (with_contours(common, pairs, contour_alphas)?, Stages::CONTOUR),
        Command::Report { common, pairs, contour_alphas } => {
            let cfg = with_contours(common, pairs, contour_alphas)?;
            let predict = cfg.points.is_some();
            (cfg, Stages { profile: true, contour: true, predict })
        }
        Command::GenKotanchek { out, seed } => {
            for path in gen_kotanchek(&out, seed)? {
                println!("wrote {}", path.display());
            }
            return Ok(());
        }
    };
    let report = analyze(&cfg, stages)?;
    summarize(&report);
    println!("output in {}", cfg.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors are input errors; exit code 2 means non-convergence
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::NonConvergence(_) | CliError::Profile(_) = e {
                eprintln!("partial results were written to the output directory");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
