use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nlprofile_cli::commands::{analyze, Stages};
use nlprofile_cli::config::{AnalysisConfig, Format, GridAxis, PointsSource};
use nlprofile_cli::kotanchek::kotanchek;
use nlprofile_cli::output::{read_band_csv, read_contour_csv, read_json, read_trace_csv};
use nlprofile_cli::report::Report;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn config(name: &str, out: &Path) -> AnalysisConfig {
    let mut cfg = AnalysisConfig::load(&data(name)).unwrap();
    cfg.out = out.to_path_buf();
    cfg
}

fn nlprofile(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nlprofile")).args(args).output().unwrap()
}

#[test]
fn every_emitted_file_reads_back() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("pcb.json", dir.path());
    let report = analyze(&cfg, Stages { profile: true, contour: true, predict: true }).unwrap();

    let back: Report = read_json(&dir.path().join("report.json")).unwrap();
    assert_eq!(back, report, "report JSON must round-trip exactly");
    assert_eq!(report.files.iter().filter(|f| f.kind == "contour").count(), 6);

    for entry in &report.files {
        let path = dir.path().join(&entry.path);
        match entry.kind.as_str() {
            "trace" => {
                let (index, points) = read_trace_csv(&path).unwrap();
                assert!(points.len() >= 3);
                assert!(points.iter().all(|(_, theta)| theta.len() == 3), "{index}");
            }
            "contour" => assert_eq!(read_contour_csv(&path).unwrap().len(), 100),
            "band_expectation" | "band_full" => {
                let rows = read_band_csv(&path).unwrap();
                assert_eq!(rows.len(), 27);
                assert!(rows.iter().all(|r| r.linear.0 < r.center && r.center < r.linear.1));
            }
            "report" => {}
            other => panic!("unexpected file kind {other}"),
        }
    }
}

#[test]
fn profile_expectation_band_is_monotone_for_pcb() {
    let dir = tempfile::tempdir().unwrap();
    analyze(&config("pcb.json", dir.path()), Stages::PREDICT).unwrap();
    let rows = read_band_csv(&dir.path().join("band_expectation.csv")).unwrap();
    for w in rows.windows(2) {
        assert!(w[1].profile.0 >= w[0].profile.0 && w[1].profile.1 >= w[0].profile.1, "{:?}", w[1].x);
    }
}

#[test]
fn linear_bundle_profile_matches_linear_intervals() {
    let dir = tempfile::tempdir().unwrap();
    let report = analyze(&config("linear.json", dir.path()), Stages::PROFILE).unwrap();
    assert_eq!(report.intervals.len(), 2);
    for row in &report.intervals {
        let (lo, hi) = (row.linear_lo.unwrap(), row.linear_hi.unwrap());
        let width = hi - lo;
        assert!((row.profile_lo.unwrap() - lo).abs() < 1e-6 * width);
        assert!((row.profile_hi.unwrap() - hi).abs() < 1e-6 * width);
        assert!(row.bounded_lo && row.bounded_hi);
    }
    assert!(report.warnings.is_empty(), "{:?}", report.warnings);
}

#[test]
fn kotanchek_slice_bands_contain_the_true_function() {
    let dir = tempfile::tempdir().unwrap();
    let report = analyze(&config("kotanchek.json", dir.path()), Stages::PREDICT).unwrap();
    assert_eq!(report.p, 7);
    // The expression is only an approximation of the function, so its
    // expectation band is biased on part of the slice; the full band has
    // room for that and must cover the truth.
    let rows = read_band_csv(&dir.path().join("band_expectation.csv")).unwrap();
    assert_eq!(rows.len(), 41);
    assert!(rows.iter().all(|r| r.profile.0 <= r.profile.1));
    let rows = read_band_csv(&dir.path().join("band_full.csv")).unwrap();
    assert_eq!(rows.len(), 41);
    for r in &rows {
        let truth = kotanchek(r.x[0], r.x[1]);
        assert!(r.linear.0 <= truth && truth <= r.linear.1, "linear at {:?}", r.x);
        assert!(r.profile.0 <= truth && truth <= r.profile.1, "profile at {:?}", r.x);
    }
}

#[test]
fn json_format_writes_json_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config("linear.json", dir.path());
    cfg.format = Format::Json;
    cfg.points = Some(PointsSource::Grid(vec![GridAxis::parse("dose=0:5:10").unwrap()]));
    let report = analyze(&cfg, Stages { profile: true, contour: true, predict: true }).unwrap();
    for f in &report.files {
        assert!(f.path.ends_with(".json"), "{}", f.path);
        let value: serde_json::Value = read_json(&dir.path().join(&f.path)).unwrap();
        assert!(!value.is_null());
    }
}

#[test]
fn fit_command_reports_pcb() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let cfg = data("pcb.json");
    let run = nlprofile(&["fit", "--config", cfg.to_str().unwrap(), "--out", out]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let report: Report = read_json(&dir.path().join("report.json")).unwrap();
    assert_eq!(report.p, 3);
    assert!((report.s2 - 0.247).abs() < 0.002);
    assert_eq!(report.correlation.iter().map(Vec::len).collect::<Vec<_>>(), [1, 2, 3]);
    let text = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
    assert!(text.contains("\"s2\": 2.4733846314"), "17 significant digits");
}

#[test]
fn explicit_parameters_need_starting_values() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let pcb = data("pcb.csv");
    let common = ["--data", pcb.to_str().unwrap(), "--target", "log(conc)", "--vars", "age", "--out", out];
    let expr = ["--expr", "theta[0]*exp(theta[1]*age) + theta[2]"];
    let missing = nlprofile(&[&["fit"][..], &expr, &common].concat());
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("--theta0"));
    let ok = nlprofile(&[&["fit"][..], &expr, &common, &["--theta0", "-4,-0.2,3"]].concat());
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));
    let report: Report = read_json(&dir.path().join("report.json")).unwrap();
    assert!((report.s2 - 0.247).abs() < 0.002);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let out = out.to_str().unwrap();

    // input errors name the file and line
    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "age,conc\n").unwrap();
    let run = nlprofile(&["fit", "--data", empty.to_str().unwrap(), "--target", "conc", "--vars", "age", "--expr", "2*age", "--out", out]);
    assert_eq!(run.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&run.stderr).contains("empty.csv:2"));

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "age,conc\n1,2\n2,oops\n").unwrap();
    let run = nlprofile(&["fit", "--data", bad.to_str().unwrap(), "--target", "conc", "--vars", "age", "--expr", "2*age", "--out", out]);
    assert_eq!(run.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&run.stderr).contains("bad.csv:3"));

    assert_eq!(nlprofile(&["fit", "--no-such-flag"]).status.code(), Some(1));

    let pcb = data("pcb.csv");
    let base = ["--data", pcb.to_str().unwrap(), "--target", "log(conc)", "--vars", "age", "--out", out];

    // non-convergence still writes the partial report
    let run = nlprofile(&[&["fit", "--expr", "-1*exp(-0.5*age) + 1", "--max-iters", "1"][..], &base].concat());
    assert_eq!(run.status.code(), Some(2), "{}", String::from_utf8_lossy(&run.stderr));
    let report: Report = read_json(&dir.path().join("o/report.json")).unwrap();
    assert!(!report.converged && report.has_warning("fit.not_converged"));

    // a loose optimizer stops short of the optimum; with no restarts
    // allowed, profiling fails and dumps diagnostics
    let loose = ["--tol-f", "0.5", "--tol-x", "0.5", "--max-restarts", "0"];
    let run = nlprofile(&[&["profile", "--expr", "-1*exp(-0.5*age) + 1"][..], &loose, &base].concat());
    assert_eq!(run.status.code(), Some(3), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(dir.path().join("o/profile_failure.json").exists());
}

#[test]
fn contour_pairs_and_gen_kotanchek() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let cfg = data("pcb.json");
    let run = nlprofile(&["contour", "--config", cfg.to_str().unwrap(), "--out", out, "--pair", "0,2", "--contour-alpha", "0.1"]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let report: Report = read_json(&dir.path().join("report.json")).unwrap();
    let contours: Vec<_> = report.files.iter().filter(|f| f.kind == "contour").map(|f| f.path.as_str()).collect();
    assert_eq!(contours.len() + report.unavailable_contours.len(), 1);

    let run = nlprofile(&["gen-kotanchek", "--out", out, "--seed", "5"]);
    assert!(run.status.success());
    let a = std::fs::read_to_string(dir.path().join("kotanchek_train.csv")).unwrap();
    nlprofile(&["gen-kotanchek", "--out", out, "--seed", "5"]);
    assert_eq!(a, std::fs::read_to_string(dir.path().join("kotanchek_train.csv")).unwrap());
    assert_eq!(std::fs::read_to_string(dir.path().join("kotanchek_test.csv")).unwrap().lines().count(), 45 * 45 + 1);
}
