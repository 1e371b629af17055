use nlprofile::fit::{linear_ci, FitOptions};
use nlprofile::profile::{prediction_band, profile_all, profile_ci, PredictionMethod, ProfileOptions};
use nlprofile::{fit, parameterize, parse, Dataset, ParamModel};

const AGE: [f64; 28] = [
    1., 1., 1., 1., 2., 2., 2., 3., 3., 3., 4., 4., 4., 5., 6., 6., 6., 7., 7., 7., 8., 8., 8., 9., 11., 12., 12., 12.,
];
const CONC: [f64; 28] = [
    0.6, 1.6, 0.5, 1.2, 2.0, 1.3, 2.5, 2.2, 2.4, 1.2, 3.5, 4.1, 5.1, 5.7, 3.4, 9.7, 8.6, 4.0, 5.5, 10.5, 17.5, 13.4,
    4.5, 30.4, 12.4, 13.4, 26.2, 7.4,
];

fn setup() -> (ParamModel, Dataset) {
    let y: Vec<f64> = CONC.iter().map(|c| c.ln()).collect();
    let d = Dataset::from_columns(&AGE, &y, "age").unwrap();
    let m = parameterize(&parse("-3.93*exp(-0.19*age) + 3.13", &["age"]).unwrap(), 1).unwrap();
    (m, d)
}

#[test]
fn fit_matches_published_variance() {
    let (m, d) = setup();
    assert_eq!(m.n_params(), 3);
    let f = fit(&m, &d, m.theta0(), &FitOptions::default()).unwrap();
    assert!(f.converged);
    assert!((f.s2 - 0.247).abs() < 0.002, "s2 {}", f.s2);
    // scipy least_squares on the same data
    for (a, b) in f.theta_hat.iter().zip([-3.929, -0.1903, 3.1293]) {
        assert!((a - b).abs() < 1e-3 * b.abs().max(1.0), "{a} vs {b}");
    }
}

#[test]
fn profiles_show_one_sided_intervals() {
    let (m, d) = setup();
    let f = fit(&m, &d, m.theta0(), &FitOptions::default()).unwrap();
    let set = profile_all(&m, &d, &f, &[0, 1, 2], &ProfileOptions::default()).unwrap();
    assert_eq!(set.restarts, 0);
    let traces: Vec<_> = set.traces.iter().map(|t| t.as_ref().unwrap()).collect();
    assert!(traces.iter().all(|t| t.monotone));
    assert!(traces[1..].iter().any(|t| !t.bounded_left || !t.bounded_right));

    // τ at the linear 95% bounds, from scipy least_squares conditional refits
    let oracle = [(-1.3164496, 2.2856434), (-1.8217740, 2.3556571), (-3.9605168, 1.2829690)];
    let lin = linear_ci(&f, 0.05).unwrap();
    for (t, (want_lo, want_hi)) in traces.iter().zip(oracle) {
        let (lo, hi) = lin[t.index];
        assert!((t.theta_to_tau.eval(lo) - want_lo).abs() < 2e-3, "theta[{}] {}", t.index, t.theta_to_tau.eval(lo));
        assert!((t.theta_to_tau.eval(hi) - want_hi).abs() < 2e-3, "theta[{}] {}", t.index, t.theta_to_tau.eval(hi));
    }
    // θ0: the profile interval is tighter than the linear one on the right
    // and longer on the left
    let (lo, hi) = profile_ci(traces[0], &f, 0.05).unwrap();
    assert!(lo.is_finite() && lo < lin[0].0);
    assert!(hi < lin[0].1);
}

#[test]
fn prediction_bands() {
    let (m, d) = setup();
    let f = fit(&m, &d, m.theta0(), &FitOptions::default()).unwrap();
    let ages: Vec<Vec<f64>> = AGE.iter().map(|&a| vec![a]).collect();
    let band = prediction_band(&m, &d, &f, &ages, 0.05, &ProfileOptions::default()).unwrap();
    for (b, y) in band.iter().zip(d.y()) {
        assert_eq!(b.method, PredictionMethod::Profile);
        assert!(b.profile_full.0 <= *y && *y <= b.profile_full.1, "{y} outside {:?} at {:?}", b.profile_full, b.x);
        assert!(b.linear_full.0 <= *y && *y <= b.linear_full.1);
    }
    let at_min = &band[0];
    let lin_w = at_min.linear_expectation.1 - at_min.linear_expectation.0;
    let prof_w = at_min.profile_expectation.1 - at_min.profile_expectation.0;
    assert!(prof_w < lin_w, "{prof_w} vs {lin_w}");

    // the profile band follows the model's monotonicity in age
    let grid: Vec<Vec<f64>> = (0..=24).map(|k| vec![0.5 * k as f64]).collect();
    let band = prediction_band(&m, &d, &f, &grid, 0.05, &ProfileOptions::default()).unwrap();
    for w in band.windows(2) {
        assert!(w[1].profile_expectation.0 > w[0].profile_expectation.0);
        assert!(w[1].profile_expectation.1 > w[0].profile_expectation.1);
    }
}
