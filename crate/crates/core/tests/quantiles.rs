use nlprofile::numerics::{f_quantile, t_quantile};
use statrs::function::beta::beta_reg;

/// Bisection on statrs' regularized incomplete beta.
fn bisect(mut lo: f64, mut hi: f64, above: impl Fn(f64) -> bool) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if above(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn oracle_t(df: usize, upper: f64) -> f64 {
    let v = df as f64;
    // P(T > t) = I_{v/(v+t²)}(v/2, 1/2) / 2
    bisect(0.0, 1e7, |t| 0.5 * beta_reg(v / 2.0, 0.5, v / (v + t * t)) < upper)
}

fn oracle_f(prob: f64, d1: usize, d2: usize) -> f64 {
    let (a, b) = (d1 as f64, d2 as f64);
    bisect(0.0, 1e7, |x| beta_reg(a / 2.0, b / 2.0, a * x / (a * x + b)) > prob)
}

#[test]
fn high_precision_references() {
    // mpmath, 40 digits
    let t = [
        (10, 0.025, 2.2281388519862747),
        (1, 0.025, 12.706204736174704),
        (25, 0.005, 2.7874358136769705),
        (93, 0.025, 1.9858018143458234),
        (3, 0.0001, 22.203742273204183),
    ];
    for (df, p, want) in t {
        let got = t_quantile(df, p).unwrap();
        assert!((got - want).abs() < 1e-12 * want, "t({df}, {p}) = {got}, want {want}");
    }
    let f = [
        (0.95, 2, 10, 4.1028210151303997),
        (0.99, 3, 25, 4.6754647823259135),
        (0.95, 7, 93, 2.1096572800914232),
        (0.8, 2, 98, 1.6361612262110269),
        (0.5, 5, 5, 1.0),
    ];
    for (p, d1, d2, want) in f {
        let got = f_quantile(p, d1, d2).unwrap();
        assert!((got - want).abs() < 1e-12 * want, "F({p}, {d1}, {d2}) = {got}, want {want}");
    }
}

#[test]
fn grid_against_bisection_oracle() {
    let mut combos = 0;
    for df in [1usize, 3, 10, 30, 200] {
        for p in [0.25, 0.05, 0.025, 0.005, 1e-4] {
            let (got, want) = (t_quantile(df, p).unwrap(), oracle_t(df, p));
            assert!((got - want).abs() <= 1e-9 * want.abs().max(1.0), "t({df}, {p}): {got} vs {want}");
            combos += 1;
        }
    }
    for (d1, d2) in [(1usize, 5usize), (2, 10), (3, 25), (7, 93), (12, 400)] {
        for p in [0.5, 0.8, 0.9, 0.95, 0.99] {
            let (got, want) = (f_quantile(p, d1, d2).unwrap(), oracle_f(p, d1, d2));
            assert!((got - want).abs() <= 1e-9 * want.abs().max(1.0), "F({p}, {d1}, {d2}): {got} vs {want}");
            combos += 1;
        }
    }
    assert_eq!(combos, 50);
}

#[test]
fn rejects_bad_arguments() {
    assert!(t_quantile(0, 0.05).is_err());
    assert!(t_quantile(5, 0.0).is_err());
    assert!(f_quantile(1.0, 2, 3).is_err());
    assert!(f_quantile(0.5, 2, 0).is_err());
}
