//! Student-t and F quantiles by inversion of the regularized incomplete
//! beta function.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistError {
    #[error("probability {0} is not in the open interval (0, 1)")]
    Probability(f64),
    #[error("degrees of freedom must be at least 1")]
    DegreesOfFreedom,
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for positive arguments (Lanczos).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (k, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + k as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Continued fraction for the incomplete beta (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

/// Regularized incomplete beta function `I_x(a, b)`.
pub fn beta_reg(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = a * x.ln() + b * (1.0 - x).ln() - ln_beta(a, b);
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_cf(a, b, x) / a
    } else {
        1.0 - ln_front.exp() * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Solve `I_x(a, b) = target` for `x` by safeguarded Newton iteration.
///
/// Accurate in relative terms for small `target`; callers map upper-half
/// targets onto the complementary problem `I_{1-x}(b, a) = 1 - target`.
pub fn beta_reg_inv(a: f64, b: f64, target: f64) -> f64 {
    if target <= 0.0 {
        return 0.0;
    }
    if target >= 1.0 {
        return 1.0;
    }
    let lnb = ln_beta(a, b);
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    // small-x asymptote I_x ≈ x^a / (a B(a, b))
    let mut x = ((target.ln() + a.ln() + lnb) / a).exp();
    if !(x > 0.0 && x < 1.0) {
        x = 0.5;
    }
    for _ in 0..1_000 {
        let f = beta_reg(a, b, x) - target;
        if f == 0.0 {
            return x;
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let density = ((a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln() - lnb).exp();
        let mut next = x - f / density;
        if !(next > lo && next < hi) || !next.is_finite() {
            // bisect, geometrically when the bracket spans many decades
            next = if lo > 0.0 && hi / lo > 1e3 { (lo * hi).sqrt() } else if lo == 0.0 && hi < 1e-3 { hi * 1e-3 } else { 0.5 * (lo + hi) };
        }
        if (next - x).abs() <= 1e-16 * x.abs() || hi - lo <= 1e-16 * hi {
            return next;
        }
        x = next;
    }
    x
}

/// Upper-tail probability `P(T > t)` of Student's t with `df` degrees of freedom.
pub fn t_sf(df: f64, t: f64) -> f64 {
    let tail = 0.5 * beta_reg(0.5 * df, 0.5, df / (df + t * t));
    if t >= 0.0 {
        tail
    } else {
        1.0 - tail
    }
}

/// `P(F ≤ q)` for the F distribution with `(df1, df2)` degrees of freedom.
pub fn f_cdf(q: f64, df1: f64, df2: f64) -> f64 {
    if q <= 0.0 {
        return 0.0;
    }
    let x = df1 * q / (df1 * q + df2);
    beta_reg(0.5 * df1, 0.5 * df2, x)
}

/// `t` such that `P(T > t) = upper_tail_prob`.
pub fn t_quantile(df: usize, upper_tail_prob: f64) -> Result<f64, DistError> {
    if df == 0 {
        return Err(DistError::DegreesOfFreedom);
    }
    if !(upper_tail_prob > 0.0 && upper_tail_prob < 1.0) {
        return Err(DistError::Probability(upper_tail_prob));
    }
    Ok(t_quantile_unchecked(df as f64, upper_tail_prob))
}

fn t_quantile_unchecked(df: f64, p: f64) -> f64 {
    if p == 0.5 {
        return 0.0;
    }
    if p > 0.5 {
        return -t_quantile_unchecked(df, 1.0 - p);
    }
    // P(T > t) = I_x(df/2, 1/2) / 2 with x = df / (df + t^2)
    let target = 2.0 * p;
    if target <= 0.5 {
        let x = beta_reg_inv(0.5 * df, 0.5, target);
        (df * (1.0 - x) / x).sqrt()
    } else {
        // small t: y = 1 - x = t^2 / (df + t^2)
        let y = beta_reg_inv(0.5, 0.5 * df, 1.0 - target);
        (df * y / (1.0 - y)).sqrt()
    }
}

/// `q` such that `P(F ≤ q) = prob` for `F(df1, df2)`.
pub fn f_quantile(prob: f64, df1: usize, df2: usize) -> Result<f64, DistError> {
    if df1 == 0 || df2 == 0 {
        return Err(DistError::DegreesOfFreedom);
    }
    if !(prob > 0.0 && prob < 1.0) {
        return Err(DistError::Probability(prob));
    }
    let (d1, d2) = (df1 as f64, df2 as f64);
    Ok(if prob <= 0.5 {
        let x = beta_reg_inv(0.5 * d1, 0.5 * d2, prob);
        d2 * x / (d1 * (1.0 - x))
    } else {
        let y = beta_reg_inv(0.5 * d2, 0.5 * d1, 1.0 - prob);
        d2 * (1.0 - y) / (d1 * y)
    })
}
