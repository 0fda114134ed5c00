//! Special functions backing the Student-t quantile.

use super::NumericsError;

/// Degrees of freedom at or beyond which the t distribution is treated as normal.
const NORMAL_DF: f64 = 1e6;
const EPS: f64 = 1e-15;
const TINY: f64 = 1e-300;

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
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
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let t = x + 7.5;
    let mut a = COEF[0];
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Continued fraction for the incomplete beta (modified Lentz).
fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
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
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn regularized_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

/// Regularized lower incomplete gamma `P(a, x)`.
fn regularized_gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let ln_front = -x + a * x.ln() - ln_gamma(a);
    if x < a + 1.0 {
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..10_000 {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * EPS {
                break;
            }
        }
        sum * ln_front.exp()
    } else {
        1.0 - regularized_gamma_q_cf(a, x, ln_front)
    }
}

fn regularized_gamma_q_cf(a: f64, x: f64, ln_front: f64) -> f64 {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..=10_000 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    ln_front.exp() * h
}

/// Upper tail of the standard normal, accurate far into the tail.
fn normal_upper_tail(z: f64) -> f64 {
    // Q(z) = 0.5 * Q_gamma(1/2, z^2/2) for z >= 0
    let x = 0.5 * z * z;
    if x < 1.5 {
        0.5 * (1.0 - regularized_gamma_p(0.5, x))
    } else {
        0.5 * regularized_gamma_q_cf(0.5, x, -x + 0.5 * x.ln() - ln_gamma(0.5))
    }
}

pub fn normal_cdf(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 - normal_upper_tail(z)
    } else {
        normal_upper_tail(-z)
    }
}

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Student-t cumulative distribution function. `df = ∞` gives the normal CDF.
pub fn t_cdf(t: f64, df: f64) -> f64 {
    if df >= NORMAL_DF {
        return normal_cdf(t);
    }
    let x = df / (df + t * t);
    let tail = 0.5 * regularized_beta(x, 0.5 * df, 0.5);
    if t > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

fn t_pdf(t: f64, df: f64) -> f64 {
    let ln = ln_gamma(0.5 * (df + 1.0))
        - ln_gamma(0.5 * df)
        - 0.5 * (df * std::f64::consts::PI).ln()
        - 0.5 * (df + 1.0) * (1.0 + t * t / df).ln();
    ln.exp()
}

/// Upper-half quantile (`p > 0.5`) by bracketing and safeguarded Newton.
fn upper_quantile(p: f64, cdf: impl Fn(f64) -> f64, pdf: impl Fn(f64) -> f64) -> f64 {
    let mut lo = 0.0;
    let mut hi = 1.0;
    while cdf(hi) < p {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return f64::INFINITY;
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = cdf(x) - p;
        if f == 0.0 {
            return x;
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let d = pdf(x);
        let newton = x - f / d;
        x = if d > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 1e-15 * hi.abs().max(1.0) {
            break;
        }
    }
    x
}

fn check_probability(p: f64) -> Result<(), NumericsError> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(NumericsError::InvalidProbability(p))
    }
}

pub fn normal_quantile(p: f64) -> Result<f64, NumericsError> {
    check_probability(p)?;
    if p == 0.5 {
        return Ok(0.0);
    }
    let upper = p.max(1.0 - p);
    let q = upper_quantile(upper, normal_cdf, normal_pdf);
    Ok(if p > 0.5 { q } else { -q })
}

/// `p`-quantile of Student's t with `df` degrees of freedom.
///
/// `df` may be `f64::INFINITY`; values from 10⁶ up use the normal quantile.
/// Lower-half quantiles are computed as the negated upper-half quantile so the
/// result is exactly antisymmetric.
pub fn t_quantile(p: f64, df: f64) -> Result<f64, NumericsError> {
    check_probability(p)?;
    if df.is_nan() || df < 1.0 {
        return Err(NumericsError::InvalidDf(df));
    }
    if df >= NORMAL_DF {
        return normal_quantile(p);
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    let upper = if p > 0.5 { p } else { 1.0 - p };
    let q = upper_quantile(upper, |t| t_cdf(t, df), |t| t_pdf(t, df));
    Ok(if p > 0.5 { q } else { -q })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_gamma_known_values() {
        assert!((ln_gamma(1.0)).abs() < 1e-13);
        assert!((ln_gamma(5.0) - 24f64.ln()).abs() < 1e-12);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-13);
    }

    #[test]
    fn cauchy_special_case() {
        // df = 1 is Cauchy: quantile = tan(pi (p - 1/2))
        for p in [0.6f64, 0.75, 0.9, 0.99] {
            let expected = (std::f64::consts::PI * (p - 0.5)).tan();
            let got = t_quantile(p, 1.0).unwrap();
            assert!(
                (got - expected).abs() < 1e-9 * expected.abs().max(1.0),
                "{p}"
            );
        }
    }

    #[test]
    fn df_two_closed_form() {
        // df = 2: q = (2p - 1) / sqrt(2 p (1 - p))
        for p in [0.55f64, 0.8, 0.975] {
            let expected = (2.0 * p - 1.0) / (2.0 * p * (1.0 - p)).sqrt();
            assert!((t_quantile(p, 2.0).unwrap() - expected).abs() < 1e-10);
        }
    }

    #[test]
    fn median_is_zero() {
        for df in [1.0, 3.0, 40.0, f64::INFINITY] {
            assert_eq!(t_quantile(0.5, df).unwrap(), 0.0);
        }
    }

    #[test]
    fn table_lookup_value_for_large_df() {
        let q = t_quantile(0.95, 994.0).unwrap();
        assert!((q - 1.645).abs() < 0.005, "{q}");
        let z = t_quantile(0.95, f64::INFINITY).unwrap();
        assert!((z - 1.644_853_626_951_472_2).abs() < 1e-9, "{z}");
    }

    #[test]
    fn invalid_arguments() {
        assert_eq!(
            t_quantile(0.0, 5.0),
            Err(NumericsError::InvalidProbability(0.0))
        );
        assert_eq!(
            t_quantile(1.0, 5.0),
            Err(NumericsError::InvalidProbability(1.0))
        );
        assert_eq!(t_quantile(0.9, 0.5), Err(NumericsError::InvalidDf(0.5)));
        assert!(t_quantile(0.9, f64::NAN).is_err());
    }

    #[test]
    fn far_normal_tail() {
        let q = normal_quantile(1e-10).unwrap();
        assert!((q + 6.361_340_902_404_056).abs() < 1e-7, "{q}");
    }
}
