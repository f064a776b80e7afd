//! Standard normal and Student t distribution functions.
//!
//! `normal_quantile` starts from Acklam's rational approximation (relative
//! error about 1.2e-9) and applies one Newton step against the
//! `erfc`-based CDF. `t_quantile` inverts a regularized incomplete beta CDF
//! with a safeguarded Newton iteration.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

fn check_probability(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidProbability(format!("{p} is outside (0, 1)")))
    }
}

// Acklam's coefficients.
const A: [f64; 6] = [
    -3.969683028665376e+01,
    2.209460984245205e+02,
    -2.759285104469687e+02,
    1.383577518672690e+02,
    -3.066479806614716e+01,
    2.506628277459239e+00,
];
const B: [f64; 5] = [
    -5.447609879822406e+01,
    1.615858368580409e+02,
    -1.556989798598866e+02,
    6.680131188771972e+01,
    -1.328068155288572e+01,
];
const C: [f64; 6] = [
    -7.784894002430293e-03,
    -3.223964580411365e-01,
    -2.400758277161838e+00,
    -2.549732539343734e+00,
    4.374664141464968e+00,
    2.938163982698783e+00,
];
const D: [f64; 4] = [
    7.784695709041462e-03,
    3.224671290700398e-01,
    2.445134137142996e+00,
    3.754408661907416e+00,
];
const P_LOW: f64 = 0.02425;

fn acklam(p: f64) -> f64 {
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -acklam(1.0 - p)
    }
}

/// Inverse of the standard normal CDF.
pub fn normal_quantile(p: f64) -> Result<f64> {
    check_probability(p)?;
    if p == 0.5 {
        return Ok(0.0);
    }
    // Work in the lower tail so the Newton residual is computed without
    // cancellation, then reflect.
    let (lower, sign) = if p < 0.5 { (p, 1.0) } else { (1.0 - p, -1.0) };
    let x = acklam(lower);
    let x = x - (normal_cdf(x) - lower) / normal_pdf(x);
    Ok(sign * x)
}

/// Regularized incomplete beta `I_x(a, b)` by Lentz's continued fraction.
pub fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    if x > (a + 1.0) / (a + b + 2.0) {
        return 1.0 - regularized_incomplete_beta(1.0 - x, b, a);
    }
    let ln_front = a * x.ln() + b * (-x).ln_1p() - ln_beta(a, b);
    ln_front.exp() * beta_continued_fraction(x, a, b) / a
}

fn ln_beta(a: f64, b: f64) -> f64 {
    libm::lgamma(a) + libm::lgamma(b) - libm::lgamma(a + b)
}

fn beta_continued_fraction(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let mut c = 1.0;
    let mut d = 1.0 - (a + b) * x / (a + 1.0);
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut f = d;
    for m in 1..=500 {
        let m = m as f64;
        let even = m * (b - m) * x / ((a + 2.0 * m - 1.0) * (a + 2.0 * m));
        d = 1.0 + even * d;
        d = if d.abs() < TINY { 1.0 / TINY } else { 1.0 / d };
        c = 1.0 + even / c;
        if c.abs() < TINY {
            c = TINY;
        }
        f *= d * c;
        let odd = -(a + m) * (a + b + m) * x / ((a + 2.0 * m) * (a + 2.0 * m + 1.0));
        d = 1.0 + odd * d;
        d = if d.abs() < TINY { 1.0 / TINY } else { 1.0 / d };
        c = 1.0 + odd / c;
        if c.abs() < TINY {
            c = TINY;
        }
        let delta = d * c;
        f *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    f
}

pub fn t_pdf(t: f64, df: f64) -> f64 {
    let ln_norm = libm::lgamma((df + 1.0) / 2.0) - libm::lgamma(df / 2.0) - 0.5 * (df * PI).ln();
    (ln_norm - (df + 1.0) / 2.0 * (t * t / df).ln_1p()).exp()
}

/// Student t CDF with `df` degrees of freedom (real `df > 0`).
pub fn t_cdf(t: f64, df: f64) -> f64 {
    if t == 0.0 {
        return 0.5;
    }
    let t2 = t * t;
    // upper tail mass 0.5 * I_{df/(df+t^2)}(df/2, 1/2); for small |t| use the
    // complementary form, which keeps full relative precision near 0.5
    let tail = if t2 < df {
        0.5 - 0.5 * regularized_incomplete_beta(t2 / (df + t2), 0.5, df / 2.0)
    } else {
        0.5 * regularized_incomplete_beta(df / (df + t2), df / 2.0, 0.5)
    };
    if t > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Inverse of the Student t CDF.
pub fn t_quantile(p: f64, df: u64) -> Result<f64> {
    check_probability(p)?;
    if df == 0 {
        return Err(Error::InvalidProbability("degrees of freedom must be >= 1".into()));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    let nu = df as f64;
    if df == 1 {
        return Ok((PI * (p - 0.5)).tan());
    }
    if df == 2 {
        return Ok((2.0 * p - 1.0) / (2.0 * p * (1.0 - p)).sqrt());
    }
    // Solve in the upper half by symmetry.
    let (upper, sign) = if p > 0.5 { (p, 1.0) } else { (1.0 - p, -1.0) };
    let target_tail = 1.0 - upper;
    let tail = |t: f64| 1.0 - t_cdf(t, nu);

    // Cornish–Fisher start from the normal quantile.
    let z = normal_quantile(upper)?;
    let g1 = (z.powi(3) + z) / 4.0;
    let g2 = (5.0 * z.powi(5) + 16.0 * z.powi(3) + 3.0 * z) / 96.0;
    let mut t = (z + g1 / nu + g2 / (nu * nu)).max(0.0);

    let mut lo = 0.0;
    let mut hi = t.max(1.0);
    while tail(hi) > target_tail {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let f = tail(t) - target_tail;
        if f > 0.0 {
            lo = lo.max(t);
        } else {
            hi = hi.min(t);
        }
        let step = f / t_pdf(t, nu);
        let mut next = t + step;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - t).abs() <= 1e-14 * t.abs().max(1.0) {
            t = next;
            break;
        }
        t = next;
    }
    Ok(sign * t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_landmarks() {
        assert_eq!(normal_quantile(0.5).unwrap(), 0.0);
        assert!((normal_quantile(0.975).unwrap() - 1.959963984540054).abs() < 1e-12);
        assert!((normal_quantile(0.05).unwrap() + 1.6448536269514722).abs() < 1e-12);
        assert!(normal_quantile(0.0).is_err());
        assert!(normal_quantile(1.0).is_err());
        assert!(normal_quantile(f64::NAN).is_err());
    }

    #[test]
    fn normal_symmetry() {
        for i in 1..200 {
            let p = i as f64 / 200.0 * 0.98 + 0.01;
            let a = normal_quantile(p).unwrap();
            let b = normal_quantile(1.0 - p).unwrap();
            assert!((a + b).abs() < 1e-12, "{p}");
        }
    }

    #[test]
    fn t_landmarks() {
        assert!((t_quantile(0.75, 1).unwrap() - 1.0).abs() < 1e-15);
        assert!((t_quantile(0.975, 9).unwrap() - 2.2621571627409915).abs() < 1e-9);
        assert!((t_quantile(0.975, 5).unwrap() - 2.5705818366147395).abs() < 1e-9);
        assert!((t_quantile(0.975, 1_000_000).unwrap() - 1.959963984540054).abs() < 1e-3);
        assert!((t_quantile(0.05, 9).unwrap() + 1.8331129326536335).abs() < 1e-9);
        assert!(t_quantile(0.5, 0).is_err());
    }

    #[test]
    fn t_cdf_round_trip() {
        for df in [3u64, 4, 7, 30, 200] {
            for p in [1e-8, 0.001, 0.2, 0.49, 0.51, 0.9, 0.999999] {
                let t = t_quantile(p, df).unwrap();
                assert!((t_cdf(t, df as f64) - p).abs() < 1e-12 * p.max(1e-3), "df {df} p {p}");
            }
        }
    }
}
