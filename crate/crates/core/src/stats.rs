//! Statistical utilities for the experiment harness and the test oracles:
//! special functions, goodness-of-fit statistics and least-squares fits.

use crate::error::{BgError, Result};

/// Regularized lower incomplete gamma P(a, x), by series for `x < a + 1` and
/// by continued fraction otherwise (Lentz's algorithm).
pub fn gamma_p(a: f64, x: f64) -> f64 {
    assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        return 0.0;
    }
    let ln_gamma_a = ln_gamma(a);
    if x < a + 1.0 {
        // Series expansion.
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..500 {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * 1e-16 {
                break;
            }
        }
        sum * (-x + a * x.ln() - ln_gamma_a).exp()
    } else {
        // Continued fraction for Q(a, x).
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        let q = (-x + a * x.ln() - ln_gamma_a).exp() * h;
        1.0 - q
    }
}

/// Natural log of the gamma function (Lanczos).
pub fn ln_gamma(x: f64) -> f64 {
    const G: [f64; 6] = [
        76.18009172947146,
        -86.50532032941677,
        24.01409824083091,
        -1.231739572450155,
        0.1208650973866179e-2,
        -0.5395239384953e-5,
    ];
    let mut y = x;
    let tmp = x + 5.5;
    let tmp = tmp - (x + 0.5) * tmp.ln();
    let mut ser = 1.000000000190015;
    for g in G {
        y += 1.0;
        ser += g / y;
    }
    -tmp + (2.5066282746310005 * ser / x).ln()
}

/// Survival function of the chi-square distribution with `dof` degrees of freedom.
pub fn chi2_sf(stat: f64, dof: f64) -> f64 {
    1.0 - gamma_p(0.5 * dof, 0.5 * stat)
}

/// Survival function of the chi-square distribution with three degrees of
/// freedom, in closed form. `S(x) = erfc(sqrt(x/2)) + sqrt(2x/pi) exp(-x/2)`.
pub fn chi2_3_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    libm::erfc((0.5 * x).sqrt()) + (2.0 * x / std::f64::consts::PI).sqrt() * (-0.5 * x).exp()
}

/// Standard normal cumulative distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Pearson chi-square test of observed counts against uniform expected counts.
/// Returns `(statistic, p_value)` with `len - 1` degrees of freedom.
pub fn chi2_uniform_test(observed: &[u64]) -> (f64, f64) {
    let n: u64 = observed.iter().sum();
    let cells = observed.len() as f64;
    let expected = n as f64 / cells;
    let stat: f64 = observed
        .iter()
        .map(|&o| {
            let d = o as f64 - expected;
            d * d / expected
        })
        .sum();
    (stat, chi2_sf(stat, cells - 1.0))
}

/// Two-sample Kolmogorov–Smirnov statistic `sup |F1 - F2|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a: Vec<f64> = a.to_vec();
    let mut b: Vec<f64> = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// One-sample Kolmogorov–Smirnov statistic of `sample` against the CDF `f`.
pub fn ks_one_sample(sample: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    let mut s: Vec<f64> = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in s.iter().enumerate() {
        let c = f(x);
        d = d.max((c - i as f64 / n).abs());
        d = d.max(((i as f64 + 1.0) / n - c).abs());
    }
    d
}

/// Asymptotic Kolmogorov survival function `Q(lambda) = 2 sum (-1)^{j-1} exp(-2 j^2 lambda^2)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=100 {
        let t = (-2.0 * (j as f64) * (j as f64) * lambda * lambda).exp();
        sum += sign * t;
        if t < 1e-18 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// p-value of a one-sample KS statistic at sample size `n`.
pub fn ks_p_value(stat: f64, n: usize) -> f64 {
    let nf = n as f64;
    kolmogorov_sf((nf.sqrt() + 0.12 + 0.11 / nf.sqrt()) * stat)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Ordinary least squares fit `y = intercept + slope * x`.
/// Returns `(slope, intercept, slope_std_err)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(BgError::InsufficientSamples(format!(
            "linear fit needs >= 3 points, got {}",
            x.len()
        )));
    }
    let n = x.len() as f64;
    let mx = mean(x);
    let my = mean(y);
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if sxx == 0.0 {
        return Err(BgError::InsufficientSamples(
            "linear fit needs distinct abscissae".into(),
        ));
    }
    let sxy: f64 = x.iter().zip(y).map(|(u, v)| (u - mx) * (v - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(u, v)| {
            let r = v - intercept - slope * u;
            r * r
        })
        .sum();
    let se = (sse / (n - 2.0) / sxx).sqrt();
    Ok((slope, intercept, se))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_p_reference_values() {
        // P(0.5, x) = erf(sqrt(x)); cross-check the two routes.
        for &x in &[0.1f64, 0.5, 1.0, 3.0, 10.0] {
            let want = libm::erf(x.sqrt());
            assert!((gamma_p(0.5, x) - want).abs() < 1e-12, "x={x}");
        }
        // P(1, x) = 1 - exp(-x).
        for &x in &[0.2, 1.0, 5.0] {
            assert!((gamma_p(1.0, x) - (1.0 - (-x).exp())).abs() < 1e-12);
        }
    }

    #[test]
    fn chi2_3_closed_form_matches_incomplete_gamma() {
        for &x in &[0.1, 1.0, 2.5, 7.0, 15.0] {
            assert!((chi2_3_sf(x) - chi2_sf(x, 3.0)).abs() < 1e-10);
        }
    }

    #[test]
    fn ks_statistics() {
        let a = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(ks_two_sample(&a, &a), 0.0);
        let b = [11.0, 12.0, 13.0, 14.0];
        assert!((ks_two_sample(&a, &b) - 1.0).abs() < 1e-12);
        // Uniform sample against its own CDF has a small statistic.
        let u: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        assert!(ks_one_sample(&u, |x| x.clamp(0.0, 1.0)) < 0.001);
    }

    #[test]
    fn kolmogorov_tail_values() {
        // Q(0.8276...) ~ 0.5; sanity-bracket instead of exact table lookup.
        assert!(kolmogorov_sf(0.5) > 0.95);
        assert!(kolmogorov_sf(2.0) < 0.001);
    }

    #[test]
    fn linear_fit_recovers_exact_line() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 2.0 * v).collect();
        let (s, b, se) = linear_fit(&x, &y).unwrap();
        assert!((s + 2.0).abs() < 1e-12 && (b - 3.0).abs() < 1e-12 && se < 1e-12);
    }
}
