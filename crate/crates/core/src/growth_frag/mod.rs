//! The growth-fragmentation side: the Levy exponent of the Eve particle, the
//! spectrally negative driving process, the Lamperti time change, the
//! particle cascade with its extinction height, and the closed-form boundary
//! size / volume densities of positive snake excursions.

mod cascade;
mod levy;

pub use cascade::{
    extinction_height, extinction_height_with_budget, extinction_tail, simulate_cascade, Cascade,
    CascadeParticle, TailFit,
};
pub use levy::{lamperti, sample_levy, LevyCumulantCheck, LevyParams, LevyPath, MassPath};

use crate::error::{BgError, Result};
use crate::numeric::{adaptive_simpson, gauss_composite};
use crate::rng::make_rng;
use rand_distr::{ChiSquared, Distribution};

/// Prefactor of the exponent, `sqrt(3 / (2 pi))`.
pub const PSI_PREFACTOR: f64 = 0.690_988_298_942_670_9;

/// Coefficient of the linear term inside the bracket.
pub const PSI_LINEAR_COEFFICIENT: f64 = -8.0 / 3.0;

/// Density of the jump measure on `(1/2, 1)`: `(x (1 - x))^{-5/2}`.
pub fn jump_density(x: f64) -> f64 {
    if x <= 0.5 || x >= 1.0 {
        return 0.0;
    }
    (x * (1.0 - x)).powf(-2.5)
}

/// Integrand of the exponent after the substitution `x = 1 - u^2`, which
/// removes the inverse-square-root endpoint singularity:
/// `2 (1-u^2)^{-5/2} u^{-4} (x^q - 1 + q u^2)`.
///
/// Near `u = 0` the bracket cancels to fourth order; a binomial series keeps
/// full precision there.
fn psi_integrand_u(u: f64, q: f64) -> f64 {
    let t = u * u;
    if u < 0.05 {
        // x^q - 1 + q t = t^2 * sum_{j>=0} binom(q, j+2) (-t)^j.
        let mut coeff = 0.5 * q * (q - 1.0); // binom(q, 2)
        let mut sum = 0.0;
        let mut power = 1.0;
        for j in 0..24 {
            let term = coeff * power;
            sum += term;
            if term.abs() < 1e-18 * sum.abs().max(1.0) {
                break;
            }
            coeff *= (q - (j as f64 + 2.0)) / (j as f64 + 3.0);
            power *= -t;
        }
        2.0 * (1.0 - t).powf(-2.5) * sum
    } else {
        let bracket = libm::expm1(q * libm::log1p(-t)) + q * t;
        2.0 * (1.0 - t).powf(-2.5) * bracket / (t * t)
    }
}

const U_MAX: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// The Levy exponent by adaptive quadrature, absolute accuracy ~1e-12.
pub fn psi(q: f64) -> Result<f64> {
    if q < 0.0 {
        return Err(BgError::invalid("the exponent is defined for q >= 0"));
    }
    if q == 0.0 {
        return Ok(0.0);
    }
    let integral = adaptive_simpson(&|u| psi_integrand_u(u, q), 0.0, U_MAX, 1e-13);
    Ok(PSI_PREFACTOR * (PSI_LINEAR_COEFFICIENT * q + integral))
}

/// The same exponent through a fixed-order composite Gauss-Legendre rule, an
/// independent cross-check of [`psi`].
pub fn psi_gauss(q: f64) -> Result<f64> {
    if q < 0.0 {
        return Err(BgError::invalid("the exponent is defined for q >= 0"));
    }
    if q == 0.0 {
        return Ok(0.0);
    }
    let integral = gauss_composite(&|u| psi_integrand_u(u, q), 0.0, U_MAX, 24, 24);
    Ok(PSI_PREFACTOR * (PSI_LINEAR_COEFFICIENT * q + integral))
}

/// Right derivative of the exponent at zero, the mean drift of the driving
/// process: `c (-8/3 + int (ln x + 1 - x) density dx)`.
pub fn psi_drift() -> f64 {
    let integrand = |u: f64| {
        let t = u * u;
        if u < 1e-6 {
            // ln(1-t) + t = -t^2/2 - t^3/3 - ...
            return 2.0 * (-0.5 - t / 3.0);
        }
        2.0 * (1.0 - t).powf(-2.5) * (libm::log1p(-t) + t) / (t * t)
    };
    PSI_PREFACTOR * (PSI_LINEAR_COEFFICIENT + adaptive_simpson(&integrand, 0.0, U_MAX, 1e-12))
}

/// Joint density of (boundary size, volume) of a positive excursion:
/// `f(z, s) = (sqrt(3) / 2 pi) sqrt(z) s^{-5/2} exp(-z^2 / 2s)`.
pub fn density_f(z: f64, s: f64) -> Result<f64> {
    if z <= 0.0 || s <= 0.0 {
        return Err(BgError::invalid("density arguments must be positive"));
    }
    Ok(3f64.sqrt() / (2.0 * std::f64::consts::PI) * z.sqrt() * s.powf(-2.5)
        * (-z * z / (2.0 * s)).exp())
}

/// Volume density at fixed boundary size `z`:
/// `g_z(s) = (2 pi)^{-1/2} z^3 s^{-5/2} exp(-z^2 / 2s)`.
pub fn density_g(z: f64, s: f64) -> Result<f64> {
    if z <= 0.0 || s <= 0.0 {
        return Err(BgError::invalid("density arguments must be positive"));
    }
    Ok((2.0 * std::f64::consts::PI).powf(-0.5) * z.powi(3) * s.powf(-2.5)
        * (-z * z / (2.0 * s)).exp())
}

/// Cumulative distribution of the volume at fixed boundary size, in closed
/// form through the chi-square(3) survival function.
pub fn volume_cdf(z: f64, s: f64) -> Result<f64> {
    if z <= 0.0 {
        return Err(BgError::invalid("boundary size must be positive"));
    }
    if s <= 0.0 {
        return Ok(0.0);
    }
    Ok(crate::stats::chi2_3_sf(z * z / s))
}

/// Samples the volume at fixed boundary size `z` by the exact inverse
/// transform `sigma = z^2 / Q` with `Q` chi-square with three degrees of
/// freedom.
pub fn sample_sigma(z: f64, seed: u64) -> Result<f64> {
    if z <= 0.0 {
        return Err(BgError::invalid("boundary size must be positive"));
    }
    let mut rng = make_rng(seed);
    let chi2 = ChiSquared::new(3.0).expect("3 degrees of freedom is valid");
    let q: f64 = chi2.sample(&mut rng);
    Ok(z * z / q)
}

/// Integral of `g_z` over `(0, infinity)` by direct quadrature in `s`, with
/// the far tail integrated after the substitution `s = 1 / v^2`. Head below
/// `z^2 / 200` is dropped (bounded by `exp(-100)`).
pub fn volume_density_integral(z: f64) -> Result<f64> {
    if z <= 0.0 {
        return Err(BgError::invalid("boundary size must be positive"));
    }
    let s_cut = 50.0 * z * z;
    let main = adaptive_simpson(
        &|s| density_g(z, s).unwrap_or(0.0),
        z * z / 200.0,
        s_cut,
        1e-11,
    );
    let c = (2.0 * std::f64::consts::PI).powf(-0.5) * z.powi(3);
    // int_S^inf s^{-5/2} e^{-z^2/2s} ds = 2 int_0^{1/sqrt S} v^2 e^{-z^2 v^2/2} dv.
    let tail = 2.0
        * adaptive_simpson(
            &|v| v * v * (-0.5 * z * z * v * v).exp(),
            0.0,
            s_cut.powf(-0.5),
            1e-13,
        );
    Ok(main + c * tail)
}

/// Mean of `g_z` by direct quadrature, same treatment of the tail.
pub fn volume_density_mean(z: f64) -> Result<f64> {
    if z <= 0.0 {
        return Err(BgError::invalid("boundary size must be positive"));
    }
    let s_cut = 50.0 * z * z;
    let main = adaptive_simpson(
        &|s| s * density_g(z, s).unwrap_or(0.0),
        z * z / 200.0,
        s_cut,
        1e-11 * z * z,
    );
    let c = (2.0 * std::f64::consts::PI).powf(-0.5) * z.powi(3);
    // int_S^inf s^{-3/2} e^{-z^2/2s} ds = 2 int_0^{1/sqrt S} e^{-z^2 v^2/2} dv.
    let tail = 2.0
        * adaptive_simpson(
            &|v| (-0.5 * z * z * v * v).exp(),
            0.0,
            s_cut.powf(-0.5),
            1e-14,
        );
    Ok(main + c * tail)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::child_seed;
    use crate::stats::ks_one_sample;

    #[test]
    fn psi_vanishes_at_zero_and_matches_closed_form_at_one() {
        assert_eq!(psi(0.0).unwrap(), 0.0);
        // At q = 1 the integrand vanishes identically, so the exponent is
        // exactly the linear term.
        let want = PSI_PREFACTOR * PSI_LINEAR_COEFFICIENT;
        assert!((psi(1.0).unwrap() - want).abs() < 1e-12);
        assert!(psi(-0.5).is_err());
    }

    #[test]
    fn two_quadrature_routes_agree() {
        for &q in &[0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 5.0] {
            let a = psi(q).unwrap();
            let b = psi_gauss(q).unwrap();
            assert!((a - b).abs() < 1e-10, "q={q}: {a} vs {b}");
        }
    }

    #[test]
    fn psi_is_convex_and_drifts_down() {
        let h = 0.05;
        for i in 1..100 {
            let q = i as f64 * h;
            let second =
                psi(q + h).unwrap() - 2.0 * psi(q).unwrap() + psi(q - h).unwrap();
            assert!(second >= -1e-9, "second difference at q={q}: {second}");
        }
        assert!(psi_drift() < 0.0);
        // The drift is the slope at 0+.
        let fd = (psi(1e-6).unwrap() - 0.0) / 1e-6;
        assert!((fd - psi_drift()).abs() < 1e-4);
    }

    #[test]
    fn volume_density_normalizes_with_mean_z_squared() {
        for &z in &[0.5, 1.0, 2.0] {
            let total = volume_density_integral(z).unwrap();
            assert!((total - 1.0).abs() < 1e-6, "z={z}: integral {total}");
            let mean = volume_density_mean(z).unwrap();
            assert!((mean - z * z).abs() < 1e-6 * z * z, "z={z}: mean {mean}");
        }
    }

    #[test]
    fn density_ratio_is_constant_in_s() {
        let z = 1.7f64;
        let want = (3.0 / (2.0 * std::f64::consts::PI)).sqrt() * z.powf(-2.5);
        for i in 1..=10 {
            let s = 0.3 * i as f64;
            let ratio = density_f(z, s).unwrap() / density_g(z, s).unwrap();
            assert!((ratio - want).abs() < 1e-12 * want);
        }
    }

    #[test]
    fn volume_density_mode_sits_at_z_squared_over_five() {
        // Stationary point of log g_z: -(5/2)/s + z^2/(2 s^2) = 0.
        let z = 1.3;
        let mode = z * z / 5.0;
        let g = |s: f64| density_g(z, s).unwrap();
        assert!(g(mode) > g(mode * 1.01));
        assert!(g(mode) > g(mode * 0.99));
    }

    #[test]
    fn sigma_sampler_matches_the_closed_form_cdf() {
        let draws: Vec<f64> = (0..30_000u64)
            .map(|i| sample_sigma(1.0, child_seed(40, i)).unwrap())
            .collect();
        let ks = ks_one_sample(&draws, |s| volume_cdf(1.0, s).unwrap());
        assert!(ks < 0.01, "KS = {ks}");
        assert!(sample_sigma(0.0, 1).is_err());
    }

    #[test]
    fn volume_cdf_matches_quadrature_of_the_density() {
        let z = 1.0;
        for &s in &[0.2, 0.5, 1.0, 3.0] {
            let by_quad = adaptive_simpson(
                &|t| density_g(z, t).unwrap_or(0.0),
                z * z / 200.0,
                s,
                1e-11,
            );
            let cdf = volume_cdf(z, s).unwrap();
            assert!((by_quad - cdf).abs() < 1e-8, "s={s}: {by_quad} vs {cdf}");
        }
    }
}
