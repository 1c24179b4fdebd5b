//! The spectrally negative driving process and its Lamperti time change.
//!
//! Jumps multiply the mass by `x` drawn on `(1/2, 1)` from the density
//! `c (x(1-x))^{-5/2}`, so the log-mass jumps by `ln x` in `(-ln 2, 0)`.
//! Jumps with `1 - x` above a truncation are simulated exactly by thinning a
//! piecewise power-law envelope; the infinite-variation remainder below the
//! truncation is replaced by its drift compensation plus a Gaussian with the
//! matched second moment. The compensation convention follows the exponent
//! exactly: the linear-in-q terms are the drift, with no re-centering.

use super::{PSI_LINEAR_COEFFICIENT, PSI_PREFACTOR};
use crate::error::{BgError, Result};
use crate::numeric::adaptive_simpson;
use crate::rng::{make_rng, replica_rng, Rng};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// One envelope segment of the jump sampler on `t = 1 - x`: on
/// `[t_lo, t_hi]` the target is dominated by `env_const * t^{-5/2}`.
#[derive(Debug, Clone)]
struct Segment {
    t_lo: f64,
    t_hi: f64,
    env_const: f64,
    /// Envelope measure of the segment (including the global prefactor).
    mass: f64,
}

/// Precomputed simulation parameters for one jump truncation level.
#[derive(Debug, Clone)]
pub struct LevyParams {
    /// Jumps with `1 - x <= eps` are folded into the Gaussian substitute.
    pub eps: f64,
    /// Total drift per unit time: linear term, large-jump compensator and
    /// small-jump mean together.
    pub drift: f64,
    /// Variance per unit time of the small-jump Gaussian substitute.
    pub small_variance: f64,
    /// Rate of the thinned (envelope) Poisson clock.
    pub envelope_rate: f64,
    segments: Vec<Segment>,
}

impl LevyParams {
    /// Builds the parameters for truncation `eps` in `(0, 1/4]`.
    pub fn new(eps: f64) -> Result<Arc<LevyParams>> {
        if !(eps > 0.0 && eps <= 0.25) {
            return Err(BgError::invalid(
                "jump truncation must lie in (0, 1/4]",
            ));
        }
        let c = PSI_PREFACTOR;
        // Envelope segments with breakpoints fixed once.
        let breaks = [0.02, 0.1, 0.25, 0.4, 0.5];
        let mut segments = Vec::new();
        let mut lo = eps;
        for &hi in breaks.iter() {
            if hi <= lo {
                continue;
            }
            let env_const = (1.0 - hi).powf(-2.5);
            let mass = c * env_const * (2.0 / 3.0) * (lo.powf(-1.5) - hi.powf(-1.5));
            segments.push(Segment {
                t_lo: lo,
                t_hi: hi,
                env_const,
                mass,
            });
            lo = hi;
        }
        let envelope_rate: f64 = segments.iter().map(|s| s.mass).sum();

        // Large-jump compensator: c * int_eps^{1/2} t^{-3/2} (1-t)^{-5/2} dt.
        let mu_large = c * adaptive_simpson(
            &|t: f64| t.powf(-1.5) * (1.0 - t).powf(-2.5),
            eps,
            0.5,
            1e-12,
        );
        // Small-jump mean and second moment, via t = u^2.
        let m_small = 2.0
            * c
            * adaptive_simpson(
                &|u: f64| {
                    let t = u * u;
                    if u < 1e-8 {
                        return -1.0; // limit of (ln(1-t) + t) / t^2 * ... at 0
                    }
                    (libm::log1p(-t) + t) / (t * t) * (1.0 - t).powf(-2.5)
                },
                0.0,
                eps.sqrt(),
                1e-13,
            );
        let small_variance = 2.0
            * c
            * adaptive_simpson(
                &|u: f64| {
                    let t = u * u;
                    if u < 1e-8 {
                        return 1.0; // limit of ln(1-t)^2 / t^2 * ...
                    }
                    let l = libm::log1p(-t);
                    l * l / (t * t) * (1.0 - t).powf(-2.5)
                },
                0.0,
                eps.sqrt(),
                1e-13,
            );
        let drift = c * PSI_LINEAR_COEFFICIENT + mu_large + m_small;
        Ok(Arc::new(LevyParams {
            eps,
            drift,
            small_variance,
            envelope_rate,
            segments,
        }))
    }

    /// Memoized parameters for the power-of-two truncation `2^{-j}`.
    pub fn for_exponent(j: i32) -> Arc<LevyParams> {
        static CACHE: OnceLock<Mutex<HashMap<i32, Arc<LevyParams>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().unwrap();
        guard
            .entry(j)
            .or_insert_with(|| {
                LevyParams::new(2f64.powi(-j)).expect("power-of-two truncation is valid")
            })
            .clone()
    }

    /// Draws one candidate jump from the envelope and thins it; `Some(t)`
    /// with `t = 1 - x` on acceptance.
    pub fn sample_jump(&self, rng: &mut Rng) -> Option<f64> {
        let mut pick: f64 = rng.random_range(0.0..self.envelope_rate);
        let mut chosen = self.segments.last().unwrap();
        for s in &self.segments {
            if pick < s.mass {
                chosen = s;
                break;
            }
            pick -= s.mass;
        }
        // Inverse transform for t^{-5/2} truncated to the segment.
        let u: f64 = rng.random();
        let a = chosen.t_lo.powf(-1.5);
        let b = chosen.t_hi.powf(-1.5);
        let t = (a - u * (a - b)).powf(-2.0 / 3.0);
        // Thinning: accept with (1-t)^{-5/2} / env_const.
        let accept = (1.0 - t).powf(-2.5) / chosen.env_const;
        if rng.random::<f64>() < accept {
            Some(t)
        } else {
            None
        }
    }
}

/// A simulated driving-process path: values on a uniform grid plus the list
/// of explicitly simulated jumps.
#[derive(Debug, Clone)]
pub struct LevyPath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Explicit jumps `(time, size)`; sizes lie in `(-ln 2, 0)`.
    pub jumps: Vec<(f64, f64)>,
}

/// Simulates the driving process on `[0, horizon]` with grid step `dt`,
/// truncation `eps_j` for explicit jumps.
pub fn sample_levy(horizon: f64, eps_j: f64, dt: f64, seed: u64) -> Result<LevyPath> {
    if !(horizon > 0.0 && dt > 0.0) {
        return Err(BgError::invalid("horizon and step must be positive"));
    }
    let params = LevyParams::new(eps_j)?;
    let mut rng = make_rng(seed);
    let steps = (horizon / dt).ceil() as usize;
    let mut times = Vec::with_capacity(steps + 1);
    let mut values = Vec::with_capacity(steps + 1);
    let mut jumps = Vec::new();
    times.push(0.0);
    values.push(0.0);
    let mut xi = 0.0f64;
    // Envelope-event clock.
    let mut next_event = -rng.random::<f64>().ln() / params.envelope_rate;
    for i in 0..steps {
        let t0 = i as f64 * dt;
        let t1 = (i as f64 + 1.0) * dt;
        // Diffuse part over the step.
        let g: f64 = StandardNormal.sample(&mut rng);
        xi += params.drift * dt + (params.small_variance * dt).sqrt() * g;
        // Jumps inside (t0, t1].
        while next_event <= t1 {
            if let Some(t) = params.sample_jump(&mut rng) {
                let y = libm::log1p(-t);
                xi += y;
                jumps.push((next_event.max(t0), y));
            }
            next_event += -rng.random::<f64>().ln() / params.envelope_rate;
        }
        times.push(t1);
        values.push(xi);
    }
    Ok(LevyPath {
        times,
        values,
        jumps,
    })
}

/// Monte Carlo check of the exponent: empirical `ln E[exp(q xi_1)]` with its
/// standard error, next to the quadrature value.
#[derive(Debug, Clone, Copy)]
pub struct LevyCumulantCheck {
    pub q: f64,
    pub empirical: f64,
    pub std_err: f64,
    pub exact: f64,
}

impl LevyCumulantCheck {
    /// Simulates `reps` unit-horizon paths and compares at `q`.
    pub fn run(q: f64, eps_j: f64, dt: f64, reps: usize, seed: u64) -> Result<Self> {
        let samples: Vec<f64> = (0..reps as u64)
            .into_par_iter()
            .map(|rep| {
                let mut rng = replica_rng(seed, rep);
                let inner: u64 = rng.random();
                let path = sample_levy(1.0, eps_j, dt, inner)?;
                Ok((q * path.values.last().unwrap()).exp())
            })
            .collect::<Result<_>>()?;
        let mean = crate::stats::mean(&samples);
        let var = crate::stats::variance(&samples);
        let se_mean = (var / reps as f64).sqrt();
        Ok(LevyCumulantCheck {
            q,
            empirical: mean.ln(),
            // Delta method for the log of a mean.
            std_err: se_mean / mean,
            exact: super::psi(q)?,
        })
    }
}

/// A mass path from the Lamperti representation: heights where the mass is
/// known, and the mass values there.
#[derive(Debug, Clone)]
pub struct MassPath {
    pub heights: Vec<f64>,
    pub masses: Vec<f64>,
}

impl MassPath {
    /// Mass at height `h` (left-constant interpolation). Beyond the last
    /// recorded height the particle is treated as absorbed: `exp` of the
    /// limit of the driving process at infinity is zero.
    pub fn mass_at(&self, h: f64) -> f64 {
        if h < self.heights[0] {
            return self.masses[0];
        }
        match self
            .heights
            .binary_search_by(|probe| probe.total_cmp(&h))
        {
            Ok(i) => self.masses[i],
            Err(0) => self.masses[0],
            Err(i) if i >= self.heights.len() => 0.0,
            Err(i) => self.masses[i - 1],
        }
    }
}

/// Lamperti transform of a driving path for initial mass `z`: the mass at
/// height `sqrt(z) A(u)` is `z exp(xi_u)`, where `A` is the cumulative
/// integral of `exp(xi/2)` (trapezoid on the grid).
pub fn lamperti(path: &LevyPath, z: f64) -> Result<MassPath> {
    if !(z > 0.0) {
        return Err(BgError::invalid("initial mass must be positive"));
    }
    let n = path.values.len();
    let mut heights = Vec::with_capacity(n);
    let mut masses = Vec::with_capacity(n);
    let sqrt_z = z.sqrt();
    let mut acc = 0.0;
    heights.push(0.0);
    masses.push(z);
    for i in 1..n {
        let du = path.times[i] - path.times[i - 1];
        let prev = (0.5 * path.values[i - 1]).exp();
        let here = (0.5 * path.values[i]).exp();
        acc += du * 0.5 * (prev + here);
        heights.push(sqrt_z * acc);
        masses.push(z * path.values[i].exp());
    }
    Ok(MassPath { heights, masses })
}
