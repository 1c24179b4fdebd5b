//! The particle cascade: each particle's mass follows the Lamperti transform
//! of the driving process, every explicit negative jump spawns a child of
//! the lost mass, and children born below the truncation mass are dropped.
//!
//! Each particle runs in its own Lamperti clock with a fixed step, so the
//! induced height resolution scales like the square root of its mass. The
//! jump truncation is chosen per particle as `m_min / (4 m)` (power-of-two
//! quantized, capped at 1/4) and rebased when the mass leaves its reference
//! window, so every child at or above the truncation mass is simulated
//! explicitly while small particles stay cheap.

use super::levy::LevyParams;
use crate::error::{BgError, Result};
use crate::rng::{child_seed, make_rng, Rng};
use crate::stats::linear_fit;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

/// Gaussian sub-step of the particle clock.
const DU_MAX: f64 = 0.0625;
/// A particle is treated as absorbed once its mass falls below
/// `ABSORPTION_FACTOR * min(m_min, root mass)`; the unsimulated remainder of
/// its absorption height is of order the square root of that cutoff.
const ABSORPTION_FACTOR: f64 = 1e-6;

/// One simulated particle of a cascade.
#[derive(Debug, Clone)]
pub struct CascadeParticle {
    pub parent: Option<usize>,
    pub birth_height: f64,
    pub init_mass: f64,
    pub absorption_height: f64,
    pub children: Vec<usize>,
    /// `(height, mass)` breakpoints, recorded only by [`simulate_cascade`].
    pub path: Vec<(f64, f64)>,
}

/// A growth-fragmentation cascade truncated at `m_min`.
#[derive(Debug, Clone)]
pub struct Cascade {
    pub root_mass: f64,
    pub m_min: f64,
    pub particles: Vec<CascadeParticle>,
    /// Supremum of absorption heights over retained particles.
    pub extinction_height: f64,
}

impl Cascade {
    /// Ranked masses of the particles alive at height `r`, in decreasing
    /// order; the sequence at height zero is `(root mass)`.
    pub fn ranked_masses(&self, r: f64) -> Vec<f64> {
        let mut masses: Vec<f64> = self
            .particles
            .iter()
            .filter(|p| p.birth_height <= r && r < p.absorption_height)
            .map(|p| {
                // Last recorded breakpoint at or before r.
                match p
                    .path
                    .binary_search_by(|probe| probe.0.total_cmp(&r))
                {
                    Ok(i) => p.path[i].1,
                    Err(0) => p.init_mass,
                    Err(i) => p.path[i - 1].1,
                }
            })
            .filter(|&m| m > 0.0)
            .collect();
        masses.sort_by(|a, b| b.total_cmp(a));
        masses
    }
}

struct ParticleRun {
    absorption: f64,
    children: Vec<(f64, f64)>,
    path: Vec<(f64, f64)>,
}

/// Simulates one particle to absorption.
fn run_particle(
    init_mass: f64,
    birth: f64,
    m_min: f64,
    m_stop: f64,
    children_allowed: bool,
    record: bool,
    rng: &mut Rng,
    budget: &mut Option<u64>,
) -> Result<ParticleRun> {
    let sqrt_m = init_mass.sqrt();
    let mut xi = 0.0f64;
    let mut acc = 0.0f64; // integral of exp(xi/2) in particle clock
    let mut children = Vec::new();
    let mut path = Vec::new();
    if record {
        path.push((birth, init_mass));
    }

    // Truncation policy for the current mass regime.
    let pick_params = |mass_ref: f64| -> std::sync::Arc<LevyParams> {
        let raw = if children_allowed && mass_ref > 0.5 * m_min {
            (m_min / (4.0 * mass_ref)).min(0.25)
        } else {
            0.25
        };
        let j = (-raw.log2()).ceil() as i32;
        LevyParams::for_exponent(j.max(2))
    };
    let mut mass_ref = init_mass;
    let mut params = pick_params(mass_ref);
    let mut next_event = -rng.random::<f64>().ln() / params.envelope_rate;
    let mut u = 0.0f64;

    loop {
        if let Some(b) = budget {
            if *b == 0 {
                return Err(BgError::InsufficientSamples(
                    "cascade event budget exhausted".into(),
                ));
            }
            *b -= 1;
        }
        // Advance the diffuse part to the next event or by one sub-step.
        let du = (next_event - u).min(DU_MAX);
        if du > 0.0 {
            let g: f64 = StandardNormal.sample(rng);
            let xi_new = xi + params.drift * du + (params.small_variance * du).sqrt() * g;
            acc += du * 0.5 * ((0.5 * xi).exp() + (0.5 * xi_new).exp());
            xi = xi_new;
            u += du;
        }
        let mass = init_mass * xi.exp();
        if record {
            path.push((birth + sqrt_m * acc, mass));
        }
        if mass < m_stop {
            return Ok(ParticleRun {
                absorption: birth + sqrt_m * acc,
                children,
                path,
            });
        }
        if u >= next_event {
            if let Some(t) = params.sample_jump(rng) {
                let child_mass = mass * t;
                if children_allowed && child_mass >= m_min {
                    children.push((birth + sqrt_m * acc, child_mass));
                }
                xi += libm::log1p(-t);
                if record {
                    path.push((birth + sqrt_m * acc, init_mass * xi.exp()));
                }
            }
            next_event += -rng.random::<f64>().ln() / params.envelope_rate;
        }
        // Rebase the truncation when the mass leaves its reference window.
        let mass = init_mass * xi.exp();
        if mass > 2.0 * mass_ref || mass < 0.125 * mass_ref {
            mass_ref = mass;
            params = pick_params(mass_ref);
            next_event = u + -rng.random::<f64>().ln() / params.envelope_rate;
        }
    }
}

fn run_cascade(
    z: f64,
    m_min: f64,
    seed: u64,
    record: bool,
    mut event_budget: Option<u64>,
) -> Result<Cascade> {
    if !(z > 0.0) || !(m_min > 0.0) {
        return Err(BgError::invalid("root mass and truncation must be positive"));
    }
    let m_stop = ABSORPTION_FACTOR * m_min.min(z);
    // Root below the truncation: simulate the root alone, no descendants.
    let root_children_allowed = z > m_min;

    let mut particles: Vec<CascadeParticle> = Vec::new();
    // (parent index, birth height, mass, seed)
    let mut queue: Vec<(Option<usize>, f64, f64, u64)> =
        vec![(None, 0.0, z, child_seed(seed, 0))];
    let mut h_star = 0.0f64;
    while let Some((parent, birth, mass, pseed)) = queue.pop() {
        let mut rng = make_rng(pseed);
        let children_allowed = parent.is_some() || root_children_allowed;
        let run = run_particle(
            mass,
            birth,
            m_min,
            m_stop,
            children_allowed,
            record,
            &mut rng,
            &mut event_budget,
        )?;
        let me = particles.len();
        if let Some(p) = parent {
            particles[p].children.push(me);
        }
        h_star = h_star.max(run.absorption);
        particles.push(CascadeParticle {
            parent,
            birth_height: birth,
            init_mass: mass,
            absorption_height: run.absorption,
            children: Vec::new(),
            path: run.path,
        });
        for (idx, &(bh, bm)) in run.children.iter().enumerate() {
            queue.push((Some(me), bh, bm, child_seed(pseed, idx as u64 + 1)));
        }
    }
    Ok(Cascade {
        root_mass: z,
        m_min,
        particles,
        extinction_height: h_star,
    })
}

/// Simulates a cascade with full mass paths recorded.
pub fn simulate_cascade(z: f64, m_min: f64, seed: u64) -> Result<Cascade> {
    run_cascade(z, m_min, seed, true, None)
}

/// Extinction height of a cascade, without recording paths.
pub fn extinction_height(z: f64, m_min: f64, seed: u64) -> Result<f64> {
    Ok(run_cascade(z, m_min, seed, false, None)?.extinction_height)
}

/// Extinction height under an event budget; errors when the budget runs out,
/// which callers use to bound the work of large batches deterministically.
pub fn extinction_height_with_budget(
    z: f64,
    m_min: f64,
    seed: u64,
    budget: u64,
) -> Result<f64> {
    Ok(run_cascade(z, m_min, seed, false, Some(budget))?.extinction_height)
}

/// Log-log fit of the empirical survival function of extinction heights.
#[derive(Debug, Clone)]
pub struct TailFit {
    pub slope: f64,
    pub std_err: f64,
    pub r_lo: f64,
    pub r_hi: f64,
    /// `(r, survival)` points used by the fit.
    pub points: Vec<(f64, f64)>,
}

/// Fits the survival tail of extinction-height samples over up to one decade
/// of heights, between the 0.25-survival quantile and the height where fewer
/// than 40 samples remain.
pub fn extinction_tail(samples: &[f64]) -> Result<TailFit> {
    if samples.len() < 10_000 {
        return Err(BgError::InsufficientSamples(format!(
            "tail fit needs >= 10000 samples, got {}",
            samples.len()
        )));
    }
    let mut sorted: Vec<f64> = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let quantile = |s: f64| -> f64 {
        // Height with survival fraction s.
        let idx = ((1.0 - s) * n as f64).floor() as usize;
        sorted[idx.min(n - 1)]
    };
    let r_lo = quantile(0.25);
    let r_hi = quantile(40.0 / n as f64).min(10.0 * r_lo);
    if !(r_hi > r_lo) || r_lo <= 0.0 {
        return Err(BgError::InsufficientSamples(
            "degenerate sample: no usable fitting window".into(),
        ));
    }
    let grid = 24;
    let mut points = Vec::with_capacity(grid);
    for g in 0..grid {
        let r = r_lo * (r_hi / r_lo).powf(g as f64 / (grid - 1) as f64);
        let above = n - sorted.partition_point(|&x| x <= r);
        if above > 0 {
            points.push((r, above as f64 / n as f64));
        }
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.log10()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.log10()).collect();
    let (slope, _b, se) = linear_fit(&xs, &ys)?;
    Ok(TailFit {
        slope,
        std_err: se,
        r_lo,
        r_hi,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::child_seed;

    #[test]
    fn ranked_masses_start_at_the_root_mass() {
        let c = simulate_cascade(1.0, 0.05, 5).unwrap();
        let x0 = c.ranked_masses(0.0);
        assert_eq!(x0.len(), 1);
        assert_eq!(x0[0], 1.0);
        // Ranked and nonincreasing at a later height.
        let x = c.ranked_masses(0.3);
        for w in x.windows(2) {
            assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn root_below_truncation_runs_alone() {
        let c = simulate_cascade(0.5, 0.6, 9).unwrap();
        assert_eq!(c.particles.len(), 1);
        assert_eq!(c.extinction_height, c.particles[0].absorption_height);
        assert!(c.extinction_height > 0.0);
    }

    #[test]
    fn genealogy_matches_birth_records() {
        let c = simulate_cascade(1.0, 0.02, 17).unwrap();
        assert!(c.particles.len() > 1, "expected children at this truncation");
        for (i, p) in c.particles.iter().enumerate() {
            if let Some(parent) = p.parent {
                assert!(c.particles[parent].children.contains(&i));
                assert!(p.init_mass >= c.m_min);
                assert!(p.birth_height > c.particles[parent].birth_height);
                assert!(p.birth_height < c.particles[parent].absorption_height);
                // The parent loses exactly the child's mass at the birth height.
                let before = c.particles[parent]
                    .path
                    .iter()
                    .take_while(|&&(h, _)| h <= p.birth_height)
                    .last()
                    .unwrap()
                    .1;
                assert!(before > p.init_mass);
            }
            assert!(p.absorption_height >= p.birth_height);
        }
    }

    #[test]
    fn retained_particles_grow_as_the_truncation_shrinks() {
        let mut means = Vec::new();
        for &m_min in &[0.08, 0.04, 0.02] {
            let total: usize = (0..30u64)
                .map(|s| {
                    simulate_cascade(1.0, m_min, child_seed(100, s))
                        .unwrap()
                        .particles
                        .len()
                })
                .sum();
            means.push(total as f64 / 30.0);
        }
        assert!(means[0] < means[1] && means[1] < means[2], "{means:?}");
    }

    #[test]
    fn extinction_heights_are_reproducible() {
        let a = extinction_height(1.0, 0.05, 123).unwrap();
        let b = extinction_height(1.0, 0.05, 123).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn budget_errors_out_deterministically() {
        let r = extinction_height_with_budget(1.0, 1e-3, 7, 50);
        assert!(r.is_err());
    }

    #[test]
    fn tail_fit_recovers_a_known_power_law() {
        // Survival r^{-6} on r >= 1: samples U^{-1/6}.
        let mut rng = crate::rng::make_rng(4);
        let samples: Vec<f64> = (0..40_000)
            .map(|_| {
                let u: f64 = rng.random();
                u.powf(-1.0 / 6.0)
            })
            .collect();
        let fit = extinction_tail(&samples).unwrap();
        assert!(
            fit.slope > -6.5 && fit.slope < -5.5,
            "slope {} (se {})",
            fit.slope,
            fit.std_err
        );
        // Scale invariance of the fitted exponent.
        let scaled: Vec<f64> = samples.iter().map(|x| x * 3.0).collect();
        let fit2 = extinction_tail(&scaled).unwrap();
        assert!((fit.slope - fit2.slope).abs() < 1e-6);
    }

    #[test]
    fn tail_fit_rejects_bad_input() {
        assert!(extinction_tail(&[1.0; 100]).is_err());
        assert!(extinction_tail(&vec![2.0; 20_000]).is_err());
    }
}
