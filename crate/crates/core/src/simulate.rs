//! Synthetic rate surfaces with a known Box-Cox parameter.
//!
//! On the true transformed scale the surface is an exact one-component
//! model plus noise:
//!
//! ```text
//! z[t, i] = mean[i] + level[t] * phi[i] + noise_sd * base[i]^lambda * e[t, i]
//! ```
//!
//! `base` is a fertility-shaped age profile, `mean = box_cox(base)`, and
//! `phi[i] = base[i]^lambda * contrast[i]` so that `lambda z + 1 =
//! base^lambda (1 + lambda level contrast)` stays positive. `level` is a
//! random walk with drift, and the noise is about `noise_sd` relative on the
//! rate scale. The age contrast tilts the schedule between young and old
//! ages, so only the true `lambda` makes the surface exactly rank one.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::AgeRateSurface;
use crate::error::{Error, Result};
use crate::transform::{box_cox, inv_box_cox, BoxCoxLambda};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationConfig {
    pub first_year: i32,
    pub n_years: usize,
    pub first_age: i32,
    pub n_ages: usize,
    pub lambda: f64,
    /// Level at the first year.
    pub start_level: f64,
    /// Per-year drift of the level.
    pub drift: f64,
    /// Standard deviation of the level's random-walk increments.
    pub walk_sd: f64,
    /// Relative observation noise.
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            first_year: 1950,
            n_years: 60,
            first_age: 15,
            n_ages: 35,
            lambda: 0.5,
            start_level: -0.8,
            drift: 0.027,
            walk_sd: 0.01,
            noise_sd: 0.01,
            seed: 1,
        }
    }
}

/// Baseline age profile: a peak near age 28 on top of a small floor.
fn base_profile(first_age: i32, n_ages: usize) -> Vec<f64> {
    (0..n_ages)
        .map(|a| {
            let x = (first_age + a as i32) as f64;
            0.005 + 0.18 * (-((x - 28.0) / 7.0).powi(2)).exp()
        })
        .collect()
}

/// Age contrast in `[-1, 1]`, negative at young ages.
fn contrast(n_ages: usize) -> Vec<f64> {
    if n_ages == 1 {
        return vec![1.0];
    }
    (0..n_ages)
        .map(|a| 2.0 * a as f64 / (n_ages - 1) as f64 - 1.0)
        .collect()
}

pub fn simulate_surface(config: &SimulationConfig) -> Result<AgeRateSurface> {
    let lambda = BoxCoxLambda::new(config.lambda)?;
    if config.n_years < 2 || config.n_ages < 1 {
        return Err(Error::invalid("simulation needs at least 2 years and 1 age"));
    }
    for (name, v) in [("noise", config.noise_sd), ("walk", config.walk_sd)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::invalid(format!("{name} standard deviation must be nonnegative")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let base = base_profile(config.first_age, config.n_ages);
    let tilt = contrast(config.n_ages);
    let l = config.lambda;

    let mut level = config.start_level;
    let mut levels = Vec::with_capacity(config.n_years);
    for t in 0..config.n_years {
        if t > 0 {
            level += config.drift + config.walk_sd * rng.sample::<f64, _>(StandardNormal);
        }
        levels.push(level);
    }

    let mut rates = DMatrix::zeros(config.n_years, config.n_ages);
    for t in 0..config.n_years {
        for i in 0..config.n_ages {
            let scale = base[i].powf(l);
            let mean = box_cox(base[i], lambda)?;
            let z = mean + levels[t] * scale * tilt[i] + config.noise_sd * scale * rng.sample::<f64, _>(StandardNormal);
            rates[(t, i)] = inv_box_cox(z, lambda).map_err(|_| {
                Error::invalid(format!(
                    "simulated value leaves the Box-Cox domain at year index {t}, age index {i}; reduce the level range"
                ))
            })?;
        }
    }
    AgeRateSurface::new(config.first_year, config.first_age, rates)
}
