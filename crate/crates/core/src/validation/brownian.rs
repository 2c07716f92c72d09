use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::{binomial_se, SE_MULTIPLIER};
use crate::dynamics::stream_rng;
use crate::error::{invalid, Result};

/// Streams reserved per trial: one per dyadic level plus auxiliary ones.
pub(crate) const STREAMS_PER_TRIAL: u64 = 64;

pub(crate) fn levels_of(sub_resolution: usize) -> Result<u32> {
    if sub_resolution == 0 || !sub_resolution.is_power_of_two() || sub_resolution > 1 << 20 {
        return Err(invalid(format!(
            "sub-resolution must be a power of two up to 2^20, got {sub_resolution}"
        )));
    }
    Ok(sub_resolution.trailing_zeros())
}

pub(crate) fn level_rngs(seed: u64, trial: usize, levels: u32) -> Vec<ChaCha8Rng> {
    (0..=levels as u64)
        .map(|l| stream_rng(seed, trial as u64 * STREAMS_PER_TRIAL + l))
        .collect()
}

/// Fills `out` (`(2^levels + 1) * dim` values, point-major) with a Brownian
/// path with per-coordinate variance `total_var` at the end, built by dyadic
/// midpoint refinement. Level `l` draws only from `rngs[l]`, so a path at a
/// finer resolution passes through every point of the coarser one.
pub fn bridge_path(levels: u32, total_var: f64, dim: usize, rngs: &mut [ChaCha8Rng], out: &mut [f64]) {
    let n = 1usize << levels;
    assert_eq!(out.len(), (n + 1) * dim, "bridge buffer has the wrong size");
    assert!(rngs.len() > levels as usize, "one stream per level is required");
    out[..dim].fill(0.0);
    let sd = total_var.sqrt();
    for k in 0..dim {
        let z: f64 = rngs[0].sample(StandardNormal);
        out[n * dim + k] = sd * z;
    }
    for level in 1..=levels {
        let s = n >> level;
        let sd = (total_var * s as f64 / (2.0 * n as f64)).sqrt();
        let mut i = s;
        while i < n {
            for k in 0..dim {
                let z: f64 = rngs[level as usize].sample(StandardNormal);
                out[i * dim + k] = 0.5 * (out[(i - s) * dim + k] + out[(i + s) * dim + k]) + sd * z;
            }
            i += 2 * s;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub dim: usize,
    pub x: f64,
    /// `sqrt(h) (sqrt(d) + x)`.
    pub level: f64,
    /// `2 exp(-x^2/4)`.
    pub bound: f64,
    pub trials: usize,
    pub exceedances: usize,
    pub rate: f64,
    pub standard_error: f64,
    pub pass: bool,
    pub sub_resolution: usize,
}

/// Empirical `P[sup_{t <= h} |B_t| >= sqrt(h) (sqrt(d) + x)]` against
/// `2 exp(-x^2/4)`, with the supremum taken over `sub_resolution + 1` points.
pub fn brownian_tail_check(
    dim: usize,
    horizon: f64,
    trials: usize,
    sub_resolution: usize,
    xs: &[f64],
    seed: u64,
) -> Result<Vec<TailReport>> {
    if dim == 0 || !(horizon > 0.0) {
        return Err(invalid("need a positive dimension and horizon"));
    }
    let levels = levels_of(sub_resolution)?;
    let n = sub_resolution;
    let sups: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rngs = level_rngs(seed, i, levels);
            let mut w = vec![0.0; (n + 1) * dim];
            bridge_path(levels, horizon, dim, &mut rngs, &mut w);
            w.chunks_exact(dim)
                .map(|p| p.iter().map(|v| v * v).sum::<f64>().sqrt())
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(xs
        .iter()
        .map(|&x| {
            let level = horizon.sqrt() * ((dim as f64).sqrt() + x);
            let bound = 2.0 * (-x * x / 4.0).exp();
            let exceedances = sups.iter().filter(|&&s| s >= level).count();
            let rate = exceedances as f64 / trials.max(1) as f64;
            let se = binomial_se(bound.min(1.0), trials);
            TailReport {
                dim,
                x,
                level,
                bound,
                trials,
                exceedances,
                rate,
                standard_error: se,
                pass: rate <= bound + SE_MULTIPLIER * se,
                sub_resolution,
            }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReflectionReport {
    pub level: f64,
    pub horizon: f64,
    /// `2 P[N(0, h) >= level]`.
    pub exact: f64,
    pub rate: f64,
    pub standard_error: f64,
    pub pass: bool,
}

/// Empirical `P[sup_{t <= h} B_t >= level]` for one-dimensional Brownian
/// motion. The maximum over each of the `sub_steps` intervals is drawn from
/// the exact Brownian-bridge maximum law, so the estimate is unbiased.
pub fn reflection_check(horizon: f64, level: f64, trials: usize, sub_steps: usize, seed: u64) -> Result<ReflectionReport> {
    if !(horizon > 0.0 && level >= 0.0) {
        return Err(invalid("need a positive horizon and a non-negative level"));
    }
    let levels = levels_of(sub_steps)?;
    let n = sub_steps;
    let dt = horizon / n as f64;
    let hits = (0..trials)
        .into_par_iter()
        .filter(|&i| {
            let mut rngs = level_rngs(seed, i, levels);
            let mut aux = stream_rng(seed, i as u64 * STREAMS_PER_TRIAL + STREAMS_PER_TRIAL - 1);
            let mut w = vec![0.0; n + 1];
            bridge_path(levels, horizon, 1, &mut rngs, &mut w);
            w.windows(2).any(|ab| {
                let (a, b) = (ab[0], ab[1]);
                let u: f64 = 1.0 - aux.random::<f64>();
                let m = 0.5 * (a + b + ((b - a).powi(2) - 2.0 * dt * u.ln()).sqrt());
                m >= level
            })
        })
        .count();
    let exact = 2.0 * Normal::new(0.0, horizon.sqrt()).expect("valid normal").sf(level);
    let rate = hits as f64 / trials.max(1) as f64;
    let se = binomial_se(exact.min(1.0), trials);
    Ok(ReflectionReport {
        level,
        horizon,
        exact,
        rate,
        standard_error: se,
        pass: (rate - exact).abs() <= SE_MULTIPLIER * se,
    })
}
