use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fill_normal, start, stream_rng, ChainState, DynamicsConfig, InitialDistribution, Process};
use crate::error::Result;
use crate::potentials::Potential;

/// Law of `y_T` for `y_(k+1) = (1 - eta a) y_k + N(0, 2 eta)` started at `y_0`:
/// `y_T ~ N(decay y_0, noise_var)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearLaw {
    pub decay: f64,
    /// `(1 - eta a)^(2T)`.
    pub decay_sq: f64,
    pub noise_var: f64,
}

/// Closed form of `T` overdamped steps on a one-dimensional quadratic with curvature `a >= 0`.
pub fn linear_law(a: f64, eta: f64, steps: u64) -> LinearLaw {
    if steps == 0 {
        return LinearLaw {
            decay: 1.0,
            decay_sq: 1.0,
            noise_var: 0.0,
        };
    }
    let t = steps as f64;
    let h = eta * a;
    if h == 0.0 {
        return LinearLaw {
            decay: 1.0,
            decay_sq: 1.0,
            noise_var: 2.0 * eta * t,
        };
    }
    if h == 2.0 {
        return LinearLaw {
            decay: if steps % 2 == 1 { -1.0 } else { 1.0 },
            decay_sq: 1.0,
            noise_var: 2.0 * eta * t,
        };
    }
    // ln |1 - h|, accurate for tiny h
    let log_rho = if h < 1.0 {
        (-h).ln_1p()
    } else if h > 1.0 {
        (h - 1.0).ln()
    } else {
        f64::NEG_INFINITY
    };
    let sign = if h > 1.0 && steps % 2 == 1 { -1.0 } else { 1.0 };
    // sum_(i<T) rho^(2i) = (1 - rho^(2T)) / (h (2 - h))
    let one_minus = -(2.0 * t * log_rho).exp_m1();
    LinearLaw {
        decay: sign * (t * log_rho).exp(),
        decay_sq: (2.0 * t * log_rho).exp(),
        noise_var: 2.0 * eta * one_minus / (h * (2.0 - h)),
    }
}

/// How final states were produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMethod {
    /// Step-by-step simulation.
    Simulated,
    /// One draw from the closed-form `T`-step law of the chain.
    ExactLaw,
}

/// Final states of `n` overdamped chains on a diagonal quadratic, drawn from
/// the exact `T`-step law. `None` when the potential is not a diagonal
/// quadratic, the process is underdamped, or a radius guard is set.
pub fn exact_final_states(
    p: &dyn Potential,
    cfg: &DynamicsConfig,
    init: &InitialDistribution,
    n: usize,
) -> Result<Option<Vec<ChainState>>> {
    cfg.validate()?;
    if cfg.process != Process::Overdamped || cfg.radius_guard.is_some() {
        return Ok(None);
    }
    let Some(q) = p.diagonal_quadratic() else {
        return Ok(None);
    };
    let laws: Vec<LinearLaw> = q
        .precision
        .iter()
        .map(|&a| linear_law(a, cfg.eta, cfg.steps as u64))
        .collect();
    let d = p.dim();
    let states = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(cfg.seed, i as u64);
            let mut s = start(p, cfg, init, &mut rng)?;
            let mut z = vec![0.0; d];
            fill_normal(&mut rng, &mut z, 1.0);
            for k in 0..d {
                let y = s.x[k] - q.center[k];
                s.x[k] = q.center[k] + laws[k].decay * y + laws[k].noise_var.sqrt() * z[k];
            }
            s.step = cfg.steps;
            s.t = cfg.steps as f64 * cfg.eta;
            Ok(s)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Some(states))
}

/// Exact-law draws when available, simulation otherwise.
pub fn final_states(
    p: &dyn Potential,
    cfg: &DynamicsConfig,
    init: &InitialDistribution,
    n: usize,
) -> Result<(Vec<ChainState>, SamplingMethod)> {
    match exact_final_states(p, cfg, init, n)? {
        Some(s) => Ok((s, SamplingMethod::ExactLaw)),
        None => Ok((super::run_final_states(p, cfg, init, n)?, SamplingMethod::Simulated)),
    }
}
