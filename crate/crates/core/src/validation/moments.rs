use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, ln_gamma};

use super::SE_MULTIPLIER;
use crate::dynamics::stream_rng;
use crate::error::{invalid, Result};
use crate::planner::moment_to_expectation_bound;

/// Laws whose conditional moments satisfy the hypothesis of the moment lemma.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentFamily {
    /// Pareto with shape `theta/(1 + gamma)`, scaled so the bound is attained
    /// up to `delta^gamma >= delta`.
    Pareto,
    /// Exponential with `E[Y^theta] = beta`.
    Exponential,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub family: MomentFamily,
    pub beta: f64,
    pub gamma: f64,
    pub theta: f64,
    pub bound: f64,
    pub loose: f64,
    pub exact_mean: f64,
    pub mc_mean: f64,
    pub se: f64,
    pub trials: usize,
    /// Conditional moments on `{Y <= q_(1-delta)}` stay below `beta/delta^gamma` on a grid of `delta`.
    pub hypothesis_ok: bool,
    pub pass: bool,
}

struct Law {
    family: MomentFamily,
    /// Pareto scale or exponential rate.
    param: f64,
    shape: f64,
    theta: f64,
}

impl Law {
    fn new(family: MomentFamily, beta: f64, gamma: f64, theta: f64) -> Self {
        match family {
            MomentFamily::Pareto => {
                let a = theta / (1.0 + gamma);
                Law {
                    family,
                    param: (beta * (theta - a) / a).powf(1.0 / theta),
                    shape: a,
                    theta,
                }
            }
            MomentFamily::Exponential => Law {
                family,
                param: ((ln_gamma(theta + 1.0) - beta.ln()) / theta).exp(),
                shape: 1.0,
                theta,
            },
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = 1.0 - rng.random::<f64>();
        match self.family {
            MomentFamily::Pareto => self.param * u.powf(-1.0 / self.shape),
            MomentFamily::Exponential => -u.ln() / self.param,
        }
    }

    fn mean(&self) -> f64 {
        match self.family {
            MomentFamily::Pareto => self.shape * self.param / (self.shape - 1.0),
            MomentFamily::Exponential => 1.0 / self.param,
        }
    }

    /// `E[Y^theta | Y <= q_(1-delta)]`.
    fn conditional_moment(&self, delta: f64) -> f64 {
        let (a, t) = (self.shape, self.theta);
        let partial = match self.family {
            MomentFamily::Pareto => {
                let ym = self.param;
                a * ym.powf(t) * (delta.powf(-(t - a) / a) - 1.0) / (t - a)
            }
            MomentFamily::Exponential => {
                let q = -delta.ln() / self.param;
                (ln_gamma(t + 1.0) - t * self.param.ln()).exp() * gamma_lr(t + 1.0, self.param * q)
            }
        };
        partial / (1.0 - delta)
    }
}

/// Monte Carlo mean of a law satisfying the moment hypothesis against the
/// optimized bound.
pub fn moment_lemma_mc(
    beta: f64,
    gamma: f64,
    theta: f64,
    family: MomentFamily,
    trials: usize,
    seed: u64,
) -> Result<MomentReport> {
    let b = moment_to_expectation_bound(beta, gamma, theta)?;
    if trials < 2 {
        return Err(invalid("moment checks need at least two trials"));
    }
    let law = Law::new(family, beta, gamma, theta);
    let hypothesis_ok = (1..100).map(|i| i as f64 / 100.0).all(|delta| {
        law.conditional_moment(delta) <= beta * delta.powf(-gamma) * (1.0 + 1e-9)
    });
    let chunk = 4096;
    let sums: Vec<(f64, f64)> = (0..trials.div_ceil(chunk))
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, c as u64);
            let n = chunk.min(trials - c * chunk);
            (0..n).fold((0.0, 0.0), |(s, s2), _| {
                let y = law.sample(&mut rng);
                (s + y, s2 + y * y)
            })
        })
        .collect();
    let (s, s2) = sums.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = trials as f64;
    let mc_mean = s / n;
    let se = ((s2 / n - mc_mean * mc_mean).max(0.0) / (n - 1.0)).sqrt();
    Ok(MomentReport {
        family,
        beta,
        gamma,
        theta,
        bound: b.tight,
        loose: b.loose,
        exact_mean: law.mean(),
        mc_mean,
        se,
        trials,
        hypothesis_ok,
        pass: hypothesis_ok && mc_mean <= b.tight + SE_MULTIPLIER * se && law.mean() <= b.tight,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn families_satisfy_the_hypothesis_and_the_bound() {
        for family in [MomentFamily::Pareto, MomentFamily::Exponential] {
            for &(beta, gamma, theta) in &[(1.0, 0.5, 2.0), (3.0, 0.1, 4.0), (0.5, 0.9, 3.0)] {
                let r = moment_lemma_mc(beta, gamma, theta, family, 50_000, 2).unwrap();
                assert!(r.hypothesis_ok, "{r:?}");
                assert!(r.pass, "{r:?}");
            }
        }
    }

    #[test]
    fn exponential_moment_is_beta() {
        let law = Law::new(MomentFamily::Exponential, 2.0, 0.5, 3.0);
        // E[Y^3] = 6 / lambda^3
        assert!((6.0 / law.param.powi(3) - 2.0).abs() < 1e-12);
        assert!((law.conditional_moment(1e-12) - 2.0).abs() < 1e-6);
    }

    #[test]
    fn pareto_mean_matches_samples() {
        let r = moment_lemma_mc(1.0, 0.2, 6.0, MomentFamily::Pareto, 100_000, 9).unwrap();
        assert!((r.mc_mean - r.exact_mean).abs() < 4.0 * r.se);
    }
}
