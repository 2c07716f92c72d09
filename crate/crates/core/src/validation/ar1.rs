use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::SE_MULTIPLIER;
use crate::dynamics::{drive, linear_law, stream_rng, ChainState, Process};
use crate::error::{invalid, Result};
use crate::potentials::GaussianPotential;
use crate::renyi::{gaussian1d_divergence, DivergenceBound};

/// Law of the overdamped chain on `f(x) = |x|^2/2` after `T` steps:
/// `x_T ~ N((1 - eta)^T m0, v_T I)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ar1Law {
    pub mean: Vec<f64>,
    /// Per-coordinate variance.
    pub variance: f64,
    /// `2/(2 - eta)`, the limit of `variance` as `T -> inf`.
    pub stationary_variance: f64,
}

/// Started from `N(m0, var0 I)`:
/// `v_T = (1 - eta)^(2T) var0 + (1 - (1 - eta)^(2T)) 2/(2 - eta)`.
pub fn ar1_law(eta: f64, steps: u64, mean0: &[f64], var0: f64) -> Result<Ar1Law> {
    if !(eta > 0.0 && eta < 2.0) {
        return Err(invalid(format!("the AR(1) chain needs 0 < eta < 2, got {eta}")));
    }
    if !(var0 >= 0.0 && var0.is_finite()) {
        return Err(invalid(format!("initial variance must be >= 0, got {var0}")));
    }
    let stationary = 2.0 / (2.0 - eta);
    let law = linear_law(1.0, eta, steps);
    Ok(Ar1Law {
        mean: mean0.iter().map(|m| law.decay * m).collect(),
        variance: law.decay_sq * var0 + law.noise_var,
        stationary_variance: stationary,
    })
}

/// Law after `T` steps from the point `x0`.
pub fn ar1_oracle(eta: f64, steps: u64, x0: &[f64]) -> Result<Ar1Law> {
    ar1_law(eta, steps, x0, 0.0)
}

/// Empirical first two moments at one checkpoint against the exact law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentCheck {
    pub steps: usize,
    pub chains: usize,
    pub mean: f64,
    pub variance: f64,
    pub exact_mean: f64,
    pub exact_variance: f64,
    /// `sqrt(v/n)`.
    pub mean_se: f64,
    /// `v sqrt(2/(n-1))`, the Gaussian sample-variance standard error.
    pub variance_se: f64,
    pub pass: bool,
}

/// Runs `chains` one-dimensional chains on `x^2/2` from `x0` through the
/// sampler's own step code and compares moments at each checkpoint.
pub fn ar1_moment_check(eta: f64, x0: f64, checkpoints: &[usize], chains: usize, seed: u64) -> Result<Vec<MomentCheck>> {
    if chains < 2 {
        return Err(invalid("moment checks need at least two chains"));
    }
    if checkpoints.is_empty() || checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("checkpoints must be non-empty and strictly increasing"));
    }
    let p = GaussianPotential::isotropic(1, 1.0)?;
    let last = *checkpoints.last().unwrap();
    let samples: Vec<Vec<f64>> = (0..chains)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let mut s = ChainState::at(vec![x0]);
            let mut out = Vec::with_capacity(checkpoints.len());
            let mut next = 0;
            if checkpoints[0] == 0 {
                out.push(x0);
                next = 1;
            }
            drive(&mut s, &p, Process::Overdamped, eta, last, None, &mut rng, |st| {
                if next < checkpoints.len() && st.step == checkpoints[next] {
                    out.push(st.x[0]);
                    next += 1;
                }
            })?;
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let n = chains as f64;
    checkpoints
        .iter()
        .enumerate()
        .map(|(j, &steps)| {
            let law = ar1_oracle(eta, steps as u64, &[x0])?;
            let mean = samples.iter().map(|s| s[j]).sum::<f64>() / n;
            let variance = samples.iter().map(|s| (s[j] - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let mean_se = (law.variance / n).sqrt();
            let variance_se = law.variance * (2.0 / (n - 1.0)).sqrt();
            let pass = (mean - law.mean[0]).abs() <= SE_MULTIPLIER * mean_se
                && (variance - law.variance).abs() <= SE_MULTIPLIER * variance_se;
            Ok(MomentCheck {
                steps,
                chains,
                mean,
                variance,
                exact_mean: law.mean[0],
                exact_variance: law.variance,
                mean_se,
                variance_se,
                pass,
            })
        })
        .collect()
}

/// `D_alpha` between the endpoint laws of the chains at steps `eta` (T steps)
/// and `eta/k` (`kT` steps) on the one-dimensional quadratic, both started
/// from `N(x0, var0)`.
pub fn empirical_discretization_divergence(
    alpha: f64,
    eta: f64,
    k: u64,
    steps: u64,
    x0: f64,
    var0: f64,
) -> Result<DivergenceBound> {
    if k == 0 {
        return Err(invalid("refinement factor must be positive"));
    }
    let coarse = ar1_law(eta, steps, &[x0], var0)?;
    let fine = ar1_law(eta / k as f64, steps * k, &[x0], var0)?;
    gaussian1d_divergence(alpha, coarse.mean[0], coarse.variance, fine.mean[0], fine.variance)
}

/// `D_alpha(N(0, 2/(2 - eta)) || N(0, 2/(2 - eta/k)))`.
pub fn stationary_discretization_divergence(alpha: f64, eta: f64, k: u64) -> Result<DivergenceBound> {
    if k == 0 {
        return Err(invalid("refinement factor must be positive"));
    }
    let h = eta / k as f64;
    gaussian1d_divergence(alpha, 0.0, 2.0 / (2.0 - eta), 0.0, 2.0 / (2.0 - h))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_steps_is_the_start() {
        let law = ar1_oracle(0.3, 0, &[1.5, -2.0]).unwrap();
        assert_eq!(law.mean, vec![1.5, -2.0]);
        assert_eq!(law.variance, 0.0);
    }

    #[test]
    fn long_run_is_stationary() {
        let law = ar1_oracle(0.1, 100_000, &[3.0]).unwrap();
        assert!((law.variance - 2.0 / 1.9).abs() < 1e-12);
        assert!(law.mean[0].abs() < 1e-12);
        assert!((ar1_oracle(1e-9, 1, &[0.0]).unwrap().stationary_variance - 1.0).abs() < 1e-9);
    }

    #[test]
    fn matches_the_geometric_sum() {
        for &(eta, t) in &[(0.1, 7u64), (0.5, 3), (1.5, 5), (1.0, 4)] {
            let law = ar1_law(eta, t, &[2.0], 0.7).unwrap();
            let r: f64 = 1.0 - eta;
            let mut var = r.powi(2 * t as i32) * 0.7;
            for i in 0..t {
                var += 2.0 * eta * r.powi(2 * i as i32);
            }
            assert!((law.variance - var).abs() < 1e-12);
            assert!((law.mean[0] - 2.0 * r.powi(t as i32)).abs() < 1e-12);
        }
    }

    #[test]
    fn identical_chains_have_zero_divergence() {
        assert_eq!(empirical_discretization_divergence(2.0, 0.1, 1, 20, 1.0, 0.5).unwrap().value, 0.0);
    }

    #[test]
    fn divergence_shrinks_with_eta() {
        let mut last = f64::INFINITY;
        for &eta in &[0.4, 0.2, 0.1, 0.05, 0.01] {
            let steps = (2.0 / eta) as u64;
            let d = empirical_discretization_divergence(2.0, eta, 16, steps, 0.0, 1.0).unwrap().value;
            assert!(d < last);
            last = d;
        }
    }

    #[test]
    fn chain_moments_match() {
        let checks = ar1_moment_check(0.1, 1.0, &[1, 10, 100], 20_000, 3).unwrap();
        for c in &checks {
            assert!(c.pass, "{c:?}");
        }
    }
}
