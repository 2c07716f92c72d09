use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::brownian::{bridge_path, level_rngs, levels_of, STREAMS_PER_TRIAL};
use super::{binomial_se, ViolationReport, SE_MULTIPLIER};
use crate::dynamics::{fill_normal, sample_initial, stream_rng, InitialDistribution, Process, Trajectory};
use crate::error::{invalid, Error, Result};
use crate::potentials::Potential;

/// A batch of sub-sampled trajectories on a canonical potential.
#[derive(Clone, Debug)]
pub struct PathExperiment<'a> {
    pub potential: &'a dyn Potential,
    pub process: Process,
    pub eta: f64,
    pub steps: usize,
    pub initial: InitialDistribution,
    /// Points per step at which the within-step path is observed; a power of two.
    pub sub_resolution: usize,
    pub trials: usize,
    pub seed: u64,
}

/// Path maxima of one trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathStats {
    /// Largest `|x_s - x_(i eta)|` over observed times `s` in step `i`.
    pub max_displacement: f64,
    /// Largest `mu f(x_s) + |v_s|^2/2` over observed times (underdamped only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_energy: Option<f64>,
}

fn grad(p: &dyn Potential, x: &[f64], g: &mut [f64], step: usize) -> Result<()> {
    p.gradient(x, g);
    if g.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteGradient { step })
    }
}

fn sq_norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum()
}

/// Overdamped: within step `i` the path is `x - s grad f(x) + sqrt(2) B_s`,
/// observed on a dyadic grid through Brownian-bridge refinement, so doubling
/// `sub_resolution` only adds observation points. Underdamped: the frozen-gradient
/// velocity equation is integrated with `sub_resolution` Euler sub-steps.
fn one_path(exp: &PathExperiment, trial: usize) -> Result<PathStats> {
    let p = exp.potential;
    let d = p.dim();
    let n = exp.sub_resolution;
    let levels = levels_of(n)?;
    let mut init_rng = stream_rng(exp.seed, trial as u64 * STREAMS_PER_TRIAL + STREAMS_PER_TRIAL - 1);
    let start = sample_initial(&exp.initial, p, &mut init_rng)?;
    let mut x = start.x;
    let mut g = vec![0.0; d];
    let mut max_disp: f64 = 0.0;
    match exp.process {
        Process::Overdamped => {
            let mut rngs = level_rngs(exp.seed, trial, levels);
            let mut w = vec![0.0; (n + 1) * d];
            let mut pos = vec![0.0; d];
            for step in 0..exp.steps {
                grad(p, &x, &mut g, step)?;
                bridge_path(levels, 2.0 * exp.eta, d, &mut rngs, &mut w);
                for j in 1..=n {
                    let s = exp.eta * j as f64 / n as f64;
                    for k in 0..d {
                        pos[k] = -s * g[k] + w[j * d + k];
                    }
                    max_disp = max_disp.max(sq_norm(&pos).sqrt());
                }
                for (xi, di) in x.iter_mut().zip(&pos) {
                    *xi += di;
                }
            }
            Ok(PathStats {
                max_displacement: max_disp,
                max_energy: None,
            })
        }
        Process::Underdamped { gamma, mu } => {
            let h = exp.eta / n as f64;
            if gamma * h >= 1.0 {
                return Err(invalid("gamma * eta / sub_resolution must be < 1"));
            }
            let mut rng = stream_rng(exp.seed, trial as u64 * STREAMS_PER_TRIAL);
            let mut v = start.v.unwrap_or_else(|| vec![0.0; d]);
            let energy = |x: &[f64], v: &[f64]| mu * p.value(x) + 0.5 * sq_norm(v);
            let mut max_energy = energy(&x, &v);
            let mut xi = vec![0.0; d];
            let mut x0 = vec![0.0; d];
            let sd = (2.0 * gamma * mu * h).sqrt();
            for step in 0..exp.steps {
                grad(p, &x, &mut g, step)?;
                x0.copy_from_slice(&x);
                for _ in 0..n {
                    fill_normal(&mut rng, &mut xi, sd);
                    for k in 0..d {
                        v[k] = (1.0 - gamma * h) * v[k] - mu * h * g[k] + xi[k];
                        x[k] += h * v[k];
                    }
                    let disp: f64 = x.iter().zip(&x0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                    max_disp = max_disp.max(disp);
                    max_energy = max_energy.max(energy(&x, &v));
                }
            }
            Ok(PathStats {
                max_displacement: max_disp,
                max_energy: Some(max_energy),
            })
        }
    }
}

/// Path maxima of every trial; trial `i` draws from streams
/// `64 i .. 64 i + 63` of the master seed.
pub fn path_stats(exp: &PathExperiment) -> Result<Vec<PathStats>> {
    if !(exp.eta > 0.0 && exp.eta.is_finite()) {
        return Err(invalid(format!("step size must be positive, got {}", exp.eta)));
    }
    levels_of(exp.sub_resolution)?;
    (0..exp.trials).into_par_iter().map(|i| one_path(exp, i)).collect()
}

/// Fraction of trajectories with some observed within-step displacement `> r`.
pub fn estimate_radius_violation(exp: &PathExperiment, r: f64, delta: f64) -> Result<ViolationReport> {
    let stats = path_stats(exp)?;
    let violations = stats.iter().filter(|s| s.max_displacement > r).count();
    Ok(ViolationReport::new(exp.trials, violations, delta).sub_sampled(exp.sub_resolution))
}

/// `phi_t = mu f(x_t) + |v_t|^2 / 2` at every recorded state.
pub fn hamiltonian_track(traj: &Trajectory, p: &dyn Potential, mu: f64) -> Result<Vec<f64>> {
    traj.states
        .iter()
        .map(|s| {
            let v = s
                .v
                .as_ref()
                .ok_or_else(|| invalid("Hamiltonian tracking needs velocities"))?;
            Ok(mu * p.value(&s.x) + 0.5 * sq_norm(v))
        })
        .collect()
}

/// Smallest constant `c` at which the empirical violation rate passes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationCell {
    pub delta: f64,
    pub trials: usize,
    pub c_min: f64,
    pub default_c: f64,
    pub default_passes: bool,
}

/// The radius scales linearly in `c`, so a trajectory violates at `c` iff
/// `max_displacement / unit_radius(delta) > c`. The frontier is the order
/// statistic that leaves `floor((delta + 3 SE) n)` violations.
pub fn calibrate_c(
    stats: &[PathStats],
    unit_radius: impl Fn(f64) -> f64,
    deltas: &[f64],
    default_c: f64,
) -> Vec<CalibrationCell> {
    let n = stats.len();
    deltas
        .iter()
        .map(|&delta| {
            let unit = unit_radius(delta);
            let mut ratios: Vec<f64> = stats.iter().map(|s| s.max_displacement / unit).collect();
            ratios.sort_by(|a, b| b.total_cmp(a));
            let allowed = ((delta + SE_MULTIPLIER * binomial_se(delta, n)) * n as f64).floor() as usize;
            let c_min = ratios.get(allowed).copied().unwrap_or(0.0);
            CalibrationCell {
                delta,
                trials: n,
                c_min,
                default_c,
                default_passes: default_c >= c_min,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{run_chain_seeded, DynamicsConfig};
    use crate::potentials::GaussianPotential;

    fn experiment(p: &GaussianPotential, k: usize) -> PathExperiment<'_> {
        PathExperiment {
            potential: p,
            process: Process::Overdamped,
            eta: 0.05,
            steps: 20,
            initial: InitialDistribution::StandardGaussian,
            sub_resolution: k,
            trials: 200,
            seed: 5,
        }
    }

    #[test]
    fn infinite_and_zero_radius() {
        let p = GaussianPotential::isotropic(2, 1.0).unwrap();
        let e = experiment(&p, 8);
        assert_eq!(estimate_radius_violation(&e, f64::INFINITY, 0.1).unwrap().violations, 0);
        assert_eq!(estimate_radius_violation(&e, 0.0, 0.1).unwrap().violations, 200);
    }

    #[test]
    fn refinement_never_lowers_the_maximum() {
        let p = GaussianPotential::isotropic(2, 1.0).unwrap();
        let coarse = path_stats(&experiment(&p, 8)).unwrap();
        let fine = path_stats(&experiment(&p, 16)).unwrap();
        for (c, f) in coarse.iter().zip(&fine) {
            assert!(f.max_displacement >= c.max_displacement);
        }
    }

    #[test]
    fn calibration_frontier_passes_exactly() {
        let stats: Vec<PathStats> = (1..=100)
            .map(|i| PathStats {
                max_displacement: i as f64,
                max_energy: None,
            })
            .collect();
        let cells = calibrate_c(&stats, |_| 10.0, &[0.1], 2.0);
        // allowed = floor((0.1 + 3 * 0.03) * 100) = 19 violations
        assert_eq!(cells[0].c_min, 8.1);
        let violations = stats.iter().filter(|s| s.max_displacement / 10.0 > cells[0].c_min).count();
        assert!(ViolationReport::new(100, violations, 0.1).pass);
    }

    #[test]
    fn hamiltonian_of_rest_state_is_zero() {
        let p = GaussianPotential::isotropic(1, 1.0).unwrap();
        let cfg = DynamicsConfig {
            process: Process::Underdamped { gamma: 2.0, mu: 1.0 },
            eta: 0.01,
            steps: 3,
            radius_guard: None,
            seed: 1,
        };
        let init = InitialDistribution::Point { x0: vec![0.0] };
        let traj = run_chain_seeded(&p, &cfg, &init).unwrap();
        let phi = hamiltonian_track(&traj, &p, 1.0).unwrap();
        assert_eq!(phi[0], 0.0);
        assert!(phi[1] > 0.0);
    }
}
