use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{
    ar1_moment_check, brownian_tail_check, calibrate_c, moment_lemma_mc, path_stats, reflection_check,
    stationary_discretization_divergence, MomentFamily, PathExperiment, PathStats, SummaryRow, ViolationReport,
};
use crate::dynamics::{InitialDistribution, Process};
use crate::error::{invalid, Result};
use crate::planner::{
    conditional_divergence_bound, radius_bound_lip, radius_bound_sc, vmax_underdamped, DiscretizationBoundInputs,
    ProcessKind, DEFAULT_C,
};
use crate::potentials::{GaussianPotential, HuberLipschitz, Potential};

/// Names accepted by [`run_suite`].
pub const SUITES: [&str; 8] = [
    "radius_sc",
    "radius_lip",
    "radius_ud",
    "ar1",
    "divergence_growth",
    "moment_lemma",
    "brownian_tails",
    "calibrate_c",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteOptions {
    pub seed: u64,
    /// Overrides the per-suite default trial count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(default = "default_sub_resolution")]
    pub sub_resolution: usize,
    #[serde(default = "default_deltas")]
    pub deltas: Vec<f64>,
    #[serde(default = "default_c")]
    pub c: f64,
}

fn default_sub_resolution() -> usize {
    64
}

fn default_deltas() -> Vec<f64> {
    vec![0.1, 0.05, 0.01]
}

fn default_c() -> f64 {
    DEFAULT_C
}

impl SuiteOptions {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            trials: None,
            sub_resolution: default_sub_resolution(),
            deltas: default_deltas(),
            c: DEFAULT_C,
        }
    }

    fn trials_or(&self, default: usize) -> usize {
        self.trials.unwrap_or(default)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub pass: bool,
    pub rows: Vec<SummaryRow>,
    pub details: Value,
}

impl SuiteReport {
    fn new(suite: &str, rows: Vec<SummaryRow>, details: Value) -> Self {
        Self {
            suite: suite.into(),
            pass: rows.iter().all(|r| r.pass),
            rows,
            details,
        }
    }
}

pub fn run_suite(name: &str, opts: &SuiteOptions) -> Result<SuiteReport> {
    match name {
        "radius_sc" | "radius_lip" | "radius_ud" => radius_suite(name, opts),
        "ar1" => ar1_suite(opts),
        "divergence_growth" => divergence_growth_suite(),
        "moment_lemma" => moment_suite(opts),
        "brownian_tails" => brownian_suite(opts),
        "calibrate_c" => calibrate_suite(opts),
        other => Err(invalid(format!("unknown suite `{other}`; known suites: {}", SUITES.join(", ")))),
    }
}

pub const RADIUS_TRIALS: usize = 10_000;
pub const RADIUS_ETA: f64 = 0.01;
pub const RADIUS_STEPS: usize = 100;
const DIM: usize = 2;

/// One of the three radius settings: potential, process and `r(c = 1, delta)`.
struct RadiusCase {
    potential: Box<dyn Potential>,
    process: Process,
    initial: InitialDistribution,
}

impl RadiusCase {
    fn new(name: &str) -> Result<Self> {
        Ok(match name {
            "radius_sc" => RadiusCase {
                potential: Box::new(GaussianPotential::diagonal(&[1.0, 4.0])?),
                process: Process::Overdamped,
                initial: InitialDistribution::GaussianScaled,
            },
            "radius_lip" => RadiusCase {
                potential: Box::new(HuberLipschitz::new(DIM, 1.0, 1.0)?),
                process: Process::Overdamped,
                initial: InitialDistribution::StandardGaussian,
            },
            "radius_ud" => RadiusCase {
                potential: Box::new(GaussianPotential::isotropic(DIM, 1.0)?),
                process: Process::Underdamped { gamma: 2.0, mu: 1.0 },
                initial: InitialDistribution::GaussianWithVelocity {
                    position_var: 1.0,
                    velocity_var: 1.0,
                },
            },
            other => return Err(invalid(format!("not a radius suite: {other}"))),
        })
    }

    fn unit_radius(&self, delta: f64) -> f64 {
        let t = RADIUS_STEPS as u64;
        let r = match self.process {
            Process::Underdamped { gamma, mu } => {
                vmax_underdamped(1.0, gamma, mu, t as f64 * RADIUS_ETA, DIM, delta).map(|v| v * RADIUS_ETA)
            }
            Process::Overdamped => match self.potential.curvature().lipschitz {
                Some(b) => radius_bound_lip(1.0, b, DIM, t, delta, RADIUS_ETA),
                None => radius_bound_sc(1.0, self.potential.curvature().smoothness, DIM, t, delta, RADIUS_ETA),
            },
        };
        r.expect("radius settings are valid")
    }

    fn stats(&self, opts: &SuiteOptions) -> Result<Vec<PathStats>> {
        path_stats(&PathExperiment {
            potential: self.potential.as_ref(),
            process: self.process,
            eta: RADIUS_ETA,
            steps: RADIUS_STEPS,
            initial: self.initial.clone(),
            sub_resolution: opts.sub_resolution,
            trials: opts.trials_or(RADIUS_TRIALS),
            seed: opts.seed,
        })
    }
}

fn radius_suite(name: &str, opts: &SuiteOptions) -> Result<SuiteReport> {
    let case = RadiusCase::new(name)?;
    let stats = case.stats(opts)?;
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for &delta in &opts.deltas {
        let r = opts.c * case.unit_radius(delta);
        let violations = stats.iter().filter(|s| s.max_displacement > r).count();
        let rep = ViolationReport::new(stats.len(), violations, delta).sub_sampled(opts.sub_resolution);
        rows.push(SummaryRow::new(name, format!("delta={delta}"), rep.rate, rep.threshold, rep.pass));
        reports.push(json!({ "radius": r, "report": rep }));
    }
    let details = json!({
        "eta": RADIUS_ETA,
        "steps": RADIUS_STEPS,
        "dim": DIM,
        "c": opts.c,
        "potential": format!("{:?}", case.potential),
        "cells": reports,
    });
    Ok(SuiteReport::new(name, rows, details))
}

fn calibrate_suite(opts: &SuiteOptions) -> Result<SuiteReport> {
    let mut rows = Vec::new();
    let mut cells = serde_json::Map::new();
    for name in ["radius_sc", "radius_lip", "radius_ud"] {
        let case = RadiusCase::new(name)?;
        let stats = case.stats(opts)?;
        let found = calibrate_c(&stats, |d| case.unit_radius(d), &opts.deltas, opts.c);
        for cell in &found {
            rows.push(SummaryRow::new(
                "calibrate_c",
                format!("{name} delta={}", cell.delta),
                cell.c_min,
                cell.default_c,
                cell.default_passes,
            ));
        }
        cells.insert(name.into(), serde_json::to_value(found)?);
    }
    Ok(SuiteReport::new("calibrate_c", rows, Value::Object(cells)))
}

pub const AR1_CHAINS: usize = 100_000;
pub const AR1_ETA: f64 = 0.1;
pub const AR1_CHECKPOINTS: [usize; 4] = [1, 10, 100, 10_000];

fn ar1_suite(opts: &SuiteOptions) -> Result<SuiteReport> {
    let checks = ar1_moment_check(AR1_ETA, 1.0, &AR1_CHECKPOINTS, opts.trials_or(AR1_CHAINS), opts.seed)?;
    let mut rows = Vec::new();
    for c in &checks {
        let z_mean = (c.mean - c.exact_mean).abs() / c.mean_se;
        let z_var = (c.variance - c.exact_variance).abs() / c.variance_se;
        rows.push(SummaryRow::new("ar1", format!("T={} mean", c.steps), z_mean, 3.0, z_mean <= 3.0));
        rows.push(SummaryRow::new("ar1", format!("T={} variance", c.steps), z_var, 3.0, z_var <= 3.0));
    }
    Ok(SuiteReport::new("ar1", rows, serde_json::to_value(checks)?))
}

pub const GROWTH_ETAS: [f64; 3] = [0.2, 0.05, 0.01];
pub const GROWTH_REFINEMENTS: [u64; 2] = [4, 64];
pub const GROWTH_DELTA: f64 = 1e-3;

/// Bound on `D_2` between chains at `eta` and `eta/k` over `T = ceil(10/eta)` steps on `x^2/2`.
pub fn growth_bound(eta: f64, c: f64) -> Result<f64> {
    let steps = (10.0 / eta).ceil() as u64;
    let inputs = DiscretizationBoundInputs {
        process: ProcessKind::OverdampedSc,
        alpha_prime: 2.0,
        steps,
        eta,
        smoothness: 1.0,
        dim: 1,
        tau: steps as f64 * eta,
        c,
        delta1: GROWTH_DELTA,
        delta2: GROWTH_DELTA,
    };
    let r = radius_bound_sc(c, 1.0, 1, steps, GROWTH_DELTA, eta)?;
    Ok(conditional_divergence_bound(&inputs, r)?.value)
}

fn divergence_growth_suite() -> Result<SuiteReport> {
    let mut rows = Vec::new();
    let mut cells = Vec::new();
    for &k in &GROWTH_REFINEMENTS {
        let mut last = f64::INFINITY;
        for &eta in &GROWTH_ETAS {
            let exact = stationary_discretization_divergence(2.0, eta, k)?.value;
            let bound = growth_bound(eta, DEFAULT_C)?;
            rows.push(SummaryRow::new(
                "divergence_growth",
                format!("eta={eta} k={k}"),
                exact,
                bound,
                exact <= bound,
            ));
            rows.push(SummaryRow::new(
                "divergence_growth",
                format!("eta={eta} k={k} monotone"),
                exact,
                last,
                exact < last,
            ));
            cells.push(json!({ "eta": eta, "k": k, "exact": exact, "bound": bound }));
            last = exact;
        }
    }
    Ok(SuiteReport::new("divergence_growth", rows, Value::Array(cells)))
}

pub const MOMENT_DRAWS: usize = 100_000;

/// 20 `(beta, gamma, theta)` points with `theta > 1 + gamma`.
pub fn moment_grid() -> Vec<(f64, f64, f64)> {
    let mut grid = Vec::new();
    for &beta in &[0.5, 2.0] {
        for &gamma in &[0.1, 0.5] {
            for &theta in &[1.75, 2.0, 3.0, 4.0, 8.0] {
                grid.push((beta, gamma, theta));
            }
        }
    }
    grid
}

/// The loose form as printed, with `theta - 1` in the denominator.
pub fn printed_loose_moment_bound(beta: f64, theta: f64) -> f64 {
    beta.powf(1.0 / theta) * 2f64.powf(2.0 / theta) * theta / (theta - 1.0)
}

fn moment_suite(opts: &SuiteOptions) -> Result<SuiteReport> {
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for (i, (beta, gamma, theta)) in moment_grid().into_iter().enumerate() {
        let rep = moment_lemma_mc(
            beta,
            gamma,
            theta,
            MomentFamily::Pareto,
            opts.trials_or(MOMENT_DRAWS),
            opts.seed.wrapping_add(i as u64),
        )?;
        let cell = format!("beta={beta} gamma={gamma} theta={theta}");
        rows.push(SummaryRow::new("moment_lemma", format!("{cell} mc"), rep.mc_mean, rep.bound, rep.pass));
        let printed = printed_loose_moment_bound(beta, theta);
        rows.push(SummaryRow::new(
            "moment_lemma",
            format!("{cell} tight<=printed_loose"),
            rep.bound,
            printed,
            rep.bound <= printed,
        ));
        reports.push(json!({ "report": rep, "printed_loose": printed }));
    }
    Ok(SuiteReport::new("moment_lemma", rows, Value::Array(reports)))
}

pub const BROWNIAN_PATHS: usize = 100_000;
pub const BROWNIAN_RESOLUTION: usize = 1024;

fn brownian_suite(opts: &SuiteOptions) -> Result<SuiteReport> {
    let trials = opts.trials_or(BROWNIAN_PATHS);
    let mut rows = Vec::new();
    let mut tails = Vec::new();
    for (j, &d) in [1usize, 5].iter().enumerate() {
        let reps = brownian_tail_check(d, 1.0, trials, BROWNIAN_RESOLUTION, &[1.0, 2.0, 3.0], opts.seed.wrapping_add(j as u64))?;
        for r in &reps {
            rows.push(SummaryRow::new(
                "brownian_tails",
                format!("d={d} x={}", r.x),
                r.rate,
                r.bound + 3.0 * r.standard_error,
                r.pass,
            ));
        }
        tails.extend(reps);
    }
    let refl = reflection_check(1.0, 1.0, trials, BROWNIAN_RESOLUTION, opts.seed.wrapping_add(7))?;
    rows.push(SummaryRow::new(
        "brownian_tails",
        "reflection level=1",
        refl.rate,
        refl.exact,
        refl.pass,
    ));
    Ok(SuiteReport::new("brownian_tails", rows, json!({ "tails": tails, "reflection": refl })))
}
