//! Monte Carlo and exact-law checks of the tail and divergence bounds.
//!
//! Statistical checks are one-sided: a rate passes when it is at most
//! `delta + 3 SE`, with `SE = sqrt(delta (1 - delta) / trials)` the binomial
//! standard error at the declared level. Every experiment draws trial `i`
//! from its own ChaCha8 stream, so reports do not depend on thread count.

mod ar1;
mod brownian;
mod calculus;
mod moments;
mod paths;
mod suites;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub use ar1::{
    ar1_law, ar1_moment_check, ar1_oracle, empirical_discretization_divergence, stationary_discretization_divergence,
    Ar1Law, MomentCheck,
};
pub use brownian::{bridge_path, brownian_tail_check, reflection_check, ReflectionReport, TailReport};
pub use calculus::{contraction_factor, finite_difference_error, flow_contraction_factor};
pub use moments::{moment_lemma_mc, MomentFamily, MomentReport};
pub use suites::{
    growth_bound, moment_grid, printed_loose_moment_bound, run_suite, SuiteOptions, SuiteReport, AR1_CHAINS,
    AR1_CHECKPOINTS, AR1_ETA, BROWNIAN_PATHS, BROWNIAN_RESOLUTION, GROWTH_DELTA, GROWTH_ETAS, GROWTH_REFINEMENTS,
    MOMENT_DRAWS, RADIUS_ETA, RADIUS_STEPS, RADIUS_TRIALS, SUITES,
};
pub use paths::{
    calibrate_c, estimate_radius_violation, hamiltonian_track, path_stats, CalibrationCell, PathExperiment, PathStats,
};

/// Number of standard errors a one-sided statistical check may exceed its level by.
pub const SE_MULTIPLIER: f64 = 3.0;

/// `sqrt(p (1 - p) / n)`.
pub fn binomial_se(p: f64, trials: usize) -> f64 {
    if trials == 0 {
        return f64::INFINITY;
    }
    (p * (1.0 - p) / trials as f64).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub trials: usize,
    pub violations: usize,
    pub declared_delta: f64,
    pub rate: f64,
    pub standard_error: f64,
    /// `declared_delta + 3 * standard_error`.
    pub threshold: f64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sub_resolution: Option<usize>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
}

impl ViolationReport {
    pub fn new(trials: usize, violations: usize, declared_delta: f64) -> Self {
        assert!(violations <= trials, "more violations than trials");
        let se = binomial_se(declared_delta.min(1.0), trials);
        let threshold = declared_delta + SE_MULTIPLIER * se;
        let rate = if trials == 0 {
            0.0
        } else {
            violations as f64 / trials as f64
        };
        Self {
            trials,
            violations,
            declared_delta,
            rate,
            standard_error: se,
            threshold,
            pass: rate <= threshold,
            sub_resolution: None,
            note: String::new(),
        }
    }

    pub(crate) fn sub_sampled(mut self, k: usize) -> Self {
        self.sub_resolution = Some(k);
        self.note = format!(
            "within-step suprema sampled at {k} points per step; the sampled maximum can only undershoot"
        );
        self
    }
}

/// One row of the plot-ready pass/fail table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub suite: String,
    pub cell: String,
    pub statistic: f64,
    pub bound: f64,
    pub pass: bool,
}

impl SummaryRow {
    pub fn new(suite: &str, cell: impl Into<String>, statistic: f64, bound: f64, pass: bool) -> Self {
        Self {
            suite: suite.into(),
            cell: cell.into(),
            statistic,
            bound,
            pass,
        }
    }
}

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["suite", "cell", "statistic", "bound", "pass"])?;
    for r in rows {
        w.serialize((&r.suite, &r.cell, r.statistic, r.bound, r.pass))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_rule() {
        let r = ViolationReport::new(10_000, 120, 0.01);
        assert!((r.standard_error - (0.01f64 * 0.99 / 1e4).sqrt()).abs() < 1e-15);
        assert!(r.pass);
        assert!(!ViolationReport::new(10_000, 140, 0.01).pass);
    }

    #[test]
    fn summary_csv_has_header() {
        let rows = vec![SummaryRow::new("ar1", "T=1", 0.1, 0.2, true)];
        let mut buf = Vec::new();
        write_summary_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "suite,cell,statistic,bound,pass");
        assert_eq!(text.lines().nth(1).unwrap(), "ar1,T=1,0.1,0.2,true");
    }
}
