//! Step sizes, iteration counts and certified divergence bounds.
//!
//! All quantities refer to the canonical potential (strong convexity 1,
//! minimizer at the origin). [`plan_sampling`] combines a mixing leg and a
//! discretization leg into a [`SamplingPlan`]; [`check_plan`] re-derives
//! every number in a plan independently of the code that produced it.

mod checker;
mod conditional;
mod mixing;
mod plan;
mod radius;

use serde::{Deserialize, Serialize};

use crate::dynamics::Process;
use crate::error::{invalid, Result};

pub use checker::{check_plan, recertify, CheckReport};
pub use conditional::{
    c1_boundary_eta, candidate_orders, conditional_divergence_bound, evaluate_unconditioned, moment_to_expectation_bound,
    unconditioned_at_order, unconditioned_divergence, unconditioning_constants, Branch, DiscretizationBoundInputs,
    MomentBound, UnconditionedBound, MIN_PIPELINE_ORDER, ORDER_LIFT, ORDER_LIFT_STEPS,
};
pub use mixing::{mixing_bounds_at, mixing_time, MixingTime};
pub use plan::{
    choose_eta, choose_eta_for, eta_cap, largest_certified_eta, plan_sampling, steps_for, Certificate, EtaChoice,
    EtaProblem, MixingStatus, PlanRequest, SamplingPlan, DEFAULT_C, ETA_FLOOR, ETA_RTOL, MIN_PLAN_ORDER,
};
pub use radius::{
    radius_bound_lip, radius_bound_sc, starting_bound_gaussian, starting_bound_underdamped, vmax_underdamped,
};

/// The dynamics and curvature regime a bound is derived for.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProcessKind {
    /// Overdamped chain on a strongly convex, smooth potential.
    OverdampedSc,
    /// Overdamped chain on a `b`-Lipschitz, smooth potential.
    OverdampedLip { b: f64 },
    Underdamped { gamma: f64, mu: f64 },
}

impl ProcessKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ProcessKind::OverdampedSc => Ok(()),
            ProcessKind::OverdampedLip { b } if b >= 0.0 && b.is_finite() => Ok(()),
            ProcessKind::OverdampedLip { b } => Err(invalid(format!("Lipschitz constant must be >= 0, got {b}"))),
            ProcessKind::Underdamped { gamma, mu } => {
                if !(gamma >= 2.0 && gamma.is_finite()) {
                    return Err(invalid(format!("underdamped bounds need gamma >= 2, got {gamma}")));
                }
                if !(mu > 0.0 && mu.is_finite()) {
                    return Err(invalid(format!("mu must be positive, got {mu}")));
                }
                Ok(())
            }
        }
    }

    pub fn to_process(self) -> Process {
        match self {
            ProcessKind::Underdamped { gamma, mu } => Process::Underdamped { gamma, mu },
            _ => Process::Overdamped,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Bounds `D(sampler || target)` only.
    OneSided,
    /// Bounds both directions, as differential privacy requires.
    Bidirectional,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreconditionStatus {
    /// Verified numerically by the planner.
    Checked,
    /// Taken from the caller's declaration of the potential.
    Assumed,
    /// Not established; the corresponding leg carries no certificate.
    Uncertified,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreconditionCheck {
    pub name: String,
    pub status: PreconditionStatus,
    pub detail: String,
}

impl PreconditionCheck {
    pub(crate) fn new(name: &str, status: PreconditionStatus, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            status,
            detail: detail.into(),
        }
    }
}
