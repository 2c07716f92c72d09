use serde::{Deserialize, Serialize};

use super::ProcessKind;
use crate::error::{invalid, Error, Result};
use crate::renyi::{Direction, DivergenceBound};

/// Inputs of the bounded-movement divergence bound for one process.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscretizationBoundInputs {
    pub process: ProcessKind,
    pub alpha_prime: f64,
    pub steps: u64,
    pub eta: f64,
    pub smoothness: f64,
    pub dim: usize,
    pub tau: f64,
    pub c: f64,
    pub delta1: f64,
    pub delta2: f64,
}

impl DiscretizationBoundInputs {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.alpha_prime - 1.0, self.eta, self.smoothness, self.tau, self.c];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(invalid("alpha' > 1 and eta, L, tau, c > 0 are required"));
        }
        if self.dim == 0 || self.steps == 0 {
            return Err(invalid("dimension and step count must be positive"));
        }
        let tau = self.steps as f64 * self.eta;
        if (tau - self.tau).abs() > 1e-12 * self.tau {
            return Err(invalid(format!("tau = {} but T eta = {tau}", self.tau)));
        }
        for d in [self.delta1, self.delta2] {
            if !(d > 0.0 && d < 0.5) {
                return Err(invalid(format!("conditioning probabilities must lie in (0, 1/2), got {d}")));
            }
        }
        Ok(())
    }

    /// Radius with both conditioning events folded in, as substituted in the
    /// unconditioning argument.
    pub fn combined_radius(&self) -> f64 {
        let t = self.steps as f64;
        let d = self.dim as f64;
        let (l1, l2) = ((t / self.delta1).ln(), (t / self.delta2).ln());
        match self.process {
            ProcessKind::OverdampedSc => {
                self.c * self.smoothness * (d.sqrt() + l1.sqrt() + l2.sqrt()) * self.eta.sqrt()
            }
            ProcessKind::OverdampedLip { b } => self.c * (b + d.sqrt() + l1.sqrt() + l2.sqrt()) * self.eta.sqrt(),
            ProcessKind::Underdamped { gamma, mu } => {
                let (u1, u2) = ((1.0 / self.delta1).ln(), (1.0 / self.delta2).ln());
                self.c * (gamma * mu).sqrt() * ((self.tau * d).sqrt() + u1.sqrt() + u2.sqrt()) * self.eta
            }
        }
    }
}

/// `T alpha' L^2 r^2 eta / 4`, times `mu/gamma` for the underdamped process.
pub fn conditional_divergence_bound(inputs: &DiscretizationBoundInputs, r: f64) -> Result<DivergenceBound> {
    if !(r >= 0.0 && r.is_finite()) {
        return Err(invalid(format!("radius must be non-negative, got {r}")));
    }
    let base = inputs.steps as f64 * inputs.alpha_prime * inputs.smoothness.powi(2) * r * r * inputs.eta / 4.0;
    let value = match inputs.process {
        ProcessKind::Underdamped { gamma, mu } => base * mu / gamma,
        _ => base,
    };
    DivergenceBound::new(inputs.alpha_prime, value, Direction::Both)
}

/// Tight and loose forms of the conditional-moment bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentBound {
    pub tight: f64,
    pub loose: f64,
}

fn moment_tight(beta: f64, gamma: f64, theta: f64) -> f64 {
    let s = if gamma == 0.0 {
        1.0
    } else {
        gamma.powf(1.0 / (1.0 + gamma)) + gamma.powf(-gamma / (1.0 + gamma))
    };
    beta.powf(1.0 / theta) * s.powf((1.0 + gamma) / theta) * theta / (theta - 1.0 - gamma)
}

/// `E[Y]` bound for `Y >= 0` whose conditional `theta`-th moments on
/// probability `1 - delta` events are at most `beta / delta^gamma`.
///
/// With `S = gamma^(1/(1+gamma)) + gamma^(-gamma/(1+gamma))`, the optimized
/// split point `z = beta^(1/theta) S^((1+gamma)/theta)` gives
/// `E[Y] <= z theta / (theta - 1 - gamma)`. Since `S <= 2`, the loose form is
/// `beta^(1/theta) 2^(2/theta) theta / (theta - 1 - gamma)`.
pub fn moment_to_expectation_bound(beta: f64, gamma: f64, theta: f64) -> Result<MomentBound> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(invalid(format!("gamma must lie in (0, 1), got {gamma}")));
    }
    if !(theta > 1.0 + gamma && theta.is_finite()) {
        return Err(invalid(format!("theta must exceed 1 + gamma, got {theta}")));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(invalid(format!("beta must be positive, got {beta}")));
    }
    Ok(MomentBound {
        tight: moment_tight(beta, gamma, theta),
        loose: beta.powf(1.0 / theta) * 2f64.powf(2.0 / theta) * theta / (theta - 1.0 - gamma),
    })
}

/// `(c1, c2, c3)` for one process at order `alpha'`.
pub fn unconditioning_constants(
    process: ProcessKind,
    alpha_prime: f64,
    tau: f64,
    eta: f64,
    smoothness: f64,
    dim: usize,
    c: f64,
) -> (f64, f64, f64) {
    let a = alpha_prime * (alpha_prime - 1.0);
    let d = dim as f64;
    let l = smoothness;
    let log_t = (tau / eta).ln().max(0.0);
    match process {
        ProcessKind::OverdampedSc => {
            let c2 = 3.0 * tau * a * l.powi(4) * c * c * eta / 4.0;
            ((c2 * (d + 2.0 * log_t)).exp(), c2, c2)
        }
        ProcessKind::OverdampedLip { b } => {
            let c2 = tau * a * l * l * c * c * eta;
            ((c2 * (b * b + d + 2.0 * log_t)).exp(), c2, c2)
        }
        ProcessKind::Underdamped { mu, .. } => {
            let c2 = 3.0 * mu * mu * tau * a * l * l * c * c * eta * eta / 4.0;
            ((c2 * tau * d).exp(), c2, c2)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// `kappa = 3 ln(alpha) ln(1/eps) / ((alpha - 1) eps)`, `alpha' = 4 alpha kappa - 2`.
    Jensen,
    /// `eps >= 3 ln(alpha)/(alpha - 1)` or the Jensen `kappa <= 1`:
    /// `kappa = 1`, `alpha' = 4 alpha - 2`.
    LargeEps,
}

/// One evaluation of the unconditioning pipeline.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnconditionedBound {
    pub alpha: f64,
    /// Order actually bounded; the value is valid at `alpha` by monotonicity.
    pub alpha_eff: f64,
    pub branch: Branch,
    pub kappa: f64,
    pub alpha_prime: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub feasible: bool,
    /// `E_Q[(P/Q)^(alpha' / 4 + 1/2)]` bound; zero when infeasible.
    pub moment: f64,
    /// `ln(moment) / ((alpha_eff - 1) kappa)`; infinite when infeasible.
    pub value: f64,
    pub eps: f64,
    pub certified: bool,
}

impl UnconditionedBound {
    pub fn bound(&self) -> Result<DivergenceBound> {
        if !self.feasible {
            return Err(Error::Infeasible {
                violated: self.violated(),
                max_feasible_eta: None,
            });
        }
        DivergenceBound::new(self.alpha, self.value, Direction::Both)
    }

    pub fn violated(&self) -> String {
        if self.c1 >= 2.0 {
            format!("c1(alpha') = {} >= 2 at alpha' = {}", self.c1, self.alpha_prime)
        } else if self.c2 >= 1.0 || self.c3 >= 1.0 {
            format!("c2(alpha') = {} >= 1 at alpha' = {}", self.c2, self.alpha_prime)
        } else {
            format!("unconditioned bound {} exceeds eps = {}", self.value, self.eps)
        }
    }
}

/// Smallest order the pipeline is run at.
pub const MIN_PIPELINE_ORDER: f64 = 4.0;
/// Ratio between consecutive candidate orders.
pub const ORDER_LIFT: f64 = 1.25;
/// Number of candidate orders tried.
pub const ORDER_LIFT_STEPS: usize = 48;

/// Candidate effective orders `4 * 1.25^j` that are `>= alpha`.
pub fn candidate_orders(alpha: f64) -> impl Iterator<Item = f64> {
    let j0 = if alpha <= MIN_PIPELINE_ORDER {
        0
    } else {
        ((alpha / MIN_PIPELINE_ORDER).ln() / ORDER_LIFT.ln() - 1e-9).ceil() as i32
    };
    (j0..j0 + ORDER_LIFT_STEPS as i32).map(|j| MIN_PIPELINE_ORDER * ORDER_LIFT.powi(j))
}

/// The pipeline at a fixed effective order.
#[allow(clippy::too_many_arguments)]
pub fn unconditioned_at_order(
    process: ProcessKind,
    alpha: f64,
    alpha_eff: f64,
    eps: f64,
    tau: f64,
    eta: f64,
    smoothness: f64,
    dim: usize,
    c: f64,
) -> UnconditionedBound {
    let ln_a = alpha_eff.ln();
    let threshold = 3.0 * ln_a / (alpha_eff - 1.0);
    let kappa = 3.0 * ln_a * (1.0 / eps).ln() / ((alpha_eff - 1.0) * eps);
    // Below the threshold kappa can still fall under 1 once eps > 1/e.
    let (branch, kappa, alpha_prime) = if eps >= threshold || kappa <= 1.0 {
        (Branch::LargeEps, 1.0, 4.0 * alpha_eff - 2.0)
    } else {
        (Branch::Jensen, kappa, 4.0 * alpha_eff * kappa - 2.0)
    };
    let (c1, c2, c3) = unconditioning_constants(process, alpha_prime, tau, eta, smoothness, dim, c);
    let feasible = c1 < 2.0 && c2 < 1.0 && c3 < 1.0;
    let (moment, value) = if feasible {
        let k1 = moment_tight(2.0 * c1, c3, 2.0);
        let k2 = moment_tight(4.0 * k1 / alpha_prime, c2 / 2.0, 2.0);
        let m = (alpha_prime / 4.0 + 0.5) * k2;
        (m, (m.ln() / ((alpha_eff - 1.0) * kappa)).max(0.0))
    } else {
        (0.0, f64::INFINITY)
    };
    UnconditionedBound {
        alpha,
        alpha_eff,
        branch,
        kappa,
        alpha_prime,
        c1,
        c2,
        c3,
        feasible,
        moment,
        value,
        eps,
        certified: feasible && value <= eps,
    }
}

/// Runs the pipeline at every [`candidate_orders`] point and keeps the
/// smallest feasible value, or the lowest-order evaluation if none is feasible.
/// Taking the minimum keeps the result monotone in `eta`, `d`, `L`, `tau`
/// and `alpha`.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_unconditioned(
    process: ProcessKind,
    alpha: f64,
    eps: f64,
    tau: f64,
    eta: f64,
    smoothness: f64,
    dim: usize,
    c: f64,
) -> UnconditionedBound {
    let mut best: Option<UnconditionedBound> = None;
    let mut first = None;
    for a in candidate_orders(alpha) {
        let u = unconditioned_at_order(process, alpha, a, eps, tau, eta, smoothness, dim, c);
        first.get_or_insert(u);
        if u.feasible && best.is_none_or(|b| u.value < b.value) {
            best = Some(u);
        }
    }
    best.or(first).expect("at least one candidate order")
}

pub(crate) fn check_pipeline_inputs(alpha: f64, eps: f64, tau: f64, smoothness: f64, dim: usize, c: f64) -> Result<()> {
    if !(alpha > 1.0 && alpha.is_finite()) {
        return Err(invalid(format!("alpha must exceed 1, got {alpha}")));
    }
    for (name, v) in [("eps", eps), ("tau", tau), ("L", smoothness), ("c", c)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(invalid(format!("{name} must be positive, got {v}")));
        }
    }
    if dim == 0 {
        return Err(invalid("dimension must be positive"));
    }
    Ok(())
}

/// Certified discretization bound at order `alpha`, or the violated
/// inequality together with the largest certifiable step size.
#[allow(clippy::too_many_arguments)]
pub fn unconditioned_divergence(
    process: ProcessKind,
    alpha: f64,
    eps: f64,
    tau: f64,
    eta: f64,
    smoothness: f64,
    dim: usize,
    c: f64,
) -> Result<UnconditionedBound> {
    check_pipeline_inputs(alpha, eps, tau, smoothness, dim, c)?;
    let u = evaluate_unconditioned(process, alpha, eps, tau, eta, smoothness, dim, c);
    if u.certified {
        return Ok(u);
    }
    let max_eta = super::plan::largest_certified_eta(process, alpha, eps, tau, smoothness, dim, c).ok();
    Err(Error::Infeasible {
        violated: u.violated(),
        max_feasible_eta: max_eta,
    })
}

/// The `eta` at which `c1(alpha') = 2`, by bisection to `rtol`.
pub fn c1_boundary_eta(
    process: ProcessKind,
    alpha_prime: f64,
    tau: f64,
    smoothness: f64,
    dim: usize,
    c: f64,
    rtol: f64,
) -> Result<f64> {
    let c1 = |eta: f64| unconditioning_constants(process, alpha_prime, tau, eta, smoothness, dim, c).0;
    let (mut lo, mut hi) = (1e-300f64, tau);
    if c1(hi) < 2.0 {
        return Err(invalid("c1 stays below 2 for every eta <= tau"));
    }
    while (hi - lo) > rtol * hi {
        let mid = if hi / lo > 4.0 { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
        if c1(mid) < 2.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}
