use serde::{Deserialize, Serialize};

use super::conditional::{check_pipeline_inputs, evaluate_unconditioned, UnconditionedBound};
use super::mixing::{mixing_time, MixingTime};
use super::radius::{starting_bound_gaussian, starting_bound_underdamped};
use super::{Mode, PreconditionCheck, PreconditionStatus, ProcessKind};
use crate::dynamics::{DynamicsConfig, InitialDistribution};
use crate::error::{invalid, Error, Result};
use crate::renyi::{weak_triangle, Direction, DivergenceBound};

/// Radius-lemma constant used when the caller does not override it.
pub const DEFAULT_C: f64 = 2.0;
/// Smallest step size the bisection will consider.
pub const ETA_FLOOR: f64 = 1e-12;
/// Relative resolution of the step-size bisection.
pub const ETA_RTOL: f64 = 1e-4;
/// Orders below this are planned at this order and reused by monotonicity.
pub const MIN_PLAN_ORDER: f64 = 1.5;

/// Largest step size the radius lemmas allow for a process.
pub fn eta_cap(process: ProcessKind, smoothness: f64) -> f64 {
    match process {
        ProcessKind::OverdampedSc => 2.0 / (smoothness + 1.0),
        ProcessKind::OverdampedLip { .. } => 1.0,
        ProcessKind::Underdamped { gamma, mu } => (gamma / (mu * smoothness)).min((1.0 - 1e-9) / gamma),
    }
}

/// `ceil(tau/eta)`, snapping ratios within `1e-9` of an integer to it.
pub fn steps_for(tau: f64, eta: f64) -> u64 {
    let r = tau / eta;
    let n = r.round();
    if (r - n).abs() <= 1e-9 * r.max(1.0) {
        n as u64
    } else {
        r.ceil() as u64
    }
}

/// One discretization-leg search: order `alpha`, budget `eps`, horizon `tau`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EtaProblem {
    pub process: ProcessKind,
    pub alpha: f64,
    pub eps: f64,
    pub tau: f64,
    pub smoothness: f64,
    pub dim: usize,
    pub c: f64,
    /// Variance of an isotropic Gaussian initial law, checked against the
    /// strongly convex starting condition. `None` skips that check.
    pub initial_variance: Option<f64>,
}

impl EtaProblem {
    fn validate(&self) -> Result<()> {
        check_pipeline_inputs(self.alpha, self.eps, self.tau, self.smoothness, self.dim, self.c)?;
        self.process.validate()?;
        if self.process == ProcessKind::OverdampedSc && self.smoothness < 1.0 {
            return Err(invalid(format!(
                "canonical smoothness must be >= 1, got {}",
                self.smoothness
            )));
        }
        Ok(())
    }

    /// The pipeline evaluation at `eta`, or the first violated requirement.
    fn certify(&self, eta: f64) -> std::result::Result<UnconditionedBound, String> {
        let cap = eta_cap(self.process, self.smoothness);
        if eta > cap {
            return Err(format!("eta = {eta} exceeds the regime cap {cap}"));
        }
        if eta > self.tau {
            return Err(format!("eta = {eta} exceeds tau = {}", self.tau));
        }
        let steps = steps_for(self.tau, eta);
        match self.process {
            ProcessKind::OverdampedSc => {
                if let Some(var) = self.initial_variance {
                    if !starting_bound_gaussian(self.c, eta, var, self.dim, steps) {
                        return Err(format!(
                            "N(0, {var} I) initial law fails the starting condition at eta = {eta}"
                        ));
                    }
                }
            }
            ProcessKind::Underdamped { gamma, .. } => {
                if !starting_bound_underdamped(self.c, gamma, self.tau, self.dim) {
                    return Err(format!(
                        "initial law fails the underdamped starting condition at tau = {}",
                        self.tau
                    ));
                }
            }
            ProcessKind::OverdampedLip { .. } => {}
        }
        let u = evaluate_unconditioned(
            self.process,
            self.alpha,
            self.eps,
            self.tau,
            eta,
            self.smoothness,
            self.dim,
            self.c,
        );
        if u.certified {
            Ok(u)
        } else {
            Err(u.violated())
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EtaChoice {
    /// `tau / steps`.
    pub eta: f64,
    pub steps: u64,
    /// Largest certified step size found by bisection, before rounding `T` up.
    pub bisected_eta: f64,
    pub unconditioned: UnconditionedBound,
}

fn bisect(problem: &EtaProblem) -> Result<f64> {
    let cap = eta_cap(problem.process, problem.smoothness).min(problem.tau);
    if problem.certify(cap).is_ok() {
        return Ok(cap);
    }
    if let Err(why) = problem.certify(ETA_FLOOR) {
        return Err(Error::Infeasible {
            violated: format!("no step size above {ETA_FLOOR} certifies: {why}"),
            max_feasible_eta: None,
        });
    }
    let (mut lo, mut hi) = (ETA_FLOOR, cap);
    while hi > lo * (1.0 + ETA_RTOL) {
        let mid = (lo * hi).sqrt();
        if problem.certify(mid).is_ok() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Largest step size (to [`ETA_RTOL`]) whose discretization bound certifies
/// `problem.eps`, then `T = ceil(tau/eta)` and `eta = tau/T`.
pub fn choose_eta_for(problem: &EtaProblem) -> Result<EtaChoice> {
    problem.validate()?;
    let best = bisect(problem)?;
    let first = steps_for(problem.tau, best).max(1);
    for steps in first..first + 1000 {
        let eta = problem.tau / steps as f64;
        if let Ok(u) = problem.certify(eta) {
            return Ok(EtaChoice {
                eta,
                steps,
                bisected_eta: best,
                unconditioned: u,
            });
        }
    }
    Err(Error::Infeasible {
        violated: format!("rounding T up from the bisected eta = {best} never re-certified"),
        max_feasible_eta: Some(best),
    })
}

/// [`choose_eta_for`] with the default initial laws: `N(0, I/L)` for the
/// strongly convex process, none needed for the Lipschitz one, and
/// `x ~ N(0, I/L), v ~ N(0, mu I)` for the underdamped one.
#[allow(clippy::too_many_arguments)]
pub fn choose_eta(
    process: ProcessKind,
    alpha: f64,
    eps: f64,
    tau: f64,
    smoothness: f64,
    dim: usize,
    c: f64,
) -> Result<EtaChoice> {
    let initial_variance = match process {
        ProcessKind::OverdampedSc => Some(1.0 / smoothness),
        _ => None,
    };
    choose_eta_for(&EtaProblem {
        process,
        alpha,
        eps,
        tau,
        smoothness,
        dim,
        c,
        initial_variance,
    })
}

/// Largest certifiable step size without any initial-law condition.
#[allow(clippy::too_many_arguments)]
pub fn largest_certified_eta(
    process: ProcessKind,
    alpha: f64,
    eps: f64,
    tau: f64,
    smoothness: f64,
    dim: usize,
    c: f64,
) -> Result<f64> {
    let problem = EtaProblem {
        process,
        alpha,
        eps,
        tau,
        smoothness,
        dim,
        c,
        initial_variance: None,
    };
    problem.validate()?;
    bisect(&problem)
}

fn default_c() -> f64 {
    DEFAULT_C
}

/// Planner inputs. `smoothness` and `dim` describe the canonical potential.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanRequest {
    pub alpha: f64,
    pub eps: f64,
    pub smoothness: f64,
    pub dim: usize,
    pub process: ProcessKind,
    pub mode: Mode,
    #[serde(default = "default_c")]
    pub c: f64,
    /// Continuous horizon; required when no mixing bound is available.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
}

impl PlanRequest {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 1.0 && self.alpha.is_finite()) {
            return Err(invalid(format!("alpha must exceed 1, got {}", self.alpha)));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(invalid(format!("eps must be positive, got {}", self.eps)));
        }
        if !(self.smoothness > 0.0 && self.smoothness.is_finite()) {
            return Err(invalid(format!("smoothness must be positive, got {}", self.smoothness)));
        }
        if self.dim == 0 {
            return Err(invalid("dimension must be positive"));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(invalid(format!("c must be positive, got {}", self.c)));
        }
        self.process.validate()?;
        match (self.process, self.tau) {
            (ProcessKind::OverdampedSc, Some(_)) => Err(invalid(
                "tau is derived from the mixing bound for strongly convex plans; omit it",
            )),
            (ProcessKind::OverdampedSc, None) if self.smoothness < 1.0 => Err(invalid(format!(
                "canonical smoothness must be >= 1, got {}",
                self.smoothness
            ))),
            (ProcessKind::OverdampedSc, None) => Ok(()),
            (_, None) => Err(invalid("this process has no certified mixing time; supply tau")),
            (_, Some(t)) if !(t >= 0.0 && t.is_finite()) => Err(invalid(format!("tau must be >= 0, got {t}"))),
            _ => Ok(()),
        }
    }

    /// Order the plan is built at: `max(alpha, 3/2)`.
    pub fn plan_alpha(&self) -> f64 {
        self.alpha.max(MIN_PLAN_ORDER)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum MixingStatus {
    Certified(MixingTime),
    Uncertified { reason: String },
}

/// A named bound together with the formula it instantiates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub name: String,
    pub formula: String,
    pub bound: DivergenceBound,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub request: PlanRequest,
    pub plan_alpha: f64,
    /// `2 * plan_alpha`, the order of both legs.
    pub leg_order: f64,
    /// `None` when no steps are needed.
    pub eta: Option<f64>,
    pub steps: u64,
    pub tau: f64,
    pub initial: InitialDistribution,
    pub mixing: MixingStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discretization: Option<UnconditionedBound>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bisected_eta: Option<f64>,
    pub certificates: Vec<Certificate>,
    /// Bound on the sampler-to-target divergence at the requested order;
    /// absent when the mixing leg is uncertified.
    pub combined: Option<DivergenceBound>,
    pub preconditions: Vec<PreconditionCheck>,
}

impl SamplingPlan {
    pub fn certificate(&self, name: &str) -> Option<&Certificate> {
        self.certificates.iter().find(|c| c.name == name)
    }

    pub fn is_certified(&self) -> bool {
        self.combined.is_some()
    }

    /// Sampler configuration matching the plan. `None` when `T = 0`.
    pub fn dynamics_config(&self, seed: u64) -> Option<DynamicsConfig> {
        self.eta.map(|eta| DynamicsConfig {
            process: self.request.process.to_process(),
            eta,
            steps: self.steps as usize,
            radius_guard: None,
            seed,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

fn cert(name: &str, formula: &str, bound: DivergenceBound) -> Certificate {
    Certificate {
        name: name.into(),
        formula: formula.into(),
        bound,
    }
}

pub(crate) const F_DISCRETIZATION: &str =
    "conditional growth T alpha' L^2 r^2 eta / 4 unconditioned through the moment bound, at order 2 alpha";
pub(crate) const F_NO_STEPS: &str = "no steps: sampler law equals the initial law";
pub(crate) const F_MIX_ONE: &str = "(d/2) ln L exp(-tau/alpha) from N(0, I/L)";
pub(crate) const F_MIX_FWD: &str = "d ln L exp(-(tau - t1)/alpha), t1 = ln((2 alpha - 1) L)/2, from N(0, I)";
pub(crate) const F_MIX_REV: &str = "d ln L exp(-tau/(2 alpha)) from N(0, I)";
pub(crate) const F_COMBINE_FWD: &str =
    "weak triangle p = q = 2: (alpha - 1/2)/(alpha - 1) D_2alpha(P||Q) + D_(2alpha-1)(Q||R)";
pub(crate) const F_COMBINE_REV: &str =
    "weak triangle p = q = 2: (alpha - 1/2)/(alpha - 1) D_2alpha(R||Q) + D_(2alpha-1)(Q||P)";

fn initial_law(req: &PlanRequest) -> (InitialDistribution, Option<f64>) {
    match (req.process, req.mode) {
        (ProcessKind::OverdampedSc, Mode::OneSided) => (InitialDistribution::GaussianScaled, Some(1.0 / req.smoothness)),
        (ProcessKind::OverdampedSc, Mode::Bidirectional) => (InitialDistribution::StandardGaussian, Some(1.0)),
        (ProcessKind::OverdampedLip { .. }, _) => (InitialDistribution::StandardGaussian, None),
        (ProcessKind::Underdamped { mu, .. }, _) => (
            InitialDistribution::GaussianWithVelocity {
                position_var: 1.0 / req.smoothness,
                velocity_var: mu,
            },
            None,
        ),
    }
}

fn preconditions(req: &PlanRequest, eta: Option<f64>) -> Vec<PreconditionCheck> {
    use PreconditionStatus::*;
    let l = req.smoothness;
    let stepped = |text: String| match eta {
        Some(e) => format!("{text} (eta = {e:e})"),
        None => "no steps taken".to_string(),
    };
    let mut out = vec![PreconditionCheck::new(
        "smoothness",
        Assumed,
        format!("potential declared {l}-smooth in canonical form"),
    )];
    match req.process {
        ProcessKind::OverdampedSc => {
            out.push(PreconditionCheck::new(
                "strong_convexity",
                Assumed,
                "potential declared 1-strongly convex with minimizer 0 in canonical form",
            ));
            out.push(PreconditionCheck::new(
                "eta_regime",
                Checked,
                stepped(format!("eta <= 2/(L+1) = {}", 2.0 / (l + 1.0))),
            ));
            out.push(PreconditionCheck::new(
                "starting_bound",
                Checked,
                stepped("Gaussian initial law meets the starting condition by the chi tail bound".into()),
            ));
            out.push(PreconditionCheck::new(
                "mixing",
                Checked,
                "closed-form exponential decay of the continuous process",
            ));
        }
        ProcessKind::OverdampedLip { b } => {
            out.push(PreconditionCheck::new(
                "lipschitz",
                Assumed,
                format!("potential declared {b}-Lipschitz"),
            ));
            out.push(PreconditionCheck::new("eta_regime", Checked, stepped("eta <= 1".into())));
            out.push(PreconditionCheck::new(
                "starting_bound",
                Checked,
                "the Lipschitz tail bound holds from any initial law",
            ));
            out.push(PreconditionCheck::new(
                "mixing",
                Uncertified,
                "no mixing bound for Lipschitz potentials; tau supplied by the caller",
            ));
        }
        ProcessKind::Underdamped { gamma, mu } => {
            out.push(PreconditionCheck::new("gamma_regime", Checked, format!("gamma = {gamma} >= 2")));
            out.push(PreconditionCheck::new(
                "eta_regime",
                Checked,
                stepped(format!("eta <= gamma/(mu L) = {} and gamma eta < 1", gamma / (mu * l))),
            ));
            out.push(PreconditionCheck::new(
                "starting_bound_ud",
                Checked,
                stepped("x ~ N(0, I/L), v ~ N(0, mu I) meets the energy condition by the chi-square tail bound".into()),
            ));
            out.push(PreconditionCheck::new(
                "mixing",
                Uncertified,
                "no proven Renyi mixing bound for the continuous underdamped process; tau supplied by the caller",
            ));
        }
    }
    out
}

/// Builds a plan whose discretization leg is at most `eps/3` at order
/// `2 max(alpha, 3/2)` and, with a certified mixing leg, whose combined
/// bound is at most `eps` at order `alpha`.
pub fn plan_sampling(req: &PlanRequest) -> Result<SamplingPlan> {
    req.validate()?;
    let plan_alpha = req.plan_alpha();
    let order = 2.0 * plan_alpha;
    let (initial, initial_variance) = initial_law(req);
    let mixing = match req.process {
        ProcessKind::OverdampedSc => {
            MixingStatus::Certified(mixing_time(plan_alpha, req.dim, req.smoothness, req.eps, req.mode)?)
        }
        ProcessKind::OverdampedLip { .. } => MixingStatus::Uncertified {
            reason: "no Renyi mixing bound for Lipschitz potentials without strong convexity".into(),
        },
        ProcessKind::Underdamped { .. } => MixingStatus::Uncertified {
            reason: "Renyi mixing of the continuous underdamped process is not established".into(),
        },
    };
    let tau = match (&mixing, req.tau) {
        (MixingStatus::Certified(m), _) => m.tau,
        (_, Some(t)) => t,
        (_, None) => unreachable!("validated"),
    };

    let (eta, steps, bisected, unconditioned, disc) = if tau == 0.0 {
        (None, 0, None, None, cert("discretization", F_NO_STEPS, DivergenceBound::new(order, 0.0, Direction::Both)?))
    } else {
        let choice = choose_eta_for(&EtaProblem {
            process: req.process,
            alpha: order,
            eps: req.eps / 3.0,
            tau,
            smoothness: req.smoothness,
            dim: req.dim,
            c: req.c,
            initial_variance,
        })?;
        let bound = choice.unconditioned.bound()?;
        (
            Some(choice.eta),
            choice.steps,
            Some(choice.bisected_eta),
            Some(choice.unconditioned),
            cert("discretization", F_DISCRETIZATION, bound),
        )
    };

    let mut certificates = vec![disc.clone()];
    let mut combined = None;
    if let MixingStatus::Certified(m) = &mixing {
        let second = order - 1.0;
        let (fwd_formula, rev_formula) = match req.mode {
            Mode::OneSided => (F_MIX_ONE, F_MIX_REV),
            Mode::Bidirectional => (F_MIX_FWD, F_MIX_REV),
        };
        certificates.push(cert("mixing_forward", fwd_formula, m.forward));
        let fwd = weak_triangle(plan_alpha, 2.0, &disc.bound, &m.forward.at_order(second)?)?;
        certificates.push(cert("combined_forward", F_COMBINE_FWD, fwd));
        let mut total = fwd;
        if let Some(rev_mix) = m.reverse {
            certificates.push(cert("mixing_reverse", rev_formula, rev_mix));
            let rev = weak_triangle(plan_alpha, 2.0, &rev_mix, &disc.bound.at_order(second)?)?;
            certificates.push(cert("combined_reverse", F_COMBINE_REV, rev));
            total = DivergenceBound::new(plan_alpha, fwd.value.max(rev.value), Direction::Both)?;
        }
        // Valid at the requested order by monotonicity.
        let total = total.at_order(req.alpha)?;
        if total.value > req.eps {
            return Err(Error::Infeasible {
                violated: format!("combined bound {} exceeds eps = {}", total.value, req.eps),
                max_feasible_eta: eta,
            });
        }
        combined = Some(total);
    }

    Ok(SamplingPlan {
        request: *req,
        plan_alpha,
        leg_order: order,
        eta,
        steps,
        tau,
        initial,
        preconditions: preconditions(req, eta),
        mixing,
        discretization: unconditioned,
        bisected_eta: bisected,
        certificates,
        combined,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sc(alpha: f64, eps: f64, l: f64, d: usize, mode: Mode) -> PlanRequest {
        PlanRequest {
            alpha,
            eps,
            smoothness: l,
            dim: d,
            process: ProcessKind::OverdampedSc,
            mode,
            c: DEFAULT_C,
            tau: None,
        }
    }

    #[test]
    fn unit_smoothness_draws_the_initial_law() {
        let plan = plan_sampling(&sc(2.0, 0.5, 1.0, 3, Mode::Bidirectional)).unwrap();
        assert_eq!(plan.steps, 0);
        assert_eq!(plan.eta, None);
        assert_eq!(plan.combined.unwrap().value, 0.0);
    }

    #[test]
    fn small_plan_rounds_steps() {
        let plan = plan_sampling(&sc(2.0, 0.5, 4.0, 2, Mode::OneSided)).unwrap();
        let eta = plan.eta.unwrap();
        assert_eq!(plan.steps, steps_for(plan.tau, plan.bisected_eta.unwrap()).max(plan.steps));
        assert!((plan.steps as f64 * eta - plan.tau).abs() <= 1e-12 * plan.tau);
        assert!(plan.combined.unwrap().value <= 0.5);
        assert_eq!(plan_sampling(&plan.request).unwrap(), plan);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let plan = plan_sampling(&sc(3.0, 0.3, 2.0, 2, Mode::Bidirectional)).unwrap();
        let back = SamplingPlan::from_json(&plan.to_json().unwrap()).unwrap();
        assert_eq!(back, plan);
    }

    #[test]
    fn uncertified_processes_need_tau() {
        let mut req = sc(2.0, 0.5, 2.0, 2, Mode::OneSided);
        req.process = ProcessKind::Underdamped { gamma: 2.0, mu: 1.0 };
        assert!(plan_sampling(&req).is_err());
        req.tau = Some(1.0);
        let plan = plan_sampling(&req).unwrap();
        assert!(!plan.is_certified());
        assert!(plan
            .preconditions
            .iter()
            .any(|p| p.name == "mixing" && p.status == PreconditionStatus::Uncertified));
    }

    #[test]
    fn steps_snap_to_integers() {
        assert_eq!(steps_for(1.0, 0.1), 10);
        assert_eq!(steps_for(1.0, 0.3), 4);
    }

    #[test]
    fn eps_doubling_never_shrinks_eta() {
        let a = choose_eta(ProcessKind::OverdampedSc, 4.0, 0.05, 1.0, 2.0, 2, 2.0).unwrap();
        let b = choose_eta(ProcessKind::OverdampedSc, 4.0, 0.1, 1.0, 2.0, 2, 2.0).unwrap();
        assert!(b.bisected_eta >= a.bisected_eta);
    }
}
