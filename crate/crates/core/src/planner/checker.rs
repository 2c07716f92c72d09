//! Straight-line re-evaluation of a [`SamplingPlan`].
//!
//! Nothing here calls back into the planner's bound functions: every
//! formula is written out again so that a plan produced by a faulty planner,
//! or edited by hand, is caught.

use serde::{Deserialize, Serialize};

use super::plan::plan_sampling;
use super::{Branch, MixingStatus, Mode, ProcessKind, SamplingPlan};
use crate::dynamics::InitialDistribution;
use crate::error::Result;
use crate::renyi::Direction;

const RTOL: f64 = 1e-12;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub accepted: bool,
    pub checks: usize,
    pub failures: Vec<String>,
}

struct Checker {
    checks: usize,
    failures: Vec<String>,
}

impl Checker {
    fn expect(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.failures.push(what());
        }
    }

    fn close(&mut self, name: &str, stored: f64, recomputed: f64) {
        let ok = (stored - recomputed).abs() <= RTOL * stored.abs().max(recomputed.abs())
            || stored == recomputed;
        self.expect(ok, || format!("{name}: stored {stored}, recomputed {recomputed}"));
    }
}

fn tight(beta: f64, g: f64, theta: f64) -> f64 {
    let s = if g == 0.0 {
        1.0
    } else {
        g.powf(1.0 / (1.0 + g)) + g.powf(-g / (1.0 + g))
    };
    beta.powf(1.0 / theta) * s.powf((1.0 + g) / theta) * theta / (theta - 1.0 - g)
}

/// Re-derives every inequality a plan relies on.
#[allow(clippy::needless_late_init)]
pub fn check_plan(plan: &SamplingPlan) -> CheckReport {
    let mut ck = Checker {
        checks: 0,
        failures: Vec::new(),
    };
    let req = &plan.request;
    let (alpha, eps, l, d, c) = (req.alpha, req.eps, req.smoothness, req.dim as f64, req.c);
    ck.expect(alpha > 1.0 && eps > 0.0 && l > 0.0 && d >= 1.0 && c > 0.0, || {
        "request parameters out of range".into()
    });
    let pa = if alpha < 1.5 { 1.5 } else { alpha };
    ck.close("plan_alpha", plan.plan_alpha, pa);
    ck.close("leg_order", plan.leg_order, 2.0 * pa);
    let order = 2.0 * pa;
    let budget = eps / 3.0;

    let expected_initial = match (req.process, req.mode) {
        (ProcessKind::OverdampedSc, Mode::OneSided) => InitialDistribution::GaussianScaled,
        (ProcessKind::Underdamped { mu, .. }, _) => InitialDistribution::GaussianWithVelocity {
            position_var: 1.0 / l,
            velocity_var: mu,
        },
        _ => InitialDistribution::StandardGaussian,
    };
    ck.expect(plan.initial == expected_initial, || {
        format!("initial law {:?} does not match the process and mode", plan.initial)
    });

    // Mixing leg.
    let tau = plan.tau;
    let mut mix_fwd = None;
    let mut mix_rev = None;
    match (&plan.mixing, req.process) {
        (MixingStatus::Certified(m), ProcessKind::OverdampedSc) => {
            let dl = d * l.ln();
            let tau0 = if dl == 0.0 {
                0.0
            } else {
                match req.mode {
                    Mode::OneSided => (pa * (3.0 * dl / (2.0 * eps)).ln()).max(0.0),
                    Mode::Bidirectional => {
                        let t1 = 0.5 * ((2.0 * pa - 1.0) * l).ln();
                        let f = t1 + (pa * (3.0 * dl / eps).ln()).max(0.0);
                        let r = (2.0 * pa * (3.0 * dl / eps).ln()).max(0.0);
                        if f > r {
                            f
                        } else {
                            r
                        }
                    }
                }
            };
            ck.expect(tau >= tau0 && tau <= tau0 * (1.0 + 1e-9), || {
                format!("tau = {tau} is not the closed-form mixing time {tau0}")
            });
            ck.close("mixing.tau", m.tau, tau);
            let (f, r) = match req.mode {
                Mode::OneSided => (0.5 * dl * (-tau / pa).exp(), None),
                Mode::Bidirectional => {
                    let t1 = 0.5 * ((2.0 * pa - 1.0) * l).ln();
                    ck.expect(dl == 0.0 || tau >= t1, || format!("tau = {tau} precedes the warm-up {t1}"));
                    let f = if dl == 0.0 { 0.0 } else { dl * (-(tau - t1) / pa).exp() };
                    (f, Some(dl * (-tau / (2.0 * pa)).exp()))
                }
            };
            ck.close("mixing.forward", m.forward.value, f);
            ck.expect(m.forward.alpha == order && m.forward.direction == Direction::Forward, || {
                "mixing forward bound has the wrong order or direction".into()
            });
            ck.expect(f <= budget, || format!("mixing forward {f} exceeds eps/3 = {budget}"));
            match (m.reverse, r) {
                (Some(stored), Some(r)) => {
                    ck.close("mixing.reverse", stored.value, r);
                    ck.expect(stored.alpha == order && stored.direction == Direction::Reverse, || {
                        "mixing reverse bound has the wrong order or direction".into()
                    });
                    ck.expect(r <= budget, || format!("mixing reverse {r} exceeds eps/3 = {budget}"));
                }
                (None, None) => {}
                _ => ck.expect(false, || "reverse mixing bound present in the wrong mode".into()),
            }
            mix_fwd = Some(f);
            mix_rev = r;
        }
        (MixingStatus::Uncertified { .. }, ProcessKind::OverdampedLip { .. } | ProcessKind::Underdamped { .. }) => {
            ck.expect(req.tau == Some(tau), || "tau must echo the requested horizon".into());
            ck.expect(plan.combined.is_none(), || "uncertified mixing cannot carry a combined bound".into());
        }
        _ => ck.expect(false, || "mixing status does not match the process".into()),
    }

    // Discretization leg.
    let disc_value;
    if tau == 0.0 {
        ck.expect(plan.steps == 0 && plan.eta.is_none(), || "tau = 0 must take no steps".into());
        disc_value = 0.0;
    } else {
        let Some(eta) = plan.eta else {
            ck.expect(false, || "positive tau without a step size".into());
            return finish(ck);
        };
        let t = plan.steps as f64;
        ck.expect(plan.steps >= 1, || "no steps for positive tau".into());
        ck.expect((t * eta - tau).abs() <= RTOL * tau, || format!("T eta = {} differs from tau = {tau}", t * eta));
        match req.process {
            ProcessKind::OverdampedSc => {
                ck.expect(eta <= 2.0 / (l + 1.0), || format!("eta = {eta} exceeds 2/(L+1)"));
                let var = if req.mode == Mode::OneSided { 1.0 / l } else { 1.0 };
                let k = c / (2.0 * (eta * var).sqrt());
                let u = t.ln();
                let lhs = (k - 1.0) * d.sqrt() + k * u.sqrt();
                let rhs = (2.0 * (u + (4.0 * (t + 1.0) / t).ln())).sqrt();
                ck.expect(k >= std::f64::consts::SQRT_2 && lhs >= rhs, || {
                    format!("starting condition fails: k = {k}, {lhs} < {rhs}")
                });
            }
            ProcessKind::OverdampedLip { .. } => {
                ck.expect(eta <= 1.0, || format!("eta = {eta} exceeds 1"));
            }
            ProcessKind::Underdamped { gamma, mu } => {
                ck.expect(gamma >= 2.0, || format!("gamma = {gamma} below 2"));
                ck.expect(eta <= gamma / (mu * l) && gamma * eta < 1.0, || {
                    format!("eta = {eta} violates eta <= gamma/(mu L) or gamma eta < 1")
                });
                let s = c * c * gamma;
                let k2 = 2.0 * d;
                let ln4 = 4f64.ln();
                ck.expect(
                    s * tau * d >= k2 + 2.0 * (k2 * ln4).sqrt() + 2.0 * ln4
                        && s * (tau * d).sqrt() >= k2.sqrt()
                        && s >= 2.0,
                    || "underdamped starting condition fails".into(),
                );
            }
        }

        let Some(u) = &plan.discretization else {
            ck.expect(false, || "stepped plan without a discretization record".into());
            return finish(ck);
        };
        ck.close("discretization.alpha", u.alpha, order);
        ck.close("discretization.eps", u.eps, budget);
        let lifts = (u.alpha_eff / 4.0).ln() / 1.25f64.ln();
        ck.expect(
            (lifts - lifts.round()).abs() < 1e-6 && lifts.round() >= 0.0 && u.alpha_eff >= order * (1.0 - 1e-12),
            || format!("effective order {} is not a grid order >= {order}", u.alpha_eff),
        );
        let ae = u.alpha_eff;
        let jensen = 3.0 * ae.ln() * (1.0 / budget).ln() / ((ae - 1.0) * budget);
        let large = budget >= 3.0 * ae.ln() / (ae - 1.0) || jensen <= 1.0;
        let kappa = if large { 1.0 } else { jensen };
        ck.expect(large == (u.branch == Branch::LargeEps), || "pipeline branch mismatch".into());
        ck.close("kappa", u.kappa, kappa);
        let ap = 4.0 * ae * kappa - 2.0;
        ck.close("alpha_prime", u.alpha_prime, ap);
        let a2 = ap * (ap - 1.0);
        let lt = (tau / eta).ln();
        let lt = if lt > 0.0 { lt } else { 0.0 };
        let (c1, c2) = match req.process {
            ProcessKind::OverdampedSc => {
                let x = 3.0 * tau * a2 * l.powi(4) * c * c * eta / 4.0;
                ((x * (d + 2.0 * lt)).exp(), x)
            }
            ProcessKind::OverdampedLip { b } => {
                let x = tau * a2 * l * l * c * c * eta;
                ((x * (b * b + d + 2.0 * lt)).exp(), x)
            }
            ProcessKind::Underdamped { mu, .. } => {
                let x = 3.0 * mu * mu * tau * a2 * l * l * c * c * eta * eta / 4.0;
                ((x * tau * d).exp(), x)
            }
        };
        ck.close("c1", u.c1, c1);
        ck.close("c2", u.c2, c2);
        ck.close("c3", u.c3, c2);
        ck.expect(c1 < 2.0 && c2 < 1.0, || format!("infeasible constants c1 = {c1}, c2 = {c2}"));
        let k1 = tight(2.0 * c1, c2, 2.0);
        let k2 = tight(4.0 * k1 / ap, c2 / 2.0, 2.0);
        let m = (ap / 4.0 + 0.5) * k2;
        ck.close("moment", u.moment, m);
        let v = m.ln() / ((ae - 1.0) * kappa);
        let v = if v > 0.0 { v } else { 0.0 };
        ck.close("discretization.value", u.value, v);
        ck.expect(v <= budget, || format!("discretization bound {v} exceeds eps/3 = {budget}"));
        disc_value = v;
    }
    match plan.certificate("discretization") {
        Some(cert) => {
            ck.close("certificate.discretization", cert.bound.value, disc_value);
            ck.expect(cert.bound.alpha == order && cert.bound.direction == Direction::Both, || {
                "discretization certificate has the wrong order or direction".into()
            });
        }
        None => ck.expect(false, || "missing discretization certificate".into()),
    }

    // Combination.
    if let Some(f) = mix_fwd {
        let coef = (pa - 0.5) / (pa - 1.0);
        let fwd = coef * disc_value + f;
        let mut total = fwd;
        if let Some(cert) = plan.certificate("combined_forward") {
            ck.close("combined_forward", cert.bound.value, fwd);
        } else {
            ck.expect(false, || "missing combined_forward certificate".into());
        }
        if let Some(r) = mix_rev {
            let rev = coef * r + disc_value;
            if let Some(cert) = plan.certificate("combined_reverse") {
                ck.close("combined_reverse", cert.bound.value, rev);
            } else {
                ck.expect(false, || "missing combined_reverse certificate".into());
            }
            total = if rev > fwd { rev } else { fwd };
        }
        match plan.combined {
            Some(b) => {
                ck.close("combined", b.value, total);
                ck.expect(b.alpha == alpha, || "combined bound is not at the requested order".into());
                let want = if req.mode == Mode::Bidirectional {
                    Direction::Both
                } else {
                    Direction::Forward
                };
                ck.expect(b.direction == want, || "combined bound has the wrong direction".into());
            }
            None => ck.expect(false, || "certified mixing without a combined bound".into()),
        }
        ck.expect(total <= eps, || format!("combined bound {total} exceeds eps = {eps}"));
    }
    finish(ck)
}

fn finish(ck: Checker) -> CheckReport {
    CheckReport {
        accepted: ck.failures.is_empty(),
        checks: ck.checks,
        failures: ck.failures,
    }
}

/// Rebuilds the plan from its request and compares bit for bit.
pub fn recertify(plan: &SamplingPlan) -> Result<bool> {
    Ok(plan_sampling(&plan.request)? == *plan)
}
