use serde::{Deserialize, Serialize};

use super::Mode;
use crate::error::{invalid, Result};
use crate::renyi::{DivergenceBound, Direction};

/// Continuous-time horizon after which the continuous process is within
/// `eps/3` of the target at order `2 alpha`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixingTime {
    pub mode: Mode,
    pub alpha: f64,
    /// `2 alpha`, the order the bounds hold at.
    pub order: f64,
    pub tau: f64,
    /// Hypercontractive warm-up time of the forward leg (bidirectional only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warmup: Option<f64>,
    /// Divergence bound at time zero (at `warmup` for the bidirectional forward leg).
    pub initial_bound: f64,
    pub forward: DivergenceBound,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reverse: Option<DivergenceBound>,
}

fn check(alpha: f64, d: usize, l: f64, eps: f64) -> Result<()> {
    if !(alpha > 1.0 && alpha.is_finite()) {
        return Err(invalid(format!("alpha must exceed 1, got {alpha}")));
    }
    if d == 0 {
        return Err(invalid("dimension must be positive"));
    }
    if !(l >= 1.0 && l.is_finite()) {
        return Err(invalid(format!("canonical smoothness must be >= 1, got {l}")));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(invalid(format!("eps must be positive, got {eps}")));
    }
    Ok(())
}

fn warmup(alpha: f64, l: f64) -> f64 {
    0.5 * ((2.0 * alpha - 1.0) * l).ln()
}

/// Bounds at order `2 alpha` after continuous time `tau`.
///
/// One-sided, from `N(0, I/L)`: `(d/2) ln L e^(-tau/alpha)`.
/// Bidirectional, from `N(0, I)`: forward `d ln L e^(-(tau - t1)/alpha)` for
/// `tau >= t1 = ln((2 alpha - 1) L)/2`, reverse `d ln L e^(-tau/(2 alpha))`.
pub fn mixing_bounds_at(
    alpha: f64,
    d: usize,
    l: f64,
    tau: f64,
    mode: Mode,
) -> Result<(DivergenceBound, Option<DivergenceBound>)> {
    check(alpha, d, l, 1.0)?;
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(invalid(format!("tau must be non-negative, got {tau}")));
    }
    let order = 2.0 * alpha;
    let dl = d as f64 * l.ln();
    match mode {
        Mode::OneSided => Ok((
            DivergenceBound::new(order, 0.5 * dl * (-tau / alpha).exp(), Direction::Forward)?,
            None,
        )),
        Mode::Bidirectional => {
            let t1 = warmup(alpha, l);
            let forward = if dl == 0.0 {
                0.0
            } else if tau >= t1 {
                dl * (-(tau - t1) / alpha).exp()
            } else {
                return Err(invalid(format!(
                    "forward bound needs tau >= {t1} to reach order {order}, got {tau}"
                )));
            };
            Ok((
                DivergenceBound::new(order, forward, Direction::Forward)?,
                Some(DivergenceBound::new(
                    order,
                    dl * (-tau / order).exp(),
                    Direction::Reverse,
                )?),
            ))
        }
    }
}

/// Smallest closed-form `tau` whose bounds at order `2 alpha` are `<= eps/3`.
/// `L = 1` gives `tau = 0`.
pub fn mixing_time(alpha: f64, d: usize, l: f64, eps: f64, mode: Mode) -> Result<MixingTime> {
    check(alpha, d, l, eps)?;
    let dl = d as f64 * l.ln();
    let budget = eps / 3.0;
    let (mut tau, warm, initial) = match mode {
        _ if dl == 0.0 => (0.0, None, 0.0),
        Mode::OneSided => ((alpha * (3.0 * dl / (2.0 * eps)).ln()).max(0.0), None, 0.5 * dl),
        Mode::Bidirectional => {
            let t1 = warmup(alpha, l);
            let fwd = t1 + (alpha * (3.0 * dl / eps).ln()).max(0.0);
            let rev = (2.0 * alpha * (3.0 * dl / eps).ln()).max(0.0);
            (fwd.max(rev), Some(t1), dl)
        }
    };
    let warm = if mode == Mode::Bidirectional && dl == 0.0 { Some(0.0) } else { warm };
    let (mut forward, mut reverse) = mixing_bounds_at(alpha, d, l, tau, mode)?;
    // The closed form can land a rounding error above the budget.
    let mut nudges = 0;
    while forward.value > budget || reverse.is_some_and(|r| r.value > budget) {
        if nudges > 64 {
            return Err(invalid("mixing time did not settle under the budget"));
        }
        tau *= 1.0 + 1e-12;
        (forward, reverse) = mixing_bounds_at(alpha, d, l, tau, mode)?;
        nudges += 1;
    }
    Ok(MixingTime {
        mode,
        alpha,
        order: 2.0 * alpha,
        tau,
        warmup: warm,
        initial_bound: initial,
        forward,
        reverse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_sided_example() {
        let m = mixing_time(2.0, 10, 2.0, 0.1, Mode::OneSided).unwrap();
        assert!((m.initial_bound - 5.0 * 2f64.ln()).abs() < 1e-12);
        let expect = 2.0 * (5.0 * 2f64.ln() * 3.0 / 0.1).ln();
        assert!((m.tau - expect).abs() < 1e-9 * expect);
        assert!(m.forward.value <= 0.1 / 3.0);
        assert_eq!(m.forward.alpha, 4.0);
    }

    #[test]
    fn unit_smoothness_needs_no_time() {
        for mode in [Mode::OneSided, Mode::Bidirectional] {
            let m = mixing_time(2.0, 3, 1.0, 0.1, mode).unwrap();
            assert_eq!(m.tau, 0.0);
            assert_eq!(m.forward.value, 0.0);
        }
    }

    #[test]
    fn bidirectional_is_slower() {
        for &(a, d, l, e) in &[(2.0, 10, 2.0, 0.1), (1.5, 1, 4.0, 0.5), (8.0, 50, 1.5, 0.01)] {
            let one = mixing_time(a, d, l, e, Mode::OneSided).unwrap();
            let two = mixing_time(a, d, l, e, Mode::Bidirectional).unwrap();
            assert!(two.tau >= one.tau);
            let r = two.reverse.unwrap();
            assert!(two.forward.value <= e / 3.0 && r.value <= e / 3.0);
        }
    }

    #[test]
    fn large_eps_gives_zero_time() {
        let m = mixing_time(2.0, 1, 2.0, 10.0, Mode::OneSided).unwrap();
        assert_eq!(m.tau, 0.0);
        assert!(m.forward.value <= 10.0 / 3.0);
    }

    #[test]
    fn forward_leg_needs_warmup() {
        assert!(mixing_bounds_at(2.0, 2, 4.0, 0.1, Mode::Bidirectional).is_err());
    }
}
