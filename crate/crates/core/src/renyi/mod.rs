//! Renyi-divergence calculus in nats.
//!
//! `D_alpha(P || Q) = ln( int p^alpha q^(1-alpha) ) / (alpha - 1)` for
//! orders `alpha > 1`. Bounds carry their order and the direction(s) they
//! control; combinators refuse to mix either silently.

mod numeric;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub use numeric::{discrete_divergence, grid_divergence, Grid, GridEstimate, COVERAGE_TOL};

/// Relative tolerance used when comparing Renyi orders.
pub const ORDER_RTOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// `D(P || Q)`: sampler law against target.
    Forward,
    /// `D(Q || P)`.
    Reverse,
    Both,
}

impl Direction {
    /// The directions certified by two bounds that both hold.
    pub fn meet(self, other: Direction) -> Result<Direction> {
        use Direction::*;
        match (self, other) {
            (Both, d) | (d, Both) => Ok(d),
            (a, b) if a == b => Ok(a),
            (a, b) => Err(Error::DirectionMismatch(format!("cannot combine {a:?} with {b:?}"))),
        }
    }

    pub fn covers(self, wanted: Direction) -> bool {
        self == Direction::Both || self == wanted
    }
}

/// `value >= D_alpha` in the tagged direction(s).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceBound {
    pub alpha: f64,
    pub value: f64,
    pub direction: Direction,
}

fn check_order(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha > 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("Renyi order must be finite and > 1, got {alpha}")))
    }
}

fn same_order(a: f64, b: f64) -> bool {
    (a - b).abs() <= ORDER_RTOL * a.abs().max(b.abs())
}

impl DivergenceBound {
    pub fn new(alpha: f64, value: f64, direction: Direction) -> Result<Self> {
        check_order(alpha)?;
        if !value.is_finite() {
            return Err(Error::InfiniteDivergence(format!("value {value} at order {alpha}")));
        }
        if value < 0.0 {
            return Err(invalid(format!("divergence bound must be non-negative, got {value}")));
        }
        Ok(Self {
            alpha,
            value,
            direction,
        })
    }

    /// The same value reused at a lower order, valid by monotonicity in `alpha`.
    pub fn at_order(&self, alpha: f64) -> Result<Self> {
        check_order(alpha)?;
        if alpha > self.alpha && !same_order(alpha, self.alpha) {
            return Err(Error::OrderMismatch(format!(
                "a bound at order {} does not control order {alpha}",
                self.alpha
            )));
        }
        Ok(Self { alpha, ..*self })
    }
}

/// `alpha |shift|^2 / (2 sigma^2)` between `N(mu, sigma^2 I)` and
/// `N(mu + shift, sigma^2 I)`, in both directions.
pub fn gaussian_shift_divergence(alpha: f64, shift_norm: f64, sigma2: f64) -> Result<DivergenceBound> {
    if !(sigma2 > 0.0) {
        return Err(invalid(format!("variance must be positive, got {sigma2}")));
    }
    DivergenceBound::new(alpha, alpha * shift_norm * shift_norm / (2.0 * sigma2), Direction::Both)
}

/// Exact `D_alpha(N(mu1, var1) || N(mu2, var2))`.
///
/// Infinite when `alpha var2 + (1 - alpha) var1 <= 0`.
pub fn gaussian1d_divergence(alpha: f64, mu1: f64, var1: f64, mu2: f64, var2: f64) -> Result<DivergenceBound> {
    check_order(alpha)?;
    if !(var1 > 0.0 && var2 > 0.0) {
        return Err(invalid(format!("variances must be positive, got {var1} and {var2}")));
    }
    let var_a = alpha * var2 + (1.0 - alpha) * var1;
    if !(var_a > 0.0) {
        return Err(Error::InfiniteDivergence(format!(
            "alpha var2 + (1 - alpha) var1 = {var_a} <= 0"
        )));
    }
    let dm = mu1 - mu2;
    let log_term = var_a.ln() - (1.0 - alpha) * var1.ln() - alpha * var2.ln();
    let value = alpha * dm * dm / (2.0 * var_a) - log_term / (2.0 * (alpha - 1.0));
    // Rounding can push an exact zero slightly negative.
    DivergenceBound::new(alpha, value.max(0.0), Direction::Forward)
}

/// Adaptive composition: values add at a common order and direction.
pub fn compose(alpha: f64, direction: Direction, bounds: &[DivergenceBound]) -> Result<DivergenceBound> {
    check_order(alpha)?;
    let mut total = 0.0;
    for b in bounds {
        if !same_order(b.alpha, alpha) {
            return Err(Error::OrderMismatch(format!(
                "composition at order {alpha} received a bound at order {}; convert explicitly",
                b.alpha
            )));
        }
        if b.direction != direction {
            return Err(Error::DirectionMismatch(format!(
                "composition in direction {direction:?} received {:?}",
                b.direction
            )));
        }
        total += b.value;
    }
    DivergenceBound::new(alpha, total, direction)
}

/// `D_alpha(P||R) <= (alpha - 1/p)/(alpha - 1) D_{p alpha}(P||Q) + D_{q(alpha - 1/p)}(Q||R)`
/// with `1/p + 1/q = 1`.
pub fn weak_triangle(
    alpha: f64,
    p: f64,
    bound_pq: &DivergenceBound,
    bound_qr: &DivergenceBound,
) -> Result<DivergenceBound> {
    check_order(alpha)?;
    if !(p > 1.0 && p.is_finite()) {
        return Err(invalid(format!("Holder exponent p must be > 1, got {p}")));
    }
    let q = p / (p - 1.0);
    let first = p * alpha;
    let second = q * (alpha - 1.0 / p);
    if !same_order(bound_pq.alpha, first) {
        return Err(Error::OrderMismatch(format!(
            "first leg must be at order {first}, got {}",
            bound_pq.alpha
        )));
    }
    if !same_order(bound_qr.alpha, second) {
        return Err(Error::OrderMismatch(format!(
            "second leg must be at order {second}, got {}",
            bound_qr.alpha
        )));
    }
    let direction = bound_pq.direction.meet(bound_qr.direction)?;
    let coef = (alpha - 1.0 / p) / (alpha - 1.0);
    DivergenceBound::new(alpha, coef * bound_pq.value + bound_qr.value, direction)
}

/// `zeta + ln(1/delta)/(alpha - 1)`: the delta-approximate max-divergence implied by a Renyi bound.
pub fn renyi_to_apxdp(bound: &DivergenceBound, delta: f64) -> Result<f64> {
    check_order(bound.alpha)?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    Ok(bound.value + (1.0 / delta).ln() / (bound.alpha - 1.0))
}

/// Order and per-direction Renyi budget that convert to `(zeta, delta)`:
/// `alpha = 1 + 2 ln(1/delta)/zeta` and `eps = zeta/2`.
pub fn dp_recipe(zeta: f64, delta: f64) -> Result<(f64, f64)> {
    if !(zeta > 0.0 && zeta.is_finite()) {
        return Err(invalid(format!("zeta must be positive, got {zeta}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    Ok((1.0 + 2.0 * (1.0 / delta).ln() / zeta, zeta / 2.0))
}

/// Bounds at increasing orders in one direction, non-decreasing in value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<DivergenceBound>", into = "Vec<DivergenceBound>")]
pub struct DivergenceCurve {
    points: Vec<DivergenceBound>,
}

impl DivergenceCurve {
    pub fn new(mut points: Vec<DivergenceBound>) -> Result<Self> {
        if points.is_empty() {
            return Err(invalid("divergence curve needs at least one point"));
        }
        points.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
        let dir = points[0].direction;
        for w in points.windows(2) {
            if w[1].direction != dir {
                return Err(Error::DirectionMismatch("curve points disagree on direction".into()));
            }
            if same_order(w[0].alpha, w[1].alpha) {
                return Err(invalid(format!("duplicate order {} in curve", w[0].alpha)));
            }
            if w[1].value < w[0].value {
                return Err(invalid(format!(
                    "curve decreases between orders {} and {}",
                    w[0].alpha, w[1].alpha
                )));
            }
        }
        Ok(Self { points })
    }

    pub fn direction(&self) -> Direction {
        self.points[0].direction
    }

    pub fn points(&self) -> &[DivergenceBound] {
        &self.points
    }
}

impl TryFrom<Vec<DivergenceBound>> for DivergenceCurve {
    type Error = Error;
    fn try_from(points: Vec<DivergenceBound>) -> Result<Self> {
        Self::new(points)
    }
}

impl From<DivergenceCurve> for Vec<DivergenceBound> {
    fn from(c: DivergenceCurve) -> Self {
        c.points
    }
}

/// The value at the smallest recorded order `>= alpha`, declared valid at `alpha`.
pub fn curve_lookup(curve: &DivergenceCurve, alpha: f64) -> Result<DivergenceBound> {
    check_order(alpha)?;
    let first = curve.points[0].alpha;
    if alpha < first && !same_order(alpha, first) {
        return Err(Error::OrderMismatch(format!(
            "order {alpha} lies below the smallest recorded order {first}"
        )));
    }
    curve
        .points
        .iter()
        .find(|b| b.alpha >= alpha || same_order(b.alpha, alpha))
        .map(|b| DivergenceBound { alpha, ..*b })
        .ok_or_else(|| {
            Error::OrderMismatch(format!(
                "order {alpha} exceeds the largest recorded order {}",
                curve.points.last().map_or(f64::NAN, |b| b.alpha)
            ))
        })
}
