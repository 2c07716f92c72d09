use crate::error::{invalid, Result};

fn check_common(c: f64, d: usize, delta: f64, eta: f64) -> Result<()> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(invalid(format!("constant c must be positive, got {c}")));
    }
    if d == 0 {
        return Err(invalid("dimension must be positive"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(invalid(format!("step size must be positive, got {eta}")));
    }
    Ok(())
}

fn log_ratio(steps: u64, delta: f64) -> Result<f64> {
    if steps == 0 {
        return Err(invalid("radius bounds need at least one step"));
    }
    Ok((steps as f64 / delta).ln().max(0.0))
}

/// Within-step displacement bound for strongly convex, smooth potentials:
/// `c L (sqrt(d) + sqrt(ln(T/delta))) sqrt(eta)`, valid for `eta <= 2/(L+1)`.
pub fn radius_bound_sc(c: f64, l: f64, d: usize, steps: u64, delta: f64, eta: f64) -> Result<f64> {
    check_common(c, d, delta, eta)?;
    if !(l >= 1.0) {
        return Err(invalid(format!("canonical smoothness must be >= 1, got {l}")));
    }
    if eta > 2.0 / (l + 1.0) {
        return Err(invalid(format!("eta = {eta} exceeds 2/(L+1) = {}", 2.0 / (l + 1.0))));
    }
    let u = log_ratio(steps, delta)?;
    Ok(c * l * ((d as f64).sqrt() + u.sqrt()) * eta.sqrt())
}

/// Within-step displacement bound for `B`-Lipschitz potentials:
/// `c (B + sqrt(d) + sqrt(ln(T/delta))) sqrt(eta)`, valid for `eta <= 1`.
pub fn radius_bound_lip(c: f64, b: f64, d: usize, steps: u64, delta: f64, eta: f64) -> Result<f64> {
    check_common(c, d, delta, eta)?;
    if !(b >= 0.0 && b.is_finite()) {
        return Err(invalid(format!("Lipschitz constant must be non-negative, got {b}")));
    }
    if eta > 1.0 {
        return Err(invalid(format!("eta = {eta} exceeds 1")));
    }
    let u = log_ratio(steps, delta)?;
    Ok(c * (b + (d as f64).sqrt() + u.sqrt()) * eta.sqrt())
}

/// Underdamped velocity bound `c sqrt(gamma mu) (sqrt(tau d) + sqrt(ln(1/delta)))`;
/// the within-step radius is `v_max * eta`.
pub fn vmax_underdamped(c: f64, gamma: f64, mu: f64, tau: f64, d: usize, delta: f64) -> Result<f64> {
    check_common(c, d, delta, 1.0)?;
    if gamma < 2.0 {
        return Err(invalid(format!("the velocity tail bound needs gamma >= 2, got {gamma}")));
    }
    if !(mu > 0.0 && tau >= 0.0) {
        return Err(invalid(format!("need mu > 0 and tau >= 0 (mu={mu}, tau={tau})")));
    }
    Ok(c * (gamma * mu).sqrt() * ((tau * d as f64).sqrt() + (1.0 / delta).ln().sqrt()))
}

/// Does `N(0, sigma2 I)` satisfy
/// `P[|x| <= c/(2 sqrt(eta)) (sqrt(d) + sqrt(ln(T/delta)))] >= 1 - delta/(4(T+1))`
/// for every `delta` in `(0, 1]`?
///
/// With `k = c / (2 sqrt(eta sigma2))` and the tail `P[|z| >= sqrt(d) + x] <= exp(-x^2/2)`
/// it suffices that `(k-1) sqrt(d) + k sqrt(u) >= sqrt(2 (u + ln(4(T+1)/T)))` for
/// all `u >= ln T`. For `k >= sqrt(2)` the left side grows at least as fast as the
/// right, so `u = ln T` is the binding point; for `k < sqrt(2)` it fails as `u -> inf`.
pub fn starting_bound_gaussian(c: f64, eta: f64, sigma2: f64, d: usize, steps: u64) -> bool {
    if steps == 0 {
        return true;
    }
    let k = c / (2.0 * (eta * sigma2).sqrt());
    if k < std::f64::consts::SQRT_2 {
        return false;
    }
    let t = steps as f64;
    let u = t.ln();
    let a = (4.0 * (t + 1.0) / t).ln();
    (k - 1.0) * (d as f64).sqrt() + k * u.sqrt() >= (2.0 * (u + a)).sqrt()
}

/// Does `x0 ~ N(0, I/L)`, `v0 ~ N(0, mu I)` satisfy
/// `P[mu f(x0) + |v0|^2/2 <= v_max(delta)^2 / 2] >= 1 - delta/4` for every `delta`
/// in `(0, 1)`, for any canonical `f` (minimum 0 at the origin, `L`-smooth)?
///
/// `mu f(x0) + |v0|^2/2 <= mu chi2_{2d} / 2`, and Laurent-Massart gives
/// `P[chi2_k >= k + 2 sqrt(k x) + 2x] <= exp(-x)`. With `x = u + ln 4`,
/// `u = ln(1/delta)`, matching the expansion of `c^2 gamma (sqrt(tau d) + sqrt(u))^2`
/// term by term is sufficient.
pub fn starting_bound_underdamped(c: f64, gamma: f64, tau: f64, d: usize) -> bool {
    let k = 2.0 * d as f64;
    let ln4 = 4f64.ln();
    let s = c * c * gamma;
    let constant = s * tau * d as f64 >= k + 2.0 * (k * ln4).sqrt() + 2.0 * ln4;
    let root = 2.0 * s * (tau * d as f64).sqrt() >= 2.0 * k.sqrt();
    let linear = s >= 2.0;
    constant && root && linear
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const E_INV: f64 = 0.36787944117144233;

    #[test]
    fn substitution_examples() {
        assert!((radius_bound_sc(2.0, 1.0, 1, 1, E_INV, 0.01).unwrap() - 0.4).abs() < 1e-12);
        assert!((radius_bound_lip(2.0, 0.0, 1, 1, E_INV, 0.25).unwrap() - 2.0).abs() < 1e-12);
        let v = vmax_underdamped(2.0, 2.0, 1.0, 1.0, 1, E_INV).unwrap();
        assert!((v - 4.0 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn regime_guards() {
        assert!(radius_bound_sc(2.0, 3.0, 1, 10, 0.1, 0.6).is_err());
        assert!(radius_bound_lip(2.0, 1.0, 1, 10, 0.1, 1.5).is_err());
        assert!(vmax_underdamped(2.0, 1.5, 1.0, 1.0, 1, 0.1).is_err());
    }

    #[test]
    fn lipschitz_radius_limit_in_b() {
        let b = 1e9;
        let r = radius_bound_lip(2.0, b, 3, 100, 0.01, 0.09).unwrap();
        assert!((r / b - 2.0 * 0.3).abs() < 1e-6);
    }

    #[test]
    fn starting_bound_gaussian_scaled_default() {
        // N(0, I/L) with c = 2 and a small step easily clears the bound.
        assert!(starting_bound_gaussian(2.0, 1e-3, 0.25, 2, 1000));
        // k < sqrt(2) fails.
        assert!(!starting_bound_gaussian(2.0, 1.0, 1.0, 2, 10));
    }

    #[test]
    fn starting_bound_gaussian_against_exact_tail() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        // Whenever the sufficient condition passes, the exact chi-square tail
        // honours the requirement on a delta grid.
        for &(eta, d, t) in &[(0.1, 1usize, 10u64), (0.01, 3, 1000), (0.3, 2, 5)] {
            if !starting_bound_gaussian(2.0, eta, 1.0, d, t) {
                continue;
            }
            let chi = ChiSquared::new(d as f64).unwrap();
            for i in 0..60 {
                let delta = 10f64.powf(-(i as f64) / 4.0);
                let radius = 2.0 / (2.0 * f64::sqrt(eta)) * ((d as f64).sqrt() + (t as f64 / delta).ln().sqrt());
                let miss = chi.sf(radius * radius);
                assert!(miss <= delta / (4.0 * (t as f64 + 1.0)));
            }
        }
    }

    #[test]
    fn starting_bound_underdamped_against_exact_tail() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let (c, gamma, tau, d) = (2.0, 2.0, 2.0, 3usize);
        assert!(starting_bound_underdamped(c, gamma, tau, d));
        let chi = ChiSquared::new(2.0 * d as f64).unwrap();
        for i in 1..80 {
            let delta = 10f64.powf(-(i as f64) / 5.0);
            let v = vmax_underdamped(c, gamma, 1.0, tau, d, delta).unwrap();
            assert!(chi.sf(v * v) <= delta / 4.0);
        }
        assert!(!starting_bound_underdamped(c, gamma, 0.01, d));
    }

    proptest! {
        #[test]
        fn radius_monotone(d in 1usize..50, delta in 1e-6f64..0.5, eta in 1e-6f64..0.5) {
            let r = radius_bound_sc(2.0, 2.0, d, 100, delta, eta).unwrap();
            prop_assert!(radius_bound_sc(2.0, 2.0, d, 100, delta / 2.0, eta).unwrap() >= r);
            prop_assert!(radius_bound_sc(2.0, 2.0, d + 1, 100, delta, eta).unwrap() >= r);
            let v = vmax_underdamped(2.0, 2.0, 1.0, 1.0, d, delta).unwrap();
            prop_assert!(vmax_underdamped(2.0, 2.0, 1.0, 1.0, d, delta / 2.0).unwrap() >= v);
            let v4 = vmax_underdamped(2.0, 2.0, 1.0, 4.0, d, 1.0 - 1e-15).unwrap();
            let v1 = vmax_underdamped(2.0, 2.0, 1.0, 1.0, d, 1.0 - 1e-15).unwrap();
            prop_assert!((v4 / v1 - 2.0).abs() < 1e-6);
        }
    }
}
