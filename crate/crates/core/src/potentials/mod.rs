//! Potentials `f` defining targets proportional to `exp(-f)`.
//!
//! A [`Potential`] exposes values, gradients and its curvature bracket
//! (`m`, `L`, optional Lipschitz constant `B`). Samplers only ever touch
//! gradients; values are used for Hamiltonian tracking and diagnostics.
//! Everything is in natural-log units and density normalizers are never
//! computed.

mod builtin;
mod canonical;
mod config;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use builtin::{GaussianPotential, HuberLipschitz, LogisticPosterior, QuadraticMeanPosterior};
pub use canonical::{canonicalize, canonicalize_with_tol, CanonicalPotential};
pub use config::{load_dataset, make_builtin, LabeledDataset, PotentialSpec};

/// Gradient-norm tolerance for declaring a point the minimizer, in canonical units.
pub const MINIMIZER_TOL: f64 = 1e-8;

/// Default iteration budget of [`find_minimizer`].
pub const DEFAULT_MAX_ITERATIONS: usize = 1_000_000;

/// Curvature metadata: `m I <= Hess f <= L I`, and `|grad f| <= B` when present.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Curvature {
    pub strong_convexity: f64,
    pub smoothness: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lipschitz: Option<f64>,
}

impl Curvature {
    pub fn new(strong_convexity: f64, smoothness: f64) -> Result<Self> {
        let c = Self {
            strong_convexity,
            smoothness,
            lipschitz: None,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn with_lipschitz(mut self, b: f64) -> Result<Self> {
        self.lipschitz = Some(b);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.strong_convexity;
        let l = self.smoothness;
        if !(m.is_finite() && l.is_finite()) || m < 0.0 || l <= 0.0 || l < m {
            return Err(Error::Potential(format!(
                "curvature bracket must satisfy 0 <= m <= L, L > 0 (m={m}, L={l})"
            )));
        }
        if let Some(b) = self.lipschitz {
            if !(b.is_finite() && b > 0.0) {
                return Err(Error::Potential(format!("Lipschitz bound must be positive, got {b}")));
            }
        }
        Ok(())
    }
}

/// `f(x) = sum_k a_k (x_k - c_k)^2 / 2` up to a constant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagonalQuadratic {
    pub precision: Vec<f64>,
    pub center: Vec<f64>,
}

/// A smooth scalar field on `R^d`.
///
/// Implementations must be pure: one value may be shared by concurrently
/// running chains.
pub trait Potential: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    /// Writes `grad f(x)` into `out` (length `dim`).
    fn gradient(&self, x: &[f64], out: &mut [f64]);

    fn curvature(&self) -> Curvature;

    /// Closed-form minimizer when one is known.
    fn minimizer(&self) -> Option<Vec<f64>> {
        None
    }

    /// `Some` when `grad f(x) = a * (x - c)` coordinatewise.
    fn diagonal_quadratic(&self) -> Option<DiagonalQuadratic> {
        None
    }

    fn grad(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        self.gradient(x, &mut g);
        g
    }
}

impl<P: Potential + ?Sized> Potential for std::sync::Arc<P> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        (**self).value(x)
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        (**self).gradient(x, out)
    }
    fn curvature(&self) -> Curvature {
        (**self).curvature()
    }
    fn minimizer(&self) -> Option<Vec<f64>> {
        (**self).minimizer()
    }
    fn diagonal_quadratic(&self) -> Option<DiagonalQuadratic> {
        (**self).diagonal_quadratic()
    }
}

impl<P: Potential + ?Sized> Potential for Box<P> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        (**self).value(x)
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        (**self).gradient(x, out)
    }
    fn curvature(&self) -> Curvature {
        (**self).curvature()
    }
    fn minimizer(&self) -> Option<Vec<f64>> {
        (**self).minimizer()
    }
    fn diagonal_quadratic(&self) -> Option<DiagonalQuadratic> {
        (**self).diagonal_quadratic()
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Gradient descent with step `2/(m+L)` until `|grad f(x)| <= tol`.
pub fn find_minimizer(p: &dyn Potential, tol: f64) -> Result<Vec<f64>> {
    find_minimizer_from(p, &vec![0.0; p.dim()], tol, DEFAULT_MAX_ITERATIONS)
}

pub fn find_minimizer_from(
    p: &dyn Potential,
    start: &[f64],
    tol: f64,
    max_iterations: usize,
) -> Result<Vec<f64>> {
    let c = p.curvature();
    if c.strong_convexity <= 0.0 {
        return Err(Error::Potential(
            "minimizer search requires strong convexity m > 0".into(),
        ));
    }
    if !(tol > 0.0) {
        return Err(crate::error::invalid(format!("tolerance must be positive, got {tol}")));
    }
    if start.len() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: start.len(),
        });
    }
    let step = 2.0 / (c.strong_convexity + c.smoothness);
    let mut x = start.to_vec();
    let mut g = vec![0.0; x.len()];
    let mut residual = f64::INFINITY;
    for _ in 0..=max_iterations {
        p.gradient(&x, &mut g);
        residual = norm(&g);
        if !residual.is_finite() {
            break;
        }
        if residual <= tol {
            return Ok(x);
        }
        for (xi, gi) in x.iter_mut().zip(&g) {
            *xi -= step * gi;
        }
    }
    Err(Error::NoConvergence {
        tol,
        iterations: max_iterations,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizer_of_shifted_quadratic() {
        let p = GaussianPotential::isotropic(2, 1.0)
            .unwrap()
            .with_mean(vec![1.0, 2.0])
            .unwrap();
        let x = find_minimizer(&p, 1e-8).unwrap();
        assert!(dist(&x, &[1.0, 2.0]) <= 1e-8);
        assert!(norm(&p.grad(&x)) <= 1e-8);
    }

    #[test]
    fn minimizer_of_standard_quadratic_is_origin() {
        let p = GaussianPotential::isotropic(1, 1.0).unwrap();
        let x = find_minimizer(&p, 1e-8).unwrap();
        assert!(x[0].abs() <= 1e-8);
    }

    #[test]
    fn inconsistent_metadata_does_not_converge() {
        // Declares L far below the true curvature, so the step overshoots.
        #[derive(Debug)]
        struct Liar;
        impl Potential for Liar {
            fn dim(&self) -> usize {
                1
            }
            fn value(&self, x: &[f64]) -> f64 {
                50.0 * x[0] * x[0]
            }
            fn gradient(&self, x: &[f64], out: &mut [f64]) {
                out[0] = 100.0 * (x[0] - 1.0);
            }
            fn curvature(&self) -> Curvature {
                Curvature::new(1.0, 1.0).unwrap()
            }
        }
        let err = find_minimizer_from(&Liar, &[0.0], 1e-8, 10_000).unwrap_err();
        assert!(matches!(err, Error::NoConvergence { .. }));
    }

    #[test]
    fn lipschitz_only_potential_has_no_minimizer_search() {
        let p = HuberLipschitz::new(1, 2.0, 1.0).unwrap();
        assert!(find_minimizer(&p, 1e-8).is_err());
    }

    #[test]
    fn curvature_bracket_is_validated() {
        assert!(Curvature::new(2.0, 1.0).is_err());
        assert!(Curvature::new(-1.0, 1.0).is_err());
        assert!(Curvature::new(1.0, 1.0).unwrap().with_lipschitz(0.0).is_err());
    }
}
