use std::sync::Arc;

use super::{find_minimizer, Curvature, DiagonalQuadratic, Potential, MINIMIZER_TOL};
use crate::error::{Error, Result};

/// `g(y) = f(y / sqrt(m) + x*) - f(x*)`: strong convexity 1, smoothness
/// `L/m`, minimizer at the origin and `g(0) = 0`.
///
/// Samples of `g` map back to samples of `f` through [`Self::from_canonical`].
#[derive(Clone, Debug)]
pub struct CanonicalPotential {
    inner: Arc<dyn Potential>,
    shift: Vec<f64>,
    scale: f64,
    offset: f64,
    curvature: Curvature,
}

/// Canonicalizes with the default minimizer tolerance ([`MINIMIZER_TOL`] in canonical units).
pub fn canonicalize(p: Arc<dyn Potential>) -> Result<CanonicalPotential> {
    canonicalize_with_tol(p, MINIMIZER_TOL)
}

pub fn canonicalize_with_tol(p: Arc<dyn Potential>, tol: f64) -> Result<CanonicalPotential> {
    let c = p.curvature();
    if c.strong_convexity <= 0.0 {
        return Err(Error::Potential(
            "canonical form needs m > 0; use the Lipschitz path for m = 0".into(),
        ));
    }
    let scale = c.strong_convexity.sqrt();
    // |grad g(0)| = |grad f(x*)| / sqrt(m)
    let shift = match p.minimizer() {
        Some(x) => x,
        None => find_minimizer(p.as_ref(), tol * scale)?,
    };
    let offset = p.value(&shift);
    let curvature = Curvature {
        strong_convexity: 1.0,
        smoothness: c.smoothness / c.strong_convexity,
        lipschitz: c.lipschitz.map(|b| b / scale),
    };
    Ok(CanonicalPotential {
        inner: p,
        shift,
        scale,
        offset,
        curvature,
    })
}

impl CanonicalPotential {
    pub fn inner(&self) -> &Arc<dyn Potential> {
        &self.inner
    }

    /// The original minimizer `x*`.
    pub fn shift(&self) -> &[f64] {
        &self.shift
    }

    /// `sqrt(m)` of the original potential.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// `y = sqrt(m) (x - x*)`.
    pub fn to_canonical(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.shift)
            .map(|(xi, si)| self.scale * (xi - si))
            .collect()
    }

    /// `x = y / sqrt(m) + x*`.
    pub fn from_canonical(&self, y: &[f64]) -> Vec<f64> {
        y.iter()
            .zip(&self.shift)
            .map(|(yi, si)| yi / self.scale + si)
            .collect()
    }
}

impl Potential for CanonicalPotential {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn value(&self, y: &[f64]) -> f64 {
        self.inner.value(&self.from_canonical(y)) - self.offset
    }

    fn gradient(&self, y: &[f64], out: &mut [f64]) {
        let x = self.from_canonical(y);
        self.inner.gradient(&x, out);
        for o in out.iter_mut() {
            *o /= self.scale;
        }
    }

    fn curvature(&self) -> Curvature {
        self.curvature
    }

    fn minimizer(&self) -> Option<Vec<f64>> {
        Some(vec![0.0; self.dim()])
    }

    // grad g(y) = (a / m) * (y - sqrt(m) (c - x*))
    fn diagonal_quadratic(&self) -> Option<DiagonalQuadratic> {
        let q = self.inner.diagonal_quadratic()?;
        let m = self.scale * self.scale;
        Some(DiagonalQuadratic {
            precision: q.precision.iter().map(|a| a / m).collect(),
            center: q.center.iter().zip(&self.shift).map(|(c, s)| self.scale * (c - s)).collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::{norm, GaussianPotential, HuberLipschitz};

    #[test]
    fn isotropic_quadratic_maps_to_standard() {
        // f(x) = 2x^2: m = L = 4
        let f: Arc<dyn Potential> = Arc::new(GaussianPotential::isotropic(1, 4.0).unwrap());
        let g = canonicalize(f).unwrap();
        assert_eq!(g.curvature().strong_convexity, 1.0);
        assert_eq!(g.curvature().smoothness, 1.0);
        assert_eq!(g.scale(), 2.0);
        for y in [-2.0, 0.3, 1.7] {
            assert!((g.value(&[y]) - 0.5 * y * y).abs() < 1e-14);
        }
    }

    #[test]
    fn pure_translation() {
        let f: Arc<dyn Potential> = Arc::new(
            GaussianPotential::isotropic(1, 1.0)
                .unwrap()
                .with_mean(vec![3.0])
                .unwrap(),
        );
        let g = canonicalize(f).unwrap();
        assert_eq!(g.shift(), &[3.0]);
        assert_eq!(g.scale(), 1.0);
        assert!((g.value(&[1.5]) - 0.5 * 1.5 * 1.5).abs() < 1e-14);
        assert!(norm(&g.grad(&[0.0])) <= 1e-14);
    }

    #[test]
    fn zero_strong_convexity_is_rejected() {
        let f: Arc<dyn Potential> = Arc::new(HuberLipschitz::new(1, 1.0, 1.0).unwrap());
        assert!(canonicalize(f).is_err());
    }

    #[test]
    fn round_trip_is_identity() {
        let f: Arc<dyn Potential> = Arc::new(
            GaussianPotential::diagonal(&[2.0, 5.0])
                .unwrap()
                .with_mean(vec![-1.0, 0.25])
                .unwrap(),
        );
        let g = canonicalize(f).unwrap();
        let x = [0.7, -3.2];
        let back = g.from_canonical(&g.to_canonical(&x));
        for (a, b) in back.iter().zip(&x) {
            assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0));
        }
    }
}
