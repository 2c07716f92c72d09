use nalgebra::{DMatrix, DVector};

use super::{norm, Curvature, DiagonalQuadratic, Potential};
use crate::error::{Error, Result};

/// `f(x) = (x - mean)^T P (x - mean) / 2` for a positive-definite precision `P`.
#[derive(Clone, Debug)]
pub struct GaussianPotential {
    precision: DMatrix<f64>,
    mean: DVector<f64>,
    curvature: Curvature,
}

impl GaussianPotential {
    pub fn new(precision: DMatrix<f64>) -> Result<Self> {
        let d = precision.nrows();
        if d == 0 || precision.ncols() != d {
            return Err(Error::Potential("precision matrix must be square and non-empty".into()));
        }
        let asym = (&precision - precision.transpose()).abs().max();
        if asym > 1e-12 * precision.abs().max().max(1.0) {
            return Err(Error::Potential("precision matrix must be symmetric".into()));
        }
        if precision.clone().cholesky().is_none() {
            return Err(Error::Potential("precision matrix is not positive definite".into()));
        }
        let eig = precision.clone().symmetric_eigen();
        let m = eig.eigenvalues.min();
        let l = eig.eigenvalues.max();
        if m <= 0.0 {
            return Err(Error::Potential("precision matrix is not positive definite".into()));
        }
        Ok(Self {
            mean: DVector::zeros(d),
            precision,
            curvature: Curvature::new(m, l)?,
        })
    }

    pub fn isotropic(dim: usize, precision: f64) -> Result<Self> {
        if !(precision > 0.0) {
            return Err(Error::Potential(format!("precision must be positive, got {precision}")));
        }
        Self::new(DMatrix::identity(dim, dim) * precision)
    }

    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn with_mean(mut self, mean: Vec<f64>) -> Result<Self> {
        if mean.len() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                got: mean.len(),
            });
        }
        self.mean = DVector::from_vec(mean);
        Ok(self)
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    pub fn mean(&self) -> &[f64] {
        self.mean.as_slice()
    }
}

impl Potential for GaussianPotential {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let r: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        let mut acc = 0.0;
        for (j, rj) in r.iter().enumerate() {
            for (i, ri) in r.iter().enumerate() {
                acc += ri * self.precision[(i, j)] * rj;
            }
        }
        0.5 * acc
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (j, (xj, mj)) in x.iter().zip(self.mean.iter()).enumerate() {
            let rj = xj - mj;
            for (i, o) in out.iter_mut().enumerate() {
                *o += self.precision[(i, j)] * rj;
            }
        }
    }

    fn curvature(&self) -> Curvature {
        self.curvature
    }

    fn minimizer(&self) -> Option<Vec<f64>> {
        Some(self.mean.as_slice().to_vec())
    }

    fn diagonal_quadratic(&self) -> Option<DiagonalQuadratic> {
        let d = self.dim();
        let off_diagonal = (0..d).any(|i| (0..d).any(|j| i != j && self.precision[(i, j)] != 0.0));
        if off_diagonal {
            return None;
        }
        Some(DiagonalQuadratic {
            precision: (0..d).map(|i| self.precision[(i, i)]).collect(),
            center: self.mean.as_slice().to_vec(),
        })
    }
}

/// `f(theta) = beta * sum_i |theta - z_i|^2 / 2 + lambda |theta|^2 / 2`.
///
/// The Hessian is `(lambda + beta n) I`, so `m = L = lambda + beta n`.
#[derive(Clone, Debug)]
pub struct QuadraticMeanPosterior {
    dim: usize,
    n: usize,
    sum: Vec<f64>,
    sum_sq: f64,
    beta: f64,
    lambda: f64,
}

impl QuadraticMeanPosterior {
    pub fn new(dim: usize, data: &[Vec<f64>], beta: f64, lambda: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Potential("dimension must be positive".into()));
        }
        if !(beta > 0.0 && lambda > 0.0) {
            return Err(Error::Potential(format!(
                "temperature and prior strength must be positive (beta={beta}, lambda={lambda})"
            )));
        }
        let mut sum = vec![0.0; dim];
        let mut sum_sq = 0.0;
        for row in data {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            for (s, v) in sum.iter_mut().zip(row) {
                *s += v;
            }
            sum_sq += row.iter().map(|v| v * v).sum::<f64>();
        }
        Ok(Self {
            dim,
            n: data.len(),
            sum,
            sum_sq,
            beta,
            lambda,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn posterior_precision(&self) -> f64 {
        self.lambda + self.beta * self.n as f64
    }

    pub fn posterior_mean(&self) -> Vec<f64> {
        let prec = self.posterior_precision();
        self.sum.iter().map(|s| self.beta * s / prec).collect()
    }
}

impl Potential for QuadraticMeanPosterior {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        // sum_i |x - z_i|^2 = n|x|^2 - 2 x.sum + sum_i |z_i|^2
        let xx: f64 = x.iter().map(|v| v * v).sum();
        let xs: f64 = x.iter().zip(&self.sum).map(|(a, b)| a * b).sum();
        let data_term = self.n as f64 * xx - 2.0 * xs + self.sum_sq;
        0.5 * self.beta * data_term + 0.5 * self.lambda * xx
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let prec = self.posterior_precision();
        for ((o, xi), si) in out.iter_mut().zip(x).zip(&self.sum) {
            *o = prec * xi - self.beta * si;
        }
    }

    fn curvature(&self) -> Curvature {
        let prec = self.posterior_precision();
        Curvature {
            strong_convexity: prec,
            smoothness: prec,
            lipschitz: None,
        }
    }

    fn minimizer(&self) -> Option<Vec<f64>> {
        Some(self.posterior_mean())
    }

    fn diagonal_quadratic(&self) -> Option<DiagonalQuadratic> {
        Some(DiagonalQuadratic {
            precision: vec![self.posterior_precision(); self.dim],
            center: self.posterior_mean(),
        })
    }
}

/// Logistic-regression posterior with a Gaussian prior:
/// `f(theta) = beta * sum_i ln(1 + exp(-y_i theta.z_i)) + lambda |theta|^2 / 2`.
#[derive(Clone, Debug)]
pub struct LogisticPosterior {
    dim: usize,
    features: Vec<Vec<f64>>,
    labels: Vec<f64>,
    beta: f64,
    lambda: f64,
    smoothness: f64,
}

fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

impl LogisticPosterior {
    /// Labels must be `-1` or `+1`. Smoothness is taken from the largest
    /// feature norm in the data: `L = lambda + beta n max|z|^2 / 4`.
    pub fn new(
        dim: usize,
        features: Vec<Vec<f64>>,
        labels: Vec<f64>,
        beta: f64,
        lambda: f64,
    ) -> Result<Self> {
        let max_sq = features
            .iter()
            .map(|z| z.iter().map(|v| v * v).sum::<f64>())
            .fold(0.0, f64::max);
        Self::with_norm_bound(dim, features, labels, beta, lambda, max_sq.sqrt())
    }

    /// Smoothness from a declared feature-norm bound `R`: `L = lambda + beta n R^2 / 4`.
    /// Records with larger norm are rejected.
    pub fn with_norm_bound(
        dim: usize,
        features: Vec<Vec<f64>>,
        labels: Vec<f64>,
        beta: f64,
        lambda: f64,
        norm_bound: f64,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Potential("dimension must be positive".into()));
        }
        if !(beta > 0.0 && lambda > 0.0) {
            return Err(Error::Potential(format!(
                "temperature and prior strength must be positive (beta={beta}, lambda={lambda})"
            )));
        }
        if features.len() != labels.len() {
            return Err(Error::Potential(format!(
                "{} feature rows but {} labels",
                features.len(),
                labels.len()
            )));
        }
        for (z, y) in features.iter().zip(&labels) {
            if z.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: z.len(),
                });
            }
            if *y != 1.0 && *y != -1.0 {
                return Err(Error::Potential(format!("labels must be -1 or +1, got {y}")));
            }
            if norm(z) > norm_bound * (1.0 + 1e-12) {
                return Err(Error::Potential(format!(
                    "record norm {} exceeds declared bound {norm_bound}",
                    norm(z)
                )));
            }
        }
        let n = features.len() as f64;
        let smoothness = lambda + beta * n * norm_bound * norm_bound / 4.0;
        Ok(Self {
            dim,
            features,
            labels,
            beta,
            lambda,
            smoothness,
        })
    }

    fn dot(z: &[f64], x: &[f64]) -> f64 {
        z.iter().zip(x).map(|(a, b)| a * b).sum()
    }
}

impl Potential for LogisticPosterior {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        let data: f64 = self
            .features
            .iter()
            .zip(&self.labels)
            .map(|(z, y)| softplus(-y * Self::dot(z, x)))
            .sum();
        self.beta * data + 0.5 * self.lambda * x.iter().map(|v| v * v).sum::<f64>()
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        for (o, xi) in out.iter_mut().zip(x) {
            *o = self.lambda * xi;
        }
        for (z, y) in self.features.iter().zip(&self.labels) {
            let w = -y * sigmoid(-y * Self::dot(z, x)) * self.beta;
            for (o, zi) in out.iter_mut().zip(z) {
                *o += w * zi;
            }
        }
    }

    fn curvature(&self) -> Curvature {
        Curvature {
            strong_convexity: self.lambda,
            smoothness: self.smoothness,
            lipschitz: None,
        }
    }
}

/// Huber-type potential: `L|x|^2/2` inside radius `B/L`, `B|x| - B^2/(2L)` outside.
///
/// Gradient norm is bounded by `B` and the gradient is `L`-Lipschitz;
/// the potential is convex but not strongly convex (`m = 0`).
#[derive(Clone, Debug)]
pub struct HuberLipschitz {
    dim: usize,
    lipschitz: f64,
    smoothness: f64,
}

impl HuberLipschitz {
    pub fn new(dim: usize, lipschitz: f64, smoothness: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Potential("dimension must be positive".into()));
        }
        if !(lipschitz > 0.0 && smoothness > 0.0) {
            return Err(Error::Potential(format!(
                "Huber constants must be positive (B={lipschitz}, L={smoothness})"
            )));
        }
        Ok(Self {
            dim,
            lipschitz,
            smoothness,
        })
    }

    fn knee(&self) -> f64 {
        self.lipschitz / self.smoothness
    }
}

impl Potential for HuberLipschitz {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        let r = norm(x);
        if r <= self.knee() {
            0.5 * self.smoothness * r * r
        } else {
            self.lipschitz * r - 0.5 * self.lipschitz * self.knee()
        }
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let r = norm(x);
        let scale = if r <= self.knee() {
            self.smoothness
        } else {
            self.lipschitz / r
        };
        for (o, xi) in out.iter_mut().zip(x) {
            *o = scale * xi;
        }
    }

    fn curvature(&self) -> Curvature {
        Curvature {
            strong_convexity: 0.0,
            smoothness: self.smoothness,
            lipschitz: Some(self.lipschitz),
        }
    }

    fn minimizer(&self) -> Option<Vec<f64>> {
        Some(vec![0.0; self.dim])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_gaussian_constants() {
        let p = GaussianPotential::isotropic(3, 1.0).unwrap();
        let c = p.curvature();
        assert_eq!((c.strong_convexity, c.smoothness), (1.0, 1.0));
        assert_eq!(p.minimizer().unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn gaussian_rejects_indefinite_precision() {
        let p = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(GaussianPotential::new(p).is_err());
    }

    #[test]
    fn mean_posterior_constants_and_minimizer() {
        let data: Vec<Vec<f64>> = (0..10)
            .map(|i| {
                let a = i as f64 * 0.6;
                vec![0.5 * a.cos(), 0.5 * a.sin()]
            })
            .collect();
        let p = QuadraticMeanPosterior::new(2, &data, 1.0, 1.0).unwrap();
        let c = p.curvature();
        assert_eq!((c.strong_convexity, c.smoothness), (1.0 + 10.0, 11.0));
        let sum: Vec<f64> = (0..2).map(|j| data.iter().map(|r| r[j]).sum()).collect();
        let xstar = p.minimizer().unwrap();
        for j in 0..2 {
            assert!((xstar[j] - sum[j] / 11.0).abs() < 1e-15);
        }
        assert!(norm(&p.grad(&xstar)) < 1e-12);
    }

    #[test]
    fn empty_mean_posterior_is_the_prior() {
        let p = QuadraticMeanPosterior::new(2, &[], 1.0, 3.0).unwrap();
        assert_eq!(p.curvature().smoothness, 3.0);
        assert_eq!(p.curvature().strong_convexity, 3.0);
        assert_eq!(p.minimizer().unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn huber_gradient_is_bounded_on_grid() {
        let p = HuberLipschitz::new(2, 2.0, 1.0).unwrap();
        let mut worst: f64 = 0.0;
        for i in -60..=60 {
            for j in -60..=60 {
                let x = [i as f64 * 0.25, j as f64 * 0.25];
                worst = worst.max(norm(&p.grad(&x)));
            }
        }
        assert!(worst <= 2.0 + 1e-12, "max gradient norm {worst}");
        assert!(worst > 1.99);
    }

    #[test]
    fn logistic_rejects_records_outside_norm_bound() {
        let err = LogisticPosterior::with_norm_bound(1, vec![vec![2.0]], vec![1.0], 1.0, 1.0, 1.0);
        assert!(err.is_err());
    }

    #[test]
    fn logistic_rejects_bad_labels() {
        assert!(LogisticPosterior::new(1, vec![vec![0.5]], vec![0.0], 1.0, 1.0).is_err());
    }

    #[test]
    fn softplus_is_stable() {
        assert!((softplus(1000.0) - 1000.0).abs() < 1e-12);
        assert!(softplus(-1000.0) >= 0.0);
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
    }
}
