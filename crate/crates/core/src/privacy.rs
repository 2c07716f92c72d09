//! Differentially private Gibbs-posterior sampling.
//!
//! The exact posterior's own privacy parameters are an input certificate.
//! The sampler's distance to that posterior is certified by a bidirectional
//! plan at `alpha = 1 + 2 ln(1/delta)/zeta` with per-direction budget
//! `zeta/2`, and the two are combined as `(3 zeta', 3 delta')` with
//! `zeta' = max(zeta_exact, zeta)` and `delta' = max(delta_exact, delta)`.
//! Plans depend only on `(n, p, norm bound, beta, lambda)`, never on record values.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dynamics::{final_states, sample_initial, stream_rng, SamplingMethod};
use crate::error::{invalid, Error, Result};
use crate::planner::{plan_sampling, Mode, PlanRequest, ProcessKind, SamplingPlan, DEFAULT_C};
use crate::potentials::{
    canonicalize, norm, Curvature, DiagonalQuadratic, LogisticPosterior, Potential, QuadraticMeanPosterior,
};
use crate::renyi::{dp_recipe, renyi_to_apxdp, DivergenceBound, Direction};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GibbsLoss {
    /// `|theta - z|^2 / 2`.
    SquaredDistance,
    /// `ln(1 + exp(-y theta.z))` with labels `y` in `{-1, +1}`.
    Logistic,
}

/// `f(theta) = beta sum_i loss(theta, z_i) + lambda |theta|^2 / 2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GibbsSpec {
    pub dim: usize,
    pub records: Vec<Vec<f64>>,
    /// Required for the logistic loss, one per record.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub labels: Vec<f64>,
    pub loss: GibbsLoss,
    pub beta: f64,
    pub lambda: f64,
    /// Every record satisfies `|z| <= norm_bound`.
    pub norm_bound: f64,
}

/// Everything the plan may depend on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GibbsMetadata {
    pub n: usize,
    pub dim: usize,
    pub loss: GibbsLoss,
    pub beta: f64,
    pub lambda: f64,
    pub norm_bound: f64,
    /// `lambda`.
    pub strong_convexity: f64,
    /// `lambda + beta n` (squared) or `lambda + beta n R^2 / 4` (logistic).
    pub smoothness: f64,
}

impl GibbsSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(invalid("dimension must be positive"));
        }
        if !(self.beta > 0.0 && self.beta.is_finite() && self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(invalid(format!(
                "temperature and prior strength must be positive (beta={}, lambda={})",
                self.beta, self.lambda
            )));
        }
        if !(self.norm_bound >= 0.0 && self.norm_bound.is_finite()) {
            return Err(invalid(format!("norm bound must be >= 0, got {}", self.norm_bound)));
        }
        for (i, z) in self.records.iter().enumerate() {
            if z.len() != self.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    got: z.len(),
                });
            }
            if norm(z) > self.norm_bound {
                return Err(invalid(format!(
                    "record {i} has norm {} above the declared bound {}",
                    norm(z),
                    self.norm_bound
                )));
            }
        }
        match self.loss {
            GibbsLoss::SquaredDistance if !self.labels.is_empty() => {
                Err(invalid("the squared-distance loss takes no labels"))
            }
            GibbsLoss::Logistic if self.labels.len() != self.records.len() => Err(invalid(format!(
                "{} records but {} labels",
                self.records.len(),
                self.labels.len()
            ))),
            _ => Ok(()),
        }
    }

    pub fn metadata(&self) -> Result<GibbsMetadata> {
        self.validate()?;
        let n = self.records.len() as f64;
        let smoothness = match self.loss {
            GibbsLoss::SquaredDistance => self.lambda + self.beta * n,
            GibbsLoss::Logistic => self.lambda + self.beta * n * self.norm_bound * self.norm_bound / 4.0,
        };
        Ok(GibbsMetadata {
            n: self.records.len(),
            dim: self.dim,
            loss: self.loss,
            beta: self.beta,
            lambda: self.lambda,
            norm_bound: self.norm_bound,
            strong_convexity: self.lambda,
            smoothness,
        })
    }
}

/// A Gibbs potential carrying the declared curvature bracket of its metadata.
#[derive(Clone, Debug)]
pub struct GibbsPotential {
    inner: Arc<dyn Potential>,
    metadata: GibbsMetadata,
}

impl GibbsPotential {
    pub fn metadata(&self) -> &GibbsMetadata {
        &self.metadata
    }
}

impl Potential for GibbsPotential {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.inner.value(x)
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        self.inner.gradient(x, out)
    }
    fn curvature(&self) -> Curvature {
        Curvature {
            strong_convexity: self.metadata.strong_convexity,
            smoothness: self.metadata.smoothness,
            lipschitz: None,
        }
    }
    fn minimizer(&self) -> Option<Vec<f64>> {
        self.inner.minimizer()
    }
    fn diagonal_quadratic(&self) -> Option<DiagonalQuadratic> {
        self.inner.diagonal_quadratic()
    }
}

pub fn build_gibbs_potential(spec: &GibbsSpec) -> Result<GibbsPotential> {
    let metadata = spec.metadata()?;
    let inner: Arc<dyn Potential> = match spec.loss {
        GibbsLoss::SquaredDistance => Arc::new(QuadraticMeanPosterior::new(
            spec.dim,
            &spec.records,
            spec.beta,
            spec.lambda,
        )?),
        GibbsLoss::Logistic => Arc::new(LogisticPosterior::with_norm_bound(
            spec.dim,
            spec.records.clone(),
            spec.labels.clone(),
            spec.beta,
            spec.lambda,
            spec.norm_bound,
        )?),
    };
    Ok(GibbsPotential { inner, metadata })
}

/// Privacy of exact sampling from the posterior, supplied by the caller.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum ExactCertificate {
    Approximate { zeta: f64, delta: f64 },
    /// `D_alpha <= value` between posteriors of adjacent datasets.
    Renyi { alpha: f64, value: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactMechanismParams {
    pub zeta: f64,
    pub delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub renyi: Option<DivergenceBound>,
}

impl ExactCertificate {
    /// `(zeta, delta)` form; a Renyi certificate is converted at `delta`.
    pub fn resolve(&self, delta: f64) -> Result<ExactMechanismParams> {
        match *self {
            ExactCertificate::Approximate { zeta, delta: d } => {
                if !(zeta >= 0.0 && zeta.is_finite() && (0.0..1.0).contains(&d)) {
                    return Err(invalid(format!("exact certificate needs zeta >= 0 and 0 <= delta < 1, got ({zeta}, {d})")));
                }
                Ok(ExactMechanismParams {
                    zeta,
                    delta: d,
                    renyi: None,
                })
            }
            ExactCertificate::Renyi { alpha, value } => {
                let b = DivergenceBound::new(alpha, value, Direction::Both)?;
                Ok(ExactMechanismParams {
                    zeta: renyi_to_apxdp(&b, delta)?,
                    delta,
                    renyi: Some(b),
                })
            }
        }
    }
}

/// Per-direction sampler-to-posterior divergence certified by the plan.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingDivergence {
    pub alpha: f64,
    /// Per-direction budget `zeta/2`.
    pub eps: f64,
    pub bound: DivergenceBound,
    /// `bound + ln(1/delta)/(alpha - 1)`, at most `zeta`.
    pub zeta: f64,
    pub delta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrivacyTotal {
    pub zeta: f64,
    pub delta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrivacyReport {
    pub exact_mechanism: ExactMechanismParams,
    pub sampling: SamplingDivergence,
    /// `(3 max(zeta_exact, zeta), 3 max(delta_exact, delta))`.
    pub total: PrivacyTotal,
}

impl PrivacyReport {
    /// Fails for one-sided or uncertified plans: a one-sided divergence bound does not imply privacy.
    pub fn new(plan: &SamplingPlan, exact: ExactMechanismParams, zeta: f64, delta: f64) -> Result<Self> {
        if plan.request.mode != Mode::Bidirectional {
            return Err(invalid(
                "privacy totals need a bidirectional plan; a one-sided bound does not certify differential privacy",
            ));
        }
        let bound = plan
            .combined
            .ok_or_else(|| invalid("the plan carries no combined certificate"))?;
        if !bound.direction.covers(Direction::Forward) || !bound.direction.covers(Direction::Reverse) {
            return Err(invalid("the plan's bound does not cover both directions"));
        }
        let sampling_zeta = renyi_to_apxdp(&bound, delta)?;
        if sampling_zeta > zeta * (1.0 + 1e-12) {
            return Err(invalid(format!(
                "certified sampling divergence converts to zeta = {sampling_zeta}, above the target {zeta}"
            )));
        }
        Ok(Self {
            exact_mechanism: exact,
            sampling: SamplingDivergence {
                alpha: bound.alpha,
                eps: plan.request.eps,
                bound,
                zeta: sampling_zeta,
                delta,
            },
            total: PrivacyTotal {
                zeta: 3.0 * exact.zeta.max(zeta),
                delta: 3.0 * exact.delta.max(delta),
            },
        })
    }
}

/// Target privacy and planner settings of a mechanism run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanismConfig {
    pub zeta: f64,
    pub delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact: Option<ExactCertificate>,
    #[serde(default = "bidirectional")]
    pub mode: Mode,
    #[serde(default = "default_c")]
    pub c: f64,
}

fn bidirectional() -> Mode {
    Mode::Bidirectional
}

fn default_c() -> f64 {
    DEFAULT_C
}

impl MechanismConfig {
    pub fn new(zeta: f64, delta: f64, exact: ExactCertificate) -> Self {
        Self {
            zeta,
            delta,
            exact: Some(exact),
            mode: Mode::Bidirectional,
            c: DEFAULT_C,
        }
    }
}

/// Plan request for the canonical form of a Gibbs potential: smoothness `L/m`.
pub fn mechanism_request(meta: &GibbsMetadata, cfg: &MechanismConfig) -> Result<PlanRequest> {
    let (alpha, eps) = dp_recipe(cfg.zeta, cfg.delta)?;
    Ok(PlanRequest {
        alpha,
        eps,
        smoothness: meta.smoothness / meta.strong_convexity,
        dim: meta.dim,
        process: ProcessKind::OverdampedSc,
        mode: cfg.mode,
        c: cfg.c,
        tau: None,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MechanismOutput {
    /// One independent mechanism release per row.
    pub samples: Vec<Vec<f64>>,
    pub report: PrivacyReport,
    pub plan: SamplingPlan,
    pub method: SamplingMethod,
}

/// `runs` independent releases; run `i` draws from stream `i` of `seed`.
pub fn private_posterior_sample(spec: &GibbsSpec, cfg: &MechanismConfig, runs: usize, seed: u64) -> Result<MechanismOutput> {
    if cfg.mode != Mode::Bidirectional {
        return Err(invalid(
            "posterior sampling with privacy accounting needs mode = bidirectional; one-sided bounds do not certify differential privacy",
        ));
    }
    let exact = cfg
        .exact
        .ok_or_else(|| invalid("an exact-mechanism privacy certificate is required"))?
        .resolve(cfg.delta)?;
    let potential = build_gibbs_potential(spec)?;
    let plan = plan_sampling(&mechanism_request(potential.metadata(), cfg)?)?;
    let report = PrivacyReport::new(&plan, exact, cfg.zeta, cfg.delta)?;
    let canonical = canonicalize(Arc::new(potential))?;
    let (states, method) = match plan.dynamics_config(seed) {
        Some(dc) => final_states(&canonical, &dc, &plan.initial, runs)?,
        None => {
            let states = (0..runs)
                .map(|i| sample_initial(&plan.initial, &canonical, &mut stream_rng(seed, i as u64)))
                .collect::<Result<Vec<_>>>()?;
            (states, SamplingMethod::ExactLaw)
        }
    };
    Ok(MechanismOutput {
        samples: states.iter().map(|s| canonical.from_canonical(&s.x)).collect(),
        report,
        plan,
        method,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub output: MechanismOutput,
    /// `beta sum_i z_i / (lambda + beta n)`.
    pub posterior_mean: Vec<f64>,
    /// `1 / (lambda + beta n)` per coordinate.
    pub posterior_variance: f64,
}

/// Private mean of records in the unit ball through the squared-distance Gibbs posterior.
pub fn mean_estimation_mechanism(
    dim: usize,
    data: &[Vec<f64>],
    beta: f64,
    lambda: f64,
    cfg: &MechanismConfig,
    runs: usize,
    seed: u64,
) -> Result<MeanEstimate> {
    let spec = GibbsSpec {
        dim,
        records: data.to_vec(),
        labels: Vec::new(),
        loss: GibbsLoss::SquaredDistance,
        beta,
        lambda,
        norm_bound: 1.0,
    };
    let output = private_posterior_sample(&spec, cfg, runs, seed)?;
    let precision = lambda + beta * data.len() as f64;
    let mut mean = vec![0.0; dim];
    for z in data {
        for (m, v) in mean.iter_mut().zip(z) {
            *m += beta * v / precision;
        }
    }
    Ok(MeanEstimate {
        output,
        posterior_mean: mean,
        posterior_variance: 1.0 / precision,
    })
}
