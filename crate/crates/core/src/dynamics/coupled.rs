use rand::Rng;
use serde::{Deserialize, Serialize};

use super::fill_normal;
use crate::error::{invalid, Error, Result};
use crate::potentials::{dist, Potential};

/// Endpoints and path statistics of an overdamped chain at step `eta`
/// coupled to one at step `eta/k` through shared Brownian increments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoupledOutcome {
    pub coarse_end: Vec<f64>,
    pub fine_end: Vec<f64>,
    /// Largest `|x_s - x_{floor(s/eta) eta}|` over sub-step times `s`.
    pub coarse_max_displacement: f64,
    pub fine_max_displacement: f64,
    /// Largest `|grad f(x_{j eta/k}) - grad f(x_{floor(j/k) eta})|` along the fine path.
    pub max_gradient_gap: f64,
    pub coarse_bottom: bool,
    pub fine_bottom: bool,
}

impl CoupledOutcome {
    pub fn any_bottom(&self) -> bool {
        self.coarse_bottom || self.fine_bottom
    }
}

/// Runs `steps` coarse steps of size `eta` and `steps * k` fine steps of
/// size `eta/k` from `x0`. Each fine increment is `N(0, 2 eta/k I)`; the
/// coarse chain's increment over a step is the sum of its `k` fine ones.
///
/// With a guard `r`, a chain whose within-step displacement exceeds `r`
/// freezes in the bottom state while the other keeps running.
pub fn coupled_refinement_run<R: Rng + ?Sized>(
    p: &dyn Potential,
    x0: &[f64],
    eta: f64,
    k: usize,
    steps: usize,
    guard: Option<f64>,
    rng: &mut R,
) -> Result<CoupledOutcome> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(invalid(format!("step size must be positive, got {eta}")));
    }
    if k == 0 {
        return Err(invalid("refinement factor k must be at least 1"));
    }
    let d = p.dim();
    if x0.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: x0.len(),
        });
    }
    let h = eta / k as f64;
    let sd = (2.0 * h).sqrt();
    let exceeds = |disp: f64| guard.is_some_and(|r| !(disp <= r));

    let mut xc = x0.to_vec();
    let mut xf = x0.to_vec();
    let mut gc = vec![0.0; d];
    let mut gf = vec![0.0; d];
    let mut gf0 = vec![0.0; d];
    let mut xi = vec![0.0; d];
    let mut sum = vec![0.0; d];
    let mut start_f = vec![0.0; d];
    let mut probe = vec![0.0; d];
    let mut out = CoupledOutcome {
        coarse_end: Vec::new(),
        fine_end: Vec::new(),
        coarse_max_displacement: 0.0,
        fine_max_displacement: 0.0,
        max_gradient_gap: 0.0,
        coarse_bottom: false,
        fine_bottom: false,
    };

    for step in 0..steps {
        if !out.coarse_bottom {
            p.gradient(&xc, &mut gc);
            if !gc.iter().all(|g| g.is_finite()) {
                return Err(Error::NonFiniteGradient { step });
            }
        }
        start_f.copy_from_slice(&xf);
        sum.fill(0.0);
        for j in 0..k {
            fill_normal(rng, &mut xi, sd);
            for (s, n) in sum.iter_mut().zip(&xi) {
                *s += n;
            }
            if !out.fine_bottom {
                p.gradient(&xf, &mut gf);
                if !gf.iter().all(|g| g.is_finite()) {
                    return Err(Error::NonFiniteGradient { step });
                }
                if j == 0 {
                    gf0.copy_from_slice(&gf);
                }
                out.max_gradient_gap = out.max_gradient_gap.max(dist(&gf, &gf0));
                for ((x, g), n) in xf.iter_mut().zip(&gf).zip(&xi) {
                    *x = *x - h * g + n;
                }
                let disp = dist(&xf, &start_f);
                out.fine_max_displacement = out.fine_max_displacement.max(disp);
                if exceeds(disp) {
                    out.fine_bottom = true;
                }
            }
            if !out.coarse_bottom {
                let s = (j + 1) as f64 * h;
                for (((q, x), g), n) in probe.iter_mut().zip(&xc).zip(&gc).zip(&sum) {
                    *q = x - s * g + n;
                }
                let disp = dist(&probe, &xc);
                out.coarse_max_displacement = out.coarse_max_displacement.max(disp);
                if exceeds(disp) {
                    out.coarse_bottom = true;
                }
            }
        }
        if !out.coarse_bottom {
            for ((x, g), n) in xc.iter_mut().zip(&gc).zip(&sum) {
                *x = *x - eta * g + n;
            }
        }
    }
    out.coarse_end = xc;
    out.fine_end = xf;
    Ok(out)
}
