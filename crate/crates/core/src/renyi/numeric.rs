use super::{check_order, DivergenceBound, Direction};
use crate::error::{invalid, Error, Result};

/// Minimum probability mass both densities must place on a grid.
pub const COVERAGE_TOL: f64 = 1e-12;

/// Integration domain for [`grid_divergence`].
#[derive(Clone, Debug, PartialEq)]
pub enum Grid {
    /// `n` equal intervals on `[lo, hi]` (trapezoid rule).
    Uniform1d { lo: f64, hi: f64, n: usize },
    /// Tensor product of two uniform 1-D grids.
    Uniform2d {
        x: (f64, f64, usize),
        y: (f64, f64, usize),
    },
    /// Counting measure on the listed points; densities are then masses.
    Atoms(Vec<Vec<f64>>),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridEstimate {
    pub bound: DivergenceBound,
    /// `|D(h) - D(2h)|`, zero for atoms.
    pub error: f64,
    pub mass_p: f64,
    pub mass_q: f64,
}

fn axis(lo: f64, hi: f64, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(lo.is_finite() && hi.is_finite() && hi > lo) || n < 2 {
        return Err(invalid(format!("bad grid axis [{lo}, {hi}] with {n} intervals")));
    }
    // Even interval count so the every-other-point subgrid is a grid too.
    let n = n + n % 2;
    let h = (hi - lo) / n as f64;
    let pts = (0..=n).map(|i| lo + h * i as f64).collect();
    let w = (0..=n)
        .map(|i| if i == 0 || i == n { h / 2.0 } else { h })
        .collect();
    Ok((pts, w))
}

fn coarse(w: &[f64]) -> Vec<f64> {
    // Trapezoid weights at step 2h on the even-indexed points, zero elsewhere.
    let n = w.len() - 1;
    let h = w[1];
    (0..=n)
        .map(|i| match i {
            _ if i % 2 == 1 => 0.0,
            0 => h,
            _ if i == n => h,
            _ => 2.0 * h,
        })
        .collect()
}

struct Sums {
    integral: f64,
    mass_p: f64,
    mass_q: f64,
}

fn accumulate(alpha: f64, p: f64, q: f64, w: f64, s: &mut Sums) -> Result<()> {
    if !(p >= 0.0 && q >= 0.0) || !p.is_finite() || !q.is_finite() {
        return Err(invalid(format!("densities must be finite and non-negative, got p={p}, q={q}")));
    }
    s.mass_p += w * p;
    s.mass_q += w * q;
    if p > 0.0 {
        if q == 0.0 {
            return Err(Error::InfiniteDivergence("p > 0 where q = 0".into()));
        }
        s.integral += w * (alpha * p.ln() + (1.0 - alpha) * q.ln()).exp();
    }
    Ok(())
}

fn finish(alpha: f64, integral: f64) -> f64 {
    (integral.ln() / (alpha - 1.0)).max(0.0)
}

/// Numeric `D_alpha(P || Q)` for densities `p`, `q` over `grid`.
///
/// Fails when either density puts less than `1 - COVERAGE_TOL` (minus the
/// refinement error of the mass itself) on the grid.
pub fn grid_divergence<P, Q>(alpha: f64, p: P, q: Q, grid: &Grid) -> Result<GridEstimate>
where
    P: Fn(&[f64]) -> f64,
    Q: Fn(&[f64]) -> f64,
{
    check_order(alpha)?;
    let new = || Sums {
        integral: 0.0,
        mass_p: 0.0,
        mass_q: 0.0,
    };
    let (fine, rough) = match grid {
        Grid::Atoms(points) => {
            let mut s = new();
            for x in points {
                accumulate(alpha, p(x), q(x), 1.0, &mut s)?;
            }
            let (mp, mq) = (s.mass_p, s.mass_q);
            check_coverage(mp, mq, 0.0, 0.0)?;
            return Ok(GridEstimate {
                bound: DivergenceBound::new(alpha, finish(alpha, s.integral), Direction::Forward)?,
                error: 0.0,
                mass_p: mp,
                mass_q: mq,
            });
        }
        Grid::Uniform1d { lo, hi, n } => {
            let (xs, w) = axis(*lo, *hi, *n)?;
            let wc = coarse(&w);
            let (mut f, mut r) = (new(), new());
            for (i, x) in xs.iter().enumerate() {
                let pt = [*x];
                let (pv, qv) = (p(&pt), q(&pt));
                accumulate(alpha, pv, qv, w[i], &mut f)?;
                accumulate(alpha, pv, qv, wc[i], &mut r)?;
            }
            (f, r)
        }
        Grid::Uniform2d { x, y } => {
            let (xs, wx) = axis(x.0, x.1, x.2)?;
            let (ys, wy) = axis(y.0, y.1, y.2)?;
            let (cx, cy) = (coarse(&wx), coarse(&wy));
            let (mut f, mut r) = (new(), new());
            for (i, a) in xs.iter().enumerate() {
                for (j, b) in ys.iter().enumerate() {
                    let pt = [*a, *b];
                    let (pv, qv) = (p(&pt), q(&pt));
                    accumulate(alpha, pv, qv, wx[i] * wy[j], &mut f)?;
                    accumulate(alpha, pv, qv, cx[i] * cy[j], &mut r)?;
                }
            }
            (f, r)
        }
    };
    check_coverage(
        fine.mass_p,
        fine.mass_q,
        (fine.mass_p - rough.mass_p).abs(),
        (fine.mass_q - rough.mass_q).abs(),
    )?;
    let d_fine = finish(alpha, fine.integral);
    let d_rough = finish(alpha, rough.integral);
    Ok(GridEstimate {
        bound: DivergenceBound::new(alpha, d_fine, Direction::Forward)?,
        error: (d_fine - d_rough).abs(),
        mass_p: fine.mass_p,
        mass_q: fine.mass_q,
    })
}

fn check_coverage(mp: f64, mq: f64, ep: f64, eq: f64) -> Result<()> {
    for (name, m, e) in [("p", mp, ep), ("q", mq, eq)] {
        if m + e < 1.0 - COVERAGE_TOL {
            return Err(Error::Oracle(format!(
                "grid covers only {m} of the mass of {name} (refinement error {e:e})"
            )));
        }
    }
    Ok(())
}

/// Exact `D_alpha(P || Q)` between probability vectors.
pub fn discrete_divergence(alpha: f64, p: &[f64], q: &[f64]) -> Result<f64> {
    check_order(alpha)?;
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            got: q.len(),
        });
    }
    let mut s = Sums {
        integral: 0.0,
        mass_p: 0.0,
        mass_q: 0.0,
    };
    for (&a, &b) in p.iter().zip(q) {
        accumulate(alpha, a, b, 1.0, &mut s)?;
    }
    for m in [s.mass_p, s.mass_q] {
        if (m - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("probability vector sums to {m}")));
        }
    }
    Ok(finish(alpha, s.integral))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::renyi::gaussian1d_divergence;
    use std::f64::consts::PI;

    fn normal(mu: f64, var: f64) -> impl Fn(&[f64]) -> f64 {
        move |x: &[f64]| (-(x[0] - mu).powi(2) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
    }

    #[test]
    fn identical_densities_give_zero() {
        let g = Grid::Uniform1d {
            lo: -12.0,
            hi: 12.0,
            n: 2000,
        };
        let e = grid_divergence(3.0, normal(0.2, 1.3), normal(0.2, 1.3), &g).unwrap();
        assert!(e.bound.value < 1e-10);
    }

    #[test]
    fn matches_closed_form_and_refinement_error_is_honest() {
        let exact = gaussian1d_divergence(2.0, 0.0, 1.0, 0.0, 2.0 / 1.9).unwrap().value;
        let coarse = Grid::Uniform1d {
            lo: -14.0,
            hi: 14.0,
            n: 200,
        };
        let fine = Grid::Uniform1d {
            lo: -14.0,
            hi: 14.0,
            n: 400,
        };
        let a = grid_divergence(2.0, normal(0.0, 1.0), normal(0.0, 2.0 / 1.9), &coarse).unwrap();
        let b = grid_divergence(2.0, normal(0.0, 1.0), normal(0.0, 2.0 / 1.9), &fine).unwrap();
        assert!((b.bound.value - exact).abs() < 1e-8);
        assert!((a.bound.value - b.bound.value).abs() <= a.error.max(1e-15));
    }

    #[test]
    fn narrow_grid_fails_coverage() {
        let g = Grid::Uniform1d { lo: -2.0, hi: 2.0, n: 400 };
        assert!(matches!(
            grid_divergence(2.0, normal(0.0, 1.0), normal(0.0, 1.0), &g),
            Err(Error::Oracle(_))
        ));
    }

    #[test]
    fn atoms_equal_exact_sum() {
        let pts: Vec<Vec<f64>> = (0..3).map(|i| vec![i as f64]).collect();
        let p = [0.2, 0.5, 0.3];
        let q = [0.4, 0.4, 0.2];
        let e = grid_divergence(2.5, |x| p[x[0] as usize], |x| q[x[0] as usize], &Grid::Atoms(pts)).unwrap();
        let direct = discrete_divergence(2.5, &p, &q).unwrap();
        let by_hand = (p.iter().zip(&q).map(|(a, b)| a.powf(2.5) * b.powf(-1.5)).sum::<f64>()).ln() / 1.5;
        assert!((e.bound.value - direct).abs() < 1e-12);
        assert!((direct - by_hand).abs() < 1e-12);
    }

    #[test]
    fn negative_density_rejected() {
        let g = Grid::Atoms(vec![vec![0.0]]);
        assert!(grid_divergence(2.0, |_| -1.0, |_| 1.0, &g).is_err());
    }

    #[test]
    fn two_dimensional_product_of_gaussians() {
        let p = |x: &[f64]| normal(0.0, 1.0)(&x[..1]) * normal(0.0, 1.0)(&x[1..]);
        let q = |x: &[f64]| normal(1.0, 1.0)(&x[..1]) * normal(-1.0, 1.0)(&x[1..]);
        let g = Grid::Uniform2d {
            x: (-12.0, 12.0, 240),
            y: (-12.0, 12.0, 240),
        };
        let e = grid_divergence(2.0, p, q, &g).unwrap();
        // alpha |shift|^2 / 2 with |shift|^2 = 2
        assert!((e.bound.value - 2.0).abs() < 1e-8);
    }
}
