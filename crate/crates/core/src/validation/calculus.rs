use crate::error::{invalid, Result};
use crate::potentials::Potential;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Largest coordinate gap between the analytic gradient and central differences with step `h`.
pub fn finite_difference_error(p: &dyn Potential, x: &[f64], h: f64) -> Result<f64> {
    if x.len() != p.dim() || !(h > 0.0) {
        return Err(invalid("point dimension must match and h must be positive"));
    }
    let mut g = vec![0.0; x.len()];
    p.gradient(x, &mut g);
    let mut y = x.to_vec();
    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        y[i] = x[i] + h;
        let up = p.value(&y);
        y[i] = x[i] - h;
        let down = p.value(&y);
        y[i] = x[i];
        worst = worst.max(((up - down) / (2.0 * h) - g[i]).abs());
    }
    Ok(worst)
}

fn gd_step(p: &dyn Potential, eta: f64, x: &mut [f64], g: &mut [f64]) {
    p.gradient(x, g);
    for (xi, gi) in x.iter_mut().zip(g.iter()) {
        *xi -= eta * gi;
    }
}

/// `|phi(x) - phi(y)| / |x - y|` for one gradient step `phi(x) = x - eta grad f(x)`.
pub fn contraction_factor(p: &dyn Potential, eta: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    flow_contraction_factor(p, eta, 1, x, y)
}

/// Ratio of distances after `k` composed gradient steps.
pub fn flow_contraction_factor(p: &dyn Potential, eta: f64, k: usize, x: &[f64], y: &[f64]) -> Result<f64> {
    let d = p.dim();
    if x.len() != d || y.len() != d {
        return Err(invalid("point dimension does not match the potential"));
    }
    let gap: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let start = norm(&gap);
    if start == 0.0 {
        return Err(invalid("points must differ"));
    }
    let (mut a, mut b, mut g) = (x.to_vec(), y.to_vec(), vec![0.0; d]);
    for _ in 0..k {
        gd_step(p, eta, &mut a, &mut g);
        gd_step(p, eta, &mut b, &mut g);
    }
    let end: Vec<f64> = a.iter().zip(&b).map(|(u, v)| u - v).collect();
    Ok(norm(&end) / start)
}
