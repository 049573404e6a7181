use serde::Serialize;

use crate::error::{Error, Result};
use crate::fv::{solve_tridiagonal, tridiagonal_apply, RadialGrid};
use crate::problem::{abs_pow, check_exponent};
use crate::profile::sphere_area;

/// Controls for [`q_by_gradient_flow`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowSettings {
    /// Truncated domain `[0, L]` with `u(L) = 0`.
    pub domain_radius: f64,
    /// Cells of the coarse grid; the fine grid uses twice as many.
    pub cells: usize,
    /// Relaxation factor of the preconditioned step.
    pub step: f64,
    pub max_iter: usize,
    /// Stop when the preconditioned update is below `tol` in energy norm.
    pub tol: f64,
}

impl Default for FlowSettings {
    fn default() -> Self {
        Self { domain_radius: 30.0, cells: 3000, step: 1.0, max_iter: 20_000, tol: 1e-13 }
    }
}

/// `‖Q‖²` from the discrete flow at two resolutions, with the
/// Richardson-extrapolated value.
#[derive(Debug, Clone, Serialize)]
pub struct FlowSolution {
    pub mass: f64,
    pub mass_coarse: f64,
    pub mass_fine: f64,
    pub height: f64,
    pub iterations: usize,
}

/// Computes `Q` independently of shooting: a preconditioned normalized
/// gradient flow for `min ⟨(−Δ+1)w, w⟩` subject to `∫|w|^p = 1` on a
/// finite-volume grid, followed by the rescaling that turns the minimizer
/// into a solution of `−Δv + v = |v|^{p−2}v`.
pub fn q_by_gradient_flow(dimension: usize, exponent: f64, settings: &FlowSettings) -> Result<FlowSolution> {
    check_exponent(dimension, exponent)?;
    if !(settings.step > 0.0 && settings.step <= 1.0 && settings.tol > 0.0) || settings.max_iter == 0 {
        return Err(Error::Validation("flow step must lie in (0, 1] and tolerances be positive".into()));
    }
    let coarse = flow_on(dimension, exponent, settings.domain_radius, settings.cells, settings)?;
    let fine = flow_on(dimension, exponent, settings.domain_radius, 2 * settings.cells, settings)?;
    Ok(FlowSolution {
        mass: (4.0 * fine.0 - coarse.0) / 3.0,
        mass_coarse: coarse.0,
        mass_fine: fine.0,
        height: fine.1,
        iterations: coarse.2 + fine.2,
    })
}

/// Returns `(mass, height, iterations)` on one grid.
fn flow_on(n: usize, p: f64, length: f64, cells: usize, s: &FlowSettings) -> Result<(f64, f64, usize)> {
    let grid = RadialGrid::new(n, length, cells)?;
    let (diag, off) = grid.stiffness(|_| 1.0);
    let vol = &grid.volume;
    let power = |w: &[f64]| -> f64 { w.iter().zip(vol).map(|(x, v)| v * abs_pow(*x, p)).sum() };
    let normalize = |w: &mut Vec<f64>| {
        let scale = power(w).powf(-1.0 / p);
        w.iter_mut().for_each(|x| *x *= scale);
    };
    let dot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| x * y).sum() };

    let mut w: Vec<f64> = grid.r.iter().map(|r| (-r * r).exp()).collect();
    normalize(&mut w);
    let mut iterations = 0;
    loop {
        iterations += 1;
        if iterations > s.max_iter {
            return Err(Error::Numeric(format!("gradient flow did not converge in {} steps", s.max_iter)));
        }
        let g: Vec<f64> = w.iter().zip(vol).map(|(x, v)| v * abs_pow(*x, p - 1.0) * x.signum()).collect();
        let z = solve_tridiagonal(&diag, &off, &g)?;
        let kappa = dot(&g, &w) / dot(&g, &z);
        let d: Vec<f64> = w.iter().zip(&z).map(|(x, y)| x - kappa * y).collect();
        let kd = tridiagonal_apply(&diag, &off, &d);
        let kw = tridiagonal_apply(&diag, &off, &w);
        let change = (dot(&d, &kd) / dot(&w, &kw)).abs().sqrt();
        w.iter_mut().zip(&d).for_each(|(x, y)| *x -= s.step * y);
        normalize(&mut w);
        if change < s.tol {
            break;
        }
    }
    let kw = tridiagonal_apply(&diag, &off, &w);
    let t = (dot(&w, &kw) / power(&w)).powf(1.0 / (p - 2.0));
    let mass = sphere_area(n) * t * t * w.iter().zip(vol).map(|(x, v)| v * x * x).sum::<f64>();
    Ok((mass, t * w[0], iterations))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_step() {
        let s = FlowSettings { step: 1.5, ..Default::default() };
        assert!(q_by_gradient_flow(2, 4.0, &s).is_err());
    }
}
