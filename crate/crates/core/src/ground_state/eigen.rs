use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::ode::{shoot, End, Field, IntegratorSettings, Mode};

/// First Dirichlet eigenvalue of `−Δ` on the ball `B_R ⊂ ℝ^N`.
///
/// Bisection in `λ` on the unit ball for the value at which the regular
/// solution of `u'' + (N−1)/r·u' + λu = 0` has its first zero exactly at
/// `r = 1`; the result is then scaled as `λ₁(R) = λ₁(1)/R²`. `tol` is the
/// absolute bracket width on the unit-ball value.
pub fn first_dirichlet_eigenvalue(dimension: usize, radius: f64, tol: f64) -> Result<f64> {
    if dimension < 2 {
        return Err(Error::Validation(format!("dimension must be at least 2, got {dimension}")));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::Validation(format!("radius must be positive, got {radius}")));
    }
    if !(tol > 0.0) {
        return Err(Error::Validation("tolerance must be positive".into()));
    }
    Ok(unit_ball_eigenvalue(dimension, tol)? / (radius * radius))
}

fn unit_ball_eigenvalue(dimension: usize, tol: f64) -> Result<f64> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, u64), f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let key = (dimension, tol.to_bits());
    if let Some(&v) = cache.lock().unwrap().get(&key) {
        return Ok(v);
    }
    let settings = IntegratorSettings { rtol: 1e-14, atol: 1e-18, ..Default::default() };
    let crosses = |lambda: f64| -> Result<bool> {
        let field = Field::new(dimension, -lambda, None);
        let t = shoot(&field, 1.0, 1.0, &settings, Mode::Probe)?;
        Ok(matches!(t.end, End::Zero(r) if r < 1.0))
    };
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut expansions = 0;
    while !crosses(hi)? {
        lo = hi;
        hi *= 2.0;
        expansions += 1;
        if expansions > 60 {
            return Err(Error::Numeric("could not bracket the first eigenvalue".into()));
        }
    }
    let width = tol.min(1e-13 * hi);
    while hi - lo > width {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if crosses(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let value = 0.5 * (lo + hi);
    cache.lock().unwrap().insert(key, value);
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn three_dimensional_ball() {
        let l = first_dirichlet_eigenvalue(3, 1.0, 1e-12).unwrap();
        assert!((l - PI * PI).abs() < 1e-8, "{l}");
        let l2 = first_dirichlet_eigenvalue(3, 2.0, 1e-12).unwrap();
        assert!((l2 - PI * PI / 4.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(first_dirichlet_eigenvalue(1, 1.0, 1e-10).is_err());
        assert!(first_dirichlet_eigenvalue(3, 0.0, 1e-10).is_err());
        assert!(first_dirichlet_eigenvalue(3, 1.0, 0.0).is_err());
    }
}
