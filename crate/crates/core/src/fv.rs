//! Cell-centred finite-volume discretization of the radial Laplacian and
//! symmetric tridiagonal linear algebra.
//!
//! Nodes `r_i = i·h`, `i = 0..n`, with a homogeneous Dirichlet condition at
//! `r_n = L`. Node `i` owns the shell `[r_i − h/2, r_i + h/2] ∩ [0, L]`; the
//! flux through the face at `r_i + h/2` is `(r_i + h/2)^{N−1}·(w_i − w_{i+1})/h`.
//! All volumes and face weights omit the sphere area, which cancels in the
//! eigenvalue problems and is restored by callers when integrating.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct RadialGrid {
    pub dimension: usize,
    pub length: f64,
    pub h: f64,
    /// Unknown nodes `r_0 = 0, …, r_{n−1}`.
    pub r: Vec<f64>,
    /// Shell volumes (without the sphere area).
    pub volume: Vec<f64>,
    /// `face[i]` couples nodes `i` and `i+1`; the last face couples to the boundary.
    pub face: Vec<f64>,
}

impl RadialGrid {
    pub fn new(dimension: usize, length: f64, cells: usize) -> Result<Self> {
        if dimension < 2 {
            return Err(Error::Validation(format!("dimension must be at least 2, got {dimension}")));
        }
        if cells < 4 || !(length > 0.0) {
            return Err(Error::Validation(format!(
                "finite-volume grid needs length > 0 and at least 4 cells, got {length} and {cells}"
            )));
        }
        let n = cells;
        let h = length / n as f64;
        let nf = dimension as f64;
        let r: Vec<f64> = (0..n).map(|i| i as f64 * h).collect();
        let volume = r
            .iter()
            .map(|&ri| {
                let outer = (ri + 0.5 * h).powi(dimension as i32);
                let inner = if ri == 0.0 { 0.0 } else { (ri - 0.5 * h).powi(dimension as i32) };
                (outer - inner) / nf
            })
            .collect();
        let face = r.iter().map(|&ri| (ri + 0.5 * h).powi(dimension as i32 - 1) / h).collect();
        Ok(Self { dimension, length, h, r, volume, face })
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    /// `K = −Δ_h + diag(V·potential)` in the symmetric (unscaled) form:
    /// returns `(diagonal, off_diagonal)`.
    pub fn stiffness(&self, potential: impl Fn(usize) -> f64) -> (Vec<f64>, Vec<f64>) {
        let n = self.len();
        let mut diag = vec![0.0; n];
        let mut off = vec![0.0; n.saturating_sub(1)];
        for i in 0..n {
            let left = if i == 0 { 0.0 } else { self.face[i - 1] };
            diag[i] = left + self.face[i] + self.volume[i] * potential(i);
            if i + 1 < n {
                off[i] = -self.face[i];
            }
        }
        (diag, off)
    }

    /// Symmetrized operator `V^{−1/2} K V^{−1/2}`, whose eigenvalues are those
    /// of the discrete `−Δ + potential`.
    pub fn symmetrized(&self, potential: impl Fn(usize) -> f64) -> (Vec<f64>, Vec<f64>) {
        let (mut diag, mut off) = self.stiffness(potential);
        for (i, d) in diag.iter_mut().enumerate() {
            *d /= self.volume[i];
        }
        for (i, e) in off.iter_mut().enumerate() {
            *e /= (self.volume[i] * self.volume[i + 1]).sqrt();
        }
        (diag, off)
    }
}

/// Solves the symmetric tridiagonal system `(diag, off)·x = rhs` (Thomas).
pub fn solve_tridiagonal(diag: &[f64], off: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut x = rhs.to_vec();
    let mut pivot = diag[0];
    if pivot == 0.0 || !pivot.is_finite() {
        return Err(Error::Numeric("singular tridiagonal system".into()));
    }
    x[0] /= pivot;
    for i in 1..n {
        c[i - 1] = off[i - 1] / pivot;
        pivot = diag[i] - off[i - 1] * c[i - 1];
        if pivot == 0.0 || !pivot.is_finite() {
            return Err(Error::Numeric("singular tridiagonal system".into()));
        }
        x[i] = (x[i] - off[i - 1] * x[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Ok(x)
}

/// Number of eigenvalues strictly below `x` (Sturm sequence count).
pub fn count_below(diag: &[f64], off: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = diag[0] - x;
    if q < 0.0 {
        count += 1;
    }
    for i in 1..diag.len() {
        let q_prev = if q == 0.0 { f64::EPSILON * (off[i - 1].abs() + 1.0) } else { q };
        q = diag[i] - x - off[i - 1] * off[i - 1] / q_prev;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// The `k` smallest eigenvalues by Sturm bisection, each polished by a few
/// steps of shifted inverse iteration with Rayleigh quotient.
pub fn smallest_eigenvalues(diag: &[f64], off: &[f64], k: usize) -> Result<Vec<f64>> {
    let n = diag.len();
    if k == 0 || k > n {
        return Err(Error::Validation(format!("requested {k} eigenvalues of a {n}x{n} matrix")));
    }
    // Gershgorin bounds.
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let radius = if i > 0 { off[i - 1].abs() } else { 0.0 } + if i + 1 < n { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - radius);
        hi = hi.max(diag[i] + radius);
    }
    let scale = lo.abs().max(hi.abs()).max(1.0);
    let mut out = Vec::with_capacity(k);
    for j in 0..k {
        let (mut a, mut b) = (lo, hi);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b || b - a < 4.0 * f64::EPSILON * scale {
                break;
            }
            if count_below(diag, off, mid) > j {
                b = mid;
            } else {
                a = mid;
            }
        }
        out.push(refine(diag, off, 0.5 * (a + b), (b - a).max(f64::EPSILON * scale))?);
    }
    Ok(out)
}

fn refine(diag: &[f64], off: &[f64], guess: f64, width: f64) -> Result<f64> {
    let n = diag.len();
    let shift = guess - width;
    let shifted: Vec<f64> = diag.iter().map(|d| d - shift).collect();
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.01 * (i as f64).sin()).collect();
    let mut value = guess;
    for _ in 0..3 {
        let y = match solve_tridiagonal(&shifted, off, &x) {
            Ok(y) => y,
            Err(_) => return Ok(guess),
        };
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Ok(guess);
        }
        x = y.iter().map(|v| v / norm).collect();
        let ax = tridiagonal_apply(diag, off, &x);
        value = x.iter().zip(&ax).map(|(a, b)| a * b).sum();
    }
    if !value.is_finite() {
        return Err(Error::Numeric("inverse iteration did not converge".into()));
    }
    // The Rayleigh quotient only replaces the bisection midpoint when it lies
    // inside the bisection bracket.
    if (value - guess).abs() <= width {
        Ok(value)
    } else {
        Ok(guess)
    }
}

pub fn tridiagonal_apply(diag: &[f64], off: &[f64], x: &[f64]) -> Vec<f64> {
    let n = diag.len();
    (0..n)
        .map(|i| {
            let mut s = diag[i] * x[i];
            if i > 0 {
                s += off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += off[i] * x[i + 1];
            }
            s
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn volumes_sum_to_ball() {
        let g = RadialGrid::new(3, 1.0, 100).unwrap();
        let total: f64 = g.volume.iter().sum::<f64>();
        // Shells stop at L − h/2.
        let exact = (1.0f64 - 0.005).powi(3) / 3.0;
        assert!((total - exact).abs() < 1e-14);
    }

    #[test]
    fn dirichlet_eigenvalues_of_unit_ball() {
        let g = RadialGrid::new(3, 1.0, 2000).unwrap();
        let (d, e) = g.symmetrized(|_| 0.0);
        let ev = smallest_eigenvalues(&d, &e, 2).unwrap();
        assert!((ev[0] - PI * PI).abs() < 1e-4, "{}", ev[0]);
        assert!((ev[1] - 4.0 * PI * PI).abs() < 1e-3, "{}", ev[1]);
    }

    #[test]
    fn thomas_matches_apply() {
        let d = vec![4.0, 5.0, 6.0, 7.0];
        let e = vec![1.0, -2.0, 0.5];
        let x = vec![1.0, 2.0, 3.0, 4.0];
        let b = tridiagonal_apply(&d, &e, &x);
        let y = solve_tridiagonal(&d, &e, &b).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn sturm_count_brackets_spectrum() {
        let d = vec![2.0; 5];
        let e = vec![-1.0; 4];
        // Eigenvalues 2 − 2cos(kπ/6).
        assert_eq!(count_below(&d, &e, 0.0), 0);
        assert_eq!(count_below(&d, &e, 2.0 - 2.0 * (PI / 6.0).cos() + 1e-9), 1);
        assert_eq!(count_below(&d, &e, 4.0), 5);
    }
}
