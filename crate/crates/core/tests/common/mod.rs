//! Reference computations that share no code with the library.

#![allow(dead_code)]

use std::f64::consts::PI;

/// `J₀(x)` from its power series; accurate for `x < 10`.
pub fn bessel_j0(x: f64) -> f64 {
    let q = -0.25 * x * x;
    let (mut term, mut sum) = (1.0, 1.0);
    for k in 1..60 {
        term *= q / (k * k) as f64;
        sum += term;
    }
    sum
}

/// First positive zero of `J₀` by bisection on `[2, 3]`.
pub fn j0_first_zero() -> f64 {
    let (mut a, mut b) = (2.0, 3.0);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if bessel_j0(a) * bessel_j0(m) <= 0.0 {
            b = m;
        } else {
            a = m;
        }
    }
    0.5 * (a + b)
}

pub fn sphere_area(n: usize) -> f64 {
    match n {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => panic!("oracle covers N <= 3"),
    }
}

/// Vertex-centred discretization of `−Δ + λ` on `[0, R]` with `u(R) = 0`.
pub struct FdBall {
    pub n: usize,
    pub h: f64,
    /// Lumped shell volumes (per unit sphere area).
    pub vol: Vec<f64>,
    /// Face weights `r_{i+1/2}^{N−1}/h`.
    pub face: Vec<f64>,
}

impl FdBall {
    pub fn new(dimension: usize, radius: f64, points: usize) -> Self {
        let h = radius / points as f64;
        let d = dimension as f64;
        let vol = (0..points)
            .map(|i| {
                let lo = if i == 0 { 0.0 } else { (i as f64 - 0.5) * h };
                let hi = (i as f64 + 0.5) * h;
                (hi.powf(d) - lo.powf(d)) / d
            })
            .collect();
        let face = (0..points).map(|i| ((i as f64 + 0.5) * h).powf(d - 1.0) / h).collect();
        Self { n: points, h, vol, face }
    }

    /// Solves `(K + λM) x = b` by the Thomas algorithm.
    pub fn solve(&self, lambda: f64, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let diag: Vec<f64> =
            (0..n).map(|i| self.face[i] + if i > 0 { self.face[i - 1] } else { 0.0 } + lambda * self.vol[i]).collect();
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        c[0] = -self.face[0] / diag[0];
        d[0] = b[0] / diag[0];
        for i in 1..n {
            let m = diag[i] + self.face[i - 1] * c[i - 1];
            c[i] = -self.face[i] / m;
            d[i] = (b[i] + self.face[i - 1] * d[i - 1]) / m;
        }
        let mut x = vec![0.0; n];
        x[n - 1] = d[n - 1];
        for i in (0..n - 1).rev() {
            x[i] = d[i] - c[i] * x[i + 1];
        }
        x
    }

    /// `uᵀ(K + λM)u`.
    pub fn quadratic(&self, lambda: f64, u: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            let next = if i + 1 < self.n { u[i + 1] } else { 0.0 };
            s += self.face[i] * (next - u[i]).powi(2) + lambda * self.vol[i] * u[i] * u[i];
        }
        s
    }
}

/// Ground-state energy of `−Δu + λu = |u|^{p−2}u` in `B_R` by nonlinear
/// inverse iteration on the Nehari manifold: `v = (−Δ_h + λ)^{−1} u^{p−1}`,
/// rescaled onto the discrete Nehari set. Returns `(energy, mass)`.
pub fn fd_nehari_energy(dimension: usize, p: f64, lambda: f64, radius: f64, points: usize) -> (f64, f64) {
    let g = FdBall::new(dimension, radius, points);
    let mut u: Vec<f64> = (0..points).map(|i| (0.5 * PI * i as f64 * g.h / radius).cos().max(0.0)).collect();
    let mut level = f64::INFINITY;
    for _ in 0..20_000 {
        let rhs: Vec<f64> = (0..points).map(|i| g.vol[i] * u[i].abs().powf(p - 1.0)).collect();
        let v = g.solve(lambda, &rhs);
        let a = g.quadratic(lambda, &v);
        let b: f64 = (0..points).map(|i| g.vol[i] * v[i].abs().powf(p)).sum();
        let t = (a / b).powf(1.0 / (p - 2.0));
        u = v.iter().map(|x| t * x).collect();
        let next = (0.5 - 1.0 / p) * g.quadratic(lambda, &u);
        if (level - next).abs() <= 1e-14 * next {
            level = next;
            break;
        }
        level = next;
    }
    let area = sphere_area(dimension);
    let mass: f64 = (0..points).map(|i| g.vol[i] * u[i] * u[i]).sum();
    (area * level, area * mass)
}
