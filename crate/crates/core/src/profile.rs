//! Sampled radial functions and the quadratures built on them.
//!
//! A [`RadialProfile`] stores `(r, u, u')` on a strictly increasing grid
//! starting at the origin. Between nodes the function is the cubic Hermite
//! interpolant of the stored values and slopes; every integral in this crate
//! is a 5-point Gauss–Legendre rule applied cell by cell to that interpolant,
//! weighted by the surface measure `ω_{N-1} r^{N-1}`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};

pub(crate) const GAUSS5: [(f64, f64); 5] = [
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.0, 0.568_888_888_888_888_9),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

pub(crate) const GAUSS8: [(f64, f64); 8] = [
    (-0.960_289_856_497_536_3, 0.101_228_536_290_376_3),
    (-0.796_666_477_413_626_7, 0.222_381_034_453_374_5),
    (-0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (-0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_5),
    (0.960_289_856_497_536_3, 0.101_228_536_290_376_3),
];

/// Area of the unit sphere `S^{N-1} ⊂ ℝ^N`: `2π^{N/2}/Γ(N/2)`.
pub fn sphere_area(dimension: usize) -> f64 {
    // Γ(N/2) by the recursion Γ(x+1) = xΓ(x) from Γ(1) = 1 or Γ(1/2) = √π.
    let (mut gamma, mut x) = if dimension.is_multiple_of(2) { (1.0, 1.0) } else { (PI.sqrt(), 0.5) };
    let target = dimension as f64 / 2.0;
    while x < target {
        gamma *= x;
        x += 1.0;
    }
    2.0 * PI.powf(target) / gamma
}

/// How an integration ended.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "radius")]
pub enum TerminalEvent {
    ReachedEnd,
    ZeroCrossing(f64),
    Blowup(f64),
}

impl TerminalEvent {
    pub fn label(&self) -> String {
        match self {
            TerminalEvent::ReachedEnd => "reached_end".into(),
            TerminalEvent::ZeroCrossing(r) => format!("zero_crossing({r:.16e})"),
            TerminalEvent::Blowup(r) => format!("blowup({r:.16e})"),
        }
    }
}

/// A radial function on `[0, r_max]` sampled as `(r, u, u')`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    dimension: usize,
    r: Vec<f64>,
    u: Vec<f64>,
    du: Vec<f64>,
    event: TerminalEvent,
}

impl RadialProfile {
    /// Checks the structural invariants: equal lengths of at least two,
    /// `r[0] = 0`, `r` strictly increasing, all values finite.
    pub fn new(dimension: usize, r: Vec<f64>, u: Vec<f64>, du: Vec<f64>, event: TerminalEvent) -> Result<Self> {
        if dimension < 2 {
            return Err(Error::Validation(format!("dimension must be at least 2, got {dimension}")));
        }
        if r.len() != u.len() || r.len() != du.len() {
            return Err(Error::Validation("profile arrays differ in length".into()));
        }
        if r.len() < 2 {
            return Err(Error::Validation("profile needs at least two samples".into()));
        }
        if r[0] != 0.0 {
            return Err(Error::Validation(format!("profile grid must start at 0, starts at {}", r[0])));
        }
        if let Some(i) = r.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::Validation(format!("profile grid not strictly increasing at index {}", i + 1)));
        }
        if r.iter().chain(&u).chain(&du).any(|x| !x.is_finite()) {
            return Err(Error::Validation("profile contains non-finite values".into()));
        }
        Ok(Self { dimension, r, u, du, event })
    }

    /// Samples an analytic function and its derivative on `grid`.
    pub fn from_fn(dimension: usize, grid: Vec<f64>, f: impl Fn(f64) -> (f64, f64)) -> Result<Self> {
        let (u, du) = grid.iter().map(|&r| f(r)).unzip();
        Self::new(dimension, grid, u, du, TerminalEvent::ReachedEnd)
    }

    /// Uniform grid of `cells` cells on `[0, r_max]`.
    pub fn uniform_grid(r_max: f64, cells: usize) -> Vec<f64> {
        (0..=cells).map(|i| r_max * i as f64 / cells as f64).collect()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }
    pub fn r(&self) -> &[f64] {
        &self.r
    }
    pub fn u(&self) -> &[f64] {
        &self.u
    }
    pub fn du(&self) -> &[f64] {
        &self.du
    }
    pub fn event(&self) -> TerminalEvent {
        self.event
    }
    pub fn len(&self) -> usize {
        self.r.len()
    }
    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }
    pub fn r_max(&self) -> f64 {
        *self.r.last().unwrap()
    }
    pub fn height(&self) -> f64 {
        self.u[0]
    }
    pub fn last_u(&self) -> f64 {
        *self.u.last().unwrap()
    }

    /// Cell index `i` with `r[i] <= x <= r[i+1]`, or `None` outside the grid.
    fn cell(&self, x: f64) -> Option<usize> {
        if x < 0.0 || x > self.r_max() {
            return None;
        }
        let i = self.r.partition_point(|&ri| ri <= x);
        Some(i.saturating_sub(1).min(self.r.len() - 2))
    }

    #[inline]
    fn hermite(&self, i: usize, x: f64) -> (f64, f64) {
        let (x0, x1) = (self.r[i], self.r[i + 1]);
        let h = x1 - x0;
        let t = (x - x0) / h;
        let (t2, t3) = (t * t, t * t * t);
        let (u0, u1, d0, d1) = (self.u[i], self.u[i + 1], self.du[i] * h, self.du[i + 1] * h);
        let u =
            (2.0 * t3 - 3.0 * t2 + 1.0) * u0 + (t3 - 2.0 * t2 + t) * d0 + (-2.0 * t3 + 3.0 * t2) * u1 + (t3 - t2) * d1;
        let du = ((6.0 * t2 - 6.0 * t) * u0
            + (3.0 * t2 - 4.0 * t + 1.0) * d0
            + (-6.0 * t2 + 6.0 * t) * u1
            + (3.0 * t2 - 2.0 * t) * d1)
            / h;
        (u, du)
    }

    /// Hermite-interpolated `(u, u')` at `x`, or `None` outside the grid.
    pub fn eval(&self, x: f64) -> Option<(f64, f64)> {
        self.cell(x).map(|i| self.hermite(i, x))
    }

    /// Like [`eval`](Self::eval), extended by zero beyond `r_max`.
    pub fn eval_zero_extended(&self, x: f64) -> (f64, f64) {
        self.eval(x).unwrap_or((0.0, 0.0))
    }

    /// `ω_{N-1} ∫ g(r, u, u') r^{N-1} dr` over the profile's grid.
    pub fn integrate(&self, mut g: impl FnMut(f64, f64, f64) -> f64) -> f64 {
        let power = (self.dimension - 1) as i32;
        let mut acc = 0.0;
        for i in 0..self.r.len() - 1 {
            let (a, b) = (self.r[i], self.r[i + 1]);
            let (mid, half) = ((a + b) / 2.0, (b - a) / 2.0);
            let mut cell = 0.0;
            for (x, w) in GAUSS5 {
                let rr = mid + half * x;
                let (u, du) = self.hermite(i, rr);
                cell += w * g(rr, u, du) * rr.powi(power);
            }
            acc += cell * half;
        }
        acc * sphere_area(self.dimension)
    }

    /// `‖u‖²_{L²} = ω_{N-1} ∫ u² r^{N-1} dr`.
    pub fn mass(&self) -> f64 {
        self.integrate(|_, u, _| u * u)
    }

    /// `‖∇u‖²_{L²}`.
    pub fn gradient_norm_sq(&self) -> f64 {
        self.integrate(|_, _, du| du * du)
    }

    /// Returns a copy with `r ↦ scale_r·r`, `u ↦ scale_u·u` (and `u'`
    /// rescaled accordingly).
    pub fn rescaled(&self, scale_r: f64, scale_u: f64) -> Self {
        let event = match self.event {
            TerminalEvent::ReachedEnd => TerminalEvent::ReachedEnd,
            TerminalEvent::ZeroCrossing(r) => TerminalEvent::ZeroCrossing(r * scale_r),
            TerminalEvent::Blowup(r) => TerminalEvent::Blowup(r * scale_r),
        };
        Self {
            dimension: self.dimension,
            r: self.r.iter().map(|r| r * scale_r).collect(),
            u: self.u.iter().map(|u| u * scale_u).collect(),
            du: self.du.iter().map(|d| d * scale_u / scale_r).collect(),
            event,
        }
    }

    /// Profile CSV: a `#` header line recording `N`, `lambda`, the height
    /// `a = u(0)` and the terminal event, then `r,u,du` rows.
    pub fn to_csv(&self, lambda: f64) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# N={} lambda={:.16e} a={:.16e} event={}",
            self.dimension,
            lambda,
            self.height(),
            self.event.label()
        );
        out.push_str("r,u,du\n");
        for i in 0..self.r.len() {
            let _ = writeln!(out, "{:.16e},{:.16e},{:.16e}", self.r[i], self.u[i], self.du[i]);
        }
        out
    }

    /// Parses the output of [`to_csv`](Self::to_csv). The terminal event is
    /// not restored (it is reported as `ReachedEnd`).
    pub fn from_csv(text: &str) -> Result<(Self, f64)> {
        let mut dimension = None;
        let mut lambda = f64::NAN;
        let (mut r, mut u, mut du) = (Vec::new(), Vec::new(), Vec::new());
        for line in text.lines() {
            if let Some(header) = line.strip_prefix('#') {
                for tok in header.split_whitespace() {
                    if let Some(v) = tok.strip_prefix("N=") {
                        dimension = v.parse().ok();
                    } else if let Some(v) = tok.strip_prefix("lambda=") {
                        lambda = v.parse().unwrap_or(f64::NAN);
                    }
                }
                continue;
            }
            if line.starts_with("r,") || line.trim().is_empty() {
                continue;
            }
            let cols: Vec<f64> = line
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Validation(format!("bad profile row `{line}`: {e}")))?;
            if cols.len() != 3 {
                return Err(Error::Validation(format!("expected 3 columns in `{line}`")));
            }
            r.push(cols[0]);
            u.push(cols[1]);
            du.push(cols[2]);
        }
        let dimension = dimension.ok_or_else(|| Error::Validation("missing N in profile header".into()))?;
        Ok((Self::new(dimension, r, u, du, TerminalEvent::ReachedEnd)?, lambda))
    }
}

/// `‖u_A − u_B‖_{H¹(ℝ^N)}` for radial profiles extended by zero past their
/// grids. Both interpolants are integrated on the union of the two grids,
/// so every integration cell lies inside one cell of each profile.
pub fn h1_distance(a: &RadialProfile, b: &RadialProfile) -> Result<f64> {
    if a.dimension != b.dimension {
        return Err(Error::Validation(format!(
            "profiles live in different dimensions: {} vs {}",
            a.dimension, b.dimension
        )));
    }
    let mut grid: Vec<f64> = a.r.iter().chain(&b.r).copied().collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup_by(|x, y| (*x - *y).abs() <= 1e-15 * y.abs().max(1e-300));
    let power = (a.dimension - 1) as i32;
    let mut acc = 0.0;
    // Cell cursors into each profile; advanced monotonically.
    let (mut ia, mut ib) = (0usize, 0usize);
    for w in grid.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let (mid, half) = ((lo + hi) / 2.0, (hi - lo) / 2.0);
        while ia + 2 < a.r.len() && a.r[ia + 1] <= mid {
            ia += 1;
        }
        while ib + 2 < b.r.len() && b.r[ib + 1] <= mid {
            ib += 1;
        }
        let mut cell = 0.0;
        for (x, wt) in GAUSS5 {
            let rr = mid + half * x;
            let (ua, da) = if mid <= a.r_max() { a.hermite(ia, rr) } else { (0.0, 0.0) };
            let (ub, db) = if mid <= b.r_max() { b.hermite(ib, rr) } else { (0.0, 0.0) };
            cell += wt * ((ua - ub).powi(2) + (da - db).powi(2)) * rr.powi(power);
        }
        acc += cell * half;
    }
    Ok((acc * sphere_area(a.dimension)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sphere_areas() {
        assert_relative_eq!(sphere_area(2), 2.0 * PI, max_relative = 1e-15);
        assert_relative_eq!(sphere_area(3), 4.0 * PI, max_relative = 1e-15);
        assert_relative_eq!(sphere_area(4), 2.0 * PI * PI, max_relative = 1e-15);
        assert_relative_eq!(sphere_area(5), 8.0 * PI * PI / 3.0, max_relative = 1e-15);
    }

    #[test]
    fn unit_ball_volume() {
        let p = RadialProfile::from_fn(3, RadialProfile::uniform_grid(1.0, 10), |_| (1.0, 0.0)).unwrap();
        assert_relative_eq!(p.mass(), 4.0 * PI / 3.0, max_relative = 1e-14);
        let z = RadialProfile::from_fn(3, RadialProfile::uniform_grid(1.0, 10), |_| (0.0, 0.0)).unwrap();
        assert_eq!(z.mass(), 0.0);
    }

    #[test]
    fn sinc_mass() {
        // 4π ∫_0^1 sin²(πr)/π² dr = 2/π
        let p = RadialProfile::from_fn(3, RadialProfile::uniform_grid(1.0, 400), |r| {
            if r == 0.0 {
                (1.0, 0.0)
            } else {
                let x = PI * r;
                (x.sin() / x, (x * x.cos() - x.sin()) / (x * r))
            }
        })
        .unwrap();
        assert_relative_eq!(p.mass(), 2.0 / PI, max_relative = 1e-10);
    }

    #[test]
    fn structural_invariants() {
        assert!(RadialProfile::new(3, vec![0.0], vec![1.0], vec![0.0], TerminalEvent::ReachedEnd).is_err());
        assert!(RadialProfile::new(3, vec![0.1, 0.2], vec![1.0; 2], vec![0.0; 2], TerminalEvent::ReachedEnd).is_err());
        assert!(RadialProfile::new(3, vec![0.0, 0.0], vec![1.0; 2], vec![0.0; 2], TerminalEvent::ReachedEnd).is_err());
        assert!(RadialProfile::new(3, vec![0.0, 1.0], vec![1.0], vec![0.0; 2], TerminalEvent::ReachedEnd).is_err());
    }

    #[test]
    fn h1_identity_and_norm() {
        let grid = RadialProfile::uniform_grid(8.0, 800);
        let e = RadialProfile::from_fn(3, grid.clone(), |r| ((-r).exp(), -(-r).exp())).unwrap();
        assert_eq!(h1_distance(&e, &e).unwrap(), 0.0);
        let z = RadialProfile::from_fn(3, vec![0.0, 1.0], |_| (0.0, 0.0)).unwrap();
        // ‖e^{-r}‖²_{H¹} on [0,8]: 4π ∫ 2 e^{-2r} r² dr
        let direct = 4.0 * PI * 2.0 * {
            let (r, x) = (8.0f64, (-16.0f64).exp());
            0.25 - x * (r * r / 2.0 + r / 2.0 + 0.25)
        };
        assert_relative_eq!(h1_distance(&e, &z).unwrap().powi(2), direct, max_relative = 1e-10);
        let other = RadialProfile::from_fn(2, grid, |r| ((-r).exp(), -(-r).exp())).unwrap();
        assert!(h1_distance(&e, &other).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let p = RadialProfile::from_fn(2, RadialProfile::uniform_grid(2.0, 7), |r| {
            ((-r * r).exp(), -2.0 * r * (-r * r).exp())
        })
        .unwrap();
        let text = p.to_csv(1.25);
        assert!(text.starts_with("# N=2 lambda=1.25"));
        let (q, lambda) = RadialProfile::from_csv(&text).unwrap();
        assert_eq!(lambda, 1.25);
        assert_eq!(q, p);
    }
}
