use serde::Serialize;

use super::{ended_at, newton2};
use crate::error::{Error, Result};
use crate::ode::{advance, march, shoot_with, End, Field, IntegratorSettings, Mode, Stops};
use crate::problem::{check_exponent, RadialProblem};
use crate::profile::{sphere_area, RadialProfile, TerminalEvent};

/// Controls for [`solve_whole_space_q`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QSettings {
    pub integrator: IntegratorSettings,
    /// Horizon for classifying a trial height as crossing or turning up.
    pub probe_radius: f64,
    /// Radius where the solution is matched to the linear tail.
    pub far_radius: f64,
    /// The stored profile ends where `u < cut_ratio·Q(0)`.
    pub cut_ratio: f64,
    pub matching_tol: f64,
    pub max_newton: usize,
}

impl Default for QSettings {
    fn default() -> Self {
        Self {
            integrator: IntegratorSettings { rtol: 1e-13, atol: 1e-18, ..Default::default() },
            probe_radius: 60.0,
            far_radius: 40.0,
            cut_ratio: 1e-8,
            matching_tol: 1e-12,
            max_newton: 60,
        }
    }
}

/// The positive radial solution of `−Δv + v = |v|^{p−2}v` in `ℝ^N`.
///
/// Stored on `[0, r_cut]`; beyond `r_cut` the solution is represented by
/// the exact decaying solution of the linearized equation,
/// `C·r^{−ν}K_ν(r)` with `ν = N/2 − 1`, which behaves like
/// `C·√(π/2)·r^{−(N−1)/2}e^{−r}`.
#[derive(Debug, Clone)]
pub struct QProfile {
    pub dimension: usize,
    pub exponent: f64,
    pub profile: RadialProfile,
    pub height: f64,
    pub tail_coefficient: f64,
    pub r_cut: f64,
    /// `‖Q‖²` on `[0, r_cut]`.
    pub core_mass: f64,
    /// Analytic tail contribution beyond `r_cut`.
    pub tail_mass: f64,
    pub mass: f64,
    /// Scaled `(u, u')` mismatch at the matching radius.
    pub matching_residual: f64,
    /// Radius joining the forward and backward integrations.
    pub matching_radius: f64,
    /// Radius where the tail model seeds the backward integration.
    pub far_radius: f64,
    pub integrator: IntegratorSettings,
}

#[derive(Debug, Clone, Serialize)]
pub struct QSummary {
    pub dimension: usize,
    pub exponent: f64,
    pub height: f64,
    pub tail_coefficient: f64,
    pub r_cut: f64,
    pub core_mass: f64,
    pub tail_mass: f64,
    pub mass: f64,
    pub matching_residual: f64,
}

impl QProfile {
    pub fn summary(&self) -> QSummary {
        QSummary {
            dimension: self.dimension,
            exponent: self.exponent,
            height: self.height,
            tail_coefficient: self.tail_coefficient,
            r_cut: self.r_cut,
            core_mass: self.core_mass,
            tail_mass: self.tail_mass,
            mass: self.mass,
            matching_residual: self.matching_residual,
        }
    }

    /// Tail model `(u, u')` at radius `r`.
    pub fn tail(&self, r: f64) -> (f64, f64) {
        let (k, dk) = decaying_solution(self.dimension, r);
        (self.tail_coefficient * k, self.tail_coefficient * dk)
    }

    /// `(Q(r), Q'(r))` for any `r ≥ 0`.
    pub fn eval(&self, r: f64) -> (f64, f64) {
        if r <= self.r_cut {
            self.profile.eval(r).unwrap_or((0.0, 0.0))
        } else {
            self.tail(r)
        }
    }

    /// Profile on `[0, max(r_max, r_cut)]`, sampling the tail model beyond
    /// `r_cut` at spacing at most `0.05`.
    pub fn to_profile(&self, r_max: f64) -> Result<RadialProfile> {
        let mut r = self.profile.r().to_vec();
        let mut u = self.profile.u().to_vec();
        let mut du = self.profile.du().to_vec();
        if r_max > self.r_cut {
            let cells = ((r_max - self.r_cut) / 0.05).ceil().max(1.0) as usize;
            let h = (r_max - self.r_cut) / cells as f64;
            for i in 1..=cells {
                let x = if i == cells { r_max } else { self.r_cut + i as f64 * h };
                let (v, dv) = self.tail(x);
                r.push(x);
                u.push(v);
                du.push(dv);
            }
        }
        RadialProfile::new(self.dimension, r, u, du, TerminalEvent::ReachedEnd)
    }

    /// Samples `Q` at the given nodes by integrating its equation from node
    /// to node. The forward integration from the origin and the backward one
    /// from the far radius (seeded by the tail model) are re-matched at the
    /// node nearest `junction`; nodes past the far radius take the tail
    /// model, and nodes beyond the last given one are added up to `extend_to`.
    ///
    /// A profile integrated on the same nodes with the same junction carries
    /// the same discretization error, so the difference of the two is free
    /// of interpolation and step-sequence noise.
    pub fn sample_on(&self, nodes: &[f64], junction: f64, extend_to: f64) -> Result<RadialProfile> {
        if nodes.len() < 3 || nodes[0] != 0.0 || nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Validation("sample nodes must start at 0 and increase strictly".into()));
        }
        let s = &self.integrator;
        let problem = RadialProblem::new(self.dimension, self.exponent, 1.0)?;
        let field = Field::new(self.dimension, 1.0, Some(&problem));
        let free = Stops { zero: false, rising: false, u_max: f64::INFINITY };
        let r_far = self.far_radius;
        let far = nodes.partition_point(|&r| r < r_far);
        let j = nodes[..far.max(2)]
            .iter()
            .enumerate()
            .skip(1)
            .min_by(|a, b| (a.1 - junction).abs().total_cmp(&(b.1 - junction).abs()))
            .map(|(i, _)| i)
            .unwrap();

        let forward = |a: f64, out: Option<&mut [[f64; 2]]>| -> Result<[f64; 2]> {
            let mut y = [a, 0.0];
            let mut out = out;
            if let Some(o) = out.as_deref_mut() {
                o[0] = y;
            }
            for i in 1..=j {
                y = if i == 1 {
                    let r_s = nodes[1].min(1e-4 * nodes[j]);
                    let (us, dus) = field.series(a, r_s);
                    if nodes[1] > r_s {
                        advance(&field, r_s, [us, dus], nodes[1], a, s)?
                    } else {
                        [us, dus]
                    }
                } else {
                    advance(&field, nodes[i - 1], y, nodes[i], a, s)?
                };
                if let Some(o) = out.as_deref_mut() {
                    o[i] = y;
                }
            }
            Ok(y)
        };
        let backward = |c: f64, out: Option<&mut [[f64; 2]]>| -> Result<[f64; 2]> {
            let (k, dk) = decaying_solution(self.dimension, r_far);
            let y0 = [c * k, c * dk];
            let (mut r, mut y) = (r_far, y0);
            let mut out = out;
            for i in (j..far).rev() {
                y = if r == r_far {
                    ended_at(&march(&field, r, y, nodes[i], y0[0].abs(), s, Mode::Probe, free)?, nodes[i])?
                } else {
                    advance(&field, r, y, nodes[i], y0[0].abs(), s)?
                };
                r = nodes[i];
                if let Some(o) = out.as_deref_mut() {
                    o[i] = y;
                }
            }
            Ok(y)
        };
        let scale = self.height;
        let (x, _) = newton2(
            |x| {
                let f = forward(x[0].exp(), None)?;
                let b = backward(x[1].exp(), None)?;
                Ok([(f[0] - b[0]) / scale, (f[1] - b[1]) / scale])
            },
            [self.height.ln(), self.tail_coefficient.ln()],
            1e-15,
            60,
        )?;
        let mut values = vec![[0.0; 2]; nodes.len()];
        let mut back = vec![[0.0; 2]; nodes.len()];
        forward(x[0].exp(), Some(&mut values))?;
        backward(x[1].exp(), Some(&mut back))?;
        values[j + 1..far].copy_from_slice(&back[j + 1..far]);
        let tail_coefficient = x[1].exp();
        let tail = |r: f64| {
            let (k, dk) = decaying_solution(self.dimension, r);
            [tail_coefficient * k, tail_coefficient * dk]
        };
        for i in far..nodes.len() {
            values[i] = tail(nodes[i]);
        }
        let mut r = nodes.to_vec();
        let last = *nodes.last().unwrap();
        if extend_to > last {
            let cells = ((extend_to - last) / 0.05).ceil().max(1.0) as usize;
            let h = (extend_to - last) / cells as f64;
            for i in 1..=cells {
                let x = if i == cells { extend_to } else { last + i as f64 * h };
                r.push(x);
                values.push(tail(x));
            }
        }
        let (u, du) = values.iter().map(|y| (y[0], y[1])).unzip();
        RadialProfile::new(self.dimension, r, u, du, TerminalEvent::ReachedEnd)
    }

    /// `Q̂ = d0^{−1/(p−2)}·Q`, the soliton of `−Δv + v = d0·|v|^{p−2}v`.
    pub fn renormalized(&self, d0: f64) -> Result<Self> {
        if !(d0 > 0.0 && d0.is_finite()) {
            return Err(Error::Domain(format!("weight at the origin must be positive, got {d0}")));
        }
        let s = d0.powf(-1.0 / (self.exponent - 2.0));
        Ok(Self {
            profile: self.profile.rescaled(1.0, s),
            height: self.height * s,
            tail_coefficient: self.tail_coefficient * s,
            core_mass: self.core_mass * s * s,
            tail_mass: self.tail_mass * s * s,
            mass: self.mass * s * s,
            ..self.clone()
        })
    }
}

/// Solves for `Q` by bisection on the separatrix height, then polishes by
/// two-sided matching to the linear tail at `far_radius`.
pub fn solve_whole_space_q(dimension: usize, exponent: f64, settings: &QSettings) -> Result<QProfile> {
    check_exponent(dimension, exponent)?;
    settings.integrator.validate()?;
    if !(settings.far_radius >= 20.0 && settings.probe_radius > 0.0 && settings.cut_ratio > 0.0) {
        return Err(Error::Validation("far radius must be at least 20 and probe radius and cut ratio positive".into()));
    }
    let problem = RadialProblem::new(dimension, exponent, 1.0)?;
    let field = Field::new(dimension, 1.0, Some(&problem));
    let s = &settings.integrator;
    let probe_stops = Stops { zero: true, rising: true, u_max: f64::INFINITY };
    let free = Stops { zero: false, rising: false, u_max: f64::INFINITY };

    // Heights at or below the constant equilibrium u ≡ 1 never cross zero.
    let crosses = |a: f64| -> Result<bool> {
        let t = shoot_with(&field, a, settings.probe_radius, s, Mode::Probe, probe_stops)?;
        Ok(matches!(t.end, End::Zero(_)))
    };
    let mut lo = 1.0;
    let mut hi = 2.0;
    let mut expansions = 0;
    while !crosses(hi)? {
        lo = hi;
        hi *= 2.0;
        expansions += 1;
        if expansions > 60 {
            return Err(Error::Numeric(format!("no crossing height found up to {hi:e}")));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if !(mid > lo && mid < hi) {
            break;
        }
        if crosses(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    if hi - lo > 1e-10 * hi {
        return Err(Error::Numeric(format!("separatrix bisection stagnated in [{lo}, {hi}]")));
    }

    // Matching radius: where the shot falls to a tenth of its height.
    let probe = shoot_with(&field, lo, settings.probe_radius, s, Mode::Record, probe_stops)?;
    let r_m = probe
        .r
        .iter()
        .zip(&probe.u)
        .find(|(_, &u)| u <= 0.1 * lo)
        .map(|(&r, _)| r)
        .ok_or_else(|| Error::Numeric("soliton shot never decayed to a tenth of its height".into()))?;

    let r_far = settings.far_radius;
    let (k_far, dk_far) = decaying_solution(dimension, r_far);
    let forward = |a: f64| -> Result<[f64; 2]> {
        let t = shoot_with(&field, a, r_m, s, Mode::Record, free)?;
        ended_at(&t, r_m)
    };
    let backward = |c: f64, mode: Mode| {
        let y0 = [c * k_far, c * dk_far];
        march(&field, r_far, y0, r_m, y0[0].abs(), s, mode, free)
    };
    // Initial tail coefficient: match the linear backward solution to the
    // forward value at r_m.
    let uf = forward(lo)?;
    let unit = ended_at(&backward(1.0, Mode::Probe)?, r_m)?;
    let c0 = uf[0] / unit[0];
    let (x, residual) = newton2(
        |x| {
            let f = forward(x[0].exp())?;
            let b = ended_at(&backward(x[1].exp(), Mode::Record)?, r_m)?;
            Ok([(f[0] - b[0]) / lo, (f[1] - b[1]) / lo])
        },
        [lo.ln(), c0.ln()],
        settings.matching_tol,
        settings.max_newton,
    )?;
    let (height, coefficient) = (x[0].exp(), x[1].exp());

    let head = shoot_with(&field, height, r_m, s, Mode::Record, free)?;
    let tail = backward(coefficient, Mode::Record)?;
    let cut = settings.cut_ratio * height;
    let mut r = head.r;
    let mut u = head.u;
    let mut du = head.du;
    for i in (0..tail.r.len() - 1).rev() {
        r.push(tail.r[i]);
        u.push(tail.u[i]);
        du.push(tail.du[i]);
        if tail.u[i] < cut {
            break;
        }
    }
    if *u.last().unwrap() >= cut {
        return Err(Error::Numeric("soliton did not decay below the cut ratio before the matching radius".into()));
    }
    for i in 1..u.len() {
        if !(u[i] > 0.0 && u[i] < u[i - 1]) {
            return Err(Error::Numeric(format!("soliton profile is not positive and decreasing at r = {}", r[i])));
        }
    }
    let r_cut = *r.last().unwrap();
    let profile = RadialProfile::new(dimension, r, u, du, TerminalEvent::ReachedEnd)?;
    let core_mass = profile.mass();
    let tail_mass =
        sphere_area(dimension) * coefficient * coefficient * std::f64::consts::FRAC_PI_4 * (-2.0 * r_cut).exp();
    Ok(QProfile {
        dimension,
        exponent,
        profile,
        height,
        tail_coefficient: coefficient,
        r_cut,
        core_mass,
        tail_mass,
        mass: core_mass + tail_mass,
        matching_residual: residual,
        matching_radius: r_m,
        far_radius: r_far,
        integrator: *s,
    })
}

/// `(k, k')` for `k(r) = r^{−ν}K_ν(r)`, `ν = N/2 − 1`, the decaying radial
/// solution of `−Δk + k = 0`. Uses `d/dr[r^{−ν}K_ν] = −r^{−ν}K_{ν+1}`.
/// Valid for `r ≳ 15` (asymptotic series).
pub(crate) fn decaying_solution(dimension: usize, r: f64) -> (f64, f64) {
    let nu = 0.5 * dimension as f64 - 1.0;
    let scale = r.powf(-nu);
    (scale * bessel_k_large(nu, r), -scale * bessel_k_large(nu + 1.0, r))
}

/// Large-argument expansion of the modified Bessel function `K_ν(r)`,
/// summed until the terms stop decreasing.
pub(crate) fn bessel_k_large(nu: f64, r: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..60 {
        let kf = k as f64;
        let next = term * (mu - (2.0 * kf - 1.0).powi(2)) / (8.0 * kf * r);
        if next == 0.0 {
            break;
        }
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    (std::f64::consts::FRAC_PI_2 / r).sqrt() * (-r).exp() * sum
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bessel_half_integer_is_exact() {
        // K_{1/2}(r) = sqrt(π/(2r)) e^{−r}; K_{3/2}(r) = K_{1/2}(r)(1 + 1/r).
        let r = 3.0;
        let k12 = (std::f64::consts::FRAC_PI_2 / r).sqrt() * (-r).exp();
        assert!((bessel_k_large(0.5, r) - k12).abs() < 1e-16);
        assert!((bessel_k_large(1.5, r) - k12 * (1.0 + 1.0 / r)).abs() < 1e-16);
    }

    #[test]
    fn bessel_k0_reference() {
        // K_0(20) = 5.741237815336524e-10.
        let v = bessel_k_large(0.0, 20.0);
        assert!((v / 5.741237815336524e-10 - 1.0).abs() < 1e-13, "{v:e}");
    }

    #[test]
    fn three_dimensional_soliton() {
        let q = solve_whole_space_q(3, 4.0, &QSettings::default()).unwrap();
        assert!(q.matching_residual < 1e-10);
        assert!(q.height > 1.0);
        for r in [q.r_cut * 0.9, q.r_cut] {
            let (u, _) = q.eval(r);
            let (t, _) = q.tail(r);
            assert!((u / t - 1.0).abs() < 1e-6, "tail mismatch at {r}");
        }
    }
}
