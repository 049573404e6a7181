//! Positive Dirichlet ground states on the ball, the whole-space soliton `Q`
//! and the first Dirichlet eigenvalue.
//!
//! Ground states are computed by shooting on the centre height `a = u(0)`.
//! The first-zero radius `ρ(a)` decreases with `a`, so bisection between a
//! height that never crosses zero on `[0, R]` and one that crosses before
//! `R` converges to the ground state. When `√λ·R` is large the needed
//! precision on `a` drops below one ulp; the bracket then collapses and the
//! solver switches to two-sided matched shooting (forward from the origin,
//! backward from `u(R) = 0`), solved by Newton's method.

mod eigen;
mod flow;
mod whole_space;

pub use eigen::first_dirichlet_eigenvalue;
pub use flow::{q_by_gradient_flow, FlowSettings, FlowSolution};
pub use whole_space::{solve_whole_space_q, QProfile, QSettings};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ode::{march, shoot, shoot_with, End, Field, IntegratorSettings, Mode, Stops, Trajectory};
use crate::problem::RadialProblem;
use crate::profile::{RadialProfile, TerminalEvent};

/// Controls for [`shoot_ground_state`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GroundStateSettings {
    pub integrator: IntegratorSettings,
    /// Accept `a` when `|ρ(a) − R| ≤ radius_tol·R`.
    pub radius_tol: f64,
    /// Accept the profile when `|u(R)| ≤ boundary_tol·a`.
    pub boundary_tol: f64,
    /// Distance kept above `−λ₁`; `None` means `1e-6·(1 + |λ₁|)`.
    pub margin: Option<f64>,
    /// Bracket width for the first eigenvalue.
    pub eigen_tol: f64,
    /// Maximum number of geometric expansion steps while bracketing `a`.
    pub expansion_budget: usize,
    /// Extra probes on each side of the final bracket, at factors `2^j`,
    /// used to detect a non-monotone shooting map.
    pub ambiguity_scan: usize,
    /// Target for the scaled matching residual of the two-sided solve.
    pub matching_tol: f64,
    pub max_newton: usize,
}

impl Default for GroundStateSettings {
    fn default() -> Self {
        Self {
            integrator: IntegratorSettings::default(),
            radius_tol: 1e-10,
            boundary_tol: 1e-8,
            margin: None,
            eigen_tol: 1e-12,
            expansion_budget: 200,
            ambiguity_scan: 4,
            matching_tol: 1e-12,
            max_newton: 60,
        }
    }
}

impl GroundStateSettings {
    pub fn validate(&self) -> Result<()> {
        self.integrator.validate()?;
        let positive = [self.radius_tol, self.boundary_tol, self.eigen_tol, self.matching_tol];
        if positive.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::Validation("ground-state tolerances must be positive".into()));
        }
        if matches!(self.margin, Some(m) if !(m >= 0.0)) {
            return Err(Error::Validation("eigenvalue margin must be nonnegative".into()));
        }
        if self.expansion_budget == 0 || self.max_newton == 0 {
            return Err(Error::Validation("iteration budgets must be positive".into()));
        }
        Ok(())
    }
}

/// How the final height was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ShootingRoute {
    /// Bisection alone located the first zero within the radius tolerance.
    Bisection { crossing: f64 },
    /// Two-sided matched shooting from the bisection limit.
    Matched { matching_radius: f64, residual: f64, slope_at_boundary: f64 },
}

/// A positive radial solution of `−Δu + λu = f(r,u)` in `B_R`, `u = 0` on `∂B_R`.
#[derive(Debug, Clone)]
pub struct GroundState {
    pub problem: RadialProblem,
    pub lambda: f64,
    pub profile: RadialProfile,
    /// Shooting height `a* = u(0)`.
    pub height: f64,
    /// `∫_{B_R} u²`.
    pub mass: f64,
    pub energy: f64,
    pub nehari_residual: f64,
    /// `∫_{B_R} |∇u|²`.
    pub gradient_norm_sq: f64,
    pub route: ShootingRoute,
}

/// Scalar diagnostics of a [`GroundState`], in a stable serialization order.
#[derive(Debug, Clone, Serialize)]
pub struct GroundStateSummary {
    pub lambda: f64,
    pub height: f64,
    pub mass: f64,
    pub energy: f64,
    pub nehari_residual: f64,
    pub relative_residual: f64,
    pub gradient_norm_sq: f64,
    pub boundary_value: f64,
    pub nodes: usize,
    pub route: ShootingRoute,
}

impl GroundState {
    /// `|residual| / (‖∇u‖² + λ‖u‖²)`, or the absolute residual when the
    /// denominator vanishes.
    pub fn relative_residual(&self) -> f64 {
        let scale = (self.gradient_norm_sq + self.lambda * self.mass).abs();
        if scale > 0.0 {
            self.nehari_residual.abs() / scale
        } else {
            self.nehari_residual.abs()
        }
    }

    pub fn summary(&self) -> GroundStateSummary {
        GroundStateSummary {
            lambda: self.lambda,
            height: self.height,
            mass: self.mass,
            energy: self.energy,
            nehari_residual: self.nehari_residual,
            relative_residual: self.relative_residual(),
            gradient_norm_sq: self.gradient_norm_sq,
            boundary_value: self.profile.last_u(),
            nodes: self.profile.len(),
            route: self.route,
        }
    }

    /// Strictly decreasing on the stored grid.
    pub fn is_decreasing(&self) -> bool {
        self.profile.u().windows(2).all(|w| w[1] < w[0])
    }
}

/// `∫ u²` over the profile's ball.
pub fn mass(profile: &RadialProfile) -> f64 {
    profile.mass()
}

/// `J(u) = ½(‖∇u‖² + λ‖u‖²) − ∫ F(r,u)`.
pub fn energy(profile: &RadialProfile, lambda: f64, problem: &RadialProblem) -> f64 {
    let potential = profile.integrate(|r, u, _| problem.primitive(r, u));
    0.5 * (profile.gradient_norm_sq() + lambda * profile.mass()) - potential
}

/// `‖∇u‖² + λ‖u‖² − ∫ f(r,u)·u`.
pub fn nehari_residual(profile: &RadialProfile, lambda: f64, problem: &RadialProblem) -> f64 {
    let work = profile.integrate(|r, u, _| problem.f(r, u) * u);
    profile.gradient_norm_sq() + lambda * profile.mass() - work
}

/// Solves for the positive ground state at multiplier `lambda`.
///
/// `warm_start` seeds the bracket search with a nearby height (typically
/// the previous point of a continuation); without it the seed follows the
/// pure-power scaling `a ~ (λ + λ₁)^{1/(p−2)}`.
pub fn shoot_ground_state(
    problem: &RadialProblem,
    lambda: f64,
    settings: &GroundStateSettings,
    warm_start: Option<f64>,
) -> Result<GroundState> {
    settings.validate()?;
    if !lambda.is_finite() {
        return Err(Error::Validation(format!("lambda must be finite, got {lambda}")));
    }
    let n = problem.dimension();
    let radius = problem.radius();
    let lambda_1 = first_dirichlet_eigenvalue(n, radius, settings.eigen_tol)?;
    let margin = settings.margin.unwrap_or(1e-6 * (1.0 + lambda_1.abs()));
    if lambda <= -lambda_1 + margin {
        return Err(Error::BelowFirstEigenvalue { lambda, threshold: -lambda_1 });
    }
    let field = Field::new(n, lambda, Some(problem));
    let shooter = Shooter { field, radius, settings };

    let seed = match warm_start {
        Some(a) if a > 0.0 && a.is_finite() => a,
        _ => {
            let d0 = problem.weight().value(0.0);
            let d0 = if d0 > 0.0 { d0 } else { 1.0 };
            ((lambda + lambda_1).max(1.0) / d0).powf(1.0 / (problem.exponent() - 2.0))
        }
    };
    let (mut lo, mut hi, mut rho_hi) = shooter.bracket(seed, warm_start.is_some())?;
    shooter.scan_for_ambiguity(lo, hi)?;

    let accept = |rho: f64| rho >= radius * (1.0 - settings.radius_tol) && rho <= radius;
    while !accept(rho_hi) {
        let mid = if hi / lo > 2.0 { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
        if !(mid > lo && mid < hi) || hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
        match shooter.classify(mid)? {
            Shot::Crosses(rho) => {
                hi = mid;
                rho_hi = rho;
            }
            Shot::Stays => lo = mid,
        }
    }

    let (profile, route, height) = if accept(rho_hi) {
        let t = shoot(&shooter.field, hi, radius, &settings.integrator, Mode::Record)?;
        (t.into_profile(n)?, ShootingRoute::Bisection { crossing: rho_hi }, hi)
    } else {
        shooter.matched(lo, hi)?
    };

    finish(problem, lambda, profile, height, route, settings)
}

fn finish(
    problem: &RadialProblem,
    lambda: f64,
    profile: RadialProfile,
    height: f64,
    route: ShootingRoute,
    settings: &GroundStateSettings,
) -> Result<GroundState> {
    let u = profile.u();
    if let Some(i) = u[..u.len() - 1].iter().position(|&v| !(v > 0.0)) {
        return Err(Error::Numeric(format!("ground state is not positive: u({}) = {}", profile.r()[i], u[i])));
    }
    let boundary = profile.last_u();
    if boundary.abs() > settings.boundary_tol * height {
        return Err(Error::Numeric(format!("boundary value u(R) = {boundary} exceeds tolerance")));
    }
    let mass = profile.mass();
    let gradient_norm_sq = profile.gradient_norm_sq();
    let energy = energy(&profile, lambda, problem);
    let nehari_residual = nehari_residual(&profile, lambda, problem);
    Ok(GroundState {
        problem: problem.clone(),
        lambda,
        profile,
        height,
        mass,
        energy,
        nehari_residual,
        gradient_norm_sq,
        route,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Shot {
    /// First zero at the given radius, inside `[0, R]`.
    Crosses(f64),
    /// Positive on `[0, R]`.
    Stays,
}

struct Shooter<'a> {
    field: Field<'a>,
    radius: f64,
    settings: &'a GroundStateSettings,
}

impl Shooter<'_> {
    fn classify(&self, a: f64) -> Result<Shot> {
        let t = shoot(&self.field, a, self.radius, &self.settings.integrator, Mode::Probe)?;
        Ok(match t.end {
            End::Zero(r) => Shot::Crosses(r),
            _ => Shot::Stays,
        })
    }

    /// Geometric expansion from `seed` until a height that stays positive
    /// and one that crosses are found. Returns `(lo, hi, ρ(hi))`.
    fn bracket(&self, seed: f64, warm: bool) -> Result<(f64, f64, f64)> {
        let mut factor: f64 = if warm { 1.05 } else { 2.0 };
        let budget = self.settings.expansion_budget;
        match self.classify(seed)? {
            Shot::Crosses(rho) => {
                let (mut hi, mut rho_hi) = (seed, rho);
                for _ in 0..budget {
                    let a = hi / factor;
                    match self.classify(a)? {
                        Shot::Crosses(r) => {
                            hi = a;
                            rho_hi = r;
                        }
                        Shot::Stays => return Ok((a, hi, rho_hi)),
                    }
                    factor = (factor * factor).min(2.0);
                }
                Err(Error::Numeric(format!("no positive shot found below a = {hi:e} within {budget} expansion steps")))
            }
            Shot::Stays => {
                let mut lo = seed;
                for _ in 0..budget {
                    let a = lo * factor;
                    match self.classify(a)? {
                        Shot::Crosses(r) => return Ok((lo, a, r)),
                        Shot::Stays => lo = a,
                    }
                    factor = (factor * factor).min(2.0);
                }
                Err(Error::Numeric(format!(
                    "no crossing shot found above a = {lo:e} within {budget} expansion steps \
                     (the shooting map does not depend on a)"
                )))
            }
        }
    }

    /// Probes `lo/2^j` and `hi·2^j`; a positive shot above the bracket or a
    /// crossing one below it means the shooting map is not monotone.
    fn scan_for_ambiguity(&self, lo: f64, hi: f64) -> Result<()> {
        let k = self.settings.ambiguity_scan;
        if k == 0 {
            return Ok(());
        }
        let mut samples: Vec<(f64, bool)> = Vec::with_capacity(2 * k + 2);
        for j in (1..=k).rev() {
            let a = lo / f64::powi(2.0, j as i32);
            samples.push((a, matches!(self.classify(a)?, Shot::Crosses(_))));
        }
        samples.push((lo, false));
        samples.push((hi, true));
        for j in 1..=k {
            let a = hi * f64::powi(2.0, j as i32);
            samples.push((a, matches!(self.classify(a)?, Shot::Crosses(_))));
        }
        let brackets: Vec<(f64, f64)> =
            samples.windows(2).filter(|w| w[0].1 != w[1].1).map(|w| (w[0].0, w[1].0)).collect();
        if brackets.len() > 1 {
            return Err(Error::Ambiguity { brackets });
        }
        Ok(())
    }

    /// Two-sided shooting: unknowns `(ln a, ln(−u'(R)))`, matched in `(u, u')`
    /// at the radius where the last positive shot falls to a tenth of its height.
    fn matched(&self, lo: f64, hi: f64) -> Result<(RadialProfile, ShootingRoute, f64)> {
        let s = &self.settings.integrator;
        let n = self.field_dimension();
        let radius = self.radius;
        let free = Stops { zero: false, rising: false, u_max: f64::INFINITY };

        let probe = shoot(&self.field, lo, radius, s, Mode::Record)?;
        let r_m = probe
            .r
            .iter()
            .zip(&probe.u)
            .find(|(_, &u)| u <= 0.1 * lo)
            .map(|(&r, _)| r)
            .filter(|&r| r > 0.0 && r < radius)
            .unwrap_or(0.5 * radius);

        let forward = |a: f64| -> Result<[f64; 2]> {
            let t = shoot_with(&self.field, a, r_m, s, Mode::Record, free)?;
            ended_at(&t, r_m)
        };
        let rate = self.field_rate();
        let backward = |slope: f64| -> Result<[f64; 2]> {
            let scale = slope.abs() / rate;
            let t = march(&self.field, radius, [0.0, slope], r_m, scale, s, Mode::Record, free)?;
            ended_at(&t, r_m)
        };

        // Initial slope from the linear backward problem, scaled to the forward value.
        let a0 = hi;
        let uf0 = forward(a0)?;
        let linear = Field::new(n, self.field_lambda(), None);
        let t = march(&linear, radius, [0.0, -1.0], r_m, 1.0 / rate, s, Mode::Probe, free)?;
        let ul = ended_at(&t, r_m)?;
        let slope0 = if ul[0] > 0.0 { -uf0[0] / ul[0] } else { -a0 * rate };

        let u_scale = a0;
        let du_scale = a0 * rate;
        let residual = |x: [f64; 2]| -> Result<[f64; 2]> {
            let f = forward(x[0].exp())?;
            let b = backward(-x[1].exp())?;
            Ok([(f[0] - b[0]) / u_scale, (f[1] - b[1]) / du_scale])
        };
        let x = newton2(residual, [a0.ln(), (-slope0).ln()], self.settings.matching_tol, self.settings.max_newton)?;
        let (x, res) = x;
        let a = x[0].exp();
        let slope = -x[1].exp();

        let head = shoot_with(&self.field, a, r_m, s, Mode::Record, free)?;
        let scale = slope.abs() / rate;
        let tail = march(&self.field, radius, [0.0, slope], r_m, scale, s, Mode::Record, free)?;
        let mut r = head.r;
        let mut u = head.u;
        let mut du = head.du;
        for i in (0..tail.r.len() - 1).rev() {
            r.push(tail.r[i]);
            u.push(tail.u[i]);
            du.push(tail.du[i]);
        }
        let profile = RadialProfile::new(n, r, u, du, TerminalEvent::ZeroCrossing(radius))?;
        let route = ShootingRoute::Matched { matching_radius: r_m, residual: res, slope_at_boundary: slope };
        Ok((profile, route, a))
    }

    fn field_dimension(&self) -> usize {
        self.field.dimension()
    }

    fn field_lambda(&self) -> f64 {
        self.field.lambda()
    }

    fn field_rate(&self) -> f64 {
        (1.0 + self.field.lambda().abs()).sqrt()
    }
}

/// State at the end of a free march, which must have reached `r_end`.
pub(crate) fn ended_at(t: &Trajectory, r_end: f64) -> Result<[f64; 2]> {
    let (r, y) = t.last;
    if t.end != End::Reached || (r - r_end).abs() > 1e-12 * r_end.abs().max(1.0) {
        return Err(Error::Numeric(format!("matching integration stopped early at r = {r}")));
    }
    if !(y[0].is_finite() && y[1].is_finite()) {
        return Err(Error::Numeric(format!("matching integration overflowed near r = {r}")));
    }
    Ok(y)
}

/// Damped Newton iteration for a 2×2 system with a forward-difference
/// Jacobian. Returns the root and the final max-norm residual.
pub(crate) fn newton2(
    f: impl Fn([f64; 2]) -> Result<[f64; 2]>,
    x0: [f64; 2],
    tol: f64,
    max_iter: usize,
) -> Result<([f64; 2], f64)> {
    let norm = |v: [f64; 2]| v[0].abs().max(v[1].abs());
    let mut x = x0;
    let mut fx = f(x)?;
    let mut best = norm(fx);
    let mut stalled = 0;
    for _ in 0..max_iter {
        if best <= tol {
            return Ok((x, best));
        }
        let mut jac = [[0.0; 2]; 2];
        for j in 0..2 {
            let delta = 1e-7 * x[j].abs().max(1.0);
            let mut xp = x;
            xp[j] += delta;
            let fp = f(xp)?;
            jac[0][j] = (fp[0] - fx[0]) / delta;
            jac[1][j] = (fp[1] - fx[1]) / delta;
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if !(det.abs() > 0.0 && det.is_finite()) {
            return Err(Error::Numeric("singular Jacobian in matched shooting".into()));
        }
        let step = [-(jac[1][1] * fx[0] - jac[0][1] * fx[1]) / det, -(-jac[1][0] * fx[0] + jac[0][0] * fx[1]) / det];
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..40 {
            let trial = [x[0] + t * step[0], x[1] + t * step[1]];
            if let Ok(ft) = f(trial) {
                if norm(ft) < best {
                    x = trial;
                    fx = ft;
                    best = norm(ft);
                    improved = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !improved {
            stalled += 1;
            if stalled > 1 {
                break;
            }
        }
    }
    if best <= tol.max(1e-9) {
        Ok((x, best))
    } else {
        Err(Error::Numeric(format!("matched shooting did not converge: residual {best:e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::Weight;

    fn pure(n: usize, p: f64) -> RadialProblem {
        RadialProblem::new(n, p, 1.0).unwrap()
    }

    #[test]
    fn below_eigenvalue_is_rejected() {
        let pb = pure(3, 3.0);
        let l1 = std::f64::consts::PI.powi(2);
        let err = shoot_ground_state(&pb, -2.0 * l1, &GroundStateSettings::default(), None).unwrap_err();
        assert_eq!(err.kind(), "below_first_eigenvalue");
    }

    #[test]
    fn linear_problem_has_no_bracket() {
        let pb = pure(3, 3.0).with_weight(Weight::Constant(0.0));
        let err = shoot_ground_state(&pb, 0.0, &GroundStateSettings::default(), None).unwrap_err();
        assert_eq!(err.kind(), "numeric");
    }

    #[test]
    fn moderate_lambda_by_bisection() {
        let gs = shoot_ground_state(&pure(3, 3.0), 0.0, &GroundStateSettings::default(), None).unwrap();
        assert!(matches!(gs.route, ShootingRoute::Bisection { .. }));
        assert!(gs.relative_residual() < 1e-8, "{}", gs.relative_residual());
        assert!(gs.is_decreasing());
    }

    #[test]
    fn large_lambda_by_matching() {
        let gs = shoot_ground_state(&pure(3, 4.0), 1e4, &GroundStateSettings::default(), None).unwrap();
        assert!(matches!(gs.route, ShootingRoute::Matched { .. }), "{:?}", gs.route);
        assert!(gs.relative_residual() < 1e-8, "{}", gs.relative_residual());
        assert!(gs.is_decreasing());
    }

    #[test]
    fn warm_start_reproduces_cold_solution() {
        let pb = pure(3, 4.0);
        let s = GroundStateSettings::default();
        let cold = shoot_ground_state(&pb, 5.0, &s, None).unwrap();
        let warm = shoot_ground_state(&pb, 5.0, &s, Some(cold.height * 1.01)).unwrap();
        assert!((cold.mass - warm.mass).abs() < 1e-9 * cold.mass);
    }
}
