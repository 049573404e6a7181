//! Slope criterion for standing waves along the branch, and the radial
//! linearized spectrum used to check nondegeneracy.
//!
//! Stability is decided by the sign of `M'(λ)` for the unsquared mass
//! `M(λ) = ‖u_λ‖`; `M' = m'/(2M)` has the sign of the squared-mass slope.

use serde::Serialize;

use crate::continuation::{mass_lookup, par_map, MassCurve};
use crate::error::{Error, Result};
use crate::fv::{smallest_eigenvalues, RadialGrid};
use crate::ground_state::{shoot_ground_state, GroundState, GroundStateSettings};
use crate::problem::Regime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityClass {
    Stable,
    Unstable,
    Inconclusive,
}

/// Richardson-extrapolated central difference of `M(λ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeEstimate {
    pub lambda: f64,
    /// `M(λ) = ‖u_λ‖`.
    pub mass: f64,
    pub slope: f64,
    /// `|D(h/2) − D(h)|/3`, the truncation estimate of the half-step difference.
    pub slope_err: f64,
    pub step: f64,
}

impl SlopeEstimate {
    /// `|slope| < 3·slope_err` is inconclusive.
    pub fn class(&self) -> StabilityClass {
        if self.slope.abs() < 3.0 * self.slope_err {
            StabilityClass::Inconclusive
        } else if self.slope > 0.0 {
            StabilityClass::Stable
        } else {
            StabilityClass::Unstable
        }
    }
}

/// `M'(λ)` from fresh solves at `λ ± h` and `λ ± h/2`, with
/// `h = max(1e−3·(1 + |λ|), local sample spacing)`, shortened to stay inside
/// the traced range and away from `−λ₁`.
pub fn mass_slope(curve: &MassCurve, lambda: f64, settings: &GroundStateSettings) -> Result<SlopeEstimate> {
    let lambdas = curve.lambdas();
    let (lo, hi) = (curve.lambda_min, curve.lambda_max);
    if lambdas.len() < 2 || !(lambda > lo && lambda < hi) {
        return Err(Error::Domain(format!("lambda = {lambda} is not interior to the traced range [{lo}, {hi}]")));
    }
    let i = lambdas.partition_point(|&l| l < lambda).clamp(1, lambdas.len() - 1);
    let spacing = lambdas[i] - lambdas[i - 1];
    let mut h = (1e-3 * (1.0 + lambda.abs())).max(spacing);
    h = h.min(lambda - lo).min(hi - lambda).min(0.5 * (lambda + curve.lambda_1));
    if !(h > 0.0) {
        return Err(Error::Domain(format!("no room for a difference step at lambda = {lambda}")));
    }
    let problem = &curve.problem;
    let root_mass = |l: f64| -> Result<f64> {
        Ok(shoot_ground_state(problem, l, settings, curve.interpolated_height(l))?.mass.sqrt())
    };
    let d = |step: f64| -> Result<f64> { Ok((root_mass(lambda + step)? - root_mass(lambda - step)?) / (2.0 * step)) };
    let (d1, d2) = (d(h)?, d(0.5 * h)?);
    let slope = (4.0 * d2 - d1) / 3.0;
    let mass = root_mass(lambda)?;
    Ok(SlopeEstimate { lambda, mass, slope, slope_err: (d2 - d1).abs() / 3.0, step: h })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityVerdict {
    pub lambda: f64,
    pub mass: f64,
    pub slope: f64,
    pub slope_err: f64,
    pub verdict: StabilityClass,
    /// Smallest eigenvalue magnitude of the radial linearization.
    pub nondeg_gap: f64,
    /// Set when the gap is below [`GAP_TOL`].
    pub gap_warning: bool,
}

/// Gap below which nondegeneracy is flagged as doubtful.
pub const GAP_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Serialize)]
pub struct MassClassification {
    pub target_mass: f64,
    pub verdicts: Vec<StabilityVerdict>,
    /// Deviations from the expected pattern, or lookup remarks.
    pub notes: Vec<String>,
}

/// Slope verdicts at every λ with `m(λ) = c`, sorted by λ. For a
/// supercritical problem with two roots the expected pattern is
/// (stable, unstable); any deviation is noted, not corrected.
pub fn classify_at_mass(
    curve: &MassCurve,
    c: f64,
    settings: &GroundStateSettings,
    spectrum_cells: usize,
    threads: Option<usize>,
) -> Result<MassClassification> {
    let lookup = mass_lookup(curve, c, settings)?;
    let mut notes: Vec<String> = lookup.note.iter().cloned().collect();
    let results = par_map(&lookup.roots, threads, |root| -> Result<StabilityVerdict> {
        let slope = mass_slope(curve, root.lambda, settings)?;
        let gap = nondegeneracy_gap(&root.state, spectrum_cells)?;
        Ok(StabilityVerdict {
            lambda: root.lambda,
            mass: root.state.mass.sqrt(),
            slope: slope.slope,
            slope_err: slope.slope_err,
            verdict: slope.class(),
            nondeg_gap: gap,
            gap_warning: gap < GAP_TOL,
        })
    })?;
    let verdicts = results.into_iter().collect::<Result<Vec<_>>>()?;
    let classes: Vec<StabilityClass> = verdicts.iter().map(|v| v.verdict).collect();
    let expected: Option<&[StabilityClass]> = match curve.problem.regime() {
        Regime::Supercritical if classes.len() == 2 => Some(&[StabilityClass::Stable, StabilityClass::Unstable]),
        Regime::Subcritical if classes.len() == 1 => Some(&[StabilityClass::Stable]),
        _ => None,
    };
    if let Some(expected) = expected {
        if classes != expected {
            notes.push(format!("verdicts {classes:?} deviate from the expected pattern {expected:?}"));
        }
    }
    if verdicts.iter().any(|v| v.gap_warning) {
        notes.push(format!("a nondegeneracy gap is below {GAP_TOL:e}; the slope test may not apply"));
    }
    Ok(MassClassification { target_mass: c, verdicts, notes })
}

/// Default number of cells of the linearization grid.
pub const SPECTRUM_CELLS: usize = 4000;

/// The `k` smallest eigenvalues of the radial operator
/// `L = −d²/dr² − (N−1)/r·d/dr + λ − f_u(r, u_λ(r))` with `u(R) = 0`, by a
/// second-order finite-volume discretization on `cells` uniform cells.
pub fn linearized_spectrum(gs: &GroundState, k: usize, cells: usize) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::Validation("request at least one eigenvalue".into()));
    }
    let problem = &gs.problem;
    let grid = RadialGrid::new(problem.dimension(), problem.radius(), cells)?;
    let potential: Vec<f64> =
        grid.r.iter().map(|&r| gs.lambda - problem.f_u(r, gs.profile.eval(r).map_or(0.0, |(u, _)| u))).collect();
    if potential.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("linearized potential is not finite".into()));
    }
    let (diag, off) = grid.symmetrized(|i| potential[i]);
    smallest_eigenvalues(&diag, &off, k)
}

/// `min |μ_j|` over the two lowest eigenvalues; higher ones exceed the second.
pub fn nondegeneracy_gap(gs: &GroundState, cells: usize) -> Result<f64> {
    let ev = linearized_spectrum(gs, 2, cells)?;
    Ok(ev.iter().fold(f64::INFINITY, |m, e| m.min(e.abs())))
}

/// Slope verdicts at several multipliers, computed concurrently.
pub fn classify_lambdas(
    curve: &MassCurve,
    lambdas: &[f64],
    settings: &GroundStateSettings,
    threads: Option<usize>,
) -> Result<Vec<SlopeEstimate>> {
    par_map(lambdas, threads, |&l| mass_slope(curve, l, settings))?.into_iter().collect()
}

/// Solves at `lambda` and returns the linearized spectrum together with
/// the state, for reporting.
pub fn spectrum_at(
    curve: &MassCurve,
    lambda: f64,
    k: usize,
    cells: usize,
    settings: &GroundStateSettings,
) -> Result<(GroundState, Vec<f64>)> {
    let gs = shoot_ground_state(&curve.problem, lambda, settings, curve.interpolated_height(lambda))?;
    let ev = linearized_spectrum(&gs, k, cells)?;
    Ok((gs, ev))
}
