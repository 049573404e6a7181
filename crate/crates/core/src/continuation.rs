//! The branch `λ ↦ u_λ` and its mass curve `m(λ) = ‖u_λ‖²`.
//!
//! The initial λ grid is solved in parallel, each point cold-started, and
//! merged in λ order. Refinement is sequential: the interval with the
//! largest mass jump among those exceeding the continuity budget is bisected
//! with a warm start, until no interval exceeds it or the refinement budget
//! runs out.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ground_state::{first_dirichlet_eigenvalue, shoot_ground_state, GroundState, GroundStateSettings};
use crate::problem::RadialProblem;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "NLS_MASSCURVE_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceSettings {
    pub ground_state: GroundStateSettings,
    /// Number of points in the initial grid.
    pub budget: usize,
    /// Refine where `|Δm| / max(m_i, m_{i+1})` exceeds this.
    pub jump_tol: f64,
    /// Maximum number of points added by refinement.
    pub max_refinements: usize,
    /// Worker threads; `None` reads [`THREADS_ENV`], then falls back to the
    /// machine parallelism.
    pub threads: Option<usize>,
}

impl Default for TraceSettings {
    fn default() -> Self {
        Self {
            ground_state: GroundStateSettings::default(),
            budget: 64,
            jump_tol: 0.05,
            max_refinements: 64,
            threads: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveSample {
    pub lambda: f64,
    pub mass: f64,
    pub height: f64,
    pub energy: f64,
    pub relative_residual: f64,
}

impl CurveSample {
    pub fn from_state(gs: &GroundState) -> Self {
        Self {
            lambda: gs.lambda,
            mass: gs.mass,
            height: gs.height,
            energy: gs.energy,
            relative_residual: gs.relative_residual(),
        }
    }
}

/// One refinement: the interval that was split, its relative mass jump and
/// the inserted multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RefinementEvent {
    pub lambda_left: f64,
    pub lambda_right: f64,
    pub lambda_new: f64,
    pub relative_jump: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MassCurve {
    #[serde(skip)]
    pub problem: RadialProblem,
    pub lambda_1: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub samples: Vec<CurveSample>,
    pub refinements: Vec<RefinementEvent>,
    /// Some interval still exceeds the continuity budget.
    pub budget_exhausted: bool,
}

impl MassCurve {
    pub fn lambdas(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.lambda).collect()
    }

    pub fn masses(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.mass).collect()
    }

    /// Largest sampled mass and its index.
    pub fn sample_max(&self) -> Option<(usize, f64)> {
        self.samples.iter().enumerate().map(|(i, s)| (i, s.mass)).fold(None, |acc, (i, m)| match acc {
            Some((_, best)) if best >= m => acc,
            _ => Some((i, m)),
        })
    }

    /// Height of the sample nearest to `lambda`, for warm starts.
    pub fn nearest_height(&self, lambda: f64) -> Option<f64> {
        self.samples
            .iter()
            .min_by(|a, b| (a.lambda - lambda).abs().total_cmp(&(b.lambda - lambda).abs()))
            .map(|s| s.height)
    }

    /// Heights interpolated linearly in λ between bracketing samples.
    pub fn interpolated_height(&self, lambda: f64) -> Option<f64> {
        let i = self.samples.partition_point(|s| s.lambda < lambda);
        if i == 0 || i == self.samples.len() {
            return self.nearest_height(lambda);
        }
        let (a, b) = (&self.samples[i - 1], &self.samples[i]);
        let t = (lambda - a.lambda) / (b.lambda - a.lambda);
        Some(a.height + t * (b.height - a.height))
    }

    /// CSV with columns `lambda,mass,a0,energy`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lambda,mass,a0,energy\n");
        for s in &self.samples {
            let _ = writeln!(out, "{:.16e},{:.16e},{:.16e},{:.16e}", s.lambda, s.mass, s.height, s.energy);
        }
        out
    }
}

/// Gnuplot script plotting `mass` against `lambda` from `csv_name`.
pub fn plot_script(csv_name: &str, title: &str, log_x: bool) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "set datafile separator ','");
    let _ = writeln!(out, "set key off");
    let _ = writeln!(out, "set title '{}'", title.replace('\'', ""));
    let _ = writeln!(out, "set xlabel 'lambda'");
    let _ = writeln!(out, "set ylabel 'mass'");
    if log_x {
        let _ = writeln!(out, "set logscale x");
    }
    let _ = writeln!(out, "plot '{csv_name}' using 1:2 every ::1 with linespoints pt 7 ps 0.5");
    out
}

/// A failed trace, with every sample solved before the failure.
#[derive(Debug, Clone)]
pub struct TraceError {
    pub error: Error,
    pub partial: Box<MassCurve>,
}

impl std::fmt::Display for TraceError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} ({} samples solved)", self.error, self.partial.samples.len())
    }
}

impl std::error::Error for TraceError {}

impl From<TraceError> for Error {
    fn from(e: TraceError) -> Self {
        e.error
    }
}

/// Default upper end of the traced range, `10³·(1 + λ₁)`.
pub fn default_lambda_max(problem: &RadialProblem, settings: &GroundStateSettings) -> Result<f64> {
    let l1 = first_dirichlet_eigenvalue(problem.dimension(), problem.radius(), settings.eigen_tol)?;
    Ok(1e3 * (1.0 + l1))
}

/// Worker count from the settings, then the environment.
pub fn worker_threads(requested: Option<usize>) -> Option<usize> {
    requested
        .filter(|&n| n > 0)
        .or_else(|| std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()).filter(|&n| n > 0))
}

/// Runs `f` over `items` in a pool capped at `threads` workers, keeping order.
pub(crate) fn par_map<T: Sync, R: Send>(
    items: &[T],
    threads: Option<usize>,
    f: impl Fn(&T) -> R + Sync + Send,
) -> Result<Vec<R>> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = worker_threads(threads) {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Numeric(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| items.par_iter().map(&f).collect()))
}

/// Initial λ grid: three quarters geometric in `λ + λ₁` (dense near `−λ₁`
/// and geometric toward `λ_max`), one quarter uniform in λ.
pub fn initial_grid(lambda_1: f64, lambda_min: f64, lambda_max: f64, budget: usize) -> Vec<f64> {
    let n_geo = (3 * budget).div_ceil(4).max(2);
    let n_uni = budget.saturating_sub(n_geo);
    let (x0, x1) = (lambda_min + lambda_1, lambda_max + lambda_1);
    let ratio = (x1 / x0).ln();
    let mut grid: Vec<f64> = (0..n_geo)
        .map(|i| {
            if i == 0 {
                lambda_min
            } else if i == n_geo - 1 {
                lambda_max
            } else {
                x0 * (ratio * i as f64 / (n_geo - 1) as f64).exp() - lambda_1
            }
        })
        .collect();
    let width = lambda_max - lambda_min;
    grid.extend((0..n_uni).map(|i| lambda_min + width * (i as f64 + 0.5) / n_uni as f64));
    grid.sort_by(f64::total_cmp);
    grid.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * (1.0 + b.abs()));
    grid
}

/// Midpoint of `[a, b]`: geometric in `λ + λ₁` across wide ratios,
/// arithmetic otherwise.
pub(crate) fn split_point(lambda_1: f64, a: f64, b: f64) -> f64 {
    let (xa, xb) = (a + lambda_1, b + lambda_1);
    if xa > 0.0 && xb / xa > 2.0 {
        (xa * xb).sqrt() - lambda_1
    } else {
        0.5 * (a + b)
    }
}

/// Traces `m(λ)` on `[λ_min, λ_max]`.
pub fn trace_mass_curve(
    problem: &RadialProblem,
    lambda_min: f64,
    lambda_max: f64,
    settings: &TraceSettings,
) -> std::result::Result<MassCurve, TraceError> {
    let gs = &settings.ground_state;
    let empty = |lambda_1: f64| MassCurve {
        problem: problem.clone(),
        lambda_1,
        lambda_min,
        lambda_max,
        samples: Vec::new(),
        refinements: Vec::new(),
        budget_exhausted: false,
    };
    let fail = |error: Error, partial: MassCurve| TraceError { error, partial: Box::new(partial) };

    let lambda_1 = first_dirichlet_eigenvalue(problem.dimension(), problem.radius(), gs.eigen_tol)
        .map_err(|e| fail(e, empty(f64::NAN)))?;
    if settings.budget < 16 {
        return Err(fail(
            Error::Validation(format!("budget must be at least 16 samples, got {}", settings.budget)),
            empty(lambda_1),
        ));
    }
    if !(settings.jump_tol > 0.0) {
        return Err(fail(Error::Validation("jump tolerance must be positive".into()), empty(lambda_1)));
    }
    if !(lambda_min > -lambda_1 && lambda_min < lambda_max && lambda_max.is_finite()) {
        return Err(fail(
            Error::Validation(format!(
                "need -lambda_1 < lambda_min < lambda_max, got -lambda_1 = {}, range [{lambda_min}, {lambda_max}]",
                -lambda_1
            )),
            empty(lambda_1),
        ));
    }

    let grid = initial_grid(lambda_1, lambda_min, lambda_max, settings.budget);
    let solved = par_map(&grid, settings.threads, |&l| shoot_ground_state(problem, l, gs, None))
        .map_err(|e| fail(e, empty(lambda_1)))?;
    let mut curve = empty(lambda_1);
    let mut first_error = None;
    for r in solved {
        match r {
            Ok(state) => curve.samples.push(CurveSample::from_state(&state)),
            Err(e) => {
                first_error.get_or_insert(e);
            }
        }
    }
    if let Some(e) = first_error {
        return Err(fail(e, curve));
    }

    let jump = |a: &CurveSample, b: &CurveSample| (b.mass - a.mass).abs() / a.mass.max(b.mass);
    loop {
        let candidate = curve
            .samples
            .windows(2)
            .enumerate()
            .filter(|(_, w)| jump(&w[0], &w[1]) > settings.jump_tol)
            .filter(|(_, w)| w[1].lambda - w[0].lambda > 1e-12 * (1.0 + w[0].lambda.abs()))
            .max_by(|(i, a), (j, b)| {
                let da = (a[1].mass - a[0].mass).abs();
                let db = (b[1].mass - b[0].mass).abs();
                da.total_cmp(&db).then(j.cmp(i))
            })
            .map(|(i, _)| i);
        let Some(i) = candidate else {
            curve.budget_exhausted = false;
            break;
        };
        if curve.refinements.len() >= settings.max_refinements {
            curve.budget_exhausted = true;
            break;
        }
        let (a, b) = (curve.samples[i], curve.samples[i + 1]);
        let lambda = split_point(lambda_1, a.lambda, b.lambda);
        let warm = (a.height * b.height).sqrt();
        match shoot_ground_state(problem, lambda, gs, Some(warm)) {
            Ok(state) => {
                curve.refinements.push(RefinementEvent {
                    lambda_left: a.lambda,
                    lambda_right: b.lambda,
                    lambda_new: lambda,
                    relative_jump: jump(&a, &b),
                });
                curve.samples.insert(i + 1, CurveSample::from_state(&state));
            }
            Err(e) => return Err(fail(e, curve)),
        }
    }
    Ok(curve)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Attainment {
    /// Strict interior maximum of the traced range.
    Interior,
    /// The largest value sits at the lower end of the range.
    BoundaryMin,
    /// The largest value sits at the upper end of the range (a supremum
    /// approached, not attained, as far as the trace can tell).
    BoundaryMax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    Increasing,
    Decreasing,
    Flat,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveExtrema {
    /// Largest mass found on the traced range.
    pub b: f64,
    pub lambda_star: f64,
    pub attainment: Attainment,
    pub lambda_min: f64,
    pub mass_at_min: f64,
    pub lambda_max: f64,
    pub mass_at_max: f64,
    pub trend_at_max: Trend,
    /// Fresh evaluations spent by the golden-section refinement.
    pub evaluations: usize,
}

/// Relative margin below which a sampled maximum counts as level with the
/// value at the upper end of the range.
pub const PLATEAU_TOL: f64 = 1e-9;

/// Maximum of a sampled function. An interior sample maximum is refined by
/// golden-section search on its two neighbouring cells, evaluating `f`,
/// until the bracket is below `rel_tol·max(1, |λ|)`.
pub fn extrema_of(
    lambdas: &[f64],
    values: &[f64],
    mut f: impl FnMut(f64) -> Result<f64>,
    rel_tol: f64,
) -> Result<CurveExtrema> {
    let n = lambdas.len();
    if n < 3 || values.len() != n {
        return Err(Error::Validation(format!("need at least 3 curve samples, got {n}")));
    }
    let i_max = (0..n).fold(0, |best, i| if values[i] > values[best] { i } else { best });
    let last = n - 1;
    let trend = {
        let d = values[last] - values[last - 1];
        if d.abs() <= 1e-12 * values[last].abs() {
            Trend::Flat
        } else if d > 0.0 {
            Trend::Increasing
        } else {
            Trend::Decreasing
        }
    };
    let mut out = CurveExtrema {
        b: values[i_max],
        lambda_star: lambdas[i_max],
        attainment: Attainment::Interior,
        lambda_min: lambdas[0],
        mass_at_min: values[0],
        lambda_max: lambdas[last],
        mass_at_max: values[last],
        trend_at_max: trend,
        evaluations: 0,
    };
    if i_max == 0 {
        out.attainment = Attainment::BoundaryMin;
        return Ok(out);
    }
    // A maximum indistinguishable from the end value is a supremum
    // approached at the boundary, not an interior attainment.
    if i_max == last || values[i_max] - values[last] <= PLATEAU_TOL * values[i_max].abs() {
        out.attainment = Attainment::BoundaryMax;
        return Ok(out);
    }
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lambdas[i_max - 1], lambdas[i_max + 1]);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    out.evaluations = 2;
    while (b - a) > rel_tol * (0.5 * (a + b)).abs().max(1.0) {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
        out.evaluations += 1;
        if out.evaluations > 500 {
            return Err(Error::Numeric("golden-section search did not converge".into()));
        }
    }
    let (lambda, value) = if fc >= fd { (c, fc) } else { (d, fd) };
    if value >= out.b {
        out.b = value;
        out.lambda_star = lambda;
    }
    Ok(out)
}

/// Locates the largest mass on the traced range, refined by fresh solves.
pub fn curve_extrema(curve: &MassCurve, settings: &GroundStateSettings) -> Result<CurveExtrema> {
    let problem = &curve.problem;
    extrema_of(
        &curve.lambdas(),
        &curve.masses(),
        |l| Ok(shoot_ground_state(problem, l, settings, curve.interpolated_height(l))?.mass),
        1e-6,
    )
}

#[derive(Debug, Clone)]
pub struct LookupRoot {
    pub lambda: f64,
    pub state: GroundState,
}

#[derive(Debug, Clone)]
pub struct MassLookup {
    pub target: f64,
    /// Roots sorted by λ.
    pub roots: Vec<LookupRoot>,
    /// A root lies in the first or last cell of the trace; roots beyond the
    /// traced range may have been missed.
    pub boundary_warning: bool,
    pub note: Option<String>,
}

/// Relative mass tolerance of [`mass_lookup`].
pub const LOOKUP_TOL: f64 = 1e-8;

/// All λ on the traced range with `m(λ) = c`.
pub fn mass_lookup(curve: &MassCurve, c: f64, settings: &GroundStateSettings) -> Result<MassLookup> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::Validation(format!("target mass must be positive, got {c}")));
    }
    let n = curve.samples.len();
    if n < 2 {
        return Err(Error::Validation("mass curve has fewer than two samples".into()));
    }
    let problem = &curve.problem;
    let solve = |l: f64| shoot_ground_state(problem, l, settings, curve.interpolated_height(l));
    let mut roots = Vec::new();
    let mut boundary_warning = false;
    for i in 0..n {
        let s = &curve.samples[i];
        let g = s.mass - c;
        let at_sample = g == 0.0;
        let sign_change = i + 1 < n && g * (curve.samples[i + 1].mass - c) < 0.0;
        if at_sample {
            roots.push(LookupRoot { lambda: s.lambda, state: solve(s.lambda)? });
            boundary_warning |= i == 0 || i == n - 1;
        } else if sign_change {
            let root = bisect_mass(curve, i, c, &solve)?;
            roots.push(root);
            boundary_warning |= i == 0 || i + 1 == n - 1;
        }
    }
    let max = curve.samples.iter().map(|s| s.mass).fold(f64::NEG_INFINITY, f64::max);
    let min = curve.samples.iter().map(|s| s.mass).fold(f64::INFINITY, f64::min);
    let note = if roots.is_empty() && c > max {
        Some(format!("nonexistence: c = {c:e} exceeds the largest sampled mass {max:e}"))
    } else if roots.is_empty() && c < min {
        Some(format!("c = {c:e} lies below the traced minimum mass {min:e}"))
    } else if boundary_warning {
        Some("a root lies in a boundary cell of the trace; roots beyond the range may be missed".into())
    } else {
        None
    };
    Ok(MassLookup { target: c, roots, boundary_warning, note })
}

fn bisect_mass(curve: &MassCurve, i: usize, c: f64, solve: &impl Fn(f64) -> Result<GroundState>) -> Result<LookupRoot> {
    let (mut a, mut b) = (curve.samples[i].lambda, curve.samples[i + 1].lambda);
    let rising = curve.samples[i + 1].mass > curve.samples[i].mass;
    for _ in 0..200 {
        let mid = split_point(curve.lambda_1, a, b);
        if !(mid > a && mid < b) {
            break;
        }
        let state = solve(mid)?;
        let g = state.mass - c;
        if g.abs() < LOOKUP_TOL * c {
            return Ok(LookupRoot { lambda: mid, state });
        }
        if (g < 0.0) == rising {
            a = mid;
        } else {
            b = mid;
        }
    }
    Err(Error::Numeric(format!("mass bisection for c = {c:e} stalled in [{a}, {b}] before reaching the tolerance")))
}
