use nls_masscurve::asymptotics::{compare_to_q, linearized_distance, rescale, verify_limits};
use nls_masscurve::continuation::{
    curve_extrema, default_lambda_max, mass_lookup, plot_script, trace_mass_curve, CurveExtrema, MassCurve, MassLookup,
};
use nls_masscurve::ground_state::{
    first_dirichlet_eigenvalue, q_by_gradient_flow, shoot_ground_state, solve_whole_space_q, FlowSettings, QProfile,
    QSettings,
};
use nls_masscurve::problem::Weight;
use nls_masscurve::report::Verdict;
use nls_masscurve::stability::{classify_at_mass, SPECTRUM_CELLS};
use nls_masscurve::yanagida::{check_conditions, region_table, Divisor, FamilyPoint, WeightSpec, YanagidaGrid};
use nls_masscurve::{json, Error, Result};
use serde_json::Value;

use crate::run_config::{to_value, RunConfig, TRACE_KEYS};

/// What a command reports back to `main`.
pub struct Outcome {
    pub summary: String,
    /// False when a requested check failed.
    pub checks_passed: bool,
}

impl Outcome {
    fn report(summary: String) -> Self {
        Self { summary, checks_passed: true }
    }
}

pub const SOLVE_KEYS: &[&str] = &["lambda"];

pub fn solve(cfg: &RunConfig) -> Result<Outcome> {
    let problem = cfg.problem()?;
    let lambda = cfg.values.require_f64("lambda")?;
    let gs = shoot_ground_state(problem, lambda, &cfg.ground_state, None)?;
    let s = gs.summary();
    cfg.write("groundstate.csv", &gs.profile.to_csv(lambda))?;
    cfg.write_json("groundstate.json", vec![("ground_state", to_value(&s)?)])?;
    Ok(Outcome::report(format!(
        "lambda={} a0={} mass={} energy={} residual={}",
        json::format_float(s.lambda),
        json::format_float(s.height),
        json::format_float(s.mass),
        json::format_float(s.energy),
        json::format_float(s.relative_residual)
    )))
}

fn trace(cfg: &RunConfig) -> Result<(MassCurve, CurveExtrema)> {
    let problem = cfg.problem()?;
    let ts = cfg.trace_settings()?;
    let l1 = first_dirichlet_eigenvalue(problem.dimension(), problem.radius(), ts.ground_state.eigen_tol)?;
    let lambda_min = cfg.values.f64_or("lambda_min", -l1 + 1e-3)?;
    let lambda_max = match cfg.values.f64("lambda_max")? {
        Some(v) => v,
        None => default_lambda_max(problem, &ts.ground_state)?,
    };
    let curve = trace_mass_curve(problem, lambda_min, lambda_max, &ts)?;
    let extrema = curve_extrema(&curve, &ts.ground_state)?;
    cfg.write("masscurve.csv", &curve.to_csv())?;
    cfg.write("masscurve.gp", &plot_script("masscurve.csv", &format!("mass curve: {}", problem.label()), false))?;
    Ok((curve, extrema))
}

fn curve_value(curve: &MassCurve, extrema: &CurveExtrema) -> Result<Value> {
    Ok(json::object([
        ("lambda_1", to_value(&curve.lambda_1)?),
        ("lambda_min", to_value(&curve.lambda_min)?),
        ("lambda_max", to_value(&curve.lambda_max)?),
        ("samples", to_value(&curve.samples.len())?),
        ("refinements", to_value(&curve.refinements.len())?),
        ("budget_exhausted", Value::Bool(curve.budget_exhausted)),
        ("extrema", to_value(extrema)?),
    ]))
}

pub fn trace_keys() -> Vec<&'static str> {
    TRACE_KEYS.to_vec()
}

pub fn cmd_trace(cfg: &RunConfig) -> Result<Outcome> {
    let (curve, ex) = trace(cfg)?;
    cfg.write_json("masscurve.json", vec![("curve", curve_value(&curve, &ex)?)])?;
    Ok(Outcome::report(format!(
        "samples={} b={} lambda_star={} attainment={:?}",
        curve.samples.len(),
        json::format_float(ex.b),
        json::format_float(ex.lambda_star),
        ex.attainment
    )))
}

pub const MASS_KEYS: &[&str] = &["mass", "mass_fraction"];

/// Targets from `mass` (absolute) and `mass_fraction` (multiples of `b`).
fn targets(cfg: &RunConfig, b: f64) -> Result<Vec<f64>> {
    let mut out = cfg.values.f64_list("mass")?.unwrap_or_default();
    out.extend(cfg.values.f64_list("mass_fraction")?.unwrap_or_default().into_iter().map(|f| f * b));
    if out.is_empty() {
        return Err(Error::Config("set `mass` or `mass_fraction`".into()));
    }
    Ok(out)
}

fn lookup_value(l: &MassLookup) -> Result<Value> {
    let roots = l
        .roots
        .iter()
        .map(|r| {
            Ok(json::object([
                ("lambda", to_value(&r.lambda)?),
                ("a0", to_value(&r.state.height)?),
                ("mass", to_value(&r.state.mass)?),
                ("energy", to_value(&r.state.energy)?),
                ("relative_residual", to_value(&r.state.relative_residual())?),
            ]))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(json::object([
        ("target", to_value(&l.target)?),
        ("roots", Value::Array(roots)),
        ("boundary_warning", Value::Bool(l.boundary_warning)),
        ("note", to_value(&l.note)?),
    ]))
}

pub fn cmd_lookup(cfg: &RunConfig) -> Result<Outcome> {
    let (curve, ex) = trace(cfg)?;
    let mut lookups = Vec::new();
    let mut counts = Vec::new();
    for c in targets(cfg, ex.b)? {
        let l = mass_lookup(&curve, c, &cfg.ground_state)?;
        counts.push(format!("{}:{}", json::format_float(c), l.roots.len()));
        lookups.push(lookup_value(&l)?);
    }
    cfg.write_json("lookup.json", vec![("curve", curve_value(&curve, &ex)?), ("lookups", Value::Array(lookups))])?;
    Ok(Outcome::report(format!("roots per target {}", counts.join(" "))))
}

pub const Q_KEYS: &[&str] = &["q.far_radius", "q.cut_ratio", "flow.cells", "flow.domain_radius"];

/// Relative agreement required between the shooting and flow routes.
pub const Q_AGREEMENT: f64 = 1e-3;

fn q_settings(cfg: &RunConfig) -> Result<QSettings> {
    let mut qs = QSettings::default();
    qs.far_radius = cfg.values.f64_or("q.far_radius", qs.far_radius)?;
    qs.cut_ratio = cfg.values.f64_or("q.cut_ratio", qs.cut_ratio)?;
    Ok(qs)
}

fn solve_q(cfg: &RunConfig) -> Result<QProfile> {
    let problem = cfg.problem()?;
    solve_whole_space_q(problem.dimension(), problem.exponent(), &q_settings(cfg)?)
}

pub fn cmd_qnorm(cfg: &RunConfig) -> Result<Outcome> {
    let problem = cfg.problem()?;
    let q = solve_q(cfg)?;
    let mut fs = FlowSettings::default();
    fs.cells = cfg.values.usize("flow.cells")?.unwrap_or(fs.cells);
    fs.domain_radius = cfg.values.f64_or("flow.domain_radius", fs.domain_radius)?;
    let flow = q_by_gradient_flow(problem.dimension(), problem.exponent(), &fs)?;
    let uncertainty = (q.mass - flow.mass).abs();
    let agree = uncertainty <= Q_AGREEMENT * q.mass;
    cfg.write("q.csv", &q.profile.to_csv(1.0))?;
    cfg.write_json(
        "qnorm.json",
        vec![
            ("q_mass", to_value(&q.mass)?),
            ("q_mass_uncertainty", to_value(&uncertainty)?),
            ("routes_agree", Value::Bool(agree)),
            ("shooting", to_value(&q.summary())?),
            ("flow", to_value(&flow)?),
        ],
    )?;
    Ok(Outcome {
        summary: format!("q_mass={} +/- {}", json::format_float(q.mass), json::format_float(uncertainty)),
        checks_passed: agree,
    })
}

pub const LIMITS_KEYS: &[&str] = &["convergence_lambdas"];

pub fn cmd_limits(cfg: &RunConfig) -> Result<Outcome> {
    let problem = cfg.problem()?.clone();
    let (curve, ex) = trace(cfg)?;
    let q = solve_q(cfg)?;
    let report = verify_limits(&curve, &q)?;
    let mut passed = report.verdicts.all_pass();
    let mut distances = Vec::new();
    let mut notes = Vec::new();
    if problem.is_pure_power() {
        let lambdas = cfg.values.f64_list("convergence_lambdas")?.unwrap_or_else(|| vec![1e2, 1e3, 1e4]);
        let mut previous = f64::INFINITY;
        let mut decreasing = true;
        for &l in &lambdas {
            let gs = shoot_ground_state(&problem, l, &cfg.ground_state, curve.interpolated_height(l))?;
            let direct = compare_to_q(&rescale(&gs)?, &q)?;
            let lin = linearized_distance(&problem, l, &q, &cfg.ground_state.integrator)?;
            decreasing &= lin.distance < previous;
            previous = lin.distance;
            distances.push(json::object([
                ("lambda", to_value(&l)?),
                ("direct", to_value(&direct)?),
                ("linearized", to_value(&lin.distance)?),
                ("relative_size", to_value(&lin.relative_size)?),
            ]));
        }
        passed &= decreasing;
        notes.push(Value::String(format!(
            "linearized H1 distance strictly decreasing along the requested multipliers: {decreasing}"
        )));
    } else {
        notes.push(Value::String("convergence distances need a pure power nonlinearity; skipped".into()));
    }
    cfg.write_json(
        "limits.json",
        vec![
            ("curve", curve_value(&curve, &ex)?),
            ("limits", to_value(&report)?),
            ("distances", Value::Array(distances)),
            ("notes", Value::Array(notes)),
        ],
    )?;
    cfg.write("limits.gp", &plot_script("masscurve.csv", &format!("mass curve: {}", problem.label()), true))?;
    Ok(Outcome {
        summary: format!(
            "regime={:?} slope={} predicted={} overall={:?}",
            report.regime,
            json::format_float(report.slope_fit),
            json::format_float(report.slope_predicted),
            report.verdicts.overall()
        ),
        checks_passed: passed,
    })
}

pub const YANAGIDA_KEYS: &[&str] =
    &["yanagida.divisor", "yanagida.r_points", "yanagida.m_points", "region.p", "region.ks", "region.s"];

fn divisors(cfg: &RunConfig) -> Result<Vec<Divisor>> {
    match cfg.values.get("yanagida.divisor") {
        None => Ok(vec![Divisor::P]),
        Some("all") => Ok(Divisor::ALL.to_vec()),
        Some(list) => list.split(',').map(Divisor::parse).collect(),
    }
}

pub fn cmd_yanagida(cfg: &RunConfig) -> Result<Outcome> {
    let problem = cfg.problem()?;
    let divs = divisors(cfg)?;
    let mut grid = YanagidaGrid::default();
    grid.r_points = cfg.values.usize("yanagida.r_points")?.unwrap_or(grid.r_points);
    grid.m_points = cfg.values.usize("yanagida.m_points")?.unwrap_or(grid.m_points);
    let n = problem.dimension();

    if let Some(ps) = cfg.values.f64_list("region.p")? {
        let s = cfg.values.f64_or("region.s", 2.0)?;
        let ks_list = cfg.values.f64_list("region.ks")?;
        let mut points = Vec::new();
        for &p in &ps {
            let ks_values = ks_list.clone().unwrap_or_else(|| {
                let edge = if n == 3 { 4.0 - p } else { (6.0 - p) / 2.0 };
                vec![0.0, 0.5 * edge, edge]
            });
            for ks in ks_values {
                points.push(FamilyPoint { p, k: ks / s, s });
            }
        }
        let table = region_table(n, &points, &divs, &grid, cfg.threads)?;
        cfg.write("region.csv", &table.to_csv())?;
        cfg.write_json(
            "region.json",
            vec![
                ("rows", to_value(&table.rows.len())?),
                ("discrepancies", to_value(&table.discrepancies)?),
                ("notes", to_value(&table.notes)?),
            ],
        )?;
        return Ok(Outcome::report(format!("rows={} discrepancies={}", table.rows.len(), table.discrepancies.len())));
    }

    if !problem.perturbation().is_none() {
        return Err(Error::Config("the uniqueness check needs a weight without perturbation".into()));
    }
    let weight = match problem.weight() {
        Weight::Constant(c) => WeightSpec::constant(*c, problem.radius())?,
        Weight::InversePower { k, s } => WeightSpec::inverse_power(*k, *s, problem.radius())?,
        Weight::Custom { .. } => {
            return Err(Error::Config("custom weights are not available from a config file".into()))
        }
    };
    let mut reports = Vec::new();
    let mut passed = true;
    let mut verdicts = Vec::new();
    for d in divs {
        let g = YanagidaGrid { divisor: d, ..grid.clone() };
        let r = check_conditions(&weight, problem.exponent(), n, &g)?;
        passed &= r.overall() == Verdict::Pass;
        verdicts.push(format!("{}:{:?}", d.label(), r.overall()));
        reports.push(to_value(&r)?);
    }
    cfg.write_json("yanagida.json", vec![("reports", Value::Array(reports))])?;
    Ok(Outcome { summary: format!("yanagida {}", verdicts.join(" ")), checks_passed: passed })
}

pub const STABILITY_KEYS: &[&str] = &["spectrum_cells"];

pub fn cmd_stability(cfg: &RunConfig) -> Result<Outcome> {
    let (curve, ex) = trace(cfg)?;
    let cells = cfg.values.usize("spectrum_cells")?.unwrap_or(SPECTRUM_CELLS);
    let mut results = Vec::new();
    let mut summary = Vec::new();
    for c in targets(cfg, ex.b)? {
        let cl = classify_at_mass(&curve, c, &cfg.ground_state, cells, cfg.threads)?;
        summary.push(format!(
            "{}:[{}]",
            json::format_float(c),
            cl.verdicts.iter().map(|v| format!("{:?}", v.verdict)).collect::<Vec<_>>().join(",")
        ));
        results.push(to_value(&cl)?);
    }
    cfg.write_json(
        "stability.json",
        vec![("curve", curve_value(&curve, &ex)?), ("classifications", Value::Array(results))],
    )?;
    Ok(Outcome::report(format!("verdicts {}", summary.join(" "))))
}
