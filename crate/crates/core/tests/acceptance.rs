//! Acceptance gate. Each test prints one `PASS`/`FAIL` line, written
//! straight to stdout so it shows without `--nocapture`.

mod common;

use std::io::Write;
use std::path::Path;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use nls_masscurve::asymptotics::{compare_to_q, linearized_distance, rescale, verify_limits};
use nls_masscurve::continuation::Attainment;
use nls_masscurve::continuation::{
    curve_extrema, mass_lookup, trace_mass_curve, CurveExtrema, MassCurve, TraceSettings,
};
use nls_masscurve::ground_state::{
    first_dirichlet_eigenvalue, q_by_gradient_flow, shoot_ground_state, solve_whole_space_q, FlowSettings,
    GroundStateSettings, QProfile, QSettings,
};
use nls_masscurve::problem::{RadialProblem, Weight};
use nls_masscurve::report::Verdict;
use nls_masscurve::stability::{classify_at_mass, linearized_spectrum, mass_slope, StabilityClass, SPECTRUM_CELLS};
use nls_masscurve::yanagida::{
    check_conditions, h_function, region_table, Divisor, FamilyPoint, WeightSpec, YanagidaGrid,
};

fn report(id: u32, title: &str, ok: bool, detail: String) {
    let verdict = if ok { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "criterion {id:>2} [{verdict}] {title}: {detail}");
    assert!(ok, "criterion {id} failed: {detail}");
}

struct Traced {
    curve: MassCurve,
    extrema: CurveExtrema,
    elapsed: Duration,
}

fn traced(n: usize, p: f64) -> Traced {
    let problem = RadialProblem::new(n, p, 1.0).unwrap();
    let l1 = first_dirichlet_eigenvalue(n, 1.0, 1e-12).unwrap();
    let start = Instant::now();
    let curve = trace_mass_curve(&problem, -l1 + 1e-3, 1e3, &TraceSettings::default()).unwrap();
    let elapsed = start.elapsed();
    let extrema = curve_extrema(&curve, &GroundStateSettings::default()).unwrap();
    Traced { curve, extrema, elapsed }
}

fn supercritical() -> &'static Traced {
    static CELL: OnceLock<Traced> = OnceLock::new();
    CELL.get_or_init(|| traced(3, 4.0))
}

fn subcritical() -> &'static Traced {
    static CELL: OnceLock<Traced> = OnceLock::new();
    CELL.get_or_init(|| traced(3, 3.0))
}

fn critical() -> &'static Traced {
    static CELL: OnceLock<Traced> = OnceLock::new();
    CELL.get_or_init(|| traced(2, 4.0))
}

fn soliton(n: usize, p: f64) -> QProfile {
    solve_whole_space_q(n, p, &QSettings::default()).unwrap()
}

#[test]
fn criterion_01_dirichlet_eigenvalues() {
    let start = Instant::now();
    let pi2 = std::f64::consts::PI.powi(2);
    let e3 = (first_dirichlet_eigenvalue(3, 1.0, 1e-12).unwrap() - pi2).abs();
    let j0 = common::j0_first_zero().powi(2);
    let e2 = (first_dirichlet_eigenvalue(2, 1.0, 1e-12).unwrap() - j0).abs();
    let mut scale = 0.0f64;
    for n in [2, 3] {
        let base = first_dirichlet_eigenvalue(n, 1.0, 1e-12).unwrap();
        for r in [0.25, 0.5, 2.0, 3.0, 7.5] {
            let lr = first_dirichlet_eigenvalue(n, r, 1e-12).unwrap();
            scale = scale.max((lr * r * r - base).abs() / base);
        }
    }
    let elapsed = start.elapsed();
    let ok = e3 < 1e-8 && e2 < 1e-6 && scale < 1e-10 && elapsed < Duration::from_secs(1);
    report(
        1,
        "eigenvalue exactness",
        ok,
        format!("|l1(3)-pi^2| = {e3:.2e}, |l1(2)-j0^2| = {e2:.2e} (j0^2 = {j0:.8}), scaling defect {scale:.2e}, {elapsed:?}"),
    );
}

#[test]
fn criterion_02_ground_states_against_fd_oracle() {
    let start = Instant::now();
    let settings = GroundStateSettings::default();
    let (mut worst_res, mut worst_energy) = (0.0f64, 0.0f64);
    let mut decreasing = true;
    for p in [2.5, 3.0, 4.0] {
        let problem = RadialProblem::new(3, p, 1.0).unwrap();
        for lambda in [0.0, 5.0, 50.0] {
            let gs = shoot_ground_state(&problem, lambda, &settings, None).unwrap();
            let (energy, _) = common::fd_nehari_energy(3, p, lambda, 1.0, 2000);
            worst_res = worst_res.max(gs.relative_residual());
            worst_energy = worst_energy.max((gs.energy - energy).abs() / energy.abs());
            decreasing &= gs.is_decreasing();
        }
    }
    let elapsed = start.elapsed();
    let ok = worst_res < 1e-8 && worst_energy < 1e-4 && decreasing && elapsed < Duration::from_secs(10);
    report(
        2,
        "ground-state correctness",
        ok,
        format!(
            "max Nehari residual {worst_res:.2e}, max energy deviation from FD oracle {worst_energy:.2e}, decreasing {decreasing}, {elapsed:?}"
        ),
    );
}

#[test]
fn criterion_03_critical_mass_two_routes() {
    let q = soliton(2, 4.0);
    let flow = q_by_gradient_flow(2, 4.0, &FlowSettings::default()).unwrap();
    let rel = (q.mass - flow.mass).abs() / q.mass;
    report(
        3,
        "critical mass by shooting and gradient flow",
        rel < 1e-3,
        format!("shooting {:.10}, flow {:.10}, relative gap {rel:.2e}", q.mass, flow.mass),
    );
}

#[test]
fn criterion_04_regime_limits() {
    let sup = supercritical();
    let sub = subcritical();
    let crit = critical();
    let rep_sup = verify_limits(&sup.curve, &soliton(3, 4.0)).unwrap();
    let rep_sub = verify_limits(&sub.curve, &soliton(3, 3.0)).unwrap();
    let q2 = soliton(2, 4.0);
    let last = crit.curve.samples.last().unwrap();
    let crit_ratio = last.mass / q2.mass;
    let a_ok = sup.extrema.attainment == Attainment::Interior && (rep_sup.slope_fit + 0.5).abs() <= 0.05 * 0.5;
    let b_ok = (rep_sub.slope_fit - 0.5).abs() <= 0.05 * 0.5;
    let c_ok = (last.lambda - 1e3).abs() < 1e-9 && (crit_ratio - 1.0).abs() < 0.03;
    let slowest = sup.elapsed.max(sub.elapsed).max(crit.elapsed);
    let ok = a_ok && b_ok && c_ok && slowest < Duration::from_secs(120);
    report(
        4,
        "regime limits",
        ok,
        format!(
            "(a) {:?} max b = {:.6} at {:.4}, slope {:.5}; (b) slope {:.5}; (c) m(1e3)/|Q|^2 = {crit_ratio:.6}; slowest trace {slowest:?}",
            sup.extrema.attainment, sup.extrema.b, sup.extrema.lambda_star, rep_sup.slope_fit, rep_sub.slope_fit
        ),
    );
}

#[test]
fn criterion_05_multiplicity() {
    let settings = GroundStateSettings::default();
    let sup = supercritical();
    let b = sup.extrema.b;
    let half = mass_lookup(&sup.curve, 0.5 * b, &settings).unwrap();
    let mut worst = 0.0f64;
    for root in &half.roots {
        let again = shoot_ground_state(&sup.curve.problem, root.lambda, &settings, Some(root.state.height)).unwrap();
        worst = worst.max(again.relative_residual()).max((again.mass - 0.5 * b).abs() / (0.5 * b));
    }
    let above = mass_lookup(&sup.curve, 1.1 * b, &settings).unwrap();
    let sub = subcritical();
    let masses = sub.curve.masses();
    let (lo, hi) = (masses[0], *masses.last().unwrap());
    let mut counts = Vec::new();
    for j in 1..=6 {
        let c = lo * (hi / lo).powf(j as f64 / 7.0);
        counts.push(mass_lookup(&sub.curve, c, &settings).unwrap().roots.len());
    }
    let ok = half.roots.len() == 2 && worst < 1e-8 && above.roots.is_empty() && counts.iter().all(|&k| k == 1);
    report(
        5,
        "multiplicity of normalized solutions",
        ok,
        format!(
            "b/2: {} roots (worst re-solved defect {worst:.2e}); 1.1b: {} roots; subcritical root counts {counts:?}",
            half.roots.len(),
            above.roots.len()
        ),
    );
}

#[test]
fn criterion_06_rescaling_identity() {
    let settings = GroundStateSettings::default();
    let tol = 10.0 * settings.integrator.rtol;
    let (mut identity, mut residual, mut checked) = (0.0f64, 0.0f64, 0usize);
    for t in [supercritical(), subcritical(), critical()] {
        for s in t.curve.samples.iter().filter(|s| s.lambda > 1.0) {
            let gs = shoot_ground_state(&t.curve.problem, s.lambda, &settings, Some(s.height)).unwrap();
            let rs = rescale(&gs).unwrap();
            identity = identity.max(rs.mass_identity_defect());
            residual = residual.max(rs.scaled_residual());
            checked += 1;
        }
    }
    let ok = identity < 1e-12 && residual < tol;
    report(
        6,
        "rescaling identity",
        ok,
        format!("{checked} samples: max identity defect {identity:.2e}, max rescaled residual {residual:.2e} (bound {tol:.0e})"),
    );
}

#[test]
fn criterion_07_convergence_to_soliton() {
    let settings = GroundStateSettings::default();
    let mut ok = true;
    let mut parts = Vec::new();
    for (n, p) in [(3usize, 4.0), (2, 4.0)] {
        let problem = RadialProblem::new(n, p, 1.0).unwrap();
        let q = soliton(n, p);
        let mut lin = Vec::new();
        let mut direct = Vec::new();
        for lambda in [1e2, 1e3, 1e4] {
            let gs = shoot_ground_state(&problem, lambda, &settings, None).unwrap();
            direct.push(compare_to_q(&rescale(&gs).unwrap(), &q).unwrap());
            lin.push(linearized_distance(&problem, lambda, &q, &settings.integrator).unwrap().distance);
        }
        let decreasing = lin.windows(2).all(|w| w[1] < w[0]);
        // Where the difference is far above rounding level both routes must agree.
        let agree = (direct[0] - lin[0]).abs() <= 1e-2 * lin[0];
        ok &= decreasing && agree;
        let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(", ");
        parts.push(format!("N={n}: linearized [{}], direct [{}]", fmt(&lin), fmt(&direct)));
    }
    report(7, "H1 convergence of the rescaled states", ok, parts.join("; "));
}

#[test]
fn criterion_08_uniqueness_conditions() {
    let grid = YanagidaGrid::default();
    let constant = WeightSpec::constant(1.0, 1.0).unwrap();
    let mut constant_ok = true;
    for p in [2.05, 2.5, 3.0, 3.5, 4.0] {
        let r = check_conditions(&constant, p, 3, &grid).unwrap();
        constant_ok &= ["c1", "c2", "c3", "c4"].iter().all(|c| r.verdict(c) == Verdict::Pass);
    }
    let mut points = Vec::new();
    for p in [2.5, 3.0, 3.5] {
        for ks in [0.0, 0.5 * (4.0 - p), 4.0 - p] {
            points.push(FamilyPoint { p, k: ks / 2.0, s: 2.0 });
        }
    }
    let table = region_table(3, &points, &[Divisor::P], &grid, None).unwrap();
    let region_ok = table.rows.iter().all(|r| r.in_region_paper && r.overall == Verdict::Pass);

    let mut linear_ok = true;
    let mut dual = 0.0f64;
    for (k, s) in [(0.5, 2.0), (1.0, 1.5), (2.0, 3.0)] {
        let base = WeightSpec::inverse_power(k, s, 1.0).unwrap();
        let times = |c: f64| {
            WeightSpec::new(
                Weight::custom(
                    "scaled",
                    move |r| c * (1.0 + r.powf(k)).powf(-s),
                    move |r| c * (-s * k * r.powf(k - 1.0) * (1.0 + r.powf(k)).powf(-s - 1.0)),
                ),
                1.0,
            )
            .unwrap()
        };
        let unit = times(1.0);
        // Powers of two scale every intermediate exactly.
        for c in [0.25, 2.0, 8.0] {
            let scaled = times(c);
            for i in 1..50 {
                let r = i as f64 / 50.0;
                for m in [0.0, 0.5, 1.0] {
                    let a = h_function(&unit, 3.0, 3, m, r, Divisor::P).unwrap();
                    let b = h_function(&scaled, 3.0, 3, m, r, Divisor::P).unwrap();
                    linear_ok &= b == c * a;
                }
            }
        }
        for p in [2.5, 3.0, 4.0] {
            for i in 1..100 {
                let r = i as f64 / 100.0;
                for m in [0.0, 0.3, 1.0] {
                    let got = h_function(&base, p, 3, m, r, Divisor::P).unwrap();
                    let rk = r.powf(k);
                    let factored = r.powf(m + 1.0)
                        * (1.0 + rk).powf(-s)
                        * (-2.0 * s * k * rk / ((1.0 + rk) * p) - (2.0 - m - 2.0 * (m + 2.0) / p));
                    dual = dual.max((got - factored).abs() / factored.abs().max(1e-300));
                }
            }
        }
    }
    let ok = constant_ok && region_ok && linear_ok && dual < 1e-12;
    report(
        8,
        "uniqueness-condition checker",
        ok,
        format!(
            "constant weight passes {constant_ok}; {} region points all pass {region_ok}; exact linearity {linear_ok}; dual formula gap {dual:.2e}",
            table.rows.len()
        ),
    );
}

#[test]
fn criterion_09_stability_pattern() {
    let settings = GroundStateSettings::default();
    let sup = supercritical();
    let cls = classify_at_mass(&sup.curve, 0.5 * sup.extrema.b, &settings, SPECTRUM_CELLS, None).unwrap();
    let classes: Vec<StabilityClass> = cls.verdicts.iter().map(|v| v.verdict).collect();
    let ordered = cls.verdicts.windows(2).all(|w| w[0].lambda < w[1].lambda);
    let pair_ok = classes == [StabilityClass::Stable, StabilityClass::Unstable] && ordered;

    let star = sup.extrema.lambda_star;
    let offsets = [-3.0, -1.0, -0.5, -0.1, 0.0, 0.1, 0.5, 1.0, 3.0];
    let sweep: Vec<StabilityClass> =
        offsets.iter().map(|d| mass_slope(&sup.curve, star + d, &settings).unwrap().class()).collect();
    let rank = |c: &StabilityClass| match c {
        StabilityClass::Stable => 0,
        StabilityClass::Inconclusive => 1,
        StabilityClass::Unstable => 2,
    };
    let monotone = sweep.windows(2).all(|w| rank(&w[0]) <= rank(&w[1]));
    let at_star = sweep[4] == StabilityClass::Inconclusive;
    let both_sides = sweep[0] == StabilityClass::Stable && sweep[offsets.len() - 1] == StabilityClass::Unstable;

    let sub = subcritical();
    let masses = sub.curve.masses();
    let (lo, hi) = (masses[0], *masses.last().unwrap());
    let mut sub_ok = true;
    for j in 1..=5 {
        let c = lo * (hi / lo).powf(j as f64 / 6.0);
        let v = classify_at_mass(&sub.curve, c, &settings, SPECTRUM_CELLS, None).unwrap();
        sub_ok &= v.verdicts.len() == 1 && v.verdicts[0].verdict == StabilityClass::Stable;
    }
    let ok = pair_ok && monotone && at_star && both_sides && sub_ok;
    report(
        9,
        "stability pattern",
        ok,
        format!("b/2 verdicts {classes:?}; sweep around argmax {sweep:?}; subcritical all stable {sub_ok}"),
    );
}

#[test]
fn criterion_10_nondegeneracy() {
    let settings = GroundStateSettings::default();
    let mut ok = true;
    let mut min_gap = f64::INFINITY;
    let mut worst_change = 0.0f64;
    for (n, p) in [(3usize, 4.0), (3, 3.0), (2, 4.0)] {
        let problem = RadialProblem::new(n, p, 1.0).unwrap();
        let l1 = first_dirichlet_eigenvalue(n, 1.0, 1e-12).unwrap();
        for lambda in [-0.5 * l1, 0.0, 10.0, 100.0, 500.0] {
            let gs = shoot_ground_state(&problem, lambda, &settings, None).unwrap();
            let coarse = linearized_spectrum(&gs, 2, SPECTRUM_CELLS).unwrap();
            let fine = linearized_spectrum(&gs, 2, 2 * SPECTRUM_CELLS).unwrap();
            for ev in [&coarse, &fine] {
                ok &= ev[0] < 0.0 && ev[1] > 0.0;
            }
            let gap = |ev: &[f64]| ev.iter().fold(f64::INFINITY, |m, e| m.min(e.abs()));
            let (gc, gf) = (gap(&coarse), gap(&fine));
            min_gap = min_gap.min(gc).min(gf);
            worst_change = worst_change.max((gc - gf).abs() / gf);
        }
    }
    ok &= min_gap > 1e-3 && worst_change < 0.1;
    report(
        10,
        "nondegeneracy of the linearization",
        ok,
        format!("one negative eigenvalue everywhere {ok}; smallest gap {min_gap:.4}; largest change between resolutions {worst_change:.2e}"),
    );
}

fn json_artifacts(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn criterion_11_deterministic_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = |name: &str, text: &str| {
        let path = tmp.path().join(name);
        std::fs::write(&path, text).unwrap();
        path
    };
    let sup = conf("sup.conf", "dimension = 3\nexponent = 4\n");
    let crit = conf("crit.conf", "dimension = 2\nexponent = 4\n");
    let runs: Vec<(&str, &Path, Vec<&str>)> = vec![
        ("solve", &sup, vec!["--set", "lambda=5"]),
        ("trace", &sup, vec![]),
        ("lookup", &sup, vec!["--set", "mass_fraction=0.5,1.1"]),
        ("qnorm", &crit, vec![]),
        ("limits", &sup, vec![]),
        ("yanagida", &sup, vec!["--set", "yanagida.divisor=all"]),
        ("yanagida", &sup, vec!["--set", "region.p=2.5,3,3.5"]),
        ("stability", &sup, vec!["--set", "mass_fraction=0.5"]),
    ];
    let mut ok = true;
    let mut compared = 0;
    let mut mismatched = Vec::new();
    for (i, (cmd, config, extra)) in runs.iter().enumerate() {
        let mut artifacts = Vec::new();
        for rep in 0..2 {
            let out = tmp.path().join(format!("{i}-{cmd}-{rep}"));
            let mut args: Vec<String> = vec!["nls-masscurve".into(), cmd.to_string(), config.display().to_string()];
            args.extend(["--out".to_string(), out.display().to_string()]);
            args.extend(extra.iter().map(|s| s.to_string()));
            if rep == 1 {
                // Worker count must not change any artifact.
                args.extend(["--set".into(), "threads=2".into()]);
            }
            ok &= nls_masscurve_cli::run_from(&args) == 0;
            artifacts.push(json_artifacts(&out));
        }
        ok &= !artifacts[0].is_empty();
        if artifacts[0] != artifacts[1] {
            ok = false;
            mismatched.push(*cmd);
        }
        compared += artifacts[0].len();
    }
    report(
        11,
        "deterministic artifacts",
        ok,
        format!(
            "{} runs, {compared} JSON artifacts byte-identical across repeats; mismatches {mismatched:?}",
            runs.len()
        ),
    );
}
