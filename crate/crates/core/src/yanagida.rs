//! Sufficient conditions for uniqueness of the positive solution of
//! `−Δu + λu = h(r)·u^{p−1}` in a ball, evaluated on grids.
//!
//! ```text
//! H(r;m) = 2·r^{m+2}·h'(r)/D − {2N − 4 − m − 2(m+2)/D}·r^{m+1}·h(r)
//! ```
//!
//! with the divisor `D` selectable among `p`, `p − 1` and `p + 1`
//! (default `p`).
//!
//! * C1: `h ≥ 0` on `(0,R)` and `h > 0` somewhere.
//! * C2: `H(r;0) ≤ 0` on `(0,R)`.
//! * C3: for each `m ∈ (0, N−2]`, `H(·;m)` is `≥ 0` then `≤ 0`, with one
//!   change point `β(m) ∈ [0,R]`.
//! * C4: `h(0) > 0` and `h` bounded on `[0,R)`.

use std::fmt::Write as _;

use serde::Serialize;

use crate::continuation::par_map;
use crate::error::{Error, Result};
use crate::problem::{check_exponent, Weight};
use crate::report::{ConditionReport, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Divisor {
    P,
    PMinus1,
    PPlus1,
}

impl Divisor {
    pub fn value(self, p: f64) -> f64 {
        match self {
            Divisor::P => p,
            Divisor::PMinus1 => p - 1.0,
            Divisor::PPlus1 => p + 1.0,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        match text.trim() {
            "p" => Ok(Divisor::P),
            "p-1" => Ok(Divisor::PMinus1),
            "p+1" => Ok(Divisor::PPlus1),
            other => Err(Error::Config(format!("divisor must be one of p, p-1, p+1; got `{other}`"))),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Divisor::P => "p",
            Divisor::PMinus1 => "p-1",
            Divisor::PPlus1 => "p+1",
        }
    }

    pub const ALL: [Divisor; 3] = [Divisor::P, Divisor::PMinus1, Divisor::PPlus1];
}

/// A weight `h` on `[0, R]`.
#[derive(Debug, Clone)]
pub struct WeightSpec {
    pub weight: Weight,
    pub radius: f64,
}

impl WeightSpec {
    pub fn new(weight: Weight, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Validation(format!("radius must be positive, got {radius}")));
        }
        if let Weight::InversePower { k, s } = weight {
            if !(k >= 0.0 && s > 1.0) {
                return Err(Error::Validation(format!(
                    "inverse-power weight needs k >= 0 and s > 1, got k = {k}, s = {s}"
                )));
            }
        }
        Ok(Self { weight, radius })
    }

    pub fn constant(c: f64, radius: f64) -> Result<Self> {
        Self::new(Weight::Constant(c), radius)
    }

    /// `h(r) = (1 + r^k)^{−s}`.
    pub fn inverse_power(k: f64, s: f64, radius: f64) -> Result<Self> {
        Self::new(Weight::InversePower { k, s }, radius)
    }

    pub fn family(&self) -> &'static str {
        match self.weight {
            Weight::Constant(_) => "constant",
            Weight::InversePower { .. } => "inverse-power",
            Weight::Custom { .. } => "custom",
        }
    }
}

/// `H(r;m)` as displayed in the module documentation, with `n = N`.
pub fn h_function(w: &WeightSpec, p: f64, dimension: usize, m: f64, r: f64, divisor: Divisor) -> Result<f64> {
    let top = dimension as f64 - 2.0;
    if !(m >= 0.0 && m <= top) {
        return Err(Error::Domain(format!("m must lie in [0, {top}], got {m}")));
    }
    if !(r > 0.0 && r <= w.radius) {
        return Err(Error::Domain(format!("r must lie in (0, {}], got {r}", w.radius)));
    }
    Ok(h_unchecked(w, dimension, m, r, divisor.value(p)))
}

#[inline]
fn h_unchecked(w: &WeightSpec, dimension: usize, m: f64, r: f64, d: f64) -> f64 {
    let n = dimension as f64;
    let h = w.weight.value(r);
    let hr = w.weight.derivative(r);
    2.0 * r.powf(m + 2.0) * hr / d - (2.0 * n - 4.0 - m - 2.0 * (m + 2.0) / d) * r.powf(m + 1.0) * h
}

/// Grid and variant for [`check_conditions`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct YanagidaGrid {
    /// Interior radii `R·i/(n+1)`, `i = 1..n`; at least 100.
    pub r_points: usize,
    /// Samples `m_j = (N−2)·j/M`, `j = 1..M`, for C3.
    pub m_points: usize,
    pub divisor: Divisor,
    /// Radii always included (for re-verifying witnesses).
    pub extra_r: Vec<f64>,
}

impl Default for YanagidaGrid {
    fn default() -> Self {
        Self { r_points: 2000, m_points: 50, divisor: Divisor::P, extra_r: Vec::new() }
    }
}

/// Relative threshold below which `|H|` counts as zero.
pub const ZERO_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Serialize)]
pub struct YanagidaReport {
    pub family: String,
    pub dimension: usize,
    pub exponent: f64,
    pub divisor: Divisor,
    pub divisor_value: f64,
    pub r_points: usize,
    pub m_points: usize,
    /// `β(m)` for each sampled `m` that passed C3.
    pub beta: Vec<(f64, f64)>,
    pub report: ConditionReport,
}

impl YanagidaReport {
    pub fn verdict(&self, name: &str) -> Verdict {
        self.report.verdict(name).unwrap_or(Verdict::Indeterminate)
    }

    pub fn overall(&self) -> Verdict {
        self.report.overall()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Sign {
    Pos,
    Neg,
    Zero,
}

/// Evaluates C1 to C4 on the grid.
pub fn check_conditions(w: &WeightSpec, p: f64, dimension: usize, grid: &YanagidaGrid) -> Result<YanagidaReport> {
    check_exponent(dimension, p)?;
    if grid.r_points < 100 {
        return Err(Error::Validation(format!("need at least 100 radii, got {}", grid.r_points)));
    }
    let big_r = w.radius;
    let mut radii: Vec<f64> = (1..=grid.r_points).map(|i| big_r * i as f64 / (grid.r_points + 1) as f64).collect();
    radii.extend(grid.extra_r.iter().copied().filter(|&r| r > 0.0 && r < big_r));
    radii.sort_by(f64::total_cmp);
    radii.dedup();
    let d = grid.divisor.value(p);
    let mut report = ConditionReport::default();

    // C1.
    let hv: Vec<f64> = radii.iter().map(|&r| w.weight.value(r)).collect();
    if let Some(i) = hv.iter().position(|v| !v.is_finite()) {
        return Err(Error::Evaluation { r: radii[i], u: f64::NAN, what: "weight is not finite".into() });
    }
    let negative: Vec<f64> = radii.iter().zip(&hv).filter(|(_, &v)| v < 0.0).map(|(&r, _)| r).collect();
    let positive = radii.iter().zip(&hv).find(|(_, &v)| v > 0.0).map(|(&r, _)| r);
    let c1 = negative.is_empty() && positive.is_some();
    report.push(
        "c1",
        Verdict::from_bool(c1),
        if c1 { positive.into_iter().collect() } else { negative.into_iter().take(10).collect() },
        if c1 { "h >= 0 on the grid and positive somewhere" } else { "h is negative or vanishes identically" },
    );

    // C2.
    let h0: Vec<f64> = radii.iter().map(|&r| h_unchecked(w, dimension, 0.0, r, d)).collect();
    let tol0 = ZERO_TOL * h0.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    if h0.iter().all(|v| v.abs() < tol0) {
        report.push("c2", Verdict::Indeterminate, vec![], "H(r;0) vanishes to tolerance on the whole grid");
    } else {
        let bad: Vec<f64> = radii.iter().zip(&h0).filter(|(_, &v)| v > tol0).map(|(&r, _)| r).collect();
        let ok = bad.is_empty();
        report.push(
            "c2",
            Verdict::from_bool(ok),
            bad.into_iter().take(10).collect(),
            if ok { "H(r;0) <= 0 on the grid".to_string() } else { "H(r;0) > 0 at the witness radii".to_string() },
        );
    }

    // C3.
    let mut beta = Vec::new();
    let top = dimension as f64 - 2.0;
    if dimension == 2 || grid.m_points == 0 {
        report.push("c3", Verdict::Pass, vec![], "no m in (0, N-2]; holds vacuously");
    } else {
        let mut failures: Vec<f64> = Vec::new();
        let mut detail = String::new();
        let mut indeterminate = 0usize;
        for j in 1..=grid.m_points {
            let m = top * j as f64 / grid.m_points as f64;
            let hm: Vec<f64> = radii.iter().map(|&r| h_unchecked(w, dimension, m, r, d)).collect();
            let tol = ZERO_TOL * hm.iter().fold(1.0f64, |a, v| a.max(v.abs()));
            let signs: Vec<Sign> = hm
                .iter()
                .map(|&v| {
                    if v.abs() < tol {
                        Sign::Zero
                    } else if v > 0.0 {
                        Sign::Pos
                    } else {
                        Sign::Neg
                    }
                })
                .collect();
            if signs.iter().all(|s| *s == Sign::Zero) {
                // Both admissible patterns at once.
                indeterminate += 1;
                beta.push((m, big_r));
                continue;
            }
            let first_neg = signs.iter().position(|s| *s == Sign::Neg);
            let late_pos = first_neg.and_then(|i| signs[i..].iter().position(|s| *s == Sign::Pos).map(|k| i + k));
            match late_pos {
                Some(k) => {
                    if failures.is_empty() {
                        let _ = write!(
                            detail,
                            "m = {m}: H < 0 at r = {} but H > 0 at r = {}",
                            radii[first_neg.unwrap()],
                            radii[k]
                        );
                    }
                    failures.push(radii[k]);
                }
                None => {
                    let b = match first_neg {
                        None => big_r,
                        Some(0) => 0.0,
                        Some(i) => {
                            let last_pos = signs[..i].iter().rposition(|s| *s == Sign::Pos);
                            match last_pos {
                                Some(k) => 0.5 * (radii[k] + radii[i]),
                                None => 0.0,
                            }
                        }
                    };
                    beta.push((m, b));
                }
            }
        }
        if !failures.is_empty() {
            report.push("c3", Verdict::Fail, failures.into_iter().take(10).collect(), detail);
        } else if indeterminate == grid.m_points {
            report.push(
                "c3",
                Verdict::Indeterminate,
                vec![],
                "H(r;m) vanishes to tolerance for every sampled m".to_string(),
            );
        } else {
            let mut detail = "single sign change (+ then -) for every sampled m".to_string();
            if indeterminate > 0 {
                let _ = write!(detail, "; H(r;m) vanishes to tolerance for {indeterminate} of them");
            }
            report.push("c3", Verdict::Pass, vec![], detail);
        }
    }

    // C4.
    let h_origin = w.weight.value(0.0);
    let bound = hv.iter().fold(h_origin, |m, v| m.max(*v));
    let c4 = h_origin > 0.0 && bound.is_finite();
    report.push("c4", Verdict::from_bool(c4), vec![0.0], format!("h(0) = {h_origin}, max h on the grid = {bound}"));
    report.note("the conditions are sufficient for uniqueness, not necessary");
    Ok(YanagidaReport {
        family: w.weight.describe(),
        dimension,
        exponent: p,
        divisor: grid.divisor,
        divisor_value: d,
        r_points: grid.r_points,
        m_points: grid.m_points,
        beta,
        report,
    })
}

/// Membership in the parameter region of the uniqueness results for the
/// inverse-power family: `N = 3, 2 < p ≤ 4, ks ≤ 4 − p` or
/// `N = 2, 2 < p ≤ 6, 2ks ≤ 6 − p`. These regions are stated for
/// `−λ₁ < λ < 0`.
pub fn in_region(dimension: usize, p: f64, k: f64, s: f64) -> Result<bool> {
    let ks = k * s;
    let slack = 1e-12;
    match dimension {
        3 => Ok(p > 2.0 && p <= 4.0 + slack && ks <= 4.0 - p + slack),
        2 => Ok(p > 2.0 && p <= 6.0 + slack && 2.0 * ks <= 6.0 - p + slack),
        _ => Err(Error::Validation(format!("the region table covers N = 2 and N = 3, got {dimension}"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FamilyPoint {
    pub p: f64,
    pub k: f64,
    pub s: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegionRow {
    pub p: f64,
    pub k: f64,
    pub s: f64,
    pub divisor: Divisor,
    pub in_region_paper: bool,
    pub c1: Verdict,
    pub c2: Verdict,
    pub c3: Verdict,
    pub c4: Verdict,
    pub overall: Verdict,
}

impl RegionRow {
    /// In the region but not passing, or passing outside it.
    pub fn is_discrepancy(&self) -> bool {
        self.in_region_paper != (self.overall == Verdict::Pass)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RegionTable {
    pub dimension: usize,
    pub rows: Vec<RegionRow>,
    pub discrepancies: Vec<RegionRow>,
    pub notes: Vec<String>,
}

impl RegionTable {
    /// CSV with columns `p,k,s,in_region_paper,c1,c2,c3,overall,divisor`.
    pub fn to_csv(&self) -> String {
        let v = |x: Verdict| match x {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Indeterminate => "indeterminate",
        };
        let mut out = String::from("p,k,s,in_region_paper,c1,c2,c3,overall,divisor\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{},{},{},{},{},{}",
                r.p,
                r.k,
                r.s,
                r.in_region_paper,
                v(r.c1),
                v(r.c2),
                v(r.c3),
                v(r.overall),
                r.divisor.label()
            );
        }
        out
    }
}

/// Runs [`check_conditions`] on every `(p, k, s)` point for each divisor,
/// on the unit ball, rows in input order (points outer, divisors inner).
pub fn region_table(
    dimension: usize,
    points: &[FamilyPoint],
    divisors: &[Divisor],
    grid: &YanagidaGrid,
    threads: Option<usize>,
) -> Result<RegionTable> {
    if !(dimension == 2 || dimension == 3) {
        return Err(Error::Validation(format!("the region table covers N = 2 and N = 3, got {dimension}")));
    }
    let jobs: Vec<(FamilyPoint, Divisor)> =
        points.iter().flat_map(|pt| divisors.iter().map(move |d| (*pt, *d))).collect();
    let rows = par_map(&jobs, threads, |(pt, div)| -> Result<RegionRow> {
        let w = WeightSpec::inverse_power(pt.k, pt.s, 1.0)?;
        let g = YanagidaGrid { divisor: *div, ..grid.clone() };
        let rep = check_conditions(&w, pt.p, dimension, &g)?;
        Ok(RegionRow {
            p: pt.p,
            k: pt.k,
            s: pt.s,
            divisor: *div,
            in_region_paper: in_region(dimension, pt.p, pt.k, pt.s)?,
            c1: rep.verdict("c1"),
            c2: rep.verdict("c2"),
            c3: rep.verdict("c3"),
            c4: rep.verdict("c4"),
            overall: rep.overall(),
        })
    })?
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let discrepancies = rows.iter().filter(|r| r.is_discrepancy()).cloned().collect();
    Ok(RegionTable {
        dimension,
        rows,
        discrepancies,
        notes: vec![
            "region membership refers to multipliers -lambda_1 < lambda < 0; the conditions themselves do not involve lambda"
                .into(),
            "a pass outside the region is not a contradiction: the region is where uniqueness was claimed".into(),
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_weight_closed_form() {
        let w = WeightSpec::constant(1.0, 1.0).unwrap();
        let v = h_function(&w, 3.0, 3, 0.0, 0.5, Divisor::P).unwrap();
        assert!((v - (-2.0 * (1.0 - 2.0 / 3.0) * 0.5)).abs() < 1e-15);
        let v2 = h_function(&w, 4.0, 2, 0.0, 0.5, Divisor::P).unwrap();
        assert!((v2 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn m_out_of_range() {
        let w = WeightSpec::constant(1.0, 1.0).unwrap();
        assert_eq!(h_function(&w, 3.0, 3, 1.5, 0.5, Divisor::P).unwrap_err().kind(), "domain");
        assert_eq!(h_function(&w, 3.0, 3, -0.1, 0.5, Divisor::P).unwrap_err().kind(), "domain");
    }

    #[test]
    fn family_requires_s_above_one() {
        assert!(WeightSpec::inverse_power(1.0, 1.0, 1.0).is_err());
        assert!(WeightSpec::inverse_power(-1.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn coarse_grid_rejected() {
        let w = WeightSpec::constant(1.0, 1.0).unwrap();
        let g = YanagidaGrid { r_points: 50, ..Default::default() };
        assert!(check_conditions(&w, 3.0, 3, &g).is_err());
    }

    #[test]
    fn region_membership() {
        assert!(in_region(3, 3.0, 0.5, 2.0).unwrap());
        assert!(!in_region(3, 3.0, 1.0, 2.0).unwrap());
        assert!(in_region(2, 4.0, 0.5, 2.0).unwrap());
        assert!(!in_region(3, 4.5, 0.0, 2.0).unwrap());
        assert!(in_region(4, 3.0, 0.0, 2.0).is_err());
    }
}
