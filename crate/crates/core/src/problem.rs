//! Radial problem instances `-Δu + λu = d(|x|)|u|^{p-2}u + g(|x|, u)` on a
//! ball, together with the mass-criticality classification.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::config::KeyValues;
use crate::error::{Error, Result};
use crate::report::{ConditionReport, Verdict};

/// Position of `p` relative to the mass-critical exponent `2 + 4/N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Subcritical,
    MassCritical,
    Supercritical,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Subcritical => "subcritical",
            Regime::MassCritical => "mass_critical",
            Regime::Supercritical => "supercritical",
        })
    }
}

/// Critical Sobolev exponent `2N/(N-2)`; infinite in dimension 2.
pub fn sobolev_exponent(dimension: usize) -> Result<f64> {
    match dimension {
        0 | 1 => Err(Error::Validation(format!("dimension must be at least 2, got {dimension}"))),
        2 => Ok(f64::INFINITY),
        n => Ok(2.0 * n as f64 / (n as f64 - 2.0)),
    }
}

/// The mass-critical exponent `2 + 4/N`, formed as the single quotient
/// `(2N + 4)/N` so it is the correctly rounded value of the rational.
pub fn mass_critical_exponent(dimension: usize) -> f64 {
    (2 * dimension + 4) as f64 / dimension as f64
}

/// Checks `2 < p < 2*`.
pub fn check_exponent(dimension: usize, p: f64) -> Result<()> {
    let critical = sobolev_exponent(dimension)?;
    if !(p > 2.0) {
        return Err(Error::Validation(format!("exponent must exceed 2, got p = {p}")));
    }
    if !(p < critical) {
        return Err(Error::Validation(format!(
            "exponent must be below the Sobolev exponent 2* = {critical} for N = {dimension}, got p = {p}"
        )));
    }
    Ok(())
}

/// Compares `p` with `2 + 4/N` exactly (no tolerance).
pub fn classify_regime(dimension: usize, p: f64) -> Result<Regime> {
    check_exponent(dimension, p)?;
    let threshold = mass_critical_exponent(dimension);
    Ok(if p > threshold {
        Regime::Supercritical
    } else if p == threshold {
        Regime::MassCritical
    } else {
        Regime::Subcritical
    })
}

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type RealFn2 = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Radial weight `d(r)` multiplying the power nonlinearity.
#[derive(Clone)]
pub enum Weight {
    /// `d ≡ c`.
    Constant(f64),
    /// `d(r) = (1 + r^k)^{-s}`.
    InversePower { k: f64, s: f64 },
    /// User-supplied weight with its derivative.
    Custom { label: String, value: RealFn, derivative: RealFn },
}

impl Weight {
    pub fn custom(
        label: impl Into<String>,
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        derivative: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Weight::Custom { label: label.into(), value: Arc::new(value), derivative: Arc::new(derivative) }
    }

    pub fn value(&self, r: f64) -> f64 {
        match self {
            Weight::Constant(c) => *c,
            Weight::InversePower { k, s } => (1.0 + r.powf(*k)).powf(-s),
            Weight::Custom { value, .. } => value(r),
        }
    }

    pub fn derivative(&self, r: f64) -> f64 {
        match self {
            Weight::Constant(_) => 0.0,
            Weight::InversePower { k, s } => {
                if *k == 0.0 {
                    0.0
                } else if r == 0.0 {
                    if *k > 1.0 {
                        0.0
                    } else if *k == 1.0 {
                        -s
                    } else {
                        f64::NEG_INFINITY
                    }
                } else {
                    let rk = r.powf(*k);
                    -s * k * rk / r * (1.0 + rk).powf(-s - 1.0)
                }
            }
            Weight::Custom { derivative, .. } => derivative(r),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Weight::Constant(c) => format!("constant({c})"),
            Weight::InversePower { k, s } => format!("inverse-power(k={k}, s={s})"),
            Weight::Custom { label, .. } => format!("custom({label})"),
        }
    }
}

impl fmt::Debug for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}

/// Lower-order perturbation `g(r, u)`.
#[derive(Clone, Default)]
pub enum Perturbation {
    #[default]
    None,
    /// `g(r,u) = coeff·|u|^{q-2}u`.
    Power { coeff: f64, q: f64 },
    /// User-supplied `g` with `∂g/∂u`. The primitive `G` is integrated
    /// numerically.
    Custom { label: String, value: RealFn2, du: RealFn2 },
}

impl Perturbation {
    pub fn custom(
        label: impl Into<String>,
        value: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        du: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Perturbation::Custom { label: label.into(), value: Arc::new(value), du: Arc::new(du) }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, Perturbation::None)
    }

    pub fn value(&self, r: f64, u: f64) -> f64 {
        match self {
            Perturbation::None => 0.0,
            Perturbation::Power { coeff, q } => coeff * signed_pow(u, q - 1.0),
            Perturbation::Custom { value, .. } => value(r, u),
        }
    }

    pub fn du(&self, r: f64, u: f64) -> f64 {
        match self {
            Perturbation::None => 0.0,
            Perturbation::Power { coeff, q } => coeff * (q - 1.0) * abs_pow(u, q - 2.0),
            Perturbation::Custom { du, .. } => du(r, u),
        }
    }

    /// `G(r,u) = ∫_0^u g(r,t) dt`.
    pub fn primitive(&self, r: f64, u: f64) -> f64 {
        match self {
            Perturbation::None => 0.0,
            Perturbation::Power { coeff, q } => coeff * abs_pow(u, *q) / q,
            Perturbation::Custom { value, .. } => {
                // 8-point Gauss-Legendre on [0, u], split in two halves.
                let mut acc = 0.0;
                for half in 0..2 {
                    let a = u * half as f64 / 2.0;
                    let half_width = u / 4.0;
                    let mid = a + half_width;
                    for (x, wt) in crate::profile::GAUSS8 {
                        acc += half_width * wt * value(r, mid + half_width * x);
                    }
                }
                acc
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Perturbation::None => "none".to_string(),
            Perturbation::Power { coeff, q } => format!("power(coeff={coeff}, q={q})"),
            Perturbation::Custom { label, .. } => format!("custom({label})"),
        }
    }
}

impl fmt::Debug for Perturbation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}

/// `sign(u)·|u|^e`, with `0 ↦ 0`.
#[inline]
pub fn signed_pow(u: f64, e: f64) -> f64 {
    if u == 0.0 {
        0.0
    } else {
        u.signum() * u.abs().powf(e)
    }
}

/// `|u|^e`, with `0 ↦ 0` for `e > 0`.
#[inline]
pub fn abs_pow(u: f64, e: f64) -> f64 {
    if u == 0.0 {
        if e == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        u.abs().powf(e)
    }
}

/// A radial problem instance on the ball `B_R ⊂ ℝ^N`. Immutable after
/// construction; cheap to clone (closures are reference counted).
#[derive(Clone, Debug)]
pub struct RadialProblem {
    dimension: usize,
    exponent: f64,
    radius: f64,
    weight: Weight,
    perturbation: Perturbation,
    label: String,
}

impl RadialProblem {
    /// Pure power problem `-Δu + λu = |u|^{p-2}u` on `B_R`.
    pub fn new(dimension: usize, exponent: f64, radius: f64) -> Result<Self> {
        check_exponent(dimension, exponent)?;
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Validation(format!("radius must be positive, got {radius}")));
        }
        Ok(Self {
            dimension,
            exponent,
            radius,
            weight: Weight::Constant(1.0),
            perturbation: Perturbation::None,
            label: format!("N={dimension} p={exponent} R={radius}"),
        })
    }

    pub fn with_weight(mut self, weight: Weight) -> Self {
        self.weight = weight;
        self
    }

    pub fn with_perturbation(mut self, perturbation: Perturbation) -> Self {
        self.perturbation = perturbation;
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn with_radius(&self, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Validation(format!("radius must be positive, got {radius}")));
        }
        let mut out = self.clone();
        out.radius = radius;
        Ok(out)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }
    pub fn exponent(&self) -> f64 {
        self.exponent
    }
    pub fn radius(&self) -> f64 {
        self.radius
    }
    pub fn weight(&self) -> &Weight {
        &self.weight
    }
    pub fn perturbation(&self) -> &Perturbation {
        &self.perturbation
    }
    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn regime(&self) -> Regime {
        classify_regime(self.dimension, self.exponent).expect("validated at construction")
    }

    /// True when `g ≡ 0` and `d` is constant.
    pub fn is_pure_power(&self) -> bool {
        self.perturbation.is_none() && matches!(self.weight, Weight::Constant(_))
    }

    /// `f(r,u) = d(r)|u|^{p-2}u + g(r,u)`.
    #[inline]
    pub fn f(&self, r: f64, u: f64) -> f64 {
        self.weight.value(r) * signed_pow(u, self.exponent - 1.0) + self.perturbation.value(r, u)
    }

    /// `∂f/∂u`.
    #[inline]
    pub fn f_u(&self, r: f64, u: f64) -> f64 {
        self.weight.value(r) * (self.exponent - 1.0) * abs_pow(u, self.exponent - 2.0) + self.perturbation.du(r, u)
    }

    /// `F(r,u) = d(r)|u|^p/p + G(r,u)`.
    pub fn primitive(&self, r: f64, u: f64) -> f64 {
        self.weight.value(r) * abs_pow(u, self.exponent) / self.exponent + self.perturbation.primitive(r, u)
    }

    /// Builds a problem from `key = value` pairs.
    ///
    /// Keys: `dimension`, `exponent`, `radius`, `weight.family`
    /// (`constant` | `inverse-power`), `weight.value`, `weight.k`,
    /// `weight.s`, `perturbation.family` (`none` | `power`),
    /// `perturbation.coeff`, `perturbation.q`, `label`.
    pub fn from_config(kv: &KeyValues) -> Result<Self> {
        kv.check_keys(PROBLEM_KEYS)?;
        let dimension = kv.usize("dimension")?.ok_or_else(|| Error::Config("missing key `dimension`".into()))?;
        let exponent = kv.require_f64("exponent")?;
        let radius = kv.f64_or("radius", 1.0)?;
        let weight = match kv.get("weight.family").unwrap_or("constant") {
            "constant" => Weight::Constant(kv.f64_or("weight.value", 1.0)?),
            "inverse-power" => {
                let k = kv.require_f64("weight.k")?;
                let s = kv.require_f64("weight.s")?;
                if k < 0.0 || s <= 0.0 {
                    return Err(Error::Config(format!(
                        "inverse-power weight needs k >= 0 and s > 0, got k = {k}, s = {s}"
                    )));
                }
                Weight::InversePower { k, s }
            }
            other => return Err(Error::Config(format!("unknown weight.family `{other}`"))),
        };
        let perturbation = match kv.get("perturbation.family").unwrap_or("none") {
            "none" => Perturbation::None,
            "power" => Perturbation::Power {
                coeff: kv.require_f64("perturbation.coeff")?,
                q: kv.require_f64("perturbation.q")?,
            },
            other => return Err(Error::Config(format!("unknown perturbation.family `{other}`"))),
        };
        let mut problem = RadialProblem::new(dimension, exponent, radius)
            .map_err(|e| Error::Config(e.to_string()))?
            .with_weight(weight)
            .with_perturbation(perturbation);
        if let Some(label) = kv.get("label") {
            problem = problem.with_label(label);
        }
        Ok(problem)
    }

    /// Resolved configuration as ordered key/value pairs (for provenance).
    pub fn describe(&self) -> Vec<(String, String)> {
        let mut out = vec![
            ("dimension".to_string(), self.dimension.to_string()),
            ("exponent".to_string(), format!("{:?}", self.exponent)),
            ("radius".to_string(), format!("{:?}", self.radius)),
            ("weight".to_string(), self.weight.describe()),
            ("perturbation".to_string(), self.perturbation.describe()),
            ("label".to_string(), self.label.clone()),
        ];
        out.push(("regime".to_string(), self.regime().to_string()));
        out
    }
}

pub const PROBLEM_KEYS: &[&str] = &[
    "dimension",
    "exponent",
    "radius",
    "weight.family",
    "weight.value",
    "weight.k",
    "weight.s",
    "perturbation.family",
    "perturbation.coeff",
    "perturbation.q",
    "label",
];

/// Sample points for the hypothesis checks of [`validate_problem`].
#[derive(Debug, Clone)]
pub struct ProbeGrid {
    /// Radii in `[0, R]` where `d` and `f` are sampled.
    pub radii: Vec<f64>,
    /// Nonzero `u` values used for the Ambrosetti–Rabinowitz sandwich.
    pub u_values: Vec<f64>,
    /// Probe for `g(r,u)/u^{p-1} → 0` as `u → ∞`.
    pub large_u: f64,
    /// Probe for `g(r,u)/u → 0` as `u → 0`.
    pub small_u: f64,
    /// Lower exponent `α` of the sandwich `(α-1) f u ≤ f_u u² ≤ (β-1) f u`.
    pub alpha: f64,
    /// Upper exponent `β`.
    pub beta: f64,
    /// A limit ratio at or below this value counts as "vanished".
    pub limit_tol: f64,
}

impl ProbeGrid {
    /// Uniform radii on `[0, R]`, logarithmic `u` probes, and `α = β = p`.
    pub fn for_problem(problem: &RadialProblem, points: usize) -> Self {
        let points = points.max(2);
        let r = problem.radius();
        let radii = (0..points).map(|i| r * i as f64 / (points - 1) as f64).collect();
        let u_values = (-6..=6).map(|e| 10f64.powi(e)).flat_map(|u| [u, -u]).collect();
        Self {
            radii,
            u_values,
            large_u: 1e6,
            small_u: 1e-6,
            alpha: problem.exponent(),
            beta: problem.exponent(),
            limit_tol: 1e-3,
        }
    }
}

fn finite(r: f64, u: f64, x: f64, what: &str) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::Evaluation { r, u, what: what.to_string() })
    }
}

/// Sampled, advisory check of the structural hypotheses on `d` and `g`.
/// Failures are recorded in the report and never abort.
pub fn validate_problem(problem: &RadialProblem, probes: &ProbeGrid) -> Result<ConditionReport> {
    if probes.radii.is_empty() || probes.u_values.is_empty() {
        return Err(Error::Validation("probe grid must be nonempty".into()));
    }
    let w = problem.weight();
    let g = problem.perturbation();
    let p = problem.exponent();
    let mut report = ConditionReport::default();

    let mut d_vals = Vec::with_capacity(probes.radii.len());
    for &r in &probes.radii {
        d_vals.push(finite(r, f64::NAN, w.value(r), "weight d(r)")?);
    }

    let negative: Vec<f64> = probes.radii.iter().zip(&d_vals).filter(|(_, &d)| d < 0.0).map(|(&r, _)| r).collect();
    report.push(
        "weight_nonnegative",
        Verdict::from_bool(negative.is_empty()),
        negative,
        "d(r) >= 0 on the probe radii",
    );

    let d0 = finite(0.0, f64::NAN, w.value(0.0), "weight d(0)")?;
    report.push("weight_positive_at_origin", Verdict::from_bool(d0 > 0.0), vec![0.0], format!("d(0) = {d0}"));

    let mut radii: Vec<(f64, f64)> = probes.radii.iter().copied().zip(d_vals.iter().copied()).collect();
    radii.sort_by(|a, b| a.0.total_cmp(&b.0));
    let increasing: Vec<f64> = radii
        .windows(2)
        .filter(|win| win[1].1 > win[0].1 + 1e-12 * win[0].1.abs().max(1e-300))
        .map(|win| win[1].0)
        .collect();
    report.push(
        "weight_nonincreasing",
        Verdict::from_bool(increasing.is_empty()),
        increasing,
        "d nonincreasing in r on the probe radii",
    );

    // Limit conditions: the ratio must be small at the extreme probe, or at
    // least clearly decaying over three decades toward it.
    let mut limit_check = |name: &str, probe: f64, ratio: &dyn Fn(f64, f64) -> f64, toward_large: bool| -> Result<()> {
        let backoff = if toward_large { probe * 1e-3 } else { probe * 1e3 };
        let mut bad = Vec::new();
        for &r in &probes.radii {
            let at = finite(r, probe, ratio(r, probe), "perturbation g")?;
            let before = finite(r, backoff, ratio(r, backoff), "perturbation g")?;
            let ok = at <= probes.limit_tol || at < 0.5 * before;
            if !ok {
                bad.push(r);
            }
        }
        report.push(name, Verdict::from_bool(bad.is_empty()), bad, format!("ratio probed at u = {probe:e}"));
        Ok(())
    };
    limit_check(
        "perturbation_superlinear_growth_limit",
        probes.large_u,
        &|r, u| (g.value(r, u) / abs_pow(u, p - 1.0)).abs(),
        true,
    )?;
    limit_check("perturbation_small_amplitude_limit", probes.small_u, &|r, u| (g.value(r, u) / u).abs(), false)?;

    let mut ar_bad = Vec::new();
    for &r in &probes.radii {
        for &u in &probes.u_values {
            if u == 0.0 {
                continue;
            }
            let fu = finite(r, u, problem.f(r, u) * u, "f(r,u)u")?;
            let fuu = finite(r, u, problem.f_u(r, u) * u * u, "f_u(r,u)u^2")?;
            let slack = 1e-12 * fuu.abs().max(fu.abs());
            let ok = fu > 0.0 && (probes.alpha - 1.0) * fu <= fuu + slack && fuu <= (probes.beta - 1.0) * fu + slack;
            if !ok {
                ar_bad.push(r);
            }
        }
    }
    ar_bad.dedup();
    report.push(
        "ambrosetti_rabinowitz",
        Verdict::from_bool(ar_bad.is_empty()),
        ar_bad,
        format!("0 < (alpha-1) f u <= f_u u^2 <= (beta-1) f u with alpha = {}, beta = {}", probes.alpha, probes.beta),
    );
    report.note("sampled hypothesis check; advisory only");
    Ok(report)
}
