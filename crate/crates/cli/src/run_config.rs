//! Resolved run configuration: the key/value file, the problem it names,
//! and the solver settings shared by every command.

use std::path::{Path, PathBuf};

use nls_masscurve::config::KeyValues;
use nls_masscurve::continuation::TraceSettings;
use nls_masscurve::ground_state::GroundStateSettings;
use nls_masscurve::json;
use nls_masscurve::problem::{RadialProblem, PROBLEM_KEYS};
use nls_masscurve::{Error, Result};
use serde_json::Value;

/// Keys understood by every command besides the problem keys.
const COMMON_KEYS: &[&str] = &["problem", "rtol", "atol", "radius_tol", "boundary_tol", "matching_tol", "threads"];

pub const TRACE_KEYS: &[&str] = &["lambda_min", "lambda_max", "budget", "jump_tol", "max_refinements"];

pub struct RunConfig {
    /// Every key after merging the problem file; problem-file keys are
    /// overridden by the run file.
    pub values: KeyValues,
    pub problem: Option<RadialProblem>,
    pub ground_state: GroundStateSettings,
    pub threads: Option<usize>,
    pub out_dir: PathBuf,
}

impl RunConfig {
    /// Reads `path`, applies `overrides` (`key=value`), and checks every key
    /// against the common keys, the problem keys and `command_keys`.
    pub fn load(path: &Path, overrides: &[String], command_keys: &[&str], out_dir: PathBuf) -> Result<Self> {
        let mut values = KeyValues::read(path)?;
        for item in overrides {
            let (k, v) =
                item.split_once('=').ok_or_else(|| Error::Config(format!("override `{item}` is not `key=value`")))?;
            values.insert(k.trim(), v.trim());
        }
        if let Some(problem_file) = values.get("problem").map(str::to_owned) {
            let base = path.parent().unwrap_or(Path::new("."));
            let nested = KeyValues::read(base.join(&problem_file))?;
            nested.check_keys(PROBLEM_KEYS)?;
            for (k, v) in nested.iter() {
                if values.get(k).is_none() {
                    values.insert(k, v);
                }
            }
        }
        let allowed: Vec<&str> = COMMON_KEYS.iter().chain(PROBLEM_KEYS).chain(command_keys).copied().collect();
        values.check_keys(&allowed)?;

        let mut problem_kv = KeyValues::default();
        for (k, v) in values.iter() {
            if PROBLEM_KEYS.contains(&k) {
                problem_kv.insert(k, v);
            }
        }
        let problem = if problem_kv.is_empty() { None } else { Some(RadialProblem::from_config(&problem_kv)?) };

        let mut gs = GroundStateSettings::default();
        gs.integrator.rtol = values.f64_or("rtol", gs.integrator.rtol)?;
        gs.integrator.atol = values.f64_or("atol", gs.integrator.atol)?;
        gs.radius_tol = values.f64_or("radius_tol", gs.radius_tol)?;
        gs.boundary_tol = values.f64_or("boundary_tol", gs.boundary_tol)?;
        gs.matching_tol = values.f64_or("matching_tol", gs.matching_tol)?;
        gs.validate().map_err(|e| Error::Config(e.to_string()))?;
        let threads = values.usize("threads")?;
        if threads == Some(0) {
            return Err(Error::Config("`threads` must be positive".into()));
        }
        Ok(Self { values, problem, ground_state: gs, threads, out_dir })
    }

    pub fn problem(&self) -> Result<&RadialProblem> {
        self.problem.as_ref().ok_or_else(|| Error::Config("missing key `dimension`".into()))
    }

    pub fn trace_settings(&self) -> Result<TraceSettings> {
        let mut ts = TraceSettings { ground_state: self.ground_state, threads: self.threads, ..Default::default() };
        ts.budget = self.values.usize("budget")?.unwrap_or(ts.budget);
        ts.jump_tol = self.values.f64_or("jump_tol", ts.jump_tol)?;
        ts.max_refinements = self.values.usize("max_refinements")?.unwrap_or(ts.max_refinements);
        Ok(ts)
    }

    /// The run file as given plus the resolved problem and settings.
    /// Excludes the output directory and thread count, which do not affect
    /// results.
    pub fn provenance(&self) -> Result<Value> {
        let keys = json::object(
            self.values
                .iter()
                .filter(|(k, _)| *k != "threads")
                .map(|(k, v)| (k.to_string(), Value::String(v.to_string()))),
        );
        let problem = match &self.problem {
            Some(p) => json::object(p.describe().into_iter().map(|(k, v)| (k, Value::String(v)))),
            None => Value::Null,
        };
        let settings = serde_json::to_value(self.ground_state).map_err(|e| Error::Numeric(e.to_string()))?;
        Ok(json::object([("keys", keys), ("problem", problem), ("ground_state", settings)]))
    }

    pub fn write(&self, name: &str, contents: &str) -> Result<()> {
        std::fs::create_dir_all(&self.out_dir)?;
        std::fs::write(self.out_dir.join(name), contents)?;
        Ok(())
    }

    /// Writes `{config, ...fields}` as `name`.
    pub fn write_json(&self, name: &str, fields: Vec<(&str, Value)>) -> Result<()> {
        let mut pairs = vec![("config", self.provenance()?)];
        pairs.extend(fields);
        self.write(name, &json::render(&json::object(pairs)))
    }
}

pub fn to_value<T: serde::Serialize>(value: &T) -> Result<Value> {
    serde_json::to_value(value).map_err(|e| Error::Numeric(format!("serialization failed: {e}")))
}
