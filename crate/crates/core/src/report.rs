use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Indeterminate,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn is_pass(self) -> bool {
        self == Verdict::Pass
    }
}

/// One named check with the sample points that witness its verdict.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub verdict: Verdict,
    /// Radii (or other abscissae) where the check failed, or where the
    /// deciding value was observed when it passed.
    pub witnesses: Vec<f64>,
    pub detail: String,
}

/// Ordered collection of pass/fail verdicts.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ConditionReport {
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
}

impl ConditionReport {
    pub fn push(&mut self, name: impl Into<String>, verdict: Verdict, witnesses: Vec<f64>, detail: impl Into<String>) {
        self.checks.push(Check { name: name.into(), verdict, witnesses, detail: detail.into() });
    }

    pub fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn verdict(&self, name: &str) -> Option<Verdict> {
        self.get(name).map(|c| c.verdict)
    }

    /// Fail if any check failed, indeterminate if none failed but some were
    /// indeterminate, pass otherwise.
    pub fn overall(&self) -> Verdict {
        if self.checks.iter().any(|c| c.verdict == Verdict::Fail) {
            Verdict::Fail
        } else if self.checks.iter().any(|c| c.verdict == Verdict::Indeterminate) {
            Verdict::Indeterminate
        } else {
            Verdict::Pass
        }
    }

    pub fn all_pass(&self) -> bool {
        self.overall() == Verdict::Pass
    }
}
