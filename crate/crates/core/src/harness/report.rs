use serde::Serialize;

/// How a claim is established.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckKind {
    /// Analytic or deterministic comparison.
    Exact,
    /// Monte-Carlo comparison with a standard-error tolerance.
    Statistical,
    /// Depends on assumed fixture data (link parameters not published in
    /// text form).
    Contingent,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub kind: CheckKind,
    /// Whether the suite counts this check toward its verdict. Contingent
    /// numeric targets are tracked but not required.
    pub required: bool,
    pub passed: bool,
    pub detail: String,
}

/// Machine-readable outcome of a suite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub suite: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub checks: Vec<Check>,
    /// Free-form tables (e.g. probability matrices), keyed by name.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub tables: Vec<ReportTable>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportTable {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Report {
    pub fn new(suite: impl Into<String>) -> Self {
        Report {
            suite: suite.into(),
            seed: None,
            checks: Vec::new(),
            tables: Vec::new(),
        }
    }

    pub fn push(&mut self, name: impl Into<String>, kind: CheckKind, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            kind,
            required: true,
            passed,
            detail: detail.into(),
        });
    }

    /// Records a tracked target that does not affect [`Report::passed`].
    pub fn track(&mut self, name: impl Into<String>, kind: CheckKind, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            kind,
            required: false,
            passed,
            detail: detail.into(),
        });
    }

    /// True when every required check passed.
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed || !c.required)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| c.required && !c.passed)
    }

    pub fn find(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization") + "\n"
    }
}
