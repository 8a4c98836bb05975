//! Machine-readable job reports.
//!
//! Every report is one JSON document carrying the schema version, the
//! geometry hash, the tolerance tier and one pass/fail entry per checked
//! criterion.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::collar_geometry::{GeometryKind, GeometrySpec};
use crate::expansion_engine::Problem;

const SCHEMA_VERSION: &str = "1";

/// Identifier of the report layout. Bumped on any incompatible change.
pub fn report_schema_version() -> &'static str {
    SCHEMA_VERSION
}

/// Relative tolerance tier for budget checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToleranceTier {
    /// Closed-form oracles exist: `1e-6`.
    Oracle,
    /// Both sides numeric: `1e-4`.
    Numeric,
}

impl ToleranceTier {
    pub fn relative(self) -> f64 {
        match self {
            ToleranceTier::Oracle => 1e-6,
            ToleranceTier::Numeric => 1e-4,
        }
    }

    /// `Oracle` on the Euclidean ball, `Numeric` everywhere else.
    pub fn for_geometry(spec: &GeometrySpec) -> Self {
        match spec.geometry {
            GeometryKind::EuclideanBall { .. } => ToleranceTier::Oracle,
            _ => ToleranceTier::Numeric,
        }
    }
}

impl fmt::Display for ToleranceTier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ToleranceTier::Oracle => "oracle",
            ToleranceTier::Numeric => "numeric",
        })
    }
}

impl FromStr for ToleranceTier {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "oracle" => Ok(ToleranceTier::Oracle),
            "numeric" => Ok(ToleranceTier::Numeric),
            other => Err(format!("unknown tolerance tier `{other}` (expected oracle or numeric)")),
        }
    }
}

/// One asserted quantity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Criterion {
    /// Passes when `|value| < tolerance`.
    pub fn below(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Criterion {
            name: name.into(),
            value,
            tolerance,
            passed: value.abs() < tolerance,
        }
    }

    /// Passes when `value ≥ −tolerance`.
    pub fn nonnegative(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Criterion {
            name: name.into(),
            value,
            tolerance,
            passed: value >= -tolerance,
        }
    }

    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        Criterion {
            name: name.into(),
            value: if ok { 1.0 } else { 0.0 },
            tolerance: 0.0,
            passed: ok,
        }
    }
}

/// A stage report.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: String,
    pub stage: String,
    pub geometry_name: Option<String>,
    pub geometry_hash: String,
    pub tolerance_tier: ToleranceTier,
    pub k: Option<u8>,
    pub criteria: Vec<Criterion>,
    pub passed: bool,
    pub data: serde_json::Value,
}

impl Report {
    pub fn new(stage: &str, spec: &GeometrySpec, tier: ToleranceTier, k: Option<Problem>) -> Self {
        Report {
            schema_version: SCHEMA_VERSION.into(),
            stage: stage.into(),
            geometry_name: spec.name.clone(),
            geometry_hash: spec.hash(),
            tolerance_tier: tier,
            k: k.map(Problem::k),
            criteria: Vec::new(),
            passed: true,
            data: serde_json::Value::Null,
        }
    }

    pub fn check(&mut self, criterion: Criterion) {
        self.passed &= criterion.passed;
        self.criteria.push(criterion);
    }

    pub fn with_data<T: Serialize>(mut self, data: &T) -> Self {
        self.data = serde_json::to_value(data).expect("report data serializes");
        self
    }

    pub fn first_failure(&self) -> Option<&Criterion> {
        self.criteria.iter().find(|c| !c.passed)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Writes `<dir>/<stage>.json`.
    pub fn write(&self, dir: &Path) -> std::io::Result<PathBuf> {
        let path = dir.join(format!("{}.json", self.stage));
        std::fs::write(&path, self.to_json())?;
        Ok(path)
    }
}
