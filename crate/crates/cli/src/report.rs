//! Machine-readable run reports. Each metric carries the numbers its pass flag
//! is computed from, so the flag can be re-derived from the record alone.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Comparison applied to a metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// `|value − reference| ≤ tolerance`.
    AbsErr,
    /// `|value − reference| ≤ tolerance · |reference|`.
    RelErr,
    /// `|value − reference| ≤ tolerance · se`.
    WithinSe,
    /// `value ≤ reference + tolerance`.
    AtMost,
    /// `value ≥ reference − tolerance`.
    AtLeast,
}

impl Rule {
    pub fn check(self, value: f64, reference: f64, se: Option<f64>, tolerance: f64) -> bool {
        match self {
            Rule::AbsErr => (value - reference).abs() <= tolerance,
            Rule::RelErr => (value - reference).abs() <= tolerance * reference.abs(),
            Rule::WithinSe => se.is_some_and(|s| (value - reference).abs() <= tolerance * s),
            Rule::AtMost => value <= reference + tolerance,
            Rule::AtLeast => value >= reference - tolerance,
        }
    }
}

/// One measured quantity against its reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub name: String,
    pub value: f64,
    pub reference: f64,
    pub se: Option<f64>,
    pub tolerance: f64,
    pub rule: Rule,
    pub pass: bool,
    /// Reported for context only; does not enter the verdict.
    #[serde(default)]
    pub informational: bool,
}

impl Metric {
    pub fn new(
        name: impl Into<String>,
        value: f64,
        reference: f64,
        tolerance: f64,
        rule: Rule,
    ) -> Self {
        Self::build(name.into(), value, reference, None, tolerance, rule)
    }

    pub fn with_se(name: impl Into<String>, value: f64, se: f64, reference: f64, k: f64) -> Self {
        Self::build(name.into(), value, reference, Some(se), k, Rule::WithinSe)
    }

    /// A count that must equal `expected`.
    pub fn count(name: impl Into<String>, value: usize, expected: usize) -> Self {
        Self::new(name, value as f64, expected as f64, 0.0, Rule::AbsErr)
    }

    fn build(
        name: String,
        value: f64,
        reference: f64,
        se: Option<f64>,
        tolerance: f64,
        rule: Rule,
    ) -> Self {
        let pass = rule.check(value, reference, se, tolerance);
        Self {
            name,
            value,
            reference,
            se,
            tolerance,
            rule,
            pass,
            informational: false,
        }
    }

    pub fn info(mut self) -> Self {
        self.informational = true;
        self
    }

    /// Recomputes the pass flag from the stored fields.
    pub fn rederive(&self) -> bool {
        self.rule
            .check(self.value, self.reference, self.se, self.tolerance)
    }
}

/// Verdict on a group of metrics.
pub fn all_pass(metrics: &[Metric]) -> bool {
    metrics.iter().filter(|m| !m.informational).all(|m| m.pass)
}

/// Result of one acceptance criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u8,
    pub title: String,
    pub pass: bool,
    pub metrics: Vec<Metric>,
    pub notes: Vec<String>,
}

impl CriterionResult {
    pub fn new(id: u8, title: impl Into<String>, metrics: Vec<Metric>, notes: Vec<String>) -> Self {
        Self {
            id,
            title: title.into(),
            pass: all_pass(&metrics),
            metrics,
            notes,
        }
    }

    /// One summary line: `[PASS] 3 title` followed by the failing metrics.
    pub fn line(&self) -> String {
        let mut s = format!(
            "[{}] {:>2} {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.title
        );
        for m in self.metrics.iter().filter(|m| !m.pass && !m.informational) {
            s.push_str(&format!(
                "; {} = {:.6e} vs {:.6e}",
                m.name, m.value, m.reference
            ));
        }
        s
    }
}

/// Report of one harness run. Wall-clock time is kept out of this record so
/// that identical configurations give byte-identical reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub experiment: String,
    pub config_hash: String,
    /// Effective parameters of the run, defaults included.
    pub config: serde_json::Value,
    pub metrics: Vec<Metric>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub criteria: Vec<CriterionResult>,
    pub outputs: Vec<String>,
    /// Steps that failed without stopping the run.
    pub failures: Vec<String>,
    pub pass: bool,
}

impl ReportRecord {
    pub fn new<C: Serialize>(experiment: &str, config: &C) -> CliResult<Self> {
        let value = serde_json::to_value(config).map_err(|e| CliError::Serialize(e.to_string()))?;
        Ok(Self {
            experiment: experiment.into(),
            config_hash: config_hash(experiment, &value)?,
            config: value,
            metrics: Vec::new(),
            criteria: Vec::new(),
            outputs: Vec::new(),
            failures: Vec::new(),
            pass: true,
        })
    }

    /// Sets the overall verdict from metrics, criteria and failures.
    pub fn finish(&mut self) {
        self.pass = all_pass(&self.metrics)
            && self.criteria.iter().all(|c| c.pass)
            && self.failures.is_empty();
    }

    pub fn to_json(&self) -> CliResult<String> {
        serde_json::to_string_pretty(self)
            .map(|s| s + "\n")
            .map_err(|e| CliError::Serialize(e.to_string()))
    }
}

/// SHA-256 of the experiment name and the compact JSON of its parameters.
pub fn config_hash(experiment: &str, config: &serde_json::Value) -> CliResult<String> {
    let body = serde_json::to_string(config).map_err(|e| CliError::Serialize(e.to_string()))?;
    let digest = Sha256::new()
        .chain_update(experiment.as_bytes())
        .chain_update([0u8])
        .chain_update(body)
        .finalize();
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}
