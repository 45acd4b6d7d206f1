//! The JSON run report shared by all subcommands.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use socf::certify::Verification;
use socf::oracle::Argmin;
use socf::relax::{Formulation, SolveStats};
use socf::sdp::SdpSolution;
use socf::{Interval, SparsePoly};

pub const SCHEMA: &str = "socfopt/1";

/// Significant digits of every number written by the tool.
pub const SIGNIFICANT_DIGITS: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema: String,
    /// Arguments the tool was invoked with, program name excluded.
    pub command: Vec<String>,
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<SparsePoly>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interval: Option<Interval>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub formulation: Option<Formulation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleComparison>,
    pub timings: Timings,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub solver: Vec<SolverRecord>,
    /// Command-specific payload.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateRef {
    /// File the certificate was written to; `None` when it is inlined in
    /// the payload.
    pub path: Option<String>,
    pub bound: f64,
    pub parts: usize,
    pub max_gram_size: usize,
    pub verification: Verification,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    /// `None` when the polynomial is unbounded below.
    pub min_value: Option<f64>,
    pub argmin: Argmin,
    /// `|bound − min|`.
    pub gap: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Timings {
    pub total_ms: f64,
    pub solve_ms: f64,
    pub oracle_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverRecord {
    pub status: socf::sdp::SolveStatus,
    pub iterations: usize,
    pub primal_value: Option<f64>,
    pub dual_value: Option<f64>,
    pub gap: Option<f64>,
    pub blocks: usize,
    pub max_block_size: usize,
    pub constraints: usize,
    pub variable_scale: f64,
    pub coefficient_scale: f64,
    pub primal_infeas: Option<f64>,
    pub dual_infeas: Option<f64>,
    pub min_eig: Option<f64>,
}

pub fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

impl From<&SolveStats> for SolverRecord {
    fn from(s: &SolveStats) -> Self {
        SolverRecord {
            status: s.status,
            iterations: s.iterations,
            primal_value: finite(s.primal_value),
            dual_value: finite(s.dual_value),
            gap: finite(s.gap),
            blocks: s.blocks,
            max_block_size: s.max_block_size,
            constraints: s.constraints,
            variable_scale: s.variable_scale,
            coefficient_scale: s.coefficient_scale,
            primal_infeas: finite(s.residuals.primal_infeas),
            dual_infeas: finite(s.residuals.dual_infeas),
            min_eig: finite(s.residuals.min_eig),
        }
    }
}

impl SolverRecord {
    pub fn from_solution(problem: &socf::cones::BlockSdp, sol: &SdpSolution) -> Self {
        let r = socf::sdp::residuals(problem, sol);
        SolverRecord {
            status: sol.status,
            iterations: sol.iterations,
            primal_value: finite(sol.primal_value),
            dual_value: finite(sol.dual_value),
            gap: finite(sol.gap),
            blocks: problem.blocks.len(),
            max_block_size: problem.max_block_size(),
            constraints: problem.constraints.len(),
            variable_scale: 1.0,
            coefficient_scale: 1.0,
            primal_infeas: finite(r.primal_infeas),
            dual_infeas: finite(r.dual_infeas),
            min_eig: finite(r.min_eig),
        }
    }
}

impl RunReport {
    pub fn new(command: Vec<String>) -> Self {
        RunReport {
            schema: SCHEMA.to_string(),
            command,
            status: "ok".to_string(),
            message: None,
            input: None,
            interval: None,
            k: None,
            d: None,
            formulation: None,
            bound: None,
            certificate: None,
            oracle: None,
            timings: Timings::default(),
            solver: Vec::new(),
            output: None,
        }
    }

    /// The report with every floating-point number rounded to
    /// [`SIGNIFICANT_DIGITS`], so that what is written is exactly what is
    /// read back.
    pub fn rounded(&self) -> RunReport {
        let v = round_value(serde_json::to_value(self).expect("report serializes"));
        serde_json::from_value(v).expect("rounded report deserializes")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.rounded()).expect("report serializes")
    }
}

pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().unwrap_or(x)
}

/// Rounds all non-integer numbers in a JSON value.
pub fn round_value(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => n
            .as_f64()
            .and_then(|x| serde_json::Number::from_f64(round_sig(x)))
            .map_or(Value::Null, Value::Number),
        Value::Array(a) => Value::Array(a.into_iter().map(round_value).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_value(v))).collect()),
        other => other,
    }
}

/// Any serializable value as rounded, pretty JSON.
pub fn to_rounded_json<T: Serialize>(x: &T) -> String {
    let v = round_value(serde_json::to_value(x).expect("value serializes"));
    serde_json::to_string_pretty(&v).expect("value serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_keeps_twelve_digits() {
        assert_eq!(round_sig(1.0 / 3.0), 0.333333333333);
        assert_eq!(round_sig(-2.0), -2.0);
        assert_eq!(round_sig(123456789.123456789), 123456789.123);
        assert_eq!(round_sig(0.0), 0.0);
    }

    #[test]
    fn integers_are_left_alone() {
        let v = round_value(serde_json::json!({"n": 12345678901234u64, "x": 0.1234567890123456}));
        assert_eq!(v["n"], 12345678901234u64);
        assert_eq!(v["x"], 0.123456789012);
    }
}
