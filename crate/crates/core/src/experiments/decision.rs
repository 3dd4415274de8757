//! Practitioner decision rule and the analytic expectation of a simple average.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::irt::{sigmoid, ItemParameterSet};
use crate::matrix::{estimate_difficulty_heterogeneity, ResponseMatrix};

pub const DEFAULT_COVERAGE_THRESHOLD: f64 = 0.95;
pub const DEFAULT_HETEROGENEITY_THRESHOLD: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    AveragingAdequate,
    UseIrt,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::AveragingAdequate => "averaging_adequate",
            Verdict::UseIrt => "use_irt",
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DecisionVerdict {
    pub coverage: f64,
    pub heterogeneity: f64,
    pub verdict: Verdict,
    pub rationale: String,
}

/// Averaging is adequate only with near-complete coverage and homogeneous items.
pub fn decision_rule(
    matrix: &ResponseMatrix,
    coverage_threshold: f64,
    heterogeneity_threshold: f64,
) -> Result<DecisionVerdict> {
    let coverage = matrix.coverage();
    let heterogeneity = estimate_difficulty_heterogeneity(matrix)?;
    let dense = coverage > coverage_threshold;
    let homogeneous = heterogeneity <= heterogeneity_threshold;
    let verdict = if dense && homogeneous {
        Verdict::AveragingAdequate
    } else {
        Verdict::UseIrt
    };
    let rationale = match (dense, homogeneous) {
        (true, true) => format!(
            "coverage {coverage:.4} > {coverage_threshold:.2} and item-rate CV {heterogeneity:.4} <= {heterogeneity_threshold:.2}: simple averaging is adequate"
        ),
        (false, _) => format!(
            "coverage {coverage:.4} <= {coverage_threshold:.2}: missing cells can bias simple averages; use IRT"
        ),
        (true, false) => format!(
            "item-rate CV {heterogeneity:.4} > {heterogeneity_threshold:.2}: item difficulty is heterogeneous; use IRT"
        ),
    };
    Ok(DecisionVerdict {
        coverage,
        heterogeneity,
        verdict,
        rationale,
    })
}

/// Expected simple average of a system with ability `theta` over `subset`.
pub fn expected_average_bias(
    theta: f64,
    items: &ItemParameterSet,
    subset: &[usize],
) -> Result<f64> {
    if subset.is_empty() {
        return Err(Error::InvalidParameter("item subset is empty".into()));
    }
    if let Some(&i) = subset.iter().find(|&&i| i >= items.len()) {
        return Err(Error::InvalidParameter(format!(
            "item index {i} out of range"
        )));
    }
    let total: f64 = subset
        .iter()
        .map(|&i| sigmoid(items.a(i) * (theta - items.b(i))))
        .sum();
    Ok(total / subset.len() as f64)
}
