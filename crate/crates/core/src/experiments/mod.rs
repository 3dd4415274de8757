//! Experiment orchestration: domain reproductions, the grid sweep, the
//! sensitivity table, the decision rule, and result files.

pub mod decision;
pub mod domains;
pub mod output;
pub mod sensitivity;
pub mod sweep;

use serde::Serialize;

pub use decision::{decision_rule, expected_average_bias, DecisionVerdict, Verdict};
pub use domains::{run_domain, DomainResult, SeedOutcome};
pub use sensitivity::{run_sensitivity, SensitivityResult};
pub use sweep::{
    analyze_sweep, run_sweep, Mechanism, RegressionRows, SweepAnalysis, SweepResult, SweepSettings,
};

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl Summary {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.into_iter().collect();
        if v.is_empty() {
            return Self {
                mean: f64::NAN,
                std: f64::NAN,
                n: 0,
            };
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        Self {
            mean,
            std: var.sqrt(),
            n: v.len(),
        }
    }
}
