//! Coverage x gap sensitivity table and its three headline checks.

use serde::Serialize;

use crate::error::Result;

use super::sweep::{grid, run_sweep, CellResult, Mechanism, SweepResult, SweepSettings};

#[derive(Debug, Clone, Serialize)]
pub struct SensitivityRow {
    pub coverage: f64,
    pub gap: f64,
    pub mechanism: Mechanism,
    pub rho_avg_mean: f64,
    pub rho_avg_std: f64,
    pub rho_irt_mean: f64,
    pub rho_irt_std: f64,
    pub n_seeds: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SensitivityFindings {
    /// Every C = 1.0 row has rho_avg > 0.95.
    pub full_coverage_averaging_ok: bool,
    /// Every MCAR C = 0.5 row has rho_avg > 0.90.
    pub mcar_half_coverage_averaging_ok: bool,
    /// Every biased C = 0.3 row has rho_irt > 0.95.
    pub biased_low_coverage_irt_ok: bool,
}

impl SensitivityFindings {
    pub fn all(&self) -> bool {
        self.full_coverage_averaging_ok
            && self.mcar_half_coverage_averaging_ok
            && self.biased_low_coverage_irt_ok
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SensitivityResult {
    pub rows: Vec<SensitivityRow>,
    pub findings: SensitivityFindings,
    #[serde(skip)]
    pub sweep: SweepResult,
}

/// Settings for coverage 0.3..=1.0 by 0.1 and gaps 1.0..=4.0 by 1.0.
pub fn sensitivity_settings(base: &SweepSettings) -> SweepSettings {
    let coverages = grid(0.3, 1.0, 0.1).expect("static grid");
    SweepSettings {
        sparsities: coverages
            .iter()
            .rev()
            .map(|c| ((1.0 - c) * 1e9).round() / 1e9)
            .collect(),
        gaps: grid(1.0, 4.0, 1.0).expect("static grid"),
        ..base.clone()
    }
}

fn row(c: &CellResult) -> SensitivityRow {
    let avg = c.rho_avg();
    let irt = c.rho_irt();
    SensitivityRow {
        coverage: ((1.0 - c.sparsity) * 1e9).round() / 1e9,
        gap: c.gap,
        mechanism: c.mechanism,
        rho_avg_mean: avg.mean,
        rho_avg_std: avg.std,
        rho_irt_mean: irt.mean,
        rho_irt_std: irt.std,
        n_seeds: c.n_seeds(),
    }
}

pub fn run_sensitivity(base: &SweepSettings) -> Result<SensitivityResult> {
    let settings = sensitivity_settings(base);
    let sweep = run_sweep(&settings)?;
    let rows: Vec<SensitivityRow> = sweep.cells.iter().map(row).collect();
    let near = |a: f64, b: f64| (a - b).abs() < 1e-6;
    let check = |pred: &dyn Fn(&SensitivityRow) -> bool, sel: &dyn Fn(&SensitivityRow) -> bool| {
        let selected: Vec<_> = rows.iter().filter(|r| sel(r)).collect();
        !selected.is_empty() && selected.iter().all(|r| r.n_seeds > 0 && pred(r))
    };
    let findings = SensitivityFindings {
        full_coverage_averaging_ok: check(&|r| r.rho_avg_mean > 0.95, &|r| near(r.coverage, 1.0)),
        mcar_half_coverage_averaging_ok: check(&|r| r.rho_avg_mean > 0.90, &|r| {
            r.mechanism == Mechanism::Mcar && near(r.coverage, 0.5)
        }),
        biased_low_coverage_irt_ok: check(&|r| r.rho_irt_mean > 0.95, &|r| {
            r.mechanism == Mechanism::Biased && near(r.coverage, 0.3)
        }),
    };
    Ok(SensitivityResult {
        rows,
        findings,
        sweep,
    })
}
