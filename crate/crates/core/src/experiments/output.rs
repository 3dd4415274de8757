//! Result files. Every float is written with 4 decimals.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde_json::{json, Value};

use crate::error::Result;
use crate::ranking::{InteractionFit, PowerLawFit};

use super::domains::DomainResult;
use super::sensitivity::SensitivityResult;
use super::sweep::{Mechanism, SweepAnalysis, SweepResult};

fn f4(v: f64) -> String {
    format!("{v:.4}")
}

/// JSON number rounded to 4 decimals; non-finite values become null.
fn j4(v: f64) -> Value {
    if v.is_finite() {
        let r = (v * 1e4).round() / 1e4;
        serde_json::Number::from_f64(r).map_or(Value::Null, Value::Number)
    } else {
        Value::Null
    }
}

pub fn table1_csv(results: &[DomainResult]) -> String {
    let mut out = String::from(
        "domain,coverage,difficulty_gap,rho_avg_mean,rho_avg_std,rho_irt_mean,rho_irt_std,verdict\n",
    );
    for r in results {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.domain.key(),
            f4(r.coverage),
            f4(r.difficulty_gap),
            f4(r.rho_avg.mean),
            f4(r.rho_avg.std),
            f4(r.rho_irt.mean),
            f4(r.rho_irt.std),
            r.verdict()
        );
    }
    out
}

pub fn table2_csv(results: &[DomainResult]) -> String {
    let mut out =
        String::from("domain,S,D,SxD,rho_avg_mean,rho_avg_std,rho_irt_mean,rho_irt_std\n");
    for r in results {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.domain.key(),
            f4(r.sparsity()),
            f4(r.difficulty_gap),
            f4(r.sd_product()),
            f4(r.rho_avg.mean),
            f4(r.rho_avg.std),
            f4(r.rho_irt.mean),
            f4(r.rho_irt.std)
        );
    }
    out
}

pub fn domain_report(results: &[DomainResult]) -> String {
    let mut out = String::new();
    for r in results {
        let _ = writeln!(out, "== {} ==", r.domain.title());
        let _ = writeln!(
            out,
            "coverage {}  gap {}  SxD {}  seeds {}",
            f4(r.coverage),
            f4(r.difficulty_gap),
            f4(r.sd_product()),
            r.outcomes.len()
        );
        let _ = writeln!(
            out,
            "rho_avg {} +/- {}   rho_irt {} +/- {}   verdict: {}",
            f4(r.rho_avg.mean),
            f4(r.rho_avg.std),
            f4(r.rho_irt.mean),
            f4(r.rho_irt.std),
            r.verdict()
        );
        let _ = writeln!(
            out,
            "item difficulty recovery (first seed) {}",
            f4(r.default_seed_difficulty_recovery())
        );
        for s in &r.special {
            let _ = writeln!(
                out,
                "  {:<20} true #{:<4} mean displacement avg {:+.4}  irt {:+.4}",
                s.label, s.true_rank, s.avg_displacement, s.irt_displacement
            );
        }
        out.push('\n');
    }
    out
}

pub fn sweep_csv(sweep: &SweepResult, mechanism: Mechanism) -> String {
    let mut out =
        String::from("S,D,mechanism,rho_avg_mean,rho_avg_std,rho_irt_mean,rho_irt_std,n_seeds\n");
    for c in sweep.cells_for(mechanism) {
        let avg = c.rho_avg();
        let irt = c.rho_irt();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            f4(c.sparsity),
            f4(c.gap),
            mechanism.key(),
            f4(avg.mean),
            f4(avg.std),
            f4(irt.mean),
            f4(irt.std),
            c.n_seeds()
        );
    }
    out
}

fn interaction_json(fit: &InteractionFit) -> Value {
    json!({
        "gamma": fit.gamma.iter().map(|v| j4(*v)).collect::<Vec<_>>(),
        "t_values": fit.t_values.iter().map(|v| j4(*v)).collect::<Vec<_>>(),
        "r_squared": j4(fit.r_squared),
        "n": fit.n,
    })
}

fn power_law_json(fit: &std::result::Result<PowerLawFit, String>) -> Value {
    let fit = match fit {
        Ok(fit) => fit,
        Err(reason) => return json!({ "error": reason }),
    };
    json!({
        "alpha": j4(fit.alpha),
        "beta": j4(fit.beta),
        "r_squared": j4(fit.r_squared),
        "n_fit": fit.n_fit,
        "n_scored": fit.n_scored,
    })
}

pub fn regression_json(analysis: &SweepAnalysis, valid: bool) -> String {
    let doc = json!({
        "rows": analysis.rows,
        "valid": valid,
        "biased": interaction_json(&analysis.biased),
        "mcar": interaction_json(&analysis.mcar),
        "power_law": power_law_json(&analysis.power_law),
        "mean_error_high_sparsity": {
            "threshold": j4(super::sweep::HIGH_SPARSITY),
            "biased": j4(analysis.biased_error_high_sparsity),
            "mcar": j4(analysis.mcar_error_high_sparsity),
            "difference": j4(analysis.mechanism_gap),
        },
    });
    let mut s = serde_json::to_string_pretty(&doc).expect("static JSON shape");
    s.push('\n');
    s
}

pub fn sweep_report(sweep: &SweepResult, analysis: Option<&SweepAnalysis>) -> String {
    let mut out = String::new();
    for m in Mechanism::BOTH {
        let cells: Vec<_> = sweep
            .cells_for(m)
            .filter(|c| !c.scores.is_empty())
            .collect();
        if cells.is_empty() {
            continue;
        }
        let min_avg = cells
            .iter()
            .map(|c| c.rho_avg().mean)
            .fold(f64::INFINITY, f64::min);
        let min_irt = cells
            .iter()
            .map(|c| c.rho_irt().mean)
            .fold(f64::INFINITY, f64::min);
        let _ = writeln!(
            out,
            "{m}: {} cells, min mean rho_avg {}, min mean rho_irt {}",
            cells.len(),
            f4(min_avg),
            f4(min_irt)
        );
    }
    let invalid = sweep.invalid_cells();
    let _ = writeln!(out, "invalid cells: {}", invalid.len());
    for c in invalid {
        let _ = writeln!(
            out,
            "  {} S={} D={}: {} failed seed(s), first: {}",
            c.mechanism,
            f4(c.sparsity),
            f4(c.gap),
            c.failures.len(),
            c.failures.first().map_or("", |f| f.1.as_str())
        );
    }
    if let Some(a) = analysis {
        for (name, fit) in [("biased", &a.biased), ("mcar", &a.mcar)] {
            let _ = writeln!(
                out,
                "{name} interaction regression (R^2 {}):",
                f4(fit.r_squared)
            );
            for (k, label) in ["g0", "g1 (S_c)", "g2 (D_c)", "g3 (S_c x D_c)"]
                .iter()
                .enumerate()
            {
                let _ = writeln!(
                    out,
                    "  {label:<16} {:+.4}  t = {}",
                    fit.gamma[k],
                    f4(fit.t_values[k])
                );
            }
        }
        match &a.power_law {
            Ok(p) => {
                let _ = writeln!(
                    out,
                    "power law (biased): alpha {} beta {} R^2 {}",
                    f4(p.alpha),
                    f4(p.beta),
                    f4(p.r_squared)
                );
            }
            Err(reason) => {
                let _ = writeln!(out, "power law (biased): not fitted: {reason}");
            }
        }
        let _ = writeln!(
            out,
            "mean error at S >= 0.40: biased {} mcar {} difference {}",
            f4(a.biased_error_high_sparsity),
            f4(a.mcar_error_high_sparsity),
            f4(a.mechanism_gap)
        );
    }
    out
}

pub fn sensitivity_csv(result: &SensitivityResult) -> String {
    let mut out = String::from(
        "coverage,D,mechanism,rho_avg_mean,rho_avg_std,rho_irt_mean,rho_irt_std,n_seeds\n",
    );
    for r in &result.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            f4(r.coverage),
            f4(r.gap),
            r.mechanism.key(),
            f4(r.rho_avg_mean),
            f4(r.rho_avg_std),
            f4(r.rho_irt_mean),
            f4(r.rho_irt_std),
            r.n_seeds
        );
    }
    out
}

pub fn sensitivity_report(result: &SensitivityResult) -> String {
    let f = &result.findings;
    let mark = |ok: bool| if ok { "holds" } else { "FAILS" };
    format!(
        "full coverage, every gap: rho_avg > 0.95 ... {}\nMCAR at 50% coverage: rho_avg > 0.90 ... {}\nbiased at 30% coverage: rho_irt > 0.95 ... {}\n",
        mark(f.full_coverage_averaging_ok),
        mark(f.mcar_half_coverage_averaging_ok),
        mark(f.biased_low_coverage_irt_ok)
    )
}

pub fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), contents)?;
    Ok(())
}
