//! Command-line interface.

use std::fmt::Write as _;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::experiments::decision::{
    decision_rule, DEFAULT_COVERAGE_THRESHOLD, DEFAULT_HETEROGENEITY_THRESHOLD,
};
use crate::experiments::domains::{replicate_seed, run_domain, DomainResult};
use crate::experiments::output;
use crate::experiments::sensitivity::run_sensitivity;
use crate::experiments::sweep::{
    analyze_sweep, grid, run_sweep, Mechanism, RegressionRows, SweepSettings,
};
use crate::irt::{fit, standard_errors, FitSettings, PriorConfig};
use crate::matrix::{
    estimate_difficulty_heterogeneity, load_matrix_csv, save_matrix_csv, ResponseMatrix,
};
use crate::ranking::{simple_average, spearman_rho, Ranking};
use crate::simgen::{domain_config, Domain};

#[derive(Debug, Parser)]
#[command(
    name = "fairrank",
    version,
    about = "IRT versus simple-average rankings on sparse evaluation matrices"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub global: GlobalArgs,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Output directory.
    #[arg(long, global = true, env = "FAIRRANK_OUT", default_value = "results")]
    pub out: PathBuf,

    /// Master seed.
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// Prior sd of abilities.
    #[arg(long, global = true, default_value_t = 1.0)]
    pub theta_sd: f64,

    /// Prior sd of item difficulties.
    #[arg(long, global = true, default_value_t = std::f64::consts::SQRT_2)]
    pub difficulty_sd: f64,

    /// Prior sd of log discriminations.
    #[arg(long, global = true, default_value_t = 0.5)]
    pub log_discrimination_sd: f64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Reproduce the four domain experiments.
    Domains(DomainsArgs),
    /// Sparsity x difficulty-gap grid sweep with regression analysis.
    Sweep(SweepArgs),
    /// Coverage x gap sensitivity table.
    Sensitivity(SensitivityArgs),
    /// Rank systems in a CSV matrix by simple average and by IRT.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Args)]
pub struct DomainsArgs {
    /// Seeds per domain.
    #[arg(long, default_value_t = 20)]
    pub seeds: usize,

    /// Run only these domains (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<Domain>,

    /// Also write the first replicate of each domain as matrix_<domain>.csv.
    #[arg(long)]
    pub export_matrices: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Seeds per grid cell.
    #[arg(long, default_value_t = 15)]
    pub seeds: usize,

    #[arg(long, default_value_t = 0.70)]
    pub s_max: f64,

    #[arg(long, default_value_t = 0.05)]
    pub s_step: f64,

    #[arg(long, default_value_t = 0.5)]
    pub d_min: f64,

    #[arg(long, default_value_t = 5.0)]
    pub d_max: f64,

    #[arg(long, default_value_t = 0.5)]
    pub d_step: f64,

    /// Regression rows: one per cell or one per seed.
    #[arg(long, default_value = "cells")]
    pub regression_rows: RegressionRows,
}

#[derive(Debug, Args)]
pub struct SensitivityArgs {
    /// Seeds per condition.
    #[arg(long, default_value_t = 15)]
    pub seeds: usize,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// CSV with columns system,item,successes,trials.
    pub matrix: PathBuf,

    #[arg(long, default_value_t = DEFAULT_COVERAGE_THRESHOLD)]
    pub coverage_threshold: f64,

    #[arg(long, default_value_t = DEFAULT_HETEROGENEITY_THRESHOLD)]
    pub cv_threshold: f64,
}

/// Parse arguments, run, and map failures to a nonzero exit.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

/// Returns `Ok(false)` when outputs were written but a validity budget failed.
pub fn run(cli: &Cli) -> Result<bool> {
    let g = &cli.global;
    let priors = PriorConfig {
        theta_sd: g.theta_sd,
        difficulty_sd: g.difficulty_sd,
        log_discrimination_sd: g.log_discrimination_sd,
    };
    priors.validate()?;
    if let Some(jobs) = g.jobs {
        if jobs == 0 {
            return Err(Error::InvalidParameter("--jobs must be at least 1".into()));
        }
        // Fails only if a pool already exists, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    match &cli.command {
        Command::Domains(args) => cmd_domains(args, g, &priors),
        Command::Sweep(args) => cmd_sweep(args, g, &priors),
        Command::Sensitivity(args) => cmd_sensitivity(args, g, &priors),
        Command::Analyze(args) => cmd_analyze(args, g, &priors),
    }
}

fn require_seeds(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter("--seeds must be at least 1".into()));
    }
    Ok(())
}

fn cmd_domains(args: &DomainsArgs, g: &GlobalArgs, priors: &PriorConfig) -> Result<bool> {
    require_seeds(args.seeds)?;
    let domains: Vec<Domain> = if args.only.is_empty() {
        Domain::ALL.to_vec()
    } else {
        Domain::ALL
            .into_iter()
            .filter(|d| args.only.contains(d))
            .collect()
    };
    let settings = FitSettings::default();
    let mut results: Vec<DomainResult> = Vec::new();
    let mut failures = String::new();
    for &domain in &domains {
        match run_domain(domain, args.seeds, g.seed, priors, &settings) {
            Ok(r) => results.push(r),
            Err(e) => {
                let _ = writeln!(failures, "FAILED {}: {e}", domain.key());
                eprintln!("error: domain {} failed: {e}", domain.key());
            }
        }
    }
    output::write(&g.out, "table1.csv", &output::table1_csv(&results))?;
    output::write(&g.out, "table2.csv", &output::table2_csv(&results))?;
    let mut report = output::domain_report(&results);
    if !failures.is_empty() {
        report.push_str("PARTIAL RESULTS\n");
        report.push_str(&failures);
    }
    output::write(&g.out, "report.txt", &report)?;
    if args.export_matrices {
        for &domain in &domains {
            let matrix = domain_config(domain).generate(replicate_seed(g.seed, domain, 0))?;
            let mut buf = Vec::new();
            save_matrix_csv(&matrix, &mut buf)?;
            output::write(
                &g.out,
                &format!("matrix_{}.csv", domain.key()),
                &String::from_utf8(buf).expect("CSV output is UTF-8"),
            )?;
        }
    }
    print!("{report}");
    Ok(failures.is_empty())
}

fn sweep_settings(args: &SweepArgs, g: &GlobalArgs, priors: &PriorConfig) -> Result<SweepSettings> {
    require_seeds(args.seeds)?;
    if !(0.0..1.0).contains(&args.s_max) {
        return Err(Error::InvalidParameter("--s-max must be in [0, 1)".into()));
    }
    if !(args.d_min > 0.0) {
        return Err(Error::InvalidParameter("--d-min must be positive".into()));
    }
    Ok(SweepSettings {
        sparsities: grid(0.0, args.s_max, args.s_step)?,
        gaps: grid(args.d_min, args.d_max, args.d_step)?,
        n_seeds: args.seeds,
        master_seed: g.seed,
        priors: *priors,
        ..SweepSettings::default()
    })
}

fn cmd_sweep(args: &SweepArgs, g: &GlobalArgs, priors: &PriorConfig) -> Result<bool> {
    let settings = sweep_settings(args, g, priors)?;
    let sweep = run_sweep(&settings)?;
    for m in Mechanism::BOTH {
        output::write(
            &g.out,
            &format!("sweep_{}.csv", m.key()),
            &output::sweep_csv(&sweep, m),
        )?;
    }
    let valid = sweep.is_valid();
    let analysis = match analyze_sweep(&sweep, args.regression_rows) {
        Ok(a) => {
            output::write(
                &g.out,
                "regression.json",
                &output::regression_json(&a, valid),
            )?;
            Some(a)
        }
        Err(e) => {
            eprintln!("error: regression analysis failed: {e}");
            None
        }
    };
    let report = output::sweep_report(&sweep, analysis.as_ref());
    output::write(&g.out, "sweep_report.txt", &report)?;
    print!("{report}");
    if !valid {
        eprintln!("error: invalid-cell budget exceeded");
    }
    Ok(valid && analysis.is_some())
}

fn cmd_sensitivity(args: &SensitivityArgs, g: &GlobalArgs, priors: &PriorConfig) -> Result<bool> {
    require_seeds(args.seeds)?;
    let base = SweepSettings {
        n_seeds: args.seeds,
        master_seed: g.seed,
        priors: *priors,
        ..SweepSettings::default()
    };
    let result = run_sensitivity(&base)?;
    output::write(&g.out, "sensitivity.csv", &output::sensitivity_csv(&result))?;
    let report = output::sensitivity_report(&result);
    output::write(&g.out, "sensitivity_report.txt", &report)?;
    print!("{report}");
    let valid = result.sweep.is_valid();
    if !valid {
        eprintln!("error: invalid-cell budget exceeded");
    }
    Ok(valid)
}

fn rank_str(r: f64) -> String {
    if r.fract() == 0.0 {
        format!("{r:.0}")
    } else {
        format!("{r:.1}")
    }
}

fn diagnostics_text(matrix: &ResponseMatrix) -> String {
    let d = matrix.diagnose();
    format!(
        "systems {}  items {}  observed cells {}\ncoverage {:.4}  sparsity {:.4}\nmin items per system {}  min systems per item {}  connected {}\n",
        matrix.n_systems(),
        matrix.n_items(),
        matrix.n_observed(),
        d.coverage,
        d.sparsity,
        d.min_items_per_system,
        d.min_systems_per_item,
        d.bipartite_connected
    )
}

fn load(path: &Path) -> Result<ResponseMatrix> {
    let file = File::open(path)?;
    load_matrix_csv(BufReader::new(file))
}

fn cmd_analyze(args: &AnalyzeArgs, g: &GlobalArgs, priors: &PriorConfig) -> Result<bool> {
    if !(0.0..=1.0).contains(&args.coverage_threshold) || !(args.cv_threshold >= 0.0) {
        return Err(Error::InvalidParameter(
            "--coverage-threshold must be in [0, 1] and --cv-threshold non-negative".into(),
        ));
    }
    let matrix = load(&args.matrix)?;
    let settings = FitSettings::default();
    let mut out = diagnostics_text(&matrix);

    let precondition = matrix
        .diagnose()
        .meets(settings.min_items_per_system, settings.min_systems_per_item);
    if let Err(e) = precondition {
        eprintln!("warning: IRT skipped: {e}");
        let _ = writeln!(out, "IRT skipped: {e}");
        match estimate_difficulty_heterogeneity(&matrix) {
            Ok(cv) => {
                let _ = writeln!(out, "item-rate CV {cv:.4}");
            }
            Err(e) => {
                let _ = writeln!(out, "item-rate CV unavailable: {e}");
            }
        }
        match decision_rule(&matrix, args.coverage_threshold, args.cv_threshold) {
            Ok(v) => {
                let _ = writeln!(out, "verdict: {}\n{}", v.verdict, v.rationale);
            }
            Err(_) => {
                let _ = writeln!(
                    out,
                    "verdict: use_irt\ninsufficient data for the heterogeneity estimate"
                );
            }
        }
        output::write(&g.out, "analysis.txt", &out)?;
        print!("{out}");
        return Ok(true);
    }

    let avg = simple_average(&matrix)?;
    let mut fitted = fit(&matrix, priors, &settings)?;
    if !fitted.converged {
        eprintln!(
            "warning: optimizer stopped after {} iterations (max |gradient| {:.2e})",
            fitted.iterations, fitted.gradient_norm
        );
    }
    match standard_errors(&matrix, &fitted, priors) {
        Ok(abilities) => fitted.abilities = abilities,
        Err(e) => eprintln!("warning: standard errors unavailable: {e}"),
    }
    let irt = Ranking::from_scores(fitted.abilities.theta.clone());
    let verdict = decision_rule(&matrix, args.coverage_threshold, args.cv_threshold)?;

    let width = matrix
        .system_labels()
        .iter()
        .map(String::len)
        .max()
        .unwrap_or(6)
        .max(6);
    let _ = writeln!(
        out,
        "\n{:<width$}  {:>8} {:>6}   {:>8} {:>7} {:>6}",
        "system", "average", "rank", "theta", "se", "rank"
    );
    for j in 0..matrix.n_systems() {
        let se = fitted
            .abilities
            .se
            .as_ref()
            .map_or("n/a".to_string(), |s| format!("{:.4}", s[j]));
        let _ = writeln!(
            out,
            "{:<width$}  {:>8.4} {:>6}   {:>+8.4} {:>7} {:>6}",
            matrix.system_labels()[j],
            avg.scores[j],
            rank_str(avg.ranks[j]),
            fitted.abilities.theta[j],
            se,
            rank_str(irt.ranks[j])
        );
    }
    let agreement = spearman_rho(&avg.ranks, &irt.ranks).ok();
    let _ = writeln!(
        out,
        "rankings {}{}",
        if avg.ranks == irt.ranks {
            "identical"
        } else {
            "differ"
        },
        agreement.map_or(String::new(), |r| format!(" (Spearman {r:.4})"))
    );

    let iwidth = matrix
        .item_labels()
        .iter()
        .map(String::len)
        .max()
        .unwrap_or(4)
        .max(4);
    let _ = writeln!(out, "\n{:<iwidth$}  {:>8} {:>7}", "item", "b", "a");
    for i in 0..matrix.n_items() {
        let _ = writeln!(
            out,
            "{:<iwidth$}  {:>+8.4} {:>7.4}",
            matrix.item_labels()[i],
            fitted.items.b(i),
            fitted.items.a(i)
        );
    }
    let _ = writeln!(
        out,
        "\nitem-rate CV {:.4}\nverdict: {}\n{}",
        verdict.heterogeneity, verdict.verdict, verdict.rationale
    );

    let json = serde_json::json!({
        "fit": fitted.report(&matrix),
        "average": matrix.system_labels().iter().enumerate().map(|(j, l)| serde_json::json!({
            "label": l, "score": avg.scores[j], "rank": avg.ranks[j], "irt_rank": irt.ranks[j],
        })).collect::<Vec<_>>(),
        "decision": verdict,
    });
    output::write(&g.out, "analysis.txt", &out)?;
    output::write(
        &g.out,
        "analysis.json",
        &(serde_json::to_string_pretty(&json)? + "\n"),
    )?;
    print!("{out}");
    Ok(true)
}
