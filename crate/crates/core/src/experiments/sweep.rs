//! Sparsity x difficulty-gap grid sweep and its regression analysis.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::irt::{fit, FitSettings, PriorConfig};
use crate::ranking::{
    ols_interaction, power_law_fit, simple_average, spearman_rho, InteractionFit, PowerLawFit,
    Ranking, SurfacePoint,
};
use crate::simgen::{
    derive_seed, generate_responses, make_biased_mask, make_mcar_mask, sweep_truth, MaskConstraints,
};

use super::Summary;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mechanism {
    Biased,
    Mcar,
}

impl Mechanism {
    pub const BOTH: [Mechanism; 2] = [Mechanism::Biased, Mechanism::Mcar];

    pub fn key(self) -> &'static str {
        match self {
            Mechanism::Biased => "biased",
            Mechanism::Mcar => "mcar",
        }
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Mechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "biased" => Ok(Mechanism::Biased),
            "mcar" => Ok(Mechanism::Mcar),
            other => Err(Error::InvalidParameter(format!(
                "unknown mechanism `{other}`"
            ))),
        }
    }
}

/// Which rows enter the failure-surface regressions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RegressionRows {
    /// One row per grid cell (mean error over seeds).
    #[default]
    Cells,
    /// One row per seed.
    Seeds,
}

impl FromStr for RegressionRows {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cells" => Ok(RegressionRows::Cells),
            "seeds" => Ok(RegressionRows::Seeds),
            other => Err(Error::InvalidParameter(format!(
                "regression rows must be `cells` or `seeds`, got `{other}`"
            ))),
        }
    }
}

/// `start, start + step, ...` up to `stop` inclusive, rounded to 1e-9.
pub fn grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || stop < start {
        return Err(Error::InvalidParameter(format!(
            "bad grid {start}..{stop} step {step}"
        )));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n)
        .map(|k| ((start + k as f64 * step) * 1e9).round() / 1e9)
        .collect())
}

#[derive(Debug, Clone)]
pub struct SweepSettings {
    pub sparsities: Vec<f64>,
    pub gaps: Vec<f64>,
    pub mechanisms: Vec<Mechanism>,
    pub n_seeds: usize,
    pub n_systems: usize,
    pub n_items: usize,
    pub trials: u32,
    pub master_seed: u64,
    pub priors: PriorConfig,
    pub fit: FitSettings,
    pub constraints: MaskConstraints,
}

impl Default for SweepSettings {
    /// The 15 x 10 grid: S in 0..=0.70 by 0.05, D in 0.5..=5.0 by 0.5.
    fn default() -> Self {
        Self {
            sparsities: grid(0.0, 0.70, 0.05).expect("static grid"),
            gaps: grid(0.5, 5.0, 0.5).expect("static grid"),
            mechanisms: Mechanism::BOTH.to_vec(),
            n_seeds: 15,
            n_systems: 10,
            n_items: 10,
            trials: 100,
            master_seed: 42,
            priors: PriorConfig::default(),
            fit: FitSettings::default(),
            constraints: MaskConstraints::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SeedScore {
    pub replicate: usize,
    pub rho_avg: f64,
    pub rho_irt: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CellResult {
    pub mechanism: Mechanism,
    pub s_index: usize,
    pub d_index: usize,
    pub sparsity: f64,
    pub gap: f64,
    pub scores: Vec<SeedScore>,
    pub failures: Vec<(usize, String)>,
}

impl CellResult {
    pub fn rho_avg(&self) -> Summary {
        Summary::of(self.scores.iter().map(|s| s.rho_avg))
    }

    pub fn rho_irt(&self) -> Summary {
        Summary::of(self.scores.iter().map(|s| s.rho_irt))
    }

    pub fn n_seeds(&self) -> usize {
        self.scores.len()
    }

    pub fn failure_rate(&self) -> f64 {
        let total = self.scores.len() + self.failures.len();
        if total == 0 {
            0.0
        } else {
            self.failures.len() as f64 / total as f64
        }
    }

    pub fn error_mean(&self) -> f64 {
        1.0 - self.rho_avg().mean
    }

    pub fn delta_rho(&self) -> f64 {
        self.rho_irt().mean - self.rho_avg().mean
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub sparsities: Vec<f64>,
    pub gaps: Vec<f64>,
    /// Sorted by (mechanism, S index, D index).
    pub cells: Vec<CellResult>,
}

/// Cells with more than this share of failed seeds invalidate the sweep.
pub const MAX_CELL_FAILURE_RATE: f64 = 0.20;

impl SweepResult {
    pub fn cells_for(&self, mechanism: Mechanism) -> impl Iterator<Item = &CellResult> {
        self.cells.iter().filter(move |c| c.mechanism == mechanism)
    }

    pub fn cell(
        &self,
        mechanism: Mechanism,
        s_index: usize,
        d_index: usize,
    ) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.mechanism == mechanism && c.s_index == s_index && c.d_index == d_index)
    }

    /// Cell closest to the requested coordinates.
    pub fn cell_at(&self, mechanism: Mechanism, sparsity: f64, gap: f64) -> Option<&CellResult> {
        self.cells_for(mechanism)
            .find(|c| (c.sparsity - sparsity).abs() < 1e-6 && (c.gap - gap).abs() < 1e-6)
    }

    pub fn invalid_cells(&self) -> Vec<&CellResult> {
        self.cells
            .iter()
            .filter(|c| c.failure_rate() > MAX_CELL_FAILURE_RATE || c.scores.is_empty())
            .collect()
    }

    pub fn is_valid(&self) -> bool {
        self.invalid_cells().is_empty()
    }

    /// Ranking error `1 - rho_avg` observations for one mechanism.
    pub fn surface(&self, mechanism: Mechanism, rows: RegressionRows) -> Vec<SurfacePoint> {
        self.cells_for(mechanism)
            .filter(|c| !c.scores.is_empty())
            .flat_map(|c| match rows {
                RegressionRows::Cells => vec![SurfacePoint::new(c.sparsity, c.gap, c.error_mean())],
                RegressionRows::Seeds => c
                    .scores
                    .iter()
                    .map(|s| SurfacePoint::new(c.sparsity, c.gap, 1.0 - s.rho_avg))
                    .collect(),
            })
            .collect()
    }
}

/// Seed for the response draw; shared by both mechanisms so S = 0 cells coincide.
fn response_seed(master: u64, s_index: usize, d_index: usize, replicate: usize) -> u64 {
    derive_seed(
        master,
        &[0, s_index as u64, d_index as u64, replicate as u64],
    )
}

fn mask_seed(
    master: u64,
    mechanism: Mechanism,
    s_index: usize,
    d_index: usize,
    replicate: usize,
) -> u64 {
    derive_seed(
        master,
        &[
            1 + mechanism as u64,
            s_index as u64,
            d_index as u64,
            replicate as u64,
        ],
    )
}

pub fn run_sweep_seed(
    settings: &SweepSettings,
    mechanism: Mechanism,
    s_index: usize,
    d_index: usize,
    replicate: usize,
) -> Result<SeedScore> {
    let sparsity = settings.sparsities[s_index];
    let gap = settings.gaps[d_index];
    let (theta, items) = sweep_truth(gap, settings.n_systems, settings.n_items)?;
    let mseed = mask_seed(settings.master_seed, mechanism, s_index, d_index, replicate);
    let mask = match mechanism {
        Mechanism::Mcar => make_mcar_mask(
            settings.n_systems,
            settings.n_items,
            sparsity,
            &settings.constraints,
            mseed,
        )?,
        Mechanism::Biased => make_biased_mask(
            &theta,
            items.difficulty(),
            sparsity,
            &settings.constraints,
            mseed,
        )?,
    };
    let rseed = response_seed(settings.master_seed, s_index, d_index, replicate);
    let matrix = generate_responses(&theta, &items, &mask, settings.trials, rseed)?;
    let truth = Ranking::from_scores(theta);
    let avg = simple_average(&matrix)?;
    let fitted = fit(&matrix, &settings.priors, &settings.fit)?;
    let irt = Ranking::from_scores(fitted.abilities.theta);
    Ok(SeedScore {
        replicate,
        rho_avg: spearman_rho(&avg.ranks, &truth.ranks)?,
        rho_irt: spearman_rho(&irt.ranks, &truth.ranks)?,
    })
}

/// Runs every (mechanism, S, D, replicate) unit. Failures are kept per cell.
pub fn run_sweep(settings: &SweepSettings) -> Result<SweepResult> {
    if settings.sparsities.is_empty() || settings.gaps.is_empty() || settings.mechanisms.is_empty()
    {
        return Err(Error::InvalidParameter(
            "sweep grids must be nonempty".into(),
        ));
    }
    if settings.n_seeds == 0 {
        return Err(Error::InvalidParameter(
            "at least one seed per cell is required".into(),
        ));
    }
    let mut mechanisms = settings.mechanisms.clone();
    mechanisms.sort();
    mechanisms.dedup();

    let mut units = Vec::new();
    for &m in &mechanisms {
        for s in 0..settings.sparsities.len() {
            for d in 0..settings.gaps.len() {
                for r in 0..settings.n_seeds {
                    units.push((m, s, d, r));
                }
            }
        }
    }
    let outcomes: Vec<_> = units
        .par_iter()
        .map(|&(m, s, d, r)| run_sweep_seed(settings, m, s, d, r))
        .collect();

    let mut cells: Vec<CellResult> = Vec::new();
    for (&(m, s, d, r), outcome) in units.iter().zip(outcomes) {
        if r == 0 {
            cells.push(CellResult {
                mechanism: m,
                s_index: s,
                d_index: d,
                sparsity: settings.sparsities[s],
                gap: settings.gaps[d],
                scores: Vec::new(),
                failures: Vec::new(),
            });
        }
        let cell = cells.last_mut().expect("cell opened at replicate 0");
        match outcome {
            Ok(score) => cell.scores.push(score),
            Err(e) => cell.failures.push((r, e.to_string())),
        }
    }
    Ok(SweepResult {
        sparsities: settings.sparsities.clone(),
        gaps: settings.gaps.clone(),
        cells,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepAnalysis {
    pub rows: RegressionRows,
    pub biased: InteractionFit,
    pub mcar: InteractionFit,
    /// `Err` holds the reason when too few cells have a positive error.
    pub power_law: std::result::Result<PowerLawFit, String>,
    /// Mean ranking error over cells with S >= 0.40.
    pub biased_error_high_sparsity: f64,
    pub mcar_error_high_sparsity: f64,
    pub mechanism_gap: f64,
}

pub const HIGH_SPARSITY: f64 = 0.40;

fn mean_error_above(sweep: &SweepResult, mechanism: Mechanism, threshold: f64) -> f64 {
    let errors: Vec<f64> = sweep
        .cells_for(mechanism)
        .filter(|c| c.sparsity >= threshold - 1e-9 && !c.scores.is_empty())
        .map(CellResult::error_mean)
        .collect();
    if errors.is_empty() {
        f64::NAN
    } else {
        errors.iter().sum::<f64>() / errors.len() as f64
    }
}

/// Interaction regressions for both mechanisms, the biased power law, and the
/// high-sparsity mechanism gap.
pub fn analyze_sweep(sweep: &SweepResult, rows: RegressionRows) -> Result<SweepAnalysis> {
    let biased_surface = sweep.surface(Mechanism::Biased, rows);
    let biased = ols_interaction(&biased_surface)?;
    let mcar = ols_interaction(&sweep.surface(Mechanism::Mcar, rows))?;
    let power_law = power_law_fit(&biased_surface).map_err(|e| e.to_string());
    let b = mean_error_above(sweep, Mechanism::Biased, HIGH_SPARSITY);
    let m = mean_error_above(sweep, Mechanism::Mcar, HIGH_SPARSITY);
    Ok(SweepAnalysis {
        rows,
        biased,
        mcar,
        power_law,
        biased_error_high_sparsity: b,
        mcar_error_high_sparsity: m,
        mechanism_gap: b - m,
    })
}
