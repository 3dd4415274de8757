//! Multi-seed reproduction of the four domain experiments.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::irt::{fit, FitSettings, PriorConfig};
use crate::matrix::difficulty_gap;
use crate::ranking::{rank_displacement, simple_average, spearman_rho, spearman_scores, Ranking};
use crate::simgen::{derive_seed, domain_config, Domain, DomainConfig, SpecialRole};

use super::Summary;

/// One replicate: both rankings scored against the truth.
#[derive(Debug, Clone, Serialize)]
pub struct SeedOutcome {
    pub seed_index: usize,
    pub seed: u64,
    pub rho_avg: f64,
    pub rho_irt: f64,
    /// Spearman between estimated and true item difficulties.
    pub rho_difficulty: f64,
    pub avg_ranks: Vec<f64>,
    pub irt_ranks: Vec<f64>,
    pub theta_hat: Vec<f64>,
    pub difficulty_hat: Vec<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpecialDisplacement {
    pub label: String,
    pub role: SpecialRole,
    pub true_rank: f64,
    /// Mean over seeds of estimated minus true rank.
    pub avg_displacement: f64,
    pub irt_displacement: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DomainResult {
    pub domain: Domain,
    pub coverage: f64,
    pub difficulty_gap: f64,
    pub rho_avg: Summary,
    pub rho_irt: Summary,
    pub special: Vec<SpecialDisplacement>,
    pub true_ranks: Vec<f64>,
    pub system_labels: Vec<String>,
    pub outcomes: Vec<SeedOutcome>,
}

impl DomainResult {
    pub fn sparsity(&self) -> f64 {
        1.0 - self.coverage
    }

    pub fn sd_product(&self) -> f64 {
        self.sparsity() * self.difficulty_gap
    }

    pub fn delta_rho(&self) -> f64 {
        self.rho_irt.mean - self.rho_avg.mean
    }

    pub fn verdict(&self) -> &'static str {
        verdict_label(self.delta_rho())
    }

    /// Item-difficulty recovery on the first replicate.
    pub fn default_seed_difficulty_recovery(&self) -> f64 {
        self.outcomes[0].rho_difficulty
    }

    pub fn count_seeds(&self, pred: impl Fn(&SeedOutcome) -> bool) -> usize {
        self.outcomes.iter().filter(|o| pred(o)).count()
    }
}

/// Qualitative label for an IRT-minus-average gap in mean rho.
pub fn verdict_label(delta_rho: f64) -> &'static str {
    if delta_rho <= 0.01 {
        "Both correct"
    } else if delta_rho <= 0.08 {
        "Avg. degrades"
    } else if delta_rho <= 0.15 {
        "Avg. unreliable"
    } else {
        "Avg. misleading"
    }
}

pub fn run_seed(
    config: &DomainConfig,
    seed_index: usize,
    seed: u64,
    priors: &PriorConfig,
    settings: &FitSettings,
) -> Result<SeedOutcome> {
    let matrix = config.generate(seed)?;
    let truth = Ranking::from_scores(config.theta_true.clone());
    let avg = simple_average(&matrix)?;
    let fitted = fit(&matrix, priors, settings)?;
    let irt = Ranking::from_scores(fitted.abilities.theta.clone());
    Ok(SeedOutcome {
        seed_index,
        seed,
        rho_avg: spearman_rho(&avg.ranks, &truth.ranks)?,
        rho_irt: spearman_rho(&irt.ranks, &truth.ranks)?,
        rho_difficulty: spearman_scores(fitted.items.difficulty(), config.items.difficulty())?,
        avg_ranks: avg.ranks,
        irt_ranks: irt.ranks,
        theta_hat: fitted.abilities.theta,
        difficulty_hat: fitted.items.difficulty().to_vec(),
        converged: fitted.converged,
    })
}

/// Replicate seeds depend only on the master seed, domain, and replicate index.
pub fn replicate_seed(master_seed: u64, domain: Domain, replicate: usize) -> u64 {
    derive_seed(master_seed, &[domain as u64, replicate as u64])
}

pub fn run_domain(
    domain: Domain,
    n_seeds: usize,
    master_seed: u64,
    priors: &PriorConfig,
    settings: &FitSettings,
) -> Result<DomainResult> {
    run_domain_config(
        &domain_config(domain),
        n_seeds,
        master_seed,
        priors,
        settings,
    )
}

/// Like [`run_domain`] with an explicit configuration.
pub fn run_domain_config(
    config: &DomainConfig,
    n_seeds: usize,
    master_seed: u64,
    priors: &PriorConfig,
    settings: &FitSettings,
) -> Result<DomainResult> {
    if n_seeds == 0 {
        return Err(Error::InvalidParameter(
            "at least one seed is required".into(),
        ));
    }
    let domain = config.domain;
    let outcomes = (0..n_seeds)
        .into_par_iter()
        .map(|r| {
            let seed = replicate_seed(master_seed, domain, r);
            run_seed(config, r, seed, priors, settings).map_err(|e| Error::Seed {
                seed_index: r,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let truth = Ranking::from_scores(config.theta_true.clone());
    let special = config
        .special
        .iter()
        .map(|s| {
            let mean_disp = |ranks: fn(&SeedOutcome) -> &Vec<f64>| -> Result<f64> {
                let mut total = 0.0;
                for o in &outcomes {
                    let est = Ranking {
                        ranks: ranks(o).clone(),
                        scores: Vec::new(),
                    };
                    total += rank_displacement(&est, &truth, s.index)?;
                }
                Ok(total / outcomes.len() as f64)
            };
            Ok(SpecialDisplacement {
                label: config.system_labels[s.index].clone(),
                role: s.role,
                true_rank: truth.ranks[s.index],
                avg_displacement: mean_disp(|o| &o.avg_ranks)?,
                irt_displacement: mean_disp(|o| &o.irt_ranks)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(DomainResult {
        domain,
        coverage: config.mask.coverage(),
        difficulty_gap: difficulty_gap(config.items.difficulty())?,
        rho_avg: Summary::of(outcomes.iter().map(|o| o.rho_avg)),
        rho_irt: Summary::of(outcomes.iter().map(|o| o.rho_irt)),
        special,
        true_ranks: truth.ranks,
        system_labels: config.system_labels.clone(),
        outcomes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_thresholds() {
        assert_eq!(verdict_label(0.0), "Both correct");
        assert_eq!(verdict_label(0.074), "Avg. degrades");
        assert_eq!(verdict_label(0.084), "Avg. unreliable");
        assert_eq!(verdict_label(0.191), "Avg. misleading");
    }

    #[test]
    fn zero_seeds_rejected() {
        assert!(run_domain(
            Domain::Nlp,
            0,
            1,
            &PriorConfig::default(),
            &FitSettings::default()
        )
        .is_err());
    }
}
