//! Joint MAP estimation of abilities and item parameters.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::lbfgs::{self, LbfgsSettings};
use super::model::{ItemParameterSet, Objective, PriorConfig};
use crate::error::{Error, Result};
use crate::matrix::ResponseMatrix;
use crate::ranking::average_ranks_desc;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitSettings {
    pub max_iterations: usize,
    /// Largest absolute gradient component accepted as converged.
    pub gradient_tolerance: f64,
    pub memory: usize,
    pub min_items_per_system: usize,
    pub min_systems_per_item: usize,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            gradient_tolerance: 1e-6,
            memory: 10,
            min_items_per_system: 2,
            min_systems_per_item: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbilityVector {
    pub theta: Vec<f64>,
    pub se: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fit2PL {
    pub abilities: AbilityVector,
    pub items: ItemParameterSet,
    /// Regularized log-likelihood at the solution.
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
}

/// Logit-moment warm start: standardized system logits, negated item logits, `log a = 0`.
fn initial_point(matrix: &ResponseMatrix) -> Vec<f64> {
    let logit = |s: u64, t: u64| {
        let p = if t == 0 { 0.5 } else { s as f64 / t as f64 };
        let p = p.clamp(0.02, 0.98);
        (p / (1.0 - p)).ln()
    };
    let mut sys = vec![(0u64, 0u64); matrix.n_systems()];
    let mut item = vec![(0u64, 0u64); matrix.n_items()];
    for (j, i, c) in matrix.observed() {
        sys[j].0 += c.successes as u64;
        sys[j].1 += c.trials as u64;
        item[i].0 += c.successes as u64;
        item[i].1 += c.trials as u64;
    }
    let raw: Vec<f64> = sys.iter().map(|&(s, t)| logit(s, t)).collect();
    let n = raw.len() as f64;
    let mean = raw.iter().sum::<f64>() / n;
    let sd = (raw.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let theta = raw
        .iter()
        .map(|v| if sd > 1e-12 { (v - mean) / sd } else { 0.0 });

    let mut x: Vec<f64> = theta.collect();
    x.extend(item.iter().map(|&(s, t)| -logit(s, t)));
    x.extend(std::iter::repeat_n(0.0, matrix.n_items()));
    x
}

/// Maximizes the regularized log-likelihood with L-BFGS over `(theta, b, log a)`.
pub fn fit(
    matrix: &ResponseMatrix,
    priors: &PriorConfig,
    settings: &FitSettings,
) -> Result<Fit2PL> {
    matrix
        .diagnose()
        .meets(settings.min_items_per_system, settings.min_systems_per_item)?;
    let objective = Objective::new(matrix, priors)?;
    let x0 = initial_point(matrix);

    let lbfgs_settings = LbfgsSettings {
        memory: settings.memory,
        max_iterations: settings.max_iterations,
        gradient_tolerance: settings.gradient_tolerance,
        ..LbfgsSettings::default()
    };
    let minimum = lbfgs::minimize(
        |x, g| {
            let v = objective.value_and_gradient(x, g);
            g.iter_mut().for_each(|gi| *gi = -*gi);
            -v
        },
        &x0,
        &lbfgs_settings,
    )?;

    let (theta, items) = objective.unpack(&minimum.x);
    Ok(Fit2PL {
        abilities: AbilityVector { theta, se: None },
        items,
        objective: -minimum.value,
        converged: minimum.converged,
        iterations: minimum.iterations,
        gradient_norm: minimum.gradient_norm(),
    })
}

/// Hessian of the negated objective by central differences of the analytic gradient.
pub fn numerical_hessian(objective: &Objective, x: &[f64]) -> DMatrix<f64> {
    let n = x.len();
    let mut h = DMatrix::zeros(n, n);
    let mut xp = x.to_vec();
    let mut gp = vec![0.0; n];
    let mut gm = vec![0.0; n];
    for k in 0..n {
        let step = 1e-5 * x[k].abs().max(1.0);
        xp[k] = x[k] + step;
        objective.value_and_gradient(&xp, &mut gp);
        xp[k] = x[k] - step;
        objective.value_and_gradient(&xp, &mut gm);
        xp[k] = x[k];
        for r in 0..n {
            // Negated objective: flip the sign of the ascent gradient.
            h[(r, k)] = -(gp[r] - gm[r]) / (2.0 * step);
        }
    }
    (&h + h.transpose()) * 0.5
}

/// Ability standard errors from the inverse observed information at the fit.
pub fn standard_errors(
    matrix: &ResponseMatrix,
    fit: &Fit2PL,
    priors: &PriorConfig,
) -> Result<AbilityVector> {
    if !fit.converged {
        return Err(Error::Precondition(
            "standard errors need a converged fit".into(),
        ));
    }
    let objective = Objective::new(matrix, priors)?;
    let x = objective.pack(&fit.abilities.theta, &fit.items)?;
    let hessian = numerical_hessian(&objective, &x);
    let chol = hessian.cholesky().ok_or(Error::SingularHessian)?;
    let cov = chol.inverse();
    let se = (0..matrix.n_systems())
        .map(|j| {
            let v = cov[(j, j)];
            if v.is_finite() && v > 0.0 {
                Ok(v.sqrt())
            } else {
                Err(Error::SingularHessian)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AbilityVector {
        theta: fit.abilities.theta.clone(),
        se: Some(se),
    })
}

/// Ranks by descending ability, average ranks for exact ties.
pub fn rank_by_ability(fit: &Fit2PL) -> Vec<f64> {
    average_ranks_desc(&fit.abilities.theta)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemEstimate {
    pub label: String,
    pub theta: f64,
    pub se: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ItemEstimate {
    pub label: String,
    pub a: f64,
    pub b: f64,
}

/// JSON shape of a fit result.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub systems: Vec<SystemEstimate>,
    pub items: Vec<ItemEstimate>,
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
}

impl Fit2PL {
    pub fn report(&self, matrix: &ResponseMatrix) -> FitReport {
        let se = self.abilities.se.as_ref();
        FitReport {
            systems: matrix
                .system_labels()
                .iter()
                .enumerate()
                .map(|(j, label)| SystemEstimate {
                    label: label.clone(),
                    theta: self.abilities.theta[j],
                    se: se.map(|s| s[j]),
                })
                .collect(),
            items: matrix
                .item_labels()
                .iter()
                .enumerate()
                .map(|(i, label)| ItemEstimate {
                    label: label.clone(),
                    a: self.items.a(i),
                    b: self.items.b(i),
                })
                .collect(),
            objective: self.objective,
            converged: self.converged,
            iterations: self.iterations,
            gradient_norm: self.gradient_norm,
        }
    }
}
