//! The 2PL response model and its regularized log-likelihood.
//!
//! Parameters are packed into one vector laid out as `[theta (J), b (I), log a (I)]`.
//! Discriminations live on the log scale so `a > 0` holds everywhere.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::ResponseMatrix;

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(sigmoid(x))` without overflow or cancellation.
#[inline]
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Success probability `sigmoid(a (theta - b))`.
pub fn predict_prob(theta: f64, a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "discrimination must be positive, got {a}"
        )));
    }
    Ok(sigmoid(a * (theta - b)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemParameterSet {
    difficulty: Vec<f64>,
    log_discrimination: Vec<f64>,
}

impl ItemParameterSet {
    pub fn new(discrimination: &[f64], difficulty: &[f64]) -> Result<Self> {
        if discrimination.len() != difficulty.len() {
            return Err(Error::Dimension(format!(
                "{} discriminations for {} difficulties",
                discrimination.len(),
                difficulty.len()
            )));
        }
        if let Some(a) = discrimination.iter().find(|a| !(**a > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "discrimination must be positive, got {a}"
            )));
        }
        Ok(Self {
            difficulty: difficulty.to_vec(),
            log_discrimination: discrimination.iter().map(|a| a.ln()).collect(),
        })
    }

    pub fn from_log(log_discrimination: Vec<f64>, difficulty: Vec<f64>) -> Result<Self> {
        if log_discrimination.len() != difficulty.len() {
            return Err(Error::Dimension("item parameter lengths differ".into()));
        }
        Ok(Self {
            difficulty,
            log_discrimination,
        })
    }

    pub fn len(&self) -> usize {
        self.difficulty.len()
    }

    pub fn is_empty(&self) -> bool {
        self.difficulty.is_empty()
    }

    pub fn difficulty(&self) -> &[f64] {
        &self.difficulty
    }

    pub fn log_discrimination(&self) -> &[f64] {
        &self.log_discrimination
    }

    pub fn discrimination(&self) -> Vec<f64> {
        self.log_discrimination.iter().map(|l| l.exp()).collect()
    }

    pub fn a(&self, item: usize) -> f64 {
        self.log_discrimination[item].exp()
    }

    pub fn b(&self, item: usize) -> f64 {
        self.difficulty[item]
    }
}

/// Gaussian prior standard deviations. An infinite value disables that prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    pub theta_sd: f64,
    pub difficulty_sd: f64,
    pub log_discrimination_sd: f64,
}

impl Default for PriorConfig {
    /// theta ~ N(0, 1), b ~ N(0, 2) read as variance 2, log a ~ N(0, 0.5).
    fn default() -> Self {
        Self {
            theta_sd: 1.0,
            difficulty_sd: std::f64::consts::SQRT_2,
            log_discrimination_sd: 0.5,
        }
    }
}

impl PriorConfig {
    /// No regularization; the data term alone.
    pub fn flat() -> Self {
        Self {
            theta_sd: f64::INFINITY,
            difficulty_sd: f64::INFINITY,
            log_discrimination_sd: f64::INFINITY,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, sd) in [
            ("theta", self.theta_sd),
            ("difficulty", self.difficulty_sd),
            ("log-discrimination", self.log_discrimination_sd),
        ] {
            if !(sd > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} prior sd must be > 0, got {sd}"
                )));
            }
        }
        Ok(())
    }

    fn precisions(&self) -> [f64; 3] {
        [
            1.0 / (self.theta_sd * self.theta_sd),
            1.0 / (self.difficulty_sd * self.difficulty_sd),
            1.0 / (self.log_discrimination_sd * self.log_discrimination_sd),
        ]
    }
}

#[derive(Debug, Clone, Copy)]
struct ObservedCell {
    system: usize,
    item: usize,
    successes: f64,
    trials: f64,
}

/// Regularized log-likelihood over a packed parameter vector.
///
/// Summation runs in fixed (system, item) order so values are reproducible
/// bit-for-bit across runs.
#[derive(Debug, Clone)]
pub struct Objective {
    n_systems: usize,
    n_items: usize,
    cells: Vec<ObservedCell>,
    precision: [f64; 3],
}

impl Objective {
    pub fn new(matrix: &ResponseMatrix, priors: &PriorConfig) -> Result<Self> {
        priors.validate()?;
        let cells = matrix
            .observed()
            .map(|(system, item, c)| ObservedCell {
                system,
                item,
                successes: c.successes as f64,
                trials: c.trials as f64,
            })
            .collect();
        Ok(Self {
            n_systems: matrix.n_systems(),
            n_items: matrix.n_items(),
            cells,
            precision: priors.precisions(),
        })
    }

    pub fn n_systems(&self) -> usize {
        self.n_systems
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn dim(&self) -> usize {
        self.n_systems + 2 * self.n_items
    }

    pub fn pack(&self, theta: &[f64], items: &ItemParameterSet) -> Result<Vec<f64>> {
        if theta.len() != self.n_systems || items.len() != self.n_items {
            return Err(Error::Dimension(format!(
                "parameters for {}x{} do not match a {}x{} matrix",
                theta.len(),
                items.len(),
                self.n_systems,
                self.n_items
            )));
        }
        let mut x = Vec::with_capacity(self.dim());
        x.extend_from_slice(theta);
        x.extend_from_slice(items.difficulty());
        x.extend_from_slice(items.log_discrimination());
        Ok(x)
    }

    pub fn unpack(&self, x: &[f64]) -> (Vec<f64>, ItemParameterSet) {
        let j = self.n_systems;
        let i = self.n_items;
        let items = ItemParameterSet {
            difficulty: x[j..j + i].to_vec(),
            log_discrimination: x[j + i..j + 2 * i].to_vec(),
        };
        (x[..j].to_vec(), items)
    }

    /// Data term only: `sum s log P + (t - s) log(1 - P)` over observed cells.
    pub fn data_term(&self, x: &[f64]) -> f64 {
        let (theta, b, log_a) = self.split(x);
        self.cells
            .iter()
            .map(|c| {
                let z = log_a[c.item].exp() * (theta[c.system] - b[c.item]);
                c.successes * log_sigmoid(z) + (c.trials - c.successes) * log_sigmoid(-z)
            })
            .sum()
    }

    /// Log-prior with constants dropped.
    pub fn prior_term(&self, x: &[f64]) -> f64 {
        let (theta, b, log_a) = self.split(x);
        let sq = |v: &[f64]| v.iter().map(|t| t * t).sum::<f64>();
        -0.5 * (self.precision[0] * sq(theta)
            + self.precision[1] * sq(b)
            + self.precision[2] * sq(log_a))
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.data_term(x) + self.prior_term(x)
    }

    /// Regularized log-likelihood and its gradient (ascent direction) written into `grad`.
    pub fn value_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let j = self.n_systems;
        let i = self.n_items;
        let (theta, b, log_a) = self.split(x);
        let [p_theta, p_b, p_log_a] = self.precision;

        for (k, g) in grad.iter_mut().enumerate() {
            *g = if k < j {
                -p_theta * x[k]
            } else if k < j + i {
                -p_b * x[k]
            } else {
                -p_log_a * x[k]
            };
        }

        let mut data = 0.0;
        for c in &self.cells {
            let a = log_a[c.item].exp();
            let diff = theta[c.system] - b[c.item];
            let z = a * diff;
            data += c.successes * log_sigmoid(z) + (c.trials - c.successes) * log_sigmoid(-z);
            let residual = c.successes - c.trials * sigmoid(z);
            grad[c.system] += a * residual;
            grad[j + c.item] -= a * residual;
            grad[j + i + c.item] += z * residual;
        }
        data + self.prior_term(x)
    }

    fn split<'a>(&self, x: &'a [f64]) -> (&'a [f64], &'a [f64], &'a [f64]) {
        let j = self.n_systems;
        let i = self.n_items;
        (&x[..j], &x[j..j + i], &x[j + i..j + 2 * i])
    }
}

/// Regularized log-likelihood of `matrix` at the given parameters.
pub fn log_likelihood(
    matrix: &ResponseMatrix,
    theta: &[f64],
    items: &ItemParameterSet,
    priors: &PriorConfig,
) -> Result<f64> {
    let objective = Objective::new(matrix, priors)?;
    let x = objective.pack(theta, items)?;
    Ok(objective.value(&x))
}

/// Gradient of [`log_likelihood`] over `[theta, b, log a]`.
pub fn gradient(
    matrix: &ResponseMatrix,
    theta: &[f64],
    items: &ItemParameterSet,
    priors: &PriorConfig,
) -> Result<Vec<f64>> {
    let objective = Objective::new(matrix, priors)?;
    let x = objective.pack(theta, items)?;
    let mut grad = vec![0.0; x.len()];
    objective.value_and_gradient(&x, &mut grad);
    Ok(grad)
}
