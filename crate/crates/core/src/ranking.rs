//! Simple-average baseline, rank statistics, and the failure-surface regressions.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::ResponseMatrix;

/// Ranks with 1 = highest score. Exactly equal scores share their average rank.
pub fn average_ranks_desc(scores: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut ranks = vec![0.0; scores.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // Positions start..end hold ranks start+1..=end.
        let rank = (start + end + 1) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = rank;
        }
        start = end;
    }
    ranks
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ranking {
    pub ranks: Vec<f64>,
    pub scores: Vec<f64>,
}

impl Ranking {
    pub fn from_scores(scores: Vec<f64>) -> Self {
        Self {
            ranks: average_ranks_desc(&scores),
            scores,
        }
    }

    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }
}

/// Unweighted mean of per-item success rates over each system's observed items.
/// Rates are summed in sorted order so the score does not depend on item order.
pub fn simple_average(matrix: &ResponseMatrix) -> Result<Ranking> {
    let mut rates = vec![Vec::new(); matrix.n_systems()];
    for (j, _, cell) in matrix.observed() {
        rates[j].push(cell.rate());
    }
    let scores = rates
        .iter_mut()
        .enumerate()
        .map(|(j, r)| {
            if r.is_empty() {
                return Err(Error::Degenerate(format!(
                    "system `{}` has no observed items",
                    matrix.system_labels()[j]
                )));
            }
            r.sort_by(f64::total_cmp);
            Ok(r.iter().sum::<f64>() / r.len() as f64)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Ranking::from_scores(scores))
}

/// Pearson correlation of two rank vectors.
pub fn spearman_rho(ranks_a: &[f64], ranks_b: &[f64]) -> Result<f64> {
    if ranks_a.len() != ranks_b.len() {
        return Err(Error::Dimension(format!(
            "rank vectors of length {} and {}",
            ranks_a.len(),
            ranks_b.len()
        )));
    }
    if ranks_a.len() < 2 {
        return Err(Error::Degenerate(
            "correlation needs at least 2 entries".into(),
        ));
    }
    let n = ranks_a.len() as f64;
    let ma = ranks_a.iter().sum::<f64>() / n;
    let mb = ranks_b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (a, b) in ranks_a.iter().zip(ranks_b) {
        sab += (a - ma) * (b - mb);
        saa += (a - ma) * (a - ma);
        sbb += (b - mb) * (b - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::Degenerate(
            "all ranks tied; correlation undefined".into(),
        ));
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman correlation of two score vectors (ranked first).
pub fn spearman_scores(a: &[f64], b: &[f64]) -> Result<f64> {
    spearman_rho(&average_ranks_desc(a), &average_ranks_desc(b))
}

/// `rank_est - rank_true` for one system: positive means demoted.
pub fn rank_displacement(estimated: &Ranking, truth: &Ranking, system: usize) -> Result<f64> {
    if system >= estimated.len() || system >= truth.len() {
        return Err(Error::InvalidParameter(format!(
            "unknown system index {system}"
        )));
    }
    Ok(estimated.ranks[system] - truth.ranks[system])
}

/// One failure-surface observation: sparsity, difficulty gap, ranking error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub sparsity: f64,
    pub gap: f64,
    pub error: f64,
}

impl SurfacePoint {
    pub fn new(sparsity: f64, gap: f64, error: f64) -> Self {
        Self {
            sparsity,
            gap,
            error,
        }
    }
}

/// `error = g0 + g1 S_c + g2 D_c + g3 S_c D_c` with centered S and D.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionFit {
    pub gamma: [f64; 4],
    pub t_values: [f64; 4],
    pub r_squared: f64,
    pub n: usize,
    pub s_mean: f64,
    pub d_mean: f64,
}

impl InteractionFit {
    pub fn predict(&self, sparsity: f64, gap: f64) -> f64 {
        let s = sparsity - self.s_mean;
        let d = gap - self.d_mean;
        self.gamma[0] + self.gamma[1] * s + self.gamma[2] * d + self.gamma[3] * s * d
    }
}

pub fn ols_interaction(points: &[SurfacePoint]) -> Result<InteractionFit> {
    let mut distinct: Vec<(f64, f64)> = points.iter().map(|p| (p.sparsity, p.gap)).collect();
    distinct.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    distinct.dedup();
    if distinct.len() < 5 {
        return Err(Error::InvalidParameter(format!(
            "interaction regression needs at least 5 distinct (S, D) points, got {}",
            distinct.len()
        )));
    }

    let n = points.len();
    let s_mean = points.iter().map(|p| p.sparsity).sum::<f64>() / n as f64;
    let d_mean = points.iter().map(|p| p.gap).sum::<f64>() / n as f64;
    let x = DMatrix::from_fn(n, 4, |r, c| {
        let s = points[r].sparsity - s_mean;
        let d = points[r].gap - d_mean;
        match c {
            0 => 1.0,
            1 => s,
            2 => d,
            _ => s * d,
        }
    });
    let y = DVector::from_iterator(n, points.iter().map(|p| p.error));

    let qr = x.clone().qr();
    let r = qr.r();
    let scale = (0..4).map(|k| r[(k, k)].abs()).fold(0.0, f64::max);
    if (0..4).any(|k| r[(k, k)].abs() <= 1e-12 * scale.max(1e-300)) {
        return Err(Error::SingularDesign);
    }
    let qty = qr.q().transpose() * &y;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or(Error::SingularDesign)?;

    let residuals = &y - &x * &beta;
    let rss = residuals.norm_squared();
    let y_mean = y.mean();
    let tss = y.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>();
    let r_squared = if tss > 0.0 { 1.0 - rss / tss } else { 1.0 };

    // (X'X)^-1 = R^-1 R^-T
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(4, 4))
        .ok_or(Error::SingularDesign)?;
    let xtx_inv = &r_inv * r_inv.transpose();
    let sigma2 = if n > 4 {
        rss / (n - 4) as f64
    } else {
        f64::NAN
    };

    let mut gamma = [0.0; 4];
    let mut t_values = [0.0; 4];
    for k in 0..4 {
        gamma[k] = beta[k];
        t_values[k] = beta[k] / (sigma2 * xtx_inv[(k, k)]).sqrt();
    }
    Ok(InteractionFit {
        gamma,
        t_values,
        r_squared,
        n,
        s_mean,
        d_mean,
    })
}

/// `error = alpha (S D)^beta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub alpha: f64,
    pub beta: f64,
    pub r_squared: f64,
    /// Cells that entered the log-log fit.
    pub n_fit: usize,
    /// Cells (S D > 0) that entered R².
    pub n_scored: usize,
}

impl PowerLawFit {
    pub fn predict(&self, product: f64) -> f64 {
        self.alpha * product.powf(self.beta)
    }
}

/// Errors at or below this cannot enter the log fit.
pub const POWER_LAW_ERROR_FLOOR: f64 = 1e-4;

/// Log-log least squares over cells with `S D > 0` and error above the floor;
/// R² is measured on raw errors over every cell with `S D > 0`.
pub fn power_law_fit(points: &[SurfacePoint]) -> Result<PowerLawFit> {
    let scored: Vec<(f64, f64)> = points
        .iter()
        .map(|p| (p.sparsity * p.gap, p.error))
        .filter(|(sd, _)| *sd > 0.0)
        .collect();
    let eligible: Vec<(f64, f64)> = scored
        .iter()
        .filter(|(_, e)| *e > POWER_LAW_ERROR_FLOOR)
        .map(|(sd, e)| (sd.ln(), e.ln()))
        .collect();
    if eligible.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "power-law fit needs at least 3 eligible cells, got {}",
            eligible.len()
        )));
    }
    let n = eligible.len() as f64;
    let mx = eligible.iter().map(|p| p.0).sum::<f64>() / n;
    let my = eligible.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx = eligible.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    if sxx <= 0.0 {
        return Err(Error::SingularDesign);
    }
    let sxy = eligible
        .iter()
        .map(|p| (p.0 - mx) * (p.1 - my))
        .sum::<f64>();
    let beta = sxy / sxx;
    let alpha = (my - beta * mx).exp();

    let mean = scored.iter().map(|p| p.1).sum::<f64>() / scored.len() as f64;
    let tss = scored.iter().map(|p| (p.1 - mean).powi(2)).sum::<f64>();
    let rss = scored
        .iter()
        .map(|&(sd, e)| (e - alpha * sd.powf(beta)).powi(2))
        .sum::<f64>();
    let r_squared = if tss > 0.0 { 1.0 - rss / tss } else { 1.0 };
    Ok(PowerLawFit {
        alpha,
        beta,
        r_squared,
        n_fit: eligible.len(),
        n_scored: scored.len(),
    })
}
