//! Independent oracles shared by the property suites and the acceptance run.
#![allow(dead_code)]

use fairrank::irt::{ItemParameterSet, PriorConfig};
use fairrank::matrix::{Cell, ResponseMatrix};
use fairrank::ranking::SurfacePoint;
use fairrank::simgen::{rng_from_seed, SimRng};
use rand::Rng;

pub fn random_matrix(rng: &mut SimRng, n_sys: usize, n_items: usize) -> ResponseMatrix {
    let cells: Vec<_> = (0..n_sys)
        .flat_map(|j| (0..n_items).map(move |i| (j, i)))
        .map(|(j, i)| {
            let t = rng.random_range(1..=50u32);
            let s = rng.random_range(0..=t);
            (j, i, Cell::new(s, t).unwrap())
        })
        .collect();
    ResponseMatrix::unlabeled(n_sys, n_items, cells).unwrap()
}

pub fn random_params(
    rng: &mut SimRng,
    n_sys: usize,
    n_items: usize,
) -> (Vec<f64>, ItemParameterSet) {
    let theta = (0..n_sys).map(|_| rng.random_range(-2.0..2.0)).collect();
    let b = (0..n_items).map(|_| rng.random_range(-2.0..2.0)).collect();
    let log_a = (0..n_items).map(|_| rng.random_range(-0.5..0.5)).collect();
    (theta, ItemParameterSet::from_log(log_a, b).unwrap())
}

pub fn split(x: &[f64], n_sys: usize, n_items: usize) -> (Vec<f64>, ItemParameterSet) {
    let theta = x[..n_sys].to_vec();
    let b = x[n_sys..n_sys + n_items].to_vec();
    let log_a = x[n_sys + n_items..].to_vec();
    (theta, ItemParameterSet::from_log(log_a, b).unwrap())
}

/// Direct transcription of the regularized objective, no shared code.
pub fn reference_objective(m: &ResponseMatrix, x: &[f64], p: &PriorConfig) -> f64 {
    let (j_n, i_n) = (m.n_systems(), m.n_items());
    let mut total = 0.0;
    for j in 0..j_n {
        for i in 0..i_n {
            if let Some(c) = m.get(j, i) {
                let a = x[j_n + i_n + i].exp();
                let prob = 1.0 / (1.0 + (-a * (x[j] - x[j_n + i])).exp());
                total += c.successes as f64 * prob.ln()
                    + (c.trials - c.successes) as f64 * (1.0 - prob).ln();
            }
        }
    }
    let pen = |v: f64, sd: f64| {
        if sd.is_finite() {
            -v * v / (2.0 * sd * sd)
        } else {
            0.0
        }
    };
    total += x[..j_n].iter().map(|&v| pen(v, p.theta_sd)).sum::<f64>();
    total += x[j_n..j_n + i_n]
        .iter()
        .map(|&v| pen(v, p.difficulty_sd))
        .sum::<f64>();
    total += x[j_n + i_n..]
        .iter()
        .map(|&v| pen(v, p.log_discrimination_sd))
        .sum::<f64>();
    total
}

/// Coarse-to-fine compass search: each coordinate is tried on a 5-point grid
/// around the incumbent; the grid spacing halves when no point improves.
pub fn grid_search_maximum(f: impl Fn(&[f64]) -> f64, dim: usize) -> Vec<f64> {
    let mut x = vec![0.0; dim];
    let mut best = f(&x);
    let mut step = 0.5;
    while step > 1e-7 {
        let mut improved = false;
        for k in 0..dim {
            let center = x[k];
            for offset in [-2.0, -1.0, 1.0, 2.0] {
                let mut trial = x.clone();
                trial[k] = center + offset * step;
                let v = f(&trial);
                if v > best {
                    best = v;
                    x = trial;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    x
}

/// O(n^2) tied ranking: 1 + (# strictly greater) + (# equal others) / 2.
pub fn naive_ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            let greater = x.iter().filter(|&&w| w > v).count() as f64;
            let equal = x.iter().filter(|&&w| w == v).count() as f64 - 1.0;
            1.0 + greater + equal / 2.0
        })
        .collect()
}

pub fn naive_pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
    let sab: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let saa: f64 = a.iter().map(|x| x * x).sum();
    let sbb: f64 = b.iter().map(|y| y * y).sum();
    (n * sab - sa * sb) / ((n * saa - sa * sa).sqrt() * (n * sbb - sb * sb).sqrt())
}

/// Solves `A x = y` by Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut y: Vec<f64>) -> Vec<f64> {
    let n = y.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        y.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            let pivot_row = a[col].clone();
            for (v, p) in a[row].iter_mut().zip(&pivot_row).skip(col) {
                *v -= f * p;
            }
            y[row] -= f * y[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (y[row] - s) / a[row][row];
    }
    x
}

pub fn design_row(p: &SurfacePoint, sm: f64, dm: f64) -> [f64; 4] {
    let (s, d) = (p.sparsity - sm, p.gap - dm);
    [1.0, s, d, s * d]
}

pub fn random_surface(seed: u64, n: usize) -> Vec<SurfacePoint> {
    let mut rng = rng_from_seed(seed);
    (0..n)
        .map(|_| {
            let s = rng.random_range(0..15) as f64 * 0.05;
            let d = rng.random_range(1..=10) as f64 * 0.5;
            let e = 0.05 + 0.3 * s * d / 3.5 + rng.random_range(-0.05..0.05);
            SurfacePoint::new(s, d, e)
        })
        .collect()
}

/// Worst relative error, over 20 random instances, between the analytic
/// gradient and central differences of the objective.
pub fn gradient_fd_worst(seed: u64) -> f64 {
    use fairrank::irt::{gradient, log_likelihood, Objective};
    let priors = PriorConfig::default();
    let mut rng = rng_from_seed(seed);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let n_sys = rng.random_range(2..=5);
        let n_items = rng.random_range(2..=4);
        let m = random_matrix(&mut rng, n_sys, n_items);
        let (theta, items) = random_params(&mut rng, n_sys, n_items);
        let analytic = gradient(&m, &theta, &items, &priors).unwrap();

        let x = Objective::new(&m, &priors)
            .unwrap()
            .pack(&theta, &items)
            .unwrap();
        let h = 1e-5;
        let numeric: Vec<f64> = (0..x.len())
            .map(|k| {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[k] += h;
                xm[k] -= h;
                let (tp, ip) = split(&xp, n_sys, n_items);
                let (tm, im) = split(&xm, n_sys, n_items);
                (log_likelihood(&m, &tp, &ip, &priors).unwrap()
                    - log_likelihood(&m, &tm, &im, &priors).unwrap())
                    / (2.0 * h)
            })
            .collect();
        let diff = analytic
            .iter()
            .zip(&numeric)
            .map(|(a, n)| (a - n).powi(2))
            .sum::<f64>()
            .sqrt();
        let scale = numeric.iter().map(|n| n * n).sum::<f64>().sqrt().max(1e-8);
        worst = worst.max(diff / scale);
    }
    worst
}

/// Largest change of the unpenalized log-likelihood under a joint shift of
/// abilities and difficulties, over 10 random instances.
pub fn shift_invariance_worst(seed: u64) -> f64 {
    use fairrank::irt::log_likelihood;
    let mut rng = rng_from_seed(seed);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let m = random_matrix(&mut rng, 4, 4);
        let (theta, items) = random_params(&mut rng, 4, 4);
        let c = rng.random_range(-3.0..3.0);
        let shifted_theta: Vec<f64> = theta.iter().map(|t| t + c).collect();
        let shifted_b: Vec<f64> = items.difficulty().iter().map(|b| b + c).collect();
        let shifted = ItemParameterSet::new(&items.discrimination(), &shifted_b).unwrap();
        let flat = PriorConfig::flat();
        let before = log_likelihood(&m, &theta, &items, &flat).unwrap();
        let after = log_likelihood(&m, &shifted_theta, &shifted, &flat).unwrap();
        worst = worst.max((before - after).abs());
    }
    worst
}

/// Complete 3x3 design with K = 2000 trials per cell.
pub fn complete_3x3(seed: u64) -> (Vec<f64>, ItemParameterSet, ResponseMatrix) {
    use fairrank::matrix::ObservationMask;
    use fairrank::simgen::generate_responses;
    let theta = vec![-1.0, 0.2, 1.3];
    let items = ItemParameterSet::new(&[0.8, 1.2, 1.7], &[-0.6, 0.1, 0.7]).unwrap();
    let m = generate_responses(&theta, &items, &ObservationMask::full(3, 3), 2000, seed).unwrap();
    (theta, items, m)
}

/// Fits the complete 3x3 instance and compares with the grid-search maximizer
/// of the reference objective. Returns the largest parameter deviation and
/// whether the fit also reaches at least the grid-search objective.
pub fn brute_force_deviation(seed: u64) -> (f64, bool) {
    use fairrank::irt::{fit, FitSettings, Objective};
    let (_, _, m) = complete_3x3(seed);
    let priors = PriorConfig::default();
    let fitted = fit(&m, &priors, &FitSettings::default()).unwrap();
    let ours = Objective::new(&m, &priors)
        .unwrap()
        .pack(&fitted.abilities.theta, &fitted.items)
        .unwrap();
    let brute = grid_search_maximum(|x| reference_objective(&m, x, &priors), ours.len());
    let dev = ours
        .iter()
        .zip(&brute)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let at_least = fitted.objective >= reference_objective(&m, &brute, &priors) - 1e-6;
    (dev, fitted.converged && at_least)
}

/// Worst absolute difference between the library Spearman and the oracle
/// (textbook formula without ties, Pearson of naive average ranks with ties).
pub fn spearman_oracle_worst(seed: u64) -> f64 {
    use fairrank::ranking::spearman_scores;
    let mut rng = rng_from_seed(seed);
    let mut worst = 0.0f64;
    for round in 0..100 {
        let n = rng.random_range(3..=12);
        let tied = round % 2 == 1;
        let mut draw = || {
            if tied {
                rng.random_range(0..4) as f64
            } else {
                rng.random::<f64>()
            }
        };
        let a: Vec<f64> = (0..n).map(|_| draw()).collect();
        let b: Vec<f64> = (0..n).map(|_| draw()).collect();
        let (ra, rb) = (naive_ranks(&a), naive_ranks(&b));
        if ra.iter().all(|&v| v == ra[0]) || rb.iter().all(|&v| v == rb[0]) {
            continue;
        }
        let expected = if tied {
            naive_pearson(&ra, &rb)
        } else {
            let d2: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - y).powi(2)).sum();
            let nf = n as f64;
            1.0 - 6.0 * d2 / (nf * (nf * nf - 1.0))
        };
        worst = worst.max((spearman_scores(&a, &b).unwrap() - expected).abs());
    }
    worst
}

/// Normal-equation solution of the interaction regression: coefficients,
/// R², and t-values.
pub fn ols_oracle(pts: &[SurfacePoint]) -> ([f64; 4], f64, [f64; 4]) {
    let n = pts.len() as f64;
    let sm = pts.iter().map(|p| p.sparsity).sum::<f64>() / n;
    let dm = pts.iter().map(|p| p.gap).sum::<f64>() / n;
    let rows: Vec<[f64; 4]> = pts.iter().map(|p| design_row(p, sm, dm)).collect();
    let xtx: Vec<Vec<f64>> = (0..4)
        .map(|a| {
            (0..4)
                .map(|b| rows.iter().map(|r| r[a] * r[b]).sum())
                .collect()
        })
        .collect();
    let xty: Vec<f64> = (0..4)
        .map(|a| rows.iter().zip(pts).map(|(r, p)| r[a] * p.error).sum())
        .collect();
    let beta = gauss_solve(xtx.clone(), xty);
    let rss: f64 = rows
        .iter()
        .zip(pts)
        .map(|(r, p)| (p.error - (0..4).map(|k| r[k] * beta[k]).sum::<f64>()).powi(2))
        .sum();
    let ym = pts.iter().map(|p| p.error).sum::<f64>() / n;
    let tss: f64 = pts.iter().map(|p| (p.error - ym).powi(2)).sum();
    let sigma2 = rss / (n - 4.0);
    let mut t = [0.0; 4];
    for k in 0..4 {
        let mut unit = vec![0.0; 4];
        unit[k] = 1.0;
        t[k] = beta[k] / (sigma2 * gauss_solve(xtx.clone(), unit)[k]).sqrt();
    }
    ([beta[0], beta[1], beta[2], beta[3]], 1.0 - rss / tss, t)
}

/// Worst deviation of the library regression from [`ols_oracle`] over 10
/// random surfaces (t-values relative to max(1, |t|)).
pub fn ols_oracle_worst() -> f64 {
    use fairrank::ranking::ols_interaction;
    let mut worst = 0.0f64;
    for seed in 0..10 {
        let pts = random_surface(seed, 40);
        let (beta, r2, t) = ols_oracle(&pts);
        let fit = ols_interaction(&pts).unwrap();
        for k in 0..4 {
            worst = worst.max((fit.gamma[k] - beta[k]).abs());
            worst = worst.max((fit.t_values[k] - t[k]).abs() / t[k].abs().max(1.0));
        }
        worst = worst.max((fit.r_squared - r2).abs());
    }
    worst
}
