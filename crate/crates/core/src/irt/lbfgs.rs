//! Limited-memory BFGS for smooth unconstrained minimization.
//!
//! Two-loop recursion for the search direction and a strong-Wolfe line search
//! (bracketing plus zoom). Near the optimum the function value stops resolving
//! progress long before the gradient does, so the sufficient-decrease test also
//! accepts the approximate-Wolfe form: a change in `f` within rounding noise of
//! `f(x)` paired with a clear drop in the directional derivative.

use std::collections::VecDeque;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct LbfgsSettings {
    /// Number of correction pairs kept.
    pub memory: usize,
    pub max_iterations: usize,
    /// Converged when the largest gradient component falls to this.
    pub gradient_tolerance: f64,
    pub max_line_search: usize,
}

impl Default for LbfgsSettings {
    fn default() -> Self {
        Self {
            memory: 10,
            max_iterations: 500,
            gradient_tolerance: 1e-6,
            max_line_search: 40,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl Minimum {
    pub fn gradient_norm(&self) -> f64 {
        max_abs(&self.gradient)
    }
}

const C1: f64 = 1e-4;
const C2: f64 = 0.9;
const NOISE: f64 = 1e-12;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

struct Correction {
    s: Vec<f64>,
    y: Vec<f64>,
    rho: f64,
}

/// Minimizes `f`, which returns the value and writes the gradient into its second argument.
pub fn minimize<F>(mut f: F, x0: &[f64], settings: &LbfgsSettings) -> Result<Minimum>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g);
    if !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { iteration: 0 });
    }

    let mut history: VecDeque<Correction> = VecDeque::with_capacity(settings.memory);
    let mut direction = vec![0.0; n];
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut iterations = 0;
    let mut restarted = false;

    while iterations < settings.max_iterations {
        if max_abs(&g) <= settings.gradient_tolerance {
            break;
        }
        two_loop(&g, &history, &mut direction);
        let mut slope = dot(&g, &direction);
        if !(slope < 0.0) {
            history.clear();
            direction.iter_mut().zip(&g).for_each(|(d, gi)| *d = -gi);
            slope = dot(&g, &direction);
        }

        let initial_step = if history.is_empty() {
            (1.0 / max_abs(&g)).min(1.0)
        } else {
            1.0
        };

        let mut phi = |alpha: f64, xn: &mut [f64], gn: &mut [f64]| -> f64 {
            for k in 0..n {
                xn[k] = x[k] + alpha * direction[k];
            }
            let v = f(xn, gn);
            if v.is_finite() && gn.iter().all(|t| t.is_finite()) {
                v
            } else {
                f64::INFINITY
            }
        };

        let step = line_search(
            &mut phi,
            fx,
            slope,
            initial_step,
            &direction,
            &mut x_new,
            &mut g_new,
            settings.max_line_search,
        );
        iterations += 1;

        let Some(f_new) = step else {
            // One retry from steepest descent before giving up.
            if restarted || history.is_empty() {
                break;
            }
            restarted = true;
            history.clear();
            continue;
        };
        restarted = false;

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            if history.len() == settings.memory {
                history.pop_front();
            }
            history.push_back(Correction {
                rho: 1.0 / sy,
                s,
                y,
            });
        }
        x.copy_from_slice(&x_new);
        g.copy_from_slice(&g_new);
        fx = f_new;
    }

    if !fx.is_finite() {
        return Err(Error::NonFinite {
            iteration: iterations,
        });
    }
    let converged = max_abs(&g) <= settings.gradient_tolerance;
    Ok(Minimum {
        x,
        value: fx,
        gradient: g,
        iterations,
        converged,
    })
}

fn two_loop(g: &[f64], history: &VecDeque<Correction>, out: &mut [f64]) {
    out.iter_mut().zip(g).for_each(|(o, gi)| *o = -gi);
    let mut alphas = Vec::with_capacity(history.len());
    for c in history.iter().rev() {
        let a = c.rho * dot(&c.s, out);
        out.iter_mut().zip(&c.y).for_each(|(o, yi)| *o -= a * yi);
        alphas.push(a);
    }
    if let Some(last) = history.back() {
        let gamma = 1.0 / (last.rho * dot(&last.y, &last.y));
        out.iter_mut().for_each(|o| *o *= gamma);
    }
    for (c, a) in history.iter().zip(alphas.iter().rev()) {
        let b = c.rho * dot(&c.y, out);
        out.iter_mut()
            .zip(&c.s)
            .for_each(|(o, si)| *o += (a - b) * si);
    }
}

/// Returns the accepted value; the point and gradient are left in `x_new`/`g_new`.
#[allow(clippy::too_many_arguments)]
fn line_search<P>(
    phi: &mut P,
    f0: f64,
    slope0: f64,
    initial_step: f64,
    direction: &[f64],
    x_new: &mut [f64],
    g_new: &mut [f64],
    max_evals: usize,
) -> Option<f64>
where
    P: FnMut(f64, &mut [f64], &mut [f64]) -> f64,
{
    let noise = NOISE * (1.0 + f0.abs());
    let sufficient = |alpha: f64, value: f64, slope: f64| {
        value <= f0 + C1 * alpha * slope0
            || (value <= f0 + noise && slope <= (2.0 * C1 - 1.0) * slope0)
    };
    let curvature = |slope: f64| slope.abs() <= -C2 * slope0;
    // Values within noise of the start carry no ordering information.
    let worse = |value: f64, reference: f64| value >= reference && value > f0 + noise;

    let mut evals = 0;
    let mut eval = |alpha: f64, x_new: &mut [f64], g_new: &mut [f64]| {
        let v = phi(alpha, x_new, g_new);
        let s = if v.is_finite() {
            dot(g_new, direction)
        } else {
            f64::INFINITY
        };
        (v, s)
    };

    let mut prev = (0.0, f0, slope0);
    let mut alpha = initial_step;
    let (mut lo, mut hi);
    loop {
        if evals >= max_evals {
            return None;
        }
        evals += 1;
        let (v, s) = eval(alpha, x_new, g_new);
        if !sufficient(alpha, v, s) || (evals > 1 && worse(v, prev.1)) {
            lo = prev;
            hi = (alpha, v, s);
            break;
        }
        if curvature(s) {
            return Some(v);
        }
        if s >= 0.0 {
            lo = (alpha, v, s);
            hi = prev;
            break;
        }
        prev = (alpha, v, s);
        alpha *= 2.0;
    }

    // Zoom between lo (satisfies sufficient decrease) and hi.
    loop {
        if evals >= max_evals {
            return None;
        }
        evals += 1;
        let alpha = interpolate(lo, hi);
        let (v, s) = eval(alpha, x_new, g_new);
        if !sufficient(alpha, v, s) || worse(v, lo.1) {
            hi = (alpha, v, s);
        } else {
            if curvature(s) {
                return Some(v);
            }
            if s * (hi.0 - lo.0) >= 0.0 {
                hi = lo;
            }
            lo = (alpha, v, s);
        }
        if (hi.0 - lo.0).abs() < 1e-16 * lo.0.abs().max(1.0) {
            // Interval collapsed; take lo if it improved anything.
            if lo.0 > 0.0 {
                let (v, _) = eval(lo.0, x_new, g_new);
                return Some(v);
            }
            return None;
        }
    }
}

/// Cubic interpolation safeguarded to the middle of the bracket.
fn interpolate(lo: (f64, f64, f64), hi: (f64, f64, f64)) -> f64 {
    let (a0, f0, d0) = lo;
    let (a1, f1, d1) = hi;
    let width = a1 - a0;
    let fallback = a0 + 0.5 * width;
    if !f1.is_finite() || !d1.is_finite() {
        return fallback;
    }
    let d1_ = d0 + d1 - 3.0 * (f0 - f1) / (a0 - a1);
    let disc = d1_ * d1_ - d0 * d1;
    if disc < 0.0 {
        return fallback;
    }
    let d2 = width.signum() * disc.sqrt();
    let t = a1 - (a1 - a0) * (d1 + d2 - d1_) / (d1 - d0 + 2.0 * d2);
    let (min, max) = if a0 < a1 { (a0, a1) } else { (a1, a0) };
    let margin = 0.1 * (max - min);
    if t.is_finite() && t > min + margin && t < max - margin {
        t
    } else {
        fallback
    }
}
