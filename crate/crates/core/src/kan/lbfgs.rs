//! Limited-memory BFGS with a strong-Wolfe line search (cubic interpolation
//! in the zoom phase).

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LbfgsOptions {
    pub memory: usize,
    pub max_iter: usize,
    /// Stop once the loss improved by less than this over `patience`
    /// iterations.
    pub tol_change: f64,
    pub patience: usize,
    pub grad_tol: f64,
    /// Scale of the very first step along the steepest-descent direction.
    pub initial_step: f64,
    pub c1: f64,
    pub c2: f64,
    pub max_line_search: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            memory: 10,
            max_iter: 200,
            tol_change: 1e-7,
            patience: 5,
            grad_tol: 1e-10,
            initial_step: 1.0,
            c1: 1e-4,
            c2: 0.9,
            max_line_search: 25,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LbfgsResult {
    pub x: Vec<f64>,
    pub loss: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Loss after every iteration, starting with the initial point.
    pub history: Vec<f64>,
    /// Set when a non-finite loss was met at the starting point.
    pub diverged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(x: &[f64], t: f64, d: &[f64]) -> Vec<f64> {
    x.iter().zip(d).map(|(a, b)| a + t * b).collect()
}

fn cubic_min(x1: f64, f1: f64, g1: f64, x2: f64, f2: f64, g2: f64) -> f64 {
    let (lo, hi) = if x1 <= x2 { (x1, x2) } else { (x2, x1) };
    let d1 = g1 + g2 - 3.0 * (f1 - f2) / (x1 - x2);
    let sq = d1 * d1 - g1 * g2;
    if sq >= 0.0 {
        let d2 = sq.sqrt() * if x2 >= x1 { 1.0 } else { -1.0 };
        let t = x2 - (x2 - x1) * ((g2 + d2 - d1) / (g2 - g1 + 2.0 * d2));
        if t.is_finite() {
            return t.clamp(lo, hi);
        }
    }
    0.5 * (lo + hi)
}

struct Probe {
    t: f64,
    f: f64,
    g: Vec<f64>,
    gtd: f64,
}

/// Returns the accepted probe, or `None` when no finite improving step was
/// found.
fn strong_wolfe<F>(obj: &mut F, x: &[f64], d: &[f64], f0: f64, gtd0: f64, mut t: f64, opts: &LbfgsOptions, evals: &mut usize) -> Option<Probe>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let mut eval = |t: f64, evals: &mut usize| {
        *evals += 1;
        let (f, g) = obj(&axpy(x, t, d));
        let gtd = dot(&g, d);
        Probe { t, f, g, gtd }
    };
    let mut prev = Probe {
        t: 0.0,
        f: f0,
        g: Vec::new(),
        gtd: gtd0,
    };
    let mut cur = eval(t, evals);
    let mut bracket: Option<(Probe, Probe)> = None;
    for i in 0..opts.max_line_search {
        if !cur.f.is_finite() {
            // Overshot into a region where the loss blows up; backtrack.
            t = 0.5 * (prev.t + cur.t);
            cur = eval(t, evals);
            continue;
        }
        if cur.f > f0 + opts.c1 * cur.t * gtd0 || (i > 0 && cur.f >= prev.f) {
            bracket = Some((prev, cur));
            break;
        }
        if cur.gtd.abs() <= -opts.c2 * gtd0 {
            return Some(cur);
        }
        if cur.gtd >= 0.0 {
            bracket = Some((cur, prev));
            break;
        }
        let next_t = (2.0 * cur.t).min(cur.t * 10.0);
        prev = cur;
        cur = eval(next_t, evals);
    }
    let (mut lo, mut hi) = bracket?;
    for _ in 0..opts.max_line_search {
        let t = cubic_min(lo.t, lo.f, lo.gtd, hi.t, hi.f, hi.gtd);
        // keep away from the bracket ends
        let (a, b) = if lo.t < hi.t { (lo.t, hi.t) } else { (hi.t, lo.t) };
        let span = b - a;
        let t = t.clamp(a + 0.1 * span, b - 0.1 * span);
        let probe = eval(t, evals);
        if !probe.f.is_finite() || probe.f > f0 + opts.c1 * t * gtd0 || probe.f >= lo.f {
            hi = probe;
        } else {
            if probe.gtd.abs() <= -opts.c2 * gtd0 {
                return Some(probe);
            }
            if probe.gtd * (hi.t - lo.t) >= 0.0 {
                hi = lo;
            }
            lo = probe;
        }
        if (hi.t - lo.t).abs() * dot(d, d).sqrt() < 1e-14 {
            break;
        }
    }
    // Accept the best sufficient-decrease point found, if any.
    (lo.t > 0.0 && lo.f < f0 && !lo.g.is_empty()).then_some(lo)
}

/// Minimizes `obj`, which returns the loss and its gradient.
pub fn minimize<F>(mut obj: F, x0: Vec<f64>, opts: &LbfgsOptions) -> LbfgsResult
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let mut x = x0;
    let (mut f, mut g) = obj(&x);
    let mut evals = 1;
    let mut history = vec![f];
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return LbfgsResult {
            x,
            loss: f,
            iterations: 0,
            evaluations: evals,
            converged: false,
            history,
            diverged: true,
        };
    }
    let mut mem: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        let gnorm = dot(&g, &g).sqrt();
        if gnorm <= opts.grad_tol {
            converged = true;
            break;
        }
        // Two-loop recursion.
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(mem.len());
        for (s, y, rho) in mem.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        if let Some((s, y, _)) = mem.back() {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|v| *v *= gamma);
        }
        for ((s, y, rho), a) in mem.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        let mut d: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut gtd = dot(&g, &d);
        if gtd >= 0.0 {
            mem.clear();
            d = g.iter().map(|v| -v).collect();
            gtd = -gnorm * gnorm;
        }
        let t0 = if mem.is_empty() {
            (opts.initial_step / g.iter().map(|v| v.abs()).sum::<f64>()).min(opts.initial_step)
        } else {
            1.0
        };
        let Some(probe) = strong_wolfe(&mut obj, &x, &d, f, gtd, t0, opts, &mut evals) else {
            if mem.is_empty() {
                converged = true;
                break;
            }
            mem.clear();
            continue;
        };
        let x_new = axpy(&x, probe.t, &d);
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = probe.g.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
            if mem.len() == opts.memory {
                mem.pop_front();
            }
            mem.push_back((s, y, 1.0 / sy));
        }
        x = x_new;
        f = probe.f;
        g = probe.g;
        iterations += 1;
        history.push(f);
        if history.len() > opts.patience {
            let old = history[history.len() - 1 - opts.patience];
            if old - f < opts.tol_change {
                converged = true;
                break;
            }
        }
    }
    LbfgsResult {
        x,
        loss: f,
        iterations,
        evaluations: evals,
        converged,
        history,
        diverged: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> (f64, Vec<f64>) {
        let (a, b) = (x[0], x[1]);
        let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
        let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
        (f, g)
    }

    #[test]
    fn minimizes_rosenbrock() {
        let opts = LbfgsOptions {
            max_iter: 500,
            tol_change: 1e-14,
            ..Default::default()
        };
        let r = minimize(rosenbrock, vec![-1.2, 1.0], &opts);
        assert!(r.loss < 1e-10, "{r:?}");
        assert!((r.x[0] - 1.0).abs() < 1e-4 && (r.x[1] - 1.0).abs() < 1e-4);
        assert!(r.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn quadratic_in_few_steps() {
        let obj = |x: &[f64]| {
            let f: f64 = x.iter().enumerate().map(|(i, v)| (i + 1) as f64 * (v - 1.0).powi(2)).sum();
            let g = x.iter().enumerate().map(|(i, v)| 2.0 * (i + 1) as f64 * (v - 1.0)).collect();
            (f, g)
        };
        let r = minimize(obj, vec![0.0; 8], &LbfgsOptions::default());
        assert!(r.loss < 1e-12);
        assert!(r.iterations < 40);
    }

    #[test]
    fn nan_start_reports_divergence() {
        let r = minimize(|_x: &[f64]| (f64::NAN, vec![0.0]), vec![0.0], &LbfgsOptions::default());
        assert!(r.diverged);
    }

    #[test]
    fn steps_around_nan_region() {
        // Loss undefined for x > 2; the minimum at 1.5 is still reached.
        let obj = |x: &[f64]| {
            if x[0] > 2.0 {
                (f64::NAN, vec![f64::NAN])
            } else {
                ((x[0] - 1.5).powi(2), vec![2.0 * (x[0] - 1.5)])
            }
        };
        let opts = LbfgsOptions {
            initial_step: 100.0,
            ..Default::default()
        };
        let r = minimize(obj, vec![-3.0], &opts);
        assert!((r.x[0] - 1.5).abs() < 1e-6, "{r:?}");
    }
}
