//! Affine-wrapped least-squares fits `y = c * f(a * x + b) + d` of sampled
//! curves against the candidate library.

use super::expr::FnTag;
use crate::kan::silu;

/// One fitted candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub tag: FnTag,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub r2: f64,
}

/// Best `(c, d)` for `y ~ c * g + d` and its residual sum of squares.
fn affine_ls(g: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = g.len() as f64;
    let gm = g.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let mut sgg = 0.0;
    let mut sgy = 0.0;
    for (gi, yi) in g.iter().zip(y) {
        sgg += (gi - gm) * (gi - gm);
        sgy += (gi - gm) * (yi - ym);
    }
    let c = if sgg > 1e-300 && sgg.is_finite() { sgy / sgg } else { 0.0 };
    let d = ym - c * gm;
    let rss = g.iter().zip(y).map(|(gi, yi)| (yi - c * gi - d).powi(2)).sum();
    (c, d, rss)
}

fn total_ss(y: &[f64]) -> f64 {
    let ym = y.iter().sum::<f64>() / y.len() as f64;
    y.iter().map(|v| (v - ym).powi(2)).sum()
}

fn r_squared(rss: f64, tss: f64) -> f64 {
    if !rss.is_finite() {
        return 0.0;
    }
    // A flat curve is fitted perfectly by anything that can be constant.
    if tss <= 1e-24 * (1.0 + tss) || tss == 0.0 {
        return if rss <= 1e-20 { 1.0 } else { 0.0 };
    }
    (1.0 - rss / tss).clamp(0.0, 1.0)
}

/// Golden-section minimisation of `f` on `[lo, hi]`.
fn golden<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, iters: usize) -> f64 {
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..iters {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        x1
    } else {
        x2
    }
}

/// Two-parameter Nelder-Mead from `start` with initial simplex steps `step`.
fn nelder_mead<F: FnMut([f64; 2]) -> f64>(mut f: F, start: [f64; 2], step: [f64; 2], iters: usize) -> (f64, f64) {
    let mut pts = [start, [start[0] + step[0], start[1]], [start[0], start[1] + step[1]]];
    let mut vals = pts.map(&mut f);
    let lerp = |a: [f64; 2], b: [f64; 2], t: f64| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
    for _ in 0..iters {
        let mut order = [0, 1, 2];
        order.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
        pts = order.map(|i| pts[i]);
        vals = order.map(|i| vals[i]);
        let centroid = lerp(pts[0], pts[1], 0.5);
        let reflected = lerp(centroid, pts[2], -1.0);
        let fr = f(reflected);
        if fr < vals[0] {
            let expanded = lerp(centroid, pts[2], -2.0);
            let fe = f(expanded);
            (pts[2], vals[2]) = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < vals[1] {
            (pts[2], vals[2]) = (reflected, fr);
        } else {
            let contracted = lerp(centroid, pts[2], 0.5);
            let fc = f(contracted);
            if fc < vals[2] {
                (pts[2], vals[2]) = (contracted, fc);
            } else {
                for i in 1..3 {
                    pts[i] = lerp(pts[0], pts[i], 0.5);
                    vals[i] = f(pts[i]);
                }
            }
        }
    }
    let best = (0..3).min_by(|&i, &j| vals[i].total_cmp(&vals[j])).unwrap();
    (pts[best][0], pts[best][1])
}

fn log_grid(lo_exp: f64, hi_exp: f64, n: usize) -> Vec<f64> {
    let pos: Vec<f64> = (0..n)
        .map(|i| 10f64.powf(lo_exp + (hi_exp - lo_exp) * i as f64 / (n - 1) as f64))
        .collect();
    pos.iter().map(|v| -v).rev().chain(pos.iter().copied()).collect()
}

/// Fits every library function to `(xs, ys)`. `xs` must span a non-empty
/// interval. Nonlinear inner parameters are searched in the normalised
/// coordinate `t = (x - lo) / (hi - lo)` and mapped back.
pub fn fit_library(xs: &[f64], ys: &[f64]) -> Vec<Candidate> {
    let tss = total_ss(ys);
    let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w = (hi - lo).max(1e-12);
    let ts: Vec<f64> = xs.iter().map(|x| (x - lo) / w).collect();
    let mut out = Vec::with_capacity(5);

    let ym = ys.iter().sum::<f64>() / ys.len() as f64;
    out.push(Candidate {
        tag: FnTag::Const,
        a: 0.0,
        b: 0.0,
        c: 0.0,
        d: ym,
        r2: r_squared(tss, tss),
    });

    let (c, d, rss) = affine_ls(xs, ys);
    out.push(Candidate {
        tag: FnTag::Linear,
        a: 1.0,
        b: 0.0,
        c,
        d,
        r2: r_squared(rss, tss),
    });

    out.push(fit_quadratic(xs, ys, tss));

    // exp(alpha * t) = exp(a x + b) with a = alpha / w, b = -alpha lo / w
    let exp_rss = |alpha: f64| {
        let g: Vec<f64> = ts.iter().map(|t| (alpha * t).exp()).collect();
        affine_ls(&g, ys)
    };
    let grid = log_grid(-2.0, 50f64.log10(), 30);
    let (bi, _) = grid
        .iter()
        .enumerate()
        .map(|(i, &al)| (i, exp_rss(al).2))
        .min_by(|p, q| p.1.total_cmp(&q.1))
        .unwrap();
    let lo_a = if bi == 0 { grid[0] * 1.2 } else { grid[bi - 1] };
    let hi_a = if bi + 1 == grid.len() { grid[bi] * 1.2 } else { grid[bi + 1] };
    let alpha = golden(|al| exp_rss(al).2, lo_a.min(hi_a), lo_a.max(hi_a), 60);
    let (c, d, rss) = exp_rss(alpha);
    out.push(Candidate {
        tag: FnTag::Exp,
        a: alpha / w,
        b: -alpha * lo / w,
        c,
        d,
        r2: r_squared(rss, tss),
    });

    out.push(fit_silu(&ts, ys, tss, lo, w));
    out
}

fn fit_quadratic(xs: &[f64], ys: &[f64], tss: f64) -> Candidate {
    let rows: Vec<[f64; 3]> = xs.iter().map(|&x| [x * x, x, 1.0]).collect();
    let beta = crate::linalg::least_squares(rows.iter().map(|r| &r[..]), ys, 3, 0.0);
    let skip = Candidate {
        tag: FnTag::Quadratic,
        a: 1.0,
        b: 0.0,
        c: 0.0,
        d: 0.0,
        r2: 0.0,
    };
    let Some(p) = beta else { return skip };
    if p[0].abs() <= 1e-12 * (p[1].abs() + p[2].abs() + 1.0) {
        return skip;
    }
    // c x^2 + e x + g = c (x + b)^2 + d
    let b = p[1] / (2.0 * p[0]);
    let d = p[2] - p[0] * b * b;
    let rss = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - (p[0] * x * x + p[1] * x + p[2])).powi(2))
        .sum();
    Candidate {
        tag: FnTag::Quadratic,
        a: 1.0,
        b,
        c: p[0],
        d,
        r2: r_squared(rss, tss),
    }
}

fn fit_silu(ts: &[f64], ys: &[f64], tss: f64, lo: f64, w: f64) -> Candidate {
    let rss_of = |alpha: f64, beta: f64| {
        let g: Vec<f64> = ts.iter().map(|t| silu(alpha * t + beta)).collect();
        affine_ls(&g, ys)
    };
    let alphas = log_grid(-1.0, 20f64.log10(), 16);
    let betas: Vec<f64> = (0..25).map(|i| -6.0 + 0.5 * i as f64).collect();
    let mut best = (alphas[0], betas[0], f64::INFINITY);
    for &al in &alphas {
        for &be in &betas {
            let rss = rss_of(al, be).2;
            if rss < best.2 {
                best = (al, be, rss);
            }
        }
    }
    let (al, be) = nelder_mead(
        |p| rss_of(p[0], p[1]).2,
        [best.0, best.1],
        [0.2 * best.0.abs(), 0.5],
        400,
    );
    let (c, d, rss) = rss_of(al, be);
    Candidate {
        tag: FnTag::Silu,
        a: al / w,
        b: be - al * lo / w,
        c,
        d,
        r2: r_squared(rss, tss),
    }
}

/// Picks the highest-R^2 candidate, preferring the simpler one (library
/// order) when within `tol` of the best.
pub fn select(cands: &[Candidate], tol: f64) -> Candidate {
    let best = cands.iter().map(|c| c.r2).fold(f64::NEG_INFINITY, f64::max);
    *cands.iter().find(|c| c.r2 >= best - tol).unwrap()
}
