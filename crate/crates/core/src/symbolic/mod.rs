//! Closed-form decision rules: snapping trained spline edges to library
//! functions, built-in reference rules and exponential decay-rate fits of
//! the first histogram bin.

mod expr;
pub mod fit;

use serde::{Deserialize, Serialize};

pub use expr::{eval_rule, DecisionRule, FnTag, RuleOutcome, SampledCurve, SymbolicExpr, Term};

use crate::kan::{Dataset, KanModel, SplineEdge};
use crate::{Error, Result};

/// Sample count used to fit each edge.
pub const SNAP_POINTS: usize = 512;
/// Below this R^2 an edge keeps its sampled curve.
pub const MIN_R2: f64 = 0.9;
/// R^2 slack within which the simpler library function wins.
pub const SIMPLICITY_TOLERANCE: f64 = 1e-4;

/// Built-in rule names.
pub const BUILTIN_RULES: [&str; 2] = ["paper-eq7-m10", "paper-eq8-m5"];

/// Reference rules for 10-bin and 5-bin histograms.
pub fn builtin(name: &str) -> Result<DecisionRule> {
    match name {
        "paper-eq7-m10" => DecisionRule::new(
            name,
            SymbolicExpr::new(10, vec![Term::linear(0, -10.288, 7.91), Term::linear(1, -1.14e-6, 0.0)])?,
            SymbolicExpr::new(10, vec![Term::linear(0, 7.5514, -5.797)])?,
        ),
        "paper-eq8-m5" => DecisionRule::new(
            name,
            SymbolicExpr::new(5, vec![Term::linear(1, -2.12e-8, -1.65e-8)])?,
            SymbolicExpr::new(5, vec![Term::linear(0, 32.607, -28.818), Term::linear(1, -0.00085, 0.0)])?,
        ),
        other => Err(Error::UnknownDetector(other.to_string())),
    }
}

/// Fits one edge over its grid interval.
pub fn snap_edge(edge: &SplineEdge, input: usize) -> Term {
    let (lo, hi) = (edge.basis.lo, edge.basis.hi);
    let xs: Vec<f64> = (0..SNAP_POINTS)
        .map(|i| lo + (hi - lo) * i as f64 / (SNAP_POINTS - 1) as f64)
        .collect();
    let ys: Vec<f64> = xs.iter().map(|&x| edge.eval(x)).collect();
    let best = fit::select(&fit::fit_library(&xs, &ys), SIMPLICITY_TOLERANCE);
    if best.r2 < MIN_R2 {
        return Term {
            input,
            tag: FnTag::Spline,
            a: 0.0,
            b: 0.0,
            c: 0.0,
            d: 0.0,
            r2: best.r2,
            curve: Some(SampledCurve { lo, hi, values: ys }),
        };
    }
    Term {
        input,
        tag: best.tag,
        a: best.a,
        b: best.b,
        c: best.c,
        d: best.d,
        r2: best.r2,
        curve: None,
    }
}

/// Replaces every active edge of a single-layer two-output network with its
/// best library fit.
pub fn snap(model: &KanModel) -> Result<DecisionRule> {
    if model.layers.len() != 1 || model.n_outputs() != 2 {
        return Err(Error::InvalidArgument(format!(
            "snapping needs a single [M, 2] layer, got width {:?}",
            model.width
        )));
    }
    let layer = &model.layers[0];
    let exprs = (0..2)
        .map(|q| {
            let terms = (0..layer.n_in)
                .filter(|&r| layer.is_active(q, r))
                .map(|r| snap_edge(layer.edge(q, r), r))
                .collect();
            SymbolicExpr::new(layer.n_in, terms)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut it = exprs.into_iter();
    DecisionRule::new("snapped", it.next().unwrap(), it.next().unwrap())
}

/// Exponential rate whose mass on `[0, width]` equals `p0`.
pub fn decay_rate(p0: f64, width: f64) -> f64 {
    if p0 >= 1.0 {
        f64::INFINITY
    } else {
        -(1.0 - p0).ln() / width
    }
}

/// Per-class exponential fits of the first-bin mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayRates {
    pub bin_width: f64,
    /// Mean first-bin mass for `[H0, H1]`.
    pub p0: [f64; 2],
    /// `[lambda0, lambda1]`; infinite when degenerate.
    pub lambda: [f64; 2],
    /// Set when a class puts all its mass in the first bin.
    pub degenerate: [bool; 2],
}

/// Fits `lambda0` and `lambda1` from the mean first-bin mass of each class.
pub fn fit_decay_rates(data: &Dataset) -> Result<DecayRates> {
    data.check_trainable()?;
    let w = 1.0 / data.arity() as f64;
    let mut sum = [0.0; 2];
    let mut count = [0usize; 2];
    for (x, &y) in data.inputs.iter().zip(&data.labels) {
        sum[y] += x[0];
        count[y] += 1;
    }
    let p0 = [sum[0] / count[0] as f64, sum[1] / count[1] as f64];
    let lambda = [decay_rate(p0[0], w), decay_rate(p0[1], w)];
    Ok(DecayRates {
        bin_width: w,
        p0,
        lambda,
        degenerate: [lambda[0].is_infinite(), lambda[1].is_infinite()],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypothesis::{Hypothesis, SegmentClassifier};

    fn at(m: usize, x0: f64, x1: f64) -> Vec<f64> {
        let mut x = vec![0.0; m];
        x[0] = x0;
        x[1] = x1;
        x
    }

    #[test]
    fn eq7_reference_points() {
        let r = builtin("paper-eq7-m10").unwrap();
        let o = r.eval(&at(10, 0.92, 0.03)).unwrap();
        assert_eq!(o.hypothesis, Hypothesis::H1);
        assert!((o.h0 + 1.555).abs() < 1e-3 && (o.h1 - 1.150).abs() < 1e-3);
        assert_eq!(r.eval(&at(10, 0.60, 0.0)).unwrap().hypothesis, Hypothesis::H0);
    }

    /// Brute-force scan for the sign change of the margin along x0.
    fn crossover(rule: &DecisionRule) -> f64 {
        let m = rule.arity();
        let mut prev = rule.margin(&at(m, 0.0, 0.0));
        for i in 1..=1_000_000 {
            let x0 = i as f64 * 1e-6;
            let cur = rule.margin(&at(m, x0, 0.0));
            if prev <= 0.0 && cur > 0.0 {
                return x0;
            }
            prev = cur;
        }
        panic!("no crossover");
    }

    #[test]
    fn builtin_crossovers() {
        let c7 = crossover(&builtin("paper-eq7-m10").unwrap());
        assert!((c7 - 0.7684).abs() < 5e-4, "{c7}");
        let r7 = builtin("paper-eq7-m10").unwrap();
        assert!(r7.margin(&at(10, 0.768, 0.0)) < 0.0 && r7.margin(&at(10, 0.769, 0.0)) > 0.0);
        let c8 = crossover(&builtin("paper-eq8-m5").unwrap());
        assert!((c8 - 0.8838).abs() < 5e-4, "{c8}");
        assert!(matches!(builtin("nope"), Err(Error::UnknownDetector(_))));
    }

    #[test]
    fn builtins_ignore_small_x1_perturbations() {
        for name in BUILTIN_RULES {
            let r = builtin(name).unwrap();
            let c = crossover(&r);
            for x0 in [c - 0.3, c - 0.05, c - 0.01, c + 0.01, c + 0.05, c + 0.1] {
                let base = r.decide(&at(r.arity(), x0, 0.0));
                for dx1 in [-0.1, -0.03, 0.04, 0.1] {
                    assert_eq!(r.decide(&at(r.arity(), x0, dx1)), base, "{name} x0={x0} dx1={dx1}");
                }
            }
        }
    }

    #[test]
    fn rule_json_round_trip() {
        let r = builtin("paper-eq8-m5").unwrap();
        let s = r.to_json().unwrap();
        assert!(s.contains("32.607*x0"));
        assert_eq!(DecisionRule::from_json(&s).unwrap(), r);
    }

    #[test]
    fn decay_rate_values() {
        assert!((decay_rate(0.9243, 0.1) - 25.809).abs() < 0.01);
        assert!((decay_rate(0.6062, 0.1) - 9.32).abs() < 0.01);
        assert!((decay_rate(1.0 - (-1f64).exp(), 0.1) - 10.0).abs() < 1e-12);
        assert!(decay_rate(1.0, 0.1).is_infinite());
    }

    #[test]
    fn decay_rates_from_data() {
        let mut inputs = vec![at(10, 0.6, 0.2), at(10, 0.62, 0.2)];
        inputs.push(at(10, 1.0, 0.0));
        inputs.push(at(10, 0.9, 0.05));
        let d = Dataset::new(inputs, vec![0, 0, 1, 1]).unwrap();
        let f = fit_decay_rates(&d).unwrap();
        assert!((f.p0[0] - 0.61).abs() < 1e-12 && (f.p0[1] - 0.95).abs() < 1e-12);
        assert!(f.lambda[1] > f.lambda[0]);
        assert!(!f.degenerate[0] && !f.degenerate[1]);
        let d = Dataset::new(vec![at(10, 0.5, 0.0), at(10, 1.0, 0.0)], vec![0, 1]).unwrap();
        assert!(fit_decay_rates(&d).unwrap().degenerate[1]);
    }

    #[test]
    fn snap_linear_edge() {
        let mut m = KanModel::detector(3, 1).unwrap();
        m.zero_all();
        // silu is not linear, so drive only the spline part: on a uniform
        // cubic grid, coefficients linear in the index give a linear curve.
        for (q, slope) in [(0usize, -2.0), (1, 3.0)] {
            let e = m.layers[0].edge_mut(q, 0);
            e.spline_scale = 1.0;
            e.coeffs = (0..6).map(|i| slope * (i as f64 - 1.0) / 3.0 + 0.5).collect();
        }
        m.layers[0].active = vec![true, false, false, true, false, false];
        let rule = snap(&m).unwrap();
        assert_eq!(rule.h0.terms.len(), 1);
        let t = &rule.h0.terms[0];
        assert_eq!(t.tag, FnTag::Linear);
        assert!(t.r2 >= 0.999);
        assert!((t.c + 2.0).abs() < 1e-9 && (rule.h1.terms[0].c - 3.0).abs() < 1e-9);
        assert!(rule.is_fully_symbolic());
        let deep = KanModel::new(&[3, 2, 2], 3, 3, 0).unwrap();
        assert!(snap(&deep).is_err());
    }
}
