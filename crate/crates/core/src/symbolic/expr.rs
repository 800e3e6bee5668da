use std::fmt;

use serde::{Deserialize, Serialize};

use crate::hypothesis::{Hypothesis, SegmentClassifier};
use crate::kan::silu;
use crate::{Error, Result};

/// Library functions, in increasing order of complexity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FnTag {
    Const,
    Linear,
    Quadratic,
    Exp,
    Silu,
    /// Non-symbolic fallback: the learned curve kept as samples.
    Spline,
}

impl FnTag {
    pub const LIBRARY: [FnTag; 5] = [FnTag::Const, FnTag::Linear, FnTag::Quadratic, FnTag::Exp, FnTag::Silu];

    pub fn apply(self, u: f64) -> f64 {
        match self {
            FnTag::Const | FnTag::Spline => 0.0,
            FnTag::Linear => u,
            FnTag::Quadratic => u * u,
            FnTag::Exp => u.exp(),
            FnTag::Silu => silu(u),
        }
    }
}

/// Uniform samples of a curve on `[lo, hi]`, interpolated linearly and
/// extended linearly from the end segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledCurve {
    pub lo: f64,
    pub hi: f64,
    pub values: Vec<f64>,
}

impl SampledCurve {
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.values.len();
        if n == 1 {
            return self.values[0];
        }
        let step = (self.hi - self.lo) / (n - 1) as f64;
        let pos = (x - self.lo) / step;
        let i = (pos.floor().max(0.0) as usize).min(n - 2);
        let t = pos - i as f64;
        self.values[i] * (1.0 - t) + self.values[i + 1] * t
    }
}

/// One univariate term `c * f(a * x_input + b) + d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub input: usize,
    pub tag: FnTag,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    /// Goodness of the best library fit to the learned edge, in `[0, 1]`.
    pub r2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curve: Option<SampledCurve>,
}

impl Term {
    /// `c * x_input + d`.
    pub fn linear(input: usize, c: f64, d: f64) -> Self {
        Self {
            input,
            tag: FnTag::Linear,
            a: 1.0,
            b: 0.0,
            c,
            d,
            r2: 1.0,
            curve: None,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let xi = x[self.input];
        match (&self.tag, &self.curve) {
            (FnTag::Spline, Some(curve)) => curve.eval(xi),
            (FnTag::Spline, None) => self.d,
            (FnTag::Const, _) => self.d,
            (tag, _) => self.c * tag.apply(self.a * xi + self.b) + self.d,
        }
    }

    pub fn is_symbolic(&self) -> bool {
        self.tag != FnTag::Spline
    }
}

/// Sum of univariate terms over an `arity`-long input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolicExpr {
    pub arity: usize,
    pub terms: Vec<Term>,
}

impl SymbolicExpr {
    pub fn new(arity: usize, terms: Vec<Term>) -> Result<Self> {
        if let Some(t) = terms.iter().find(|t| t.input >= arity) {
            return Err(Error::InvalidArgument(format!(
                "term uses x{} but the expression has {arity} inputs",
                t.input
            )));
        }
        Ok(Self { arity, terms })
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|t| t.eval(x)).sum()
    }

    /// Inputs referenced by at least one term.
    pub fn inputs(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.terms.iter().map(|t| t.input).collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

fn num(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e5).contains(&a) {
        format!("{a:.3e}")
    } else {
        let s = format!("{a:.5}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        s.to_string()
    }
}

fn signed(out: &mut String, v: f64, body: &str) {
    let first = out.is_empty();
    match (first, v < 0.0) {
        (true, true) => out.push('-'),
        (true, false) => {}
        (false, true) => out.push_str(" - "),
        (false, false) => out.push_str(" + "),
    }
    out.push_str(&num(v));
    out.push_str(body);
}

fn inner(a: f64, b: f64, input: usize) -> String {
    let mut s = String::new();
    if a == 1.0 {
        s.push_str(&format!("x{input}"));
    } else {
        signed(&mut s, a, &format!("*x{input}"));
    }
    if b != 0.0 {
        signed(&mut s, b, "");
    }
    s
}

/// Renders e.g. `-10.288*x0 - 1.14e-6*x1 + 7.91`; constants are merged
/// into one trailing term.
impl fmt::Display for SymbolicExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        let mut constant = 0.0;
        for t in &self.terms {
            match t.tag {
                FnTag::Const => constant += t.d,
                FnTag::Spline => {
                    if !out.is_empty() {
                        out.push_str(" + ");
                    }
                    out.push_str(&format!("spline(x{})", t.input));
                }
                FnTag::Linear => {
                    signed(&mut out, t.c * t.a, &format!("*x{}", t.input));
                    constant += t.c * t.b + t.d;
                }
                tag => {
                    let name = match tag {
                        FnTag::Quadratic => "sq",
                        FnTag::Exp => "exp",
                        _ => "silu",
                    };
                    signed(&mut out, t.c, &format!("*{name}({})", inner(t.a, t.b, t.input)));
                    constant += t.d;
                }
            }
        }
        if constant != 0.0 || out.is_empty() {
            signed(&mut out, constant, "");
        }
        f.write_str(&out)
    }
}

/// Decide `H1` iff `h1(x) > h0(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRule {
    pub name: String,
    pub h0: SymbolicExpr,
    pub h1: SymbolicExpr,
}

/// Outcome of evaluating a rule on one histogram.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuleOutcome {
    pub hypothesis: Hypothesis,
    pub h0: f64,
    pub h1: f64,
    /// `h1 - h0`.
    pub margin: f64,
}

/// Serialized form: readable expression strings next to the parameters.
#[derive(Serialize, Deserialize)]
struct RuleFile {
    name: String,
    h0_text: String,
    h1_text: String,
    h0: SymbolicExpr,
    h1: SymbolicExpr,
}

impl DecisionRule {
    pub fn new(name: impl Into<String>, h0: SymbolicExpr, h1: SymbolicExpr) -> Result<Self> {
        if h0.arity != h1.arity {
            return Err(Error::dimension(h0.arity, h1.arity));
        }
        Ok(Self {
            name: name.into(),
            h0,
            h1,
        })
    }

    pub fn arity(&self) -> usize {
        self.h0.arity
    }

    pub fn eval(&self, x: &[f64]) -> Result<RuleOutcome> {
        if x.len() != self.arity() {
            return Err(Error::dimension(self.arity(), x.len()));
        }
        let (h0, h1) = self.statistics(x);
        Ok(RuleOutcome {
            hypothesis: self.decide(x),
            h0,
            h1,
            margin: h1 - h0,
        })
    }

    /// True when every term is a library function.
    pub fn is_fully_symbolic(&self) -> bool {
        self.h0.terms.iter().chain(&self.h1.terms).all(Term::is_symbolic)
    }

    /// Copy with every input except those in `keep` pinned to zero.
    pub fn restricted_input(&self, x: &[f64], keep: &[usize]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(i, &v)| if keep.contains(&i) { v } else { 0.0 })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let file = RuleFile {
            name: self.name.clone(),
            h0_text: self.h0.to_string(),
            h1_text: self.h1.to_string(),
            h0: self.h0.clone(),
            h1: self.h1.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: RuleFile = serde_json::from_str(s)?;
        let h0 = SymbolicExpr::new(f.h0.arity, f.h0.terms)?;
        let h1 = SymbolicExpr::new(f.h1.arity, f.h1.terms)?;
        Self::new(f.name, h0, h1)
    }
}

impl fmt::Display for DecisionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "h0(x) = {}", self.h0)?;
        writeln!(f, "h1(x) = {}", self.h1)?;
        write!(f, "decide H1 if h1(x) > h0(x), else H0")
    }
}

impl SegmentClassifier for DecisionRule {
    fn arity(&self) -> usize {
        self.h0.arity
    }

    fn statistics(&self, x: &[f64]) -> (f64, f64) {
        (self.h0.eval(x), self.h1.eval(x))
    }
}

/// Evaluates `rule` on `x`, rejecting a length mismatch.
pub fn eval_rule(rule: &DecisionRule, x: &[f64]) -> Result<RuleOutcome> {
    rule.eval(x)
}
