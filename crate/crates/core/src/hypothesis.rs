//! Binary hypothesis test shared by learned networks and symbolic rules.

use serde::{Deserialize, Serialize};

/// `H0`: noise only. `H1`: a large target is present.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Hypothesis {
    H0,
    H1,
}

impl Hypothesis {
    pub fn from_label(label: usize) -> Self {
        if label == 0 {
            Self::H0
        } else {
            Self::H1
        }
    }

    pub fn label(self) -> usize {
        match self {
            Self::H0 => 0,
            Self::H1 => 1,
        }
    }
}

/// Anything producing a pair of test statistics `(h0, h1)` from an
/// `M`-bin histogram.
pub trait SegmentClassifier: Send + Sync {
    /// Histogram length the classifier expects.
    fn arity(&self) -> usize;

    /// `(h0, h1)`. Callers guarantee `x.len() == arity()`.
    fn statistics(&self, x: &[f64]) -> (f64, f64);

    fn margin(&self, x: &[f64]) -> f64 {
        let (h0, h1) = self.statistics(x);
        h1 - h0
    }

    /// `H1` iff `h1 > h0`; ties go to `H0`.
    fn decide(&self, x: &[f64]) -> Hypothesis {
        if self.margin(x) > 0.0 {
            Hypothesis::H1
        } else {
            Hypothesis::H0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Fixed(f64, f64);

    impl SegmentClassifier for Fixed {
        fn arity(&self) -> usize {
            1
        }
        fn statistics(&self, _: &[f64]) -> (f64, f64) {
            (self.0, self.1)
        }
    }

    #[test]
    fn ties_go_to_h0() {
        assert_eq!(Fixed(1.0, 1.0).decide(&[0.0]), Hypothesis::H0);
        assert_eq!(Fixed(1.0, 1.0 + 1e-12).decide(&[0.0]), Hypothesis::H1);
        assert_eq!(Fixed(0.0, -1.0).decide(&[0.0]), Hypothesis::H0);
    }

    #[test]
    fn label_round_trip() {
        for h in [Hypothesis::H0, Hypothesis::H1] {
            assert_eq!(Hypothesis::from_label(h.label()), h);
        }
    }
}
