use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Labelled histogram features with per-sample loss weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub inputs: Vec<Vec<f64>>,
    /// 0 for `H0`, 1 for `H1`.
    pub labels: Vec<usize>,
    pub weights: Vec<f64>,
}

impl Dataset {
    pub fn new(inputs: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self> {
        let weights = vec![1.0; labels.len()];
        Self::with_weights(inputs, labels, weights)
    }

    pub fn with_weights(inputs: Vec<Vec<f64>>, labels: Vec<usize>, weights: Vec<f64>) -> Result<Self> {
        if inputs.len() != labels.len() || inputs.len() != weights.len() {
            return Err(Error::Data(format!(
                "{} inputs, {} labels, {} weights",
                inputs.len(),
                labels.len(),
                weights.len()
            )));
        }
        if let Some(first) = inputs.first() {
            let m = first.len();
            if m == 0 {
                return Err(Error::Data("empty feature vectors".into()));
            }
            if let Some(bad) = inputs.iter().position(|x| x.len() != m) {
                return Err(Error::dimension(m, inputs[bad].len()));
            }
        }
        if inputs.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite feature".into()));
        }
        if labels.iter().any(|&l| l > 1) {
            return Err(Error::Data("labels must be 0 or 1".into()));
        }
        if weights.iter().any(|&w| !(w.is_finite() && w >= 0.0)) {
            return Err(Error::Data("weights must be finite and non-negative".into()));
        }
        Ok(Self {
            inputs,
            labels,
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Feature length, 0 when empty.
    pub fn arity(&self) -> usize {
        self.inputs.first().map_or(0, Vec::len)
    }

    /// `[n_h0, n_h1]`.
    pub fn class_counts(&self) -> [usize; 2] {
        let h1 = self.labels.iter().filter(|&&l| l == 1).count();
        [self.len() - h1, h1]
    }

    pub fn check_trainable(&self) -> Result<()> {
        let [h0, h1] = self.class_counts();
        if h0 == 0 || h1 == 0 {
            return Err(Error::Data(format!("both classes required, got {h0} H0 and {h1} H1")));
        }
        Ok(())
    }

    /// Copy with every weight multiplied by `factor`.
    pub fn scaled_weights(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.weights.iter_mut().for_each(|w| *w *= factor);
        out
    }

    pub fn concat(&self, other: &Dataset) -> Result<Self> {
        if !self.is_empty() && !other.is_empty() && self.arity() != other.arity() {
            return Err(Error::dimension(self.arity(), other.arity()));
        }
        let mut out = self.clone();
        out.inputs.extend(other.inputs.iter().cloned());
        out.labels.extend(&other.labels);
        out.weights.extend(&other.weights);
        Ok(out)
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            inputs: idx.iter().map(|&i| self.inputs[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            weights: idx.iter().map(|&i| self.weights[i]).collect(),
        }
    }

    /// Shuffled split; the first part holds `round(frac * len)` samples.
    pub fn split<R: Rng + ?Sized>(&self, frac: f64, rng: &mut R) -> (Self, Self) {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(rng);
        let k = ((frac.clamp(0.0, 1.0) * self.len() as f64).round() as usize).min(self.len());
        (self.subset(&idx[..k]), self.subset(&idx[k..]))
    }

    /// Class-balanced draw of `per_class` samples of each label.
    pub fn balanced_sample<R: Rng + ?Sized>(&self, per_class: usize, rng: &mut R) -> Result<Self> {
        let mut picked = Vec::with_capacity(2 * per_class);
        for class in 0..2 {
            let mut idx: Vec<usize> = (0..self.len()).filter(|&i| self.labels[i] == class).collect();
            if idx.len() < per_class {
                return Err(Error::Data(format!("only {} samples of class {class}", idx.len())));
            }
            idx.shuffle(rng);
            picked.extend_from_slice(&idx[..per_class]);
        }
        Ok(self.subset(&picked))
    }
}
