use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::data::Dataset;
use super::spline::{silu, silu_prime, BSplineBasis, SplineEdge, MAX_INTERVALS};
use crate::hypothesis::{Hypothesis, SegmentClassifier};
use crate::linalg;
use crate::{Error, Result};

/// Samples per shard in the batch loss; shards are reduced in order so the
/// result does not depend on thread scheduling.
const SHARD: usize = 512;

/// Fully connected layer of spline edges. Edge `(q, r)` maps input `r` to
/// output `q` and lives at `edges[q * n_in + r]`. Every edge leaving input
/// `r` shares the same knot grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KanLayer {
    pub n_in: usize,
    pub n_out: usize,
    pub edges: Vec<SplineEdge>,
    /// Pruned edges are inactive and contribute nothing.
    pub active: Vec<bool>,
}

impl KanLayer {
    fn new<R: Rng>(n_in: usize, n_out: usize, grid_count: usize, degree: usize, rng: &mut R) -> Self {
        let basis = BSplineBasis::new(0.0, 1.0, grid_count, degree);
        let scale = 1.0 / (n_in as f64).sqrt();
        let edges = (0..n_in * n_out)
            .map(|_| {
                let mut e = SplineEdge::new(basis.clone());
                e.coeffs.iter_mut().for_each(|c| *c = rng.random_range(-0.1..0.1));
                e.base_scale = scale * rng.random_range(-1.0..1.0);
                e.spline_scale = scale;
                e
            })
            .collect();
        Self {
            n_in,
            n_out,
            edges,
            active: vec![true; n_in * n_out],
        }
    }

    pub fn edge(&self, q: usize, r: usize) -> &SplineEdge {
        &self.edges[q * self.n_in + r]
    }

    pub fn edge_mut(&mut self, q: usize, r: usize) -> &mut SplineEdge {
        &mut self.edges[q * self.n_in + r]
    }

    pub fn is_active(&self, q: usize, r: usize) -> bool {
        self.active[q * self.n_in + r]
    }

    pub fn forward(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (q, o) in out.iter_mut().enumerate() {
            for (r, &xr) in x.iter().enumerate() {
                let i = q * self.n_in + r;
                if self.active[i] {
                    *o += self.edges[i].eval(xr);
                }
            }
        }
    }

    /// Input grid `[lo, hi]` for node `r`.
    pub fn input_range(&self, r: usize) -> (f64, f64) {
        let b = &self.edges[r].basis;
        (b.lo, b.hi)
    }
}

/// Kolmogorov-Arnold network: a stack of [`KanLayer`]s whose last layer has
/// two outputs, read as the `(H0, H1)` scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KanModel {
    pub width: Vec<usize>,
    pub grid_count: usize,
    pub degree: usize,
    pub layers: Vec<KanLayer>,
}

impl KanModel {
    /// Randomly initialised network with layer sizes `width`.
    pub fn new(width: &[usize], grid_count: usize, degree: usize, seed: u64) -> Result<Self> {
        if width.len() < 2 || width.contains(&0) {
            return Err(Error::InvalidConfig(format!("bad width {width:?}")));
        }
        if grid_count == 0 || grid_count + 2 * degree > MAX_INTERVALS {
            return Err(Error::InvalidConfig(format!(
                "grid_count {grid_count} with degree {degree} unsupported"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = width
            .windows(2)
            .map(|w| KanLayer::new(w[0], w[1], grid_count, degree, &mut rng))
            .collect();
        Ok(Self {
            width: width.to_vec(),
            grid_count,
            degree,
            layers,
        })
    }

    /// `[m, 2]` with three grid intervals and cubic splines.
    pub fn detector(m: usize, seed: u64) -> Result<Self> {
        Self::new(&[m, 2], 3, 3, seed)
    }

    /// Sets every coefficient and scale to zero, so every edge outputs 0.
    pub fn zero_all(&mut self) {
        for e in self.layers.iter_mut().flat_map(|l| l.edges.iter_mut()) {
            e.coeffs.iter_mut().for_each(|c| *c = 0.0);
            e.base_scale = 0.0;
            e.spline_scale = 0.0;
        }
    }

    pub fn n_inputs(&self) -> usize {
        self.width[0]
    }

    pub fn n_outputs(&self) -> usize {
        *self.width.last().unwrap()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_inputs() {
            return Err(Error::dimension(self.n_inputs(), x.len()));
        }
        Ok(self.logits(x))
    }

    /// Forward pass without the length check (panics on mismatch).
    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_inputs());
        let mut cur = x.to_vec();
        for layer in &self.layers {
            let mut next = vec![0.0; layer.n_out];
            layer.forward(&cur, &mut next);
            cur = next;
        }
        cur
    }

    pub fn predict(&self, x: &[f64]) -> Hypothesis {
        self.decide(x)
    }

    /// Weighted share of samples whose argmax logit matches the label,
    /// ties counted as `H0`.
    pub fn accuracy(&self, data: &Dataset) -> f64 {
        if data.is_empty() {
            return f64::NAN;
        }
        let correct: usize = data
            .inputs
            .par_iter()
            .zip(&data.labels)
            .filter(|(x, &y)| self.decide(x).label() == y)
            .count();
        correct as f64 / data.len() as f64
    }

    pub fn n_params(&self) -> usize {
        self.layers
            .iter()
            .flat_map(|l| &l.edges)
            .map(SplineEdge::n_params)
            .sum()
    }

    /// Flattened parameters: per layer, per edge, `coeffs..., base, spline`.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.n_params());
        for e in self.layers.iter().flat_map(|l| &l.edges) {
            p.extend_from_slice(&e.coeffs);
            p.push(e.base_scale);
            p.push(e.spline_scale);
        }
        p
    }

    pub fn set_params(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.n_params());
        let mut i = 0;
        for e in self.layers.iter_mut().flat_map(|l| l.edges.iter_mut()) {
            let n = e.coeffs.len();
            e.coeffs.copy_from_slice(&p[i..i + n]);
            e.base_scale = p[i + n];
            e.spline_scale = p[i + n + 1];
            i += n + 2;
        }
    }

    fn param_offsets(&self) -> Vec<Vec<usize>> {
        let mut off = 0;
        self.layers
            .iter()
            .map(|l| {
                l.edges
                    .iter()
                    .map(|e| {
                        let o = off;
                        off += e.n_params();
                        o
                    })
                    .collect()
            })
            .collect()
    }

    /// Activations entering each layer, `[layer][sample][node]`.
    pub fn layer_inputs(&self, data: &Dataset) -> Vec<Vec<Vec<f64>>> {
        let mut acts = vec![data.inputs.clone()];
        for layer in &self.layers[..self.layers.len() - 1] {
            let next = acts
                .last()
                .unwrap()
                .par_iter()
                .map(|x| {
                    let mut y = vec![0.0; layer.n_out];
                    layer.forward(x, &mut y);
                    y
                })
                .collect();
            acts.push(next);
        }
        acts
    }

    /// Mean `|phi|` of every edge over `data`, `[layer][edge]`. Inactive
    /// edges score 0.
    pub fn edge_scores(&self, data: &Dataset) -> Vec<Vec<f64>> {
        let acts = self.layer_inputs(data);
        let n = data.len().max(1) as f64;
        self.layers
            .iter()
            .zip(&acts)
            .map(|(layer, xs)| {
                (0..layer.edges.len())
                    .map(|i| {
                        if !layer.active[i] {
                            return 0.0;
                        }
                        let r = i % layer.n_in;
                        xs.iter().map(|x| layer.edges[i].eval(x[r]).abs()).sum::<f64>() / n
                    })
                    .collect()
            })
            .collect()
    }

    /// Weighted softmax cross-entropy plus `l1` times the summed mean `|phi|`
    /// of active edges.
    pub fn loss(&self, data: &Dataset, l1: f64) -> f64 {
        self.loss_and_grad(data, l1).0
    }

    /// Loss and its gradient with respect to [`params`](Self::params).
    pub fn loss_and_grad(&self, data: &Dataset, l1: f64) -> (f64, Vec<f64>) {
        let offsets = self.param_offsets();
        let total_w: f64 = data.weights.iter().sum();
        let w_norm = if total_w > 0.0 { 1.0 / total_w } else { 0.0 };
        let l1_norm = l1 / data.len().max(1) as f64;
        let shards: Vec<(f64, Vec<f64>)> = (0..data.len())
            .collect::<Vec<_>>()
            .par_chunks(SHARD)
            .map(|idx| {
                let mut grad = vec![0.0; self.n_params()];
                let mut loss = 0.0;
                for &s in idx {
                    loss += self.backprop_sample(
                        &data.inputs[s],
                        data.labels[s],
                        data.weights[s] * w_norm,
                        l1_norm,
                        &offsets,
                        &mut grad,
                    );
                }
                (loss, grad)
            })
            .collect();
        let mut grad = vec![0.0; self.n_params()];
        let mut loss = 0.0;
        for (l, g) in shards {
            loss += l;
            grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
        }
        (loss, grad)
    }

    fn backprop_sample(
        &self,
        x: &[f64],
        label: usize,
        weight: f64,
        l1: f64,
        offsets: &[Vec<usize>],
        grad: &mut [f64],
    ) -> f64 {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        for layer in &self.layers {
            let mut y = vec![0.0; layer.n_out];
            layer.forward(acts.last().unwrap(), &mut y);
            acts.push(y);
        }
        let logits = acts.last().unwrap();
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
        let mut loss = weight * (lse - logits[label]);
        let mut delta: Vec<f64> = logits
            .iter()
            .enumerate()
            .map(|(q, z)| weight * ((z - lse).exp() - f64::from(q == label)))
            .collect();

        let mut v = [0.0; MAX_INTERVALS];
        let mut d = [0.0; MAX_INTERVALS];
        for (li, layer) in self.layers.iter().enumerate().rev() {
            let input = &acts[li];
            let mut delta_in = vec![0.0; layer.n_in];
            for (r, &xr) in input.iter().enumerate() {
                let sx = silu(xr);
                let sdx = silu_prime(xr);
                let mut basis_ready = false;
                for q in 0..layer.n_out {
                    let i = q * layer.n_in + r;
                    if !layer.active[i] {
                        continue;
                    }
                    let e = &layer.edges[i];
                    if !basis_ready {
                        e.basis.eval(xr, &mut v, &mut d);
                        basis_ready = true;
                    }
                    let nb = e.coeffs.len();
                    let s: f64 = v[..nb].iter().zip(&e.coeffs).map(|(b, c)| b * c).sum();
                    let ds: f64 = d[..nb].iter().zip(&e.coeffs).map(|(b, c)| b * c).sum();
                    let phi = e.base_scale * sx + e.spline_scale * s;
                    let dphi = e.base_scale * sdx + e.spline_scale * ds;
                    loss += l1 * phi.abs();
                    let g = delta[q] + l1 * sign(phi);
                    let o = offsets[li][i];
                    for (gc, b) in grad[o..o + nb].iter_mut().zip(&v[..nb]) {
                        *gc += g * e.spline_scale * b;
                    }
                    grad[o + nb] += g * sx;
                    grad[o + nb + 1] += g * s;
                    delta_in[r] += g * dphi;
                }
            }
            delta = delta_in;
        }
        loss
    }

    /// Re-centres every knot grid on the observed range of its input over
    /// `data` and refits the coefficients so each spline keeps its shape
    /// there (least squares on the observed inputs plus a uniform sweep).
    pub fn adapt_grids(&mut self, data: &Dataset) {
        const MAX_FIT_POINTS: usize = 2048;
        const SWEEP: usize = 64;
        for li in 0..self.layers.len() {
            let acts = self.layer_inputs(data).swap_remove(li);
            let layer = &mut self.layers[li];
            let stride = (acts.len() / MAX_FIT_POINTS).max(1);
            for r in 0..layer.n_in {
                let obs: Vec<f64> = acts.iter().step_by(stride).map(|x| x[r]).collect();
                if obs.is_empty() {
                    continue;
                }
                let lo = obs.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = obs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let new_basis = BSplineBasis::new(lo, hi, self.grid_count, self.degree);
                if new_basis == layer.edges[r].basis {
                    continue;
                }
                let mut pts = obs;
                pts.extend((0..SWEEP).map(|j| new_basis.lo + (new_basis.hi - new_basis.lo) * j as f64 / (SWEEP - 1) as f64));
                let nb = new_basis.len();
                let mut design = Vec::with_capacity(pts.len());
                let mut dv = [0.0; MAX_INTERVALS];
                for &p in &pts {
                    let mut row = vec![0.0; nb];
                    new_basis.eval(p, &mut row, &mut dv);
                    design.push(row);
                }
                for q in 0..layer.n_out {
                    let e = layer.edge_mut(q, r);
                    let y: Vec<f64> = pts.iter().map(|&p| e.spline(p)).collect();
                    let fitted = linalg::least_squares(design.iter().map(Vec::as_slice), &y, nb, 1e-10);
                    e.basis = new_basis.clone();
                    if let Some(c) = fitted {
                        e.coeffs = c;
                    }
                }
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(s)?;
        m.check()?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Structural consistency of a deserialised model.
    pub fn check(&self) -> Result<()> {
        if self.width.len() != self.layers.len() + 1 {
            return Err(Error::Format("width and layer count disagree".into()));
        }
        for (l, w) in self.layers.iter().zip(self.width.windows(2)) {
            let n = w[0] * w[1];
            if l.n_in != w[0] || l.n_out != w[1] || l.edges.len() != n || l.active.len() != n {
                return Err(Error::Format("layer shape disagrees with width".into()));
            }
            for e in &l.edges {
                if e.coeffs.len() != e.basis.len() || e.basis.knots.len() != e.basis.grid_count + 2 * e.basis.degree + 1
                {
                    return Err(Error::Format("edge coefficient count disagrees with its grid".into()));
                }
            }
        }
        Ok(())
    }

    pub fn active_edge_count(&self) -> usize {
        self.layers.iter().flat_map(|l| &l.active).filter(|&&a| a).count()
    }

    /// Inputs of the first layer with at least one active edge.
    pub fn used_inputs(&self) -> Vec<usize> {
        let l = &self.layers[0];
        (0..l.n_in)
            .filter(|&r| (0..l.n_out).any(|q| l.is_active(q, r)))
            .collect()
    }
}

#[inline]
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl SegmentClassifier for KanModel {
    fn arity(&self) -> usize {
        self.n_inputs()
    }

    fn statistics(&self, x: &[f64]) -> (f64, f64) {
        let z = self.logits(x);
        (z[0], z[1])
    }
}
