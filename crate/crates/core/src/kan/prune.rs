use serde::{Deserialize, Serialize};

use super::data::Dataset;
use super::model::KanModel;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PruneOptions {
    pub node_threshold: f64,
    pub edge_threshold: f64,
}

impl Default for PruneOptions {
    fn default() -> Self {
        Self {
            node_threshold: 0.01,
            edge_threshold: 0.03,
        }
    }
}

/// `(layer, output node, input node)`.
pub type EdgeId = (usize, usize, usize);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneReport {
    /// Mean `|phi|` per edge relative to the largest in its layer.
    pub relative_scores: Vec<Vec<f64>>,
    pub removed_edges: Vec<EdgeId>,
    /// `(layer, input node)` left without any active outgoing edge.
    pub removed_nodes: Vec<(usize, usize)>,
    pub accuracy_before: f64,
    pub accuracy_after: f64,
}

/// Deactivates weak nodes and edges. An edge is scored by its mean `|phi|`
/// over `data` divided by the largest score in its layer. An input node
/// whose best edge scores below `node_threshold` loses all its edges
/// (including the edges feeding it, for hidden nodes); remaining edges
/// scoring below `edge_threshold` are removed individually.
pub fn prune(model: &KanModel, data: &Dataset, opts: &PruneOptions) -> Result<(KanModel, PruneReport)> {
    if data.arity() != model.n_inputs() {
        return Err(Error::dimension(model.n_inputs(), data.arity()));
    }
    let scores = model.edge_scores(data);
    let relative: Vec<Vec<f64>> = scores
        .iter()
        .map(|layer| {
            let max = layer.iter().cloned().fold(0.0, f64::max);
            layer.iter().map(|s| if max > 0.0 { s / max } else { 0.0 }).collect()
        })
        .collect();

    let mut pruned = model.clone();
    let mut removed_edges = Vec::new();
    for (li, rel) in relative.iter().enumerate() {
        let (n_in, n_out) = (pruned.layers[li].n_in, pruned.layers[li].n_out);
        for r in 0..n_in {
            let node_score = (0..n_out).map(|q| rel[q * n_in + r]).fold(0.0, f64::max);
            let drop_node = node_score < opts.node_threshold;
            if drop_node && li > 0 {
                let prev = &mut pruned.layers[li - 1];
                for r2 in 0..prev.n_in {
                    let i = r * prev.n_in + r2;
                    if prev.active[i] {
                        prev.active[i] = false;
                        removed_edges.push((li - 1, r, r2));
                    }
                }
            }
            for q in 0..n_out {
                let i = q * n_in + r;
                if pruned.layers[li].active[i] && (drop_node || rel[i] < opts.edge_threshold) {
                    pruned.layers[li].active[i] = false;
                    removed_edges.push((li, q, r));
                }
            }
        }
    }
    if pruned.active_edge_count() == 0 {
        return Err(Error::PrunedEverything);
    }
    removed_edges.sort_unstable();
    removed_edges.dedup();

    let mut removed_nodes = Vec::new();
    for (li, layer) in pruned.layers.iter().enumerate() {
        for r in 0..layer.n_in {
            let had = (0..layer.n_out).any(|q| model.layers[li].is_active(q, r));
            let has = (0..layer.n_out).any(|q| layer.is_active(q, r));
            if had && !has {
                removed_nodes.push((li, r));
            }
        }
    }

    let report = PruneReport {
        relative_scores: relative,
        removed_edges,
        removed_nodes,
        accuracy_before: model.accuracy(data),
        accuracy_after: pruned.accuracy(data),
    };
    Ok((pruned, report))
}
