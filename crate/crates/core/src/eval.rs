//! Anomaly scores and ranking metrics.

use std::cmp::Ordering;

use ndarray::{Array1, ArrayView2};

use crate::error::{Result, RhoError};
use crate::graph::Graph;
use crate::model::{self, ForwardState, ModelConfig, ModelParams};

/// Score of every node: mean squared distance of its two view
/// representations to their centers.
pub fn score_nodes(state: &ForwardState) -> Array1<f64> {
    let n = state.h_ccr.nrows();
    Array1::from_shape_fn(n, |i| {
        let dc: f64 = (&state.h_ccr.row(i) - &state.c_ccr).mapv(|v| v * v).sum();
        let dv: f64 = (&state.h_cwr.row(i) - &state.c_cwr).mapv(|v| v * v).sum();
        0.5 * (dc + dv)
    })
}

/// Forward pass followed by [`score_nodes`].
pub fn score(graph: &Graph, params: &ModelParams, x: ArrayView2<'_, f64>, cfg: &ModelConfig) -> Result<Array1<f64>> {
    let state = model::forward(graph, params, x, cfg)?;
    let scores = score_nodes(&state);
    if !scores.iter().all(|s| s.is_finite()) {
        return Err(RhoError::NonFinite("anomaly scores".into()));
    }
    Ok(scores)
}

fn check(scores: &[f64], labels: &[u8]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(RhoError::DimensionMismatch {
            context: "scores vs labels",
            expected: labels.len(),
            actual: scores.len(),
        });
    }
    if !scores.iter().all(|s| s.is_finite()) {
        return Err(RhoError::NonFinite("scores".into()));
    }
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 {
        return Err(RhoError::UndefinedMetric("no anomalous nodes among the evaluated nodes"));
    }
    if neg == 0 {
        return Err(RhoError::UndefinedMetric("no normal nodes among the evaluated nodes"));
    }
    Ok((pos, neg))
}

/// Area under the ROC curve, ties counted as one half (midrank).
pub fn auroc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let (pos, neg) = check(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += midrank * order[i..=j].iter().filter(|&&k| labels[k] == 1).count() as f64;
        i = j + 1;
    }
    let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos as f64 * neg as f64))
}

/// Average precision: mean of the precision at each anomaly's rank, scores
/// sorted descending with ties kept in input order.
pub fn auprc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let (pos, _) = check(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(Ordering::Equal));
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, &k) in order.iter().enumerate() {
        if labels[k] == 1 {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(sum / pos as f64)
}

/// AUROC and AUPRC restricted to `nodes`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub auroc: f64,
    pub auprc: f64,
}

pub fn metrics_on(scores: &Array1<f64>, labels: &[u8], nodes: &[usize]) -> Result<Metrics> {
    let s: Vec<f64> = nodes.iter().map(|&v| scores[v]).collect();
    let l: Vec<u8> = nodes.iter().map(|&v| labels[v]).collect();
    Ok(Metrics {
        auroc: auroc(&s, &l)?,
        auprc: auprc(&s, &l)?,
    })
}
