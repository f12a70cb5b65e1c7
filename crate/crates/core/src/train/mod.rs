//! Training: losses, gradients, the optimizer and the epoch loop.

pub mod adam;
pub mod grad;
pub mod loss;

use ndarray::ArrayView2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RhoError};
use crate::graph::Graph;
use crate::model::{self, ModelConfig, ModelParams};
use crate::seed;

pub use adam::OptimizerState;
pub use grad::{backward, evaluate, step_objective, GradientSet, StepInputs};
pub use loss::{loss_gna, loss_one_class, total_loss, LossBreakdown};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Keep the filter coefficients at their initial value.
    pub freeze_filters: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 5e-3,
            epochs: 200,
            freeze_filters: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(RhoError::InvalidConfig(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// Per-epoch means of the loss terms over that epoch's steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub l_ccr: f64,
    pub l_cwr: f64,
    pub l_gna: f64,
    pub total: f64,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub params: ModelParams,
    pub log: Vec<EpochLog>,
}

/// Splits the nodes into alignment batches. `batch_size` 0 or at least `n`
/// means one full-graph batch in node order; otherwise a shuffled partition,
/// with a trailing batch of fewer than two nodes folded into its neighbor.
pub fn partition_batches(n: usize, batch_size: usize, rng: &mut impl rand::Rng) -> Vec<Vec<usize>> {
    if batch_size == 0 || batch_size >= n {
        return vec![(0..n).collect()];
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut batches: Vec<Vec<usize>> = order.chunks(batch_size).map(<[usize]>::to_vec).collect();
    if batches.len() > 1 && batches.last().is_some_and(|b| b.len() < 2) {
        let tail = batches.pop().expect("non-empty");
        batches.last_mut().expect("non-empty").extend(tail);
    }
    batches
}

/// Trains from a fresh initialization.
pub fn fit(
    graph: &Graph,
    features: ArrayView2<'_, f64>,
    labeled: &[usize],
    cfg: &ModelConfig,
    train: &TrainConfig,
) -> Result<FitResult> {
    cfg.validate()?;
    train.validate()?;
    if features.ncols() != cfg.input_dim {
        return Err(RhoError::DimensionMismatch {
            context: "feature width vs input_dim",
            expected: cfg.input_dim,
            actual: features.ncols(),
        });
    }
    let params = ModelParams::init(cfg);
    fit_from(graph, features, labeled, cfg, train, params)
}

/// Trains starting from `params`.
pub fn fit_from(
    graph: &Graph,
    features: ArrayView2<'_, f64>,
    labeled: &[usize],
    cfg: &ModelConfig,
    train: &TrainConfig,
    mut params: ModelParams,
) -> Result<FitResult> {
    params.check_shapes(cfg)?;
    let n = graph.num_nodes();
    let mut optimizer = OptimizerState::new(&params, train.learning_rate);
    let mut batch_rng = seed::rng_for(cfg.seed, "batches");
    let mut log = Vec::with_capacity(train.epochs);

    for epoch in 1..=train.epochs {
        let diverged = |e: RhoError| match e {
            RhoError::NonFinite(detail) => RhoError::Diverged { epoch, detail },
            other => other,
        };
        let state = model::forward(graph, &params, features, cfg).map_err(diverged)?;
        let batches = partition_batches(n, cfg.batch_size, &mut batch_rng);
        let weight = 1.0 / batches.len() as f64;
        let (mut s_ccr, mut s_cwr, mut s_gna) = (0.0, 0.0, 0.0);
        for batch in &batches {
            let inputs = StepInputs {
                graph,
                features,
                labeled,
                batch,
                c_ccr: &state.c_ccr,
                c_cwr: &state.c_cwr,
                one_class_weight: weight,
            };
            let (breakdown, mut grads) = backward(&params, cfg, &inputs).map_err(diverged)?;
            if train.freeze_filters {
                grads.zero_filter_coefficients();
            }
            optimizer.step(&mut params, &grads);
            if !params.is_finite() {
                return Err(RhoError::Diverged {
                    epoch,
                    detail: "parameters became non-finite".into(),
                });
            }
            s_ccr += breakdown.l_ccr;
            s_cwr += breakdown.l_cwr;
            s_gna += breakdown.l_gna;
        }
        let steps = batches.len() as f64;
        let mean = total_loss(s_ccr / steps, s_cwr / steps, s_gna / steps, cfg.alpha);
        log.push(EpochLog {
            epoch,
            l_ccr: mean.l_ccr,
            l_cwr: mean.l_cwr,
            l_gna: mean.l_gna,
            total: mean.total,
        });
    }
    Ok(FitResult { params, log })
}
