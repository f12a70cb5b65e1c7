//! Reverse-mode gradients of the training objective.
//!
//! The forward pass is replayed while keeping every intermediate; the adjoint
//! sweep then walks the layers backwards. The Laplacian is symmetric, so its
//! adjoint is another application of the same sparse operator.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use super::loss::{gna_value_and_grad, loss_one_class, total_loss, LossBreakdown};
use crate::error::{Result, RhoError};
use crate::graph::{Graph, SparseSymOp};
use crate::model::{self, Activation, CwrFormula, LayerTrace, Mlp, ModelConfig, ModelParams};

/// One gradient tensor per parameter, shaped like [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet(pub ModelParams);

impl GradientSet {
    pub fn params(&self) -> &ModelParams {
        &self.0
    }

    pub fn zero_filter_coefficients(&mut self) {
        self.0.ccr_k.fill(0.0);
        self.0.cwr_k.fill(0.0);
    }
}

/// Everything a single optimization step looks at.
#[derive(Debug, Clone, Copy)]
pub struct StepInputs<'a> {
    pub graph: &'a Graph,
    pub features: ArrayView2<'a, f64>,
    pub labeled: &'a [usize],
    /// Rows used by the alignment loss.
    pub batch: &'a [usize],
    /// Fixed cross-channel center (no gradient flows through it).
    pub c_ccr: &'a Array1<f64>,
    /// Fixed channel-wise center.
    pub c_cwr: &'a Array1<f64>,
    /// Multiplier on the one-class part of the step objective.
    pub one_class_weight: f64,
}

/// Step objective: `w * 0.5 (l_ccr + l_cwr) + alpha * l_gna`.
pub fn step_objective(breakdown: &LossBreakdown, cfg: &ModelConfig, one_class_weight: f64) -> f64 {
    one_class_weight * 0.5 * (breakdown.l_ccr + breakdown.l_cwr) + cfg.alpha * breakdown.l_gna
}

struct EncoderTrace {
    pre1: Array2<f64>,
    hidden: Array2<f64>,
    pre2: Array2<f64>,
    out: Array2<f64>,
}

fn trace_encoder(params: &ModelParams, x: ArrayView2<'_, f64>, act: Activation) -> Result<EncoderTrace> {
    if x.ncols() != params.input_dim() {
        return Err(RhoError::DimensionMismatch {
            context: "encoder input width",
            expected: params.input_dim(),
            actual: x.ncols(),
        });
    }
    let e = &params.encoder;
    let pre1 = x.dot(&e.w1) + &e.b1;
    let hidden = act.map(&pre1);
    let pre2 = hidden.dot(&e.w2) + &e.b2;
    let out = act.map(&pre2);
    Ok(EncoderTrace {
        pre1,
        hidden,
        pre2,
        out,
    })
}

struct HeadTrace {
    input: Array2<f64>,
    pre: Array2<f64>,
    hidden: Array2<f64>,
    out: Array2<f64>,
}

fn trace_head(head: &Mlp, input: Array2<f64>, act: Activation) -> HeadTrace {
    let pre = input.dot(&head.w1) + &head.b1;
    let hidden = act.map(&pre);
    let out = hidden.dot(&head.w2) + &head.b2;
    HeadTrace {
        input,
        pre,
        hidden,
        out,
    }
}

fn ensure_finite(name: &str, a: &Array2<f64>) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(RhoError::NonFinite(name.to_string()))
    }
}

fn act_backward(upstream: &Array2<f64>, pre: &Array2<f64>, act: Activation) -> Array2<f64> {
    let mut out = upstream.clone();
    out.zip_mut_with(pre, |g, &p| *g *= act.derivative(p));
    out
}

/// Backprop through a two-layer head; returns the gradient on its input rows.
fn head_backward(head: &Mlp, grad: &mut Mlp, trace: &HeadTrace, d_out: &Array2<f64>, act: Activation) -> Array2<f64> {
    grad.w2 += &trace.hidden.t().dot(d_out);
    grad.b2 += &d_out.sum_axis(Axis(0));
    let d_hidden = d_out.dot(&head.w2.t());
    let d_pre = act_backward(&d_hidden, &trace.pre, act);
    grad.w1 += &trace.input.t().dot(&d_pre);
    grad.b1 += &d_pre.sum_axis(Axis(0));
    d_pre.dot(&head.w1.t())
}

fn ccr_backward(
    op: &SparseSymOp<'_>,
    params: &ModelParams,
    grads: &mut ModelParams,
    layers: &[LayerTrace],
    mut d_h: Array2<f64>,
    act: Activation,
) -> Result<Array2<f64>> {
    for (t, layer) in layers.iter().enumerate().rev() {
        let d_pre = act_backward(&d_h, &layer.pre, act);
        grads.ccr_weights[t] += &layer.filtered.t().dot(&d_pre);
        let d_filtered = d_pre.dot(&params.ccr_weights[t].t());
        grads.ccr_k[t] -= (&layer.lap * &d_filtered).sum();
        let lap_grad = op.apply(d_filtered.view())?;
        d_h = d_filtered;
        d_h.scaled_add(-params.ccr_k[t], &lap_grad);
    }
    Ok(d_h)
}

fn cwr_backward(
    op: &SparseSymOp<'_>,
    params: &ModelParams,
    grads: &mut ModelParams,
    layers: &[LayerTrace],
    mut d_h: Array2<f64>,
    formula: CwrFormula,
    act: Activation,
) -> Result<Array2<f64>> {
    for (t, layer) in layers.iter().enumerate().rev() {
        let d_pre = act_backward(&d_h, &layer.pre, act);
        grads.cwr_weights[t] += &layer.filtered.t().dot(&d_pre);
        let d_filtered = d_pre.dot(&params.cwr_weights[t].t());
        let kt = params.cwr_k.row(t);
        match formula {
            CwrFormula::PerChannel => {
                // filtered = H - (L H) ⊙ K
                let dk = (&layer.lap * &d_filtered).sum_axis(Axis(0));
                let mut gk = grads.cwr_k.row_mut(t);
                gk -= &dk;
                let scaled = &d_filtered * &kt;
                d_h = &d_filtered - &op.apply(scaled.view())?;
            }
            CwrFormula::Hadamard => {
                // filtered = G - L G with G = H ⊙ K
                let d_g = &d_filtered - &op.apply(d_filtered.view())?;
                let dk = (&layer.input * &d_g).sum_axis(Axis(0));
                let mut gk = grads.cwr_k.row_mut(t);
                gk += &dk;
                d_h = &d_g * &kt;
            }
        }
    }
    Ok(d_h)
}

fn encoder_backward(params: &ModelParams, grads: &mut ModelParams, x: ArrayView2<'_, f64>, trace: &EncoderTrace, d_out: &Array2<f64>, act: Activation) {
    let e = &params.encoder;
    let g = &mut grads.encoder;
    let d_pre2 = act_backward(d_out, &trace.pre2, act);
    g.w2 += &trace.hidden.t().dot(&d_pre2);
    g.b2 += &d_pre2.sum_axis(Axis(0));
    let d_hidden = d_pre2.dot(&e.w2.t());
    let d_pre1 = act_backward(&d_hidden, &trace.pre1, act);
    g.w1 += &x.t().dot(&d_pre1);
    g.b1 += &d_pre1.sum_axis(Axis(0));
}

fn one_class_seed(h: &Array2<f64>, center: &Array1<f64>, labeled: &[usize], scale: f64) -> Array2<f64> {
    let mut d = Array2::zeros(h.raw_dim());
    let coef = 2.0 * scale / labeled.len() as f64;
    for &i in labeled {
        let mut row = d.row_mut(i);
        row += &((&h.row(i) - center) * coef);
    }
    d
}

fn validate_inputs(cfg: &ModelConfig, inputs: &StepInputs<'_>) -> Result<()> {
    let n = inputs.graph.num_nodes();
    if inputs.features.nrows() != n {
        return Err(RhoError::DimensionMismatch {
            context: "feature rows",
            expected: n,
            actual: inputs.features.nrows(),
        });
    }
    if inputs.labeled.is_empty() {
        return Err(RhoError::InvalidInput("no labeled nodes".into()));
    }
    if let Some(&bad) = inputs.labeled.iter().chain(inputs.batch).find(|&&v| v >= n) {
        return Err(RhoError::InvalidInput(format!("node {bad} outside graph of {n} nodes")));
    }
    if inputs.c_ccr.len() != cfg.hidden_dim || inputs.c_cwr.len() != cfg.hidden_dim {
        return Err(RhoError::DimensionMismatch {
            context: "center length",
            expected: cfg.hidden_dim,
            actual: inputs.c_ccr.len(),
        });
    }
    Ok(())
}

fn run(
    params: &ModelParams,
    cfg: &ModelConfig,
    inputs: &StepInputs<'_>,
    want_grad: bool,
) -> Result<(LossBreakdown, Option<GradientSet>)> {
    validate_inputs(cfg, inputs)?;
    let act = cfg.activation;
    let graph = inputs.graph;

    let enc = trace_encoder(params, inputs.features, act)?;
    ensure_finite("encoder output", &enc.out)?;
    let (h_ccr, ccr_layers) = model::trace_ccr(graph, params, enc.out.view(), act)?;
    ensure_finite("cross-channel representation", &h_ccr)?;
    let (h_cwr, cwr_layers) = model::trace_cwr(graph, params, enc.out.view(), cfg.cwr_formula, act)?;
    ensure_finite("channel-wise representation", &h_cwr)?;

    let l_ccr = loss_one_class(h_ccr.view(), inputs.c_ccr, inputs.labeled, &params.ccr_weights, cfg.weight_penalty)?;
    let l_cwr = loss_one_class(h_cwr.view(), inputs.c_cwr, inputs.labeled, &params.cwr_weights, cfg.weight_penalty)?;

    let head_c = trace_head(&params.head_ccr, h_ccr.select(Axis(0), inputs.batch), act);
    let head_v = trace_head(&params.head_cwr, h_cwr.select(Axis(0), inputs.batch), act);
    ensure_finite("cross-channel projection", &head_c.out)?;
    ensure_finite("channel-wise projection", &head_v.out)?;
    let gna_grad_needed = want_grad && cfg.alpha != 0.0;
    let (l_gna, gna_grads) = gna_value_and_grad(
        &head_c.out,
        &head_v.out,
        cfg.temperature,
        cfg.include_positive_in_denominator,
        gna_grad_needed,
    )?;

    let breakdown = total_loss(l_ccr, l_cwr, l_gna, cfg.alpha);
    if !breakdown.is_finite() {
        return Err(RhoError::NonFinite(format!("loss terms {breakdown:?}")));
    }
    if !want_grad {
        return Ok((breakdown, None));
    }

    let mut grads = params.zeros_like();
    let oc = 0.5 * inputs.one_class_weight;
    let mut d_ccr = one_class_seed(&h_ccr, inputs.c_ccr, inputs.labeled, oc);
    let mut d_cwr = one_class_seed(&h_cwr, inputs.c_cwr, inputs.labeled, oc);
    let penalty = 2.0 * oc * cfg.weight_penalty;
    for (g, w) in grads.ccr_weights.iter_mut().zip(&params.ccr_weights) {
        g.scaled_add(penalty, w);
    }
    for (g, w) in grads.cwr_weights.iter_mut().zip(&params.cwr_weights) {
        g.scaled_add(penalty, w);
    }

    if let Some((dz_c, dz_v)) = gna_grads {
        let dz_c = dz_c * cfg.alpha;
        let dz_v = dz_v * cfg.alpha;
        let dh_c = head_backward(&params.head_ccr, &mut grads.head_ccr, &head_c, &dz_c, act);
        let dh_v = head_backward(&params.head_cwr, &mut grads.head_cwr, &head_v, &dz_v, act);
        for (row, &node) in inputs.batch.iter().enumerate() {
            let mut r = d_ccr.row_mut(node);
            r += &dh_c.row(row);
            let mut r = d_cwr.row_mut(node);
            r += &dh_v.row(row);
        }
    }

    let op = graph.laplacian();
    let d_h0_ccr = ccr_backward(&op, params, &mut grads, &ccr_layers, d_ccr, act)?;
    let d_h0_cwr = cwr_backward(&op, params, &mut grads, &cwr_layers, d_cwr, cfg.cwr_formula, act)?;
    let d_h0 = d_h0_ccr + d_h0_cwr;
    encoder_backward(params, &mut grads, inputs.features, &enc, &d_h0, act);

    for t in grads.tensors() {
        if !t.data.iter().all(|v| v.is_finite()) {
            return Err(RhoError::NonFinite(format!("gradient of {}", t.name)));
        }
    }
    Ok((breakdown, Some(GradientSet(grads))))
}

/// Loss terms at `params` without gradients.
pub fn evaluate(params: &ModelParams, cfg: &ModelConfig, inputs: &StepInputs<'_>) -> Result<LossBreakdown> {
    run(params, cfg, inputs, false).map(|(b, _)| b)
}

/// Loss terms and exact gradients of [`step_objective`] for every parameter.
pub fn backward(params: &ModelParams, cfg: &ModelConfig, inputs: &StepInputs<'_>) -> Result<(LossBreakdown, GradientSet)> {
    let (b, g) = run(params, cfg, inputs, true)?;
    Ok((b, g.expect("gradients requested")))
}
