//! Trainable parameters and the forward computation.
//!
//! A shared two-layer encoder feeds two propagation views:
//!
//! * cross-channel: `H_t = act((I - k_t L) H_{t-1} W_t)` with one scalar per layer;
//! * channel-wise: each column `j` is filtered by its own `(I - K_{t,j} L)` before
//!   the layer weights (per-channel form), or `act((I - L)(H ⊙ K_t) W_t)` in the
//!   Hadamard form.
//!
//! Projection heads map both views into the space used by the alignment loss.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RhoError};
use crate::graph::Graph;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the pre-activation value.
    pub fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - pre.tanh().powi(2),
            Activation::Identity => 1.0,
        }
    }

    pub(crate) fn map(self, pre: &Array2<f64>) -> Array2<f64> {
        pre.mapv(|v| self.apply(v))
    }
}

/// How the channel-wise view combines per-channel filters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CwrFormula {
    /// Column `j` filtered by `(I - K_j L)`.
    #[default]
    PerChannel,
    /// `(I - L)(H ⊙ K)`.
    Hadamard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub layers: usize,
    pub temperature: f64,
    pub alpha: f64,
    pub weight_penalty: f64,
    /// GNA batch size; 0 means the whole graph.
    pub batch_size: usize,
    pub activation: Activation,
    pub cwr_formula: CwrFormula,
    pub include_positive_in_denominator: bool,
    /// Initial value of every frequency coefficient.
    pub filter_init: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            input_dim: 0,
            hidden_dim: 32,
            layers: 2,
            temperature: 0.5,
            alpha: 1.0,
            weight_penalty: 5e-5,
            batch_size: 512,
            activation: Activation::Relu,
            cwr_formula: CwrFormula::PerChannel,
            include_positive_in_denominator: false,
            filter_init: 0.5,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(RhoError::InvalidConfig(msg));
        if self.input_dim == 0 {
            return fail("input_dim must be at least 1".into());
        }
        if self.hidden_dim == 0 {
            return fail("hidden_dim must be at least 1".into());
        }
        if self.layers == 0 {
            return fail("layers must be at least 1".into());
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return fail(format!("temperature must be positive, got {}", self.temperature));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return fail(format!("alpha must lie in [0, 1], got {}", self.alpha));
        }
        if !(self.weight_penalty >= 0.0 && self.weight_penalty.is_finite()) {
            return fail(format!("weight_penalty must be non-negative, got {}", self.weight_penalty));
        }
        if self.batch_size == 1 {
            return fail("batch_size must be 0 (full graph) or at least 2".into());
        }
        if !self.filter_init.is_finite() {
            return fail("filter_init must be finite".into());
        }
        Ok(())
    }
}

/// Two-layer perceptron `W2 act(X W1 + b1) + b2`, optionally activated on output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

impl Mlp {
    fn init(input: usize, hidden: usize, output: usize, rng: &mut impl Rng) -> Self {
        Mlp {
            w1: uniform_fan_in(input, hidden, rng),
            b1: Array1::zeros(hidden),
            w2: uniform_fan_in(hidden, output, rng),
            b2: Array1::zeros(output),
        }
    }

    fn zeros_like(&self) -> Self {
        Mlp {
            w1: Array2::zeros(self.w1.raw_dim()),
            b1: Array1::zeros(self.b1.raw_dim()),
            w2: Array2::zeros(self.w2.raw_dim()),
            b2: Array1::zeros(self.b2.raw_dim()),
        }
    }
}

/// Weights drawn from `U(-sqrt(6 / fan_in), sqrt(6 / fan_in))`.
fn uniform_fan_in(fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Array2<f64> {
    let bound = (6.0 / fan_in as f64).sqrt();
    Array2::from_shape_simple_fn((fan_in, fan_out), || rng.random_range(-bound..bound))
}

/// All trainable tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub encoder: Mlp,
    pub ccr_weights: Vec<Array2<f64>>,
    pub cwr_weights: Vec<Array2<f64>>,
    /// Cross-channel coefficient per layer.
    pub ccr_k: Array1<f64>,
    /// Channel-wise coefficients, one row of length `hidden_dim` per layer.
    pub cwr_k: Array2<f64>,
    pub head_ccr: Mlp,
    pub head_cwr: Mlp,
}

/// A named view of one parameter tensor in row-major order.
pub struct NamedTensor<'a> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: &'a [f64],
}

impl ModelParams {
    pub fn init(cfg: &ModelConfig) -> Self {
        let mut rng = seed::rng_for(cfg.seed, "init");
        let (m, d, t) = (cfg.input_dim, cfg.hidden_dim, cfg.layers);
        let encoder = Mlp::init(m, d, d, &mut rng);
        let ccr_weights = (0..t).map(|_| uniform_fan_in(d, d, &mut rng)).collect();
        let cwr_weights = (0..t).map(|_| uniform_fan_in(d, d, &mut rng)).collect();
        let head_ccr = Mlp::init(d, d, d, &mut rng);
        let head_cwr = Mlp::init(d, d, d, &mut rng);
        ModelParams {
            encoder,
            ccr_weights,
            cwr_weights,
            ccr_k: Array1::from_elem(t, cfg.filter_init),
            cwr_k: Array2::from_elem((t, d), cfg.filter_init),
            head_ccr,
            head_cwr,
        }
    }

    pub fn zeros_like(&self) -> Self {
        ModelParams {
            encoder: self.encoder.zeros_like(),
            ccr_weights: self.ccr_weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            cwr_weights: self.cwr_weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            ccr_k: Array1::zeros(self.ccr_k.raw_dim()),
            cwr_k: Array2::zeros(self.cwr_k.raw_dim()),
            head_ccr: self.head_ccr.zeros_like(),
            head_cwr: self.head_cwr.zeros_like(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.encoder.w1.nrows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.encoder.w2.ncols()
    }

    pub fn layers(&self) -> usize {
        self.ccr_weights.len()
    }

    /// Every tensor with a stable name, in a fixed order.
    pub fn tensors(&self) -> Vec<NamedTensor<'_>> {
        let mut out = Vec::new();
        visit(self, &mut |name, shape, data| {
            out.push(NamedTensor {
                name,
                shape,
                data,
            })
        });
        out
    }

    /// Mutable slices in the same order as [`ModelParams::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out: Vec<(String, &mut [f64])> = Vec::new();
        macro_rules! mlp {
            ($prefix:expr, $m:expr) => {
                out.push((format!("{}.w1", $prefix), $m.w1.as_slice_mut().expect("layout")));
                out.push((format!("{}.b1", $prefix), $m.b1.as_slice_mut().expect("layout")));
                out.push((format!("{}.w2", $prefix), $m.w2.as_slice_mut().expect("layout")));
                out.push((format!("{}.b2", $prefix), $m.b2.as_slice_mut().expect("layout")));
            };
        }
        let ModelParams {
            encoder,
            ccr_weights,
            cwr_weights,
            ccr_k,
            cwr_k,
            head_ccr,
            head_cwr,
        } = self;
        mlp!("encoder", encoder);
        for (t, w) in ccr_weights.iter_mut().enumerate() {
            out.push((format!("ccr.w{t}"), w.as_slice_mut().expect("layout")));
        }
        for (t, w) in cwr_weights.iter_mut().enumerate() {
            out.push((format!("cwr.w{t}"), w.as_slice_mut().expect("layout")));
        }
        out.push(("ccr.k".into(), ccr_k.as_slice_mut().expect("layout")));
        out.push(("cwr.k".into(), cwr_k.as_slice_mut().expect("layout")));
        mlp!("head_ccr", head_ccr);
        mlp!("head_cwr", head_cwr);
        out
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.data.iter().all(|v| v.is_finite()))
    }

    pub fn check_shapes(&self, cfg: &ModelConfig) -> Result<()> {
        let (m, d, t) = (cfg.input_dim, cfg.hidden_dim, cfg.layers);
        let ok = self.input_dim() == m
            && self.encoder.w1.dim() == (m, d)
            && self.encoder.w2.dim() == (d, d)
            && self.ccr_weights.len() == t
            && self.cwr_weights.len() == t
            && self.ccr_weights.iter().chain(&self.cwr_weights).all(|w| w.dim() == (d, d))
            && self.ccr_k.len() == t
            && self.cwr_k.dim() == (t, d)
            && [&self.head_ccr, &self.head_cwr]
                .iter()
                .all(|h| h.w1.dim() == (d, d) && h.w2.dim() == (d, d));
        if ok {
            Ok(())
        } else {
            Err(RhoError::InvalidConfig(
                "parameter shapes do not match the model configuration".into(),
            ))
        }
    }
}

fn visit<'a>(p: &'a ModelParams, f: &mut dyn FnMut(String, Vec<usize>, &'a [f64])) {
    fn two<'a>(name: String, a: &'a Array2<f64>, f: &mut dyn FnMut(String, Vec<usize>, &'a [f64])) {
        f(name, a.shape().to_vec(), a.as_slice().expect("standard layout"));
    }
    fn one<'a>(name: String, a: &'a Array1<f64>, f: &mut dyn FnMut(String, Vec<usize>, &'a [f64])) {
        f(name, a.shape().to_vec(), a.as_slice().expect("standard layout"));
    }
    let mlp = |prefix: &str, m: &'a Mlp, f: &mut dyn FnMut(String, Vec<usize>, &'a [f64])| {
        two(format!("{prefix}.w1"), &m.w1, f);
        one(format!("{prefix}.b1"), &m.b1, f);
        two(format!("{prefix}.w2"), &m.w2, f);
        one(format!("{prefix}.b2"), &m.b2, f);
    };
    mlp("encoder", &p.encoder, f);
    for (t, w) in p.ccr_weights.iter().enumerate() {
        two(format!("ccr.w{t}"), w, f);
    }
    for (t, w) in p.cwr_weights.iter().enumerate() {
        two(format!("cwr.w{t}"), w, f);
    }
    one("ccr.k".into(), &p.ccr_k, f);
    two("cwr.k".into(), &p.cwr_k, f);
    mlp("head_ccr", &p.head_ccr, f);
    mlp("head_cwr", &p.head_cwr, f);
}

/// Which projection head to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum View {
    CrossChannel,
    ChannelWise,
}

/// Representations and centers from one full forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardState {
    pub h0: Array2<f64>,
    pub h_ccr: Array2<f64>,
    pub h_cwr: Array2<f64>,
    pub z_ccr: Array2<f64>,
    pub z_cwr: Array2<f64>,
    pub c_ccr: Array1<f64>,
    pub c_cwr: Array1<f64>,
}

fn affine(x: ArrayView2<'_, f64>, w: &Array2<f64>, b: &Array1<f64>) -> Array2<f64> {
    x.dot(w) + b
}

/// Shared encoder `act(act(X W1 + b1) W2 + b2)`.
pub fn encode(params: &ModelParams, x: ArrayView2<'_, f64>, act: Activation) -> Result<Array2<f64>> {
    if x.ncols() != params.input_dim() {
        return Err(RhoError::DimensionMismatch {
            context: "encoder input width",
            expected: params.input_dim(),
            actual: x.ncols(),
        });
    }
    let e = &params.encoder;
    let hidden = act.map(&affine(x, &e.w1, &e.b1));
    Ok(act.map(&affine(hidden.view(), &e.w2, &e.b2)))
}

/// Projection head, activation between the layers and a linear output.
pub fn project(params: &ModelParams, h: ArrayView2<'_, f64>, view: View, act: Activation) -> Array2<f64> {
    let head = match view {
        View::CrossChannel => &params.head_ccr,
        View::ChannelWise => &params.head_cwr,
    };
    let hidden = act.map(&affine(h, &head.w1, &head.b1));
    affine(hidden.view(), &head.w2, &head.b2)
}

/// Intermediates of one propagation layer.
#[derive(Debug, Clone)]
pub(crate) struct LayerTrace {
    /// Layer input `H_{t-1}`.
    pub input: Array2<f64>,
    /// `L H_{t-1}` (cross-channel and per-channel) or `L (H_{t-1} ⊙ K)` (Hadamard).
    pub lap: Array2<f64>,
    /// Filtered signal before the weights.
    pub filtered: Array2<f64>,
    /// Pre-activation `filtered · W`.
    pub pre: Array2<f64>,
}

fn check_rows(graph: &Graph, h: ArrayView2<'_, f64>) -> Result<()> {
    if h.nrows() != graph.num_nodes() {
        return Err(RhoError::DimensionMismatch {
            context: "propagation rows",
            expected: graph.num_nodes(),
            actual: h.nrows(),
        });
    }
    Ok(())
}

pub(crate) fn trace_ccr(
    graph: &Graph,
    params: &ModelParams,
    h0: ArrayView2<'_, f64>,
    act: Activation,
) -> Result<(Array2<f64>, Vec<LayerTrace>)> {
    check_rows(graph, h0)?;
    let op = graph.laplacian();
    let mut h = h0.to_owned();
    let mut layers = Vec::with_capacity(params.layers());
    for (t, w) in params.ccr_weights.iter().enumerate() {
        let lap = op.apply(h.view())?;
        let mut filtered = h.clone();
        filtered.scaled_add(-params.ccr_k[t], &lap);
        let pre = filtered.dot(w);
        let next = act.map(&pre);
        layers.push(LayerTrace {
            input: h,
            lap,
            filtered,
            pre,
        });
        h = next;
    }
    Ok((h, layers))
}

pub(crate) fn trace_cwr(
    graph: &Graph,
    params: &ModelParams,
    h0: ArrayView2<'_, f64>,
    formula: CwrFormula,
    act: Activation,
) -> Result<(Array2<f64>, Vec<LayerTrace>)> {
    check_rows(graph, h0)?;
    if params.cwr_k.ncols() != h0.ncols() {
        return Err(RhoError::DimensionMismatch {
            context: "channel coefficients",
            expected: h0.ncols(),
            actual: params.cwr_k.ncols(),
        });
    }
    let op = graph.laplacian();
    let mut h = h0.to_owned();
    let mut layers = Vec::with_capacity(params.layers());
    for (t, w) in params.cwr_weights.iter().enumerate() {
        let kt = params.cwr_k.row(t);
        let (lap, filtered) = match formula {
            CwrFormula::PerChannel => {
                let lap = op.apply(h.view())?;
                let filtered = &h - &(&lap * &kt);
                (lap, filtered)
            }
            CwrFormula::Hadamard => {
                let scaled = &h * &kt;
                let lap = op.apply(scaled.view())?;
                let filtered = &scaled - &lap;
                (lap, filtered)
            }
        };
        let pre = filtered.dot(w);
        let next = act.map(&pre);
        layers.push(LayerTrace {
            input: h,
            lap,
            filtered,
            pre,
        });
        h = next;
    }
    Ok((h, layers))
}

/// Cross-channel propagation over all layers.
pub fn propagate_ccr(
    graph: &Graph,
    params: &ModelParams,
    h0: ArrayView2<'_, f64>,
    act: Activation,
) -> Result<Array2<f64>> {
    trace_ccr(graph, params, h0, act).map(|(h, _)| h)
}

/// Channel-wise propagation over all layers.
pub fn propagate_cwr(
    graph: &Graph,
    params: &ModelParams,
    h0: ArrayView2<'_, f64>,
    formula: CwrFormula,
    act: Activation,
) -> Result<Array2<f64>> {
    trace_cwr(graph, params, h0, formula, act).map(|(h, _)| h)
}

/// Column means over all nodes.
pub fn compute_centers(h_ccr: &Array2<f64>, h_cwr: &Array2<f64>) -> Result<(Array1<f64>, Array1<f64>)> {
    let c_ccr = h_ccr
        .mean_axis(Axis(0))
        .ok_or_else(|| RhoError::InvalidInput("cannot compute centers of an empty graph".into()))?;
    let c_cwr = h_cwr
        .mean_axis(Axis(0))
        .ok_or_else(|| RhoError::InvalidInput("cannot compute centers of an empty graph".into()))?;
    Ok((c_ccr, c_cwr))
}

/// Full forward pass including projections and freshly computed centers.
pub fn forward(
    graph: &Graph,
    params: &ModelParams,
    x: ArrayView2<'_, f64>,
    cfg: &ModelConfig,
) -> Result<ForwardState> {
    let act = cfg.activation;
    let h0 = encode(params, x, act)?;
    let h_ccr = propagate_ccr(graph, params, h0.view(), act)?;
    let h_cwr = propagate_cwr(graph, params, h0.view(), cfg.cwr_formula, act)?;
    let z_ccr = project(params, h_ccr.view(), View::CrossChannel, act);
    let z_cwr = project(params, h_cwr.view(), View::ChannelWise, act);
    let (c_ccr, c_cwr) = compute_centers(&h_ccr, &h_cwr)?;
    Ok(ForwardState {
        h0,
        h_ccr,
        h_cwr,
        z_ccr,
        z_cwr,
        c_ccr,
        c_cwr,
    })
}
