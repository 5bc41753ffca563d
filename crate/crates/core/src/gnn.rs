//! Graph neural layers and the symmetric encoder/decoder built from them.
//!
//! Each layer maps node-major features `H (N x d_in)` to `N x d_out`:
//!
//! ```text
//! P      = H W
//! e_ij   = leaky_relu(a_src . P_i + a_dst . P_j)     j in N(i), self included
//! alpha  = softmax_j(e_ij)
//! out_i  = act(sum_j alpha_ij P_j)
//! ```
//!
//! The mean-aggregation variant replaces `alpha_ij` with `1 / |N(i)|` and has
//! no attention parameters in use. All layers carry hand-written backward
//! passes; gradients are checked against finite differences in the tests.

use ndarray::{s, Array1, Array2, ArrayView2, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{add_self_loops, Graph};

/// Negative slope of the leaky ReLU applied to attention logits.
pub const ATTENTION_NEGATIVE_SLOPE: f64 = 0.2;
/// Initial value of learnable PReLU slopes.
pub const PRELU_INIT: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GnnKind {
    #[default]
    Attention,
    MeanAggregation,
}

impl std::str::FromStr for GnnKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "attention" | "gat" => Ok(GnnKind::Attention),
            "mean-aggregation" | "mean" | "gcn" => Ok(GnnKind::MeanAggregation),
            other => Err(Error::Config(format!("unknown gnn kind {other:?}"))),
        }
    }
}

impl std::fmt::Display for GnnKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            GnnKind::Attention => "attention",
            GnnKind::MeanAggregation => "mean-aggregation",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    #[default]
    Prelu,
    Elu,
    Linear,
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "prelu" => Ok(Activation::Prelu),
            "elu" => Ok(Activation::Elu),
            "linear" | "identity" => Ok(Activation::Linear),
            other => Err(Error::Config(format!("unknown activation {other:?}"))),
        }
    }
}

impl std::fmt::Display for Activation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Activation::Prelu => "prelu",
            Activation::Elu => "elu",
            Activation::Linear => "linear",
        })
    }
}

impl Activation {
    fn apply(self, x: f64, slope: f64) -> f64 {
        match self {
            Activation::Prelu => {
                if x > 0.0 {
                    x
                } else {
                    slope * x
                }
            }
            Activation::Elu => {
                if x > 0.0 {
                    x
                } else {
                    x.exp_m1()
                }
            }
            Activation::Linear => x,
        }
    }

    /// Derivative with respect to the input.
    fn derivative(self, x: f64, slope: f64) -> f64 {
        match self {
            Activation::Prelu => {
                if x > 0.0 {
                    1.0
                } else {
                    slope
                }
            }
            Activation::Elu => {
                if x > 0.0 {
                    1.0
                } else {
                    x.exp()
                }
            }
            Activation::Linear => 1.0,
        }
    }
}

/// Node neighborhoods in compressed-row form. Every node lists itself.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Neighborhoods {
    offsets: Vec<usize>,
    indices: Vec<usize>,
}

impl Neighborhoods {
    /// Requires a full diagonal: a node without a self-loop could end up with
    /// an empty attention softmax.
    pub fn from_adjacency(adjacency: &Array2<u8>) -> Result<Self> {
        let n = adjacency.nrows();
        if adjacency.ncols() != n {
            return Err(Error::Shape(format!(
                "adjacency must be square, got {:?}",
                adjacency.dim()
            )));
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut indices = Vec::new();
        offsets.push(0);
        for i in 0..n {
            if adjacency[[i, i]] == 0 {
                return Err(Error::Shape(format!("node {i} has no self-loop")));
            }
            indices.extend((0..n).filter(|&j| adjacency[[i, j]] != 0));
            offsets.push(indices.len());
        }
        Ok(Neighborhoods { offsets, indices })
    }

    /// Neighborhoods of `graph` with self-loops added.
    pub fn of_graph(graph: &Graph) -> Self {
        Neighborhoods::from_adjacency(&add_self_loops(&graph.adjacency))
            .expect("self-loops were just added")
    }

    pub fn num_nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn num_entries(&self) -> usize {
        self.indices.len()
    }

    pub fn of(&self, node: usize) -> &[usize] {
        &self.indices[self.offsets[node]..self.offsets[node + 1]]
    }

    fn range(&self, node: usize) -> std::ops::Range<usize> {
        self.offsets[node]..self.offsets[node + 1]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub kind: GnnKind,
    /// `d_in x d_out`.
    pub weight: Array2<f64>,
    /// `[a_src; a_dst]`, length `2 * d_out`. Unused by mean aggregation.
    pub attention: Array1<f64>,
    pub activation: Activation,
    pub prelu_slope: f64,
}

impl LayerParams {
    /// Glorot-uniform weights and attention vector.
    pub fn init<R: Rng>(
        d_in: usize,
        d_out: usize,
        kind: GnnKind,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let w_bound = (6.0 / (d_in + d_out) as f64).sqrt();
        let weight = Array2::from_shape_fn((d_in, d_out), |_| rng.gen_range(-w_bound..w_bound));
        let a_bound = (6.0 / (2 * d_out + 1) as f64).sqrt();
        let attention = Array1::from_shape_fn(2 * d_out, |_| rng.gen_range(-a_bound..a_bound));
        LayerParams {
            kind,
            weight,
            attention,
            activation,
            prelu_slope: PRELU_INIT,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.ncols()
    }

    fn check(&self) -> Result<()> {
        if self.attention.len() != 2 * self.output_dim() {
            return Err(Error::Shape(format!(
                "attention vector has length {}, expected {}",
                self.attention.len(),
                2 * self.output_dim()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub weight: Array2<f64>,
    pub attention: Array1<f64>,
    pub prelu_slope: f64,
}

/// Intermediate values kept for the backward pass.
#[derive(Debug, Clone)]
pub struct LayerCache {
    input: Array2<f64>,
    projected: Array2<f64>,
    /// Attention coefficients aligned with [`Neighborhoods`] entries.
    alpha: Vec<f64>,
    /// Attention logits before the leaky ReLU, aligned like `alpha`.
    logits: Vec<f64>,
    pre_activation: Array2<f64>,
    pub output: Array2<f64>,
}

impl LayerCache {
    pub fn attention_coefficients(&self) -> &[f64] {
        &self.alpha
    }
}

fn leaky(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        ATTENTION_NEGATIVE_SLOPE * x
    }
}

fn leaky_derivative(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        ATTENTION_NEGATIVE_SLOPE
    }
}

fn check_input(h: ArrayView2<f64>, nbrs: &Neighborhoods, params: &LayerParams) -> Result<()> {
    params.check()?;
    if h.ncols() != params.input_dim() {
        return Err(Error::Shape(format!(
            "layer expects {} input features, got {}",
            params.input_dim(),
            h.ncols()
        )));
    }
    if h.nrows() != nbrs.num_nodes() {
        return Err(Error::Shape(format!(
            "{} feature rows for {} nodes",
            h.nrows(),
            nbrs.num_nodes()
        )));
    }
    Ok(())
}

pub fn layer_forward_cached(
    h: ArrayView2<f64>,
    nbrs: &Neighborhoods,
    params: &LayerParams,
) -> Result<LayerCache> {
    check_input(h, nbrs, params)?;
    let n = h.nrows();
    let d_out = params.output_dim();
    let projected = h.dot(&params.weight);
    let mut alpha = vec![0.0; nbrs.num_entries()];
    let mut logits = vec![0.0; nbrs.num_entries()];

    match params.kind {
        GnnKind::Attention => {
            let a_src = params.attention.slice(s![..d_out]);
            let a_dst = params.attention.slice(s![d_out..]);
            let src = projected.dot(&a_src);
            let dst = projected.dot(&a_dst);
            for i in 0..n {
                let range = nbrs.range(i);
                let mut max = f64::NEG_INFINITY;
                for (e, &j) in range.clone().zip(nbrs.of(i)) {
                    logits[e] = src[i] + dst[j];
                    max = max.max(leaky(logits[e]));
                }
                let mut total = 0.0;
                for e in range.clone() {
                    alpha[e] = (leaky(logits[e]) - max).exp();
                    total += alpha[e];
                }
                for e in range {
                    alpha[e] /= total;
                }
            }
        }
        GnnKind::MeanAggregation => {
            for i in 0..n {
                let range = nbrs.range(i);
                let w = 1.0 / range.len() as f64;
                alpha[range].fill(w);
            }
        }
    }

    let mut pre_activation = Array2::<f64>::zeros((n, d_out));
    for i in 0..n {
        let mut row = pre_activation.row_mut(i);
        for (e, &j) in nbrs.range(i).zip(nbrs.of(i)) {
            row.scaled_add(alpha[e], &projected.row(j));
        }
    }
    let output = pre_activation.mapv(|x| params.activation.apply(x, params.prelu_slope));

    Ok(LayerCache {
        input: h.to_owned(),
        projected,
        alpha,
        logits,
        pre_activation,
        output,
    })
}

pub fn attention_layer_forward(
    h: ArrayView2<f64>,
    nbrs: &Neighborhoods,
    params: &LayerParams,
) -> Result<Array2<f64>> {
    Ok(layer_forward_cached(h, nbrs, params)?.output)
}

/// Returns parameter gradients and the gradient with respect to the layer input.
pub fn layer_backward(
    cache: &LayerCache,
    nbrs: &Neighborhoods,
    params: &LayerParams,
    grad_output: ArrayView2<f64>,
) -> (LayerGrads, Array2<f64>) {
    let n = cache.projected.nrows();
    let d_out = params.output_dim();

    let mut prelu_grad = 0.0;
    let mut grad_pre = Array2::<f64>::zeros((n, d_out));
    Zip::from(&mut grad_pre)
        .and(&grad_output)
        .and(&cache.pre_activation)
        .for_each(|g, &go, &x| {
            *g = go * params.activation.derivative(x, params.prelu_slope);
        });
    if params.activation == Activation::Prelu {
        Zip::from(&grad_output)
            .and(&cache.pre_activation)
            .for_each(|&go, &x| {
                if x <= 0.0 {
                    prelu_grad += go * x;
                }
            });
    }

    let mut grad_projected = Array2::<f64>::zeros((n, d_out));
    let mut grad_attention = Array1::<f64>::zeros(2 * d_out);

    match params.kind {
        GnnKind::MeanAggregation => {
            for i in 0..n {
                for (e, &j) in nbrs.range(i).zip(nbrs.of(i)) {
                    grad_projected
                        .row_mut(j)
                        .scaled_add(cache.alpha[e], &grad_pre.row(i));
                }
            }
        }
        GnnKind::Attention => {
            let a_src = params.attention.slice(s![..d_out]);
            let a_dst = params.attention.slice(s![d_out..]);
            let mut grad_src = Array1::<f64>::zeros(n);
            let mut grad_dst = Array1::<f64>::zeros(n);
            let mut grad_alpha: Vec<f64> = Vec::new();
            for i in 0..n {
                let range = nbrs.range(i);
                let gi = grad_pre.row(i);
                grad_alpha.clear();
                for (e, &j) in range.clone().zip(nbrs.of(i)) {
                    grad_projected.row_mut(j).scaled_add(cache.alpha[e], &gi);
                    grad_alpha.push(gi.dot(&cache.projected.row(j)));
                }
                let weighted: f64 = range
                    .clone()
                    .zip(&grad_alpha)
                    .map(|(e, g)| cache.alpha[e] * g)
                    .sum();
                for ((e, &j), g) in range.zip(nbrs.of(i)).zip(&grad_alpha) {
                    let grad_logit =
                        cache.alpha[e] * (g - weighted) * leaky_derivative(cache.logits[e]);
                    grad_src[i] += grad_logit;
                    grad_dst[j] += grad_logit;
                }
            }
            for i in 0..n {
                grad_projected.row_mut(i).scaled_add(grad_src[i], &a_src);
                grad_projected.row_mut(i).scaled_add(grad_dst[i], &a_dst);
            }
            grad_attention
                .slice_mut(s![..d_out])
                .assign(&cache.projected.t().dot(&grad_src));
            grad_attention
                .slice_mut(s![d_out..])
                .assign(&cache.projected.t().dot(&grad_dst));
        }
    }

    let grad_weight = cache.input.t().dot(&grad_projected);
    let grad_input = grad_projected.dot(&params.weight.t());
    (
        LayerGrads {
            weight: grad_weight,
            attention: grad_attention,
            prelu_slope: prelu_grad,
        },
        grad_input,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderParams {
    pub encoder: Vec<LayerParams>,
    pub decoder: Vec<LayerParams>,
}

impl AutoencoderParams {
    /// `dims = [d, d1, ..., dL]`; the decoder mirrors the encoder.
    pub fn init<R: Rng>(
        dims: &[usize],
        kind: GnnKind,
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::Config(format!(
                "encoder dims must list at least two positive sizes, got {dims:?}"
            )));
        }
        let encoder = dims
            .windows(2)
            .map(|w| LayerParams::init(w[0], w[1], kind, activation, rng))
            .collect();
        let decoder = dims
            .windows(2)
            .rev()
            .map(|w| LayerParams::init(w[1], w[0], kind, activation, rng))
            .collect();
        Ok(AutoencoderParams { encoder, decoder })
    }

    pub fn input_dim(&self) -> usize {
        self.encoder.first().map_or(0, LayerParams::input_dim)
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder.last().map_or(0, LayerParams::output_dim)
    }

    pub fn layers(&self) -> impl Iterator<Item = &LayerParams> {
        self.encoder.iter().chain(self.decoder.iter())
    }

    pub fn layers_mut(&mut self) -> impl Iterator<Item = &mut LayerParams> {
        self.encoder.iter_mut().chain(self.decoder.iter_mut())
    }
}

/// Runs a stack of layers, keeping every cache.
pub fn stack_forward(
    input: ArrayView2<f64>,
    nbrs: &Neighborhoods,
    layers: &[LayerParams],
    stage: &str,
) -> Result<Vec<LayerCache>> {
    let mut caches: Vec<LayerCache> = Vec::with_capacity(layers.len());
    for (idx, layer) in layers.iter().enumerate() {
        let cache = match caches.last() {
            Some(c) => layer_forward_cached(c.output.view(), nbrs, layer)?,
            None => layer_forward_cached(input, nbrs, layer)?,
        };
        if cache.output.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical(format!("{stage} layer {idx}")));
        }
        caches.push(cache);
    }
    Ok(caches)
}

/// Backpropagates through a stack; returns per-layer gradients (in layer
/// order) and the gradient with respect to the stack input.
pub fn stack_backward(
    caches: &[LayerCache],
    nbrs: &Neighborhoods,
    layers: &[LayerParams],
    grad_output: Array2<f64>,
) -> (Vec<LayerGrads>, Array2<f64>) {
    let mut grad = grad_output;
    let mut grads = Vec::with_capacity(layers.len());
    for (cache, layer) in caches.iter().zip(layers).rev() {
        let (g, gi) = layer_backward(cache, nbrs, layer, grad.view());
        grads.push(g);
        grad = gi;
    }
    grads.reverse();
    (grads, grad)
}

fn last_output(caches: Vec<LayerCache>, input: ArrayView2<f64>) -> Array2<f64> {
    caches
        .into_iter()
        .last()
        .map_or_else(|| input.to_owned(), |c| c.output)
}

/// Encodes node attributes into latent representations `Z`.
pub fn encode_with(
    attributes: ArrayView2<f64>,
    nbrs: &Neighborhoods,
    params: &AutoencoderParams,
) -> Result<Array2<f64>> {
    let caches = stack_forward(attributes, nbrs, &params.encoder, "encoder")?;
    Ok(last_output(caches, attributes))
}

pub fn encode(graph: &Graph, params: &AutoencoderParams) -> Result<Array2<f64>> {
    encode_with(graph.attributes.view(), &Neighborhoods::of_graph(graph), params)
}

/// Maps self-expressed latents back to attribute space.
pub fn decode_with(
    latent: ArrayView2<f64>,
    nbrs: &Neighborhoods,
    params: &AutoencoderParams,
) -> Result<Array2<f64>> {
    let caches = stack_forward(latent, nbrs, &params.decoder, "decoder")?;
    Ok(last_output(caches, latent))
}

pub fn decode(
    reconstructed_latent: ArrayView2<f64>,
    graph: &Graph,
    params: &AutoencoderParams,
) -> Result<Array2<f64>> {
    decode_with(reconstructed_latent, &Neighborhoods::of_graph(graph), params)
}
