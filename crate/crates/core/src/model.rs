//! The full model (autoencoder plus self-expression matrix) and the joint
//! objective with its gradients.

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::{CseMode, TrainConfig};
use crate::error::{Error, Result};
use crate::gnn::{stack_backward, stack_forward, AutoencoderParams, LayerGrads, Neighborhoods};
use crate::knn::PositiveMask;
use crate::losses::{
    contrastive_self_expression_with_grad, neighborhood_contrast_with_grad,
    plain_self_expression_grad, plain_self_expression_loss, reconstruction_grad,
    reconstruction_loss, total_loss, ContrastOptions, LossBreakdown, LossWeights,
};
use crate::self_expression::{
    coef_regularizer, coef_regularizer_grad, self_express_backward, CoefNorm,
    SelfExpressionMatrix,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub autoencoder: AutoencoderParams,
    pub self_expression: SelfExpressionMatrix,
}

impl Model {
    pub fn init<R: Rng>(num_nodes: usize, num_features: usize, config: &TrainConfig, rng: &mut R) -> Result<Model> {
        let dims = config.dims_for(num_features);
        Ok(Model {
            autoencoder: AutoencoderParams::init(&dims, config.gnn_kind, config.activation, rng)?,
            self_expression: SelfExpressionMatrix::init(num_nodes),
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.self_expression.num_nodes()
    }

    /// Every trainable tensor as a flat mutable slice, in a fixed order that
    /// matches [`ModelGrads::slices`].
    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for layer in self.autoencoder.layers_mut() {
            out.push(layer.weight.as_slice_mut().expect("standard layout"));
            out.push(layer.attention.as_slice_mut().expect("standard layout"));
            out.push(std::slice::from_mut(&mut layer.prelu_slope));
        }
        out.push(
            self.self_expression
                .coefficients
                .as_slice_mut()
                .expect("standard layout"),
        );
        out
    }

    pub fn num_parameters(&self) -> usize {
        let layers: usize = self
            .autoencoder
            .layers()
            .map(|l| l.weight.len() + l.attention.len() + 1)
            .sum();
        layers + self.self_expression.coefficients.len()
    }
}

#[derive(Debug, Clone)]
pub struct ModelGrads {
    pub encoder: Vec<LayerGrads>,
    pub decoder: Vec<LayerGrads>,
    pub coefficients: Array2<f64>,
}

impl ModelGrads {
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for g in self.encoder.iter().chain(&self.decoder) {
            out.push(g.weight.as_slice().expect("standard layout"));
            out.push(g.attention.as_slice().expect("standard layout"));
            out.push(std::slice::from_ref(&g.prelu_slope));
        }
        out.push(self.coefficients.as_slice().expect("standard layout"));
        out
    }
}

/// Which loss terms are active and how they are computed.
///
/// A term whose weight is zero, or the neighborhood term when disabled, is
/// neither evaluated nor differentiated and is reported as exactly zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveSettings {
    pub weights: LossWeights,
    pub nbr_enabled: bool,
    pub cse_mode: CseMode,
    pub coef_norm: CoefNorm,
    pub contrast: ContrastOptions,
}

impl ObjectiveSettings {
    pub fn from_config(config: &TrainConfig) -> Self {
        ObjectiveSettings {
            weights: config.weights,
            nbr_enabled: config.nbr_enabled,
            cse_mode: config.cse_mode,
            coef_norm: config.coef_norm,
            contrast: config.contrast,
        }
    }

    pub fn nbr_active(&self) -> bool {
        self.nbr_enabled && self.weights.nbr != 0.0
    }
}

pub struct ObjectiveOutput {
    pub loss: LossBreakdown,
    pub latent: Array2<f64>,
    pub grads: Option<ModelGrads>,
}

/// Supplies the positive set for the neighborhood term once the latents of
/// the current forward pass are known.
pub enum Positives<'a> {
    Fixed(&'a PositiveMask),
    FromLatent(&'a dyn Fn(ArrayView2<f64>) -> Result<PositiveMask>),
}

fn add_scaled(acc: &mut Array2<f64>, g: &Array2<f64>, scale: f64) {
    acc.scaled_add(scale, g);
}

/// Forward pass of the joint objective and, if requested, its gradient with
/// respect to every parameter. `attributes` must already be normalized.
pub fn objective(
    model: &Model,
    attributes: ArrayView2<f64>,
    nbrs: &Neighborhoods,
    positives: Option<Positives<'_>>,
    settings: &ObjectiveSettings,
    with_grad: bool,
) -> Result<ObjectiveOutput> {
    let n = attributes.nrows();
    if model.num_nodes() != n || nbrs.num_nodes() != n {
        return Err(Error::Shape(format!(
            "model has {} nodes, graph has {} neighborhoods and {n} attribute rows",
            model.num_nodes(),
            nbrs.num_nodes()
        )));
    }
    let ae = &model.autoencoder;
    let enc = stack_forward(attributes, nbrs, &ae.encoder, "encoder")?;
    let z = enc.last().map(|c| c.output.clone()).unwrap_or_else(|| attributes.to_owned());
    let c_eff = model.self_expression.effective();
    let z_hat = c_eff.dot(&z);
    if z_hat.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("self-expression"));
    }
    let dec = stack_forward(z_hat.view(), nbrs, &ae.decoder, "decoder")?;
    let x_hat = dec.last().map_or_else(|| z_hat.view(), |c| c.output.view());

    let w = settings.weights;
    let rec = reconstruction_loss(attributes, x_hat)?;
    let mut grad_z = with_grad.then(|| Array2::<f64>::zeros(z.dim()));
    // d/dZ_hat from the terms that read Z_hat directly (not via the decoder)
    let mut grad_zh = with_grad.then(|| Array2::<f64>::zeros(z_hat.dim()));

    let mut nbr = 0.0;
    if settings.nbr_active() {
        let owned;
        let mask = match positives {
            Some(Positives::Fixed(m)) => m,
            Some(Positives::FromLatent(f)) => {
                owned = f(z.view())?;
                &owned
            }
            None => {
                return Err(Error::Config(
                    "neighborhood contrast is active but no positive set was supplied".into(),
                ))
            }
        };
        let (l, g) = neighborhood_contrast_with_grad(z.view(), mask, settings.contrast)?;
        nbr = l;
        if let Some(gz) = grad_z.as_mut() {
            add_scaled(gz, &g, w.nbr);
        }
    }

    let mut cse = 0.0;
    if w.cse != 0.0 {
        let (l, gz_term, gzh_term) = match settings.cse_mode {
            CseMode::Contrastive => {
                contrastive_self_expression_with_grad(z.view(), z_hat.view(), settings.contrast.temperature)?
            }
            CseMode::Plain => {
                let l = plain_self_expression_loss(z.view(), z_hat.view())?;
                let (a, b) = plain_self_expression_grad(z.view(), z_hat.view());
                (l, a, b)
            }
        };
        cse = l;
        if let (Some(gz), Some(gzh)) = (grad_z.as_mut(), grad_zh.as_mut()) {
            add_scaled(gz, &gz_term, w.cse);
            add_scaled(gzh, &gzh_term, w.cse);
        }
    }

    let coef = if w.coef != 0.0 {
        coef_regularizer(&model.self_expression, settings.coef_norm)
    } else {
        0.0
    };
    let loss = total_loss(rec, nbr, cse, coef, w)?;

    let grads = match (grad_z, grad_zh) {
        (Some(mut gz), Some(gzh_direct)) => {
            let rec_grad = reconstruction_grad(attributes, x_hat);
            let (dec_grads, gzh_dec) = stack_backward(&dec, nbrs, &ae.decoder, rec_grad);
            let gzh = gzh_dec + gzh_direct;
            let (mut grad_c, gz_from_se) = self_express_backward(z.view(), c_eff.view(), gzh.view());
            gz += &gz_from_se;
            if w.coef != 0.0 {
                add_scaled(
                    &mut grad_c,
                    &coef_regularizer_grad(&model.self_expression, settings.coef_norm),
                    w.coef,
                );
            }
            let (enc_grads, _) = stack_backward(&enc, nbrs, &ae.encoder, gz);
            Some(ModelGrads {
                encoder: enc_grads,
                decoder: dec_grads,
                coefficients: grad_c,
            })
        }
        _ => None,
    };

    Ok(ObjectiveOutput {
        loss,
        latent: z,
        grads,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gnn::{Activation, GnnKind};
    use crate::graph::{add_self_loops, Graph};
    use crate::knn::knn_positive_mask;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy(n_per: usize, seed: u64) -> Graph {
        Graph::planted_partition(n_per, 2, 5, 0.9, 0.1, seed).unwrap()
    }

    fn setup(kind: GnnKind, act: Activation, cse_mode: CseMode) -> (Model, Graph, ObjectiveSettings) {
        let g = toy(3, 4);
        let cfg = TrainConfig {
            hidden_dims: vec![4, 3],
            gnn_kind: kind,
            activation: act,
            cse_mode,
            ..TrainConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut model = Model::init(g.num_nodes(), g.num_features(), &cfg, &mut rng).unwrap();
        // move C away from its constant init so every entry matters
        model
            .self_expression
            .coefficients
            .mapv_inplace(|_| rng.gen_range(-0.3..0.3));
        for l in model.autoencoder.layers_mut() {
            l.prelu_slope = rng.gen_range(0.1..0.4);
        }
        let settings = ObjectiveSettings {
            weights: LossWeights::new(0.7, 1.3, 0.4),
            ..ObjectiveSettings::from_config(&cfg)
        };
        (model, g, settings)
    }

    fn loss_at(model: &Model, g: &Graph, nbrs: &Neighborhoods, mask: &PositiveMask, s: &ObjectiveSettings) -> f64 {
        objective(model, g.attributes.view(), nbrs, Some(Positives::Fixed(mask)), s, false)
            .unwrap()
            .loss
            .total
    }

    fn finite_difference_check(kind: GnnKind, act: Activation, cse_mode: CseMode) {
        let (mut model, g, settings) = setup(kind, act, cse_mode);
        let nbrs = Neighborhoods::from_adjacency(&add_self_loops(&g.adjacency)).unwrap();
        // the positive set is held fixed; it is piecewise constant in Z
        let z0 = objective(&model, g.attributes.view(), &nbrs, None, &ObjectiveSettings { nbr_enabled: false, ..settings }, false)
            .unwrap()
            .latent;
        let mask = knn_positive_mask(z0.view(), 2).unwrap();
        let out = objective(&model, g.attributes.view(), &nbrs, Some(Positives::Fixed(&mask)), &settings, true).unwrap();
        let grads = out.grads.unwrap();
        let analytic: Vec<Vec<f64>> = grads.slices().iter().map(|s| s.to_vec()).collect();
        let eps = 1e-6;
        for t in 0..analytic.len() {
            let len = model.slices_mut()[t].len();
            for idx in 0..len {
                let orig = model.slices_mut()[t][idx];
                model.slices_mut()[t][idx] = orig + eps;
                let up = loss_at(&model, &g, &nbrs, &mask, &settings);
                model.slices_mut()[t][idx] = orig - eps;
                let down = loss_at(&model, &g, &nbrs, &mask, &settings);
                model.slices_mut()[t][idx] = orig;
                let numeric = (up - down) / (2.0 * eps);
                let a = analytic[t][idx];
                let tol = 1e-5 * (1.0 + a.abs().max(numeric.abs()));
                assert!(
                    (a - numeric).abs() < tol,
                    "{kind:?}/{act:?}/{cse_mode:?} tensor {t} entry {idx}: analytic {a} numeric {numeric}"
                );
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences_attention() {
        finite_difference_check(GnnKind::Attention, Activation::Prelu, CseMode::Contrastive);
    }

    #[test]
    fn gradients_match_finite_differences_plain_cse_elu() {
        finite_difference_check(GnnKind::Attention, Activation::Elu, CseMode::Plain);
    }

    #[test]
    fn gradients_match_finite_differences_mean_aggregation() {
        finite_difference_check(GnnKind::MeanAggregation, Activation::Prelu, CseMode::Contrastive);
    }

    #[test]
    fn coefficient_diagonal_gets_no_gradient() {
        let (model, g, settings) = setup(GnnKind::Attention, Activation::Prelu, CseMode::Contrastive);
        let nbrs = Neighborhoods::of_graph(&g);
        let f = |z: ArrayView2<f64>| knn_positive_mask(z, 2);
        let out = objective(&model, g.attributes.view(), &nbrs, Some(Positives::FromLatent(&f)), &settings, true).unwrap();
        let gc = out.grads.unwrap().coefficients;
        assert!(gc.diag().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn inactive_terms_report_zero() {
        let (model, g, mut settings) = setup(GnnKind::Attention, Activation::Prelu, CseMode::Contrastive);
        settings.weights = LossWeights::new(0.0, 0.0, 0.0);
        let nbrs = Neighborhoods::of_graph(&g);
        let out = objective(&model, g.attributes.view(), &nbrs, None, &settings, true).unwrap();
        assert_eq!((out.loss.nbr, out.loss.cse, out.loss.coef), (0.0, 0.0, 0.0));
        assert_eq!(out.loss.total, out.loss.rec);
    }

    #[test]
    fn active_neighborhood_term_needs_positives() {
        let (model, g, settings) = setup(GnnKind::Attention, Activation::Prelu, CseMode::Contrastive);
        let nbrs = Neighborhoods::of_graph(&g);
        assert!(matches!(
            objective(&model, g.attributes.view(), &nbrs, None, &settings, false),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn node_count_mismatch_is_rejected() {
        let (model, _, settings) = setup(GnnKind::Attention, Activation::Prelu, CseMode::Contrastive);
        let other = toy(4, 1);
        let nbrs = Neighborhoods::of_graph(&other);
        assert!(matches!(
            objective(&model, other.attributes.view(), &nbrs, None, &settings, false),
            Err(Error::Shape(_))
        ));
    }
}
