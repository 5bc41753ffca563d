//! Training objectives and their gradients.
//!
//! Every loss is a sum over nodes. Contrastive terms operate on cosine
//! similarities, optionally divided by a temperature (1 by default), with the
//! usual max-subtraction before exponentiation.

use ndarray::{Array2, ArrayView2, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::knn::PositiveMask;
use crate::similarity::{unit_rows, unit_rows_backward};

pub use crate::similarity::cosine_similarity;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub nbr: f64,
    pub cse: f64,
    pub coef: f64,
}

impl LossWeights {
    pub fn new(nbr: f64, cse: f64, coef: f64) -> Self {
        LossWeights { nbr, cse, coef }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub rec: f64,
    pub nbr: f64,
    pub cse: f64,
    pub coef: f64,
    pub total: f64,
    pub weights: LossWeights,
}

/// Weighted sum `rec + l1 * nbr + l2 * cse + l3 * coef`.
pub fn total_loss(rec: f64, nbr: f64, cse: f64, coef: f64, weights: LossWeights) -> Result<LossBreakdown> {
    for (name, v) in [("rec", rec), ("nbr", nbr), ("cse", cse), ("coef", coef)] {
        if !v.is_finite() {
            return Err(Error::numerical(format!("{name} loss")));
        }
    }
    let total = rec + weights.nbr * nbr + weights.cse * cse + weights.coef * coef;
    if !total.is_finite() {
        return Err(Error::numerical("total loss"));
    }
    Ok(LossBreakdown {
        rec,
        nbr,
        cse,
        coef,
        total,
        weights,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContrastOptions {
    pub temperature: f64,
    /// Whether positives also appear in the neighborhood-contrast denominator.
    pub positives_in_denominator: bool,
}

impl Default for ContrastOptions {
    fn default() -> Self {
        ContrastOptions {
            temperature: 1.0,
            positives_in_denominator: true,
        }
    }
}

fn check_same_shape(a: ArrayView2<f64>, b: ArrayView2<f64>, what: &str) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::Shape(format!(
            "{what}: {:?} vs {:?}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

/// `1/2 ||X - X_hat||_F^2`.
pub fn reconstruction_loss(x: ArrayView2<f64>, x_hat: ArrayView2<f64>) -> Result<f64> {
    check_same_shape(x, x_hat, "reconstruction")?;
    let mut sum = 0.0;
    Zip::from(x).and(x_hat).for_each(|&a, &b| sum += (a - b) * (a - b));
    Ok(0.5 * sum)
}

/// Gradient of [`reconstruction_loss`] with respect to `X_hat`.
pub fn reconstruction_grad(x: ArrayView2<f64>, x_hat: ArrayView2<f64>) -> Array2<f64> {
    &x_hat - &x
}

/// `||Z - Z_hat||_F^2`.
pub fn plain_self_expression_loss(z: ArrayView2<f64>, z_hat: ArrayView2<f64>) -> Result<f64> {
    check_same_shape(z, z_hat, "self-expression")?;
    let mut sum = 0.0;
    Zip::from(z).and(z_hat).for_each(|&a, &b| sum += (a - b) * (a - b));
    Ok(sum)
}

/// Returns `(d/dZ, d/dZ_hat)` of [`plain_self_expression_loss`].
pub fn plain_self_expression_grad(
    z: ArrayView2<f64>,
    z_hat: ArrayView2<f64>,
) -> (Array2<f64>, Array2<f64>) {
    let diff = (&z - &z_hat) * 2.0;
    let neg = -&diff;
    (diff, neg)
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

pub fn neighborhood_contrast_loss(z: ArrayView2<f64>, positives: &PositiveMask) -> Result<f64> {
    Ok(neighborhood_contrast(z, positives, ContrastOptions::default(), false)?.0)
}

/// Loss and `d loss / d Z` of the neighborhood contrast objective:
///
/// ```text
/// l_i = -log( sum_{j in pos(i)} exp(s_ij) / sum_{p != i} exp(s_ip) )
/// ```
pub fn neighborhood_contrast_with_grad(
    z: ArrayView2<f64>,
    positives: &PositiveMask,
    opts: ContrastOptions,
) -> Result<(f64, Array2<f64>)> {
    let (loss, grad) = neighborhood_contrast(z, positives, opts, true)?;
    Ok((loss, grad.expect("gradient requested")))
}

fn neighborhood_contrast(
    z: ArrayView2<f64>,
    positives: &PositiveMask,
    opts: ContrastOptions,
    want_grad: bool,
) -> Result<(f64, Option<Array2<f64>>)> {
    let n = z.nrows();
    if positives.num_nodes() != n {
        return Err(Error::Shape(format!(
            "positive mask covers {} nodes, representations have {n}",
            positives.num_nodes()
        )));
    }
    let tau = opts.temperature;
    let (unit, norms) = unit_rows(z);
    let sims = unit.dot(&unit.t()) / tau;
    let mask = positives.mask();

    let mut loss = 0.0;
    let mut grad_sims = if want_grad {
        Some(Array2::<f64>::zeros((n, n)))
    } else {
        None
    };
    for i in 0..n {
        let row = sims.row(i);
        let pos = positives.positives(i);
        if pos.is_empty() {
            continue;
        }
        let in_denominator = |j: usize| j != i && (opts.positives_in_denominator || !mask[[i, j]]);
        let den_terms = (0..n).filter(|&j| in_denominator(j)).map(|j| row[j]);
        let log_den = log_sum_exp(den_terms);
        if log_den == f64::NEG_INFINITY {
            // No negatives and positives excluded: nothing to contrast against.
            continue;
        }
        let log_num = log_sum_exp(pos.iter().map(|&j| row[j]));
        loss += log_den - log_num;

        if let Some(g) = grad_sims.as_mut() {
            let mut g_row = g.row_mut(i);
            for &j in pos {
                g_row[j] -= (row[j] - log_num).exp();
            }
            for j in 0..n {
                if in_denominator(j) {
                    g_row[j] += (row[j] - log_den).exp();
                }
            }
        }
    }
    if !loss.is_finite() {
        return Err(Error::numerical("neighborhood contrast loss"));
    }
    let grad = grad_sims.map(|g| {
        let sym = (&g + &g.t()) / tau;
        let grad_unit = sym.dot(&unit);
        unit_rows_backward(unit.view(), norms.view(), grad_unit.view())
    });
    Ok((loss, grad))
}

pub fn contrastive_self_expression_loss(z: ArrayView2<f64>, z_hat: ArrayView2<f64>) -> Result<f64> {
    Ok(contrastive_self_expression(z, z_hat, 1.0, false)?.0)
}

/// Loss and `(d/dZ, d/dZ_hat)` of the contrastive self-expression objective:
///
/// ```text
/// l_i = -log( exp(s(z_i, zh_i)) / sum_j exp(s(z_i, zh_j)) )
/// ```
pub fn contrastive_self_expression_with_grad(
    z: ArrayView2<f64>,
    z_hat: ArrayView2<f64>,
    temperature: f64,
) -> Result<(f64, Array2<f64>, Array2<f64>)> {
    let (loss, grads) = contrastive_self_expression(z, z_hat, temperature, true)?;
    let (gz, gzh) = grads.expect("gradient requested");
    Ok((loss, gz, gzh))
}

type PairGrad = (Array2<f64>, Array2<f64>);

fn contrastive_self_expression(
    z: ArrayView2<f64>,
    z_hat: ArrayView2<f64>,
    tau: f64,
    want_grad: bool,
) -> Result<(f64, Option<PairGrad>)> {
    check_same_shape(z, z_hat, "contrastive self-expression")?;
    let n = z.nrows();
    let (uz, nz) = unit_rows(z);
    let (uh, nh) = unit_rows(z_hat);
    let sims = uz.dot(&uh.t()) / tau;

    let mut loss = 0.0;
    let mut grad_sims = if want_grad {
        Some(Array2::<f64>::zeros((n, n)))
    } else {
        None
    };
    for i in 0..n {
        let row = sims.row(i);
        let lse = log_sum_exp(row.iter().copied());
        loss += lse - row[i];
        if let Some(g) = grad_sims.as_mut() {
            let mut g_row = g.row_mut(i);
            for j in 0..n {
                g_row[j] = (row[j] - lse).exp();
            }
            g_row[i] -= 1.0;
        }
    }
    if !loss.is_finite() {
        return Err(Error::numerical("contrastive self-expression loss"));
    }
    let grads = grad_sims.map(|g| {
        let grad_uz = g.dot(&uh) / tau;
        let grad_uh = g.t().dot(&uz) / tau;
        (
            unit_rows_backward(uz.view(), nz.view(), grad_uz.view()),
            unit_rows_backward(uh.view(), nh.view(), grad_uh.view()),
        )
    });
    Ok((loss, grads))
}
