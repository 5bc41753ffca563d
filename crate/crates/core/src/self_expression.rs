//! The self-expression layer: every latent row is rebuilt as a linear
//! combination of the *other* rows, `z_hat_i = sum_{j != i} c_ij z_j`.
//!
//! In node-major layout that is `Z_hat = C_eff Z`, where `C_eff` is `C` with
//! its diagonal masked to zero. The mask is applied at every use, so diagonal
//! entries of the stored matrix never influence anything and receive no
//! gradient.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Initial value of every coefficient.
pub const INIT_COEFFICIENT: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfExpressionMatrix {
    pub coefficients: Array2<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoefNorm {
    /// Sum of squared off-diagonal entries.
    #[default]
    SquaredFrobenius,
    /// Square root of the above.
    Frobenius,
}

impl std::str::FromStr for CoefNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "squared-frobenius" | "squared" => Ok(CoefNorm::SquaredFrobenius),
            "frobenius" => Ok(CoefNorm::Frobenius),
            other => Err(Error::Config(format!("unknown coefficient norm {other:?}"))),
        }
    }
}

impl std::fmt::Display for CoefNorm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CoefNorm::SquaredFrobenius => "squared-frobenius",
            CoefNorm::Frobenius => "frobenius",
        })
    }
}

impl SelfExpressionMatrix {
    pub fn init(n: usize) -> Self {
        SelfExpressionMatrix {
            coefficients: Array2::from_elem((n, n), INIT_COEFFICIENT),
        }
    }

    pub fn from_matrix(coefficients: Array2<f64>) -> Result<Self> {
        if coefficients.nrows() != coefficients.ncols() {
            return Err(Error::Shape(format!(
                "self-expression matrix must be square, got {:?}",
                coefficients.dim()
            )));
        }
        Ok(SelfExpressionMatrix { coefficients })
    }

    pub fn num_nodes(&self) -> usize {
        self.coefficients.nrows()
    }

    /// `C` with its diagonal set to zero.
    pub fn effective(&self) -> Array2<f64> {
        zero_diagonal(self.coefficients.view())
    }
}

pub fn zero_diagonal(m: ArrayView2<f64>) -> Array2<f64> {
    let mut out = m.to_owned();
    out.diag_mut().fill(0.0);
    out
}

pub fn init_self_expression(n: usize) -> SelfExpressionMatrix {
    SelfExpressionMatrix::init(n)
}

pub fn self_express(z: ArrayView2<f64>, c: &SelfExpressionMatrix) -> Result<Array2<f64>> {
    if c.num_nodes() != z.nrows() {
        return Err(Error::Shape(format!(
            "self-expression matrix is {n}x{n} but there are {} latent rows",
            z.nrows(),
            n = c.num_nodes()
        )));
    }
    Ok(c.effective().dot(&z))
}

/// Gradients of a loss through [`self_express`], given `d loss / d Z_hat`.
/// Returns `(d loss / d C, d loss / d Z)`; the `C` gradient has a zero diagonal.
pub fn self_express_backward(
    z: ArrayView2<f64>,
    c_effective: ArrayView2<f64>,
    grad_out: ArrayView2<f64>,
) -> (Array2<f64>, Array2<f64>) {
    let mut grad_c = grad_out.dot(&z.t());
    grad_c.diag_mut().fill(0.0);
    let grad_z = c_effective.t().dot(&grad_out);
    (grad_c, grad_z)
}

pub fn coef_regularizer(c: &SelfExpressionMatrix, norm: CoefNorm) -> f64 {
    let sq: f64 = c
        .coefficients
        .indexed_iter()
        .filter(|((i, j), _)| i != j)
        .map(|(_, v)| v * v)
        .sum();
    match norm {
        CoefNorm::SquaredFrobenius => sq,
        CoefNorm::Frobenius => sq.sqrt(),
    }
}

/// `d coef_regularizer / d C`.
pub fn coef_regularizer_grad(c: &SelfExpressionMatrix, norm: CoefNorm) -> Array2<f64> {
    let eff = c.effective();
    match norm {
        CoefNorm::SquaredFrobenius => eff * 2.0,
        CoefNorm::Frobenius => {
            let n = coef_regularizer(c, CoefNorm::Frobenius);
            if n == 0.0 {
                Array2::zeros(eff.dim())
            } else {
                eff / n
            }
        }
    }
}
