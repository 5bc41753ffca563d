//! Cosine similarity, shared by neighbor selection and the contrastive losses.
//!
//! Zero-norm vectors have similarity 0 to everything, including themselves.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

pub fn cosine_similarity(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    let na = a.dot(&a).sqrt();
    let nb = b.dot(&b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    a.dot(&b) / (na * nb)
}

/// Row-normalized copy of `m` together with the original row norms.
/// Zero rows stay zero.
pub fn unit_rows(m: ArrayView2<f64>) -> (Array2<f64>, Array1<f64>) {
    let norms = m.map_axis(Axis(1), |r| r.dot(&r).sqrt());
    let mut unit = m.to_owned();
    for (mut row, &n) in unit.rows_mut().into_iter().zip(norms.iter()) {
        if n > 0.0 {
            row.mapv_inplace(|v| v / n);
        }
    }
    (unit, norms)
}

/// Backpropagates through [`unit_rows`]: given `d loss / d unit`, returns
/// `d loss / d m`. Rows with zero norm receive zero gradient.
pub fn unit_rows_backward(
    unit: ArrayView2<f64>,
    norms: ArrayView1<f64>,
    grad_unit: ArrayView2<f64>,
) -> Array2<f64> {
    let mut grad = grad_unit.to_owned();
    for (i, mut row) in grad.rows_mut().into_iter().enumerate() {
        let n = norms[i];
        if n == 0.0 {
            row.fill(0.0);
            continue;
        }
        let u = unit.row(i);
        let proj = row.dot(&u);
        row.zip_mut_with(&u, |g, &uv| *g = (*g - proj * uv) / n);
    }
    grad
}

/// Pairwise cosine similarity between the rows of `a` and the rows of `b`.
pub fn cosine_matrix(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Array2<f64> {
    let (ua, _) = unit_rows(a);
    let (ub, _) = unit_rows(b);
    ua.dot(&ub.t())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn worked_values() {
        let v = array![0.3, -2.0, 5.0];
        assert!((cosine_similarity(v.view(), v.view()) - 1.0).abs() < 1e-15);
        assert_eq!(
            cosine_similarity(array![1.0, 0.0].view(), array![0.0, 1.0].view()),
            0.0
        );
        let s = cosine_similarity(array![1.0, 1.0].view(), array![1.0, 0.0].view());
        assert!((s - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert_eq!(
            cosine_similarity(array![0.0, 0.0].view(), array![1.0, 0.0].view()),
            0.0
        );
    }

    #[test]
    fn matrix_agrees_with_pairwise() {
        let a = array![[1.0, 2.0], [0.0, 0.0], [-1.0, 0.5]];
        let b = array![[3.0, -1.0], [0.2, 0.1]];
        let m = cosine_matrix(a.view(), b.view());
        for i in 0..3 {
            for j in 0..2 {
                let s = cosine_similarity(a.row(i), b.row(j));
                assert!((m[[i, j]] - s).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn unit_rows_backward_matches_finite_differences() {
        let m = array![[0.4, -1.2, 0.7], [2.0, 0.1, -0.3]];
        let w = array![[0.3, 0.9, -0.5], [-1.1, 0.2, 0.6]];
        let f = |m: &Array2<f64>| (unit_rows(m.view()).0 * &w).sum();
        let (u, n) = unit_rows(m.view());
        let g = unit_rows_backward(u.view(), n.view(), w.view());
        let h = 1e-6;
        for idx in [(0, 0), (0, 2), (1, 1)] {
            let mut p = m.clone();
            p[idx] += h;
            let mut q = m.clone();
            q[idx] -= h;
            let fd = (f(&p) - f(&q)) / (2.0 * h);
            assert!((fd - g[idx]).abs() < 1e-8, "{fd} vs {}", g[idx]);
        }
    }
}
