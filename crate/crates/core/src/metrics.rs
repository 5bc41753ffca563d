//! External clustering metrics: accuracy under the best label matching,
//! normalized mutual information and adjusted Rand index.

use std::collections::BTreeMap;

use pathfinding::kuhn_munkres::kuhn_munkres;
use pathfinding::matrix::Matrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub acc: f64,
    pub nmi: f64,
    pub ari: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NmiNormalization {
    #[default]
    Arithmetic,
    Geometric,
}

/// Dense contingency table between two labelings (rows: `a`, columns: `b`).
struct Contingency {
    table: Vec<Vec<u64>>,
    row_sums: Vec<u64>,
    col_sums: Vec<u64>,
    n: u64,
}

fn dense_ids(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut ids = BTreeMap::new();
    for &l in labels {
        let next = ids.len();
        ids.entry(l).or_insert(next);
    }
    (labels.iter().map(|l| ids[l]).collect(), ids.len())
}

fn contingency(a: &[usize], b: &[usize]) -> Result<Contingency> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "label vectors differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let (a, ka) = dense_ids(a);
    let (b, kb) = dense_ids(b);
    let mut table = vec![vec![0u64; kb]; ka];
    for (&x, &y) in a.iter().zip(&b) {
        table[x][y] += 1;
    }
    let row_sums = table.iter().map(|r| r.iter().sum()).collect();
    let col_sums = (0..kb).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    Ok(Contingency {
        table,
        row_sums,
        col_sums,
        n: a.len() as u64,
    })
}

/// Fraction of nodes correctly labeled under the best one-to-one mapping
/// between predicted clusters and true classes.
pub fn clustering_accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let c = contingency(pred, truth)?;
    if c.n == 0 {
        return Ok(1.0);
    }
    let size = c.table.len().max(c.col_sums.len());
    let weights = Matrix::from_fn(size, size, |(i, j)| {
        c.table
            .get(i)
            .and_then(|r| r.get(j))
            .map_or(0i64, |&v| v as i64)
    });
    let (matched, _) = kuhn_munkres(&weights);
    Ok(matched as f64 / c.n as f64)
}

fn entropy(counts: &[u64], n: f64) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

pub fn nmi(pred: &[usize], truth: &[usize]) -> Result<f64> {
    nmi_with(pred, truth, NmiNormalization::Arithmetic)
}

pub fn nmi_with(pred: &[usize], truth: &[usize], norm: NmiNormalization) -> Result<f64> {
    let c = contingency(pred, truth)?;
    if c.n == 0 {
        return Ok(1.0);
    }
    let n = c.n as f64;
    let ha = entropy(&c.row_sums, n);
    let hb = entropy(&c.col_sums, n);
    if ha == 0.0 && hb == 0.0 {
        // both partitions are a single cluster
        return Ok(1.0);
    }
    let mut mi = 0.0;
    for (i, row) in c.table.iter().enumerate() {
        for (j, &nij) in row.iter().enumerate() {
            if nij == 0 {
                continue;
            }
            let nij = nij as f64;
            mi += nij / n * ((n * nij) / (c.row_sums[i] as f64 * c.col_sums[j] as f64)).ln();
        }
    }
    let denom = match norm {
        NmiNormalization::Arithmetic => 0.5 * (ha + hb),
        NmiNormalization::Geometric => (ha * hb).sqrt(),
    };
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok((mi / denom).clamp(0.0, 1.0))
}

fn pairs(x: u64) -> f64 {
    let x = x as f64;
    x * (x - 1.0) / 2.0
}

pub fn ari(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let c = contingency(pred, truth)?;
    let index: f64 = c.table.iter().flatten().map(|&v| pairs(v)).sum();
    let sum_a: f64 = c.row_sums.iter().map(|&v| pairs(v)).sum();
    let sum_b: f64 = c.col_sums.iter().map(|&v| pairs(v)).sum();
    let total = pairs(c.n);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = sum_a * sum_b / total;
    let max = 0.5 * (sum_a + sum_b);
    if max == expected {
        // both labelings are trivial (all one cluster or all singletons)
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

pub fn evaluate_labels(pred: &[usize], truth: &[usize]) -> Result<MetricReport> {
    Ok(MetricReport {
        acc: clustering_accuracy(pred, truth)?,
        nmi: nmi(pred, truth)?,
        ari: ari(pred, truth)?,
        n: pred.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn permutations(k: usize) -> Vec<Vec<usize>> {
        if k == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(k - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, k - 1);
                out.push(q);
            }
        }
        out
    }

    /// Maximum agreement over every bijection of `k` labels.
    fn brute_force_acc(pred: &[usize], truth: &[usize], k: usize) -> f64 {
        permutations(k)
            .iter()
            .map(|perm| {
                pred.iter()
                    .zip(truth)
                    .filter(|(p, t)| perm[**p] == **t)
                    .count()
            })
            .max()
            .unwrap() as f64
            / pred.len() as f64
    }

    #[test]
    fn accuracy_examples() {
        let truth = [0, 0, 1, 1, 2, 2];
        assert_eq!(clustering_accuracy(&truth, &truth).unwrap(), 1.0);
        assert_eq!(clustering_accuracy(&[2, 2, 0, 0, 1, 1], &truth).unwrap(), 1.0);
        assert_eq!(clustering_accuracy(&[0, 1, 1, 1], &[0, 0, 1, 1]).unwrap(), 0.75);
        assert!(clustering_accuracy(&[0], &[0, 1]).is_err());
    }

    #[test]
    fn accuracy_with_unequal_cluster_counts() {
        assert_eq!(clustering_accuracy(&[0, 0, 0, 0], &[0, 0, 1, 1]).unwrap(), 0.5);
        assert_eq!(clustering_accuracy(&[0, 1, 2, 3], &[0, 0, 1, 1]).unwrap(), 0.5);
    }

    #[test]
    fn nmi_examples() {
        let truth = [0, 0, 1, 1, 2];
        assert!((nmi(&truth, &truth).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(nmi(&[0, 0, 0, 0], &[0, 0, 1, 1]).unwrap(), 0.0);
        assert!(nmi(&[0, 1, 0, 1], &[0, 0, 1, 1]).unwrap().abs() < 1e-15);
        assert!((nmi_with(&[1, 1, 0, 0, 3], &truth, NmiNormalization::Geometric).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ari_examples() {
        let truth = [0, 0, 1, 1];
        assert_eq!(ari(&truth, &truth).unwrap(), 1.0);
        // 6 pairs: none agree-together in both; index 0, expected 2*2/6, max 2
        assert!((ari(&[0, 1, 0, 1], &truth).unwrap() + 0.5).abs() < 1e-15);
    }

    #[test]
    fn ari_of_random_labels_is_near_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let truth: Vec<usize> = (0..100).map(|i| i % 4).collect();
        let mean: f64 = (0..1000)
            .map(|_| {
                let pred: Vec<usize> = (0..100).map(|_| rng.gen_range(0..4)).collect();
                ari(&pred, &truth).unwrap()
            })
            .sum::<f64>()
            / 1000.0;
        assert!(mean.abs() < 0.02, "mean ARI {mean}");
    }

    fn labeling(n: usize, k: usize) -> impl Strategy<Value = Vec<usize>> {
        proptest::collection::vec(0..k, n)
    }

    proptest! {
        #[test]
        fn accuracy_matches_exhaustive_search(
            k in 1usize..=6,
            seed in any::<u64>(),
            n in 1usize..40,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pred: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
            let truth: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
            let fast = clustering_accuracy(&pred, &truth).unwrap();
            prop_assert!((fast - brute_force_acc(&pred, &truth, k)).abs() < 1e-12);
        }

        #[test]
        fn relabeling_invariance(a in labeling(30, 5), b in labeling(30, 5), shift in 1usize..5) {
            let perm = |l: &usize| (l + shift) % 5 + 10;
            let a2: Vec<usize> = a.iter().map(perm).collect();
            prop_assert!((clustering_accuracy(&a, &b).unwrap() - clustering_accuracy(&a2, &b).unwrap()).abs() < 1e-12);
            prop_assert!((nmi(&a, &b).unwrap() - nmi(&a2, &b).unwrap()).abs() < 1e-12);
            prop_assert!((ari(&a, &b).unwrap() - ari(&a2, &b).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn symmetric_and_in_range(a in labeling(25, 4), b in labeling(25, 4)) {
            let (n1, n2) = (nmi(&a, &b).unwrap(), nmi(&b, &a).unwrap());
            prop_assert!((n1 - n2).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&n1));
            let (r1, r2) = (ari(&a, &b).unwrap(), ari(&b, &a).unwrap());
            prop_assert!((r1 - r2).abs() < 1e-12);
            prop_assert!((-1.0..=1.0).contains(&r1));
            let acc = clustering_accuracy(&a, &b).unwrap();
            prop_assert!((0.0..=1.0).contains(&acc));
        }
    }
}
