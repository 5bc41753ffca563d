//! Per-node positive sets for the neighborhood contrast objective: each node's
//! `K` most cosine-similar peers.

use std::cmp::Ordering;

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::similarity::unit_rows;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PositiveMask {
    mask: Array2<bool>,
    neighborhood_size: usize,
    /// Positive indices per row, ascending.
    positives: Vec<Vec<usize>>,
}

impl PositiveMask {
    pub fn mask(&self) -> &Array2<bool> {
        &self.mask
    }

    pub fn neighborhood_size(&self) -> usize {
        self.neighborhood_size
    }

    pub fn num_nodes(&self) -> usize {
        self.mask.nrows()
    }

    pub fn positives(&self, node: usize) -> &[usize] {
        &self.positives[node]
    }

    pub fn is_positive(&self, i: usize, j: usize) -> bool {
        self.mask[[i, j]]
    }

    /// Builds a mask from explicit per-node positive lists.
    pub fn from_lists(lists: Vec<Vec<usize>>, neighborhood_size: usize) -> Result<Self> {
        let n = lists.len();
        let mut mask = Array2::from_elem((n, n), false);
        let mut positives = Vec::with_capacity(n);
        for (i, mut list) in lists.into_iter().enumerate() {
            list.sort_unstable();
            list.dedup();
            if list.iter().any(|&j| j == i || j >= n) {
                return Err(Error::Config(format!(
                    "positive list of node {i} contains itself or an out-of-range node"
                )));
            }
            for &j in &list {
                mask[[i, j]] = true;
            }
            positives.push(list);
        }
        Ok(PositiveMask {
            mask,
            neighborhood_size,
            positives,
        })
    }
}

/// Selects, for every node, the `k` other nodes with the highest cosine
/// similarity. Ties go to the lower node index; zero rows are similar to
/// nothing (similarity 0).
pub fn knn_positive_mask(representations: ArrayView2<f64>, k: usize) -> Result<PositiveMask> {
    if k == 0 {
        return Err(Error::Config("neighborhood size K must be positive".into()));
    }
    let n = representations.nrows();
    if n < 2 {
        return Err(Error::Config(format!(
            "neighbor selection needs at least 2 nodes, got {n}"
        )));
    }
    if representations.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("knn representations"));
    }
    let take = k.min(n - 1);
    let (unit, _) = unit_rows(representations);
    let sims = unit.dot(&unit.t());

    let mut lists = Vec::with_capacity(n);
    let mut order: Vec<usize> = Vec::with_capacity(n - 1);
    for i in 0..n {
        let row = sims.row(i);
        order.clear();
        order.extend((0..n).filter(|&j| j != i));
        let by_rank = |a: &usize, b: &usize| -> Ordering {
            row[*b]
                .partial_cmp(&row[*a])
                .unwrap_or(Ordering::Equal)
                .then(a.cmp(b))
        };
        if take < order.len() {
            order.select_nth_unstable_by(take - 1, by_rank);
        }
        lists.push(order[..take].to_vec());
    }
    PositiveMask::from_lists(lists, k)
}
