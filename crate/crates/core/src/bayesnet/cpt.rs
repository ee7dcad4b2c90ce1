use serde::{Deserialize, Serialize};

use super::score::DiscreteData;
use super::Dag;
use crate::{Error, Result};

/// Default Dirichlet pseudo-count per cell; with 2 the MAP estimate is
/// Laplace smoothing `(n_jk + 1) / (n_j + r)`.
pub const DEFAULT_PRIOR_COUNT: f64 = 2.0;

/// Conditional probability table `P(node | parents)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cpt {
    pub node: usize,
    /// Sorted ascending; row index is mixed-radix over them, lowest id most significant.
    pub parents: Vec<usize>,
    pub states: usize,
    /// `[q × r]`, one row per parent configuration.
    pub table: Vec<Vec<f64>>,
}

impl Cpt {
    pub fn configs(&self) -> usize {
        self.table.len()
    }

    pub fn prob(&self, config: usize, state: usize) -> f64 {
        self.table[config][state]
    }
}

/// Dirichlet-MAP estimate of every CPT:
/// `θ_jk = (α + n_jk − 1) / (r·α + n_j − r)` for `k < r − 1`, the last state
/// by normalization, where `α` is the uniform prior count.
pub fn fit_cpts(dag: &Dag, data: &DiscreteData, prior_count: f64) -> Result<Vec<Cpt>> {
    if !(prior_count > 0.0) || !prior_count.is_finite() {
        return Err(Error::Parameter(format!("prior count must be positive, got {prior_count}")));
    }
    if dag.node_count() != data.node_count() {
        return Err(Error::Data("structure and data disagree on node count".into()));
    }
    (0..dag.node_count())
        .map(|node| {
            let parents = dag.parents(node).to_vec();
            let r = data.cards()[node];
            let counts = data.family_counts(node, &parents);
            let table = counts
                .chunks_exact(r)
                .enumerate()
                .map(|(j, row)| map_row(row, prior_count).ok_or_else(|| {
                    Error::Parameter(format!(
                        "prior count {prior_count} gives a non-positive probability for node {node}, parent configuration {j}"
                    ))
                }))
                .collect::<Result<_>>()?;
            Ok(Cpt { node, parents, states: r, table })
        })
        .collect()
}

fn map_row(counts: &[usize], prior: f64) -> Option<Vec<f64>> {
    let r = counts.len();
    if r == 1 {
        return Some(vec![1.0]);
    }
    let n_j: usize = counts.iter().sum();
    let denom = r as f64 * prior + n_j as f64 - r as f64;
    if !(denom > 0.0) {
        return None;
    }
    let mut row: Vec<f64> = counts[..r - 1]
        .iter()
        .map(|&n| (prior + n as f64 - 1.0) / denom)
        .collect();
    let last = 1.0 - row.iter().sum::<f64>();
    row.push(last);
    row.iter().all(|&p| p > 0.0 && p < 1.0).then_some(row)
}
