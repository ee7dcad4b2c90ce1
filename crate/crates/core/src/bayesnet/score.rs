use serde::{Deserialize, Serialize};

use super::Dag;
use crate::{Error, Result};

/// Column-major table of discrete states with per-column cardinality.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteData {
    columns: Vec<Vec<usize>>,
    cards: Vec<usize>,
    rows: usize,
}

impl DiscreteData {
    pub fn new(columns: Vec<Vec<usize>>, cards: Vec<usize>) -> Result<Self> {
        if columns.len() != cards.len() {
            return Err(Error::Data(format!(
                "{} columns but {} cardinalities",
                columns.len(),
                cards.len()
            )));
        }
        let rows = columns.first().map_or(0, Vec::len);
        for (i, (col, &r)) in columns.iter().zip(&cards).enumerate() {
            if col.len() != rows {
                return Err(Error::Data(format!("column {i} has {} rows, expected {rows}", col.len())));
            }
            if r == 0 {
                return Err(Error::Data(format!("column {i} has zero states")));
            }
            if let Some(s) = col.iter().find(|&&s| s >= r) {
                return Err(Error::Data(format!("state {s} out of range for column {i} with {r} states")));
            }
        }
        Ok(DiscreteData { columns, cards, rows })
    }

    /// Build from row-major records, inferring nothing: `cards` is required.
    pub fn from_rows(rows: &[Vec<usize>], cards: Vec<usize>) -> Result<Self> {
        let columns = (0..cards.len())
            .map(|j| rows.iter().map(|r| r[j]).collect())
            .collect();
        Self::new(columns, cards)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn node_count(&self) -> usize {
        self.cards.len()
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn column(&self, node: usize) -> &[usize] {
        &self.columns[node]
    }

    /// Number of parent configurations `q_i`.
    pub fn config_count(&self, parents: &[usize]) -> usize {
        parents.iter().map(|&p| self.cards[p]).product()
    }

    /// Mixed-radix parent configuration of one row; the first parent (lowest
    /// id) is the most significant digit.
    pub fn config_index(&self, parents: &[usize], row: usize) -> usize {
        parents
            .iter()
            .fold(0, |acc, &p| acc * self.cards[p] + self.columns[p][row])
    }

    /// `n_ijk` counts as a flat `[q_i × r_i]` table.
    pub fn family_counts(&self, node: usize, parents: &[usize]) -> Vec<usize> {
        let r = self.cards[node];
        let mut counts = vec![0usize; self.config_count(parents) * r];
        for row in 0..self.rows {
            let j = self.config_index(parents, row);
            counts[j * r + self.columns[node][row]] += 1;
        }
        counts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Criterion {
    LogLik,
    Aic,
    /// Penalty constant `ln(node count)`.
    BicNodes,
    /// Penalty constant `ln(rows)`.
    BicN,
}

impl Criterion {
    pub fn label(self) -> &'static str {
        match self {
            Criterion::LogLik => "loglik",
            Criterion::Aic => "aic",
            Criterion::BicNodes => "bic",
            Criterion::BicN => "bic-n",
        }
    }
}

pub const DEFAULT_MAX_PARENTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreSpec {
    pub criterion: Criterion,
    pub max_parents: usize,
}

impl ScoreSpec {
    pub fn new(criterion: Criterion) -> Self {
        ScoreSpec { criterion, max_parents: DEFAULT_MAX_PARENTS }
    }

    /// Penalty constant `c_B` for a data set with `nodes` variables and `rows` records.
    pub fn penalty(&self, nodes: usize, rows: usize) -> f64 {
        match self.criterion {
            Criterion::LogLik => 0.0,
            Criterion::Aic => 2.0,
            Criterion::BicNodes => (nodes as f64).ln(),
            Criterion::BicN => (rows.max(1) as f64).ln(),
        }
    }
}

/// Per-node term of the criterion:
/// `−2 Σ_j Σ_k n_jk ln(n_jk / n_j) + c_B · q (r − 1)`, with `0 · ln 0 = 0`.
pub fn family_score(data: &DiscreteData, node: usize, parents: &[usize], penalty: f64) -> f64 {
    let r = data.cards()[node];
    let counts = data.family_counts(node, parents);
    let q = counts.len() / r;
    let mut loglik = 0.0;
    for row in counts.chunks_exact(r) {
        let n_j: usize = row.iter().sum();
        if n_j == 0 {
            continue;
        }
        let n_j = n_j as f64;
        for &n in row.iter().filter(|&&n| n > 0) {
            let n = n as f64;
            loglik += n * (n / n_j).ln();
        }
    }
    -2.0 * loglik + penalty * (q * (r - 1)) as f64
}

/// Criterion value of a whole structure; lower is better.
pub fn score(dag: &Dag, data: &DiscreteData, spec: &ScoreSpec) -> Result<f64> {
    if dag.node_count() != data.node_count() {
        return Err(Error::Data(format!(
            "structure has {} nodes but data has {} columns",
            dag.node_count(),
            data.node_count()
        )));
    }
    let penalty = spec.penalty(data.node_count(), data.rows());
    Ok((0..dag.node_count())
        .map(|i| family_score(data, i, dag.parents(i), penalty))
        .sum())
}
