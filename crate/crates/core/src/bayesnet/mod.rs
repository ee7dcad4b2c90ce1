//! Discrete Bayesian network over `d` feature nodes plus one gate node
//! (id `d`) whose state is the index of the expert responsible for an input.

mod cpt;
mod dag;
mod discretize;
pub mod inference;
mod score;
mod search;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub use cpt::{fit_cpts, Cpt, DEFAULT_PRIOR_COUNT};
pub use dag::{count_dags, naive_bayes_structure, Dag};
pub use discretize::{Discretizer, DEFAULT_BINS};
pub use score::{family_score, score, Criterion, DiscreteData, ScoreSpec, DEFAULT_MAX_PARENTS};
pub use search::{hill_climb, tabu_search, Move, SearchResult, DEFAULT_TABU_ITERS, DEFAULT_TENURE};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesianNetwork {
    pub dag: Dag,
    /// State count of every node; the last entry is the gate's K.
    pub cards: Vec<usize>,
    pub cpts: Vec<Cpt>,
    pub discretizer: Discretizer,
    pub gate: usize,
}

/// Imputed state of a missing feature and its posterior distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Imputation {
    pub state: usize,
    pub distribution: Vec<f64>,
}

/// Discretize continuous training features and append the cluster index as
/// the gate column.
pub fn gate_training_data(
    discretizer: &Discretizer,
    features: &[Vec<f64>],
    clusters: &[usize],
    k: usize,
) -> Result<DiscreteData> {
    let mut columns = discretizer.transform_columns(features);
    columns.push(clusters.to_vec());
    let mut cards = discretizer.cardinalities();
    cards.push(k);
    DiscreteData::new(columns, cards)
}

impl BayesianNetwork {
    /// Estimate CPTs for `dag` and bundle them with the discretizer. The last
    /// column of `data` is the gate.
    pub fn fit(dag: Dag, data: &DiscreteData, discretizer: Discretizer, prior_count: f64) -> Result<Self> {
        let d = discretizer.dim();
        if data.node_count() != d + 1 || dag.node_count() != d + 1 {
            return Err(Error::Data(format!(
                "expected {} nodes (features + gate), got data {} / structure {}",
                d + 1,
                data.node_count(),
                dag.node_count()
            )));
        }
        let cpts = fit_cpts(&dag, data, prior_count)?;
        Ok(BayesianNetwork {
            dag,
            cards: data.cards().to_vec(),
            cpts,
            discretizer,
            gate: d,
        })
    }

    pub fn feature_count(&self) -> usize {
        self.gate
    }

    pub fn gate_states(&self) -> usize {
        self.cards[self.gate]
    }

    fn evidence(&self, x: &[f64], missing: &[bool]) -> Result<Vec<Option<usize>>> {
        let d = self.feature_count();
        if x.len() != d || missing.len() != d {
            return Err(Error::Usage(format!(
                "expected {d} features and mask entries, got {} and {}",
                x.len(),
                missing.len()
            )));
        }
        let mut ev = Vec::with_capacity(d + 1);
        for (j, (&v, &m)) in x.iter().zip(missing).enumerate() {
            if m {
                ev.push(None);
            } else if v.is_finite() {
                ev.push(Some(self.discretizer.bin(j, v)));
            } else {
                return Err(Error::Data(format!("feature {j} is not finite: {v}")));
            }
        }
        ev.push(None);
        Ok(ev)
    }

    /// `P(gate = c | observed features)` with missing features summed out.
    pub fn posterior_gate(&self, x: &[f64], missing: &[bool]) -> Result<Vec<f64>> {
        let ev = self.evidence(x, missing)?;
        Ok(inference::query(&self.cpts, &self.cards, self.gate, &ev))
    }

    /// Most probable state of the missing feature `target` given the observed
    /// ones (ties → lowest state).
    pub fn impute(&self, x: &[f64], missing: &[bool], target: usize) -> Result<Imputation> {
        if target >= self.feature_count() {
            return Err(Error::Usage(format!("feature {target} out of range")));
        }
        if !missing.get(target).copied().unwrap_or(false) {
            return Err(Error::Usage(format!("feature {target} is observed; nothing to impute")));
        }
        let ev = self.evidence(x, missing)?;
        let distribution = inference::query(&self.cpts, &self.cards, target, &ev);
        Ok(Imputation { state: crate::argmax(&distribution), distribution })
    }

    /// Joint probability of a complete discrete assignment.
    pub fn joint_probability(&self, states: &[usize]) -> f64 {
        inference::joint_probability(&self.cpts, &self.cards, states)
    }

    pub fn to_dot(&self, names: &[String]) -> Result<String> {
        export_dot(self, names)
    }
}

fn quote(name: &str) -> String {
    format!("\"{}\"", name.replace('\\', "\\\\").replace('"', "\\\""))
}

/// GraphViz rendering; the gate node is drawn as a filled box.
pub fn export_dot(bn: &BayesianNetwork, names: &[String]) -> Result<String> {
    let nodes = bn.dag.node_count();
    if names.len() != nodes {
        return Err(Error::Usage(format!("need {nodes} node names, got {}", names.len())));
    }
    let mut out = String::from("digraph bayesnet {\n  rankdir=LR;\n");
    for (i, name) in names.iter().enumerate() {
        if i == bn.gate {
            let _ = writeln!(out, "  {} [shape=box, style=filled, fillcolor=lightgrey];", quote(name));
        } else {
            let _ = writeln!(out, "  {} [shape=ellipse];", quote(name));
        }
    }
    for (u, v) in bn.dag.edges() {
        let _ = writeln!(out, "  {} -> {};", quote(&names[u]), quote(&names[v]));
    }
    out.push_str("}\n");
    Ok(out)
}
