use std::time::Instant;

use rayon::prelude::*;

use super::config::{ExperimentConfig, SearchAlgo};
use crate::bayesnet::{
    gate_training_data, hill_climb, naive_bayes_structure, tabu_search, BayesianNetwork, Dag, DiscreteData,
    Discretizer,
};
use crate::clustering::{ClusterModel, KSelection};
use crate::data::ReturnsDataset;
use crate::ensemble::GatedEnsemble;
use crate::experts::{train_expert, ExpertNet, TrainSpec};
use crate::rng::derive;
use crate::{Error, Result};

// sub-stream ids under a trial seed
const STREAM_CLUSTER: u64 = 0;
const STREAM_SEARCH: u64 = 1;
const STREAM_EXPERT: u64 = 100;

/// How the gate network's structure is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GateStructure {
    /// Score-based search configured by the experiment.
    Search,
    /// Gate as the only parent of every feature.
    NaiveBayes,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrainTiming {
    pub total_secs: f64,
    /// Slowest single expert.
    pub max_expert_secs: f64,
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub ensemble: GatedEnsemble,
    pub timing: TrainTiming,
}

fn check_train(train: &ReturnsDataset) -> Result<()> {
    if train.is_empty() {
        return Err(Error::Size { needed: 1, got: 0 });
    }
    if train.labels.len() != train.len() {
        return Err(Error::Data("training labels and rows differ in length".into()));
    }
    Ok(())
}

/// Train one expert per group of row indices, in parallel. Returns the
/// experts in group order and each one's wall-clock training time.
pub fn train_experts(
    features: &[Vec<f64>],
    labels: &[u8],
    groups: &[Vec<usize>],
    spec: &TrainSpec,
    seed: u64,
) -> Result<(Vec<ExpertNet>, Vec<f64>)> {
    let results: Vec<Result<(ExpertNet, f64)>> = groups
        .par_iter()
        .enumerate()
        .map(|(c, rows)| {
            let start = Instant::now();
            let xs: Vec<Vec<f64>> = rows.iter().map(|&i| features[i].clone()).collect();
            let ys: Vec<u8> = rows.iter().map(|&i| labels[i]).collect();
            let spec = TrainSpec { seed: derive(seed, STREAM_EXPERT + c as u64), ..spec.clone() };
            let net = train_expert(&xs, &ys, &spec)?;
            Ok((net, start.elapsed().as_secs_f64()))
        })
        .collect();
    let mut experts = Vec::with_capacity(groups.len());
    let mut secs = Vec::with_capacity(groups.len());
    for r in results {
        let (net, t) = r?;
        experts.push(net);
        secs.push(t);
    }
    Ok((experts, secs))
}

/// Clustering plus one expert per cluster; shared by the gated pipeline and
/// the centroid-routing baseline.
pub fn cluster_and_train(
    train: &ReturnsDataset,
    k: &KSelection,
    spec: &TrainSpec,
    seed: u64,
) -> Result<(ClusterModel, Vec<ExpertNet>, Vec<f64>)> {
    check_train(train)?;
    let clusters = k.cluster(&train.features, derive(seed, STREAM_CLUSTER))?;
    let (experts, secs) = train_experts(&train.features, &train.labels, &clusters.members(), spec, seed)?;
    Ok((clusters, experts, secs))
}

/// Learn the gate structure on discretized features plus the cluster column.
pub fn learn_structure(data: &DiscreteData, cfg: &ExperimentConfig, structure: GateStructure, seed: u64) -> Result<Dag> {
    let gate = data.node_count() - 1;
    match structure {
        GateStructure::NaiveBayes => naive_bayes_structure(gate, data.cards()[gate]),
        GateStructure::Search => {
            let spec = cfg.score_spec();
            let seed = derive(seed, STREAM_SEARCH);
            let result = match cfg.method.algo {
                SearchAlgo::Hill => hill_climb(data, &spec, gate, seed)?,
                SearchAlgo::Tabu => tabu_search(data, &spec, gate, seed, cfg.tabu_tenure, cfg.tabu_iters)?,
            };
            Ok(result.dag)
        }
    }
}

/// Cluster, train experts, learn the gate network, assemble the ensemble.
pub fn train_pipeline(train: &ReturnsDataset, cfg: &ExperimentConfig, seed: u64) -> Result<TrainedModel> {
    train_with(train, cfg, &cfg.k, GateStructure::Search, seed)
}

pub fn train_with(
    train: &ReturnsDataset,
    cfg: &ExperimentConfig,
    k: &KSelection,
    structure: GateStructure,
    seed: u64,
) -> Result<TrainedModel> {
    cfg.validate()?;
    let start = Instant::now();
    let (clusters, experts, secs) = cluster_and_train(train, k, &cfg.expert, seed)?;
    let discretizer = Discretizer::fit(&train.features, cfg.bins)?;
    let data = gate_training_data(&discretizer, &train.features, &clusters.assignments, clusters.k)?;
    let dag = learn_structure(&data, cfg, structure, seed)?;
    let bn = BayesianNetwork::fit(dag, &data, discretizer, cfg.prior_count)?;
    let ensemble = GatedEnsemble::new(experts, bn, cfg.threshold, clusters)?;
    let timing = TrainTiming {
        total_secs: start.elapsed().as_secs_f64(),
        max_expert_secs: secs.iter().copied().fold(0.0, f64::max),
    };
    Ok(TrainedModel { ensemble, timing })
}
