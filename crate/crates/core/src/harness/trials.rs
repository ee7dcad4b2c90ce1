use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, SearchMethod};
use super::metrics::{metrics, Summary};
use super::pipeline::{cluster_and_train, train_experts, train_with, GateStructure};
use crate::clustering::KSelection;
use crate::data::ReturnsDataset;
use crate::experts::{Expert, ExpertNet};
use crate::{argmax, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub accuracy: f64,
    pub f1: f64,
    pub train_secs: f64,
    pub max_expert_secs: f64,
    /// Number of experts actually trained.
    pub k: usize,
}

/// Per-trial results of one method and their aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub label: String,
    pub trials: Vec<TrialRecord>,
    /// Mean ± standard error across trials.
    pub accuracy: Summary,
    pub f1: Summary,
    /// Mean ± standard deviation across trials.
    pub train_secs: Summary,
    pub max_expert_secs: Summary,
    pub mean_k: f64,
}

impl EvalReport {
    pub fn from_trials(label: impl Into<String>, trials: Vec<TrialRecord>) -> Self {
        let col = |f: fn(&TrialRecord) -> f64| Summary::of(&trials.iter().map(f).collect::<Vec<_>>());
        EvalReport {
            label: label.into(),
            accuracy: col(|t| t.accuracy),
            f1: col(|t| t.f1),
            train_secs: col(|t| t.train_secs),
            max_expert_secs: col(|t| t.max_expert_secs),
            mean_k: col(|t| t.k as f64).mean,
            trials,
        }
    }
}

fn check_pair(train: &ReturnsDataset, test: &ReturnsDataset) -> Result<()> {
    if test.is_empty() {
        return Err(Error::Size { needed: 1, got: 0 });
    }
    if train.features.first().map(Vec::len) != test.features.first().map(Vec::len) {
        return Err(Error::Data("train and test feature counts differ".into()));
    }
    Ok(())
}

struct TrialOutcome {
    predictions: Vec<u8>,
    train_secs: f64,
    max_expert_secs: f64,
    k: usize,
}

fn repeat(
    label: String,
    test: &ReturnsDataset,
    cfg: &ExperimentConfig,
    mut one: impl FnMut(u64) -> Result<TrialOutcome>,
) -> Result<EvalReport> {
    cfg.validate()?;
    let mut records = Vec::with_capacity(cfg.trials);
    for trial in 0..cfg.trials {
        let seed = cfg.seed.wrapping_add(trial as u64);
        let out = one(seed)?;
        let m = metrics(&test.labels, &out.predictions)?;
        log::debug!("{label} trial {trial}: accuracy {:.4}, f1 {:.4}", m.accuracy, m.f1);
        records.push(TrialRecord {
            trial,
            seed,
            accuracy: m.accuracy,
            f1: m.f1,
            train_secs: out.train_secs,
            max_expert_secs: out.max_expert_secs,
            k: out.k,
        });
    }
    let report = EvalReport::from_trials(label, records);
    log::info!(
        "{}: accuracy {:.4} ± {:.4}, f1 {:.4} ± {:.4}",
        report.label,
        report.accuracy.mean,
        report.accuracy.std_error,
        report.f1.mean,
        report.f1.std_error
    );
    Ok(report)
}

fn gated(
    label: String,
    train: &ReturnsDataset,
    test: &ReturnsDataset,
    cfg: &ExperimentConfig,
    k: KSelection,
    structure: GateStructure,
) -> Result<EvalReport> {
    check_pair(train, test)?;
    repeat(label, test, cfg, |seed| {
        let model = train_with(train, cfg, &k, structure, seed)?;
        let batch = model.ensemble.predict_batch(&test.features)?;
        Ok(TrialOutcome {
            predictions: batch.labels,
            train_secs: model.timing.total_secs,
            max_expert_secs: model.timing.max_expert_secs,
            k: model.ensemble.k(),
        })
    })
}

/// The proposed method, `cfg.trials` times with seeds `cfg.seed + t`.
pub fn run_trials(train: &ReturnsDataset, test: &ReturnsDataset, cfg: &ExperimentConfig) -> Result<EvalReport> {
    gated(format!("proposed {}", cfg.label()), train, test, cfg, cfg.k, GateStructure::Search)
}

/// Gate structure fixed to naive Bayes, K chosen by X-means.
pub fn baseline_naive_bayes(train: &ReturnsDataset, test: &ReturnsDataset, cfg: &ExperimentConfig) -> Result<EvalReport> {
    gated("naive-bayes dynamic".into(), train, test, cfg, KSelection::dynamic(), GateStructure::NaiveBayes)
}

fn label_of(expert: &impl Expert, x: &[f64]) -> u8 {
    argmax(&expert.predict_proba(x)) as u8
}

/// One expert on all training rows.
pub fn baseline_single(train: &ReturnsDataset, test: &ReturnsDataset, cfg: &ExperimentConfig) -> Result<EvalReport> {
    check_pair(train, test)?;
    let everyone = vec![(0..train.len()).collect::<Vec<_>>()];
    repeat("single".into(), test, cfg, |seed| {
        let start = Instant::now();
        let (experts, secs) = train_experts(&train.features, &train.labels, &everyone, &cfg.expert, seed)?;
        let predictions = test.features.iter().map(|x| label_of(&experts[0], x)).collect();
        Ok(TrialOutcome { predictions, train_secs: start.elapsed().as_secs_f64(), max_expert_secs: secs[0], k: 1 })
    })
}

/// Per-cluster experts; each test row goes to the expert of its nearest
/// centroid.
pub fn baseline_hard_kmeans(train: &ReturnsDataset, test: &ReturnsDataset, cfg: &ExperimentConfig) -> Result<EvalReport> {
    check_pair(train, test)?;
    repeat(format!("hard-kmeans {}", cfg.k.label()), test, cfg, |seed| {
        let start = Instant::now();
        let (clusters, experts, secs) = cluster_and_train(train, &cfg.k, &cfg.expert, seed)?;
        let predictions = test
            .features
            .iter()
            .map(|x| label_of(&experts[clusters.assign(x)], x))
            .collect();
        Ok(TrialOutcome {
            predictions,
            train_secs: start.elapsed().as_secs_f64(),
            max_expert_secs: secs.iter().copied().fold(0.0, f64::max),
            k: clusters.k,
        })
    })
}

/// Per-regime experts routed by known regime labels (e.g. from the
/// synthetic generator). Upper reference for any learned gate.
pub fn baseline_oracle_gate(
    train: &ReturnsDataset,
    test: &ReturnsDataset,
    train_regimes: &[usize],
    test_regimes: &[usize],
    cfg: &ExperimentConfig,
) -> Result<EvalReport> {
    check_pair(train, test)?;
    if train_regimes.len() != train.len() || test_regimes.len() != test.len() {
        return Err(Error::Usage("one regime label per row is required".into()));
    }
    let k = train_regimes.iter().chain(test_regimes).max().map_or(0, |m| m + 1);
    let mut groups = vec![Vec::new(); k];
    for (i, &r) in train_regimes.iter().enumerate() {
        groups[r].push(i);
    }
    if groups.iter().any(Vec::is_empty) {
        return Err(Error::Data("every regime needs at least one training row".into()));
    }
    repeat("oracle-gate".into(), test, cfg, |seed| {
        let start = Instant::now();
        let (experts, secs): (Vec<ExpertNet>, Vec<f64>) =
            train_experts(&train.features, &train.labels, &groups, &cfg.expert, seed)?;
        let predictions = test
            .features
            .iter()
            .zip(test_regimes)
            .map(|(x, &r)| label_of(&experts[r], x))
            .collect();
        Ok(TrialOutcome {
            predictions,
            train_secs: start.elapsed().as_secs_f64(),
            max_expert_secs: secs.iter().copied().fold(0.0, f64::max),
            k,
        })
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    Method,
    K,
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "method" => Ok(SweepAxis::Method),
            "k" | "K" => Ok(SweepAxis::K),
            _ => Err(Error::Config(format!("unknown sweep axis {s:?}; expected k or method"))),
        }
    }
}

/// Values visited on the K axis: fixed 2..=7 then dynamic.
pub fn k_axis() -> Vec<KSelection> {
    (2..=7).map(|k| KSelection::Fixed { k }).chain([KSelection::dynamic()]).collect()
}

/// Descending mean accuracy; ties broken by higher mean F1.
pub fn rank(reports: &mut [EvalReport]) {
    reports.sort_by(|a, b| {
        b.accuracy
            .mean
            .total_cmp(&a.accuracy.mean)
            .then(b.f1.mean.total_cmp(&a.f1.mean))
    });
}

/// [`run_trials`] at every point of `axis`, ranked best first.
pub fn sweep(
    train: &ReturnsDataset,
    test: &ReturnsDataset,
    base: &ExperimentConfig,
    axis: SweepAxis,
) -> Result<Vec<EvalReport>> {
    let configs: Vec<ExperimentConfig> = match axis {
        SweepAxis::Method => SearchMethod::ALL
            .iter()
            .map(|&method| ExperimentConfig { method, ..base.clone() })
            .collect(),
        SweepAxis::K => k_axis().into_iter().map(|k| ExperimentConfig { k, ..base.clone() }).collect(),
    };
    let mut reports = configs
        .iter()
        .map(|cfg| run_trials(train, test, cfg))
        .collect::<Result<Vec<_>>>()?;
    rank(&mut reports);
    Ok(reports)
}
