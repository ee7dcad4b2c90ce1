//! Experiment orchestration: training pipeline, baselines, repeated trials,
//! sweeps, synthetic data and report files.

mod config;
mod metrics;
mod pipeline;
pub mod report;
mod synth;
mod trials;

pub use config::{format_k, parse_k, BicVariant, ExperimentConfig, MethodScore, SearchAlgo, SearchMethod};
pub use metrics::{metrics, Metrics, Summary};
pub use pipeline::{
    cluster_and_train, learn_structure, train_experts, train_pipeline, train_with, GateStructure, TrainTiming,
    TrainedModel,
};
pub use synth::{synth_generate, SynthData, SynthSpec};
pub use trials::{
    baseline_hard_kmeans, baseline_naive_bayes, baseline_oracle_gate, baseline_single, k_axis, rank, run_trials,
    sweep, EvalReport, SweepAxis, TrialRecord,
};
