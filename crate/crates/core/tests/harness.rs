use bnmoe::bayesnet::{naive_bayes_structure, BayesianNetwork, DiscreteData, Discretizer};
use bnmoe::clustering::KSelection;
use bnmoe::ensemble::{decide, mix};
use bnmoe::experts::{Expert, TrainSpec};
use bnmoe::harness::{
    baseline_hard_kmeans, baseline_oracle_gate, cluster_and_train, metrics, run_trials, synth_generate,
    ExperimentConfig, Summary, SynthSpec,
};

fn quick_config(k: usize, trials: usize) -> ExperimentConfig {
    ExperimentConfig {
        k: KSelection::Fixed { k },
        expert: TrainSpec { epochs: 15, ..TrainSpec::default() },
        trials,
        seed: 3,
        ..ExperimentConfig::default()
    }
}

#[test]
fn hard_kmeans_equals_one_hot_gating() {
    let data = synth_generate(&SynthSpec { regimes: 3, n_train: 500, n_test: 200, dim: 3, ..SynthSpec::default() })
        .unwrap();
    let cfg = quick_config(3, 1);
    let report = baseline_hard_kmeans(&data.train, &data.test, &cfg).unwrap();

    let (clusters, experts, _) = cluster_and_train(&data.train, &cfg.k, &cfg.expert, cfg.seed).unwrap();
    let predictions: Vec<u8> = data
        .test
        .features
        .iter()
        .map(|x| {
            let mut gate = vec![0.0; clusters.k];
            gate[clusters.assign(x)] = 1.0;
            let outputs: Vec<[f64; 2]> = experts.iter().map(|e| e.predict_proba(x)).collect();
            decide(mix(&gate, &outputs))
        })
        .collect();
    let m = metrics(&data.test.labels, &predictions).unwrap();
    assert_eq!(report.trials[0].accuracy, m.accuracy);
    assert_eq!(report.trials[0].f1, m.f1);
}

#[test]
fn naive_bayes_gate_by_hand() {
    // two binary features and a binary gate; features take values 0/1
    let rows: [[usize; 3]; 10] = [
        [0, 0, 0], [0, 0, 0], [0, 1, 0], [1, 0, 0], [0, 0, 0],
        [1, 1, 1], [1, 1, 1], [1, 0, 1], [0, 1, 1], [1, 1, 1],
    ];
    let features: Vec<Vec<f64>> = rows.iter().map(|r| vec![r[0] as f64, r[1] as f64]).collect();
    let disc = Discretizer::fit(&features, 2).unwrap();
    let data = DiscreteData::from_rows(&rows.map(|r| r.to_vec()), vec![2, 2, 2]).unwrap();
    let bn = BayesianNetwork::fit(naive_bayes_structure(2, 2).unwrap(), &data, disc, 2.0).unwrap();

    // Dirichlet-MAP at α = 2 is (n_k + 1) / (n + 2) for binary nodes.
    let prior = [6.0 / 12.0, 6.0 / 12.0];
    // per gate state: P(x0 = 1 | g), P(x1 = 1 | g)
    let p1 = [[2.0 / 7.0, 2.0 / 7.0], [5.0 / 7.0, 5.0 / 7.0]];
    for x in [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]] {
        let like = |g: usize| {
            let f = |j: usize| if x[j] == 1.0 { p1[g][j] } else { 1.0 - p1[g][j] };
            prior[g] * f(0) * f(1)
        };
        let z = like(0) + like(1);
        let post = bn.posterior_gate(&x, &[false, false]).unwrap();
        assert!((post[0] - like(0) / z).abs() < 1e-12, "{x:?}: {post:?}");
        assert!((post[1] - like(1) / z).abs() < 1e-12);
    }
}

#[test]
fn report_aggregates_recompute() {
    let data = synth_generate(&SynthSpec { regimes: 2, n_train: 300, n_test: 100, dim: 2, ..SynthSpec::default() })
        .unwrap();
    let report = run_trials(&data.train, &data.test, &quick_config(2, 3)).unwrap();
    let acc: Vec<f64> = report.trials.iter().map(|t| t.accuracy).collect();
    assert_eq!(report.accuracy, Summary::of(&acc));
    let mean = acc.iter().sum::<f64>() / 3.0;
    let sd = (acc.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / 2.0).sqrt();
    assert!((report.accuracy.mean - mean).abs() < 1e-15);
    assert!((report.accuracy.std_error - sd / 3f64.sqrt()).abs() < 1e-15);
    assert!(report.trials.iter().all(|t| (0.0..=1.0).contains(&t.accuracy) && (0.0..=1.0).contains(&t.f1)));
    assert_eq!(report.trials.iter().map(|t| t.seed).collect::<Vec<_>>(), [3, 4, 5]);
}

#[test]
fn oracle_gate_not_beaten_beyond_noise() {
    let data = synth_generate(&SynthSpec::default()).unwrap();
    let cfg = ExperimentConfig { trials: 20, ..ExperimentConfig::default() };
    let learned = run_trials(&data.train, &data.test, &cfg).unwrap();
    let oracle =
        baseline_oracle_gate(&data.train, &data.test, &data.train_regimes, &data.test_regimes, &cfg).unwrap();
    // two standard errors of the difference of the two means
    let se = learned.accuracy.std_error.hypot(oracle.accuracy.std_error);
    assert!(
        oracle.accuracy.mean + 2.0 * se >= learned.accuracy.mean,
        "oracle {:?} vs learned {:?}",
        oracle.accuracy,
        learned.accuracy
    );
}
