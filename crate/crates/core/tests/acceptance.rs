//! Acceptance suite: one PASS/FAIL line per criterion. Runs without the
//! libtest harness so the lines are always printed; exits nonzero if any
//! criterion fails.
//!
//! Criterion 9 needs real index data: set `BNMOE_ACCEPTANCE_CONFIG` to a
//! run config (TOML) whose `[data]` section points at the price files.

mod common;

use std::path::PathBuf;
use std::time::{Duration, Instant};

use bnmoe::bayesnet::{
    count_dags, fit_cpts, hill_climb, score, tabu_search, Cpt, Criterion, Dag, DiscreteData, ScoreSpec,
    DEFAULT_TABU_ITERS, DEFAULT_TENURE,
};
use bnmoe::cli::{cmd_train, load_data, RunConfig};
use bnmoe::clustering::{ClusterModel, KSelection};
use bnmoe::data::ReturnsDataset;
use bnmoe::ensemble::{apply_threshold, decide, mix, GatedEnsemble, DEFAULT_THRESHOLD};
use bnmoe::experts::{gradient_check, Expert, ExpertNet};
use bnmoe::harness::{
    baseline_oracle_gate, baseline_single, run_trials, sweep, synth_generate, train_pipeline, ExperimentConfig,
    SweepAxis, SynthSpec,
};
use bnmoe::argmax;
use rand::Rng;
use rand_distr::{Distribution, Normal};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Option<Outcome> {
    Some(Outcome { pass, detail: detail.into() })
}

type Check = fn() -> Option<Outcome>;

fn main() {
    let criteria: [(&str, Check, Option<Duration>); 11] = [
        ("C1 DAG counts and exhaustive enumeration", c1_dag_counts, Some(Duration::from_secs(1))),
        ("C2 exact inference vs joint enumeration", c2_inference, Some(Duration::from_secs(10))),
        ("C3 structure search reaches the exhaustive optimum", c3_structure, Some(Duration::from_secs(30))),
        ("C4 Dirichlet-MAP estimator", c4_map, None),
        ("C5 gradient check", c5_gradient, None),
        ("C6 gating algebra", c6_gating, None),
        ("C7 synthetic regimes: proposed vs single and oracle gate", c7_synthetic, Some(Duration::from_secs(600))),
        ("C8 K-sweep optimum near the true regime count", c8_k_sweep, None),
        ("C9 real index data band", c9_real_data, None),
        ("C10 gate stability under a missing dependent feature", c10_missing, None),
        ("C11 deterministic training bundle", c11_determinism, None),
    ];
    let mut failed = 0;
    for (name, run, limit) in criteria {
        let start = Instant::now();
        let result = std::panic::catch_unwind(run);
        let elapsed = start.elapsed();
        let line = match result {
            Ok(None) => format!("SKIP  {name}"),
            Ok(Some(o)) => {
                let in_time = limit.is_none_or(|l| elapsed <= l);
                let ok = o.pass && in_time;
                failed += usize::from(!ok);
                let budget = limit.map_or(String::new(), |l| format!(" (limit {}s)", l.as_secs()));
                format!(
                    "{}  {name}: {} [{:.2}s{budget}]",
                    if ok { "PASS" } else { "FAIL" },
                    o.detail,
                    elapsed.as_secs_f64()
                )
            }
            Err(_) => {
                failed += 1;
                format!("FAIL  {name}: panicked")
            }
        };
        println!("{line}");
    }
    if failed > 0 {
        println!("{failed} criterion/criteria failed");
        std::process::exit(1);
    }
}

fn c1_dag_counts() -> Option<Outcome> {
    let expected = [(2, 3u64), (3, 25), (4, 543), (5, 29281)];
    let mut parts = Vec::new();
    let mut pass = true;
    for (n, want) in expected {
        let counted = count_dags(n).unwrap();
        let enumerated = common::enumerate_dags(n, n - 1).len() as u64;
        pass &= counted == want && enumerated == want;
        parts.push(format!("{n}: {counted}/{enumerated}"));
    }
    outcome(pass, format!("count/enumerated {}", parts.join(", ")))
}

fn c2_inference() -> Option<Outcome> {
    let mut rng = common::rng(2);
    let mut worst = 0.0f64;
    let mut argmax_ok = true;
    let mut queries = 0;
    for _ in 0..50 {
        let n = rng.gen_range(2..=5);
        let cards: Vec<usize> = (0..n).map(|_| rng.gen_range(2..=3)).collect();
        let dag = common::random_dag(&mut rng, n, 3);
        let cpts = common::random_cpts(&mut rng, &dag, &cards);
        let bn = common::network(dag, cards.clone(), cpts);
        let d = n - 1;
        for _ in 0..4 {
            let x: Vec<f64> = (0..d).map(|j| rng.gen_range(0..cards[j]) as f64).collect();
            let missing: Vec<bool> = (0..d).map(|_| rng.gen_bool(0.4)).collect();
            let ev: Vec<Option<usize>> =
                (0..d).map(|j| (!missing[j]).then_some(x[j] as usize)).chain([None]).collect();
            let post = bn.posterior_gate(&x, &missing).unwrap();
            let oracle = common::enumerate_posterior(&bn.cpts, &cards, d, &ev);
            worst = post.iter().zip(&oracle).fold(worst, |w, (a, b)| w.max((a - b).abs()));
            queries += 1;
            for j in (0..d).filter(|&j| missing[j]) {
                let imp = bn.impute(&x, &missing, j).unwrap();
                let oracle = common::enumerate_posterior(&bn.cpts, &cards, j, &ev);
                worst = imp.distribution.iter().zip(&oracle).fold(worst, |w, (a, b)| w.max((a - b).abs()));
                argmax_ok &= imp.state == argmax(&oracle);
                queries += 1;
            }
        }
    }
    outcome(worst <= 1e-10 && argmax_ok, format!("{queries} queries, max abs error {worst:.2e}"))
}

fn strong_tree_data(n: usize, seed: u64) -> (Dag, DiscreteData) {
    // 0 → 1 → 2 and 0 → 3 with strong tables. Without a collider every
    // orientation of the skeleton scores the same, so greedy search cannot
    // lock itself out of the optimum by an early orientation choice.
    let dag = Dag::from_edges(4, &[(0, 1), (1, 2), (0, 3)]).unwrap();
    let cards = vec![2, 3, 2, 2];
    let cpts = vec![
        Cpt { node: 0, parents: vec![], states: 2, table: vec![vec![0.4, 0.6]] },
        Cpt { node: 1, parents: vec![0], states: 3, table: vec![vec![0.85, 0.1, 0.05], vec![0.05, 0.15, 0.8]] },
        Cpt { node: 2, parents: vec![1], states: 2, table: vec![vec![0.9, 0.1], vec![0.5, 0.5], vec![0.1, 0.9]] },
        Cpt { node: 3, parents: vec![0], states: 2, table: vec![vec![0.85, 0.15], vec![0.2, 0.8]] },
    ];
    let rows = common::sample(&mut common::rng(seed), &dag, &cards, &cpts, n);
    (dag, DiscreteData::from_rows(&rows, cards).unwrap())
}

fn c3_structure() -> Option<Outcome> {
    let (_, data) = strong_tree_data(2000, 3);
    let spec = ScoreSpec { criterion: Criterion::BicN, max_parents: 3 };
    let all = common::enumerate_dags(4, 3);
    let optimum = all
        .iter()
        .map(|m| score(&common::dag_from_masks(m), &data, &spec).unwrap())
        .fold(f64::INFINITY, f64::min);
    let hill = hill_climb(&data, &spec, 3, 0).unwrap();
    let tabu = tabu_search(&data, &spec, 3, 0, DEFAULT_TENURE, DEFAULT_TABU_ITERS).unwrap();
    let hs = score(&hill.dag, &data, &spec).unwrap();
    let ts = score(&tabu.dag, &data, &spec).unwrap();
    // Markov-equivalent optima agree up to summation order
    let same = |s: f64| (s - optimum).abs() <= 1e-9 * optimum.abs();
    outcome(
        all.len() == 543 && same(hs) && same(ts),
        format!("optimum {optimum:.6} over {} DAGs; hill {hs:.6}, tabu {ts:.6}", all.len()),
    )
}

fn c4_map() -> Option<Outcome> {
    let toy = DiscreteData::from_rows(&[vec![0], vec![0], vec![0], vec![1]], vec![2]).unwrap();
    let theta = fit_cpts(&Dag::empty(1), &toy, 2.0).unwrap()[0].table[0][0];
    let exact = (theta - 2.0 / 3.0).abs() <= 1e-12;

    let (dag, data) = strong_tree_data(500, 4);
    let cpts = fit_cpts(&dag, &data, 2.0).unwrap();
    let worst_row = cpts
        .iter()
        .flat_map(|c| c.table.iter())
        .map(|row| (row.iter().sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);
    let interior = cpts.iter().flat_map(|c| c.table.iter().flatten()).all(|&p| p > 0.0 && p < 1.0);
    outcome(
        exact && worst_row <= 1e-9 && interior,
        format!("counts (3,1) → {theta:.15}; max row-sum error {worst_row:.1e}"),
    )
}

fn c5_gradient() -> Option<Outcome> {
    let mut worst = 0.0f64;
    for seed in 0..10u64 {
        let net = ExpertNet::init(&[6, 6, 6, 2], seed);
        let mut rng = common::rng(1000 + seed);
        let xs: Vec<Vec<f64>> = (0..8).map(|_| (0..6).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
        let ys: Vec<u8> = (0..8).map(|_| rng.gen_range(0..2)).collect();
        worst = worst.max(gradient_check(&net, &xs, &ys, 1e-4));
    }
    outcome(worst < 1e-4, format!("max relative error {worst:.2e} over 10 seeds"))
}

struct Constant(f64);

impl Expert for Constant {
    fn input_dim(&self) -> usize {
        1
    }

    fn predict_proba(&self, _: &[f64]) -> [f64; 2] {
        [1.0 - self.0, self.0]
    }
}

fn c6_gating() -> Option<Outcome> {
    let thresholded = apply_threshold(&[0.9995, 0.0005], DEFAULT_THRESHOLD);
    let rule = thresholded == [0.9995, 0.0];

    // gate prior (0.6, 0.4), experts (0.9, 0.1) and (0.2, 0.8)
    let cpts = vec![
        Cpt { node: 0, parents: vec![], states: 2, table: vec![vec![0.5, 0.5]] },
        Cpt { node: 1, parents: vec![], states: 2, table: vec![vec![0.6, 0.4]] },
    ];
    let bn = common::network(Dag::empty(2), vec![2, 2], cpts);
    let clusters = ClusterModel { k: 2, centroids: vec![vec![0.0], vec![1.0]], assignments: vec![], inertia: 0.0, seed: 0 };
    let ens = GatedEnsemble::new(vec![Constant(0.1), Constant(0.8)], bn, DEFAULT_THRESHOLD, clusters).unwrap();
    let p = ens.predict_one(&[0.0], &[false]).unwrap();
    let hand = (p.combined[0] - 0.62).abs() < 1e-12 && (p.combined[1] - 0.38).abs() < 1e-12 && p.label == 0;

    let mut rng = common::rng(6);
    let mut agree = 0;
    for _ in 0..1000 {
        let k = rng.gen_range(1..=7);
        let raw: Vec<f64> = (0..k).map(|_| rng.gen::<f64>()).collect();
        let z: f64 = raw.iter().sum();
        let row = apply_threshold(&raw.iter().map(|v| v / z).collect::<Vec<_>>(), DEFAULT_THRESHOLD);
        let outputs: Vec<[f64; 2]> = (0..k).map(|_| rng.gen::<f64>()).map(|o| [1.0 - o, o]).collect();
        let lambda = 10f64.powf(rng.gen_range(-6.0..6.0));
        let scaled: Vec<f64> = row.iter().map(|w| w * lambda).collect();
        agree += usize::from(decide(mix(&row, &outputs)) == decide(mix(&scaled, &outputs)));
    }
    outcome(
        rule && hand && agree == 1000,
        format!(
            "threshold {thresholded:?}; combined ({:.2}, {:.2}) → {}; scaling agreed {agree}/1000",
            p.combined[0], p.combined[1], p.label
        ),
    )
}

fn c7_synthetic() -> Option<Outcome> {
    let spec = SynthSpec::default();
    let data = synth_generate(&spec).unwrap();
    let cfg = ExperimentConfig { trials: 20, ..ExperimentConfig::default() };
    let proposed = run_trials(&data.train, &data.test, &cfg).unwrap();
    let single = baseline_single(&data.train, &data.test, &cfg).unwrap();
    let oracle =
        baseline_oracle_gate(&data.train, &data.test, &data.train_regimes, &data.test_regimes, &cfg).unwrap();
    let (p, s, o) = (proposed.accuracy.mean, single.accuracy.mean, oracle.accuracy.mean);
    outcome(
        p >= s + 0.05 && (p - o).abs() <= 0.05,
        format!(
            "proposed {p:.4}±{:.4}, single {s:.4}±{:.4}, oracle gate {o:.4}±{:.4} (Bayes {:.3}, 20 trials)",
            proposed.accuracy.std_error,
            single.accuracy.std_error,
            oracle.accuracy.std_error,
            spec.bayes_accuracy()
        ),
    )
}

fn c8_k_sweep() -> Option<Outcome> {
    let data = synth_generate(&SynthSpec::default()).unwrap();
    let cfg = ExperimentConfig { trials: 10, ..ExperimentConfig::default() };
    let ranked = sweep(&data.train, &data.test, &cfg, SweepAxis::K).unwrap();
    let best = &ranked[0];
    // the dynamic entry counts at the K it actually learned
    let best_k = best.mean_k;
    let table: Vec<String> = ranked
        .iter()
        .map(|r| format!("{}={:.4}", r.label.rsplit(' ').next().unwrap_or(""), r.accuracy.mean))
        .collect();
    outcome(
        (best_k - 6.0).abs() <= 1.0,
        format!("best {} at K {best_k:.1}; {}", best.label, table.join(" ")),
    )
}

fn c9_real_data() -> Option<Outcome> {
    let path = PathBuf::from(std::env::var_os("BNMOE_ACCEPTANCE_CONFIG")?);
    let mut cfg = RunConfig::load(&path).unwrap();
    cfg.experiment.k = KSelection::Fixed { k: 6 };
    let data = load_data(&cfg.data).unwrap();
    let exp = &cfg.experiment;
    let proposed = run_trials(&data.train, &data.test, exp).unwrap();
    let single = baseline_single(&data.train, &data.test, exp).unwrap();
    let (p, s) = (proposed.accuracy.mean, single.accuracy.mean);
    outcome(
        (0.63..=0.72).contains(&p) && p >= s - 0.01,
        format!("proposed {p:.4}±{:.4}, single {s:.4} over {} trials", proposed.accuracy.std_error, exp.trials),
    )
}

fn c10_missing() -> Option<Outcome> {
    // synthetic regimes plus a fourth feature that is a noisy copy of the first
    let data = synth_generate(&SynthSpec { dim: 3, seed: 10, ..SynthSpec::default() }).unwrap();
    let noise = Normal::new(0.0, 0.1).unwrap();
    let mut rng = common::rng(10);
    let mut widen = |d: &ReturnsDataset| {
        let mut d = d.clone();
        for x in &mut d.features {
            x.push(x[0] + noise.sample(&mut rng));
        }
        d.instruments.push("copy".into());
        d
    };
    let (train, test) = (widen(&data.train), widen(&data.test));
    let cfg = ExperimentConfig { trials: 1, seed: 10, ..ExperimentConfig::default() };
    let ens = train_pipeline(&train, &cfg, cfg.seed).unwrap().ensemble;
    let linked = ens.bn.dag.has_edge(0, 3) || ens.bn.dag.has_edge(3, 0);
    let full = [false; 4];
    let dropped = [false, false, false, true];
    let changed = test
        .features
        .iter()
        .filter(|x| {
            argmax(&ens.bn.posterior_gate(x, &full).unwrap()) != argmax(&ens.bn.posterior_gate(x, &dropped).unwrap())
        })
        .count();
    let frac = changed as f64 / test.len() as f64;
    outcome(
        linked && frac <= 0.10,
        format!("{changed}/{} gate argmaxes changed ({:.1}%); copy linked to its source: {linked}", test.len(), 100.0 * frac),
    )
}

fn c11_determinism() -> Option<Outcome> {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::default();
    cfg.data.synthetic = Some(SynthSpec { n_train: 1500, n_test: 300, ..SynthSpec::default() });
    cfg.experiment.seed = 11;
    let mut manifests = Vec::new();
    for run in ["first", "second"] {
        cfg.output = dir.path().join(run);
        cmd_train(&cfg).unwrap();
        manifests.push(std::fs::read(cfg.output.join("ensemble/ensemble.json")).unwrap());
    }
    outcome(manifests[0] == manifests[1], format!("{} manifest bytes compared", manifests[0].len()))
}
