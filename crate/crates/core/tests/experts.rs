use bnmoe::experts::{gradient_check, softmax, train_expert, ExpertNet, TrainSpec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn batch(seed: u64, n: usize, d: usize) -> (Vec<Vec<f64>>, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
    let ys = (0..n).map(|_| rng.gen_range(0..2)).collect();
    (xs, ys)
}

/// Smallest |pre-activation| over the hidden units for input `x`.
fn min_hidden_preactivation(net: &ExpertNet, x: &[f64]) -> f64 {
    let mut a: Vec<f64> = x.iter().zip(&net.shift).zip(&net.scale).map(|((v, m), s)| (v - m) / s).collect();
    let mut min = f64::INFINITY;
    for layer in &net.layers[..net.layers.len() - 1] {
        let z: Vec<f64> = layer
            .weights
            .iter()
            .zip(&layer.bias)
            .map(|(w, b)| w.iter().zip(&a).map(|(wi, ai)| wi * ai).sum::<f64>() + b)
            .collect();
        min = z.iter().fold(min, |m, v| m.min(v.abs()));
        a = z.iter().map(|v| v.max(0.0)).collect();
    }
    min
}

proptest! {
    #[test]
    fn backprop_matches_finite_differences(seed in any::<u64>(), d in 1usize..8, h1 in 1usize..8, h2 in 1usize..8) {
        let mut net = ExpertNet::init(&[d, h1, h2, 2], seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 2);
        for layer in &mut net.layers {
            layer.bias.iter_mut().for_each(|b| *b = rng.gen_range(-0.5..0.5));
        }
        let (xs, ys) = batch(seed ^ 1, 8, d);
        // finite differences are meaningless across a ReLU kink
        prop_assume!(xs.iter().all(|x| min_hidden_preactivation(&net, x) > 1e-2));
        let err = gradient_check(&net, &xs, &ys, 1e-4);
        prop_assert!(err < 1e-4, "max error {}", err);
    }

    #[test]
    // beyond a logit gap of about 36 the larger probability rounds to 1.0
    fn softmax_is_a_distribution(z in prop::collection::vec(-15.0f64..15.0, 2)) {
        let p = softmax(&z);
        prop_assert_eq!(p.len(), 2);
        prop_assert!(p.iter().all(|&v| v > 0.0 && v < 1.0));
        prop_assert!((p[0] + p[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn training_stays_finite_and_inference_is_deterministic(seed in any::<u64>(), n in 1usize..40, scale in 1e-3f64..1e3) {
        let (mut xs, ys) = batch(seed, n, 3);
        for x in &mut xs {
            x.iter_mut().for_each(|v| *v *= scale);
        }
        let spec = TrainSpec { epochs: 10, seed, ..TrainSpec::default() };
        let net = train_expert(&xs, &ys, &spec).unwrap();
        prop_assert!(net.loss(&xs, &ys).is_finite());
        for x in &xs {
            let p = net.predict(x);
            prop_assert_eq!(p, net.predict(x));
            prop_assert!((p[0] + p[1] - 1.0).abs() < 1e-9);
        }
    }
}

