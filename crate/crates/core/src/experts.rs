//! Per-cluster expert classifiers: a small ReLU network with a two-way
//! softmax head, trained by minibatch SGD on cross-entropy with inverted
//! dropout on the hidden layers.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::rng;
use crate::{Error, Result};

/// Anything that maps an input row to class probabilities `(P(0), P(1))`.
pub trait Expert {
    fn input_dim(&self) -> usize;
    fn predict_proba(&self, x: &[f64]) -> [f64; 2];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// `[out × in]`, row-major.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl Layer {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Layer { weights: vec![vec![0.0; inputs]; outputs], bias: vec![0.0; outputs] }
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(w, b)| w.iter().zip(x).map(|(wi, xi)| wi * xi).sum::<f64>() + b)
            .collect()
    }

    fn param_count(&self) -> usize {
        self.bias.len() * (self.weights.first().map_or(0, Vec::len) + 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertNet {
    /// Layer widths from input to output, e.g. `[d, 6, 6, 2]`.
    pub dims: Vec<usize>,
    pub layers: Vec<Layer>,
    /// Inputs enter the first layer as `(x − shift) / scale`.
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
}

pub const DEFAULT_HIDDEN: [usize; 2] = [6, 6];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSpec {
    pub hidden: Vec<usize>,
    /// Passes over the cluster's data.
    pub epochs: usize,
    pub dropout: f64,
    /// Minibatch size as a fraction of the training rows.
    pub minibatch_fraction: f64,
    pub learning_rate: f64,
    /// Standardize inputs with the training rows' mean and deviation.
    pub standardize: bool,
    pub seed: u64,
}

impl Default for TrainSpec {
    fn default() -> Self {
        TrainSpec {
            hidden: DEFAULT_HIDDEN.to_vec(),
            epochs: 100,
            dropout: 0.2,
            minibatch_fraction: 0.2,
            learning_rate: 0.01,
            standardize: true,
            seed: 0,
        }
    }
}

impl TrainSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout must be in [0, 1), got {}", self.dropout)));
        }
        if !(self.minibatch_fraction > 0.0 && self.minibatch_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "minibatch fraction must be in (0, 1], got {}",
                self.minibatch_fraction
            )));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if self.hidden.contains(&0) {
            return Err(Error::Config("hidden layers must have at least one unit".into()));
        }
        Ok(())
    }
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / total).collect()
}

/// Activations kept for the backward pass.
struct Trace {
    /// Input to each layer (post-activation, post-dropout of the previous one).
    inputs: Vec<Vec<f64>>,
    /// Pre-activation of each hidden layer.
    pre: Vec<Vec<f64>>,
    /// Dropout multipliers applied to each hidden layer's output.
    masks: Vec<Vec<f64>>,
    probs: Vec<f64>,
}

impl ExpertNet {
    /// He-uniform weights `U(−√(6/fan_in), √(6/fan_in))`, zero biases.
    pub fn init(dims: &[usize], seed: u64) -> Self {
        let mut rng = rng::seeded(seed);
        let layers = dims
            .windows(2)
            .map(|w| {
                let limit = (6.0 / w[0] as f64).sqrt();
                Layer {
                    weights: (0..w[1])
                        .map(|_| (0..w[0]).map(|_| rng.gen_range(-limit..limit)).collect())
                        .collect(),
                    bias: vec![0.0; w[1]],
                }
            })
            .collect();
        ExpertNet { dims: dims.to_vec(), layers, shift: vec![0.0; dims[0]], scale: vec![1.0; dims[0]] }
    }

    pub fn zeros(dims: &[usize]) -> Self {
        ExpertNet {
            dims: dims.to_vec(),
            layers: dims.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect(),
            shift: vec![0.0; dims[0]],
            scale: vec![1.0; dims[0]],
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    fn standardized(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.shift).zip(&self.scale).map(|((v, m), s)| (v - m) / s).collect()
    }

    /// Output logits without dropout.
    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        let last = self.layers.len() - 1;
        let mut a = self.standardized(x);
        for (l, layer) in self.layers.iter().enumerate() {
            a = layer.forward(&a);
            if l < last {
                a.iter_mut().for_each(|v| *v = v.max(0.0));
            }
        }
        a
    }

    pub fn predict(&self, x: &[f64]) -> [f64; 2] {
        let p = softmax(&self.logits(x));
        [p[0], p[1]]
    }

    fn forward_trace(&self, x: &[f64], dropout: Option<(f64, &mut rng::Rng)>) -> Trace {
        let last = self.layers.len() - 1;
        let mut trace = Trace { inputs: Vec::new(), pre: Vec::new(), masks: Vec::new(), probs: Vec::new() };
        let mut a = self.standardized(x);
        let mut dropout = dropout;
        for (l, layer) in self.layers.iter().enumerate() {
            let z = layer.forward(&a);
            trace.inputs.push(a);
            if l == last {
                trace.probs = softmax(&z);
                break;
            }
            let mask: Vec<f64> = match dropout.as_mut() {
                Some((p, rng)) if *p > 0.0 => {
                    let keep = 1.0 - *p;
                    (0..z.len())
                        .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
                        .collect()
                }
                _ => vec![1.0; z.len()],
            };
            a = z.iter().zip(&mask).map(|(v, m)| v.max(0.0) * m).collect();
            trace.pre.push(z);
            trace.masks.push(mask);
        }
        trace
    }

    /// Add `scale · ∂CE/∂θ` for one example into `grad`.
    fn backward(&self, trace: &Trace, label: u8, scale: f64, grad: &mut ExpertNet) {
        let mut delta: Vec<f64> = trace.probs.clone();
        delta[label as usize] -= 1.0;
        for l in (0..self.layers.len()).rev() {
            let input = &trace.inputs[l];
            let g = &mut grad.layers[l];
            for (o, &dl) in delta.iter().enumerate() {
                g.bias[o] += scale * dl;
                for (w, &xi) in g.weights[o].iter_mut().zip(input) {
                    *w += scale * dl * xi;
                }
            }
            if l == 0 {
                break;
            }
            let layer = &self.layers[l];
            let prev = l - 1;
            delta = (0..input.len())
                .map(|i| {
                    if trace.pre[prev][i] <= 0.0 {
                        return 0.0;
                    }
                    let back: f64 = delta.iter().enumerate().map(|(o, dl)| dl * layer.weights[o][i]).sum();
                    back * trace.masks[prev][i]
                })
                .collect();
        }
    }

    /// Mean cross-entropy and its gradient over a batch, dropout off.
    pub fn loss_and_gradient(&self, xs: &[Vec<f64>], ys: &[u8]) -> (f64, ExpertNet) {
        let mut grad = ExpertNet::zeros(&self.dims);
        let scale = 1.0 / xs.len() as f64;
        let mut loss = 0.0;
        for (x, &y) in xs.iter().zip(ys) {
            let trace = self.forward_trace(x, None);
            loss -= trace.probs[y as usize].max(f64::MIN_POSITIVE).ln() * scale;
            self.backward(&trace, y, scale, &mut grad);
        }
        (loss, grad)
    }

    pub fn loss(&self, xs: &[Vec<f64>], ys: &[u8]) -> f64 {
        xs.iter()
            .zip(ys)
            .map(|(x, &y)| -softmax(&self.logits(x))[y as usize].max(f64::MIN_POSITIVE).ln())
            .sum::<f64>()
            / xs.len() as f64
    }

    fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flat_map(|l| {
            l.weights.iter_mut().flat_map(|w| w.iter_mut()).chain(l.bias.iter_mut())
        })
    }

    fn params(&self) -> impl Iterator<Item = &f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().flat_map(|w| w.iter()).chain(l.bias.iter()))
    }

    fn sgd_step(&mut self, grad: &ExpertNet, lr: f64) {
        for (p, g) in self.params_mut().zip(grad.params()) {
            *p -= lr * g;
        }
    }
}

impl Expert for ExpertNet {
    fn input_dim(&self) -> usize {
        self.dims[0]
    }

    fn predict_proba(&self, x: &[f64]) -> [f64; 2] {
        self.predict(x)
    }
}

/// Train a fresh network on one cluster's rows. Runs `spec.epochs` shuffled
/// passes with minibatches of `ceil(fraction · n)` rows; fewer than 5 rows
/// fall back to full-batch updates.
pub fn train_expert(xs: &[Vec<f64>], ys: &[u8], spec: &TrainSpec) -> Result<ExpertNet> {
    spec.validate()?;
    if xs.is_empty() {
        return Err(Error::Size { needed: 1, got: 0 });
    }
    if xs.len() != ys.len() {
        return Err(Error::Usage(format!("{} rows but {} labels", xs.len(), ys.len())));
    }
    if ys.iter().any(|&y| y > 1) {
        return Err(Error::Data("labels must be 0 or 1".into()));
    }
    let d = xs[0].len();
    let mut dims = vec![d];
    dims.extend(&spec.hidden);
    dims.push(2);

    let mut net = ExpertNet::init(&dims, spec.seed);
    if spec.standardize {
        (net.shift, net.scale) = column_stats(xs);
    }
    let mut rng = rng::seeded(rng::derive(spec.seed, 1));
    let n = xs.len();
    let batch = if n < 5 {
        log::warn!("degenerate cluster with {n} rows; training full-batch");
        n
    } else {
        ((n as f64 * spec.minibatch_fraction).ceil() as usize).clamp(1, n)
    };
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..spec.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            let mut grad = ExpertNet::zeros(&dims);
            let scale = 1.0 / chunk.len() as f64;
            for &i in chunk {
                let trace = net.forward_trace(&xs[i], Some((spec.dropout, &mut rng)));
                net.backward(&trace, ys[i], scale, &mut grad);
            }
            net.sgd_step(&grad, spec.learning_rate);
        }
    }
    Ok(net)
}

/// Per-column mean and population deviation; constant columns get scale 1.
fn column_stats(xs: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = xs.len() as f64;
    let d = xs[0].len();
    let mean: Vec<f64> = (0..d).map(|j| xs.iter().map(|x| x[j]).sum::<f64>() / n).collect();
    let scale = (0..d)
        .map(|j| {
            let sd = (xs.iter().map(|x| (x[j] - mean[j]).powi(2)).sum::<f64>() / n).sqrt();
            if sd > 1e-12 { sd } else { 1.0 }
        })
        .collect();
    (mean, scale)
}

/// Largest discrepancy between the analytic gradient and central finite
/// differences of the mean cross-entropy, over every parameter. Relative
/// error is used unless both values are below `1e-8`, in which case the
/// absolute error is reported.
pub fn gradient_check(net: &ExpertNet, xs: &[Vec<f64>], ys: &[u8], epsilon: f64) -> f64 {
    const ABS_FLOOR: f64 = 1e-8;
    let (_, analytic) = net.loss_and_gradient(xs, ys);
    let analytic: Vec<f64> = analytic.params().copied().collect();
    let mut probe = net.clone();
    let mut worst = 0.0f64;
    for (i, &a) in analytic.iter().enumerate() {
        let original = *probe.params().nth(i).unwrap();
        *probe.params_mut().nth(i).unwrap() = original + epsilon;
        let plus = probe.loss(xs, ys);
        *probe.params_mut().nth(i).unwrap() = original - epsilon;
        let minus = probe.loss(xs, ys);
        *probe.params_mut().nth(i).unwrap() = original;
        let numeric = (plus - minus) / (2.0 * epsilon);
        let scale = a.abs().max(numeric.abs());
        let err = if scale < ABS_FLOOR { (a - numeric).abs() } else { (a - numeric).abs() / scale };
        worst = worst.max(err);
    }
    worst
}
