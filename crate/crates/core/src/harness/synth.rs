//! Regime-mixture generator with a known gate and a known Bayes-optimal
//! accuracy.
//!
//! Each regime `k` is a spherical unit-variance Gaussian around a center
//! `μ_k` whose coordinates are levels `{−1, 0, +1} × separation`. Levels are
//! balanced per coordinate (each level is used by about a third of the
//! regimes) and distinct centers differ in at least two coordinates, so
//! three-bin quantile discretization lines up with the levels. The label is
//! `[w_k · (x − μ_k) > 0]` for a random unit vector `w_k`, flipped with
//! probability `noise`; the Bayes-optimal accuracy is therefore `1 − noise`.

use chrono::{Days, NaiveDate};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::ReturnsDataset;
use crate::rng::{self, Rng};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub regimes: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub dim: usize,
    /// Label flip probability.
    pub noise: f64,
    /// Distance between adjacent center levels, in standard deviations.
    pub separation: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec { regimes: 6, n_train: 4000, n_test: 1000, dim: 6, noise: 0.15, separation: 6.0, seed: 0 }
    }
}

impl SynthSpec {
    pub fn bayes_accuracy(&self) -> f64 {
        1.0 - self.noise
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub train: ReturnsDataset,
    pub test: ReturnsDataset,
    /// True regime of each training row.
    pub train_regimes: Vec<usize>,
    pub test_regimes: Vec<usize>,
    pub centers: Vec<Vec<f64>>,
    /// Unit normal of each regime's decision hyperplane.
    pub rules: Vec<Vec<f64>>,
}

const MAX_CENTER_ATTEMPTS: usize = 10_000;

fn hamming(a: &[i8], b: &[i8]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

fn level_grid(regimes: usize, dim: usize, rng: &mut Rng) -> Result<Vec<Vec<i8>>> {
    if regimes == 1 {
        return Ok(vec![vec![0; dim]]);
    }
    let mut order: Vec<usize> = (0..regimes).collect();
    for _ in 0..MAX_CENTER_ATTEMPTS {
        let mut grid = vec![vec![0i8; dim]; regimes];
        for j in 0..dim {
            order.shuffle(rng);
            for (pos, &r) in order.iter().enumerate() {
                grid[r][j] = (3 * pos / regimes) as i8 - 1;
            }
        }
        let separated = (0..regimes).all(|a| (a + 1..regimes).all(|b| hamming(&grid[a], &grid[b]) >= 2));
        if separated {
            return Ok(grid);
        }
    }
    Err(Error::Parameter(format!(
        "cannot place {regimes} well-separated regimes in {dim} dimensions"
    )))
}

fn unit_vector(dim: usize, rng: &mut Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-9 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

struct Draw {
    features: Vec<Vec<f64>>,
    labels: Vec<u8>,
    regimes: Vec<usize>,
}

fn draw(n: usize, centers: &[Vec<f64>], rules: &[Vec<f64>], noise: f64, rng: &mut Rng) -> Draw {
    let mut out = Draw { features: Vec::with_capacity(n), labels: Vec::with_capacity(n), regimes: Vec::with_capacity(n) };
    for _ in 0..n {
        let k = rng.gen_range(0..centers.len());
        let x: Vec<f64> = centers[k].iter().map(|&m| m + rng.sample::<f64, _>(StandardNormal)).collect();
        let side: f64 = x.iter().zip(&centers[k]).zip(&rules[k]).map(|((xi, mi), wi)| wi * (xi - mi)).sum();
        let mut label = u8::from(side > 0.0);
        if rng.gen::<f64>() < noise {
            label ^= 1;
        }
        out.features.push(x);
        out.labels.push(label);
        out.regimes.push(k);
    }
    out
}

fn dataset(draw: Draw, start: NaiveDate, dim: usize) -> ReturnsDataset {
    let dates = (0..draw.features.len() as u64).map(|i| start + Days::new(i)).collect();
    ReturnsDataset {
        dates,
        instruments: (1..=dim).map(|j| format!("x{j}")).collect(),
        features: draw.features,
        labels: draw.labels,
        target: "synthetic".into(),
        mean_return: 0.0,
    }
}

pub fn synth_generate(spec: &SynthSpec) -> Result<SynthData> {
    if spec.regimes == 0 || spec.dim == 0 {
        return Err(Error::Parameter("need at least one regime and one dimension".into()));
    }
    if spec.n_train == 0 {
        return Err(Error::Parameter("need at least one training row".into()));
    }
    if !(0.0..=0.5).contains(&spec.noise) {
        return Err(Error::Parameter(format!("noise must be in [0, 0.5], got {}", spec.noise)));
    }
    if !(spec.separation > 0.0) {
        return Err(Error::Parameter("separation must be positive".into()));
    }
    let mut rng = rng::seeded(spec.seed);
    let grid = level_grid(spec.regimes, spec.dim, &mut rng)?;
    let centers: Vec<Vec<f64>> = grid
        .iter()
        .map(|row| row.iter().map(|&l| f64::from(l) * spec.separation).collect())
        .collect();
    let rules: Vec<Vec<f64>> = (0..spec.regimes).map(|_| unit_vector(spec.dim, &mut rng)).collect();

    let train = draw(spec.n_train, &centers, &rules, spec.noise, &mut rng);
    let test = draw(spec.n_test, &centers, &rules, spec.noise, &mut rng);
    let start = NaiveDate::from_ymd_opt(2000, 1, 1).unwrap();
    let test_start = start + Days::new(spec.n_train as u64);
    let (train_regimes, test_regimes) = (train.regimes.clone(), test.regimes.clone());
    Ok(SynthData {
        train: dataset(train, start, spec.dim),
        test: dataset(test, test_start, spec.dim),
        train_regimes,
        test_regimes,
        centers,
        rules,
    })
}
