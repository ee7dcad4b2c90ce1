//! K-means with k-means++ seeding, and X-means for choosing K from the data.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::rng::{self, Rng};
use crate::{Error, Result};

pub const MAX_LLOYD_ITERATIONS: usize = 300;
pub const DEFAULT_K_MAX: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    pub inertia: f64,
    pub seed: u64,
}

impl ClusterModel {
    /// Nearest centroid (ties → lowest index).
    pub fn assign(&self, x: &[f64]) -> usize {
        nearest(&self.centroids, x).0
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }

    /// Row indices belonging to each cluster.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (i, &a) in self.assignments.iter().enumerate() {
            out[a].push(i);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum KSelection {
    Fixed { k: usize },
    Dynamic { k_min: usize, k_max: usize },
}

impl KSelection {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KSelection::Fixed { k } if k < 2 => {
                Err(Error::Config(format!("fixed K must be at least 2, got {k}")))
            }
            KSelection::Dynamic { k_min, k_max } if k_min < 2 || k_min > k_max => Err(
                Error::Config(format!("dynamic K range must satisfy 2 <= min <= max, got {k_min}..{k_max}")),
            ),
            _ => Ok(()),
        }
    }

    pub fn dynamic() -> Self {
        KSelection::Dynamic { k_min: 2, k_max: DEFAULT_K_MAX }
    }

    pub fn label(&self) -> String {
        match self {
            KSelection::Fixed { k } => format!("K={k}"),
            KSelection::Dynamic { .. } => "dynamic".into(),
        }
    }

    pub fn cluster(&self, data: &[Vec<f64>], seed: u64) -> Result<ClusterModel> {
        self.validate()?;
        match *self {
            KSelection::Fixed { k } => kmeans(data, k, seed),
            KSelection::Dynamic { k_min, k_max } => xmeans(data, k_min, k_max, seed),
        }
    }
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(centroids: &[Vec<f64>], x: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(c, x);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn check_input(data: &[Vec<f64>], k: usize) -> Result<()> {
    if k < 1 {
        return Err(Error::Parameter("K must be positive".into()));
    }
    if data.len() < k {
        return Err(Error::Size { needed: k, got: data.len() });
    }
    let dim = data[0].len();
    if data.iter().any(|r| r.len() != dim || r.iter().any(|v| !v.is_finite())) {
        return Err(Error::Data("clustering input must be a finite rectangular matrix".into()));
    }
    Ok(())
}

fn kmeans_pp(data: &[Vec<f64>], k: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    let n = data.len();
    let mut centroids = vec![data[rng.gen_range(0..n)].clone()];
    let mut dist: Vec<f64> = data.iter().map(|x| sq_dist(x, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = dist.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in dist.iter().enumerate() {
                if target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            pick
        } else {
            rng.gen_range(0..n)
        };
        centroids.push(data[next].clone());
        for (d, x) in dist.iter_mut().zip(data) {
            *d = d.min(sq_dist(x, &centroids[centroids.len() - 1]));
        }
    }
    centroids
}

/// Lloyd iterations from the given centroids until the assignment stops
/// changing (or the iteration cap). Empty clusters are reseeded at the
/// point farthest from its current centroid.
pub fn lloyd(data: &[Vec<f64>], mut centroids: Vec<Vec<f64>>, seed: u64) -> ClusterModel {
    let k = centroids.len();
    let dim = data[0].len();
    let mut assignments: Vec<usize> = data.iter().map(|x| nearest(&centroids, x).0).collect();
    for _ in 0..MAX_LLOYD_ITERATIONS {
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (x, &a) in data.iter().zip(&assignments) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(x) {
                *s += v;
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                centroids[j] = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            }
        }
        let mut taken = Vec::new();
        for j in 0..k {
            if counts[j] == 0 {
                let far = data
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| !taken.contains(i))
                    .map(|(i, x)| (i, sq_dist(x, &centroids[assignments[i]])))
                    .fold((0, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
                taken.push(far.0);
                centroids[j] = data[far.0].clone();
            }
        }
        let next: Vec<usize> = data.iter().map(|x| nearest(&centroids, x).0).collect();
        if next == assignments && taken.is_empty() {
            break;
        }
        assignments = next;
    }
    let inertia = data
        .iter()
        .zip(&assignments)
        .map(|(x, &a)| sq_dist(x, &centroids[a]))
        .sum();
    ClusterModel { k, centroids, assignments, inertia, seed }
}

/// K-means++ seeding followed by Lloyd's algorithm.
pub fn kmeans(data: &[Vec<f64>], k: usize, seed: u64) -> Result<ClusterModel> {
    check_input(data, k)?;
    let mut rng = rng::seeded(seed);
    let init = kmeans_pp(data, k, &mut rng);
    Ok(lloyd(data, init, seed))
}

/// Spherical-Gaussian BIC (higher is better) of a hard clustering of
/// `points` into groups with the given centroids, as used by X-means.
pub fn spherical_bic(points: &[&[f64]], centroids: &[Vec<f64>], assignments: &[usize]) -> f64 {
    let r = points.len() as f64;
    let k = centroids.len() as f64;
    let m = points[0].len() as f64;
    if r <= k {
        return f64::NEG_INFINITY;
    }
    let sse: f64 = points
        .iter()
        .zip(assignments)
        .map(|(x, &a)| sq_dist(x, &centroids[a]))
        .sum();
    // pooled per-dimension variance
    let variance = (sse / (m * (r - k))).max(f64::MIN_POSITIVE);
    let mut sizes = vec![0.0; centroids.len()];
    for &a in assignments {
        sizes[a] += 1.0;
    }
    // Σ_n R_n ln(R_n / R) − (R·M/2) ln(2πσ²) − SSE/(2σ²), where SSE/σ² = M(R − K)
    let mixing: f64 = sizes.iter().filter(|&&rn| rn > 0.0).map(|&rn| rn * (rn / r).ln()).sum();
    let loglik = mixing
        - r * m / 2.0 * (2.0 * std::f64::consts::PI * variance).ln()
        - m * (r - k) / 2.0;
    // (k − 1) mixing weights, k·m means, one shared variance
    let params = (k - 1.0) + k * m + 1.0;
    loglik - params / 2.0 * r.ln()
}

/// Grow K from `k_min` by BIC-improving 2-splits of individual clusters,
/// never exceeding `k_max`. Each round applies the split with the largest
/// gain and refines all centroids with Lloyd.
pub fn xmeans(data: &[Vec<f64>], k_min: usize, k_max: usize, seed: u64) -> Result<ClusterModel> {
    if k_min < 2 || k_min > k_max {
        return Err(Error::Parameter(format!("need 2 <= k_min <= k_max, got {k_min}..{k_max}")));
    }
    check_input(data, k_min)?;
    if k_max * 10 > data.len() {
        return Err(Error::Parameter(format!(
            "k_max {k_max} exceeds n/10 for {} rows",
            data.len()
        )));
    }
    let mut model = kmeans(data, k_min, seed)?;
    let mut round = 0u64;
    while model.k < k_max {
        round += 1;
        // (gain, parent cluster, child centroids)
        let mut proposals: Vec<(f64, usize, Vec<Vec<f64>>)> = Vec::new();
        for (c, rows) in model.members().iter().enumerate() {
            if rows.len() < 4 {
                continue;
            }
            let points: Vec<&[f64]> = rows.iter().map(|&i| data[i].as_slice()).collect();
            let owned: Vec<Vec<f64>> = points.iter().map(|p| p.to_vec()).collect();
            let split = kmeans(&owned, 2, rng::derive(seed, round * 1_000 + c as u64))?;
            let one = spherical_bic(&points, &model.centroids[c..=c], &vec![0; points.len()]);
            let two = spherical_bic(&points, &split.centroids, &split.assignments);
            if two > one {
                proposals.push((two - one, c, split.centroids));
            }
        }
        if proposals.is_empty() {
            break;
        }
        // one split per round: rows stolen from a merged neighbour can make a
        // clean cluster look bimodal until Lloyd reassigns them
        let (_, parent, children) = proposals
            .into_iter()
            .min_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)))
            .unwrap();
        let mut centroids = model.centroids.clone();
        centroids.remove(parent);
        centroids.extend(children);
        model = lloyd(data, centroids, seed);
    }
    Ok(model)
}
