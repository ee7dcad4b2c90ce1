use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const DEFAULT_BINS: usize = 3;

/// Equal-frequency binning of each continuous feature.
///
/// A value `v` falls in bin `#{e ∈ edges : e < v}`, so bins are the
/// right-closed intervals `(−∞, e₀], (e₀, e₁], …, (e_last, ∞)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discretizer {
    pub edges: Vec<Vec<f64>>,
    /// Mean training value inside each bin; used to turn an imputed state
    /// back into a representative input value.
    pub centers: Vec<Vec<f64>>,
}

/// Linear-interpolation quantile of already sorted values.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl Discretizer {
    /// Fit quantile edges per column of `data` (`[n × d]`). Duplicate
    /// quantiles collapse, so a feature may end up with fewer than `bins`
    /// states (a constant feature has one).
    pub fn fit(data: &[Vec<f64>], bins: usize) -> Result<Self> {
        if bins < 2 {
            return Err(Error::Parameter(format!("need at least 2 bins, got {bins}")));
        }
        if data.len() < bins {
            return Err(Error::Size { needed: bins, got: data.len() });
        }
        let d = data[0].len();
        let mut edges = Vec::with_capacity(d);
        let mut centers = Vec::with_capacity(d);
        for j in 0..d {
            let mut col: Vec<f64> = data.iter().map(|r| r[j]).collect();
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::Data(format!("feature {j} has non-finite values")));
            }
            col.sort_by(f64::total_cmp);
            let max = *col.last().unwrap();
            let mut e: Vec<f64> = Vec::with_capacity(bins - 1);
            for b in 1..bins {
                let q = quantile(&col, b as f64 / bins as f64);
                if q < max && e.last().is_none_or(|&last| q > last) {
                    e.push(q);
                }
            }
            if e.is_empty() {
                log::warn!("feature {j} is constant; it gets a single state");
            }
            let mut sums = vec![0.0; e.len() + 1];
            let mut counts = vec![0usize; e.len() + 1];
            for &v in &col {
                let b = e.partition_point(|&edge| edge < v);
                sums[b] += v;
                counts[b] += 1;
            }
            let c = (0..=e.len())
                .map(|b| {
                    if counts[b] > 0 {
                        sums[b] / counts[b] as f64
                    } else if b == 0 {
                        e[0]
                    } else if b == e.len() {
                        e[b - 1]
                    } else {
                        0.5 * (e[b - 1] + e[b])
                    }
                })
                .collect();
            edges.push(e);
            centers.push(c);
        }
        Ok(Discretizer { edges, centers })
    }

    pub fn dim(&self) -> usize {
        self.edges.len()
    }

    /// State count `r_j` of each feature.
    pub fn cardinalities(&self) -> Vec<usize> {
        self.edges.iter().map(|e| e.len() + 1).collect()
    }

    pub fn bin(&self, feature: usize, value: f64) -> usize {
        self.edges[feature].partition_point(|&e| e < value)
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<usize> {
        row.iter().enumerate().map(|(j, &v)| self.bin(j, v)).collect()
    }

    /// Column-major discrete copy of `data`.
    pub fn transform_columns(&self, data: &[Vec<f64>]) -> Vec<Vec<usize>> {
        (0..self.dim())
            .map(|j| data.iter().map(|r| self.bin(j, r[j])).collect())
            .collect()
    }

    pub fn center(&self, feature: usize, state: usize) -> f64 {
        self.centers[feature][state]
    }
}
