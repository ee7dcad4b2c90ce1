//! Mixture-of-experts classification for financial time series, where a
//! discrete Bayesian network learned over the input features decides which
//! per-cluster expert should handle each input.
//!
//! The pipeline:
//!
//! 1. [`data`] turns closing-price CSVs into percent log-returns and binary
//!    "next return above the training mean" labels.
//! 2. [`clustering`] partitions the training rows (K-means, or X-means when
//!    K is chosen from the data).
//! 3. [`experts`] trains one small feed-forward classifier per cluster.
//! 4. [`bayesnet`] learns a discrete network over the discretized features
//!    plus a gate node holding the cluster index.
//! 5. [`ensemble`] weights expert outputs with the thresholded gate posterior.
//!
//! [`harness`] wires everything into repeated-trial experiments with
//! baselines, and [`cli`] exposes it on the command line.

// `!(x > 0.0)` also rejects NaN, which `x <= 0.0` would let through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bayesnet;
pub mod cli;
pub mod clustering;
pub mod data;
pub mod ensemble;
mod error;
pub mod experts;
pub mod harness;
pub(crate) mod rng;

pub use error::{Error, Result};

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
