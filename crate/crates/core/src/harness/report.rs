use std::fs::{self, File};
use std::path::Path;

use serde::Serialize;

use super::trials::EvalReport;
use crate::{Error, Result};

/// Full per-trial detail.
pub fn write_json(reports: &[EvalReport], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = serde_json::to_vec_pretty(reports)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct TableRow<'a> {
    method: &'a str,
    trials: usize,
    accuracy_mean: f64,
    accuracy_se: f64,
    f1_mean: f64,
    f1_se: f64,
    train_secs_mean: f64,
    train_secs_sd: f64,
    max_expert_secs_mean: f64,
    max_expert_secs_sd: f64,
    mean_k: f64,
}

/// One row per report, in the given order.
pub fn write_table_csv(reports: &[EvalReport], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_writer(File::create(path).map_err(|e| Error::io(path, e))?);
    for r in reports {
        w.serialize(TableRow {
            method: &r.label,
            trials: r.trials.len(),
            accuracy_mean: r.accuracy.mean,
            accuracy_se: r.accuracy.std_error,
            f1_mean: r.f1.mean,
            f1_se: r.f1.std_error,
            train_secs_mean: r.train_secs.mean,
            train_secs_sd: r.train_secs.std_dev,
            max_expert_secs_mean: r.max_expert_secs.mean,
            max_expert_secs_sd: r.max_expert_secs.std_dev,
            mean_k: r.mean_k,
        })?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct PlotRow<'a> {
    series: &'a str,
    x: &'a str,
    accuracy: f64,
    accuracy_se: f64,
    f1: f64,
}

/// Long-format points for external plotting: `series` names the sweep, `x`
/// the value on its axis (a K or a method).
pub fn write_plot_csv(series: &[(&str, &[(String, &EvalReport)])], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_writer(File::create(path).map_err(|e| Error::io(path, e))?);
    for (name, points) in series {
        for (x, r) in points.iter() {
            w.serialize(PlotRow {
                series: name,
                x,
                accuracy: r.accuracy.mean,
                accuracy_se: r.accuracy.std_error,
                f1: r.f1.mean,
            })?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Plain-text comparison table for the terminal.
pub fn format_table(reports: &[EvalReport]) -> String {
    let width = reports.iter().map(|r| r.label.len()).max().unwrap_or(6).max(6);
    let mut out = format!(
        "{:<width$}  {:>17}  {:>17}  {:>10}  {:>6}\n",
        "method", "accuracy", "f1", "train s", "K"
    );
    for r in reports {
        out.push_str(&format!(
            "{:<width$}  {:>8.4} ± {:<6.4}  {:>8.4} ± {:<6.4}  {:>10.3}  {:>6.2}\n",
            r.label,
            r.accuracy.mean,
            r.accuracy.std_error,
            r.f1.mean,
            r.f1.std_error,
            r.train_secs.mean,
            r.mean_k
        ));
    }
    out
}
