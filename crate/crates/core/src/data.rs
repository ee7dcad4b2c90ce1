//! Price ingestion, calendar alignment, log-returns, the Dickey–Fuller check
//! and the chronological train/test dataset.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const DATE_FORMAT: &str = "%Y-%m-%d";

/// Closing prices for one or more instruments on a shared calendar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricePanel {
    pub dates: Vec<NaiveDate>,
    pub instruments: Vec<String>,
    /// `[dates × instruments]`; NaN where `missing` is set.
    pub prices: Vec<Vec<f64>>,
    pub missing: Vec<Vec<bool>>,
}

impl PricePanel {
    /// Build a panel from rows where `None` marks a missing cell. Rows are
    /// sorted by date.
    pub fn from_rows(
        instruments: Vec<String>,
        rows: Vec<(NaiveDate, Vec<Option<f64>>)>,
    ) -> Result<Self> {
        let mut rows = rows;
        rows.sort_by_key(|(d, _)| *d);
        for pair in rows.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(Error::Data(format!("duplicate date {}", pair[0].0)));
            }
        }
        let mut panel = PricePanel {
            dates: Vec::with_capacity(rows.len()),
            instruments,
            prices: Vec::with_capacity(rows.len()),
            missing: Vec::with_capacity(rows.len()),
        };
        for (date, cells) in rows {
            if cells.len() != panel.instruments.len() {
                return Err(Error::Data(format!(
                    "row {date} has {} values, expected {}",
                    cells.len(),
                    panel.instruments.len()
                )));
            }
            for (j, cell) in cells.iter().enumerate() {
                if let Some(p) = cell {
                    if !(*p > 0.0) || !p.is_finite() {
                        return Err(Error::Data(format!(
                            "non-positive price {p} for {} on {date}",
                            panel.instruments[j]
                        )));
                    }
                }
            }
            panel.dates.push(date);
            panel.missing.push(cells.iter().map(Option::is_none).collect());
            panel
                .prices
                .push(cells.iter().map(|c| c.unwrap_or(f64::NAN)).collect());
        }
        Ok(panel)
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn has_missing(&self) -> bool {
        self.missing.iter().flatten().any(|&m| m)
    }
}

fn parse_date(s: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), DATE_FORMAT).ok()
}

/// Read a price CSV: first column is an ISO-8601 date, the rest are closing
/// prices. `schema` selects (and orders) price columns by header name; an
/// empty schema takes every column. Empty or unparseable cells are missing.
pub fn load_csv(path: impl AsRef<Path>, schema: &[String]) -> Result<PricePanel> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(BufReader::new(file));

    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header.len() < 2 {
        return Err(Error::Schema(format!(
            "{}: expected a date column and at least one price column",
            path.display()
        )));
    }
    let mut seen = HashSet::new();
    for h in &header {
        if h.is_empty() || !seen.insert(h.as_str()) {
            return Err(Error::Schema(format!(
                "{}: empty or duplicated column name {h:?}",
                path.display()
            )));
        }
    }
    let columns: Vec<usize> = if schema.is_empty() {
        (1..header.len()).collect()
    } else {
        schema
            .iter()
            .map(|name| {
                header
                    .iter()
                    .skip(1)
                    .position(|h| h == name)
                    .map(|p| p + 1)
                    .ok_or_else(|| {
                        Error::Schema(format!("{}: column {name:?} not in header", path.display()))
                    })
            })
            .collect::<Result<_>>()?
    };
    let instruments = columns.iter().map(|&c| header[c].clone()).collect();

    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let raw = record.get(0).unwrap_or("");
        let date = parse_date(raw).ok_or_else(|| {
            Error::Data(format!("{}: row {}: bad date {raw:?}", path.display(), i + 1))
        })?;
        let cells = columns
            .iter()
            .map(|&c| {
                record
                    .get(c)
                    .and_then(|s| s.trim().parse::<f64>().ok())
                    .filter(|p| p.is_finite())
            })
            .collect();
        rows.push((date, cells));
    }
    PricePanel::from_rows(instruments, rows)
}

/// Join panels on the union of their trading days and forward-fill gaps with
/// the previous available close. Leading dates before every instrument has
/// traded at least once are dropped.
pub fn align_and_fill(panels: &[PricePanel]) -> Result<PricePanel> {
    if panels.is_empty() {
        return Err(Error::Data("no price panels to align".into()));
    }
    let mut instruments = Vec::new();
    let mut series: Vec<BTreeMap<NaiveDate, f64>> = Vec::new();
    for panel in panels {
        for (j, name) in panel.instruments.iter().enumerate() {
            if instruments.contains(name) {
                return Err(Error::Data(format!("instrument {name} appears twice")));
            }
            let observed: BTreeMap<_, _> = panel
                .dates
                .iter()
                .zip(panel.prices.iter().zip(&panel.missing))
                .filter(|(_, (_, miss))| !miss[j])
                .map(|(d, (row, _))| (*d, row[j]))
                .collect();
            if observed.is_empty() {
                return Err(Error::Data(format!("instrument {name} has no observations")));
            }
            instruments.push(name.clone());
            series.push(observed);
        }
    }

    let calendar: BTreeSet<NaiveDate> = series.iter().flat_map(|s| s.keys().copied()).collect();
    let mut last: Vec<Option<f64>> = vec![None; instruments.len()];
    let mut out = PricePanel {
        dates: Vec::new(),
        instruments,
        prices: Vec::new(),
        missing: Vec::new(),
    };
    for date in calendar {
        for (slot, s) in last.iter_mut().zip(&series) {
            if let Some(&p) = s.get(&date) {
                *slot = Some(p);
            }
        }
        if last.iter().all(Option::is_some) {
            out.dates.push(date);
            out.prices.push(last.iter().map(|p| p.unwrap()).collect());
            out.missing.push(vec![false; last.len()]);
        }
    }
    Ok(out)
}

/// Percent log-returns; row `t` belongs to `dates[t]` and holds
/// `100 · (ln p(t) − ln p(t−1))` of the source panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Returns {
    pub dates: Vec<NaiveDate>,
    pub instruments: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl Returns {
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.iter().map(|row| row[j]).collect()
    }

    pub fn instrument_index(&self, name: &str) -> Option<usize> {
        self.instruments.iter().position(|n| n == name)
    }
}

pub fn to_returns(panel: &PricePanel) -> Result<Returns> {
    if panel.has_missing() {
        return Err(Error::Data("panel has missing prices; align it first".into()));
    }
    for (row, date) in panel.prices.iter().zip(&panel.dates) {
        if let Some(p) = row.iter().find(|p| !(**p > 0.0)) {
            return Err(Error::Domain(format!("log of non-positive price {p} on {date}")));
        }
    }
    let values = panel
        .prices
        .windows(2)
        .map(|w| {
            w[1].iter()
                .zip(&w[0])
                .map(|(now, prev)| (now.ln() - prev.ln()) * 100.0)
                .collect()
        })
        .collect();
    Ok(Returns {
        dates: panel.dates.iter().skip(1).copied().collect(),
        instruments: panel.instruments.clone(),
        values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DickeyFuller {
    /// t-ratio of the lagged-level coefficient.
    pub statistic: f64,
    pub critical_value: f64,
    pub reject_unit_root: bool,
}

/// MacKinnon (2010) response-surface coefficients, constant-only case:
/// `cv(T) = b0 + b1/T + b2/T² + b3/T³`.
const DF_CRITICAL: [(f64, [f64; 4]); 3] = [
    (0.01, [-3.43035, -6.5393, -16.786, -79.433]),
    (0.05, [-2.86154, -2.8903, -4.234, -40.040]),
    (0.10, [-2.56677, -1.5384, -2.809, 0.0]),
];

pub const DEFAULT_DF_ALPHA: f64 = 0.05;

/// Finite-sample Dickey–Fuller critical value for `nobs` regression rows.
pub fn df_critical_value(alpha: f64, nobs: usize) -> Result<f64> {
    let (_, b) = DF_CRITICAL
        .iter()
        .find(|(a, _)| (a - alpha).abs() < 1e-12)
        .ok_or_else(|| {
            Error::Parameter(format!("unsupported significance level {alpha}; use 0.01, 0.05 or 0.10"))
        })?;
    let t = nobs as f64;
    Ok(b[0] + b[1] / t + b[2] / (t * t) + b[3] / (t * t * t))
}

/// Regress `Δr_t = a + b·r_{t−1} + e` and test `b = 0` (unit root) against
/// `b < 0` (stationary).
pub fn dickey_fuller(series: &[f64], alpha: f64) -> Result<DickeyFuller> {
    const MIN_LEN: usize = 25;
    if series.len() < MIN_LEN {
        return Err(Error::Size { needed: MIN_LEN, got: series.len() });
    }
    let lagged = &series[..series.len() - 1];
    let diff: Vec<f64> = series.windows(2).map(|w| w[1] - w[0]).collect();
    let n = diff.len() as f64;

    let mean_x = lagged.iter().sum::<f64>() / n;
    let mean_y = diff.iter().sum::<f64>() / n;
    let sxx: f64 = lagged.iter().map(|x| (x - mean_x).powi(2)).sum();
    if sxx <= f64::EPSILON * n * (1.0 + mean_x * mean_x) {
        return Err(Error::DegenerateRegression("series is constant".into()));
    }
    let sxy: f64 = lagged
        .iter()
        .zip(&diff)
        .map(|(x, y)| (x - mean_x) * (y - mean_y))
        .sum();
    let beta = sxy / sxx;
    let alpha_hat = mean_y - beta * mean_x;
    let sse: f64 = lagged
        .iter()
        .zip(&diff)
        .map(|(x, y)| (y - alpha_hat - beta * x).powi(2))
        .sum();
    let sigma2 = sse / (n - 2.0);
    if !(sigma2 > 0.0) {
        return Err(Error::DegenerateRegression("regression has zero residual variance".into()));
    }
    let statistic = beta / (sigma2 / sxx).sqrt();
    let critical_value = df_critical_value(alpha, diff.len())?;
    Ok(DickeyFuller {
        statistic,
        critical_value,
        reject_unit_root: statistic < critical_value,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    /// Last date (inclusive) of the training period.
    pub train_end: NaiveDate,
    /// Last date (inclusive) of the test period.
    pub test_end: NaiveDate,
}

/// Feature rows with next-period direction labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnsDataset {
    pub dates: Vec<NaiveDate>,
    pub instruments: Vec<String>,
    /// `[n × d]` returns at each row's date.
    pub features: Vec<Vec<f64>>,
    /// 1 when the target's next return is strictly above `mean_return`.
    pub labels: Vec<u8>,
    pub target: String,
    /// Mean target return over the training rows.
    pub mean_return: f64,
}

impl ReturnsDataset {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.instruments.len()
    }

    /// Write `date, x1..xd, label`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        let mut header = vec!["date".to_string()];
        header.extend((1..=self.dim()).map(|j| format!("x{j}")));
        header.push("label".into());
        w.write_record(&header)?;
        for ((date, row), label) in self.dates.iter().zip(&self.features).zip(&self.labels) {
            let mut rec = vec![date.format(DATE_FORMAT).to_string()];
            rec.extend(row.iter().map(|v| format!("{v}")));
            rec.push(label.to_string());
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: ReturnsDataset,
    pub test: ReturnsDataset,
}

/// Label each value: 1 when strictly greater than `mean`, else 0.
pub fn direction_labels(values: &[f64], mean: f64) -> Vec<u8> {
    values.iter().map(|&v| u8::from(v > mean)).collect()
}

/// Row `t` uses every instrument's return at `t` as features and the
/// target's return at `t + 1` for the label. The final row has no label and
/// is dropped. The mean return is taken over training-period target returns.
pub fn build_dataset(returns: &Returns, target: &str, split: &SplitSpec) -> Result<DatasetSplit> {
    let target_col = returns
        .instrument_index(target)
        .ok_or_else(|| Error::Data(format!("target instrument {target} not in data")))?;
    if returns.dates.len() < 3 {
        return Err(Error::Split("need at least three return rows".into()));
    }
    if split.train_end >= split.test_end {
        return Err(Error::Split(format!(
            "train end {} must precede test end {}",
            split.train_end, split.test_end
        )));
    }
    let first = returns.dates[0];
    let last = *returns.dates.last().unwrap();
    for d in [split.train_end, split.test_end] {
        if d < first || d > last {
            return Err(Error::Split(format!("date {d} outside data range {first}..{last}")));
        }
    }

    let n = returns.dates.len() - 1;
    let train_rows: Vec<usize> = (0..n).filter(|&t| returns.dates[t] <= split.train_end).collect();
    let test_rows: Vec<usize> = (0..n)
        .filter(|&t| returns.dates[t] > split.train_end && returns.dates[t] <= split.test_end)
        .collect();
    if train_rows.is_empty() || test_rows.is_empty() {
        return Err(Error::Split(format!(
            "empty partition: {} train rows, {} test rows",
            train_rows.len(),
            test_rows.len()
        )));
    }

    let mean_return = train_rows
        .iter()
        .map(|&t| returns.values[t][target_col])
        .sum::<f64>()
        / train_rows.len() as f64;
    let next: Vec<f64> = returns.values.iter().skip(1).map(|r| r[target_col]).collect();
    let labels = direction_labels(&next, mean_return);

    let take = |rows: &[usize]| ReturnsDataset {
        dates: rows.iter().map(|&t| returns.dates[t]).collect(),
        instruments: returns.instruments.clone(),
        features: rows.iter().map(|&t| returns.values[t].clone()).collect(),
        labels: rows.iter().map(|&t| labels[t]).collect(),
        target: target.to_string(),
        mean_return,
    };
    Ok(DatasetSplit {
        train: take(&train_rows),
        test: take(&test_rows),
    })
}

/// Feature rows read back from a dataset or prediction-input CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub ids: Vec<String>,
    pub columns: Vec<String>,
    pub values: Vec<Vec<f64>>,
    pub missing: Vec<Vec<bool>>,
    pub labels: Option<Vec<u8>>,
}

impl FeatureTable {
    pub fn has_missing(&self) -> bool {
        self.missing.iter().flatten().any(|&m| m)
    }

    /// Convert to a dataset; fails if any cell is missing or labels are absent.
    pub fn into_dataset(self) -> Result<ReturnsDataset> {
        if let Some((row, col)) = first_missing(&self.missing) {
            return Err(Error::MissingValue { row, column: self.columns[col].clone() });
        }
        let labels = self
            .labels
            .ok_or_else(|| Error::Schema("dataset CSV has no label column".into()))?;
        let dates = self
            .ids
            .iter()
            .map(|s| parse_date(s).ok_or_else(|| Error::Data(format!("bad date {s:?}"))))
            .collect::<Result<_>>()?;
        Ok(ReturnsDataset {
            dates,
            instruments: self.columns,
            features: self.values,
            labels,
            target: String::new(),
            mean_return: f64::NAN,
        })
    }
}

pub(crate) fn first_missing(mask: &[Vec<bool>]) -> Option<(usize, usize)> {
    mask.iter()
        .enumerate()
        .find_map(|(i, row)| row.iter().position(|&m| m).map(|j| (i, j)))
}

/// Read a CSV whose first column is a row id (usually the date), followed by
/// feature columns and an optional trailing `label` column.
pub fn read_feature_csv(path: impl AsRef<Path>) -> Result<FeatureTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(BufReader::new(file));
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let has_label = header.last().is_some_and(|h| h == "label");
    let feature_end = header.len() - usize::from(has_label);
    if feature_end < 2 {
        return Err(Error::Schema(format!("{}: no feature columns", path.display())));
    }
    let mut table = FeatureTable {
        ids: Vec::new(),
        columns: header[1..feature_end].to_vec(),
        values: Vec::new(),
        missing: Vec::new(),
        labels: has_label.then(Vec::new),
    };
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        table.ids.push(record.get(0).unwrap_or("").trim().to_string());
        let mut row = Vec::with_capacity(feature_end - 1);
        let mut miss = Vec::with_capacity(feature_end - 1);
        for c in 1..feature_end {
            let cell = record.get(c).unwrap_or("").trim();
            if cell.is_empty() {
                row.push(f64::NAN);
                miss.push(true);
            } else {
                let v: f64 = cell.parse().map_err(|_| {
                    Error::Data(format!("{}: row {}: bad number {cell:?}", path.display(), i + 1))
                })?;
                row.push(v);
                miss.push(false);
            }
        }
        table.values.push(row);
        table.missing.push(miss);
        if let Some(labels) = table.labels.as_mut() {
            let cell = record.get(feature_end).unwrap_or("").trim();
            let label = match cell {
                "0" => 0,
                "1" => 1,
                _ => {
                    return Err(Error::Data(format!(
                        "{}: row {}: label must be 0 or 1, got {cell:?}",
                        path.display(),
                        i + 1
                    )))
                }
            };
            labels.push(label);
        }
    }
    Ok(table)
}

/// Write a price panel back out in the ingestion CSV format.
pub fn write_price_csv(panel: &PricePanel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut text = String::from("date");
    for name in &panel.instruments {
        text.push(',');
        text.push_str(name);
    }
    text.push('\n');
    for ((date, row), miss) in panel.dates.iter().zip(&panel.prices).zip(&panel.missing) {
        text.push_str(&date.format(DATE_FORMAT).to_string());
        for (p, m) in row.iter().zip(miss) {
            text.push(',');
            if !m {
                text.push_str(&format!("{p}"));
            }
        }
        text.push('\n');
    }
    file.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}
