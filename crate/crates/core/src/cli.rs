//! Command-line front end. Configuration comes from a TOML file with
//! `[data]`, `[experiment]` and `output` entries; flags override it, and the
//! effective configuration is written next to every command's outputs.

use std::fs::{self, File};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::clustering::KSelection;
use crate::data::{
    align_and_fill, build_dataset, dickey_fuller, first_missing, load_csv, read_feature_csv, to_returns,
    ReturnsDataset, SplitSpec, DEFAULT_DF_ALPHA,
};
use crate::ensemble::GatedEnsemble;
use crate::harness::{
    baseline_hard_kmeans, baseline_naive_bayes, baseline_oracle_gate, baseline_single, parse_k, report,
    run_trials, sweep, synth_generate, train_pipeline, EvalReport, ExperimentConfig, SearchMethod, SweepAxis,
    SynthData, SynthSpec,
};
use crate::{Error, Result};

pub const CONFIG_ECHO: &str = "config.toml";

#[derive(Debug, Parser)]
#[command(name = "bnmoe", version, about = "Bayesian-network-gated mixture of experts for return direction")]
pub struct Cli {
    /// More log output (-v info, -vv debug). `RUST_LOG` takes precedence.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build train/test dataset CSVs from price files or the synthetic generator.
    Ingest(RunArgs),
    /// Train one ensemble and write its bundle and network diagram.
    Train(RunArgs),
    /// Repeated-trial evaluation against the baselines, or a sweep.
    Evaluate(RunArgs),
    /// Same as `evaluate --sweep`.
    Sweep(RunArgs),
    /// Apply a trained bundle to a feature CSV.
    Predict(PredictArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Structure search, e.g. hill-bic or tabu-aic.
    #[arg(long)]
    pub method: Option<SearchMethod>,
    /// Number of experts, or `dynamic` to choose it with X-means.
    #[arg(long, value_parser = parse_k)]
    pub k: Option<KSelection>,
    #[arg(long)]
    pub bins: Option<usize>,
    /// Gate probabilities below this are dropped.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Sweep axis: `k` or `method`.
    #[arg(long)]
    pub sweep: Option<SweepAxis>,
    /// Use generated data instead of files, e.g. `--synthetic K=6 n=4000`.
    #[arg(long, num_args = 1.., value_name = "KEY=VALUE")]
    pub synthetic: Option<Vec<String>>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    /// Bundle directory or its manifest file.
    #[arg(long)]
    pub bundle: PathBuf,
    /// CSV with an id column followed by the feature columns.
    #[arg(long)]
    pub input: PathBuf,
    /// Treat empty cells as unobserved instead of failing.
    #[arg(long)]
    pub allow_missing: bool,
    /// Output CSV file.
    #[arg(long, default_value = "predictions.csv")]
    pub out: PathBuf,
}

/// One price file and the columns to take from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriceSource {
    pub path: PathBuf,
    /// Price columns by header name; empty takes all of them.
    #[serde(default)]
    pub columns: Vec<String>,
}

/// Where the rows come from. Exactly one of `synthetic`, a
/// `train_csv`/`test_csv` pair, or `prices` (with target and split dates).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub prices: Vec<PriceSource>,
    pub target: Option<String>,
    pub train_end: Option<NaiveDate>,
    pub test_end: Option<NaiveDate>,
    pub df_alpha: f64,
    pub train_csv: Option<PathBuf>,
    pub test_csv: Option<PathBuf>,
    pub synthetic: Option<SynthSpec>,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            prices: Vec::new(),
            target: None,
            train_end: None,
            test_end: None,
            df_alpha: DEFAULT_DF_ALPHA,
            train_csv: None,
            test_csv: None,
            synthetic: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub output: PathBuf,
    pub data: DataConfig,
    pub experiment: ExperimentConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { output: PathBuf::from("out"), data: DataConfig::default(), experiment: ExperimentConfig::default() }
    }
}

impl RunConfig {
    /// Parse a config file; relative paths are taken from the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for src in &mut cfg.data.prices {
            rebase(&mut src.path);
        }
        cfg.data.train_csv.iter_mut().for_each(rebase);
        cfg.data.test_csv.iter_mut().for_each(rebase);
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Apply command-line flags on top of the file (or defaults).
    pub fn resolve(args: &RunArgs) -> Result<Self> {
        let mut cfg = match &args.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let exp = &mut cfg.experiment;
        if let Some(m) = args.method {
            exp.method = m;
        }
        if let Some(k) = args.k {
            exp.k = k;
        }
        if let Some(b) = args.bins {
            exp.bins = b;
        }
        if let Some(h) = args.threshold {
            exp.threshold = h;
        }
        if let Some(t) = args.trials {
            exp.trials = t;
        }
        if let Some(s) = args.seed {
            exp.seed = s;
        }
        if let Some(pairs) = &args.synthetic {
            let base = cfg.data.synthetic.clone().unwrap_or_default();
            cfg.data.synthetic = Some(parse_synthetic(pairs, base)?);
        }
        if let Some(out) = &args.out {
            cfg.output = out.clone();
        }
        cfg.experiment.validate()?;
        Ok(cfg)
    }
}

/// `K=6 n=4000 noise=0.1`; pairs may also be comma separated. Without an
/// explicit `n_test`, the test set is a quarter of `n`.
pub fn parse_synthetic(pairs: &[String], mut spec: SynthSpec) -> Result<SynthSpec> {
    let mut n_test = None;
    for pair in pairs.iter().flat_map(|p| p.split([',', ' '])).filter(|p| !p.is_empty()) {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected KEY=VALUE in --synthetic, got {pair:?}")))?;
        let bad = || Error::Config(format!("bad value for synthetic {key}: {value:?}"));
        let int = || value.parse::<usize>().map_err(|_| bad());
        let float = || value.parse::<f64>().map_err(|_| bad());
        match key {
            "K" | "k" | "regimes" => spec.regimes = int()?,
            "n" | "n_train" => spec.n_train = int()?,
            "n_test" => n_test = Some(int()?),
            "d" | "dim" => spec.dim = int()?,
            "noise" => spec.noise = float()?,
            "sep" | "separation" => spec.separation = float()?,
            "seed" => spec.seed = value.parse().map_err(|_| bad())?,
            _ => return Err(Error::Config(format!("unknown synthetic key {key:?}"))),
        }
        if matches!(key, "n" | "n_train") && n_test.is_none() {
            spec.n_test = spec.n_train / 4;
        }
    }
    if let Some(t) = n_test {
        spec.n_test = t;
    }
    Ok(spec)
}

/// Train and test rows, plus the generator output when synthetic.
pub struct LoadedData {
    pub train: ReturnsDataset,
    pub test: ReturnsDataset,
    pub synthetic: Option<SynthData>,
    /// Dickey–Fuller results per instrument, when built from prices.
    pub stationarity: Vec<(String, crate::data::DickeyFuller)>,
}

pub fn load_data(cfg: &DataConfig) -> Result<LoadedData> {
    if let Some(spec) = &cfg.synthetic {
        let data = synth_generate(spec)?;
        return Ok(LoadedData {
            train: data.train.clone(),
            test: data.test.clone(),
            synthetic: Some(data),
            stationarity: Vec::new(),
        });
    }
    if let (Some(train), Some(test)) = (&cfg.train_csv, &cfg.test_csv) {
        return Ok(LoadedData {
            train: read_feature_csv(train)?.into_dataset()?,
            test: read_feature_csv(test)?.into_dataset()?,
            synthetic: None,
            stationarity: Vec::new(),
        });
    }
    if cfg.prices.is_empty() {
        return Err(Error::Config(
            "no data source: set data.synthetic, data.train_csv and data.test_csv, or data.prices".into(),
        ));
    }
    let target = cfg.target.as_deref().ok_or_else(|| Error::Config("data.target is required".into()))?;
    let (Some(train_end), Some(test_end)) = (cfg.train_end, cfg.test_end) else {
        return Err(Error::Config("data.train_end and data.test_end are required".into()));
    };
    let panels = cfg
        .prices
        .iter()
        .map(|src| load_csv(&src.path, &src.columns))
        .collect::<Result<Vec<_>>>()?;
    let returns = to_returns(&align_and_fill(&panels)?)?;
    let mut stationarity = Vec::new();
    for (j, name) in returns.instruments.iter().enumerate() {
        let df = dickey_fuller(&returns.column(j), cfg.df_alpha)?;
        if !df.reject_unit_root {
            log::warn!(
                "{name}: Dickey-Fuller statistic {:.3} does not reject a unit root at {} (critical {:.3})",
                df.statistic,
                cfg.df_alpha,
                df.critical_value
            );
        }
        stationarity.push((name.clone(), df));
    }
    let split = build_dataset(&returns, target, &SplitSpec { train_end, test_end })?;
    Ok(LoadedData { train: split.train, test: split.test, synthetic: None, stationarity })
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn echo_config(cfg: &RunConfig) -> Result<()> {
    write_text(&cfg.output.join(CONFIG_ECHO), &cfg.to_toml()?)
}

pub fn cmd_ingest(cfg: &RunConfig) -> Result<()> {
    let data = load_data(&cfg.data)?;
    create_dir(&cfg.output)?;
    data.train.write_csv(cfg.output.join("train.csv"))?;
    data.test.write_csv(cfg.output.join("test.csv"))?;
    let mut summary = serde_json::json!({
        "train_rows": data.train.len(),
        "test_rows": data.test.len(),
        "features": data.train.instruments,
        "target": data.train.target,
        "mean_return": data.train.mean_return,
    });
    if !data.stationarity.is_empty() {
        summary["dickey_fuller"] = serde_json::json!(data
            .stationarity
            .iter()
            .map(|(name, df)| serde_json::json!({"instrument": name, "result": df}))
            .collect::<Vec<_>>());
    }
    if let Some(s) = &data.synthetic {
        summary["generator"] = serde_json::json!({
            "centers": s.centers,
            "rules": s.rules,
            "bayes_accuracy": cfg.data.synthetic.as_ref().map(SynthSpec::bayes_accuracy),
        });
        write_regimes(&cfg.output.join("train_regimes.csv"), &s.train_regimes)?;
        write_regimes(&cfg.output.join("test_regimes.csv"), &s.test_regimes)?;
    }
    write_text(&cfg.output.join("ingest.json"), &serde_json::to_string_pretty(&summary)?)?;
    echo_config(cfg)?;
    log::info!("wrote {} train and {} test rows to {}", data.train.len(), data.test.len(), cfg.output.display());
    Ok(())
}

fn write_regimes(path: &Path, regimes: &[usize]) -> Result<()> {
    let mut w = csv::Writer::from_writer(File::create(path).map_err(|e| Error::io(path, e))?);
    w.write_record(["row", "regime"])?;
    for (i, r) in regimes.iter().enumerate() {
        w.write_record([i.to_string(), r.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn cmd_train(cfg: &RunConfig) -> Result<()> {
    let data = load_data(&cfg.data)?;
    let exp = &cfg.experiment;
    let model = train_pipeline(&data.train, exp, exp.seed)?;
    create_dir(&cfg.output)?;
    let mut names = data.train.instruments.clone();
    names.push("gate".into());
    let manifest = model.ensemble.save_bundle(cfg.output.join("ensemble"), &data.train.instruments)?;
    write_text(&cfg.output.join("bayesnet.dot"), &model.ensemble.bn.to_dot(&names)?)?;
    echo_config(cfg)?;
    log::info!(
        "trained {} experts in {:.2}s; bundle at {}",
        model.ensemble.k(),
        model.timing.total_secs,
        manifest.display()
    );
    Ok(())
}

pub fn cmd_evaluate(cfg: &RunConfig, axis: Option<SweepAxis>) -> Result<()> {
    let data = load_data(&cfg.data)?;
    let exp = &cfg.experiment;
    let (train, test) = (&data.train, &data.test);
    create_dir(&cfg.output)?;

    let (reports, plot_series) = match axis {
        Some(axis) => {
            let reports = sweep(train, test, exp, axis)?;
            let series = match axis {
                SweepAxis::K => "accuracy-vs-k",
                SweepAxis::Method => "accuracy-per-method",
            };
            (reports, series)
        }
        None => {
            let mut reports = vec![
                run_trials(train, test, exp)?,
                baseline_single(train, test, exp)?,
                baseline_hard_kmeans(train, test, exp)?,
                baseline_naive_bayes(train, test, exp)?,
            ];
            if let Some(s) = &data.synthetic {
                reports.push(baseline_oracle_gate(train, test, &s.train_regimes, &s.test_regimes, exp)?);
            }
            (reports, "methods")
        }
    };

    report::write_json(&reports, cfg.output.join("report.json"))?;
    report::write_table_csv(&reports, cfg.output.join("report.csv"))?;
    let points: Vec<(String, &EvalReport)> = reports.iter().map(|r| (axis_value(r, axis), r)).collect();
    report::write_plot_csv(&[(plot_series, &points)], cfg.output.join("plot.csv"))?;
    echo_config(cfg)?;
    eprint!("{}", report::format_table(&reports));
    Ok(())
}

/// Value of a report on the sweep axis, recovered from its label.
fn axis_value(r: &EvalReport, axis: Option<SweepAxis>) -> String {
    let mut words = r.label.split_whitespace();
    match axis {
        Some(SweepAxis::Method) => words.nth(1).unwrap_or_default().to_string(),
        Some(SweepAxis::K) => words.last().unwrap_or_default().trim_start_matches("K=").to_string(),
        None => r.label.clone(),
    }
}

pub fn cmd_predict(args: &PredictArgs) -> Result<()> {
    let (ens, manifest) = GatedEnsemble::load_bundle(&args.bundle)?;
    let table = read_feature_csv(&args.input)?;
    let d = ens.feature_count();
    if table.columns.len() != d {
        return Err(Error::Schema(format!(
            "{}: {} feature columns, the model expects {d}",
            args.input.display(),
            table.columns.len()
        )));
    }
    if !args.allow_missing {
        if let Some((row, col)) = first_missing(&table.missing) {
            return Err(Error::MissingValue { row: row + 1, column: table.columns[col].clone() });
        }
    }

    let path = &args.out;
    let mut w = csv::Writer::from_writer(File::create(path).map_err(|e| Error::io(path, e))?);
    let mut header = vec!["id".to_string(), "label".into(), "score_0".into(), "score_1".into()];
    header.extend((0..ens.k()).map(|c| format!("gate_{c}")));
    if args.allow_missing {
        for name in &table.columns {
            header.push(format!("imputed_{name}"));
            header.push(format!("imputed_state_{name}"));
        }
    }
    w.write_record(&header)?;
    for ((id, x), mask) in table.ids.iter().zip(&table.values).zip(&table.missing) {
        let p = ens.predict_one(x, mask)?;
        let mut rec = vec![id.clone(), p.label.to_string(), p.combined[0].to_string(), p.combined[1].to_string()];
        rec.extend(p.gate.posterior.iter().map(f64::to_string));
        if args.allow_missing {
            for j in 0..d {
                match p.imputed.iter().find(|(f, _)| *f == j) {
                    Some((_, imp)) => {
                        rec.push(ens.bn.discretizer.center(j, imp.state).to_string());
                        rec.push(imp.state.to_string());
                    }
                    None => rec.extend([String::new(), String::new()]),
                }
            }
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    log::info!(
        "predicted {} rows with a {}-expert model ({})",
        table.ids.len(),
        ens.k(),
        manifest.feature_names.join(", ")
    );
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest(args) => cmd_ingest(&RunConfig::resolve(&args)?),
        Command::Train(args) => cmd_train(&RunConfig::resolve(&args)?),
        Command::Evaluate(args) => cmd_evaluate(&RunConfig::resolve(&args)?, args.sweep),
        Command::Sweep(args) => {
            let axis = args
                .sweep
                .ok_or_else(|| Error::Usage("sweep needs --sweep k or --sweep method".into()))?;
            cmd_evaluate(&RunConfig::resolve(&args)?, Some(axis))
        }
        Command::Predict(args) => cmd_predict(&args),
    }
}

/// Parse arguments, run, and map the outcome to a process exit code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_pairs() {
        let s = parse_synthetic(&["K=6".into(), "n=4000".into()], SynthSpec::default()).unwrap();
        assert_eq!((s.regimes, s.n_train, s.n_test), (6, 4000, 1000));
        let s = parse_synthetic(&["K=3,n=100,n_test=7 noise=0.1".into()], SynthSpec::default()).unwrap();
        assert_eq!((s.regimes, s.n_train, s.n_test, s.noise), (3, 100, 7, 0.1));
        assert!(parse_synthetic(&["K6".into()], SynthSpec::default()).is_err());
        assert!(parse_synthetic(&["colour=red".into()], SynthSpec::default()).is_err());
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        fs::write(
            &path,
            "output = \"o\"\n[data]\ntrain_csv = \"tr.csv\"\ntest_csv = \"te.csv\"\n[experiment]\nk = 4\ntrials = 9\n",
        )
        .unwrap();
        let args = RunArgs { config: Some(path), trials: Some(2), method: Some("tabu-aic".parse().unwrap()), ..Default::default() };
        let cfg = RunConfig::resolve(&args).unwrap();
        assert_eq!(cfg.experiment.trials, 2);
        assert_eq!(cfg.experiment.k, KSelection::Fixed { k: 4 });
        assert_eq!(cfg.experiment.method.to_string(), "tabu-aic");
        assert_eq!(cfg.data.train_csv.unwrap(), dir.path().join("tr.csv"));
    }

    #[test]
    fn echoed_config_reloads_identically() {
        let cfg = RunConfig {
            output: "/tmp/x".into(),
            data: DataConfig { synthetic: Some(SynthSpec::default()), ..Default::default() },
            experiment: ExperimentConfig { k: KSelection::dynamic(), ..Default::default() },
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(CONFIG_ECHO);
        fs::write(&path, cfg.to_toml().unwrap()).unwrap();
        assert_eq!(RunConfig::load(&path).unwrap(), cfg);
        assert!(cfg.to_toml().unwrap().contains(&format!("k = \"{}\"", crate::harness::format_k(&KSelection::dynamic()))));
    }

    #[test]
    fn unknown_key_is_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.toml");
        fs::write(&path, "[experiment]\nbogus = 1\n").unwrap();
        assert!(matches!(RunConfig::load(&path), Err(Error::Config(_))));
    }
}
