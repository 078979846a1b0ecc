//! Desk-scale experiment runners: observational forecasting accuracy,
//! causal-effect estimation accuracy and threshold-crossing scenarios.
//!
//! Run `r` of an experiment simulates its data with seed `seed + r`, so every
//! table is reproducible from its `ExperimentSpec` alone. Runs execute on a rayon pool
//! whose size is capped by the `CAUSAL_VAR_THREADS` environment variable;
//! results are collected in run order before aggregation.

use std::io::Write;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::Serialize;

use crate::datasets;
use crate::error::{Error, Result};
use crate::estimate::{fit, FitOptions};
use crate::forecast::{causal_effect_path, forecast, forecast_intervened};
use crate::intervene::{Intervention, InterventionKind};
use crate::linalg::Mat;
use crate::metrics::{mean_sd, metrics};
use crate::model::VarModel;
use crate::series::{fmt_f64, PanelSchema, PanelSeries, TimeSeries};
use crate::simulate::{simulate, SimConfig, DEFAULT_BURN_IN};

pub const THREADS_ENV: &str = "CAUSAL_VAR_THREADS";

/// Held-out lengths used for the built-in datasets.
pub const GERMAN_TEST_SIZE: usize = 2400;
pub const PENDULUM_TEST_SIZE: usize = 2200;
pub const GERMAN_VALIDATION_SIZE: usize = 300;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Dataset {
    German,
    Pendulum,
    /// Panel CSV; each run uses one entity (cycling through the panel).
    Csv(PathBuf),
}

impl Dataset {
    fn name(&self) -> String {
        match self {
            Dataset::German => "german".into(),
            Dataset::Pendulum => "pendulum".into(),
            Dataset::Csv(p) => p.display().to_string(),
        }
    }
}

impl std::str::FromStr for Dataset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "german" => Ok(Dataset::German),
            "pendulum" => Ok(Dataset::Pendulum),
            path if path.ends_with(".csv") => Ok(Dataset::Csv(PathBuf::from(path))),
            other => Err(Error::domain(format!("unknown dataset {other:?}; expected german, pendulum or a .csv path"))),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentSpec {
    pub dataset: Dataset,
    pub train_size: usize,
    pub horizon: usize,
    pub n_runs: usize,
    pub seed: u64,
    #[serde(skip)]
    pub intervention: Option<Intervention>,
    /// Scored columns; empty means the dataset default.
    pub target_components: Vec<usize>,
    /// Held-out length; `None` uses the dataset default.
    pub test_size: Option<usize>,
    /// Number of forecast origins sampled from the held-out range for
    /// history-dependent effect paths.
    pub effect_origins: usize,
    pub sigma: f64,
    /// Lag order of the fitted model; `None` uses the true order.
    pub lag: Option<usize>,
}

impl ExperimentSpec {
    pub fn new(dataset: Dataset, train_size: usize, horizon: usize) -> Self {
        Self {
            dataset,
            train_size,
            horizon,
            n_runs: 10,
            seed: 0,
            intervention: None,
            target_components: Vec::new(),
            test_size: None,
            effect_origins: 50,
            sigma: datasets::DEFAULT_SIGMA,
            lag: None,
        }
    }

    pub fn runs(mut self, n: usize) -> Self {
        self.n_runs = n;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn intervention(mut self, i: Intervention) -> Self {
        self.intervention = Some(i);
        self
    }

    pub fn targets(mut self, t: Vec<usize>) -> Self {
        self.target_components = t;
        self
    }

    pub fn test_size(mut self, n: usize) -> Self {
        self.test_size = Some(n);
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n_runs == 0 {
            return Err(Error::domain("experiment needs at least one run"));
        }
        if self.horizon == 0 {
            return Err(Error::domain("forecast horizon must be at least 1"));
        }
        Ok(())
    }

    fn true_model(&self) -> Option<VarModel> {
        match self.dataset {
            Dataset::German => Some(datasets::german_model(self.sigma)),
            Dataset::Pendulum => Some(datasets::pendulum_model(self.sigma)),
            Dataset::Csv(_) => None,
        }
    }

    fn targets_or_default(&self) -> Vec<usize> {
        if !self.target_components.is_empty() {
            return self.target_components.clone();
        }
        match self.dataset {
            Dataset::German => vec![datasets::CREDIT_SCORE],
            Dataset::Pendulum => vec![0],
            Dataset::Csv(_) => Vec::new(),
        }
    }

    fn test_len(&self) -> usize {
        self.test_size.unwrap_or(match self.dataset {
            Dataset::German => GERMAN_TEST_SIZE,
            Dataset::Pendulum => PENDULUM_TEST_SIZE,
            Dataset::Csv(_) => 0,
        })
    }

    fn validation_len(&self) -> usize {
        match self.dataset {
            Dataset::German => GERMAN_VALIDATION_SIZE,
            _ => 0,
        }
    }

    fn run_seed(&self, run: usize) -> u64 {
        self.seed.wrapping_add(run as u64)
    }

    /// Training window and the full series through the end of the
    /// held-out range, for one run.
    fn data(&self, run: usize, csv: Option<&PanelSeries>) -> Result<(TimeSeries, TimeSeries)> {
        let (series, test_len) = match (&self.dataset, csv) {
            (Dataset::Csv(_), Some(panel)) => {
                let s = panel.entities()[run % panel.len()].1.clone();
                let test_len = self.test_size.unwrap_or(s.len().saturating_sub(self.train_size));
                (s, test_len)
            }
            _ => {
                let model = self.true_model().expect("built-in dataset");
                let total = self.train_size + self.validation_len() + self.test_len();
                let cfg = SimConfig::new(total, self.run_seed(run)).burn_in(DEFAULT_BURN_IN);
                (simulate(&model, &cfg)?, self.test_len())
            }
        };
        let start = series.start_index();
        let needed = self.train_size + self.validation_len() + test_len;
        if series.len() < needed || test_len == 0 {
            return Err(Error::InsufficientSamples {
                available: series.len(),
                required: needed.max(self.train_size + 1),
            });
        }
        let train = series.window(start, start + self.train_size as i64)?;
        let test_from = start + (self.train_size + self.validation_len()) as i64;
        Ok((train, series.window(start, test_from + test_len as i64)?))
    }
}

/// One aggregated table row.
#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub model: String,
    pub train_size: usize,
    pub horizon: usize,
    pub mae_mean: f64,
    pub mae_sd: f64,
    pub rmse_mean: f64,
    pub rmse_sd: f64,
    pub smape_mean: f64,
    pub smape_sd: f64,
    pub runs: usize,
}

impl BenchRow {
    fn aggregate(model: &str, spec: &ExperimentSpec, scores: &[(f64, f64, f64)]) -> Self {
        let col = |f: fn(&(f64, f64, f64)) -> f64| mean_sd(&scores.iter().map(f).collect::<Vec<_>>());
        let (mae_mean, mae_sd) = col(|s| s.0);
        let (rmse_mean, rmse_sd) = col(|s| s.1);
        let (smape_mean, smape_sd) = col(|s| s.2);
        Self {
            model: model.to_string(),
            train_size: spec.train_size,
            horizon: spec.horizon,
            mae_mean,
            mae_sd,
            rmse_mean,
            rmse_sd,
            smape_mean,
            smape_sd,
            runs: scores.len(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchTable {
    pub experiment: String,
    pub rows: Vec<BenchRow>,
    /// Raw per-run MAE for each row, in run order.
    pub run_mae: Vec<Vec<f64>>,
    pub metadata: serde_json::Value,
}

impl BenchTable {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(["model", "train_size", "horizon", "mae_mean", "mae_sd", "rmse_mean", "rmse_sd", "smape_mean", "smape_sd", "runs"])?;
        for r in &self.rows {
            w.write_record([
                r.model.clone(),
                r.train_size.to_string(),
                r.horizon.to_string(),
                fmt_f64(r.mae_mean),
                fmt_f64(r.mae_sd),
                fmt_f64(r.rmse_mean),
                fmt_f64(r.rmse_sd),
                fmt_f64(r.smape_mean),
                fmt_f64(r.smape_sd),
                r.runs.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn row(&self, model: &str) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.model == model)
    }
}

fn metadata(experiment: &str, spec: &ExperimentSpec) -> Result<serde_json::Value> {
    Ok(serde_json::json!({
        "experiment": experiment,
        "spec": serde_json::to_value(spec)?,
        "intervention": spec.intervention.as_ref().map(|i| i.to_json()).transpose()?,
        "seeds": (0..spec.n_runs).map(|r| spec.run_seed(r)).collect::<Vec<_>>(),
        "dataset": spec.dataset.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "threads": rayon::current_num_threads(),
    }))
}

/// Runs `f` inside a pool sized by `CAUSAL_VAR_THREADS`, or the global pool
/// when the variable is unset.
pub fn with_thread_cap<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => {
            let n: usize = v
                .trim()
                .parse()
                .map_err(|_| Error::domain(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::numerical(format!("cannot build thread pool: {e}")))?;
            Ok(pool.install(f))
        }
        Err(_) => Ok(f()),
    }
}

fn load_csv(spec: &ExperimentSpec) -> Result<Option<PanelSeries>> {
    match &spec.dataset {
        Dataset::Csv(path) => Ok(Some(PanelSeries::load_csv(path, &PanelSchema::default())?.0)),
        _ => Ok(None),
    }
}

fn fit_lag(spec: &ExperimentSpec) -> Result<usize> {
    spec.lag
        .or_else(|| spec.true_model().map(|m| m.lag()))
        .ok_or_else(|| Error::domain("lag order is required for CSV datasets"))
}

/// `h`-step predictions from every origin in the held-out range.
fn rolling_predictions(model: &VarModel, full: &TimeSeries, test_from: usize, h: usize) -> Result<(Mat, Mat)> {
    let d = full.dim();
    let p = model.lag();
    let origins: Vec<usize> = (test_from.max(p)..=full.len() - h).collect();
    let mut pred = Mat::zeros(origins.len(), d);
    let mut truth = Mat::zeros(origins.len(), d);
    let start = full.start_index();
    for (n, &o) in origins.iter().enumerate() {
        let hist = full.window(start + (o - p) as i64, start + o as i64)?;
        let f = forecast(model, &hist, h)?;
        pred.row_mut(n).copy_from(&f.means.row(h - 1));
        truth.row_mut(n).copy_from(&full.values().row(o + h - 1));
    }
    Ok((pred, truth))
}

/// Fitted VAR versus the oracle on held-out `h`-step forecasts.
pub fn run_observational(spec: &ExperimentSpec) -> Result<BenchTable> {
    spec.validate()?;
    let csv = load_csv(spec)?;
    let lag = fit_lag(spec)?;
    let targets = spec.targets_or_default();
    let truth_model = spec.true_model();
    let runs = with_thread_cap(|| {
        (0..spec.n_runs)
            .into_par_iter()
            .map(|r| {
                let (train, full) = spec.data(r, csv.as_ref())?;
                let test_from = spec.train_size + spec.validation_len();
                let fitted = fit(&train, &FitOptions::new(lag))?.model;
                let (pred, truth) = rolling_predictions(&fitted, &full, test_from, spec.horizon)?;
                let m = metrics(&pred, &truth, &targets)?;
                let var = (m.mae, m.rmse, m.smape);
                let oracle = match &truth_model {
                    Some(tm) => {
                        let (pred, truth) = rolling_predictions(tm, &full, test_from, spec.horizon)?;
                        let m = metrics(&pred, &truth, &targets)?;
                        Some((m.mae, m.rmse, m.smape))
                    }
                    None => None,
                };
                Ok((var, oracle))
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let var: Vec<_> = runs.iter().map(|r| r.0).collect();
    let mut rows = vec![BenchRow::aggregate("VAR", spec, &var)];
    let mut run_mae = vec![var.iter().map(|s| s.0).collect()];
    if truth_model.is_some() {
        let oracle: Vec<_> = runs.iter().filter_map(|r| r.1).collect();
        rows.push(BenchRow::aggregate("Oracle", spec, &oracle));
        run_mae.push(oracle.iter().map(|s| s.0).collect());
    }
    Ok(BenchTable {
        experiment: "observational".into(),
        rows,
        run_mae,
        metadata: metadata("observational", spec)?,
    })
}

/// Accuracy of causal effects estimated from a fitted VAR against the
/// ground-truth effects, at effect step `horizon − 1`.
///
/// Additive effects do not depend on the history and are compared once per
/// run; other kinds are averaged over `effect_origins` held-out origins.
pub fn run_interventional(spec: &ExperimentSpec) -> Result<BenchTable> {
    spec.validate()?;
    let truth_model = spec
        .true_model()
        .ok_or_else(|| Error::domain("interventional benchmark needs a built-in dataset with a known model"))?;
    let intervention = spec
        .intervention
        .clone()
        .ok_or_else(|| Error::domain("interventional benchmark needs an intervention"))?;
    let targets = spec.targets_or_default();
    let lag = fit_lag(spec)?;
    let row = spec.horizon - 1;
    let runs = with_thread_cap(|| {
        (0..spec.n_runs)
            .into_par_iter()
            .map(|r| {
                let (train, full) = spec.data(r, None)?;
                let fitted = fit(&train, &FitOptions::new(lag))?.model;
                let p = truth_model.lag();
                let test_from = (spec.train_size + spec.validation_len()).max(p);
                let origins: Vec<usize> = if intervention.kind == InterventionKind::Additive {
                    vec![test_from]
                } else {
                    let span = full.len() - test_from;
                    let n = spec.effect_origins.clamp(1, span);
                    (0..n).map(|k| test_from + k * span / n).collect()
                };
                let d = full.dim();
                let mut est = Mat::zeros(origins.len(), d);
                let mut truth = Mat::zeros(origins.len(), d);
                let start = full.start_index();
                for (n, &o) in origins.iter().enumerate() {
                    let hist = full.window(start + (o - p) as i64, start + o as i64)?;
                    let a = causal_effect_path(&fitted, &intervention, &hist, row)?;
                    let b = causal_effect_path(&truth_model, &intervention, &hist, row)?;
                    est.row_mut(n).copy_from(&a.effects.row(row));
                    truth.row_mut(n).copy_from(&b.effects.row(row));
                }
                let m = metrics(&est, &truth, &targets)?;
                Ok((m.mae, m.rmse, m.smape))
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let label = match intervention.kind {
        InterventionKind::Additive => "additive",
        InterventionKind::Forcing => "forcing",
        InterventionKind::Do => "do",
    };
    Ok(BenchTable {
        experiment: "interventional".into(),
        rows: vec![BenchRow::aggregate(label, spec, &runs)],
        run_mae: vec![runs.iter().map(|s| s.0).collect()],
        metadata: metadata("interventional", spec)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CrossingDirection {
    /// Crossing means reaching or exceeding the threshold.
    Above,
    /// Crossing means reaching or falling below the threshold.
    Below,
}

impl std::str::FromStr for CrossingDirection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "above" => Ok(Self::Above),
            "below" => Ok(Self::Below),
            other => Err(Error::domain(format!("unknown crossing direction {other:?}; expected above or below"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CrossingSpec {
    pub model: VarModel,
    pub panel: PanelSeries,
    pub intervention: Intervention,
    pub target: usize,
    pub threshold: f64,
    pub direction: CrossingDirection,
    pub horizon: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CrossingRecord {
    pub entity: String,
    /// Step at which the expected trajectory first crosses; `0` means the
    /// last observation already does, `None` that it never does within the
    /// horizon.
    pub crossing: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CrossingReport {
    pub records: Vec<CrossingRecord>,
    /// `histogram[k]` counts entities crossing at step `k`.
    pub histogram: Vec<usize>,
    pub never: usize,
}

impl CrossingReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(["entity", "crossing_step"])?;
        for r in &self.records {
            let step = r.crossing.map_or_else(|| "never".to_string(), |k| k.to_string());
            w.write_record([r.entity.as_str(), step.as_str()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// First step at which each entity's interventional forecast of `target`
/// crosses `threshold`.
pub fn run_usecase_crossing(spec: &CrossingSpec) -> Result<CrossingReport> {
    let d = spec.model.dim();
    if spec.target >= d {
        return Err(Error::domain(format!("target component {} out of range for dimension {d}", spec.target)));
    }
    let crosses = |x: f64| match spec.direction {
        CrossingDirection::Above => x >= spec.threshold,
        CrossingDirection::Below => x <= spec.threshold,
    };
    let records = with_thread_cap(|| {
        spec.panel
            .entities()
            .par_iter()
            .map(|(id, s)| {
                let last = s.values()[(s.len() - 1, spec.target)];
                let crossing = if crosses(last) {
                    Some(0)
                } else {
                    let f = forecast_intervened(&spec.model, &spec.intervention, s, spec.horizon)?;
                    (0..spec.horizon).find(|&k| crosses(f.means[(k, spec.target)])).map(|k| k + 1)
                };
                Ok(CrossingRecord {
                    entity: id.clone(),
                    crossing,
                })
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let mut histogram = vec![0; spec.horizon + 1];
    let mut never = 0;
    for r in &records {
        match r.crossing {
            Some(k) => histogram[k] += 1,
            None => never += 1,
        }
    }
    Ok(CrossingReport {
        records,
        histogram,
        never,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn observational_is_reproducible_and_oracle_is_competitive() {
        let spec = ExperimentSpec::new(Dataset::Pendulum, 200, 1).runs(3).seed(4).test_size(300);
        let a = run_observational(&spec).unwrap();
        let b = run_observational(&spec).unwrap();
        assert_eq!(a.run_mae, b.run_mae);
        let var = a.row("VAR").unwrap().mae_mean;
        let oracle = a.row("Oracle").unwrap().mae_mean;
        assert!(oracle <= var * 1.05, "{oracle} vs {var}");
    }

    #[test]
    fn pendulum_error_grows_with_horizon() {
        let h1 = run_observational(&ExperimentSpec::new(Dataset::Pendulum, 200, 1).runs(2).test_size(500)).unwrap();
        let h10 = run_observational(&ExperimentSpec::new(Dataset::Pendulum, 200, 10).runs(2).test_size(500)).unwrap();
        // Gaussian errors: the MAE ratio equals the ratio of forecast-error
        // standard deviations, sqrt(Σ_X(10)₀₀ / Σ_X(1)₀₀) ≈ 3.16.
        let m = datasets::pendulum_model(0.1);
        let f = forecast(&m, &TimeSeries::new(Mat::zeros(1, 2), 0).unwrap(), 10).unwrap();
        let want = (f.covariances[9][(0, 0)] / f.covariances[0][(0, 0)]).sqrt();
        let ratio = h10.row("Oracle").unwrap().mae_mean / h1.row("Oracle").unwrap().mae_mean;
        assert!((ratio / want - 1.0).abs() < 0.1, "{ratio} vs {want}");
    }

    #[test]
    fn additive_effect_error_is_zero_before_propagation() {
        let spec = ExperimentSpec::new(Dataset::German, 300, 1)
            .runs(2)
            .test_size(50)
            .intervention(Intervention::additive_on(7, datasets::EXPERTISE, 0.2, 0));
        let t = run_interventional(&spec).unwrap();
        assert_eq!(t.rows[0].mae_mean, 0.0);
    }

    #[test]
    fn table_csv_layout() {
        let spec = ExperimentSpec::new(Dataset::Pendulum, 100, 1).runs(1).test_size(20);
        let t = run_observational(&spec).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("model,train_size,horizon,mae_mean"));
        assert_eq!(text.lines().count(), 3);
        assert_eq!(t.metadata["seeds"], serde_json::json!([0]));
    }

    #[test]
    fn zero_runs_are_rejected() {
        assert!(run_observational(&ExperimentSpec::new(Dataset::German, 100, 1).runs(0)).is_err());
    }

    fn crossing_spec(threshold: f64, force: f64) -> CrossingSpec {
        let (panel, model) = datasets::generate_german(3, 20, 30).unwrap();
        CrossingSpec {
            model,
            panel,
            intervention: Intervention::additive_on(7, datasets::EXPERTISE, force, 0),
            target: datasets::CREDIT_SCORE,
            threshold,
            direction: CrossingDirection::Above,
            horizon: 20,
        }
    }

    #[test]
    fn low_threshold_is_crossed_immediately() {
        let r = run_usecase_crossing(&crossing_spec(-1e6, 0.0)).unwrap();
        assert_eq!(r.histogram[0], 30);
        assert_eq!(r.never, 0);
    }

    #[test]
    fn unreachable_threshold_is_never_crossed() {
        let r = run_usecase_crossing(&crossing_spec(1e6, 0.0)).unwrap();
        assert_eq!(r.never, 30);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().contains("0,never"));
    }

    #[test]
    fn crossing_records_follow_panel_order() {
        let spec = crossing_spec(0.0, 0.0);
        let r = run_usecase_crossing(&spec).unwrap();
        let ids: Vec<_> = r.records.iter().map(|c| c.entity.clone()).collect();
        let want: Vec<_> = spec.panel.entities().iter().map(|(id, _)| id.clone()).collect();
        assert_eq!(ids, want);
        assert_eq!(r.histogram.iter().sum::<usize>() + r.never, 30);
    }
}
