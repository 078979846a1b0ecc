//! Retrospective counterfactuals by abduction, action and prediction.
//!
//! The shocks of an observed trajectory are recovered as model residuals,
//! the model is intervened, and the intervened equations are replayed with
//! the recovered shocks.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::intervene::Intervention;
use crate::linalg::{self, Mat, Vector};
use crate::model::VarModel;
use crate::series::{fmt_f64, PanelSeries, TimeSeries};
use crate::simulate::Engine;

/// Residual checks over the abduction window. Large deviations suggest the
/// model used for abduction is misspecified.
#[derive(Debug, Clone, Serialize)]
pub struct ResidualDiagnostics {
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
    /// `‖Σ̂ − Σ_u‖_F / ‖Σ_u‖_F`; infinite when `Σ_u = 0`.
    pub cov_gap_rel: f64,
    /// Ljung–Box `Q` per component.
    pub ljung_box: Vec<f64>,
    pub ljung_box_lags: usize,
}

#[derive(Debug, Clone)]
pub struct CounterfactualResult {
    pub factual: TimeSeries,
    pub counterfactual: TimeSeries,
    /// Counterfactual minus factual; zero before `t0`.
    pub effect: TimeSeries,
    pub t0: i64,
    pub t1: i64,
    pub residuals: TimeSeries,
    pub diagnostics: ResidualDiagnostics,
}

impl CounterfactualResult {
    /// Columns `t, factual_i.., counterfactual_i.., effect_i..`.
    pub fn write_csv<W: Write>(&self, out: W, names: &[String]) -> Result<()> {
        let d = self.factual.dim();
        if names.len() != d {
            return Err(Error::dim("column names", d, names.len()));
        }
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        let mut header = vec!["t".to_string()];
        for prefix in ["factual", "counterfactual", "effect"] {
            header.extend(names.iter().map(|n| format!("{prefix}_{n}")));
        }
        w.write_record(&header)?;
        for r in 0..self.factual.len() {
            let mut rec = vec![(self.factual.start_index() + r as i64).to_string()];
            for s in [&self.factual, &self.counterfactual, &self.effect] {
                rec.extend((0..d).map(|i| fmt_f64(s.values()[(r, i)])));
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn ljung_box(residuals: &Mat, lags: usize) -> Vec<f64> {
    let n = residuals.nrows();
    (0..residuals.ncols())
        .map(|i| {
            let col = residuals.column(i);
            let mean = col.mean();
            let c0: f64 = col.iter().map(|x| (x - mean).powi(2)).sum();
            if c0 == 0.0 {
                return 0.0;
            }
            (1..=lags)
                .map(|h| {
                    let ch: f64 = (h..n).map(|t| (col[t] - mean) * (col[t - h] - mean)).sum();
                    let rho = ch / c0;
                    rho * rho / (n - h) as f64
                })
                .sum::<f64>()
                * n as f64
                * (n as f64 + 2.0)
        })
        .collect()
}

fn diagnostics(model: &VarModel, residuals: &Mat) -> ResidualDiagnostics {
    let n = residuals.nrows();
    let d = residuals.ncols();
    let mean = Vector::from_fn(d, |i, _| residuals.column(i).mean());
    let mut cov = Mat::zeros(d, d);
    for r in 0..n {
        let c = residuals.row(r).transpose() - &mean;
        cov += &c * c.transpose();
    }
    cov /= (n.max(2) - 1) as f64;
    let scale = linalg::frobenius(model.noise_cov());
    let cov_gap_rel = if scale > 0.0 {
        linalg::rel_frobenius(&cov, model.noise_cov())
    } else {
        f64::INFINITY
    };
    let lags = (n / 4).clamp(1, 10);
    ResidualDiagnostics {
        mean: mean.iter().copied().collect(),
        cov: linalg::mat_to_rows(&cov),
        cov_gap_rel,
        ljung_box: if n > lags { ljung_box(residuals, lags) } else { vec![0.0; d] },
        ljung_box_lags: lags,
    }
}

/// Counterfactual of `trajectory` had `intervention` acted from `t0`
/// through `t1` (inclusive, absolute time indices). The intervention's own
/// `start` field is ignored; `t0` fixes the timing.
///
/// The result spans from the first observation of `trajectory` to `t1`.
pub fn counterfactual_trajectory(
    model: &VarModel,
    trajectory: &TimeSeries,
    intervention: &Intervention,
    t0: i64,
    t1: i64,
) -> Result<CounterfactualResult> {
    let d = model.dim();
    let p = model.lag() as i64;
    if trajectory.dim() != d {
        return Err(Error::dim("counterfactual trajectory", d, trajectory.dim()));
    }
    if t0 > t1 {
        return Err(Error::domain(format!("counterfactual window is empty: t0 = {t0} > t1 = {t1}")));
    }
    let first = trajectory.start_index();
    let last = trajectory.end_index() - 1;
    if trajectory.is_empty() || first > t0 - p || last < t1 {
        return Err(Error::domain(format!(
            "trajectory covers [{first}, {last}] but the counterfactual needs [{}, {t1}]",
            t0 - p
        )));
    }
    let dynamics = intervention.dynamics(model)?;
    let factual_engine = Engine::new(model, &Mat::zeros(d, d));
    let cf_engine = Engine::new(&dynamics.model, &dynamics.shock_map);

    let x = trajectory.values();
    let rows = (t1 - first + 1) as usize;
    let r0 = (t0 - first) as usize;
    let mut hist = vec![0.0; p as usize * d];
    for k in 0..p as usize {
        for i in 0..d {
            hist[k * d + i] = x[(r0 - 1 - k, i)];
        }
    }
    let mut factual_hist = hist.clone();
    let mut cf = Mat::from_fn(rows, d, |r, i| x[(r, i)]);
    let mut residuals = Mat::zeros(rows - r0, d);
    let mut pred = vec![0.0; d];
    let mut u = vec![0.0; d];
    let mut next = vec![0.0; d];
    for r in r0..rows {
        factual_engine.predict(&factual_hist, &mut pred);
        for i in 0..d {
            u[i] = x[(r, i)] - pred[i];
            residuals[(r - r0, i)] = u[i];
            pred[i] = x[(r, i)];
        }
        factual_engine.push(&mut factual_hist, &pred);

        cf_engine.predict(&hist, &mut next);
        cf_engine.add_shock(&u, &mut next);
        cf_engine.push(&mut hist, &next);
        for i in 0..d {
            cf[(r, i)] = next[i];
        }
    }
    let factual = TimeSeries::new(Mat::from_fn(rows, d, |r, i| x[(r, i)]), first)?;
    let effect = Mat::from_fn(rows, d, |r, i| cf[(r, i)] - x[(r, i)]);
    let diagnostics = diagnostics(model, &residuals);
    Ok(CounterfactualResult {
        counterfactual: TimeSeries::new(cf, first)?,
        effect: TimeSeries::new(effect, first)?,
        factual,
        t0,
        t1,
        residuals: TimeSeries::new(residuals, t0)?,
        diagnostics,
    })
}

/// [`counterfactual_trajectory`] for every entity of a panel.
pub fn counterfactual_panel(
    model: &VarModel,
    panel: &PanelSeries,
    intervention: &Intervention,
    t0: i64,
    t1: i64,
) -> Result<Vec<(String, CounterfactualResult)>> {
    panel
        .entities()
        .par_iter()
        .map(|(id, s)| counterfactual_trajectory(model, s, intervention, t0, t1).map(|r| (id.clone(), r)))
        .collect()
}
