//! Observational and interventional h-step prediction and causal-effect
//! paths.
//!
//! Forecast step `k` (1-based) is the prediction of `X_{t+k}` from a history
//! ending at `t`. An intervention with `start = s` is active from step
//! `s + 1` onward, so `start = 0` intervenes from the first predicted step.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::intervene::{Intervention, InterventionKind};
use crate::linalg::{self, Mat, Vector};
use crate::model::VarModel;
use crate::series::{fmt_f64, TimeSeries};
use crate::simulate::Engine;

/// Normal quantile used for the exported 95% bands.
pub const BAND_Z: f64 = 1.96;

#[derive(Debug, Clone, PartialEq)]
pub struct Forecast {
    pub horizon: usize,
    /// Row `k − 1` holds `E[X_{t+k} | X_{≤t}]`.
    pub means: Mat,
    /// `covariances[k − 1]` is the forecast-error covariance `Σ_X(k)`.
    pub covariances: Vec<Mat>,
    /// Set when the dynamics in force at the end of the horizon are unstable.
    pub unstable: bool,
}

impl Forecast {
    pub fn dim(&self) -> usize {
        self.means.ncols()
    }

    pub fn mean(&self, step: usize) -> Vector {
        self.means.row(step - 1).transpose()
    }

    /// `mean ± z·sqrt(diag Σ_X(k))` per step.
    pub fn bands(&self, z: f64) -> (Mat, Mat) {
        let sd = Mat::from_fn(self.horizon, self.dim(), |k, i| self.covariances[k][(i, i)].max(0.0).sqrt());
        (&self.means - &sd * z, &self.means + &sd * z)
    }

    /// Columns `k, mean_0.., var_0..`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let d = self.dim();
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        let mut header = vec!["k".to_string()];
        header.extend((0..d).map(|i| format!("mean_{i}")));
        header.extend((0..d).map(|i| format!("var_{i}")));
        w.write_record(&header)?;
        for k in 0..self.horizon {
            let mut rec = vec![(k + 1).to_string()];
            rec.extend((0..d).map(|i| fmt_f64(self.means[(k, i)])));
            rec.extend((0..d).map(|i| fmt_f64(self.covariances[k][(i, i)])));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Full covariance matrices, keyed by step.
    pub fn covariances_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Step {
            k: usize,
            cov: Vec<Vec<f64>>,
        }
        let steps: Vec<Step> = self
            .covariances
            .iter()
            .enumerate()
            .map(|(k, c)| Step {
                k: k + 1,
                cov: linalg::mat_to_rows(c),
            })
            .collect();
        Ok(serde_json::to_string_pretty(&steps)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CausalEffectPath {
    pub horizon: usize,
    /// Row `k` is the effect `k` steps after the intervention starts.
    pub effects: Mat,
    /// Long-run effect, present when it is defined.
    pub asymptote: Option<Vector>,
}

impl CausalEffectPath {
    /// Columns `k, ce_0..`, rows `k = 0..=horizon`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let d = self.effects.ncols();
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        let mut header = vec!["k".to_string()];
        header.extend((0..d).map(|i| format!("ce_{i}")));
        w.write_record(&header)?;
        for k in 0..=self.horizon {
            let mut rec = vec![k.to_string()];
            rec.extend((0..d).map(|i| fmt_f64(self.effects[(k, i)])));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// First row at which `component` is nonzero.
    pub fn first_nonzero(&self, component: usize) -> Option<usize> {
        (0..=self.horizon).find(|&k| self.effects[(k, component)] != 0.0)
    }
}

fn history_buffer(model: &VarModel, history: &TimeSeries) -> Result<Vec<f64>> {
    let d = model.dim();
    let p = model.lag();
    if history.dim() != d {
        return Err(Error::dim("forecast history", d, history.dim()));
    }
    if history.len() < p {
        return Err(Error::InsufficientSamples {
            available: history.len(),
            required: p,
        });
    }
    let x = history.values();
    let last = history.len() - 1;
    let mut hist = vec![0.0; p * d];
    for k in 0..p {
        for i in 0..d {
            hist[k * d + i] = x[(last - k, i)];
        }
    }
    Ok(hist)
}

/// Mean recursion with the pre-intervention engine for steps `≤ switch_after`
/// and the post-intervention engine afterwards.
fn mean_path(before: &Engine, after: &Engine, switch_after: usize, mut hist: Vec<f64>, d: usize, h: usize) -> Mat {
    let mut means = Mat::zeros(h, d);
    let mut x = vec![0.0; d];
    for k in 1..=h {
        let engine = if k > switch_after { after } else { before };
        engine.predict(&hist, &mut x);
        engine.push(&mut hist, &x);
        for i in 0..d {
            means[(k - 1, i)] = x[i];
        }
    }
    means
}

/// `Σ_X(k) = Σ_{i<k} Φ_i Σ_u Φ_iᵀ` for `k = 1..=h`.
fn ma_covariances(model: &VarModel, h: usize) -> Vec<Mat> {
    let phis = model.ma_coefficients(h.saturating_sub(1)).phis;
    let mut acc = Mat::zeros(model.dim(), model.dim());
    let mut out = Vec::with_capacity(h);
    for phi in phis.iter().take(h) {
        acc += phi * model.noise_cov() * phi.transpose();
        out.push(acc.clone());
    }
    out
}

/// Stacked-state error covariance for dynamics switching after `switch_after` steps.
fn switched_covariances(before: &VarModel, after: &VarModel, switch_after: usize, h: usize) -> Vec<Mat> {
    let d = before.dim();
    let p = before.lag();
    let n = d * p;
    let embed = |m: &VarModel| {
        let mut q = Mat::zeros(n, n);
        q.view_mut((0, 0), (d, d)).copy_from(m.noise_cov());
        q
    };
    let (c0, q0) = (before.companion(), embed(before));
    let (c1, q1) = (after.companion(), embed(after));
    let mut state = Mat::zeros(n, n);
    let mut out = Vec::with_capacity(h);
    for k in 1..=h {
        let (c, q) = if k > switch_after { (&c1, &q1) } else { (&c0, &q0) };
        state = c * &state * c.transpose() + q;
        out.push(linalg::symmetrize(&state.view((0, 0), (d, d)).into_owned()));
    }
    out
}

/// Optimal `h`-step predictor `E[X_{t+k} | X_{≤t}]` and its MSE matrices.
pub fn forecast(model: &VarModel, history: &TimeSeries, h: usize) -> Result<Forecast> {
    let hist = history_buffer(model, history)?;
    let engine = Engine::new(model, &Mat::zeros(model.dim(), model.dim()));
    Ok(Forecast {
        horizon: h,
        means: mean_path(&engine, &engine, h, hist, model.dim(), h),
        covariances: ma_covariances(model, h),
        unstable: !model.is_stable()?,
    })
}

/// Forecast with the ground-truth generating model.
pub fn oracle_forecast(true_model: &VarModel, history: &TimeSeries, h: usize) -> Result<Forecast> {
    forecast(true_model, history, h)
}

/// Forecast under an intervention active from step `intervention.start + 1`.
pub fn forecast_intervened(model: &VarModel, intervention: &Intervention, history: &TimeSeries, h: usize) -> Result<Forecast> {
    let hist = history_buffer(model, history)?;
    let dynamics = intervention.dynamics(model)?;
    let d = model.dim();
    let s = intervention.start;
    let zero = Mat::zeros(d, d);
    let before = Engine::new(model, &zero);
    let after = Engine::new(&dynamics.model, &zero);
    let means = mean_path(&before, &after, s, hist, d, h);

    let covariances = if intervention.kind == InterventionKind::Additive || s >= h {
        ma_covariances(model, h)
    } else if s == 0 {
        ma_covariances(&dynamics.model, h)
    } else {
        let mut covs = ma_covariances(model, s);
        covs.extend(switched_covariances(model, &dynamics.model, s, h).into_iter().skip(s));
        covs
    };
    let active = if s >= h { model } else { &dynamics.model };
    Ok(Forecast {
        horizon: h,
        means,
        covariances,
        unstable: !active.is_stable()?,
    })
}

/// Expected difference between intervened and observational trajectories,
/// `k = 0..=h` steps after the intervention starts.
///
/// Additive interventions use the closed form `Σ_{l≤k} Φ_l F`, which does
/// not depend on the history; other kinds difference the two forecasts.
pub fn causal_effect_path(model: &VarModel, intervention: &Intervention, history: &TimeSeries, h: usize) -> Result<CausalEffectPath> {
    history_buffer(model, history)?;
    intervention.validate(model.dim())?;
    let d = model.dim();
    match intervention.kind {
        InterventionKind::Additive => {
            let phis = model.ma_coefficients(h).phis;
            let mut effects = Mat::zeros(h + 1, d);
            let mut acc = Vector::zeros(d);
            for (k, phi) in phis.iter().enumerate() {
                acc += phi * &intervention.force;
                effects.row_mut(k).copy_from(&acc.transpose());
            }
            let asymptote = if model.is_stable()? {
                Some(&model.long_run_matrix()?.matrix * &intervention.force)
            } else {
                None
            };
            Ok(CausalEffectPath {
                horizon: h,
                effects,
                asymptote,
            })
        }
        InterventionKind::Forcing | InterventionKind::Do => {
            let s = intervention.start;
            let steps = s + h + 1;
            let observed = forecast(model, history, steps)?;
            let intervened = forecast_intervened(model, intervention, history, steps)?;
            let effects = Mat::from_fn(h + 1, d, |k, i| intervened.means[(s + k, i)] - observed.means[(s + k, i)]);
            let dynamics = intervention.dynamics(model)?;
            let asymptote = if model.is_stable()? && dynamics.model.is_stable()? {
                Some(dynamics.model.process_mean()? - model.process_mean()?)
            } else {
                None
            };
            Ok(CausalEffectPath {
                horizon: h,
                effects,
                asymptote,
            })
        }
    }
}
