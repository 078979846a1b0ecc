//! Equation-by-equation least-squares estimation of VAR(p) models, with
//! optional zero restrictions from a causal graph.

use crate::error::{Error, Result};
use crate::graph::CausalGraph;
use crate::linalg::{self, Mat, Vector};
use crate::model::VarModel;
use crate::series::{PanelSeries, TimeSeries};
use crate::simulate::Engine;

#[derive(Debug, Clone)]
pub struct FitOptions {
    pub lag: usize,
    /// Allowed cause → effect edges; lag coefficients off this set are fixed
    /// at zero. Own lags are always estimated.
    pub graph_constraint: Option<CausalGraph>,
    /// Ridge penalty on lag coefficients (the intercept is not penalized).
    pub ridge: f64,
    pub include_intercept: bool,
}

impl FitOptions {
    pub fn new(lag: usize) -> Self {
        Self {
            lag,
            graph_constraint: None,
            ridge: 0.0,
            include_intercept: true,
        }
    }

    pub fn constrained(mut self, graph: CausalGraph) -> Self {
        self.graph_constraint = Some(graph);
        self
    }

    pub fn ridge(mut self, ridge: f64) -> Self {
        self.ridge = ridge;
        self
    }

    pub fn intercept(mut self, include: bool) -> Self {
        self.include_intercept = include;
        self
    }
}

#[derive(Debug, Clone)]
pub struct FitReport {
    pub model: VarModel,
    /// One row per effective sample; panel residuals are concatenated in
    /// entity order.
    pub residuals: TimeSeries,
    pub aic: f64,
    pub bic: f64,
    pub n_effective: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    Aic,
    Bic,
}

impl std::str::FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "aic" => Ok(Criterion::Aic),
            "bic" => Ok(Criterion::Bic),
            other => Err(Error::invalid(format!("unknown criterion {other:?}"))),
        }
    }
}

/// Estimation input: a single trajectory or a panel of them.
#[derive(Debug, Clone, Copy)]
pub enum FitData<'a> {
    Series(&'a TimeSeries),
    Panel(&'a PanelSeries),
}

impl<'a> From<&'a TimeSeries> for FitData<'a> {
    fn from(s: &'a TimeSeries) -> Self {
        FitData::Series(s)
    }
}

impl<'a> From<&'a PanelSeries> for FitData<'a> {
    fn from(p: &'a PanelSeries) -> Self {
        FitData::Panel(p)
    }
}

impl<'a> FitData<'a> {
    fn segments(&self) -> Vec<&'a TimeSeries> {
        match *self {
            FitData::Series(s) => vec![s],
            FitData::Panel(p) => p.series().collect(),
        }
    }

    fn dim(&self) -> usize {
        match *self {
            FitData::Series(s) => s.dim(),
            FitData::Panel(p) => p.dim(),
        }
    }
}

/// Stacked regression problem: rows `t ≥ first_row` of every segment.
struct Design {
    regressors: Mat,
    responses: Mat,
}

fn build_design(segments: &[&TimeSeries], lag: usize, first_row: usize, intercept: bool) -> Design {
    let d = segments.first().map_or(0, |s| s.dim());
    let offset = usize::from(intercept);
    let n: usize = segments.iter().map(|s| s.len().saturating_sub(first_row)).sum();
    let mut regressors = Mat::zeros(n, offset + d * lag);
    let mut responses = Mat::zeros(n, d);
    let mut r = 0;
    for s in segments {
        let x = s.values();
        for t in first_row..s.len() {
            if intercept {
                regressors[(r, 0)] = 1.0;
            }
            for k in 1..=lag {
                for i in 0..d {
                    regressors[(r, offset + (k - 1) * d + i)] = x[(t - k, i)];
                }
            }
            for j in 0..d {
                responses[(r, j)] = x[(t, j)];
            }
            r += 1;
        }
    }
    Design {
        regressors,
        responses,
    }
}

struct Estimated {
    model: VarModel,
    n_effective: usize,
    free_params: usize,
}

fn estimate(data: FitData<'_>, opts: &FitOptions, first_row: usize) -> Result<Estimated> {
    let p = opts.lag;
    if p == 0 {
        return Err(Error::invalid("lag order must be at least 1"));
    }
    if !(opts.ridge >= 0.0 && opts.ridge.is_finite()) {
        return Err(Error::invalid("ridge penalty must be a nonnegative finite number"));
    }
    let d = data.dim();
    if let Some(g) = &opts.graph_constraint {
        if g.dim() != d {
            return Err(Error::dim("graph constraint", d, g.dim()));
        }
    }
    let segments = data.segments();
    let design = build_design(&segments, p, first_row.max(p), opts.include_intercept);
    let n = design.regressors.nrows();
    let offset = usize::from(opts.include_intercept);

    let mut intercept = Vector::zeros(d);
    let mut coeffs = vec![Mat::zeros(d, d); p];
    let mut free_params = 0;
    for j in 0..d {
        let mut cols: Vec<usize> = (0..offset).collect();
        for k in 0..p {
            for i in 0..d {
                let allowed = match &opts.graph_constraint {
                    Some(g) => i == j || g.contains(i, j),
                    None => true,
                };
                if allowed {
                    cols.push(offset + k * d + i);
                }
            }
        }
        let m = cols.len();
        if n <= m {
            return Err(Error::InsufficientSamples {
                available: n,
                required: m + 1,
            });
        }
        free_params += m;
        let penalized = if opts.ridge > 0.0 { m - offset } else { 0 };
        let mut z = Mat::zeros(n + penalized, m);
        let mut y = Vector::zeros(n + penalized);
        for (c, &col) in cols.iter().enumerate() {
            z.view_mut((0, c), (n, 1)).copy_from(&design.regressors.column(col));
        }
        y.rows_mut(0, n).copy_from(&design.responses.column(j));
        let root = opts.ridge.sqrt();
        for c in 0..penalized {
            z[(n + c, offset + c)] = root;
        }

        let svd = z.svd(true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        if !(cond <= linalg::CONDITION_LIMIT) {
            return Err(Error::Estimation(format!(
                "design for equation {j} is rank deficient (condition number {cond:e})"
            )));
        }
        let beta = svd
            .solve(&y, 0.0)
            .map_err(|e| Error::Estimation(format!("least-squares solve failed: {e}")))?;
        for (c, &col) in cols.iter().enumerate() {
            if col < offset {
                intercept[j] = beta[c];
            } else {
                let k = (col - offset) / d;
                let i = (col - offset) % d;
                coeffs[k][(j, i)] = beta[c];
            }
        }
    }

    // provisional noise covariance; replaced once residuals are known
    let provisional = VarModel::new(intercept, coeffs, Mat::identity(d, d))?;
    Ok(Estimated {
        model: provisional,
        n_effective: n,
        free_params,
    })
}

fn stacked_residuals(model: &VarModel, segments: &[&TimeSeries], first_row: usize) -> Result<Mat> {
    let parts = segments
        .iter()
        .map(|s| residuals_from(model, s, first_row))
        .collect::<Result<Vec<_>>>()?;
    let n: usize = parts.iter().map(|r| r.len()).sum();
    let mut out = Mat::zeros(n, model.dim());
    let mut r = 0;
    for part in &parts {
        out.view_mut((r, 0), (part.len(), model.dim())).copy_from(part.values());
        r += part.len();
    }
    Ok(out)
}

fn log_det(m: &Mat) -> f64 {
    match m.clone().cholesky() {
        Some(c) => 2.0 * c.l().diagonal().iter().map(|x| x.ln()).sum::<f64>(),
        None => f64::NEG_INFINITY,
    }
}

/// Least-squares VAR(p) fit. Panels are stacked with each entity's first
/// `p` rows used only as presample.
pub fn fit<'a>(data: impl Into<FitData<'a>>, opts: &FitOptions) -> Result<FitReport> {
    fit_from(data.into(), opts, opts.lag)
}

fn fit_from(data: FitData<'_>, opts: &FitOptions, first_row: usize) -> Result<FitReport> {
    let est = estimate(data, opts, first_row)?;
    let segments = data.segments();
    let d = data.dim();
    let n = est.n_effective;
    let resid = stacked_residuals(&est.model, &segments, first_row)?;
    let cross = resid.transpose() * &resid;
    let regressors = d * opts.lag + usize::from(opts.include_intercept);
    let denom = n.saturating_sub(regressors).max(1) as f64;
    let noise_cov = linalg::symmetrize(&(&cross / denom));
    let model = est.model.with_noise_cov(noise_cov)?;

    let ml_cov = linalg::symmetrize(&(&cross / n as f64));
    let ld = log_det(&ml_cov);
    let k = est.free_params as f64;
    let nf = n as f64;
    let residuals = match data {
        FitData::Series(s) if first_row <= opts.lag => residuals(&model, s)?,
        _ => TimeSeries::new(resid, 0)?,
    };
    Ok(FitReport {
        model,
        residuals,
        aic: ld + 2.0 * k / nf,
        bic: ld + nf.ln() * k / nf,
        n_effective: n,
    })
}

/// One-step residuals `û_t = X_t − ν − Σ B_k X_{t−k}` for every row with a
/// full presample.
pub fn residuals(model: &VarModel, data: &TimeSeries) -> Result<TimeSeries> {
    if data.len() <= model.lag() {
        return Err(Error::InsufficientSamples {
            available: data.len(),
            required: model.lag() + 1,
        });
    }
    residuals_from(model, data, model.lag())
}

pub(crate) fn residuals_from(model: &VarModel, data: &TimeSeries, first_row: usize) -> Result<TimeSeries> {
    let d = model.dim();
    let p = model.lag();
    if data.dim() != d {
        return Err(Error::dim("residuals data", d, data.dim()));
    }
    let first_row = first_row.max(p);
    let engine = Engine::new(model, &Mat::zeros(d, d));
    let x = data.values();
    let mut hist = vec![0.0; p * d];
    let mut pred = vec![0.0; d];
    let mut out = Vec::with_capacity(data.len().saturating_sub(first_row) * d);
    for t in first_row..data.len() {
        for k in 0..p {
            for i in 0..d {
                hist[k * d + i] = x[(t - 1 - k, i)];
            }
        }
        engine.predict(&hist, &mut pred);
        out.extend((0..d).map(|j| x[(t, j)] - pred[j]));
    }
    Ok(TimeSeries::from_flat(out, d, data.start_index() + first_row as i64))
}

/// Lag order in `1..=p_max` minimizing the criterion, every candidate being
/// fit on the same rows `t ≥ p_max`.
pub fn select_lag<'a>(data: impl Into<FitData<'a>>, p_max: usize, criterion: Criterion) -> Result<usize> {
    if p_max == 0 {
        return Err(Error::invalid("p_max must be at least 1"));
    }
    let data = data.into();
    let mut best = (1, f64::INFINITY);
    for p in 1..=p_max {
        let report = fit_from(data, &FitOptions::new(p), p_max)?;
        let score = match criterion {
            Criterion::Aic => report.aic,
            Criterion::Bic => report.bic,
        };
        if score < best.1 {
            best = (p, score);
        }
    }
    Ok(best.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets;
    use crate::simulate::{simulate, simulate_recorded, SimConfig};

    fn two_dim_model(noise: f64) -> VarModel {
        VarModel::new(
            Vector::from_vec(vec![0.1, -0.2]),
            vec![
                Mat::from_row_slice(2, 2, &[0.5, 0.1, -0.2, 0.3]),
                Mat::from_row_slice(2, 2, &[0.1, 0.0, 0.05, -0.1]),
            ],
            Mat::identity(2, 2) * noise,
        )
        .unwrap()
    }

    /// Noiseless panel with random presamples so the design has full rank.
    fn noiseless_panel(model: &VarModel, entities: usize, len: usize) -> PanelSeries {
        let noiseless = model.with_noise_cov(Mat::zeros(model.dim(), model.dim())).unwrap();
        let starts = crate::simulate::simulate(
            &model.with_noise_cov(Mat::identity(model.dim(), model.dim())).unwrap(),
            &SimConfig::new(entities * model.lag(), 77),
        )
        .unwrap();
        let series = (0..entities)
            .map(|e| {
                let init = starts.values().rows(e * model.lag(), model.lag()).into_owned();
                let cfg = SimConfig::new(len, 0).burn_in(0).initial_state(init);
                (e.to_string(), simulate(&noiseless, &cfg).unwrap())
            })
            .collect();
        PanelSeries::new(model.dim(), series).unwrap()
    }

    #[test]
    fn noiseless_fit_recovers_coefficients_exactly() {
        let m = two_dim_model(1.0);
        let panel = noiseless_panel(&m, 20, 25);
        let report = fit(&panel, &FitOptions::new(2)).unwrap();
        for (got, want) in report.model.coeffs().iter().zip(m.coeffs()) {
            assert!(linalg::max_abs(&(got - want)) < 1e-8);
        }
        assert!((report.model.intercept() - m.intercept()).amax() < 1e-8);
        assert!(report.residuals.values().amax() < 1e-8);
    }

    #[test]
    fn fit_matches_normal_equations_oracle() {
        let m = two_dim_model(0.5);
        let data = simulate(&m, &SimConfig::new(300, 4)).unwrap();
        let report = fit(&data, &FitOptions::new(2)).unwrap();
        // brute-force normal equations, built row by row
        let x = data.values();
        let mut xtx = Mat::zeros(5, 5);
        let mut xty = Mat::zeros(5, 2);
        for t in 2..data.len() {
            let z = [1.0, x[(t - 1, 0)], x[(t - 1, 1)], x[(t - 2, 0)], x[(t - 2, 1)]];
            for a in 0..5 {
                for b in 0..5 {
                    xtx[(a, b)] += z[a] * z[b];
                }
                for j in 0..2 {
                    xty[(a, j)] += z[a] * x[(t, j)];
                }
            }
        }
        let beta = xtx.try_inverse().unwrap() * xty;
        for j in 0..2 {
            assert!((report.model.intercept()[j] - beta[(0, j)]).abs() < 1e-8);
            for k in 0..2 {
                for i in 0..2 {
                    assert!((report.model.coeffs()[k][(j, i)] - beta[(1 + 2 * k + i, j)]).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn constrained_fit_zeroes_disallowed_entries() {
        let (panel, _) = datasets::generate_german(3, 40, 20).unwrap();
        let graph = datasets::german_structural(0.1).structural_graph(1e-12, false);
        let report = fit(&panel, &FitOptions::new(4).constrained(graph.clone())).unwrap();
        for b in report.model.coeffs() {
            for j in 0..7 {
                for i in 0..7 {
                    if i != j && !graph.contains(i, j) {
                        assert_eq!(b[(j, i)], 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn residuals_of_noiseless_data_vanish() {
        let m = two_dim_model(0.0);
        let data = simulate(&m, &SimConfig::new(50, 1)).unwrap();
        assert!(residuals(&m, &data).unwrap().values().amax() < 1e-14);
    }

    #[test]
    fn residuals_recover_recorded_shocks() {
        let m = two_dim_model(0.7);
        let rec = simulate_recorded(&m, &SimConfig::new(60, 8)).unwrap();
        let res = residuals(&m, &rec.series).unwrap();
        assert_eq!(res.start_index(), 2);
        let shocks = rec.shocks.window(2, 60).unwrap();
        assert!((res.values() - shocks.values()).amax() <= 1e-12);
    }

    #[test]
    fn misspecified_residuals_inflate_covariance() {
        let m = two_dim_model(1.0);
        let data = simulate(&m, &SimConfig::new(2000, 12)).unwrap();
        let wrong = VarModel::new(Vector::zeros(2), vec![Mat::zeros(2, 2); 2], Mat::identity(2, 2)).unwrap();
        let res = residuals(&wrong, &data).unwrap();
        let n = res.len() as f64;
        let centered = res.values().clone();
        let cov = centered.transpose() * &centered / n;
        assert!(cov.trace() > m.noise_cov().trace());
    }

    #[test]
    fn report_residuals_equal_recomputed_residuals() {
        let m = two_dim_model(0.3);
        let data = simulate(&m, &SimConfig::new(200, 2)).unwrap();
        let report = fit(&data, &FitOptions::new(2)).unwrap();
        assert_eq!(report.residuals, residuals(&report.model, &data).unwrap());
        assert_eq!(report.residuals.len(), data.len() - 2);
    }

    #[test]
    fn aic_and_bic_differ_only_in_penalty() {
        let m = two_dim_model(0.3);
        let data = simulate(&m, &SimConfig::new(200, 2)).unwrap();
        let r = fit(&data, &FitOptions::new(2)).unwrap();
        let n = r.n_effective as f64;
        let k = 10.0;
        assert!(((r.aic - 2.0 * k / n) - (r.bic - n.ln() * k / n)).abs() < 1e-12);
    }

    #[test]
    fn insufficient_samples_names_minimum() {
        let m = two_dim_model(0.3);
        let data = simulate(&m, &SimConfig::new(6, 2)).unwrap();
        let err = fit(&data, &FitOptions::new(2)).unwrap_err();
        assert!(matches!(err, Error::InsufficientSamples { required: 6, available: 4 }));
    }

    #[test]
    fn collinear_design_is_rejected_and_ridge_rescues_it() {
        let rows: Vec<Vec<f64>> = (0..40).map(|t| vec![(t as f64 * 0.3).sin(), 2.0 * (t as f64 * 0.3).sin()]).collect();
        let data = TimeSeries::from_rows(&rows, 0).unwrap();
        assert!(matches!(fit(&data, &FitOptions::new(1)), Err(Error::Estimation(_))));
        assert!(fit(&data, &FitOptions::new(1).ridge(1e-3)).is_ok());
    }

    #[test]
    fn select_lag_prefers_true_order() {
        let (panel, _) = datasets::generate_pendulum(1, 2000, 1).unwrap();
        assert_eq!(select_lag(&panel.entities()[0].1, 4, Criterion::Bic).unwrap(), 1);
    }
}
