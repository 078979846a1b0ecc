//! Seeded trajectory generation.
//!
//! Every trajectory draws its standard-normal innovations from a ChaCha20
//! stream keyed by the run seed and selected by a hash of the entity id, so a
//! given `(seed, entity)` pair always reproduces the same path regardless of
//! how many entities are generated or in which order. Shocks are
//! `u_t = S z_t` with `S` the symmetric square root of `Σ_u`.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::intervene::{IntervenedDynamics, Intervention};
use crate::linalg::{self, Mat};
use crate::model::VarModel;
use crate::series::TimeSeries;

/// Trajectories are rejected once any component exceeds this magnitude.
pub const OVERFLOW_LIMIT: f64 = 1e100;

pub const DEFAULT_BURN_IN: usize = 200;

#[derive(Debug, Clone)]
pub struct SimConfig {
    /// Number of recorded steps.
    pub length: usize,
    /// Steps simulated and discarded before recording.
    pub burn_in: usize,
    pub seed: u64,
    /// Selects the random substream; entity `i` of a generated panel uses `i.to_string()`.
    pub entity_id: String,
    /// Pre-sample values as a `p × d` matrix, oldest row first. Defaults to
    /// the process mean (zero for unstable models) repeated `p` times.
    pub initial_state: Option<Mat>,
}

impl SimConfig {
    pub fn new(length: usize, seed: u64) -> Self {
        Self {
            length,
            burn_in: DEFAULT_BURN_IN,
            seed,
            entity_id: "0".to_string(),
            initial_state: None,
        }
    }

    pub fn burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }

    pub fn entity(mut self, id: impl Into<String>) -> Self {
        self.entity_id = id.into();
        self
    }

    pub fn initial_state(mut self, presample: Mat) -> Self {
        self.initial_state = Some(presample);
        self
    }
}

/// Random stream for `(seed, entity_id)`.
pub fn substream(seed: u64, entity_id: &str) -> ChaCha20Rng {
    let digest = Sha256::digest(entity_id.as_bytes());
    let mut stream = [0u8; 8];
    stream.copy_from_slice(&digest[..8]);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(u64::from_le_bytes(stream));
    rng
}

/// Flat-buffer stepper for one set of VAR equations.
#[derive(Debug, Clone)]
pub(crate) struct Engine {
    d: usize,
    p: usize,
    intercept: Vec<f64>,
    /// `coeffs[k*d*d + j*d + i] = B_{k+1}[j][i]`
    coeffs: Vec<f64>,
    /// `factor[j*d + i]`: shock loading of innovation `i` on equation `j`.
    factor: Vec<f64>,
}

impl Engine {
    pub(crate) fn new(model: &VarModel, shock_factor: &Mat) -> Self {
        let d = model.dim();
        let p = model.lag();
        let mut coeffs = Vec::with_capacity(p * d * d);
        for b in model.coeffs() {
            for j in 0..d {
                for i in 0..d {
                    coeffs.push(b[(j, i)]);
                }
            }
        }
        let factor = (0..d * d).map(|n| shock_factor[(n / d, n % d)]).collect();
        Self {
            d,
            p,
            intercept: model.intercept().iter().copied().collect(),
            coeffs,
            factor,
        }
    }

    /// Engine driven by standard-normal innovations with loading `√Σ_u`.
    pub(crate) fn for_model(model: &VarModel) -> Self {
        Self::new(model, &linalg::sym_sqrt(model.noise_cov()))
    }

    /// `out = ν + Σ_k B_k hist[k] + shock`, where `hist[k*d..]` is `X_{t−1−k}`.
    #[inline]
    pub(crate) fn predict(&self, hist: &[f64], out: &mut [f64]) {
        let d = self.d;
        out.copy_from_slice(&self.intercept);
        for k in 0..self.p {
            let lagged = &hist[k * d..(k + 1) * d];
            let block = &self.coeffs[k * d * d..(k + 1) * d * d];
            for (j, o) in out.iter_mut().enumerate() {
                let row = &block[j * d..(j + 1) * d];
                *o += row.iter().zip(lagged).map(|(a, x)| a * x).sum::<f64>();
            }
        }
    }

    #[inline]
    pub(crate) fn add_shock(&self, z: &[f64], out: &mut [f64]) {
        let d = self.d;
        for (j, o) in out.iter_mut().enumerate() {
            let row = &self.factor[j * d..(j + 1) * d];
            *o += row.iter().zip(z).map(|(a, x)| a * x).sum::<f64>();
        }
    }

    /// Shifts `x` into the history buffer as the newest lag.
    #[inline]
    pub(crate) fn push(&self, hist: &mut [f64], x: &[f64]) {
        let d = self.d;
        hist.copy_within(0..(self.p - 1) * d, d);
        hist[..d].copy_from_slice(x);
    }
}

pub(crate) fn check_overflow(x: &[f64], index: i64) -> Result<()> {
    match x.iter().position(|v| !v.is_finite() || v.abs() > OVERFLOW_LIMIT) {
        Some(component) => Err(Error::Overflow { index, component }),
        None => Ok(()),
    }
}

pub(crate) fn draw_normals(rng: &mut ChaCha20Rng, z: &mut [f64]) {
    for v in z.iter_mut() {
        *v = StandardNormal.sample(rng);
    }
}

/// History buffer (newest lag first) from a `p × d` presample, oldest row first.
pub(crate) fn history_from_presample(model: &VarModel, presample: Option<&Mat>) -> Result<Vec<f64>> {
    let d = model.dim();
    let p = model.lag();
    let mut hist = vec![0.0; p * d];
    match presample {
        Some(m) => {
            if m.nrows() != p || m.ncols() != d {
                return Err(Error::invalid(format!(
                    "initial state is {}x{}, expected {p}x{d}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            for k in 0..p {
                for i in 0..d {
                    hist[k * d + i] = m[(p - 1 - k, i)];
                }
            }
        }
        None => {
            if model.is_stable()? {
                let mu = model.process_mean()?;
                for k in 0..p {
                    for i in 0..d {
                        hist[k * d + i] = mu[i];
                    }
                }
            }
        }
    }
    Ok(hist)
}

/// A simulated series together with the shocks `u_t` that produced it.
#[derive(Debug, Clone)]
pub struct Recorded {
    pub series: TimeSeries,
    pub shocks: TimeSeries,
}

/// `X_t = ν + Σ B_k X_{t−k} + u_t` with Gaussian shocks; the first
/// `burn_in` steps are discarded.
pub fn simulate(model: &VarModel, cfg: &SimConfig) -> Result<TimeSeries> {
    Ok(simulate_recorded(model, cfg)?.series)
}

/// [`simulate`], also returning the shock draws.
pub fn simulate_recorded(model: &VarModel, cfg: &SimConfig) -> Result<Recorded> {
    if cfg.length == 0 {
        return Err(Error::invalid("simulation length must be at least 1"));
    }
    let d = model.dim();
    let engine = Engine::for_model(model);
    let factor = linalg::sym_sqrt(model.noise_cov());
    let mut hist = history_from_presample(model, cfg.initial_state.as_ref())?;
    let mut rng = substream(cfg.seed, &cfg.entity_id);
    let mut z = vec![0.0; d];
    let mut x = vec![0.0; d];
    let mut values = Vec::with_capacity(cfg.length * d);
    let mut shocks = Vec::with_capacity(cfg.length * d);
    for step in 0..cfg.burn_in + cfg.length {
        draw_normals(&mut rng, &mut z);
        engine.predict(&hist, &mut x);
        engine.add_shock(&z, &mut x);
        let index = step as i64 - cfg.burn_in as i64;
        check_overflow(&x, index)?;
        engine.push(&mut hist, &x);
        if step >= cfg.burn_in {
            values.extend_from_slice(&x);
            let u = &factor * nalgebra::DVector::from_column_slice(&z);
            shocks.extend(u.iter());
        }
    }
    Ok(Recorded {
        series: TimeSeries::from_flat(values, d, 0),
        shocks: TimeSeries::from_flat(shocks, d, 0),
    })
}

/// Coupled factual and intervened trajectories driven by the same shocks.
/// The intervened path follows the original equations before
/// `intervention.start` (an index into the recorded range) and the
/// intervened ones from then on.
pub fn simulate_intervened(
    model: &VarModel,
    intervention: &Intervention,
    cfg: &SimConfig,
) -> Result<(TimeSeries, TimeSeries)> {
    if cfg.length == 0 {
        return Err(Error::invalid("simulation length must be at least 1"));
    }
    if intervention.start >= cfg.length {
        return Err(Error::domain(format!(
            "intervention start {} outside simulated range [0, {})",
            intervention.start, cfg.length
        )));
    }
    let d = model.dim();
    let IntervenedDynamics { model: im, shock_map } = intervention.dynamics(model)?;
    let factor = linalg::sym_sqrt(model.noise_cov());
    let factual = Engine::new(model, &factor);
    let intervened = Engine::new(&im, &(&shock_map * &factor));

    let mut hist = history_from_presample(model, cfg.initial_state.as_ref())?;
    let mut rng = substream(cfg.seed, &cfg.entity_id);
    let mut z = vec![0.0; d];
    let mut x = vec![0.0; d];
    let mut xi = vec![0.0; d];
    for step in 0..cfg.burn_in {
        draw_normals(&mut rng, &mut z);
        factual.predict(&hist, &mut x);
        factual.add_shock(&z, &mut x);
        check_overflow(&x, step as i64 - cfg.burn_in as i64)?;
        factual.push(&mut hist, &x);
    }
    let mut hist_i = hist.clone();
    let mut values = Vec::with_capacity(cfg.length * d);
    let mut values_i = Vec::with_capacity(cfg.length * d);
    for t in 0..cfg.length {
        draw_normals(&mut rng, &mut z);
        factual.predict(&hist, &mut x);
        factual.add_shock(&z, &mut x);
        check_overflow(&x, t as i64)?;
        factual.push(&mut hist, &x);
        values.extend_from_slice(&x);

        let engine = if t >= intervention.start { &intervened } else { &factual };
        engine.predict(&hist_i, &mut xi);
        engine.add_shock(&z, &mut xi);
        check_overflow(&xi, t as i64)?;
        engine.push(&mut hist_i, &xi);
        values_i.extend_from_slice(&xi);
    }
    Ok((
        TimeSeries::from_flat(values, d, 0),
        TimeSeries::from_flat(values_i, d, 0),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Vector;

    fn scalar(a: f64, nu: f64, var: f64) -> VarModel {
        VarModel::scalar(&[a], nu, var).unwrap()
    }

    #[test]
    fn noiseless_zero_model_stays_at_zero() {
        let m = VarModel::new(Vector::zeros(2), vec![Mat::from_row_slice(2, 2, &[0.5, 0.1, 0.0, 0.3])], Mat::zeros(2, 2)).unwrap();
        let s = simulate(&m, &SimConfig::new(50, 1)).unwrap();
        assert!(s.values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn noiseless_decay_from_initial_state() {
        let m = scalar(0.5, 0.0, 0.0);
        let cfg = SimConfig::new(4, 1).burn_in(0).initial_state(Mat::from_element(1, 1, 8.0));
        assert_eq!(simulate(&m, &cfg).unwrap().column(0), vec![4.0, 2.0, 1.0, 0.5]);
    }

    #[test]
    fn same_seed_same_path_different_seed_different_path() {
        let m = scalar(0.5, 0.0, 1.0);
        let a = simulate(&m, &SimConfig::new(100, 42)).unwrap();
        let b = simulate(&m, &SimConfig::new(100, 42)).unwrap();
        let c = simulate(&m, &SimConfig::new(100, 43)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn entity_substreams_differ() {
        let m = scalar(0.5, 0.0, 1.0);
        let a = simulate(&m, &SimConfig::new(10, 42).entity("a")).unwrap();
        let b = simulate(&m, &SimConfig::new(10, 42).entity("b")).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn zero_force_intervention_matches_factual() {
        let m = scalar(0.7, 0.2, 1.0);
        let (f, i) = simulate_intervened(&m, &Intervention::additive(Vector::zeros(1), 3), &SimConfig::new(50, 9)).unwrap();
        assert_eq!(f, i);
    }

    #[test]
    fn factual_output_is_plain_simulation() {
        let m = scalar(0.7, 0.2, 1.0);
        let cfg = SimConfig::new(50, 9);
        let (f, _) = simulate_intervened(&m, &Intervention::additive_on(1, 0, 1.0, 10), &cfg).unwrap();
        assert_eq!(f, simulate(&m, &cfg).unwrap());
    }

    #[test]
    fn additive_intervention_settles_to_shifted_fixed_point() {
        let m = scalar(0.5, 0.0, 0.0);
        let (_, i) = simulate_intervened(&m, &Intervention::additive_on(1, 0, 1.0, 0), &SimConfig::new(80, 3)).unwrap();
        assert!((i.column(0)[79] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn intervened_path_matches_factual_before_start() {
        let m = scalar(0.7, 0.2, 1.0);
        let (f, i) = simulate_intervened(&m, &Intervention::forcing_on(1, 0, 2.0, 5.0, 20), &SimConfig::new(50, 9)).unwrap();
        assert_eq!(f.window(0, 20).unwrap(), i.window(0, 20).unwrap());
        assert_ne!(f.at(20), i.at(20));
    }

    #[test]
    fn explosive_model_overflows() {
        let m = scalar(3.0, 0.0, 1.0);
        let err = simulate(&m, &SimConfig::new(1000, 1).burn_in(0)).unwrap_err();
        assert!(matches!(err, Error::Overflow { component: 0, .. }));
    }

    #[test]
    fn recorded_shocks_reproduce_series() {
        let m = scalar(0.5, 1.0, 2.0);
        let cfg = SimConfig::new(20, 5).burn_in(0).initial_state(Mat::from_element(1, 1, 0.0));
        let r = simulate_recorded(&m, &cfg).unwrap();
        let mut prev = 0.0;
        for t in 0..20 {
            let x = 1.0 + 0.5 * prev + r.shocks.column(0)[t];
            assert!((x - r.series.column(0)[t]).abs() < 1e-12);
            prev = r.series.column(0)[t];
        }
    }

    #[test]
    fn start_outside_range_is_rejected() {
        let m = scalar(0.5, 0.0, 1.0);
        assert!(simulate_intervened(&m, &Intervention::additive_on(1, 0, 1.0, 10), &SimConfig::new(10, 1)).is_err());
    }
}
