//! Equilibrium structural causal model of a stable VAR.
//!
//! The SCM is `X̃ = c + Ã X̃ + ũ` with `Ã = Σ_k B_k`, `ũ ~ N(0, Σ_u)` and
//! `c = (I − Ã) μ`. Its solution law is the limit law of the long-run
//! normalized mean `Z_t = μ + t^{−1/2} Σ_{i≤t} (X_i − μ)`, both before and
//! after an intervention.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intervene::{Intervention, InterventionKind};
use crate::linalg::{self, Mat, Vector, CONDITION_LIMIT};
use crate::model::{VarModel, EFFECT_ROW};
use crate::simulate::{check_overflow, draw_normals, substream, Engine, DEFAULT_BURN_IN};

#[derive(Debug, Clone, PartialEq)]
pub struct LinearScm {
    coeff: Mat,
    exo_cov: Mat,
    mean: Vector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianDist {
    pub mean: Vector,
    pub cov: Mat,
}

fn check_system(coeff: &Mat) -> Result<f64> {
    let d = coeff.nrows();
    let cond = linalg::condition_number(&(Mat::identity(d, d) - coeff));
    if !cond.is_finite() || cond > CONDITION_LIMIT {
        return Err(Error::numerical(format!(
            "I - coefficient matrix is numerically singular (condition number {cond:e})"
        )));
    }
    Ok(cond)
}

impl GaussianDist {
    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::json!({
            "mean": self.mean.iter().collect::<Vec<_>>(),
            "cov": linalg::mat_to_rows(&self.cov),
        })
    }
}

impl LinearScm {
    pub fn new(coeff: Mat, exo_cov: Mat, mean: Vector) -> Result<Self> {
        let d = mean.len();
        if coeff.shape() != (d, d) {
            return Err(Error::dim("SCM coefficient matrix", d, coeff.nrows()));
        }
        if exo_cov.shape() != (d, d) {
            return Err(Error::dim("SCM exogenous covariance", d, exo_cov.nrows()));
        }
        if coeff.iter().chain(exo_cov.iter()).chain(mean.iter()).any(|x| !x.is_finite()) {
            return Err(Error::invalid("SCM entries must be finite"));
        }
        if !linalg::is_symmetric(&exo_cov, 1e-10) || linalg::min_eigenvalue(&exo_cov) < -1e-10 {
            return Err(Error::invalid("SCM exogenous covariance must be symmetric PSD"));
        }
        check_system(&coeff)?;
        Ok(Self { coeff, exo_cov, mean })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn coeff(&self) -> &Mat {
        &self.coeff
    }

    pub fn exo_cov(&self) -> &Mat {
        &self.exo_cov
    }

    pub fn mean(&self) -> &Vector {
        &self.mean
    }

    /// Structural constant `c = (I − Ã) μ`.
    pub fn constant(&self) -> Vector {
        let d = self.dim();
        (Mat::identity(d, d) - &self.coeff) * &self.mean
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ScmFile::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: ScmFile = serde_json::from_str(s)?;
        if f.orientation != EFFECT_ROW {
            return Err(Error::invalid(format!(
                "unsupported orientation {:?}; expected \"{EFFECT_ROW}\"",
                f.orientation
            )));
        }
        let scm = Self::new(
            linalg::mat_from_rows(&f.coeff, "coeff")?,
            linalg::mat_from_rows(&f.exo_cov, "exo_cov")?,
            Vector::from_vec(f.mean),
        )?;
        if scm.dim() != f.dim {
            return Err(Error::dim("SCM file", f.dim, scm.dim()));
        }
        Ok(scm)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ScmFile {
    dim: usize,
    coeff: Vec<Vec<f64>>,
    exo_cov: Vec<Vec<f64>>,
    mean: Vec<f64>,
    orientation: String,
}

impl From<&LinearScm> for ScmFile {
    fn from(s: &LinearScm) -> Self {
        Self {
            dim: s.dim(),
            coeff: linalg::mat_to_rows(&s.coeff),
            exo_cov: linalg::mat_to_rows(&s.exo_cov),
            mean: s.mean.iter().copied().collect(),
            orientation: EFFECT_ROW.to_string(),
        }
    }
}

pub fn to_equilibrium_scm(model: &VarModel) -> Result<LinearScm> {
    if !model.is_stable()? {
        return Err(Error::domain("equilibrium SCM requires a stable model"));
    }
    LinearScm::new(model.coeff_sum(), model.noise_cov().clone(), model.process_mean()?)
}

/// Law of `X̃ = (I − Ã)⁻¹ (c + ũ)`.
pub fn scm_solution(scm: &LinearScm) -> Result<GaussianDist> {
    let d = scm.dim();
    check_system(&scm.coeff)?;
    let inv = (Mat::identity(d, d) - &scm.coeff)
        .try_inverse()
        .ok_or_else(|| Error::numerical("I - coefficient matrix is singular"))?;
    let cov = &inv * &scm.exo_cov * inv.transpose();
    Ok(GaussianDist {
        mean: scm.mean.clone(),
        cov,
    })
}

/// Intervened equilibrium SCM. Timing (`start`) is irrelevant at equilibrium.
pub fn scm_intervene(scm: &LinearScm, intervention: &Intervention) -> Result<LinearScm> {
    let d = scm.dim();
    intervention.validate(d)?;
    let eye = Mat::identity(d, d);
    match intervention.kind {
        InterventionKind::Additive => {
            let (inv, _) = linalg::checked_inverse(&(&eye - &scm.coeff), "I - coefficient matrix")?;
            let mean = &scm.mean + inv * &intervention.force;
            LinearScm::new(scm.coeff.clone(), scm.exo_cov.clone(), mean)
        }
        InterventionKind::Forcing => {
            let f = &intervention.force;
            let system = &eye - &scm.coeff + Mat::from_diagonal(f);
            let (inv, _) = linalg::checked_inverse(&system, "I - coefficient matrix + diag(force)")?;
            let pull = Vector::from_fn(d, |i, _| if f[i] > 0.0 { f[i] * intervention.target[i] } else { 0.0 });
            let mean = inv * (scm.constant() + pull);
            let m = f.map(|x| 1.0 / (1.0 + x));
            let coeff = Mat::from_fn(d, d, |i, j| m[i] * scm.coeff[(i, j)]);
            let exo_cov = Mat::from_fn(d, d, |i, j| m[i] * scm.exo_cov[(i, j)] * m[j]);
            LinearScm::new(coeff, exo_cov, mean)
        }
        InterventionKind::Do => {
            let mut c = scm.constant();
            let mut coeff = scm.coeff.clone();
            let mut exo_cov = scm.exo_cov.clone();
            for i in intervention.components() {
                c[i] = intervention.target[i];
                coeff.row_mut(i).fill(0.0);
                exo_cov.row_mut(i).fill(0.0);
                exo_cov.column_mut(i).fill(0.0);
            }
            let (inv, _) = linalg::checked_inverse(&(&eye - &coeff), "I - coefficient matrix")?;
            let mut mean = inv * c;
            for i in intervention.components() {
                mean[i] = intervention.target[i];
            }
            LinearScm::new(coeff, exo_cov, mean)
        }
    }
}

#[derive(Debug, Clone)]
pub struct CommutationConfig {
    pub replicates: usize,
    /// Steps summed into each normalized mean.
    pub length: usize,
    pub burn_in: usize,
    pub seed: u64,
}

impl CommutationConfig {
    pub fn new(replicates: usize, length: usize, seed: u64) -> Self {
        Self {
            replicates,
            length,
            burn_in: DEFAULT_BURN_IN,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CommutationReport {
    /// Largest absolute difference between the two means.
    pub max_mean_gap: f64,
    /// Largest mean difference in units of the Monte Carlo standard error.
    pub max_mean_gap_se: f64,
    /// `‖Σ_MC − Σ_SCM‖_F / ‖Σ_SCM‖_F`.
    pub max_cov_gap_rel: f64,
    /// Law of `Z_T` estimated from simulated trajectories.
    pub simulated: GaussianDist,
    /// Law predicted by the intervened equilibrium SCM.
    pub predicted: GaussianDist,
    pub replicates: usize,
    pub length: usize,
}

impl CommutationReport {
    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::json!({
            "max_mean_gap": self.max_mean_gap,
            "max_mean_gap_se": self.max_mean_gap_se,
            "max_cov_gap_rel": self.max_cov_gap_rel,
            "replicates": self.replicates,
            "length": self.length,
            "simulated": self.simulated.to_json_value(),
            "predicted": self.predicted.to_json_value(),
        })
    }
}

/// Compares simulate-then-normalize against map-then-intervene.
///
/// Replicate `r` uses the random substream `(seed, r)`, so the report does
/// not depend on the number of worker threads.
pub fn verify_commutation(model: &VarModel, intervention: &Intervention, cfg: &CommutationConfig) -> Result<CommutationReport> {
    if cfg.replicates < 2 || cfg.length == 0 {
        return Err(Error::invalid("commutation check needs at least 2 replicates and a positive length"));
    }
    if !model.is_stable()? {
        return Err(Error::domain("commutation check requires a stable model"));
    }
    let dynamics = intervention.dynamics(model)?;
    if !dynamics.model.is_stable()? {
        return Err(Error::domain(
            "intervened dynamics are unstable; check forcing_stability before verifying commutation",
        ));
    }
    let predicted = scm_solution(&scm_intervene(&to_equilibrium_scm(model)?, intervention)?)?;

    let d = model.dim();
    let p = model.lag();
    let mu = dynamics.model.process_mean()?;
    let engine = Engine::new(&dynamics.model, &(&dynamics.shock_map * linalg::sym_sqrt(model.noise_cov())));
    let scale = 1.0 / (cfg.length as f64).sqrt();
    let draws = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream(cfg.seed, &r.to_string());
            let mut hist: Vec<f64> = (0..p).flat_map(|_| mu.iter().copied()).collect();
            let mut z = vec![0.0; d];
            let mut x = vec![0.0; d];
            let mut sum = vec![0.0; d];
            for step in 0..cfg.burn_in + cfg.length {
                draw_normals(&mut rng, &mut z);
                engine.predict(&hist, &mut x);
                engine.add_shock(&z, &mut x);
                check_overflow(&x, step as i64 - cfg.burn_in as i64)?;
                engine.push(&mut hist, &x);
                if step >= cfg.burn_in {
                    for i in 0..d {
                        sum[i] += x[i] - mu[i];
                    }
                }
            }
            Ok(Vector::from_fn(d, |i, _| mu[i] + sum[i] * scale))
        })
        .collect::<Result<Vec<_>>>()?;

    let n = cfg.replicates as f64;
    let mean = draws.iter().fold(Vector::zeros(d), |acc, z| acc + z) / n;
    let mut cov = Mat::zeros(d, d);
    for z in &draws {
        let c = z - &mean;
        cov += &c * c.transpose();
    }
    cov /= n - 1.0;

    let mut max_mean_gap = 0.0_f64;
    let mut max_mean_gap_se = 0.0_f64;
    for i in 0..d {
        let gap = (mean[i] - predicted.mean[i]).abs();
        max_mean_gap = max_mean_gap.max(gap);
        let se = (cov[(i, i)] / n).sqrt();
        let standardized = if se > 0.0 {
            gap / se
        } else if gap <= 1e-9 * (1.0 + predicted.mean[i].abs()) {
            0.0
        } else {
            f64::INFINITY
        };
        max_mean_gap_se = max_mean_gap_se.max(standardized);
    }
    let max_cov_gap_rel = if linalg::frobenius(&predicted.cov) > 0.0 {
        linalg::rel_frobenius(&cov, &predicted.cov)
    } else {
        linalg::frobenius(&cov)
    };
    Ok(CommutationReport {
        max_mean_gap,
        max_mean_gap_se,
        max_cov_gap_rel,
        simulated: GaussianDist { mean, cov },
        predicted,
        replicates: cfg.replicates,
        length: cfg.length,
    })
}
