//! Additive, forcing and hard (do) interventions as transforms of a
//! [`VarModel`].
//!
//! An additive intervention adds a constant force `F` to the process equation
//! and leaves the dynamics alone. A forcing intervention adds the restoring
//! term `F ⊙ (X̂ − X_t)`; moving the contemporaneous `F ⊙ X_t` to the left and
//! multiplying by `M = (I + diag F)⁻¹` yields another VAR with intercept
//! `M(ν + F ⊙ X̂)`, lag matrices `M B_k` and shocks `M u_t`. Components with
//! zero force are untouched by either transform.
//!
//! Transforms are time-invariant; the start time carried by [`Intervention`]
//! is consumed by simulation, forecasting and counterfactual code.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Mat, Vector};
use crate::model::{StabilityReport, VarModel, DEFAULT_STABILITY_MARGIN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InterventionKind {
    Additive,
    Forcing,
    /// Hard intervention: each component with positive force is held at its
    /// target value.
    Do,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Intervention {
    pub kind: InterventionKind,
    pub force: Vector,
    /// Target state; only entries with nonzero force are read.
    pub target: Vector,
    pub start: usize,
}

impl Intervention {
    pub fn additive(force: Vector, start: usize) -> Self {
        let d = force.len();
        Self {
            kind: InterventionKind::Additive,
            force,
            target: Vector::zeros(d),
            start,
        }
    }

    pub fn forcing(force: Vector, target: Vector, start: usize) -> Self {
        Self {
            kind: InterventionKind::Forcing,
            force,
            target,
            start,
        }
    }

    /// Hard intervention holding `component` at `value`.
    pub fn hard(dim: usize, component: usize, value: f64, start: usize) -> Self {
        let mut force = Vector::zeros(dim);
        let mut target = Vector::zeros(dim);
        if component < dim {
            force[component] = 1.0;
            target[component] = value;
        }
        Self {
            kind: InterventionKind::Do,
            force,
            target,
            start,
        }
    }

    /// Single-component additive force.
    pub fn additive_on(dim: usize, component: usize, force: f64, start: usize) -> Self {
        let mut f = Vector::zeros(dim);
        f[component] = force;
        Self::additive(f, start)
    }

    /// Single-component forcing toward `target`.
    pub fn forcing_on(dim: usize, component: usize, force: f64, target: f64, start: usize) -> Self {
        let mut f = Vector::zeros(dim);
        let mut x = Vector::zeros(dim);
        f[component] = force;
        x[component] = target;
        Self::forcing(f, x, start)
    }

    pub fn dim(&self) -> usize {
        self.force.len()
    }

    /// Components touched by the intervention.
    pub fn components(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&i| self.force[i] != 0.0).collect()
    }

    pub fn is_null(&self) -> bool {
        self.force.iter().all(|&f| f == 0.0)
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.force.len() != dim {
            return Err(Error::dim("intervention force", dim, self.force.len()));
        }
        if self.target.len() != dim {
            return Err(Error::dim("intervention target", dim, self.target.len()));
        }
        if self.force.iter().any(|f| !f.is_finite()) {
            return Err(Error::domain("intervention force must be finite"));
        }
        match self.kind {
            InterventionKind::Additive => Ok(()),
            InterventionKind::Forcing | InterventionKind::Do => {
                if let Some(i) = (0..dim).find(|&i| self.force[i] < 0.0) {
                    return Err(Error::domain(format!(
                        "forcing intervention requires nonnegative force (component {i} has {}); \
                         force is assumed positive on intervened components",
                        self.force[i]
                    )));
                }
                if let Some(i) = (0..dim).find(|&i| self.force[i] > 0.0 && !self.target[i].is_finite()) {
                    return Err(Error::domain(format!("target of intervened component {i} is not finite")));
                }
                Ok(())
            }
        }
    }

    /// The post-intervention dynamics for `model`.
    pub fn dynamics(&self, model: &VarModel) -> Result<IntervenedDynamics> {
        self.validate(model.dim())?;
        let d = model.dim();
        match self.kind {
            InterventionKind::Additive => Ok(IntervenedDynamics {
                model: apply_additive(model, &self.force)?,
                shock_map: Mat::identity(d, d),
            }),
            InterventionKind::Forcing => {
                let scale = forcing_scale(&self.force);
                Ok(IntervenedDynamics {
                    model: apply_forcing(model, &self.force, &self.target)?,
                    shock_map: Mat::from_diagonal(&scale),
                })
            }
            InterventionKind::Do => {
                let mut out = model.clone();
                let mut shock_map = Mat::identity(d, d);
                for i in self.components() {
                    out = do_intervention(&out, i, self.target[i])?;
                    shock_map[(i, i)] = 0.0;
                }
                Ok(IntervenedDynamics {
                    model: out,
                    shock_map,
                })
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&InterventionFile::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: InterventionFile = serde_json::from_str(s)?;
        Ok(f.into())
    }
}

/// Intervened model together with the linear map taking original shocks
/// `u_t` to the shocks of the intervened equations.
#[derive(Debug, Clone)]
pub struct IntervenedDynamics {
    pub model: VarModel,
    pub shock_map: Mat,
}

#[derive(Debug, Clone)]
pub struct InterventionStability {
    pub report: StabilityReport,
    /// Whether the intervened model is stable.
    pub preserved: bool,
}

/// `ν ↦ ν + F`; lag matrices and noise unchanged.
pub fn apply_additive(model: &VarModel, force: &Vector) -> Result<VarModel> {
    if force.len() != model.dim() {
        return Err(Error::dim("additive force", model.dim(), force.len()));
    }
    model.with_intercept(model.intercept() + force)
}

fn forcing_scale(force: &Vector) -> Vector {
    force.map(|f| 1.0 / (1.0 + f))
}

fn check_forcing(model: &VarModel, force: &Vector) -> Result<()> {
    if force.len() != model.dim() {
        return Err(Error::dim("forcing force", model.dim(), force.len()));
    }
    if let Some(i) = force.iter().position(|&f| f < 0.0 || !f.is_finite()) {
        return Err(Error::domain(format!(
            "forcing intervention requires nonnegative force (component {i} has {}); \
             force is assumed positive on intervened components",
            force[i]
        )));
    }
    Ok(())
}

/// Forcing transform with `M = (I + diag F)⁻¹`: intercept `M(ν + F⊙X̂)`,
/// lags `M B_k`, noise `M Σ_u Mᵀ`.
pub fn apply_forcing(model: &VarModel, force: &Vector, target: &Vector) -> Result<VarModel> {
    check_forcing(model, force)?;
    if target.len() != model.dim() {
        return Err(Error::dim("forcing target", model.dim(), target.len()));
    }
    let d = model.dim();
    let m = forcing_scale(force);
    let pull = Vector::from_fn(d, |i, _| if force[i] > 0.0 { force[i] * target[i] } else { 0.0 });
    let intercept = (model.intercept() + pull).component_mul(&m);
    let coeffs = model
        .coeffs()
        .iter()
        .map(|b| Mat::from_fn(d, d, |i, j| b[(i, j)] * m[i]))
        .collect();
    let sigma = model.noise_cov();
    let noise = Mat::from_fn(d, d, |i, j| sigma[(i, j)] * m[i] * m[j]);
    VarModel::new(intercept, coeffs, noise)
}

/// Stability of the forcing-intervened dynamics; targets do not matter.
pub fn forcing_stability(model: &VarModel, force: &Vector) -> Result<InterventionStability> {
    check_forcing(model, force)?;
    let target = Vector::zeros(model.dim());
    let report = apply_forcing(model, force, &target)?.stability(DEFAULT_STABILITY_MARGIN)?;
    Ok(InterventionStability {
        preserved: report.is_stable,
        report,
    })
}

/// Stability after an arbitrary intervention. Additive interventions never
/// change the lag matrices, so they always preserve the observational verdict.
pub fn intervention_stability(model: &VarModel, intervention: &Intervention) -> Result<InterventionStability> {
    let report = intervention.dynamics(model)?.model.stability(DEFAULT_STABILITY_MARGIN)?;
    Ok(InterventionStability {
        preserved: report.is_stable,
        report,
    })
}

/// Replaces the equation of `component` by the constant `value`: its lag
/// rows are zeroed, its intercept set to `value`, its noise row and column
/// zeroed.
pub fn do_intervention(model: &VarModel, component: usize, value: f64) -> Result<VarModel> {
    let d = model.dim();
    if component >= d {
        return Err(Error::domain(format!("component {component} out of range for dimension {d}")));
    }
    let mut intercept = model.intercept().clone();
    intercept[component] = value;
    let coeffs = model
        .coeffs()
        .iter()
        .map(|b| {
            let mut b = b.clone();
            b.row_mut(component).fill(0.0);
            b
        })
        .collect();
    let mut noise = model.noise_cov().clone();
    noise.row_mut(component).fill(0.0);
    noise.column_mut(component).fill(0.0);
    VarModel::new(intercept, coeffs, noise)
}

#[derive(Debug, Serialize, Deserialize)]
struct InterventionFile {
    kind: InterventionKind,
    force: Vec<f64>,
    #[serde(default)]
    target: Option<Vec<f64>>,
    #[serde(default)]
    start: usize,
}

impl From<&Intervention> for InterventionFile {
    fn from(i: &Intervention) -> Self {
        Self {
            kind: i.kind,
            force: i.force.iter().copied().collect(),
            target: Some(i.target.iter().copied().collect()),
            start: i.start,
        }
    }
}

impl From<InterventionFile> for Intervention {
    fn from(f: InterventionFile) -> Self {
        let d = f.force.len();
        Self {
            kind: f.kind,
            force: Vector::from_vec(f.force),
            target: f.target.map_or_else(|| Vector::zeros(d), Vector::from_vec),
            start: f.start,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;

    fn pendulum() -> VarModel {
        let s = std::f64::consts::SQRT_2;
        let published = Mat::from_row_slice(2, 2, &[0.0, -0.5, 0.5, 1.0]) * s;
        VarModel::new(Vector::zeros(2), vec![published.transpose()], Mat::identity(2, 2)).unwrap()
    }

    fn scalar(a: f64, nu: f64) -> VarModel {
        VarModel::scalar(&[a], nu, 1.0).unwrap()
    }

    #[test]
    fn zero_additive_force_is_identity() {
        let m = pendulum();
        assert_eq!(apply_additive(&m, &Vector::zeros(2)).unwrap(), m);
    }

    #[test]
    fn additive_scalar_mean_shift() {
        let m = apply_additive(&scalar(0.5, 0.0), &Vector::from_element(1, 1.0)).unwrap();
        assert!((m.process_mean().unwrap()[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn huge_additive_force_keeps_spectral_radius() {
        let m = pendulum();
        let big = apply_additive(&m, &Vector::from_element(2, 1e6)).unwrap();
        let r0 = m.stability(DEFAULT_STABILITY_MARGIN).unwrap().spectral_radius;
        let r1 = big.stability(DEFAULT_STABILITY_MARGIN).unwrap().spectral_radius;
        assert_eq!(r0, r1);
    }

    #[test]
    fn additive_composes() {
        let m = pendulum();
        let f1 = Vector::from_vec(vec![0.3, -1.0]);
        let f2 = Vector::from_vec(vec![0.2, 4.0]);
        let twice = apply_additive(&apply_additive(&m, &f1).unwrap(), &f2).unwrap();
        let once = apply_additive(&m, &(f1 + f2)).unwrap();
        assert!((twice.intercept() - once.intercept()).norm() < 1e-15);
        assert_eq!(twice.coeffs(), once.coeffs());
    }

    #[test]
    fn zero_forcing_is_bit_exact_identity() {
        let m = pendulum().with_intercept(Vector::from_vec(vec![0.3, -0.7])).unwrap();
        let f = apply_forcing(&m, &Vector::zeros(2), &Vector::from_vec(vec![5.0, 5.0])).unwrap();
        assert_eq!(f, m);
    }

    #[test]
    fn forcing_scalar_fixed_point() {
        let f = apply_forcing(&scalar(0.5, 0.0), &Vector::from_element(1, 1.0), &Vector::from_element(1, 2.0)).unwrap();
        assert_eq!(f.coeffs()[0][(0, 0)], 0.25);
        assert_eq!(f.intercept()[0], 1.0);
        assert_eq!(f.noise_cov()[(0, 0)], 0.25);
        // (2 / 2) / (1 − 0.25) = 4 / 3
        assert!((f.process_mean().unwrap()[0] - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn forcing_rejects_negative_force() {
        let err = apply_forcing(&scalar(0.5, 0.0), &Vector::from_element(1, -1.0), &Vector::zeros(1)).unwrap_err();
        assert!(matches!(err, Error::Domain(ref s) if s.contains("positive")));
    }

    #[test]
    fn forcing_monotone_toward_target_in_scalar_case() {
        let m = scalar(0.5, 0.3);
        let target = Vector::from_element(1, 3.0);
        let mut last = f64::INFINITY;
        for f in [0.1, 1.0, 10.0, 100.0] {
            let mu = apply_forcing(&m, &Vector::from_element(1, f), &target).unwrap().process_mean().unwrap()[0];
            let gap = (mu - 3.0).abs();
            assert!(gap <= last);
            last = gap;
        }
    }

    #[test]
    fn pendulum_forcing_stability() {
        let m = pendulum();
        assert!(!forcing_stability(&m, &Vector::from_vec(vec![1.0, 0.0])).unwrap().preserved);
        for f in [0.5, 1.0, 10.0] {
            assert!(forcing_stability(&m, &Vector::from_vec(vec![0.0, f])).unwrap().preserved, "F={f}");
        }
    }

    #[test]
    fn pendulum_forcing_roots_match_closed_form() {
        // companion moduli are reciprocals of √2(1 + F ± √(F² + F))
        let m = pendulum();
        for f in [0.5_f64, 1.0, 3.0] {
            let r = forcing_stability(&m, &Vector::from_vec(vec![f, 0.0])).unwrap().report;
            let s = std::f64::consts::SQRT_2;
            let z1 = s * (1.0 + f + (f * f + f).sqrt());
            let z2 = s * (1.0 + f - (f * f + f).sqrt());
            let mut want = vec![1.0 / z1, 1.0 / z2];
            want.sort_by(f64::total_cmp);
            for (g, w) in r.root_moduli.iter().zip(&want) {
                assert!((g - w).abs() < 1e-10, "F={f}: {g} vs {w}");
            }
        }
    }

    #[test]
    fn do_surgery_zeroes_row_and_noise() {
        let m = pendulum();
        let d = do_intervention(&m, 1, 2.5).unwrap();
        assert_eq!(d.intercept()[1], 2.5);
        assert_eq!(d.coeffs()[0].row(1).iter().copied().collect::<Vec<_>>(), vec![0.0, 0.0]);
        assert_eq!(d.noise_cov()[(1, 1)], 0.0);
        assert_eq!(d.noise_cov()[(0, 1)], 0.0);
        assert!(do_intervention(&m, 2, 0.0).is_err());
    }

    #[test]
    fn forcing_limit_approaches_do() {
        let m = pendulum().with_intercept(Vector::from_vec(vec![0.1, 0.2])).unwrap();
        let f = apply_forcing(&m, &Vector::from_vec(vec![0.0, 1e12]), &Vector::from_vec(vec![0.0, 1.5])).unwrap();
        let d = do_intervention(&m, 1, 1.5).unwrap();
        assert!((f.intercept() - d.intercept()).norm() < 1e-9);
        assert!(linalg::max_abs(&(&f.coeffs()[0] - &d.coeffs()[0])) < 1e-9);
    }

    #[test]
    fn lower_triangular_models_stay_stable_under_forcing() {
        let b1 = Mat::from_row_slice(3, 3, &[0.9, 0.0, 0.0, 0.5, -0.7, 0.0, 2.0, 1.0, 0.3]);
        let b2 = Mat::from_row_slice(3, 3, &[0.05, 0.0, 0.0, -0.4, 0.1, 0.0, 0.3, 0.2, 0.2]);
        let m = VarModel::new(Vector::zeros(3), vec![b1, b2], Mat::identity(3, 3)).unwrap();
        assert!(m.is_stable().unwrap());
        for f in [[0.5, 0.0, 0.0], [0.0, 3.0, 0.0], [10.0, 10.0, 10.0], [0.0, 0.0, 100.0]] {
            assert!(forcing_stability(&m, &Vector::from_row_slice(&f)).unwrap().preserved);
        }
    }

    #[test]
    fn json_round_trip() {
        let i = Intervention::forcing_on(3, 1, 2.0, -1.0, 4);
        let back = Intervention::from_json(&i.to_json().unwrap()).unwrap();
        assert_eq!(back, i);
        let parsed = Intervention::from_json(r#"{"kind":"additive","force":[0.2,0,0],"start":0}"#).unwrap();
        assert_eq!(parsed.kind, InterventionKind::Additive);
        assert_eq!(parsed.target.len(), 3);
    }

    #[test]
    fn dynamics_shock_map_matches_noise_transform() {
        let m = pendulum();
        let i = Intervention::forcing(Vector::from_vec(vec![1.0, 3.0]), Vector::zeros(2), 0);
        let dynamics = i.dynamics(&m).unwrap();
        let s = &dynamics.shock_map;
        let via_map = s * m.noise_cov() * s.transpose();
        assert!(linalg::frobenius(&(via_map - dynamics.model.noise_cov())) < 1e-15);
    }
}
