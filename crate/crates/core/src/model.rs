//! Reduced-form and structural VAR representations, stability analysis and
//! moving-average machinery.
//!
//! All lag matrices of a [`VarModel`] are stored in effect-row orientation:
//! `coeffs[k][(j, i)]` is the weight of component `i` at lag `k + 1` in the
//! equation of component `j`, so the recurrence reads
//! `X_t = ν + Σ_k B_k X_{t−k} + u_t`. Structural models use the cause-row
//! orientation of published coefficient tables and are converted on reduction.

use std::fmt;

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::CausalGraph;
use crate::linalg::{self, Mat, Vector};

/// Companion spectral radius must stay below `1 − margin` to count as stable.
pub const DEFAULT_STABILITY_MARGIN: f64 = 1e-8;

/// Coefficients at or below this magnitude do not create graph edges.
pub const DEFAULT_EDGE_TOLERANCE: f64 = 1e-12;

const SYMMETRY_TOL: f64 = 1e-10;
const SCHUR_MAX_ITER: usize = 100_000;

pub const EFFECT_ROW: &str = "effect-row";

/// Reduced-form VAR(p): `X_t = ν + B_1 X_{t−1} + … + B_p X_{t−p} + u_t`,
/// `u_t ~ N(0, Σ_u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VarModel {
    intercept: Vector,
    coeffs: Vec<Mat>,
    noise_cov: Mat,
}

impl VarModel {
    pub fn new(intercept: Vector, coeffs: Vec<Mat>, noise_cov: Mat) -> Result<Self> {
        let dim = intercept.len();
        if dim == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        if coeffs.is_empty() {
            return Err(Error::invalid("lag order must be positive"));
        }
        for (k, b) in coeffs.iter().enumerate() {
            if b.nrows() != dim || b.ncols() != dim {
                return Err(Error::invalid(format!(
                    "lag matrix {} is {}x{}, expected {dim}x{dim}",
                    k + 1,
                    b.nrows(),
                    b.ncols()
                )));
            }
        }
        if noise_cov.nrows() != dim || noise_cov.ncols() != dim {
            return Err(Error::invalid(format!(
                "noise covariance is {}x{}, expected {dim}x{dim}",
                noise_cov.nrows(),
                noise_cov.ncols()
            )));
        }
        let finite = intercept.iter().all(|x| x.is_finite())
            && coeffs.iter().all(|b| b.iter().all(|x| x.is_finite()))
            && noise_cov.iter().all(|x| x.is_finite());
        if !finite {
            return Err(Error::invalid("model contains non-finite entries"));
        }
        if !linalg::is_symmetric(&noise_cov, SYMMETRY_TOL) {
            return Err(Error::invalid("noise covariance is not symmetric"));
        }
        let min_eig = linalg::min_eigenvalue(&noise_cov);
        if min_eig < -SYMMETRY_TOL {
            return Err(Error::invalid(format!(
                "noise covariance is not positive semidefinite (eigenvalue {min_eig:e})"
            )));
        }
        Ok(Self {
            intercept,
            coeffs,
            noise_cov,
        })
    }

    /// Scalar AR(p) with the given lag coefficients, intercept and shock variance.
    pub fn scalar(lags: &[f64], intercept: f64, noise_var: f64) -> Result<Self> {
        Self::new(
            Vector::from_element(1, intercept),
            lags.iter().map(|&a| Mat::from_element(1, 1, a)).collect(),
            Mat::from_element(1, 1, noise_var),
        )
    }

    pub fn dim(&self) -> usize {
        self.intercept.len()
    }

    pub fn lag(&self) -> usize {
        self.coeffs.len()
    }

    pub fn intercept(&self) -> &Vector {
        &self.intercept
    }

    pub fn coeffs(&self) -> &[Mat] {
        &self.coeffs
    }

    pub fn noise_cov(&self) -> &Mat {
        &self.noise_cov
    }

    pub fn with_intercept(&self, intercept: Vector) -> Result<Self> {
        Self::new(intercept, self.coeffs.clone(), self.noise_cov.clone())
    }

    pub fn with_noise_cov(&self, noise_cov: Mat) -> Result<Self> {
        Self::new(self.intercept.clone(), self.coeffs.clone(), noise_cov)
    }

    /// Same model with every lag matrix transposed.
    pub fn transposed(&self) -> Self {
        Self {
            intercept: self.intercept.clone(),
            coeffs: self.coeffs.iter().map(Mat::transpose).collect(),
            noise_cov: self.noise_cov.clone(),
        }
    }

    /// `B_1 + … + B_p`, accumulated in lag order.
    pub fn coeff_sum(&self) -> Mat {
        let d = self.dim();
        self.coeffs.iter().fold(Mat::zeros(d, d), |acc, b| acc + b)
    }

    /// Companion matrix of the first-order stacked form: top block row
    /// `[B_1 … B_p]`, identity blocks on the first subdiagonal.
    pub fn companion(&self) -> Mat {
        let d = self.dim();
        let p = self.lag();
        let n = d * p;
        let mut c = Mat::zeros(n, n);
        for (k, b) in self.coeffs.iter().enumerate() {
            c.view_mut((0, k * d), (d, d)).copy_from(b);
        }
        for k in 1..p {
            for i in 0..d {
                c[(k * d + i, (k - 1) * d + i)] = 1.0;
            }
        }
        c
    }

    /// Eigenvalue moduli of the companion matrix, i.e. the reciprocals of the
    /// moduli of the roots of `det(I − B_1 z − … − B_p z^p)`.
    pub fn stability(&self, margin: f64) -> Result<StabilityReport> {
        let eigs = self.companion_eigenvalues()?;
        let mut moduli: Vec<f64> = eigs.iter().map(|z| z.norm()).collect();
        moduli.sort_by(f64::total_cmp);
        let spectral_radius = moduli.last().copied().unwrap_or(0.0);
        Ok(StabilityReport {
            spectral_radius,
            is_stable: spectral_radius < 1.0 - margin,
            root_moduli: moduli,
        })
    }

    pub fn companion_eigenvalues(&self) -> Result<Vec<Complex<f64>>> {
        let schur = self
            .companion()
            .try_schur(f64::EPSILON, SCHUR_MAX_ITER)
            .ok_or_else(|| {
                Error::numerical(format!("eigenvalue iteration did not converge for {self}"))
            })?;
        Ok(schur.complex_eigenvalues().iter().copied().collect())
    }

    pub fn is_stable(&self) -> Result<bool> {
        Ok(self.stability(DEFAULT_STABILITY_MARGIN)?.is_stable)
    }

    fn require_stable(&self, what: &str) -> Result<StabilityReport> {
        let report = self.stability(DEFAULT_STABILITY_MARGIN)?;
        if !report.is_stable {
            return Err(Error::domain(format!(
                "{what} undefined for unstable model (spectral radius {:.6})",
                report.spectral_radius
            )));
        }
        Ok(report)
    }

    /// Moving-average coefficients `Φ_0 = I`, `Φ_i = Σ_{j=1..i} Φ_{i−j} B_j`.
    pub fn ma_coefficients(&self, horizon: usize) -> MaCoefficients {
        let d = self.dim();
        let p = self.lag();
        let mut phis: Vec<Mat> = Vec::with_capacity(horizon + 1);
        phis.push(Mat::identity(d, d));
        for i in 1..=horizon {
            let mut phi = Mat::zeros(d, d);
            for j in 1..=i.min(p) {
                phi += &phis[i - j] * &self.coeffs[j - 1];
            }
            phis.push(phi);
        }
        MaCoefficients { horizon, phis }
    }

    /// `(I − B_1 − … − B_p)⁻¹`, the total response to a permanent unit shift.
    pub fn long_run_matrix(&self) -> Result<LongRunMatrix> {
        self.require_stable("long-run matrix")?;
        let d = self.dim();
        let a1 = Mat::identity(d, d) - self.coeff_sum();
        let condition_number = linalg::condition_number(&a1);
        let matrix = a1
            .try_inverse()
            .ok_or_else(|| Error::numerical("I - sum of lag matrices is singular"))?;
        Ok(LongRunMatrix {
            matrix,
            condition_number,
            ill_conditioned: condition_number > linalg::CONDITION_LIMIT,
        })
    }

    /// Stationary mean `μ = Φ(1) ν`.
    pub fn process_mean(&self) -> Result<Vector> {
        Ok(&self.long_run_matrix()?.matrix * &self.intercept)
    }

    /// Stationary lag-0 covariance from the discrete Lyapunov equation of the
    /// companion form, `Γ = C Γ Cᵀ + Q`, solved by squaring iteration.
    pub fn stationary_covariance(&self) -> Result<Mat> {
        self.require_stable("stationary covariance")?;
        let d = self.dim();
        let n = d * self.lag();
        let mut a = self.companion();
        let mut gamma = Mat::zeros(n, n);
        gamma.view_mut((0, 0), (d, d)).copy_from(&self.noise_cov);
        for _ in 0..200 {
            let step = &a * &gamma * a.transpose();
            let done = linalg::max_abs(&step) <= f64::EPSILON * linalg::max_abs(&gamma);
            gamma += step;
            if done {
                return Ok(linalg::symmetrize(&gamma.view((0, 0), (d, d)).into_owned()));
            }
            a = &a * &a;
        }
        Err(Error::numerical(format!(
            "Lyapunov iteration did not converge for {self}"
        )))
    }

    /// Edge `(i, j)` iff some lag matrix has `|B_k[j][i]| > tol`.
    pub fn induced_graph(&self, tol: f64, include_self_loops: bool) -> CausalGraph {
        let d = self.dim();
        let mut g = CausalGraph::empty(d);
        for b in &self.coeffs {
            for effect in 0..d {
                for cause in 0..d {
                    if (include_self_loops || cause != effect) && b[(effect, cause)].abs() > tol {
                        g.add_edge(cause, effect).expect("indices within dim");
                    }
                }
            }
        }
        g
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelFile::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(s)?;
        file.try_into()
    }
}

impl fmt::Display for VarModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "VAR({}) of dimension {}", self.lag(), self.dim())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub spectral_radius: f64,
    pub is_stable: bool,
    /// Companion eigenvalue moduli, ascending.
    pub root_moduli: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct MaCoefficients {
    pub horizon: usize,
    pub phis: Vec<Mat>,
}

impl MaCoefficients {
    /// `Σ_{l ≤ k} Φ_l`.
    pub fn partial_sum(&self, k: usize) -> Mat {
        let d = self.phis[0].nrows();
        self.phis[..=k].iter().fold(Mat::zeros(d, d), |acc, p| acc + p)
    }
}

#[derive(Debug, Clone)]
pub struct LongRunMatrix {
    pub matrix: Mat,
    pub condition_number: f64,
    /// Set when `I − ΣB` has condition number above 1e12.
    pub ill_conditioned: bool,
}

/// Structural VAR with acyclic instantaneous effects and uncorrelated shocks:
/// `X_t = Cᵀ X_t + ν + Σ_k L_kᵀ X_{t−k} + ε_t`, with `C` and `L_k` in
/// cause-row orientation.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuralVarModel {
    intercept: Vector,
    instantaneous: Mat,
    lag_coeffs: Vec<Mat>,
    noise_cov: Mat,
}

impl StructuralVarModel {
    pub fn new(
        intercept: Vector,
        instantaneous: Mat,
        lag_coeffs: Vec<Mat>,
        noise_cov: Mat,
    ) -> Result<Self> {
        let d = intercept.len();
        if d == 0 || lag_coeffs.is_empty() {
            return Err(Error::invalid("structural model needs d >= 1 and p >= 1"));
        }
        let square = |m: &Mat| m.nrows() == d && m.ncols() == d;
        if !square(&instantaneous) || !square(&noise_cov) || !lag_coeffs.iter().all(square) {
            return Err(Error::invalid(format!("structural matrices must be {d}x{d}")));
        }
        if (0..d).any(|i| instantaneous[(i, i)] != 0.0) {
            return Err(Error::invalid("instantaneous matrix must have a zero diagonal"));
        }
        for i in 0..d {
            for j in 0..d {
                if i != j && noise_cov[(i, j)] != 0.0 {
                    return Err(Error::invalid("structural noise covariance must be diagonal"));
                }
            }
            if noise_cov[(i, i)] < 0.0 {
                return Err(Error::invalid("structural shock variances must be nonnegative"));
            }
        }
        Ok(Self {
            intercept,
            instantaneous,
            lag_coeffs,
            noise_cov,
        })
    }

    pub fn dim(&self) -> usize {
        self.intercept.len()
    }

    pub fn lag(&self) -> usize {
        self.lag_coeffs.len()
    }

    pub fn instantaneous(&self) -> &Mat {
        &self.instantaneous
    }

    pub fn lag_coeffs(&self) -> &[Mat] {
        &self.lag_coeffs
    }

    /// A topological order of the instantaneous-effect graph, or `None` when
    /// it has a cycle.
    pub fn instantaneous_order(&self) -> Option<Vec<usize>> {
        let d = self.dim();
        let mut indegree = vec![0usize; d];
        for i in 0..d {
            for j in 0..d {
                if self.instantaneous[(i, j)] != 0.0 {
                    indegree[j] += 1;
                }
            }
        }
        let mut ready: Vec<usize> = (0..d).filter(|&j| indegree[j] == 0).collect();
        let mut order = Vec::with_capacity(d);
        while let Some(i) = ready.pop() {
            order.push(i);
            for j in 0..d {
                if self.instantaneous[(i, j)] != 0.0 {
                    indegree[j] -= 1;
                    if indegree[j] == 0 {
                        ready.push(j);
                    }
                }
            }
        }
        (order.len() == d).then_some(order)
    }

    /// Reduces to `X_t = Â_0⁻¹ν + Σ Â_0⁻¹ L_kᵀ X_{t−k} + Â_0⁻¹ ε_t` with
    /// `Â_0 = I − Cᵀ`.
    pub fn to_reduced(&self) -> Result<VarModel> {
        if self.instantaneous_order().is_none() {
            return Err(Error::domain(
                "instantaneous effects are cyclic; no recursive ordering exists",
            ));
        }
        let d = self.dim();
        let a0 = Mat::identity(d, d) - self.instantaneous.transpose();
        let a0_inv = a0
            .try_inverse()
            .ok_or_else(|| Error::numerical("instantaneous matrix is singular"))?;
        let coeffs = self
            .lag_coeffs
            .iter()
            .map(|l| &a0_inv * l.transpose())
            .collect();
        let noise = linalg::symmetrize(&(&a0_inv * &self.noise_cov * a0_inv.transpose()));
        VarModel::new(&a0_inv * &self.intercept, coeffs, noise)
    }

    /// Union of lagged and instantaneous structural edges.
    pub fn structural_graph(&self, tol: f64, include_self_loops: bool) -> CausalGraph {
        let d = self.dim();
        let mut g = CausalGraph::empty(d);
        for m in self.lag_coeffs.iter().chain(std::iter::once(&self.instantaneous)) {
            for cause in 0..d {
                for effect in 0..d {
                    if (include_self_loops || cause != effect) && m[(cause, effect)].abs() > tol {
                        g.add_edge(cause, effect).expect("indices within dim");
                    }
                }
            }
        }
        g
    }
}

/// JSON wire format of a [`VarModel`].
#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    dim: usize,
    lag: usize,
    intercept: Vec<f64>,
    coeffs: Vec<Vec<Vec<f64>>>,
    noise_cov: Vec<Vec<f64>>,
    orientation: String,
}

impl From<&VarModel> for ModelFile {
    fn from(m: &VarModel) -> Self {
        Self {
            dim: m.dim(),
            lag: m.lag(),
            intercept: m.intercept.iter().copied().collect(),
            coeffs: m.coeffs.iter().map(linalg::mat_to_rows).collect(),
            noise_cov: linalg::mat_to_rows(&m.noise_cov),
            orientation: EFFECT_ROW.to_string(),
        }
    }
}

impl TryFrom<ModelFile> for VarModel {
    type Error = Error;

    fn try_from(f: ModelFile) -> Result<Self> {
        if f.orientation != EFFECT_ROW {
            return Err(Error::invalid(format!(
                "unsupported orientation {:?}; expected \"{EFFECT_ROW}\"",
                f.orientation
            )));
        }
        if f.coeffs.len() != f.lag {
            return Err(Error::invalid(format!(
                "lag is {} but {} coefficient matrices given",
                f.lag,
                f.coeffs.len()
            )));
        }
        if f.intercept.len() != f.dim {
            return Err(Error::dim("model intercept", f.dim, f.intercept.len()));
        }
        let coeffs = f
            .coeffs
            .iter()
            .map(|rows| linalg::mat_from_rows(rows, "coefficient matrix"))
            .collect::<Result<Vec<_>>>()?;
        let noise_cov = linalg::mat_from_rows(&f.noise_cov, "noise_cov")?;
        VarModel::new(Vector::from_vec(f.intercept), coeffs, noise_cov)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: usize, data: &[f64]) -> Mat {
        Mat::from_row_slice(rows, data.len() / rows, data)
    }

    /// Effect-row pendulum matrix: the transpose of √2·[[0, −0.5], [0.5, 1]].
    fn pendulum() -> VarModel {
        let s = std::f64::consts::SQRT_2;
        let published = mat(2, &[0.0, -0.5, 0.5, 1.0]) * s;
        VarModel::new(Vector::zeros(2), vec![published.transpose()], Mat::identity(2, 2)).unwrap()
    }

    #[test]
    fn companion_of_scalar_ar1_is_the_coefficient() {
        let m = VarModel::scalar(&[0.5], 0.0, 1.0).unwrap();
        assert_eq!(m.companion(), mat(1, &[0.5]));
    }

    #[test]
    fn companion_of_var1_is_the_lag_matrix() {
        let m = pendulum();
        assert_eq!(m.companion(), m.coeffs()[0]);
    }

    #[test]
    fn companion_layout_ar2() {
        let m = VarModel::scalar(&[0.2, 0.3], 0.0, 1.0).unwrap();
        assert_eq!(m.companion(), mat(2, &[0.2, 0.3, 1.0, 0.0]));
    }

    #[test]
    fn pendulum_is_stable_with_moduli_one_over_sqrt2() {
        let r = pendulum().stability(DEFAULT_STABILITY_MARGIN).unwrap();
        assert!(r.is_stable);
        for m in &r.root_moduli {
            assert!((m - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12, "{m}");
        }
    }

    #[test]
    fn zero_dynamics_are_stable() {
        let m = VarModel::new(Vector::zeros(3), vec![Mat::zeros(3, 3); 2], Mat::identity(3, 3)).unwrap();
        let r = m.stability(DEFAULT_STABILITY_MARGIN).unwrap();
        assert!(r.is_stable);
        assert!(r.spectral_radius < 1e-12);
    }

    #[test]
    fn unit_root_is_unstable() {
        let m = VarModel::new(Vector::zeros(2), vec![Mat::identity(2, 2)], Mat::identity(2, 2)).unwrap();
        let r = m.stability(DEFAULT_STABILITY_MARGIN).unwrap();
        assert!(!r.is_stable);
        assert!((r.spectral_radius - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ma_coefficients_scalar_geometric() {
        let phis = VarModel::scalar(&[0.5], 0.0, 1.0).unwrap().ma_coefficients(3).phis;
        let got: Vec<f64> = phis.iter().map(|p| p[(0, 0)]).collect();
        assert_eq!(got, vec![1.0, 0.5, 0.25, 0.125]);
    }

    #[test]
    fn ma_coefficients_with_zero_first_lag() {
        let c = mat(2, &[0.3, -0.1, 0.2, 0.4]);
        let m = VarModel::new(Vector::zeros(2), vec![Mat::zeros(2, 2), c.clone()], Mat::identity(2, 2)).unwrap();
        let phis = m.ma_coefficients(4).phis;
        assert_eq!(phis[1], Mat::zeros(2, 2));
        assert_eq!(phis[2], c);
        assert_eq!(phis[3], Mat::zeros(2, 2));
        assert!(linalg::frobenius(&(&phis[4] - &c * &c)) < 1e-15);
    }

    #[test]
    fn ma_coefficient_of_pendulum_is_matrix_square() {
        let m = pendulum();
        let b = &m.coeffs()[0];
        // repeated multiplication oracle
        let mut b2 = Mat::zeros(2, 2);
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    b2[(i, j)] += b[(i, k)] * b[(k, j)];
                }
            }
        }
        let phis = m.ma_coefficients(2).phis;
        assert!(linalg::frobenius(&(&phis[2] - b2)) < 1e-14);
    }

    #[test]
    fn long_run_scalar() {
        let m = VarModel::scalar(&[0.5], 1.0, 1.0).unwrap();
        assert!((m.long_run_matrix().unwrap().matrix[(0, 0)] - 2.0).abs() < 1e-15);
        assert!((m.process_mean().unwrap()[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn long_run_pendulum_matches_direct_inverse() {
        let s = std::f64::consts::SQRT_2;
        // I − B for B = (√2·[[0,−0.5],[0.5,1]])ᵀ, inverted by the 2×2 formula
        let (a, b, c, d) = (1.0, -s / 2.0, s / 2.0, 1.0 - s);
        let det = a * d - b * c;
        assert!((det - (1.5 - s)).abs() < 1e-15);
        let expected = mat(2, &[d / det, -b / det, -c / det, a / det]);
        let got = pendulum().long_run_matrix().unwrap().matrix;
        assert!(linalg::frobenius(&(got - expected)) < 1e-12);
    }

    #[test]
    fn long_run_rejects_unstable() {
        let m = VarModel::scalar(&[1.2], 0.0, 1.0).unwrap();
        let err = m.long_run_matrix().unwrap_err();
        assert!(matches!(err, Error::Domain(ref s) if s.contains("long-run matrix undefined for unstable model")));
    }

    #[test]
    fn zero_intercept_gives_zero_mean() {
        assert_eq!(pendulum().process_mean().unwrap(), Vector::zeros(2));
    }

    #[test]
    fn stationary_covariance_scalar() {
        let m = VarModel::scalar(&[0.5], 0.0, 1.0).unwrap();
        let g = m.stationary_covariance().unwrap();
        assert!((g[(0, 0)] - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_model_has_no_edges() {
        let m = VarModel::new(Vector::zeros(3), vec![Mat::zeros(3, 3)], Mat::identity(3, 3)).unwrap();
        assert_eq!(m.induced_graph(DEFAULT_EDGE_TOLERANCE, true).edge_count(), 0);
    }

    #[test]
    fn induced_graph_uses_effect_rows() {
        // x1_t depends on x0_{t−1}: edge 0 → 1
        let b = mat(2, &[0.0, 0.0, 0.7, 0.0]);
        let m = VarModel::new(Vector::zeros(2), vec![b], Mat::identity(2, 2)).unwrap();
        let g = m.induced_graph(DEFAULT_EDGE_TOLERANCE, false);
        assert!(g.contains(0, 1));
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn json_round_trip_and_orientation_check() {
        let m = pendulum();
        let s = m.to_json().unwrap();
        assert_eq!(VarModel::from_json(&s).unwrap(), m);
        let bad = s.replace("effect-row", "cause-row");
        assert!(VarModel::from_json(&bad).is_err());
        let missing = s.replace("\"orientation\"", "\"orient\"");
        assert!(VarModel::from_json(&missing).is_err());
    }

    #[test]
    fn rejects_asymmetric_noise() {
        let r = VarModel::new(Vector::zeros(2), vec![Mat::zeros(2, 2)], mat(2, &[1.0, 0.5, 0.0, 1.0]));
        assert!(r.is_err());
    }

    #[test]
    fn rejects_indefinite_noise() {
        let r = VarModel::new(Vector::zeros(2), vec![Mat::zeros(2, 2)], mat(2, &[1.0, 2.0, 2.0, 1.0]));
        assert!(r.is_err());
    }

    #[test]
    fn svar_without_instantaneous_effects_transposes() {
        let l = mat(2, &[0.5, 0.2, 0.0, 0.3]);
        let s = StructuralVarModel::new(Vector::zeros(2), Mat::zeros(2, 2), vec![l.clone()], Mat::identity(2, 2)).unwrap();
        let r = s.to_reduced().unwrap();
        assert_eq!(r.coeffs()[0], l.transpose());
        assert_eq!(r.noise_cov(), &Mat::identity(2, 2));
    }

    #[test]
    fn svar_single_instantaneous_effect_noise() {
        // 0 → 1 contemporaneously with weight 0.5
        let c = mat(2, &[0.0, 0.5, 0.0, 0.0]);
        let s = StructuralVarModel::new(Vector::zeros(2), c, vec![Mat::zeros(2, 2)], Mat::identity(2, 2)).unwrap();
        let r = s.to_reduced().unwrap();
        // hand computation: Â_0⁻¹ = [[1,0],[0.5,1]], Â_0⁻¹Â_0⁻ᵀ = [[1,0.5],[0.5,1.25]]
        let expected = mat(2, &[1.0, 0.5, 0.5, 1.25]);
        assert!(linalg::frobenius(&(r.noise_cov() - expected)) < 1e-15);
    }

    #[test]
    fn svar_rejects_cycles() {
        let c = mat(2, &[0.0, 0.5, 0.5, 0.0]);
        let s = StructuralVarModel::new(Vector::zeros(2), c, vec![Mat::zeros(2, 2)], Mat::identity(2, 2)).unwrap();
        assert!(s.instantaneous_order().is_none());
        assert!(matches!(s.to_reduced(), Err(Error::Domain(_))));
    }

    #[test]
    fn svar_rejects_nonzero_diagonal() {
        let c = mat(2, &[0.1, 0.0, 0.0, 0.0]);
        assert!(StructuralVarModel::new(Vector::zeros(2), c, vec![Mat::zeros(2, 2)], Mat::identity(2, 2)).is_err());
    }
}
