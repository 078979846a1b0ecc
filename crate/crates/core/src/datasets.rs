//! Built-in synthetic datasets: the seven-variable loan-approval process
//! ("German") and the two-variable cart/pendulum system.

use crate::error::Result;
use crate::linalg::{Mat, Vector};
use crate::model::{StructuralVarModel, VarModel};
use crate::series::PanelSeries;
use crate::simulate::{simulate, SimConfig, DEFAULT_BURN_IN};

/// Component order of the German process.
pub const GERMAN_NAMES: [&str; 7] = [
    "Expertise",
    "Responsibility",
    "LoanAmount",
    "LoanDuration",
    "Income",
    "Savings",
    "CreditScore",
];

pub const EXPERTISE: usize = 0;
pub const RESPONSIBILITY: usize = 1;
pub const LOAN_AMOUNT: usize = 2;
pub const LOAN_DURATION: usize = 3;
pub const INCOME: usize = 4;
pub const SAVINGS: usize = 5;
pub const CREDIT_SCORE: usize = 6;

pub const PENDULUM_NAMES: [&str; 2] = ["cart", "angle"];

/// Default shock standard deviation of both generators.
pub const DEFAULT_SIGMA: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct GeneratorConfig {
    /// Structural shocks are `N(0, σ² I)`.
    pub sigma: f64,
    pub burn_in: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            sigma: DEFAULT_SIGMA,
            burn_in: DEFAULT_BURN_IN,
        }
    }
}

pub fn german_names() -> Vec<String> {
    GERMAN_NAMES.iter().map(|s| s.to_string()).collect()
}

pub fn pendulum_names() -> Vec<String> {
    PENDULUM_NAMES.iter().map(|s| s.to_string()).collect()
}

/// Structural SVAR(4) of the loan-approval process. Matrices are indexed
/// `[cause][effect]`.
pub fn german_structural(sigma: f64) -> StructuralVarModel {
    let d = 7;
    let mut c = Mat::zeros(d, d);
    c[(LOAN_DURATION, CREDIT_SCORE)] = 0.5;
    c[(INCOME, CREDIT_SCORE)] = -0.3;
    c[(SAVINGS, CREDIT_SCORE)] = -0.5;

    let mut a1 = Mat::zeros(d, d);
    for i in 0..CREDIT_SCORE {
        a1[(i, i)] = 0.95;
    }
    let mut a2 = Mat::zeros(d, d);
    a2[(RESPONSIBILITY, INCOME)] = 0.3;
    a2[(LOAN_AMOUNT, CREDIT_SCORE)] = 0.5;
    a2[(INCOME, SAVINGS)] = 0.2;
    let mut a3 = Mat::zeros(d, d);
    a3[(LOAN_AMOUNT, LOAN_DURATION)] = 0.5;
    let mut a4 = Mat::zeros(d, d);
    a4[(EXPERTISE, RESPONSIBILITY)] = 0.3;
    a4[(EXPERTISE, INCOME)] = 0.8;

    StructuralVarModel::new(
        Vector::zeros(d),
        c,
        vec![a1, a2, a3, a4],
        Mat::identity(d, d) * (sigma * sigma),
    )
    .expect("German structural model is well-formed")
}

/// Reduced-form VAR(4) of the German process.
pub fn german_model(sigma: f64) -> VarModel {
    german_structural(sigma)
        .to_reduced()
        .expect("German instantaneous effects are acyclic")
}

/// VAR(1) with effect-row matrix `(√2·[[0, −0.5], [0.5, 1]])ᵀ` and
/// `Σ_u = σ² I`.
pub fn pendulum_model(sigma: f64) -> VarModel {
    let published = Mat::from_row_slice(2, 2, &[0.0, -0.5, 0.5, 1.0]) * std::f64::consts::SQRT_2;
    VarModel::new(
        Vector::zeros(2),
        vec![published.transpose()],
        Mat::identity(2, 2) * (sigma * sigma),
    )
    .expect("pendulum model is well-formed")
}

/// Simulates `n_entities` independent trajectories of length `t`; entity
/// `i` uses the random substream `(seed, i)`.
pub fn generate_panel(model: &VarModel, seed: u64, t: usize, n_entities: usize, burn_in: usize) -> Result<PanelSeries> {
    let entities = (0..n_entities)
        .map(|i| {
            let id = i.to_string();
            let cfg = SimConfig::new(t, seed).burn_in(burn_in).entity(id.clone());
            simulate(model, &cfg).map(|s| (id, s))
        })
        .collect::<Result<Vec<_>>>()?;
    PanelSeries::new(model.dim(), entities)
}

pub fn generate_german(seed: u64, t: usize, n_entities: usize) -> Result<(PanelSeries, VarModel)> {
    generate_german_with(seed, t, n_entities, &GeneratorConfig::default())
}

pub fn generate_german_with(seed: u64, t: usize, n_entities: usize, cfg: &GeneratorConfig) -> Result<(PanelSeries, VarModel)> {
    let model = german_model(cfg.sigma);
    let panel = generate_panel(&model, seed, t, n_entities, cfg.burn_in)?;
    Ok((panel, model))
}

pub fn generate_pendulum(seed: u64, t: usize, n_entities: usize) -> Result<(PanelSeries, VarModel)> {
    generate_pendulum_with(seed, t, n_entities, &GeneratorConfig::default())
}

pub fn generate_pendulum_with(seed: u64, t: usize, n_entities: usize, cfg: &GeneratorConfig) -> Result<(PanelSeries, VarModel)> {
    let model = pendulum_model(cfg.sigma);
    let panel = generate_panel(&model, seed, t, n_entities, cfg.burn_in)?;
    Ok((panel, model))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::CausalGraph;
    use crate::model::{DEFAULT_EDGE_TOLERANCE, DEFAULT_STABILITY_MARGIN};

    /// Edges of the published loan-approval graph, cause → effect.
    fn published_edges() -> CausalGraph {
        use super::{CREDIT_SCORE as C, EXPERTISE as E, INCOME as I, LOAN_AMOUNT as L, LOAN_DURATION as D, RESPONSIBILITY as R, SAVINGS as S};
        CausalGraph::from_edges(7, [(E, R), (L, D), (R, I), (E, I), (I, S), (L, C), (D, C), (I, C), (S, C)]).unwrap()
    }

    #[test]
    fn german_shape_and_stability() {
        let m = german_model(0.1);
        assert_eq!((m.dim(), m.lag()), (7, 4));
        let r = m.stability(DEFAULT_STABILITY_MARGIN).unwrap();
        assert!(r.is_stable);
        // 0.95 is a defective root (repeated along lag chains), so the
        // computed modulus carries an error of order ε^(1/4).
        assert!((r.spectral_radius - 0.95).abs() < 1e-3, "{}", r.spectral_radius);
    }

    #[test]
    fn german_structural_graph_is_the_published_graph() {
        let s = german_structural(0.1);
        assert_eq!(s.structural_graph(DEFAULT_EDGE_TOLERANCE, false), published_edges());
    }

    #[test]
    fn german_structural_self_loops_on_all_but_credit_score() {
        let g = german_structural(0.1).structural_graph(DEFAULT_EDGE_TOLERANCE, true);
        for i in 0..6 {
            assert!(g.contains(i, i));
        }
        assert!(!g.contains(CREDIT_SCORE, CREDIT_SCORE));
        assert_eq!(g.edge_count(), 9 + 6);
    }

    #[test]
    fn german_reduced_graph_adds_only_mediated_credit_score_edges() {
        // Income enters Credit Score contemporaneously, so Income's own
        // parents (Expertise at lag 4, Responsibility at lag 2) reach Credit
        // Score at the same lags in the reduced form.
        let g = german_model(0.1).induced_graph(DEFAULT_EDGE_TOLERANCE, false);
        let extra: Vec<_> = g.edges().filter(|&(i, j)| !published_edges().contains(i, j)).collect();
        assert_eq!(extra, vec![(EXPERTISE, CREDIT_SCORE), (RESPONSIBILITY, CREDIT_SCORE)]);
        assert!(published_edges().edges().all(|(i, j)| g.contains(i, j)));
    }

    #[test]
    fn credit_score_reduced_equation_has_instantaneous_terms() {
        // Credit Score = 0.5·D_t − 0.3·I_t − 0.5·S_t + 0.5·L_{t−2}; with
        // D_t = 0.95·D_{t−1} + …, the D lag-1 weight in the C row is 0.475.
        let m = german_model(0.1);
        assert!((m.coeffs()[0][(CREDIT_SCORE, LOAN_DURATION)] - 0.475).abs() < 1e-15);
        assert!((m.coeffs()[0][(CREDIT_SCORE, INCOME)] + 0.285).abs() < 1e-15);
        assert!((m.coeffs()[1][(CREDIT_SCORE, LOAN_AMOUNT)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn pendulum_spectral_radius_and_explosive_self_loop() {
        let m = pendulum_model(0.1);
        let r = m.stability(DEFAULT_STABILITY_MARGIN).unwrap();
        assert!((r.spectral_radius - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-10);
        let mut diag_only = m.coeffs()[0].clone();
        diag_only[(0, 1)] = 0.0;
        diag_only[(1, 0)] = 0.0;
        let alone = VarModel::new(Vector::zeros(2), vec![diag_only], Mat::identity(2, 2)).unwrap();
        let r = alone.stability(DEFAULT_STABILITY_MARGIN).unwrap();
        assert!((r.spectral_radius - std::f64::consts::SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn pendulum_noise_defaults_to_scaled_identity() {
        let m = pendulum_model(0.1);
        assert!((m.noise_cov() - Mat::identity(2, 2) * 0.01).norm() < 1e-15);
    }

    #[test]
    fn panel_generation_is_reproducible() {
        let (a, _) = generate_german(5, 30, 3).unwrap();
        let (b, _) = generate_german(5, 30, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
        assert_ne!(a.entities()[0].1, a.entities()[1].1);
    }
}
