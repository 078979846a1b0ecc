//! Causal inference over time for linear vector autoregressive processes.
//!
//! The crate covers VAR(p) representation and stability ([`model`]),
//! seeded simulation ([`simulate`], [`datasets`]), least-squares estimation
//! ([`estimate`]), additive, forcing and hard interventions ([`intervene`]),
//! observational and interventional forecasting with causal-effect paths
//! ([`forecast`]), the equilibrium structural causal model of a stable VAR
//! ([`scm`]), retrospective counterfactuals ([`counterfactual`]) and the
//! benchmark harness ([`metrics`], [`bench`]).

pub mod bench;
pub mod counterfactual;
pub mod datasets;
pub mod error;
pub mod estimate;
pub mod forecast;
pub mod graph;
pub mod intervene;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod scm;
pub mod series;
pub mod simulate;

pub use error::{Error, Result};
pub use graph::CausalGraph;
pub use intervene::{Intervention, InterventionKind};
pub use linalg::{Mat, Vector};
pub use model::{StabilityReport, StructuralVarModel, VarModel};
pub use series::{PanelSeries, TimeSeries};
pub use simulate::SimConfig;
