use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Directed graph over process components. An edge `(i, j)` means component
/// `i` causes component `j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CausalGraph {
    dim: usize,
    edges: BTreeSet<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
}

impl CausalGraph {
    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            edges: BTreeSet::new(),
            labels: None,
        }
    }

    pub fn from_edges(dim: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut g = Self::empty(dim);
        for (cause, effect) in edges {
            g.add_edge(cause, effect)?;
        }
        Ok(g)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.dim {
            return Err(Error::dim("graph labels", self.dim, labels.len()));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// Inserts `cause → effect`; returns whether the edge was new.
    pub fn add_edge(&mut self, cause: usize, effect: usize) -> Result<bool> {
        if cause >= self.dim || effect >= self.dim {
            return Err(Error::invalid(format!(
                "edge ({cause}, {effect}) out of range for dimension {}",
                self.dim
            )));
        }
        Ok(self.edges.insert((cause, effect)))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn contains(&self, cause: usize, effect: usize) -> bool {
        self.edges.contains(&(cause, effect))
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn union(&self, other: &CausalGraph) -> Result<CausalGraph> {
        if other.dim != self.dim {
            return Err(Error::dim("graph union", self.dim, other.dim));
        }
        let mut out = self.clone();
        out.edges.extend(other.edges.iter().copied());
        Ok(out)
    }

    pub fn without_self_loops(&self) -> CausalGraph {
        let mut out = self.clone();
        out.edges.retain(|(i, j)| i != j);
        out
    }

    /// Edges rendered with labels when present, e.g. `"E->R"`.
    pub fn edge_names(&self) -> Vec<String> {
        let name = |i: usize| match &self.labels {
            Some(l) => l[i].clone(),
            None => i.to_string(),
        };
        self.edges
            .iter()
            .map(|&(i, j)| format!("{}->{}", name(i), name(j)))
            .collect()
    }
}
