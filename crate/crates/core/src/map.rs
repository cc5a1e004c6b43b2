//! Scalar channels over an `(alpha, Omega)` grid, with per-cell flags.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::floquet::IntegratorSettings;
use crate::grid::ParameterGrid;
use crate::lattice::PlaneWaveBasis;

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlagKind {
    /// Near-degenerate eigenphases; modes were re-orthonormalized.
    Degenerate,
    /// The cell could not be computed; its values are NaN.
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellFlag {
    pub alpha_index: usize,
    pub omega_index: usize,
    pub kind: FlagKind,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapMetadata {
    pub v0: f64,
    pub m_max: Option<usize>,
    pub q: Option<f64>,
    pub integrator: Option<IntegratorSettings>,
    pub flags: Vec<CellFlag>,
    pub code_version: String,
    /// Free-form provenance added by callers (config hash, units, ...).
    pub extra: BTreeMap<String, serde_json::Value>,
}

impl MapMetadata {
    pub fn new(v0: f64) -> Self {
        Self {
            v0,
            m_max: None,
            q: None,
            integrator: None,
            flags: Vec::new(),
            code_version: CODE_VERSION.to_string(),
            extra: BTreeMap::new(),
        }
    }

    pub fn with_basis(self, basis: &PlaneWaveBasis) -> Self {
        Self { m_max: Some(basis.m_max), q: Some(basis.q), ..self }
    }

    pub fn failed_cells(&self) -> impl Iterator<Item = &CellFlag> {
        self.flags.iter().filter(|f| f.kind == FlagKind::Failed)
    }
}

/// One named scalar per grid cell, indexed `[alpha][omega]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub name: String,
    pub values: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterMap {
    pub grid: ParameterGrid,
    pub channels: Vec<Channel>,
    pub metadata: MapMetadata,
}

impl ParameterMap {
    /// Map with every channel filled with NaN.
    pub fn new(grid: ParameterGrid, names: &[String], metadata: MapMetadata) -> Self {
        let (na, nw) = grid.shape();
        let channels = names
            .iter()
            .map(|name| Channel { name: name.clone(), values: vec![vec![f64::NAN; nw]; na] })
            .collect();
        Self { grid, channels, metadata }
    }

    pub fn channel(&self, name: &str) -> Option<&Channel> {
        self.channels.iter().find(|c| c.name == name)
    }

    pub fn value(&self, name: &str, alpha_index: usize, omega_index: usize) -> Option<f64> {
        self.channel(name).map(|c| c.values[alpha_index][omega_index])
    }

    pub fn has_failures(&self) -> bool {
        self.metadata.failed_cells().next().is_some()
    }
}
