//! The lattice definition file (TOML).
//!
//! ```toml
//! name = "square"
//! dimension = 2
//! cell_vectors = [[1.0, 0.0], [0.0, 1.0]]
//! nodes = [[0.0, 0.0]]
//! triangles = [[[0, [0, 0]], [0, [1, 0]], [0, [1, 1]]],
//!              [[0, [0, 0]], [0, [0, 1]], [0, [1, 1]]]]
//! penalty_triangles = [0, 1]
//! eta = 0.01
//!
//! [[springs]]
//! ends = [[0, [0, 0]], [0, [1, 0]]]
//! weight = 0.5
//! ```
//!
//! Node references are `[basic_index, [i, j]]` with 0-based basic indices; a
//! ghost vertex in a triangle is written `{ ghost = 0 }`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AngleForm, Decomposition, Mechanism, NodeRef, PenaltyWeighting, Vertex};
use crate::error::{Error, Result};

fn default_dimension() -> usize {
    2
}

fn default_eta() -> f64 {
    0.01
}

fn default_name() -> String {
    "custom".to_string()
}

fn default_strength() -> f64 {
    1.0
}

fn default_form() -> AngleForm {
    AngleForm::AbsoluteCosine
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpringDescription {
    pub ends: [NodeRef; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rest_length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stiffness: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
}

impl SpringDescription {
    pub fn new(a: NodeRef, b: NodeRef) -> Self {
        SpringDescription { ends: [a, b], rest_length: None, stiffness: None, weight: None }
    }

    pub fn weighted(a: NodeRef, b: NodeRef, weight: f64) -> Self {
        SpringDescription { weight: Some(weight), ..Self::new(a, b) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AngleDescription {
    pub apex: NodeRef,
    pub arms: [NodeRef; 2],
    pub preferred_cosine: f64,
    #[serde(default = "default_strength")]
    pub strength: f64,
    #[serde(default = "default_form")]
    pub form: AngleForm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GhostDescription {
    pub sources: Vec<(f64, NodeRef)>,
}

/// Raw lattice description as read from a file or assembled in code.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeDescription {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default = "default_dimension")]
    pub dimension: usize,
    pub cell_vectors: Vec<[f64; 2]>,
    /// Convex unit cell tiling the plane under the lattice; defaults to the
    /// parallelogram spanned by the cell vectors.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cell_polygon: Option<Vec<[f64; 2]>>,
    pub nodes: Vec<[f64; 2]>,
    #[serde(default)]
    pub springs: Vec<SpringDescription>,
    #[serde(default)]
    pub angles: Vec<AngleDescription>,
    pub triangles: Vec<[Vertex; 3]>,
    #[serde(default)]
    pub ghosts: Vec<GhostDescription>,
    #[serde(default)]
    pub penalty_triangles: Vec<usize>,
    #[serde(default)]
    pub penalty_weighting: PenaltyWeighting,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decomposition: Option<Decomposition>,
    #[serde(default)]
    pub mechanisms: Vec<Mechanism>,
}

impl LatticeDescription {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeSpec;

    const SQUARE: &str = r#"
name = "square"
cell_vectors = [[1.0, 0.0], [0.0, 1.0]]
nodes = [[0.0, 0.0]]
triangles = [[[0, [0, 0]], [0, [1, 0]], [0, [1, 1]]],
             [[0, [0, 0]], [0, [0, 1]], [0, [1, 1]]]]
penalty_triangles = [0, 1]

[[springs]]
ends = [[0, [0, 0]], [0, [1, 0]]]
weight = 0.5
"#;

    #[test]
    fn parses_and_builds() {
        let d = LatticeDescription::from_toml_str(SQUARE).unwrap();
        assert_eq!(d.springs[0].ends[1], NodeRef::new(0, [1, 0]));
        assert_eq!(d.eta, 0.01);
        let spec = LatticeSpec::build(d).unwrap();
        assert_eq!(spec.springs()[0].rest_length, 1.0);
    }

    #[test]
    fn round_trips_through_toml() {
        for entry in crate::lattice::catalog() {
            let d = entry.spec.description().clone();
            let s = d.to_toml_string().unwrap();
            let back = LatticeDescription::from_toml_str(&s).unwrap();
            assert_eq!(back, d, "{}", entry.name);
        }
    }

    #[test]
    fn ghost_vertices_parse() {
        let s = r#"
cell_vectors = [[1.0, 0.0], [0.0, 1.0]]
nodes = [[0.0, 0.0]]
ghosts = [{ sources = [[0.5, [0, [0, 0]]], [0.5, [0, [1, 1]]]] }]
triangles = [[[0, [0, 0]], [0, [1, 0]], { ghost = 0 }]]
"#;
        let d = LatticeDescription::from_toml_str(s).unwrap();
        assert_eq!(d.triangles[0][2], Vertex::Ghost { ghost: 0 });
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(LatticeDescription::from_toml_str(&format!("etta = 1.0\n{SQUARE}")).is_err());
    }
}
