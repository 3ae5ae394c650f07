//! Built-in example lattices.

use super::{
    Decomposition, LatticeDescription, LatticeSpec, Mechanism, NodeRef, PathLeg, PenaltyWeighting,
    SpringDescription, SpringPath, Vertex, WeightedPolygon,
};
use crate::error::{Error, Result};

pub struct CatalogEntry {
    pub name: &'static str,
    pub summary: &'static str,
    pub spec: LatticeSpec,
}

pub fn catalog_names() -> [&'static str; 4] {
    ["kagome", "rotating-squares", "square", "square-long-range"]
}

pub fn catalog() -> Vec<CatalogEntry> {
    vec![
        CatalogEntry {
            name: "kagome",
            summary: "corner-sharing unit triangles, penalty on both triangles",
            spec: kagome(),
        },
        CatalogEntry {
            name: "rotating-squares",
            summary: "hinged rigid squares, each braced by a diagonal",
            spec: rotating_squares(),
        },
        CatalogEntry {
            name: "square",
            summary: "nearest-neighbour square grid, half-weight springs",
            spec: square(),
        },
        CatalogEntry {
            name: "square-long-range",
            summary: "square grid plus one (2,1) spring per node",
            spec: square_long_range(),
        },
    ]
}

impl LatticeSpec {
    /// Looks up a catalog lattice by name.
    pub fn from_catalog(name: &str) -> Result<LatticeSpec> {
        match name {
            "kagome" => Ok(kagome()),
            "rotating-squares" => Ok(rotating_squares()),
            "square" => Ok(square()),
            "square-long-range" => Ok(square_long_range()),
            _ => Err(Error::InvalidArgument(format!(
                "unknown catalog lattice `{name}` (known: {})",
                catalog_names().join(", ")
            ))),
        }
    }
}

const fn n(basic: usize, i: i64, j: i64) -> NodeRef {
    NodeRef::new(basic, [i, j])
}

fn tri(a: NodeRef, b: NodeRef, c: NodeRef) -> [Vertex; 3] {
    [Vertex::Node(a), Vertex::Node(b), Vertex::Node(c)]
}

fn poly(weight: f64, vertices: &[NodeRef]) -> WeightedPolygon {
    WeightedPolygon { weight, vertices: vertices.to_vec() }
}

fn kagome() -> LatticeSpec {
    let s3 = 3f64.sqrt();
    let a = n(0, 0, 0);
    let o = n(1, 0, 0);
    let d = n(2, 0, 0);
    let b = n(2, 1, -1);
    let c = n(0, 0, 1);
    let e = n(0, -1, 1);
    let f = n(2, 0, -1);
    let desc = LatticeDescription {
        name: "kagome".into(),
        dimension: 2,
        cell_vectors: vec![[2.0, 0.0], [1.0, s3]],
        cell_polygon: Some(vec![[0.0, 0.0], [2.0, 0.0], [2.0, s3], [0.0, s3]]),
        nodes: vec![[1.0, 0.0], [1.5, s3 / 2.0], [1.0, s3]],
        springs: vec![
            SpringDescription::new(a, o),
            SpringDescription::new(b, o),
            SpringDescription::new(c, o),
            SpringDescription::new(d, o),
            SpringDescription::new(a, f),
            SpringDescription::new(d, e),
        ],
        angles: vec![],
        triangles: vec![
            tri(a, o, b),
            tri(b, o, c),
            tri(c, o, d),
            tri(a, o, f),
            tri(d, o, f),
            tri(d, e, f),
        ],
        ghosts: vec![],
        penalty_triangles: vec![0, 2],
        penalty_weighting: PenaltyWeighting::Unweighted,
        eta: 0.01,
        decomposition: Some(Decomposition {
            upper: vec![poly(1.0, &[b, o, c]), poly(1.0, &[f, a, o, d, e])],
            lower: vec![
                poly(0.5, &[a, o, b]),
                poly(0.5, &[b, o, c]),
                poly(0.5, &[c, o, d]),
                poly(0.5, &[f, a, o, d, e]),
            ],
            paths: vec![],
        }),
        mechanisms: vec![Mechanism::AlternatingRotation {
            up_centroids: vec![[1.5, s3 / 6.0], [1.5, s3 / 6.0], [0.5, s3 + s3 / 6.0]],
        }],
    };
    LatticeSpec::build(desc).expect("catalog lattice is valid")
}

fn rotating_squares() -> LatticeSpec {
    let a = n(0, 0, 0);
    let b = n(1, 0, 0);
    let d = n(2, 0, 0);
    let o = n(3, 0, 0);
    let c = n(0, 1, 0);
    let e = n(2, 1, 0);
    let f = n(0, 0, 1);
    let g = n(1, 0, 1);
    let h = n(0, 1, 1);
    let desc = LatticeDescription {
        name: "rotating-squares".into(),
        dimension: 2,
        cell_vectors: vec![[2.0, 0.0], [0.0, 2.0]],
        cell_polygon: None,
        nodes: vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]],
        springs: vec![
            SpringDescription::new(a, b),
            SpringDescription::new(a, o),
            SpringDescription::new(a, d),
            SpringDescription::new(b, c),
            SpringDescription::new(b, o),
            SpringDescription::new(d, o),
            SpringDescription::new(e, o),
            SpringDescription::new(d, f),
            SpringDescription::new(o, g),
            SpringDescription::new(o, h),
        ],
        angles: vec![],
        triangles: vec![
            tri(a, b, o),
            tri(a, d, o),
            tri(o, e, h),
            tri(o, g, h),
            tri(b, c, e),
            tri(b, e, o),
            tri(d, o, g),
            tri(d, g, f),
        ],
        ghosts: vec![],
        penalty_triangles: vec![0, 1, 2, 3],
        penalty_weighting: PenaltyWeighting::Unweighted,
        eta: 0.01,
        decomposition: Some(Decomposition {
            upper: vec![
                poly(1.0, &[d, a, o]),
                poly(1.0, &[b, a, o]),
                poly(1.0, &[e, o, b, c]),
                poly(1.0, &[g, o, d, f]),
                poly(1.0, &[g, o, h]),
                poly(1.0, &[h, o, e]),
            ],
            lower: vec![
                poly(0.5, &[d, a, o]),
                poly(0.5, &[b, a, o]),
                poly(0.5, &[e, o, b, c]),
                poly(0.5, &[g, o, d, f]),
                poly(0.5, &[g, o, h]),
                poly(0.5, &[h, o, e]),
            ],
            paths: vec![],
        }),
        mechanisms: vec![Mechanism::AlternatingRotation { up_centroids: vec![[0.5, 0.5]; 4] }],
    };
    LatticeSpec::build(desc).expect("catalog lattice is valid")
}

fn square_description() -> LatticeDescription {
    let o = n(0, 0, 0);
    let a = n(0, 1, 0);
    let b = n(0, 0, 1);
    let c = n(0, 1, 1);
    LatticeDescription {
        name: "square".into(),
        dimension: 2,
        cell_vectors: vec![[1.0, 0.0], [0.0, 1.0]],
        cell_polygon: None,
        nodes: vec![[0.0, 0.0]],
        springs: vec![
            SpringDescription::weighted(o, a, 0.5),
            SpringDescription::weighted(o, b, 0.5),
            SpringDescription::weighted(a, c, 0.5),
            SpringDescription::weighted(b, c, 0.5),
        ],
        angles: vec![],
        triangles: vec![tri(o, a, c), tri(o, b, c)],
        ghosts: vec![],
        penalty_triangles: vec![0, 1],
        penalty_weighting: PenaltyWeighting::Unweighted,
        eta: 0.01,
        decomposition: Some(Decomposition {
            upper: vec![poly(0.5, &[o, a, c]), poly(0.5, &[o, b, c])],
            lower: vec![poly(0.5, &[o, a, c]), poly(0.5, &[o, b, c])],
            paths: vec![],
        }),
        mechanisms: vec![Mechanism::AccordionFold],
    }
}

fn square() -> LatticeSpec {
    LatticeSpec::build(square_description()).expect("catalog lattice is valid")
}

fn square_long_range() -> LatticeSpec {
    let o = n(0, 0, 0);
    let a = n(0, 1, 0);
    let d = n(0, 2, 1);
    let mut desc = square_description();
    desc.name = "square-long-range".into();
    desc.springs.push(SpringDescription::new(o, d));
    desc.mechanisms.clear();
    if let Some(dec) = desc.decomposition.as_mut() {
        dec.paths.push(SpringPath {
            spring: 4,
            legs: vec![
                PathLeg { from: o, to: a, triangle: 0, cell: [0, 0] },
                PathLeg { from: a, to: d, triangle: 1, cell: [1, 0] },
            ],
        });
    }
    LatticeSpec::build(desc).expect("catalog lattice is valid")
}
