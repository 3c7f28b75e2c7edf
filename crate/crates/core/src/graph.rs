//! Fundamental graphs of periodic graphs.
//!
//! A `d`-periodic graph is stored through its finite quotient: vertices with
//! potentials plus unoriented edges carrying integer index vectors of length
//! `d`. The index of an edge records which lattice translate it crosses, and
//! reverses sign with orientation, so the unoriented edge `(u, v, τ)` is the
//! same edge as `(v, u, −τ)`. Vertex order is fixed at construction and
//! defines the row/column order of every fiber matrix downstream.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A vertex of the fundamental graph: an identifier plus its potential `Q_v`.
#[derive(Debug, Clone, PartialEq)]
pub struct Vertex {
    pub id: String,
    pub potential: f64,
}

/// An unoriented edge with a canonical orientation.
///
/// `u` and `v` are positions in the graph's vertex list. The stored `index`
/// belongs to the orientation `u → v`; the reverse orientation carries `−index`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnorientedEdge {
    pub u: usize,
    pub v: usize,
    pub index: Vec<i64>,
}

/// One orientation of an edge, generated on demand by
/// [`FundamentalGraph::oriented_edges`].
#[derive(Debug, Clone, PartialEq)]
pub struct OrientedEdgeView {
    pub from: usize,
    pub to: usize,
    pub index: Vec<i64>,
}

/// A periodic edge perturbation: one extra edge `(v1, v2)` with index `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationSpec {
    pub v1: String,
    pub v2: String,
    pub index: Vec<i64>,
}

/// The fundamental graph of a periodic graph. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct FundamentalGraph {
    dimension: usize,
    vertices: Vec<Vertex>,
    edges: Vec<UnorientedEdge>,
    id_to_pos: HashMap<String, usize>,
}

impl FundamentalGraph {
    /// Builds and validates a graph from raw data.
    ///
    /// Vertex ids must be unique, every edge endpoint must exist, every edge
    /// index must have length `dimension`, and the quotient multigraph
    /// (indices ignored) must be connected. A single isolated vertex counts
    /// as trivially connected.
    pub fn new(
        dimension: usize,
        vertices: Vec<(String, f64)>,
        edges: Vec<(String, String, Vec<i64>)>,
    ) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::ZeroDimension);
        }
        if vertices.is_empty() {
            return Err(Error::NoVertices);
        }
        let mut id_to_pos = HashMap::with_capacity(vertices.len());
        let mut vs = Vec::with_capacity(vertices.len());
        for (id, potential) in vertices {
            if !potential.is_finite() {
                return Err(Error::NonFinite("vertex potential"));
            }
            if id_to_pos.insert(id.clone(), vs.len()).is_some() {
                return Err(Error::DuplicateVertex(id));
            }
            vs.push(Vertex { id, potential });
        }
        let mut es = Vec::with_capacity(edges.len());
        for (from, to, index) in edges {
            let u = *id_to_pos
                .get(&from)
                .ok_or_else(|| Error::UnknownVertex(from.clone()))?;
            let v = *id_to_pos
                .get(&to)
                .ok_or_else(|| Error::UnknownVertex(to.clone()))?;
            if index.len() != dimension {
                return Err(Error::IndexLength {
                    expected: dimension,
                    got: index.len(),
                });
            }
            es.push(UnorientedEdge { u, v, index });
        }
        let g = FundamentalGraph {
            dimension,
            vertices: vs,
            edges: es,
            id_to_pos,
        };
        if !g.quotient_connected() {
            return Err(Error::Disconnected);
        }
        Ok(g)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Number of vertices ν, the order of every fiber matrix.
    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[UnorientedEdge] {
        &self.edges
    }

    /// Position of a vertex id in the matrix ordering.
    pub fn vertex_pos(&self, id: &str) -> Result<usize> {
        self.id_to_pos
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownVertex(id.to_string()))
    }

    /// Iterates every oriented edge: each unoriented edge appears twice, with
    /// opposite indices. Loops also appear twice.
    pub fn oriented_edges(&self) -> impl Iterator<Item = OrientedEdgeView> + '_ {
        self.edges.iter().flat_map(|e| {
            let fwd = OrientedEdgeView {
                from: e.u,
                to: e.v,
                index: e.index.clone(),
            };
            let rev = OrientedEdgeView {
                from: e.v,
                to: e.u,
                index: e.index.iter().map(|&t| -t).collect(),
            };
            [fwd, rev]
        })
    }

    /// Degree of a vertex, with loops counted twice.
    pub fn vertex_degree(&self, id: &str) -> Result<usize> {
        let p = self.vertex_pos(id)?;
        Ok(self.degree_of(p))
    }

    pub(crate) fn degree_of(&self, pos: usize) -> usize {
        self.edges
            .iter()
            .map(|e| (e.u == pos) as usize + (e.v == pos) as usize)
            .sum()
    }

    /// Returns the graph with one extra unoriented edge `(v1, v2, t)`.
    /// Everything else is unchanged; the new edge is appended last.
    pub fn perturb(&self, p: &PerturbationSpec) -> Result<Self> {
        let u = self.vertex_pos(&p.v1)?;
        let v = self.vertex_pos(&p.v2)?;
        if p.index.len() != self.dimension {
            return Err(Error::IndexLength {
                expected: self.dimension,
                got: p.index.len(),
            });
        }
        let mut g = self.clone();
        g.edges.push(UnorientedEdge {
            u,
            v,
            index: p.index.clone(),
        });
        Ok(g)
    }

    /// Builds the limit graph of a perturbed graph.
    ///
    /// `added_edge` is the ordinal of the designated added edge. The result
    /// has dimension `d+1`, the same vertices and potentials, every other
    /// edge index extended by a trailing zero, and the added edge reindexed
    /// to the last standard basis vector (in its stored orientation).
    pub fn lift_to_limit(&self, added_edge: usize) -> Result<Self> {
        if added_edge >= self.edges.len() {
            return Err(Error::EdgeNotFound(added_edge));
        }
        let d = self.dimension;
        let mut g = self.clone();
        g.dimension = d + 1;
        for (i, e) in g.edges.iter_mut().enumerate() {
            if i == added_edge {
                e.index = vec![0; d + 1];
                e.index[d] = 1;
            } else {
                e.index.push(0);
            }
        }
        Ok(g)
    }

    /// True when both graphs share the vertex list (ids, order, potentials).
    pub fn same_vertices(&self, other: &Self) -> bool {
        self.vertices == other.vertices
    }

    fn quotient_connected(&self) -> bool {
        let n = self.vertices.len();
        if n <= 1 {
            return true;
        }
        let mut adj = vec![Vec::new(); n];
        for e in &self.edges {
            adj[e.u].push(e.v);
            adj[e.v].push(e.u);
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count == n
    }

    /// Compact one-line description used by the CLI.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = write!(
            s,
            "dimension {}, {} vertices, {} edges",
            self.dimension,
            self.vertices.len(),
            self.edges.len()
        );
        s
    }
}

// ---------------------------------------------------------------------------
// Builtin catalog
// ---------------------------------------------------------------------------

/// Builds a graph from the builtin catalog.
///
/// Keys: `lattice:d` (the d-dimensional lattice, one vertex with d loops),
/// `line2` (the 1d lattice with 2-periodic potential ±q), `hexagonal`
/// (2 vertices, 3 edges), `hex-limit` and `line2-limit` (the 2d limit graph
/// of the perturbed 2-periodic line, with potentials ±q).
///
/// ```
/// let g = bandgraph::graph::builtin("lattice:2", 0.0).unwrap();
/// assert_eq!(g.vertex_count(), 1);
/// assert_eq!(g.vertex_degree("v").unwrap(), 4);
/// ```
pub fn builtin(name: &str, q: f64) -> Result<FundamentalGraph> {
    if !q.is_finite() {
        return Err(Error::InvalidParameter(format!("q = {q} is not finite")));
    }
    let (key, param) = match name.split_once(':') {
        Some((k, p)) => (k, Some(p)),
        None => (name, None),
    };
    match key {
        "lattice" => {
            let d: usize = param
                .ok_or_else(|| {
                    Error::InvalidParameter("lattice requires a dimension, e.g. lattice:2".into())
                })?
                .parse()
                .map_err(|_| {
                    Error::InvalidParameter(format!("bad lattice dimension `{}`", param.unwrap()))
                })?;
            if d < 1 {
                return Err(Error::InvalidParameter(
                    "lattice dimension must be >= 1".into(),
                ));
            }
            let edges = (0..d)
                .map(|s| {
                    let mut idx = vec![0i64; d];
                    idx[s] = 1;
                    ("v".to_string(), "v".to_string(), idx)
                })
                .collect();
            FundamentalGraph::new(d, vec![("v".into(), 0.0)], edges)
        }
        "line2" => FundamentalGraph::new(
            1,
            vec![("v0".into(), q), ("v1".into(), -q)],
            vec![
                ("v0".into(), "v1".into(), vec![0]),
                ("v1".into(), "v0".into(), vec![1]),
            ],
        ),
        "hexagonal" => FundamentalGraph::new(
            2,
            vec![("v1".into(), q), ("v2".into(), -q)],
            vec![
                ("v1".into(), "v2".into(), vec![0, 0]),
                ("v1".into(), "v2".into(), vec![1, 0]),
                ("v1".into(), "v2".into(), vec![0, 1]),
            ],
        ),
        "hex-limit" => FundamentalGraph::new(
            2,
            vec![("v1".into(), q), ("v2".into(), -q)],
            vec![
                ("v1".into(), "v2".into(), vec![0, 0]),
                ("v1".into(), "v2".into(), vec![1, 0]),
                ("v2".into(), "v1".into(), vec![0, 1]),
            ],
        ),
        "line2-limit" => FundamentalGraph::new(
            2,
            vec![("v0".into(), q), ("v1".into(), -q)],
            vec![
                ("v0".into(), "v1".into(), vec![0, 0]),
                ("v1".into(), "v0".into(), vec![1, 0]),
                ("v0".into(), "v1".into(), vec![0, 1]),
            ],
        ),
        _ => Err(Error::UnknownBuiltin(name.to_string())),
    }
}

// ---------------------------------------------------------------------------
// JSON graph file format
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphFile {
    dimension: usize,
    vertices: Vec<VertexFile>,
    edges: Vec<EdgeFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VertexFile {
    id: String,
    potential: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeFile {
    from: String,
    to: String,
    index: Vec<i64>,
}

impl FundamentalGraph {
    /// Parses the JSON graph format. Unknown fields are rejected.
    pub fn from_json(text: &str) -> Result<Self> {
        let f: GraphFile = serde_json::from_str(text)?;
        FundamentalGraph::new(
            f.dimension,
            f.vertices
                .into_iter()
                .map(|v| (v.id, v.potential))
                .collect(),
            f.edges
                .into_iter()
                .map(|e| (e.from, e.to, e.index))
                .collect(),
        )
    }

    /// Serializes to the JSON graph format.
    pub fn to_json(&self) -> String {
        let f = GraphFile {
            dimension: self.dimension,
            vertices: self
                .vertices
                .iter()
                .map(|v| VertexFile {
                    id: v.id.clone(),
                    potential: v.potential,
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeFile {
                    from: self.vertices[e.u].id.clone(),
                    to: self.vertices[e.v].id.clone(),
                    index: e.index.clone(),
                })
                .collect(),
        };
        // GraphFile serialization cannot fail: no maps, no non-string keys.
        serde_json::to_string_pretty(&f).expect("graph serialization")
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        let mut text = self.to_json();
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }
}
