//! Critical graph, fat graphs and the metric Reeb graph.
//!
//! All three structures serialize to JSON, and a [`Instance`] document
//! holding a Reeb graph with its fat graphs is the input format of the
//! combinatorial layer ([`crate::classify`], [`crate::measures`]).

mod critical;
mod fat;
mod reeb;

pub use critical::build_critical_graph;
pub use fat::{fat_graph, fat_graphs};
pub use reeb::{build_reeb, orbit_contour};

use num_complex::Complex64;
use num_rational::Rational64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::ext::Extended;
use crate::qd::PointKind;
use crate::tracer::TrajectorySegment;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CgVertex {
    /// Index of the critical point in the inventory.
    pub point: usize,
    pub location: [f64; 2],
    pub kind: PointKind,
    pub order: u32,
}

impl CgVertex {
    pub fn z(&self) -> Complex64 {
        Complex64::new(self.location[0], self.location[1])
    }
}

/// Far end of a critical edge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EdgeEnd {
    /// A vertex of the graph, entered along direction index `direction`.
    Vertex { vertex: usize, direction: usize, angle: f64 },
    /// An open end running into a pole of order at least two.
    Pole { point: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CgEdge {
    pub id: usize,
    pub from: usize,
    pub from_direction: usize,
    /// Outgoing angle at `from`.
    pub from_angle: f64,
    pub to: EdgeEnd,
    pub psi_length: Extended,
    /// Polyline from `from` along the edge (for rays: the traced part).
    pub polyline: Vec<[f64; 2]>,
    /// Canonical length parameter of each polyline point.
    pub params: Vec<f64>,
    #[serde(skip)]
    pub segment: Option<TrajectorySegment>,
}

impl CgEdge {
    pub fn is_ray(&self) -> bool {
        matches!(self.to, EdgeEnd::Pole { .. })
    }

    pub fn to_vertex(&self) -> Option<usize> {
        match self.to {
            EdgeEnd::Vertex { vertex, .. } => Some(vertex),
            EdgeEnd::Pole { .. } => None,
        }
    }

    pub fn points(&self) -> impl Iterator<Item = Complex64> + '_ {
        self.polyline.iter().map(|p| Complex64::new(p[0], p[1]))
    }

    /// Point at canonical length `t` from `from`, interpolating the polyline.
    pub fn point_at_param(&self, t: f64) -> Complex64 {
        let n = self.params.len();
        let i = self.params.partition_point(|&s| s <= t);
        let at = |k: usize| Complex64::new(self.polyline[k][0], self.polyline[k][1]);
        if i == 0 {
            return at(0);
        }
        if i >= n {
            return at(n - 1);
        }
        let (t0, t1) = (self.params[i - 1], self.params[i]);
        let u = if t1 > t0 { (t - t0) / (t1 - t0) } else { 0.0 };
        at(i - 1) + (at(i) - at(i - 1)) * u
    }
}

/// `K_Psi` with its finite critical points.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CriticalGraph {
    pub vertices: Vec<CgVertex>,
    pub edges: Vec<CgEdge>,
}

impl CriticalGraph {
    /// Connected components as sorted vertex lists, ordered by smallest
    /// vertex.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.vertices.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            let mut y = x;
            while p[y] != r {
                let next = p[y];
                p[y] = r;
                y = next;
            }
            r
        }
        for e in &self.edges {
            if let Some(v) = e.to_vertex() {
                let (a, b) = (find(&mut parent, e.from), find(&mut parent, v));
                parent[a.max(b)] = a.min(b);
            }
        }
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut index = vec![usize::MAX; n];
        for v in 0..n {
            let r = find(&mut parent, v);
            if index[r] == usize::MAX {
                index[r] = groups.len();
                groups.push(Vec::new());
            }
            groups[index[r]].push(v);
        }
        groups
    }

    /// Degree of a vertex counting edge ends.
    pub fn degree(&self, v: usize) -> usize {
        self.edges
            .iter()
            .map(|e| (e.from == v) as usize + (e.to_vertex() == Some(v)) as usize)
            .sum()
    }
}

/// A half-edge at a vertex.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Flag {
    pub vertex: usize,
    pub edge: usize,
    pub angle: f64,
}

/// A boundary component: a cyclic orbit of `sigma0 . sigma1`, or a chain
/// running between two open ends when the component has rays.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Orbit {
    pub flags: Vec<usize>,
    pub closed: bool,
    pub psi_length: Extended,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FatGraph {
    pub component: usize,
    pub vertices: Vec<usize>,
    pub edges: Vec<usize>,
    pub flags: Vec<Flag>,
    /// Counterclockwise successor at the same vertex.
    pub sigma0: Vec<usize>,
    /// Other end of the same edge; `None` for open ends.
    pub sigma1: Vec<Option<usize>>,
    pub orbits: Vec<Orbit>,
}

impl FatGraph {
    /// Index of the orbit containing a flag.
    pub fn orbit_of(&self, flag: usize) -> usize {
        self.orbits
            .iter()
            .position(|o| o.flags.contains(&flag))
            .expect("orbits partition the flags")
    }

    /// Flags of an edge: the one at `from` first.
    pub fn edge_flags(&self, edge: usize) -> Vec<usize> {
        (0..self.flags.len()).filter(|&f| self.flags[f].edge == edge).collect()
    }

    /// Orbits on the right and on the left of `flag`, looking along its edge
    /// away from its vertex.
    pub fn sides(&self, flag: usize) -> (usize, usize) {
        let right = self.orbit_of(flag);
        let left = match self.sigma1[flag] {
            Some(g) => self.orbit_of(g),
            None => self.orbit_of(self.sigma0[flag]),
        };
        (right, left)
    }

    /// `V - E + B` of the subgraph without open ends.
    pub fn euler_characteristic(&self) -> i64 {
        let closed: Vec<usize> = (0..self.flags.len()).filter(|&f| self.sigma1[f].is_some()).collect();
        let mut next0 = vec![usize::MAX; self.flags.len()];
        for &f in &closed {
            let mut g = self.sigma0[f];
            while self.sigma1[g].is_none() {
                g = self.sigma0[g];
            }
            next0[f] = g;
        }
        let mut seen = vec![false; self.flags.len()];
        let mut b = 0;
        for &f in &closed {
            if seen[f] {
                continue;
            }
            b += 1;
            let mut g = f;
            while !seen[g] {
                seen[g] = true;
                g = next0[self.sigma1[g].unwrap()];
            }
        }
        let e = closed.len() / 2;
        let v = self.vertices.len();
        if closed.is_empty() {
            return 2;
        }
        v as i64 - e as i64 + b as i64
    }
}

/// Which fat graph and orbit a Reeb edge end is attached to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OrbitRef {
    pub fat_graph: usize,
    pub orbit: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    Ring,
    Circle,
    Strip,
    End,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReebVertexKind {
    /// A connected component of the critical graph.
    Component {
        #[serde(default)]
        critical_vertices: Vec<usize>,
        #[serde(default)]
        critical_edges: Vec<usize>,
    },
    /// Free end of an infinite edge, sitting at a pole.
    Leaf {
        #[serde(default)]
        pole: Option<usize>,
        #[serde(default)]
        at_infinity: bool,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReebVertex {
    pub id: usize,
    #[serde(flatten)]
    pub kind: ReebVertexKind,
}

impl ReebVertex {
    pub fn is_leaf(&self) -> bool {
        matches!(self.kind, ReebVertexKind::Leaf { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReebEdge {
    pub id: usize,
    pub kind: DomainKind,
    pub tail: usize,
    pub head: usize,
    pub length: Extended,
    pub width: Extended,
    /// Exact length for combinatorial input, written `"p/q"`.
    #[serde(default, skip_serializing_if = "Option::is_none", with = "exact_serde")]
    pub exact_length: Option<Rational64>,
    #[serde(default)]
    pub tail_orbit: Option<OrbitRef>,
    #[serde(default)]
    pub head_orbit: Option<OrbitRef>,
}

impl ReebEdge {
    pub fn is_loop(&self) -> bool {
        self.tail == self.head
    }

    /// Orbit attached at the given end vertex (`head` side first for loops
    /// when `at_head`).
    pub fn orbit_at(&self, at_head: bool) -> Option<OrbitRef> {
        if at_head {
            self.head_orbit
        } else {
            self.tail_orbit
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReebGraph {
    pub vertices: Vec<ReebVertex>,
    pub edges: Vec<ReebEdge>,
}

impl ReebGraph {
    /// Checks ids, endpoint ranges, zero lengths, and that infinite edges
    /// end at leaves.
    pub fn validate(&self) -> Result<()> {
        for (i, v) in self.vertices.iter().enumerate() {
            if v.id != i {
                return Err(Error::InvalidGraph(format!("vertex {i} has id {}", v.id)));
            }
        }
        let n = self.vertices.len();
        for (i, e) in self.edges.iter().enumerate() {
            if e.id != i {
                return Err(Error::InvalidGraph(format!("edge {i} has id {}", e.id)));
            }
            if e.tail >= n || e.head >= n {
                return Err(Error::InvalidGraph(format!("edge {i} has an endpoint out of range")));
            }
            match e.length {
                Extended::Finite(l) if l <= 0.0 => return Err(Error::ZeroLengthEdge(i)),
                Extended::NegInfinity => return Err(Error::InvalidGraph(format!("edge {i} has length -inf"))),
                Extended::PosInfinity => {
                    let leaves = self.vertices[e.tail].is_leaf() as usize + self.vertices[e.head].is_leaf() as usize;
                    if leaves != 1 {
                        return Err(Error::InvalidGraph(format!("infinite edge {i} must end at exactly one leaf")));
                    }
                }
                _ => {}
            }
            if e.length.is_finite() && (self.vertices[e.tail].is_leaf() || self.vertices[e.head].is_leaf()) {
                return Err(Error::InvalidGraph(format!("finite edge {i} ends at a leaf")));
            }
        }
        Ok(())
    }

    pub fn finite_edges(&self) -> impl Iterator<Item = &ReebEdge> {
        self.edges.iter().filter(|e| e.length.is_finite())
    }

    /// Largest finite edge length (1 when there is none).
    pub fn max_length(&self) -> f64 {
        self.finite_edges()
            .filter_map(|e| e.length.finite())
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE)
    }

    /// Component vertices (non-leaves).
    pub fn components(&self) -> impl Iterator<Item = &ReebVertex> {
        self.vertices.iter().filter(|v| !v.is_leaf())
    }

    pub fn is_strebel(&self) -> bool {
        self.edges
            .iter()
            .all(|e| matches!(e.kind, DomainKind::Ring | DomainKind::Circle))
    }
}

/// A combinatorial instance: a Reeb graph, the fat graphs of its
/// components, and optionally the embedded critical graph.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub reeb: ReebGraph,
    #[serde(default)]
    pub fat_graphs: Vec<FatGraph>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub critical_graph: Option<CriticalGraph>,
}

impl Instance {
    pub fn from_json(text: &str) -> Result<Instance> {
        let inst: Instance = serde_json::from_str(text)?;
        inst.reeb.validate()?;
        Ok(inst)
    }
}

/// Parses `"p/q"`, `"p"`, or a finite decimal string into a rational.
pub fn parse_rational(s: &str) -> Option<Rational64> {
    let s = s.trim();
    if let Some((p, q)) = s.split_once('/') {
        let (p, q): (i64, i64) = (p.trim().parse().ok()?, q.trim().parse().ok()?);
        return (q != 0).then(|| Rational64::new(p, q));
    }
    s.parse::<i64>().ok().map(Rational64::from_integer)
}

mod exact_serde {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Option<Rational64>, s: S) -> std::result::Result<S::Ok, S::Error> {
        match v {
            Some(r) => s.serialize_str(&format!("{}/{}", r.numer(), r.denom())),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<Rational64>, D::Error> {
        let v: Option<String> = Option::deserialize(d)?;
        match v {
            None => Ok(None),
            Some(s) => parse_rational(&s)
                .map(Some)
                .ok_or_else(|| serde::de::Error::custom(format!("not a rational: {s:?}"))),
        }
    }
}
