use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::CriticalGraph;

/// Simple cycles enumerated before giving up.
pub const CYCLE_CAP: usize = 100_000;
/// Attached edges are tested at this fraction of their length from the
/// cycle vertex.
const ATTACH_PROBE: f64 = 0.02;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimpleCycleVerdict {
    pub admits_positive: bool,
    /// Critical edges lying on no simple cycle.
    pub support_forest: Vec<usize>,
    pub cycles: usize,
    /// Enumeration stopped at [`CYCLE_CAP`]; the verdict covers only the
    /// cycles found.
    pub truncated: bool,
    /// Edges of a cycle with an edge attached inside it.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failing_cycle: Option<Vec<usize>>,
}

struct Cycle {
    edges: Vec<usize>,
    /// Vertex at which each edge is entered.
    starts: Vec<usize>,
}

fn enumerate(cg: &CriticalGraph) -> (Vec<Cycle>, bool) {
    let n = cg.vertices.len();
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    let mut cycles = Vec::new();
    for e in &cg.edges {
        let Some(to) = e.to_vertex() else { continue };
        if to == e.from {
            cycles.push(Cycle {
                edges: vec![e.id],
                starts: vec![e.from],
            });
        } else {
            adj[e.from].push((e.id, to));
            adj[to].push((e.id, e.from));
        }
    }
    struct Search<'a> {
        adj: &'a [Vec<(usize, usize)>],
        s: usize,
        on_path: Vec<bool>,
        edges: Vec<usize>,
        starts: Vec<usize>,
        out: &'a mut Vec<Cycle>,
        truncated: bool,
    }
    impl Search<'_> {
        fn go(&mut self, v: usize) {
            for &(e, w) in &self.adj[v] {
                if self.truncated {
                    return;
                }
                if self.edges.last() == Some(&e) {
                    continue;
                }
                if w == self.s {
                    if self.edges[0] < e {
                        let mut edges = self.edges.clone();
                        edges.push(e);
                        let mut starts = self.starts.clone();
                        starts.push(v);
                        self.out.push(Cycle { edges, starts });
                        if self.out.len() >= CYCLE_CAP {
                            self.truncated = true;
                        }
                    }
                } else if w > self.s && !self.on_path[w] {
                    self.on_path[w] = true;
                    self.edges.push(e);
                    self.starts.push(v);
                    self.go(w);
                    self.edges.pop();
                    self.starts.pop();
                    self.on_path[w] = false;
                }
            }
        }
    }
    let mut truncated = false;
    for s in 0..n {
        for &(e, w) in &adj[s] {
            if w <= s {
                continue;
            }
            let mut search = Search {
                adj: &adj,
                s,
                on_path: vec![false; n],
                edges: vec![e],
                starts: vec![s],
                out: &mut cycles,
                truncated: false,
            };
            search.on_path[w] = true;
            search.go(w);
            if search.truncated {
                truncated = true;
                break;
            }
        }
        if truncated {
            break;
        }
    }
    (cycles, truncated)
}

fn polygon(cg: &CriticalGraph, c: &Cycle) -> Vec<Complex64> {
    let mut pts = Vec::new();
    for (&e, &start) in c.edges.iter().zip(&c.starts) {
        let edge = &cg.edges[e];
        let mut line: Vec<Complex64> = edge.points().collect();
        if edge.from != start {
            line.reverse();
        }
        pts.extend(line);
    }
    pts
}

/// Even-odd rule.
pub fn point_in_polygon(p: Complex64, poly: &[Complex64]) -> bool {
    let mut inside = false;
    let n = poly.len();
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a.im > p.im) != (b.im > p.im) {
            let x = a.re + (p.im - a.im) * (b.re - a.re) / (b.im - a.im);
            if p.re < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// A positive measure is possible iff no critical edge is attached to a
/// simple cycle from inside. The support is what remains after removing
/// every simple cycle.
pub fn simple_cycle_criterion(cg: &CriticalGraph) -> Result<SimpleCycleVerdict> {
    for e in &cg.edges {
        if e.polyline.len() < 2 || e.params.len() != e.polyline.len() {
            return Err(Error::NonPlanarInput(format!("critical edge {} has no embedded polyline", e.id)));
        }
    }
    let (cycles, truncated) = enumerate(cg);
    let mut on_cycle = vec![false; cg.edges.len()];
    let mut failing = None;
    for c in &cycles {
        for &e in &c.edges {
            on_cycle[e] = true;
        }
        if failing.is_some() {
            continue;
        }
        let poly = polygon(cg, c);
        let inside = cg.edges.iter().filter(|e| !c.edges.contains(&e.id)).any(|e| {
            let len = *e.params.last().unwrap();
            let mut probes = Vec::new();
            if c.starts.contains(&e.from) {
                probes.push(e.point_at_param(ATTACH_PROBE * len));
            }
            if let Some(to) = e.to_vertex() {
                if c.starts.contains(&to) {
                    probes.push(e.point_at_param((1.0 - ATTACH_PROBE) * len));
                }
            }
            probes.into_iter().any(|p| point_in_polygon(p, &poly))
        });
        if inside {
            failing = Some(c.edges.clone());
        }
    }
    Ok(SimpleCycleVerdict {
        admits_positive: failing.is_none(),
        support_forest: (0..cg.edges.len()).filter(|&e| !on_cycle[e]).collect(),
        cycles: cycles.len(),
        truncated,
        failing_cycle: failing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ext::Extended;
    use crate::qd::PointKind;
    use crate::topology::{CgEdge, CgVertex, EdgeEnd};

    pub(crate) fn straight(cg: &mut CriticalGraph, a: usize, b: usize) {
        let (za, zb) = (cg.vertices[a].z(), cg.vertices[b].z());
        let k = 20;
        let polyline: Vec<[f64; 2]> = (0..=k)
            .map(|i| {
                let z = za + (zb - za) * (i as f64 / k as f64);
                [z.re, z.im]
            })
            .collect();
        let len = (zb - za).norm();
        let id = cg.edges.len();
        cg.edges.push(CgEdge {
            id,
            from: a,
            from_direction: 0,
            from_angle: (zb - za).arg().rem_euclid(std::f64::consts::TAU),
            to: EdgeEnd::Vertex {
                vertex: b,
                direction: 0,
                angle: (za - zb).arg().rem_euclid(std::f64::consts::TAU),
            },
            psi_length: Extended::Finite(len),
            polyline,
            params: (0..=k).map(|i| len * i as f64 / k as f64).collect(),
            segment: None,
        });
    }

    pub(crate) fn vertices(pts: &[(f64, f64)]) -> CriticalGraph {
        CriticalGraph {
            vertices: pts
                .iter()
                .enumerate()
                .map(|(i, &(x, y))| CgVertex {
                    point: i,
                    location: [x, y],
                    kind: PointKind::Zero,
                    order: 1,
                })
                .collect(),
            edges: vec![],
        }
    }

    #[test]
    fn segment_is_its_own_support() {
        let mut cg = vertices(&[(-1.0, 0.0), (1.0, 0.0)]);
        straight(&mut cg, 0, 1);
        let v = simple_cycle_criterion(&cg).unwrap();
        assert!(v.admits_positive);
        assert_eq!(v.support_forest, vec![0]);
    }

    #[test]
    fn triangle_with_inner_and_outer_pendant() {
        let tri = [(0.0, 0.0), (4.0, 0.0), (2.0, 3.0)];
        let mut inner = vertices(&[tri[0], tri[1], tri[2], (2.0, 1.0)]);
        straight(&mut inner, 0, 1);
        straight(&mut inner, 1, 2);
        straight(&mut inner, 2, 0);
        straight(&mut inner, 0, 3);
        let v = simple_cycle_criterion(&inner).unwrap();
        assert!(!v.admits_positive);
        assert_eq!(v.cycles, 1);

        let mut outer = vertices(&[tri[0], tri[1], tri[2], (-2.0, -1.0)]);
        straight(&mut outer, 0, 1);
        straight(&mut outer, 1, 2);
        straight(&mut outer, 2, 0);
        straight(&mut outer, 0, 3);
        let v = simple_cycle_criterion(&outer).unwrap();
        assert!(v.admits_positive);
        assert_eq!(v.support_forest, vec![3]);
    }

    #[test]
    fn theta_graph_fails() {
        let mut cg = vertices(&[(-1.0, 0.0), (1.0, 0.0), (0.0, 1.0), (0.0, -1.0)]);
        // three paths from -1 to 1: over the top, straight, under the bottom
        straight(&mut cg, 0, 2);
        straight(&mut cg, 2, 1);
        straight(&mut cg, 0, 1);
        straight(&mut cg, 0, 3);
        straight(&mut cg, 3, 1);
        let v = simple_cycle_criterion(&cg).unwrap();
        assert_eq!(v.cycles, 3);
        assert!(!v.admits_positive);
        assert!(v.support_forest.is_empty());
    }
}
