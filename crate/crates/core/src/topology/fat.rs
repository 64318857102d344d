use std::cmp::Ordering;

use super::{CriticalGraph, EdgeEnd, FatGraph, Flag, Orbit};
use crate::error::{Error, Result};
use crate::ext::Extended;

/// Fat graph of the component of `cg` containing `vertices`.
pub fn fat_graph(cg: &CriticalGraph, component: usize, vertices: &[usize]) -> FatGraph {
    let mut flags = Vec::new();
    let mut sigma1 = Vec::new();
    let mut edges = Vec::new();
    for e in &cg.edges {
        if !vertices.contains(&e.from) {
            continue;
        }
        edges.push(e.id);
        let f = flags.len();
        flags.push(Flag {
            vertex: e.from,
            edge: e.id,
            angle: e.from_angle,
        });
        match e.to {
            EdgeEnd::Vertex { vertex, angle, .. } => {
                flags.push(Flag {
                    vertex,
                    edge: e.id,
                    angle,
                });
                sigma1.push(Some(f + 1));
                sigma1.push(Some(f));
            }
            EdgeEnd::Pole { .. } => sigma1.push(None),
        }
    }
    let sigma0 = ccw_successors(&flags);
    let mut vs = vertices.to_vec();
    vs.sort_unstable();
    let mut fg = FatGraph {
        component,
        vertices: vs,
        edges,
        flags,
        sigma0,
        sigma1,
        orbits: Vec::new(),
    };
    fg.orbits = compute_orbits(&fg.sigma0, &fg.sigma1);
    let lengths = |edge: usize| cg.edges[edge].psi_length;
    set_orbit_lengths(&mut fg, lengths);
    fg
}

/// Fat graphs of all components, in component order.
pub fn fat_graphs(cg: &CriticalGraph) -> Vec<FatGraph> {
    cg.components()
        .iter()
        .enumerate()
        .map(|(i, vs)| fat_graph(cg, i, vs))
        .collect()
}

/// `sigma0`: next flag counterclockwise at the same vertex.
fn ccw_successors(flags: &[Flag]) -> Vec<usize> {
    let mut sigma0 = vec![0; flags.len()];
    let mut order: Vec<usize> = (0..flags.len()).collect();
    order.sort_by(|&a, &b| {
        flags[a]
            .vertex
            .cmp(&flags[b].vertex)
            .then(flags[a].angle.partial_cmp(&flags[b].angle).unwrap_or(Ordering::Equal))
            .then(a.cmp(&b))
    });
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && flags[order[j]].vertex == flags[order[i]].vertex {
            j += 1;
        }
        for k in i..j {
            let next = if k + 1 < j { k + 1 } else { i };
            sigma0[order[k]] = order[next];
        }
        i = j;
    }
    sigma0
}

/// Chains (from `sigma0(r)` for each open end `r`, in flag order) followed
/// by the cycles of `sigma0 . sigma1` on the remaining flags.
pub fn compute_orbits(sigma0: &[usize], sigma1: &[Option<usize>]) -> Vec<Orbit> {
    let n = sigma0.len();
    let mut seen = vec![false; n];
    let mut orbits = Vec::new();
    for r in 0..n {
        if sigma1[r].is_some() {
            continue;
        }
        let mut chain = Vec::new();
        let mut f = sigma0[r];
        loop {
            seen[f] = true;
            chain.push(f);
            match sigma1[f] {
                Some(g) => f = sigma0[g],
                None => break,
            }
        }
        orbits.push(Orbit {
            flags: chain,
            closed: false,
            psi_length: Extended::PosInfinity,
        });
    }
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let mut cycle = Vec::new();
        let mut f = start;
        while !seen[f] {
            seen[f] = true;
            cycle.push(f);
            f = sigma0[sigma1[f].expect("closed flags only")];
        }
        orbits.push(Orbit {
            flags: cycle,
            closed: true,
            psi_length: Extended::ZERO,
        });
    }
    orbits
}

fn set_orbit_lengths(fg: &mut FatGraph, length: impl Fn(usize) -> Extended) {
    for o in &mut fg.orbits {
        let mut total = Extended::ZERO;
        for &f in &o.flags {
            total = total.checked_add(length(fg.flags[f].edge)).unwrap_or(Extended::PosInfinity);
        }
        o.psi_length = total;
    }
}

impl FatGraph {
    /// Builds a fat graph from explicit permutations, validating them.
    pub fn from_permutations(
        component: usize,
        flags: Vec<Flag>,
        sigma0: Vec<usize>,
        sigma1: Vec<Option<usize>>,
    ) -> Result<FatGraph> {
        let n = flags.len();
        if sigma0.len() != n || sigma1.len() != n {
            return Err(Error::InvalidGraph("permutation sizes differ from the flag count".into()));
        }
        let mut hit = vec![false; n];
        for (f, &g) in sigma0.iter().enumerate() {
            if g >= n || hit[g] || flags[g].vertex != flags[f].vertex {
                return Err(Error::InvalidGraph(format!("sigma0 is not a vertex permutation at flag {f}")));
            }
            hit[g] = true;
        }
        for (f, &g) in sigma1.iter().enumerate() {
            if let Some(g) = g {
                if g >= n || g == f || sigma1[g] != Some(f) || flags[g].edge != flags[f].edge {
                    return Err(Error::InvalidGraph(format!("sigma1 is not an edge involution at flag {f}")));
                }
            }
        }
        let mut vertices: Vec<usize> = flags.iter().map(|f| f.vertex).collect();
        vertices.sort_unstable();
        vertices.dedup();
        let mut edges: Vec<usize> = flags.iter().map(|f| f.edge).collect();
        edges.sort_unstable();
        edges.dedup();
        let orbits = compute_orbits(&sigma0, &sigma1);
        Ok(FatGraph {
            component,
            vertices,
            edges,
            flags,
            sigma0,
            sigma1,
            orbits,
        })
    }

    /// Recomputes orbit lengths from per-edge lengths.
    pub fn with_edge_lengths(mut self, length: impl Fn(usize) -> Extended) -> FatGraph {
        set_orbit_lengths(&mut self, length);
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flag(vertex: usize, edge: usize, angle: f64) -> Flag {
        Flag { vertex, edge, angle }
    }

    #[test]
    fn single_segment() {
        let flags = vec![flag(0, 0, 3.0), flag(1, 0, 0.0)];
        let fg = FatGraph::from_permutations(0, flags, vec![0, 1], vec![Some(1), Some(0)]).unwrap();
        assert_eq!(fg.orbits.len(), 1);
        assert_eq!(fg.orbits[0].flags.len(), 2);
        assert_eq!(fg.euler_characteristic(), 2);
    }

    #[test]
    fn theta_graph_has_three_boundaries() {
        // vertex 0 at -1, vertex 1 at +1, edges leaving 0 at angles 1, 0, -1
        let flags = vec![
            flag(0, 0, 1.0),
            flag(1, 0, 2.0),
            flag(0, 1, 0.0),
            flag(1, 1, 3.0),
            flag(0, 2, 5.3),
            flag(1, 2, 4.3),
        ];
        let sigma0 = ccw_successors(&flags);
        let sigma1 = vec![Some(1), Some(0), Some(3), Some(2), Some(5), Some(4)];
        let fg = FatGraph::from_permutations(0, flags, sigma0, sigma1).unwrap();
        assert_eq!(fg.orbits.len(), 3);
        assert_eq!(fg.euler_characteristic(), 2);
    }

    #[test]
    fn loop_at_one_vertex() {
        let flags = vec![flag(0, 0, 0.0), flag(0, 0, 2.0)];
        let sigma0 = ccw_successors(&flags);
        let fg = FatGraph::from_permutations(0, flags, sigma0, vec![Some(1), Some(0)]).unwrap();
        let v = 1;
        let e = 1;
        let b = fg.orbits.len() as i64;
        assert_eq!(b, 2);
        assert_eq!(fg.euler_characteristic(), v - e + b);
        assert_eq!((v - e + b) % 2, 0);
    }

    #[test]
    fn rays_give_chains() {
        // a zero with three rays
        let flags = vec![flag(0, 0, 0.0), flag(0, 1, 2.1), flag(0, 2, 4.2)];
        let sigma0 = ccw_successors(&flags);
        let fg = FatGraph::from_permutations(0, flags, sigma0, vec![None, None, None]).unwrap();
        assert_eq!(fg.orbits.len(), 3);
        assert!(fg.orbits.iter().all(|o| !o.closed && o.flags.len() == 1));
        let (right, left) = fg.sides(0);
        assert_ne!(right, left);
        assert_eq!(fg.orbits[left].flags, vec![1]);
    }

    #[test]
    fn rejects_bad_permutations() {
        let flags = vec![flag(0, 0, 0.0), flag(1, 0, 0.0)];
        assert!(FatGraph::from_permutations(0, flags.clone(), vec![1, 0], vec![Some(1), Some(0)]).is_err());
        assert!(FatGraph::from_permutations(0, flags, vec![0, 1], vec![Some(1), None]).is_err());
    }
}
