use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::Orientation;
use crate::error::{Error, Result};
use crate::topology::{FatGraph, OrbitRef, ReebGraph};

/// "Reeb edge `edge` has `forward` orientation."
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Lit {
    pub edge: usize,
    pub forward: bool,
}

impl Lit {
    fn node(self) -> usize {
        2 * self.edge + (!self.forward) as usize
    }

    fn negate(self) -> Lit {
        Lit {
            edge: self.edge,
            forward: !self.forward,
        }
    }

    pub fn holds(self, o: &Orientation) -> bool {
        o.forward[self.edge] == self.forward
    }
}

/// `a or b`; a unit clause repeats its literal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Clause(pub Lit, pub Lit);

impl Clause {
    pub fn holds(&self, o: &Orientation) -> bool {
        self.0.holds(o) || self.1.holds(o)
    }
}

/// A variable forced both ways, with the strongly connected component of the
/// implication graph containing both of its literals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnsatCertificate {
    pub edge: usize,
    pub component: Vec<Lit>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TwoSat {
    Sat(Orientation),
    Unsat(UnsatCertificate),
}

/// Positivity clauses: every critical edge sees at least one of its two
/// sides oriented toward its own component. Edges ending at a simple pole
/// have the same boundary orbit on both sides, which makes their clause a
/// unit clause.
///
/// With `planar_measure`, circle edges at finite double poles are forced
/// toward the pole and the circle edge at infinity toward the critical
/// graph: the sign pattern of a positive compactly supported planar measure.
pub fn positivity_clauses(reeb: &ReebGraph, fats: &[FatGraph], planar_measure: bool) -> Result<Vec<Clause>> {
    let mut at: HashMap<OrbitRef, Lit> = HashMap::new();
    for e in &reeb.edges {
        if let Some(o) = e.head_orbit {
            at.insert(o, Lit { edge: e.id, forward: true });
        }
        if let Some(o) = e.tail_orbit {
            at.insert(o, Lit { edge: e.id, forward: false });
        }
    }
    let lit = |g: usize, orbit: usize| {
        at.get(&OrbitRef { fat_graph: g, orbit })
            .copied()
            .ok_or_else(|| Error::InvalidGraph(format!("boundary orbit {orbit} of fat graph {g} has no Reeb edge")))
    };
    let mut clauses = Vec::new();
    for (g, fg) in fats.iter().enumerate() {
        let mut seen = std::collections::HashSet::new();
        for (f, flag) in fg.flags.iter().enumerate() {
            if !seen.insert(flag.edge) {
                continue;
            }
            let (right, left) = fg.sides(f);
            let (a, b) = (lit(g, right)?, lit(g, left)?);
            clauses.push(if a <= b { Clause(a, b) } else { Clause(b, a) });
        }
    }
    if planar_measure {
        for e in &reeb.edges {
            if e.length.is_finite() {
                continue;
            }
            let leaf_at_head = reeb.vertices[e.head].is_leaf();
            let at_infinity = matches!(
                reeb.vertices[if leaf_at_head { e.head } else { e.tail }].kind,
                crate::topology::ReebVertexKind::Leaf { at_infinity: true, .. }
            );
            let forward = leaf_at_head != at_infinity;
            let l = Lit { edge: e.id, forward };
            clauses.push(Clause(l, l));
        }
    }
    clauses.sort();
    clauses.dedup();
    Ok(clauses)
}

/// Decides the positivity clause system of a Reeb graph.
pub fn positivity_2sat(reeb: &ReebGraph, fats: &[FatGraph]) -> Result<TwoSat> {
    let clauses = positivity_clauses(reeb, fats, false)?;
    Ok(solve(reeb.edges.len(), &clauses))
}

/// Implication graph and Tarjan's strongly connected components.
pub fn solve(vars: usize, clauses: &[Clause]) -> TwoSat {
    let n = 2 * vars;
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for Clause(a, b) in clauses {
        adj[a.negate().node()].push(b.node());
        adj[b.negate().node()].push(a.node());
    }
    let comp = tarjan(&adj);
    for v in 0..vars {
        if comp[2 * v] == comp[2 * v + 1] {
            let c = comp[2 * v];
            let component = (0..n)
                .filter(|&x| comp[x] == c)
                .map(|x| Lit {
                    edge: x / 2,
                    forward: x % 2 == 0,
                })
                .collect();
            return TwoSat::Unsat(UnsatCertificate { edge: v, component });
        }
    }
    // Tarjan numbers components in reverse topological order
    TwoSat::Sat(Orientation {
        forward: (0..vars).map(|v| comp[2 * v] < comp[2 * v + 1]).collect(),
    })
}

fn tarjan(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut comp = vec![usize::MAX; n];
    let mut stack = Vec::new();
    let mut counter = 0;
    let mut ncomp = 0;
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        let mut call: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut i)) = call.last_mut() {
            if *i < adj[v].len() {
                let w = adj[v][*i];
                *i += 1;
                if index[w] == usize::MAX {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(p, _)) = call.last() {
                    low[p] = low[p].min(low[v]);
                }
                if low[v] == index[v] {
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        comp[w] = ncomp;
                        if w == v {
                            break;
                        }
                    }
                    ncomp += 1;
                }
            }
        }
    }
    comp
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lit(edge: usize, forward: bool) -> Lit {
        Lit { edge, forward }
    }

    fn brute(vars: usize, clauses: &[Clause]) -> bool {
        (0..1u64 << vars).any(|m| {
            let o = Orientation::from_mask(m, vars);
            clauses.iter().all(|c| c.holds(&o))
        })
    }

    #[test]
    fn unit_and_binary() {
        let cs = [Clause(lit(0, true), lit(0, true)), Clause(lit(0, false), lit(1, true))];
        match solve(2, &cs) {
            TwoSat::Sat(o) => assert_eq!(o.forward, vec![true, true]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn contradiction() {
        let cs = [
            Clause(lit(0, true), lit(0, true)),
            Clause(lit(1, true), lit(1, true)),
            Clause(lit(0, false), lit(1, false)),
        ];
        match solve(2, &cs) {
            TwoSat::Unsat(c) => {
                assert!(c.component.contains(&lit(c.edge, true)) && c.component.contains(&lit(c.edge, false)))
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn agrees_with_enumeration() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..300 {
            let vars = rng.gen_range(1..7);
            let k = rng.gen_range(0..10);
            let cs: Vec<Clause> = (0..k)
                .map(|_| {
                    Clause(
                        lit(rng.gen_range(0..vars), rng.gen()),
                        lit(rng.gen_range(0..vars), rng.gen()),
                    )
                })
                .collect();
            match solve(vars, &cs) {
                TwoSat::Sat(o) => assert!(cs.iter().all(|c| c.holds(&o))),
                TwoSat::Unsat(_) => assert!(!brute(vars, &cs)),
            }
        }
    }
}
