//! Non-chaotic, Strebel, gradient and positive: the classification chain on
//! a metric Reeb graph.
//!
//! An [`Orientation`] gives every Reeb edge a direction; a potential grows by
//! the edge length along it. Positivity clauses say that a critical edge must
//! see at least one of its two sides oriented toward its own component.

mod cycles;
mod twosat;

pub use cycles::{point_in_polygon, simple_cycle_criterion, SimpleCycleVerdict, CYCLE_CAP};
pub use twosat::{positivity_2sat, positivity_clauses, Clause, Lit, TwoSat, UnsatCertificate};

use std::collections::HashSet;

use num_rational::Rational64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ext::Extended;
use crate::qd::{CriticalInventory, PointKind};
use crate::topology::{FatGraph, ReebGraph};
use crate::tracer::{recurrence_verdict, RecurrenceVerdict, TraceBudget, TrajectorySegment};

/// Default cycle-sum tolerance, relative to the largest finite length.
pub const COCYCLE_TOL: f64 = 1e-9;
/// Edge count up to which orientations are enumerated exhaustively.
pub const BRUTE_FORCE_EDGES: usize = 20;
pub const MAX_EDGES: usize = 30;

/// One direction per Reeb edge: `true` keeps `tail -> head`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Orientation {
    pub forward: Vec<bool>,
}

impl Orientation {
    pub fn all_forward(n: usize) -> Orientation {
        Orientation { forward: vec![true; n] }
    }

    pub fn from_mask(mask: u64, n: usize) -> Orientation {
        Orientation {
            forward: (0..n).map(|i| mask >> i & 1 == 0).collect(),
        }
    }

    /// Bit `i` set when edge `i` is reversed.
    pub fn mask(&self) -> u64 {
        self.forward
            .iter()
            .enumerate()
            .fold(0, |m, (i, &f)| if f { m } else { m | 1 << i })
    }

    /// `(source, target)` of edge `e` under this orientation.
    pub fn ends(&self, reeb: &ReebGraph, e: usize) -> (usize, usize) {
        let edge = &reeb.edges[e];
        if self.forward[e] {
            (edge.tail, edge.head)
        } else {
            (edge.head, edge.tail)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    /// Values on Reeb vertices; leaves sit at `+inf` or `-inf`.
    pub vertex_values: Vec<Extended>,
    pub orientation: Orientation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonChaotic {
    pub value: bool,
    /// Indices of recurrent-suspect segments.
    pub flagged: Vec<usize>,
}

pub fn is_nonchaotic(segments: &[TrajectorySegment], budget: &TraceBudget) -> NonChaotic {
    let flagged: Vec<usize> = segments
        .iter()
        .enumerate()
        .filter(|(_, s)| recurrence_verdict(s, budget) == RecurrenceVerdict::RecurrentSuspect)
        .map(|(i, _)| i)
        .collect();
    NonChaotic {
        value: flagged.is_empty(),
        flagged,
    }
}

/// Every domain is a ring or a circle.
pub fn is_strebel(reeb: &ReebGraph) -> bool {
    reeb.is_strebel()
}

/// Necessary conditions for a Strebel differential: no pole of order above
/// two, and a negative square residue at every double pole.
pub fn strebel_necessary(inv: &CriticalInventory) -> bool {
    inv.points.iter().all(|p| match p.kind {
        PointKind::HigherPole if p.order > 2 => false,
        PointKind::HigherPole => {
            let c = p.coefficient;
            c.re < 0.0 && c.im.abs() <= 1e-9 * c.norm()
        }
        _ => true,
    })
}

/// Finite edges and the fundamental cycles of a spanning forest of them.
struct CycleSystem {
    finite: Vec<usize>,
    infinite: Vec<usize>,
    /// Each cycle: `(edge, sign)` with `sign = +1` when the edge's forward
    /// direction agrees with the cycle's traversal.
    cycles: Vec<Vec<(usize, i8)>>,
}

fn cycle_system(reeb: &ReebGraph) -> CycleSystem {
    let n = reeb.vertices.len();
    let finite: Vec<usize> = reeb.finite_edges().map(|e| e.id).collect();
    let infinite: Vec<usize> = reeb.edges.iter().filter(|e| !e.length.is_finite()).map(|e| e.id).collect();
    // BFS forest, parent edge per vertex
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for &e in &finite {
        let edge = &reeb.edges[e];
        adj[edge.tail].push((e, edge.head));
        adj[edge.head].push((e, edge.tail));
    }
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; n];
    let mut depth = vec![usize::MAX; n];
    let mut tree = HashSet::new();
    for root in 0..n {
        if depth[root] != usize::MAX {
            continue;
        }
        depth[root] = 0;
        let mut queue = std::collections::VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            for &(e, w) in &adj[v] {
                if depth[w] == usize::MAX {
                    depth[w] = depth[v] + 1;
                    parent[w] = Some((e, v));
                    tree.insert(e);
                    queue.push_back(w);
                }
            }
        }
    }
    let mut cycles = Vec::new();
    for &e in &finite {
        if tree.contains(&e) {
            continue;
        }
        let edge = &reeb.edges[e];
        // traverse e from tail to head, then back through the tree
        let mut cyc = vec![(e, 1i8)];
        let (mut a, mut b) = (edge.head, edge.tail);
        let mut from_a = Vec::new();
        let mut from_b = Vec::new();
        while a != b {
            if depth[a] >= depth[b] {
                let (pe, pv) = parent[a].unwrap();
                // walking a -> pv
                let sign = if reeb.edges[pe].tail == a { 1 } else { -1 };
                from_a.push((pe, sign));
                a = pv;
            } else {
                let (pe, pv) = parent[b].unwrap();
                // the cycle walks pv -> b
                let sign = if reeb.edges[pe].tail == pv { 1 } else { -1 };
                from_b.push((pe, sign));
                b = pv;
            }
        }
        cyc.extend(from_a);
        cyc.extend(from_b.into_iter().rev());
        cycles.push(cyc);
    }
    CycleSystem {
        finite,
        infinite,
        cycles,
    }
}

/// Length comparison: exact when every edge of the graph carries an exact
/// length, otherwise floating point with tolerance `tol * max_length`.
struct Metric {
    exact: Option<Vec<Rational64>>,
    lengths: Vec<f64>,
    tol: f64,
}

impl Metric {
    fn new(reeb: &ReebGraph, tol: f64) -> Metric {
        let exact = reeb
            .edges
            .iter()
            .map(|e| if e.length.is_finite() { e.exact_length } else { Some(Rational64::from_integer(0)) })
            .collect::<Option<Vec<_>>>();
        Metric {
            exact,
            lengths: reeb.edges.iter().map(|e| e.length.finite().unwrap_or(0.0)).collect(),
            tol: tol * reeb.max_length(),
        }
    }

    /// Does the cycle sum vanish when edge `e` is walked with sign `s(e)`?
    fn balanced(&self, cycle: &[(usize, i8)], forward: impl Fn(usize) -> bool) -> bool {
        let dir = |e: usize, sign: i8| if forward(e) { sign as i64 } else { -(sign as i64) };
        match &self.exact {
            Some(ex) => {
                let mut sum = Rational64::from_integer(0);
                for &(e, s) in cycle {
                    sum += ex[e] * Rational64::from_integer(dir(e, s));
                }
                sum == Rational64::from_integer(0)
            }
            None => {
                let sum: f64 = cycle.iter().map(|&(e, s)| self.lengths[e] * dir(e, s) as f64).sum();
                sum.abs() <= self.tol
            }
        }
    }
}

/// All gradient orientations: cycle sums of signed lengths vanish.
/// Infinite edges are free and contribute both directions.
pub fn gradient_orientations(reeb: &ReebGraph) -> Result<Vec<Orientation>> {
    gradient_orientations_tol(reeb, COCYCLE_TOL)
}

pub fn gradient_orientations_tol(reeb: &ReebGraph, tol: f64) -> Result<Vec<Orientation>> {
    let m = reeb.edges.len();
    if m > MAX_EDGES {
        return Err(Error::TooLarge(m));
    }
    for e in reeb.finite_edges() {
        if e.length.finite().unwrap() <= 0.0 {
            return Err(Error::ZeroLengthEdge(e.id));
        }
    }
    let sys = cycle_system(reeb);
    let metric = Metric::new(reeb, tol);
    let finite_masks = if sys.finite.len() <= BRUTE_FORCE_EDGES {
        brute_force(&sys, &metric)
    } else {
        backtrack(&sys, &metric)
    };
    let mut out = Vec::new();
    let k = sys.infinite.len();
    for &fm in &finite_masks {
        for bits in 0..(1u64 << k) {
            let mut mask = fm;
            for (j, &e) in sys.infinite.iter().enumerate() {
                if bits >> j & 1 == 1 {
                    mask |= 1 << e;
                }
            }
            out.push(Orientation::from_mask(mask, m));
        }
    }
    out.sort_by_key(|o| o.mask());
    Ok(out)
}

fn brute_force(sys: &CycleSystem, metric: &Metric) -> Vec<u64> {
    let f = sys.finite.len();
    (0..(1u64 << f))
        .filter_map(|bits| {
            let mut mask = 0u64;
            for (j, &e) in sys.finite.iter().enumerate() {
                if bits >> j & 1 == 1 {
                    mask |= 1 << e;
                }
            }
            sys.cycles
                .iter()
                .all(|c| metric.balanced(c, |e| mask >> e & 1 == 0))
                .then_some(mask)
        })
        .collect()
}

/// Depth-first assignment over finite edges, checking each cycle as soon
/// as its last edge is assigned.
fn backtrack(sys: &CycleSystem, metric: &Metric) -> Vec<u64> {
    let order = &sys.finite;
    let pos: std::collections::HashMap<usize, usize> = order.iter().enumerate().map(|(i, &e)| (e, i)).collect();
    let mut due: Vec<Vec<usize>> = vec![Vec::new(); order.len()];
    for (c, cyc) in sys.cycles.iter().enumerate() {
        let last = cyc.iter().map(|(e, _)| pos[e]).max().unwrap();
        due[last].push(c);
    }
    let mut out = Vec::new();
    fn go(i: usize, mask: u64, order: &[usize], due: &[Vec<usize>], sys: &CycleSystem, metric: &Metric, out: &mut Vec<u64>) {
        if i == order.len() {
            out.push(mask);
            return;
        }
        for flip in [false, true] {
            let m = if flip { mask | 1 << order[i] } else { mask };
            if due[i].iter().all(|&c| metric.balanced(&sys.cycles[c], |e| m >> e & 1 == 0)) {
                go(i + 1, m, order, due, sys, metric, out);
            }
        }
    }
    go(0, 0, order, &due, sys, metric, &mut out);
    out
}

/// Integrates an orientation along a spanning forest; values grow by the
/// edge length from source to target. Each connected piece is normalized to
/// minimum 0 over its non-leaf vertices.
pub fn integrate_potential(reeb: &ReebGraph, o: &Orientation) -> Result<Potential> {
    integrate_potential_tol(reeb, o, COCYCLE_TOL)
}

pub fn integrate_potential_tol(reeb: &ReebGraph, o: &Orientation, tol: f64) -> Result<Potential> {
    let n = reeb.vertices.len();
    let mut value: Vec<Option<f64>> = vec![None; n];
    let mut adj: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); n];
    for e in reeb.finite_edges() {
        let (s, t) = o.ends(reeb, e.id);
        let l = e.length.finite().unwrap();
        adj[s].push((e.id, t, l));
        adj[t].push((e.id, s, -l));
    }
    let limit = tol * reeb.max_length();
    let mut pieces: Vec<Vec<usize>> = Vec::new();
    for root in 0..n {
        if value[root].is_some() || reeb.vertices[root].is_leaf() {
            continue;
        }
        value[root] = Some(0.0);
        let mut piece = vec![root];
        let mut stack = vec![root];
        while let Some(v) = stack.pop() {
            for &(_, w, d) in &adj[v] {
                let want = value[v].unwrap() + d;
                match value[w] {
                    None => {
                        value[w] = Some(want);
                        piece.push(w);
                        stack.push(w);
                    }
                    Some(have) if (have - want).abs() > limit => {
                        return Err(Error::InconsistentCocycle(have - want));
                    }
                    _ => {}
                }
            }
        }
        pieces.push(piece);
    }
    for piece in &pieces {
        let min = piece.iter().map(|&v| value[v].unwrap()).fold(f64::INFINITY, f64::min);
        for &v in piece {
            value[v] = value[v].map(|x| x - min);
        }
    }
    let mut out: Vec<Extended> = value.iter().map(|v| v.map_or(Extended::ZERO, Extended::Finite)).collect();
    for e in &reeb.edges {
        if e.length.is_finite() {
            continue;
        }
        let (s, t) = o.ends(reeb, e.id);
        let leaf = if reeb.vertices[t].is_leaf() { t } else { s };
        out[leaf] = if leaf == t { Extended::PosInfinity } else { Extended::NegInfinity };
    }
    Ok(Potential {
        vertex_values: out,
        orientation: o.clone(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialCount {
    /// Gradient orientations, leaf edges counted in both directions.
    pub with_leaf_bits: u64,
    /// The same count with the leaf-edge directions factored out.
    pub without_leaf_bits: u64,
    /// The set is a coset of a subgroup of the flip group.
    pub flip_closed: bool,
}

/// Number of potentials; always 0 or a power of two.
pub fn count_potentials(reeb: &ReebGraph) -> Result<PotentialCount> {
    count_potentials_tol(reeb, COCYCLE_TOL)
}

pub fn count_potentials_tol(reeb: &ReebGraph, tol: f64) -> Result<PotentialCount> {
    let all = gradient_orientations_tol(reeb, tol)?;
    let n = all.len() as u64;
    let leaf_edges = reeb.edges.iter().filter(|e| !e.length.is_finite()).count();
    let flip_closed = coset_closed(&all);
    debug_assert!(n == 0 || n.is_power_of_two());
    Ok(PotentialCount {
        with_leaf_bits: n,
        without_leaf_bits: n >> leaf_edges,
        flip_closed,
    })
}

/// `{a ^ a0}` closed under xor, for any fixed `a0` of the set.
fn coset_closed(set: &[Orientation]) -> bool {
    let masks: Vec<u64> = set.iter().map(|o| o.mask()).collect();
    let Some(&a0) = masks.first() else { return true };
    let group: HashSet<u64> = masks.iter().map(|m| m ^ a0).collect();
    let elems: Vec<u64> = group.iter().copied().collect();
    let stride = (elems.len() / 64).max(1);
    for x in elems.iter().step_by(stride) {
        for y in &elems {
            if !group.contains(&(x ^ y)) {
                return false;
            }
        }
    }
    true
}

/// Incoming minus outgoing widths at vertex `alpha`.
pub fn component_mass(reeb: &ReebGraph, o: &Orientation, alpha: usize) -> Result<Extended> {
    let mut mass = Extended::ZERO;
    for e in &reeb.edges {
        let (s, t) = o.ends(reeb, e.id);
        if t == alpha {
            mass = mass.checked_add(e.width)?;
        }
        if s == alpha {
            mass = mass.checked_sub(e.width)?;
        }
    }
    Ok(mass)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassReport {
    pub vertex: usize,
    pub mass: Extended,
    /// Incoming width at least the outgoing width.
    pub nonnegative: bool,
}

/// Masses of all component vertices; ∞ - ∞ is reported as an error.
pub fn mass_report(reeb: &ReebGraph, o: &Orientation) -> Result<Vec<MassReport>> {
    reeb.components()
        .map(|v| {
            let mass = component_mass(reeb, o, v.id)?;
            Ok(MassReport {
                vertex: v.id,
                mass,
                nonnegative: mass >= Extended::ZERO,
            })
        })
        .collect()
}

/// Is the finite part of the Reeb graph a forest?
pub fn finite_part_is_forest(reeb: &ReebGraph) -> bool {
    cycle_system(reeb).cycles.is_empty()
}

/// A positive gradient orientation if one exists: the 2-SAT solution when
/// the Reeb graph has no cycles, otherwise the first gradient orientation
/// satisfying every clause.
pub fn positive_gradient(reeb: &ReebGraph, clauses: &[Clause], tol: f64) -> Result<Option<Orientation>> {
    let sat = twosat::solve(reeb.edges.len(), clauses);
    let TwoSat::Sat(o) = sat else { return Ok(None) };
    if finite_part_is_forest(reeb) {
        return Ok(Some(o));
    }
    Ok(gradient_orientations_tol(reeb, tol)?
        .into_iter()
        .find(|o| clauses.iter().all(|c| c.holds(o))))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub non_chaotic: NonChaotic,
    pub strebel: bool,
    /// Local necessary conditions for Strebel, when the analytic
    /// inventory is known.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strebel_necessary: Option<bool>,
    pub gradient: bool,
    /// `None` when no fat graphs were available for the clause system.
    pub positive: Option<bool>,
    pub potentials: PotentialCount,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub potential: Option<Potential>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub positive_orientation: Option<Orientation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unsat: Option<UnsatCertificate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub masses: Option<Vec<MassReport>>,
}

/// Runs the whole chain on a Reeb graph with its fat graphs.
pub fn classify(
    reeb: &ReebGraph,
    fats: Option<&[FatGraph]>,
    non_chaotic: NonChaotic,
    inv: Option<&CriticalInventory>,
    tol: f64,
) -> Result<Verdict> {
    let potentials = count_potentials_tol(reeb, tol)?;
    let gradient = non_chaotic.value && potentials.with_leaf_bits > 0;
    let potential = if gradient {
        let first = gradient_orientations_tol(reeb, tol)?.into_iter().next().unwrap();
        Some(integrate_potential_tol(reeb, &first, tol)?)
    } else {
        None
    };
    let (positive, positive_orientation, unsat, masses) = match fats {
        Some(fats) if non_chaotic.value => {
            let clauses = positivity_clauses(reeb, fats, false)?;
            let unsat = match twosat::solve(reeb.edges.len(), &clauses) {
                TwoSat::Unsat(c) => Some(c),
                TwoSat::Sat(_) => None,
            };
            let pos = if gradient { positive_gradient(reeb, &clauses, tol)? } else { None };
            let masses = pos.as_ref().map(|o| mass_report(reeb, o)).transpose().ok().flatten();
            (Some(pos.is_some()), pos, unsat, masses)
        }
        Some(_) => (Some(false), None, None, None),
        None => (None, None, None, None),
    };
    Ok(Verdict {
        strebel: non_chaotic.value && is_strebel(reeb),
        strebel_necessary: inv.map(strebel_necessary),
        non_chaotic,
        gradient,
        positive,
        potentials,
        potential,
        positive_orientation,
        unsat,
        masses,
    })
}
