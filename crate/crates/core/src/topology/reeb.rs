use num_complex::Complex64;
use rayon::prelude::*;

use super::{CriticalGraph, DomainKind, FatGraph, OrbitRef, ReebEdge, ReebGraph, ReebVertex, ReebVertexKind};
use crate::error::{Error, Result};
use crate::ext::Extended;
use crate::qd::PointKind;
use crate::tracer::{Anchor, TraceKind, Tracer, TrajectorySegment, HIT_FACTOR};

/// Fractions of an edge at which a transversal probe is tried, in order.
const PROBE_FRACTIONS: [f64; 5] = [0.37, 0.61, 0.23, 0.79, 0.51];
/// Relative agreement of the two probes of one domain.
const PROBE_TOL: f64 = 1e-6;

/// Polylines of all critical edges with bounding boxes, for crossing tests.
struct Barrier {
    lines: Vec<(usize, [f64; 4], Vec<Complex64>)>,
}

fn cross(a: Complex64, b: Complex64) -> f64 {
    a.re * b.im - a.im * b.re
}

impl Barrier {
    fn new(cg: &CriticalGraph) -> Barrier {
        let lines = cg
            .edges
            .iter()
            .map(|e| {
                let pts: Vec<Complex64> = e.points().collect();
                let mut bb = [f64::MAX, f64::MAX, f64::MIN, f64::MIN];
                for p in &pts {
                    bb = [bb[0].min(p.re), bb[1].min(p.im), bb[2].max(p.re), bb[3].max(p.im)];
                }
                (e.id, bb, pts)
            })
            .collect();
        Barrier { lines }
    }

    /// First crossing of the chord `p0 -> p1`: tag `2 * edge + left` and
    /// the chord fraction. `left` tells that `p0` lies to the left of the
    /// edge's polyline direction.
    fn crossing(&self, p0: Complex64, p1: Complex64) -> Option<(usize, f64)> {
        let r = p1 - p0;
        let mut best: Option<(usize, f64)> = None;
        for (edge, bb, pts) in &self.lines {
            if p0.re.max(p1.re) < bb[0] || p0.re.min(p1.re) > bb[2] || p0.im.max(p1.im) < bb[1] || p0.im.min(p1.im) > bb[3] {
                continue;
            }
            for w in pts.windows(2) {
                let (a, b) = (w[0], w[1]);
                let q = b - a;
                let den = cross(r, q);
                if den.abs() < 1e-300 {
                    continue;
                }
                let u = cross(a - p0, q) / den;
                let v = cross(a - p0, r) / den;
                if u <= 1e-9 || u > 1.0 || !(0.0..=1.0).contains(&v) {
                    continue;
                }
                if best.is_none_or(|(_, bu)| u < bu) {
                    let left = cross(q, p0 - a) > 0.0;
                    best = Some((2 * edge + left as usize, u));
                }
            }
        }
        best
    }
}

/// What a transversal probe out of one boundary orbit found.
#[derive(Debug)]
struct OrbitProbe {
    /// Orbit on the far side, or the pole the probe ran into.
    far: Far,
    length: Extended,
    /// Length of the closed horizontal probe, if it closed.
    width: Option<f64>,
}

#[derive(Debug)]
enum Far {
    Orbit(OrbitRef),
    Pole(usize),
}

struct Context<'t, 'a> {
    tracer: &'t Tracer<'a>,
    cg: &'t CriticalGraph,
    fats: &'t [FatGraph],
    barrier: Barrier,
    /// For every critical edge: fat graph and its flag at `from`.
    edge_flag: Vec<(usize, usize)>,
}

impl<'t, 'a> Context<'t, 'a> {
    fn side_orbit(&self, edge: usize, left: bool) -> OrbitRef {
        let (g, f) = self.edge_flag[edge];
        let (right, l) = self.fats[g].sides(f);
        OrbitRef {
            fat_graph: g,
            orbit: if left { l } else { right },
        }
    }

    fn segment(&self, edge: usize) -> Result<&TrajectorySegment> {
        self.cg.edges[edge]
            .segment
            .as_ref()
            .ok_or_else(|| Error::InvalidGraph(format!("critical edge {edge} carries no traced segment")))
    }

    fn new(tracer: &'t Tracer<'a>, cg: &'t CriticalGraph, fats: &'t [FatGraph]) -> Self {
        let mut edge_flag = vec![(usize::MAX, usize::MAX); cg.edges.len()];
        for (g, fg) in fats.iter().enumerate() {
            for (f, flag) in fg.flags.iter().enumerate() {
                if cg.edges[flag.edge].from == flag.vertex && edge_flag[flag.edge].0 == usize::MAX {
                    edge_flag[flag.edge] = (g, f);
                }
            }
        }
        Context {
            tracer,
            cg,
            fats,
            barrier: Barrier::new(cg),
            edge_flag,
        }
    }

    fn probe(&self, at: OrbitRef) -> Result<OrbitProbe> {
        self.along_orbit(at, |z, s, edge| self.probe_from(z, s, edge))
    }

    /// Runs `f(z, s_vert, edge)` from interior points of an edge of the
    /// orbit until it returns a value; `s_vert` points into the domain.
    fn along_orbit<T>(
        &self,
        at: OrbitRef,
        f: impl Fn(Complex64, Complex64, usize) -> Result<Option<T>>,
    ) -> Result<T> {
        let fg = &self.fats[at.fat_graph];
        let orbit = &fg.orbits[at.orbit];
        let rep = orbit
            .flags
            .iter()
            .copied()
            .find(|&f| fg.sigma1[f].is_some())
            .unwrap_or(orbit.flags[0]);
        let edge = fg.flags[rep].edge;
        let seg = self.segment(edge)?;
        let at_from = self.edge_flag[edge].1 == rep;
        let [a, b] = seg.ode_range;
        let target = if self.cg.edges[edge].is_ray() {
            seg.samples[b].t
        } else {
            seg.psi_length
        };
        let mut last_err = None;
        for frac in PROBE_FRACTIONS {
            let t = frac * target;
            let k = (a..=b)
                .min_by(|&i, &j| (seg.samples[i].t - t).abs().total_cmp(&(seg.samples[j].t - t).abs()))
                .unwrap();
            let sample = seg.samples[k];
            // the domain lies to the right of the flag's direction of travel
            let s_vert = if at_from { -sample.s } else { sample.s };
            match f(sample.z, s_vert, edge) {
                Ok(Some(p)) => return Ok(p),
                Ok(None) => continue,
                Err(e) => last_err = Some(e),
            }
        }
        Err(last_err.unwrap_or_else(|| {
            Error::ProbeInconsistency(format!("every transversal probe from critical edge {edge} hit a critical point"))
        }))
    }

    fn vertical(&self, z: Complex64, s_vert: Complex64, edge: usize) -> Result<Option<TrajectorySegment>> {
        let stop = |p0: Complex64, p1: Complex64| self.barrier.crossing(p0, p1);
        let vseg = self.tracer.trace_until(TraceKind::Vertical, z, s_vert, Some(&stop))?;
        match vseg.end {
            Anchor::Crossing { .. } | Anchor::InfiniteCritical { .. } => Ok(Some(vseg)),
            Anchor::FiniteCritical { .. } => Ok(None),
            Anchor::Recurrence => Err(Error::ChaoticInput(vec![edge])),
            ref other => Err(Error::ProbeInconsistency(format!(
                "transversal probe from critical edge {edge} ended with {other:?}"
            ))),
        }
    }

    /// Horizontal trajectory through the point at Psi-length `offset` along
    /// a vertical probe.
    fn horizontal_at(&self, vseg: &TrajectorySegment, s_vert: Complex64, offset: f64) -> Result<TrajectorySegment> {
        let zp = self.tracer.point_at(vseg, offset);
        let sp = self
            .tracer
            .sqrt_near(zp, s_vert)
            .ok_or_else(|| Error::BranchContinuationFailure(format!("{zp}")))?;
        self.tracer.trace_until(TraceKind::Horizontal, zp, sp, None)
    }

    fn probe_from(&self, z: Complex64, s_vert: Complex64, edge: usize) -> Result<Option<OrbitProbe>> {
        let Some(vseg) = self.vertical(z, s_vert, edge)? else { return Ok(None) };
        let (far, length) = match vseg.end {
            Anchor::Crossing { tag } => {
                let (e2, left) = (tag / 2, tag % 2 == 1);
                (Far::Orbit(self.side_orbit(e2, left)), Extended::Finite(self.crossing_length(&vseg, e2)?))
            }
            Anchor::InfiniteCritical { id } => (Far::Pole(id), Extended::PosInfinity),
            _ => unreachable!(),
        };
        let end_t = vseg.samples.last().unwrap().t;
        let first = self.cg.edges[edge].from;
        let delta = self.tracer.launch_offset(self.cg.vertices[first].point);
        let offset = (HIT_FACTOR * delta * s_vert.norm()).min(0.5 * end_t);
        let hseg = self.horizontal_at(&vseg, s_vert, offset)?;
        let width = match hseg.end {
            Anchor::ClosureToStart => Some(hseg.psi_length),
            Anchor::Recurrence => return Err(Error::ChaoticInput(vec![edge])),
            _ => None,
        };
        Ok(Some(OrbitProbe { far, length, width }))
    }

    /// Canonical height of a vertical segment that stopped on edge `e2`:
    /// the imaginary part of `w` from the last sample before the crossing
    /// to the nearest point of `e2`, added to the traced length.
    fn crossing_length(&self, vseg: &TrajectorySegment, e2: usize) -> Result<f64> {
        let n = vseg.samples.len();
        let before = vseg.samples[n.saturating_sub(2)];
        let hit = vseg.samples[n - 1].z;
        let q = self.cg.edges[e2]
            .points()
            .min_by(|a, b| (a - hit).norm().total_cmp(&(b - hit).norm()))
            .unwrap();
        let dw = self
            .tracer
            .w_along_chord(before.z, before.s, q)
            .ok_or_else(|| Error::BranchContinuationFailure(format!("{q}")))?;
        Ok(before.t + dw.im)
    }
}

/// Builds the metric Reeb graph by probing every boundary orbit of every
/// fat graph with a vertical trajectory (for the far side and the length)
/// and a horizontal one (closed or not, and the width).
pub fn build_reeb(tracer: &Tracer<'_>, cg: &CriticalGraph, fats: &[FatGraph]) -> Result<ReebGraph> {
    if cg.vertices.is_empty() {
        return Err(Error::NoFiniteCritical);
    }
    let ctx = Context::new(tracer, cg, fats);
    let orbits: Vec<OrbitRef> = fats
        .iter()
        .enumerate()
        .flat_map(|(g, fg)| (0..fg.orbits.len()).map(move |o| OrbitRef { fat_graph: g, orbit: o }))
        .collect();
    let probes: Vec<OrbitProbe> = orbits.par_iter().map(|&o| ctx.probe(o)).collect::<Result<_>>()?;
    let slot = |r: OrbitRef| orbits.iter().position(|&o| o == r).unwrap();

    let mut vertices: Vec<ReebVertex> = fats
        .iter()
        .enumerate()
        .map(|(i, fg)| ReebVertex {
            id: i,
            kind: ReebVertexKind::Component {
                critical_vertices: fg.vertices.clone(),
                critical_edges: fg.edges.clone(),
            },
        })
        .collect();
    let mut edges: Vec<ReebEdge> = Vec::new();
    let mut done = vec![false; orbits.len()];
    let inv = tracer.inventory();
    for (i, &a) in orbits.iter().enumerate() {
        if done[i] {
            continue;
        }
        done[i] = true;
        let closed = fats[a.fat_graph].orbits[a.orbit].closed;
        let probe = &probes[i];
        if closed != probe.width.is_some() {
            return Err(Error::ProbeInconsistency(format!(
                "boundary orbit {} of component {} is {} but its probe is {}",
                a.orbit,
                a.fat_graph,
                if closed { "closed" } else { "open" },
                if probe.width.is_some() { "closed" } else { "open" },
            )));
        }
        match probe.far {
            Far::Orbit(b) => {
                let j = slot(b);
                let back = &probes[j];
                let agree = matches!(back.far, Far::Orbit(r) if r == a)
                    && close(back.length, probe.length)
                    && back.width.zip(probe.width).is_none_or(|(x, y)| (x - y).abs() <= PROBE_TOL * x.max(y));
                if done[j] || !agree || fats[b.fat_graph].orbits[b.orbit].closed != closed {
                    return Err(Error::ProbeInconsistency(format!(
                        "probes across the domain between orbits {:?} and {:?} disagree",
                        (a.fat_graph, a.orbit),
                        (b.fat_graph, b.orbit)
                    )));
                }
                done[j] = true;
                let length = match (probe.length, back.length) {
                    (Extended::Finite(x), Extended::Finite(y)) => Extended::Finite(0.5 * (x + y)),
                    (l, _) => l,
                };
                edges.push(ReebEdge {
                    id: edges.len(),
                    kind: if closed { DomainKind::Ring } else { DomainKind::Strip },
                    tail: a.fat_graph,
                    head: b.fat_graph,
                    length,
                    width: probe.width.map_or(Extended::PosInfinity, Extended::Finite),
                    exact_length: None,
                    tail_orbit: Some(a),
                    head_orbit: Some(b),
                });
            }
            Far::Pole(pole) => {
                let point = inv.point(pole);
                if closed && (point.kind != PointKind::HigherPole || point.order != 2) {
                    return Err(Error::ProbeInconsistency(format!(
                        "closed orbit {} of component {} faces a pole of order {}",
                        a.orbit, a.fat_graph, point.order
                    )));
                }
                let leaf = vertices.len();
                vertices.push(ReebVertex {
                    id: leaf,
                    kind: ReebVertexKind::Leaf {
                        pole: Some(pole),
                        at_infinity: point.location.is_infinity(),
                    },
                });
                edges.push(ReebEdge {
                    id: edges.len(),
                    kind: if closed { DomainKind::Circle } else { DomainKind::End },
                    tail: a.fat_graph,
                    head: leaf,
                    length: Extended::PosInfinity,
                    width: probe.width.map_or(Extended::PosInfinity, Extended::Finite),
                    exact_length: None,
                    tail_orbit: Some(a),
                    head_orbit: None,
                });
            }
        }
    }
    let reeb = ReebGraph { vertices, edges };
    reeb.validate()?;
    Ok(reeb)
}

/// A closed horizontal trajectory inside the ring or circle domain bounded
/// by orbit `at`, reached by a vertical probe that stops at `depth` (a
/// fraction in `(0, 1)`) of its way across.
pub fn orbit_contour(
    tracer: &Tracer<'_>,
    cg: &CriticalGraph,
    fats: &[FatGraph],
    at: OrbitRef,
    depth: f64,
) -> Result<TrajectorySegment> {
    let ctx = Context::new(tracer, cg, fats);
    ctx.along_orbit(at, |z, s_vert, edge| {
        let Some(vseg) = ctx.vertical(z, s_vert, edge)? else { return Ok(None) };
        let end_t = vseg.samples.last().unwrap().t;
        let hseg = ctx.horizontal_at(&vseg, s_vert, depth * end_t)?;
        match hseg.end {
            Anchor::ClosureToStart => Ok(Some(hseg)),
            ref other => Err(Error::ProbeInconsistency(format!(
                "horizontal trajectory across from critical edge {edge} ended with {other:?}"
            ))),
        }
    })
}

fn close(a: Extended, b: Extended) -> bool {
    match (a, b) {
        (Extended::Finite(x), Extended::Finite(y)) => (x - y).abs() <= PROBE_TOL * x.abs().max(y.abs()),
        (x, y) => x == y,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qd::RationalQD;
    use crate::topology::{build_critical_graph, fat_graphs};
    use crate::tracer::TraceBudget;
    use std::f64::consts::PI;

    fn reeb(num: &str, den: &str, sign: f64) -> Result<(CriticalGraph, Vec<FatGraph>, ReebGraph)> {
        let qd = RationalQD::from_exprs(num, den, sign).unwrap();
        let tr = Tracer::new(&qd, TraceBudget::default()).unwrap();
        let cg = build_critical_graph(&tr, tr.launch_all()?)?;
        let fats = fat_graphs(&cg);
        let rg = build_reeb(&tr, &cg, &fats)?;
        Ok((cg, fats, rg))
    }

    #[test]
    fn arcsine_reeb() {
        let (_, fats, rg) = reeb("1", "z^2 - 1", -1.0).unwrap();
        assert_eq!(fats.len(), 1);
        assert_eq!(rg.vertices.len(), 2);
        assert_eq!(rg.edges.len(), 1);
        let e = &rg.edges[0];
        assert_eq!(e.kind, DomainKind::Circle);
        assert_eq!(e.length, Extended::PosInfinity);
        assert!((e.width.finite().unwrap() - 2.0 * PI).abs() < 1e-6);
        assert!(matches!(rg.vertices[1].kind, ReebVertexKind::Leaf { at_infinity: true, .. }));
    }

    #[test]
    fn cubic_has_end_domains() {
        let (_, _, rg) = reeb("z", "1", 1.0).unwrap();
        assert_eq!(rg.components().count(), 1);
        assert_eq!(rg.edges.len(), 3);
        assert!(rg.edges.iter().all(|e| e.kind == DomainKind::End && e.length == Extended::PosInfinity));
    }

    #[test]
    fn no_finite_critical() {
        assert!(matches!(reeb("1", "z^2", -1.0), Err(Error::NoFiniteCritical)));
    }

    #[test]
    fn nested_rings() {
        // zeros at +-1/2, poles at +-1, +-2: three segments on the real line
        let (cg, _, rg) = reeb("z^2 - 0.25", "(z^2 - 1)(z^2 - 4)", -1.0).unwrap();
        assert_eq!(cg.components().len(), rg.components().count());
        let rings: Vec<_> = rg.edges.iter().filter(|e| e.kind == DomainKind::Ring).collect();
        assert!(!rings.is_empty(), "{:#?}", rg.edges);
        for e in &rg.edges {
            assert!(matches!(e.kind, DomainKind::Ring | DomainKind::Circle));
        }
    }
}
