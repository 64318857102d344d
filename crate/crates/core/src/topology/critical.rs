use std::collections::HashMap;

use super::{CgEdge, CgVertex, CriticalGraph, EdgeEnd};
use crate::error::{Error, Result};
use crate::ext::Extended;
use crate::qd::{directions_for, Location, PointKind};
use crate::tracer::{recurrence_verdict, Anchor, RecurrenceVerdict, Tracer, TrajectorySegment};

/// Relative agreement required of an edge traced from both ends.
pub const GLUE_LENGTH_TOL: f64 = 1e-6;
/// Positional agreement, relative to the feature scale.
pub const GLUE_DISTANCE_TOL: f64 = 1e-5;

/// Assembles the critical graph from the segments of
/// [`Tracer::launch_all`], indexed `(point id, direction index, segment)`.
pub fn build_critical_graph(
    tracer: &Tracer<'_>,
    launched: Vec<(usize, usize, TrajectorySegment)>,
) -> Result<CriticalGraph> {
    let inv = tracer.inventory();
    let inf = inv.infinity();
    if inf.kind != PointKind::HigherPole {
        return Err(Error::UnsupportedInfinity(tracer.qd().order_at_infinity()));
    }
    let mut vertex_of = HashMap::new();
    let mut vertices = Vec::new();
    for p in inv.finite_critical() {
        let Location::Finite(location) = p.location else { continue };
        vertex_of.insert(p.id, vertices.len());
        vertices.push(CgVertex {
            point: p.id,
            location,
            kind: p.kind,
            order: p.order,
        });
    }

    let chaotic: Vec<usize> = launched
        .iter()
        .enumerate()
        .filter(|(_, (_, _, s))| recurrence_verdict(s, tracer.budget()) == RecurrenceVerdict::RecurrentSuspect)
        .map(|(i, _)| i)
        .collect();
    if !chaotic.is_empty() {
        return Err(Error::ChaoticInput(chaotic));
    }

    let index: HashMap<(usize, usize), usize> =
        launched.iter().enumerate().map(|(i, (p, k, _))| ((*p, *k), i)).collect();
    let angle = |p: usize, k: usize| directions_for(inv.point(p))[k];

    let mut edges = Vec::new();
    for (i, (p, k, seg)) in launched.iter().enumerate() {
        let polyline: Vec<[f64; 2]> = seg.samples.iter().map(|s| [s.z.re, s.z.im]).collect();
        let params: Vec<f64> = seg.samples.iter().map(|s| s.t).collect();
        let (to, psi_length) = match seg.end {
            Anchor::FiniteCritical { id, direction } => {
                let j = *index.get(&(id, direction)).ok_or(Error::GluingAmbiguity(i, i))?;
                let other = &launched[j].2;
                if other.end != (Anchor::FiniteCritical { id: *p, direction: *k }) {
                    return Err(Error::GluingAmbiguity(i, j));
                }
                if j < i {
                    continue;
                }
                check_same_curve(tracer, seg, other).map_err(|_| Error::GluingAmbiguity(i, j))?;
                (
                    EdgeEnd::Vertex {
                        vertex: vertex_of[&id],
                        direction,
                        angle: angle(id, direction),
                    },
                    Extended::Finite(0.5 * (seg.psi_length + other.psi_length)),
                )
            }
            Anchor::InfiniteCritical { id } => (EdgeEnd::Pole { point: id }, Extended::PosInfinity),
            _ => return Err(Error::TraceIncomplete(*p)),
        };
        edges.push(CgEdge {
            id: edges.len(),
            from: vertex_of[p],
            from_direction: *k,
            from_angle: angle(*p, *k),
            to,
            psi_length,
            polyline,
            params,
            segment: Some(seg.clone()),
        });
    }
    Ok(CriticalGraph { vertices, edges })
}

fn check_same_curve(tracer: &Tracer<'_>, a: &TrajectorySegment, b: &TrajectorySegment) -> Result<(), ()> {
    let (la, lb) = (a.psi_length, b.psi_length);
    if (la - lb).abs() > GLUE_LENGTH_TOL * la.max(lb) {
        return Err(());
    }
    let tol = GLUE_DISTANCE_TOL * tracer.feature_scale();
    for k in 1..16 {
        let t = la * k as f64 / 16.0;
        let za = tracer.point_at(a, t);
        let zb = tracer.point_at(b, lb - t);
        if (za - zb).norm() > tol {
            return Err(());
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qd::RationalQD;
    use crate::tracer::TraceBudget;
    use std::f64::consts::PI;

    fn graph(num: &str, den: &str, sign: f64) -> Result<CriticalGraph> {
        let qd = RationalQD::from_exprs(num, den, sign).unwrap();
        let tr = Tracer::new(&qd, TraceBudget::default()).unwrap();
        build_critical_graph(&tr, tr.launch_all()?)
    }

    #[test]
    fn arcsine_graph() {
        let cg = graph("1", "z^2 - 1", -1.0).unwrap();
        assert_eq!(cg.vertices.len(), 2);
        assert_eq!(cg.edges.len(), 1);
        let l = cg.edges[0].psi_length.finite().unwrap();
        assert!((l - PI).abs() < 1e-9);
    }

    #[test]
    fn cubic_rays() {
        let cg = graph("z", "1", 1.0).unwrap();
        assert_eq!(cg.vertices.len(), 1);
        assert_eq!(cg.edges.len(), 3);
        assert!(cg.edges.iter().all(|e| e.is_ray() && e.psi_length == Extended::PosInfinity));
        assert_eq!(cg.degree(0), 3);
    }

    #[test]
    fn flat_is_empty() {
        let cg = graph("1", "1", 1.0).unwrap();
        assert!(cg.vertices.is_empty() && cg.edges.is_empty());
    }

    #[test]
    fn unsupported_infinity() {
        assert!(matches!(graph("1", "z^3", 1.0), Err(Error::UnsupportedInfinity(1))));
    }
}
