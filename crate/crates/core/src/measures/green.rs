use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use super::SignedMeasure;
use crate::classify::point_in_polygon;
use crate::error::{Error, Result};
use crate::quad::{unit24, unit5};
use crate::topology::{orbit_contour, CriticalGraph, FatGraph, OrbitRef, ReebGraph};
use crate::tracer::{Tracer, TrajectorySegment};

/// Most vertices kept from a traced contour.
const CONTOUR_POINTS: usize = 200;

/// `∮ dF/dn dl` over a closed polygon with the outer normal, by central
/// differences of step `step` at 24 Gauss points per side. Equals the Levy
/// mass enclosed when `F` is smooth near the contour.
pub fn green_mass_oracle(f: &(dyn Fn(Complex64) -> f64 + Sync), contour: &[Complex64], step: f64) -> Result<f64> {
    flux(f, contour, step, unit24())
}

fn flux(
    f: &(dyn Fn(Complex64) -> f64 + Sync),
    contour: &[Complex64],
    step: f64,
    rule: &(Vec<f64>, Vec<f64>),
) -> Result<f64> {
    let mut poly = contour.to_vec();
    if poly.len() > 1 && poly.first() == poly.last() {
        poly.pop();
    }
    if poly.len() < 3 {
        return Err(Error::InvalidDocument("contour needs at least three vertices".into()));
    }
    let n = poly.len();
    let area: f64 = (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a.re * b.im - a.im * b.re
        })
        .sum();
    let ccw = if area > 0.0 { 1.0 } else { -1.0 };
    let (nodes, weights) = rule;
    let sides: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            let d = b - a;
            let normal = Complex64::new(d.im, -d.re) / d.norm() * ccw;
            let mut sum = 0.0;
            for (&x, &w) in nodes.iter().zip(weights) {
                let p = a + d * x;
                let (fp, f0, fm) = (f(p + normal * step), f(p), f(p - normal * step));
                let (fwd, bwd) = ((fp - f0) / step, (f0 - fm) / step);
                if !(fp.is_finite() && f0.is_finite() && fm.is_finite())
                    || (fwd - bwd).abs() > 1e-2 * (fwd.abs() + bwd.abs()) + 1e-8
                {
                    return Err(Error::ContourTouchesSupport(format!("{p}")));
                }
                sum += w * 0.5 * (fwd + bwd);
            }
            Ok(sum * d.norm())
        })
        .collect::<Result<_>>()?;
    Ok(sides.iter().sum())
}

/// Levy mass of the component `alpha` measured by the Green oracle: the
/// logarithmic potential of `measure` integrated over one closed trajectory
/// in each adjacent domain, `depth` of the way across, with normals pointing
/// away from the component.
pub fn component_green_mass(
    tracer: &Tracer<'_>,
    cg: &CriticalGraph,
    reeb: &ReebGraph,
    fats: &[FatGraph],
    measure: &SignedMeasure,
    alpha: usize,
    depth: f64,
) -> Result<f64> {
    let fg = fats
        .get(alpha)
        .ok_or_else(|| Error::InvalidGraph(format!("Reeb vertex {alpha} is not a component")))?;
    let inside_point = cg.vertices[fg.vertices[0]].z();
    let u = |z: Complex64| measure.log_potential(z) / (2.0 * PI);
    let mut total = 0.0;
    for e in &reeb.edges {
        for orbit in [e.tail_orbit, e.head_orbit].into_iter().flatten() {
            if orbit.fat_graph != alpha {
                continue;
            }
            let seg = contour_near(tracer, cg, fats, orbit, depth)?;
            let stride = seg.samples.len().div_ceil(CONTOUR_POINTS).max(1);
            let poly: Vec<Complex64> = seg.samples.iter().step_by(stride).map(|s| s.z).collect();
            let clearance = poly.iter().map(|&z| measure.distance_to_support(z)).fold(f64::INFINITY, f64::min);
            let step = 1e-4 * clearance.min(1.0);
            let m = flux(&u, &poly, step, unit5())?;
            total += if point_in_polygon(inside_point, &poly) { m } else { -m };
        }
    }
    Ok(total)
}

/// The contour at `depth`, moving closer to the critical graph when the
/// trajectory that far out cannot be followed.
fn contour_near(
    tracer: &Tracer<'_>,
    cg: &CriticalGraph,
    fats: &[FatGraph],
    orbit: OrbitRef,
    depth: f64,
) -> Result<TrajectorySegment> {
    let mut d = depth;
    loop {
        match orbit_contour(tracer, cg, fats, orbit, d) {
            Err(Error::BranchContinuationFailure(_) | Error::StepSizeUnderflow(_)) if d > depth / 30.0 => d /= 3.0,
            other => return other,
        }
    }
}
