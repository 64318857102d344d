//! Levy measures of potentials, their Cauchy transforms and logarithmic
//! potentials, and the branch equation `C^2 = U1/U2`.
//!
//! A measure is discretized into atoms at equal Psi-length spacing along
//! each critical edge. Point masses at double poles come from the widths of
//! their circle domains, so the total mass vanishes by construction.

mod green;

pub use green::{component_green_mass, green_mass_oracle};

use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{integrate_potential_tol, Orientation};
use crate::error::{Error, Result};
use crate::qd::{Location, RationalQD};
use crate::topology::{CriticalGraph, DomainKind, FatGraph, OrbitRef, ReebGraph, ReebVertexKind};
use crate::tracer::Tracer;

pub const DEFAULT_ATOMS: usize = 10_000;
/// Total mass must vanish within this fraction of the total variation.
pub const MASS_TOL: f64 = 1e-6;
/// Sample points stay this many atom spacings away from the support.
pub const SUPPORT_MARGIN: f64 = 5.0;
pub const BRANCH_TOL: f64 = 1e-4;
pub const RECONSTRUCT_TOL: f64 = 1e-6;
/// Relative tolerance of the finite-difference check of `C = 2 du/dz`.
pub const IDENTITY_TOL: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub point: Complex64,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeTerm {
    pub edge: usize,
    /// Density per unit Psi-length: `-2`, `0` or `2`.
    pub coefficient: i32,
    pub psi_length: f64,
    pub atoms: Vec<Atom>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoleMass {
    pub point: usize,
    pub location: Location,
    pub mass: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SignedMeasure {
    pub edge_terms: Vec<EdgeTerm>,
    pub pole_masses: Vec<PoleMass>,
    /// Atoms not tied to a critical edge, e.g. root-counting measures.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub free_atoms: Vec<Atom>,
    pub total_mass: f64,
    pub total_variation: f64,
    /// Largest distance between neighbouring atoms of one edge.
    pub spacing: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformSample {
    pub point: Complex64,
    pub cauchy: Complex64,
    pub log_potential: f64,
    /// `|C - 2 du/dz|` by central differences, relative to the scale of `C`.
    pub identity_residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualStats {
    pub max: f64,
    pub mean: f64,
    pub tol: f64,
    pub pass: bool,
}

impl ResidualStats {
    fn from(values: &[f64], tol: f64) -> ResidualStats {
        let max = values.iter().copied().fold(0.0, f64::max);
        let mean = if values.is_empty() { 0.0 } else { values.iter().sum::<f64>() / values.len() as f64 };
        ResidualStats {
            max,
            mean,
            tol,
            pass: max <= tol,
        }
    }
}

impl SignedMeasure {
    /// A measure made of free atoms only.
    pub fn discrete(atoms: Vec<Atom>) -> SignedMeasure {
        let mut m = SignedMeasure {
            free_atoms: atoms,
            ..Default::default()
        };
        m.update_totals();
        m
    }

    fn update_totals(&mut self) {
        let edge = self.edge_terms.iter().flat_map(|t| &t.atoms).chain(&self.free_atoms).map(|a| a.weight);
        let poles = self.pole_masses.iter().map(|p| p.mass);
        let all: Vec<f64> = edge.chain(poles).collect();
        self.total_mass = all.iter().sum();
        self.total_variation = all.iter().map(|w| w.abs()).sum();
    }

    /// Atoms in the plane: edge atoms, free atoms and finite pole masses.
    pub fn atoms(&self) -> impl Iterator<Item = Atom> + '_ {
        let poles = self.pole_masses.iter().filter_map(|p| {
            p.location.as_complex().map(|z| Atom {
                point: z,
                weight: p.mass,
            })
        });
        self.edge_terms
            .iter()
            .flat_map(|t| t.atoms.iter().copied())
            .chain(self.free_atoms.iter().copied())
            .chain(poles)
    }

    /// Mass carried by the plane, i.e. minus the mass at infinity.
    pub fn planar_mass(&self) -> f64 {
        self.atoms().map(|a| a.weight).sum()
    }

    pub fn scaled(&self, k: f64) -> SignedMeasure {
        let mut m = self.clone();
        for t in &mut m.edge_terms {
            for a in &mut t.atoms {
                a.weight *= k;
            }
        }
        for a in &mut m.free_atoms {
            a.weight *= k;
        }
        for p in &mut m.pole_masses {
            p.mass *= k;
        }
        m.update_totals();
        m
    }

    /// Nonnegative on the critical graph.
    pub fn is_positive_on_graph(&self) -> bool {
        self.edge_terms.iter().all(|t| t.coefficient >= 0)
    }

    /// Nonnegative in the plane: on the critical graph and at finite poles.
    pub fn is_positive(&self) -> bool {
        self.is_positive_on_graph() && self.atoms().all(|a| a.weight >= 0.0)
    }

    /// Exactness: total mass zero relative to the total variation.
    pub fn is_exact(&self, tol: f64) -> bool {
        self.total_mass.abs() <= tol * self.total_variation.max(f64::MIN_POSITIVE)
    }

    pub fn cauchy(&self, z: Complex64) -> Complex64 {
        self.atoms().map(|a| a.weight / (z - a.point)).sum()
    }

    pub fn log_potential(&self, z: Complex64) -> f64 {
        self.atoms().map(|a| a.weight * (z - a.point).norm().ln()).sum()
    }

    pub fn distance_to_support(&self, z: Complex64) -> f64 {
        self.atoms()
            .filter(|a| a.weight != 0.0)
            .map(|a| (z - a.point).norm())
            .fold(f64::INFINITY, f64::min)
    }

    fn check_clearance(&self, z: Complex64) -> Result<f64> {
        let d = self.distance_to_support(z);
        let minimum = SUPPORT_MARGIN * self.spacing;
        if d <= minimum || d == 0.0 {
            return Err(Error::PointTooCloseToSupport {
                point: format!("{z}"),
                distance: d,
                minimum,
            });
        }
        Ok(d)
    }

    /// CSV with header `point_re,point_im,weight`; pole masses at infinity
    /// are left out.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "point_re,point_im,weight")?;
        for a in self.atoms() {
            writeln!(out, "{:e},{:e},{:e}", a.point.re, a.point.im, a.weight)?;
        }
        Ok(())
    }
}

/// Reeb edge and end attached to every boundary orbit.
fn orbit_edges(reeb: &ReebGraph) -> HashMap<OrbitRef, (usize, bool)> {
    let mut at = HashMap::new();
    for e in &reeb.edges {
        if let Some(o) = e.head_orbit {
            at.insert(o, (e.id, true));
        }
        if let Some(o) = e.tail_orbit {
            at.insert(o, (e.id, false));
        }
    }
    at
}

/// Density coefficient of every critical edge under orientation `o`: `+1`
/// for each side whose Reeb edge points toward the edge's component, `-1`
/// for each side pointing away.
pub fn edge_coefficients(cg: &CriticalGraph, reeb: &ReebGraph, fats: &[FatGraph], o: &Orientation) -> Result<Vec<i32>> {
    let at = orbit_edges(reeb);
    let mut coef = vec![0; cg.edges.len()];
    for (g, fg) in fats.iter().enumerate() {
        for &e in &fg.edges {
            let f = fg.edge_flags(e)[0];
            let (right, left) = fg.sides(f);
            let mut c = 0;
            for orbit in [right, left] {
                let &(edge, at_head) = at
                    .get(&OrbitRef { fat_graph: g, orbit })
                    .ok_or_else(|| Error::InvalidGraph(format!("boundary orbit {orbit} of fat graph {g} has no Reeb edge")))?;
                c += if o.forward[edge] == at_head { 1 } else { -1 };
            }
            coef[e] = c;
        }
    }
    Ok(coef)
}

/// Levy measure of the potential with orientation `o`, with `n_atoms` atoms
/// shared among the critical edges in proportion to their lengths.
pub fn build_levy_measure(
    tracer: &Tracer<'_>,
    cg: &CriticalGraph,
    reeb: &ReebGraph,
    fats: &[FatGraph],
    o: &Orientation,
    n_atoms: usize,
) -> Result<SignedMeasure> {
    build_levy_measure_tol(tracer, cg, reeb, fats, o, n_atoms, crate::classify::COCYCLE_TOL)
}

pub fn build_levy_measure_tol(
    tracer: &Tracer<'_>,
    cg: &CriticalGraph,
    reeb: &ReebGraph,
    fats: &[FatGraph],
    o: &Orientation,
    n_atoms: usize,
    tol: f64,
) -> Result<SignedMeasure> {
    if o.forward.len() != reeb.edges.len() {
        return Err(Error::NotGradientOrientation);
    }
    integrate_potential_tol(reeb, o, tol).map_err(|_| Error::NotGradientOrientation)?;
    let coef = edge_coefficients(cg, reeb, fats, o)?;
    let at = orbit_edges(reeb);
    for (g, fg) in fats.iter().enumerate() {
        for (orbit, _) in fg.orbits.iter().enumerate() {
            let (edge, _) = at[&OrbitRef { fat_graph: g, orbit }];
            if matches!(reeb.edges[edge].kind, DomainKind::Strip | DomainKind::End) {
                let f = fg.orbits[orbit].flags[0];
                return Err(Error::InfiniteDensityEdge(fg.flags[f].edge));
            }
        }
    }
    for e in &cg.edges {
        if !e.psi_length.is_finite() && coef[e.id] != 0 {
            return Err(Error::InfiniteDensityEdge(e.id));
        }
    }

    let total: f64 = cg
        .edges
        .iter()
        .filter(|e| coef[e.id] != 0)
        .filter_map(|e| e.psi_length.finite())
        .sum();
    let mut m = SignedMeasure::default();
    for e in &cg.edges {
        let Some(len) = e.psi_length.finite() else { continue };
        let c = coef[e.id];
        let mut atoms = Vec::new();
        if c != 0 {
            let n = ((n_atoms as f64 * len / total).round() as usize).max(1);
            let w = c as f64 * len / n as f64;
            for k in 0..n {
                let frac = (k as f64 + 0.5) / n as f64;
                let z = match &e.segment {
                    Some(seg) => tracer.point_at(seg, frac * seg.psi_length),
                    None => e.point_at_param(frac * e.params.last().copied().unwrap_or(0.0)),
                };
                atoms.push(Atom { point: z, weight: w });
            }
            for w in atoms.windows(2) {
                m.spacing = m.spacing.max((w[1].point - w[0].point).norm());
            }
        }
        m.edge_terms.push(EdgeTerm {
            edge: e.id,
            coefficient: c,
            psi_length: len,
            atoms,
        });
    }
    let inv = tracer.inventory();
    for e in &reeb.edges {
        if e.kind != DomainKind::Circle {
            continue;
        }
        let leaf_at_head = reeb.vertices[e.head].is_leaf();
        let leaf = if leaf_at_head { e.head } else { e.tail };
        let ReebVertexKind::Leaf { pole: Some(pole), .. } = reeb.vertices[leaf].kind else {
            return Err(Error::InvalidGraph(format!("circle edge {} has no pole", e.id)));
        };
        let width = e.width.finite().ok_or(Error::InfiniteDensityEdge(e.id))?;
        let toward_pole = o.forward[e.id] == leaf_at_head;
        m.pole_masses.push(PoleMass {
            point: pole,
            location: inv.point(pole).location,
            mass: if toward_pole { width } else { -width },
        });
    }
    m.update_totals();
    Ok(m)
}

/// Cauchy transform and logarithmic potential at each point, with a
/// finite-difference check of `C = 2 du/dz`.
pub fn evaluate_transforms(measure: &SignedMeasure, points: &[Complex64]) -> Result<Vec<TransformSample>> {
    let clearance: Vec<f64> = points.iter().map(|&z| measure.check_clearance(z)).collect::<Result<_>>()?;
    Ok(points
        .par_iter()
        .zip(clearance)
        .map(|(&z, d)| {
            let cauchy = measure.cauchy(z);
            let u = |p: Complex64| measure.log_potential(p);
            let h = 1e-3 * d;
            let ux = (u(z + h) - u(z - h)) / (2.0 * h);
            let uy = (u(z + Complex64::i() * h) - u(z - Complex64::i() * h)) / (2.0 * h);
            let scale = measure.total_variation / d;
            TransformSample {
                point: z,
                cauchy,
                log_potential: u(z),
                identity_residual: (cauchy - Complex64::new(ux, -uy)).norm() / scale.max(f64::MIN_POSITIVE),
            }
        })
        .collect())
}

/// `lim z^2 (-f(z))` at infinity, for differentials with a double pole there.
fn leading_ratio(qd: &RationalQD) -> Result<Complex64> {
    let order = qd.order_at_infinity();
    if order != 2 {
        return Err(Error::DegreeMismatch(
            qd.denominator().degree() as i64 - qd.numerator().degree() as i64,
        ));
    }
    Ok(-qd.sign() * qd.numerator().leading() / qd.denominator().leading())
}

/// `|C_mu(z)^2 - U1(z)/U2(z)|` after scaling the measure to unit planar
/// mass and `U1/U2` to unit leading ratio.
pub fn verify_branch_equation(
    measure: &SignedMeasure,
    qd: &RationalQD,
    points: &[Complex64],
    tol: f64,
) -> Result<ResidualStats> {
    let lead = leading_ratio(qd)?;
    let mass = measure.planar_mass();
    if mass.abs() <= MASS_TOL * measure.total_variation || mass == 0.0 {
        return Err(Error::NotStrebelForm("measure has no planar mass to normalize".into()));
    }
    let unit = measure.scaled(1.0 / mass);
    let samples = evaluate_transforms(&unit, points)?;
    let residuals: Vec<f64> = samples
        .iter()
        .map(|s| (s.cauchy * s.cauchy + qd.eval(s.point) / lead).norm())
        .collect();
    Ok(ResidualStats::from(&residuals, tol))
}

/// The measure determines the differential: `(C/2 pi)^2 = -f` off the
/// support, within `RECONSTRUCT_TOL` relative at every point. An empty
/// measure passes vacuously.
pub fn reconstruct_check(measure: &SignedMeasure, qd: &RationalQD, points: &[Complex64]) -> bool {
    if measure.total_variation == 0.0 {
        return true;
    }
    let Ok(samples) = evaluate_transforms(measure, points) else { return false };
    samples.iter().all(|s| {
        let c = s.cauchy / (2.0 * PI);
        let target = -qd.eval(s.point);
        (c * c - target).norm() <= RECONSTRUCT_TOL * target.norm().max(f64::MIN_POSITIVE)
    })
}

/// Points on a circle around the support, at least a unit away from it.
pub fn default_probe_points(measure: &SignedMeasure, count: usize) -> Vec<Complex64> {
    let atoms: Vec<Atom> = measure.atoms().filter(|a| a.weight != 0.0).collect();
    let center = if atoms.is_empty() {
        Complex64::new(0.0, 0.0)
    } else {
        atoms.iter().map(|a| a.point).sum::<Complex64>() / atoms.len() as f64
    };
    let radius = atoms.iter().map(|a| (a.point - center).norm()).fold(0.0, f64::max);
    let r = radius + radius.max(1.0);
    (0..count)
        .map(|k| center + Complex64::from_polar(r, 2.0 * PI * (k as f64 + 0.25) / count as f64))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealMeasure {
    pub orientation: Orientation,
    pub measure: SignedMeasure,
    pub positive: bool,
    pub branch: ResidualStats,
}

/// All real measures of a Strebel differential of the form `-U1 dz^2/U2`:
/// one per orientation of the Reeb graph whose circle edge at infinity
/// points toward the critical graph, `2^(d-1)` for `d` domains.
pub fn enumerate_real_measures(
    tracer: &Tracer<'_>,
    cg: &CriticalGraph,
    reeb: &ReebGraph,
    fats: &[FatGraph],
    n_atoms: usize,
    tol: f64,
) -> Result<Vec<RealMeasure>> {
    if !reeb.is_strebel() {
        return Err(Error::NotStrebelForm("domains other than rings and circles".into()));
    }
    let at_inf = reeb
        .edges
        .iter()
        .find(|e| {
            [e.tail, e.head]
                .iter()
                .any(|&v| matches!(reeb.vertices[v].kind, ReebVertexKind::Leaf { at_infinity: true, .. }))
        })
        .ok_or_else(|| Error::NotStrebelForm("no circle domain at infinity".into()))?;
    leading_ratio(tracer.qd())?;
    let d = reeb.edges.len();
    if d > 20 {
        return Err(Error::TooLarge(d));
    }
    let inf_forward = !reeb.vertices[at_inf.head].is_leaf();
    let mut out = Vec::new();
    for mask in 0..1u64 << d {
        let o = Orientation::from_mask(mask, d);
        if o.forward[at_inf.id] != inf_forward {
            continue;
        }
        let measure = build_levy_measure_tol(tracer, cg, reeb, fats, &o, n_atoms, 1e-6)?;
        let points = default_probe_points(&measure, 8);
        let branch = verify_branch_equation(&measure, tracer.qd(), &points, tol)?;
        out.push(RealMeasure {
            orientation: o,
            positive: measure.is_positive(),
            measure,
            branch,
        });
    }
    Ok(out)
}
