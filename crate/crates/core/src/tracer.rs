//! Numerical integration of horizontal and vertical trajectories.
//!
//! A trajectory is parametrized by the canonical coordinate: along a
//! horizontal trajectory `dw/dt = 1`, along a vertical one `dw/dt = i`, where
//! `w` is a primitive of `sqrt(f) dz`. The parameter `t` is therefore the
//! Psi-length. The square root is continued along the path from the branch
//! chosen at the seed.
//!
//! Pieces of a trajectory close to a zero or a simple pole `p` are not
//! integrated with the ODE. Near `p` the substitution `z = p + d v^2` makes
//! `sqrt(f) dz` smooth in `v`, and Gauss-Legendre quadrature gives the
//! canonical length of the tail to full precision.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qd::{angle_distance, directions_for, CriticalInventory, Location, PointKind, RationalQD};
use crate::quad;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Relative offset of a launch seed from its critical point.
pub const LAUNCH_OFFSET: f64 = 1e-4;
/// Default capture radius in units of the launch offset.
pub const HIT_FACTOR: f64 = 10.0;
/// Pole capture radius relative to the local feature scale.
pub const POLE_CAPTURE: f64 = 1e-3;
/// Escape radius for a pole at infinity, relative to the feature scale.
pub const ESCAPE_RADIUS: f64 = 1e3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    Horizontal,
    Vertical,
}

impl TraceKind {
    /// `dw/dt`.
    fn w_direction(self) -> Complex64 {
        match self {
            TraceKind::Horizontal => Complex64::new(1.0, 0.0),
            TraceKind::Vertical => I,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceGrid {
    pub cells: usize,
    pub max_crossings: usize,
    pub inflate: f64,
}

impl Default for RecurrenceGrid {
    fn default() -> Self {
        RecurrenceGrid {
            cells: 64,
            max_crossings: 16,
            inflate: 3.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceBudget {
    pub max_psi_length: f64,
    pub max_steps: usize,
    /// Capture radius around zeros and simple poles; `0` means ten launch
    /// offsets of the point in question.
    pub hit_radius: f64,
    pub recurrence_grid: RecurrenceGrid,
    /// Local error tolerance of the integrator, relative to the distance to
    /// the nearest critical point.
    pub rtol: f64,
}

impl Default for TraceBudget {
    fn default() -> Self {
        TraceBudget {
            max_psi_length: 1e6,
            max_steps: 200_000,
            hit_radius: 0.0,
            recurrence_grid: RecurrenceGrid::default(),
            rtol: 1e-10,
        }
    }
}

/// How a trajectory segment starts or ends.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Anchor {
    /// A regular seed point.
    Seed,
    /// A zero or simple pole, entered or left along critical direction
    /// `direction` (index into the sorted directions).
    FiniteCritical { id: usize, direction: usize },
    /// Captured by a pole of order at least two.
    InfiniteCritical { id: usize },
    /// Returned to its seed: a closed trajectory.
    ClosureToStart,
    /// Stopped by a caller-supplied predicate.
    Crossing { tag: usize },
    BudgetExhausted,
    /// Stopped after too many returns to one recurrence cell.
    Recurrence,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub z: Complex64,
    /// Branch of `sqrt(f)` carried at `z` (unused at critical points).
    pub s: Complex64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySegment {
    pub kind: TraceKind,
    pub samples: Vec<Sample>,
    /// Increment of the canonical coordinate, accumulated by quadrature of
    /// `sqrt(f) dz` along the sample polyline.
    pub w_increment: Complex64,
    pub psi_length: f64,
    pub start: Anchor,
    pub end: Anchor,
    /// Largest number of entries into one recurrence cell.
    pub max_cell_crossings: usize,
    /// Sample indices of the first and last ODE-integrated points; samples
    /// outside lie on analytic tails.
    pub ode_range: [usize; 2],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecurrenceVerdict {
    Transient,
    Closed,
    RecurrentSuspect,
}

pub fn recurrence_verdict(segment: &TrajectorySegment, budget: &TraceBudget) -> RecurrenceVerdict {
    if segment.end == Anchor::ClosureToStart {
        RecurrenceVerdict::Closed
    } else if segment.end == Anchor::Recurrence
        || segment.max_cell_crossings > budget.recurrence_grid.max_crossings
    {
        RecurrenceVerdict::RecurrentSuspect
    } else {
        RecurrenceVerdict::Transient
    }
}

/// Stop predicate for [`Tracer::trace_until`]: given a step `z0 -> z1`
/// returns a tag and the fraction of the step at which to stop.
pub type StopFn<'f> = dyn Fn(Complex64, Complex64) -> Option<(usize, f64)> + Sync + 'f;

#[derive(Clone, Debug)]
struct Site {
    id: usize,
    z: Complex64,
    order: i32,
    finite_critical: bool,
    /// Distance to the nearest other finite zero or pole.
    separation: f64,
}

#[derive(Clone, Debug)]
struct Grid {
    origin: Complex64,
    cell: f64,
    cells: usize,
}

impl Grid {
    fn index(&self, z: Complex64) -> Option<usize> {
        let x = ((z.re - self.origin.re) / self.cell).floor();
        let y = ((z.im - self.origin.im) / self.cell).floor();
        let n = self.cells as f64;
        (x >= 0.0 && y >= 0.0 && x < n && y < n).then(|| y as usize * self.cells + x as usize)
    }
}

/// Trajectory integrator for one differential.
#[derive(Clone, Debug)]
pub struct Tracer<'a> {
    qd: &'a RationalQD,
    inv: CriticalInventory,
    budget: TraceBudget,
    feature: f64,
    sites: Vec<Site>,
    grid: Grid,
    infinity_pole: bool,
}

struct Run<'b> {
    kind: TraceKind,
    samples: Vec<Sample>,
    w: Complex64,
    start: Anchor,
    start_site: Option<usize>,
    seed: Complex64,
    stop: Option<&'b StopFn<'b>>,
}

impl<'a> Tracer<'a> {
    pub fn new(qd: &'a RationalQD, budget: TraceBudget) -> Result<Self> {
        let inv = qd.critical_inventory()?;
        let feature = qd.root_scale();
        let finite: Vec<_> = inv.finite_points().to_vec();
        let sites: Vec<Site> = finite
            .iter()
            .map(|p| {
                let z = p.location.as_complex().unwrap();
                let separation = finite
                    .iter()
                    .filter(|q| q.id != p.id)
                    .map(|q| (q.location.as_complex().unwrap() - z).norm())
                    .fold(f64::INFINITY, f64::min);
                Site {
                    id: p.id,
                    z,
                    order: p.local_order(),
                    finite_critical: p.is_finite_critical(),
                    separation: if separation.is_finite() { separation } else { feature },
                }
            })
            .collect();
        let grid = {
            let (mut lo, mut hi) = (Complex64::new(f64::MAX, f64::MAX), Complex64::new(f64::MIN, f64::MIN));
            for s in &sites {
                lo = Complex64::new(lo.re.min(s.z.re), lo.im.min(s.z.im));
                hi = Complex64::new(hi.re.max(s.z.re), hi.im.max(s.z.im));
            }
            if sites.is_empty() {
                lo = Complex64::new(0.0, 0.0);
                hi = lo;
            }
            let center = (lo + hi) * 0.5;
            let mut half = 0.5 * (hi.re - lo.re).max(hi.im - lo.im);
            if half < 1e-9 * feature {
                half = feature;
            }
            half *= budget.recurrence_grid.inflate;
            let cells = budget.recurrence_grid.cells.max(1);
            Grid {
                origin: center - Complex64::new(half, half),
                cell: 2.0 * half / cells as f64,
                cells,
            }
        };
        let infinity_pole = inv.infinity().kind == PointKind::HigherPole;
        Ok(Tracer {
            qd,
            inv,
            budget,
            feature,
            sites,
            grid,
            infinity_pole,
        })
    }

    pub fn qd(&self) -> &RationalQD {
        self.qd
    }

    pub fn inventory(&self) -> &CriticalInventory {
        &self.inv
    }

    pub fn budget(&self) -> &TraceBudget {
        &self.budget
    }

    pub fn feature_scale(&self) -> f64 {
        self.feature
    }

    fn site(&self, id: usize) -> Option<&Site> {
        self.sites.iter().find(|s| s.id == id)
    }

    /// Launch offset `delta` of a finite critical point.
    pub fn launch_offset(&self, id: usize) -> f64 {
        self.site(id).map_or(LAUNCH_OFFSET * self.feature, |s| LAUNCH_OFFSET * s.separation)
    }

    /// Capture radius of a finite point.
    pub fn hit_radius(&self, id: usize) -> f64 {
        if self.budget.hit_radius > 0.0 {
            self.budget.hit_radius
        } else {
            HIT_FACTOR * self.launch_offset(id)
        }
    }

    fn pole_capture(&self, site: &Site) -> f64 {
        POLE_CAPTURE * site.separation.min(self.feature)
    }

    /// Distance to the nearest finite zero or pole, capped by `|z| + feature`.
    pub fn local_scale(&self, z: Complex64) -> f64 {
        self.sites
            .iter()
            .map(|s| (z - s.z).norm())
            .fold(z.norm() + self.feature, f64::min)
    }

    /// The branch of `sqrt(f(z))` closest in argument to `reference`.
    pub fn sqrt_near(&self, z: Complex64, reference: Complex64) -> Option<Complex64> {
        let f = self.qd.eval(z);
        if !f.is_finite() || f.norm() == 0.0 {
            return None;
        }
        let s = f.sqrt();
        let s = if (s * reference.conj()).re < 0.0 { -s } else { s };
        let angle = (s * reference.conj()).arg().abs();
        (angle < std::f64::consts::FRAC_PI_3).then_some(s)
    }

    fn velocity(kind: TraceKind, s: Complex64) -> Complex64 {
        kind.w_direction() / s
    }

    /// One Dormand-Prince step. `None` when the branch cannot be continued
    /// across the step.
    fn dp_step(&self, kind: TraceKind, z: Complex64, s: Complex64, h: f64) -> Option<(Complex64, f64)> {
        const A: [[f64; 6]; 6] = [
            [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
            [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
            [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
            [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
            [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
        ];
        const E: [f64; 7] = [
            71.0 / 57600.0,
            0.0,
            -71.0 / 16695.0,
            71.0 / 1920.0,
            -17253.0 / 339200.0,
            22.0 / 525.0,
            -1.0 / 40.0,
        ];
        let mut k = [Complex64::new(0.0, 0.0); 7];
        k[0] = Self::velocity(kind, s);
        for stage in 1..7 {
            let row = &A[stage - 1];
            let mut acc = z;
            for (j, a) in row.iter().enumerate().take(stage) {
                acc += k[j] * (h * a);
            }
            let sj = self.sqrt_near(acc, s)?;
            k[stage] = Self::velocity(kind, sj);
        }
        let row = &A[5];
        let mut z5 = z;
        for j in 0..6 {
            z5 += k[j] * (h * row[j]);
        }
        let mut err = Complex64::new(0.0, 0.0);
        for j in 0..7 {
            err += k[j] * (h * E[j]);
        }
        Some((z5, err.norm()))
    }

    /// `int sqrt(f) dz` along the chord `a -> b`, branch continued from `sa`.
    fn chord_integral(&self, a: Complex64, sa: Complex64, b: Complex64) -> Option<Complex64> {
        let (x, w) = quad::unit5();
        let mut s = sa;
        let mut acc = Complex64::new(0.0, 0.0);
        for (xi, wi) in x.iter().zip(w) {
            s = self.sqrt_near(a + (b - a) * xi, s)?;
            acc += s * wi;
        }
        Some(acc * (b - a))
    }

    /// `int sqrt(f) dz` along the chord `a -> b` with a 24-point rule,
    /// branch continued from `sa`.
    pub fn w_along_chord(&self, a: Complex64, sa: Complex64, b: Complex64) -> Option<Complex64> {
        let (x, w) = quad::unit24();
        let mut s = sa;
        let mut acc = Complex64::new(0.0, 0.0);
        for (xi, wi) in x.iter().zip(w) {
            s = self.sqrt_near(a + (b - a) * xi, s)?;
            acc += s * wi;
        }
        Some(acc * (b - a))
    }

    /// `int sqrt(f) dz` from `z` straight into the finite critical point
    /// `p`, branch continued from `sz`.
    fn tail_integral(&self, p: Complex64, z: Complex64, sz: Complex64) -> Option<Complex64> {
        let (x, w) = quad::unit24();
        let d = z - p;
        let mut s = sz;
        let mut acc = Complex64::new(0.0, 0.0);
        for (v, wt) in x.iter().zip(w).rev() {
            let zv = p + d * (v * v);
            s = self.sqrt_near(zv, s)?;
            acc += s * (2.0 * v * wt);
        }
        Some(-acc * d)
    }

    fn fail_at(z: Complex64) -> String {
        format!("{:.6}{:+.6}i", z.re, z.im)
    }

    fn check_seed(&self, seed: Complex64) -> Result<Complex64> {
        for s in &self.sites {
            if (seed - s.z).norm() <= 1e-12 * self.feature {
                return Err(Error::SeedAtCriticalPoint(Self::fail_at(seed)));
            }
        }
        let f = self.qd.eval(seed);
        if !f.is_finite() || f.norm() == 0.0 {
            return Err(Error::SeedAtCriticalPoint(Self::fail_at(seed)));
        }
        Ok(f)
    }

    /// Horizontal trajectory from a regular point, leaving in direction
    /// `direction` (radians), which must be horizontal there.
    pub fn trace_horizontal(&self, seed: Complex64, direction: f64) -> Result<TrajectorySegment> {
        let f = self.check_seed(seed)?;
        let misfit = angle_distance(f.arg() + 2.0 * direction, 0.0) / 2.0;
        if misfit > 1e-6 {
            return Err(Error::NotHorizontalDirection(misfit));
        }
        let e = Complex64::from_polar(1.0, direction);
        let s = f.sqrt();
        let s = if (s * e).re < 0.0 { -s } else { s };
        self.trace_from_seed(TraceKind::Horizontal, seed, s, None)
    }

    /// Vertical trajectory from a regular point, using the principal branch
    /// of `sqrt(f)` at the seed (`dz/dt = i/sqrt(f)`).
    pub fn trace_vertical(&self, seed: Complex64) -> Result<TrajectorySegment> {
        let f = self.check_seed(seed)?;
        self.trace_from_seed(TraceKind::Vertical, seed, f.sqrt(), None)
    }

    /// Trajectory from a regular seed with an explicit branch `s` of
    /// `sqrt(f(seed))`, optionally stopped by `stop`.
    pub fn trace_until(
        &self,
        kind: TraceKind,
        seed: Complex64,
        s: Complex64,
        stop: Option<&StopFn<'_>>,
    ) -> Result<TrajectorySegment> {
        let f = self.check_seed(seed)?;
        let s0 = f.sqrt();
        let s0 = if (s0 * s.conj()).re < 0.0 { -s0 } else { s0 };
        self.trace_from_seed(kind, seed, s0, stop)
    }

    fn trace_from_seed(
        &self,
        kind: TraceKind,
        seed: Complex64,
        s: Complex64,
        stop: Option<&StopFn<'_>>,
    ) -> Result<TrajectorySegment> {
        let run = Run {
            kind,
            samples: vec![Sample { t: 0.0, z: seed, s }],
            w: Complex64::new(0.0, 0.0),
            start: Anchor::Seed,
            start_site: None,
            seed,
            stop,
        };
        self.integrate(run)
    }

    /// Horizontal trajectories leaving a finite critical point along each
    /// critical direction, in direction order.
    pub fn launch_critical(&self, id: usize) -> Result<Vec<TrajectorySegment>> {
        let point = self.inv.point(id);
        if !point.is_finite_critical() {
            return Err(Error::NotFiniteCritical(point.location.to_string()));
        }
        let Location::Finite(_) = point.location else {
            return Err(Error::UnsupportedInfinity(self.qd.order_at_infinity()));
        };
        let dirs = directions_for(point);
        dirs.par_iter()
            .enumerate()
            .map(|(k, &theta)| self.launch_one(id, k, theta))
            .collect()
    }

    /// Launches from every finite critical point, ordered by point id and
    /// direction.
    pub fn launch_all(&self) -> Result<Vec<(usize, usize, TrajectorySegment)>> {
        let jobs: Vec<(usize, usize, f64)> = self
            .inv
            .finite_critical()
            .filter(|p| !p.location.is_infinity())
            .flat_map(|p| {
                directions_for(p)
                    .into_iter()
                    .enumerate()
                    .map(move |(k, th)| (p.id, k, th))
            })
            .collect();
        jobs.par_iter()
            .map(|&(id, k, th)| self.launch_one(id, k, th).map(|seg| (id, k, seg)))
            .collect()
    }

    fn launch_one(&self, id: usize, k: usize, theta: f64) -> Result<TrajectorySegment> {
        let site = self.site(id).expect("finite site").clone();
        let delta = self.launch_offset(id);
        let e = Complex64::from_polar(1.0, theta);
        let seed = site.z + e * delta;
        let f = self.qd.eval(seed);
        let s = f.sqrt();
        let s = if (s * e).re < 0.0 { -s } else { s };
        let back = self
            .tail_integral(site.z, seed, s)
            .ok_or_else(|| Error::BranchContinuationFailure(Self::fail_at(seed)))?;
        let w0 = -back;
        let t0 = w0.norm();
        let run = Run {
            kind: TraceKind::Horizontal,
            samples: vec![
                Sample {
                    t: 0.0,
                    z: site.z,
                    s: Complex64::new(0.0, 0.0),
                },
                Sample { t: t0, z: seed, s },
            ],
            w: w0,
            start: Anchor::FiniteCritical { id, direction: k },
            start_site: Some(id),
            seed,
            stop: None,
        };
        self.integrate(run)
    }

    fn integrate(&self, mut run: Run<'_>) -> Result<TrajectorySegment> {
        let b = &self.budget;
        let ode_start = run.samples.len() - 1;
        let last = *run.samples.last().unwrap();
        let (mut z, mut s, mut t) = (last.z, last.s, last.t);
        let seed_hit = match run.start_site {
            Some(id) => self.hit_radius(id),
            None => HIT_FACTOR * LAUNCH_OFFSET * self.local_scale(run.seed),
        };
        let mut left_start = false;
        let mut counts: std::collections::HashMap<usize, usize> = Default::default();
        let mut cell = self.grid.index(z);
        if let Some(c) = cell {
            counts.insert(c, 1);
        }
        let mut max_cross = cell.map_or(0, |_| 1);
        let mut pole_streak = vec![0usize; self.sites.len()];
        let mut escape_streak = 0usize;
        let mut h = 0.01 * self.local_scale(z) * s.norm();
        let mut steps = 0usize;
        let mut branch_trouble = false;

        let end = loop {
            if steps >= b.max_steps || t >= b.max_psi_length {
                break Anchor::BudgetExhausted;
            }
            let lloc = self.local_scale(z);
            if z.norm() > 1e12 * self.feature {
                break Anchor::BudgetExhausted;
            }
            let tol = b.rtol * lloc;
            h = h.min(0.1 * lloc * s.norm()).min(b.max_psi_length - t);
            if h <= 1e-15 * (t.abs() + lloc * s.norm()) {
                let at = Self::fail_at(z);
                return Err(if branch_trouble {
                    Error::BranchContinuationFailure(at)
                } else {
                    Error::StepSizeUnderflow(at)
                });
            }
            let Some((zn, err)) = self.dp_step(run.kind, z, s, h) else {
                branch_trouble = true;
                h *= 0.5;
                continue;
            };
            if err > tol {
                branch_trouble = false;
                h *= (0.9 * (tol / err).powf(0.2)).max(0.2);
                continue;
            }
            let Some(sn) = self.sqrt_near(zn, s) else {
                branch_trouble = true;
                h *= 0.5;
                continue;
            };
            let Some(dw) = self.chord_integral(z, s, zn) else {
                branch_trouble = true;
                h *= 0.5;
                continue;
            };
            branch_trouble = false;
            steps += 1;
            let (z0, s0, t0) = (z, s, t);
            z = zn;
            s = sn;
            t += h;
            run.w += dw;
            run.samples.push(Sample { t, z, s });
            let grow = if err > 0.0 { 0.9 * (tol / err).powf(0.2) } else { 5.0 };
            h *= grow.clamp(0.2, 5.0);

            if let Some(stop) = run.stop {
                if let Some((tag, frac)) = stop(z0, z) {
                    let frac = frac.clamp(0.0, 1.0);
                    let zc = z0 + (z - z0) * frac;
                    run.samples.pop();
                    run.w -= dw;
                    let sc = self.sqrt_near(zc, s0).unwrap_or(s0);
                    if let Some(part) = self.chord_integral(z0, s0, zc) {
                        run.w += part;
                    }
                    run.samples.push(Sample { t: t0 + h.min(t - t0) * frac, z: zc, s: sc });
                    break Anchor::Crossing { tag };
                }
            }

            let was_left = left_start;
            if !left_start && (z - run.seed).norm() > 2.0 * seed_hit {
                left_start = true;
            }

            if let Some(anchor) = self.try_capture_finite(&mut run, z, s, t, left_start)? {
                break anchor;
            }

            let mut captured = None;
            for (i, site) in self.sites.iter().enumerate() {
                if site.order > -2 {
                    continue;
                }
                let (dn, d0) = ((z - site.z).norm(), (z0 - site.z).norm());
                if dn < self.pole_capture(site) && dn < d0 {
                    pole_streak[i] += 1;
                    if pole_streak[i] >= 3 {
                        captured = Some(site.id);
                    }
                } else {
                    pole_streak[i] = 0;
                }
            }
            if let Some(id) = captured {
                break Anchor::InfiniteCritical { id };
            }
            if self.infinity_pole {
                if z.norm() > ESCAPE_RADIUS * self.feature && z.norm() > z0.norm() {
                    escape_streak += 1;
                    if escape_streak >= 3 {
                        break Anchor::InfiniteCritical { id: self.inv.infinity().id };
                    }
                } else {
                    escape_streak = 0;
                }
            }

            if run.start == Anchor::Seed && was_left {
                if let Some(anchor) = self.try_close(&mut run, z0, s0, t0, seed_hit) {
                    break anchor;
                }
            }

            let c = self.grid.index(z);
            if c != cell {
                cell = c;
                if let Some(c) = c {
                    let n = counts.entry(c).or_insert(0);
                    *n += 1;
                    max_cross = max_cross.max(*n);
                    if *n > b.recurrence_grid.max_crossings {
                        break Anchor::Recurrence;
                    }
                }
            }
        };

        let ode_end = match end {
            Anchor::FiniteCritical { .. } | Anchor::ClosureToStart => run.samples.len() - 2,
            _ => run.samples.len() - 1,
        };
        let psi_length = run.samples.last().unwrap().t;
        Ok(TrajectorySegment {
            kind: run.kind,
            samples: run.samples,
            w_increment: run.w,
            psi_length,
            start: run.start,
            end,
            max_cell_crossings: max_cross,
            ode_range: [ode_start, ode_end],
        })
    }

    fn try_capture_finite(
        &self,
        run: &mut Run<'_>,
        z: Complex64,
        s: Complex64,
        t: f64,
        left_start: bool,
    ) -> Result<Option<Anchor>> {
        let dir = run.kind.w_direction();
        for site in &self.sites {
            if !site.finite_critical {
                continue;
            }
            if run.start_site == Some(site.id) && !left_start {
                continue;
            }
            if (z - site.z).norm() >= self.hit_radius(site.id) {
                continue;
            }
            let Some(dw) = self.tail_integral(site.z, z, s) else {
                continue;
            };
            let along = dw * dir.conj();
            if along.re <= 0.0 || along.im.abs() > 1e-3 * along.re {
                continue;
            }
            let point = self.inv.point(site.id);
            let angle = (z - site.z).arg();
            let direction = directions_for(point)
                .iter()
                .enumerate()
                .min_by(|a, b| angle_distance(*a.1, angle).total_cmp(&angle_distance(*b.1, angle)))
                .map(|(k, _)| k)
                .unwrap_or(0);
            run.w += dw;
            run.samples.push(Sample {
                t: t + along.re,
                z: site.z,
                s: Complex64::new(0.0, 0.0),
            });
            return Ok(Some(Anchor::FiniteCritical { id: site.id, direction }));
        }
        Ok(None)
    }

    fn try_close(&self, run: &mut Run<'_>, z0: Complex64, s0: Complex64, t0: f64, hit: f64) -> Option<Anchor> {
        let z1 = run.samples.last().unwrap().z;
        let seed = run.seed;
        let ab = z1 - z0;
        let u = (((seed - z0) * ab.conj()).re / ab.norm_sqr()).clamp(0.0, 1.0);
        if (z0 + ab * u - seed).norm() >= hit {
            return None;
        }
        let s_seed = run.samples.iter().find(|p| p.z == seed).map(|p| p.s)?;
        let s_here = self.sqrt_near(seed, s0)?;
        if (s_here / s_seed).arg().abs() > 1e-3 {
            return None;
        }
        let dw = self.chord_integral(z0, s0, seed)?;
        let along = dw * run.kind.w_direction().conj();
        if along.re < 0.0 || along.im.abs() > 1e-6 * t0.max(hit * s_seed.norm()) {
            return None;
        }
        let last = run.samples.pop().unwrap();
        let w_last = self.chord_integral(z0, s0, last.z).unwrap_or_default();
        run.w += dw - w_last;
        run.samples.push(Sample {
            t: t0 + along.re,
            z: seed,
            s: s_seed,
        });
        Some(Anchor::ClosureToStart)
    }

    /// Point at canonical length `t` along a segment.
    pub fn point_at(&self, seg: &TrajectorySegment, t: f64) -> Complex64 {
        let n = seg.samples.len();
        let [a, b] = seg.ode_range;
        let first = seg.samples[a];
        let last = seg.samples[b];
        if t <= first.t {
            if let Anchor::FiniteCritical { id, .. } = seg.start {
                let p = seg.samples[0].z;
                let m = self.inv.point(id).local_order();
                let r = (t.max(0.0) / first.t).powf(2.0 / (m as f64 + 2.0));
                return p + (first.z - p) * r;
            }
            return first.z;
        }
        if t >= last.t {
            if b + 1 < n {
                let end = seg.samples[n - 1];
                if let Anchor::FiniteCritical { id, .. } = seg.end {
                    let m = self.inv.point(id).local_order();
                    let span = end.t - last.t;
                    let r = ((end.t - t).max(0.0) / span).powf(2.0 / (m as f64 + 2.0));
                    return end.z + (last.z - end.z) * r;
                }
                let frac = ((t - last.t) / (end.t - last.t)).clamp(0.0, 1.0);
                return last.z + (end.z - last.z) * frac;
            }
            return last.z;
        }
        let i = seg.samples[a..=b].partition_point(|p| p.t <= t) + a - 1;
        let p = seg.samples[i];
        let steps = 8;
        let dt = (t - p.t) / steps as f64;
        let (mut z, mut s) = (p.z, p.s);
        for _ in 0..steps {
            let Some(k1s) = self.sqrt_near(z, s) else { break };
            let k1 = Self::velocity(seg.kind, k1s);
            let k2 = self.sqrt_near(z + k1 * (dt / 2.0), k1s).map(|x| Self::velocity(seg.kind, x));
            let Some(k2) = k2 else { break };
            let k3 = self.sqrt_near(z + k2 * (dt / 2.0), k1s).map(|x| Self::velocity(seg.kind, x));
            let Some(k3) = k3 else { break };
            let k4 = self.sqrt_near(z + k3 * dt, k1s).map(|x| Self::velocity(seg.kind, x));
            let Some(k4) = k4 else { break };
            z += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
            s = k1s;
        }
        z
    }
}

/// Writes `segment_id,t,re,im` rows.
pub fn write_csv<W: Write>(mut out: W, segments: &[TrajectorySegment]) -> std::io::Result<()> {
    writeln!(out, "segment_id,t,re,im")?;
    for (k, seg) in segments.iter().enumerate() {
        for p in &seg.samples {
            writeln!(out, "{k},{:.17e},{:.17e},{:.17e}", p.t, p.z.re, p.z.im)?;
        }
    }
    Ok(())
}
