//! Heine-Stieltjes problems `P S'' + Q S' + V S = 0`: Stieltjes polynomials
//! by Newton's method on the electrostatic system of their roots, Van Vleck
//! polynomials by division, and the root-counting measures of a chain of
//! solutions against the branch equation `C^2 = V/P`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::Poly;

pub const NEWTON_TOL: f64 = 1e-12;
pub const MAX_NEWTON: usize = 200;
/// Solutions whose roots match within this distance are the same.
pub const DEDUP_TOL: f64 = 1e-6;
pub const COLLISION_TOL: f64 = 1e-8;
pub const ODE_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct HSProblem {
    pub p: Poly,
    pub q: Poly,
    pub n: usize,
    p_roots: Vec<Complex64>,
}

impl HSProblem {
    pub fn new(p: Poly, q: Poly, n: usize) -> Result<HSProblem> {
        let m = p.degree();
        if m < 2 {
            return Err(Error::InvalidProblem(format!("deg P = {m}, expected at least 2")));
        }
        if q.degree() >= m && !q.is_zero() {
            return Err(Error::InvalidProblem(format!("deg Q = {} is not below deg P = {m}", q.degree())));
        }
        if n == 0 {
            return Err(Error::InvalidProblem("n must be at least 1".into()));
        }
        let roots = p.roots()?;
        if roots.iter().any(|r| r.multiplicity > 1) {
            return Err(Error::InvalidProblem("P has a multiple root".into()));
        }
        Ok(HSProblem {
            p,
            q,
            n,
            p_roots: roots.iter().map(|r| r.value).collect(),
        })
    }

    pub fn with_degree(&self, n: usize) -> HSProblem {
        HSProblem { n, ..self.clone() }
    }

    pub fn m(&self) -> usize {
        self.p.degree()
    }

    pub fn p_roots(&self) -> &[Complex64] {
        &self.p_roots
    }

    /// Heine's count `binom(n + l - 2, l - 2)` with `l = m`.
    pub fn expected_count(&self) -> u64 {
        binomial((self.n + self.m() - 2) as u64, (self.m() - 2) as u64)
    }

    /// `sum_{j != k} 2/(z_k - z_j) + Q(z_k)/P(z_k)` for every `k`.
    pub fn electrostatic(&self, z: &[Complex64]) -> Vec<Complex64> {
        (0..z.len())
            .map(|k| {
                let mut g = self.q.eval(z[k]) / self.p.eval(z[k]);
                for j in 0..z.len() {
                    if j != k {
                        g += 2.0 / (z[k] - z[j]);
                    }
                }
                g
            })
            .collect()
    }

    /// Scale of the electrostatic terms, for relative convergence tests.
    fn electrostatic_scale(&self, z: &[Complex64]) -> f64 {
        (0..z.len())
            .map(|k| {
                let mut s = (self.q.eval(z[k]) / self.p.eval(z[k])).norm();
                for j in 0..z.len() {
                    if j != k {
                        s += 2.0 / (z[k] - z[j]).norm();
                    }
                }
                s
            })
            .fold(1.0, f64::max)
    }
}

pub fn binomial(n: u64, k: u64) -> u64 {
    (0..k.min(n - k)).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HSSolution {
    pub s_roots: Vec<Complex64>,
    pub v_coeffs: Vec<Complex64>,
    /// Largest coefficient of `P S'' + Q S' + V S`, relative to the largest
    /// coefficient of its terms.
    pub residual: f64,
    /// Largest electrostatic force at the roots, relative to its terms.
    pub electrostatic_residual: f64,
}

impl HSSolution {
    pub fn v(&self) -> Poly {
        Poly::new(self.v_coeffs.clone())
    }

    pub fn s(&self) -> Poly {
        Poly::from_roots(&self.s_roots)
    }

    /// `V` rescaled so that `V/P` behaves like `1/z^2` at infinity.
    pub fn v_normalized(&self, prob: &HSProblem) -> Poly {
        let v = self.v();
        v.scale(prob.p.leading() / v.leading())
    }

    fn same_as(&self, other: &HSSolution) -> bool {
        match_distance(&self.s_roots, &other.s_roots) < DEDUP_TOL
    }
}

/// Largest distance from a root of `a` to its nearest unused root of `b`.
fn match_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    let mut used = vec![false; b.len()];
    let mut worst = 0.0f64;
    for &x in a {
        let Some((j, d)) = b
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, &y)| (j, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
        else {
            return f64::INFINITY;
        };
        used[j] = true;
        worst = worst.max(d);
    }
    worst
}

/// `V = -(P S'' + Q S')/S` and the relative size of the remainder.
pub fn certify(prob: &HSProblem, s_roots: &[Complex64]) -> HSSolution {
    let s = Poly::from_roots(s_roots);
    let (d1, d2) = (s.derivative(), s.derivative().derivative());
    let lhs = prob.p.mul(&d2).add(&prob.q.mul(&d1));
    let (quot, _) = lhs.div_rem(&s);
    let v = quot.neg();
    let total = lhs.add(&v.mul(&s));
    let scale = prob
        .p
        .mul(&d2)
        .coefficient_scale()
        .max(prob.q.mul(&d1).coefficient_scale())
        .max(v.mul(&s).coefficient_scale())
        .max(f64::MIN_POSITIVE);
    let force = prob.electrostatic(s_roots).iter().map(|g| g.norm()).fold(0.0, f64::max);
    HSSolution {
        s_roots: s_roots.to_vec(),
        v_coeffs: v.coeffs().to_vec(),
        residual: total.coefficient_scale() / scale,
        electrostatic_residual: force / prob.electrostatic_scale(s_roots),
    }
}

/// A point uniformly distributed on the simplex spanned by `pts`, i.e. in
/// their convex hull.
fn random_in_hull(pts: &[Complex64], rng: &mut ChaCha8Rng) -> Complex64 {
    let w: Vec<f64> = pts.iter().map(|_| -rng.gen::<f64>().max(1e-300).ln()).collect();
    let total: f64 = w.iter().sum();
    pts.iter().zip(&w).map(|(p, w)| p * (w / total)).sum()
}

/// A starting configuration. One start in four spreads the roots uniformly
/// over the hull. The others walk the roots of `P` in random order and
/// split the `n` roots among the `m - 1` chords of that path by a uniformly
/// random composition, placed at Chebyshev points or arcsine-distributed
/// along each chord: the unbalanced distributions are hard to reach from uniform
/// starts.
fn random_start(prob: &HSProblem, rng: &mut ChaCha8Rng, chords: bool) -> Vec<Complex64> {
    let pr = &prob.p_roots;
    if !chords {
        return (0..prob.n).map(|_| random_in_hull(pr, rng)).collect();
    }
    let mut order: Vec<usize> = (0..pr.len()).collect();
    order.shuffle(rng);
    let parts = pr.len() - 1;
    // stars and bars: choose parts - 1 bar positions among n + parts - 1 slots
    let mut slots: Vec<usize> = (0..prob.n + parts - 1).collect();
    slots.shuffle(rng);
    let mut bars: Vec<usize> = slots[..parts - 1].to_vec();
    bars.sort_unstable();
    let mut counts = Vec::with_capacity(parts);
    let mut left = prob.n;
    let mut last = 0usize;
    for (i, &b) in bars.iter().enumerate() {
        let c = b - last - usize::from(i > 0);
        counts.push(c);
        left -= c;
        last = b;
    }
    counts.push(left);
    let mut z = Vec::with_capacity(prob.n);
    let chebyshev = rng.gen::<bool>();
    for (c, &k) in counts.iter().enumerate() {
        let (a, b) = (pr[order[c]], pr[order[c + 1]]);
        for i in 0..k {
            let t = if chebyshev {
                0.5 - 0.5 * (std::f64::consts::PI * (i as f64 + 0.5) / k as f64).cos()
            } else {
                0.5 - 0.5 * (std::f64::consts::PI * rng.gen_range(0.01..0.99)).cos()
            };
            let jitter = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * 1e-2 / k as f64;
            z.push(a + (b - a) * (t + jitter));
        }
    }
    z
}

/// Newton's method with a finite-difference Jacobian and step halving.
fn newton(prob: &HSProblem, mut z: Vec<Complex64>) -> Result<Vec<Complex64>> {
    let n = z.len();
    let norm = |g: &[Complex64]| g.iter().map(|x| x.norm()).fold(0.0, f64::max);
    let mut g = prob.electrostatic(&z);
    let mut r = norm(&g);
    for _ in 0..MAX_NEWTON {
        if !r.is_finite() {
            return Err(Error::NoConvergence);
        }
        if r <= NEWTON_TOL * prob.electrostatic_scale(&z) {
            let min_gap = (0..n)
                .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                .map(|(i, j)| (z[i] - z[j]).norm())
                .fold(f64::INFINITY, f64::min);
            if min_gap < COLLISION_TOL {
                return Err(Error::RootCollision);
            }
            return Ok(z);
        }
        let mut jac = DMatrix::<Complex64>::zeros(n, n);
        for j in 0..n {
            let h = 1e-7 * (1.0 + z[j].norm());
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[j] += h;
            zm[j] -= h;
            let (gp, gm) = (prob.electrostatic(&zp), prob.electrostatic(&zm));
            for i in 0..n {
                jac[(i, j)] = (gp[i] - gm[i]) / (2.0 * h);
            }
        }
        let rhs = DVector::from_iterator(n, g.iter().map(|x| -x));
        let Some(dz) = jac.lu().solve(&rhs) else {
            return Err(Error::NoConvergence);
        };
        let mut lambda = 1.0;
        loop {
            let trial: Vec<Complex64> = z.iter().zip(dz.iter()).map(|(a, d)| a + d * lambda).collect();
            let gt = prob.electrostatic(&trial);
            let rt = norm(&gt);
            if rt < r || lambda < 1e-6 {
                z = trial;
                g = gt;
                r = rt;
                break;
            }
            lambda *= 0.5;
        }
    }
    Err(Error::NoConvergence)
}

/// Distinct certified solutions found from `starts` random starting
/// configurations near the convex hull of the roots of `P`.
pub fn solve_stieltjes(prob: &HSProblem, starts: usize, seed: u64) -> Result<Vec<HSSolution>> {
    let found: Vec<Option<HSSolution>> = (0..starts)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
            let z0 = random_start(prob, &mut rng, i % 4 != 0);
            let z = newton(prob, z0).ok()?;
            let sol = certify(prob, &z);
            (sol.residual <= ODE_TOL).then_some(sol)
        })
        .collect();
    let mut out: Vec<HSSolution> = Vec::new();
    for sol in found.into_iter().flatten() {
        if !out.iter().any(|s| s.same_as(&sol)) {
            out.push(sol);
        }
    }
    if out.is_empty() {
        return Err(Error::NoConvergence);
    }
    for s in &mut out {
        s.s_roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Enumeration {
    pub n: usize,
    pub m: usize,
    pub count: usize,
    pub expected: u64,
    pub complete: bool,
    pub starts: usize,
    /// Convention for the Heine count.
    pub assumption: String,
    pub solutions: Vec<HSSolution>,
}

pub fn enumerate_solutions(prob: &HSProblem, start_budget: usize, seed: u64) -> Result<Enumeration> {
    let solutions = solve_stieltjes(prob, start_budget, seed)?;
    let expected = prob.expected_count();
    Ok(Enumeration {
        n: prob.n,
        m: prob.m(),
        count: solutions.len(),
        expected,
        complete: solutions.len() as u64 == expected,
        starts: start_budget,
        assumption: "l = m = deg P".into(),
        solutions,
    })
}

/// Convex hull by the monotone chain, counterclockwise, without collinear
/// points. Collinear input gives its two extreme points.
pub fn convex_hull(points: &[Complex64]) -> Vec<Complex64> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: Complex64, a: Complex64, b: Complex64| (a - o).re * (b - o).im - (a - o).im * (b - o).re;
    let mut hull: Vec<Complex64> = Vec::new();
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Complex64>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Distance from `z` to the convex hull of `points`.
pub fn distance_to_hull(z: Complex64, points: &[Complex64]) -> f64 {
    let hull = convex_hull(points);
    let seg = |a: Complex64, b: Complex64| {
        let d = b - a;
        let t = if d.norm_sqr() == 0.0 { 0.0 } else { ((z - a) * d.conj()).re / d.norm_sqr() };
        (z - (a + d * t.clamp(0.0, 1.0))).norm()
    };
    match hull.len() {
        0 => f64::INFINITY,
        1 => (z - hull[0]).norm(),
        2 => seg(hull[0], hull[1]),
        n => {
            let inside = (0..n).all(|i| {
                let (a, b) = (hull[i], hull[(i + 1) % n]);
                (b - a).re * (z - a).im - (b - a).im * (z - a).re >= 0.0
            });
            if inside {
                0.0
            } else {
                (0..n).map(|i| seg(hull[i], hull[(i + 1) % n])).fold(f64::INFINITY, f64::min)
            }
        }
    }
}

/// Roots of `S` and of `V` lie within `eps` of the convex hull of the roots
/// of `P` (up to rounding).
pub fn localization_check(sol: &HSSolution, prob: &HSProblem, eps: f64) -> Result<bool> {
    let diam = hull_diameter(&prob.p_roots);
    let slack = eps + 1e-12 * diam.max(1.0);
    let v_roots: Vec<Complex64> = sol.v().roots()?.iter().map(|r| r.value).collect();
    Ok(sol
        .s_roots
        .iter()
        .chain(&v_roots)
        .all(|&z| distance_to_hull(z, &prob.p_roots) <= slack))
}

pub fn hull_diameter(points: &[Complex64]) -> f64 {
    points
        .iter()
        .flat_map(|a| points.iter().map(move |b| (a - b).norm()))
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainEntry {
    pub n: usize,
    pub v_normalized: Vec<Complex64>,
    /// `|C_{mu_n}(z0)^2 - V(z0)/P(z0)|` with the limiting normalized `V`.
    pub residual: f64,
    /// Largest distance from a root of `S_n` to the support, when given.
    pub support_distance: Option<f64>,
    pub mass: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticReport {
    pub point: Complex64,
    pub entries: Vec<ChainEntry>,
    /// Fraction of consecutive steps along which the residual decreases.
    pub decreasing_fraction: f64,
    pub final_residual: f64,
    pub v_limit: Vec<Complex64>,
}

/// One solution per degree in `n0..=n1`, each chosen closest in normalized
/// `V` to the previous one.
pub fn solve_chain(prob: &HSProblem, n0: usize, n1: usize, starts: usize, seed: u64) -> Result<Vec<HSSolution>> {
    let mut chain: Vec<HSSolution> = Vec::new();
    for n in n0..=n1 {
        let pn = prob.with_degree(n);
        let sols = solve_stieltjes(&pn, starts, seed.wrapping_add(n as u64 * 7919))?;
        let pick = match chain.last() {
            None => sols.into_iter().next().unwrap(),
            Some(prev) => {
                let vp = prev.v_normalized(prob);
                sols.into_iter()
                    .min_by(|a, b| {
                        let da = a.v_normalized(prob).sub(&vp).coefficient_scale();
                        let db = b.v_normalized(prob).sub(&vp).coefficient_scale();
                        da.total_cmp(&db)
                    })
                    .unwrap()
            }
        };
        chain.push(pick);
    }
    Ok(chain)
}

/// Root-counting measures of a chain of solutions against the branch
/// equation at `z0`, with the last normalized `V` as the limit. The chain
/// must have stabilized: the last two normalized `V` agree within
/// `stable_tol`.
pub fn asymptotic_compare(
    prob: &HSProblem,
    chain: &[HSSolution],
    z0: Complex64,
    stable_tol: f64,
    support: Option<&dyn Fn(Complex64) -> f64>,
) -> Result<AsymptoticReport> {
    if chain.len() < 2 {
        return Err(Error::NonConvergingChain("need at least two solutions".into()));
    }
    let vs: Vec<Poly> = chain.iter().map(|s| s.v_normalized(prob)).collect();
    let last = &vs[vs.len() - 1];
    let drift = last.sub(&vs[vs.len() - 2]).coefficient_scale() / last.coefficient_scale();
    if drift > stable_tol {
        return Err(Error::NonConvergingChain(format!("normalized V moved by {drift:e} in the last step")));
    }
    let target = last.eval(z0) / prob.p.eval(z0);
    let entries: Vec<ChainEntry> = chain
        .iter()
        .zip(&vs)
        .map(|(s, v)| {
            let n = s.s_roots.len() as f64;
            let c: Complex64 = s.s_roots.iter().map(|&r| 1.0 / (z0 - r)).sum::<Complex64>() / n;
            ChainEntry {
                n: s.s_roots.len(),
                v_normalized: v.coeffs().to_vec(),
                residual: (c * c - target).norm(),
                support_distance: support.map(|d| s.s_roots.iter().map(|&r| d(r)).fold(0.0, f64::max)),
                mass: s.s_roots.iter().map(|_| 1.0 / n).sum(),
            }
        })
        .collect();
    let steps = entries.windows(2).filter(|w| w[1].residual <= w[0].residual).count();
    Ok(AsymptoticReport {
        point: z0,
        decreasing_fraction: steps as f64 / (entries.len() - 1) as f64,
        final_residual: entries.last().unwrap().residual,
        v_limit: last.coeffs().to_vec(),
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chebyshev(n: usize) -> HSProblem {
        HSProblem::new(Poly::parse("z^2 - 1").unwrap(), Poly::parse("z").unwrap(), n).unwrap()
    }

    #[test]
    fn chebyshev_two() {
        let prob = chebyshev(2);
        let sols = solve_stieltjes(&prob, 16, 1).unwrap();
        assert_eq!(sols.len(), 1);
        let s = &sols[0];
        let a = 0.5f64.sqrt();
        assert!((s.s_roots[0] + a).norm() < 1e-12 && (s.s_roots[1] - a).norm() < 1e-12, "{:?}", s.s_roots);
        assert_eq!(s.v_coeffs.len(), 1);
        assert!((s.v_coeffs[0] + 4.0).norm() < 1e-10);
        assert!(s.residual < 1e-10 && s.electrostatic_residual < 1e-10);
        assert!(localization_check(s, &prob, 0.0).unwrap());
    }

    #[test]
    fn chebyshev_one() {
        let sols = solve_stieltjes(&chebyshev(1), 8, 2).unwrap();
        assert_eq!(sols.len(), 1);
        assert!(sols[0].s_roots[0].norm() < 1e-12);
        assert!((sols[0].v_coeffs[0] + 1.0).norm() < 1e-10);
    }

    #[test]
    fn electrostatic_balance_at_half() {
        let a = 0.5f64.sqrt();
        let g = chebyshev(2).electrostatic(&[Complex64::new(a, 0.0), Complex64::new(-a, 0.0)]);
        assert!(g.iter().all(|x| x.norm() < 1e-14));
    }

    #[test]
    fn heine_count() {
        assert_eq!(binomial(4, 1), 4);
        assert_eq!(binomial(5, 0), 1);
        let p = Poly::parse("z (z - 1)(z - 2)").unwrap();
        let q = p.derivative().scale(Complex64::new(0.5, 0.0));
        let prob = HSProblem::new(p, q, 2).unwrap();
        let e = enumerate_solutions(&prob, 600, 3).unwrap();
        assert_eq!(e.expected, 3);
        assert_eq!(e.count, 3, "{:?}", e.solutions);
        for s in &e.solutions {
            assert!(localization_check(s, &prob, 0.0).unwrap());
        }
    }

    #[test]
    fn localization_rejects_far_root() {
        let prob = chebyshev(1);
        let mut s = certify(&prob, &[Complex64::new(0.0, 0.0)]);
        s.s_roots = vec![Complex64::new(10.0, 0.0)];
        assert!(!localization_check(&s, &prob, 0.0).unwrap());
        assert!(localization_check(&s, &prob, 20.0).unwrap());
    }

    #[test]
    fn hull_of_square_with_centre() {
        let pts: Vec<Complex64> = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0), (0.5, 0.5)]
            .iter()
            .map(|&(x, y)| Complex64::new(x, y))
            .collect();
        assert_eq!(convex_hull(&pts).len(), 4);
        assert_eq!(distance_to_hull(Complex64::new(0.5, 0.2), &pts), 0.0);
        assert!((distance_to_hull(Complex64::new(2.0, 0.5), &pts) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn chebyshev_chain_converges_to_arcsine() {
        let prob = chebyshev(2);
        let chain = solve_chain(&prob, 2, 12, 32, 5).unwrap();
        let seg = |z: Complex64| if z.re.abs() <= 1.0 { z.im.abs() } else { (z.re.abs() - 1.0).hypot(z.im) };
        let rep = asymptotic_compare(&prob, &chain, Complex64::new(2.0, 0.0), 1e-3, Some(&seg)).unwrap();
        assert!(rep.final_residual < 5e-2);
        assert_eq!(rep.decreasing_fraction, 1.0);
        assert!(rep.entries.iter().all(|e| (e.mass - 1.0).abs() < 1e-12));
        assert!(rep.entries.iter().all(|e| e.support_distance.unwrap() < 1e-12));
    }
}
