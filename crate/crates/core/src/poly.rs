//! Dense complex polynomials, simultaneous root finding and a small
//! expression parser.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Polynomial with coefficients in ascending degree.
#[derive(Clone, Debug, PartialEq)]
pub struct Poly {
    coeffs: Vec<Complex64>,
}

/// A root together with its multiplicity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Root {
    pub value: Complex64,
    pub multiplicity: usize,
}

impl Poly {
    /// Builds a polynomial, dropping exactly-zero leading coefficients.
    pub fn new(mut coeffs: Vec<Complex64>) -> Self {
        while coeffs.len() > 1 && coeffs.last() == Some(&ZERO) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(ZERO);
        }
        Poly { coeffs }
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Poly::new(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    pub fn constant(c: Complex64) -> Self {
        Poly::new(vec![c])
    }

    pub fn monomial(c: Complex64, degree: usize) -> Self {
        let mut v = vec![ZERO; degree + 1];
        v[degree] = c;
        Poly::new(v)
    }

    /// Monic polynomial with the given roots.
    pub fn from_roots(roots: &[Complex64]) -> Self {
        let mut p = Poly::constant(ONE);
        for &r in roots {
            p = p.mul(&Poly::new(vec![-r, ONE]));
        }
        p
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == ZERO)
    }

    pub fn leading(&self) -> Complex64 {
        *self.coeffs.last().unwrap()
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs.iter().rev().fold(ZERO, |acc, &c| acc * z + c)
    }

    /// Value and first derivative by Horner's scheme.
    pub fn eval_with_derivative(&self, z: Complex64) -> (Complex64, Complex64) {
        let mut p = ZERO;
        let mut dp = ZERO;
        for &c in self.coeffs.iter().rev() {
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp)
    }

    pub fn derivative(&self) -> Poly {
        if self.coeffs.len() <= 1 {
            return Poly::constant(ZERO);
        }
        Poly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| c * k as f64)
                .collect(),
        )
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.coeffs.len().max(other.coeffs.len());
        Poly::new(
            (0..n)
                .map(|k| {
                    self.coeffs.get(k).copied().unwrap_or(ZERO)
                        + other.coeffs.get(k).copied().unwrap_or(ZERO)
                })
                .collect(),
        )
    }

    pub fn neg(&self) -> Poly {
        Poly::new(self.coeffs.iter().map(|c| -c).collect())
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.neg())
    }

    pub fn scale(&self, k: Complex64) -> Poly {
        Poly::new(self.coeffs.iter().map(|c| c * k).collect())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = vec![ZERO; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }

    pub fn pow(&self, k: u32) -> Poly {
        (0..k).fold(Poly::constant(ONE), |acc, _| acc.mul(self))
    }

    /// Long division: returns `(quotient, remainder)`.
    pub fn div_rem(&self, divisor: &Poly) -> (Poly, Poly) {
        assert!(!divisor.is_zero(), "division by the zero polynomial");
        let dn = divisor.degree();
        if self.degree() < dn {
            return (Poly::constant(ZERO), self.clone());
        }
        let lead = divisor.leading();
        let mut rem = self.coeffs.clone();
        let mut quot = vec![ZERO; self.degree() - dn + 1];
        for k in (0..quot.len()).rev() {
            let q = rem[k + dn] / lead;
            quot[k] = q;
            for (j, d) in divisor.coeffs.iter().enumerate() {
                rem[k + j] -= q * d;
            }
        }
        rem.truncate(dn.max(1));
        (Poly::new(quot), Poly::new(rem))
    }

    /// Synthetic division by `(z - r)`, discarding the remainder.
    pub fn deflate(&self, r: Complex64) -> Poly {
        let n = self.degree();
        if n == 0 {
            return Poly::constant(ZERO);
        }
        let mut out = vec![ZERO; n];
        let mut acc = ZERO;
        for k in (1..=n).rev() {
            acc = acc * r + self.coeffs[k];
            out[k - 1] = acc;
        }
        Poly::new(out)
    }

    /// Sum of coefficient moduli weighted by powers of `|z|`, used to scale
    /// residuals.
    pub fn magnitude_at(&self, z: Complex64) -> f64 {
        let r = z.norm();
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c.norm())
    }

    pub fn coefficient_scale(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// All roots with multiplicities.
    ///
    /// Aberth-Ehrlich iteration from a perturbed circle of radius
    /// `1 + max |a_k / a_n|`, Newton polishing, then clustering of nearby
    /// approximations into multiple roots whose centres are refined on the
    /// appropriate derivative.
    pub fn roots(&self) -> Result<Vec<Root>> {
        let n = self.degree();
        if n == 0 {
            return Ok(Vec::new());
        }
        let lead = self.leading();
        if n == 1 {
            return Ok(vec![Root {
                value: -self.coeffs[0] / lead,
                multiplicity: 1,
            }]);
        }
        let monic: Vec<Complex64> = self.coeffs.iter().map(|c| c / lead).collect();
        let p = Poly::new(monic);
        let approx = aberth(&p)?;
        let scale = approx.iter().map(|z| z.norm()).fold(1.0, f64::max);
        let clusters = cluster(&approx, CLUSTER_TOL * scale);
        let mut roots = Vec::with_capacity(clusters.len());
        for members in clusters {
            let m = members.len();
            let mean = members.iter().fold(ZERO, |a, &i| a + approx[i]) / m as f64;
            let value = refine_multiple(&p, mean, m);
            roots.push(Root {
                value,
                multiplicity: m,
            });
        }
        for r in &roots {
            let res = p.eval(r.value).norm() / p.magnitude_at(r.value).max(1.0);
            if !res.is_finite() || res > ROOT_RESIDUAL_TOL {
                return Err(Error::RootFindingFailure { residual: res });
            }
        }
        roots.sort_by(|a, b| {
            a.value
                .re
                .total_cmp(&b.value.re)
                .then(a.value.im.total_cmp(&b.value.im))
        });
        Ok(roots)
    }

    /// Parses expressions such as `z^2 - 1`, `(z-1)*(z+2i)` or `2.5z^3 + i z`.
    pub fn parse(src: &str) -> Result<Poly> {
        let mut parser = ExprParser {
            src: src.as_bytes(),
            pos: 0,
        };
        let p = parser.expr()?;
        parser.skip_ws();
        if parser.pos != parser.src.len() {
            return Err(parser.err("unexpected trailing input"));
        }
        Ok(p)
    }
}

/// Relative single-linkage distance under which root approximations are
/// merged into one multiple root.
pub const CLUSTER_TOL: f64 = 1e-5;
/// Relative residual every reported root must satisfy.
pub const ROOT_RESIDUAL_TOL: f64 = 1e-9;

fn aberth(p: &Poly) -> Result<Vec<Complex64>> {
    let n = p.degree();
    let c = &p.coeffs;
    let radius = 1.0 + c[..n].iter().map(|a| a.norm()).fold(0.0, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_ab37);
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| {
            let theta = std::f64::consts::TAU * (k as f64 + rng.gen_range(0.1..0.9)) / n as f64;
            Complex64::from_polar(radius * rng.gen_range(0.5..1.0), theta)
        })
        .collect();
    let dp = p.derivative();
    let mut converged = false;
    for _ in 0..1000 {
        let mut max_step: f64 = 0.0;
        for k in 0..n {
            let pk = p.eval(z[k]);
            if pk == ZERO {
                continue;
            }
            let ratio = pk / dp.eval(z[k]);
            let repulsion: Complex64 = (0..n)
                .filter(|&j| j != k)
                .map(|j| ONE / (z[k] - z[j]))
                .sum();
            let step = ratio / (ONE - ratio * repulsion);
            if step.is_finite() {
                z[k] -= step;
                max_step = max_step.max(step.norm() / z[k].norm().max(1.0));
            }
        }
        if max_step < 1e-15 {
            converged = true;
            break;
        }
    }
    if !converged {
        // Aberth stalls on multiple roots at ~eps^(1/m); clustering absorbs it.
        let worst = z
            .iter()
            .map(|&r| p.eval(r).norm() / p.magnitude_at(r).max(1.0))
            .fold(0.0, f64::max);
        if !worst.is_finite() {
            return Err(Error::RootFindingFailure { residual: worst });
        }
    }
    // Newton polish; keep the polished value only when it improves.
    for r in z.iter_mut() {
        for _ in 0..3 {
            let (v, d) = p.eval_with_derivative(*r);
            if d == ZERO {
                break;
            }
            let cand = *r - v / d;
            if p.eval(cand).norm() < v.norm() {
                *r = cand;
            } else {
                break;
            }
        }
    }
    Ok(z)
}

fn cluster(points: &[Complex64], tol: f64) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        p[i] = r;
        r
    }
    for i in 0..n {
        for j in i + 1..n {
            if (points[i] - points[j]).norm() < tol {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut index = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if index[r] == usize::MAX {
            index[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[index[r]].push(i);
    }
    groups
}

/// Newton on the `(m-1)`-th derivative, where an `m`-fold root is simple.
fn refine_multiple(p: &Poly, start: Complex64, m: usize) -> Complex64 {
    let mut q = p.clone();
    for _ in 1..m {
        q = q.derivative();
    }
    let mut r = start;
    for _ in 0..20 {
        let (v, d) = q.eval_with_derivative(r);
        if d == ZERO {
            break;
        }
        let step = v / d;
        let cand = r - step;
        if !cand.is_finite() || q.eval(cand).norm() > v.norm() {
            break;
        }
        r = cand;
        if step.norm() <= 1e-16 * r.norm().max(1.0) {
            break;
        }
    }
    r
}

struct ExprParser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl ExprParser<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::Expression {
            pos: self.pos,
            msg: msg.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Poly> {
        let mut acc = self.term()?;
        while let Some(c) = self.peek() {
            match c {
                b'+' => {
                    self.pos += 1;
                    acc = acc.add(&self.term()?);
                }
                b'-' => {
                    self.pos += 1;
                    acc = acc.sub(&self.term()?);
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<Poly> {
        let mut acc = self.power()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    acc = acc.mul(&self.power()?);
                }
                // implicit multiplication: `2z`, `3(z-1)`, `z(z+1)`
                Some(c) if c == b'(' || c == b'z' || c == b'i' || c.is_ascii_digit() || c == b'.' => {
                    acc = acc.mul(&self.power()?);
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn power(&mut self) -> Result<Poly> {
        let base = self.unary()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            self.skip_ws();
            let start = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            let k: u32 = std::str::from_utf8(&self.src[start..self.pos])
                .unwrap()
                .parse()
                .map_err(|_| self.err("expected a nonnegative integer exponent"))?;
            return Ok(base.pow(k));
        }
        Ok(base)
    }

    fn unary(&mut self) -> Result<Poly> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(self.unary()?.neg())
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<Poly> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected ')'"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(b'z') => {
                self.pos += 1;
                Ok(Poly::monomial(ONE, 1))
            }
            Some(b'i') => {
                self.pos += 1;
                Ok(Poly::constant(Complex64::new(0.0, 1.0)))
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                let start = self.pos;
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_digit() || self.src[self.pos] == b'.')
                {
                    self.pos += 1;
                }
                if self.pos < self.src.len() && matches!(self.src[self.pos], b'e' | b'E') {
                    let save = self.pos;
                    self.pos += 1;
                    if self.pos < self.src.len() && matches!(self.src[self.pos], b'+' | b'-') {
                        self.pos += 1;
                    }
                    let digits = self.pos;
                    while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                        self.pos += 1;
                    }
                    if digits == self.pos {
                        self.pos = save;
                    }
                }
                let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                let v: f64 = text.parse().map_err(|_| self.err("malformed number"))?;
                Ok(Poly::constant(Complex64::new(v, 0.0)))
            }
            Some(_) => Err(self.err("unexpected character")),
            None => Err(self.err("unexpected end of input")),
        }
    }
}
