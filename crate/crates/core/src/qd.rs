//! Rational quadratic differentials `sign * U1(z)/U2(z) dz^2` on the sphere.

use std::f64::consts::TAU;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{Poly, Root};

/// Roots of U1 and U2 closer than this (relative to the root scale) cancel.
pub const CANCEL_TOL: f64 = 1e-8;
/// Roots closer than this but farther than [`CANCEL_TOL`] are ambiguous.
pub const AMBIGUOUS_TOL: f64 = 1e-6;

/// A point of the Riemann sphere. Infinity is symbolic, never a large float.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Location {
    Finite([f64; 2]),
    Infinity,
}

impl Location {
    pub fn finite(z: Complex64) -> Self {
        Location::Finite([z.re, z.im])
    }

    pub fn as_complex(&self) -> Option<Complex64> {
        match self {
            Location::Finite([re, im]) => Some(Complex64::new(*re, *im)),
            Location::Infinity => None,
        }
    }

    pub fn is_infinity(&self) -> bool {
        matches!(self, Location::Infinity)
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Finite([re, im]) => write!(f, "{re}{im:+}i"),
            Location::Infinity => f.write_str("inf"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointKind {
    Zero,
    SimplePole,
    HigherPole,
    /// Only used for the point at infinity when it is not critical.
    Regular,
}

/// A critical point with its local expansion `f ~ coefficient * t^local_order`,
/// where `t = z - p` (or `t = 1/z` in the chart at infinity).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub id: usize,
    pub location: Location,
    pub kind: PointKind,
    /// Multiplicity as a zero or pole (0 for a regular point).
    pub order: u32,
    #[serde(skip)]
    pub coefficient: Complex64,
}

impl CriticalPoint {
    /// Signed order: positive for zeros, negative for poles.
    pub fn local_order(&self) -> i32 {
        match self.kind {
            PointKind::Zero => self.order as i32,
            PointKind::Regular => 0,
            _ => -(self.order as i32),
        }
    }

    pub fn is_finite_critical(&self) -> bool {
        matches!(self.kind, PointKind::Zero | PointKind::SimplePole)
    }

    pub fn is_infinite_critical(&self) -> bool {
        self.kind == PointKind::HigherPole
    }

    pub fn is_pole(&self) -> bool {
        matches!(self.kind, PointKind::SimplePole | PointKind::HigherPole)
    }
}

/// Every zero and pole of the differential, the point at infinity last.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalInventory {
    pub points: Vec<CriticalPoint>,
}

impl CriticalInventory {
    pub fn infinity(&self) -> &CriticalPoint {
        self.points.last().expect("inventory always holds infinity")
    }

    pub fn finite_points(&self) -> &[CriticalPoint] {
        &self.points[..self.points.len() - 1]
    }

    /// Zeros and simple poles, infinity included when it is one.
    pub fn finite_critical(&self) -> impl Iterator<Item = &CriticalPoint> {
        self.points.iter().filter(|p| p.is_finite_critical())
    }

    /// Poles of order at least two.
    pub fn infinite_critical(&self) -> impl Iterator<Item = &CriticalPoint> {
        self.points.iter().filter(|p| p.is_infinite_critical())
    }

    pub fn point(&self, id: usize) -> &CriticalPoint {
        &self.points[id]
    }

    /// Pole orders minus zero orders, infinity included.
    pub fn euler_balance(&self) -> i64 {
        self.points
            .iter()
            .map(|p| match p.kind {
                PointKind::Zero => -(p.order as i64),
                PointKind::Regular => 0,
                _ => p.order as i64,
            })
            .sum()
    }
}

/// Residue of the square root at a double pole, defined up to sign.
///
/// The representative has nonnegative imaginary part, with ties broken by a
/// nonnegative real part; consumers must treat it as a `±` pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SqrtResidue {
    pub pole: Location,
    pub value: Complex64,
}

impl SqrtResidue {
    pub fn squared(&self) -> Complex64 {
        self.value * self.value
    }

    /// `value^2` real and negative: closed trajectories encircle the pole.
    pub fn is_imaginary(&self, tol: f64) -> bool {
        let sq = self.squared();
        sq.re < 0.0 && sq.im.abs() <= tol * sq.norm()
    }
}

fn normalize_sign(v: Complex64) -> Complex64 {
    // imaginary parts at rounding level count as a tie
    let tie = v.im.abs() <= 1e-12 * v.norm();
    if (!tie && v.im < 0.0) || (tie && v.re < 0.0) {
        -v
    } else {
        v
    }
}

/// A rational quadratic differential `sign * U1/U2 dz^2` in reduced form.
#[derive(Clone, Debug)]
pub struct RationalQD {
    numerator: Poly,
    denominator: Poly,
    sign: f64,
    zeros: Vec<Root>,
    poles: Vec<Root>,
    scale: f64,
}

/// Input document: coefficients ascending by degree.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DifferentialDoc {
    pub numerator: PolySpec,
    pub denominator: PolySpec,
    #[serde(default = "default_sign")]
    pub sign: i32,
}

fn default_sign() -> i32 {
    1
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PolySpec {
    Coeffs(Vec<CoeffSpec>),
    Expr(String),
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CoeffSpec {
    Pair([f64; 2]),
    Real(f64),
}

impl PolySpec {
    pub fn to_poly(&self) -> Result<Poly> {
        match self {
            PolySpec::Coeffs(c) if c.is_empty() => Err(Error::EmptyPolynomial),
            PolySpec::Coeffs(c) => Ok(Poly::new(
                c.iter()
                    .map(|x| match *x {
                        CoeffSpec::Pair([re, im]) => Complex64::new(re, im),
                        CoeffSpec::Real(re) => Complex64::new(re, 0.0),
                    })
                    .collect(),
            )),
            PolySpec::Expr(s) if s.trim().is_empty() => Err(Error::EmptyPolynomial),
            PolySpec::Expr(s) => Poly::parse(s),
        }
    }

    pub fn from_poly(p: &Poly) -> Self {
        PolySpec::Coeffs(p.coeffs().iter().map(|c| CoeffSpec::Pair([c.re, c.im])).collect())
    }
}

/// Parses a differential document (JSON text).
pub fn parse_differential(text: &str) -> Result<RationalQD> {
    let doc: DifferentialDoc = serde_json::from_str(text)?;
    RationalQD::from_doc(&doc)
}

impl RationalQD {
    pub fn from_doc(doc: &DifferentialDoc) -> Result<Self> {
        let sign = match doc.sign {
            1 => 1.0,
            -1 => -1.0,
            s => return Err(Error::InvalidDocument(format!("sign must be +1 or -1, got {s}"))),
        };
        RationalQD::new(doc.numerator.to_poly()?, doc.denominator.to_poly()?, sign)
    }

    /// Builds the reduced differential `sign * numerator/denominator dz^2`.
    pub fn new(numerator: Poly, denominator: Poly, sign: f64) -> Result<Self> {
        if numerator.is_zero() {
            return Err(Error::ZeroDifferential);
        }
        if denominator.is_zero() {
            return Err(Error::ZeroDenominator);
        }
        let mut zeros = numerator.roots()?;
        let mut poles = denominator.roots()?;
        let scale = zeros
            .iter()
            .chain(poles.iter())
            .map(|r| r.value.norm())
            .fold(1.0, f64::max);
        let mut num = numerator;
        let mut den = denominator;
        for z in zeros.iter_mut() {
            for p in poles.iter_mut() {
                if z.multiplicity == 0 || p.multiplicity == 0 {
                    continue;
                }
                let d = (z.value - p.value).norm();
                if d < CANCEL_TOL * scale {
                    let k = z.multiplicity.min(p.multiplicity);
                    for _ in 0..k {
                        num = num.deflate(z.value);
                        den = den.deflate(p.value);
                    }
                    z.multiplicity -= k;
                    p.multiplicity -= k;
                } else if d < AMBIGUOUS_TOL * scale {
                    return Err(Error::UnreducibleWithinTolerance {
                        numerator: Location::finite(z.value).to_string(),
                        denominator: Location::finite(p.value).to_string(),
                        distance: d,
                    });
                }
            }
        }
        zeros.retain(|r| r.multiplicity > 0);
        poles.retain(|r| r.multiplicity > 0);
        Ok(RationalQD {
            numerator: num,
            denominator: den,
            sign,
            zeros,
            poles,
            scale,
        })
    }

    /// `(U1/U2) dz^2` with the given sign from polynomial expressions.
    pub fn from_exprs(numerator: &str, denominator: &str, sign: f64) -> Result<Self> {
        RationalQD::new(Poly::parse(numerator)?, Poly::parse(denominator)?, sign)
    }

    pub fn to_doc(&self) -> DifferentialDoc {
        DifferentialDoc {
            numerator: PolySpec::from_poly(&self.numerator),
            denominator: PolySpec::from_poly(&self.denominator),
            sign: if self.sign < 0.0 { -1 } else { 1 },
        }
    }

    pub fn numerator(&self) -> &Poly {
        &self.numerator
    }

    pub fn denominator(&self) -> &Poly {
        &self.denominator
    }

    pub fn sign(&self) -> f64 {
        self.sign
    }

    /// `max(1, max |root|)` over zeros and poles.
    pub fn root_scale(&self) -> f64 {
        self.scale
    }

    /// `f(z)` in `f(z) dz^2`.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.numerator.eval(z) / self.denominator.eval(z) * self.sign
    }

    /// `f(z)` and `f'(z)`.
    pub fn eval_with_derivative(&self, z: Complex64) -> (Complex64, Complex64) {
        let (n, dn) = self.numerator.eval_with_derivative(z);
        let (d, dd) = self.denominator.eval_with_derivative(z);
        let f = n / d * self.sign;
        let df = (dn * d - n * dd) / (d * d) * self.sign;
        (f, df)
    }

    /// Pole order at infinity (`4 + deg U1 - deg U2`); negative means a zero.
    pub fn order_at_infinity(&self) -> i32 {
        4 + self.numerator.degree() as i32 - self.denominator.degree() as i32
    }

    /// The same differential in the chart `w = 1/z`.
    pub fn at_infinity(&self) -> Result<RationalQD> {
        // f(1/w) / w^4 = sign * w^{d2} U1(1/w) / (w^{d1} U2(1/w) w^4) * w^{d1-d2}
        let rev = |p: &Poly| Poly::new(p.coeffs().iter().rev().copied().collect());
        let d1 = self.numerator.degree() as i32;
        let d2 = self.denominator.degree() as i32;
        let shift = d2 - d1 - 4;
        let one = Complex64::new(1.0, 0.0);
        let (num, den) = if shift >= 0 {
            (rev(&self.numerator).mul(&Poly::monomial(one, shift as usize)), rev(&self.denominator))
        } else {
            (rev(&self.numerator), rev(&self.denominator).mul(&Poly::monomial(one, (-shift) as usize)))
        };
        RationalQD::new(num, den, self.sign)
    }

    /// Every zero and pole, including the point at infinity.
    pub fn critical_inventory(&self) -> Result<CriticalInventory> {
        let mut pts: Vec<(Complex64, PointKind, u32)> = Vec::new();
        for z in &self.zeros {
            pts.push((z.value, PointKind::Zero, z.multiplicity as u32));
        }
        for p in &self.poles {
            let kind = if p.multiplicity == 1 {
                PointKind::SimplePole
            } else {
                PointKind::HigherPole
            };
            pts.push((p.value, kind, p.multiplicity as u32));
        }
        pts.sort_by(|a, b| a.0.re.total_cmp(&b.0.re).then(a.0.im.total_cmp(&b.0.im)));
        let mut points = Vec::with_capacity(pts.len() + 1);
        for (id, (z, kind, order)) in pts.into_iter().enumerate() {
            let coefficient = self.local_coefficient(z, kind, order);
            points.push(CriticalPoint {
                id,
                location: Location::finite(z),
                kind,
                order,
                coefficient,
            });
        }
        let k = self.order_at_infinity();
        let (kind, order) = match k {
            k if k < 0 => (PointKind::Zero, (-k) as u32),
            0 => (PointKind::Regular, 0),
            1 => (PointKind::SimplePole, 1),
            k => (PointKind::HigherPole, k as u32),
        };
        points.push(CriticalPoint {
            id: points.len(),
            location: Location::Infinity,
            kind,
            order,
            coefficient: self.numerator.leading() / self.denominator.leading() * self.sign,
        });
        let inv = CriticalInventory { points };
        debug_assert_eq!(inv.euler_balance(), 4);
        Ok(inv)
    }

    fn local_coefficient(&self, p: Complex64, kind: PointKind, order: u32) -> Complex64 {
        let (mut num, mut den) = (self.numerator.clone(), self.denominator.clone());
        for _ in 0..order {
            if kind == PointKind::Zero {
                num = num.deflate(p);
            } else {
                den = den.deflate(p);
            }
        }
        num.eval(p) / den.eval(p) * self.sign
    }

    /// Residue of the square root at a double pole.
    pub fn sqrt_residue(&self, pole: Location) -> Result<SqrtResidue> {
        let inv = self.critical_inventory()?;
        let point = self.find_point(&inv, pole)?;
        if point.local_order() != -2 {
            return Err(Error::NotDoublePole(pole.to_string()));
        }
        Ok(SqrtResidue {
            pole: point.location,
            value: normalize_sign(point.coefficient.sqrt()),
        })
    }

    /// Horizontal directions at a zero or simple pole, in `[0, 2pi)`.
    ///
    /// At infinity the angles refer to the chart `w = 1/z`.
    pub fn critical_directions(&self, point: Location) -> Result<Vec<f64>> {
        let inv = self.critical_inventory()?;
        let p = self.find_point(&inv, point)?;
        if !p.is_finite_critical() {
            return Err(Error::NotFiniteCritical(point.to_string()));
        }
        Ok(directions_for(p))
    }

    /// Finds the inventory entry at a location (within the cancellation
    /// tolerance).
    pub fn find_point<'a>(&self, inv: &'a CriticalInventory, at: Location) -> Result<&'a CriticalPoint> {
        match at {
            Location::Infinity => Ok(inv.infinity()),
            Location::Finite(_) => {
                let z = at.as_complex().unwrap();
                inv.finite_points()
                    .iter()
                    .find(|p| (p.location.as_complex().unwrap() - z).norm() < AMBIGUOUS_TOL * self.scale)
                    .ok_or_else(|| Error::NotFiniteCritical(at.to_string()))
            }
        }
    }
}

/// Solutions of `arg(a) + (k+2) theta = 0 (mod 2pi)`, sorted.
pub fn directions_for(p: &CriticalPoint) -> Vec<f64> {
    let k = p.local_order();
    let n = (k + 2) as usize;
    if n == 0 {
        return Vec::new();
    }
    let base = -p.coefficient.arg();
    let mut out: Vec<f64> = (0..n)
        .map(|j| (base + TAU * j as f64) / n as f64)
        .map(|t| {
            let r = t.rem_euclid(TAU);
            if (TAU - r) < 1e-15 {
                0.0
            } else {
                r
            }
        })
        .collect();
    out.sort_by(f64::total_cmp);
    out
}

/// Angular distance on the circle.
pub fn angle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}
