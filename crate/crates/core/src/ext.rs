//! Reals extended by signed infinity.
//!
//! Reeb edge lengths, domain widths, potential values at leaves and
//! component masses can all be infinite. Arithmetic is explicit: adding a
//! finite value to an infinity keeps the infinity, `inf - inf` is an error.

use std::cmp::Ordering;
use std::fmt;
use std::ops::Neg;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Extended {
    Finite(f64),
    PosInfinity,
    NegInfinity,
}

impl Extended {
    pub const ZERO: Extended = Extended::Finite(0.0);

    pub fn is_finite(self) -> bool {
        matches!(self, Extended::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Extended::Finite(v) => Some(v),
            _ => None,
        }
    }

    /// Sum; fails only on `+inf + -inf`.
    pub fn checked_add(self, other: Extended) -> Result<Extended> {
        use Extended::*;
        match (self, other) {
            (Finite(a), Finite(b)) => Ok(Finite(a + b)),
            (PosInfinity, NegInfinity) | (NegInfinity, PosInfinity) => {
                Err(Error::IndeterminateInfinity)
            }
            (PosInfinity, _) | (_, PosInfinity) => Ok(PosInfinity),
            (NegInfinity, _) | (_, NegInfinity) => Ok(NegInfinity),
        }
    }

    pub fn checked_sub(self, other: Extended) -> Result<Extended> {
        self.checked_add(-other)
    }

    pub fn scale(self, k: f64) -> Extended {
        match self {
            Extended::Finite(v) => Extended::Finite(v * k),
            inf if k > 0.0 => inf,
            inf if k < 0.0 => -inf,
            _ => Extended::ZERO,
        }
    }

    pub fn to_f64(self) -> f64 {
        match self {
            Extended::Finite(v) => v,
            Extended::PosInfinity => f64::INFINITY,
            Extended::NegInfinity => f64::NEG_INFINITY,
        }
    }

    pub fn from_f64(v: f64) -> Extended {
        if v == f64::INFINITY {
            Extended::PosInfinity
        } else if v == f64::NEG_INFINITY {
            Extended::NegInfinity
        } else {
            Extended::Finite(v)
        }
    }
}

impl Neg for Extended {
    type Output = Extended;
    fn neg(self) -> Extended {
        match self {
            Extended::Finite(v) => Extended::Finite(-v),
            Extended::PosInfinity => Extended::NegInfinity,
            Extended::NegInfinity => Extended::PosInfinity,
        }
    }
}

impl PartialOrd for Extended {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.to_f64().partial_cmp(&other.to_f64())
    }
}

impl From<f64> for Extended {
    fn from(v: f64) -> Self {
        Extended::from_f64(v)
    }
}

impl fmt::Display for Extended {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Extended::Finite(v) => write!(f, "{v}"),
            Extended::PosInfinity => f.write_str("inf"),
            Extended::NegInfinity => f.write_str("-inf"),
        }
    }
}

impl Serialize for Extended {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Extended::Finite(v) => s.serialize_f64(*v),
            Extended::PosInfinity => s.serialize_str("inf"),
            Extended::NegInfinity => s.serialize_str("-inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Extended {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct ExtVisitor;
        impl Visitor<'_> for ExtVisitor {
            type Value = Extended;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number, \"inf\" or \"-inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Extended, E> {
                Ok(Extended::Finite(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Extended, E> {
                Ok(Extended::Finite(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Extended, E> {
                Ok(Extended::Finite(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Extended, E> {
                match v.trim() {
                    "inf" | "+inf" | "infinity" | "Infinity" => Ok(Extended::PosInfinity),
                    "-inf" | "-infinity" | "-Infinity" => Ok(Extended::NegInfinity),
                    other => other
                        .parse::<f64>()
                        .map(Extended::Finite)
                        .map_err(|_| E::custom(format!("not an extended real: {other:?}"))),
                }
            }
        }
        d.deserialize_any(ExtVisitor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infinity_arithmetic() {
        let inf = Extended::PosInfinity;
        assert_eq!(inf.checked_add(Extended::Finite(3.0)).unwrap(), inf);
        assert!(matches!(inf.checked_sub(inf), Err(Error::IndeterminateInfinity)));
        assert_eq!(Extended::Finite(1.0).checked_sub(inf).unwrap(), Extended::NegInfinity);
        assert!(inf > Extended::Finite(1e300));
    }

    #[test]
    fn serde_forms() {
        let v: Vec<Extended> = serde_json::from_str(r#"[1.5, "inf", "-inf", 2]"#).unwrap();
        assert_eq!(
            v,
            vec![
                Extended::Finite(1.5),
                Extended::PosInfinity,
                Extended::NegInfinity,
                Extended::Finite(2.0)
            ]
        );
        assert_eq!(serde_json::to_string(&v).unwrap(), r#"[1.5,"inf","-inf",2.0]"#);
    }
}
