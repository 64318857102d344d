//! Analysis of meromorphic quadratic differentials on the Riemann sphere.

pub mod classify;
pub mod measures;
pub mod pipeline;
pub mod error;
pub mod ext;
pub mod heine;
pub mod poly;
pub mod qd;
pub mod quad;
pub mod topology;
pub mod tracer;

pub use error::{Error, Result};
pub use ext::Extended;
pub use poly::Poly;
pub use qd::{CriticalInventory, CriticalPoint, Location, PointKind, RationalQD, SqrtResidue};
