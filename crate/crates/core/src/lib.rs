//! Planar first-order systems of Hodge type that change from elliptic to
//! hyperbolic across the unit circle: coefficient fields and characteristic
//! geometry, admissible domains, numerical checks of the weighted energy
//! estimates, and a least-squares solver for the mixed boundary value problem.

// Negated comparisons such as `!(h > 0.0)` are used on purpose: they reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod domains;
pub mod error;
pub mod geometry;
pub mod operators;
pub mod poly;
pub mod polygon;
pub mod solver;
pub mod sparse;

pub use error::{Error, Result};
pub use operators::Point;
pub use poly::{Poly2, PolyField};
