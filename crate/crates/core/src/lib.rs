//! Octonion algebra, left/right monogenic fields, and numerical evaluation of
//! winding numbers and orders of zeroes via the octonionic Cauchy kernel.
//!
//! ```
//! use octo_degree::{degree, fields::OctonionField, octonion::Octonion, surfaces};
//!
//! let s = surfaces::sphere(Octonion::ZERO, 1.0).unwrap();
//! let spec = surfaces::QuadratureSpec::tensor(4);
//! let w = degree::winding_number(&s, &Octonion::ZERO, Default::default(), &spec, &Default::default()).unwrap();
//! assert_eq!(w.rounded, 1);
//! # let _ = OctonionField::identity();
//! ```

pub mod cli;
pub mod degree;
pub mod fields;
pub mod matrix;
pub mod octonion;
pub mod quadrature;
pub mod surfaces;

pub use degree::{DegreeError, DegreeResult, Tolerances};
pub use fields::{OctonionField, Side};
pub use octonion::Octonion;
