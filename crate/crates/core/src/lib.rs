//! Truncated Taylor arithmetic on jet spaces, with tools for checking whether
//! third-order systems are variational and whether generators are symmetries
//! of them, and a worked model of a classical spinning particle.

pub mod dsl;
pub mod error;
pub mod field;
pub mod jet;
pub mod prolong;
pub mod rng;
pub mod sampling;
pub mod spin;
pub mod symmetry;
pub mod taylor;
pub mod variational;

pub use error::{Error, Result};
pub use field::{Field, FieldRef, GenericField};
pub use jet::{Coord, JetPoint, Layout};
pub use taylor::{Scalar, TaylorScalar, TaylorSpace};
