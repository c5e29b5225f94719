//! Finite element spaces: quadrature, the reference RT_k and `P_k` elements, the Piola
//! transform, global dof maps, interpolation and field evaluation.

pub mod interpolate;
pub mod piola;
pub mod quadrature;
pub mod reference;
pub mod space;

pub use interpolate::{l2_project_scalar, rt_interpolate};
pub use piola::piola_map;
pub use quadrature::{SegmentRule, TriangleRule};
pub use reference::{legendre, RtReference, ScalarReference, VectorEval, SUPPORTED_DEGREES};
pub use space::{CoefVec, DgSpace, RtSpace, SpaceKind, SpaceTag};

use crate::error::Result;
use crate::scalar::Real;

/// Reference basis evaluations `(value, divergence)` at a point of the reference triangle.
pub fn rt_reference_basis<T: Real>(k: usize, point: crate::scalar::Vec2<T>) -> Result<Vec<(crate::scalar::Vec2<T>, T)>> {
    let r = RtReference::<T>::new(k)?;
    Ok(r.eval(point).into_iter().map(|e| (e.value, e.div)).collect())
}
