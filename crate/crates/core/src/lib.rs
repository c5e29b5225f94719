//! Exactly divergence-free H(div)-conforming discontinuous Galerkin discretization of the
//! incompressible Euler and Navier–Stokes equations on triangulations of the unit square,
//! with an explicit second-order Runge–Kutta integrator, a semi-implicit Crank–Nicolson
//! comparator, manufactured-solution error norms and CFL/convergence studies.
//!
//! All numerical code is generic over the [`Real`] scalar (`f32` or `f64`); the `*64`
//! aliases below pin the double-precision instantiation used by the CLI and the
//! experiment drivers.

pub mod diagnostics;
pub mod error;
pub mod fe_space;
pub mod forms;
pub mod integrators;
pub mod linsolve;
pub mod manufactured;
pub mod mesh;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::{Mat2, Real, Vec2};

pub type Mesh64 = mesh::Mesh<f64>;
pub type RtSpace64 = fe_space::RtSpace<f64>;
pub type DgSpace64 = fe_space::DgSpace<f64>;
pub type CoefVec64 = fe_space::CoefVec<f64>;
pub type Discretization64 = integrators::Discretization<f64>;
pub type SchemeConfig64 = integrators::SchemeConfig<f64>;
pub type RunReport64 = integrators::RunReport<f64>;
pub type StudyConfig64 = diagnostics::StudyConfig<f64>;
pub type TaylorGreen64 = manufactured::TaylorGreen<f64>;
