//! Numerical laboratory for monotone quantities along the level sets of
//! Green's functions and p-capacitary potentials on asymptotically flat
//! 3-manifolds.

pub mod error;
pub mod functionals;
pub mod grid;
pub mod identities;
pub mod mass;
pub mod metric;
pub mod quadrature;
pub mod radial;
pub mod spline;

pub use error::{Error, Result};
pub use metric::{CustomProfile, MetricKind, MetricModel, SphereGeometry};
pub use radial::{Problem, RadialGrid, RadialSolution};
