//! Robin Poisson and eigenvalue solvers on 2-D Riemannian domains, Schwarz
//! rearrangement, Lorentz norms, and comparison checks against symmetrized
//! problems on model-space balls.

pub mod error;
#[cfg(feature = "cli")]
pub mod experiment;
pub mod expr;
pub mod fem;
pub mod geometry;
pub mod mesh;
pub mod quadrature;
pub mod radial;
pub mod rearrange;
pub mod verify;

pub use error::{Error, Result};
pub use geometry::{Curvature, GeodesicBall, ModelSpace};
pub use mesh::{Geometry, MeasuredMesh, ScalarField, WarpProfile};
