//! Lifted affine connections on tangent and cotangent bundles.
//!
//! A torsion-free connection `∇` on a base `B` (given on a chart box of ℝⁿ)
//! induces a family of torsion-free connections `D` on `M = TB` or `T*B`,
//! parametrised by a symmetric End-valued form `Φ̂`. The crate evaluates `D`
//! both in the adapted frame and in coordinates, computes its curvature and
//! covariant derivative of curvature, checks metric and symplectic
//! compatibility on `T*B`, integrates parallel transport and geodesics, and
//! estimates holonomy algebras.

pub mod base;
pub mod conventions;
pub mod error;
pub mod expr;
pub mod lifted;
pub mod presets;
pub mod scenario;
pub mod structures;
pub mod tensor;
pub mod transport;

pub use base::{BaseConnection, BundleConnection, Flavor};
pub use error::{Error, Result};
pub use lifted::{FrameField, FramedVector, LiftedSpace, PhiSpec, TotalPoint};
pub use tensor::{BoxDomain, SmoothField, Tensor};
