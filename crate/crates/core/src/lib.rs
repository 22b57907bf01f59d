//! Numerical laboratory for φ-geodesics on closed-form gradient Ricci
//! shrinkers.
//!
//! - [`models`]: the shrinker catalog with closed-form geometry.
//! - [`numgeom`]: a finite-difference curvature oracle on charts.
//! - [`phigeo`]: the potential `φ = cR/(2f)`, the action, and two
//!   boundary-value solvers.
//! - [`audit`]: pointwise identities, integral inequalities along minimal
//!   φ-geodesics, and the good-point scan.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audit;
pub mod models;
pub mod numgeom;
pub mod path;
pub mod phigeo;
pub mod quadrature;
pub mod sampling;

pub use audit::{AuditError, AuditReport, CutoffZeta, GoodPoint, Verdict};
pub use models::{Family, GeometryEval, ManifoldPoint, ModelError, ModelSpec, TangentVec};
pub use numgeom::{Chart, FdConfig, NumGeomError};
pub use path::{MinimalityEvidence, PathSource, PhiPath};
pub use phigeo::{DiscreteConfig, PhiGeoError, PhiParams, ShootingConfig, SolverConfig};
