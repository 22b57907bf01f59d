//! Shared fixtures for the criterion benches.

use shrinker_core::{ManifoldPoint, ModelSpec};

/// The canonical non-compact case: `SphereCylinder(2, 2)` from `O` to a point
/// at radial distance `r`.
pub fn cylinder_case(r: f64) -> (ModelSpec, ManifoldPoint, ManifoldPoint) {
    let model = ModelSpec::cylinder(2, 2).expect("valid model");
    let x = model.base_point();
    let y = model.point_at_radius(r).expect("non-compact");
    (model, x, y)
}
