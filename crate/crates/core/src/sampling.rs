//! Seeded random sample points and tangent vectors.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::models::{FactorKind, ManifoldPoint, ModelSpec, TangentVec};

/// Uniform on each sphere factor; Euclidean coordinates uniform in the ball of
/// radius `euclid_radius`.
pub fn random_point<R: Rng + ?Sized>(model: &ModelSpec, rng: &mut R, euclid_radius: f64) -> ManifoldPoint {
    let mut p = vec![0.0; model.ambient_dim()];
    for f in model.factors() {
        let block = &mut p[f.ambient.clone()];
        for x in block.iter_mut() {
            *x = rng.sample(StandardNormal);
        }
        let n = block.iter().map(|x| x * x).sum::<f64>().sqrt();
        let scale = match f.kind {
            FactorKind::Sphere { radius, .. } => radius / n,
            FactorKind::Euclidean { dim } => {
                let u: f64 = rng.random();
                euclid_radius * u.powf(1.0 / dim as f64) / n
            }
        };
        block.iter_mut().for_each(|x| *x *= scale);
    }
    let mut p = ManifoldPoint(p);
    model.project_point(&mut p);
    p
}

/// Standard Gaussian tangent vector at `p`.
pub fn random_tangent<R: Rng + ?Sized>(model: &ModelSpec, rng: &mut R, p: &ManifoldPoint) -> TangentVec {
    let mut v = TangentVec((0..model.ambient_dim()).map(|_| rng.sample(StandardNormal)).collect());
    model.project_tangent(p, &mut v);
    v
}

pub fn random_points<R: Rng + ?Sized>(model: &ModelSpec, rng: &mut R, count: usize, euclid_radius: f64) -> Vec<ManifoldPoint> {
    (0..count).map(|_| random_point(model, rng, euclid_radius)).collect()
}
