//! Catalog of explicit gradient Ricci shrinkers.
//!
//! Every model is a Riemannian product of round spheres and flat Euclidean
//! factors, with potential `f` chosen so that `Rc + ∇∇f = ½ g` holds exactly.
//!
//! # Closed forms
//!
//! A round sphere `Sᵏ(r)` has `Rc = (k−1)/r² · g`, so `Rc = ½ g` forces
//! `r² = 2(k−1)`; this needs `k ≥ 2`. On such a factor `f` is constant and the
//! factor contributes `R = k(k−1)/r² = k/2` and `|Rc|² = k·¼`.
//!
//! A Euclidean factor `ℝᵐ` is flat, so the shrinker equation reads
//! `∇∇f = ½ g`, giving `f = |x|²/4 + const`, `∇f = x/2`, `|∇f|² = |x|²/4`.
//!
//! On a product the quantities add. Writing `R = Σ kᵢ(kᵢ−1)/rᵢ²` (constant),
//! the normalization `f − |∇f|² = R` fixes the additive constant:
//!
//! ```text
//! f = |x|²/4 + R,   ∇f = (0, x/2),   Δf = m/2 = n/2 − R,   |Rc|² = Σ kᵢ(kᵢ−1)²/rᵢ⁴
//! ```
//!
//! | family                 | R         | f               | f(O)      |
//! |------------------------|-----------|-----------------|-----------|
//! | `Gaussian(n)`          | 0         | `|x|²/4`        | 0         |
//! | `RoundSphere(n)`       | n/2       | n/2             | n/2       |
//! | `SphereCylinder(k, m)` | k/2       | `|x|²/4 + k/2`  | k/2       |
//! | `SphereProduct(k, m)`  | (k+m)/2   | (k+m)/2         | (k+m)/2   |
//!
//! Sphere factors are stored as embedding vectors `u ∈ ℝᵏ⁺¹` with `|u| = r`;
//! the embedding is isometric, so the metric on tangent vectors is the
//! ambient dot product block by block.

use std::f64::consts::PI;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::path::{PathSource, PhiPath};

/// Tolerance on `|u| = r` for sphere factors.
pub const SPHERE_TOLERANCE: f64 = 1e-12;
/// Tolerance on `⟨v, u⟩ = 0` for tangent vectors to sphere factors.
pub const TANGENT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("sphere factor dimension must be ≥ 2 (got {0})")]
    SphereDimension(usize),
    #[error("total dimension must be ≥ 2 (got {0})")]
    TotalDimension(usize),
    #[error("cylinder Euclidean dimension must be ≥ 1 (got {0})")]
    EuclideanDimension(usize),
    #[error("malformed model string `{input}`: {reason}")]
    Parse { input: String, reason: String },
    #[error("point has {got} ambient coordinates, model expects {expected}")]
    WrongLength { expected: usize, got: usize },
    #[error("sphere factor {factor}: |u| = {norm}, expected radius {radius}")]
    OffSphere { factor: usize, norm: f64, radius: f64 },
    #[error("non-finite coordinate in point")]
    NonFinite,
    #[error("degenerate endpoints: the two points coincide")]
    DegenerateEndpoints,
    #[error("grid size must be ≥ 2 (got {0})")]
    GridTooSmall(usize),
    #[error("requested radial distance {requested} exceeds the model diameter {diameter}")]
    BeyondDiameter { requested: f64, diameter: f64 },
    #[error("radial distance must be finite and ≥ 0 (got {0})")]
    NegativeRadius(f64),
}

/// The four closed-form shrinker families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Gaussian { n: usize },
    RoundSphere { n: usize },
    SphereCylinder { k: usize, m: usize },
    SphereProduct { k: usize, m: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FactorKind {
    Sphere { dim: usize, radius: f64 },
    Euclidean { dim: usize },
}

/// One product factor and where it lives in the ambient and intrinsic
/// coordinate vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    pub kind: FactorKind,
    pub ambient: Range<usize>,
    pub intrinsic: Range<usize>,
}

impl Factor {
    pub fn dim(&self) -> usize {
        self.intrinsic.len()
    }

    /// Ricci coefficient `κ` with `Rc = κ g` on this factor.
    pub fn ricci_coefficient(&self) -> f64 {
        match self.kind {
            FactorKind::Sphere { dim, radius } => (dim as f64 - 1.0) / (radius * radius),
            FactorKind::Euclidean { .. } => 0.0,
        }
    }

    /// Hessian coefficient `η` with `∇∇f = η g` on this factor.
    pub fn hessian_coefficient(&self) -> f64 {
        match self.kind {
            FactorKind::Sphere { .. } => 0.0,
            FactorKind::Euclidean { .. } => 0.5,
        }
    }

    fn scalar_curvature(&self) -> f64 {
        self.dim() as f64 * self.ricci_coefficient()
    }
}

/// A point stored in ambient coordinates, factor blocks laid out by the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldPoint(pub Vec<f64>);

/// A tangent vector in the same ambient layout as its base point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangentVec(pub Vec<f64>);

impl ManifoldPoint {
    pub fn coords(&self) -> &[f64] {
        &self.0
    }
}

impl TangentVec {
    pub fn zeros(len: usize) -> Self {
        TangentVec(vec![0.0; len])
    }

    pub fn comps(&self) -> &[f64] {
        &self.0
    }

    pub fn dot(&self, other: &TangentVec) -> f64 {
        dot(&self.0, &other.0)
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scaled(&self, a: f64) -> TangentVec {
        TangentVec(self.0.iter().map(|x| a * x).collect())
    }

    pub fn add(&self, other: &TangentVec) -> TangentVec {
        TangentVec(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Closed-form pointwise geometry. Bilinear forms act on tangent vectors in
/// the ambient layout of the model.
#[derive(Debug, Clone)]
pub struct GeometryEval {
    pub f: f64,
    pub grad_f: TangentVec,
    pub scalar_r: f64,
    pub ricci_norm_sq: f64,
    blocks: Vec<(Range<usize>, usize, f64, f64)>,
}

impl GeometryEval {
    fn form(&self, v: &TangentVec, w: &TangentVec, pick: impl Fn(f64, f64) -> f64) -> f64 {
        self.blocks
            .iter()
            .map(|(r, _, kappa, eta)| pick(*kappa, *eta) * dot(&v.0[r.clone()], &w.0[r.clone()]))
            .sum()
    }

    pub fn metric(&self, v: &TangentVec, w: &TangentVec) -> f64 {
        v.dot(w)
    }

    pub fn ricci(&self, v: &TangentVec, w: &TangentVec) -> f64 {
        self.form(v, w, |kappa, _| kappa)
    }

    pub fn hess_f(&self, v: &TangentVec, w: &TangentVec) -> f64 {
        self.form(v, w, |_, eta| eta)
    }

    /// Bakry–Émery tensor `Rc + ∇∇f`.
    pub fn ricci_f(&self, v: &TangentVec, w: &TangentVec) -> f64 {
        self.form(v, w, |kappa, eta| kappa + eta)
    }

    /// `Δf`, the trace of `∇∇f`.
    pub fn laplacian_f(&self) -> f64 {
        self.blocks.iter().map(|(_, dim, _, eta)| eta * *dim as f64).sum()
    }

    pub fn grad_f_norm_sq(&self) -> f64 {
        self.grad_f.dot(&self.grad_f)
    }
}

/// A validated closed-form shrinker.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    family: Family,
    factors: Vec<Factor>,
    ambient_dim: usize,
}

impl ModelSpec {
    pub fn new(family: Family) -> Result<Self, ModelError> {
        let mut layout = Vec::new();
        match family {
            Family::Gaussian { n } => {
                if n < 2 {
                    return Err(ModelError::TotalDimension(n));
                }
                layout.push((false, n));
            }
            Family::RoundSphere { n } => {
                if n < 2 {
                    return Err(ModelError::SphereDimension(n));
                }
                layout.push((true, n));
            }
            Family::SphereCylinder { k, m } => {
                if k < 2 {
                    return Err(ModelError::SphereDimension(k));
                }
                if m < 1 {
                    return Err(ModelError::EuclideanDimension(m));
                }
                layout.push((true, k));
                layout.push((false, m));
            }
            Family::SphereProduct { k, m } => {
                if k < 2 {
                    return Err(ModelError::SphereDimension(k));
                }
                if m < 2 {
                    return Err(ModelError::SphereDimension(m));
                }
                layout.push((true, k));
                layout.push((true, m));
            }
        }
        let mut factors = Vec::with_capacity(layout.len());
        let (mut amb, mut int) = (0, 0);
        for (sphere, dim) in layout {
            let (kind, width) = if sphere {
                let radius = (2.0 * (dim as f64 - 1.0)).sqrt();
                (FactorKind::Sphere { dim, radius }, dim + 1)
            } else {
                (FactorKind::Euclidean { dim }, dim)
            };
            factors.push(Factor { kind, ambient: amb..amb + width, intrinsic: int..int + dim });
            amb += width;
            int += dim;
        }
        Ok(ModelSpec { family, factors, ambient_dim: amb })
    }

    pub fn gaussian(n: usize) -> Result<Self, ModelError> {
        Self::new(Family::Gaussian { n })
    }

    pub fn round_sphere(n: usize) -> Result<Self, ModelError> {
        Self::new(Family::RoundSphere { n })
    }

    pub fn cylinder(k: usize, m: usize) -> Result<Self, ModelError> {
        Self::new(Family::SphereCylinder { k, m })
    }

    pub fn sphere_product(k: usize, m: usize) -> Result<Self, ModelError> {
        Self::new(Family::SphereProduct { k, m })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    /// Intrinsic dimension `n`.
    pub fn dim(&self) -> usize {
        self.factors.iter().map(Factor::dim).sum()
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    /// `R ≡ 0`: only the Gaussian shrinker.
    pub fn is_degenerate(&self) -> bool {
        matches!(self.family, Family::Gaussian { .. })
    }

    pub fn is_compact(&self) -> bool {
        self.factors.iter().all(|f| matches!(f.kind, FactorKind::Sphere { .. }))
    }

    /// Diameter of compact models, `None` otherwise.
    pub fn diameter(&self) -> Option<f64> {
        if !self.is_compact() {
            return None;
        }
        let sq: f64 = self
            .factors
            .iter()
            .map(|f| match f.kind {
                FactorKind::Sphere { radius, .. } => (PI * radius).powi(2),
                FactorKind::Euclidean { .. } => 0.0,
            })
            .sum();
        Some(sq.sqrt())
    }

    /// Constant scalar curvature `R`.
    pub fn scalar_curvature(&self) -> f64 {
        self.factors.iter().map(Factor::scalar_curvature).sum()
    }

    /// Constant `|Rc|²`.
    pub fn ricci_norm_sq(&self) -> f64 {
        self.factors
            .iter()
            .map(|f| f.dim() as f64 * f.ricci_coefficient().powi(2))
            .sum()
    }

    fn euclid_norm_sq(&self, p: &[f64]) -> f64 {
        self.factors
            .iter()
            .filter(|f| matches!(f.kind, FactorKind::Euclidean { .. }))
            .map(|f| dot(&p[f.ambient.clone()], &p[f.ambient.clone()]))
            .sum()
    }

    /// The potential `f`; no validation, usable inside solver stages.
    pub fn potential(&self, p: &ManifoldPoint) -> f64 {
        self.euclid_norm_sq(&p.0) / 4.0 + self.scalar_curvature()
    }

    /// `∇f`, zero on sphere blocks and `x/2` on Euclidean blocks.
    pub fn grad_potential(&self, p: &ManifoldPoint) -> TangentVec {
        let mut g = vec![0.0; self.ambient_dim];
        for f in &self.factors {
            if let FactorKind::Euclidean { .. } = f.kind {
                for i in f.ambient.clone() {
                    g[i] = 0.5 * p.0[i];
                }
            }
        }
        TangentVec(g)
    }

    pub fn validate_point(&self, p: &ManifoldPoint) -> Result<(), ModelError> {
        if p.0.len() != self.ambient_dim {
            return Err(ModelError::WrongLength { expected: self.ambient_dim, got: p.0.len() });
        }
        if p.0.iter().any(|x| !x.is_finite()) {
            return Err(ModelError::NonFinite);
        }
        for (i, f) in self.factors.iter().enumerate() {
            if let FactorKind::Sphere { radius, .. } = f.kind {
                let n = norm(&p.0[f.ambient.clone()]);
                if (n - radius).abs() > SPHERE_TOLERANCE * radius.max(1.0) {
                    return Err(ModelError::OffSphere { factor: i, norm: n, radius });
                }
            }
        }
        Ok(())
    }

    /// Renormalize sphere blocks onto their spheres.
    pub fn project_point(&self, p: &mut ManifoldPoint) {
        for f in &self.factors {
            if let FactorKind::Sphere { radius, .. } = f.kind {
                let block = &mut p.0[f.ambient.clone()];
                let n = norm(block);
                block.iter_mut().for_each(|x| *x *= radius / n);
            }
        }
    }

    /// Remove the normal component of sphere blocks.
    pub fn project_tangent(&self, p: &ManifoldPoint, v: &mut TangentVec) {
        for f in &self.factors {
            if let FactorKind::Sphere { .. } = f.kind {
                let r = f.ambient.clone();
                let u = &p.0[r.clone()];
                let a = dot(u, &v.0[r.clone()]) / dot(u, u);
                for (vi, ui) in v.0[r].iter_mut().zip(u) {
                    *vi -= a * ui;
                }
            }
        }
    }

    pub fn is_tangent(&self, p: &ManifoldPoint, v: &TangentVec) -> bool {
        self.factors.iter().all(|f| match f.kind {
            FactorKind::Sphere { radius, .. } => {
                let r = f.ambient.clone();
                (dot(&p.0[r.clone()], &v.0[r]) / radius).abs() <= TANGENT_TOLERANCE * (1.0 + v.norm())
            }
            FactorKind::Euclidean { .. } => true,
        })
    }

    pub fn eval_geometry(&self, p: &ManifoldPoint) -> Result<GeometryEval, ModelError> {
        self.validate_point(p)?;
        Ok(GeometryEval {
            f: self.potential(p),
            grad_f: self.grad_potential(p),
            scalar_r: self.scalar_curvature(),
            ricci_norm_sq: self.ricci_norm_sq(),
            blocks: self
                .factors
                .iter()
                .map(|f| (f.ambient.clone(), f.dim(), f.ricci_coefficient(), f.hessian_coefficient()))
                .collect(),
        })
    }

    /// Product distance `√(Σ d_factor²)`.
    pub fn distance(&self, p: &ManifoldPoint, q: &ManifoldPoint) -> Result<f64, ModelError> {
        self.validate_point(p)?;
        self.validate_point(q)?;
        Ok(self.distance_unchecked(p, q))
    }

    pub(crate) fn distance_unchecked(&self, p: &ManifoldPoint, q: &ManifoldPoint) -> f64 {
        self.factors
            .iter()
            .map(|f| {
                let (a, b) = (&p.0[f.ambient.clone()], &q.0[f.ambient.clone()]);
                match f.kind {
                    FactorKind::Sphere { radius, .. } => (radius * sphere_angle(a, b)).powi(2),
                    FactorKind::Euclidean { .. } => {
                        a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
                    }
                }
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Base point `O`: Euclidean coordinates zero, each sphere factor at
    /// `r·e₁` of its block.
    pub fn base_point(&self) -> ManifoldPoint {
        let mut p = vec![0.0; self.ambient_dim];
        for f in &self.factors {
            if let FactorKind::Sphere { radius, .. } = f.kind {
                p[f.ambient.start] = radius;
            }
        }
        ManifoldPoint(p)
    }

    pub fn radial_distance(&self, p: &ManifoldPoint) -> Result<f64, ModelError> {
        self.distance(p, &self.base_point())
    }

    /// Riemannian logarithm `log_p q`, block by block. The flag is set when a
    /// sphere block is antipodal and the direction was chosen by tie-break.
    pub fn log_map(&self, p: &ManifoldPoint, q: &ManifoldPoint) -> (TangentVec, bool) {
        let mut v = vec![0.0; self.ambient_dim];
        let mut non_unique = false;
        for f in &self.factors {
            let r = f.ambient.clone();
            match f.kind {
                FactorKind::Sphere { radius, .. } => {
                    let (block, tie) = sphere_log(&p.0[r.clone()], &q.0[r.clone()], radius);
                    non_unique |= tie;
                    v[r].copy_from_slice(&block);
                }
                FactorKind::Euclidean { .. } => {
                    for i in r {
                        v[i] = q.0[i] - p.0[i];
                    }
                }
            }
        }
        (TangentVec(v), non_unique)
    }

    /// Riemannian exponential, block by block.
    pub fn exp_map(&self, p: &ManifoldPoint, v: &TangentVec) -> ManifoldPoint {
        let mut out = p.0.clone();
        for f in &self.factors {
            let r = f.ambient.clone();
            match f.kind {
                FactorKind::Sphere { radius, .. } => {
                    let u = &p.0[r.clone()];
                    let w = &v.0[r.clone()];
                    let len = norm(w);
                    if len > 0.0 {
                        let t = len / radius;
                        for (k, i) in r.enumerate() {
                            out[i] = u[k] * t.cos() + radius * t.sin() * w[k] / len;
                        }
                    }
                }
                FactorKind::Euclidean { .. } => {
                    for i in r {
                        out[i] += v.0[i];
                    }
                }
            }
        }
        ManifoldPoint(out)
    }

    /// Orthonormal basis of `T_pM` (n vectors), deterministic in `p`.
    pub fn tangent_basis(&self, p: &ManifoldPoint) -> Vec<TangentVec> {
        let mut basis = Vec::with_capacity(self.dim());
        for f in &self.factors {
            let r = f.ambient.clone();
            let blocks: Vec<Vec<f64>> = match f.kind {
                FactorKind::Sphere { .. } => sphere_tangent_basis(&p.0[r.clone()]),
                FactorKind::Euclidean { dim } => (0..dim)
                    .map(|i| {
                        let mut e = vec![0.0; dim];
                        e[i] = 1.0;
                        e
                    })
                    .collect(),
            };
            for b in blocks {
                let mut v = vec![0.0; self.ambient_dim];
                v[r.clone()].copy_from_slice(&b);
                basis.push(TangentVec(v));
            }
        }
        basis
    }

    /// Ordinary (φ = 0) minimal geodesic from `p` to `q` on `N + 1` uniform
    /// nodes over `[0, d(p, q)]`, unit speed.
    pub fn background_geodesic(
        &self,
        p: &ManifoldPoint,
        q: &ManifoldPoint,
        n_intervals: usize,
    ) -> Result<PhiPath, ModelError> {
        if n_intervals < 2 {
            return Err(ModelError::GridTooSmall(n_intervals));
        }
        let s_bar = self.distance(p, q)?;
        if s_bar <= 0.0 {
            return Err(ModelError::DegenerateEndpoints);
        }
        let (v, non_unique) = self.log_map(p, q);
        let mut s_grid = Vec::with_capacity(n_intervals + 1);
        let mut points = Vec::with_capacity(n_intervals + 1);
        let mut velocities = Vec::with_capacity(n_intervals + 1);
        for i in 0..=n_intervals {
            let t = i as f64 / n_intervals as f64;
            let s = if i == n_intervals { s_bar } else { t * s_bar };
            let (pt, vel) = self.geodesic_at(p, &v, t, s_bar);
            s_grid.push(s);
            points.push(pt);
            velocities.push(vel);
        }
        let mut path = PhiPath::new(PathSource::Background, s_grid, points, velocities);
        path.c_value = 1.0;
        path.drift = velocities_speed_spread(&path);
        path.action_j = s_bar;
        path.non_unique = non_unique;
        Ok(path)
    }

    /// `exp_p(t v)` and its derivative with respect to arclength `s = t·s̄`.
    fn geodesic_at(&self, p: &ManifoldPoint, v: &TangentVec, t: f64, s_bar: f64) -> (ManifoldPoint, TangentVec) {
        let mut pt = p.0.clone();
        let mut vel = vec![0.0; self.ambient_dim];
        for f in &self.factors {
            let r = f.ambient.clone();
            match f.kind {
                FactorKind::Sphere { radius, .. } => {
                    let u = &p.0[r.clone()];
                    let w = &v.0[r.clone()];
                    let len = norm(w);
                    if len == 0.0 {
                        continue;
                    }
                    let a = t * len / radius;
                    for (k, i) in r.enumerate() {
                        let wh = w[k] / len;
                        pt[i] = u[k] * a.cos() + radius * a.sin() * wh;
                        vel[i] = (-(len / radius) * u[k] * a.sin() + len * a.cos() * wh) / s_bar;
                    }
                }
                FactorKind::Euclidean { .. } => {
                    for i in r {
                        pt[i] = p.0[i] + t * v.0[i];
                        vel[i] = v.0[i] / s_bar;
                    }
                }
            }
        }
        let mut pt = ManifoldPoint(pt);
        self.project_point(&mut pt);
        (pt, TangentVec(vel))
    }

    /// Deterministic point at radial distance `r` from `O`.
    ///
    /// Non-compact models move along the first Euclidean axis; the cylinder
    /// also turns the sphere factor by arclength `min(r₀, r/2)` so both
    /// factors are exercised. Compact models turn every sphere factor by the
    /// same angle in its (e₁, e₂) plane; `r` must not exceed the diameter.
    pub fn point_at_radius(&self, r: f64) -> Result<ManifoldPoint, ModelError> {
        if !(r.is_finite() && r >= 0.0) {
            return Err(ModelError::NegativeRadius(r));
        }
        let mut p = self.base_point();
        match self.family {
            Family::Gaussian { .. } => p.0[0] = r,
            Family::SphereCylinder { .. } => {
                let sphere = &self.factors[0];
                let euclid = &self.factors[1];
                let radius = match sphere.kind {
                    FactorKind::Sphere { radius, .. } => radius,
                    FactorKind::Euclidean { .. } => unreachable!(),
                };
                let arc = radius.min(r / 2.0);
                let theta = arc / radius;
                let s0 = sphere.ambient.start;
                p.0[s0] = radius * theta.cos();
                p.0[s0 + 1] = radius * theta.sin();
                p.0[euclid.ambient.start] = (r * r - arc * arc).max(0.0).sqrt();
            }
            Family::RoundSphere { .. } | Family::SphereProduct { .. } => {
                let diameter = self.diameter().expect("compact");
                if r > diameter {
                    return Err(ModelError::BeyondDiameter { requested: r, diameter });
                }
                let sum_r2: f64 = self
                    .factors
                    .iter()
                    .map(|f| match f.kind {
                        FactorKind::Sphere { radius, .. } => radius * radius,
                        FactorKind::Euclidean { .. } => 0.0,
                    })
                    .sum();
                let theta = r / sum_r2.sqrt();
                for f in &self.factors {
                    if let FactorKind::Sphere { radius, .. } = f.kind {
                        p.0[f.ambient.start] = radius * theta.cos();
                        p.0[f.ambient.start + 1] = radius * theta.sin();
                    }
                }
            }
        }
        Ok(p)
    }
}

fn velocities_speed_spread(path: &PhiPath) -> f64 {
    path.velocities
        .iter()
        .map(|v| (v.dot(v) - 1.0).abs())
        .fold(0.0, f64::max)
}

/// Angle between two vectors, accurate near 0 and π.
pub(crate) fn sphere_angle(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let sum: f64 = a.iter().zip(b).map(|(x, y)| (x + y).powi(2)).sum::<f64>().sqrt();
    2.0 * diff.atan2(sum)
}

fn sphere_log(u: &[f64], q: &[f64], radius: f64) -> (Vec<f64>, bool) {
    let theta = sphere_angle(u, q);
    let uu = dot(u, u);
    let proj = dot(u, q) / uu;
    let mut w: Vec<f64> = q.iter().zip(u).map(|(qi, ui)| qi - proj * ui).collect();
    let wn = norm(&w);
    if theta == 0.0 {
        return (vec![0.0; u.len()], false);
    }
    let mut tie = false;
    if wn <= 1e-12 * radius {
        // Antipodal: rotate toward the first basis vector not parallel to u.
        tie = true;
        let basis = sphere_tangent_basis(u);
        w = basis[0].clone();
    }
    let wn = norm(&w);
    (w.iter().map(|x| radius * theta * x / wn).collect(), tie)
}

/// Gram–Schmidt on the standard basis, skipping the axis most aligned with `u`.
pub(crate) fn sphere_tangent_basis(u: &[f64]) -> Vec<Vec<f64>> {
    let d = u.len();
    let un = norm(u);
    let n_hat: Vec<f64> = u.iter().map(|x| x / un).collect();
    let skip = (0..d)
        .max_by(|&i, &j| n_hat[i].abs().total_cmp(&n_hat[j].abs()))
        .unwrap_or(0);
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(d - 1);
    for i in (0..d).filter(|&i| i != skip) {
        let mut e = vec![0.0; d];
        e[i] = 1.0;
        for _ in 0..2 {
            let a = dot(&e, &n_hat);
            e.iter_mut().zip(&n_hat).for_each(|(x, n)| *x -= a * n);
            for b in &out {
                let a = dot(&e, b);
                e.iter_mut().zip(b).for_each(|(x, y)| *x -= a * y);
            }
        }
        let en = norm(&e);
        e.iter_mut().for_each(|x| *x /= en);
        out.push(e);
    }
    out
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            Family::Gaussian { n } => write!(f, "gaussian:n={n}"),
            Family::RoundSphere { n } => write!(f, "sphere:n={n}"),
            Family::SphereCylinder { k, m } => write!(f, "cylinder:k={k},m={m}"),
            Family::SphereProduct { k, m } => write!(f, "sphereproduct:k={k},m={m}"),
        }
    }
}

impl FromStr for ModelSpec {
    type Err = ModelError;

    /// Parses `gaussian:n=4`, `sphere:n=3`, `cylinder:k=2,m=2`,
    /// `sphereproduct:k=2,m=2`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |reason: &str| ModelError::Parse { input: s.to_string(), reason: reason.to_string() };
        let (name, args) = s.trim().split_once(':').ok_or_else(|| bad("expected `<family>:<params>`"))?;
        let mut n = None;
        let mut k = None;
        let mut m = None;
        for kv in args.split(',') {
            let (key, val) = kv.split_once('=').ok_or_else(|| bad("expected `key=value`"))?;
            let val: usize = val
                .trim()
                .parse()
                .map_err(|_| bad(&format!("`{}` is not a non-negative integer", val.trim())))?;
            let slot = match key.trim() {
                "n" => &mut n,
                "k" => &mut k,
                "m" => &mut m,
                other => return Err(bad(&format!("unknown parameter `{other}`"))),
            };
            if slot.replace(val).is_some() {
                return Err(bad(&format!("parameter `{}` given twice", key.trim())));
            }
        }
        let need = |v: Option<usize>, key: &str| v.ok_or_else(|| bad(&format!("missing parameter `{key}`")));
        let family = match name.trim().to_ascii_lowercase().as_str() {
            "gaussian" if k.is_none() && m.is_none() => Family::Gaussian { n: need(n, "n")? },
            "sphere" if k.is_none() && m.is_none() => Family::RoundSphere { n: need(n, "n")? },
            "cylinder" if n.is_none() => Family::SphereCylinder { k: need(k, "k")?, m: need(m, "m")? },
            "sphereproduct" if n.is_none() => Family::SphereProduct { k: need(k, "k")?, m: need(m, "m")? },
            "gaussian" | "sphere" | "cylinder" | "sphereproduct" => {
                return Err(bad("parameters do not match the family"))
            }
            other => return Err(bad(&format!("unknown family `{other}`"))),
        };
        ModelSpec::new(family)
    }
}

impl Serialize for ModelSpec {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ModelSpec {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
