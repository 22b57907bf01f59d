//! Finite-difference differential geometry on coordinate charts.
//!
//! This is an oracle: it only ever reads metric components `g_ij` of a chart
//! (and scalar fields handed to it), never the closed-form curvature of the
//! models. Sphere factors use stereographic coordinates re-centered at the
//! chart center, `g = 4r²/(1+|w|²)² δ`; Euclidean factors are identity blocks.
//! All derivatives are second-order central differences.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::models::{dot, norm, FactorKind, ManifoldPoint, ModelError, ModelSpec, TangentVec};
use crate::models::sphere_tangent_basis;

pub const CHART_RADIUS: f64 = 1.0;
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumGeomError {
    #[error("chart coordinates |w| = {norm} leave the valid region (limit {limit})")]
    OutsideChart { norm: f64, limit: f64 },
    #[error("metric not invertible (condition number {0:e})")]
    IllConditioned(f64),
    #[error("finite-difference step must satisfy 0 < h < {limit} (got {h})")]
    InvalidStep { h: f64, limit: f64 },
    #[error("point is antipodal to the chart center")]
    AntipodalToCenter,
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdConfig {
    h: f64,
}

impl FdConfig {
    pub fn new(h: f64) -> Result<Self, NumGeomError> {
        let limit = CHART_RADIUS / 10.0;
        if !(h > 0.0 && h < limit) {
            return Err(NumGeomError::InvalidStep { h, limit });
        }
        Ok(FdConfig { h })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn halved(&self) -> Self {
        FdConfig { h: self.h / 2.0 }
    }
}

impl Default for FdConfig {
    fn default() -> Self {
        FdConfig { h: 1e-3 }
    }
}

/// Chart around a point of a product model.
#[derive(Debug, Clone)]
pub struct Chart<'m> {
    model: &'m ModelSpec,
    center: ManifoldPoint,
    // per factor, orthonormal tangent frame of sphere blocks (empty for ℝᵐ)
    frames: Vec<Vec<Vec<f64>>>,
}

impl<'m> Chart<'m> {
    pub fn new(model: &'m ModelSpec, center: ManifoldPoint) -> Result<Self, NumGeomError> {
        model.validate_point(&center)?;
        let frames = model
            .factors()
            .iter()
            .map(|f| match f.kind {
                FactorKind::Sphere { .. } => sphere_tangent_basis(&center.0[f.ambient.clone()]),
                FactorKind::Euclidean { .. } => Vec::new(),
            })
            .collect();
        Ok(Chart { model, center, frames })
    }

    pub fn model(&self) -> &'m ModelSpec {
        self.model
    }

    pub fn center(&self) -> &ManifoldPoint {
        &self.center
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    pub fn to_manifold(&self, w: &[f64]) -> ManifoldPoint {
        let mut p = vec![0.0; self.model.ambient_dim()];
        for (f, frame) in self.model.factors().iter().zip(&self.frames) {
            let wb = &w[f.intrinsic.clone()];
            let c = &self.center.0[f.ambient.clone()];
            let out = &mut p[f.ambient.clone()];
            match f.kind {
                FactorKind::Sphere { radius, .. } => {
                    let w2 = dot(wb, wb);
                    let d = 1.0 + w2;
                    for (o, ci) in out.iter_mut().zip(c) {
                        *o = (1.0 - w2) / d * ci;
                    }
                    for (wi, e) in wb.iter().zip(frame) {
                        for (o, ei) in out.iter_mut().zip(e) {
                            *o += radius * 2.0 * wi / d * ei;
                        }
                    }
                }
                FactorKind::Euclidean { .. } => {
                    for ((o, ci), wi) in out.iter_mut().zip(c).zip(wb) {
                        *o = ci + wi;
                    }
                }
            }
        }
        ManifoldPoint(p)
    }

    /// Chart coordinates of `p` (inverse stereographic projection).
    pub fn coords_of(&self, p: &ManifoldPoint) -> Result<Vec<f64>, NumGeomError> {
        self.model.validate_point(p)?;
        let mut w = vec![0.0; self.dim()];
        for (f, frame) in self.model.factors().iter().zip(&self.frames) {
            let pb = &p.0[f.ambient.clone()];
            let c = &self.center.0[f.ambient.clone()];
            match f.kind {
                FactorKind::Sphere { radius, .. } => {
                    let denom = radius + dot(pb, c) / radius;
                    if denom <= 1e-12 * radius {
                        return Err(NumGeomError::AntipodalToCenter);
                    }
                    for (k, e) in frame.iter().enumerate() {
                        w[f.intrinsic.start + k] = dot(pb, e) / denom;
                    }
                }
                FactorKind::Euclidean { .. } => {
                    for (k, (a, b)) in pb.iter().zip(c).enumerate() {
                        w[f.intrinsic.start + k] = a - b;
                    }
                }
            }
        }
        Ok(w)
    }

    pub fn metric_at(&self, w: &[f64]) -> DMatrix<f64> {
        let n = self.dim();
        let mut g = DMatrix::zeros(n, n);
        for f in self.model.factors() {
            let scale = match f.kind {
                FactorKind::Sphere { radius, .. } => {
                    let wb = &w[f.intrinsic.clone()];
                    let d = 1.0 + dot(wb, wb);
                    4.0 * radius * radius / (d * d)
                }
                FactorKind::Euclidean { .. } => 1.0,
            };
            for i in f.intrinsic.clone() {
                g[(i, i)] = scale;
            }
        }
        g
    }

    /// Images `∂/∂wⱼ` of the coordinate vectors, as ambient tangent vectors.
    pub fn pushforward(&self, w: &[f64]) -> Vec<TangentVec> {
        let n = self.dim();
        let amb = self.model.ambient_dim();
        let mut cols = vec![TangentVec::zeros(amb); n];
        for (f, frame) in self.model.factors().iter().zip(&self.frames) {
            let c = &self.center.0[f.ambient.clone()];
            match f.kind {
                FactorKind::Sphere { radius, .. } => {
                    let wb = &w[f.intrinsic.clone()];
                    let d = 1.0 + dot(wb, wb);
                    let n_hat: Vec<f64> = c.iter().map(|x| x / radius).collect();
                    for (j, col) in f.intrinsic.clone().enumerate() {
                        let out = &mut cols[col].0[f.ambient.clone()];
                        for (o, ni) in out.iter_mut().zip(&n_hat) {
                            *o = -4.0 * wb[j] / (d * d) * ni;
                        }
                        for (i, e) in frame.iter().enumerate() {
                            let delta = if i == j { 1.0 } else { 0.0 };
                            let coef = 2.0 * delta / d - 4.0 * wb[i] * wb[j] / (d * d);
                            for (o, ei) in out.iter_mut().zip(e) {
                                *o += coef * ei;
                            }
                        }
                        out.iter_mut().for_each(|x| *x *= radius);
                    }
                }
                FactorKind::Euclidean { .. } => {
                    for (j, col) in f.intrinsic.clone().enumerate() {
                        cols[col].0[f.ambient.start + j] = 1.0;
                    }
                }
            }
        }
        cols
    }

    fn check(&self, w: &[f64], cfg: &FdConfig) -> Result<(), NumGeomError> {
        let limit = CHART_RADIUS - 2.0 * cfg.h;
        let r = norm(w);
        if !(r <= limit) {
            return Err(NumGeomError::OutsideChart { norm: r, limit });
        }
        Ok(())
    }
}

fn inverse(g: &DMatrix<f64>) -> Result<DMatrix<f64>, NumGeomError> {
    let eig = g.clone().symmetric_eigen();
    let (lo, hi) = eig
        .eigenvalues
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| (lo.min(e.abs()), hi.max(e.abs())));
    let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(cond <= MAX_CONDITION) {
        return Err(NumGeomError::IllConditioned(cond));
    }
    g.clone().try_inverse().ok_or(NumGeomError::IllConditioned(cond))
}

fn shifted(w: &[f64], i: usize, d: f64) -> Vec<f64> {
    let mut v = w.to_vec();
    v[i] += d;
    v
}

/// Christoffel symbols of the second kind, `Γ^i_{jk}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffels {
    n: usize,
    data: Vec<f64>,
}

impl Christoffels {
    fn zeros(n: usize) -> Self {
        Christoffels { n, data: vec![0.0; n * n * n] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(i * self.n + j) * self.n + k]
    }

    fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let n = self.n;
        self.data[(i * n + j) * n + k] = v;
    }

    pub fn max_abs_diff(&self, other: &Christoffels) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

pub fn christoffels_fd(chart: &Chart<'_>, w: &[f64], cfg: &FdConfig) -> Result<Christoffels, NumGeomError> {
    chart.check(w, cfg)?;
    christoffels_unchecked(chart, w, cfg.h)
}

fn christoffels_unchecked(chart: &Chart<'_>, w: &[f64], h: f64) -> Result<Christoffels, NumGeomError> {
    let n = chart.dim();
    let ginv = inverse(&chart.metric_at(w))?;
    // dg[l] = ∂_l g
    let dg: Vec<DMatrix<f64>> = (0..n)
        .map(|l| (chart.metric_at(&shifted(w, l, h)) - chart.metric_at(&shifted(w, l, -h))) / (2.0 * h))
        .collect();
    let mut gamma = Christoffels::zeros(n);
    for i in 0..n {
        for j in 0..n {
            for k in j..n {
                let mut s = 0.0;
                for l in 0..n {
                    let gil = ginv[(i, l)];
                    if gil != 0.0 {
                        s += gil * (dg[j][(l, k)] + dg[k][(l, j)] - dg[l][(j, k)]);
                    }
                }
                gamma.set(i, j, k, 0.5 * s);
                gamma.set(i, k, j, 0.5 * s);
            }
        }
    }
    Ok(gamma)
}

/// `Rc_jk = ∂ᵢΓⁱ_jk − ∂ⱼΓⁱ_ik + Γⁱ_ip Γᵖ_jk − Γⁱ_jp Γᵖ_ik`, symmetrized.
pub fn ricci_fd(chart: &Chart<'_>, w: &[f64], cfg: &FdConfig) -> Result<DMatrix<f64>, NumGeomError> {
    chart.check(w, cfg)?;
    let n = chart.dim();
    let h = cfg.h;
    let g0 = christoffels_unchecked(chart, w, h)?;
    let mut dgam = Vec::with_capacity(n);
    for l in 0..n {
        let plus = christoffels_unchecked(chart, &shifted(w, l, h), h)?;
        let minus = christoffels_unchecked(chart, &shifted(w, l, -h), h)?;
        dgam.push((plus, minus));
    }
    let d = |l: usize, i: usize, j: usize, k: usize| (dgam[l].0.get(i, j, k) - dgam[l].1.get(i, j, k)) / (2.0 * h);
    let mut rc = DMatrix::zeros(n, n);
    for j in 0..n {
        for k in 0..n {
            let mut s = 0.0;
            for i in 0..n {
                s += d(i, i, j, k) - d(j, i, i, k);
                for p in 0..n {
                    s += g0.get(i, i, p) * g0.get(p, j, k) - g0.get(i, j, p) * g0.get(p, i, k);
                }
            }
            rc[(j, k)] = s;
        }
    }
    Ok((&rc + rc.transpose()) * 0.5)
}

/// `R = g^{jk} Rc_jk` and `|Rc|² = g^{ia} g^{jb} Rc_ij Rc_ab`.
pub fn ricci_invariants(g: &DMatrix<f64>, rc: &DMatrix<f64>) -> Result<(f64, f64), NumGeomError> {
    let ginv = inverse(g)?;
    let mixed = &ginv * rc;
    Ok((mixed.trace(), (&mixed * &mixed).trace()))
}

fn field_in_chart<F: Fn(&ManifoldPoint) -> f64>(chart: &Chart<'_>, field: &F, w: &[f64]) -> f64 {
    field(&chart.to_manifold(w))
}

fn partials<F: Fn(&ManifoldPoint) -> f64>(chart: &Chart<'_>, field: &F, w: &[f64], h: f64) -> DVector<f64> {
    DVector::from_iterator(
        w.len(),
        (0..w.len()).map(|i| {
            (field_in_chart(chart, field, &shifted(w, i, h)) - field_in_chart(chart, field, &shifted(w, i, -h)))
                / (2.0 * h)
        }),
    )
}

/// Contravariant gradient components `g^{ij} ∂ⱼφ`.
pub fn gradient_fd<F: Fn(&ManifoldPoint) -> f64>(
    chart: &Chart<'_>,
    field: &F,
    w: &[f64],
    cfg: &FdConfig,
) -> Result<DVector<f64>, NumGeomError> {
    chart.check(w, cfg)?;
    let ginv = inverse(&chart.metric_at(w))?;
    Ok(ginv * partials(chart, field, w, cfg.h))
}

/// Covariant Hessian `∂ⱼ∂ₖφ − Γⁱ_jk ∂ᵢφ`.
pub fn hessian_fd<F: Fn(&ManifoldPoint) -> f64>(
    chart: &Chart<'_>,
    field: &F,
    w: &[f64],
    cfg: &FdConfig,
) -> Result<DMatrix<f64>, NumGeomError> {
    chart.check(w, cfg)?;
    let n = chart.dim();
    let h = cfg.h;
    let gamma = christoffels_unchecked(chart, w, h)?;
    let dphi = partials(chart, field, w, h);
    let at = |v: &[f64]| field_in_chart(chart, field, v);
    let f0 = at(w);
    let mut hess = DMatrix::zeros(n, n);
    for j in 0..n {
        let second = (at(&shifted(w, j, h)) - 2.0 * f0 + at(&shifted(w, j, -h))) / (h * h);
        hess[(j, j)] = second;
        for k in (j + 1)..n {
            let pp = at(&shifted(&shifted(w, j, h), k, h));
            let pm = at(&shifted(&shifted(w, j, h), k, -h));
            let mp = at(&shifted(&shifted(w, j, -h), k, h));
            let mm = at(&shifted(&shifted(w, j, -h), k, -h));
            let mixed = (pp - pm - mp + mm) / (4.0 * h * h);
            hess[(j, k)] = mixed;
            hess[(k, j)] = mixed;
        }
    }
    for j in 0..n {
        for k in 0..n {
            let corr: f64 = (0..n).map(|i| gamma.get(i, j, k) * dphi[i]).sum();
            hess[(j, k)] -= corr;
        }
    }
    Ok(hess)
}

pub fn laplacian_fd<F: Fn(&ManifoldPoint) -> f64>(
    chart: &Chart<'_>,
    field: &F,
    w: &[f64],
    cfg: &FdConfig,
) -> Result<f64, NumGeomError> {
    let hess = hessian_fd(chart, field, w, cfg)?;
    let ginv = inverse(&chart.metric_at(w))?;
    Ok((ginv * hess).trace())
}

/// `Δ_f φ = Δφ − ⟨∇f, ∇φ⟩`.
pub fn weighted_laplacian_fd<F, G>(
    chart: &Chart<'_>,
    field: &F,
    f_field: &G,
    w: &[f64],
    cfg: &FdConfig,
) -> Result<f64, NumGeomError>
where
    F: Fn(&ManifoldPoint) -> f64,
    G: Fn(&ManifoldPoint) -> f64,
{
    let lap = laplacian_fd(chart, field, w, cfg)?;
    let ginv = inverse(&chart.metric_at(w))?;
    let dphi = partials(chart, field, w, cfg.h);
    let df = partials(chart, f_field, w, cfg.h);
    Ok(lap - df.dot(&(ginv * dphi)))
}
