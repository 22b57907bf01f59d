//! Margins for the pointwise identities and integral inequalities satisfied
//! along minimal φ-geodesics, and the good-point scan.
//!
//! Every check yields an [`AuditReport`] with `margin = rhs − lhs`; a report
//! passes when `margin ≥ −tolerance`. Integral checks carry a Richardson
//! quadrature error estimate (full grid against every other node) and are
//! `Inconclusive` when that estimate exceeds 1% of `|margin|`.
//!
//! Integrals along a path use the trapezoid cutoff
//! `ζ(s) = min(s, 1, s̄ − s)`; paths should be sampled on [`audit_grid`] so the
//! kinks of `ζ` fall on nodes.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::{ManifoldPoint, ModelError, ModelSpec, TangentVec};
use crate::numgeom::{
    gradient_fd, hessian_fd, ricci_fd, ricci_invariants, weighted_laplacian_fd, Chart, FdConfig, NumGeomError,
};
use crate::path::PhiPath;
use crate::phigeo::{integrate_on_grid, phi_value, solve_minimal_candidate, PhiGeoError, PhiParams, SolverConfig};
use crate::quadrature::{integrate_segments, segments};

pub const AUDIT_TOLERANCE: f64 = 1e-6;
pub const CLOSED_FORM_TOLERANCE: f64 = 1e-10;
pub const FD_TOLERANCE: f64 = 1e-4;
/// Quadrature error above this fraction of `|margin|` makes a report inconclusive.
pub const QUADRATURE_FRACTION: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AuditError {
    #[error("s̄ = {0} < 2: the trapezoid cutoff is undefined")]
    CutoffUndefined(f64),
    #[error("degenerate: {0}")]
    Degenerate(&'static str),
    #[error("f = {0} ≤ 0 at a sample point")]
    NonPositivePotential(f64),
    #[error("degenerate endpoints: x = y")]
    DegenerateEndpoints,
    #[error("precondition r(y) ≥ max(√(2n), 3A) violated: r(y) = {r_y}, required {required}")]
    Precondition { r_y: f64, required: f64 },
    #[error("empty scan window [{start}, {end}]")]
    EmptyWindow { start: f64, end: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    NumGeom(#[from] NumGeomError),
    #[error(transparent)]
    PhiGeo(#[from] PhiGeoError),
}

impl AuditError {
    /// Typed refusals, as opposed to numerical failures.
    pub fn is_refusal(&self) -> bool {
        matches!(
            self,
            AuditError::CutoffUndefined(_)
                | AuditError::Degenerate(_)
                | AuditError::NonPositivePotential(_)
                | AuditError::DegenerateEndpoints
                | AuditError::Precondition { .. }
                | AuditError::EmptyWindow { .. }
                | AuditError::Model(ModelError::BeyondDiameter { .. })
        )
    }
}

/// Trapezoid cutoff on `[0, s̄]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffZeta {
    s_bar: f64,
}

impl CutoffZeta {
    pub fn new(s_bar: f64) -> Result<Self, AuditError> {
        if !(s_bar >= 2.0) {
            return Err(AuditError::CutoffUndefined(s_bar));
        }
        Ok(CutoffZeta { s_bar })
    }

    pub fn s_bar(&self) -> f64 {
        self.s_bar
    }

    pub fn breakpoints(&self) -> [f64; 2] {
        [1.0, self.s_bar - 1.0]
    }

    pub fn value(&self, s: f64) -> f64 {
        s.min(1.0).min(self.s_bar - s).max(0.0)
    }

    pub fn derivative(&self, s: f64) -> f64 {
        if s < 1.0 {
            1.0
        } else if s <= self.s_bar - 1.0 {
            0.0
        } else {
            -1.0
        }
    }

    /// `ζ′` at `s`, taking the one-sided value from the side of `toward` when
    /// `s` sits on a kink.
    pub fn derivative_toward(&self, s: f64, toward: f64) -> f64 {
        let on_kink = self.breakpoints().iter().any(|b| (s - b).abs() <= 1e-9);
        let probe = if on_kink { toward } else { s };
        if probe < 1.0 {
            1.0
        } else if probe > self.s_bar - 1.0 {
            -1.0
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditContext {
    pub model: String,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_bar: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_value: Option<f64>,
    /// `A = √(C + c)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub point: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub minimal_candidate: Option<bool>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default)]
    pub extra: BTreeMap<String, f64>,
}

impl AuditContext {
    fn new(model: &ModelSpec) -> Self {
        AuditContext {
            model: model.to_string(),
            verdict: Verdict::Pass,
            c: None,
            s_bar: None,
            c_value: None,
            a: None,
            point: None,
            minimal_candidate: None,
            extra: BTreeMap::new(),
        }
    }

    fn for_path(model: &ModelSpec, params: PhiParams, path: &PhiPath) -> Self {
        let mut ctx = Self::new(model);
        ctx.c = Some(params.c());
        ctx.s_bar = Some(path.s_bar());
        ctx.c_value = Some(path.c_value);
        ctx.a = Some((path.c_value + params.c()).sqrt());
        ctx.minimal_candidate = Some(path.is_minimal_candidate());
        ctx
    }

    fn at_point(model: &ModelSpec, p: &ManifoldPoint) -> Self {
        let mut ctx = Self::new(model);
        ctx.point = Some(p.0.clone());
        ctx
    }
}

/// One audited inequality `lhs ≤ rhs` (or identity `lhs = rhs`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub pass: bool,
    pub tolerance: f64,
    pub quadrature_error: f64,
    pub context: AuditContext,
}

impl AuditReport {
    /// `lhs ≤ rhs` with margin `rhs − lhs`.
    pub fn inequality(name: &str, lhs: f64, rhs: f64, tolerance: f64, quadrature_error: f64, context: AuditContext) -> Self {
        Self::build(name, lhs, rhs, rhs - lhs, tolerance, quadrature_error, context)
    }

    /// `lhs = rhs` with margin `−|lhs − rhs|`.
    pub fn identity(name: &str, lhs: f64, rhs: f64, tolerance: f64, context: AuditContext) -> Self {
        Self::build(name, lhs, rhs, -(lhs - rhs).abs(), tolerance, 0.0, context)
    }

    fn build(
        name: &str,
        lhs: f64,
        rhs: f64,
        margin: f64,
        tolerance: f64,
        quadrature_error: f64,
        mut context: AuditContext,
    ) -> Self {
        let pass = margin >= -tolerance;
        context.verdict = if !pass {
            Verdict::Fail
        } else if quadrature_error > QUADRATURE_FRACTION * margin.abs() {
            Verdict::Inconclusive
        } else {
            Verdict::Pass
        };
        AuditReport { name: name.to_string(), lhs, rhs, margin, pass, tolerance, quadrature_error, context }
    }

    pub fn verdict(&self) -> Verdict {
        self.context.verdict
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditSettings {
    pub tolerance: f64,
    pub fd: FdConfig,
    /// Audit grid intervals per unit of arclength (rounded up to even counts).
    pub per_unit: usize,
    pub solver: SolverConfig,
}

impl Default for AuditSettings {
    fn default() -> Self {
        AuditSettings { tolerance: AUDIT_TOLERANCE, fd: FdConfig::default(), per_unit: 16, solver: SolverConfig::default() }
    }
}

/// Piecewise-uniform grid on `[0, s̄]` with nodes at `1`, `s̄ − 1` and every
/// `extra` breakpoint; each piece has an even number (≥ 4) of intervals.
pub fn audit_grid(s_bar: f64, per_unit: usize, extra: &[f64]) -> Vec<f64> {
    let mut cuts = vec![0.0, s_bar];
    for b in [1.0, s_bar - 1.0].iter().chain(extra) {
        if *b > 0.0 && *b < s_bar {
            cuts.push(*b);
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
    let mut grid = vec![0.0];
    for w in cuts.windows(2) {
        let len = w[1] - w[0];
        let mut k = ((len * per_unit as f64).ceil() as usize).max(4);
        k += k % 2;
        for i in 1..=k {
            grid.push(if i == k { w[1] } else { w[0] + len * i as f64 / k as f64 });
        }
    }
    grid
}

/// Re-integrates a shooting/IVP path from its initial state onto
/// [`audit_grid`], keeping the minimality evidence.
pub fn resample_for_audit(
    model: &ModelSpec,
    params: PhiParams,
    path: &PhiPath,
    per_unit: usize,
    extra: &[f64],
    max_step: f64,
) -> Result<PhiPath, AuditError> {
    let grid = audit_grid(path.s_bar(), per_unit, extra);
    let mut out = integrate_on_grid(model, params, path.start(), &path.velocities[0], &grid, max_step)?;
    out.source = path.source;
    out.minimality = path.minimality.clone();
    out.non_unique = path.non_unique;
    out.iterations = path.iterations;
    out.solver_residual = path.solver_residual;
    Ok(out)
}

fn grad_f_dot_s(model: &ModelSpec, path: &PhiPath) -> Vec<f64> {
    path.points.iter().zip(&path.velocities).map(|(p, v)| model.grad_potential(p).dot(v)).collect()
}

fn speed_sq(path: &PhiPath) -> Vec<f64> {
    path.velocities.iter().map(|v| v.dot(v)).collect()
}

fn refuse_degenerate(model: &ModelSpec) -> Result<(), AuditError> {
    if model.is_degenerate() {
        return Err(AuditError::Degenerate("R ≡ 0"));
    }
    Ok(())
}

/// `Δ_f φ` at `p` by the finite-difference oracle in a chart centered at `p`.
fn deltaf_phi_fd(model: &ModelSpec, params: PhiParams, p: &ManifoldPoint, fd: &FdConfig) -> Result<f64, AuditError> {
    let chart = Chart::new(model, p.clone())?;
    let phi = |q: &ManifoldPoint| phi_value(model, params, q);
    let f = |q: &ManifoldPoint| model.potential(q);
    Ok(weighted_laplacian_fd(&chart, &phi, &f, &vec![0.0; model.dim()], fd)?)
}

/// Chart components of a tangent vector at the chart center.
fn chart_components(chart: &Chart<'_>, v: &TangentVec) -> nalgebra::DVector<f64> {
    let n = chart.dim();
    let w = vec![0.0; n];
    let cols = chart.pushforward(&w);
    let g = chart.metric_at(&w);
    let b = nalgebra::DVector::from_iterator(n, cols.iter().map(|e| e.dot(v)));
    g.lu().solve(&b).unwrap_or(b)
}

/// `−∫ζ²Δ_fφ + ∫ζ² Rc_f(S,S) ≤ ∫(n ζ′² − 2ζζ′⟨∇f, S⟩)` along a minimal
/// φ-geodesic, with `Rc_f(S,S) = ½|S|²` and `Δ_fφ` from the FD oracle.
pub fn second_variation_audit(
    model: &ModelSpec,
    params: PhiParams,
    path: &PhiPath,
    settings: &AuditSettings,
) -> Result<AuditReport, AuditError> {
    let zeta = CutoffZeta::new(path.s_bar())?;
    let s = &path.s_grid;
    let segs = segments(s, &zeta.breakpoints());
    let n = model.dim() as f64;
    let deltaf_phi: Vec<f64> = path
        .points
        .iter()
        .map(|p| deltaf_phi_fd(model, params, p, &settings.fd))
        .collect::<Result<_, _>>()?;
    let sp = speed_sq(path);
    let gs = grad_f_dot_s(model, path);
    let (lhs, e1) = integrate_segments(s, &segs, |i, _| zeta.value(s[i]).powi(2) * (-deltaf_phi[i] + 0.5 * sp[i]));
    let (rhs, e2) = integrate_segments(s, &segs, |i, mid| {
        let dz = zeta.derivative_toward(s[i], mid);
        n * dz * dz - 2.0 * zeta.value(s[i]) * dz * gs[i]
    });
    let mut ctx = AuditContext::for_path(model, params, path);
    ctx.extra.insert("rc_f_fd_max_dev".into(), rc_f_cross_check(model, path, &settings.fd)?);
    Ok(AuditReport::inequality("second_variation", lhs, rhs, settings.tolerance, e1 + e2, ctx))
}

// max |Rc_f(S,S)_fd − ½|S|²| over nine evenly spaced nodes.
fn rc_f_cross_check(model: &ModelSpec, path: &PhiPath, fd: &FdConfig) -> Result<f64, AuditError> {
    let last = path.len() - 1;
    let mut worst = 0.0f64;
    for k in 0..=8 {
        let i = k * last / 8;
        let chart = Chart::new(model, path.points[i].clone())?;
        let w = vec![0.0; model.dim()];
        let f = |q: &ManifoldPoint| model.potential(q);
        let rcf = ricci_fd(&chart, &w, fd)? + hessian_fd(&chart, &f, &w, fd)?;
        let sv = chart_components(&chart, &path.velocities[i]);
        let val = sv.dot(&(&rcf * &sv));
        worst = worst.max((val - 0.5 * path.velocities[i].dot(&path.velocities[i])).abs());
    }
    Ok(worst)
}

/// `(c/2)∫ζ²(|Rc|²/f − 4(1+√n)²/f) + ½∫ζ²|S|² ≤ 2n − ∫2ζζ′⟨∇f, S⟩`.
pub fn combined_integral_audit(
    model: &ModelSpec,
    params: PhiParams,
    path: &PhiPath,
    settings: &AuditSettings,
) -> Result<AuditReport, AuditError> {
    refuse_degenerate(model)?;
    let zeta = CutoffZeta::new(path.s_bar())?;
    let s = &path.s_grid;
    let segs = segments(s, &zeta.breakpoints());
    let n = model.dim() as f64;
    let rc2 = model.ricci_norm_sq();
    let k = 4.0 * (1.0 + n.sqrt()).powi(2);
    let c = params.c();
    let sp = speed_sq(path);
    let gs = grad_f_dot_s(model, path);
    let fs: Vec<f64> = path.points.iter().map(|p| model.potential(p)).collect();
    let (lhs, e1) = integrate_segments(s, &segs, |i, _| {
        let z2 = zeta.value(s[i]).powi(2);
        0.5 * c * z2 * (rc2 - k) / fs[i] + 0.5 * z2 * sp[i]
    });
    let (cross, e2) = integrate_segments(s, &segs, |i, mid| {
        2.0 * zeta.value(s[i]) * zeta.derivative_toward(s[i], mid) * gs[i]
    });
    let ctx = AuditContext::for_path(model, params, path);
    Ok(AuditReport::inequality("combined_integral", lhs, 2.0 * n - cross, settings.tolerance, e1 + e2, ctx))
}

/// `−∫ζζ′⟨∇f, S⟩ ≤ ½A(√(2n) + r(x) + r(y) + 2A)`, `A = √(C + c)`.
pub fn boundary_term_audit(
    model: &ModelSpec,
    params: PhiParams,
    path: &PhiPath,
    settings: &AuditSettings,
) -> Result<AuditReport, AuditError> {
    let zeta = CutoffZeta::new(path.s_bar())?;
    let s = &path.s_grid;
    let segs = segments(s, &zeta.breakpoints());
    let n = model.dim() as f64;
    let gs = grad_f_dot_s(model, path);
    let (integral, err) = integrate_segments(s, &segs, |i, mid| zeta.value(s[i]) * zeta.derivative_toward(s[i], mid) * gs[i]);
    let a = (path.c_value + params.c()).sqrt();
    let rx = model.radial_distance(path.start())?;
    let ry = model.radial_distance(path.end())?;
    let rhs = 0.5 * a * ((2.0 * n).sqrt() + rx + ry + 2.0 * a);
    let ctx = AuditContext::for_path(model, params, path);
    Ok(AuditReport::inequality("boundary_term", -integral, rhs, settings.tolerance, err, ctx))
}

/// `r(γ(s)) ≤ min{r(x) + sA, r(y) + (s̄ − s)A}` at every node; reports the
/// node with the smallest margin.
pub fn radial_envelope_audit(
    model: &ModelSpec,
    params: PhiParams,
    path: &PhiPath,
    settings: &AuditSettings,
) -> Result<AuditReport, AuditError> {
    if path.len() < 2 || model.distance(path.start(), path.end())? == 0.0 {
        return Err(AuditError::DegenerateEndpoints);
    }
    let a = (path.c_value + params.c()).sqrt();
    let s_bar = path.s_bar();
    let rx = model.radial_distance(path.start())?;
    let ry = model.radial_distance(path.end())?;
    let mut worst: Option<(f64, f64, f64)> = None;
    for (s, p) in path.s_grid.iter().zip(&path.points) {
        let lhs = model.radial_distance(p)?;
        let rhs = (rx + s * a).min(ry + (s_bar - s) * a);
        if worst.is_none_or(|(l, r, _)| rhs - lhs < r - l) {
            worst = Some((lhs, rhs, *s));
        }
    }
    let (lhs, rhs, s_at) = worst.expect("non-empty path");
    let mut ctx = AuditContext::for_path(model, params, path);
    ctx.extra.insert("worst_node_s".into(), s_at);
    Ok(AuditReport::inequality("radial_envelope", lhs, rhs, settings.tolerance, 0.0, ctx))
}

fn weighted_ricci_rhs(model: &ModelSpec, params: PhiParams, a: f64, d_xy: f64, rx: f64, ry: f64) -> f64 {
    let n = model.dim() as f64;
    let f_o = model.potential(&model.base_point());
    let c = params.c();
    4.0 * (1.0 + n.sqrt()).powi(2) * d_xy / f_o + 4.0 * (n.sqrt() + a).powi(2) / c + 2.0 * a * (rx + ry) / c
}

fn refuse_zero_base(model: &ModelSpec) -> Result<(), AuditError> {
    if !(model.potential(&model.base_point()) > 0.0) {
        return Err(AuditError::Degenerate("f(O)=0"));
    }
    Ok(())
}

/// `∫ζ²|Rc|²/f ≤ 4(1+√n)² d(x,y)/f(O) + 4(√n + A)²/c + 2A(r(x) + r(y))/c`.
pub fn weighted_ricci_integral_audit(
    model: &ModelSpec,
    params: PhiParams,
    path: &PhiPath,
    x: &ManifoldPoint,
    y: &ManifoldPoint,
    settings: &AuditSettings,
) -> Result<AuditReport, AuditError> {
    refuse_zero_base(model)?;
    let zeta = CutoffZeta::new(path.s_bar())?;
    let s = &path.s_grid;
    let segs = segments(s, &zeta.breakpoints());
    let rc2 = model.ricci_norm_sq();
    let (lhs, err) = integrate_segments(s, &segs, |i, _| zeta.value(s[i]).powi(2) * rc2 / model.potential(&path.points[i]));
    let a = (path.c_value + params.c()).sqrt();
    let rhs = weighted_ricci_rhs(
        model,
        params,
        a,
        model.distance(x, y)?,
        model.radial_distance(x)?,
        model.radial_distance(y)?,
    );
    let ctx = AuditContext::for_path(model, params, path);
    Ok(AuditReport::inequality("weighted_ricci_integral", lhs, rhs, settings.tolerance, err, ctx))
}

/// `|∇f| ≤ √f` and `√f ≤ √(n/2) + r` at each point.
pub fn gradient_f_bound_audit(model: &ModelSpec, points: &[ManifoldPoint]) -> Result<Vec<AuditReport>, AuditError> {
    let half_n = model.dim() as f64 / 2.0;
    let mut out = Vec::with_capacity(2 * points.len());
    for p in points {
        let g = model.eval_geometry(p)?;
        let r = model.radial_distance(p)?;
        let sqrt_f = g.f.sqrt();
        out.push(AuditReport::inequality("grad_f_le_sqrt_f", g.grad_f_norm_sq().sqrt(), sqrt_f, AUDIT_TOLERANCE, 0.0, AuditContext::at_point(model, p)));
        out.push(AuditReport::inequality("sqrt_f_le_radial", sqrt_f, half_n.sqrt() + r, AUDIT_TOLERANCE, 0.0, AuditContext::at_point(model, p)));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityTolerance {
    pub closed_form: f64,
    pub fd: f64,
}

impl Default for IdentityTolerance {
    fn default() -> Self {
        IdentityTolerance { closed_form: CLOSED_FORM_TOLERANCE, fd: FD_TOLERANCE }
    }
}

// L⁻¹ M L⁻ᵀ with g = L Lᵀ: the form in an orthonormal frame.
fn orthonormal_form(g: &DMatrix<f64>, m: &DMatrix<f64>) -> DMatrix<f64> {
    let l = g.clone().cholesky().expect("metric is positive definite").l();
    let linv = l.try_inverse().expect("invertible");
    &linv * m * linv.transpose()
}

/// Shrinker structure identities at each point, in closed form and through
/// the FD oracle:
///
/// - `Rc + ∇∇f − ½g = 0`
/// - `f − |∇f|² − R = 0`
/// - `Δf − (n/2 − R) = 0` (closed form only)
/// - `Δ_f R + 2|Rc|² − R = 0`
/// - `Δ_f f − n/2 + f = 0`
pub fn check_soliton_identities(
    model: &ModelSpec,
    points: &[ManifoldPoint],
    tol: &IdentityTolerance,
    fd: &FdConfig,
) -> Result<Vec<AuditReport>, AuditError> {
    let n = model.dim();
    let half_n = n as f64 / 2.0;
    let mut out = Vec::with_capacity(9 * points.len());
    for p in points {
        let g = model.eval_geometry(p)?;
        let ctx = || AuditContext::at_point(model, p);
        let basis = model.tangent_basis(p);
        let mut shrinker = 0.0f64;
        for v in &basis {
            for w in &basis {
                shrinker = shrinker.max((g.ricci(v, w) + g.hess_f(v, w) - 0.5 * g.metric(v, w)).abs());
            }
        }
        out.push(AuditReport::identity("shrinker_equation[closed]", shrinker, 0.0, tol.closed_form, ctx()));
        out.push(AuditReport::identity("hamiltonian[closed]", g.f - g.grad_f_norm_sq(), g.scalar_r, tol.closed_form, ctx()));
        out.push(AuditReport::identity("trace[closed]", g.laplacian_f(), half_n - g.scalar_r, tol.closed_form, ctx()));
        // R is constant on every catalog model, so Δ_f R = 0 in closed form.
        out.push(AuditReport::identity("deltaf_R[closed]", 0.0, -2.0 * g.ricci_norm_sq + g.scalar_r, tol.closed_form, ctx()));
        let deltaf_f = g.laplacian_f() - g.grad_f_norm_sq();
        out.push(AuditReport::identity("deltaf_f[closed]", deltaf_f, half_n - g.f, tol.closed_form, ctx()));

        let chart = Chart::new(model, p.clone())?;
        let w0 = vec![0.0; n];
        let gm = chart.metric_at(&w0);
        let f_field = |q: &ManifoldPoint| model.potential(q);
        let r_field = |q: &ManifoldPoint| model.scalar_curvature() + 0.0 * q.0[0];
        let rc = ricci_fd(&chart, &w0, fd)?;
        let hess = hessian_fd(&chart, &f_field, &w0, fd)?;
        let (r_fd, rc2_fd) = ricci_invariants(&gm, &rc)?;
        let resid = orthonormal_form(&gm, &(&rc + &hess - &gm * 0.5));
        out.push(AuditReport::identity("shrinker_equation[fd]", resid.amax(), 0.0, tol.fd, ctx()));
        let grad = gradient_fd(&chart, &f_field, &w0, fd)?;
        let grad_sq = grad.dot(&(&gm * &grad));
        out.push(AuditReport::identity("hamiltonian[fd]", g.f - grad_sq, r_fd, tol.fd, ctx()));
        let deltaf_r = weighted_laplacian_fd(&chart, &r_field, &f_field, &w0, fd)?;
        out.push(AuditReport::identity("deltaf_R[fd]", deltaf_r, -2.0 * rc2_fd + r_fd, tol.fd, ctx()));
        let deltaf_f_fd = weighted_laplacian_fd(&chart, &f_field, &f_field, &w0, fd)?;
        out.push(AuditReport::identity("deltaf_f[fd]", deltaf_f_fd, half_n - g.f, tol.fd, ctx()));
    }
    Ok(out)
}

/// Closed-form expansion
/// `Δ_f(R/f) = (R/f²)(2f − n/2) − 2|Rc|²/f − 4Rc(∇f,∇f)/f² + 2R|∇f|²/f³`.
pub fn deltaf_r_over_f_expansion(model: &ModelSpec, p: &ManifoldPoint) -> Result<f64, AuditError> {
    let g = model.eval_geometry(p)?;
    let n = model.dim() as f64;
    let (f, r) = (g.f, g.scalar_r);
    Ok(r / (f * f) * (2.0 * f - n / 2.0) - 2.0 * g.ricci_norm_sq / f - 4.0 * g.ricci(&g.grad_f, &g.grad_f) / (f * f)
        + 2.0 * r * g.grad_f_norm_sq() / (f * f * f))
}

/// At each point: the FD value of `Δ_f(R/f)` against the expansion, and the
/// expansion against `−|Rc|²/f + 4(1+√n)²/f`.
pub fn check_deltaf_rf(
    model: &ModelSpec,
    points: &[ManifoldPoint],
    tol: f64,
    fd: &FdConfig,
) -> Result<Vec<AuditReport>, AuditError> {
    let n = model.dim() as f64;
    let mut out = Vec::with_capacity(2 * points.len());
    for p in points {
        let g = model.eval_geometry(p)?;
        if !(g.f > 0.0) {
            return Err(AuditError::NonPositivePotential(g.f));
        }
        let expansion = deltaf_r_over_f_expansion(model, p)?;
        let chart = Chart::new(model, p.clone())?;
        let rf = |q: &ManifoldPoint| model.scalar_curvature() / model.potential(q);
        let f_field = |q: &ManifoldPoint| model.potential(q);
        let fd_val = weighted_laplacian_fd(&chart, &rf, &f_field, &vec![0.0; model.dim()], fd)?;
        out.push(AuditReport::identity("deltaf_R_over_f[expansion]", fd_val, expansion, tol, AuditContext::at_point(model, p)));
        let bound = -g.ricci_norm_sq / g.f + 4.0 * (1.0 + n.sqrt()).powi(2) / g.f;
        out.push(AuditReport::inequality("deltaf_R_over_f[bound]", expansion, bound, AUDIT_TOLERANCE, 0.0, AuditContext::at_point(model, p)));
    }
    Ok(out)
}

/// Result of the good-point scan toward `y`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GoodPoint {
    pub z: ManifoldPoint,
    pub s_z: f64,
    pub ricci_norm: f64,
    /// `Ĉ(r(y) + 1)`.
    pub bound: f64,
    /// Smallest constant making the chain pass at this `y`.
    pub c_hat: f64,
    pub r_y: f64,
    pub a: f64,
    pub window: (f64, f64),
    pub report: AuditReport,
    pub chain: Vec<AuditReport>,
}

/// Solves the boundary-value problem from `O` to `y`, scans
/// `s ∈ [(1 − 1/(2A))s̄, s̄ − 1]` for the smallest `|Rc|`, and audits the
/// chain leading to `|Rc|(z) ≤ Ĉ(r(y) + 1)`.
pub fn find_good_point(
    model: &ModelSpec,
    params: PhiParams,
    y: &ManifoldPoint,
    settings: &AuditSettings,
) -> Result<GoodPoint, AuditError> {
    refuse_zero_base(model)?;
    let o = model.base_point();
    let r_y = model.radial_distance(y)?;
    if r_y == 0.0 {
        return Err(AuditError::DegenerateEndpoints);
    }
    let n = model.dim() as f64;
    let pair = solve_minimal_candidate(model, params, &o, y, &settings.solver)?;
    let a = (pair.shooting.c_value + params.c()).sqrt();
    let required = (2.0 * n).sqrt().max(3.0 * a);
    if r_y < required {
        return Err(AuditError::Precondition { r_y, required });
    }
    let s_bar = pair.shooting.s_bar();
    let (start, end) = ((1.0 - 1.0 / (2.0 * a)) * s_bar, s_bar - 1.0);
    if !(start < end) {
        return Err(AuditError::EmptyWindow { start, end });
    }
    let path = resample_for_audit(model, params, &pair.shooting, settings.per_unit, &[start], settings.solver.shooting.max_step)?;
    let in_window: Vec<usize> = (0..path.len())
        .filter(|&i| path.s_grid[i] >= start - 1e-9 && path.s_grid[i] <= end + 1e-9)
        .collect();
    let (&first, &last) = match (in_window.first(), in_window.last()) {
        (Some(f), Some(l)) if l > f => (f, l),
        _ => return Err(AuditError::EmptyWindow { start, end }),
    };
    let mut rc2 = Vec::with_capacity(in_window.len());
    for &i in &in_window {
        rc2.push(model.eval_geometry(&path.points[i])?.ricci_norm_sq);
    }
    let k = (0..rc2.len()).min_by(|&a, &b| rc2[a].total_cmp(&rc2[b])).expect("non-empty window");
    let iz = in_window[k];
    let z = path.points[iz].clone();
    let min_rc2 = rc2[k];
    let ricci_norm = min_rc2.sqrt();

    let zeta = CutoffZeta::new(s_bar)?;
    let ws = &path.s_grid[first..=last];
    let (window_integral, werr) = integrate_segments(ws, &[(0, ws.len() - 1)], |i, _| {
        zeta.value(ws[i]).powi(2) * rc2[i] / model.potential(&path.points[first + i])
    });
    let denom = ((n / 2.0).sqrt() + 1.5 * r_y).powi(2);
    let length_factor = r_y / (2.0 * a) - 1.0;
    let lower = length_factor * min_rc2 / denom;
    let full_rhs = weighted_ricci_rhs(model, params, a, model.distance(&o, y)?, 0.0, r_y);
    let bound = (full_rhs * denom / length_factor).sqrt();
    let c_hat = bound / (r_y + 1.0);
    let d_zy = model.distance(&z, y)?;

    let ctx = || {
        let mut c = AuditContext::for_path(model, params, &path);
        c.point = Some(z.0.clone());
        c.extra.insert("window_start".into(), start);
        c.extra.insert("window_end".into(), end);
        c.extra.insert("c_hat".into(), c_hat);
        c
    };
    let tol = settings.tolerance;
    let chain = vec![
        AuditReport::inequality("scan_window_lower_bound", lower, window_integral, tol, werr, ctx()),
        AuditReport::inequality("scan_window_le_weighted_bound", window_integral, full_rhs, tol, werr, ctx()),
        AuditReport::inequality("scan_distance", d_zy, r_y / 2.0, tol, 0.0, ctx()),
    ];
    let report = AuditReport::inequality("good_point", ricci_norm, bound, tol, 0.0, ctx());
    Ok(GoodPoint {
        z,
        s_z: path.s_grid[iz],
        ricci_norm,
        bound,
        c_hat,
        r_y,
        a,
        window: (start, end),
        report,
        chain,
    })
}

/// Outcome of the inequality chain for one `(c, y)` cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainOutcome {
    pub model: String,
    pub c: f64,
    pub r_y: f64,
    pub shooting_j: f64,
    pub discrete_j: f64,
    pub background_j: f64,
    pub c_value: f64,
    pub drift: f64,
    pub minimal_candidate: bool,
    pub reports: Vec<AuditReport>,
    /// `(audit name, refusal reason)` for audits that do not apply.
    pub skipped: Vec<(String, String)>,
}

impl ChainOutcome {
    pub fn all_pass(&self) -> bool {
        self.minimal_candidate && self.reports.iter().all(|r| r.verdict() == Verdict::Pass)
    }

    /// Pass, or inconclusive with a non-negative margin.
    pub fn acceptable(&self) -> bool {
        self.minimal_candidate
            && self.reports.iter().all(|r| match r.verdict() {
                Verdict::Pass => true,
                Verdict::Inconclusive => r.margin >= 0.0,
                Verdict::Fail => false,
            })
    }
}

/// Solves `x → y`, then runs the second-variation, combined-integral,
/// boundary-term, weighted-Ricci-integral and radial-envelope audits in order.
pub fn audit_chain(
    model: &ModelSpec,
    params: PhiParams,
    x: &ManifoldPoint,
    y: &ManifoldPoint,
    settings: &AuditSettings,
) -> Result<ChainOutcome, AuditError> {
    let pair = solve_minimal_candidate(model, params, x, y, &settings.solver)?;
    let path = resample_for_audit(model, params, &pair.shooting, settings.per_unit, &[], settings.solver.shooting.max_step)?;
    let mut reports = Vec::new();
    let mut skipped = Vec::new();
    let results = [
        ("second_variation", second_variation_audit(model, params, &path, settings)),
        ("combined_integral", combined_integral_audit(model, params, &path, settings)),
        ("boundary_term", boundary_term_audit(model, params, &path, settings)),
        ("weighted_ricci_integral", weighted_ricci_integral_audit(model, params, &path, x, y, settings)),
        ("radial_envelope", radial_envelope_audit(model, params, &path, settings)),
    ];
    for (name, result) in results {
        match result {
            Ok(r) => reports.push(r),
            Err(e) if e.is_refusal() => skipped.push((name.to_string(), e.to_string())),
            Err(e) => return Err(e),
        }
    }
    Ok(ChainOutcome {
        model: model.to_string(),
        c: params.c(),
        r_y: model.radial_distance(y)?,
        shooting_j: pair.evidence.shooting_j,
        discrete_j: pair.evidence.discrete_j,
        background_j: pair.evidence.background_j,
        c_value: path.c_value,
        drift: path.drift,
        minimal_candidate: pair.evidence.is_candidate(),
        reports,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phigeo::ShootingConfig;

    fn p(c: f64) -> PhiParams {
        PhiParams::new(c).unwrap()
    }

    #[test]
    fn cutoff_shape() {
        let z = CutoffZeta::new(5.0).unwrap();
        assert_eq!((z.value(0.0), z.value(0.5), z.value(3.0), z.value(4.5), z.value(5.0)), (0.0, 0.5, 1.0, 0.5, 0.0));
        assert_eq!((z.derivative(0.5), z.derivative(2.0), z.derivative(4.5)), (1.0, 0.0, -1.0));
        assert_eq!(z.derivative_toward(1.0, 0.5), 1.0);
        assert_eq!(z.derivative_toward(1.0, 2.5), 0.0);
        assert_eq!(z.derivative_toward(4.0, 2.5), 0.0);
        assert_eq!(z.derivative_toward(4.0, 4.5), -1.0);
        assert_eq!(CutoffZeta::new(1.5), Err(AuditError::CutoffUndefined(1.5)));
    }

    #[test]
    fn cutoff_with_empty_plateau() {
        let z = CutoffZeta::new(2.0).unwrap();
        assert_eq!(z.derivative_toward(1.0, 0.5), 1.0);
        assert_eq!(z.derivative_toward(1.0, 1.5), -1.0);
    }

    #[test]
    fn cutoff_integrals_by_quadrature() {
        for s_bar in [2.0, 3.0, 7.5, 40.0] {
            let z = CutoffZeta::new(s_bar).unwrap();
            let grid = audit_grid(s_bar, 8, &[]);
            let segs = segments(&grid, &z.breakpoints());
            let (i2, _) = integrate_segments(&grid, &segs, |i, _| z.value(grid[i]).powi(2));
            let (d2, _) = integrate_segments(&grid, &segs, |i, mid| z.derivative_toward(grid[i], mid).powi(2));
            assert!((i2 - (s_bar - 4.0 / 3.0)).abs() < 1e-10, "{s_bar}: {i2}");
            assert!((d2 - 2.0).abs() < 1e-10);
        }
    }

    #[test]
    fn audit_grid_hits_breakpoints() {
        let g = audit_grid(10.0, 4, &[7.3]);
        for b in [0.0, 1.0, 7.3, 9.0, 10.0] {
            assert!(g.iter().any(|s| (s - b).abs() < 1e-12), "{b}");
        }
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn report_verdicts() {
        let ctx = AuditContext::new(&ModelSpec::gaussian(2).unwrap());
        let ok = AuditReport::inequality("x", 1.0, 2.0, 1e-6, 1e-3, ctx.clone());
        assert!(ok.pass && ok.verdict() == Verdict::Pass);
        let fuzzy = AuditReport::inequality("x", 1.0, 1.05, 1e-6, 1e-3, ctx.clone());
        assert_eq!(fuzzy.verdict(), Verdict::Inconclusive);
        let bad = AuditReport::inequality("x", 1.0, 0.9, 1e-6, 0.0, ctx.clone());
        assert!(!bad.pass && bad.verdict() == Verdict::Fail);
        let edge = AuditReport::inequality("x", 1.0, 1.0 - 5e-7, 1e-6, 0.0, ctx);
        assert!(edge.pass);
    }

    #[test]
    fn round_sphere_expansion_vanishes() {
        let m = ModelSpec::round_sphere(4).unwrap();
        let o = m.base_point();
        assert!(deltaf_r_over_f_expansion(&m, &o).unwrap().abs() < 1e-14);
        let reports = check_deltaf_rf(&m, &[o], 1e-4, &FdConfig::default()).unwrap();
        assert!((reports[1].rhs - 17.5).abs() < 1e-12);
        assert!(reports.iter().all(|r| r.pass));
    }

    #[test]
    fn cylinder_expansion_at_radius_two() {
        let m = ModelSpec::cylinder(2, 2).unwrap();
        let mut q = m.base_point();
        q.0[3] = 2.0;
        assert!((deltaf_r_over_f_expansion(&m, &q).unwrap() - 0.25).abs() < 1e-14);
        let reports = check_deltaf_rf(&m, &[q], 1e-4, &FdConfig::default()).unwrap();
        assert!(reports[0].pass, "{:?}", reports[0]);
    }

    #[test]
    fn deltaf_rf_refuses_zero_potential() {
        let m = ModelSpec::gaussian(3).unwrap();
        let err = check_deltaf_rf(&m, &[m.base_point()], 1e-4, &FdConfig::default()).unwrap_err();
        assert_eq!(err, AuditError::NonPositivePotential(0.0));
    }

    #[test]
    fn identities_hold_on_cylinder_sample() {
        let m = ModelSpec::cylinder(2, 2).unwrap();
        let mut q = m.point_at_radius(3.0).unwrap();
        q.0[3] = 2.0;
        let reports = check_soliton_identities(&m, &[q], &IdentityTolerance::default(), &FdConfig::default()).unwrap();
        assert_eq!(reports.len(), 9);
        for r in &reports {
            assert!(r.pass, "{r:?}");
        }
    }

    #[test]
    fn gradient_bounds() {
        let m = ModelSpec::cylinder(2, 2).unwrap();
        let mut q = m.base_point();
        q.0[3] = 6.0;
        let reports = gradient_f_bound_audit(&m, &[q, m.base_point()]).unwrap();
        assert!((reports[0].lhs - 3.0).abs() < 1e-14);
        assert!((reports[0].rhs - 10f64.sqrt()).abs() < 1e-14);
        assert!((reports[1].rhs - (2f64.sqrt() + 6.0)).abs() < 1e-14);
        assert!(reports.iter().all(|r| r.pass));
    }

    #[test]
    fn second_variation_on_round_sphere_arc() {
        let m = ModelSpec::round_sphere(3).unwrap();
        let y = m.point_at_radius(3.0).unwrap();
        let path = crate::phigeo::solve_bvp_shooting(&m, p(0.1), &m.base_point(), &y, &ShootingConfig::default()).unwrap();
        let s = AuditSettings::default();
        let path = resample_for_audit(&m, p(0.1), &path, s.per_unit, &[], 1e-2).unwrap();
        let r = second_variation_audit(&m, p(0.1), &path, &s).unwrap();
        assert!((r.lhs - 5.0 / 6.0).abs() < 1e-6, "{}", r.lhs);
        assert!((r.rhs - 6.0).abs() < 1e-10);
        assert_eq!(r.verdict(), Verdict::Pass);

        let comb = combined_integral_audit(&m, p(0.1), &path, &s).unwrap();
        let k = 4.0 * (1.0 + 3f64.sqrt()).powi(2);
        let expected = 0.05 * (5.0 / 3.0) * (0.75 - k) / 1.5 + 5.0 / 6.0;
        assert!((comb.lhs - expected).abs() < 1e-9);
        assert!((comb.lhs + 0.784).abs() < 1e-3);
        assert!((comb.rhs - 6.0).abs() < 1e-10);

        let bt = boundary_term_audit(&m, p(0.1), &path, &s).unwrap();
        assert_eq!(bt.lhs, 0.0);
        assert!(bt.rhs > 0.0);
    }

    #[test]
    fn short_paths_are_refused() {
        let m = ModelSpec::round_sphere(2).unwrap();
        let y = m.point_at_radius(1.5).unwrap();
        let path = m.background_geodesic(&m.base_point(), &y, 16).unwrap();
        let err = second_variation_audit(&m, p(0.1), &path, &AuditSettings::default()).unwrap_err();
        assert_eq!(err, AuditError::CutoffUndefined(path.s_bar()));
    }

    #[test]
    fn gaussian_is_refused_where_it_divides() {
        let m = ModelSpec::gaussian(3).unwrap();
        let y = ManifoldPoint(vec![10.0, 0.0, 0.0]);
        let path = m.background_geodesic(&m.base_point(), &y, 64).unwrap();
        let s = AuditSettings::default();
        assert_eq!(combined_integral_audit(&m, p(0.1), &path, &s).unwrap_err(), AuditError::Degenerate("R ≡ 0"));
        let err = weighted_ricci_integral_audit(&m, p(0.1), &path, &m.base_point(), &y, &s).unwrap_err();
        assert_eq!(err.to_string(), "degenerate: f(O)=0");
        assert!(find_good_point(&m, p(0.1), &y, &s).unwrap_err().is_refusal());
    }

    #[test]
    fn radial_envelope_refuses_constant_path() {
        let m = ModelSpec::cylinder(2, 2).unwrap();
        let o = m.base_point();
        let mut path = m.background_geodesic(&o, &m.point_at_radius(3.0).unwrap(), 4).unwrap();
        let first = path.points[0].clone();
        path.points.iter_mut().for_each(|q| *q = first.clone());
        assert_eq!(
            radial_envelope_audit(&m, p(0.1), &path, &AuditSettings::default()).unwrap_err(),
            AuditError::DegenerateEndpoints
        );
    }

    #[test]
    fn report_serializes_with_expected_keys() {
        let r = AuditReport::inequality("x", 1.0, 2.0, 1e-6, 0.0, AuditContext::new(&ModelSpec::gaussian(2).unwrap()));
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        let mut keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        keys.sort_unstable();
        assert_eq!(keys, ["context", "lhs", "margin", "name", "pass", "quadrature_error", "rhs", "tolerance"]);
    }
}
