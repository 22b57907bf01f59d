//! φ-geodesics: critical points of `J(γ) = ∫₀^s̄ (|γ′|² + 2φ(γ)) ds` with
//! `2φ = cR/f`.
//!
//! Two independent boundary-value solvers are provided: shooting on the
//! Euler–Lagrange equation `∇_S S = ∇φ`, and direct minimization of the
//! discretized action. Both fix the parameter interval to `[0, d(x, y)]`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::{dot, FactorKind, ManifoldPoint, ModelError, ModelSpec, TangentVec};
use crate::path::{MinimalityEvidence, PathSource, PhiPath};
use crate::quadrature::simpson;

pub const DRIFT_LIMIT: f64 = 1e-6;
pub const MAX_IVP_STEP: f64 = 1e-2;
pub const MAX_SHOOTING_CONDITION: f64 = 1e10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhiGeoError {
    #[error("c must be finite and > 0 (got {0})")]
    InvalidC(f64),
    #[error("audits require c < 1 (got {0})")]
    CTooLarge(f64),
    #[error("integration step {0} exceeds the limit {MAX_IVP_STEP}")]
    StepTooLarge(f64),
    #[error("interval length must be > 0 (got {0})")]
    NonPositiveLength(f64),
    #[error("conservation drift {drift:e} exceeds {limit:e} at step {step:e}; reduce the step")]
    DriftExceeded { drift: f64, limit: f64, step: f64 },
    #[error("shooting did not converge after {iterations} iterations (best miss {best_miss:e})")]
    NoConvergence { iterations: usize, best_miss: f64 },
    #[error("ill-conditioned shooting (Jacobian condition number {0:e})")]
    IllConditioned(f64),
    #[error("discrete minimization needs at least 16 intervals (got {0})")]
    GridTooSmall(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiParams {
    c: f64,
}

impl PhiParams {
    pub fn new(c: f64) -> Result<Self, PhiGeoError> {
        if !(c.is_finite() && c > 0.0) {
            return Err(PhiGeoError::InvalidC(c));
        }
        Ok(PhiParams { c })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn require_audit_range(&self) -> Result<(), PhiGeoError> {
        if self.c >= 1.0 {
            return Err(PhiGeoError::CTooLarge(self.c));
        }
        Ok(())
    }
}

/// `φ = cR/(2f)`, taken as 0 when `R = 0` (the Gaussian limit).
pub fn phi_value(model: &ModelSpec, params: PhiParams, p: &ManifoldPoint) -> f64 {
    let r = model.scalar_curvature();
    if r == 0.0 {
        return 0.0;
    }
    params.c * r / (2.0 * model.potential(p))
}

fn phi_gradient_raw(model: &ModelSpec, params: PhiParams, p: &[f64]) -> Vec<f64> {
    let r = model.scalar_curvature();
    let mut g = vec![0.0; p.len()];
    if r == 0.0 {
        return g;
    }
    let pt = ManifoldPoint(p.to_vec());
    let f = model.potential(&pt);
    let coef = -params.c * r / (2.0 * f * f);
    for (gi, di) in g.iter_mut().zip(model.grad_potential(&pt).0) {
        *gi = coef * di;
    }
    g
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhiEval {
    pub phi: f64,
    pub grad: TangentVec,
    /// Set when `f = 0` and the `R = 0` limit was used.
    pub zero_f_limit: bool,
}

/// `φ` and `∇φ = −(cR/(2f²))∇f` (R is constant on every catalog model).
pub fn phi_and_gradient(model: &ModelSpec, params: PhiParams, p: &ManifoldPoint) -> Result<PhiEval, PhiGeoError> {
    model.validate_point(p)?;
    let zero_f_limit = model.scalar_curvature() == 0.0 && model.potential(p) == 0.0;
    Ok(PhiEval {
        phi: phi_value(model, params, p),
        grad: TangentVec(phi_gradient_raw(model, params, &p.0)),
        zero_f_limit,
    })
}

// Ambient second derivative along a φ-geodesic: tangential part ∇φ, plus the
// sphere normal term −|v|²/|u|² u.
fn acceleration(model: &ModelSpec, params: PhiParams, pos: &[f64], vel: &[f64]) -> Vec<f64> {
    let mut a = phi_gradient_raw(model, params, pos);
    for f in model.factors() {
        if let FactorKind::Sphere { .. } = f.kind {
            let r = f.ambient.clone();
            let u = &pos[r.clone()];
            let v = &vel[r.clone()];
            let k = dot(v, v) / dot(u, u);
            for (ai, ui) in a[r].iter_mut().zip(u) {
                *ai -= k * ui;
            }
        }
    }
    a
}

fn rk4_step(model: &ModelSpec, params: PhiParams, pos: &mut Vec<f64>, vel: &mut Vec<f64>, h: f64) {
    let axpy = |x: &[f64], a: f64, y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(xi, yi)| xi + a * yi).collect() };
    let k1x = vel.clone();
    let k1v = acceleration(model, params, pos, vel);
    let p2 = axpy(pos, 0.5 * h, &k1x);
    let v2 = axpy(vel, 0.5 * h, &k1v);
    let k2v = acceleration(model, params, &p2, &v2);
    let p3 = axpy(pos, 0.5 * h, &v2);
    let v3 = axpy(vel, 0.5 * h, &k2v);
    let k3v = acceleration(model, params, &p3, &v3);
    let p4 = axpy(pos, h, &v3);
    let v4 = axpy(vel, h, &k3v);
    let k4v = acceleration(model, params, &p4, &v4);
    for i in 0..pos.len() {
        pos[i] += h / 6.0 * (k1x[i] + 2.0 * v2[i] + 2.0 * v3[i] + v4[i]);
        vel[i] += h / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i]);
    }
    let mut p = ManifoldPoint(std::mem::take(pos));
    model.project_point(&mut p);
    let mut v = TangentVec(std::mem::take(vel));
    model.project_tangent(&p, &mut v);
    *pos = p.0;
    *vel = v.0;
}

fn tangent_start(model: &ModelSpec, p0: &ManifoldPoint, v0: &TangentVec) -> Result<TangentVec, PhiGeoError> {
    model.validate_point(p0)?;
    if v0.0.len() != model.ambient_dim() {
        return Err(ModelError::WrongLength { expected: model.ambient_dim(), got: v0.0.len() }.into());
    }
    let mut v = v0.clone();
    model.project_tangent(p0, &mut v);
    Ok(v)
}

/// Integrates from `(p0, v0)` and records the state at every grid node,
/// taking `ceil(Δs / max_step)` equal RK4 substeps per grid interval.
pub fn integrate_on_grid(
    model: &ModelSpec,
    params: PhiParams,
    p0: &ManifoldPoint,
    v0: &TangentVec,
    grid: &[f64],
    max_step: f64,
) -> Result<PhiPath, PhiGeoError> {
    let v0 = tangent_start(model, p0, v0)?;
    let mut pos = p0.0.clone();
    let mut vel = v0.0;
    let mut points = vec![ManifoldPoint(pos.clone())];
    let mut velocities = vec![TangentVec(vel.clone())];
    for w in grid.windows(2) {
        let ds = w[1] - w[0];
        let m = (ds / max_step).ceil().max(1.0) as usize;
        let h = ds / m as f64;
        for _ in 0..m {
            rk4_step(model, params, &mut pos, &mut vel, h);
        }
        points.push(ManifoldPoint(pos.clone()));
        velocities.push(TangentVec(vel.clone()));
    }
    let mut path = PhiPath::new(PathSource::Ivp, grid.to_vec(), points, velocities);
    finish_path(model, params, &mut path);
    Ok(path)
}

fn finish_path(model: &ModelSpec, params: PhiParams, path: &mut PhiPath) {
    let (c, drift) = conserved_quantity(model, params, path);
    path.c_value = c;
    path.drift = drift;
    path.action_j = action(model, params, path);
}

/// Classical RK4 for `∇_S S = ∇φ` on `[0, s̄]`, every step recorded. Aborts when
/// the conservation drift exceeds `1e−6`.
pub fn integrate_ivp(
    model: &ModelSpec,
    params: PhiParams,
    p0: &ManifoldPoint,
    v0: &TangentVec,
    s_bar: f64,
    step: f64,
) -> Result<PhiPath, PhiGeoError> {
    if !(step > 0.0 && step <= MAX_IVP_STEP) {
        return Err(PhiGeoError::StepTooLarge(step));
    }
    if !(s_bar > 0.0 && s_bar.is_finite()) {
        return Err(PhiGeoError::NonPositiveLength(s_bar));
    }
    let n = (s_bar / step).ceil() as usize;
    let grid = uniform_grid(s_bar, n);
    let path = integrate_on_grid(model, params, p0, v0, &grid, step)?;
    if path.drift > DRIFT_LIMIT {
        return Err(PhiGeoError::DriftExceeded { drift: path.drift, limit: DRIFT_LIMIT, step });
    }
    Ok(path)
}

pub fn uniform_grid(s_bar: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| if i == n { s_bar } else { s_bar * i as f64 / n as f64 }).collect()
}

/// `J` by composite Simpson on the node data.
pub fn action(model: &ModelSpec, params: PhiParams, path: &PhiPath) -> f64 {
    let vals: Vec<f64> = path
        .points
        .iter()
        .zip(&path.velocities)
        .map(|(p, v)| v.dot(v) + 2.0 * phi_value(model, params, p))
        .collect();
    simpson(&path.s_grid, &vals)
}

/// `C` = median over nodes of `|S|² − 2φ`; drift = max deviation from it.
pub fn conserved_quantity(model: &ModelSpec, params: PhiParams, path: &PhiPath) -> (f64, f64) {
    let vals: Vec<f64> = path
        .points
        .iter()
        .zip(&path.velocities)
        .map(|(p, v)| v.dot(v) - 2.0 * phi_value(model, params, p))
        .collect();
    if vals.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let drift_of = |c: f64, vals: &[f64]| vals.iter().map(|v| (v - c).abs()).fold(0.0, f64::max);
    let mut sorted = vals.clone();
    sorted.sort_by(f64::total_cmp);
    let k = sorted.len();
    let median = if k % 2 == 1 { sorted[k / 2] } else { 0.5 * (sorted[k / 2 - 1] + sorted[k / 2]) };
    (median, drift_of(median, &vals))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShootingConfig {
    /// Grid intervals of the returned path.
    pub nodes: usize,
    /// Largest RK4 substep.
    pub max_step: f64,
    /// Endpoint miss tolerance (distance).
    pub tol: f64,
    pub max_iters: usize,
    /// Largest accepted conservation drift of the converged path.
    pub drift_limit: f64,
}

impl Default for ShootingConfig {
    fn default() -> Self {
        ShootingConfig { nodes: 256, max_step: 1e-2, tol: 1e-10, max_iters: 100, drift_limit: DRIFT_LIMIT }
    }
}

struct Shooter<'a> {
    model: &'a ModelSpec,
    params: PhiParams,
    x: &'a ManifoldPoint,
    y: &'a ManifoldPoint,
    basis_x: Vec<TangentVec>,
    basis_y: Vec<TangentVec>,
    steps: usize,
    h: f64,
}

impl Shooter<'_> {
    fn velocity(&self, a: &[f64]) -> TangentVec {
        let mut v = TangentVec::zeros(self.model.ambient_dim());
        for (ai, e) in a.iter().zip(&self.basis_x) {
            v = v.add(&e.scaled(*ai));
        }
        v
    }

    fn residual(&self, a: &[f64]) -> Option<Vec<f64>> {
        let mut pos = self.x.0.clone();
        let mut vel = self.velocity(a).0;
        for _ in 0..self.steps {
            rk4_step(self.model, self.params, &mut pos, &mut vel, self.h);
        }
        if pos.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let (log, _) = self.model.log_map(self.y, &ManifoldPoint(pos));
        Some(self.basis_y.iter().map(|e| e.dot(&log)).collect())
    }
}

fn vnorm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Shooting on the initial velocity with damped Newton and a
/// central-difference Jacobian.
pub fn solve_bvp_shooting(
    model: &ModelSpec,
    params: PhiParams,
    x: &ManifoldPoint,
    y: &ManifoldPoint,
    cfg: &ShootingConfig,
) -> Result<PhiPath, PhiGeoError> {
    if !(cfg.max_step > 0.0 && cfg.max_step <= MAX_IVP_STEP) {
        return Err(PhiGeoError::StepTooLarge(cfg.max_step));
    }
    let background = model.background_geodesic(x, y, cfg.nodes.max(2))?;
    let s_bar = background.s_bar();
    let r = model.scalar_curvature();
    let mean_rf = if r == 0.0 {
        0.0
    } else {
        background.points.iter().map(|p| r / model.potential(p)).sum::<f64>() / background.len() as f64
    };
    let speed0 = (1.0 + params.c() * mean_rf).sqrt();

    let n_int = cfg.nodes.max(2);
    let substeps = ((s_bar / n_int as f64) / cfg.max_step).ceil().max(1.0) as usize;
    let steps = n_int * substeps;
    let shooter = Shooter {
        model,
        params,
        x,
        y,
        basis_x: model.tangent_basis(x),
        basis_y: model.tangent_basis(y),
        steps,
        h: s_bar / steps as f64,
    };
    let n = model.dim();
    let v_bg = &background.velocities[0];
    let mut a: Vec<f64> = shooter.basis_x.iter().map(|e| speed0 * e.dot(v_bg)).collect();
    let mut res = shooter.residual(&a).ok_or(PhiGeoError::NoConvergence { iterations: 0, best_miss: f64::INFINITY })?;
    let mut miss = vnorm(&res);
    let mut iterations = 0;
    while miss > cfg.tol {
        if iterations >= cfg.max_iters {
            return Err(PhiGeoError::NoConvergence { iterations, best_miss: miss });
        }
        iterations += 1;
        let delta = 1e-6 * (1.0 + vnorm(&a));
        let mut jac = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut ap = a.clone();
            ap[j] += delta;
            let mut am = a.clone();
            am[j] -= delta;
            let (rp, rm) = match (shooter.residual(&ap), shooter.residual(&am)) {
                (Some(rp), Some(rm)) => (rp, rm),
                _ => return Err(PhiGeoError::NoConvergence { iterations, best_miss: miss }),
            };
            for i in 0..n {
                jac[(i, j)] = (rp[i] - rm[i]) / (2.0 * delta);
            }
        }
        let svd = jac.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        if !(cond <= MAX_SHOOTING_CONDITION) {
            return Err(PhiGeoError::IllConditioned(cond));
        }
        let step = svd
            .solve(&DVector::from_column_slice(&res), 0.0)
            .map_err(|_| PhiGeoError::IllConditioned(cond))?;
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = a.iter().zip(step.iter()).map(|(ai, si)| ai - t * si).collect();
            if let Some(r_new) = shooter.residual(&trial) {
                let m_new = vnorm(&r_new);
                if m_new < miss {
                    a = trial;
                    res = r_new;
                    miss = m_new;
                    break;
                }
            }
            t *= 0.5;
            if t < 1e-10 {
                return Err(PhiGeoError::NoConvergence { iterations, best_miss: miss });
            }
        }
    }
    let v0 = shooter.velocity(&a);
    let grid = uniform_grid(s_bar, n_int);
    let mut path = integrate_on_grid(model, params, x, &v0, &grid, cfg.max_step)?;
    if path.drift > cfg.drift_limit {
        return Err(PhiGeoError::DriftExceeded { drift: path.drift, limit: cfg.drift_limit, step: shooter.h });
    }
    path.source = PathSource::Shooting;
    path.iterations = iterations;
    path.solver_residual = miss;
    path.non_unique = background.non_unique;
    Ok(path)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscreteConfig {
    pub nodes: usize,
    pub max_iters: usize,
    /// Stop when the gradient norm is below `grad_tol · (1 + J)`.
    pub grad_tol: f64,
}

impl Default for DiscreteConfig {
    fn default() -> Self {
        DiscreteConfig { nodes: 256, max_iters: 10_000, grad_tol: 1e-6 }
    }
}

struct DiscreteAction<'a> {
    model: &'a ModelSpec,
    params: PhiParams,
    ds: f64,
}

impl DiscreteAction<'_> {
    // Σ d(γᵢ, γᵢ₊₁)²/Δs + Σ wᵢ 2φ(γᵢ) Δs with trapezoid weights.
    fn energy(&self, nodes: &[ManifoldPoint]) -> f64 {
        let last = nodes.len() - 1;
        let kinetic: f64 = nodes
            .windows(2)
            .map(|w| self.model.distance_unchecked(&w[0], &w[1]).powi(2))
            .sum::<f64>()
            / self.ds;
        let potential: f64 = nodes
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let w = if i == 0 || i == last { 0.5 } else { 1.0 };
                w * 2.0 * phi_value(self.model, self.params, p)
            })
            .sum::<f64>()
            * self.ds;
        kinetic + potential
    }

    // Riemannian gradient at interior nodes (endpoints carry zeros).
    fn gradient(&self, nodes: &[ManifoldPoint]) -> Vec<Vec<f64>> {
        let last = nodes.len() - 1;
        let amb = self.model.ambient_dim();
        let mut g = vec![vec![0.0; amb]; nodes.len()];
        for i in 1..last {
            let (lp, _) = self.model.log_map(&nodes[i], &nodes[i - 1]);
            let (ln, _) = self.model.log_map(&nodes[i], &nodes[i + 1]);
            let gp = phi_gradient_raw(self.model, self.params, &nodes[i].0);
            for k in 0..amb {
                g[i][k] = -2.0 * (lp.0[k] + ln.0[k]) / self.ds + 2.0 * gp[k] * self.ds;
            }
        }
        g
    }
}

// Solves (2/Δs)·tridiag(−1, 2, −1) x = b for each ambient coordinate over the
// interior nodes (Thomas algorithm).
fn sobolev_precondition(g: &[Vec<f64>], ds: f64) -> Vec<Vec<f64>> {
    let n = g.len();
    let m = n - 2;
    let amb = g[0].len();
    let mut out = vec![vec![0.0; amb]; n];
    if m == 0 {
        return out;
    }
    let scale = 2.0 / ds;
    for k in 0..amb {
        let mut c = vec![0.0; m];
        let mut d = vec![0.0; m];
        let (a, b, cc) = (-scale, 2.0 * scale, -scale);
        c[0] = cc / b;
        d[0] = g[1][k] / b;
        for i in 1..m {
            let denom = b - a * c[i - 1];
            c[i] = cc / denom;
            d[i] = (g[i + 1][k] - a * d[i - 1]) / denom;
        }
        let mut x = vec![0.0; m];
        x[m - 1] = d[m - 1];
        for i in (0..m - 1).rev() {
            x[i] = d[i] - c[i] * x[i + 1];
        }
        for i in 0..m {
            out[i + 1][k] = x[i];
        }
    }
    out
}

fn discrete_velocities(model: &ModelSpec, nodes: &[ManifoldPoint], ds: f64) -> Vec<TangentVec> {
    let last = nodes.len() - 1;
    (0..=last)
        .map(|i| {
            let comb = |a: f64, la: &TangentVec, b: f64, lb: &TangentVec| {
                TangentVec(la.0.iter().zip(&lb.0).map(|(x, y)| (a * x + b * y) / (2.0 * ds)).collect())
            };
            if i == 0 {
                let (l1, _) = model.log_map(&nodes[0], &nodes[1]);
                let (l2, _) = model.log_map(&nodes[0], &nodes[2]);
                comb(4.0, &l1, -1.0, &l2)
            } else if i == last {
                let (l1, _) = model.log_map(&nodes[last], &nodes[last - 1]);
                let (l2, _) = model.log_map(&nodes[last], &nodes[last - 2]);
                comb(-4.0, &l1, 1.0, &l2)
            } else {
                let (ln, _) = model.log_map(&nodes[i], &nodes[i + 1]);
                let (lp, _) = model.log_map(&nodes[i], &nodes[i - 1]);
                comb(1.0, &ln, -1.0, &lp)
            }
        })
        .collect()
}

/// Minimizes the discretized action over interior nodes by Sobolev-
/// preconditioned gradient descent with Armijo backtracking, starting from
/// the background geodesic.
pub fn minimize_action_discrete(
    model: &ModelSpec,
    params: PhiParams,
    x: &ManifoldPoint,
    y: &ManifoldPoint,
    cfg: &DiscreteConfig,
) -> Result<PhiPath, PhiGeoError> {
    if cfg.nodes < 16 {
        return Err(PhiGeoError::GridTooSmall(cfg.nodes));
    }
    let background = model.background_geodesic(x, y, cfg.nodes)?;
    let s_bar = background.s_bar();
    let ds = s_bar / cfg.nodes as f64;
    let problem = DiscreteAction { model, params, ds };
    let mut nodes = background.points.clone();
    let mut energy = problem.energy(&nodes);
    let mut iterations = 0;
    let mut stalled = false;
    let mut gnorm;
    loop {
        let grad = problem.gradient(&nodes);
        gnorm = grad.iter().flatten().map(|g| g * g).sum::<f64>().sqrt();
        if gnorm <= cfg.grad_tol * (1.0 + energy) || iterations >= cfg.max_iters {
            break;
        }
        iterations += 1;
        let mut dir = sobolev_precondition(&grad, ds);
        for (d, p) in dir.iter_mut().zip(&nodes) {
            let mut v = TangentVec(std::mem::take(d));
            model.project_tangent(p, &mut v);
            *d = v.0;
        }
        let slope: f64 = grad.iter().flatten().zip(dir.iter().flatten()).map(|(g, d)| g * d).sum();
        let mut t = 1.0;
        let accepted = loop {
            let trial: Vec<ManifoldPoint> = nodes
                .iter()
                .zip(&dir)
                .map(|(p, d)| {
                    let mut q = ManifoldPoint(p.0.iter().zip(d).map(|(a, b)| a - t * b).collect());
                    model.project_point(&mut q);
                    q
                })
                .collect();
            let e = problem.energy(&trial);
            if e <= energy - 1e-4 * t * slope {
                nodes = trial;
                energy = e;
                break true;
            }
            t *= 0.5;
            if t < 1e-12 {
                break false;
            }
        };
        if !accepted {
            stalled = true;
            break;
        }
    }
    let velocities = discrete_velocities(model, &nodes, ds);
    let mut path = PhiPath::new(PathSource::Discrete, background.s_grid.clone(), nodes, velocities);
    let (c, drift) = conserved_quantity(model, params, &path);
    path.c_value = c;
    path.drift = drift;
    path.action_j = energy;
    path.iterations = iterations;
    path.stalled = stalled;
    path.solver_residual = gnorm;
    path.non_unique = background.non_unique;
    Ok(path)
}

/// `∫(|γ̄′|² + cR/f) ds` along the background geodesic.
pub fn background_action(
    model: &ModelSpec,
    params: PhiParams,
    x: &ManifoldPoint,
    y: &ManifoldPoint,
    nodes: usize,
) -> Result<f64, PhiGeoError> {
    let bg = model.background_geodesic(x, y, nodes)?;
    Ok(action(model, params, &bg))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub shooting: ShootingConfig,
    pub discrete: DiscreteConfig,
}

#[derive(Debug, Clone)]
pub struct CandidatePair {
    pub shooting: PhiPath,
    pub discrete: PhiPath,
    pub evidence: MinimalityEvidence,
}

/// Runs both solvers and attaches the comparison evidence to both paths.
pub fn solve_minimal_candidate(
    model: &ModelSpec,
    params: PhiParams,
    x: &ManifoldPoint,
    y: &ManifoldPoint,
    cfg: &SolverConfig,
) -> Result<CandidatePair, PhiGeoError> {
    let mut shooting = solve_bvp_shooting(model, params, x, y, &cfg.shooting)?;
    let mut discrete = minimize_action_discrete(model, params, x, y, &cfg.discrete)?;
    let background_j = background_action(model, params, x, y, cfg.shooting.nodes.max(2))?;
    let (js, jd) = (shooting.action_j, discrete.action_j);
    let evidence = MinimalityEvidence {
        shooting_j: js,
        discrete_j: jd,
        background_j,
        shooting_c: shooting.c_value,
        discrete_c: discrete.c_value,
        solvers_agree: (js - jd).abs() <= 1e-3 * (1.0 + js.abs())
            && (shooting.c_value - discrete.c_value).abs() <= 1e-3,
        below_background: js <= background_j + 1e-6,
    };
    shooting.minimality = Some(evidence.clone());
    discrete.minimality = Some(evidence.clone());
    Ok(CandidatePair { shooting, discrete, evidence })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn p(c: f64) -> PhiParams {
        PhiParams::new(c).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(PhiParams::new(0.0).is_err());
        assert!(PhiParams::new(f64::NAN).is_err());
        assert!(p(1.0).require_audit_range().is_err());
        assert!(p(0.5).require_audit_range().is_ok());
    }

    #[test]
    fn phi_on_round_sphere_is_constant() {
        let m = ModelSpec::round_sphere(3).unwrap();
        let e = phi_and_gradient(&m, p(0.1), &m.point_at_radius(1.0).unwrap()).unwrap();
        assert!((e.phi - 0.05).abs() < 1e-15);
        assert_eq!(e.grad.norm(), 0.0);
    }

    #[test]
    fn phi_on_cylinder() {
        let m = ModelSpec::cylinder(2, 2).unwrap();
        let mut q = m.base_point();
        q.0[3] = 2.0;
        let e = phi_and_gradient(&m, p(0.1), &q).unwrap();
        assert!((e.phi - 0.025).abs() < 1e-15);
        // ∇φ = −(c/(4f²)) x
        assert!((e.grad.0[3] + 0.1 / 16.0 * 2.0).abs() < 1e-15);
    }

    #[test]
    fn phi_vanishes_on_gaussian() {
        let m = ModelSpec::gaussian(3).unwrap();
        let e = phi_and_gradient(&m, p(0.3), &m.base_point()).unwrap();
        assert_eq!(e.phi, 0.0);
        assert!(e.zero_f_limit);
    }

    #[test]
    fn ivp_straight_line_on_gaussian() {
        let m = ModelSpec::gaussian(2).unwrap();
        let path = integrate_ivp(&m, p(0.1), &m.base_point(), &TangentVec(vec![1.0, 0.0]), 5.0, 1e-2).unwrap();
        let end = path.end();
        assert!((end.0[0] - 5.0).abs() < 1e-12 && end.0[1].abs() < 1e-15);
        assert!(path.drift < 1e-13);
        assert!((path.action_j - 5.0).abs() < 1e-12);
        assert!((path.c_value - 1.0).abs() < 1e-14);
    }

    #[test]
    fn ivp_great_circle_reaches_antipode() {
        let m = ModelSpec::round_sphere(2).unwrap();
        let o = m.base_point();
        let v0 = m.tangent_basis(&o)[0].clone();
        let path = integrate_ivp(&m, p(0.1), &o, &v0, PI * 2f64.sqrt(), 1e-3).unwrap();
        let mut anti = o.clone();
        anti.0[0] = -anti.0[0];
        assert!(m.distance(path.end(), &anti).unwrap() < 1e-8);
    }

    #[test]
    fn ivp_rejects_large_step() {
        let m = ModelSpec::gaussian(2).unwrap();
        let err = integrate_ivp(&m, p(0.1), &m.base_point(), &TangentVec(vec![1.0, 0.0]), 1.0, 0.05);
        assert_eq!(err.unwrap_err(), PhiGeoError::StepTooLarge(0.05));
    }

    #[test]
    fn action_and_c_on_sphere_arc() {
        let m = ModelSpec::round_sphere(3).unwrap();
        let y = m.point_at_radius(3.0).unwrap();
        let path = m.background_geodesic(&m.base_point(), &y, 64).unwrap();
        assert!((action(&m, p(0.1), &path) - 3.3).abs() < 1e-12);
        let (c, drift) = conserved_quantity(&m, p(0.1), &path);
        assert!((c - 0.9).abs() < 1e-12 && drift < 1e-12);
    }

    #[test]
    fn shooting_on_gaussian_is_straight() {
        let m = ModelSpec::gaussian(3).unwrap();
        let x = ManifoldPoint(vec![1.0, -1.0, 0.5]);
        let y = ManifoldPoint(vec![-2.0, 3.0, 1.0]);
        let path = solve_bvp_shooting(&m, p(0.1), &x, &y, &ShootingConfig::default()).unwrap();
        assert!((path.c_value - 1.0).abs() < 1e-9);
        assert!(m.distance(path.end(), &y).unwrap() < 1e-9);
    }

    #[test]
    fn shooting_on_round_sphere() {
        let m = ModelSpec::round_sphere(3).unwrap();
        let y = m.point_at_radius(2.0).unwrap();
        let path = solve_bvp_shooting(&m, p(0.1), &m.base_point(), &y, &ShootingConfig::default()).unwrap();
        assert!((path.c_value - 0.9).abs() < 1e-9, "{}", path.c_value);
        assert!((path.max_speed() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn shooting_rejects_coincident_endpoints() {
        let m = ModelSpec::cylinder(2, 2).unwrap();
        let o = m.base_point();
        let err = solve_bvp_shooting(&m, p(0.1), &o, &o, &ShootingConfig::default()).unwrap_err();
        assert_eq!(err, PhiGeoError::Model(ModelError::DegenerateEndpoints));
    }

    #[test]
    fn discrete_on_gaussian_recovers_segment() {
        let m = ModelSpec::gaussian(2).unwrap();
        let y = ManifoldPoint(vec![3.0, 4.0]);
        let path = minimize_action_discrete(&m, p(0.1), &m.base_point(), &y, &DiscreteConfig::default()).unwrap();
        assert!((path.action_j - 5.0).abs() < 1e-12);
        assert_eq!(path.iterations, 0);
    }

    #[test]
    fn discrete_on_round_sphere() {
        let m = ModelSpec::round_sphere(2).unwrap();
        let y = m.point_at_radius(3.0).unwrap();
        let cfg = DiscreteConfig { nodes: 64, ..DiscreteConfig::default() };
        let path = minimize_action_discrete(&m, p(0.1), &m.base_point(), &y, &cfg).unwrap();
        assert!((path.action_j - 3.0 * 1.1).abs() < 1e-9, "{}", path.action_j);
    }

    #[test]
    fn discrete_requires_sixteen_intervals() {
        let m = ModelSpec::gaussian(2).unwrap();
        let cfg = DiscreteConfig { nodes: 8, ..DiscreteConfig::default() };
        let err = minimize_action_discrete(&m, p(0.1), &m.base_point(), &ManifoldPoint(vec![1.0, 0.0]), &cfg);
        assert_eq!(err.unwrap_err(), PhiGeoError::GridTooSmall(8));
    }

    #[test]
    fn thomas_solver_inverts_tridiagonal() {
        let ds = 0.5;
        let g: Vec<Vec<f64>> = (0..6).map(|i| vec![if i == 0 || i == 5 { 0.0 } else { (i as f64).sin() }]).collect();
        let x = sobolev_precondition(&g, ds);
        for i in 1..5 {
            let lhs = 2.0 / ds * (2.0 * x[i][0] - x[i - 1][0] - x[i + 1][0]);
            assert!((lhs - g[i][0]).abs() < 1e-13);
        }
    }
}
