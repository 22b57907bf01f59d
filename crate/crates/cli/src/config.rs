use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize};
use shrinker_core::audit::{AuditSettings, IdentityTolerance};
use shrinker_core::phigeo::{DiscreteConfig, ShootingConfig, DRIFT_LIMIT};
use shrinker_core::{FdConfig, ManifoldPoint, ModelSpec, PhiParams, SolverConfig};

use crate::CliError;

/// Everything a run depends on. Loaded from `--config`, then overridden by
/// command-line flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: String,
    #[serde(deserialize_with = "one_or_many")]
    pub c: Vec<f64>,
    /// Radial distances `r(y)` of the target points.
    #[serde(deserialize_with = "one_or_many")]
    pub ry: Vec<f64>,
    /// Radial distance of the start point (`0` means `x = O`).
    pub x_ry: f64,
    pub seed: u64,
    pub samples: usize,
    /// Euclidean coordinates of random samples are drawn from this ball.
    pub euclid_radius: f64,
    /// Not echoed into reports, so runs into different directories compare equal.
    #[serde(skip_serializing)]
    pub out: PathBuf,
    pub nodes: usize,
    pub step: f64,
    pub drift_limit: f64,
    pub shooting_tol: f64,
    pub max_newton_iters: usize,
    pub discrete_max_iters: usize,
    pub discrete_grad_tol: f64,
    pub audit_tolerance: f64,
    pub closed_form_tolerance: f64,
    pub fd_tolerance: f64,
    pub fd_h: f64,
    /// Audit grid intervals per unit arclength.
    pub audit_per_unit: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: "cylinder:k=2,m=2".into(),
            c: vec![0.1],
            ry: vec![5.0, 10.0, 20.0, 40.0],
            x_ry: 0.0,
            seed: 0,
            samples: 100,
            euclid_radius: 5.0,
            out: PathBuf::from("shrinker-out"),
            nodes: 256,
            step: 1e-2,
            drift_limit: DRIFT_LIMIT,
            shooting_tol: 1e-10,
            max_newton_iters: 100,
            discrete_max_iters: 10_000,
            discrete_grad_tol: 1e-6,
            audit_tolerance: 1e-6,
            closed_form_tolerance: 1e-10,
            fd_tolerance: 1e-4,
            fd_h: 1e-3,
            audit_per_unit: 16,
        }
    }
}

fn one_or_many<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Scalars {
        One(f64),
        Many(Vec<f64>),
    }
    Ok(match Scalars::deserialize(d)? {
        Scalars::One(x) => vec![x],
        Scalars::Many(v) => v,
    })
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            if path == "." {
                CliError::Config(format!("config: {}", e.inner()))
            } else {
                CliError::Config(format!("config field `{path}`: {}", e.inner()))
            }
        })
    }
}

fn bad(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("config field `{field}`: {msg}"))
}

fn positive(field: &str, x: f64) -> Result<f64, CliError> {
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(bad(field, format_args!("must be finite and > 0 (got {x})")))
    }
}

/// A validated configuration.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub raw: RunConfig,
    pub model: ModelSpec,
    pub params: Vec<PhiParams>,
    pub settings: AuditSettings,
    pub identity_tol: IdentityTolerance,
}

impl Resolved {
    pub fn new(raw: RunConfig) -> Result<Self, CliError> {
        let model = ModelSpec::from_str(&raw.model).map_err(|e| bad("model", e))?;
        if raw.c.is_empty() {
            return Err(bad("c", "at least one value required"));
        }
        let params = raw
            .c
            .iter()
            .map(|&c| PhiParams::new(c).map_err(|e| bad("c", e)))
            .collect::<Result<Vec<_>, _>>()?;
        if raw.ry.is_empty() {
            return Err(bad("ry", "at least one value required"));
        }
        for &r in &raw.ry {
            if !(r.is_finite() && r >= 0.0) {
                return Err(bad("ry", format_args!("must be finite and ≥ 0 (got {r})")));
            }
        }
        if !(raw.x_ry.is_finite() && raw.x_ry >= 0.0) {
            return Err(bad("x_ry", format_args!("must be finite and ≥ 0 (got {})", raw.x_ry)));
        }
        if raw.samples == 0 {
            return Err(bad("samples", "must be ≥ 1"));
        }
        positive("euclid_radius", raw.euclid_radius)?;
        if raw.nodes < 16 {
            return Err(bad("nodes", format_args!("must be ≥ 16 (got {})", raw.nodes)));
        }
        let step = positive("step", raw.step)?;
        if step > shrinker_core::phigeo::MAX_IVP_STEP {
            return Err(bad("step", format_args!("must be ≤ {} (got {step})", shrinker_core::phigeo::MAX_IVP_STEP)));
        }
        positive("drift_limit", raw.drift_limit)?;
        positive("shooting_tol", raw.shooting_tol)?;
        positive("discrete_grad_tol", raw.discrete_grad_tol)?;
        if raw.max_newton_iters == 0 {
            return Err(bad("max_newton_iters", "must be ≥ 1"));
        }
        if raw.discrete_max_iters == 0 {
            return Err(bad("discrete_max_iters", "must be ≥ 1"));
        }
        positive("audit_tolerance", raw.audit_tolerance)?;
        positive("closed_form_tolerance", raw.closed_form_tolerance)?;
        positive("fd_tolerance", raw.fd_tolerance)?;
        let fd = FdConfig::new(raw.fd_h).map_err(|e| bad("fd_h", e))?;
        if raw.audit_per_unit < 2 {
            return Err(bad("audit_per_unit", "must be ≥ 2"));
        }
        let solver = SolverConfig {
            shooting: ShootingConfig {
                nodes: raw.nodes,
                max_step: step,
                tol: raw.shooting_tol,
                max_iters: raw.max_newton_iters,
                drift_limit: raw.drift_limit,
            },
            discrete: DiscreteConfig { nodes: raw.nodes, max_iters: raw.discrete_max_iters, grad_tol: raw.discrete_grad_tol },
        };
        let settings = AuditSettings { tolerance: raw.audit_tolerance, fd, per_unit: raw.audit_per_unit, solver };
        let identity_tol = IdentityTolerance { closed_form: raw.closed_form_tolerance, fd: raw.fd_tolerance };
        Ok(Resolved { raw, model, params, settings, identity_tol })
    }

    /// Audits are stated for `0 < c < 1`.
    pub fn require_audit_range(&self) -> Result<(), CliError> {
        for p in &self.params {
            p.require_audit_range().map_err(|e| bad("c", e))?;
        }
        Ok(())
    }

    /// Start point; refuses targets at the same radius along the canonical ray.
    pub fn start_point(&self) -> Result<ManifoldPoint, CliError> {
        for &r in &self.raw.ry {
            if r == self.raw.x_ry {
                return Err(bad("ry", format_args!("degenerate endpoints: r(y) = r(x) = {r} gives x = y")));
            }
        }
        self.model.point_at_radius(self.raw.x_ry).map_err(|e| bad("x_ry", e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        assert!(Resolved::new(RunConfig::default()).is_ok());
    }

    #[test]
    fn scalar_or_list() {
        let cfg = RunConfig::from_json(r#"{"c": 0.5, "ry": [5, 10]}"#).unwrap();
        assert_eq!(cfg.c, vec![0.5]);
        assert_eq!(cfg.ry, vec![5.0, 10.0]);
    }

    #[test]
    fn errors_name_the_field() {
        let msg = |json: &str| match RunConfig::from_json(json).and_then(Resolved::new) {
            Err(CliError::Config(m)) => m,
            other => panic!("{other:?}"),
        };
        assert!(msg(r#"{"bogus": 1}"#).contains("bogus"));
        assert!(msg(r#"{"c": "x"}"#).contains("`c`"));
        assert!(msg(r#"{"nodes": -3}"#).contains("`nodes`"));
        let m = msg(r#"{"model": "cylinder:k=1,m=2"}"#);
        assert!(m.contains("`model`") && m.contains("sphere factor dimension must be ≥ 2"), "{m}");
        assert!(msg(r#"{"fd_h": 0.5}"#).contains("`fd_h`"));
    }

    #[test]
    fn equal_radii_are_degenerate() {
        let cfg = Resolved::new(RunConfig { ry: vec![0.0], ..RunConfig::default() }).unwrap();
        match cfg.start_point() {
            Err(CliError::Config(m)) => assert!(m.contains("degenerate endpoints")),
            other => panic!("{other:?}"),
        }
    }
}
