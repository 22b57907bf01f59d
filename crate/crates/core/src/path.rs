//! Discretized paths and their CSV/JSON dumps.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::models::{ManifoldPoint, ModelSpec, TangentVec};
use crate::phigeo::{phi_value, PhiParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathSource {
    Background,
    Ivp,
    Shooting,
    Discrete,
}

/// Why a path is believed to be a minimizer of the action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimalityEvidence {
    pub shooting_j: f64,
    pub discrete_j: f64,
    pub background_j: f64,
    pub shooting_c: f64,
    pub discrete_c: f64,
    pub solvers_agree: bool,
    pub below_background: bool,
}

impl MinimalityEvidence {
    pub fn is_candidate(&self) -> bool {
        self.solvers_agree && self.below_background
    }
}

/// A sampled φ-geodesic (or background geodesic) on `[0, s̄]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiPath {
    pub source: PathSource,
    pub s_grid: Vec<f64>,
    pub points: Vec<ManifoldPoint>,
    pub velocities: Vec<TangentVec>,
    /// Conserved quantity `|S|² − 2φ`.
    pub c_value: f64,
    /// Max deviation of `|S|² − 2φ` from `c_value` over the nodes.
    pub drift: f64,
    pub action_j: f64,
    pub non_unique: bool,
    pub stalled: bool,
    pub iterations: usize,
    /// Shooting: final endpoint miss. Discrete: final gradient norm.
    pub solver_residual: f64,
    pub minimality: Option<MinimalityEvidence>,
}

impl PhiPath {
    pub fn new(
        source: PathSource,
        s_grid: Vec<f64>,
        points: Vec<ManifoldPoint>,
        velocities: Vec<TangentVec>,
    ) -> Self {
        debug_assert_eq!(s_grid.len(), points.len());
        debug_assert_eq!(s_grid.len(), velocities.len());
        PhiPath {
            source,
            s_grid,
            points,
            velocities,
            c_value: f64::NAN,
            drift: f64::NAN,
            action_j: f64::NAN,
            non_unique: false,
            stalled: false,
            iterations: 0,
            solver_residual: 0.0,
            minimality: None,
        }
    }

    pub fn len(&self) -> usize {
        self.s_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s_grid.is_empty()
    }

    pub fn s_bar(&self) -> f64 {
        *self.s_grid.last().unwrap_or(&0.0)
    }

    pub fn start(&self) -> &ManifoldPoint {
        &self.points[0]
    }

    pub fn end(&self) -> &ManifoldPoint {
        self.points.last().expect("non-empty path")
    }

    pub fn is_minimal_candidate(&self) -> bool {
        self.minimality.as_ref().is_some_and(MinimalityEvidence::is_candidate)
    }

    pub fn max_speed(&self) -> f64 {
        self.velocities.iter().map(TangentVec::norm).fold(0.0, f64::max)
    }

    /// Writes one row per node: `s`, point coordinates, velocity coordinates,
    /// `|S|²`, `φ`, `r(γ(s))`.
    pub fn write_csv<W: Write>(&self, model: &ModelSpec, params: PhiParams, out: W) -> csv::Result<()> {
        let amb = model.ambient_dim();
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["s".to_string()];
        header.extend((0..amb).map(|i| format!("p{i}")));
        header.extend((0..amb).map(|i| format!("v{i}")));
        header.extend(["speed_sq", "phi", "radial"].map(String::from));
        w.write_record(&header)?;
        let o = model.base_point();
        for ((s, p), v) in self.s_grid.iter().zip(&self.points).zip(&self.velocities) {
            let mut row = Vec::with_capacity(2 * amb + 4);
            row.push(s.to_string());
            row.extend(p.0.iter().map(f64::to_string));
            row.extend(v.0.iter().map(f64::to_string));
            row.push(v.dot(v).to_string());
            row.push(phi_value(model, params, p).to_string());
            row.push(model.distance_unchecked(p, &o).to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_header_and_one_row_per_node() {
        let m = ModelSpec::cylinder(2, 2).unwrap();
        let y = m.point_at_radius(5.0).unwrap();
        let path = m.background_geodesic(&m.base_point(), &y, 8).unwrap();
        let mut buf = Vec::new();
        path.write_csv(&m, PhiParams::new(0.1).unwrap(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 10);
        assert_eq!(lines[0], "s,p0,p1,p2,p3,p4,v0,v1,v2,v3,v4,speed_sq,phi,radial");
        let last: Vec<f64> = lines[9].split(',').map(|x| x.parse().unwrap()).collect();
        assert!((last[13] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip() {
        let m = ModelSpec::round_sphere(2).unwrap();
        let y = m.point_at_radius(2.0).unwrap();
        let path = m.background_geodesic(&m.base_point(), &y, 4).unwrap();
        let text = serde_json::to_string(&path).unwrap();
        let back: PhiPath = serde_json::from_str(&text).unwrap();
        assert_eq!(back, path);
    }
}
