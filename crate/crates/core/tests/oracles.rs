use shrinker_core::audit::deltaf_r_over_f_expansion;
use shrinker_core::numgeom::{ricci_fd, weighted_laplacian_fd};
use shrinker_core::phigeo::integrate_ivp;
use shrinker_core::*;

// Independent RK4 for the radial equation ρ″ = −c ρ / (4 f²), f = ρ²/4 + 1,
// which a φ-geodesic on the 2-cylinder follows when it starts with purely
// Euclidean velocity.
fn radial_oracle(c: f64, rho0: f64, v0: f64, s_bar: f64, h: f64) -> Vec<(f64, f64, f64)> {
    let acc = |r: f64| {
        let f = r * r / 4.0 + 1.0;
        -c * r / (4.0 * f * f)
    };
    let n = (s_bar / h).round() as usize;
    let (mut r, mut v) = (rho0, v0);
    let mut out = vec![(0.0, r, v)];
    for i in 1..=n {
        let (k1r, k1v) = (v, acc(r));
        let (k2r, k2v) = (v + 0.5 * h * k1v, acc(r + 0.5 * h * k1r));
        let (k3r, k3v) = (v + 0.5 * h * k2v, acc(r + 0.5 * h * k2r));
        let (k4r, k4v) = (v + h * k3v, acc(r + h * k3r));
        r += h / 6.0 * (k1r + 2.0 * k2r + 2.0 * k3r + k4r);
        v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        out.push((i as f64 * h, r, v));
    }
    out
}

#[test]
fn ivp_matches_radial_ode() {
    let m = ModelSpec::cylinder(2, 2).unwrap();
    for (c, rho0, v0) in [(0.5, 0.3, 0.4), (0.1, -2.0, 1.5), (0.9, 0.0, 0.2)] {
        let params = PhiParams::new(c).unwrap();
        let mut p0 = m.base_point();
        p0.0[3] = rho0;
        let v = TangentVec(vec![0.0, 0.0, 0.0, v0, 0.0]);
        let path = integrate_ivp(&m, params, &p0, &v, 10.0, 1e-2).unwrap();
        let oracle = radial_oracle(c, rho0, v0, 10.0, 1e-4);
        let mut worst = 0.0f64;
        for (k, (s, p)) in path.s_grid.iter().zip(&path.points).enumerate() {
            let (so, ro, vo) = oracle[k * 100];
            assert!((s - so).abs() < 1e-12);
            worst = worst.max((p.0[3] - ro).abs()).max((path.velocities[k].0[3] - vo).abs());
            assert_eq!(&p.0[..3], &m.base_point().0[..3]);
        }
        assert!(worst <= 1e-7, "c={c}: {worst:e}");
    }
}

#[test]
fn ricci_fd_error_is_second_order() {
    for m in [ModelSpec::round_sphere(3).unwrap(), ModelSpec::cylinder(2, 1).unwrap(), ModelSpec::sphere_product(2, 3).unwrap()] {
        let p = m.point_at_radius(0.7).unwrap();
        let chart = Chart::new(&m, p.clone()).unwrap();
        let basis = m.tangent_basis(&p);
        let geo = m.eval_geometry(&p).unwrap();
        let w = vec![0.0; m.dim()];
        let cols = chart.pushforward(&w);
        // Closed-form Ricci in chart components: Rc(∂ᵢ, ∂ⱼ).
        let exact = nalgebra::DMatrix::from_fn(m.dim(), m.dim(), |i, j| geo.ricci(&cols[i], &cols[j]));
        assert_eq!(basis.len(), m.dim());
        let h = FdConfig::new(2e-3).unwrap();
        let e1 = (ricci_fd(&chart, &w, &h).unwrap() - &exact).amax();
        let e2 = (ricci_fd(&chart, &w, &h.halved()).unwrap() - &exact).amax();
        let ratio = e1 / e2;
        assert!((2.0..=8.0).contains(&ratio), "{m}: {e1:e} {e2:e} {ratio}");
    }
}

#[test]
fn weighted_laplacian_is_chart_independent() {
    let m = ModelSpec::cylinder(3, 2).unwrap();
    let center = m.point_at_radius(2.0).unwrap();
    let chart_a = Chart::new(&m, center.clone()).unwrap();
    let p = chart_a.to_manifold(&[0.1, -0.2, 0.15, 0.05, 0.3]);
    let chart_b = Chart::new(&m, p.clone()).unwrap();
    let rf = |q: &ManifoldPoint| m.scalar_curvature() / m.potential(q);
    let f = |q: &ManifoldPoint| m.potential(q);
    let cfg = FdConfig::default();
    let wa = chart_a.coords_of(&p).unwrap();
    let la = weighted_laplacian_fd(&chart_a, &rf, &f, &wa, &cfg).unwrap();
    let lb = weighted_laplacian_fd(&chart_b, &rf, &f, &[0.0; 5], &cfg).unwrap();
    assert!((la - lb).abs() <= 1e-5, "{la} {lb}");
    let exact = deltaf_r_over_f_expansion(&m, &p).unwrap();
    assert!((la - exact).abs() <= 1e-5);
}

#[test]
fn sphere_conserved_quantity_is_one_minus_c() {
    for m in [ModelSpec::round_sphere(2).unwrap(), ModelSpec::round_sphere(4).unwrap(), ModelSpec::sphere_product(2, 2).unwrap()] {
        let y = m.point_at_radius(0.95 * m.diameter().unwrap()).unwrap();
        for c in [0.05, 0.1, 0.5] {
            let pair = phigeo::solve_minimal_candidate(&m, PhiParams::new(c).unwrap(), &m.base_point(), &y, &SolverConfig::default()).unwrap();
            assert!((pair.shooting.c_value - (1.0 - c)).abs() <= 1e-9, "{m} c={c}: {}", pair.shooting.c_value);
            assert!(pair.evidence.is_candidate());
        }
    }
}
