use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use shrinker_core::sampling::{random_point, random_tangent};
use shrinker_core::*;

fn catalog() -> Vec<ModelSpec> {
    vec![
        ModelSpec::gaussian(3).unwrap(),
        ModelSpec::round_sphere(3).unwrap(),
        ModelSpec::cylinder(2, 2).unwrap(),
        ModelSpec::cylinder(3, 1).unwrap(),
        ModelSpec::sphere_product(2, 3).unwrap(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distance_is_a_metric(seed in any::<u64>(), k in 0usize..5) {
        let m = &catalog()[k];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (p, q, r) = (random_point(m, &mut rng, 5.0), random_point(m, &mut rng, 5.0), random_point(m, &mut rng, 5.0));
        let d = |a, b| m.distance(a, b).unwrap();
        prop_assert!(d(&p, &p).abs() < 1e-7);
        prop_assert!((d(&p, &q) - d(&q, &p)).abs() < 1e-12);
        prop_assert!(d(&p, &r) <= d(&p, &q) + d(&q, &r) + 1e-10);
    }

    #[test]
    fn shrinker_equation_on_random_pairs(seed in any::<u64>(), k in 0usize..5) {
        let m = &catalog()[k];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_point(m, &mut rng, 8.0);
        let g = m.eval_geometry(&p).unwrap();
        for _ in 0..5 {
            let v = random_tangent(m, &mut rng, &p);
            let w = random_tangent(m, &mut rng, &p);
            let res = g.ricci(&v, &w) + g.hess_f(&v, &w) - 0.5 * g.metric(&v, &w);
            prop_assert!(res.abs() <= 1e-10 * (1.0 + v.norm() * w.norm()));
        }
        prop_assert!((g.f - g.grad_f_norm_sq() - g.scalar_r).abs() <= 1e-10 * (1.0 + g.f));
    }

    #[test]
    fn tangent_projection_is_idempotent(seed in any::<u64>(), k in 0usize..5) {
        let m = &catalog()[k];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_point(m, &mut rng, 5.0);
        let v = random_tangent(m, &mut rng, &p);
        prop_assert!(m.is_tangent(&p, &v));
        let mut w = v.clone();
        m.project_tangent(&p, &mut w);
        prop_assert!(v.add(&w.scaled(-1.0)).norm() < 1e-14);
    }

    #[test]
    fn exp_inverts_log(seed in any::<u64>(), k in 0usize..5) {
        let m = &catalog()[k];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_point(m, &mut rng, 5.0);
        let q = random_point(m, &mut rng, 5.0);
        let (v, non_unique) = m.log_map(&p, &q);
        prop_assume!(!non_unique);
        prop_assert!((v.norm() - m.distance(&p, &q).unwrap()).abs() < 1e-9);
        let back = m.exp_map(&p, &v);
        prop_assert!(m.distance(&back, &q).unwrap() < 1e-6);
    }
}
