use hscone::ambient::AmbientVector;
use hscone::catalog::{
    clifford_torus, great_sphere, great_sphere_rotated, iriyeh_torus, non_isotropic_fixture, planted_zero_fixture,
    s3_torus, HomogeneousTorus,
};
use hscone::config::{Config, DEFAULT_SEED};
use hscone::family::{classify_family_member, HomogeneousTorusParams};
use hscone::geometry::{induced_metric, mean_curvature, second_fundamental_form, sphere_mean_curvature, trace_second_fundamental_form};
use hscone::hodge::{beta_periods, d_alpha_residual, delta_alpha};
use hscone::hopf::{cauchy_riemann_residual, hopf_function, point_index, poincare_hopf_audit, LegendrianPoint, LegendrianScan};
use hscone::immersion::{Immersion, SphereChart};
use hscone::isotropy::{
    isotropy_deviation_f, isotropy_residual, legendrian_residual, stationarity_s1, stationarity_s1_fd,
};
use hscone::pipeline::run_analysis;
use hscone::search::{run_trials, RelaxedParams, SearchOptions, Target};
use hscone::Flag;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn catalog() -> Vec<Box<dyn Immersion>> {
    vec![
        Box::new(great_sphere(SphereChart::LatLong)),
        Box::new(great_sphere_rotated(SphereChart::LatLong)),
        Box::new(great_sphere(SphereChart::Mercator { y_max: 3.0 })),
        Box::new(clifford_torus()),
        Box::new(s3_torus()),
        Box::new(iriyeh_torus()),
    ]
}

fn unit_point() -> impl Strategy<Value = [f64; 2]> {
    [0.0f64..1.0, 0.0f64..1.0]
}

fn torus_params() -> impl Strategy<Value = HomogeneousTorusParams> {
    let w = || proptest::array::uniform3(-3i64..=3);
    ([0.02f64..1.0, 0.02f64..1.0, 0.02f64..1.0], w(), w())
        .prop_map(|(x, a, b)| {
            let s: f64 = x.iter().sum();
            let mut q = x.map(|v| v / s);
            q[2] = 1.0 - q[0] - q[1];
            HomogeneousTorusParams { q, a, b }
        })
        .prop_filter("valid torus", |p| p.validate().is_ok())
}

fn flags_consistent(flags: &std::collections::BTreeMap<&str, hscone::GatedFlag>) -> bool {
    flags.values().all(|f| Flag::from_residual(f.residual, f.tol) == f.value)
}

#[test]
fn catalog_maps_into_the_unit_sphere() {
    let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
    for imm in catalog() {
        for _ in 0..10_000 {
            let x: [f64; 2] = [rng.gen(), rng.gen()];
            let t = imm.domain().sample_at(&x, 0.01);
            let jet = imm.jet(&t, 1).unwrap();
            assert!((jet.u.norm() - 1.0).abs() <= 1e-12, "{} at {t:?}", imm.name());
            for i in 0..2 {
                assert!(jet.d1(i).dot(&jet.u).abs() <= 1e-12, "{} at {t:?}", imm.name());
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn metric_matches_difference_quotients(x in unit_point()) {
        let h = 1e-6;
        for imm in catalog() {
            let t = imm.domain().sample_at(&x, 0.02);
            let g = induced_metric(&imm.jet(&t, 1).unwrap()).unwrap();
            let fd: Vec<AmbientVector> = (0..2)
                .map(|i| {
                    let (mut p, mut m) = (t.clone(), t.clone());
                    p[i] += h;
                    m[i] -= h;
                    (&imm.raw_jet(&p, 0).u - &imm.raw_jet(&m, 0).u).scaled(0.5 / h)
                })
                .collect();
            for i in 0..2 {
                for j in 0..2 {
                    let approx = fd[i].dot(&fd[j]);
                    prop_assert!((g.g(i, j) - approx).abs() <= 1e-6 * g.g(i, j).abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn sphere_mean_curvature_is_tangent_to_the_sphere(x in unit_point(), p in torus_params()) {
        let torus = HomogeneousTorus::from_params(&p).unwrap();
        let mut imms = catalog();
        imms.push(Box::new(torus));
        imms.push(Box::new(non_isotropic_fixture()));
        for imm in &imms {
            let t = imm.domain().sample_at(&x, 0.02);
            let jet = imm.jet(&t, 2).unwrap();
            let hbar = sphere_mean_curvature(&jet).unwrap();
            let scale = hbar.norm().max(1.0);
            prop_assert!(hbar.dot(&jet.u).abs() <= 1e-10 * scale);
            let a = second_fundamental_form(&jet).unwrap();
            prop_assert!((&trace_second_fundamental_form(&jet, &a).unwrap() - &hbar).max_abs() <= 1e-10 * scale);
            let h = mean_curvature(&jet).unwrap();
            prop_assert!(h.j_dot(&h).abs() <= 1e-12 * h.norm_squared().max(1.0));
        }
    }

    #[test]
    fn deviation_zero_set_matches_legendrian_norm(x in unit_point(), p in torus_params()) {
        let torus = HomogeneousTorus::from_params(&p).unwrap();
        let t = torus.domain().sample_at(&x, 0.0);
        let jet = torus.jet(&t, 1).unwrap();
        let f = isotropy_deviation_f(&jet).unwrap();
        let l = legendrian_residual(&jet).unwrap();
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&f));
        prop_assert!((f.sqrt() - l.norm).abs() <= 1e-12);
        let w = hopf_function(&jet);
        prop_assert_eq!((w.re, w.im), (0.5 * l.alpha[0], -0.5 * l.alpha[1]));
    }

    #[test]
    fn exact_and_difference_s1_agree(x in unit_point()) {
        for imm in catalog() {
            let t = imm.domain().sample_at(&x, 0.02);
            let exact = stationarity_s1(imm.as_ref(), &t).unwrap();
            let fd = stationarity_s1_fd(imm.as_ref(), &t, 1e-4).unwrap();
            prop_assert!((exact - fd).abs() <= 1e-6, "{}: {exact} vs {fd}", imm.name());
        }
    }

    #[test]
    fn holomorphy_in_isothermal_charts(x in unit_point(), p in torus_params()) {
        let torus = HomogeneousTorus::from_params(&p).unwrap().isothermal().unwrap();
        let t = torus.domain().sample_at(&x, 0.0);
        let cr = cauchy_riemann_residual(&torus, &t, 1e-10).unwrap();
        prop_assert!(cr.warnings.is_empty(), "{:?}", cr.warnings);
        prop_assert!(cr.residual <= 1e-8);
    }

    #[test]
    fn index_is_stable_under_halving_rho(cx in -0.5f64..0.5, cy in -0.5f64..0.5, rho in 0.05f64..0.3) {
        let fx = planted_zero_fixture([cx, cy]);
        let k = point_index(&fx, [cx, cy], rho, 64).unwrap();
        prop_assert_eq!(k, 1);
        prop_assert_eq!(point_index(&fx, [cx, cy], rho / 2.0, 64).unwrap(), k);
    }

    #[test]
    fn audit_is_integer_arithmetic(ks in proptest::collection::vec(1i32..4, 0..8), genus in 0u32..5) {
        let points: Vec<LegendrianPoint> = ks
            .iter()
            .enumerate()
            .map(|(i, &k)| LegendrianPoint { t: vec![i as f64, 0.0], multiplicity: k, index_prju: -k, residual_at_zero: 0.0, refined: true })
            .collect();
        let audit = poincare_hopf_audit(&LegendrianScan::Points(points), genus);
        let sum: i64 = ks.iter().map(|&k| k as i64).sum();
        let expected = 2 * genus as i64 - 2;
        prop_assert_eq!(audit.sum_multiplicity, sum);
        prop_assert_eq!(audit.sum_index, -sum);
        prop_assert_eq!(audit.pass, sum == expected && (genus > 0 || ks.is_empty()));
    }

    #[test]
    fn closedness_is_twice_isotropy(x in unit_point(), p in torus_params()) {
        let torus = HomogeneousTorus::from_params(&p).unwrap();
        let fx = non_isotropic_fixture();
        for imm in [&torus as &dyn Immersion, &fx] {
            let t = imm.domain().sample_at(&x, 0.02);
            let lhs = d_alpha_residual(imm, &t).unwrap();
            let rhs = 2.0 * isotropy_residual(&imm.jet(&t, 1).unwrap());
            prop_assert!((lhs - rhs).abs() <= 1e-12);
        }
    }

    #[test]
    fn codifferential_routes_agree(x in unit_point(), p in torus_params()) {
        let torus = HomogeneousTorus::from_params(&p).unwrap();
        let mut imms = catalog();
        imms.push(Box::new(torus));
        imms.push(Box::new(non_isotropic_fixture()));
        for imm in &imms {
            let t = imm.domain().sample_at(&x, 0.02);
            prop_assert!(delta_alpha(imm.as_ref(), &t).unwrap().difference <= 1e-10, "{}", imm.name());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn periods_are_stable_under_refinement(p in torus_params()) {
        let torus = HomogeneousTorus::from_params(&p).unwrap();
        let coarse = beta_periods(&torus, 512).unwrap();
        let fine = beta_periods(&torus, 1024).unwrap();
        for (c, f) in coarse.iter().zip(&fine) {
            prop_assert!((c - f).abs() <= 1e-8 * c.abs().max(1.0));
        }
    }

    #[test]
    fn classification_is_invariant_under_coordinate_permutation(p in torus_params(), perm in Just([0usize, 1, 2]).prop_shuffle()) {
        let perm = [perm[0], perm[1], perm[2]];
        let c = classify_family_member(&p).unwrap();
        let d = classify_family_member(&p.permuted(perm)).unwrap();
        prop_assert_eq!((c.legendrian, c.minimal), (d.legendrian, d.minimal));
        prop_assert!((c.f_value - d.f_value).abs() <= 1e-12);
        prop_assert!((c.hbar_norm2 - d.hbar_norm2).abs() <= 1e-10 * c.hbar_norm2.max(1.0));
    }

    #[test]
    fn classification_is_invariant_under_basis_change(p in torus_params()) {
        let q = HomogeneousTorusParams { a: [0, 1, 2].map(|k| p.a[k] + p.b[k]), ..p };
        let c = classify_family_member(&p).unwrap();
        let d = classify_family_member(&q).unwrap();
        prop_assert_eq!((c.legendrian, c.minimal), (d.legendrian, d.minimal));
        prop_assert!((c.f_value - d.f_value).abs() <= 1e-12);
        for k in 0..3 {
            prop_assert!((c.lambda[k] - d.lambda[k]).abs() <= 1e-10 * c.lambda[k].abs().max(1.0));
        }
    }
}

#[test]
fn classification_agrees_with_grid_gates() {
    let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
    let mut checked = 0;
    while checked < 100 {
        let q = hscone::search::random_simplex_point(&mut rng);
        let a = [0; 3].map(|_: i64| rng.gen_range(-3..=3));
        let b = [0; 3].map(|_: i64| rng.gen_range(-3..=3));
        let p = HomogeneousTorusParams { q, a, b };
        if p.validate().is_err() {
            continue;
        }
        let c = classify_family_member(&p).unwrap();
        assert!(c.cross_check.consistent, "{p:?}: {:?}", c.cross_check);
        assert_eq!(c.legendrian, c.f_value.sqrt() <= 1e-8, "{p:?}");
        assert_eq!(c.minimal, c.hbar_norm2.sqrt() <= 1e-8, "{p:?}");
        checked += 1;
    }
}

#[test]
fn legendrian_search_succeeds_from_random_starts() {
    let weights: RelaxedParams = (&HomogeneousTorusParams::iriyeh()).into();
    let results = run_trials(&weights, &[Target::Legendrian], 100, DEFAULT_SEED, &SearchOptions::default()).unwrap();
    let good = results.iter().filter(|r| r.converged && r.residual < 1e-8 && r.iterations <= 1000).count();
    assert!(good >= 90, "{good}/100");
}

#[test]
fn report_flags_follow_from_recorded_residuals() {
    for name in ["clifford_torus", "s3_torus", "great_sphere"] {
        let dir = tempfile::tempdir().unwrap();
        let text = format!("[immersion]\nname = \"{name}\"\n[grid]\nresolution = 16\n[search]\ntrials = 4\n");
        let r = run_analysis(&Config::from_toml_str(&text).unwrap(), dir.path()).unwrap();
        assert!(!r.flags.is_empty());
        assert!(flags_consistent(&r.flags), "{name}: {:?}", r.flags);
        for (name, tol) in &r.tolerances {
            assert!(*tol > 0.0, "{name}");
        }
    }
}
