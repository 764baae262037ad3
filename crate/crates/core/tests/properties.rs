use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use vanhove_core::experiments::{linear_fit, read_study_csv, study_csv, StudyConfig, StudyRow};
use vanhove_core::linalg::{
    devectorize, hs_norm, partial_trace_bath, partial_trace_system, random_density, random_matrix,
    trace, trace_distance, vectorize,
};
use vanhove_core::liouville::{build_projectors, verify_projector_algebra_seeded, BohrDecomposition};
use vanhove_core::model::{build_correlated_state, build_random_model, center_interaction, random_recipe};
use vanhove_core::nz::{interaction_picture_exact, vanhove_generator};

fn config() -> ProptestConfig {
    ProptestConfig { cases: 24, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn partial_traces_factor_products(seed in any::<u64>(), ds in 1usize..4, db in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_matrix(&mut rng, ds);
        let b = random_matrix(&mut rng, db);
        let ab = a.kronecker(&b);
        let want_s = &a * trace(&b);
        let want_b = &b * trace(&a);
        prop_assert!(hs_norm(&(partial_trace_bath(&ab, ds, db).unwrap() - want_s)) < 1e-12 * (1.0 + hs_norm(&ab)));
        prop_assert!(hs_norm(&(partial_trace_system(&ab, ds, db).unwrap() - want_b)) < 1e-12 * (1.0 + hs_norm(&ab)));
    }

    #[test]
    fn vectorization_roundtrips(seed in any::<u64>(), n in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_matrix(&mut rng, n);
        prop_assert_eq!(devectorize(&vectorize(&x)).unwrap(), x);
    }

    #[test]
    fn trace_distance_is_a_bounded_symmetric_metric(seed in any::<u64>(), n in 2usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (r, s, u) = (random_density(&mut rng, n), random_density(&mut rng, n), random_density(&mut rng, n));
        let d_rs = trace_distance(&r, &s).unwrap();
        prop_assert!((d_rs - trace_distance(&s, &r).unwrap()).abs() < 1e-12);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&d_rs));
        prop_assert!(trace_distance(&r, &r).unwrap() < 1e-12);
        prop_assert!(d_rs <= trace_distance(&r, &u).unwrap() + trace_distance(&u, &s).unwrap() + 1e-12);
    }

    #[test]
    fn projector_algebra_holds_on_random_models(seed in any::<u64>(), db in 2usize..4) {
        let spec = center_interaction(&build_random_model(2, db, 0.3, seed).unwrap()).unwrap();
        let pair = build_projectors(&spec).unwrap();
        let report = verify_projector_algebra_seeded(&pair, &spec, 4, seed);
        prop_assert!(report.max_residual <= 1e-9, "{:?}", report.residuals);
    }

    #[test]
    fn generator_preserves_trace_and_hermiticity(seed in any::<u64>(), eta in 0.02f64..0.5) {
        let spec = center_interaction(&build_random_model(2, 3, 0.2, seed).unwrap()).unwrap();
        let pair = build_projectors(&spec).unwrap();
        let bohr = BohrDecomposition::from_spec(&spec).unwrap();
        let gen = vanhove_generator(&pair, &spec, &bohr, eta).unwrap();
        prop_assert!(gen.trace_defect() < 1e-10);
        prop_assert!(gen.hermiticity_defect() < 1e-10);
    }

    #[test]
    fn exact_reduced_dynamics_stays_a_density(seed in any::<u64>(), tau in 0.0f64..0.5) {
        let lambda = 0.3;
        let spec = center_interaction(&build_random_model(2, 3, lambda, seed).unwrap()).unwrap();
        let pair = build_projectors(&spec).unwrap();
        let bohr = BohrDecomposition::from_spec(&spec).unwrap();
        let rho0 = build_correlated_state(&spec, &random_recipe(&spec, seed ^ 1)).unwrap().rho;
        let traj = interaction_picture_exact(&pair, &spec, &bohr, &rho0, &[0.0, tau], lambda).unwrap();
        for s in &traj.states {
            prop_assert!((trace(s).re - 1.0).abs() < 1e-10);
            prop_assert!(hs_norm(&(s - s.adjoint())) < 1e-10);
        }
    }

    #[test]
    fn study_csv_roundtrips_bit_exactly(values in prop::collection::vec((0.0f64..1.0, 0.0f64..4.0, any::<f64>(), 0.0f64..10.0, 0.0f64..10.0), 0..12)) {
        let rows: Vec<StudyRow> = values
            .into_iter()
            .map(|(lambda, tau, d, i, q)| StudyRow { lambda, tau, d_markov: if d.is_finite() { d } else { 0.0 }, i_norm: i, q_norm: q })
            .collect();
        let back = read_study_csv(&study_csv(&rows)).unwrap();
        prop_assert_eq!(back.len(), rows.len());
        for (a, b) in rows.iter().zip(&back) {
            prop_assert_eq!(a.d_markov.to_bits(), b.d_markov.to_bits());
            prop_assert_eq!(a.q_norm.to_bits(), b.q_norm.to_bits());
        }
    }

    #[test]
    fn linear_fit_recovers_exact_lines(slope in -5.0f64..5.0, intercept in -5.0f64..5.0, n in 4usize..30) {
        let x: Vec<f64> = (0..n).map(|k| k as f64 * 0.37).collect();
        let y: Vec<f64> = x.iter().map(|t| slope * t + intercept).collect();
        let fit = linear_fit(&x, &y).unwrap();
        prop_assert!((fit.slope - slope).abs() < 1e-10);
        prop_assert!((fit.intercept - intercept).abs() < 1e-10);
    }

    #[test]
    fn config_json_roundtrips_with_stable_hash(seed in any::<u64>(), eta in 0.001f64..1.0) {
        let mut cfg = StudyConfig::friedrichs_demo();
        cfg.seed = seed;
        cfg.eta = eta;
        let back = StudyConfig::from_json(&cfg.to_json().unwrap()).unwrap();
        prop_assert_eq!(back.hash().unwrap(), cfg.hash().unwrap());
    }
}
