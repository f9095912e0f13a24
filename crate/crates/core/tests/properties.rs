use bgwscale_core::model::fixtures::*;
use bgwscale_core::model::{root_phi_q, root_varphi_qbar, ImmigrationLaw, ModelSpec, OffspringLaw, ROOT_TOL};
use bgwscale_core::passage::{atmin_law, lt_first_passage, tilted_model};
use bgwscale_core::quad::QuadConfig;
use bgwscale_core::scale::Scale;
use bgwscale_core::sim::{estimate_lt_passage, sample_sibuya, SimConfig};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tabular_model() -> impl Strategy<Value = ModelSpec> {
    (0.05f64..0.9, 0.0f64..1.0, 0.0f64..1.0, 0.3f64..3.0).prop_map(|(p0, w2, w3, lambda)| {
        let rest = 1.0 - p0;
        let total = w2 + w3 + 1e-3;
        let pmf = vec![p0, 0.0, rest * (w2 + 1e-3) / total, rest * w3 / total];
        ModelSpec::new(OffspringLaw::tabular(pmf), lambda, ImmigrationLaw::None, 0.0).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, ..ProptestConfig::default() })]

    #[test]
    fn varphi_qbar_decreases(spec in tabular_model(), a in 0.0f64..3.0, b in 0.0f64..3.0) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(root_varphi_qbar(&spec, hi, ROOT_TOL) <= root_varphi_qbar(&spec, lo, ROOT_TOL) + 1e-15);
    }

    #[test]
    fn phi_q_root_decreases(a in 0.01f64..5.0, b in 0.01f64..5.0) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(root_phi_q(&m2(), hi, ROOT_TOL) <= root_phi_q(&m2(), lo, ROOT_TOL) + 1e-15);
    }

    #[test]
    fn phi_q_decreases_in_x(q in 0.05f64..5.0) {
        let cfg = QuadConfig::default();
        for spec in [m1(), m3()] {
            let s = Scale::phi_q(&spec, q, &cfg).unwrap();
            let values: Vec<f64> = (0..8).map(|x| s.value(x).unwrap()).collect();
            prop_assert!(values.windows(2).all(|w| w[1] < w[0]), "{values:?}");
        }
    }

    #[test]
    fn passage_transform_decreases_in_q(q in 0.05f64..4.0, dq in 0.05f64..2.0, x in 1u64..6) {
        let cfg = QuadConfig::default();
        let lo = lt_first_passage(&m1(), q, x, 0, &cfg).unwrap();
        let hi = lt_first_passage(&m1(), q + dq, x, 0, &cfg).unwrap();
        prop_assert!(hi < lo && lo <= 1.0);
    }

    #[test]
    fn tilted_branching_is_not_supercritical(spec in tabular_model(), qbar in 0.0f64..3.0) {
        if let Ok(t) = tilted_model(&spec, qbar, &QuadConfig::default()) {
            prop_assert!(t.offspring_mean() <= 1.0 + 1e-9);
            let sum: f64 = (0..4).map(|k| t.offspring().pmf(k)).sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn atmin_law_sums_to_one(q in 0.05f64..4.0, x in 1u64..=10) {
        let cfg = QuadConfig::default();
        for spec in [m1(), m3(), m4()] {
            let law = atmin_law(&spec, q, x, &cfg).unwrap();
            let sum: f64 = law.pmf.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-10);
            prop_assert!(law.pmf.iter().all(|&p| p >= -1e-12));
        }
    }

    #[test]
    fn sibuya_draws_are_positive(alpha in 0.05f64..0.95, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..64 {
            prop_assert!(sample_sibuya(alpha, &mut rng) >= 1);
        }
    }

    #[test]
    fn estimates_are_reproducible(seed in any::<u64>(), q in 0.0f64..2.0) {
        let cfg = SimConfig { seed, n_paths: 200, ..SimConfig::default() };
        let a = estimate_lt_passage(&m1(), q, 2, 0, &cfg).unwrap();
        let b = estimate_lt_passage(&m1(), q, 2, 0, &cfg).unwrap();
        prop_assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        prop_assert!(a.std_err >= 0.0 && (0.0..=1.0).contains(&a.censored_fraction));
    }
}
