use also::ansatz::{layout, Ansatz, BrickTemplate};
use also::lightcone::{compute_lightcone, contract, LocalObservable};
use also::qsim::{gates, ComplexMatrix, PureState, C64};
use also::rng::rng_from_seed;
use also::shadow::{
    encode, plan_samples, reduce, sample_bound, sample_shadows, Basis, SampleBound, ShadowRecord, ShadowSet,
};
use proptest::prelude::*;

fn even_n() -> impl Strategy<Value = usize> {
    (1usize..=6).prop_map(|h| 2 * h)
}

fn random_records(n: usize, t: usize, seed: u64) -> Vec<ShadowRecord> {
    use rand::Rng;
    let mut rng = rng_from_seed(seed);
    (0..t)
        .map(|_| ShadowRecord {
            bases: (0..n).map(|_| Basis::ALL[rng.gen_range(0..3)]).collect(),
            outcomes: (0..n).map(|_| rng.gen()).collect(),
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_layer_partitions_the_register(n in even_n(), d in 1usize..6) {
        let placements = layout(n, d).unwrap();
        prop_assert_eq!(placements.len(), n / 2 * d);
        for j in 0..d {
            let mut seen = vec![false; n];
            for p in placements.iter().filter(|p| p.layer == j) {
                for q in [p.pair.0, p.pair.1] {
                    prop_assert!(!seen[q]);
                    seen[q] = true;
                }
            }
            prop_assert!(seen.iter().all(|&s| s));
        }
    }

    #[test]
    fn cones_are_small_and_norm_preserving(n in even_n(), d in 1usize..4, q in 0usize..12, seed in any::<u64>()) {
        let q = q % n;
        let a = Ansatz::new(n, d, BrickTemplate::default()).unwrap();
        let obs = LocalObservable::projector_zero(q, 1.0);
        let cone = compute_lightcone(obs.support(), &a).unwrap();
        prop_assert!(cone.len() <= (2 * d).min(n));
        let theta = a.random_params(&mut rng_from_seed(seed));
        let w = contract(&obs, &theta, &a, &cone).unwrap();
        prop_assert!((w.matrix.spectral_norm().unwrap() - 1.0).abs() < 1e-9);
        prop_assert!(w.matrix.is_hermitian(1e-12));
    }

    #[test]
    fn brick_unitary_has_period_four_pi(g in proptest::collection::vec(-7.0f64..7.0, 4), k in 0usize..4) {
        let t = BrickTemplate::default();
        let mut shifted = g.clone();
        shifted[k] += 4.0 * std::f64::consts::PI;
        let u = t.unitary(&g).unwrap();
        prop_assert!(u.max_abs_diff(&t.unitary(&shifted).unwrap()) < 1e-12);
        prop_assert!(u.is_unitary(1e-12));
    }

    #[test]
    fn gates_preserve_norm_and_invert(n in 2usize..7, seed in any::<u64>(), angle in -7.0f64..7.0) {
        let mut rng = rng_from_seed(seed);
        let psi = PureState::random(n, &mut rng).unwrap();
        let u = gates::rotation(gates::Axis::X, angle).kron(&gates::rotation(gates::Axis::Y, -angle)).matmul(&gates::cnot()).unwrap();
        let t = [n - 1, 0];
        let moved = psi.apply_gate(&u, &t).unwrap();
        prop_assert!((moved.norm_sqr() - 1.0).abs() < 1e-9);
        let back = moved.apply_gate(&u.adjoint(), &t).unwrap();
        prop_assert!(back.max_amp_diff(&psi) < 1e-10);
    }

    #[test]
    fn reduced_shadows_have_unit_trace(n in 2usize..6, t in 1usize..300, seed in any::<u64>(), mask in 1usize..32) {
        let set = ShadowSet::from_records(n, seed, &random_records(n, t, seed)).unwrap();
        let support: Vec<usize> = (0..n).filter(|q| mask >> q & 1 == 1).collect();
        prop_assume!(!support.is_empty());
        let r = reduce(&set, &support).unwrap();
        prop_assert!((r.matrix.trace() - C64::new(1.0, 0.0)).norm() < 1e-12);
        prop_assert!(r.matrix.is_hermitian(1e-12));
    }

    #[test]
    fn concatenation_is_the_weighted_mean(t1 in 1usize..200, t2 in 1usize..200, seed in any::<u64>()) {
        let n = 4;
        let a = ShadowSet::from_records(n, seed, &random_records(n, t1, seed)).unwrap();
        let b = ShadowSet::from_records(n, seed, &random_records(n, t2, seed ^ 1)).unwrap();
        let support = [2, 0];
        let whole = reduce(&a.concat(&b).unwrap(), &support).unwrap().matrix;
        let ra = reduce(&a, &support).unwrap().matrix;
        let rb = reduce(&b, &support).unwrap().matrix;
        let w = |x: usize| C64::new(x as f64 / (t1 + t2) as f64, 0.0);
        let mix: ComplexMatrix = ra.scale(w(t1)).add(&rb.scale(w(t2))).unwrap();
        prop_assert!(whole.max_abs_diff(&mix) < 1e-12);
    }

    #[test]
    fn plan_scales_with_squared_norm(d in 1u32..4, c in 1u32..50, norm in 0.01f64..2.0) {
        let base = sample_bound(1, c, d, 0.1, 0.05, 1.0, SampleBound::Theorem).unwrap();
        let scaled = sample_bound(1, c, d, 0.1, 0.05, norm, SampleBound::Theorem).unwrap();
        prop_assert!((scaled / base - norm * norm).abs() < 1e-12 * norm * norm);
        let plan = plan_samples(1, c, d, 0.1, 0.05, norm, SampleBound::Theorem).unwrap();
        prop_assert!(plan.samples as f64 >= plan.real && (plan.samples as f64) < plan.real + 1.0);
    }
}

#[test]
fn shadow_records_round_trip_codes() {
    for b in Basis::ALL {
        for o in [false, true] {
            assert_eq!(also::shadow::decode(encode(b, o)), (b, o));
        }
    }
}

#[test]
fn sampling_ignores_thread_count() {
    let mut rng = rng_from_seed(3);
    let psi = PureState::random(5, &mut rng).unwrap();
    let a = sample_shadows(&psi, 10_000, 77).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let b = pool.install(|| sample_shadows(&psi, 10_000, 77).unwrap());
    assert_eq!(a, b);
}
