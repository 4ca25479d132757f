use layerstitch::rng::seeded;
use layerstitch::space::{cardinality, decode, encode, enumerate, repair, sample, validate, Config, Mode, SpaceSpec};
use num_bigint::BigUint;
use proptest::prelude::*;

fn mode_strategy() -> impl Strategy<Value = Mode> {
    prop_oneof![
        Just(Mode::Full),
        Just(Mode::RemoveOnly),
        Just(Mode::SelectRemove),
        Just(Mode::Fold)
    ]
}

/// Small enumerable specs with trimmed grids.
fn small_spec() -> impl Strategy<Value = SpaceSpec> {
    (1usize..=4, 0usize..=4, 1usize..=2, mode_strategy(), 1usize..=2, 1usize..=2).prop_map(
        |(l, removed, k, mode, mf, sc)| {
            let removed = removed.min(l);
            let spec = SpaceSpec::new(l, k, removed as f64 / l as f64, mode).unwrap();
            spec.with_grids(vec![0.5, 1.0][..mf].to_vec(), vec![0.5, 1.0][2 - sc..].to_vec())
                .unwrap()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn cardinality_counts_the_enumeration(spec in small_spec()) {
        let n = enumerate(&spec, 200_000).unwrap().count();
        prop_assert_eq!(cardinality(&spec), BigUint::from(n));
    }

    #[test]
    fn enumerated_configs_are_valid_and_distinct(spec in small_spec()) {
        let mut seen = std::collections::HashSet::new();
        for c in enumerate(&spec, 200_000).unwrap() {
            prop_assert!(validate(&c, &spec).is_empty());
            let key: Vec<u64> = encode(&c, &spec).unwrap().iter().map(|v| v.to_bits()).collect();
            prop_assert!(seen.insert(key));
        }
    }

    #[test]
    fn samples_are_valid_and_round_trip(l in 2usize..=10, k in 1usize..=4, s in 0.0f64..0.9, mode in mode_strategy(), seed in any::<u64>()) {
        let spec = SpaceSpec::new(l, k, s, mode).unwrap();
        let mut rng = seeded(seed);
        for _ in 0..8 {
            let c = sample(&spec, &mut rng).unwrap();
            prop_assert!(validate(&c, &spec).is_empty());
            prop_assert_eq!(c.removed_count(), spec.remove_count);
            let x = encode(&c, &spec).unwrap();
            prop_assert_eq!(decode(&x, &spec).unwrap(), c);
        }
    }

    #[test]
    fn repair_yields_valid_configs(l in 2usize..=8, k in 1usize..=3, s in 0.0f64..0.9, seed in any::<u64>(), flips in proptest::collection::vec(0usize..8, 0..4)) {
        let spec = SpaceSpec::new(l, k, s, Mode::Full).unwrap();
        let mut rng = seeded(seed);
        let mut c = sample(&spec, &mut rng).unwrap();
        if let Config::Prune(p) = &mut c {
            for f in flips {
                let i = f % l;
                p.r[i] = !p.r[i];
                p.output_scale[i] = 0.77;
            }
        }
        let fixed = repair(&c, &spec, &mut rng);
        prop_assert!(validate(&fixed, &spec).is_empty(), "{:?}", validate(&fixed, &spec));
    }
}

#[test]
fn remove_only_full_space_matches_binomial() {
    let spec = SpaceSpec::new(8, 3, 0.25, Mode::RemoveOnly).unwrap();
    assert_eq!(cardinality(&spec), BigUint::from(28u32));
    assert_eq!(enumerate(&spec, 100).unwrap().count(), 28);
}
