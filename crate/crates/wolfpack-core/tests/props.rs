//! Property tests for the optimizer, sampling, ranking, and split
//! invariants.

use proptest::prelude::*;
use wolfpack_core::agent::{
    sample_decoding, weighted_elite_update, FieldPolicy, Interval, MaxTokensPolicy, SamplingPolicy,
    CONTINUOUS_FIELDS,
};
use wolfpack_core::data::{make_split, QAItem, SplitSpec};
use wolfpack_core::fitness::{rank_population, FitnessReport};
use wolfpack_core::gwo::{gwo_minimize, GwoOptions, GwoSchedule, SearchSpace};
use wolfpack_core::{benchfns, rng, TaskKind};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// Every position in a run stays inside the box and the trace is a
    /// nonincreasing record attained by the returned best.
    #[test]
    fn gwo_feasibility_and_monotone_record(
        seed in 0u64..1000,
        dim in 1usize..5,
        pop in 3usize..10,
        elitism in any::<bool>(),
    ) {
        let space = SearchSpace::cube(dim, -3.0, 3.0).unwrap();
        let outcome = gwo_minimize(
            benchfns::sphere,
            &space,
            pop,
            GwoSchedule::new(15).unwrap(),
            seed,
            &GwoOptions { elitism },
        )
        .unwrap();
        prop_assert!(space.contains(&outcome.best));
        prop_assert!(outcome.trace.windows(2).all(|w| w[1] <= w[0]));
        prop_assert_eq!(outcome.value, *outcome.trace.last().unwrap());
    }

    /// Identical (seed, config, objective) gives identical traces.
    #[test]
    fn gwo_seed_determinism(seed in 0u64..500) {
        let space = SearchSpace::cube(3, -2.0, 2.0).unwrap();
        let run = || gwo_minimize(
            benchfns::rastrigin,
            &space,
            6,
            GwoSchedule::new(10).unwrap(),
            seed,
            &GwoOptions::default(),
        ).unwrap();
        prop_assert_eq!(run().trace, run().trace);
    }

    /// Leader ordering inside the optimizer agrees with an independent
    /// brute-force stable sort (ascending, minimization).
    #[test]
    fn leader_order_matches_stable_sort_oracle(
        fitness in prop::collection::vec(-10.0f64..10.0, 3..40),
        tie_mask in prop::collection::vec(any::<bool>(), 3..40),
    ) {
        let mut fitness = fitness;
        for i in 1..fitness.len() {
            if tie_mask.get(i) == Some(&true) {
                fitness[i] = fitness[i / 2];
            }
        }
        let order = wolfpack_core::gwo::rank_by_fitness(&fitness);
        let mut oracle: Vec<usize> = Vec::new();
        for i in 0..fitness.len() {
            let pos = oracle
                .iter()
                .position(|&j| fitness[j] > fitness[i])
                .unwrap_or(oracle.len());
            oracle.insert(pos, i);
        }
        prop_assert_eq!(&order[..], &oracle[..]);
    }

    /// Ranking agrees with an independent brute-force stable sort.
    #[test]
    fn ranking_matches_stable_sort_oracle(
        composites in prop::collection::vec(0.0f64..1.0, 3..50),
        duplicate_mask in prop::collection::vec(any::<bool>(), 3..50),
    ) {
        // Force tie groups by copying an earlier value where masked.
        let mut composites = composites;
        for i in 1..composites.len() {
            if duplicate_mask.get(i) == Some(&true) {
                composites[i] = composites[i / 2];
            }
        }
        let reports: Vec<FitnessReport> = composites
            .iter()
            .map(|&c| FitnessReport::from_composite(c, 1))
            .collect();
        let ranking = rank_population(&reports).unwrap();

        // Oracle: insertion sort, descending, stable in the original index.
        let mut oracle: Vec<usize> = Vec::new();
        for i in 0..composites.len() {
            let pos = oracle
                .iter()
                .position(|&j| composites[j] < composites[i])
                .unwrap_or(oracle.len());
            oracle.insert(pos, i);
        }
        prop_assert_eq!(ranking.order(), &oracle[..]);
    }

    /// Sampled and updated configs satisfy every clip and set invariant
    /// under randomized policies.
    #[test]
    fn sampled_and_updated_configs_respect_random_policies(
        seed in 0u64..10_000,
        mean in -1.0f64..1.0,
        stddev in 0.0f64..2.0,
        half_width in 0.1f64..2.0,
        sigma in 0.0f64..1.0,
        token_lo in 1u32..1000,
        token_span in 0u32..1000,
    ) {
        let clip = Interval::new(mean - half_width, mean + half_width).unwrap();
        let field = FieldPolicy { mean, stddev, clip };
        let policy = SamplingPolicy {
            temperature: field.clone(),
            top_p: field.clone(),
            frequency_penalty: field.clone(),
            presence_penalty: field,
            max_tokens: MaxTokensPolicy::Range { min: token_lo, max: token_lo + token_span },
        };
        policy.validate().unwrap();
        let mut draw = rng::stream(seed, "prop.sample", &[]);
        let a = sample_decoding(&policy, &mut draw);
        let b = sample_decoding(&policy, &mut draw);
        let c = sample_decoding(&policy, &mut draw);
        let follower = sample_decoding(&policy, &mut draw);
        policy.check(&a).unwrap();
        policy.check(&b).unwrap();
        policy.check(&c).unwrap();

        let weights = [0.5, 0.3, 0.2];
        let updated = weighted_elite_update(
            &follower,
            &[&a, &b, &c],
            &weights,
            sigma,
            &policy,
            &mut draw,
        );
        policy.check(&updated).unwrap();
    }

    /// Zero-noise weighted updates stay in the elites' fieldwise hull.
    #[test]
    fn weighted_update_convexity(seed in 0u64..10_000) {
        let policy = SamplingPolicy::default();
        let mut draw = rng::stream(seed, "prop.hull", &[]);
        let a = sample_decoding(&policy, &mut draw);
        let b = sample_decoding(&policy, &mut draw);
        let c = sample_decoding(&policy, &mut draw);
        let follower = sample_decoding(&policy, &mut draw);
        let updated = weighted_elite_update(
            &follower,
            &[&a, &b, &c],
            &[0.5, 0.3, 0.2],
            0.0,
            &policy,
            &mut draw,
        );
        for fieldname in CONTINUOUS_FIELDS {
            let values = [a.get(fieldname), b.get(fieldname), c.get(fieldname)];
            let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let got = updated.get(fieldname);
            prop_assert!(got >= lo - 1e-12 && got <= hi + 1e-12);
        }
    }

    /// Split determinism, disjointness, and coverage over fuzzed (seed, N).
    #[test]
    fn split_fuzz(seed in 0u64..100_000, n in 5usize..400) {
        let items: Vec<QAItem> = (0..n)
            .map(|i| QAItem {
                id: format!("id-{i}"),
                question: format!("q{i}"),
                gold: Some("1".into()),
                task_kind: TaskKind::Numeric,
            })
            .collect();
        let spec = SplitSpec::FixedSeedHoldout { seed };
        let (pool_a, test_a) = make_split(items.clone(), &spec).unwrap();
        let (pool_b, test_b) = make_split(items.clone(), &spec).unwrap();
        prop_assert_eq!(&pool_a, &pool_b);
        prop_assert_eq!(&test_a, &test_b);
        prop_assert_eq!(pool_a.len() + test_a.len(), n);
        prop_assert_eq!(pool_a.len(), (((n as f64) / 5.0).round() as usize).max(1));
        let pool_ids: std::collections::HashSet<&str> =
            pool_a.iter().map(|i| i.id.as_str()).collect();
        prop_assert!(test_a.iter().all(|i| !pool_ids.contains(i.id.as_str())));
    }
}
