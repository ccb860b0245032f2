use proptest::prelude::*;

use alive_smc::models::UniformIidModel;
use alive_smc::{ancestral_path, run_filter, run_standard_filter, sample_leaf, seeded_rng, FilterOptions, Variant};

fn variant() -> impl Strategy<Value = Variant> {
    prop_oneof![Just(Variant::Alive), Just(Variant::Lgo)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn every_step_satisfies_invariants(
        p0 in 0.05f64..1.0,
        n in 2usize..12,
        horizon in 1usize..8,
        seed in any::<u64>(),
        variant in variant(),
        lean in any::<bool>(),
    ) {
        let model = UniformIidModel::new(p0, horizon);
        let opts = FilterOptions::new(n).with_variant(variant).lean(lean);
        let run = run_filter(&model, &opts, seed).unwrap();
        prop_assert_eq!(run.horizon(), horizon);
        for (k, step) in run.steps.iter().enumerate() {
            let prev = if k == 0 { None } else { Some(&run.steps[k - 1]) };
            prop_assert!(step.check_invariants(prev, variant).is_ok(), "{:?}", step.check_invariants(prev, variant));
            prop_assert!(step.stopping_time() >= n);
        }
        prop_assert_eq!(run.recomputed_log_gamma(), run.log_gamma);
        prop_assert!(run.log_gamma <= 1e-12 * horizon as f64);
        prop_assert!(run.total_trials() >= n * horizon);
    }

    #[test]
    fn ancestral_paths_are_full_length_and_alive(
        p0 in 0.1f64..0.9,
        n in 2usize..8,
        horizon in 1usize..6,
        seed in any::<u64>(),
    ) {
        let model = UniformIidModel::new(p0, horizon);
        let run = run_filter(&model, &FilterOptions::new(n).lean(true), seed).unwrap();
        let leaf = sample_leaf(run.final_step(), &mut seeded_rng(seed ^ 1));
        let path = ancestral_path(&run, leaf).unwrap();
        prop_assert_eq!(path.len(), horizon);
        prop_assert!(path.states.iter().all(|&x| x < p0));
    }

    #[test]
    fn runs_are_reproducible(seed in any::<u64>(), n in 2usize..6) {
        let model = UniformIidModel::new(0.35, 4);
        let opts = FilterOptions::new(n);
        prop_assert_eq!(run_filter(&model, &opts, seed).unwrap(), run_filter(&model, &opts, seed).unwrap());
        prop_assert_eq!(run_standard_filter(&model, n, seed), run_standard_filter(&model, n, seed));
    }

    #[test]
    fn standard_runs_have_alive_steps_until_collapse(p0 in 0.0f64..1.0, n in 1usize..6, seed in any::<u64>()) {
        let model = UniformIidModel::new(p0, 10);
        let run = run_standard_filter(&model, n, seed);
        let counts = run.alive_counts();
        match &run.collapse {
            None => {
                prop_assert_eq!(counts.len(), 10);
                prop_assert!(counts.iter().all(|&c| c >= 1));
            }
            Some(c) => {
                prop_assert_eq!(counts.len(), c.step);
                prop_assert_eq!(counts[c.step - 1], 0);
                prop_assert!(counts[..c.step - 1].iter().all(|&k| k >= 1));
            }
        }
    }
}
