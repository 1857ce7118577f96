use proptest::prelude::*;
use tucker_core::testbed::{
    gen_tensor_a, gen_tensor_b, gen_tensor_c, mean, median, run_experiment, summarize, Decay, ExperimentPlan, Recipe,
};
use tucker_core::{Algorithm, SolverConfig};

fn decay_strategy() -> impl Strategy<Value = Decay> {
    prop_oneof![Just(Decay::Slow), Just(Decay::Fast), Just(Decay::SShape)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn generators_are_bit_reproducible(seed in any::<u64>(), n in 4usize..12, decay in decay_strategy()) {
        let a1 = gen_tensor_a(n, n / 2, 1000.0, 0.3, seed).unwrap();
        let a2 = gen_tensor_a(n, n / 2, 1000.0, 0.3, seed).unwrap();
        prop_assert_eq!(a1.data(), a2.data());
        prop_assert_eq!(gen_tensor_b(n, decay, seed).unwrap(), gen_tensor_b(n, decay, seed).unwrap());
        prop_assert_eq!(gen_tensor_c([n, n + 1, n + 2], seed).unwrap(), gen_tensor_c([n, n + 1, n + 2], seed).unwrap());
    }

    #[test]
    fn aggregates_ignore_trial_order(values in prop::collection::vec(-1e6f64..1e6, 1..40), seed in any::<u64>()) {
        let mut shuffled = values.clone();
        let mut s = tucker_core::sketch::RandomStream::new(seed, 3);
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, s.next_below(i as u64 + 1) as usize);
        }
        prop_assert_eq!(mean(&values).unwrap().to_bits(), mean(&shuffled).unwrap().to_bits());
        prop_assert_eq!(median(&values).unwrap().to_bits(), median(&shuffled).unwrap().to_bits());
    }
}

#[test]
fn summaries_ignore_report_order() {
    let plan = ExperimentPlan {
        recipe: Recipe::Exact {
            dims: vec![8, 9, 10],
            ranks: vec![2, 2, 2],
        },
        tensor_seed: 4,
        algorithms: vec![Algorithm::RandThosvd, Algorithm::ShiftedSthosvd],
        configs: vec![SolverConfig::new(vec![3, 3, 3]).with_oversampling(2).with_power(2)],
        trials: 6,
        master_seed: 11,
    };
    let reports = run_experiment(&plan).unwrap();
    let mut rotated = reports.clone();
    rotated.rotate_left(5);
    assert_eq!(summarize(&reports), summarize(&rotated));
    let again = run_experiment(&plan).unwrap();
    let strip = |r: &[tucker_core::testbed::RunReport]| r.iter().map(|x| (x.algorithm, x.trial, x.re)).collect::<Vec<_>>();
    assert_eq!(strip(&reports), strip(&again));
}
