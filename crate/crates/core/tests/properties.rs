use proptest::prelude::*;

use chain_reduction::born::{born_distribution, currents, rk4_distribution};
use chain_reduction::chain::{make_n_atom_chain, two_atom_analytic, ChainSpec};
use chain_reduction::observer::{count_at, run_seeded};
use chain_reduction::rule4::{cycle_rate, reduce, sample_hit, CycleState};

fn chain_strategy() -> impl Strategy<Value = ChainSpec> {
    prop::collection::vec(0.05f64..20.0, 1..=5)
        .prop_map(|rates| ChainSpec::from_rates(rates).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn two_atom_is_normalized(k in 1e-3f64..50.0, t in 0.0f64..20.0) {
        let d = two_atom_analytic(k, t).unwrap();
        prop_assert!((d.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn n_atom_rates_step_down_by_k(k in 1e-3f64..10.0, n in 1usize..30) {
        let chain = make_n_atom_chain(k, n).unwrap();
        for w in chain.rates().windows(2) {
            prop_assert!(w[0] > w[1]);
            prop_assert!(((w[0] - w[1]) - k).abs() <= 1e-12 * w[0]);
        }
    }

    #[test]
    fn net_currents_sum_to_zero(chain in chain_strategy(), t in 0.0f64..5.0) {
        let d = born_distribution(&chain, t).unwrap();
        let j = currents(&chain, &d).unwrap();
        prop_assert!(j.net.iter().sum::<f64>().abs() < 1e-9);
        prop_assert!(j.flows.iter().all(|f| *f >= 0.0));
        prop_assert!((d.probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rk4_path_conserves_probability(chain in chain_strategy(), t in 0.0f64..3.0) {
        let d = rk4_distribution(&chain, t).unwrap();
        let j = currents(&chain, &d).unwrap();
        prop_assert!((d.probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(j.net.iter().sum::<f64>().abs() < 1e-9);
    }

    #[test]
    fn stopping_rule_is_consistent(
        chain in chain_strategy(),
        t in 0.0f64..4.0,
        seed in any::<u64>(),
        trial in 0u64..1000,
    ) {
        let rec = run_seeded(&chain, t, seed, trial).unwrap();
        prop_assert_eq!(rec.count_at_query, count_at(&rec.hit_times, t));
        prop_assert!(rec.hit_times.windows(2).all(|w| w[1] > w[0]));
        let mut acc = 0.0;
        for (h, tau) in rec.hit_times.iter().zip(&rec.inter_arrival) {
            acc += tau;
            prop_assert!((h - acc).abs() <= 1e-12);
        }
        prop_assert!(rec.count_at_query <= chain.num_transitions());
    }

    #[test]
    fn count_is_monotone_in_query_time(
        chain in chain_strategy(),
        mut times in prop::collection::vec(0.0f64..5.0, 2..8),
        seed in any::<u64>(),
    ) {
        times.sort_by(f64::total_cmp);
        let counts: Vec<usize> = times
            .iter()
            .map(|&t| run_seeded(&chain, t, seed, 0).unwrap().count_at_query)
            .collect();
        prop_assert!(counts.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn every_uniform_yields_an_advance(chain in chain_strategy(), u in 1e-300f64..1.0) {
        prop_assume!(u < 1.0);
        let mut cycle = CycleState::initial(&chain);
        while let Some(ready) = cycle.ready_index {
            let hit = sample_hit(cycle_rate(&chain, &cycle).unwrap(), u, ready).unwrap();
            prop_assert!(hit.waiting_time.is_finite() && hit.waiting_time > 0.0);
            let next = reduce(&chain, &cycle, &hit).unwrap();
            prop_assert_eq!(next.conscious_index, cycle.conscious_index + 1);
            prop_assert_eq!(next.p_conscious, 1.0);
            cycle = next;
        }
        prop_assert_eq!(cycle.conscious_index, chain.num_transitions());
    }
}
