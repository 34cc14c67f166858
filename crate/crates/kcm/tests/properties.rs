//! Randomized invariant checks across the library.

use proptest::prelude::*;

use kcm::bootstrap::{closure, step, InfectionState, Region};
use kcm::dual::{compositions_count, count_reasonable_codings, count_reasonable_codings_bruteforce};
use kcm::family::{ExactDirection, UpdateFamily, Vec2};
use kcm::stats::wilson_interval;

fn arb_vec2(limit: i64) -> impl Strategy<Value = Vec2> {
    (-limit..=limit, -limit..=limit).prop_map(|(x, y)| Vec2::new(x, y))
}

fn arb_rule() -> impl Strategy<Value = Vec<Vec2>> {
    proptest::collection::vec(arb_vec2(3), 1..4)
        .prop_filter("rule elements must be nonzero", |r| {
            r.iter().all(|v| *v != Vec2::ZERO)
        })
}

fn arb_family_2d() -> impl Strategy<Value = UpdateFamily> {
    proptest::collection::vec(arb_rule(), 1..4)
        .prop_map(|rules| UpdateFamily::new(2, rules).expect("nonzero rules are valid"))
}

proptest! {
    #[test]
    fn direction_reduction_normalizes_scaling(v in arb_vec2(5), k in 1i64..5) {
        prop_assume!(v != Vec2::ZERO);
        let a = ExactDirection::new(v).unwrap();
        let b = ExactDirection::new(v.scale(k)).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn stability_is_scale_invariant(family in arb_family_2d(), v in arb_vec2(5), k in 1i64..5) {
        prop_assume!(v != Vec2::ZERO);
        let u = ExactDirection::new(v).unwrap();
        let su = ExactDirection::new(v.scale(k)).unwrap();
        prop_assert_eq!(family.is_stable(u), family.is_stable(su));
    }

    #[test]
    fn stable_set_matches_pointwise_oracle(family in arb_family_2d(), v in arb_vec2(7)) {
        prop_assume!(v != Vec2::ZERO);
        let u = ExactDirection::new(v).unwrap();
        let arcs = family.stable_set_2d().unwrap();
        prop_assert_eq!(arcs.contains(u), family.is_stable(u));
    }

    #[test]
    fn mirrored_family_mirrors_stability(family in arb_family_2d(), v in arb_vec2(5)) {
        prop_assume!(v != Vec2::ZERO);
        let mirrored = UpdateFamily::new(
            2,
            family.rules().iter().map(|r| r.iter().map(|x| x.neg()).collect()).collect(),
        ).unwrap();
        let u = ExactDirection::new(v).unwrap();
        let nu = ExactDirection::new(v.neg()).unwrap();
        prop_assert_eq!(family.is_stable(u), mirrored.is_stable(nu));
    }

    #[test]
    fn family_json_round_trip(family in arb_family_2d()) {
        let text = family.to_json();
        let back = UpdateFamily::from_json(&text).unwrap();
        prop_assert_eq!(family.rules(), back.rules());
        prop_assert_eq!(family.range(), back.range());
    }

    #[test]
    fn closure_is_idempotent_and_monotone(
        sites in proptest::collection::hash_set((0i64..6, 0i64..6), 0..14),
        extra in proptest::collection::hash_set((0i64..6, 0i64..6), 0..5),
    ) {
        let family = kcm::family::builtin::two_neighbour();
        let region = Region::from_box(Vec2::new(0, 0), Vec2::new(5, 5));
        let small: Vec<Vec2> = sites.iter().map(|&(x, y)| Vec2::new(x, y)).collect();
        let mut big = small.clone();
        big.extend(extra.iter().map(|&(x, y)| Vec2::new(x, y)));

        let closed_small = closure(&family, &InfectionState::new(region.clone(), small.clone()));
        // idempotence
        let reclosed = closure(
            &family,
            &InfectionState::new(region.clone(), closed_small.infected().map(|(s, _)| *s)),
        );
        prop_assert_eq!(closed_small.infected_count(), reclosed.infected_count());
        // one step never removes infection
        let one = step(&family, &InfectionState::new(region.clone(), small.clone()));
        for s in small.iter() {
            prop_assert!(one.is_infected(*s));
        }
        // monotone in the initial set
        let closed_big = closure(&family, &InfectionState::new(region, big));
        for (s, _) in closed_small.infected() {
            prop_assert!(closed_big.is_infected(*s));
        }
    }

    #[test]
    fn wilson_interval_brackets_the_point_estimate(hits in 0u64..200, extra in 0u64..200) {
        let trials = hits + extra;
        prop_assume!(trials > 0);
        let (lo, hi) = wilson_interval(hits, trials);
        let p = hits as f64 / trials as f64;
        prop_assert!(lo <= p + 1e-12 && p - 1e-12 <= hi);
        prop_assert!((0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&hi));
    }

    #[test]
    fn compositions_count_matches_enumeration(parts in 1u64..5, total in 0u64..7) {
        // enumerate weak compositions of `total` into `parts` parts
        fn enumerate(parts: u64, total: u64) -> u64 {
            if parts == 1 {
                return 1;
            }
            (0..=total).map(|first| enumerate(parts - 1, total - first)).sum()
        }
        let expected = enumerate(parts, total);
        prop_assert_eq!(compositions_count(parts, total), expected.into());
    }

    #[test]
    fn coding_counters_agree(t in 3.0f64..9.0, rho in 1i64..3, n_scale in 1u32..3) {
        let k = 2.0;
        let n = n_scale as f64 * 0.5;
        let fast = count_reasonable_codings(t, k, n, rho, 1).unwrap();
        let slow = count_reasonable_codings_bruteforce(Vec2::ZERO, t, k, n, rho, 1).unwrap();
        prop_assert_eq!(fast, slow);
    }
}
