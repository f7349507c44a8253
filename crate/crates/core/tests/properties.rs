use proptest::prelude::*;

use avi_core::abstraction::validate;
use avi_core::avi::{
    check_contraction, extract_policy, interval_vi, scalar_vi, suboptimality_bound, PolicyKind, Tables,
};
use avi_core::env::{build_env, EnvName, RoomOverrides};
use avi_core::estimation::{IntervalAdp, RolloutOutcome};
use avi_core::policy::mlp::{MlpPolicy, Normalizer};
use avi_core::rng::stream_rng;

/// Outcomes for options on a complete graph over `n` regions; option `o`
/// leaves region `o / (n - 1)`.
fn outcomes_strategy(
    n: usize,
) -> impl Strategy<Value = (f64, Vec<Option<Vec<Vec<RolloutOutcome>>>>)> {
    let k = n * (n - 1);
    let outcome = (prop::option::of(0..n), 1usize..30, 0.0f64..1.0).prop_map(|(t, steps, r)| RolloutOutcome {
        start: vec![0.0],
        terminal: t,
        steps,
        reward: r,
    });
    let per_start = prop::collection::vec(outcome, 1..4);
    let per_option = prop::option::weighted(0.9, prop::collection::vec(per_start, 1..5));
    (0.05f64..0.99, prop::collection::vec(per_option, k))
}

fn complete_edges(n: usize) -> Vec<(usize, usize)> {
    (0..n)
        .flat_map(|a| (0..n).filter(move |&b| b != a).map(move |b| (a, b)))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn interval_tables_are_ordered_and_discounted((gamma, per) in outcomes_strategy(4)) {
        let adp = IntervalAdp::from_outcomes(gamma, 4, complete_edges(4), &per);
        for o in 0..adp.options.len() {
            let mut mass = 0.0;
            for j in 0..4 {
                prop_assert!(adp.t_inf[o][j] <= adp.t_sup[o][j]);
                prop_assert!(adp.t_inf[o][j] >= 0.0 && adp.t_sup[o][j] <= gamma + 1e-15);
                mass += adp.t_inf[o][j];
            }
            prop_assert!(mass <= gamma + 1e-12);
            prop_assert!(adp.r_inf[o] <= adp.r_sup[o]);
            prop_assert_eq!(adp.available[o], per[o].is_some());
        }
        let (et, er) = adp.epsilons();
        prop_assert!(et >= 0.0 && er >= 0.0 && et <= gamma);
        prop_assert_eq!(IntervalAdp::from_text(&adp.to_text()).unwrap(), adp);
    }

    #[test]
    fn vi_residuals_contract_by_row_sums((gamma, per) in outcomes_strategy(5)) {
        let adp = IntervalAdp::from_outcomes(gamma, 5, complete_edges(5), &per);
        let vi = interval_vi(&adp, 1e-10, 100_000);
        // the Bellman map contracts by the largest row sum of its table
        let row_max = |t: &[Vec<f64>]| t.iter().map(|r| r.iter().sum::<f64>()).fold(0.0, f64::max);
        let (f_inf, f_sup) = (row_max(&adp.t_inf), row_max(&adp.t_sup));
        prop_assert!(f_inf <= gamma + 1e-12);
        let (holds, factor) = check_contraction(5, adp.epsilons().0, gamma);
        prop_assert!(f_sup <= factor + 1e-12);
        for (res, f) in [(&vi.inf, f_inf), (&vi.sup, f_sup)] {
            if f >= 1.0 {
                continue;
            }
            prop_assert!(res.converged);
            for w in res.residuals.windows(2) {
                prop_assert!(w[1] <= f * w[0] + 1e-12, "{} > {} * {}", w[1], f, w[0]);
            }
            prop_assert!(res.v.iter().all(|&v| v >= 0.0));
        }
        if holds {
            // monotone in the tables
            for r in 0..5 {
                prop_assert!(vi.inf.v[r] <= vi.sup.v[r] + 1e-9);
            }
        }
    }

    #[test]
    fn argmax_ignores_positive_reward_scaling(
        (gamma, per) in outcomes_strategy(4),
        pow in -4i32..5,
    ) {
        let adp = IntervalAdp::from_outcomes(gamma, 4, complete_edges(4), &per);
        // a power of two scales exactly, so ties survive
        let c = 2f64.powi(pow);
        let scaled: Vec<f64> = adp.r_inf.iter().map(|r| r * c).collect();
        let tab = |r| Tables {
            n_regions: 4,
            options: &adp.options,
            available: &adp.available,
            t: &adp.t_inf,
            r,
        };
        let a = scalar_vi(&tab(&adp.r_inf), 0.0, 2000);
        let b = scalar_vi(&tab(&scaled), 0.0, 2000);
        for (x, y) in a.v.iter().zip(&b.v) {
            prop_assert!((x * c - y).abs() <= 1e-9 * (1.0 + y.abs()));
        }
        let pa = extract_policy(&a.q, &adp.options, &adp.available, 4, 3, PolicyKind::Conservative);
        let pb = extract_policy(&b.q, &adp.options, &adp.available, 4, 3, PolicyKind::Conservative);
        match (pa, pb) {
            (Ok(pa), Ok(pb)) => prop_assert_eq!(pa.choice, pb.choice),
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "scaling changed feasibility"),
        }
    }

    #[test]
    fn bound_grows_with_widths(
        n in 2usize..30,
        gamma in 0.1f64..0.95,
        et in 0.0f64..0.01,
        er in 0.0f64..1.0,
        d in 0.0f64..0.01,
    ) {
        let (holds, factor) = check_contraction(n, et, gamma);
        prop_assert_eq!(holds, factor < 1.0);
        prop_assume!(check_contraction(n, et + d, gamma).0);
        let b0 = suboptimality_bound(n, et, er, gamma);
        let b1 = suboptimality_bound(n, et + d, er + d, gamma);
        prop_assert!(b0 >= 0.0 && b1 >= b0);
        prop_assert_eq!(suboptimality_bound(n, 0.0, 0.0, gamma), 0.0);
    }

    #[test]
    fn normalizer_merge_matches_sequential_pushes(
        xs in prop::collection::vec(prop::collection::vec(-100.0f64..100.0, 3), 0..40),
        split in 0usize..40,
    ) {
        let split = split.min(xs.len());
        let mut all = Normalizer::new(3);
        xs.iter().for_each(|x| all.push(x));
        let (mut a, mut b) = (Normalizer::new(3), Normalizer::new(3));
        xs[..split].iter().for_each(|x| a.push(x));
        xs[split..].iter().for_each(|x| b.push(x));
        a.merge(&b);
        prop_assert_eq!(a.count, all.count);
        for i in 0..3 {
            prop_assert!((a.mean[i] - all.mean[i]).abs() < 1e-9);
            prop_assert!((a.m2[i] - all.m2[i]).abs() < 1e-6 * (1.0 + all.m2[i]));
        }
    }

    #[test]
    fn policy_bytes_round_trip(seed in any::<u64>(), hidden in 1usize..16) {
        let p = MlpPolicy::with_sizes(vec![2, hidden, hidden, 2], 1.0, &mut stream_rng(seed, &[]));
        let back = MlpPolicy::from_bytes(&p.to_bytes(), 1.0).unwrap();
        prop_assert_eq!(&back, &p);
        let bytes = p.to_bytes();
        prop_assert!(MlpPolicy::from_bytes(&bytes[..bytes.len() - 1], 1.0).is_err());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_specs_validate(seed in any::<u64>(), n in 3usize..25, k in 1usize..8) {
        prop_assume!(k < n);
        let env = build_env(EnvName::NineRooms, &RoomOverrides::default()).unwrap();
        let spec = avi_core::abstraction::random_spec(&env, n, k, 1.0, seed).unwrap();
        let report = validate(&spec);
        prop_assert!(report.is_valid(), "{}", report);
        prop_assert_eq!(spec.n_regions(), n + 2);
        prop_assert!(spec.out_edges(spec.goal_id).next().is_none());
        prop_assert!(spec.regions.iter().all(|r| !env.in_obstacle(&r.center)));
    }
}
