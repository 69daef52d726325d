use manoma_core::channel::{channel_gain, sample_realization, AntennaPositionVector, ChannelRealization, SystemConfig, UserChannel};
use manoma_core::stage_one::{determine_order, initial_positions, optimize_positions_for_gain, total_gain};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn single_path(amplitude: f64) -> UserChannel {
    UserChannel {
        theta: vec![0.7],
        phi: vec![1.1],
        prv: vec![Complex64::new(amplitude, 0.0)],
        distance: 60.0,
    }
}

#[test]
fn order_examples() {
    let apv = AntennaPositionVector::new(vec![[0.0, 0.0]]);
    let real = ChannelRealization {
        users: vec![single_path(2.0), single_path(1.0)],
    };
    assert_eq!(determine_order(&apv, &real, 0.1).order, vec![1, 0]);
    let tied = ChannelRealization {
        users: vec![single_path(1.0), single_path(1.0), single_path(1.0)],
    };
    assert_eq!(determine_order(&apv, &tied, 0.1).order, vec![0, 1, 2]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn order_matches_sort_oracle(seed in any::<u64>()) {
        let cfg = SystemConfig { num_users: 3, ..SystemConfig::default() };
        let real = sample_realization(&cfg, seed);
        let apv = initial_positions(&cfg, &mut ChaCha8Rng::seed_from_u64(seed));
        let order = determine_order(&apv, &real, cfg.wavelength).order;
        let gains: Vec<f64> = real.users.iter().map(|u| channel_gain(&apv, u, cfg.wavelength)).collect();
        let mut sorted = order.clone();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, vec![0, 1, 2]);
        prop_assert!(order.windows(2).all(|w| gains[w[0]] <= gains[w[1]]));
    }

    #[test]
    fn gain_ascent_is_monotone_feasible_and_deterministic(seed in any::<u64>(), m in 1usize..6, k in 1usize..4) {
        let cfg = SystemConfig { num_antennas: m, num_users: k, ..SystemConfig::default() };
        let real = sample_realization(&cfg, seed);
        let init = initial_positions(&cfg, &mut ChaCha8Rng::seed_from_u64(seed));
        let res = optimize_positions_for_gain(&real, &cfg, &init, None);
        prop_assert!(res.trace.windows(2).all(|w| w[1] >= w[0] - 1e-9 * w[0].abs()));
        prop_assert!(res.apv.is_feasible(&cfg, 0.0));
        prop_assert!(res.sweeps <= cfg.max_iter_stage_one);
        let last = *res.trace.last().unwrap();
        prop_assert!((total_gain(&res.apv, &real, cfg.wavelength) - last).abs() <= 1e-12 * last);
        let again = optimize_positions_for_gain(&real, &cfg, &init, None);
        prop_assert_eq!(again.apv, res.apv);
        prop_assert_eq!(again.trace, res.trace);
    }
}

#[test]
fn single_path_users_keep_initial_positions() {
    let cfg = SystemConfig {
        num_paths: 1,
        num_users: 3,
        ..SystemConfig::default()
    };
    let real = sample_realization(&cfg, 5);
    let init = initial_positions(&cfg, &mut ChaCha8Rng::seed_from_u64(5));
    let res = optimize_positions_for_gain(&real, &cfg, &init, None);
    assert_eq!(res.sweeps, 1);
    assert_eq!(res.apv, init);
}
