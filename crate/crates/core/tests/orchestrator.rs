use manoma_core::channel::{channel_vector, sample_realization, SystemConfig};
use manoma_core::ga::GaConfig;
use manoma_core::orchestrator::{run_two_stage, run_with_options, RunOptions, RunReport};
use manoma_core::rates::DecodingIndicatorMatrix;
use proptest::prelude::*;

fn quick_ga() -> GaConfig {
    GaConfig {
        population: 20,
        generations: 20,
        ..GaConfig::default()
    }
}

fn small(k: usize, m: usize) -> SystemConfig {
    SystemConfig {
        num_users: k,
        num_antennas: m,
        ..SystemConfig::default()
    }
}

fn without_clock(mut r: RunReport) -> RunReport {
    r.wall_clock_s = 0.0;
    r
}

fn check_invariants(r: &RunReport, cfg: &SystemConfig) -> Result<(), TestCaseError> {
    prop_assert!(!r.excluded, "{:?}", r.exclusion_reason);
    prop_assert!(r.sum_rate_trace.windows(2).all(|w| w[1] >= w[0] - 1e-9));
    prop_assert!(r.stage_one_trace.windows(2).all(|w| w[1] >= w[0] - 1e-9 * w[0].abs()));
    prop_assert!(r.iterations <= cfg.max_iter_stage_two);
    prop_assert!(r.apv.is_feasible(cfg, 1e-9));
    prop_assert!(DecodingIndicatorMatrix::from_rows(&r.indicator).is_ok());
    let power: f64 = r.beamformer_vectors().iter().map(|w| w.norm_squared()).sum();
    prop_assert!(power <= cfg.max_power * (1.0 + 1e-7));
    for it in &r.iterates {
        prop_assert!(it.power <= cfg.max_power * (1.0 + 1e-7));
        prop_assert!(it.min_spacing >= cfg.min_spacing - 1e-9);
        prop_assert!(it.max_abs_coordinate <= cfg.half_side() + 1e-9);
        prop_assert!(it.indicator_valid);
    }
    prop_assert!((r.rates.iter().sum::<f64>() - r.sum_rate).abs() < 1e-9);
    prop_assert_eq!(r.sum_rate_trace.last().copied(), Some(r.sum_rate));
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn runs_satisfy_invariants(seed in any::<u64>(), k in 2usize..4) {
        let cfg = small(k, 2);
        let real = sample_realization(&cfg, seed);
        let r = run_two_stage(&real, &cfg, &quick_ga(), seed).unwrap();
        check_invariants(&r, &cfg)?;
        let mut sorted = r.order.clone();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, (0..k).collect::<Vec<_>>());
    }
}

#[test]
fn runs_are_deterministic() {
    let cfg = small(3, 2);
    let real = sample_realization(&cfg, 21);
    let a = run_two_stage(&real, &cfg, &quick_ga(), 21).unwrap();
    let b = run_two_stage(&real, &cfg, &quick_ga(), 21).unwrap();
    assert_eq!(without_clock(a), without_clock(b));
}

#[test]
fn single_user_reaches_matched_filter_rate() {
    for m in 1..=3 {
        let cfg = small(1, m);
        for seed in 0..3 {
            let real = sample_realization(&cfg, seed);
            let r = run_two_stage(&real, &cfg, &quick_ga(), seed).unwrap();
            let h = channel_vector(&r.apv, &real.users[0], cfg.wavelength);
            let closed = (1.0 + cfg.max_power * h.norm_squared() / cfg.noise_power).log2();
            assert!((r.sum_rate - closed).abs() < 1e-3, "M={m} seed {seed}: {} vs {closed}", r.sum_rate);
        }
    }
}

#[test]
fn single_path_single_user_rate_ignores_positions() {
    let cfg = SystemConfig {
        num_paths: 1,
        ..small(1, 3)
    };
    let real = sample_realization(&cfg, 4);
    let moving = run_two_stage(&real, &cfg, &quick_ga(), 4).unwrap();
    let fixed = run_with_options(
        &real,
        &cfg,
        &quick_ga(),
        4,
        &RunOptions {
            move_antennas: false,
            ..RunOptions::proposed()
        },
    )
    .unwrap();
    assert!((moving.sum_rate - fixed.sum_rate).abs() < 1e-9 * moving.sum_rate);
}

#[test]
fn mismatched_realization_is_rejected() {
    let cfg = small(3, 2);
    let real = sample_realization(&small(2, 2), 1);
    assert!(run_two_stage(&real, &cfg, &quick_ga(), 1).is_err());
}
