use std::f64::consts::PI;

use manoma_core::channel::{
    antenna_response, channel_gain, channel_vector, frv, sample_realization, AntennaPositionVector, SystemConfig,
    UserChannel,
};
use num_complex::Complex64;
use proptest::prelude::*;

fn user(theta: Vec<f64>, phi: Vec<f64>, prv: Vec<Complex64>) -> UserChannel {
    UserChannel {
        theta,
        phi,
        prv,
        distance: 60.0,
    }
}

fn angle() -> impl Strategy<Value = f64> {
    0.0..=PI
}

fn coord() -> impl Strategy<Value = f64> {
    -0.15..=0.15
}

proptest! {
    #[test]
    fn frv_entries_have_unit_modulus(
        x in coord(), y in coord(),
        theta in prop::collection::vec(angle(), 1..6),
        phi_seed in angle(),
    ) {
        let phi = theta.iter().map(|t| (t + phi_seed) % PI).collect::<Vec<_>>();
        let prv = vec![Complex64::new(1.0, 0.0); theta.len()];
        for e in frv([x, y], &user(theta, phi, prv), 0.1) {
            prop_assert!((e.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_path_gain_is_translation_invariant(
        pts in prop::collection::vec((coord(), coord()), 1..5),
        tx in -0.1..0.1f64, ty in -0.1..0.1f64,
        theta in angle(), phi in angle(), re in -2.0..2.0f64, im in -2.0..2.0f64,
    ) {
        let u = user(vec![theta], vec![phi], vec![Complex64::new(re, im)]);
        let a = AntennaPositionVector::new(pts.iter().map(|&(x, y)| [x, y]).collect());
        let b = AntennaPositionVector::new(pts.iter().map(|&(x, y)| [x + tx, y + ty]).collect());
        let ga = channel_gain(&a, &u, 0.1);
        let gb = channel_gain(&b, &u, 0.1);
        prop_assert!((ga - gb).abs() <= 1e-12 * ga.max(1e-300));
    }

    #[test]
    fn channel_vector_matches_per_antenna_assembly(seed in any::<u64>(), pts in prop::collection::vec((coord(), coord()), 1..6)) {
        let cfg = SystemConfig { num_users: 1, ..SystemConfig::default() };
        let real = sample_realization(&cfg, seed);
        let apv = AntennaPositionVector::new(pts.iter().map(|&(x, y)| [x, y]).collect());
        let h = channel_vector(&apv, &real.users[0], cfg.wavelength);
        for (m, p) in apv.positions.iter().enumerate() {
            let e = antenna_response(*p, &real.users[0], cfg.wavelength);
            prop_assert!((h[m] - e).norm() <= 1e-15 * e.norm().max(1e-300));
        }
    }
}

/// Kolmogorov-Smirnov statistic of `xs` against Uniform(0, upper).
fn ks_uniform(mut xs: Vec<f64>, upper: f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = x / upper;
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn sampled_angles_are_uniform() {
    let cfg = SystemConfig {
        num_users: 2000,
        num_paths: 5,
        ..SystemConfig::default()
    };
    let real = sample_realization(&cfg, 11);
    let theta: Vec<f64> = real.users.iter().flat_map(|u| u.theta.clone()).collect();
    let phi: Vec<f64> = real.users.iter().flat_map(|u| u.phi.clone()).collect();
    assert_eq!(theta.len(), 10_000);
    let critical = 1.628 / (theta.len() as f64).sqrt();
    assert!(ks_uniform(theta, PI) < critical);
    assert!(ks_uniform(phi, PI) < critical);
}

#[test]
fn path_response_power_matches_pathloss() {
    let cfg = SystemConfig {
        num_users: 2000,
        num_paths: 5,
        distance_min: 80.0,
        distance_max: 80.0,
        ..SystemConfig::default()
    };
    let real = sample_realization(&cfg, 12);
    let expected = cfg.pathloss_ref * 80f64.powf(-cfg.pathloss_exp) / cfg.num_paths as f64;
    let z: Vec<Complex64> = real.users.iter().flat_map(|u| u.prv.clone()).collect();
    let n = z.len() as f64;
    let power = z.iter().map(|c| c.norm_sqr()).sum::<f64>() / n;
    assert!((power / expected - 1.0).abs() < 0.03, "{}", power / expected);
    let mean = z.iter().sum::<Complex64>() / n;
    assert!(mean.norm() < 0.03 * expected.sqrt());
    let default = SystemConfig {
        num_users: 2000,
        ..SystemConfig::default()
    };
    let d: Vec<f64> = sample_realization(&default, 13).users.iter().map(|u| u.distance).collect();
    assert!(d.iter().all(|x| (default.distance_min..=default.distance_max).contains(x)));
    assert!(ks_uniform(d.iter().map(|x| x - default.distance_min).collect(), default.distance_max - default.distance_min) < 1.628 / 2000f64.sqrt());
}
