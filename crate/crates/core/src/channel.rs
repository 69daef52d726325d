//! Field-response channel model and random geometric channel generation.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::CoreError;

pub type CVec = nalgebra::DVector<Complex64>;

/// System parameters. All powers are linear (watts), all lengths in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub num_antennas: usize,
    pub num_users: usize,
    pub num_paths: usize,
    pub wavelength: f64,
    pub region_side: f64,
    pub min_spacing: f64,
    pub max_power: f64,
    pub noise_power: f64,
    pub min_rate: f64,
    pub pathloss_ref: f64,
    pub pathloss_exp: f64,
    pub distance_min: f64,
    pub distance_max: f64,
    pub eps_stage_one: f64,
    pub eps_stage_two: f64,
    pub max_iter_stage_one: usize,
    pub max_iter_stage_two: usize,
}

pub fn dbm_to_watt(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

impl Default for SystemConfig {
    fn default() -> Self {
        let wavelength = 0.1;
        SystemConfig {
            num_antennas: 4,
            num_users: 6,
            num_paths: 5,
            wavelength,
            region_side: 3.0 * wavelength,
            min_spacing: wavelength / 2.0,
            max_power: dbm_to_watt(10.0),
            noise_power: dbm_to_watt(-80.0),
            min_rate: 0.25,
            pathloss_ref: db_to_linear(-30.0),
            pathloss_exp: 2.8,
            distance_min: 50.0,
            distance_max: 100.0,
            eps_stage_one: 1e-2,
            eps_stage_two: 1e-2,
            max_iter_stage_one: 100,
            max_iter_stage_two: 100,
        }
    }
}

impl SystemConfig {
    pub fn validate(&self) -> Result<(), CoreError> {
        let bad = |field: &str, reason: &str| {
            Err(CoreError::InvalidConfig {
                field: field.to_string(),
                reason: reason.to_string(),
            })
        };
        if self.num_antennas == 0 {
            return bad("num_antennas", "must be at least 1");
        }
        if self.num_users == 0 {
            return bad("num_users", "must be at least 1");
        }
        if self.num_paths == 0 {
            return bad("num_paths", "must be at least 1");
        }
        if !(self.wavelength > 0.0 && self.wavelength.is_finite()) {
            return bad("wavelength", "must be positive and finite");
        }
        if !(self.region_side > 0.0 && self.region_side.is_finite()) {
            return bad("region_side", "must be positive and finite");
        }
        if !(self.min_spacing > 0.0 && self.min_spacing.is_finite()) {
            return bad("min_spacing", "must be positive and finite");
        }
        let per_side = (self.region_side / self.min_spacing + 1.0 - 1e-9).ceil();
        if (self.num_antennas as f64) > per_side * per_side {
            return bad(
                "num_antennas",
                &format!(
                    "exceeds the packing bound ceil(A/D + 1)^2 = {} for region_side and min_spacing",
                    per_side * per_side
                ),
            );
        }
        if !(self.max_power > 0.0 && self.max_power.is_finite()) {
            return bad("max_power", "must be positive and finite");
        }
        if !(self.noise_power > 0.0 && self.noise_power.is_finite()) {
            return bad("noise_power", "must be positive and finite");
        }
        if !(self.min_rate >= 0.0 && self.min_rate.is_finite()) {
            return bad("min_rate", "must be nonnegative and finite");
        }
        if !(self.pathloss_ref > 0.0) {
            return bad("pathloss_ref", "must be positive");
        }
        if !self.pathloss_exp.is_finite() {
            return bad("pathloss_exp", "must be finite");
        }
        if !(self.distance_min > 0.0 && self.distance_min <= self.distance_max) {
            return bad("distance_min", "must satisfy 0 < distance_min <= distance_max");
        }
        if !(self.eps_stage_one > 0.0) {
            return bad("eps_stage_one", "must be positive");
        }
        if !(self.eps_stage_two > 0.0) {
            return bad("eps_stage_two", "must be positive");
        }
        if self.max_iter_stage_one == 0 {
            return bad("max_iter_stage_one", "must be at least 1");
        }
        if self.max_iter_stage_two == 0 {
            return bad("max_iter_stage_two", "must be at least 1");
        }
        Ok(())
    }

    /// Noise power of user `k` (identical for all users).
    pub fn noise(&self, _k: usize) -> f64 {
        self.noise_power
    }

    pub fn noise_table(&self) -> Vec<f64> {
        (0..self.num_users).map(|k| self.noise(k)).collect()
    }

    pub fn half_side(&self) -> f64 {
        self.region_side / 2.0
    }
}

/// Propagation environment of one user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserChannel {
    /// Elevation angles of departure, one per path.
    pub theta: Vec<f64>,
    /// Azimuth angles of departure, one per path.
    pub phi: Vec<f64>,
    /// Path-response vector.
    pub prv: Vec<Complex64>,
    pub distance: f64,
}

impl UserChannel {
    pub fn num_paths(&self) -> usize {
        self.prv.len()
    }

    /// Coefficient of `x` in the path difference of path `l`.
    pub fn sx(&self, l: usize) -> f64 {
        self.theta[l].sin() * self.phi[l].cos()
    }

    /// Coefficient of `y` in the path difference of path `l`.
    pub fn sy(&self, l: usize) -> f64 {
        self.theta[l].cos()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    pub users: Vec<UserChannel>,
}

impl ChannelRealization {
    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    /// Realization with users rearranged so that new user `k` is old user `order[k]`.
    pub fn reordered(&self, order: &[usize]) -> ChannelRealization {
        ChannelRealization {
            users: order.iter().map(|&k| self.users[k].clone()).collect(),
        }
    }
}

/// Positions of the movable antennas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AntennaPositionVector {
    pub positions: Vec<[f64; 2]>,
}

impl AntennaPositionVector {
    pub fn new(positions: Vec<[f64; 2]>) -> Self {
        AntennaPositionVector { positions }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn min_pairwise_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for a in 0..self.positions.len() {
            for b in a + 1..self.positions.len() {
                best = best.min(dist(self.positions[a], self.positions[b]));
            }
        }
        best
    }

    pub fn in_region(&self, side: f64, tol: f64) -> bool {
        let h = side / 2.0 + tol;
        self.positions
            .iter()
            .all(|p| p[0].abs() <= h && p[1].abs() <= h && p[0].is_finite() && p[1].is_finite())
    }

    /// Region and spacing check with an absolute tolerance in meters.
    pub fn is_feasible(&self, config: &SystemConfig, tol: f64) -> bool {
        self.positions.len() == config.num_antennas
            && self.in_region(config.region_side, tol)
            && self.min_pairwise_distance() >= config.min_spacing - tol
    }
}

pub fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Propagation path difference of position `u` relative to the origin.
pub fn path_difference(u: [f64; 2], theta: f64, phi: f64) -> f64 {
    u[0] * theta.sin() * phi.cos() + u[1] * theta.cos()
}

/// Transmit field-response vector of position `u` for one user.
pub fn frv(u: [f64; 2], user: &UserChannel, wavelength: f64) -> Vec<Complex64> {
    let k = 2.0 * PI / wavelength;
    user.theta
        .iter()
        .zip(&user.phi)
        .map(|(&t, &p)| Complex64::from_polar(1.0, k * path_difference(u, t, p)))
        .collect()
}

/// `g(u)^H f` for a single antenna position.
pub fn antenna_response(u: [f64; 2], user: &UserChannel, wavelength: f64) -> Complex64 {
    frv(u, user, wavelength)
        .iter()
        .zip(&user.prv)
        .map(|(g, f)| g.conj() * f)
        .sum()
}

/// Channel vector `h = G^H f`, entry `m` equal to `g(u_m)^H f`.
pub fn channel_vector(apv: &AntennaPositionVector, user: &UserChannel, wavelength: f64) -> CVec {
    CVec::from_iterator(
        apv.len(),
        apv.positions
            .iter()
            .map(|&u| antenna_response(u, user, wavelength)),
    )
}

pub fn channel_gain(apv: &AntennaPositionVector, user: &UserChannel, wavelength: f64) -> f64 {
    apv.positions
        .iter()
        .map(|&u| antenna_response(u, user, wavelength).norm_sqr())
        .sum()
}

pub fn channel_table(
    apv: &AntennaPositionVector,
    realization: &ChannelRealization,
    wavelength: f64,
) -> Vec<CVec> {
    realization
        .users
        .iter()
        .map(|u| channel_vector(apv, u, wavelength))
        .collect()
}

/// Derives the seed of trial `index` from a master seed.
pub fn trial_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index.wrapping_add(0x632B_E59B_D9B4_E019)))
}

/// Derives an independent stream seed for a named purpose from a seed.
pub fn stream_seed(seed: u64, stream: u64) -> u64 {
    splitmix64(seed.wrapping_add(splitmix64(stream)))
}

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draws a channel realization: angles uniform on `[0, pi]`, distance uniform on
/// the configured range, path responses `CN(0, rho d^-alpha / L)`.
pub fn sample_realization(config: &SystemConfig, seed: u64) -> ChannelRealization {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = config.num_paths;
    let users = (0..config.num_users)
        .map(|_| {
            let distance = if config.distance_max > config.distance_min {
                rng.random_range(config.distance_min..=config.distance_max)
            } else {
                config.distance_min
            };
            let var = config.pathloss_ref * distance.powf(-config.pathloss_exp) / l as f64;
            let normal = Normal::new(0.0, (var / 2.0).sqrt()).expect("finite variance");
            let theta = (0..l).map(|_| rng.random_range(0.0..=PI)).collect();
            let phi = (0..l).map(|_| rng.random_range(0.0..=PI)).collect();
            let prv = (0..l)
                .map(|_| Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng)))
                .collect();
            UserChannel {
                theta,
                phi,
                prv,
                distance,
            }
        })
        .collect();
    ChannelRealization { users }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn user(theta: Vec<f64>, phi: Vec<f64>, prv: Vec<Complex64>) -> UserChannel {
        UserChannel {
            theta,
            phi,
            prv,
            distance: 60.0,
        }
    }

    #[test]
    fn path_difference_examples() {
        assert_eq!(path_difference([0.0, 0.0], 0.4, 2.0), 0.0);
        assert!((path_difference([1.0, 0.0], PI / 2.0, 0.0) - 1.0).abs() < 1e-15);
        let (x, y, t, p) = (0.3, -0.2, 1.1f64, 0.7f64);
        let expect = x * t.sin() * p.cos() + y * t.cos();
        assert_eq!(path_difference([x, y], t, p), expect);
    }

    #[test]
    fn frv_examples() {
        let u = user(vec![0.3, 1.2], vec![0.1, 2.0], vec![Complex64::new(1.0, 0.0); 2]);
        for g in frv([0.0, 0.0], &u, 0.1) {
            assert!((g - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        }
        let lam = 0.1;
        let u = user(vec![PI / 2.0], vec![0.0], vec![Complex64::new(1.0, 0.0)]);
        let g = frv([lam / 2.0, 0.0], &u, lam);
        assert!((g[0] - Complex64::new(-1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn gain_examples() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let u = user(
            vec![0.5, 1.0],
            vec![0.2, 0.3],
            vec![Complex64::new(s, 0.0), Complex64::new(0.0, s)],
        );
        let apv = AntennaPositionVector::new(vec![[0.0, 0.0]]);
        assert!((channel_gain(&apv, &u, 0.1) - 1.0).abs() < 1e-12);
        let h = channel_vector(&apv, &u, 0.1);
        assert!((h[0] - (u.prv[0] + u.prv[1])).norm() < 1e-12);

        let single = user(vec![0.7], vec![1.9], vec![Complex64::new(0.3, -0.4)]);
        let apv = AntennaPositionVector::new(vec![[0.01, 0.02], [-0.1, 0.05], [0.12, -0.07]]);
        assert!((channel_gain(&apv, &single, 0.1) - 3.0 * 0.25).abs() < 1e-12);
        for hm in channel_vector(&apv, &single, 0.1).iter() {
            assert!((hm.norm() - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn realization_is_deterministic_and_in_range() {
        let cfg = SystemConfig::default();
        let a = sample_realization(&cfg, 9);
        let b = sample_realization(&cfg, 9);
        assert_eq!(a, b);
        for u in &a.users {
            assert!(u.distance >= 50.0 && u.distance <= 100.0);
            assert!(u.theta.iter().chain(&u.phi).all(|x| (0.0..=PI).contains(x)));
            assert_eq!(u.prv.len(), cfg.num_paths);
        }
    }

    #[test]
    fn validation_rejects_overpacked_region() {
        let mut cfg = SystemConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.num_antennas = 50;
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("num_antennas") && err.contains("packing"));
    }
}
