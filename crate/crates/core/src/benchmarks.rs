//! Baseline schemes and brute-force oracles: fixed-position arrays, SDMA,
//! exhaustive and random decoding orders, exhaustive and fixed indicators.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{stream_seed, AntennaPositionVector, ChannelRealization, SystemConfig};
use crate::ga::{gene_len, gene_to_matrix, FitnessContext, GaConfig, Gene};
use crate::orchestrator::{
    run_stage_one, run_stage_two, run_with_options, IndicatorPolicy, RunOptions, RunReport, StageOneOutcome,
};
use crate::rates::{DecodingIndicatorMatrix, DecodingOrder};
use crate::CoreError;

/// Largest user count accepted by [`exhaustive_order`].
pub const MAX_ORDER_USERS: usize = 5;
/// Largest gene length accepted by [`exhaustive_indicator`].
pub const MAX_INDICATOR_BITS: usize = 12;
/// RNG stream for the random decoding order.
pub const STREAM_RANDOM_ORDER: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    NomaMa,
    NomaFpa,
    SdmaMa,
    SdmaFpa,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::NomaMa, Scheme::NomaFpa, Scheme::SdmaMa, Scheme::SdmaFpa];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::NomaMa => "NOMA-MA",
            Scheme::NomaFpa => "NOMA-FPA",
            Scheme::SdmaMa => "SDMA-MA",
            Scheme::SdmaFpa => "SDMA-FPA",
        }
    }

    pub fn is_noma(self) -> bool {
        matches!(self, Scheme::NomaMa | Scheme::NomaFpa)
    }

    pub fn moves_antennas(self) -> bool {
        matches!(self, Scheme::NomaMa | Scheme::SdmaMa)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_uppercase().replace('_', "-");
        Scheme::ALL
            .into_iter()
            .find(|sc| sc.name() == norm)
            .ok_or_else(|| CoreError::InvalidArgument(format!("unknown scheme `{s}`")))
    }
}

/// Most nearly square `rows x cols` factorization of `m` with `rows <= cols`.
fn grid_shape(m: usize) -> (usize, usize) {
    let mut rows = (m as f64).sqrt().floor() as usize;
    while rows > 1 && m % rows != 0 {
        rows -= 1;
    }
    (rows.max(1), m / rows.max(1))
}

/// Uniform planar array with half-wavelength pitch centered in the region.
pub fn fpa_positions(config: &SystemConfig) -> Result<AntennaPositionVector, CoreError> {
    let m = config.num_antennas;
    if m == 0 {
        return Err(CoreError::InvalidConfig {
            field: "num_antennas".into(),
            reason: "must be positive".into(),
        });
    }
    let pitch = config.wavelength / 2.0;
    if pitch < config.min_spacing * (1.0 - 1e-12) {
        return Err(CoreError::InvalidConfig {
            field: "min_spacing".into(),
            reason: format!("fixed array pitch {pitch} is below the minimum spacing {}", config.min_spacing),
        });
    }
    let (rows, cols) = grid_shape(m);
    let extent = (cols - 1) as f64 * pitch;
    if extent > config.region_side * (1.0 + 1e-12) {
        return Err(CoreError::InvalidConfig {
            field: "num_antennas".into(),
            reason: format!("a {rows}x{cols} fixed array spans {extent} m, wider than the region"),
        });
    }
    let offset = |n: usize, count: usize| (n as f64 - (count - 1) as f64 / 2.0) * pitch;
    let pts = (0..rows)
        .flat_map(|r| (0..cols).map(move |c| (r, c)))
        .map(|(r, c)| [offset(c, cols), offset(r, rows)])
        .collect();
    Ok(AntennaPositionVector::new(pts))
}

/// Run options that realize a scheme.
pub fn scheme_options(scheme: Scheme, config: &SystemConfig) -> Result<RunOptions, CoreError> {
    Ok(RunOptions {
        fixed_positions: if scheme.moves_antennas() {
            None
        } else {
            Some(fpa_positions(config)?)
        },
        move_antennas: scheme.moves_antennas(),
        indicator: if scheme.is_noma() {
            IndicatorPolicy::Adaptive
        } else {
            IndicatorPolicy::FixedIdentity
        },
        min_rate: None,
        dump_conic: false,
    })
}

pub fn run_scheme(
    scheme: Scheme,
    realization: &ChannelRealization,
    config: &SystemConfig,
    ga: &GaConfig,
    seed: u64,
) -> Result<RunReport, CoreError> {
    run_scheme_with(scheme, realization, config, ga, seed, false)
}

pub fn run_scheme_with(
    scheme: Scheme,
    realization: &ChannelRealization,
    config: &SystemConfig,
    ga: &GaConfig,
    seed: u64,
    dump_conic: bool,
) -> Result<RunReport, CoreError> {
    let mut options = scheme_options(scheme, config)?;
    options.dump_conic = dump_conic;
    if scheme.is_noma() {
        return run_with_options(realization, config, ga, seed, &options);
    }
    check_users(realization, config)?;
    let s1 = run_stage_one(realization, config, seed, &options, None);
    run_stage_two(
        realization,
        config,
        ga,
        seed,
        &options,
        &s1,
        &DecodingOrder::identity(realization.num_users()),
    )
}

fn check_users(realization: &ChannelRealization, config: &SystemConfig) -> Result<(), CoreError> {
    config.validate()?;
    if realization.num_users() != config.num_users {
        return Err(CoreError::InvalidArgument(format!(
            "realization has {} users, configuration expects {}",
            realization.num_users(),
            config.num_users
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderSearch {
    pub best: RunReport,
    /// Every order tried with its final sum rate.
    pub candidates: Vec<(Vec<usize>, f64)>,
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for n in 0..used.len() {
            if !used[n] {
                used[n] = true;
                prefix.push(n);
                rec(prefix, used, out);
                prefix.pop();
                used[n] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(k), &mut vec![false; k], &mut out);
    out
}

/// Stage two for every decoding order, all starting from the same stage-one
/// positions; returns the best.
pub fn exhaustive_order(
    realization: &ChannelRealization,
    config: &SystemConfig,
    ga: &GaConfig,
    seed: u64,
) -> Result<OrderSearch, CoreError> {
    check_users(realization, config)?;
    let k = realization.num_users();
    if k > MAX_ORDER_USERS {
        return Err(CoreError::CapExceeded(format!(
            "exhaustive order search supports at most {MAX_ORDER_USERS} users, got {k}"
        )));
    }
    let options = RunOptions::proposed();
    let s1 = run_stage_one(realization, config, seed, &options, None);
    let mut best: Option<RunReport> = None;
    let mut candidates = Vec::new();
    for perm in permutations(k) {
        let report = run_stage_two(realization, config, ga, seed, &options, &s1, &DecodingOrder::new(perm.clone())?)?;
        candidates.push((perm, report.sum_rate));
        if best.as_ref().is_none_or(|b| report.sum_rate > b.sum_rate) {
            best = Some(report);
        }
    }
    Ok(OrderSearch {
        best: best.expect("at least one permutation"),
        candidates,
    })
}

/// Uniformly random decoding order, otherwise the proposed algorithm.
pub fn random_order_run(
    realization: &ChannelRealization,
    config: &SystemConfig,
    ga: &GaConfig,
    seed: u64,
) -> Result<RunReport, CoreError> {
    check_users(realization, config)?;
    let options = RunOptions::proposed();
    let s1: StageOneOutcome = run_stage_one(realization, config, seed, &options, None);
    let mut order: Vec<usize> = (0..realization.num_users()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, STREAM_RANDOM_ORDER));
    order.shuffle(&mut rng);
    run_stage_two(realization, config, ga, seed, &options, &s1, &DecodingOrder::new(order)?)
}

/// Full SIC frozen, with the QoS floor removed.
pub fn fixed_indicator_run(
    realization: &ChannelRealization,
    config: &SystemConfig,
    ga: &GaConfig,
    seed: u64,
) -> Result<RunReport, CoreError> {
    let options = RunOptions {
        indicator: IndicatorPolicy::FixedFull,
        min_rate: Some(0.0),
        ..RunOptions::proposed()
    };
    run_with_options(realization, config, ga, seed, &options)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorOptimum {
    pub pi: DecodingIndicatorMatrix,
    pub fitness: f64,
    pub sum_rate: f64,
    pub candidates: usize,
}

/// Best penalized sum rate over every indicator matrix at fixed beamformers
/// and positions. Ties keep the first gene in binary counting order.
pub fn exhaustive_indicator(ctx: &FitnessContext) -> Result<IndicatorOptimum, CoreError> {
    let bits = gene_len(ctx.k);
    if bits > MAX_INDICATOR_BITS {
        return Err(CoreError::CapExceeded(format!(
            "exhaustive indicator search supports at most {MAX_INDICATOR_BITS} bits, got {bits}"
        )));
    }
    let mut best: Option<(DecodingIndicatorMatrix, f64)> = None;
    for code in 0u32..(1 << bits) {
        let gene = Gene((0..bits).map(|b| code >> b & 1 == 1).collect());
        let pi = gene_to_matrix(&gene, ctx.k)?;
        let f = ctx.evaluate(&pi);
        if best.as_ref().is_none_or(|(_, bf)| f > *bf) {
            best = Some((pi, f));
        }
    }
    let (pi, fitness) = best.expect("at least one gene");
    let sum_rate = ctx.rates(&pi).iter().sum();
    Ok(IndicatorOptimum {
        pi,
        fitness,
        sum_rate,
        candidates: 1 << bits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fpa_examples() {
        let mut cfg = SystemConfig::default();
        let l = cfg.wavelength;
        let apv = fpa_positions(&cfg).unwrap();
        let expect = [[-l / 4.0, -l / 4.0], [l / 4.0, -l / 4.0], [-l / 4.0, l / 4.0], [l / 4.0, l / 4.0]];
        for (p, e) in apv.positions.iter().zip(expect) {
            assert!((p[0] - e[0]).abs() < 1e-15 && (p[1] - e[1]).abs() < 1e-15);
        }
        cfg.num_antennas = 2;
        let apv = fpa_positions(&cfg).unwrap();
        assert_eq!(apv.positions[0][1], 0.0);
        assert!((apv.positions[1][0] - apv.positions[0][0] - l / 2.0).abs() < 1e-15);
        cfg.num_antennas = 13;
        assert!(fpa_positions(&cfg).is_err());
    }

    #[test]
    fn grid_shapes() {
        assert_eq!(grid_shape(1), (1, 1));
        assert_eq!(grid_shape(6), (2, 3));
        assert_eq!(grid_shape(9), (3, 3));
        assert_eq!(grid_shape(7), (1, 7));
    }

    #[test]
    fn permutations_are_complete() {
        let p = permutations(3);
        assert_eq!(p.len(), 6);
        let mut q = p.clone();
        q.sort();
        q.dedup();
        assert_eq!(q.len(), 6);
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
        }
        assert!("TDMA".parse::<Scheme>().is_err());
    }
}
