//! Decoding-order determination: alternating per-antenna maximization of the
//! overall channel gain, then sorting users by gain.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{channel_gain, dist, AntennaPositionVector, ChannelRealization, SystemConfig};
use crate::frcalc::{phi_curvature_bound, phi_value, surrogate_phi_lb, PhiContext};
use crate::rates::DecodingOrder;
use crate::solver::{default_settings, spacing_halfplanes, GainQp, QpPath};

/// Largest spacing violation (meters, relative to the wavelength) repaired by projection.
pub const SNAP_TOL: f64 = 1e-6;

/// Feasible draws screened by [`best_initial_positions`].
pub const INIT_CANDIDATES: usize = 256;

/// Uniform rejection sampling of a feasible APV; falls back to a grid.
pub fn initial_positions<R: Rng>(config: &SystemConfig, rng: &mut R) -> AntennaPositionVector {
    let h = config.half_side();
    let mut pts: Vec<[f64; 2]> = Vec::with_capacity(config.num_antennas);
    let mut attempts = 0;
    while pts.len() < config.num_antennas && attempts < 10_000 {
        attempts += 1;
        let p = [rng.random_range(-h..=h), rng.random_range(-h..=h)];
        if pts.iter().all(|q| dist(*q, p) >= config.min_spacing) {
            pts.push(p);
        }
    }
    if pts.len() == config.num_antennas {
        AntennaPositionVector::new(pts)
    } else {
        grid_positions(config)
    }
}

/// Row-major subset of the grid with pitch `D` anchored at the region corner.
pub fn grid_positions(config: &SystemConfig) -> AntennaPositionVector {
    let h = config.half_side();
    let d = config.min_spacing;
    let per = ((config.region_side / d) + 1e-9).floor() as usize + 1;
    let pts = (0..config.num_antennas)
        .map(|n| [-h + d * (n % per) as f64, -h + d * (n / per) as f64])
        .collect();
    AntennaPositionVector::new(pts)
}

/// Moves `u` radially away from neighbours closer than `d` when the shortfall is
/// within the snapping tolerance, then clips it to the region. Returns `None`
/// if a larger violation remains.
pub fn snap_spacing(u: [f64; 2], others: &[[f64; 2]], config: &SystemConfig) -> Option<[f64; 2]> {
    let d = config.min_spacing;
    let h = config.half_side();
    let tol = SNAP_TOL * config.wavelength;
    let mut u = [u[0].clamp(-h, h), u[1].clamp(-h, h)];
    for _ in 0..4 {
        let mut moved = false;
        for o in others {
            let r = dist(u, *o);
            if r < d {
                if d - r > tol || r == 0.0 {
                    return None;
                }
                let s = d * (1.0 + 1e-12) / r;
                u = [o[0] + (u[0] - o[0]) * s, o[1] + (u[1] - o[1]) * s];
                u = [u[0].clamp(-h, h), u[1].clamp(-h, h)];
                moved = true;
            }
        }
        if !moved {
            return Some(u);
        }
    }
    if others.iter().all(|o| dist(u, *o) >= d) {
        Some(u)
    } else {
        None
    }
}

/// The draw of [`initial_positions`] with the largest overall channel gain
/// among `candidates` draws; the first draw wins ties.
pub fn best_initial_positions<R: Rng>(
    config: &SystemConfig,
    realization: &ChannelRealization,
    candidates: usize,
    rng: &mut R,
) -> AntennaPositionVector {
    let mut best = initial_positions(config, rng);
    let mut best_gain = total_gain(&best, realization, config.wavelength);
    for _ in 1..candidates {
        let apv = initial_positions(config, rng);
        let g = total_gain(&apv, realization, config.wavelength);
        if g > best_gain {
            best = apv;
            best_gain = g;
        }
    }
    best
}

pub fn total_gain(apv: &AntennaPositionVector, realization: &ChannelRealization, wavelength: f64) -> f64 {
    realization
        .users
        .iter()
        .map(|u| channel_gain(apv, u, wavelength))
        .sum()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageOneStats {
    pub closed_form: usize,
    pub conic: usize,
    pub fallback: usize,
    pub rejected_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageOneResult {
    pub apv: AntennaPositionVector,
    /// Overall channel gain before the first sweep and after every sweep.
    pub trace: Vec<f64>,
    pub sweeps: usize,
    pub stats: StageOneStats,
}

/// Number of curvature doublings tried when a step lowers the true gain.
const BACKTRACK_STEPS: usize = 30;

/// Alternating per-antenna surrogate maximization of `sum_k ||h_k||^2`.
pub fn optimize_positions_for_gain(
    realization: &ChannelRealization,
    config: &SystemConfig,
    init: &AntennaPositionVector,
    mut dump: Option<&mut Vec<String>>,
) -> StageOneResult {
    let ctx = PhiContext::new(realization, config.wavelength);
    let settings = default_settings();
    let global = ctx.sum.global_curvature();
    let mut apv = init.clone();
    let mut stats = StageOneStats::default();
    let mut trace = vec![total_gain(&apv, realization, config.wavelength)];
    let mut sweeps = 0;
    while sweeps < config.max_iter_stage_one {
        sweeps += 1;
        for m in 0..apv.len() {
            let anchor = apv.positions[m];
            let others: Vec<[f64; 2]> = apv
                .positions
                .iter()
                .enumerate()
                .filter(|&(n, _)| n != m)
                .map(|(_, p)| *p)
                .collect();
            let base = phi_value(&ctx, anchor);
            let mut sur = surrogate_phi_lb(&ctx, anchor);
            sur.curvature = phi_curvature_bound(&ctx, anchor).min(global);
            let mut qp = GainQp {
                surrogate: sur,
                half_side: config.half_side(),
                halfplanes: spacing_halfplanes(anchor, &others, config.min_spacing),
                wavelength: config.wavelength,
            };
            for attempt in 0..=BACKTRACK_STEPS {
                qp.surrogate = sur;
                let (cand, path) = qp.solve(&settings, dump.as_deref_mut());
                match path {
                    QpPath::ClosedForm => stats.closed_form += 1,
                    QpPath::Conic => stats.conic += 1,
                    QpPath::AnchorFallback => stats.fallback += 1,
                }
                let accepted = snap_spacing(cand, &others, config)
                    .filter(|u| phi_value(&ctx, *u) >= base);
                if let Some(u) = accepted {
                    apv.positions[m] = u;
                    break;
                }
                stats.rejected_steps += 1;
                if sur.curvature >= global || attempt == BACKTRACK_STEPS {
                    break;
                }
                sur.curvature = (2.0 * sur.curvature).max(1e-3 * global).min(global);
            }
        }
        let g = total_gain(&apv, realization, config.wavelength);
        let prev = *trace.last().unwrap();
        trace.push(g);
        if prev <= 0.0 || (g - prev) / prev < config.eps_stage_one {
            break;
        }
    }
    StageOneResult {
        apv,
        trace,
        sweeps,
        stats,
    }
}

/// Users sorted by increasing channel gain, ties by index.
pub fn determine_order(
    apv: &AntennaPositionVector,
    realization: &ChannelRealization,
    wavelength: f64,
) -> DecodingOrder {
    let gains: Vec<f64> = realization
        .users
        .iter()
        .map(|u| channel_gain(apv, u, wavelength))
        .collect();
    let mut order: Vec<usize> = (0..gains.len()).collect();
    order.sort_by(|&a, &b| gains[a].total_cmp(&gains[b]));
    DecodingOrder { order }
}
