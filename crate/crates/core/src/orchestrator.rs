//! Two-stage algorithm: decoding order from channel-gain maximization, then
//! alternating beamforming, antenna-position and decoding-indicator updates.
//!
//! Every step is wrapped in a revert-on-decrease safeguard, so the reported
//! sum-rate trace is monotone. When the QoS targets are violated at the start,
//! an elastic restoration phase runs first and the trace begins at the first
//! QoS-feasible iterate.

use std::time::Instant;

use manoma_conic::{solve, ConicProblem, Settings};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{
    channel_table, stream_seed, AntennaPositionVector, CVec, ChannelRealization, SystemConfig,
};
use crate::frcalc::{
    build_gamma_context, gamma_curvature_bound, surrogate_gamma_lb, surrogate_upsilon_ub, upsilon_curvature,
    GammaContext,
};
use crate::ga::{run_ga, FitnessContext, GaConfig, QOS_TOL};
use crate::rates::{gain_table, rates_from_table, upsilon_from_table, DecodingIndicatorMatrix, DecodingOrder};
use crate::solver::{
    build_beamforming_sdp, build_position_program, default_settings, extract_rank_one, gaussian_randomization,
    spacing_halfplanes, BeamformingSdp, PairSurrogates, PositionProgram, Qos, RankRefinement, SlackAnchors, ALPHA_CLAMP,
};
use crate::stage_one::{
    best_initial_positions, determine_order, optimize_positions_for_gain, snap_spacing, total_gain, StageOneStats, INIT_CANDIDATES,
};
use crate::CoreError;

/// RNG stream for the initial antenna positions.
pub const STREAM_INIT: u64 = 1;
/// RNG stream for the GA and Gaussian randomization.
pub const STREAM_STAGE_TWO: u64 = 2;
/// Maximum number of restoration iterations before QoS is relaxed.
pub const RESTORE_ITERS: usize = 10;
/// Per-bit penalty on QoS slack during restoration.
pub const RESTORE_PENALTY: f64 = 100.0;
/// Gaussian-randomization draws when an SDP solution is not rank one.
pub const RANDOMIZATION_DRAWS: usize = 100;
/// Normalized trace below which a beamforming matrix counts as switched off.
pub const NEGLIGIBLE_TRACE: f64 = 1e-8;
/// Relative objective loss allowed in the rank-refinement pass.
pub const REFINE_SLACK: f64 = 1e-4;
/// Multipliers of the anchor-local curvature tried before the global bound.
const POSITION_INFLATION: [f64; 3] = [1.0, 4.0, 16.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IndicatorPolicy {
    /// GA search with strict-improvement acceptance, starting from `Pi = I`.
    Adaptive,
    /// Full SIC, frozen.
    FixedFull,
    /// No SIC (`Pi = I`), frozen.
    FixedIdentity,
}

/// Switches that turn the proposed algorithm into the benchmark schemes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    /// Positions used as-is instead of running stage one.
    pub fixed_positions: Option<AntennaPositionVector>,
    /// Optimize positions in stage two.
    pub move_antennas: bool,
    pub indicator: IndicatorPolicy,
    /// Overrides `SystemConfig::min_rate`.
    pub min_rate: Option<f64>,
    /// Keep a text listing of every conic problem solved.
    pub dump_conic: bool,
}

impl RunOptions {
    pub fn proposed() -> Self {
        RunOptions {
            fixed_positions: None,
            move_antennas: true,
            indicator: IndicatorPolicy::Adaptive,
            min_rate: None,
            dump_conic: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub sdp_solves: usize,
    pub sdp_optimal: usize,
    /// Largest `lambda_2 / lambda_1` over users, one entry per optimal SDP solve.
    pub rank_one_ratios: Vec<f64>,
    pub randomizations: usize,
    pub beamforming_accepted: usize,
    pub position_solves: usize,
    pub position_optimal: usize,
    pub position_accepted: usize,
    pub ga_runs: usize,
    pub indicator_accepted: usize,
}

/// Invariant quantities of one reported iterate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterateRecord {
    pub sum_rate: f64,
    pub power: f64,
    pub min_spacing: f64,
    pub max_abs_coordinate: f64,
    pub indicator_valid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    /// `order[k]` is the original index of the user decoded `k`-th.
    pub order: Vec<usize>,
    pub apv: AntennaPositionVector,
    /// Beamformers by decoding position, entries as `[re, im]`.
    pub beamformers: Vec<Vec<[f64; 2]>>,
    pub indicator: Vec<Vec<u8>>,
    /// Rates by decoding position.
    pub rates: Vec<f64>,
    pub sum_rate: f64,
    pub sum_rate_trace: Vec<f64>,
    pub stage_one_trace: Vec<f64>,
    pub stage_one_sweeps: usize,
    pub stage_one_stats: StageOneStats,
    pub iterations: usize,
    pub restoration_iterations: usize,
    pub min_rate: f64,
    /// QoS targets could not be met and the run continued with `R_min = 0`.
    pub qos_relaxed: bool,
    pub excluded: bool,
    pub exclusion_reason: Option<String>,
    pub iterates: Vec<IterateRecord>,
    pub solver: SolverStats,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub conic_dumps: Vec<String>,
    pub wall_clock_s: f64,
}

impl RunReport {
    pub fn initial_sum_rate(&self) -> f64 {
        self.sum_rate_trace.first().copied().unwrap_or(0.0)
    }

    pub fn beamformer_vectors(&self) -> Vec<CVec> {
        self.beamformers
            .iter()
            .map(|w| CVec::from_iterator(w.len(), w.iter().map(|z| Complex64::new(z[0], z[1]))))
            .collect()
    }

    pub fn indicator_matrix(&self) -> Result<DecodingIndicatorMatrix, CoreError> {
        DecodingIndicatorMatrix::from_rows(&self.indicator)
    }
}

/// Result of the order-determination stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageOneOutcome {
    pub apv: AntennaPositionVector,
    pub order: DecodingOrder,
    pub trace: Vec<f64>,
    pub sweeps: usize,
    pub stats: StageOneStats,
}

pub fn run_stage_one(
    realization: &ChannelRealization,
    config: &SystemConfig,
    seed: u64,
    options: &RunOptions,
    dumps: Option<&mut Vec<String>>,
) -> StageOneOutcome {
    let (apv, trace, sweeps, stats) = match &options.fixed_positions {
        Some(p) => (
            p.clone(),
            vec![total_gain(p, realization, config.wavelength)],
            0,
            StageOneStats::default(),
        ),
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, STREAM_INIT));
            let init = best_initial_positions(config, realization, INIT_CANDIDATES, &mut rng);
            let r = optimize_positions_for_gain(realization, config, &init, dumps);
            (r.apv, r.trace, r.sweeps, r.stats)
        }
    };
    let order = determine_order(&apv, realization, config.wavelength);
    StageOneOutcome {
        apv,
        order,
        trace,
        sweeps,
        stats,
    }
}

/// Tight anchors from a gain table: `alpha = sigma_i^2 / Gamma`, `beta = Upsilon / sigma_i^2`.
pub fn anchors_from_table(table: &DMatrix<f64>, pi: &DecodingIndicatorMatrix, noise: &[f64]) -> SlackAnchors {
    let pairs = pi.active_pairs();
    let mut alpha = Vec::with_capacity(pairs.len());
    let mut beta = Vec::with_capacity(pairs.len());
    for &(k, i) in &pairs {
        let g = table[(k, i)];
        let a = if g > 0.0 { (noise[i] / g).min(ALPHA_CLAMP) } else { ALPHA_CLAMP };
        if a >= ALPHA_CLAMP {
            log::warn!("pair ({k}, {i}) has negligible signal power; anchor clamped");
        }
        alpha.push(a);
        beta.push(upsilon_from_table(table, pi, noise, k, i) / noise[i]);
    }
    SlackAnchors { pairs, alpha, beta }
}

pub fn refresh_anchors(
    w_set: &[CVec],
    apv: &AntennaPositionVector,
    pi: &DecodingIndicatorMatrix,
    realization: &ChannelRealization,
    config: &SystemConfig,
) -> SlackAnchors {
    let h = channel_table(apv, realization, config.wavelength);
    anchors_from_table(&gain_table(&h, w_set), pi, &config.noise_table())
}

/// Equal-power maximum-ratio transmission.
pub fn mrt_beamformers(h: &[CVec], power: f64) -> Vec<CVec> {
    let k = h.len().max(1) as f64;
    h.iter()
        .map(|hk| {
            let n = hk.norm();
            if n > 0.0 {
                hk * Complex64::new((power / k).sqrt() / n, 0.0)
            } else {
                CVec::zeros(hk.len())
            }
        })
        .collect()
}

pub fn total_power(w: &[CVec]) -> f64 {
    w.iter().map(|x| x.norm_squared()).sum()
}

/// Mutable iterate of stage two, with users indexed by decoding position.
#[derive(Debug, Clone)]
pub struct State {
    pub apv: AntennaPositionVector,
    pub w: Vec<CVec>,
    pub pi: DecodingIndicatorMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Goal {
    /// Keep every rate at or above the target and do not lower the sum rate.
    Maintain(f64),
    /// Reduce the total QoS deficit.
    Restore(f64),
}

fn sum(r: &[f64]) -> f64 {
    r.iter().sum()
}

fn deficit(r: &[f64], target: f64) -> f64 {
    r.iter().map(|x| (target - x).max(0.0)).sum()
}

fn violations(r: &[f64], target: f64) -> usize {
    r.iter().filter(|&&x| x < target - QOS_TOL).count()
}

pub fn qos_satisfied(r: &[f64], target: f64) -> bool {
    target <= 0.0 || violations(r, target) == 0
}

fn improves(goal: Goal, new: &[f64], old: &[f64]) -> bool {
    match goal {
        Goal::Maintain(t) => qos_satisfied(new, t) && sum(new) >= sum(old),
        Goal::Restore(t) => {
            let (dn, dold) = (deficit(new, t), deficit(old, t));
            dn < dold - 1e-12 || (dn <= dold && sum(new) >= sum(old))
        }
    }
}

fn merit(goal: Goal, r: &[f64]) -> f64 {
    match goal {
        Goal::Maintain(_) => sum(r),
        Goal::Restore(t) => sum(r) - RESTORE_PENALTY * deficit(r, t),
    }
}

struct Engine<'a> {
    config: &'a SystemConfig,
    ga: &'a GaConfig,
    real: ChannelRealization,
    noise: Vec<f64>,
    rng: ChaCha8Rng,
    settings: Settings,
    stats: SolverStats,
    dumps: Option<Vec<String>>,
}

impl Engine<'_> {
    fn channels(&self, apv: &AntennaPositionVector) -> Vec<CVec> {
        channel_table(apv, &self.real, self.config.wavelength)
    }

    fn rates_with(&self, h: &[CVec], w: &[CVec], pi: &DecodingIndicatorMatrix) -> Vec<f64> {
        rates_from_table(&gain_table(h, w), pi, &self.noise)
    }

    fn rates(&self, st: &State) -> Vec<f64> {
        self.rates_with(&self.channels(&st.apv), &st.w, &st.pi)
    }

    fn record(&self, st: &State) -> IterateRecord {
        IterateRecord {
            sum_rate: sum(&self.rates(st)),
            power: total_power(&st.w),
            min_spacing: st.apv.min_pairwise_distance(),
            max_abs_coordinate: st
                .apv
                .positions
                .iter()
                .flat_map(|p| [p[0].abs(), p[1].abs()])
                .fold(0.0, f64::max),
            indicator_valid: st.pi.validate().is_ok(),
        }
    }

    fn dump(&mut self, label: &str, prob: &ConicProblem) {
        if let Some(d) = self.dumps.as_mut() {
            d.push(format!("# {label}\n{}", prob.dump()));
        }
    }

    fn qos_for(goal: Goal, current: &[f64]) -> Qos {
        match goal {
            Goal::Maintain(t) => Qos::Floors(
                current
                    .iter()
                    .map(|&r| if t > 0.0 { (t - 1e-9).min(r) } else { 0.0 })
                    .collect(),
            ),
            Goal::Restore(t) => Qos::Elastic {
                r_min: t,
                penalty: RESTORE_PENALTY,
            },
        }
    }

    /// Solves the beamforming SDP; returns the normalized matrices and the objective.
    fn solve_sdp(&mut self, input: &BeamformingSdp, label: &str) -> Option<(Vec<DMatrix<Complex64>>, f64)> {
        let (prob, layout) = build_beamforming_sdp(input);
        self.dump(label, &prob);
        let sol = solve(&prob, &self.settings);
        if !sol.is_optimal() {
            log::debug!("{label} solve ended with {:?}", sol.status);
            return None;
        }
        Some((layout.w.iter().map(|hv| hv.read(&sol)).collect(), sol.objective))
    }

    /// Principal-eigenvector beamformers, the worst rank-one ratio, and whether
    /// every non-negligible matrix is numerically rank one.
    fn extract(mats: &[DMatrix<Complex64>], p: f64) -> Option<(Vec<CVec>, f64, bool)> {
        let mut cand = Vec::with_capacity(mats.len());
        let mut worst = 0.0f64;
        let mut rank_one = true;
        for m in mats {
            let r1 = extract_rank_one(m).ok()?;
            if m.trace().re >= NEGLIGIBLE_TRACE {
                worst = worst.max(r1.ratio);
                rank_one &= r1.principal;
            }
            cand.push(r1.w * Complex64::new(p.sqrt(), 0.0));
        }
        Some((cand, worst, rank_one))
    }

    fn step_beamforming(&mut self, st: &mut State, goal: Goal) -> bool {
        let p = self.config.max_power;
        let h = self.channels(&st.apv);
        let table = gain_table(&h, &st.w);
        let old = rates_from_table(&table, &st.pi, &self.noise);
        let anchors = anchors_from_table(&table, &st.pi, &self.noise);
        let h_norm: Vec<CVec> = h
            .iter()
            .zip(&self.noise)
            .map(|(hi, s)| hi * Complex64::new((p / s).sqrt(), 0.0))
            .collect();
        let mut input = BeamformingSdp {
            h_norm: &h_norm,
            pi: &st.pi,
            anchors: &anchors,
            qos: Self::qos_for(goal, &old),
            refine: None,
        };
        self.stats.sdp_solves += 1;
        let Some((mut mats, objective)) = self.solve_sdp(&input, "beamforming") else {
            return false;
        };
        self.stats.sdp_optimal += 1;
        let Some((mut cand, mut worst, mut rank_one)) = Self::extract(&mats, p) else {
            return false;
        };
        if !rank_one {
            input.refine = Some(RankRefinement {
                min_objective: objective - REFINE_SLACK * (1.0 + objective.abs()),
                projectors: mats.iter().map(complement_projector).collect(),
            });
            if let Some((m2, _)) = self.solve_sdp(&input, "beamforming refinement") {
                if let Some((c2, w2, r2)) = Self::extract(&m2, p) {
                    if w2 < worst {
                        mats = m2;
                        cand = c2;
                        worst = w2;
                        rank_one = r2;
                    }
                }
            }
        }
        self.stats.rank_one_ratios.push(worst);
        clip_power(&mut cand, p);
        let mut best_rates = self.rates_with(&h, &cand, &st.pi);
        if !rank_one {
            self.stats.randomizations += 1;
            let scaled: Vec<DMatrix<Complex64>> = mats.iter().map(|m| m * Complex64::new(p, 0.0)).collect();
            let noise = self.noise.clone();
            let pi = st.pi.clone();
            let score = |c: &[CVec]| {
                let r = rates_from_table(&gain_table(&h, c), &pi, &noise);
                Some(merit(goal, &r))
            };
            if let Some((w, v)) = gaussian_randomization(&scaled, p, RANDOMIZATION_DRAWS, &mut self.rng, score) {
                if v > merit(goal, &best_rates) {
                    cand = w;
                    best_rates = self.rates_with(&h, &cand, &st.pi);
                }
            }
        }
        if improves(goal, &best_rates, &old) {
            st.w = cand;
            self.stats.beamforming_accepted += 1;
            true
        } else {
            false
        }
    }

    fn step_positions(&mut self, st: &mut State, goal: Goal) -> usize {
        (0..st.apv.len()).filter(|&m| self.move_antenna(st, m, goal)).count()
    }

    fn move_antenna(&mut self, st: &mut State, m: usize, goal: Goal) -> bool {
        let cfg = self.config;
        let lam = cfg.wavelength;
        let kk = self.real.num_users();
        let h = self.channels(&st.apv);
        let table = gain_table(&h, &st.w);
        let old = rates_from_table(&table, &st.pi, &self.noise);
        let anchors = anchors_from_table(&table, &st.pi, &self.noise);
        let anchor = st.apv.positions[m];
        let others: Vec<[f64; 2]> = st
            .apv
            .positions
            .iter()
            .enumerate()
            .filter(|&(n, _)| n != m)
            .map(|(_, p)| *p)
            .collect();
        // contexts[i][j]: Gamma_{j,i} as a function of u_m
        let mut contexts: Vec<Option<Vec<GammaContext>>> = vec![None; kk];
        for &(_, i) in &anchors.pairs {
            if contexts[i].is_none() {
                let mut row = Vec::with_capacity(kk);
                for j in 0..kk {
                    match build_gamma_context(&st.w, &st.apv, &self.real, lam, m, j, i) {
                        Ok(c) => row.push(c),
                        Err(_) => return false,
                    }
                }
                contexts[i] = Some(row);
            }
        }
        let halfplanes = spacing_halfplanes(anchor, &others, cfg.min_spacing);
        let levels = POSITION_INFLATION.len() + 1;
        for level in 0..levels {
            let pairs: Vec<PairSurrogates> = anchors
                .pairs
                .iter()
                .enumerate()
                .map(|(p, &(k, i))| {
                    let s = self.noise[i];
                    let row = contexts[i].as_ref().expect("context built for every decoder");
                    let mut g = surrogate_gamma_lb(&row[k], anchor);
                    let mut u = surrogate_upsilon_ub(row, &st.pi, k, i, s, anchor);
                    if let Some(&scale) = POSITION_INFLATION.get(level) {
                        let local: Vec<f64> = row.iter().map(|c| gamma_curvature_bound(c, anchor)).collect();
                        g.curvature = g.curvature.min(scale * local[k]);
                        u.curvature = u.curvature.min(scale * upsilon_curvature(&local, &st.pi, k, i));
                    }
                    for q in [&mut g, &mut u] {
                        q.value /= s;
                        q.grad /= s;
                        q.curvature /= s;
                    }
                    PairSurrogates {
                        k,
                        i,
                        alpha_t: anchors.alpha[p],
                        beta_t: anchors.beta[p],
                        gamma: g,
                        upsilon: u,
                    }
                })
                .collect();
            let program = PositionProgram {
                anchor,
                wavelength: lam,
                half_side: cfg.half_side(),
                halfplanes: halfplanes.clone(),
                num_users: kk,
                pairs,
                qos: Self::qos_for(goal, &old),
            };
            let (prob, layout) = build_position_program(&program);
            self.dump(&format!("position m={m}"), &prob);
            let sol = solve(&prob, &self.settings);
            self.stats.position_solves += 1;
            if !sol.is_optimal() {
                return false;
            }
            self.stats.position_optimal += 1;
            let u = [
                anchor[0] + lam * sol.var(layout.dx),
                anchor[1] + lam * sol.var(layout.dy),
            ];
            let Some(u) = snap_spacing(u, &others, cfg) else {
                continue;
            };
            let mut apv = st.apv.clone();
            apv.positions[m] = u;
            let new = self.rates_with(&self.channels(&apv), &st.w, &st.pi);
            if improves(goal, &new, &old) {
                st.apv = apv;
                self.stats.position_accepted += 1;
                return true;
            }
        }
        false
    }

    fn step_indicator(&mut self, st: &mut State, goal: Goal) -> Result<bool, CoreError> {
        let target = match goal {
            Goal::Maintain(t) | Goal::Restore(t) => t,
        };
        let ctx = FitnessContext::new(&st.w, &st.apv, &self.real, self.config, target, self.ga.penalty);
        let res = run_ga(&ctx, self.ga, &mut self.rng)?;
        self.stats.ga_runs += 1;
        let old = ctx.rates(&st.pi);
        let new = ctx.rates(&res.pi);
        let accept = match goal {
            Goal::Maintain(t) => sum(&new) > sum(&old) && violations(&new, t) <= violations(&old, t),
            Goal::Restore(_) => improves(goal, &new, &old) && res.pi != st.pi && merit(goal, &new) > merit(goal, &old),
        };
        if accept {
            st.pi = res.pi;
            self.stats.indicator_accepted += 1;
        }
        Ok(accept)
    }
}

/// `I - v v^H` for the principal unit eigenvector `v` of `w`.
fn complement_projector(w: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let n = w.nrows();
    let eig = nalgebra::SymmetricEigen::new((w + w.adjoint()) * Complex64::new(0.5, 0.0));
    let top = eig.eigenvalues.imax();
    let v = eig.eigenvectors.column(top).into_owned();
    DMatrix::identity(n, n) - &v * v.adjoint()
}

fn clip_power(w: &mut [CVec], p: f64) {
    let tot = total_power(w);
    if tot > p {
        let s = Complex64::new((p / tot).sqrt(), 0.0);
        for x in w.iter_mut() {
            *x *= s;
        }
    }
}

fn complex_rows(w: &[CVec]) -> Vec<Vec<[f64; 2]>> {
    w.iter().map(|x| x.iter().map(|z| [z.re, z.im]).collect()).collect()
}

/// Stage two for a given order, starting from the stage-one positions.
pub fn run_stage_two(
    realization: &ChannelRealization,
    config: &SystemConfig,
    ga: &GaConfig,
    seed: u64,
    options: &RunOptions,
    stage_one: &StageOneOutcome,
    order: &DecodingOrder,
) -> Result<RunReport, CoreError> {
    config.validate()?;
    ga.validate()?;
    let order = DecodingOrder::new(order.order.clone())?;
    if order.order.len() != realization.num_users() {
        return Err(CoreError::InvalidArgument(format!(
            "order has {} entries for {} users",
            order.order.len(),
            realization.num_users()
        )));
    }
    let start = Instant::now();
    let kk = realization.num_users();
    let r_min = options.min_rate.unwrap_or(config.min_rate);
    let mut eng = Engine {
        config,
        ga,
        real: realization.reordered(&order.order),
        noise: config.noise_table(),
        rng: ChaCha8Rng::seed_from_u64(stream_seed(seed, STREAM_STAGE_TWO)),
        settings: default_settings(),
        stats: SolverStats::default(),
        dumps: options.dump_conic.then(Vec::new),
    };
    let h0 = eng.channels(&stage_one.apv);
    let mut st = State {
        apv: stage_one.apv.clone(),
        w: mrt_beamformers(&h0, config.max_power),
        pi: match options.indicator {
            IndicatorPolicy::FixedFull => DecodingIndicatorMatrix::full(kk),
            _ => DecodingIndicatorMatrix::identity(kk),
        },
    };
    let adaptive = options.indicator == IndicatorPolicy::Adaptive && kk > 1;

    let mut restoration_iterations = 0;
    let mut r_eff = r_min;
    if r_min > 0.0 && !qos_satisfied(&eng.rates(&st), r_min) {
        let goal = Goal::Restore(r_min);
        while restoration_iterations < RESTORE_ITERS {
            restoration_iterations += 1;
            eng.step_beamforming(&mut st, goal);
            if options.move_antennas && !qos_satisfied(&eng.rates(&st), r_min) {
                eng.step_positions(&mut st, goal);
            }
            if adaptive && !qos_satisfied(&eng.rates(&st), r_min) {
                eng.step_indicator(&mut st, goal)?;
            }
            if qos_satisfied(&eng.rates(&st), r_min) {
                break;
            }
        }
        if !qos_satisfied(&eng.rates(&st), r_min) {
            log::warn!("QoS target {r_min} unattainable after restoration; continuing without it");
            r_eff = 0.0;
        }
    }
    let qos_relaxed = r_eff != r_min;

    let goal = Goal::Maintain(r_eff);
    let mut trace = vec![sum(&eng.rates(&st))];
    let mut iterates = vec![eng.record(&st)];
    let mut iterations = 0;
    while iterations < config.max_iter_stage_two {
        iterations += 1;
        eng.step_beamforming(&mut st, goal);
        if options.move_antennas {
            eng.step_positions(&mut st, goal);
        }
        if adaptive {
            eng.step_indicator(&mut st, goal)?;
        }
        let prev = *trace.last().expect("trace is never empty");
        let cur = sum(&eng.rates(&st));
        trace.push(cur);
        iterates.push(eng.record(&st));
        let stop = if prev > 0.0 {
            (cur - prev) / prev < config.eps_stage_two
        } else {
            cur <= prev
        };
        if stop {
            break;
        }
    }
    if options.move_antennas && eng.step_beamforming(&mut st, goal) {
        trace.push(sum(&eng.rates(&st)));
        iterates.push(eng.record(&st));
    }

    let rates = eng.rates(&st);
    let (excluded, exclusion_reason) = if eng.stats.sdp_optimal == 0 {
        (true, Some("no beamforming solve reached optimality".to_string()))
    } else {
        (false, None)
    };
    Ok(RunReport {
        order: order.order,
        apv: st.apv,
        beamformers: complex_rows(&st.w),
        indicator: st.pi.rows(),
        sum_rate: sum(&rates),
        rates,
        sum_rate_trace: trace,
        stage_one_trace: stage_one.trace.clone(),
        stage_one_sweeps: stage_one.sweeps,
        stage_one_stats: stage_one.stats.clone(),
        iterations,
        restoration_iterations,
        min_rate: r_min,
        qos_relaxed,
        excluded,
        exclusion_reason,
        iterates,
        solver: eng.stats,
        conic_dumps: eng.dumps.unwrap_or_default(),
        wall_clock_s: start.elapsed().as_secs_f64(),
    })
}

/// Stage one followed by stage two with the options of a scheme.
pub fn run_with_options(
    realization: &ChannelRealization,
    config: &SystemConfig,
    ga: &GaConfig,
    seed: u64,
    options: &RunOptions,
) -> Result<RunReport, CoreError> {
    config.validate()?;
    if realization.num_users() != config.num_users {
        return Err(CoreError::InvalidArgument(format!(
            "realization has {} users, configuration expects {}",
            realization.num_users(),
            config.num_users
        )));
    }
    let start = Instant::now();
    let mut dumps = Vec::new();
    let s1 = run_stage_one(
        realization,
        config,
        seed,
        options,
        options.dump_conic.then_some(&mut dumps),
    );
    let mut report = run_stage_two(realization, config, ga, seed, options, &s1, &s1.order)?;
    if options.dump_conic {
        dumps.append(&mut report.conic_dumps);
        report.conic_dumps = dumps;
    }
    report.wall_clock_s = start.elapsed().as_secs_f64();
    Ok(report)
}

/// The proposed two-stage algorithm.
pub fn run_two_stage(
    realization: &ChannelRealization,
    config: &SystemConfig,
    ga: &GaConfig,
    seed: u64,
) -> Result<RunReport, CoreError> {
    run_with_options(realization, config, ga, seed, &RunOptions::proposed())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::sample_realization;
    use crate::frcalc::rate_surrogate_theta;

    #[test]
    fn anchors_reproduce_rates() {
        let cfg = SystemConfig::default();
        let real = sample_realization(&cfg, 5);
        let apv = crate::stage_one::grid_positions(&cfg);
        let h = channel_table(&apv, &real, cfg.wavelength);
        let w = mrt_beamformers(&h, cfg.max_power);
        let pi = DecodingIndicatorMatrix::full(cfg.num_users);
        let table = gain_table(&h, &w);
        let noise = cfg.noise_table();
        let a = anchors_from_table(&table, &pi, &noise);
        for (p, &(k, i)) in a.pairs.iter().enumerate() {
            let theta = rate_surrogate_theta(a.alpha[p], a.beta[p], a.alpha[p], a.beta[p]).unwrap();
            let direct = (1.0 + table[(k, i)] / upsilon_from_table(&table, &pi, &noise, k, i)).log2();
            assert!((theta - direct).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_beamformers_clamp() {
        let cfg = SystemConfig::default();
        let real = sample_realization(&cfg, 6);
        let apv = crate::stage_one::grid_positions(&cfg);
        let w = vec![CVec::zeros(cfg.num_antennas); cfg.num_users];
        let pi = DecodingIndicatorMatrix::identity(cfg.num_users);
        let a = refresh_anchors(&w, &apv, &pi, &real, &cfg);
        for p in 0..a.pairs.len() {
            assert_eq!(a.alpha[p], ALPHA_CLAMP);
            let theta = rate_surrogate_theta(a.alpha[p], a.beta[p], a.alpha[p], a.beta[p]).unwrap();
            assert!(theta.is_finite() && theta < 1e-9);
        }
    }
}
