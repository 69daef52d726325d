//! Verification suites: finite-difference calculus checks, curvature
//! dominance, surrogate one-sidedness, conic solver unit problems,
//! closed-form and brute-force oracles, and run invariants.
//!
//! The checkers are generic over the function under test, so a deliberately
//! broken implementation can be fed through the same path.

use std::time::Instant;

use manoma_conic::{mat_to_svec, solve, svec_len, LinExpr, ProblemBuilder, Settings, Status};
use manoma_core::benchmarks::exhaustive_indicator;
use manoma_core::channel::{
    channel_gain, sample_realization, trial_seed, AntennaPositionVector, CVec, ChannelRealization,
    SystemConfig,
};
use manoma_core::frcalc::{
    build_gamma_context, gamma_curvature_bound, gamma_grad, gamma_hess, gamma_value, lambda_max_2x2,
    phi_curvature_bound, phi_grad, phi_hess, phi_value, rate_surrogate_theta, surrogate_distance_lb,
    surrogate_gamma_lb, surrogate_phi_lb, surrogate_upsilon_ub, upsilon_curvature, upsilon_grad, upsilon_hess,
    upsilon_value, GammaContext, PhiContext,
};
use manoma_core::ga::{gene_len, gene_to_matrix, run_ga, FitnessContext, GaConfig, Gene};
use manoma_core::orchestrator::{run_two_stage, RunReport};
use manoma_core::rates::DecodingIndicatorMatrix;
use manoma_core::stage_one::initial_positions;
use nalgebra::{DMatrix, Matrix2, SymmetricEigen, Vector2};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

/// Relative tolerance for closed-form gradients against central differences.
pub const GRADIENT_TOL: f64 = 1e-5;
/// Relative tolerance for closed-form Hessians against differences of the gradient.
pub const HESSIAN_TOL: f64 = 1e-4;
/// Central-difference step as a fraction of the wavelength.
pub const FD_STEP: f64 = 1e-6;
/// Relative slack for anchor equality and one-sidedness checks.
pub const SURROGATE_TOL: f64 = 1e-9;
/// Residual bound for the conic unit problems.
pub const SOLVER_RESIDUAL_TOL: f64 = 1e-7;
/// Agreement between the SDP and a dense eigensolver.
pub const EIGEN_TOL: f64 = 1e-6;

/// Fault injected into a suite to show that it can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mutation {
    None,
    /// Negates the y-component of the closed-form channel-gain gradient.
    FlipGainGradient,
    /// Sets a bit below the diagonal of every reported indicator matrix.
    LowerTriangleBit,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub module: String,
    pub operation: String,
    pub instances: usize,
    /// Largest error statistic observed (meaning depends on the suite).
    pub worst: f64,
    pub threshold: f64,
    pub failures: Vec<String>,
    pub elapsed_s: f64,
}

impl SuiteReport {
    fn new(suite: &str, module: &str, operation: &str, threshold: f64) -> Self {
        SuiteReport {
            suite: suite.into(),
            module: module.into(),
            operation: operation.into(),
            instances: 0,
            worst: 0.0,
            threshold,
            failures: Vec::new(),
            elapsed_s: 0.0,
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.instances > 0
    }

    /// Records one instance whose statistic must not exceed the threshold.
    fn observe(&mut self, seed: u64, what: &str, value: f64) {
        self.instances += 1;
        if value.is_nan() || value > self.worst {
            self.worst = value;
        }
        if !(value <= self.threshold) {
            self.failures.push(format!(
                "{}::{} seed {seed}: {what} = {value:.3e} exceeds {:.1e}",
                self.module, self.operation, self.threshold
            ));
        }
    }

    fn fail(&mut self, seed: u64, what: impl AsRef<str>) {
        self.instances += 1;
        self.failures
            .push(format!("{}::{} seed {seed}: {}", self.module, self.operation, what.as_ref()));
    }

    fn pass(&mut self) {
        self.instances += 1;
    }

    fn finish(mut self, start: Instant) -> Self {
        self.elapsed_s = start.elapsed().as_secs_f64();
        self
    }
}

/// Central-difference gradient of `f` at `u` with step `h`.
pub fn fd_gradient<F: Fn([f64; 2]) -> f64>(f: &F, u: [f64; 2], h: f64) -> Vector2<f64> {
    Vector2::new(
        (f([u[0] + h, u[1]]) - f([u[0] - h, u[1]])) / (2.0 * h),
        (f([u[0], u[1] + h]) - f([u[0], u[1] - h])) / (2.0 * h),
    )
}

/// Central-difference Jacobian of a gradient map, symmetrized.
pub fn fd_hessian<G: Fn([f64; 2]) -> Vector2<f64>>(g: &G, u: [f64; 2], h: f64) -> Matrix2<f64> {
    let cx = (g([u[0] + h, u[1]]) - g([u[0] - h, u[1]])) / (2.0 * h);
    let cy = (g([u[0], u[1] + h]) - g([u[0], u[1] - h])) / (2.0 * h);
    let m = Matrix2::from_columns(&[cx, cy]);
    (m + m.transpose()) * 0.5
}

/// Second differences of `f` itself.
pub fn fd_hessian_from_values<F: Fn([f64; 2]) -> f64>(f: &F, u: [f64; 2], h: f64) -> Matrix2<f64> {
    let f0 = f(u);
    let fxx = (f([u[0] + h, u[1]]) - 2.0 * f0 + f([u[0] - h, u[1]])) / (h * h);
    let fyy = (f([u[0], u[1] + h]) - 2.0 * f0 + f([u[0], u[1] - h])) / (h * h);
    let fxy = (f([u[0] + h, u[1] + h]) - f([u[0] + h, u[1] - h]) - f([u[0] - h, u[1] + h])
        + f([u[0] - h, u[1] - h]))
        / (4.0 * h * h);
    Matrix2::new(fxx, fxy, fxy, fyy)
}

/// `||g - fd|| / max(||fd||, floor)`.
pub fn gradient_error<F, G>(f: &F, g: &G, u: [f64; 2], h: f64, floor: f64) -> f64
where
    F: Fn([f64; 2]) -> f64,
    G: Fn([f64; 2]) -> Vector2<f64>,
{
    let fd = fd_gradient(f, u, h);
    (g(u) - fd).norm() / fd.norm().max(floor)
}

/// `||H - fd||_F / max(||fd||_F, floor)` with `fd` differenced from `g`.
pub fn hessian_error<G, H>(g: &G, hess: &H, u: [f64; 2], h: f64, floor: f64) -> f64
where
    G: Fn([f64; 2]) -> Vector2<f64>,
    H: Fn([f64; 2]) -> Matrix2<f64>,
{
    let fd = fd_hessian(g, u, h);
    (hess(u) - fd).norm() / fd.norm().max(floor)
}

/// Random calculus instance: a channel, antennas, beamformers, an indicator
/// matrix, a selected antenna and user pair, and an evaluation point.
pub struct CalcInstance {
    pub seed: u64,
    pub config: SystemConfig,
    pub realization: ChannelRealization,
    pub apv: AntennaPositionVector,
    pub w: Vec<CVec>,
    pub pi: DecodingIndicatorMatrix,
    pub m: usize,
    pub k: usize,
    pub i: usize,
    pub point: [f64; 2],
}

pub fn random_beamformers<R: Rng>(m: usize, k: usize, power: f64, rng: &mut R) -> Vec<CVec> {
    let mut w: Vec<CVec> = (0..k)
        .map(|_| {
            CVec::from_fn(m, |_, _| {
                Complex64::new(StandardNormal.sample(&mut *rng), StandardNormal.sample(&mut *rng))
            })
        })
        .collect();
    let tot: f64 = w.iter().map(|x| x.norm_squared()).sum();
    let s = Complex64::new((power / tot).sqrt(), 0.0);
    for x in w.iter_mut() {
        *x *= s;
    }
    w
}

pub fn random_point<R: Rng>(config: &SystemConfig, rng: &mut R) -> [f64; 2] {
    let h = config.half_side();
    [rng.random_range(-h..=h), rng.random_range(-h..=h)]
}

pub fn calc_instance(seed: u64) -> CalcInstance {
    let config = SystemConfig::default();
    let realization = sample_realization(&config, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED);
    let apv = initial_positions(&config, &mut rng);
    let w = random_beamformers(config.num_antennas, config.num_users, config.max_power, &mut rng);
    let bits = gene_len(config.num_users);
    let gene = Gene((0..bits).map(|_| rng.random_bool(0.5)).collect());
    let pi = gene_to_matrix(&gene, config.num_users).expect("gene length matches");
    let m = rng.random_range(0..config.num_antennas);
    let i = rng.random_range(0..config.num_users);
    let k = rng.random_range(0..=i);
    let point = random_point(&config, &mut rng);
    CalcInstance {
        seed,
        config,
        realization,
        apv,
        w,
        pi,
        m,
        k,
        i,
        point,
    }
}

impl CalcInstance {
    pub fn phi(&self) -> PhiContext {
        PhiContext::new(&self.realization, self.config.wavelength)
    }

    pub fn gamma(&self, k: usize, i: usize) -> GammaContext {
        build_gamma_context(&self.w, &self.apv, &self.realization, self.config.wavelength, self.m, k, i)
            .expect("indices in range")
    }

    /// `Gamma_{j,i}` contexts for every `j`.
    pub fn gammas_for(&self, i: usize) -> Vec<GammaContext> {
        (0..self.config.num_users).map(|j| self.gamma(j, i)).collect()
    }

    fn kappa(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.config.wavelength
    }
}

/// Gradients and Hessians of the channel gain, the received-signal power and
/// the interference-plus-noise term against central differences.
pub fn calculus_suites(master: u64, instances: usize, mutation: Mutation) -> Vec<SuiteReport> {
    let start = Instant::now();
    let mut grad = SuiteReport::new("gradients", "frcalc", "phi_grad/gamma_grad/upsilon_grad", GRADIENT_TOL);
    let mut hess = SuiteReport::new("hessians", "frcalc", "phi_hess/gamma_hess/upsilon_hess", HESSIAN_TOL);
    for n in 0..instances as u64 {
        let seed = trial_seed(master, n);
        let inst = calc_instance(seed);
        let h = FD_STEP * inst.config.wavelength;
        let kappa = inst.kappa();
        let u = inst.point;

        let phi = inst.phi();
        let f = |x: [f64; 2]| phi_value(&phi, x);
        let g = |x: [f64; 2]| {
            let mut v = phi_grad(&phi, x);
            if mutation == Mutation::FlipGainGradient {
                v[1] = -v[1];
            }
            v
        };
        let scale = f(u).abs().max(1e-300);
        grad.observe(seed, "gain gradient error", gradient_error(&f, &g, u, h, 1e-6 * kappa * scale));
        let hs = |x: [f64; 2]| phi_hess(&phi, x);
        hess.observe(seed, "gain Hessian error", hessian_error(&g, &hs, u, h, 1e-6 * kappa * kappa * scale));

        let gc = inst.gamma(inst.k, inst.i);
        let f = |x: [f64; 2]| gc.sum.value(x);
        let g = |x: [f64; 2]| gamma_grad(&gc, x);
        let scale = f(u).abs().max(gc.sum.constant.abs()).max(1e-300);
        grad.observe(seed, "signal gradient error", gradient_error(&f, &g, u, h, 1e-6 * kappa * scale));
        let hs = |x: [f64; 2]| gamma_hess(&gc, x);
        hess.observe(seed, "signal Hessian error", hessian_error(&g, &hs, u, h, 1e-6 * kappa * kappa * scale));

        let ctxs = inst.gammas_for(inst.i);
        let noise = inst.config.noise(inst.i);
        let (pi, k, i) = (&inst.pi, inst.k, inst.i);
        let f = |x: [f64; 2]| upsilon_value(&ctxs, pi, k, i, noise, x) - noise;
        let g = |x: [f64; 2]| upsilon_grad(&ctxs, pi, k, i, x);
        let scale = ctxs.iter().map(|c| c.sum.constant.abs()).sum::<f64>().max(1e-300);
        grad.observe(seed, "interference gradient error", gradient_error(&f, &g, u, h, 1e-6 * kappa * scale));
        let hs = |x: [f64; 2]| upsilon_hess(&ctxs, pi, k, i, x);
        hess.observe(seed, "interference Hessian error", hessian_error(&g, &hs, u, h, 1e-6 * kappa * kappa * scale));
    }
    vec![grad.finish(start), hess.finish(start)]
}

/// Curvature bounds against the largest Hessian eigenvalue.
pub fn curvature_suite(master: u64, instances: usize) -> SuiteReport {
    let start = Instant::now();
    let mut rep = SuiteReport::new("curvature", "frcalc", "phi/gamma/upsilon curvature bounds", 0.0);
    for n in 0..instances as u64 {
        let seed = trial_seed(master, n);
        let inst = calc_instance(seed);
        let u = inst.point;
        let phi = inst.phi();
        let excess = |bound: f64, lmax: f64| (lmax - bound) / bound.abs().max(lmax.abs()).max(1e-300);

        rep.observe(seed, "gain eigenvalue excess", excess(phi_curvature_bound(&phi, u), lambda_max_2x2(&phi_hess(&phi, u))));
        let gc = inst.gamma(inst.k, inst.i);
        rep.observe(
            seed,
            "signal eigenvalue excess",
            excess(gamma_curvature_bound(&gc, u), lambda_max_2x2(&gamma_hess(&gc, u))),
        );

        let ctxs = inst.gammas_for(inst.i);
        let bounds: Vec<f64> = ctxs.iter().map(|c| gamma_curvature_bound(c, u)).collect();
        let psi = upsilon_curvature(&bounds, &inst.pi, inst.k, inst.i);
        let noise = inst.config.noise(inst.i);
        let f = |x: [f64; 2]| upsilon_value(&ctxs, &inst.pi, inst.k, inst.i, noise, x);
        let fd = fd_hessian_from_values(&f, u, 1e-4 * inst.config.wavelength);
        let lmax = lambda_max_2x2(&fd);
        let scale = ctxs.iter().map(|c| c.sum.global_curvature()).sum::<f64>().max(1e-300);
        let slack = 1e-5 * scale;
        if psi + slack >= lmax {
            rep.pass();
        } else {
            rep.fail(seed, format!("psi {psi:.6e} below finite-difference eigenvalue {lmax:.6e}"));
        }
    }
    rep.finish(start)
}

fn rel_gap(a: f64, b: f64) -> f64 {
    (a - b) / a.abs().max(b.abs()).max(1e-300)
}

/// One-sidedness at sampled points and tightness at the anchor.
pub fn surrogate_suite(master: u64, points: usize) -> SuiteReport {
    let start = Instant::now();
    let mut rep = SuiteReport::new("surrogates", "frcalc", "surrogate_*", SURROGATE_TOL);
    let per_instance = 100;
    let instances = points.div_ceil(per_instance);
    for n in 0..instances as u64 {
        let seed = trial_seed(master, n);
        let inst = calc_instance(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let anchor = inst.point;
        let other = random_point(&inst.config, &mut rng);

        let phi = inst.phi();
        let s_phi = surrogate_phi_lb(&phi, anchor);
        let gc = inst.gamma(inst.k, inst.i);
        let s_gamma = surrogate_gamma_lb(&gc, anchor);
        let ctxs = inst.gammas_for(inst.i);
        let noise = inst.config.noise(inst.i);
        let s_ups = surrogate_upsilon_ub(&ctxs, &inst.pi, inst.k, inst.i, noise, anchor);
        let s_dist = surrogate_distance_lb(anchor, other);
        let dist2 = |u: [f64; 2]| (u[0] - other[0]).powi(2) + (u[1] - other[1]).powi(2);
        let ups = |u: [f64; 2]| upsilon_value(&ctxs, &inst.pi, inst.k, inst.i, noise, u);

        rep.observe(seed, "gain anchor mismatch", rel_gap(s_phi.eval(anchor), phi_value(&phi, anchor)).abs());
        rep.observe(seed, "signal anchor mismatch", rel_gap(s_gamma.eval(anchor), gamma_value(&gc, anchor)).abs());
        rep.observe(seed, "interference anchor mismatch", rel_gap(s_ups.eval(anchor), ups(anchor)).abs());
        rep.observe(seed, "distance anchor mismatch", rel_gap(s_dist.eval(anchor), dist2(anchor)).abs());

        let (at, bt) = (
            10f64.powf(rng.random_range(-2.0..2.0)),
            10f64.powf(rng.random_range(-2.0..2.0)),
        );
        let truth = |a: f64, b: f64| (1.0 + 1.0 / (a * b)).log2();
        let th = |a: f64, b: f64| rate_surrogate_theta(a, b, at, bt).expect("positive anchors");
        rep.observe(seed, "rate anchor mismatch", rel_gap(th(at, bt), truth(at, bt)).abs());

        for _ in 0..per_instance {
            let u = random_point(&inst.config, &mut rng);
            rep.observe(seed, "gain lower-bound excess", rel_gap(s_phi.eval(u), phi_value(&phi, u)));
            rep.observe(seed, "signal lower-bound excess", rel_gap(s_gamma.eval(u), gc.sum.value(u)));
            rep.observe(seed, "interference upper-bound shortfall", rel_gap(ups(u), s_ups.eval(u)));
            rep.observe(seed, "distance lower-bound excess", rel_gap(s_dist.eval(u), dist2(u)));
            let a = at * 10f64.powf(rng.random_range(-1.0..1.0));
            let b = bt * 10f64.powf(rng.random_range(-1.0..1.0));
            rep.observe(seed, "rate lower-bound excess", rel_gap(th(a, b), truth(a, b)));
        }
    }
    rep.finish(start)
}

fn random_sym<R: Rng>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    (&a + a.transpose()) * 0.5
}

/// `max <C, X>` over unit-trace PSD `X`, which equals `lambda_max(C)`.
pub fn lambda_max_sdp(c: &DMatrix<f64>, settings: &Settings) -> manoma_conic::Solution {
    let n = c.nrows();
    let mut pb = ProblemBuilder::new();
    let xs = pb.vars("X", svec_len(n));
    let mut cs = vec![0.0; svec_len(n)];
    mat_to_svec(c, &mut cs);
    let mut obj = LinExpr::zero();
    for (v, &k) in xs.iter().zip(&cs) {
        obj.add_term(*v, k);
    }
    pb.maximize(obj);
    let mut tr = LinExpr::zero();
    let mut idx = 0;
    for j in 0..n {
        tr.add_term(xs[idx], 1.0);
        idx += n - j;
    }
    pb.eq(tr, 1.0);
    pb.psd(n, xs.iter().map(|&v| v.into()).collect());
    solve(&pb.build(), settings)
}

/// LP, SOC and SDP unit problems with known optima, then random 3x3
/// eigenvalue SDPs against a dense eigensolver.
pub fn solver_suite(master: u64, sdp_instances: usize) -> SuiteReport {
    let start = Instant::now();
    let mut rep = SuiteReport::new("conic solver", "solver", "solve", SOLVER_RESIDUAL_TOL);
    let settings = Settings::default();
    let mut unit = |name: &str, pb: ProblemBuilder, expect: f64| {
        let sol = solve(&pb.build(), &settings);
        if sol.status != Status::Optimal {
            rep.fail(0, format!("{name}: status {:?}", sol.status));
            return;
        }
        rep.observe(0, &format!("{name} residual"), sol.primal_residual.max(sol.dual_residual));
        if (sol.objective - expect).abs() > EIGEN_TOL {
            rep.fail(0, format!("{name}: objective {} expected {expect}", sol.objective));
        }
    };

    let mut pb = ProblemBuilder::new();
    let x = pb.var("x");
    let y = pb.var("y");
    pb.maximize(x + 2.0 * y);
    pb.eq(x + y, 1.0);
    pb.nonneg(x);
    pb.nonneg(y);
    unit("lp", pb, 2.0);

    let mut pb = ProblemBuilder::new();
    let t = pb.var("t");
    pb.maximize(-t);
    pb.soc(vec![t.into(), LinExpr::constant(3.0), LinExpr::constant(4.0)]);
    unit("soc norm", pb, -5.0);

    let mut pb = ProblemBuilder::new();
    let x = pb.var("x");
    pb.maximize(x);
    pb.soc(vec![LinExpr::constant(10.0), 2.0 * x, LinExpr::constant(-6.0)]);
    unit("soc hyperbolic", pb, 4.0);

    let mut pb = ProblemBuilder::new();
    let t = pb.var("t");
    pb.maximize(t);
    pb.psd(
        2,
        vec![LinExpr::constant(1.0), t * std::f64::consts::SQRT_2, LinExpr::constant(1.0)],
    );
    unit("sdp 2x2", pb, 1.0);

    let mut rng = ChaCha8Rng::seed_from_u64(master);
    for n in 0..sdp_instances as u64 {
        let c = random_sym(3, &mut rng);
        let lmax = SymmetricEigen::new(c.clone())
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let sol = lambda_max_sdp(&c, &settings);
        if sol.status != Status::Optimal {
            rep.fail(n, format!("eigenvalue SDP status {:?}", sol.status));
            continue;
        }
        rep.observe(n, "eigenvalue SDP residual", sol.primal_residual.max(sol.dual_residual));
        if (sol.objective - lmax).abs() > EIGEN_TOL {
            rep.fail(n, format!("eigenvalue SDP objective {} vs {lmax}", sol.objective));
        }
    }
    rep.finish(start)
}

/// `log2(1 + P ||h||^2 / sigma^2)` at the reported positions.
pub fn single_user_closed_form(report: &RunReport, realization: &ChannelRealization, config: &SystemConfig) -> f64 {
    let g = channel_gain(&report.apv, &realization.users[0], config.wavelength);
    (1.0 + config.max_power * g / config.noise(0)).log2()
}

/// Largest single-antenna channel gain over a `n x n` grid covering the region.
pub fn grid_max_gain(realization: &ChannelRealization, config: &SystemConfig, n: usize) -> ([f64; 2], f64) {
    let h = config.half_side();
    let mut best = ([0.0, 0.0], f64::NEG_INFINITY);
    for a in 0..n {
        for b in 0..n {
            let u = [
                -h + 2.0 * h * a as f64 / (n - 1) as f64,
                -h + 2.0 * h * b as f64 / (n - 1) as f64,
            ];
            let g = channel_gain(&AntennaPositionVector::new(vec![u]), &realization.users[0], config.wavelength);
            if g > best.1 {
                best = (u, g);
            }
        }
    }
    best
}

/// Single-user runs against the closed form, the single-antenna case against
/// a grid search, and the GA against indicator enumeration.
pub fn oracle_suite(master: u64, trials: usize, ga: &GaConfig) -> SuiteReport {
    let start = Instant::now();
    let mut rep = SuiteReport::new("oracles", "orchestrator", "run_two_stage/run_ga", 1e-3);
    for n in 0..trials as u64 {
        let seed = trial_seed(master, n);
        for m in 1..=4 {
            let mut cfg = SystemConfig {
                num_users: 1,
                num_antennas: m,
                ..SystemConfig::default()
            };
            if m == 1 {
                cfg.num_paths = 2;
            }
            let real = sample_realization(&cfg, seed);
            let report = match run_two_stage(&real, &cfg, ga, seed) {
                Ok(r) => r,
                Err(e) => {
                    rep.fail(seed, format!("single-user run with M={m} failed: {e}"));
                    continue;
                }
            };
            let closed = single_user_closed_form(&report, &real, &cfg);
            rep.observe(seed, &format!("single-user rate gap (M={m})"), (report.sum_rate - closed).abs());
            if m == 1 {
                let (_, gmax) = grid_max_gain(&real, &cfg, 200);
                let g = channel_gain(&report.apv, &real.users[0], cfg.wavelength);
                if g < 0.99 * gmax {
                    rep.fail(seed, format!("single-antenna gain {g:.6e} below 99% of grid maximum {gmax:.6e}"));
                } else {
                    rep.pass();
                }
            }
        }

        let cfg = SystemConfig {
            num_users: 3,
            num_antennas: 2,
            ..SystemConfig::default()
        };
        let real = sample_realization(&cfg, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let apv = initial_positions(&cfg, &mut rng);
        let w = random_beamformers(cfg.num_antennas, cfg.num_users, cfg.max_power, &mut rng);
        let ctx = FitnessContext::new(&w, &apv, &real, &cfg, cfg.min_rate, ga.penalty);
        let ex = exhaustive_indicator(&ctx).expect("three users within cap");
        let brute = (0u32..8)
            .map(|code| {
                let gene = Gene((0..3).map(|b| code >> b & 1 == 1).collect());
                ctx.evaluate(&gene_to_matrix(&gene, 3).expect("three bits"))
            })
            .fold(f64::NEG_INFINITY, f64::max);
        if ex.fitness != brute {
            rep.fail(seed, format!("indicator enumeration {} differs from brute force {brute}", ex.fitness));
        } else {
            rep.pass();
        }
        let res = run_ga(&ctx, ga, &mut rng).expect("valid GA configuration");
        if res.best_fitness > ex.fitness {
            rep.fail(seed, format!("GA fitness {} exceeds enumeration {}", res.best_fitness, ex.fitness));
        } else {
            rep.pass();
        }
    }
    rep.finish(start)
}

/// Every violated invariant of a report, as text.
pub fn report_violations(report: &RunReport, config: &SystemConfig) -> Vec<String> {
    let mut out = Vec::new();
    let tol = 1e-9;
    let k = report.indicator.len();
    let mut structure_ok = k == report.rates.len();
    for (r, row) in report.indicator.iter().enumerate() {
        structure_ok &= row.len() == k;
        for (c, &v) in row.iter().enumerate() {
            let ok = if r == c {
                v == 1
            } else if c < r {
                v == 0
            } else {
                v <= 1
            };
            structure_ok &= ok;
        }
    }
    if !structure_ok {
        out.push("indicator matrix is not unit upper triangular and binary".to_string());
    }
    if DecodingIndicatorMatrix::from_rows(&report.indicator).is_err() {
        out.push("indicator matrix rejected by the type constructor".to_string());
    }
    let power: f64 = report.beamformer_vectors().iter().map(|w| w.norm_squared()).sum();
    if power > config.max_power * (1.0 + tol) {
        out.push(format!("final power {power:.6e} exceeds {:.6e}", config.max_power));
    }
    if !report.apv.in_region(config.region_side, tol * config.wavelength) {
        out.push("final antennas leave the region".to_string());
    }
    if report.apv.len() > 1 && report.apv.min_pairwise_distance() < config.min_spacing * (1.0 - tol) {
        out.push(format!("final spacing {:.6e} below minimum", report.apv.min_pairwise_distance()));
    }
    for (n, it) in report.iterates.iter().enumerate() {
        if it.power > config.max_power * (1.0 + tol) {
            out.push(format!("iterate {n} power {:.6e} exceeds budget", it.power));
        }
        if it.max_abs_coordinate > config.half_side() + tol * config.wavelength {
            out.push(format!("iterate {n} leaves the region"));
        }
        if config.num_antennas > 1 && it.min_spacing < config.min_spacing * (1.0 - tol) {
            out.push(format!("iterate {n} spacing {:.6e} below minimum", it.min_spacing));
        }
        if !it.indicator_valid {
            out.push(format!("iterate {n} has an invalid indicator matrix"));
        }
    }
    for w in report.sum_rate_trace.windows(2) {
        if w[1] < w[0] - 1e-9 {
            out.push(format!("sum-rate trace decreases from {} to {}", w[0], w[1]));
        }
    }
    out
}

/// Serialized report without the wall-clock field.
pub fn deterministic_payload(report: &RunReport) -> String {
    let mut r = report.clone();
    r.wall_clock_s = 0.0;
    serde_json::to_string(&r).expect("report serializes")
}

/// Repeated runs agree and every iterate is feasible.
pub fn invariant_suite(master: u64, runs: usize, config: &SystemConfig, ga: &GaConfig, mutation: Mutation) -> SuiteReport {
    let start = Instant::now();
    let mut rep = SuiteReport::new("invariants", "orchestrator", "run_two_stage", 0.0);
    for n in 0..runs as u64 {
        let seed = trial_seed(master, n);
        let real = sample_realization(config, seed);
        let (a, b) = match (run_two_stage(&real, config, ga, seed), run_two_stage(&real, config, ga, seed)) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(e), _) | (_, Err(e)) => {
                rep.fail(seed, format!("run failed: {e}"));
                continue;
            }
        };
        if deterministic_payload(&a) != deterministic_payload(&b) {
            rep.fail(seed, "repeated runs differ");
            continue;
        }
        let mut checked = a;
        if mutation == Mutation::LowerTriangleBit && checked.indicator.len() > 1 {
            checked.indicator[1][0] = 1;
        }
        let v = report_violations(&checked, config);
        if v.is_empty() {
            rep.pass();
        } else {
            rep.fail(seed, v.join("; "));
        }
    }
    rep.finish(start)
}

/// Options for [`run_all`].
#[derive(Debug, Clone)]
pub struct VerifyPlan {
    pub master: u64,
    pub calculus_instances: usize,
    pub surrogate_points: usize,
    pub sdp_instances: usize,
    pub oracle_trials: usize,
    pub invariant_runs: usize,
}

impl Default for VerifyPlan {
    fn default() -> Self {
        VerifyPlan {
            master: 0,
            calculus_instances: 100,
            surrogate_points: 1000,
            sdp_instances: 50,
            oracle_trials: 3,
            invariant_runs: 3,
        }
    }
}

/// Every suite in order, followed by the two mutation checks, which pass when
/// the mutated suite fails.
pub fn run_all(plan: &VerifyPlan, ga: &GaConfig) -> Vec<SuiteReport> {
    let mut out = calculus_suites(plan.master, plan.calculus_instances, Mutation::None);
    out.push(curvature_suite(plan.master, plan.calculus_instances));
    out.push(surrogate_suite(plan.master, plan.surrogate_points));
    out.push(solver_suite(plan.master, plan.sdp_instances));
    out.push(oracle_suite(plan.master, plan.oracle_trials, ga));
    let cfg = SystemConfig::default();
    out.push(invariant_suite(plan.master, plan.invariant_runs, &cfg, ga, Mutation::None));

    let start = Instant::now();
    let mut m1 = SuiteReport::new("mutation: gradient sign", "frcalc", "phi_grad", 0.0);
    let mutated = calculus_suites(plan.master, plan.calculus_instances.min(10), Mutation::FlipGainGradient);
    if mutated[0].passed() {
        m1.fail(plan.master, "gradient suite did not detect a flipped sign");
    } else {
        m1.pass();
    }
    out.push(m1.finish(start));

    let start = Instant::now();
    let mut m2 = SuiteReport::new("mutation: lower-triangle bit", "rates", "DecodingIndicatorMatrix", 0.0);
    let small = SystemConfig {
        num_users: 3,
        num_antennas: 2,
        ..SystemConfig::default()
    };
    if invariant_suite(plan.master, 1, &small, ga, Mutation::LowerTriangleBit).passed() {
        m2.fail(plan.master, "invariant suite did not detect a lower-triangle bit");
    } else {
        m2.pass();
    }
    out.push(m2.finish(start));
    out
}

/// Summary table, one line per suite.
pub fn summary_table(reports: &[SuiteReport]) -> String {
    let mut s = format!(
        "{:<30} {:<14} {:>9} {:>11} {:>9} {:>8}  {}\n",
        "suite", "module", "instances", "worst", "limit", "time_s", "result"
    );
    for r in reports {
        s.push_str(&format!(
            "{:<30} {:<14} {:>9} {:>11.3e} {:>9.1e} {:>8.2}  {}\n",
            r.suite,
            r.module,
            r.instances,
            r.worst,
            r.threshold,
            r.elapsed_s,
            if r.passed() { "PASS" } else { "FAIL" }
        ));
        for f in r.failures.iter().take(5) {
            s.push_str(&format!("    {f}\n"));
        }
        if r.failures.len() > 5 {
            s.push_str(&format!("    ... {} more\n", r.failures.len() - 5));
        }
    }
    s
}
