//! Conic formulations of the per-antenna gain program, the beamforming SDP and
//! the per-antenna position program, plus rank-one extraction.

use manoma_conic::{
    solve, svec_len, ConicProblem, LinExpr, ProblemBuilder, Settings, Solution, Status, Var,
};
use nalgebra::{DMatrix, SymmetricEigen, Vector2};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::{LOG2_E, SQRT_2};

use crate::channel::CVec;
use crate::frcalc::QuadraticSurrogate;
use crate::rates::DecodingIndicatorMatrix;
use crate::CoreError;

/// Half-plane `normal . u >= rhs` in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfPlane {
    pub normal: Vector2<f64>,
    pub rhs: f64,
}

impl HalfPlane {
    pub fn slack(&self, u: [f64; 2]) -> f64 {
        self.normal[0] * u[0] + self.normal[1] * u[1] - self.rhs
    }
}

/// Linearized spacing constraints `||u^t - u_n||^2 + 2 (u^t - u_n)'(u - u^t) >= D^2`.
pub fn spacing_halfplanes(anchor: [f64; 2], others: &[[f64; 2]], min_spacing: f64) -> Vec<HalfPlane> {
    others
        .iter()
        .map(|o| {
            let d = Vector2::new(anchor[0] - o[0], anchor[1] - o[1]);
            let normal = d * 2.0;
            let rhs = min_spacing * min_spacing - d.norm_squared() + normal[0] * anchor[0] + normal[1] * anchor[1];
            HalfPlane { normal, rhs }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QpPath {
    ClosedForm,
    Conic,
    AnchorFallback,
}

/// Concave quadratic program over a box intersected with half-planes:
/// maximize `surrogate(u)` subject to `|u_x|, |u_y| <= half_side`, half-planes.
#[derive(Debug, Clone)]
pub struct GainQp {
    pub surrogate: QuadraticSurrogate,
    pub half_side: f64,
    pub halfplanes: Vec<HalfPlane>,
    pub wavelength: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct GainQpVars {
    pub dx: Var,
    pub dy: Var,
    pub q: Var,
}

fn clip(v: f64, h: f64) -> f64 {
    v.max(-h).min(h)
}

impl GainQp {
    pub fn feasible(&self, u: [f64; 2], tol: f64) -> bool {
        u[0].abs() <= self.half_side + tol
            && u[1].abs() <= self.half_side + tol
            && self.halfplanes.iter().all(|hp| hp.slack(u) >= -tol * hp.normal.norm().max(1e-300))
    }

    /// Optimum over the box alone.
    pub fn box_optimum(&self) -> [f64; 2] {
        let s = &self.surrogate;
        let h = self.half_side;
        if s.curvature > 0.0 {
            [
                clip(s.anchor[0] + s.grad[0] / s.curvature, h),
                clip(s.anchor[1] + s.grad[1] / s.curvature, h),
            ]
        } else {
            let pick = |g: f64, a: f64| if g > 0.0 { h } else if g < 0.0 { -h } else { a };
            [pick(s.grad[0], s.anchor[0]), pick(s.grad[1], s.anchor[1])]
        }
    }

    /// Conic encoding in the scaled displacement `d = (u - anchor) / lambda`.
    pub fn build(&self) -> (ConicProblem, GainQpVars) {
        let s = &self.surrogate;
        let lam = self.wavelength;
        let scale = s.value.abs().max(s.grad.norm() * lam).max(1e-300);
        let mut pb = ProblemBuilder::new();
        let dx = pb.var("dx");
        let dy = pb.var("dy");
        let q = pb.var("q");
        let gx = s.grad[0] * lam / scale;
        let gy = s.grad[1] * lam / scale;
        let c = 0.5 * s.curvature * lam * lam / scale;
        pb.maximize(dx * gx + dy * gy - q * c);
        pb.label("q >= ||d||^2");
        pb.soc(vec![q + 1.0, q - 1.0, dx * 2.0, dy * 2.0]);
        let qmax = 2.0 * (2.0 * self.half_side / lam).powi(2) + 1.0;
        pb.le(q, qmax);
        for (v, a) in [(dx, s.anchor[0]), (dy, s.anchor[1])] {
            // -H <= a + lam d <= H
            pb.le(v * lam, self.half_side - a);
            pb.ge(v * lam, -self.half_side - a);
        }
        for hp in &self.halfplanes {
            // n'(anchor + lam d) >= rhs, divided by lam^2
            let lhs = (dx * hp.normal[0] + dy * hp.normal[1]) * (1.0 / lam);
            let rhs = (hp.rhs - hp.normal[0] * s.anchor[0] - hp.normal[1] * s.anchor[1]) / (lam * lam);
            pb.ge(lhs, rhs);
        }
        (pb.build(), GainQpVars { dx, dy, q })
    }

    /// Solves with the closed form when no half-plane binds, else the conic path.
    pub fn solve(&self, settings: &Settings, dump: Option<&mut Vec<String>>) -> ([f64; 2], QpPath) {
        let cand = self.box_optimum();
        if self.halfplanes.iter().all(|hp| hp.slack(cand) >= 0.0) {
            return (cand, QpPath::ClosedForm);
        }
        self.solve_conic(settings, dump)
    }

    pub fn solve_conic(&self, settings: &Settings, dump: Option<&mut Vec<String>>) -> ([f64; 2], QpPath) {
        let (prob, vars) = self.build();
        if let Some(d) = dump {
            d.push(prob.dump());
        }
        let sol = solve(&prob, settings);
        let a = self.surrogate.anchor;
        if matches!(sol.status, Status::Optimal | Status::MaxIterations) {
            let u = [
                a[0] + self.wavelength * sol.var(vars.dx),
                a[1] + self.wavelength * sol.var(vars.dy),
            ];
            let u = [clip(u[0], self.half_side), clip(u[1], self.half_side)];
            if u[0].is_finite() && u[1].is_finite() {
                return (u, QpPath::Conic);
            }
        }
        (a, QpPath::AnchorFallback)
    }
}

/// Rate-surrogate anchors for the active pairs, in noise-normalized units:
/// `alpha = sigma_i^2 / Gamma_{k,i}`, `beta = Upsilon_{k,i} / sigma_i^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlackAnchors {
    pub pairs: Vec<(usize, usize)>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

/// Largest admissible normalized `alpha` anchor.
pub const ALPHA_CLAMP: f64 = 1e12;

/// QoS handling inside a subproblem.
#[derive(Debug, Clone, PartialEq)]
pub enum Qos {
    /// `R_k >= floor_k` for every `floor_k > 0`.
    Floors(Vec<f64>),
    /// `R_k + s_k >= r_min`, `s_k >= 0`, objective penalized by `penalty * sum s_k`.
    Elastic { r_min: f64, penalty: f64 },
}

struct RateBlock {
    objective: LinExpr,
    r: Vec<Var>,
    slack: Vec<Var>,
    a: Vec<Var>,
    b: Vec<Var>,
}

/// Declares `R_k`, scaled slacks `a = alpha / alpha^t`, `b = beta / beta^t`, the
/// linearized rate constraints, QoS rows and the objective.
fn rate_block(pb: &mut ProblemBuilder, k_users: usize, anchors: &SlackAnchors, qos: &Qos) -> RateBlock {
    let r = pb.vars("R", k_users);
    let mut a = Vec::new();
    let mut b = Vec::new();
    for (p, &(k, i)) in anchors.pairs.iter().enumerate() {
        let av = pb.var(format!("a_{k}_{i}"));
        let bv = pb.var(format!("b_{k}_{i}"));
        let at = anchors.alpha[p];
        let bt = anchors.beta[p];
        let l0 = (1.0 + 1.0 / (at * bt)).log2();
        let c0 = LOG2_E / (1.0 + at * bt);
        // R_k <= l0 - c0 (a - 1) - c0 (b - 1)
        pb.label(format!("rate {k}->{i}"));
        pb.le(r[k], (av * -c0) - bv * c0 + (l0 + 2.0 * c0));
        a.push(av);
        b.push(bv);
    }
    let mut obj = LinExpr::zero();
    for &rv in &r {
        obj += rv;
    }
    let mut slack = Vec::new();
    match qos {
        Qos::Floors(f) => {
            for (k, &fl) in f.iter().enumerate() {
                if fl > 0.0 {
                    pb.label(format!("qos {k}"));
                    pb.ge(r[k], fl);
                }
            }
        }
        Qos::Elastic { r_min, penalty } => {
            for k in 0..k_users {
                let s = pb.var(format!("s{k}"));
                pb.nonneg(s);
                pb.label(format!("qos {k}"));
                pb.ge(r[k] + s, *r_min);
                obj -= s * *penalty;
                slack.push(s);
            }
        }
    }
    pb.maximize(obj.clone());
    RateBlock {
        objective: obj,
        r,
        slack,
        a,
        b,
    }
}

/// Indexing of the real parameters of a Hermitian `M x M` matrix:
/// diagonal entries first, then real and imaginary parts of each `(r, c)`, `r > c`.
#[derive(Debug, Clone)]
pub struct HermitianVars {
    pub m: usize,
    pub vars: Vec<Var>,
}

impl HermitianVars {
    fn new(pb: &mut ProblemBuilder, prefix: &str, m: usize) -> Self {
        HermitianVars {
            m,
            vars: pb.vars(prefix, m * m),
        }
    }

    fn off_index(&self, r: usize, c: usize) -> usize {
        debug_assert!(r > c);
        // pairs ordered column-major over the strict lower triangle
        let before: usize = (0..c).map(|cc| self.m - 1 - cc).sum();
        self.m + 2 * (before + (r - c - 1))
    }

    pub fn re(&self, r: usize, c: usize) -> LinExpr {
        if r == c {
            self.vars[r].into()
        } else if r > c {
            self.vars[self.off_index(r, c)].into()
        } else {
            self.vars[self.off_index(c, r)].into()
        }
    }

    pub fn im(&self, r: usize, c: usize) -> LinExpr {
        if r == c {
            LinExpr::zero()
        } else if r > c {
            self.vars[self.off_index(r, c) + 1].into()
        } else {
            -LinExpr::from(self.vars[self.off_index(c, r) + 1])
        }
    }

    /// `svec` of the real embedding `[[Re, -Im], [Im, Re]]`.
    pub fn embedding_svec(&self) -> Vec<LinExpr> {
        let m = self.m;
        let n = 2 * m;
        let mut out = Vec::with_capacity(svec_len(n));
        for c in 0..n {
            for r in c..n {
                let e = match (r < m, c < m) {
                    (true, true) => self.re(r, c),
                    (false, false) => self.re(r - m, c - m),
                    (false, true) => self.im(r - m, c),
                    (true, false) => unreachable!("lower triangle only"),
                };
                out.push(if r == c { e } else { e * SQRT_2 });
            }
        }
        out
    }

    /// `Tr(W H)` for Hermitian `H`.
    pub fn trace_with(&self, h: &DMatrix<Complex64>) -> LinExpr {
        let mut e = LinExpr::zero();
        for a in 0..self.m {
            e.add_term(self.vars[a], h[(a, a)].re);
            for b in 0..a {
                let idx = self.off_index(a, b);
                e.add_term(self.vars[idx], 2.0 * h[(a, b)].re);
                e.add_term(self.vars[idx + 1], 2.0 * h[(a, b)].im);
            }
        }
        e
    }

    pub fn trace(&self) -> LinExpr {
        let mut e = LinExpr::zero();
        for a in 0..self.m {
            e.add_term(self.vars[a], 1.0);
        }
        e
    }

    pub fn read(&self, sol: &Solution) -> DMatrix<Complex64> {
        let m = self.m;
        DMatrix::from_fn(m, m, |r, c| {
            Complex64::new(sol.value(&self.re(r, c)), sol.value(&self.im(r, c)))
        })
    }
}

/// Inputs of the beamforming SDP. Channels are normalized so that noise is one
/// and the power budget is one: `h_norm_i = h_i sqrt(P / sigma_i^2)`.
#[derive(Debug, Clone)]
pub struct BeamformingSdp<'a> {
    pub h_norm: &'a [CVec],
    pub pi: &'a DecodingIndicatorMatrix,
    pub anchors: &'a SlackAnchors,
    pub qos: Qos,
    pub refine: Option<RankRefinement>,
}

/// Second-pass objective: keep the first-pass objective within `min_objective`
/// and minimize `sum_k Tr(W_k Q_k)`, where `Q_k` projects away from the
/// principal eigenvector of the first-pass `W_k`.
#[derive(Debug, Clone)]
pub struct RankRefinement {
    pub min_objective: f64,
    pub projectors: Vec<DMatrix<Complex64>>,
}

pub struct SdpLayout {
    pub w: Vec<HermitianVars>,
    pub r: Vec<Var>,
    pub slack: Vec<Var>,
    pub a: Vec<Var>,
    pub b: Vec<Var>,
}

/// Builds the lifted beamforming program over normalized `W_k = w_k w_k^H / P`.
pub fn build_beamforming_sdp(input: &BeamformingSdp) -> (ConicProblem, SdpLayout) {
    let k_users = input.h_norm.len();
    let m = input.h_norm.first().map(|h| h.len()).unwrap_or(0);
    let mut pb = ProblemBuilder::new();
    let w: Vec<HermitianVars> = (0..k_users)
        .map(|k| HermitianVars::new(&mut pb, &format!("W{k}_"), m))
        .collect();
    let rb = rate_block(&mut pb, k_users, input.anchors, &input.qos);
    let outer: Vec<DMatrix<Complex64>> = input.h_norm.iter().map(|h| h * h.adjoint()).collect();
    for (p, &(k, i)) in input.anchors.pairs.iter().enumerate() {
        let at = input.anchors.alpha[p];
        let bt = input.anchors.beta[p];
        // a * (alpha^t Gamma) >= 1
        let x = w[k].trace_with(&outer[i]) * at;
        let av = rb.a[p];
        pb.label(format!("hyperbolic {k}->{i}"));
        pb.soc(vec![x.clone() + av, LinExpr::constant(2.0), LinExpr::from(av) - x]);
        // b beta^t >= Upsilon
        let mut ups = LinExpr::constant(1.0);
        for j in 0..k_users {
            if !(j <= k && input.pi.get(j, i)) {
                ups += w[j].trace_with(&outer[i]);
            }
        }
        pb.label(format!("interference {k}->{i}"));
        pb.ge(rb.b[p] * bt, ups);
    }
    if let Some(rf) = &input.refine {
        pb.label("objective floor");
        pb.ge(rb.objective.clone(), rf.min_objective);
        let mut spread = LinExpr::zero();
        for (wk, q) in w.iter().zip(&rf.projectors) {
            spread += wk.trace_with(q);
        }
        pb.maximize(-spread);
    }
    let mut power = LinExpr::zero();
    for wk in &w {
        power += wk.trace();
    }
    pb.label("power");
    pb.le(power, 1.0);
    for (k, wk) in w.iter().enumerate() {
        pb.label(format!("psd W{k}"));
        pb.psd(2 * m, wk.embedding_svec());
    }
    (
        pb.build(),
        SdpLayout {
            w,
            r: rb.r,
            slack: rb.slack,
            a: rb.a,
            b: rb.b,
        },
    )
}

/// Outcome of rank-one extraction.
#[derive(Debug, Clone)]
pub struct RankOne {
    pub w: CVec,
    /// `lambda_2 / lambda_1`.
    pub ratio: f64,
    /// True when the principal eigenvector is accurate enough to be used directly.
    pub principal: bool,
}

pub const RANK_ONE_TOL: f64 = 1e-4;

/// `w = sqrt(lambda_1) v_1` from a Hermitian PSD matrix.
pub fn extract_rank_one(w: &DMatrix<Complex64>) -> Result<RankOne, CoreError> {
    let n = w.nrows();
    if w.ncols() != n {
        return Err(CoreError::InvalidArgument("matrix must be square".into()));
    }
    let asym = (w - w.adjoint()).norm();
    if asym > 1e-8 * w.norm().max(1.0) {
        return Err(CoreError::InvalidArgument(format!(
            "matrix is not Hermitian (asymmetry {asym:.3e})"
        )));
    }
    if n == 0 {
        return Ok(RankOne {
            w: CVec::zeros(0),
            ratio: 0.0,
            principal: true,
        });
    }
    let herm = (w + w.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(herm);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let l1 = eig.eigenvalues[idx[0]].max(0.0);
    let l2 = if n > 1 { eig.eigenvalues[idx[1]].max(0.0) } else { 0.0 };
    let ratio = if l1 > 0.0 { l2 / l1 } else { 0.0 };
    let v = eig.eigenvectors.column(idx[0]).into_owned();
    Ok(RankOne {
        w: v * Complex64::new(l1.sqrt(), 0.0),
        ratio,
        principal: ratio <= RANK_ONE_TOL,
    })
}

/// Gaussian randomization: draws `w_k ~ CN(0, W_k)` jointly for all users,
/// rescales to the power budget and keeps the best-scoring candidate.
/// `score` returns `None` for candidates to discard.
pub fn gaussian_randomization<R: Rng>(
    ws: &[DMatrix<Complex64>],
    power: f64,
    draws: usize,
    rng: &mut R,
    mut score: impl FnMut(&[CVec]) -> Option<f64>,
) -> Option<(Vec<CVec>, f64)> {
    let factors: Vec<DMatrix<Complex64>> = ws
        .iter()
        .map(|w| {
            let eig = SymmetricEigen::new((w + w.adjoint()) * Complex64::new(0.5, 0.0));
            let mut f = eig.eigenvectors.clone();
            for (c, &l) in eig.eigenvalues.iter().enumerate() {
                let s = l.max(0.0).sqrt();
                for r in 0..f.nrows() {
                    f[(r, c)] *= Complex64::new(s, 0.0);
                }
            }
            f
        })
        .collect();
    let mut best: Option<(Vec<CVec>, f64)> = None;
    for _ in 0..draws {
        let mut cand: Vec<CVec> = factors
            .iter()
            .map(|f| {
                let n = f.ncols();
                let z = CVec::from_fn(n, |_, _| {
                    let re: f64 = StandardNormal.sample(rng);
                    let im: f64 = StandardNormal.sample(rng);
                    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
                });
                f * z
            })
            .collect();
        let tot: f64 = cand.iter().map(|w| w.norm_squared()).sum();
        if tot <= 0.0 {
            continue;
        }
        let s = Complex64::new((power / tot).sqrt(), 0.0);
        for w in cand.iter_mut() {
            *w *= s;
        }
        if let Some(v) = score(&cand) {
            if best.as_ref().map_or(true, |(_, b)| v > *b) {
                best = Some((cand, v));
            }
        }
    }
    best
}

/// Surrogates of one active pair for the position program, in noise-normalized units.
#[derive(Debug, Clone)]
pub struct PairSurrogates {
    pub k: usize,
    pub i: usize,
    pub alpha_t: f64,
    pub beta_t: f64,
    pub gamma: QuadraticSurrogate,
    pub upsilon: QuadraticSurrogate,
}

/// Per-antenna position program around `anchor`.
#[derive(Debug, Clone)]
pub struct PositionProgram {
    pub anchor: [f64; 2],
    pub wavelength: f64,
    pub half_side: f64,
    pub halfplanes: Vec<HalfPlane>,
    pub num_users: usize,
    pub pairs: Vec<PairSurrogates>,
    pub qos: Qos,
}

pub struct PositionLayout {
    pub dx: Var,
    pub dy: Var,
    pub q: Var,
    pub r: Vec<Var>,
    pub slack: Vec<Var>,
}

pub fn build_position_program(p: &PositionProgram) -> (ConicProblem, PositionLayout) {
    let lam = p.wavelength;
    let mut pb = ProblemBuilder::new();
    let dx = pb.var("dx");
    let dy = pb.var("dy");
    let q = pb.var("q");
    let anchors = SlackAnchors {
        pairs: p.pairs.iter().map(|s| (s.k, s.i)).collect(),
        alpha: p.pairs.iter().map(|s| s.alpha_t).collect(),
        beta: p.pairs.iter().map(|s| s.beta_t).collect(),
    };
    let rb = rate_block(&mut pb, p.num_users, &anchors, &p.qos);
    pb.label("q >= ||d||^2");
    pb.soc(vec![q + 1.0, q - 1.0, dx * 2.0, dy * 2.0]);
    let qmax = 2.0 * (2.0 * p.half_side / lam).powi(2) + 1.0;
    pb.le(q, qmax);
    for (v, a) in [(dx, p.anchor[0]), (dy, p.anchor[1])] {
        pb.le(v * lam, p.half_side - a);
        pb.ge(v * lam, -p.half_side - a);
    }
    for hp in &p.halfplanes {
        let lhs = (dx * hp.normal[0] + dy * hp.normal[1]) * (1.0 / lam);
        let rhs = (hp.rhs - hp.normal[0] * p.anchor[0] - hp.normal[1] * p.anchor[1]) / (lam * lam);
        pb.ge(lhs, rhs);
    }
    for (idx, s) in p.pairs.iter().enumerate() {
        let g = &s.gamma;
        // alpha^t Gamma_lb = alpha^t (v + lam g'd - (gamma lam^2 / 2) q)
        let x = (dx * (g.grad[0] * lam) + dy * (g.grad[1] * lam) - q * (0.5 * g.curvature * lam * lam) + g.value)
            * s.alpha_t;
        let av = rb.a[idx];
        pb.label(format!("hyperbolic {}->{}", s.k, s.i));
        pb.soc(vec![x.clone() + av, LinExpr::constant(2.0), LinExpr::from(av) - x]);
        let u = &s.upsilon;
        let ups = dx * (u.grad[0] * lam) + dy * (u.grad[1] * lam) + q * (0.5 * u.curvature * lam * lam) + u.value;
        pb.label(format!("interference {}->{}", s.k, s.i));
        pb.ge(rb.b[idx] * s.beta_t, ups);
    }
    (
        pb.build(),
        PositionLayout {
            dx,
            dy,
            q,
            r: rb.r,
            slack: rb.slack,
        },
    )
}

/// Solver settings used for all subproblems.
pub fn default_settings() -> Settings {
    Settings {
        abstol: 1e-9,
        reltol: 1e-9,
        feastol: 1e-8,
        reduced_tol: 1e-6,
        ..Settings::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frcalc::Sense;

    #[test]
    fn hermitian_embedding_round_trip() {
        let m = 3;
        let mut pb = ProblemBuilder::new();
        let hv = HermitianVars::new(&mut pb, "W", m);
        assert_eq!(hv.vars.len(), 9);
        // assign values by solving nothing: evaluate expressions on a chosen x
        let x: Vec<f64> = (0..9).map(|i| 0.1 * i as f64 + 0.05).collect();
        let sol = Solution {
            status: Status::Optimal,
            x: x.clone(),
            y: vec![],
            z: vec![],
            s: vec![],
            objective: 0.0,
            dual_objective: 0.0,
            primal_residual: 0.0,
            dual_residual: 0.0,
            gap: 0.0,
            iterations: 0,
        };
        let w = hv.read(&sol);
        assert!((&w - w.adjoint()).norm() < 1e-15);
        let h = DMatrix::from_fn(m, m, |r, c| Complex64::new((r * 3 + c) as f64 * 0.2 - 0.3, (r as f64 - c as f64) * 0.4));
        let h = (&h + h.adjoint()) * Complex64::new(0.5, 0.0);
        let tr = (&w * &h).trace();
        assert!((sol.value(&hv.trace_with(&h)) - tr.re).abs() < 1e-12);
        let emb = hv.embedding_svec();
        let mut sv = vec![0.0; emb.len()];
        for (o, e) in sv.iter_mut().zip(&emb) {
            *o = sol.value(e);
        }
        let real = manoma_conic::svec_to_mat(&sv, 2 * m);
        for r in 0..m {
            for c in 0..m {
                assert!((real[(r, c)] - w[(r, c)].re).abs() < 1e-12);
                assert!((real[(r + m, c)] - w[(r, c)].im).abs() < 1e-12);
                assert!((real[(r + m, c + m)] - w[(r, c)].re).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rank_one_examples() {
        let w = CVec::from_vec(vec![Complex64::new(0.3, 0.4), Complex64::new(-1.0, 0.2)]);
        let big = &w * w.adjoint();
        let r = extract_rank_one(&big).unwrap();
        assert!(r.principal);
        assert!((&r.w * r.w.adjoint() - &big).norm() < 1e-8);
        let r = extract_rank_one(&DMatrix::identity(2, 2)).unwrap();
        assert!((r.ratio - 1.0).abs() < 1e-12 && !r.principal);
        let mut bad = DMatrix::<Complex64>::identity(2, 2);
        bad[(0, 1)] = Complex64::new(1.0, 0.0);
        assert!(extract_rank_one(&bad).is_err());
        let noisy = &big + DMatrix::<Complex64>::identity(2, 2) * Complex64::new(1e-6, 0.0);
        let r = extract_rank_one(&noisy).unwrap();
        assert!(r.principal && r.ratio < 1e-4);
    }

    #[test]
    fn gain_qp_closed_form_and_conic_agree() {
        let sur = QuadraticSurrogate {
            anchor: [0.0, 0.0],
            value: 1.0,
            grad: Vector2::new(3.0, -1.0),
            curvature: 40.0,
            sense: Sense::Lower,
        };
        let qp = GainQp {
            surrogate: sur,
            half_side: 0.15,
            halfplanes: vec![],
            wavelength: 0.1,
        };
        let (u, path) = qp.solve(&Settings::default(), None);
        assert_eq!(path, QpPath::ClosedForm);
        assert!((u[0] - 0.075).abs() < 1e-15 && (u[1] + 0.025).abs() < 1e-15);
        let (uc, _) = qp.solve_conic(&Settings::default(), None);
        assert!((uc[0] - u[0]).abs() < 1e-6 && (uc[1] - u[1]).abs() < 1e-6);
    }

    #[test]
    fn gain_qp_zero_gradient_stays() {
        let sur = QuadraticSurrogate {
            anchor: [0.02, -0.03],
            value: 1.0,
            grad: Vector2::zeros(),
            curvature: 0.0,
            sense: Sense::Lower,
        };
        let qp = GainQp {
            surrogate: sur,
            half_side: 0.15,
            halfplanes: vec![],
            wavelength: 0.1,
        };
        assert_eq!(qp.solve(&Settings::default(), None).0, [0.02, -0.03]);
    }
}
