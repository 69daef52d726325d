//! Closed-form values, gradients, Hessians and curvature bounds of the
//! position-dependent channel quantities, and the quadratic surrogates built
//! from them.
//!
//! Every position-dependent quantity here is a finite sum
//! `c0 + sum_t a_t cos(p_t + kappa (ax_t x + ay_t y))` with `kappa = 2 pi / lambda`,
//! represented by [`TrigSum`].

use nalgebra::{DMatrix, Matrix2, Vector2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{LOG2_E, PI};

use crate::channel::{antenna_response, AntennaPositionVector, CVec, ChannelRealization, UserChannel};
use crate::rates::DecodingIndicatorMatrix;
use crate::CoreError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrigTerm {
    pub amp: f64,
    pub phase: f64,
    pub ax: f64,
    pub ay: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrigSum {
    pub kappa: f64,
    pub constant: f64,
    pub terms: Vec<TrigTerm>,
}

impl TrigSum {
    pub fn new(wavelength: f64) -> Self {
        TrigSum {
            kappa: 2.0 * PI / wavelength,
            constant: 0.0,
            terms: Vec::new(),
        }
    }

    fn arg(&self, t: &TrigTerm, u: [f64; 2]) -> f64 {
        t.phase + self.kappa * (t.ax * u[0] + t.ay * u[1])
    }

    pub fn value(&self, u: [f64; 2]) -> f64 {
        self.constant + self.terms.iter().map(|t| t.amp * self.arg(t, u).cos()).sum::<f64>()
    }

    pub fn grad(&self, u: [f64; 2]) -> Vector2<f64> {
        let mut g = Vector2::zeros();
        for t in &self.terms {
            let s = -t.amp * self.kappa * self.arg(t, u).sin();
            g[0] += s * t.ax;
            g[1] += s * t.ay;
        }
        g
    }

    pub fn hess(&self, u: [f64; 2]) -> Matrix2<f64> {
        let (mut hxx, mut hxy, mut hyy) = (0.0, 0.0, 0.0);
        let k2 = self.kappa * self.kappa;
        for t in &self.terms {
            let c = -t.amp * k2 * self.arg(t, u).cos();
            hxx += c * t.ax * t.ax;
            hxy += c * t.ax * t.ay;
            hyy += c * t.ay * t.ay;
        }
        Matrix2::new(hxx, hxy, hxy, hyy)
    }

    /// Upper bound on the spectral norm of the Hessian valid everywhere.
    pub fn global_curvature(&self) -> f64 {
        let k2 = self.kappa * self.kappa;
        self.terms
            .iter()
            .map(|t| t.amp * k2 * (t.ax * t.ax + t.ay * t.ay))
            .sum()
    }

    /// Adds `|m|^2` for `m = sum_l coef_l e^{-j kappa rho_l(u)}`, the
    /// quadratic form of the outer product `coef coef^H`.
    fn add_outer(&mut self, coef: &[Complex64], user: &UserChannel) {
        let l = coef.len();
        for l1 in 0..l {
            self.constant += coef[l1].norm_sqr();
            for l2 in l1 + 1..l {
                // coef_l1 coef_l2^* e^{j kappa (rho_l2 - rho_l1)} plus its conjugate
                let a = coef[l1] * coef[l2].conj();
                self.terms.push(TrigTerm {
                    amp: 2.0 * a.norm(),
                    phase: a.arg(),
                    ax: user.sx(l2) - user.sx(l1),
                    ay: user.sy(l2) - user.sy(l1),
                });
            }
        }
    }
}

pub fn frobenius(h: &Matrix2<f64>) -> f64 {
    h.norm()
}

/// Largest eigenvalue of a symmetric 2x2 matrix.
pub fn lambda_max_2x2(h: &Matrix2<f64>) -> f64 {
    let tr = h[(0, 0)] + h[(1, 1)];
    let det = h[(0, 0)] * h[(1, 1)] - h[(0, 1)] * h[(1, 0)];
    let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
    tr / 2.0 + disc
}

/// Context for the overall channel gain contributed by one antenna,
/// `Phi(u) = sum_k |g_k(u)^H f_k|^2`.
#[derive(Debug, Clone)]
pub struct PhiContext {
    /// `A_k = f_k f_k^H`.
    pub outer: Vec<DMatrix<Complex64>>,
    pub wavelength: f64,
    pub sum: TrigSum,
}

impl PhiContext {
    pub fn new(realization: &ChannelRealization, wavelength: f64) -> Self {
        let mut sum = TrigSum::new(wavelength);
        let mut outer = Vec::with_capacity(realization.num_users());
        for user in &realization.users {
            let f = CVec::from_column_slice(&user.prv);
            outer.push(&f * f.adjoint());
            sum.add_outer(&user.prv, user);
        }
        PhiContext {
            outer,
            wavelength,
            sum,
        }
    }
}

pub fn phi_value(ctx: &PhiContext, u: [f64; 2]) -> f64 {
    ctx.sum.value(u)
}

pub fn phi_grad(ctx: &PhiContext, u: [f64; 2]) -> Vector2<f64> {
    ctx.sum.grad(u)
}

pub fn phi_hess(ctx: &PhiContext, u: [f64; 2]) -> Matrix2<f64> {
    ctx.sum.hess(u)
}

pub fn phi_curvature_bound(ctx: &PhiContext, u: [f64; 2]) -> f64 {
    frobenius(&phi_hess(ctx, u))
}

/// Context for `Gamma_{k,i}(u_m) = |h_i^H w_k|^2` as a function of antenna `m`'s
/// position with all other antennas fixed.
#[derive(Debug, Clone)]
pub struct GammaContext {
    pub m: usize,
    pub k: usize,
    pub i: usize,
    /// `sum_{n != m} f_i^H g_i(u_n) w_{k,n}`.
    pub zeta: Complex64,
    /// `|w_{k,m}|^2 f_i f_i^H`.
    pub b: DMatrix<Complex64>,
    /// `2 w_{k,m}^* zeta f_i`.
    pub c: Vec<Complex64>,
    pub sum: TrigSum,
    fingerprint: u64,
}

fn fingerprint(w: &CVec, apv: &AntennaPositionVector, m: usize) -> u64 {
    use std::hash::{Hash, Hasher};
    let mut h = std::collections::hash_map::DefaultHasher::new();
    m.hash(&mut h);
    for z in w.iter() {
        z.re.to_bits().hash(&mut h);
        z.im.to_bits().hash(&mut h);
    }
    for (n, p) in apv.positions.iter().enumerate() {
        if n != m {
            p[0].to_bits().hash(&mut h);
            p[1].to_bits().hash(&mut h);
        }
    }
    h.finish()
}

impl GammaContext {
    /// True if the context was built from this beamformer and these fixed antennas.
    pub fn matches(&self, w_set: &[CVec], apv: &AntennaPositionVector) -> bool {
        self.fingerprint == fingerprint(&w_set[self.k], apv, self.m)
    }
}

pub fn build_gamma_context(
    w_set: &[CVec],
    apv: &AntennaPositionVector,
    realization: &ChannelRealization,
    wavelength: f64,
    m: usize,
    k: usize,
    i: usize,
) -> Result<GammaContext, CoreError> {
    if m >= apv.len() {
        return Err(CoreError::InvalidArgument(format!(
            "antenna index {m} out of range for {} antennas",
            apv.len()
        )));
    }
    if k >= w_set.len() || i >= realization.num_users() {
        return Err(CoreError::InvalidArgument(format!(
            "user pair ({k}, {i}) out of range"
        )));
    }
    let user = &realization.users[i];
    let w = &w_set[k];
    let mut zeta = Complex64::new(0.0, 0.0);
    for (n, &u) in apv.positions.iter().enumerate() {
        if n != m {
            // f^H g(u_n) = conj(g(u_n)^H f)
            zeta += antenna_response(u, user, wavelength).conj() * w[n];
        }
    }
    let wm = w[m];
    let f = CVec::from_column_slice(&user.prv);
    let b = (&f * f.adjoint()) * Complex64::new(wm.norm_sqr(), 0.0);
    let c: Vec<Complex64> = user.prv.iter().map(|fl| 2.0 * wm.conj() * zeta * fl).collect();

    let mut sum = TrigSum::new(wavelength);
    // f^H g(u) w_m = sum_l conj(f_l w_m^*) e^{j kappa rho_l}; its squared modulus
    // equals that of sum_l (f_l w_m^*) e^{-j kappa rho_l}.
    let scaled: Vec<Complex64> = user.prv.iter().map(|fl| fl * wm.conj()).collect();
    sum.add_outer(&scaled, user);
    sum.constant += zeta.norm_sqr();
    for (l, cl) in c.iter().enumerate() {
        // Re(c_l e^{-j kappa rho_l})
        if cl.norm() > 0.0 {
            sum.terms.push(TrigTerm {
                amp: cl.norm(),
                phase: cl.arg(),
                ax: -user.sx(l),
                ay: -user.sy(l),
            });
        }
    }
    Ok(GammaContext {
        m,
        k,
        i,
        zeta,
        b,
        c,
        sum,
        fingerprint: fingerprint(w, apv, m),
    })
}

pub fn gamma_value(ctx: &GammaContext, u: [f64; 2]) -> f64 {
    ctx.sum.value(u).max(0.0)
}

pub fn gamma_grad(ctx: &GammaContext, u: [f64; 2]) -> Vector2<f64> {
    ctx.sum.grad(u)
}

pub fn gamma_hess(ctx: &GammaContext, u: [f64; 2]) -> Matrix2<f64> {
    ctx.sum.hess(u)
}

pub fn gamma_curvature_bound(ctx: &GammaContext, u: [f64; 2]) -> f64 {
    frobenius(&gamma_hess(ctx, u))
}

/// Weight of `Gamma_{j,i}` inside `Upsilon_{k,i}`.
pub fn upsilon_weight(pi: &DecodingIndicatorMatrix, k: usize, i: usize, j: usize) -> f64 {
    if j <= k && pi.get(j, i) {
        0.0
    } else {
        1.0
    }
}

/// `Upsilon_{k,i}(u) = sum_j Gamma_{j,i} - sum_{j<=k} pi_{j,i} Gamma_{j,i} + sigma_i^2`,
/// where `contexts[j]` is the context of `Gamma_{j,i}`.
pub fn upsilon_value(
    contexts: &[GammaContext],
    pi: &DecodingIndicatorMatrix,
    k: usize,
    i: usize,
    noise: f64,
    u: [f64; 2],
) -> f64 {
    noise
        + contexts
            .iter()
            .enumerate()
            .map(|(j, c)| upsilon_weight(pi, k, i, j) * gamma_value(c, u))
            .sum::<f64>()
}

pub fn upsilon_grad(
    contexts: &[GammaContext],
    pi: &DecodingIndicatorMatrix,
    k: usize,
    i: usize,
    u: [f64; 2],
) -> Vector2<f64> {
    let mut g = Vector2::zeros();
    for (j, c) in contexts.iter().enumerate() {
        let wgt = upsilon_weight(pi, k, i, j);
        if wgt != 0.0 {
            g += gamma_grad(c, u) * wgt;
        }
    }
    g
}

pub fn upsilon_hess(
    contexts: &[GammaContext],
    pi: &DecodingIndicatorMatrix,
    k: usize,
    i: usize,
    u: [f64; 2],
) -> Matrix2<f64> {
    let mut h = Matrix2::zeros();
    for (j, c) in contexts.iter().enumerate() {
        let wgt = upsilon_weight(pi, k, i, j);
        if wgt != 0.0 {
            h += gamma_hess(c, u) * wgt;
        }
    }
    h
}

/// `psi_{k,i} = sum_{j>k} gamma_{j,i} + sum_{j<=k} (1 - pi_{j,i}) gamma_{j,i}`,
/// with `gammas[j]` the curvature bound of `Gamma_{j,i}`.
pub fn upsilon_curvature(gammas: &[f64], pi: &DecodingIndicatorMatrix, k: usize, i: usize) -> f64 {
    gammas
        .iter()
        .enumerate()
        .map(|(j, &g)| upsilon_weight(pi, k, i, j) * g)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Lower,
    Upper,
}

/// `value + grad'(u - anchor) -/+ (curvature / 2) ||u - anchor||^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticSurrogate {
    pub anchor: [f64; 2],
    pub value: f64,
    pub grad: Vector2<f64>,
    pub curvature: f64,
    pub sense: Sense,
}

impl QuadraticSurrogate {
    pub fn eval(&self, u: [f64; 2]) -> f64 {
        let d = Vector2::new(u[0] - self.anchor[0], u[1] - self.anchor[1]);
        let q = 0.5 * self.curvature * d.norm_squared();
        let lin = self.value + self.grad.dot(&d);
        match self.sense {
            Sense::Lower => lin - q,
            Sense::Upper => lin + q,
        }
    }
}

/// Global lower bound of `Phi` around `anchor`; its curvature bounds the
/// Hessian everywhere. Callers may try a smaller curvature such as
/// [`phi_curvature_bound`] as long as they check the true function.
pub fn surrogate_phi_lb(ctx: &PhiContext, anchor: [f64; 2]) -> QuadraticSurrogate {
    QuadraticSurrogate {
        anchor,
        value: phi_value(ctx, anchor),
        grad: phi_grad(ctx, anchor),
        curvature: ctx.sum.global_curvature(),
        sense: Sense::Lower,
    }
}

/// Global lower bound of `Gamma` around `anchor`.
pub fn surrogate_gamma_lb(ctx: &GammaContext, anchor: [f64; 2]) -> QuadraticSurrogate {
    QuadraticSurrogate {
        anchor,
        value: gamma_value(ctx, anchor),
        grad: gamma_grad(ctx, anchor),
        curvature: ctx.sum.global_curvature(),
        sense: Sense::Lower,
    }
}

/// Global upper bound of `Upsilon_{k,i}` around `anchor`.
pub fn surrogate_upsilon_ub(
    contexts: &[GammaContext],
    pi: &DecodingIndicatorMatrix,
    k: usize,
    i: usize,
    noise: f64,
    anchor: [f64; 2],
) -> QuadraticSurrogate {
    let gammas: Vec<f64> = contexts.iter().map(|c| c.sum.global_curvature()).collect();
    QuadraticSurrogate {
        anchor,
        value: upsilon_value(contexts, pi, k, i, noise, anchor),
        grad: upsilon_grad(contexts, pi, k, i, anchor),
        curvature: upsilon_curvature(&gammas, pi, k, i),
        sense: Sense::Upper,
    }
}

/// First-order lower bound of `||u - other||^2` around `anchor`.
pub fn surrogate_distance_lb(anchor: [f64; 2], other: [f64; 2]) -> QuadraticSurrogate {
    let d = Vector2::new(anchor[0] - other[0], anchor[1] - other[1]);
    QuadraticSurrogate {
        anchor,
        value: d.norm_squared(),
        grad: d * 2.0,
        curvature: 0.0,
        sense: Sense::Lower,
    }
}

/// Linear lower bound of `log2(1 + 1/(alpha beta))` around `(alpha_t, beta_t)`.
pub fn rate_surrogate_theta(alpha: f64, beta: f64, alpha_t: f64, beta_t: f64) -> Result<f64, CoreError> {
    if !(alpha_t > 0.0 && beta_t > 0.0) {
        return Err(CoreError::InvalidArgument(format!(
            "rate surrogate anchors must be positive, got ({alpha_t}, {beta_t})"
        )));
    }
    let (ca, cb) = theta_coefficients(alpha_t, beta_t);
    Ok((1.0 + 1.0 / (alpha_t * beta_t)).log2() - ca * (alpha - alpha_t) - cb * (beta - beta_t))
}

/// Slopes `(d/d alpha, d/d beta)` of the rate surrogate, returned as positive magnitudes.
pub fn theta_coefficients(alpha_t: f64, beta_t: f64) -> (f64, f64) {
    (
        LOG2_E / (alpha_t + alpha_t * alpha_t * beta_t),
        LOG2_E / (beta_t + beta_t * beta_t * alpha_t),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{channel_gain, channel_vector, sample_realization, SystemConfig};

    fn fd_grad(f: impl Fn([f64; 2]) -> f64, u: [f64; 2], h: f64) -> Vector2<f64> {
        Vector2::new(
            (f([u[0] + h, u[1]]) - f([u[0] - h, u[1]])) / (2.0 * h),
            (f([u[0], u[1] + h]) - f([u[0], u[1] - h])) / (2.0 * h),
        )
    }

    #[test]
    fn phi_matches_channel_gain() {
        let cfg = SystemConfig::default();
        let real = sample_realization(&cfg, 3);
        let ctx = PhiContext::new(&real, cfg.wavelength);
        for u in [[0.0, 0.0], [0.05, -0.11], [-0.13, 0.02]] {
            let apv = AntennaPositionVector::new(vec![u]);
            let direct: f64 = real
                .users
                .iter()
                .map(|us| channel_gain(&apv, us, cfg.wavelength))
                .sum();
            let v = phi_value(&ctx, u);
            assert!((v - direct).abs() <= 1e-10 * direct.abs());
        }
    }

    #[test]
    fn phi_single_path_is_constant() {
        let mut cfg = SystemConfig::default();
        cfg.num_paths = 1;
        cfg.num_users = 1;
        let real = sample_realization(&cfg, 5);
        let ctx = PhiContext::new(&real, cfg.wavelength);
        let f2 = real.users[0].prv[0].norm_sqr();
        assert!((phi_value(&ctx, [0.1, 0.07]) - f2).abs() < 1e-20);
        assert_eq!(phi_grad(&ctx, [0.1, 0.07]), Vector2::zeros());
        assert_eq!(phi_hess(&ctx, [0.1, 0.07]), Matrix2::zeros());
        assert_eq!(phi_curvature_bound(&ctx, [0.1, 0.07]), 0.0);
    }

    #[test]
    fn phi_gradient_without_y_dependence() {
        let user = UserChannel {
            theta: vec![PI / 2.0, PI / 2.0],
            phi: vec![0.0, PI],
            prv: vec![Complex64::new(1.0, 0.2), Complex64::new(-0.3, 0.5)],
            distance: 50.0,
        };
        let real = ChannelRealization { users: vec![user] };
        let ctx = PhiContext::new(&real, 0.1);
        let g = phi_grad(&ctx, [0.013, 0.021]);
        assert!(g[1].abs() < 1e-12 * g[0].abs().max(1.0));
    }

    #[test]
    fn gamma_matches_inner_product() {
        let cfg = SystemConfig::default();
        let real = sample_realization(&cfg, 11);
        let apv = AntennaPositionVector::new(vec![
            [0.0, 0.0],
            [0.06, 0.0],
            [0.0, 0.07],
            [-0.1, -0.1],
        ]);
        let w: Vec<CVec> = (0..cfg.num_users)
            .map(|k| {
                CVec::from_fn(4, |r, _| {
                    Complex64::new((r + k) as f64 * 0.1 + 0.2, 0.3 - r as f64 * 0.05)
                })
            })
            .collect();
        for m in 0..4 {
            let ctx = build_gamma_context(&w, &apv, &real, cfg.wavelength, m, 1, 2).unwrap();
            assert!(ctx.matches(&w, &apv));
            let h = channel_vector(&apv, &real.users[2], cfg.wavelength);
            let direct = h.dotc(&w[1]).norm_sqr();
            let v = gamma_value(&ctx, apv.positions[m]);
            assert!((v - direct).abs() <= 1e-10 * direct);
            let fd = fd_grad(|u| gamma_value(&ctx, u), apv.positions[m], 1e-6 * cfg.wavelength);
            let g = gamma_grad(&ctx, apv.positions[m]);
            assert!((g - fd).norm() <= 1e-5 * g.norm().max(1e-30));
        }
        assert!(build_gamma_context(&w, &apv, &real, cfg.wavelength, 4, 0, 0).is_err());
    }

    #[test]
    fn gamma_zero_beamformer() {
        let cfg = SystemConfig::default();
        let real = sample_realization(&cfg, 2);
        let apv = AntennaPositionVector::new(vec![[0.0, 0.0], [0.05, 0.0]]);
        let w = vec![CVec::zeros(2); cfg.num_users];
        let ctx = build_gamma_context(&w, &apv, &real, cfg.wavelength, 0, 0, 1).unwrap();
        assert_eq!(gamma_value(&ctx, [0.01, 0.02]), 0.0);
        assert_eq!(gamma_grad(&ctx, [0.01, 0.02]), Vector2::zeros());
        assert_eq!(ctx.b, DMatrix::zeros(cfg.num_paths, cfg.num_paths));
        assert!(ctx.c.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn theta_examples() {
        let v = rate_surrogate_theta(2.0, 1.0, 1.0, 1.0).unwrap();
        assert!((v - (1.0 - LOG2_E / 2.0)).abs() < 1e-12);
        assert!(v <= 1.5f64.log2());
        let a = rate_surrogate_theta(0.3, 2.0, 0.3, 2.0).unwrap();
        assert!((a - (1.0 + 1.0 / 0.6f64).log2()).abs() < 1e-15);
        assert!(rate_surrogate_theta(1.0, 1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn lambda_max_matches_eigen() {
        let h = Matrix2::new(1.0, 2.0, 2.0, -3.0);
        let e = nalgebra::SymmetricEigen::new(h).eigenvalues.max();
        assert!((lambda_max_2x2(&h) - e).abs() < 1e-12);
    }
}
