//! Symmetric cones, their Jordan algebra, and Nesterov–Todd scaling.
//!
//! Every vector handled by the solver is a concatenation of cone blocks. The
//! PSD blocks use the `svec` layout: the lower triangle stored column by column,
//! with off-diagonal entries multiplied by `sqrt(2)` so that the Euclidean inner
//! product of two `svec`s equals the trace inner product of the matrices.

use nalgebra::{DMatrix, SymmetricEigen};
use std::f64::consts::SQRT_2;

/// A single cone block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cone {
    /// `{ s : s_i >= 0 }` of the given dimension.
    NonNeg(usize),
    /// `{ (t, x) : t >= ||x|| }` of the given total dimension (`>= 1`).
    Soc(usize),
    /// Symmetric positive semidefinite matrices of the given order, in `svec` form.
    Psd(usize),
}

impl Cone {
    /// Length of the block in the stacked slack vector.
    pub fn dim(&self) -> usize {
        match *self {
            Cone::NonNeg(d) | Cone::Soc(d) => d,
            Cone::Psd(n) => n * (n + 1) / 2,
        }
    }

    /// Barrier degree (rank of the Jordan algebra).
    pub fn degree(&self) -> usize {
        match *self {
            Cone::NonNeg(d) => d,
            Cone::Soc(_) => 1,
            Cone::Psd(n) => n,
        }
    }
}

pub fn svec_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Index of entry `(i, j)` with `i >= j` inside an `svec` of order `n`.
pub fn svec_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i >= j && i < n);
    // columns 0..j contribute n + (n-1) + ... + (n-j+1) entries
    j * n - j * j.saturating_sub(1) / 2 + (i - j)
}

pub fn svec_to_mat(v: &[f64], n: usize) -> DMatrix<f64> {
    debug_assert_eq!(v.len(), svec_len(n));
    let mut m = DMatrix::zeros(n, n);
    let mut idx = 0;
    for j in 0..n {
        for i in j..n {
            if i == j {
                m[(i, j)] = v[idx];
            } else {
                let x = v[idx] / SQRT_2;
                m[(i, j)] = x;
                m[(j, i)] = x;
            }
            idx += 1;
        }
    }
    m
}

pub fn mat_to_svec(m: &DMatrix<f64>, out: &mut [f64]) {
    let n = m.nrows();
    debug_assert_eq!(out.len(), svec_len(n));
    let mut idx = 0;
    for j in 0..n {
        for i in j..n {
            out[idx] = if i == j {
                m[(i, j)]
            } else {
                0.5 * (m[(i, j)] + m[(j, i)]) * SQRT_2
            };
            idx += 1;
        }
    }
}

/// Identity element of a block.
pub fn unit(cone: &Cone, out: &mut [f64]) {
    out.fill(0.0);
    match *cone {
        Cone::NonNeg(_) => out.fill(1.0),
        Cone::Soc(_) => out[0] = 1.0,
        Cone::Psd(n) => {
            let mut idx = 0;
            for j in 0..n {
                out[idx] = 1.0;
                idx += n - j;
            }
        }
    }
}

/// Smallest "eigenvalue" of a block element with respect to its Jordan algebra.
pub fn min_eig(cone: &Cone, x: &[f64]) -> f64 {
    match *cone {
        Cone::NonNeg(_) => x.iter().copied().fold(f64::INFINITY, f64::min),
        Cone::Soc(_) => x[0] - norm(&x[1..]),
        Cone::Psd(n) => {
            let m = svec_to_mat(x, n);
            SymmetricEigen::new(m)
                .eigenvalues
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min)
        }
    }
}

/// Jordan product `x ∘ y`.
pub fn jordan_product(cone: &Cone, x: &[f64], y: &[f64], out: &mut [f64]) {
    match *cone {
        Cone::NonNeg(_) => {
            for i in 0..x.len() {
                out[i] = x[i] * y[i];
            }
        }
        Cone::Soc(_) => {
            out[0] = dot(x, y);
            for i in 1..x.len() {
                out[i] = x[0] * y[i] + y[0] * x[i];
            }
        }
        Cone::Psd(n) => {
            let a = svec_to_mat(x, n);
            let b = svec_to_mat(y, n);
            let p = &a * &b;
            let sym = (&p + p.transpose()) * 0.5;
            mat_to_svec(&sym, out);
        }
    }
}

/// Solves `lambda ∘ u = v` for `u`. For PSD blocks `lambda` must be diagonal,
/// which is always the case for the scaled point of an NT scaling.
pub fn jordan_divide(cone: &Cone, lambda: &[f64], v: &[f64], out: &mut [f64]) {
    match *cone {
        Cone::NonNeg(_) => {
            for i in 0..v.len() {
                out[i] = v[i] / lambda[i];
            }
        }
        Cone::Soc(_) => {
            let l0 = lambda[0];
            let l1 = &lambda[1..];
            let det = l0 * l0 - dot(l1, l1);
            let u0 = (l0 * v[0] - dot(l1, &v[1..])) / det;
            out[0] = u0;
            for i in 1..v.len() {
                out[i] = (v[i] - u0 * lambda[i]) / l0;
            }
        }
        Cone::Psd(n) => {
            let diag = psd_diag(lambda, n);
            let mut idx = 0;
            for j in 0..n {
                for i in j..n {
                    out[idx] = 2.0 * v[idx] / (diag[i] + diag[j]);
                    idx += 1;
                }
            }
        }
    }
}

fn psd_diag(v: &[f64], n: usize) -> Vec<f64> {
    let mut d = Vec::with_capacity(n);
    let mut idx = 0;
    for j in 0..n {
        d.push(v[idx]);
        idx += n - j;
    }
    d
}

/// Largest `alpha >= 0` (possibly infinite) with `lambda + alpha * d` in the cone,
/// where `lambda` is the scaled point of an NT scaling (interior, diagonal for PSD).
pub fn max_step(cone: &Cone, lambda: &[f64], d: &[f64]) -> f64 {
    match *cone {
        Cone::NonNeg(_) => {
            let mut a = f64::INFINITY;
            for i in 0..d.len() {
                if d[i] < 0.0 {
                    a = a.min(-lambda[i] / d[i]);
                }
            }
            a
        }
        Cone::Soc(_) => {
            let qa = d[0] * d[0] - dot(&d[1..], &d[1..]);
            let qb = lambda[0] * d[0] - dot(&lambda[1..], &d[1..]);
            let qc = lambda[0] * lambda[0] - dot(&lambda[1..], &lambda[1..]);
            smallest_positive_root(qa, qb, qc)
        }
        Cone::Psd(n) => {
            let diag = psd_diag(lambda, n);
            let mut m = svec_to_mat(d, n);
            for i in 0..n {
                for j in 0..n {
                    m[(i, j)] /= (diag[i] * diag[j]).sqrt();
                }
            }
            let mn = SymmetricEigen::new(m)
                .eigenvalues
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
            if mn < 0.0 {
                -1.0 / mn
            } else {
                f64::INFINITY
            }
        }
    }
}

/// Smallest positive root of `a t^2 + 2 b t + c` with `c > 0`, or infinity.
fn smallest_positive_root(a: f64, b: f64, c: f64) -> f64 {
    if a.abs() < 1e-300 {
        return if b < 0.0 { -c / (2.0 * b) } else { f64::INFINITY };
    }
    let disc = b * b - a * c;
    if disc < 0.0 {
        return f64::INFINITY;
    }
    let sq = disc.sqrt();
    // numerically stable pair of roots
    let q = -(b + b.signum() * sq);
    let (r1, r2) = if q != 0.0 { (q / a, c / q) } else { (-b / a, -b / a) };
    let mut best = f64::INFINITY;
    for r in [r1, r2] {
        if r > 0.0 && r < best {
            best = r;
        }
    }
    best
}

/// Nesterov–Todd scaling of one block.
#[derive(Debug, Clone)]
pub enum BlockScaling {
    /// `W = diag(d)`.
    NonNeg { d: Vec<f64> },
    /// `W = beta (2 v v' - J)`, symmetric.
    Soc { beta: f64, v: Vec<f64> },
    /// `W x = svec(R' X R)`.
    Psd {
        r: DMatrix<f64>,
        rinv: DMatrix<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleOp {
    W,
    WT,
    WInv,
    WInvT,
}

impl BlockScaling {
    pub fn identity(cone: &Cone) -> Self {
        match *cone {
            Cone::NonNeg(d) => BlockScaling::NonNeg { d: vec![1.0; d] },
            Cone::Soc(d) => {
                let mut v = vec![0.0; d];
                v[0] = 1.0;
                // 2 e e' - J = I
                BlockScaling::Soc { beta: 1.0, v }
            }
            Cone::Psd(n) => BlockScaling::Psd {
                r: DMatrix::identity(n, n),
                rinv: DMatrix::identity(n, n),
            },
        }
    }

    /// Computes the NT scaling for interior `s`, `z` and returns it with the
    /// scaled point `lambda = W z = W^{-T} s`. Returns `None` if either point
    /// is not strictly interior.
    pub fn compute(cone: &Cone, s: &[f64], z: &[f64], lambda: &mut [f64]) -> Option<Self> {
        match *cone {
            Cone::NonNeg(_) => {
                let mut d = Vec::with_capacity(s.len());
                for i in 0..s.len() {
                    if !(s[i] > 0.0 && z[i] > 0.0) {
                        return None;
                    }
                    d.push((s[i] / z[i]).sqrt());
                    lambda[i] = (s[i] * z[i]).sqrt();
                }
                Some(BlockScaling::NonNeg { d })
            }
            Cone::Soc(dim) => {
                let s_det = s[0] * s[0] - dot(&s[1..], &s[1..]);
                let z_det = z[0] * z[0] - dot(&z[1..], &z[1..]);
                if !(s[0] > 0.0 && z[0] > 0.0 && s_det > 0.0 && z_det > 0.0) {
                    return None;
                }
                let s_nrm = s_det.sqrt();
                let z_nrm = z_det.sqrt();
                let beta = (s_nrm / z_nrm).sqrt();
                let sb: Vec<f64> = s.iter().map(|x| x / s_nrm).collect();
                let zb: Vec<f64> = z.iter().map(|x| x / z_nrm).collect();
                let gamma = ((1.0 + dot(&sb, &zb)) / 2.0).sqrt();
                let mut wb = vec![0.0; dim];
                wb[0] = (sb[0] + zb[0]) / (2.0 * gamma);
                for i in 1..dim {
                    wb[i] = (sb[i] - zb[i]) / (2.0 * gamma);
                }
                let denom = (2.0 * (wb[0] + 1.0)).sqrt();
                let mut v = wb;
                v[0] += 1.0;
                for x in v.iter_mut() {
                    *x /= denom;
                }
                let sc = BlockScaling::Soc { beta, v };
                sc.apply(ScaleOp::W, z, lambda);
                Some(sc)
            }
            Cone::Psd(n) => {
                let sm = svec_to_mat(s, n);
                let zm = svec_to_mat(z, n);
                let ls = sm.cholesky()?.l();
                let lz = zm.cholesky()?.l();
                let prod = lz.transpose() * &ls;
                let svd = prod.svd(true, true);
                let u = svd.u?;
                let vt = svd.v_t?;
                let sv = svd.singular_values;
                if sv.iter().any(|&x| !(x > 0.0)) {
                    return None;
                }
                let mut r = &ls * vt.transpose();
                let mut rinv = u.transpose() * lz.transpose();
                for k in 0..n {
                    let f = sv[k].sqrt();
                    for i in 0..n {
                        r[(i, k)] /= f;
                        rinv[(k, i)] /= f;
                    }
                }
                lambda.fill(0.0);
                let mut idx = 0;
                for j in 0..n {
                    lambda[idx] = sv[j];
                    idx += n - j;
                }
                Some(BlockScaling::Psd { r, rinv })
            }
        }
    }

    pub fn apply(&self, op: ScaleOp, x: &[f64], out: &mut [f64]) {
        match self {
            BlockScaling::NonNeg { d } => match op {
                ScaleOp::W | ScaleOp::WT => {
                    for i in 0..x.len() {
                        out[i] = d[i] * x[i];
                    }
                }
                ScaleOp::WInv | ScaleOp::WInvT => {
                    for i in 0..x.len() {
                        out[i] = x[i] / d[i];
                    }
                }
            },
            BlockScaling::Soc { beta, v } => {
                // J x
                let jx = |k: usize| if k == 0 { x[0] } else { -x[k] };
                match op {
                    ScaleOp::W | ScaleOp::WT => {
                        let vx = dot(v, x);
                        for k in 0..x.len() {
                            out[k] = beta * (2.0 * v[k] * vx - jx(k));
                        }
                    }
                    ScaleOp::WInv | ScaleOp::WInvT => {
                        // (1/beta) (2 J v v' J - J) x
                        let mut vjx = v[0] * x[0];
                        for k in 1..x.len() {
                            vjx -= v[k] * x[k];
                        }
                        for k in 0..x.len() {
                            let jv = if k == 0 { v[0] } else { -v[k] };
                            out[k] = (2.0 * jv * vjx - jx(k)) / beta;
                        }
                    }
                }
            }
            BlockScaling::Psd { r, rinv } => {
                let n = r.nrows();
                let xm = svec_to_mat(x, n);
                let res = match op {
                    ScaleOp::W => r.transpose() * xm * r,
                    ScaleOp::WT => r * xm * r.transpose(),
                    ScaleOp::WInv => rinv.transpose() * xm * rinv,
                    ScaleOp::WInvT => rinv * xm * rinv.transpose(),
                };
                mat_to_svec(&res, out);
            }
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Offsets of each block inside the stacked vector.
pub fn offsets(cones: &[Cone]) -> Vec<usize> {
    let mut out = Vec::with_capacity(cones.len() + 1);
    let mut o = 0;
    out.push(0);
    for c in cones {
        o += c.dim();
        out.push(o);
    }
    out
}
