//! Homogeneous self-dual primal-dual interior-point method with
//! Nesterov–Todd scaling and a Mehrotra predictor-corrector.
//!
//! Internally the problem is the minimisation
//!
//! ```text
//! minimize c' x   s.t.  A x = b,  G x + s = h,  s in K
//! ```
//!
//! with `c = -objective`.

use crate::cones::{
    dot, jordan_divide, jordan_product, max_step, min_eig, norm, unit, BlockScaling, Cone,
    ScaleOp,
};
use crate::problem::{ConicProblem, LinExpr, Var};
use nalgebra::{DMatrix, DVector};

/// Termination status of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    /// A certificate of primal infeasibility was found; `y`, `z` hold it.
    Infeasible,
    /// A certificate of dual infeasibility (unbounded objective) was found; `x` holds the ray.
    Unbounded,
    MaxIterations,
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct Settings {
    pub max_iter: usize,
    pub abstol: f64,
    pub reltol: f64,
    pub feastol: f64,
    pub refinement_steps: usize,
    /// Accuracy at which an earlier iterate is reported as optimal when the
    /// solver later stalls or fails.
    pub reduced_tol: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            max_iter: 100,
            abstol: 1e-7,
            reltol: 1e-7,
            feastol: 1e-7,
            refinement_steps: 3,
            reduced_tol: 1e-7,
        }
    }
}

/// Result of a solve. For `Optimal`, `MaxIterations` and `NumericalFailure`
/// the vectors hold the (last) iterate normalised by the homogenising variable.
#[derive(Debug, Clone)]
pub struct Solution {
    pub status: Status,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub s: Vec<f64>,
    /// Value of the maximisation objective at `x`.
    pub objective: f64,
    /// Value of the dual bound on the maximisation objective.
    pub dual_objective: f64,
    /// Relative primal residual `max(||A x - b||, ||G x + s - h||)`, scaled.
    pub primal_residual: f64,
    /// Relative dual residual `||A' y + G' z + c||`, scaled.
    pub dual_residual: f64,
    /// Complementarity `s' z`.
    pub gap: f64,
    pub iterations: usize,
}

impl Solution {
    pub fn var(&self, v: Var) -> f64 {
        self.x[v.0]
    }

    pub fn value(&self, e: &LinExpr) -> f64 {
        e.eval(&self.x)
    }

    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }
}

struct Block {
    cone: Cone,
    off: usize,
    cols: Vec<usize>,
    g: DMatrix<f64>,
}

struct Data {
    n: usize,
    p: usize,
    m: usize,
    c: Vec<f64>,
    b: Vec<f64>,
    h: Vec<f64>,
    a: DMatrix<f64>,
    blocks: Vec<Block>,
}

impl Data {
    fn new(prob: &ConicProblem) -> Self {
        let n = prob.num_vars();
        let p = prob.num_eq();
        let m = prob.num_cone_rows();
        let mut c = vec![0.0; n];
        for &(i, v) in &prob.objective {
            c[i] -= v;
        }
        let mut a = DMatrix::zeros(p, n);
        for (r, row) in prob.a.iter().enumerate() {
            for &(j, v) in row {
                a[(r, j)] += v;
            }
        }
        let mut blocks = Vec::new();
        let mut off = 0;
        let mut push_block = |cone: Cone, off: usize| {
            let dim = cone.dim();
            let mut cols: Vec<usize> = prob.g[off..off + dim]
                .iter()
                .flat_map(|r| r.iter().map(|&(j, _)| j))
                .collect();
            cols.sort_unstable();
            cols.dedup();
            let mut g = DMatrix::zeros(dim, cols.len());
            for (r, row) in prob.g[off..off + dim].iter().enumerate() {
                for &(j, v) in row {
                    let k = cols.binary_search(&j).unwrap();
                    g[(r, k)] += v;
                }
            }
            blocks.push(Block { cone, off, cols, g });
        };
        for cone in &prob.cones {
            match *cone {
                Cone::NonNeg(d) => {
                    for k in 0..d {
                        push_block(Cone::NonNeg(1), off + k);
                    }
                }
                _ => push_block(*cone, off),
            }
            off += cone.dim();
        }
        Data {
            n,
            p,
            m,
            c,
            b: prob.b.clone(),
            h: prob.h.clone(),
            a,
            blocks,
        }
    }

    fn degree(&self) -> usize {
        self.blocks.iter().map(|b| b.cone.degree()).sum()
    }

    fn gx(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.m];
        for blk in &self.blocks {
            for r in 0..blk.cone.dim() {
                let mut acc = 0.0;
                for (k, &j) in blk.cols.iter().enumerate() {
                    acc += blk.g[(r, k)] * x[j];
                }
                out[blk.off + r] = acc;
            }
        }
        out
    }

    fn gtz(&self, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for blk in &self.blocks {
            for (k, &j) in blk.cols.iter().enumerate() {
                let mut acc = 0.0;
                for r in 0..blk.cone.dim() {
                    acc += blk.g[(r, k)] * z[blk.off + r];
                }
                out[j] += acc;
            }
        }
        out
    }

    fn ax(&self, x: &[f64]) -> Vec<f64> {
        let xv = DVector::from_column_slice(x);
        (&self.a * xv).as_slice().to_vec()
    }

    fn aty(&self, y: &[f64]) -> Vec<f64> {
        let yv = DVector::from_column_slice(y);
        (self.a.transpose() * yv).as_slice().to_vec()
    }

    fn scale(&self, sc: &[BlockScaling], op: ScaleOp, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.m];
        for (blk, s) in self.blocks.iter().zip(sc) {
            let d = blk.cone.dim();
            s.apply(op, &v[blk.off..blk.off + d], &mut out[blk.off..blk.off + d]);
        }
        out
    }

    fn unit(&self) -> Vec<f64> {
        let mut e = vec![0.0; self.m];
        for blk in &self.blocks {
            let d = blk.cone.dim();
            unit(&blk.cone, &mut e[blk.off..blk.off + d]);
        }
        e
    }

    /// `max_b -min_eig(v_b)`.
    fn max_violation(&self, v: &[f64]) -> f64 {
        self.blocks
            .iter()
            .map(|blk| -min_eig(&blk.cone, &v[blk.off..blk.off + blk.cone.dim()]))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

enum Factor {
    Chol(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Lu(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
    /// LU of the full augmented system in `(x, y, z)`.
    Augmented(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

struct Kkt<'a> {
    data: &'a Data,
    sc: &'a [BlockScaling],
    gt: Vec<DMatrix<f64>>,
    fact: Factor,
    refinement: usize,
}

impl<'a> Kkt<'a> {
    fn new(data: &'a Data, sc: &'a [BlockScaling], refinement: usize, augmented: bool) -> Option<Self> {
        if augmented {
            return Self::new_augmented(data, sc, refinement);
        }
        let n = data.n;
        let p = data.p;
        let mut hmat = DMatrix::<f64>::zeros(n, n);
        let mut gt = Vec::with_capacity(data.blocks.len());
        for (blk, s) in data.blocks.iter().zip(sc) {
            let d = blk.cone.dim();
            let nc = blk.cols.len();
            let mut gb = DMatrix::zeros(d, nc);
            let mut col = vec![0.0; d];
            let mut outc = vec![0.0; d];
            for k in 0..nc {
                for r in 0..d {
                    col[r] = blk.g[(r, k)];
                }
                s.apply(ScaleOp::WInvT, &col, &mut outc);
                for r in 0..d {
                    gb[(r, k)] = outc[r];
                }
            }
            let local = gb.transpose() * &gb;
            for (ki, &i) in blk.cols.iter().enumerate() {
                for (kj, &j) in blk.cols.iter().enumerate() {
                    hmat[(i, j)] += local[(ki, kj)];
                }
            }
            gt.push(gb);
        }
        let scale = (0..n).map(|i| hmat[(i, i)]).fold(1.0, f64::max);
        let reg = 1e-13 * scale;
        let fact = if p == 0 {
            let mut hr = hmat.clone();
            for i in 0..n {
                hr[(i, i)] += reg;
            }
            match hr.cholesky() {
                Some(ch) => Factor::Chol(ch),
                None => {
                    let mut hr = hmat;
                    for i in 0..n {
                        hr[(i, i)] += 1e-10 * scale;
                    }
                    Factor::Lu(hr.lu())
                }
            }
        } else {
            let mut k = DMatrix::zeros(n + p, n + p);
            k.view_mut((0, 0), (n, n)).copy_from(&hmat);
            for i in 0..n {
                k[(i, i)] += reg;
            }
            for r in 0..p {
                for j in 0..n {
                    let v = data.a[(r, j)];
                    k[(n + r, j)] = v;
                    k[(j, n + r)] = v;
                }
                k[(n + r, n + r)] = -reg;
            }
            Factor::Lu(k.lu())
        };
        if let Factor::Lu(lu) = &fact {
            if !lu.is_invertible() {
                return None;
            }
        }
        Some(Kkt {
            data,
            sc,
            gt,
            fact,
            refinement,
        })
    }

    /// `[reg I, A', G'; A, -reg I, 0; G, 0, -W'W]`.
    fn new_augmented(data: &'a Data, sc: &'a [BlockScaling], refinement: usize) -> Option<Self> {
        let (n, p, m) = (data.n, data.p, data.m);
        let dim = n + p + m;
        let mut k = DMatrix::<f64>::zeros(dim, dim);
        let mut gmax: f64 = 1.0;
        for blk in &data.blocks {
            for (kc, &j) in blk.cols.iter().enumerate() {
                for r in 0..blk.cone.dim() {
                    let v = blk.g[(r, kc)];
                    k[(n + p + blk.off + r, j)] = v;
                    k[(j, n + p + blk.off + r)] = v;
                    gmax = gmax.max(v.abs());
                }
            }
        }
        for r in 0..p {
            for j in 0..n {
                let v = data.a[(r, j)];
                k[(n + r, j)] = v;
                k[(j, n + r)] = v;
            }
        }
        for (blk, s) in data.blocks.iter().zip(sc) {
            let d = blk.cone.dim();
            let mut e = vec![0.0; d];
            let mut w = vec![0.0; d];
            let mut wtw = vec![0.0; d];
            for c in 0..d {
                e.iter_mut().for_each(|v| *v = 0.0);
                e[c] = 1.0;
                s.apply(ScaleOp::W, &e, &mut w);
                s.apply(ScaleOp::WT, &w, &mut wtw);
                for r in 0..d {
                    k[(n + p + blk.off + r, n + p + blk.off + c)] = -wtw[r];
                }
            }
        }
        let reg = 1e-13 * gmax;
        for i in 0..n {
            k[(i, i)] += reg;
        }
        for i in n..n + p {
            k[(i, i)] -= reg;
        }
        let lu = k.lu();
        if !lu.is_invertible() {
            return None;
        }
        Some(Kkt {
            data,
            sc,
            gt: Vec::new(),
            fact: Factor::Augmented(lu),
            refinement,
        })
    }

    fn solve_once(&self, r1: &[f64], r2: &[f64], r3: &[f64]) -> Option<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let d = self.data;
        if let Factor::Augmented(lu) = &self.fact {
            let rhs = DVector::from_iterator(d.n + d.p + d.m, r1.iter().chain(r2).chain(r3).copied());
            let sol = lu.solve(&rhs)?;
            let v = sol.as_slice();
            if v.iter().any(|x| !x.is_finite()) {
                return None;
            }
            return Some((
                v[..d.n].to_vec(),
                v[d.n..d.n + d.p].to_vec(),
                v[d.n + d.p..].to_vec(),
            ));
        }
        let n = d.n;
        let p = d.p;
        let w3 = d.scale(self.sc, ScaleOp::WInvT, r3);
        let mut rhs = DVector::zeros(n + p);
        for i in 0..n {
            rhs[i] = r1[i];
        }
        for i in 0..p {
            rhs[n + i] = r2[i];
        }
        for (blk, gb) in d.blocks.iter().zip(&self.gt) {
            let dim = blk.cone.dim();
            for (k, &j) in blk.cols.iter().enumerate() {
                let mut acc = 0.0;
                for r in 0..dim {
                    acc += gb[(r, k)] * w3[blk.off + r];
                }
                rhs[j] += acc;
            }
        }
        let sol = match &self.fact {
            Factor::Chol(ch) => ch.solve(&rhs),
            Factor::Lu(lu) => lu.solve(&rhs)?,
            Factor::Augmented(_) => unreachable!("handled above"),
        };
        let dx: Vec<f64> = sol.as_slice()[..n].to_vec();
        let dy: Vec<f64> = sol.as_slice()[n..].to_vec();
        let mut t = vec![0.0; d.m];
        for (blk, gb) in d.blocks.iter().zip(&self.gt) {
            let dim = blk.cone.dim();
            for r in 0..dim {
                let mut acc = 0.0;
                for (k, &j) in blk.cols.iter().enumerate() {
                    acc += gb[(r, k)] * dx[j];
                }
                t[blk.off + r] = acc - w3[blk.off + r];
            }
        }
        let dz = d.scale(self.sc, ScaleOp::WInv, &t);
        if dx.iter().chain(&dy).chain(&dz).any(|v| !v.is_finite()) {
            return None;
        }
        Some((dx, dy, dz))
    }

    /// Solves `[0 A' G'; A 0 0; G 0 -W'W] [dx; dy; dz] = [r1; r2; r3]`.
    fn solve(&self, r1: &[f64], r2: &[f64], r3: &[f64]) -> Option<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let d = self.data;
        let (mut dx, mut dy, mut dz) = self.solve_once(r1, r2, r3)?;
        let rnorm = 1.0 + norm(r1) + norm(r2) + norm(r3);
        for _ in 0..self.refinement {
            let aty = d.aty(&dy);
            let gtz = d.gtz(&dz);
            let e1: Vec<f64> = (0..d.n).map(|i| r1[i] - aty[i] - gtz[i]).collect();
            let ax = d.ax(&dx);
            let e2: Vec<f64> = (0..d.p).map(|i| r2[i] - ax[i]).collect();
            let gx = d.gx(&dx);
            let wz = d.scale(self.sc, ScaleOp::W, &dz);
            let wtwz = d.scale(self.sc, ScaleOp::WT, &wz);
            let e3: Vec<f64> = (0..d.m).map(|i| r3[i] - gx[i] + wtwz[i]).collect();
            let err = norm(&e1) + norm(&e2) + norm(&e3);
            if err <= 1e-14 * rnorm {
                break;
            }
            let (cx, cy, cz) = self.solve_once(&e1, &e2, &e3)?;
            for i in 0..d.n {
                dx[i] += cx[i];
            }
            for i in 0..d.p {
                dy[i] += cy[i];
            }
            for i in 0..d.m {
                dz[i] += cz[i];
            }
        }
        Some((dx, dy, dz))
    }
}

struct Direction {
    dx: Vec<f64>,
    dy: Vec<f64>,
    dz: Vec<f64>,
    ds: Vec<f64>,
    dtau: f64,
    dkappa: f64,
    ds_scaled: Vec<f64>,
    dz_scaled: Vec<f64>,
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Solves a conic problem.
/// Solves with the normal-equations KKT factorization, retrying with the
/// better-conditioned augmented system when that does not converge.
pub fn solve(prob: &ConicProblem, settings: &Settings) -> Solution {
    let first = solve_with(prob, settings, false);
    match first.status {
        Status::MaxIterations | Status::NumericalFailure => {
            let second = solve_with(prob, settings, true);
            if second.status == Status::MaxIterations || second.status == Status::NumericalFailure {
                first
            } else {
                second
            }
        }
        _ => first,
    }
}

fn solve_with(prob: &ConicProblem, settings: &Settings, augmented: bool) -> Solution {
    let data = Data::new(prob);
    let n = data.n;
    let p = data.p;
    let m = data.m;
    let deg = data.degree() as f64;

    let fail = |status: Status, iterations: usize| Solution {
        status,
        x: vec![0.0; n],
        y: vec![0.0; p],
        z: vec![0.0; m],
        s: vec![0.0; m],
        objective: f64::NAN,
        dual_objective: f64::NAN,
        primal_residual: f64::INFINITY,
        dual_residual: f64::INFINITY,
        gap: f64::INFINITY,
        iterations,
    };

    // starting point
    let ident: Vec<BlockScaling> = data.blocks.iter().map(|b| BlockScaling::identity(&b.cone)).collect();
    let Some(kkt0) = Kkt::new(&data, &ident, settings.refinement_steps, augmented) else {
        return fail(Status::NumericalFailure, 0);
    };
    let zero_n = vec![0.0; n];
    let zero_p = vec![0.0; p];
    let zero_m = vec![0.0; m];
    let Some((mut x, _, zz)) = kkt0.solve(&zero_n, &data.b, &data.h) else {
        return fail(Status::NumericalFailure, 0);
    };
    let mut s: Vec<f64> = zz.iter().map(|v| -v).collect();
    let negc: Vec<f64> = data.c.iter().map(|v| -v).collect();
    let Some((_, mut y, mut z)) = kkt0.solve(&negc, &zero_p, &zero_m) else {
        return fail(Status::NumericalFailure, 0);
    };
    drop(kkt0);
    let e = data.unit();
    if m > 0 {
        let ts = data.max_violation(&s);
        if ts >= -1e-8 * norm(&s).max(1.0) {
            axpy(1.0 + ts, &e, &mut s);
        }
        let tz = data.max_violation(&z);
        if tz >= -1e-8 * norm(&z).max(1.0) {
            axpy(1.0 + tz, &e, &mut z);
        }
    }
    let mut tau = 1.0;
    let mut kappa = 1.0;

    let resx0 = norm(&data.c).max(1.0);
    let resy0 = norm(&data.b).max(1.0);
    let resz0 = norm(&data.h).max(1.0);

    let mut last = fail(Status::MaxIterations, 0);
    let mut fallback: Option<Solution> = None;
    let finish = |last: Solution, fallback: Option<Solution>| match fallback {
        Some(mut f) => {
            f.status = Status::Optimal;
            f
        }
        None => last,
    };
    for iter in 0..=settings.max_iter {
        let aty = data.aty(&y);
        let gtz = data.gtz(&z);
        let ax = data.ax(&x);
        let gx = data.gx(&x);
        let hrx: Vec<f64> = (0..n).map(|i| -aty[i] - gtz[i]).collect();
        let hrz: Vec<f64> = (0..m).map(|i| s[i] + gx[i]).collect();
        let rx: Vec<f64> = (0..n).map(|i| -hrx[i] + data.c[i] * tau).collect();
        let ry: Vec<f64> = (0..p).map(|i| data.b[i] * tau - ax[i]).collect();
        let rz: Vec<f64> = (0..m).map(|i| hrz[i] - data.h[i] * tau).collect();
        let cx = dot(&data.c, &x);
        let by = dot(&data.b, &y);
        let hz = dot(&data.h, &z);
        let rt = kappa + cx + by + hz;
        let gap = dot(&s, &z);
        let mu = (gap + tau * kappa) / (deg + 1.0);
        let pcost = cx / tau;
        let dcost = -(by + hz) / tau;
        let ngap = gap / (tau * tau);
        let relgap = if pcost < 0.0 {
            ngap / -pcost
        } else if dcost > 0.0 {
            ngap / dcost
        } else {
            f64::INFINITY
        };
        let pres = (norm(&ry) / resy0).max(norm(&rz) / resz0) / tau;
        let dres = norm(&rx) / resx0 / tau;
        let pinfres = if hz + by < 0.0 {
            norm(&hrx) / resx0 / -(hz + by)
        } else {
            f64::INFINITY
        };
        let dinfres = if cx < 0.0 {
            (norm(&ax) / resy0).max(norm(&hrz) / resz0) / -cx
        } else {
            f64::INFINITY
        };

        let normalised = |status: Status| Solution {
            status,
            x: x.iter().map(|v| v / tau).collect(),
            y: y.iter().map(|v| v / tau).collect(),
            z: z.iter().map(|v| v / tau).collect(),
            s: s.iter().map(|v| v / tau).collect(),
            objective: -pcost + prob.objective_constant,
            dual_objective: -dcost + prob.objective_constant,
            primal_residual: pres,
            dual_residual: dres,
            gap: ngap,
            iterations: iter,
        };
        last = normalised(Status::MaxIterations);
        let rt_ok = settings.reduced_tol;
        if pres <= rt_ok && dres <= rt_ok && (ngap <= rt_ok || relgap <= rt_ok) {
            let better = fallback.as_ref().map_or(true, |f: &Solution| {
                f.primal_residual.max(f.dual_residual) >= pres.max(dres)
            });
            if better {
                fallback = Some(last.clone());
            }
        }

        if pres <= settings.feastol
            && dres <= settings.feastol
            && (ngap <= settings.abstol || relgap <= settings.reltol)
        {
            return normalised(Status::Optimal);
        }
        if pinfres <= settings.feastol {
            let k = -(hz + by);
            let mut sol = fail(Status::Infeasible, iter);
            sol.y = y.iter().map(|v| v / k).collect();
            sol.z = z.iter().map(|v| v / k).collect();
            return sol;
        }
        if dinfres <= settings.feastol {
            let k = -cx;
            let mut sol = fail(Status::Unbounded, iter);
            sol.x = x.iter().map(|v| v / k).collect();
            sol.s = s.iter().map(|v| v / k).collect();
            return sol;
        }
        if iter == settings.max_iter {
            break;
        }

        // scaling
        let mut lambda = vec![0.0; m];
        let mut sc = Vec::with_capacity(data.blocks.len());
        for blk in &data.blocks {
            let r = blk.off..blk.off + blk.cone.dim();
            match BlockScaling::compute(&blk.cone, &s[r.clone()], &z[r.clone()], &mut lambda[r]) {
                Some(w) => sc.push(w),
                None => {
                    last.status = Status::NumericalFailure;
                    return finish(last, fallback);
                }
            }
        }
        let Some(kkt) = Kkt::new(&data, &sc, settings.refinement_steps, augmented) else {
            last.status = Status::NumericalFailure;
            return finish(last, fallback);
        };
        let Some((x1, y1, z1)) = kkt.solve(&negc, &data.b, &data.h) else {
            last.status = Status::NumericalFailure;
            return finish(last, fallback);
        };
        let denom_base = dot(&data.c, &x1) + dot(&data.b, &y1) + dot(&data.h, &z1);

        let direction = |eta: f64, dsv: &[f64], dk: f64| -> Option<Direction> {
            let wtds = data.scale(&sc, ScaleOp::WT, dsv);
            let r1: Vec<f64> = rx.iter().map(|v| -eta * v).collect();
            let r2: Vec<f64> = ry.iter().map(|v| eta * v).collect();
            let r3: Vec<f64> = (0..m).map(|i| -eta * rz[i] - wtds[i]).collect();
            let (mut dx, mut dy, mut dz) = kkt.solve(&r1, &r2, &r3)?;
            let num = -eta * rt - dk / tau
                - (dot(&data.c, &dx) + dot(&data.b, &dy) + dot(&data.h, &dz));
            let den = denom_base - kappa / tau;
            let dtau = num / den;
            axpy(dtau, &x1, &mut dx);
            axpy(dtau, &y1, &mut dy);
            axpy(dtau, &z1, &mut dz);
            let dkappa = (dk - kappa * dtau) / tau;
            let dz_scaled = data.scale(&sc, ScaleOp::W, &dz);
            let ds_scaled: Vec<f64> = (0..m).map(|i| dsv[i] - dz_scaled[i]).collect();
            let ds = data.scale(&sc, ScaleOp::WT, &ds_scaled);
            if !dtau.is_finite() || !dkappa.is_finite() {
                return None;
            }
            Some(Direction {
                dx,
                dy,
                dz,
                ds,
                dtau,
                dkappa,
                ds_scaled,
                dz_scaled,
            })
        };
        let step_len = |d: &Direction| -> f64 {
            let mut a = f64::INFINITY;
            for blk in &data.blocks {
                let r = blk.off..blk.off + blk.cone.dim();
                a = a.min(max_step(&blk.cone, &lambda[r.clone()], &d.ds_scaled[r.clone()]));
                a = a.min(max_step(&blk.cone, &lambda[r.clone()], &d.dz_scaled[r]));
            }
            if d.dtau < 0.0 {
                a = a.min(-tau / d.dtau);
            }
            if d.dkappa < 0.0 {
                a = a.min(-kappa / d.dkappa);
            }
            a
        };

        // predictor
        let neg_lambda: Vec<f64> = lambda.iter().map(|v| -v).collect();
        let Some(aff) = direction(1.0, &neg_lambda, -tau * kappa) else {
            last.status = Status::NumericalFailure;
            return finish(last, fallback);
        };
        let alpha_aff = step_len(&aff).min(1.0);
        let sigma = (1.0 - alpha_aff).powi(3);

        // corrector
        let mut target = vec![0.0; m];
        let mut ll = vec![0.0; m];
        let mut cross = vec![0.0; m];
        for blk in &data.blocks {
            let r = blk.off..blk.off + blk.cone.dim();
            jordan_product(&blk.cone, &lambda[r.clone()], &lambda[r.clone()], &mut ll[r.clone()]);
            jordan_product(
                &blk.cone,
                &aff.ds_scaled[r.clone()],
                &aff.dz_scaled[r.clone()],
                &mut cross[r],
            );
        }
        let v: Vec<f64> = (0..m).map(|i| -ll[i] - cross[i] + sigma * mu * e[i]).collect();
        for blk in &data.blocks {
            let r = blk.off..blk.off + blk.cone.dim();
            jordan_divide(&blk.cone, &lambda[r.clone()], &v[r.clone()], &mut target[r]);
        }
        let dk = -tau * kappa - aff.dtau * aff.dkappa + sigma * mu;
        let Some(dir) = direction(1.0 - sigma, &target, dk) else {
            last.status = Status::NumericalFailure;
            return finish(last, fallback);
        };
        let alpha = (0.99 * step_len(&dir)).min(1.0);
        if !(alpha > 1e-14) {
            last.status = Status::NumericalFailure;
            return finish(last, fallback);
        }
        axpy(alpha, &dir.dx, &mut x);
        axpy(alpha, &dir.dy, &mut y);
        axpy(alpha, &dir.dz, &mut z);
        axpy(alpha, &dir.ds, &mut s);
        tau += alpha * dir.dtau;
        kappa += alpha * dir.dkappa;
    }
    finish(last, fallback)
}
