//! Primal-dual interior-point method on the homogeneous self-dual embedding.
//!
//! The problem `min c'x  s.t.  Ax = b,  F0 + sum_i x_i F_i >= 0` is written as
//! `Gx + s = h` with `G x = -sum_i x_i F_i`, `h = F0`, and solved with
//! Nesterov-Todd scaling and a Mehrotra predictor-corrector. The reduced
//! Newton system is solved through a dense Cholesky factorization of
//! `H = G' (W^-1 (.) W^-1) G` followed by the Schur complement of the
//! equality rows.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use faer::linalg::matmul::matmul;
use faer::linalg::triangular_solve::{solve_lower_triangular_in_place, solve_upper_triangular_in_place};
use faer::{Accum, Mat, Par, Side};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::ConicProblem;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub eps_feas: f64,
    pub eps_gap: f64,
    pub max_iter: usize,
    /// Accuracy accepted as `NearOptimal` when progress stalls.
    pub near_tol: f64,
    pub verbose: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            eps_feas: 1e-8,
            eps_gap: 1e-8,
            max_iter: 200,
            near_tol: 1e-6,
            verbose: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    /// Progress stalled with residuals and gap below `near_tol`.
    NearOptimal,
    PrimalInfeasible,
    DualInfeasible,
    IllPosed,
    IterationLimit,
}

impl SolveStatus {
    pub fn is_solved(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::NearOptimal)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

impl Residuals {
    fn worst(&self) -> f64 {
        self.primal.max(self.dual).max(self.gap)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// Primal point (the moment vector).
    pub z: Vec<f64>,
    /// Multipliers of the equality rows, sign convention `c + A'y = sum <F_i, Z>`.
    pub y: Vec<f64>,
    /// Dual PSD matrices, one per block.
    pub dual_blocks: Vec<DMatrix<f64>>,
    pub objective_value: f64,
    pub dual_value: f64,
    pub residuals: Residuals,
    pub iterations: usize,
    pub wall_time: Duration,
}

struct Block {
    dim: usize,
    f0: DMatrix<f64>,
    /// Variables touching the block, ascending, with their upper-triangle entries.
    vars: Vec<usize>,
    mats: Vec<Vec<(usize, usize, f64)>>,
}

impl Block {
    fn from_map(map: &crate::moment::LinearMatrixMap) -> Self {
        let dim = map.dim();
        let mut f0 = DMatrix::zeros(dim, dim);
        let mut per_var: BTreeMap<usize, BTreeMap<(usize, usize), f64>> = BTreeMap::new();
        let weight = if map.is_symmetric() { 1.0 } else { 0.5 };
        for (r, c, f) in map.stored() {
            let (a, b) = if r <= c { (r, c) } else { (c, r) };
            let w = if a == b { 1.0 } else { weight };
            if f.constant() != 0.0 {
                f0[(a, b)] += w * f.constant();
                if a != b {
                    f0[(b, a)] = f0[(a, b)];
                }
            }
            for &(i, v) in f.terms() {
                *per_var.entry(i).or_default().entry((a, b)).or_insert(0.0) += w * v;
            }
        }
        let mut vars = Vec::new();
        let mut mats = Vec::new();
        for (i, entries) in per_var {
            let list: Vec<_> = entries.into_iter().filter(|e| e.1 != 0.0).map(|((a, b), v)| (a, b, v)).collect();
            if !list.is_empty() {
                vars.push(i);
                mats.push(list);
            }
        }
        Self { dim, f0, vars, mats }
    }

    /// `sum_i x_i F_i`.
    fn apply(&self, x: &[f64]) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.dim, self.dim);
        for (&i, list) in self.vars.iter().zip(&self.mats) {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            for &(r, c, v) in list {
                out[(r, c)] += xi * v;
            }
        }
        symmetrize_upper(&mut out);
        out
    }

    /// Adds `<F_i, m>` to `out[i]` for each variable.
    fn adjoint_add(&self, m: &DMatrix<f64>, out: &mut [f64], scale: f64) {
        for (&i, list) in self.vars.iter().zip(&self.mats) {
            out[i] += scale * entry_dot(list, m);
        }
    }
}

fn entry_dot(list: &[(usize, usize, f64)], m: &DMatrix<f64>) -> f64 {
    list.iter()
        .map(|&(r, c, v)| if r == c { v * m[(r, c)] } else { v * (m[(r, c)] + m[(c, r)]) })
        .sum()
}

fn symmetrize_upper(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for c in 0..n {
        for r in 0..c {
            m[(c, r)] = m[(r, c)];
        }
    }
}

fn sym(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

fn fdot(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.dot(b)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn blocks_dot(a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| fdot(x, y)).sum()
}

fn blocks_norm(a: &[DMatrix<f64>]) -> f64 {
    blocks_dot(a, a).sqrt()
}

/// Solver-side data: dense objective, sparse equality rows, block operators.
struct Data {
    n: usize,
    c: Vec<f64>,
    c0: f64,
    a_rows: Vec<Vec<(usize, f64)>>,
    b: Vec<f64>,
    blocks: Vec<Block>,
}

impl Data {
    fn new(p: &ConicProblem) -> Self {
        let mut c = vec![0.0; p.nz];
        for &(i, v) in p.objective.terms() {
            c[i] += v;
        }
        Self {
            n: p.nz,
            c,
            c0: p.objective.constant(),
            a_rows: p.eq_rows.iter().map(|r| r.terms().to_vec()).collect(),
            b: p.eq_rhs.iter().zip(&p.eq_rows).map(|(b, r)| b - r.constant()).collect(),
            blocks: p.psd_blocks.iter().map(|b| Block::from_map(&b.map)).filter(|b| b.dim > 0).collect(),
        }
    }

    fn a_mul(&self, x: &[f64]) -> Vec<f64> {
        self.a_rows
            .iter()
            .map(|r| r.iter().map(|&(i, v)| v * x[i]).sum())
            .collect()
    }

    fn at_mul(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (r, &yi) in self.a_rows.iter().zip(y) {
            for &(i, v) in r {
                out[i] += v * yi;
            }
        }
        out
    }

    /// `G x = -sum x_i F_i`.
    fn g_mul(&self, x: &[f64]) -> Vec<DMatrix<f64>> {
        self.blocks.iter().map(|b| -b.apply(x)).collect()
    }

    /// `G' Z = -(<F_i, Z>)_i`.
    fn gt_mul(&self, z: &[DMatrix<f64>]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (b, m) in self.blocks.iter().zip(z) {
            b.adjoint_add(m, &mut out, -1.0);
        }
        out
    }

    fn h(&self) -> Vec<DMatrix<f64>> {
        self.blocks.iter().map(|b| b.f0.clone()).collect()
    }

    fn identity(&self) -> Vec<DMatrix<f64>> {
        self.blocks.iter().map(|b| DMatrix::identity(b.dim, b.dim)).collect()
    }
}

/// NT scaling of one block: `R' Z R = R^-1 S R^-T = diag(lambda)`.
struct Scaling {
    r: DMatrix<f64>,
    rinv: DMatrix<f64>,
    lambda: DVector<f64>,
    /// `W = R R'` and `W^-1 = R^-T R^-1`.
    w: DMatrix<f64>,
    winv: DMatrix<f64>,
}

impl Scaling {
    fn new(s: &DMatrix<f64>, z: &DMatrix<f64>) -> Option<Self> {
        let ls = s.clone().cholesky()?.l();
        let lz = z.clone().cholesky()?.l();
        let svd = (lz.transpose() * &ls).svd(true, true);
        let u = svd.u?;
        let vt = svd.v_t?;
        let lambda = svd.singular_values;
        if lambda.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return None;
        }
        let isq = lambda.map(|l| 1.0 / l.sqrt());
        let mut r = ls * vt.transpose();
        for (j, mut col) in r.column_iter_mut().enumerate() {
            col *= isq[j];
        }
        let mut rinv = u.transpose() * lz.transpose();
        for (i, mut row) in rinv.row_iter_mut().enumerate() {
            row *= isq[i];
        }
        let w = &r * r.transpose();
        let winv = rinv.transpose() * &rinv;
        Some(Self { r, rinv, lambda, w, winv })
    }

    /// `R^-1 M R^-T`.
    fn to_scaled_s(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        sym(&self.rinv * m * self.rinv.transpose())
    }

    /// `R' M R`.
    fn to_scaled_z(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        sym(self.r.transpose() * m * &self.r)
    }

    /// `R Q R'`.
    fn from_scaled(&self, q: &DMatrix<f64>) -> DMatrix<f64> {
        sym(&self.r * q * self.r.transpose())
    }

    /// Largest step `a` with `diag(lambda) + a * d >= 0` (infinite if unbounded).
    fn max_step(&self, d: &DMatrix<f64>) -> f64 {
        let isq = self.lambda.map(|l| 1.0 / l.sqrt());
        let p = DMatrix::from_fn(d.nrows(), d.ncols(), |i, j| isq[i] * d[(i, j)] * isq[j]);
        let lmin = sym(p).symmetric_eigenvalues().min();
        if lmin < 0.0 {
            -1.0 / lmin
        } else {
            f64::INFINITY
        }
    }
}

struct Factor {
    l: Mat<f64>,
    /// `L^-1 A'` and the Cholesky factor of its Gram matrix.
    y: Mat<f64>,
    ls: Option<Mat<f64>>,
}

fn cholesky_regularized(m: &Mat<f64>) -> Option<Mat<f64>> {
    let dim = m.nrows();
    let maxdiag = (0..dim).map(|i| m[(i, i)].abs()).fold(1.0f64, f64::max);
    let mut delta = 0.0;
    for _ in 0..4 {
        let mut t = m.clone();
        for i in 0..dim {
            t[(i, i)] += delta;
        }
        if let Ok(llt) = t.llt(Side::Lower) {
            return Some(llt.L().to_owned());
        }
        delta = if delta == 0.0 { 1e-13 * maxdiag } else { delta * 1e3 };
    }
    None
}

impl Factor {
    fn new(data: &Data, sc: &[Scaling]) -> Option<Self> {
        let n = data.n;
        let mut h = Mat::<f64>::zeros(n, n);
        for (blk, s) in data.blocks.iter().zip(sc) {
            let wi = &s.winv;
            let mut p = DMatrix::zeros(blk.dim, blk.dim);
            for (a, list) in blk.mats.iter().enumerate() {
                p.fill(0.0);
                for &(r, c, v) in list {
                    let wr = wi.column(r);
                    if r == c {
                        p.ger(v, &wr, &wr, 1.0);
                    } else {
                        let wc = wi.column(c);
                        p.ger(v, &wr, &wc, 1.0);
                        p.ger(v, &wc, &wr, 1.0);
                    }
                }
                let i = blk.vars[a];
                for (b, list_b) in blk.mats.iter().enumerate().skip(a) {
                    let j = blk.vars[b];
                    h[(i.min(j), i.max(j))] += entry_dot(list_b, &p);
                }
            }
        }
        for j in 0..n {
            for i in 0..j {
                h[(j, i)] = h[(i, j)];
            }
        }
        let l = cholesky_regularized(&h)?;
        let meq = data.a_rows.len();
        let mut y = Mat::<f64>::zeros(n, meq);
        for (k, row) in data.a_rows.iter().enumerate() {
            for &(i, v) in row {
                y[(i, k)] = v;
            }
        }
        let ls = if meq > 0 {
            solve_lower_triangular_in_place(l.as_ref(), y.as_mut(), Par::Seq);
            let mut g = Mat::<f64>::zeros(meq, meq);
            matmul(g.as_mut(), Accum::Replace, y.transpose(), y.as_ref(), 1.0, Par::Seq);
            Some(cholesky_regularized(&g)?)
        } else {
            None
        };
        Some(Self { l, y, ls })
    }
}

fn col(v: &[f64]) -> Mat<f64> {
    Mat::from_fn(v.len(), 1, |i, _| v[i])
}

fn uncol(m: &Mat<f64>) -> Vec<f64> {
    (0..m.nrows()).map(|i| m[(i, 0)]).collect()
}

const REFINE_STEPS: usize = 3;

struct Dir {
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<DMatrix<f64>>,
}

struct Kkt<'a> {
    data: &'a Data,
    sc: &'a [Scaling],
    f: Factor,
}

impl Kkt<'_> {
    /// Solves `[0 A' G'; A 0 0; G 0 -W(.)W] [x; y; z] = [r1; r2; r3]`.
    fn solve_once(&self, r1: &[f64], r2: &[f64], r3: &[DMatrix<f64>]) -> Dir {
        let t: Vec<DMatrix<f64>> = r3.iter().zip(self.sc).map(|(m, s)| sym(&s.winv * m * &s.winv)).collect();
        let gt = self.data.gt_mul(&t);
        let rhs1: Vec<f64> = r1.iter().zip(&gt).map(|(a, b)| a + b).collect();
        let mut w = col(&rhs1);
        solve_lower_triangular_in_place(self.f.l.as_ref(), w.as_mut(), Par::Seq);
        let mut dy = Vec::new();
        if let Some(ls) = &self.f.ls {
            let mut t = Mat::<f64>::zeros(r2.len(), 1);
            matmul(t.as_mut(), Accum::Replace, self.f.y.transpose(), w.as_ref(), 1.0, Par::Seq);
            for (i, r) in r2.iter().enumerate() {
                t[(i, 0)] -= r;
            }
            solve_lower_triangular_in_place(ls.as_ref(), t.as_mut(), Par::Seq);
            solve_upper_triangular_in_place(ls.transpose(), t.as_mut(), Par::Seq);
            matmul(w.as_mut(), Accum::Add, self.f.y.as_ref(), t.as_ref(), -1.0, Par::Seq);
            dy = uncol(&t);
        }
        solve_upper_triangular_in_place(self.f.l.transpose(), w.as_mut(), Par::Seq);
        let dx = uncol(&w);
        let gx = self.data.g_mul(&dx);
        let dz = gx
            .iter()
            .zip(r3)
            .zip(self.sc)
            .map(|((g, r), s)| sym(&s.winv * (g - r) * &s.winv))
            .collect();
        Dir { x: dx, y: dy, z: dz }
    }

    fn apply(&self, d: &Dir) -> (Vec<f64>, Vec<f64>, Vec<DMatrix<f64>>) {
        let aty = self.data.at_mul(&d.y);
        let gtz = self.data.gt_mul(&d.z);
        let k1 = aty.iter().zip(&gtz).map(|(a, b)| a + b).collect();
        let k2 = self.data.a_mul(&d.x);
        let gx = self.data.g_mul(&d.x);
        let k3 = gx
            .iter()
            .zip(&d.z)
            .zip(self.sc)
            .map(|((g, z), s)| g - sym(&s.w * z * &s.w))
            .collect();
        (k1, k2, k3)
    }

    /// Solve followed by iterative refinement.
    fn solve(&self, r1: &[f64], r2: &[f64], r3: &[DMatrix<f64>]) -> Dir {
        let mut d = self.solve_once(r1, r2, r3);
        let scale = norm(r1).max(norm(r2)).max(blocks_norm(r3)).max(1e-300);
        for _ in 0..REFINE_STEPS {
            let (k1, k2, k3) = self.apply(&d);
            let e1: Vec<f64> = r1.iter().zip(&k1).map(|(a, b)| a - b).collect();
            let e2: Vec<f64> = r2.iter().zip(&k2).map(|(a, b)| a - b).collect();
            let e3: Vec<DMatrix<f64>> = r3.iter().zip(&k3).map(|(a, b)| a - b).collect();
            if norm(&e1).max(norm(&e2)).max(blocks_norm(&e3)) <= 1e-14 * scale {
                break;
            }
            let c = self.solve_once(&e1, &e2, &e3);
            d.x.iter_mut().zip(&c.x).for_each(|(a, b)| *a += b);
            d.y.iter_mut().zip(&c.y).for_each(|(a, b)| *a += b);
            d.z.iter_mut().zip(&c.z).for_each(|(a, b)| *a += b);
        }
        d
    }
}

#[derive(Clone)]
struct Iterate {
    x: Vec<f64>,
    y: Vec<f64>,
    s: Vec<DMatrix<f64>>,
    z: Vec<DMatrix<f64>>,
    tau: f64,
    kappa: f64,
}

struct Measures {
    pcost: f64,
    dcost: f64,
    res: Residuals,
    pinf: Option<f64>,
    dinf: Option<f64>,
}

fn measure(data: &Data, it: &Iterate, h: &[DMatrix<f64>]) -> Measures {
    let tau = it.tau;
    let cx = dot(&data.c, &it.x);
    let by = dot(&data.b, &it.y);
    let hz = blocks_dot(h, &it.z);
    let ax = data.a_mul(&it.x);
    let gx = data.g_mul(&it.x);
    let aty = data.at_mul(&it.y);
    let gtz = data.gt_mul(&it.z);

    let resx0 = norm(&data.c).max(1.0);
    let resy0 = norm(&data.b).max(1.0);
    let resz0 = blocks_norm(h).max(1.0);

    let ry: Vec<f64> = ax.iter().zip(&data.b).map(|(a, b)| a / tau - b).collect();
    let rz: Vec<DMatrix<f64>> = gx
        .iter()
        .zip(&it.s)
        .zip(h)
        .map(|((g, s), h)| (g + s) / tau - h)
        .collect();
    let rx: Vec<f64> = aty
        .iter()
        .zip(&gtz)
        .zip(&data.c)
        .map(|((a, g), c)| (a + g) / tau + c)
        .collect();
    let pres = (norm(&ry) / resy0).max(blocks_norm(&rz) / resz0);
    let dres = norm(&rx) / resx0;
    let pcost = cx / tau + data.c0;
    let dcost = -(by + hz) / tau + data.c0;
    let gap = (pcost - dcost).abs() / pcost.abs().max(1.0);

    let pinf = (by + hz < 0.0).then(|| {
        let hr: Vec<f64> = aty.iter().zip(&gtz).map(|(a, g)| a + g).collect();
        norm(&hr) / resx0 / -(by + hz)
    });
    let dinf = (cx < 0.0).then(|| {
        let hz: Vec<DMatrix<f64>> = gx.iter().zip(&it.s).map(|(g, s)| g + s).collect();
        (norm(&ax) / resy0).max(blocks_norm(&hz) / resz0) / -cx
    });
    Measures {
        pcost,
        dcost,
        res: Residuals {
            primal: pres,
            dual: dres,
            gap,
        },
        pinf,
        dinf,
    }
}

fn finish(it: &Iterate, m: &Measures, status: SolveStatus, iterations: usize, start: Instant) -> SolveResult {
    let tau = it.tau;
    SolveResult {
        status,
        z: it.x.iter().map(|v| v / tau).collect(),
        y: it.y.iter().map(|v| v / tau).collect(),
        dual_blocks: it.z.iter().map(|m| m / tau).collect(),
        objective_value: m.pcost,
        dual_value: m.dcost,
        residuals: m.res,
        iterations,
        wall_time: start.elapsed(),
    }
}

/// Jordan product `(AB + BA) / 2`.
fn jordan(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    sym(a * b)
}

/// Solves the conic program; never panics on numerical trouble.
pub fn solve(problem: &ConicProblem, opts: &SolverOptions) -> SolveResult {
    let start = Instant::now();
    let data = Data::new(problem);
    let h = data.h();
    let meq = data.a_rows.len();
    let cone_dim: usize = data.blocks.iter().map(|b| b.dim).sum();

    let mut it = Iterate {
        x: vec![0.0; data.n],
        y: vec![0.0; meq],
        s: data.identity(),
        z: data.identity(),
        tau: 1.0,
        kappa: 1.0,
    };
    let mut best: Option<(Iterate, Measures)> = None;
    let mut stalled = false;
    let mut iter = 0;

    loop {
        let m = measure(&data, &it, &h);
        if opts.verbose {
            eprintln!(
                "{iter:3} pcost {:+.8e} dcost {:+.8e} pres {:.1e} dres {:.1e} gap {:.1e} tau {:.1e} kappa {:.1e}",
                m.pcost, m.dcost, m.res.primal, m.res.dual, m.res.gap, it.tau, it.kappa
            );
        }
        if m.res.primal <= opts.eps_feas && m.res.dual <= opts.eps_feas && m.res.gap <= opts.eps_gap {
            return finish(&it, &m, SolveStatus::Optimal, iter, start);
        }
        if m.pinf.is_some_and(|p| p <= opts.eps_feas) {
            return infeasible(&it, &m, SolveStatus::PrimalInfeasible, iter, start);
        }
        if m.dinf.is_some_and(|d| d <= opts.eps_feas) {
            return infeasible(&it, &m, SolveStatus::DualInfeasible, iter, start);
        }
        if best.as_ref().is_none_or(|(_, bm)| m.res.worst() < bm.res.worst()) {
            best = Some((it.clone(), m));
        }
        if iter >= opts.max_iter || stalled {
            break;
        }
        iter += 1;
        match step(&data, &h, &mut it, cone_dim) {
            Some(alpha) if alpha > 1e-10 => {}
            _ => stalled = true,
        }
    }

    let m = measure(&data, &it, &h);
    if m.pinf.is_some_and(|p| p <= opts.near_tol) {
        return infeasible(&it, &m, SolveStatus::PrimalInfeasible, iter, start);
    }
    if m.dinf.is_some_and(|d| d <= opts.near_tol) {
        return infeasible(&it, &m, SolveStatus::DualInfeasible, iter, start);
    }
    let (bit, bm) = best.expect("at least one iterate measured");
    let status = if bm.res.worst() <= opts.near_tol {
        SolveStatus::NearOptimal
    } else if stalled {
        SolveStatus::IllPosed
    } else {
        SolveStatus::IterationLimit
    };
    finish(&bit, &bm, status, iter, start)
}

fn infeasible(it: &Iterate, m: &Measures, status: SolveStatus, iterations: usize, start: Instant) -> SolveResult {
    let mut r = finish(&Iterate { tau: 1.0, ..it.clone() }, m, status, iterations, start);
    r.objective_value = match status {
        SolveStatus::PrimalInfeasible => f64::INFINITY,
        _ => f64::NEG_INFINITY,
    };
    r
}

/// One predictor-corrector step; returns the step length or `None` on
/// numerical failure.
fn step(data: &Data, h: &[DMatrix<f64>], it: &mut Iterate, cone_dim: usize) -> Option<f64> {
    let sc: Vec<Scaling> = it
        .s
        .iter()
        .zip(&it.z)
        .map(|(s, z)| Scaling::new(s, z))
        .collect::<Option<_>>()?;
    let f = Factor::new(data, &sc)?;
    let kkt = Kkt { data, sc: &sc, f };
    let (tau, kappa) = (it.tau, it.kappa);

    // residuals of the embedding
    let aty = data.at_mul(&it.y);
    let gtz = data.gt_mul(&it.z);
    let rx: Vec<f64> = (0..data.n).map(|i| aty[i] + gtz[i] + data.c[i] * tau).collect();
    let ax = data.a_mul(&it.x);
    let ry: Vec<f64> = ax.iter().zip(&data.b).map(|(a, b)| a - b * tau).collect();
    let gx = data.g_mul(&it.x);
    let rz: Vec<DMatrix<f64>> = gx
        .iter()
        .zip(&it.s)
        .zip(h)
        .map(|((g, s), h)| g + s - h * tau)
        .collect();
    let rt = kappa + dot(&data.c, &it.x) + dot(&data.b, &it.y) + blocks_dot(h, &it.z);
    let mu = (blocks_dot(&it.s, &it.z) + tau * kappa) / (cone_dim as f64 + 1.0);

    let neg_c: Vec<f64> = data.c.iter().map(|v| -v).collect();
    let u = kkt.solve(&neg_c, &data.b, h);
    let denom_u = -kappa / tau + dot(&data.c, &u.x) + dot(&data.b, &u.y) + blocks_dot(h, &u.z);
    if !(denom_u < 0.0) {
        return None;
    }

    let direction = |eta: f64, t: &[DMatrix<f64>], t_tau: f64| {
        let q: Vec<DMatrix<f64>> = t
            .iter()
            .zip(&sc)
            .map(|(t, s)| DMatrix::from_fn(t.nrows(), t.ncols(), |i, j| 2.0 * t[(i, j)] / (s.lambda[i] + s.lambda[j])))
            .collect();
        let rqr: Vec<DMatrix<f64>> = q.iter().zip(&sc).map(|(q, s)| s.from_scaled(q)).collect();
        let r1: Vec<f64> = rx.iter().map(|v| -eta * v).collect();
        let r2: Vec<f64> = ry.iter().map(|v| -eta * v).collect();
        let r3: Vec<DMatrix<f64>> = rz.iter().zip(&rqr).map(|(r, q)| -r * eta - q).collect();
        let v = kkt.solve(&r1, &r2, &r3);
        let num = -eta * rt - t_tau / tau - (dot(&data.c, &v.x) + dot(&data.b, &v.y) + blocks_dot(h, &v.z));
        let dtau = num / denom_u;
        let dx: Vec<f64> = v.x.iter().zip(&u.x).map(|(a, b)| a + dtau * b).collect();
        let dy: Vec<f64> = v.y.iter().zip(&u.y).map(|(a, b)| a + dtau * b).collect();
        let dz: Vec<DMatrix<f64>> = v.z.iter().zip(&u.z).map(|(a, b)| a + b * dtau).collect();
        let ds: Vec<DMatrix<f64>> = rqr
            .iter()
            .zip(&dz)
            .zip(&sc)
            .map(|((q, z), s)| q - sym(&s.w * z * &s.w))
            .collect();
        let dkappa = (t_tau - kappa * dtau) / tau;
        let ds_t: Vec<DMatrix<f64>> = ds.iter().zip(&sc).map(|(d, s)| s.to_scaled_s(d)).collect();
        let dz_t: Vec<DMatrix<f64>> = dz.iter().zip(&sc).map(|(d, s)| s.to_scaled_z(d)).collect();
        let mut amax = f64::INFINITY;
        for ((a, b), s) in ds_t.iter().zip(&dz_t).zip(&sc) {
            amax = amax.min(s.max_step(a)).min(s.max_step(b));
        }
        if dtau < 0.0 {
            amax = amax.min(-tau / dtau);
        }
        if dkappa < 0.0 {
            amax = amax.min(-kappa / dkappa);
        }
        (dx, dy, dz, ds, dtau, dkappa, ds_t, dz_t, amax)
    };

    // predictor
    let t_aff: Vec<DMatrix<f64>> = sc.iter().map(|s| DMatrix::from_diagonal(&s.lambda.map(|l| -l * l))).collect();
    let (_, _, _, _, dtau_a, dkappa_a, ds_a, dz_a, amax_a) = direction(1.0, &t_aff, -tau * kappa);
    let alpha_a = amax_a.min(1.0);
    let sigma = (1.0 - alpha_a).powi(3);

    // corrector
    let t_cor: Vec<DMatrix<f64>> = sc
        .iter()
        .zip(ds_a.iter().zip(&dz_a))
        .map(|(s, (a, b))| {
            let mut t = -jordan(a, b);
            for i in 0..s.lambda.len() {
                t[(i, i)] += sigma * mu - s.lambda[i] * s.lambda[i];
            }
            t
        })
        .collect();
    let t_tau = sigma * mu - tau * kappa - dtau_a * dkappa_a;
    let (dx, dy, dz, ds, dtau, dkappa, _, _, amax) = direction(1.0 - sigma, &t_cor, t_tau);
    let alpha = (0.99 * amax).min(1.0);
    if !alpha.is_finite() {
        return None;
    }

    let mut next = it.clone();
    next.x.iter_mut().zip(&dx).for_each(|(a, b)| *a += alpha * b);
    next.y.iter_mut().zip(&dy).for_each(|(a, b)| *a += alpha * b);
    for (m, d) in next.s.iter_mut().zip(&ds) {
        *m += d * alpha;
    }
    for (m, d) in next.z.iter_mut().zip(&dz) {
        *m += d * alpha;
    }
    next.tau += alpha * dtau;
    next.kappa += alpha * dkappa;
    let finite = next.x.iter().chain(&next.y).all(|v| v.is_finite()) && next.tau.is_finite() && next.kappa.is_finite();
    if !finite || next.tau <= 0.0 || next.kappa <= 0.0 {
        return None;
    }
    *it = next;
    Some(alpha)
}
