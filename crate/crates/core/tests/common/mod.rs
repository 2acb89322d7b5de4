#![allow(dead_code)]

use nalgebra::DMatrix;
use psdcopo::moment::LinearMatrixMap;
use psdcopo::poly::Monomial;
use psdcopo::sdp::PsdBlock;
use psdcopo::{ConicProblem, LinearFunctional, Polynomial, VarSpace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn random_space(rng: &mut ChaCha8Rng) -> VarSpace {
    VarSpace::new(rng.random_range(1..=3), rng.random_range(0..=2)).unwrap()
}

/// Random form of degree `d` with up to `terms` terms and normal coefficients.
pub fn random_form(rng: &mut ChaCha8Rng, space: VarSpace, d: u32, terms: usize) -> Polynomial {
    let nv = space.nvars();
    let mut p = Polynomial::zero(space);
    while p.is_zero() {
        for _ in 0..terms {
            let mut e = vec![0u32; nv];
            for _ in 0..d {
                e[rng.random_range(0..nv)] += 1;
            }
            p.add_term(Monomial::from_exponents(e), gauss(rng));
        }
    }
    p
}

/// Coordinates of `(X, y)` in the variable order of `space`.
pub fn point_of(space: VarSpace, x: &DMatrix<f64>, y: &[f64]) -> Vec<f64> {
    let mut u = vec![0.0; space.nvars()];
    for i in 0..space.n() {
        for j in i..space.n() {
            u[space.x_index(i, j)] = x[(i, j)];
        }
    }
    for (t, v) in y.iter().enumerate() {
        u[space.y_index(t)] = *v;
    }
    u
}

/// Symmetric matrix read back from a point.
pub fn matrix_at(space: VarSpace, u: &[f64]) -> DMatrix<f64> {
    let n = space.n();
    DMatrix::from_fn(n, n, |i, j| u[space.x_index(i.min(j), i.max(j))])
}

/// Feasible point: `X = V V^T` and `y >= 0` scaled jointly to `tr X + sum y = 1`.
pub fn random_feasible(rng: &mut ChaCha8Rng, space: VarSpace) -> Vec<f64> {
    let n = space.n();
    // random rank to reach the boundary of the cone as well
    let r = rng.random_range(1..=n);
    let v = DMatrix::from_fn(n, r, |_, _| gauss(rng));
    let x = &v * v.transpose();
    let y: Vec<f64> = (0..space.m()).map(|_| gauss(rng).abs()).collect();
    let total = x.trace() + y.iter().sum::<f64>();
    let y: Vec<f64> = y.iter().map(|t| t / total).collect();
    point_of(space, &(x / total), &y)
}

pub fn random_symmetric(rng: &mut ChaCha8Rng, dim: usize, density: f64) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in i..dim {
            if rng.random::<f64>() < density {
                let v = gauss(rng);
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
    }
    a
}

pub fn random_pd(rng: &mut ChaCha8Rng, dim: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| gauss(rng));
    &g * g.transpose() / dim as f64 + DMatrix::identity(dim, dim)
}

/// A dense SDP `min c'z  s.t.  A z = b,  F0 + sum z_i F_i >= 0` together with
/// its data as plain matrices.
pub struct RandomSdp {
    pub problem: ConicProblem,
    pub c: Vec<f64>,
    pub a: DMatrix<f64>,
    pub b: Vec<f64>,
    /// Per block: `F0` then `F_1..F_nz`.
    pub f: Vec<Vec<DMatrix<f64>>>,
}

/// Strictly feasible on both sides: `F(z0) = I` and `c` comes from a
/// positive definite dual point, so an optimum exists.
pub fn random_sdp(rng: &mut ChaCha8Rng, max_block: usize) -> RandomSdp {
    let nz = rng.random_range(2..=10);
    let neq = rng.random_range(0..nz.min(4));
    let nblocks = rng.random_range(1..=3);
    let z0: Vec<f64> = (0..nz).map(|_| gauss(rng)).collect();
    let a = DMatrix::from_fn(neq, nz, |_, _| gauss(rng));
    let b: Vec<f64> = (0..neq).map(|r| (0..nz).map(|i| a[(r, i)] * z0[i]).sum()).collect();
    let y0: Vec<f64> = (0..neq).map(|_| gauss(rng)).collect();
    let mut c: Vec<f64> = (0..nz).map(|i| -(0..neq).map(|r| a[(r, i)] * y0[r]).sum::<f64>()).collect();
    let mut f = Vec::new();
    let mut blocks = Vec::new();
    for bi in 0..nblocks {
        let dim = rng.random_range(1..=max_block);
        let fi: Vec<DMatrix<f64>> = (0..nz).map(|_| random_symmetric(rng, dim, 0.5)).collect();
        let mut f0 = DMatrix::identity(dim, dim);
        for (zi, m) in z0.iter().zip(&fi) {
            f0 -= m * *zi;
        }
        let s0 = random_pd(rng, dim);
        for (ci, m) in c.iter_mut().zip(&fi) {
            *ci += m.component_mul(&s0).sum();
        }
        let mut map = LinearMatrixMap::new_symmetric(dim);
        for r in 0..dim {
            for col in r..dim {
                let terms: Vec<(usize, f64)> =
                    (0..nz).filter(|&i| fi[i][(r, col)] != 0.0).map(|i| (i, fi[i][(r, col)])).collect();
                map.set(r, col, LinearFunctional::from_terms(terms).with_constant(f0[(r, col)]));
            }
        }
        blocks.push(PsdBlock {
            name: format!("b{bi}"),
            map,
        });
        let mut all = vec![f0];
        all.extend(fi);
        f.push(all);
    }
    let problem = ConicProblem {
        nz,
        objective: LinearFunctional::from_terms(c.iter().copied().enumerate().collect()),
        eq_rows: (0..neq)
            .map(|r| LinearFunctional::from_terms((0..nz).map(|i| (i, a[(r, i)])).collect()))
            .collect(),
        eq_rhs: b.clone(),
        psd_blocks: blocks,
    };
    RandomSdp { problem, c, a, b, f }
}

/// Frobenius distance from a symmetric matrix to the PSD cone, by
/// projecting onto its nonnegative eigenvalues.
pub fn psd_distance(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues().iter().map(|l| l.min(0.0).powi(2)).sum::<f64>().sqrt()
}

/// `(primal, dual, complementarity)` residuals of a candidate primal-dual
/// pair, computed from the plain matrix data only.
pub fn kkt_residuals(sdp: &RandomSdp, z: &[f64], y: &[f64], duals: &[DMatrix<f64>]) -> (f64, f64, f64) {
    let nz = sdp.c.len();
    let mut primal: f64 = 0.0;
    for (r, bi) in sdp.b.iter().enumerate() {
        let v: f64 = (0..nz).map(|i| sdp.a[(r, i)] * z[i]).sum();
        primal = primal.max((v - bi).abs() / (1.0 + bi.abs()));
    }
    let mut dual_grad = sdp.c.clone();
    for i in 0..nz {
        for r in 0..sdp.b.len() {
            dual_grad[i] += sdp.a[(r, i)] * y[r];
        }
    }
    let mut comp = 0.0;
    for (fs, s) in sdp.f.iter().zip(duals) {
        let mut fz = fs[0].clone();
        for i in 0..nz {
            fz += &fs[i + 1] * z[i];
            dual_grad[i] -= fs[i + 1].component_mul(s).sum();
        }
        primal = primal.max(psd_distance(&fz));
        comp += fz.component_mul(s).sum();
    }
    let cnorm = 1.0 + sdp.c.iter().map(|v| v * v).sum::<f64>().sqrt();
    let dual = dual_grad.iter().map(|v| v * v).sum::<f64>().sqrt() / cnorm
        + duals.iter().map(psd_distance).fold(0.0, f64::max);
    let obj: f64 = sdp.c.iter().zip(z).map(|(c, z)| c * z).sum();
    (primal, dual, comp.abs() / (1.0 + obj.abs()))
}
