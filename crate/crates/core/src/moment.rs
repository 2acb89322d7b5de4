//! Monomial bases, Riesz functionals and localizing matrices.
//!
//! A truncated moment vector `z` is a dense array indexed by the graded
//! lexicographic basis of degree `2k`. Localizing matrices are stored as
//! matrices of sparse linear functionals in `z`, so they can be evaluated at a
//! concrete `z` or handed to the conic assembler.

use std::collections::HashMap;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::poly::{Monomial, PolyMatrix, Polynomial, VarSpace};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MomentError {
    #[error("degree {degree} exceeds moment order 2k = {limit}")]
    DegreeOverflow { degree: u32, limit: u32 },
    #[error("moment vector has length {got}, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("polynomial space does not match the moment basis")]
    SpaceMismatch,
}

/// Binomial coefficient C(n, k) as usize.
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: usize = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// All monomials of degree <= `degree`, graded lexicographic.
#[derive(Debug, Clone)]
pub struct MonomialBasis {
    space: VarSpace,
    degree: u32,
    monomials: Vec<Monomial>,
    index: HashMap<Monomial, usize>,
}

impl MonomialBasis {
    pub fn new(space: VarSpace, degree: u32) -> Self {
        let nvars = space.nvars();
        let mut monomials = Vec::with_capacity(binomial(nvars + degree as usize, degree as usize));
        let mut exps = vec![0u32; nvars];
        for d in 0..=degree {
            push_compositions(&mut monomials, &mut exps, 0, d);
        }
        let index = monomials
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i))
            .collect();
        Self {
            space,
            degree,
            monomials,
            index,
        }
    }

    pub fn space(&self) -> VarSpace {
        self.space
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn monomials(&self) -> &[Monomial] {
        &self.monomials
    }

    pub fn position(&self, mono: &Monomial) -> Option<usize> {
        self.index.get(mono).copied()
    }

    /// Number of basis elements of degree <= `t`; the degree-`t` basis is a
    /// prefix of this one.
    pub fn prefix_len(&self, t: u32) -> usize {
        debug_assert!(t <= self.degree);
        binomial(self.space.nvars() + t as usize, t as usize)
    }

    /// `[u]_degree`: all basis monomials evaluated at `u`.
    pub fn evaluate(&self, point: &[f64]) -> Vec<f64> {
        self.monomials.iter().map(|m| m.eval(point)).collect()
    }
}

// Emits every exponent vector with total degree `remaining` on variables
// `pos..`, largest exponent on the earliest variable first.
fn push_compositions(out: &mut Vec<Monomial>, exps: &mut [u32], pos: usize, remaining: u32) {
    if pos + 1 == exps.len() {
        exps[pos] = remaining;
        out.push(Monomial::from_exponents(exps.to_vec()));
        exps[pos] = 0;
        return;
    }
    for e in (0..=remaining).rev() {
        exps[pos] = e;
        push_compositions(out, exps, pos + 1, remaining - e);
    }
    exps[pos] = 0;
}

/// Moment indexing for a relaxation of order `k` (vectors over N_{2k}).
#[derive(Debug, Clone)]
pub struct MomentIndex {
    order: u32,
    basis: MonomialBasis,
}

impl MomentIndex {
    pub fn new(space: VarSpace, order: u32) -> Self {
        Self {
            order,
            basis: MonomialBasis::new(space, 2 * order),
        }
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn space(&self) -> VarSpace {
        self.basis.space()
    }

    pub fn basis(&self) -> &MonomialBasis {
        &self.basis
    }

    /// Length of the moment vector, |N_{2k}|.
    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    /// Sparse functional `z -> <p, z>`.
    pub fn functional(&self, p: &Polynomial) -> Result<LinearFunctional, MomentError> {
        if p.space() != self.space() {
            return Err(MomentError::SpaceMismatch);
        }
        let limit = 2 * self.order;
        let mut terms = Vec::with_capacity(p.len());
        for (mono, c) in p.terms() {
            let pos = self.basis.position(mono).ok_or(MomentError::DegreeOverflow {
                degree: mono.degree(),
                limit,
            })?;
            terms.push((pos, c));
        }
        Ok(LinearFunctional::from_terms(terms))
    }

    /// Functional `z -> <p * mono, z>`.
    fn shifted_functional(&self, p: &Polynomial, mono: &Monomial) -> Result<LinearFunctional, MomentError> {
        let limit = 2 * self.order;
        let mut terms = Vec::with_capacity(p.len());
        for (m, c) in p.terms() {
            let prod = m.mul(mono);
            let pos = self.basis.position(&prod).ok_or(MomentError::DegreeOverflow {
                degree: prod.degree(),
                limit,
            })?;
            terms.push((pos, c));
        }
        Ok(LinearFunctional::from_terms(terms))
    }

    /// Truncation order t = k - ceil(deg/2) for a localizing matrix.
    pub fn truncation(&self, degree: u32) -> Result<u32, MomentError> {
        let half = degree.div_ceil(2);
        if half > self.order {
            return Err(MomentError::DegreeOverflow {
                degree,
                limit: 2 * self.order,
            });
        }
        Ok(self.order - half)
    }

    /// The moment vector of the Dirac measure at `point`, i.e. `[u]_{2k}`.
    pub fn dirac(&self, point: &[f64]) -> Vec<f64> {
        self.basis.evaluate(point)
    }

    /// Rows `<q * x^gamma, z> = 0` for all `|gamma| <= 2k - deg(q)`: the
    /// degree-2k truncation of the ideal generated by `q`.
    pub fn ideal_rows(&self, q: &Polynomial) -> Result<Vec<LinearFunctional>, MomentError> {
        let dq = q.degree_or_zero();
        let limit = 2 * self.order;
        if dq > limit {
            return Err(MomentError::DegreeOverflow { degree: dq, limit });
        }
        let count = self.basis.prefix_len(limit - dq);
        self.basis.monomials()[..count]
            .iter()
            .map(|g| self.shifted_functional(q, g))
            .collect()
    }
}

/// Sparse affine functional `z -> sum_i c_i z_i + constant`.
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LinearFunctional {
    terms: Vec<(usize, f64)>,
    #[serde(default)]
    constant: f64,
}

impl LinearFunctional {
    /// Merges repeated indices, drops zeros and sorts by index.
    pub fn from_terms(mut terms: Vec<(usize, f64)>) -> Self {
        terms.sort_by_key(|t| t.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
        for (i, c) in terms {
            match merged.last_mut() {
                Some(last) if last.0 == i => last.1 += c,
                _ => merged.push((i, c)),
            }
        }
        merged.retain(|t| t.1 != 0.0);
        Self {
            terms: merged,
            constant: 0.0,
        }
    }

    pub fn with_constant(mut self, constant: f64) -> Self {
        self.constant = constant;
        self
    }

    pub fn terms(&self) -> &[(usize, f64)] {
        &self.terms
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty() && self.constant == 0.0
    }

    pub fn max_index(&self) -> Option<usize> {
        self.terms.last().map(|t| t.0)
    }

    pub fn apply(&self, z: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(i, c)| c * z[i]).sum::<f64>()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            terms: self.terms.iter().map(|&(i, c)| (i, c * s)).collect(),
            constant: self.constant * s,
        }
    }
}

/// Matrix whose entries are linear functionals of the moment vector.
///
/// Symmetric maps store only the upper triangle `(r <= c)`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LinearMatrixMap {
    dim: usize,
    symmetric: bool,
    entries: Vec<LinearFunctional>,
}

impl LinearMatrixMap {
    pub fn new_symmetric(dim: usize) -> Self {
        Self {
            dim,
            symmetric: true,
            entries: vec![LinearFunctional::default(); dim * (dim + 1) / 2],
        }
    }

    pub fn new_general(dim: usize) -> Self {
        Self {
            dim,
            symmetric: false,
            entries: vec![LinearFunctional::default(); dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    fn slot(&self, r: usize, c: usize) -> usize {
        if self.symmetric {
            let (r, c) = if r <= c { (r, c) } else { (c, r) };
            // upper triangle, row-major
            r * self.dim - r * r.saturating_sub(1) / 2 + (c - r)
        } else {
            r * self.dim + c
        }
    }

    pub fn entry(&self, r: usize, c: usize) -> &LinearFunctional {
        &self.entries[self.slot(r, c)]
    }

    pub fn set(&mut self, r: usize, c: usize, f: LinearFunctional) {
        let s = self.slot(r, c);
        self.entries[s] = f;
    }

    /// Stored entries with their (row, col); upper triangle for symmetric maps.
    pub fn stored(&self) -> impl Iterator<Item = (usize, usize, &LinearFunctional)> + '_ {
        let dim = self.dim;
        let sym = self.symmetric;
        let coords = (0..dim).flat_map(move |r| {
            let start = if sym { r } else { 0 };
            (start..dim).map(move |c| (r, c))
        });
        coords.zip(self.entries.iter()).map(|((r, c), f)| (r, c, f))
    }

    pub fn evaluate(&self, z: &[f64]) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.dim, self.dim);
        for (r, c, f) in self.stored() {
            let v = f.apply(z);
            out[(r, c)] = v;
            if self.symmetric {
                out[(c, r)] = v;
            }
        }
        out
    }

    pub fn max_index(&self) -> Option<usize> {
        self.entries.iter().filter_map(LinearFunctional::max_index).max()
    }
}

/// `<p, z>` for a moment vector over N_{2k}.
pub fn riesz_apply(p: &Polynomial, z: &[f64], index: &MomentIndex) -> Result<f64, MomentError> {
    if z.len() != index.len() {
        return Err(MomentError::LengthMismatch {
            expected: index.len(),
            got: z.len(),
        });
    }
    Ok(index.functional(p)?.apply(z))
}

/// Scalar localizing matrix `L_q^{(k)}`: entry (a, b) is `<q x^a x^b, z>` over
/// the degree-t basis, t = k - ceil(deg q / 2). With `q = 1` this is the
/// moment matrix `M_k`.
pub fn localizing_map(q: &Polynomial, index: &MomentIndex) -> Result<LinearMatrixMap, MomentError> {
    if q.space() != index.space() {
        return Err(MomentError::SpaceMismatch);
    }
    let t = index.truncation(q.degree_or_zero())?;
    let size = index.basis().prefix_len(t);
    let monos = &index.basis().monomials()[..size];
    let mut map = LinearMatrixMap::new_symmetric(size);
    for a in 0..size {
        for b in a..size {
            map.set(a, b, index.shifted_functional(q, &monos[a].mul(&monos[b]))?);
        }
    }
    Ok(map)
}

/// Moment matrix `M_t` over the same moment index, for any `t <= k`.
pub fn moment_matrix(index: &MomentIndex, t: u32) -> LinearMatrixMap {
    let size = index.basis().prefix_len(t.min(index.order()));
    let monos = &index.basis().monomials()[..size];
    let mut map = LinearMatrixMap::new_symmetric(size);
    for a in 0..size {
        for b in a..size {
            let pos = index
                .basis()
                .position(&monos[a].mul(&monos[b]))
                .expect("product of degree <= 2k monomials is in the basis");
            map.set(a, b, LinearFunctional::from_terms(vec![(pos, 1.0)]));
        }
    }
    map
}

/// Block localizing matrix `L_T^{(k)}`: block (i, j) is `L_{T_ij}` with one
/// uniform truncation order computed from the largest entry degree.
pub fn block_localizing_map(t_mat: &PolyMatrix, index: &MomentIndex) -> Result<LinearMatrixMap, MomentError> {
    if t_mat.entries().iter().any(|p| p.space() != index.space()) {
        return Err(MomentError::SpaceMismatch);
    }
    let t = index.truncation(t_mat.max_degree())?;
    let size = index.basis().prefix_len(t);
    let monos = &index.basis().monomials()[..size];
    let symmetric = t_mat.is_symmetric();
    let dim_r = t_mat.rows() * size;
    let dim_c = t_mat.cols() * size;
    let dim = dim_r.max(dim_c);
    let mut map = if symmetric {
        LinearMatrixMap::new_symmetric(dim)
    } else {
        LinearMatrixMap::new_general(dim)
    };
    for bi in 0..t_mat.rows() {
        for bj in 0..t_mat.cols() {
            let q = t_mat.get(bi, bj);
            for a in 0..size {
                for b in 0..size {
                    let (r, c) = (bi * size + a, bj * size + b);
                    if symmetric && r > c {
                        continue;
                    }
                    map.set(r, c, index.shifted_functional(q, &monos[a].mul(&monos[b]))?);
                }
            }
        }
    }
    Ok(map)
}

/// Convenience wrapper building a fresh index of order `k`.
pub fn localizing_map_at(q: &Polynomial, k: u32) -> Result<LinearMatrixMap, MomentError> {
    localizing_map(q, &MomentIndex::new(q.space(), k))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str, sp: VarSpace) -> Polynomial {
        Polynomial::parse(s, sp).unwrap()
    }

    // The two-variable space x11, x12 (n = 1, m = 1 gives x11, y1).
    fn two_vars() -> VarSpace {
        VarSpace::new(1, 1).unwrap()
    }

    #[test]
    fn basis_sizes_and_order() {
        let sp = VarSpace::new(2, 0).unwrap();
        let b1 = MonomialBasis::new(sp, 1);
        assert_eq!(b1.len(), 4);
        let names: Vec<Vec<u32>> = b1.monomials().iter().map(|m| m.exponents().to_vec()).collect();
        assert_eq!(names, vec![vec![0, 0, 0], vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]]);
        assert_eq!(MonomialBasis::new(sp, 2).len(), 10);
        let two = MonomialBasis::new(two_vars(), 2);
        let e: Vec<Vec<u32>> = two.monomials().iter().map(|m| m.exponents().to_vec()).collect();
        assert_eq!(
            e,
            vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]]
        );
        for (i, m) in two.monomials().iter().enumerate() {
            assert_eq!(two.position(m), Some(i));
        }
        assert_eq!(binomial(7, 4), 35);
        assert_eq!(binomial(11, 6), 462);
    }

    #[test]
    fn riesz_examples() {
        let sp = two_vars();
        let idx = MomentIndex::new(sp, 2);
        let mut z = vec![0.0; idx.len()];
        z[0] = 1.0;
        assert_eq!(riesz_apply(&Polynomial::constant(sp, 1.0), &z, &idx).unwrap(), 1.0);
        let u = [0.3, -1.7];
        let zu = idx.dirac(&u);
        let p = parse("x11^3*y1 - 2*x11*y1 + 4", sp);
        assert!((riesz_apply(&p, &zu, &idx).unwrap() - p.evaluate(&u).unwrap()).abs() < 1e-12);
        let q = parse("1 - x11*y1", sp);
        let f = idx.functional(&q).unwrap();
        let z11 = idx.basis().position(&Monomial::from_exponents(vec![1, 1])).unwrap();
        assert_eq!(f.terms(), &[(0, 1.0), (z11, -1.0)]);
        let too_high = parse("x11^5", sp);
        assert!(matches!(
            riesz_apply(&too_high, &zu, &idx),
            Err(MomentError::DegreeOverflow { degree: 5, limit: 4 })
        ));
    }

    // Builds the functional sum_k c_k z_{a_k b_k} with the two-index naming
    // z_{ab} = moment of x1^a x2^b.
    fn zf(idx: &MomentIndex, parts: &[(f64, u32, u32)]) -> LinearFunctional {
        LinearFunctional::from_terms(
            parts
                .iter()
                .map(|&(c, a, b)| {
                    (
                        idx.basis().position(&Monomial::from_exponents(vec![a, b])).unwrap(),
                        c,
                    )
                })
                .collect(),
        )
    }

    #[test]
    fn printed_two_variable_blocks() {
        let sp = two_vars();
        let idx = MomentIndex::new(sp, 2);
        let g = PolyMatrix::from_fn(sp, 2, 2, |i, j| match (i, j) {
            (0, 0) => parse("1 - x11*y1", sp),
            (0, 1) => parse("x11 + y1", sp),
            (1, 0) => parse("x11 - y1", sp),
            _ => parse("x11^2 - y1^2", sp),
        });
        let l = block_localizing_map(&g, &idx).unwrap();
        assert_eq!(l.dim(), 6);
        assert!(!l.is_symmetric());
        let expected_11 = [
            [[(1.0, 0, 0), (-1.0, 1, 1)], [(1.0, 1, 0), (-1.0, 2, 1)], [(1.0, 0, 1), (-1.0, 1, 2)]],
            [[(1.0, 1, 0), (-1.0, 2, 1)], [(1.0, 2, 0), (-1.0, 3, 1)], [(1.0, 1, 1), (-1.0, 2, 2)]],
            [[(1.0, 0, 1), (-1.0, 1, 2)], [(1.0, 1, 1), (-1.0, 2, 2)], [(1.0, 0, 2), (-1.0, 1, 3)]],
        ];
        for r in 0..3 {
            for c in 0..3 {
                assert_eq!(l.entry(r, c), &zf(&idx, &expected_11[r][c]));
            }
        }
        // x1 + x2 block (top right) and x1 - x2 block (bottom left)
        assert_eq!(l.entry(0, 3), &zf(&idx, &[(1.0, 1, 0), (1.0, 0, 1)]));
        assert_eq!(l.entry(1, 5), &zf(&idx, &[(1.0, 2, 1), (1.0, 1, 2)]));
        assert_eq!(l.entry(3, 0), &zf(&idx, &[(1.0, 1, 0), (-1.0, 0, 1)]));
        assert_eq!(l.entry(5, 2), &zf(&idx, &[(1.0, 1, 2), (-1.0, 0, 3)]));
        // x1^2 - x2^2 block
        assert_eq!(l.entry(3, 3), &zf(&idx, &[(1.0, 2, 0), (-1.0, 0, 2)]));
        assert_eq!(l.entry(4, 4), &zf(&idx, &[(1.0, 4, 0), (-1.0, 2, 2)]));
        assert_eq!(l.entry(5, 5), &zf(&idx, &[(1.0, 2, 2), (-1.0, 0, 4)]));
        assert_eq!(l.entry(4, 5), &zf(&idx, &[(1.0, 3, 1), (-1.0, 1, 3)]));

        let scalar = localizing_map(&parse("1 - x11*y1", sp), &idx).unwrap();
        assert!(scalar.is_symmetric());
        for r in 0..3 {
            for c in 0..3 {
                assert_eq!(scalar.entry(r, c), &zf(&idx, &expected_11[r][c]));
            }
        }
    }

    #[test]
    fn moment_matrix_is_outer_product_at_dirac() {
        let sp = VarSpace::new(2, 0).unwrap();
        let idx = MomentIndex::new(sp, 1);
        let u = [0.2, -0.4, 0.8];
        let m = localizing_map(&Polynomial::constant(sp, 1.0), &idx)
            .unwrap()
            .evaluate(&idx.dirac(&u));
        let v = nalgebra::DVector::from_vec(vec![1.0, u[0], u[1], u[2]]);
        assert!((m - &v * v.transpose()).abs().max() < 1e-15);
        assert_eq!(moment_matrix(&idx, 1), localizing_map_at(&Polynomial::constant(sp, 1.0), 1).unwrap());
    }

    #[test]
    fn localizing_x11_at_unit_point() {
        let sp = VarSpace::new(2, 0).unwrap();
        let idx = MomentIndex::new(sp, 2);
        let u = [1.0, 0.0, 0.0];
        let m = localizing_map(&Polynomial::x(sp, 0, 0), &idx)
            .unwrap()
            .evaluate(&idx.dirac(&u));
        assert_eq!(m.nrows(), 4);
        assert_eq!(m[(0, 0)], 1.0);
        let v = nalgebra::DVector::from_vec(vec![1.0, 1.0, 0.0, 0.0]);
        assert!((m - &v * v.transpose()).abs().max() < 1e-15);
    }

    #[test]
    fn matrix_variable_block_at_order_one() {
        let sp = VarSpace::new(2, 0).unwrap();
        let idx = MomentIndex::new(sp, 1);
        let x = PolyMatrix::from_fn(sp, 2, 2, |i, j| Polynomial::x(sp, i, j));
        let l = block_localizing_map(&x, &idx).unwrap();
        assert_eq!(l.dim(), 2);
        assert!(l.is_symmetric());
        assert_eq!(l.entry(0, 0).terms(), &[(1, 1.0)]);
        assert_eq!(l.entry(0, 1).terms(), &[(2, 1.0)]);
        assert_eq!(l.entry(1, 0).terms(), &[(2, 1.0)]);
        assert_eq!(l.entry(1, 1).terms(), &[(3, 1.0)]);
    }

    #[test]
    fn order_too_small() {
        let sp = VarSpace::new(2, 0).unwrap();
        let idx = MomentIndex::new(sp, 1);
        let q = parse("x11^3", sp);
        assert!(matches!(localizing_map(&q, &idx), Err(MomentError::DegreeOverflow { .. })));
    }

    #[test]
    fn ideal_rows_cover_all_shifts() {
        let sp = VarSpace::new(2, 0).unwrap();
        let idx = MomentIndex::new(sp, 2);
        let h = parse("x11 + x22 - 1", sp);
        let rows = idx.ideal_rows(&h).unwrap();
        assert_eq!(rows.len(), binomial(3 + 3, 3));
        let cubic = parse("x11^3", sp);
        assert_eq!(idx.ideal_rows(&cubic).unwrap().len(), 4);
    }
}
