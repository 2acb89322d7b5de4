use std::collections::HashSet;

use crate::conegen::ProblemSpec;
use crate::moment::{block_localizing_map, localizing_map, moment_matrix, LinearFunctional, MomentIndex};
use crate::poly::Polynomial;

use super::{ConicProblem, PsdBlock, SdpError};

const DEPENDENCE_TOL: f64 = 1e-9;

fn check_order(spec: &ProblemSpec, k: u32) -> Result<(), SdpError> {
    if k < spec.d0 {
        return Err(SdpError::OrderTooLow { k, d0: spec.d0 });
    }
    Ok(())
}

fn normalization() -> LinearFunctional {
    LinearFunctional::from_terms(vec![(0, 1.0)])
}

/// Bit pattern of a row scaled to unit leading coefficient, for deduplication.
fn row_key(row: &LinearFunctional) -> Vec<(usize, u64)> {
    let lead = row.terms().first().map_or(1.0, |t| t.1);
    row.terms()
        .iter()
        .map(|&(i, c)| (i, (c / lead + 0.0).to_bits()))
        .collect()
}

/// Drops duplicated and linearly dependent rows, keeping the first
/// representative of each. Returns the indices of the kept rows.
pub fn reduce_equalities(rows: &[LinearFunctional], rhs: &[f64], nz: usize) -> Result<Vec<usize>, SdpError> {
    let mut seen = HashSet::new();
    // pivot rows, scaled so the pivot entry is 1 and reduced against earlier pivots
    let mut pivots: Vec<(usize, Vec<(usize, f64)>, f64)> = Vec::new();
    let mut is_pivot = vec![false; nz];
    let mut kept = Vec::new();
    let mut work = vec![0.0; nz];
    for (ri, row) in rows.iter().enumerate() {
        if row.terms().is_empty() {
            if rhs[ri].abs() > DEPENDENCE_TOL {
                return Err(SdpError::InconsistentEqualities { residual: rhs[ri].abs() });
            }
            continue;
        }
        if !seen.insert(row_key(row)) {
            continue;
        }
        let scale = row.terms().iter().fold(0.0f64, |m, t| m.max(t.1.abs()));
        work.iter_mut().for_each(|w| *w = 0.0);
        for &(i, c) in row.terms() {
            work[i] = c;
        }
        let mut b = rhs[ri];
        for (col, prow, pb) in &pivots {
            let coef = work[*col];
            if coef != 0.0 {
                for &(i, v) in prow {
                    work[i] -= coef * v;
                }
                work[*col] = 0.0;
                b -= coef * pb;
            }
        }
        let (col, peak) = work
            .iter()
            .enumerate()
            .filter(|(i, _)| !is_pivot[*i])
            .fold((0, 0.0f64), |acc, (i, &v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc });
        if peak <= DEPENDENCE_TOL * scale {
            if b.abs() > DEPENDENCE_TOL * scale.max(1.0) * 1e3 {
                return Err(SdpError::InconsistentEqualities { residual: b.abs() });
            }
            continue;
        }
        let p = work[col];
        let prow: Vec<(usize, f64)> = work
            .iter()
            .enumerate()
            .filter(|(i, v)| **v != 0.0 && *i != col && v.abs() > DEPENDENCE_TOL * 1e-3 * scale)
            .map(|(i, &v)| (i, v / p))
            .chain(std::iter::once((col, 1.0)))
            .collect();
        is_pivot[col] = true;
        pivots.push((col, prow, b / p));
        kept.push(ri);
    }
    Ok(kept)
}

fn finish(
    nz: usize,
    objective: LinearFunctional,
    eq_polys: &[&Polynomial],
    index: &MomentIndex,
    psd_blocks: Vec<PsdBlock>,
) -> Result<ConicProblem, SdpError> {
    let mut rows = vec![normalization()];
    let mut rhs = vec![1.0];
    for q in eq_polys {
        for r in index.ideal_rows(q)? {
            rows.push(r);
            rhs.push(0.0);
        }
    }
    let kept = reduce_equalities(&rows, &rhs, nz)?;
    let eq_rows = kept.iter().map(|&i| rows[i].clone()).collect();
    let eq_rhs = kept.iter().map(|&i| rhs[i]).collect();
    Ok(ConicProblem {
        nz,
        objective,
        eq_rows,
        eq_rhs,
        psd_blocks,
    })
}

fn block(name: impl Into<String>, map: crate::moment::LinearMatrixMap) -> PsdBlock {
    PsdBlock { name: name.into(), map }
}

fn sandwich_and_orthant(spec: &ProblemSpec, index: &MomentIndex, blocks: &mut Vec<PsdBlock>) -> Result<(), SdpError> {
    let (upper, lower) = spec.sandwich();
    blocks.push(block("norm_upper", localizing_map(upper, index)?));
    blocks.push(block("norm_lower", localizing_map(lower, index)?));
    for (t, y) in spec.orthant().iter().enumerate() {
        blocks.push(block(format!("y{}", t + 1), localizing_map(y, index)?));
    }
    Ok(())
}

/// The order-`k` moment relaxation of the strengthened reformulation.
///
/// Blocks, in order: `moment`, `X`, `theta`, `norm_upper`, `norm_lower`,
/// `y1..ym`, `p1..pm`. Each equality polynomial `q` contributes the rows
/// `<q x^a, z> = 0` for `|a| <= 2k - deg q`; duplicated and dependent rows
/// are removed.
pub fn assemble_relaxation(spec: &ProblemSpec, k: u32) -> Result<ConicProblem, SdpError> {
    check_order(spec, k)?;
    let index = MomentIndex::new(spec.space, k);
    let objective = index.functional(&spec.objective)?;
    let mut blocks = vec![
        block("moment", moment_matrix(&index, k)),
        block("X", block_localizing_map(spec.matrix_variable(), &index)?),
        block("theta", block_localizing_map(spec.theta(), &index)?),
    ];
    sandwich_and_orthant(spec, &index, &mut blocks)?;
    let m = spec.space.m();
    for (t, p) in spec.scalar_nonneg[2 + m..].iter().enumerate() {
        blocks.push(block(format!("p{}", t + 1), localizing_map(p, &index)?));
    }
    let eqs: Vec<&Polynomial> = spec.equalities.iter().collect();
    finish(index.len(), objective, &eqs, &index, blocks)
}

/// The auxiliary program minimizing `<xi^T [x]_d, w>` over the points of
/// the reformulation without multiplier constraints whose value is at most
/// `bound`. A non-finite `bound` drops that constraint.
pub fn assemble_auxiliary(spec: &ProblemSpec, xi: &[f64], bound: f64, k: u32) -> Result<ConicProblem, SdpError> {
    check_order(spec, k)?;
    let index = MomentIndex::new(spec.space, k);
    let expected = index.basis().prefix_len(spec.degree);
    if xi.len() != expected {
        return Err(SdpError::DirectionLength {
            expected,
            got: xi.len(),
        });
    }
    let objective = LinearFunctional::from_terms(xi.iter().copied().enumerate().collect());
    let mut blocks = vec![
        block("moment", moment_matrix(&index, k)),
        block("X", block_localizing_map(spec.matrix_variable(), &index)?),
    ];
    if bound.is_finite() {
        let slack = &Polynomial::constant(spec.space, bound) - &spec.objective;
        blocks.push(block("bound", localizing_map(&slack, &index)?));
    }
    sandwich_and_orthant(spec, &index, &mut blocks)?;
    finish(index.len(), objective, &[spec.h()], &index, blocks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conegen::build_problem_spec;
    use crate::poly::VarSpace;

    fn f1() -> (Polynomial, VarSpace) {
        let sp = VarSpace::new(2, 0).unwrap();
        let f = Polynomial::parse("x11^2*x12 + x11*x12^2 + x22^3 - 3*x11*x12*x22", sp).unwrap();
        (f, sp)
    }

    #[test]
    fn relaxation_census() {
        let (f, sp) = f1();
        let spec = build_problem_spec(&f, sp).unwrap();
        let p = assemble_relaxation(&spec, 2).unwrap();
        assert_eq!(p.nz, 35);
        assert_eq!(p.block_sizes(), vec![10, 8, 2, 4, 4]);
        assert_eq!(p.eq_rows[0], normalization());
        assert_eq!(p.eq_rhs[0], 1.0);
        p.validate().unwrap();
        assert_eq!(
            assemble_relaxation(&spec, 1).unwrap_err(),
            SdpError::OrderTooLow { k: 1, d0: 2 }
        );
    }

    #[test]
    fn auxiliary_census() {
        let (f, sp) = f1();
        let spec = build_problem_spec(&f, sp).unwrap();
        let xi = vec![0.5; 20];
        let p = assemble_auxiliary(&spec, &xi, -0.1213, 2).unwrap();
        let names: Vec<_> = p.psd_blocks.iter().map(|b| b.name.as_str()).collect();
        assert_eq!(names, ["moment", "X", "bound", "norm_upper", "norm_lower"]);
        assert_eq!(p.block_sizes(), vec![10, 8, 1, 4, 4]);
        // only h contributes rows, one per monomial of degree <= 3
        assert!(p.eq_rows.len() <= 21);
        let unbounded = assemble_auxiliary(&spec, &xi, f64::INFINITY, 2).unwrap();
        assert!(unbounded.block("bound").is_none());
        assert_eq!(
            assemble_auxiliary(&spec, &[1.0; 3], 0.0, 2).unwrap_err(),
            SdpError::DirectionLength { expected: 20, got: 3 }
        );
    }

    #[test]
    fn mixed_auxiliary_size() {
        let sp = VarSpace::new(2, 2).unwrap();
        let f = Polynomial::parse("x11^2 - x12*y1 + y2^2", sp).unwrap();
        let spec = build_problem_spec(&f, sp).unwrap();
        let xi = vec![1.0; 21];
        let p = assemble_auxiliary(&spec, &xi, 0.0, 3).unwrap();
        assert_eq!(p.nz, 462);
    }

    #[test]
    fn dirac_embedding_is_feasible() {
        let (f, sp) = f1();
        let spec = build_problem_spec(&f, sp).unwrap();
        let p = assemble_relaxation(&spec, 2).unwrap();
        let a = assemble_auxiliary(&spec, &[0.0; 20], f64::INFINITY, 2).unwrap();
        let u = [0.6, 0.1, 0.4];
        let z = MomentIndex::new(sp, 2).dirac(&u);
        assert!(a.equality_violation(&z) < 1e-12);
        assert!(a.min_block_eigenvalue(&z) > -1e-12);
        assert!((p.objective_at(&z) - f.evaluate(&u).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn dedup_and_dependence() {
        let r = |t: Vec<(usize, f64)>| LinearFunctional::from_terms(t);
        let rows = vec![
            r(vec![(0, 1.0)]),
            r(vec![(1, 1.0), (2, -1.0)]),
            r(vec![(1, 2.0), (2, -2.0)]),
            r(vec![(0, 1.0), (1, 1.0), (2, -1.0)]),
            r(vec![(2, 1.0)]),
        ];
        let rhs = vec![1.0, 0.0, 0.0, 1.0, 0.0];
        assert_eq!(reduce_equalities(&rows, &rhs, 3).unwrap(), vec![0, 1, 4]);
        let bad = vec![1.0, 0.0, 0.0, 2.0, 0.0];
        assert!(matches!(
            reduce_equalities(&rows, &bad, 3),
            Err(SdpError::InconsistentEqualities { .. })
        ));
    }
}
