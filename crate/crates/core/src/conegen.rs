//! Structural polynomials of the strengthened reformulation.
//!
//! For a form `f` of degree `d` over `S^n_+ x R^m_+` this builds the matrix
//! variable `X(x)`, the multiplier matrix `Theta` obtained by eliminating the
//! Lagrange multipliers with Euler's identity, the scalar multipliers `p_t`,
//! the complementarity products and the Frobenius-norm sandwich, and collects
//! them in a [`ProblemSpec`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poly::{Homogeneity, PolyError, PolyMatrix, Polynomial, VarSpace};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConeGenError {
    /// `offending` lists the terms whose degree differs from `degree`.
    #[error("objective is not homogeneous: terms of degree other than {degree}: {offending}")]
    NotHomogeneous { degree: u32, offending: String },
    #[error("objective must have degree at least 1")]
    ConstantObjective,
    #[error("objective lives in a different variable space")]
    SpaceMismatch,
    #[error(transparent)]
    Poly(#[from] PolyError),
}

/// `X(x)`: symmetric n x n matrix with entry (i, j) = x_{min(i,j), max(i,j)}.
pub fn build_matrix_variable(space: VarSpace) -> PolyMatrix {
    let n = space.n();
    PolyMatrix::from_fn(space, n, n, |i, j| Polynomial::x(space, i, j))
}

/// Returns `(h, normsq)` with `h = tr X + sum y - 1` and
/// `normsq = ||X||_F^2 + ||y||^2`.
pub fn structural_polynomials(space: VarSpace) -> (Polynomial, Polynomial) {
    let n = space.n();
    let mut h = Polynomial::constant(space, -1.0);
    let mut normsq = Polynomial::zero(space);
    for i in 0..n {
        for j in i..n {
            let x = Polynomial::x(space, i, j);
            let sq = &x * &x;
            if i == j {
                h = &h + &x;
                normsq = &normsq + &sq;
            } else {
                normsq = &normsq + &sq.scale(2.0);
            }
        }
    }
    for t in 0..space.m() {
        let y = Polynomial::y(space, t);
        h = &h + &y;
        normsq = &normsq + &(&y * &y);
    }
    (h, normsq)
}

/// The lower Frobenius bound `1/(n+m)`.
pub fn norm_lower_bound(space: VarSpace) -> f64 {
    1.0 / (space.n() + space.m()) as f64
}

/// `1 - normsq` and `normsq - 1/(n+m)`.
pub fn sandwich_polynomials(space: VarSpace) -> (Polynomial, Polynomial) {
    let (_, normsq) = structural_polynomials(space);
    let upper = &Polynomial::constant(space, 1.0) - &normsq;
    let lower = &normsq - &Polynomial::constant(space, norm_lower_bound(space));
    (upper, lower)
}

fn not_homogeneous(f: &Polynomial) -> ConeGenError {
    let degree = f.degree_or_zero();
    let rest = Polynomial::from_terms(
        f.space(),
        f.terms().filter(|(mono, _)| mono.degree() != degree).map(|(mono, c)| (mono.clone(), c)),
    );
    ConeGenError::NotHomogeneous {
        degree,
        offending: rest.to_string(),
    }
}

fn objective_degree(f: &Polynomial, space: VarSpace, allow_inhomogeneous: bool) -> Result<u32, ConeGenError> {
    if f.space() != space {
        return Err(ConeGenError::SpaceMismatch);
    }
    let d = match f.homogeneous_degree() {
        Homogeneity::Homogeneous { zero: true, .. } => return Err(ConeGenError::ConstantObjective),
        Homogeneity::Homogeneous { degree, .. } => degree,
        Homogeneity::NotHomogeneous if allow_inhomogeneous => f.degree_or_zero(),
        Homogeneity::NotHomogeneous => return Err(not_homogeneous(f)),
    };
    if d == 0 {
        return Err(ConeGenError::ConstantObjective);
    }
    Ok(d)
}

/// `Theta` with diagonal `df/dx_ii - d f` and off-diagonal `1/2 df/dx_ij`, and
/// `p_t = df/dy_t - d f`.
pub fn build_theta(f: &Polynomial, space: VarSpace) -> Result<(PolyMatrix, Vec<Polynomial>), ConeGenError> {
    let d = objective_degree(f, space, false)?;
    theta_with_degree(f, space, d)
}

fn theta_with_degree(f: &Polynomial, space: VarSpace, d: u32) -> Result<(PolyMatrix, Vec<Polynomial>), ConeGenError> {
    let n = space.n();
    let df = f.scale(d as f64);
    let mut grads = Vec::with_capacity(space.nvars());
    for v in 0..space.nvars() {
        grads.push(f.differentiate(v)?);
    }
    let theta = PolyMatrix::from_fn(space, n, n, |i, j| {
        let g = &grads[space.x_index(i, j)];
        if i == j {
            g - &df
        } else {
            g.scale(0.5)
        }
    });
    let p = (0..space.m())
        .map(|t| &grads[space.y_index(t)] - &df)
        .collect();
    Ok((theta, p))
}

/// All n^2 entries of `X * Theta` (row-major), then `p_t * y_t`.
pub fn complementarity_products(
    x: &PolyMatrix,
    theta: &PolyMatrix,
    p: &[Polynomial],
    space: VarSpace,
) -> Result<Vec<Polynomial>, ConeGenError> {
    if p.len() != space.m() {
        return Err(PolyError::ShapeMismatch(p.len(), 1, space.m(), 1).into());
    }
    let prod = x.checked_mul(theta)?;
    let mut out: Vec<Polynomial> = prod.entries().to_vec();
    for (t, pt) in p.iter().enumerate() {
        out.push(pt.checked_mul(&Polynomial::y(space, t))?);
    }
    Ok(out)
}

/// One instance of the strengthened reformulation.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub space: VarSpace,
    pub objective: Polynomial,
    /// Objective degree used in `Theta` (and for `d0`).
    pub degree: u32,
    /// `h` first, then the `X Theta` entries, then `p_t y_t`.
    pub equalities: Vec<Polynomial>,
    /// `X` and `Theta`.
    pub psd_matrices: Vec<PolyMatrix>,
    /// `1 - normsq`, `normsq - 1/(n+m)`, then each `y_t`, then each `p_t`.
    pub scalar_nonneg: Vec<Polynomial>,
    pub d0: u32,
    /// Set when the objective was accepted without being homogeneous.
    pub inhomogeneous: bool,
}

impl ProblemSpec {
    pub fn h(&self) -> &Polynomial {
        &self.equalities[0]
    }

    pub fn matrix_variable(&self) -> &PolyMatrix {
        &self.psd_matrices[0]
    }

    pub fn theta(&self) -> &PolyMatrix {
        &self.psd_matrices[1]
    }

    /// `1 - normsq` and `normsq - 1/(n+m)`.
    pub fn sandwich(&self) -> (&Polynomial, &Polynomial) {
        (&self.scalar_nonneg[0], &self.scalar_nonneg[1])
    }

    /// The orthant variables `y_t` as polynomials.
    pub fn orthant(&self) -> &[Polynomial] {
        &self.scalar_nonneg[2..2 + self.space.m()]
    }

    pub fn to_json(&self) -> serde_json::Value {
        let doc = ProblemSpecDoc::from(self);
        serde_json::to_value(doc).expect("plain data serializes")
    }
}

/// Textual form of a [`ProblemSpec`], for debugging and golden files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpecDoc {
    pub n: usize,
    pub m: usize,
    pub degree: u32,
    pub d0: u32,
    pub objective: String,
    pub equalities: Vec<String>,
    pub matrices: Vec<Vec<Vec<String>>>,
    pub inequalities: Vec<String>,
}

impl From<&ProblemSpec> for ProblemSpecDoc {
    fn from(spec: &ProblemSpec) -> Self {
        Self {
            n: spec.space.n(),
            m: spec.space.m(),
            degree: spec.degree,
            d0: spec.d0,
            objective: spec.objective.to_string(),
            equalities: spec.equalities.iter().map(ToString::to_string).collect(),
            matrices: spec
                .psd_matrices
                .iter()
                .map(|mat| {
                    (0..mat.rows())
                        .map(|i| (0..mat.cols()).map(|j| mat.get(i, j).to_string()).collect())
                        .collect()
                })
                .collect(),
            inequalities: spec.scalar_nonneg.iter().map(ToString::to_string).collect(),
        }
    }
}

/// Assembles the reformulation for a homogeneous `f`.
pub fn build_problem_spec(f: &Polynomial, space: VarSpace) -> Result<ProblemSpec, ConeGenError> {
    build_problem_spec_with(f, space, false)
}

/// As [`build_problem_spec`]; with `allow_inhomogeneous` a non-homogeneous
/// objective is accepted and `d = deg f` is used in `Theta`.
pub fn build_problem_spec_with(
    f: &Polynomial,
    space: VarSpace,
    allow_inhomogeneous: bool,
) -> Result<ProblemSpec, ConeGenError> {
    let d = objective_degree(f, space, allow_inhomogeneous)?;
    let inhomogeneous = matches!(f.homogeneous_degree(), Homogeneity::NotHomogeneous);
    let x = build_matrix_variable(space);
    let (theta, p) = theta_with_degree(f, space, d)?;
    let (h, _) = structural_polynomials(space);
    let (upper, lower) = sandwich_polynomials(space);

    let mut equalities = vec![h];
    equalities.extend(complementarity_products(&x, &theta, &p, space)?);

    let mut scalar_nonneg = vec![upper, lower];
    scalar_nonneg.extend((0..space.m()).map(|t| Polynomial::y(space, t)));
    scalar_nonneg.extend(p);

    Ok(ProblemSpec {
        space,
        objective: f.clone(),
        degree: d,
        equalities,
        psd_matrices: vec![x, theta],
        scalar_nonneg,
        d0: (d + 2) / 2,
        inhomogeneous,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str, sp: VarSpace) -> Polynomial {
        Polynomial::parse(s, sp).unwrap()
    }

    #[test]
    fn matrix_variable_shapes() {
        let s1 = VarSpace::new(1, 0).unwrap();
        let x1 = build_matrix_variable(s1);
        assert_eq!(x1.rows(), 1);
        assert_eq!(*x1.get(0, 0), Polynomial::x(s1, 0, 0));
        let s3 = VarSpace::new(3, 0).unwrap();
        let x3 = build_matrix_variable(s3);
        assert!(x3.is_symmetric());
        assert_eq!(x3.get(0, 2).to_string(), "x13");
        assert_eq!(x3.get(2, 0).to_string(), "x13");
    }

    #[test]
    fn structural_examples() {
        let sp = VarSpace::new(2, 0).unwrap();
        let (h, nsq) = structural_polynomials(sp);
        assert_eq!(h, parse("x11 + x22 - 1", sp));
        assert_eq!(nsq, parse("x11^2 + 2*x12^2 + x22^2", sp));
        let sp = VarSpace::new(1, 1).unwrap();
        let (h, nsq) = structural_polynomials(sp);
        assert_eq!(h, parse("x11 + y1 - 1", sp));
        assert_eq!(nsq, parse("x11^2 + y1^2", sp));
        assert_eq!(norm_lower_bound(sp), 0.5);
    }

    #[test]
    fn sandwich_at_scaled_identity() {
        for n in 1..5 {
            let sp = VarSpace::new(n, 0).unwrap();
            let mut u = vec![0.0; sp.nvars()];
            for i in 0..n {
                u[sp.x_index(i, i)] = 1.0 / n as f64;
            }
            let (upper, lower) = sandwich_polynomials(sp);
            let (_, nsq) = structural_polynomials(sp);
            assert!((nsq.evaluate(&u).unwrap() - 1.0 / n as f64).abs() < 1e-15);
            assert!((upper.evaluate(&u).unwrap() - (1.0 - 1.0 / n as f64)).abs() < 1e-15);
            assert!(lower.evaluate(&u).unwrap().abs() < 1e-15);
        }
    }

    #[test]
    fn theta_linear_form() {
        let sp = VarSpace::new(1, 0).unwrap();
        let (theta, p) = build_theta(&parse("x11", sp), sp).unwrap();
        assert_eq!(*theta.get(0, 0), parse("1 - x11", sp));
        assert!(p.is_empty());
    }

    #[test]
    fn theta_of_determinant() {
        let sp = VarSpace::new(2, 0).unwrap();
        let f = parse("x11*x22 - x12^2", sp);
        let (theta, _) = build_theta(&f, sp).unwrap();
        let two_f = f.scale(2.0);
        assert_eq!(*theta.get(0, 0), &parse("x22", sp) - &two_f);
        assert_eq!(*theta.get(1, 1), &parse("x11", sp) - &two_f);
        assert_eq!(*theta.get(0, 1), parse("-x12", sp));
        assert!(theta.is_symmetric());

        let x = build_matrix_variable(sp);
        let prods = complementarity_products(&x, &theta, &[], sp).unwrap();
        assert_eq!(prods.len(), 4);
        let expected = &(&parse("x11", sp) * theta.get(0, 0)) - &parse("x12^2", sp);
        assert_eq!(prods[0], expected);
    }

    #[test]
    fn theta_rejects_bad_objectives() {
        let sp = VarSpace::new(2, 0).unwrap();
        assert_eq!(
            build_theta(&parse("x11 + x12^2", sp), sp).unwrap_err(),
            ConeGenError::NotHomogeneous {
                degree: 2,
                offending: "x11".into()
            }
        );
        assert_eq!(
            build_theta(&parse("3", sp), sp).unwrap_err(),
            ConeGenError::ConstantObjective
        );
        assert_eq!(
            build_theta(&Polynomial::zero(sp), sp).unwrap_err(),
            ConeGenError::ConstantObjective
        );
    }

    #[test]
    fn product_count() {
        let sp = VarSpace::new(3, 2).unwrap();
        let f = parse("x11*y1 + x23^2 - y2^2", sp);
        let (theta, p) = build_theta(&f, sp).unwrap();
        let x = build_matrix_variable(sp);
        assert_eq!(complementarity_products(&x, &theta, &p, sp).unwrap().len(), 11);
    }

    #[test]
    fn spec_census() {
        let sp = VarSpace::new(2, 0).unwrap();
        let f1 = parse("x11^2*x12 + x11*x12^2 + x22^3 - 3*x11*x12*x22", sp);
        let spec = build_problem_spec(&f1, sp).unwrap();
        assert_eq!(spec.equalities.len(), 5);
        assert_eq!(spec.psd_matrices.len(), 2);
        assert_eq!(spec.scalar_nonneg.len(), 2);
        assert_eq!(spec.d0, 2);

        let cube = parse("x11^3 + 3*x11^2*x22 + 3*x11*x22^2 + x22^3", sp);
        assert_eq!(build_problem_spec(&cube, sp).unwrap().d0, 2);

        let doc = spec.to_json();
        assert_eq!(doc["d0"], 2);
        assert_eq!(doc["equalities"][0], "x22 + x11 - 1");
    }

    #[test]
    fn inhomogeneous_escape_hatch() {
        let sp = VarSpace::new(3, 0).unwrap();
        let f5 = parse("x22 + x33 + 10*x11*x22 - 10*x12^2", sp);
        assert!(matches!(
            build_problem_spec(&f5, sp).unwrap_err(),
            ConeGenError::NotHomogeneous { degree: 2, .. }
        ));
        let spec = build_problem_spec_with(&f5, sp, true).unwrap();
        assert!(spec.inhomogeneous);
        assert_eq!(spec.degree, 2);
        assert_eq!(spec.d0, 2);
    }
}
