//! Structured test inputs and the built-in benchmark suites.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::copotest::{TestReport, Verdict};
use crate::poly::{PolyError, PolyMatrix, Polynomial, VarSpace};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CorpusError {
    #[error("matrix file: {0}")]
    MatrixFile(String),
    #[error("matrix must be {expected}x{expected}, got {rows}x{cols}")]
    MatrixShape { expected: usize, rows: usize, cols: usize },
    #[error("unknown suite `{0}`")]
    UnknownSuite(String),
    #[error("unknown form tag `{0}`")]
    UnknownForm(String),
    #[error(transparent)]
    Poly(#[from] PolyError),
}

/// How a coefficient matrix `A` defines a form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormTag {
    /// `w' A w` with `w = (x11, x12, .., xnn, y1, .., ym)`.
    Quadratic,
    /// `tr((X A)^2)`.
    TraceSquare,
    /// `tr(X^2 A + X A X)`.
    TraceMixed,
}

impl std::str::FromStr for FormTag {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "quadratic" => Ok(FormTag::Quadratic),
            "trace-square" => Ok(FormTag::TraceSquare),
            "trace-mixed" => Ok(FormTag::TraceMixed),
            other => Err(CorpusError::UnknownForm(other.to_string())),
        }
    }
}

/// Parses `n` on the first line followed by `n` rows of `n` reals.
pub fn parse_matrix(text: &str) -> Result<DMatrix<f64>, CorpusError> {
    let mut toks = text.split_whitespace();
    let n: usize = toks
        .next()
        .ok_or_else(|| CorpusError::MatrixFile("empty file".into()))?
        .parse()
        .map_err(|_| CorpusError::MatrixFile("first token must be the dimension".into()))?;
    let vals = toks
        .map(|t| t.parse::<f64>().map_err(|_| CorpusError::MatrixFile(format!("bad entry `{t}`"))))
        .collect::<Result<Vec<_>, _>>()?;
    if vals.len() != n * n {
        return Err(CorpusError::MatrixFile(format!("expected {} entries, found {}", n * n, vals.len())));
    }
    Ok(DMatrix::from_row_slice(n, n, &vals))
}

fn check_square(a: &DMatrix<f64>, expected: usize) -> Result<(), CorpusError> {
    if a.nrows() != expected || a.ncols() != expected {
        return Err(CorpusError::MatrixShape {
            expected,
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    Ok(())
}

fn constant_matrix(a: &DMatrix<f64>, space: VarSpace) -> PolyMatrix {
    PolyMatrix::from_fn(space, a.nrows(), a.ncols(), |i, j| Polynomial::constant(space, a[(i, j)]))
}

fn trace(m: &PolyMatrix, space: VarSpace) -> Polynomial {
    (0..m.rows()).fold(Polynomial::zero(space), |acc, i| &acc + m.get(i, i))
}

/// `w' A w` over all `sigma(n) + m` variables in their canonical order.
pub fn quadratic_form(a: &DMatrix<f64>, space: VarSpace) -> Result<Polynomial, CorpusError> {
    let nv = space.nvars();
    check_square(a, nv)?;
    let mut f = Polynomial::zero(space);
    for i in 0..nv {
        for j in 0..nv {
            if a[(i, j)] != 0.0 {
                let term = &Polynomial::var(space, i) * &Polynomial::var(space, j);
                f = &f + &term.scale(a[(i, j)]);
            }
        }
    }
    Ok(f)
}

/// `tr((X A)^2)`.
pub fn trace_square_form(a: &DMatrix<f64>, space: VarSpace) -> Result<Polynomial, CorpusError> {
    check_square(a, space.n())?;
    let xa = crate::conegen::build_matrix_variable(space).checked_mul(&constant_matrix(a, space))?;
    Ok(trace(&xa.checked_mul(&xa)?, space))
}

/// `tr(X^2 A + X A X)`.
pub fn trace_mixed_form(a: &DMatrix<f64>, space: VarSpace) -> Result<Polynomial, CorpusError> {
    check_square(a, space.n())?;
    let x = crate::conegen::build_matrix_variable(space);
    let am = constant_matrix(a, space);
    let x2a = x.checked_mul(&x)?.checked_mul(&am)?;
    let xax = x.checked_mul(&am)?.checked_mul(&x)?;
    Ok(&trace(&x2a, space) + &trace(&xax, space))
}

pub fn matrix_form(tag: FormTag, a: &DMatrix<f64>, space: VarSpace) -> Result<Polynomial, CorpusError> {
    match tag {
        FormTag::Quadratic => quadratic_form(a, space),
        FormTag::TraceSquare => trace_square_form(a, space),
        FormTag::TraceMixed => trace_mixed_form(a, space),
    }
}

/// `sum_{i<n} x_ii x_{i+1,i+1} - x_{i,i+1}^2`.
pub fn chain_form(space: VarSpace) -> Polynomial {
    let mut f = Polynomial::zero(space);
    for i in 0..space.n().saturating_sub(1) {
        let d = &Polynomial::x(space, i, i) * &Polynomial::x(space, i + 1, i + 1);
        let o = Polynomial::x(space, i, i + 1);
        f = &(&f + &d) - &(&o * &o);
    }
    f
}

/// `det X(x)` by cofactor expansion.
pub fn determinant_form(space: VarSpace) -> Polynomial {
    fn det(rows: &[usize], cols: &[usize], space: VarSpace) -> Polynomial {
        if rows.len() == 1 {
            return Polynomial::x(space, rows[0], cols[0]);
        }
        let mut acc = Polynomial::zero(space);
        for (c, &col) in cols.iter().enumerate() {
            let rest: Vec<usize> = cols.iter().copied().filter(|&k| k != col).collect();
            let minor = det(&rows[1..], &rest, space);
            let term = &Polynomial::x(space, rows[0], col) * &minor;
            acc = if c % 2 == 0 { &acc + &term } else { &acc - &term };
        }
        acc
    }
    let idx: Vec<usize> = (0..space.n()).collect();
    det(&idx, &idx, space)
}

pub fn horn_matrix() -> DMatrix<f64> {
    DMatrix::from_row_slice(
        5,
        5,
        &[
            1., -1., 1., 1., -1., //
            -1., 1., -1., 1., 1., //
            1., -1., 1., -1., 1., //
            1., 1., -1., 1., -1., //
            -1., 1., 1., -1., 1.,
        ],
    )
}

pub fn hoffman_pereira_matrix() -> DMatrix<f64> {
    DMatrix::from_row_slice(
        7,
        7,
        &[
            1., -1., 1., 0., 0., 1., -1., //
            -1., 1., -1., 1., 0., 0., 1., //
            1., -1., 1., -1., 1., 0., 0., //
            0., 1., -1., 1., -1., 1., 0., //
            0., 0., 1., -1., 1., -1., 1., //
            1., 0., 0., 1., -1., 1., -1., //
            -1., 1., 0., 0., 1., -1., 1.,
        ],
    )
}

/// Hoffman-Pereira matrix with the last four diagonal entries set to `(1+alpha)^2`.
pub fn hoffman_pereira_alpha(alpha: f64) -> DMatrix<f64> {
    let mut a = hoffman_pereira_matrix();
    for i in 3..7 {
        a[(i, i)] = (1.0 + alpha) * (1.0 + alpha);
    }
    a
}

/// Coefficient matrix of the 4x4 trace-square example.
pub fn trace_example_matrix() -> DMatrix<f64> {
    DMatrix::from_row_slice(
        4,
        4,
        &[
            1., -0.72, -0.59, 1., //
            -0.72, 1., -0.6, -0.46, //
            -0.59, -0.6, 1., -0.6, //
            1., -0.46, -0.6, 1.,
        ],
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExpectedVerdict {
    Copositive,
    NotCopositive,
}

/// Reference relaxation value at one order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpectedBound {
    pub order: u32,
    pub value: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expected {
    pub verdict: ExpectedVerdict,
    /// Order at which the verdict is expected.
    pub order: u32,
    pub bounds: Vec<ExpectedBound>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CaseInput {
    Text(String),
    Matrix { tag: FormTag, a: Vec<Vec<f64>> },
    Chain,
    Determinant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusCase {
    pub name: String,
    pub suite: String,
    pub n: usize,
    pub m: usize,
    pub input: CaseInput,
    pub allow_inhomogeneous: bool,
    /// Excluded from `all`; run only when the suite is named explicitly.
    pub slow: bool,
    pub expected: Expected,
}

impl CorpusCase {
    pub fn space(&self) -> VarSpace {
        VarSpace::new(self.n, self.m).expect("corpus spaces are nonempty")
    }

    pub fn polynomial(&self) -> Result<Polynomial, CorpusError> {
        let space = self.space();
        match &self.input {
            CaseInput::Text(t) => Ok(Polynomial::parse(t, space)?),
            CaseInput::Matrix { tag, a } => {
                let k = a.len();
                let flat: Vec<f64> = a.iter().flatten().copied().collect();
                matrix_form(*tag, &DMatrix::from_row_slice(k, k, &flat), space)
            }
            CaseInput::Chain => Ok(chain_form(space)),
            CaseInput::Determinant => Ok(determinant_form(space)),
        }
    }
}

impl CorpusCase {
    /// Problems with `report` against the expectation; empty means pass.
    ///
    /// The verdict must match and arrive no later than the expected order.
    /// Every expected bound at an order the run reached must be within its
    /// tolerance; bounds at orders reached before the verdict are required.
    pub fn check(&self, report: &TestReport) -> Vec<String> {
        let mut issues = Vec::new();
        let exp = &self.expected;
        let got = match (&report.verdict, exp.verdict) {
            (Verdict::Copositive { order, .. }, ExpectedVerdict::Copositive)
            | (Verdict::NotCopositive { order, .. }, ExpectedVerdict::NotCopositive) => Some(*order),
            _ => None,
        };
        match got {
            None => issues.push(format!("verdict {} (expected {:?})", report.verdict.label(), exp.verdict)),
            Some(k) if k > exp.order => issues.push(format!("verdict at k={k} (expected k<={})", exp.order)),
            _ => {}
        }
        let last = report.orders.last().map_or(0, |o| o.order);
        for b in &exp.bounds {
            match report.bound_at(b.order) {
                Some(v) if (v - b.value).abs() <= b.tol => {}
                Some(v) => issues.push(format!("bound {v:.6e} at k={} (expected {} +- {})", b.order, b.value, b.tol)),
                None if b.order <= last => issues.push(format!("no bound at k={}", b.order)),
                None => {}
            }
        }
        issues
    }
}

pub const SUITES: &[&str] = &["table1", "table2", "table3", "table4", "horn", "mixed", "trace"];

fn rows(a: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..a.nrows()).map(|i| a.row(i).iter().copied().collect()).collect()
}

fn bound(order: u32, value: f64, tol: f64) -> ExpectedBound {
    ExpectedBound { order, value, tol }
}

#[allow(clippy::too_many_arguments)]
fn case(
    suite: &str,
    name: &str,
    n: usize,
    m: usize,
    input: CaseInput,
    verdict: ExpectedVerdict,
    order: u32,
    bounds: Vec<ExpectedBound>,
) -> CorpusCase {
    CorpusCase {
        name: name.to_string(),
        suite: suite.to_string(),
        n,
        m,
        input,
        allow_inhomogeneous: false,
        slow: false,
        expected: Expected { verdict, order, bounds },
    }
}

/// The cases of one suite (`all` gives every non-slow case).
pub fn suite(name: &str) -> Result<Vec<CorpusCase>, CorpusError> {
    use ExpectedVerdict::*;
    let text = |s: &str| CaseInput::Text(s.to_string());
    let cases = match name {
        "table1" => vec![
            case("table1", "f1", 2, 0, text("x11^2*x12 + x11*x12^2 + x22^3 - 3*x11*x12*x22"), NotCopositive, 2, vec![bound(2, -0.1213, 1e-3)]),
            case(
                "table1",
                "f2",
                2,
                0,
                text("x11^3 + x12^3 + x22^3 - x11^2*x12 - x11*x12^2 - x11^2*x22 - x11*x22^2 - x12^2*x22 - x12*x22^2 + 3*x11*x12*x22"),
                NotCopositive,
                2,
                vec![bound(2, -0.5, 1e-3)],
            ),
            case("table1", "f3", 2, 0, text("x11^2*x12 + x12^2*x22 + x22^2*x11 - 3*x11*x12*x22"), NotCopositive, 2, vec![bound(2, -0.1629, 1e-3)]),
        ],
        "table2" => {
            let mut f5 = case("table2", "f5", 3, 0, text("x22 + x33 + 10*x11*x22 - 10*x12^2"), Copositive, 2, vec![]);
            f5.allow_inhomogeneous = true;
            vec![
                case("table2", "f4", 3, 0, text("x11*x22 - x12^2 + x22*x33 - x23^2"), Copositive, 2, vec![]),
                f5,
                case("table2", "f6", 3, 0, CaseInput::Determinant, Copositive, 3, vec![bound(2, -0.0208, 2e-3)]),
            ]
        }
        "table3" => {
            let mut v: Vec<CorpusCase> = (2..=4)
                .map(|n| case("table3", &format!("chain{n}"), n, 0, CaseInput::Chain, Copositive, 2, vec![]))
                .collect();
            v[2].slow = true;
            v
        }
        "table4" => {
            let table = [-0.0229, -0.0152, -0.0075, 1.2918e-4, 0.0078, 0.0154, 0.0229, 0.0304, 0.0379, 0.0453];
            table
                .iter()
                .enumerate()
                .map(|(i, &b)| {
                    let alpha = (i + 1) as f64 / 100.0;
                    let verdict = if b < 0.0 { NotCopositive } else { Copositive };
                    case(
                        "table4",
                        &format!("alpha{:.2}", alpha),
                        2,
                        4,
                        CaseInput::Matrix {
                            tag: FormTag::Quadratic,
                            a: rows(&hoffman_pereira_alpha(alpha)),
                        },
                        verdict,
                        2,
                        vec![bound(2, b, 2e-3)],
                    )
                })
                .collect()
        }
        "horn" => {
            let mut c = case(
                "horn",
                "horn5",
                5,
                0,
                CaseInput::Matrix {
                    tag: FormTag::TraceMixed,
                    a: rows(&horn_matrix()),
                },
                NotCopositive,
                2,
                vec![],
            );
            c.slow = true;
            vec![c]
        }
        "mixed" => vec![
            case(
                "mixed",
                "horn-mixed",
                2,
                2,
                CaseInput::Matrix {
                    tag: FormTag::Quadratic,
                    a: rows(&horn_matrix()),
                },
                NotCopositive,
                3,
                vec![],
            ),
            case(
                "mixed",
                "hoffman-pereira",
                3,
                1,
                CaseInput::Matrix {
                    tag: FormTag::Quadratic,
                    a: rows(&hoffman_pereira_matrix()),
                },
                NotCopositive,
                2,
                vec![],
            ),
        ],
        "trace" => {
            let mut c = case(
                "trace",
                "trace4",
                4,
                0,
                CaseInput::Matrix {
                    tag: FormTag::TraceSquare,
                    a: rows(&trace_example_matrix()),
                },
                Copositive,
                3,
                vec![bound(2, -3.2167e-5, 1e-4)],
            );
            c.slow = true;
            vec![c]
        }
        "all" => {
            let mut v = Vec::new();
            for s in SUITES {
                v.extend(suite(s)?.into_iter().filter(|c| !c.slow));
            }
            v
        }
        other => return Err(CorpusError::UnknownSuite(other.to_string())),
    };
    Ok(cases)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sp(n: usize, m: usize) -> VarSpace {
        VarSpace::new(n, m).unwrap()
    }

    #[test]
    fn chain_n2() {
        let s = sp(2, 0);
        assert_eq!(chain_form(s), Polynomial::parse("x11*x22 - x12^2", s).unwrap());
        let s3 = sp(3, 0);
        assert_eq!(
            chain_form(s3),
            Polynomial::parse("x11*x22 - x12^2 + x22*x33 - x23^2", s3).unwrap()
        );
    }

    #[test]
    fn determinant_small() {
        let s = sp(2, 0);
        assert_eq!(determinant_form(s), Polynomial::parse("x11*x22 - x12^2", s).unwrap());
        let s3 = sp(3, 0);
        let expected = Polynomial::parse("x11*x22*x33 + 2*x12*x23*x13 - x11*x23^2 - x22*x13^2 - x33*x12^2", s3).unwrap();
        assert_eq!(determinant_form(s3), expected);
    }

    #[test]
    fn trace_forms_n2_by_hand() {
        let s = sp(2, 0);
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 3.0]);
        // XA = [[x11 + 2 x12, 2 x11 + 3 x12], [x12 + 2 x22, 2 x12 + 3 x22]]
        let p = |t: &str| Polynomial::parse(t, s).unwrap();
        let a11 = p("x11 + 2*x12");
        let a12 = p("2*x11 + 3*x12");
        let a21 = p("x12 + 2*x22");
        let a22 = p("2*x12 + 3*x22");
        let expected = &(&(&a11 * &a11) + &(&a12 * &a21).scale(2.0)) + &(&a22 * &a22);
        assert_eq!(trace_square_form(&a, s).unwrap(), expected);

        // tr(X^2 A + X A X) = 2 tr(X^2 A); X^2 = [[x11^2 + x12^2, x11 x12 + x12 x22], [., x12^2 + x22^2]]
        let xx11 = p("x11^2 + x12^2");
        let xx12 = p("x11*x12 + x12*x22");
        let xx22 = p("x12^2 + x22^2");
        let tr = &(&xx11 + &xx12.scale(4.0)) + &xx22.scale(3.0);
        assert_eq!(trace_mixed_form(&a, s).unwrap(), tr.scale(2.0));
    }

    #[test]
    fn quadratic_form_n1() {
        let s = sp(1, 1);
        let a = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 2.0]);
        assert_eq!(
            quadratic_form(&a, s).unwrap(),
            Polynomial::parse("x11^2 - 2*x11*y1 + 2*y1^2", s).unwrap()
        );
        assert!(matches!(
            quadratic_form(&horn_matrix(), s),
            Err(CorpusError::MatrixShape { .. })
        ));
    }

    #[test]
    fn alpha_family() {
        let a = hoffman_pereira_alpha(0.1);
        assert!((a[(3, 3)] - 1.21).abs() < 1e-15);
        assert_eq!(a[(2, 2)], 1.0);
        assert_eq!(hoffman_pereira_alpha(0.0), hoffman_pereira_matrix());
        assert_eq!(hoffman_pereira_matrix(), hoffman_pereira_matrix().transpose());
        assert_eq!(horn_matrix(), horn_matrix().transpose());
    }

    #[test]
    fn matrix_files() {
        let a = parse_matrix("2\n1 2\n2 3\n").unwrap();
        assert_eq!(a, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 3.0]));
        assert!(parse_matrix("2\n1 2\n2\n").is_err());
        assert!(parse_matrix("").is_err());
        assert_eq!("trace-square".parse::<FormTag>().unwrap(), FormTag::TraceSquare);
    }

    #[test]
    fn suites_build() {
        for s in SUITES {
            for c in suite(s).unwrap() {
                let f = c.polynomial().unwrap();
                assert!(!f.is_zero(), "{}", c.name);
            }
        }
        let all = suite("all").unwrap();
        assert!(all.iter().all(|c| !c.slow));
        assert_eq!(suite("table4").unwrap().len(), 10);
        assert!(suite("nope").is_err());
    }
}
