//! Sparse multivariate polynomials over the matrix/orthant variable set.
//!
//! Variables are ordered `x11, x12, ..., x1n, x22, ..., xnn, y1, ..., ym`.
//! Terms are kept in a `BTreeMap` keyed by [`Monomial`], whose ordering is
//! graded lexicographic, so iteration order matches the moment basis order.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolyError {
    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown variable `{name}` at position {pos}")]
    UnknownVariable { name: String, pos: usize },
    #[error("variable `{name}` at position {pos} is out of range for n={n}, m={m}")]
    VariableOutOfRange {
        name: String,
        pos: usize,
        n: usize,
        m: usize,
    },
    #[error("polynomials live in different variable spaces")]
    SpaceMismatch,
    #[error("variable index {index} out of range (nvars = {nvars})")]
    IndexOutOfRange { index: usize, nvars: usize },
    #[error("point has length {got}, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("point contains a non-finite coordinate")]
    NonFinite,
    #[error("matrix dimension must be at least 1")]
    EmptySpace,
    #[error("matrix shapes {0}x{1} and {2}x{3} are incompatible")]
    ShapeMismatch(usize, usize, usize, usize),
}

/// The variable set `x_ij (1 <= i <= j <= n)` followed by `y_1..y_m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct VarSpace {
    n: usize,
    m: usize,
}

/// A decoded variable, zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    X(usize, usize),
    Y(usize),
}

impl VarSpace {
    pub fn new(n: usize, m: usize) -> Result<Self, PolyError> {
        if n == 0 {
            return Err(PolyError::EmptySpace);
        }
        Ok(Self { n, m })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// sigma(n) = n(n+1)/2, the number of matrix variables.
    pub fn sigma(&self) -> usize {
        self.n * (self.n + 1) / 2
    }

    pub fn nvars(&self) -> usize {
        self.sigma() + self.m
    }

    /// Index of `x_{ij}` (zero-based, either order).
    pub fn x_index(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        debug_assert!(j < self.n);
        i * self.n - i * i.saturating_sub(1) / 2 + (j - i)
    }

    pub fn y_index(&self, t: usize) -> usize {
        debug_assert!(t < self.m);
        self.sigma() + t
    }

    pub fn decode(&self, index: usize) -> Option<Var> {
        if index < self.sigma() {
            let mut start = 0;
            for i in 0..self.n {
                let len = self.n - i;
                if index < start + len {
                    return Some(Var::X(i, i + index - start));
                }
                start += len;
            }
            None
        } else if index < self.nvars() {
            Some(Var::Y(index - self.sigma()))
        } else {
            None
        }
    }

    /// Printable name: `x12`, `y3`; indices are separated by `_` once n >= 10.
    pub fn var_name(&self, index: usize) -> String {
        match self.decode(index) {
            Some(Var::X(i, j)) if self.n >= 10 => format!("x{}_{}", i + 1, j + 1),
            Some(Var::X(i, j)) => format!("x{}{}", i + 1, j + 1),
            Some(Var::Y(t)) => format!("y{}", t + 1),
            None => format!("v{index}"),
        }
    }
}

/// Exponent vector with graded lexicographic ordering: lower total degree
/// first, then larger exponents on earlier variables first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Monomial {
    exps: Vec<u32>,
}

impl Monomial {
    pub fn one(nvars: usize) -> Self {
        Self {
            exps: vec![0; nvars],
        }
    }

    pub fn from_exponents(exps: Vec<u32>) -> Self {
        Self { exps }
    }

    pub fn var(nvars: usize, index: usize) -> Self {
        let mut exps = vec![0; nvars];
        exps[index] = 1;
        Self { exps }
    }

    pub fn exponents(&self) -> &[u32] {
        &self.exps
    }

    pub fn degree(&self) -> u32 {
        self.exps.iter().sum()
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        Monomial {
            exps: self
                .exps
                .iter()
                .zip(&other.exps)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn eval(&self, point: &[f64]) -> f64 {
        self.exps
            .iter()
            .zip(point)
            .filter(|(e, _)| **e > 0)
            .map(|(&e, &u)| u.powi(e as i32))
            .product()
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| other.exps.cmp(&self.exps))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Result of [`Polynomial::homogeneous_degree`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Homogeneity {
    /// Every term has total degree `degree`. The zero polynomial reports
    /// `degree: 0, zero: true`.
    Homogeneous { degree: u32, zero: bool },
    NotHomogeneous,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    space: VarSpace,
    terms: BTreeMap<Monomial, f64>,
}

impl Polynomial {
    pub fn zero(space: VarSpace) -> Self {
        Self {
            space,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(space: VarSpace, c: f64) -> Self {
        let mut p = Self::zero(space);
        p.add_term(Monomial::one(space.nvars()), c);
        p
    }

    /// The single variable with the given index.
    pub fn var(space: VarSpace, index: usize) -> Self {
        let mut p = Self::zero(space);
        p.add_term(Monomial::var(space.nvars(), index), 1.0);
        p
    }

    pub fn x(space: VarSpace, i: usize, j: usize) -> Self {
        Self::var(space, space.x_index(i, j))
    }

    pub fn y(space: VarSpace, t: usize) -> Self {
        Self::var(space, space.y_index(t))
    }

    pub fn from_terms<I>(space: VarSpace, terms: I) -> Self
    where
        I: IntoIterator<Item = (Monomial, f64)>,
    {
        let mut p = Self::zero(space);
        for (mono, c) in terms {
            p.add_term(mono, c);
        }
        p
    }

    /// Accumulates `c * mono`, dropping the term if it cancels.
    pub fn add_term(&mut self, mono: Monomial, c: f64) {
        debug_assert_eq!(mono.exps.len(), self.space.nvars());
        if c == 0.0 {
            return;
        }
        let entry = self.terms.entry(mono);
        match entry {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let sum = *o.get() + c;
                if sum == 0.0 {
                    o.remove();
                } else {
                    *o.get_mut() = sum;
                }
            }
        }
    }

    pub fn space(&self) -> VarSpace {
        self.space
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Terms in graded lexicographic order.
    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&Monomial, f64)> + '_ {
        self.terms.iter().map(|(m, &c)| (m, c))
    }

    pub fn coefficient(&self, mono: &Monomial) -> f64 {
        self.terms.get(mono).copied().unwrap_or(0.0)
    }

    /// Total degree; `None` stands for the degree of the zero polynomial.
    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(Monomial::degree).max()
    }

    /// Total degree, with the zero polynomial mapped to 0.
    pub fn degree_or_zero(&self) -> u32 {
        self.degree().unwrap_or(0)
    }

    pub fn homogeneous_degree(&self) -> Homogeneity {
        let mut degrees = self.terms.keys().map(Monomial::degree);
        match degrees.next() {
            None => Homogeneity::Homogeneous {
                degree: 0,
                zero: true,
            },
            Some(d) => {
                if degrees.all(|e| e == d) {
                    Homogeneity::Homogeneous {
                        degree: d,
                        zero: false,
                    }
                } else {
                    Homogeneity::NotHomogeneous
                }
            }
        }
    }

    fn check_space(&self, other: &Polynomial) -> Result<(), PolyError> {
        if self.space != other.space {
            return Err(PolyError::SpaceMismatch);
        }
        Ok(())
    }

    pub fn checked_add(&self, other: &Polynomial) -> Result<Polynomial, PolyError> {
        self.check_space(other)?;
        let mut out = self.clone();
        for (m, &c) in &other.terms {
            out.add_term(m.clone(), c);
        }
        Ok(out)
    }

    pub fn checked_sub(&self, other: &Polynomial) -> Result<Polynomial, PolyError> {
        self.check_space(other)?;
        let mut out = self.clone();
        for (m, &c) in &other.terms {
            out.add_term(m.clone(), -c);
        }
        Ok(out)
    }

    pub fn checked_mul(&self, other: &Polynomial) -> Result<Polynomial, PolyError> {
        self.check_space(other)?;
        let mut out = Polynomial::zero(self.space);
        for (a, &ca) in &self.terms {
            for (b, &cb) in &other.terms {
                out.add_term(a.mul(b), ca * cb);
            }
        }
        Ok(out)
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        if s == 0.0 {
            return Polynomial::zero(self.space);
        }
        Polynomial {
            space: self.space,
            terms: self.terms.iter().map(|(m, &c)| (m.clone(), c * s)).collect(),
        }
    }

    /// Multiplies by a single monomial.
    pub fn mul_monomial(&self, mono: &Monomial) -> Polynomial {
        Polynomial {
            space: self.space,
            terms: self.terms.iter().map(|(m, &c)| (m.mul(mono), c)).collect(),
        }
    }

    pub fn differentiate(&self, var_index: usize) -> Result<Polynomial, PolyError> {
        let nvars = self.space.nvars();
        if var_index >= nvars {
            return Err(PolyError::IndexOutOfRange {
                index: var_index,
                nvars,
            });
        }
        let mut out = Polynomial::zero(self.space);
        for (m, &c) in &self.terms {
            let e = m.exps[var_index];
            if e > 0 {
                let mut exps = m.exps.clone();
                exps[var_index] -= 1;
                out.add_term(Monomial { exps }, c * e as f64);
            }
        }
        Ok(out)
    }

    pub fn evaluate(&self, point: &[f64]) -> Result<f64, PolyError> {
        let nvars = self.space.nvars();
        if point.len() != nvars {
            return Err(PolyError::LengthMismatch {
                expected: nvars,
                got: point.len(),
            });
        }
        if point.iter().any(|u| !u.is_finite()) {
            return Err(PolyError::NonFinite);
        }
        Ok(self.terms.iter().map(|(m, &c)| c * m.eval(point)).sum())
    }

    /// Largest absolute coefficient; zero for the zero polynomial.
    pub fn max_abs_coefficient(&self) -> f64 {
        self.terms.values().fold(0.0, |acc, c| acc.max(c.abs()))
    }

    pub fn parse(text: &str, space: VarSpace) -> Result<Polynomial, PolyError> {
        Parser::new(text, space).parse()
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;

    /// Panics if the operands live in different spaces.
    fn add(self, rhs: &Polynomial) -> Polynomial {
        self.checked_add(rhs).expect("polynomial space mismatch")
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;

    fn sub(self, rhs: &Polynomial) -> Polynomial {
        self.checked_sub(rhs).expect("polynomial space mismatch")
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;

    fn mul(self, rhs: &Polynomial) -> Polynomial {
        self.checked_mul(rhs).expect("polynomial space mismatch")
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;

    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (mono, &c)) in self.terms.iter().rev().enumerate() {
            let neg = c < 0.0;
            match (k, neg) {
                (0, true) => write!(f, "-")?,
                (0, false) => {}
                (_, true) => write!(f, " - ")?,
                (_, false) => write!(f, " + ")?,
            }
            let a = c.abs();
            let is_const = mono.degree() == 0;
            if is_const {
                write!(f, "{a}")?;
                continue;
            }
            if a != 1.0 {
                write!(f, "{a}*")?;
            }
            let mut first = true;
            for (idx, &e) in mono.exps.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                if !first {
                    write!(f, "*")?;
                }
                first = false;
                write!(f, "{}", self.space.var_name(idx))?;
                if e > 1 {
                    write!(f, "^{e}")?;
                }
            }
        }
        Ok(())
    }
}

/// Rectangular matrix of polynomials over one space, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Polynomial>,
}

impl PolyMatrix {
    pub fn from_fn<F>(space: VarSpace, rows: usize, cols: usize, mut f: F) -> Self
    where
        F: FnMut(usize, usize) -> Polynomial,
    {
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                let p = f(i, j);
                debug_assert_eq!(p.space(), space);
                entries.push(p);
            }
        }
        Self {
            rows,
            cols,
            entries,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &Polynomial {
        &self.entries[i * self.cols + j]
    }

    pub fn entries(&self) -> &[Polynomial] {
        &self.entries
    }

    pub fn is_symmetric(&self) -> bool {
        self.is_square()
            && (0..self.rows).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    /// Maximum entry degree (zero entries count as degree 0).
    pub fn max_degree(&self) -> u32 {
        self.entries
            .iter()
            .map(Polynomial::degree_or_zero)
            .max()
            .unwrap_or(0)
    }

    pub fn checked_mul(&self, other: &PolyMatrix) -> Result<PolyMatrix, PolyError> {
        if self.cols != other.rows {
            return Err(PolyError::ShapeMismatch(
                self.rows, self.cols, other.rows, other.cols,
            ));
        }
        let space = match self.entries.first() {
            Some(p) => p.space(),
            None => return Ok(PolyMatrix { rows: self.rows, cols: other.cols, entries: vec![] }),
        };
        let mut entries = Vec::with_capacity(self.rows * other.cols);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc = Polynomial::zero(space);
                for l in 0..self.cols {
                    let prod = self.get(i, l).checked_mul(other.get(l, j))?;
                    acc = acc.checked_add(&prod)?;
                }
                entries.push(acc);
            }
        }
        Ok(PolyMatrix {
            rows: self.rows,
            cols: other.cols,
            entries,
        })
    }

    /// Numeric evaluation, row-major.
    pub fn evaluate(&self, point: &[f64]) -> Result<nalgebra::DMatrix<f64>, PolyError> {
        let vals = self
            .entries
            .iter()
            .map(|p| p.evaluate(point))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(nalgebra::DMatrix::from_row_slice(self.rows, self.cols, &vals))
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    space: VarSpace,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str, space: VarSpace) -> Self {
        Self {
            src: text.as_bytes(),
            pos: 0,
            space,
        }
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, PolyError> {
        Err(PolyError::Syntax {
            pos: self.pos,
            msg: msg.into(),
        })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn parse(mut self) -> Result<Polynomial, PolyError> {
        let mut out = Polynomial::zero(self.space);
        let mut sign = match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                -1.0
            }
            Some(b'+') => {
                self.pos += 1;
                1.0
            }
            None => return self.err("empty input"),
            _ => 1.0,
        };
        loop {
            let (coef, mono) = self.term()?;
            out.add_term(mono, sign * coef);
            match self.peek() {
                None => break,
                Some(b'+') => {
                    self.pos += 1;
                    sign = 1.0;
                }
                Some(b'-') => {
                    self.pos += 1;
                    sign = -1.0;
                }
                Some(c) => return self.err(format!("unexpected character `{}`", c as char)),
            }
        }
        Ok(out)
    }

    fn term(&mut self) -> Result<(f64, Monomial), PolyError> {
        let nvars = self.space.nvars();
        let mut mono = Monomial::one(nvars);
        let coef = match self.peek() {
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                let c = self.number()?;
                if self.peek() == Some(b'*') {
                    self.pos += 1;
                    if !matches!(self.peek(), Some(b'x') | Some(b'y')) {
                        return self.err("expected variable after `*`");
                    }
                }
                c
            }
            Some(b'x') | Some(b'y') => 1.0,
            Some(c) => return self.err(format!("unexpected character `{}`", c as char)),
            None => return self.err("unexpected end of input"),
        };
        let mut any_var = false;
        loop {
            match self.peek() {
                Some(b'x') | Some(b'y') => {
                    let (idx, e) = self.factor()?;
                    mono.exps[idx] += e;
                    any_var = true;
                }
                Some(b'*') if any_var => {
                    self.pos += 1;
                    if !matches!(self.peek(), Some(b'x') | Some(b'y')) {
                        return self.err("expected variable after `*`");
                    }
                }
                _ => break,
            }
        }
        Ok((coef, mono))
    }

    fn number(&mut self) -> Result<f64, PolyError> {
        self.skip_ws();
        let start = self.pos;
        let s = self.src;
        while self.pos < s.len() && (s[self.pos].is_ascii_digit() || s[self.pos] == b'.') {
            self.pos += 1;
        }
        if self.pos < s.len() && (s[self.pos] == b'e' || s[self.pos] == b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < s.len() && (s[self.pos] == b'+' || s[self.pos] == b'-') {
                self.pos += 1;
            }
            if self.pos < s.len() && s[self.pos].is_ascii_digit() {
                while self.pos < s.len() && s[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            } else {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&s[start..self.pos]).unwrap_or("");
        text.parse::<f64>().or_else(|_| {
            self.pos = start;
            self.err(format!("malformed number `{text}`"))
        })
    }

    fn digits(&mut self) -> Option<(usize, usize)> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == start {
            return None;
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .ok()
            .and_then(|t| t.parse().ok())
            .map(|v| (v, self.pos - start))
    }

    fn factor(&mut self) -> Result<(usize, u32), PolyError> {
        self.skip_ws();
        let start = self.pos;
        let kind = self.src[self.pos];
        self.pos += 1;
        let index = if kind == b'x' {
            let digit_start = self.pos;
            let Some((first, len)) = self.digits() else {
                return self.unknown(start);
            };
            let (i, j) = if self.pos < self.src.len() && self.src[self.pos] == b'_' {
                self.pos += 1;
                match self.digits() {
                    Some((second, _)) => (first, second),
                    None => return self.unknown(start),
                }
            } else if len == 2 {
                let t = &self.src[digit_start..self.pos];
                ((t[0] - b'0') as usize, (t[1] - b'0') as usize)
            } else {
                return self.unknown(start);
            };
            let n = self.space.n();
            if i == 0 || j == 0 || i > j {
                return self.unknown(start);
            }
            if j > n {
                return self.out_of_range(start);
            }
            self.space.x_index(i - 1, j - 1)
        } else {
            let Some((t, _)) = self.digits() else {
                return self.unknown(start);
            };
            if t == 0 {
                return self.unknown(start);
            }
            if t > self.space.m() {
                return self.out_of_range(start);
            }
            self.space.y_index(t - 1)
        };
        let mut exp = 1u32;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            self.skip_ws();
            match self.digits() {
                Some((e, _)) => exp = e as u32,
                None => return self.err("expected integer exponent after `^`"),
            }
        }
        Ok((index, exp))
    }

    fn name_at(&self, start: usize) -> String {
        let mut end = start + 1;
        while end < self.src.len() && (self.src[end].is_ascii_digit() || self.src[end] == b'_') {
            end += 1;
        }
        String::from_utf8_lossy(&self.src[start..end]).into_owned()
    }

    fn unknown<T>(&self, start: usize) -> Result<T, PolyError> {
        Err(PolyError::UnknownVariable {
            name: self.name_at(start),
            pos: start,
        })
    }

    fn out_of_range<T>(&self, start: usize) -> Result<T, PolyError> {
        Err(PolyError::VariableOutOfRange {
            name: self.name_at(start),
            pos: start,
            n: self.space.n(),
            m: self.space.m(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s2() -> VarSpace {
        VarSpace::new(2, 0).unwrap()
    }

    const F1: &str = "x11^2*x12 + x11*x12^2 + x22^3 - 3*x11*x12*x22";

    #[test]
    fn variable_indexing_is_a_bijection() {
        let sp = VarSpace::new(4, 2).unwrap();
        let mut seen = vec![false; sp.nvars()];
        for i in 0..4 {
            for j in i..4 {
                let idx = sp.x_index(i, j);
                assert_eq!(sp.decode(idx), Some(Var::X(i, j)));
                assert_eq!(sp.x_index(j, i), idx);
                seen[idx] = true;
            }
        }
        for t in 0..2 {
            let idx = sp.y_index(t);
            assert_eq!(sp.decode(idx), Some(Var::Y(t)));
            seen[idx] = true;
        }
        assert!(seen.iter().all(|&b| b));
        assert_eq!(sp.var_name(1), "x12");
        assert_eq!(sp.var_name(4), "x22");
        assert_eq!(sp.var_name(10), "y1");
    }

    #[test]
    fn parse_example_cubic() {
        let p = Polynomial::parse(F1, s2()).unwrap();
        assert_eq!(p.len(), 4);
        let mut m = Monomial::one(3);
        m.exps = vec![1, 1, 1];
        assert_eq!(p.coefficient(&m), -3.0);
        assert_eq!(p.homogeneous_degree(), Homogeneity::Homogeneous { degree: 3, zero: false });
    }

    #[test]
    fn parse_zero_and_cancellation() {
        assert!(Polynomial::parse("0", s2()).unwrap().is_zero());
        assert!(Polynomial::parse("x11 - x11", s2()).unwrap().is_zero());
        assert!(Polynomial::parse("  - 2 x12 + 2*x12 ", s2()).unwrap().is_zero());
    }

    #[test]
    fn parse_variants() {
        let p = Polynomial::parse("2x11x22 - x12^2", s2()).unwrap();
        let q = Polynomial::parse("2*x11*x22 - 1*x12*x12", s2()).unwrap();
        assert_eq!(p, q);
        let sp = VarSpace::new(2, 2).unwrap();
        let r = Polynomial::parse("1.5e-1*y2^2 + .5", sp).unwrap();
        assert_eq!(r.evaluate(&[0.0, 0.0, 0.0, 0.0, 2.0]).unwrap(), 0.15 * 4.0 + 0.5);
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(
            Polynomial::parse("x11 + x13", s2()),
            Err(PolyError::VariableOutOfRange { pos: 6, .. })
        ));
        assert!(matches!(
            Polynomial::parse("x11 + z", s2()),
            Err(PolyError::Syntax { pos: 6, .. })
        ));
        assert!(matches!(
            Polynomial::parse("x21", s2()),
            Err(PolyError::UnknownVariable { .. })
        ));
        assert!(matches!(
            Polynomial::parse("y1", s2()),
            Err(PolyError::VariableOutOfRange { .. })
        ));
        assert!(matches!(Polynomial::parse("x11 +", s2()), Err(PolyError::Syntax { .. })));
        assert!(matches!(Polynomial::parse("x11^", s2()), Err(PolyError::Syntax { .. })));
        assert!(matches!(Polynomial::parse("", s2()), Err(PolyError::Syntax { .. })));
    }

    #[test]
    fn print_parse_fixed_point() {
        let p = Polynomial::parse(F1, s2()).unwrap();
        let text = p.to_string();
        assert_eq!(text, "x22^3 - 3*x11*x12*x22 + x11*x12^2 + x11^2*x12");
        let q = Polynomial::parse(&text, s2()).unwrap();
        assert_eq!(p, q);
        assert_eq!(q.to_string(), text);
        let big = VarSpace::new(11, 0).unwrap();
        let r = Polynomial::x(big, 0, 10).scale(-0.25);
        assert_eq!(r.to_string(), "-0.25*x1_11");
        assert_eq!(Polynomial::parse(&r.to_string(), big).unwrap(), r);
    }

    #[test]
    fn add_examples() {
        let sp = s2();
        let x11 = Polynomial::x(sp, 0, 0);
        let x22 = Polynomial::x(sp, 1, 1);
        assert!((&x11 + &(-&x11)).is_zero());
        let f1 = Polynomial::parse(F1, sp).unwrap();
        assert_eq!(&f1 + &Polynomial::zero(sp), f1);
        let sum = &(&x11 + &x22) + &(&x11 - &x22);
        assert_eq!(sum, x11.scale(2.0));
        let other = VarSpace::new(3, 0).unwrap();
        assert_eq!(
            x11.checked_add(&Polynomial::x(other, 0, 0)),
            Err(PolyError::SpaceMismatch)
        );
    }

    #[test]
    fn multiply_examples() {
        let sp = s2();
        let x11 = Polynomial::x(sp, 0, 0);
        let x12 = Polynomial::x(sp, 0, 1);
        let p = &x11 * &x12;
        assert_eq!(p.degree(), Some(2));
        assert_eq!(&p * &Polynomial::constant(sp, 1.0), p);
        let diff = &(&x11 + &x12) * &(&x11 - &x12);
        assert_eq!(diff, Polynomial::parse("x11^2 - x12^2", sp).unwrap());
    }

    #[test]
    fn differentiate_examples() {
        let sp = s2();
        let p = Polynomial::parse("x11^2*x12", sp).unwrap();
        assert_eq!(p.differentiate(0).unwrap(), Polynomial::parse("2*x11*x12", sp).unwrap());
        let q = Polynomial::parse("x22^3", sp).unwrap();
        assert!(q.differentiate(0).unwrap().is_zero());
        assert!(matches!(
            q.differentiate(3),
            Err(PolyError::IndexOutOfRange { index: 3, nvars: 3 })
        ));
    }

    #[test]
    fn evaluate_examples() {
        let sp = s2();
        let f2 = Polynomial::parse(
            "x11^3 + x12^3 + x22^3 - x11^2*x12 - x11*x12^2 - x11^2*x22 - x11*x22^2 \
             - x12^2*x22 - x12*x22^2 + 3*x11*x12*x22",
            sp,
        )
        .unwrap();
        assert!((f2.evaluate(&[0.5, -0.5, 0.5]).unwrap() + 0.5).abs() < 1e-12);
        let f1 = Polynomial::parse(F1, sp).unwrap();
        assert_eq!(f1.evaluate(&[0.0; 3]).unwrap(), 0.0);
        assert!((f1.evaluate(&[0.9570, -0.2029, 0.0430]).unwrap() + 0.1213).abs() < 5e-4);
        assert!(matches!(
            f1.evaluate(&[1.0, 2.0]),
            Err(PolyError::LengthMismatch { expected: 3, got: 2 })
        ));
        assert_eq!(f1.evaluate(&[f64::NAN, 0.0, 0.0]), Err(PolyError::NonFinite));
    }

    #[test]
    fn homogeneity_examples() {
        let sp = s2();
        assert_eq!(
            Polynomial::parse("x11 + x11^2", sp).unwrap().homogeneous_degree(),
            Homogeneity::NotHomogeneous
        );
        assert_eq!(
            Polynomial::zero(sp).homogeneous_degree(),
            Homogeneity::Homogeneous { degree: 0, zero: true }
        );
        assert_eq!(Polynomial::zero(sp).degree(), None);
    }

    #[test]
    fn graded_lex_order() {
        let sp = VarSpace::new(1, 1).unwrap();
        let p = Polynomial::parse("y1^2 + x11*y1 + x11^2 + y1 + x11 + 1", sp).unwrap();
        let order: Vec<Vec<u32>> = p.terms().map(|(m, _)| m.exponents().to_vec()).collect();
        assert_eq!(
            order,
            vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]]
        );
    }

    #[test]
    fn polymatrix_product_and_symmetry() {
        let sp = s2();
        let x = PolyMatrix::from_fn(sp, 2, 2, |i, j| Polynomial::x(sp, i, j));
        assert!(x.is_symmetric());
        let xx = x.checked_mul(&x).unwrap();
        assert_eq!(*xx.get(0, 1), Polynomial::parse("x11*x12 + x12*x22", sp).unwrap());
        let col = PolyMatrix::from_fn(sp, 2, 1, |i, _| Polynomial::x(sp, i, i));
        assert!(matches!(col.checked_mul(&x), Err(PolyError::ShapeMismatch(2, 1, 2, 2))));
    }
}
