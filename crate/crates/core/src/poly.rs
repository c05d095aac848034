//! Dense bivariate polynomials in `x` and `y`.
//!
//! Every coefficient field of the supported systems, every multiplier and
//! every closed-form test function is a polynomial, so exact derivatives and
//! exact products are available without any discretization.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::operators::Point;

/// Polynomial `sum c[i][j] x^i y^j`.
///
/// The coefficient table is kept trimmed: no trailing zero rows or columns,
/// so structural equality coincides with polynomial equality.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<Term>", into = "Vec<Term>")]
pub struct Poly2 {
    coeffs: Vec<Vec<f64>>,
}

/// One monomial `coeff * x^px * y^py`, used for (de)serialization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term(pub u32, pub u32, pub f64);

impl Poly2 {
    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        Self::monomial(c, 0, 0)
    }

    pub fn x() -> Self {
        Self::monomial(1.0, 1, 0)
    }

    pub fn y() -> Self {
        Self::monomial(1.0, 0, 1)
    }

    pub fn monomial(c: f64, px: usize, py: usize) -> Self {
        let mut coeffs = vec![Vec::new(); px + 1];
        coeffs[px] = vec![0.0; py + 1];
        coeffs[px][py] = c;
        Self::from_table(coeffs)
    }

    /// Builds from a list of `(px, py, coeff)` terms; repeated powers add up.
    pub fn from_terms<I>(terms: I) -> Self
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut table: Vec<Vec<f64>> = Vec::new();
        for (px, py, c) in terms {
            if table.len() <= px {
                table.resize(px + 1, Vec::new());
            }
            if table[px].len() <= py {
                table[px].resize(py + 1, 0.0);
            }
            table[px][py] += c;
        }
        Self::from_table(table)
    }

    fn from_table(mut coeffs: Vec<Vec<f64>>) -> Self {
        for row in coeffs.iter_mut() {
            while row.last() == Some(&0.0) {
                row.pop();
            }
        }
        while coeffs.last().is_some_and(|r| r.is_empty()) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Coefficient of `x^px y^py`.
    pub fn coeff(&self, px: usize, py: usize) -> f64 {
        self.coeffs.get(px).and_then(|row| row.get(py)).copied().unwrap_or(0.0)
    }

    /// Nonzero terms in lexicographic power order.
    pub fn terms(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.coeffs.iter().enumerate().flat_map(|(i, row)| {
            row.iter()
                .enumerate()
                .filter(|(_, c)| **c != 0.0)
                .map(move |(j, c)| (i, j, *c))
        })
    }

    /// Total degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.terms().map(|(i, j, _)| i + j).max()
    }

    pub fn eval(&self, p: Point) -> f64 {
        let mut acc = 0.0;
        for row in self.coeffs.iter().rev() {
            let mut inner = 0.0;
            for c in row.iter().rev() {
                inner = inner * p.y + c;
            }
            acc = acc * p.x + inner;
        }
        acc
    }

    pub fn dx(&self) -> Self {
        let table = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, row)| row.iter().map(|c| c * i as f64).collect())
            .collect();
        Self::from_table(table)
    }

    pub fn dy(&self) -> Self {
        let table = self
            .coeffs
            .iter()
            .map(|row| row.iter().enumerate().skip(1).map(|(j, c)| c * j as f64).collect())
            .collect();
        Self::from_table(table)
    }

    pub fn scale(&self, s: f64) -> Self {
        if s == 0.0 {
            return Self::zero();
        }
        Self::from_table(
            self.coeffs
                .iter()
                .map(|row| row.iter().map(|c| c * s).collect())
                .collect(),
        )
    }

    /// Largest coefficient magnitude.
    pub fn max_abs_coeff(&self) -> f64 {
        self.terms().fold(0.0, |m, (_, _, c)| m.max(c.abs()))
    }

    /// Coefficient-wise comparison within an absolute tolerance.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        (self - other).max_abs_coeff() <= tol
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        let rows = self.coeffs.len().max(other.coeffs.len());
        let table = (0..rows)
            .map(|i| {
                let a = self.coeffs.get(i).map(Vec::as_slice).unwrap_or(&[]);
                let b = other.coeffs.get(i).map(Vec::as_slice).unwrap_or(&[]);
                (0..a.len().max(b.len()))
                    .map(|j| f(a.get(j).copied().unwrap_or(0.0), b.get(j).copied().unwrap_or(0.0)))
                    .collect()
            })
            .collect();
        Self::from_table(table)
    }
}

impl Add for &Poly2 {
    type Output = Poly2;
    fn add(self, rhs: &Poly2) -> Poly2 {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &Poly2 {
    type Output = Poly2;
    fn sub(self, rhs: &Poly2) -> Poly2 {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Mul for &Poly2 {
    type Output = Poly2;
    fn mul(self, rhs: &Poly2) -> Poly2 {
        if self.is_zero() || rhs.is_zero() {
            return Poly2::zero();
        }
        let rows = self.coeffs.len() + rhs.coeffs.len() - 1;
        let mut table = vec![Vec::<f64>::new(); rows];
        for (i, a_row) in self.coeffs.iter().enumerate() {
            for (k, b_row) in rhs.coeffs.iter().enumerate() {
                if a_row.is_empty() || b_row.is_empty() {
                    continue;
                }
                let row = &mut table[i + k];
                let need = a_row.len() + b_row.len() - 1;
                if row.len() < need {
                    row.resize(need, 0.0);
                }
                for (j, a) in a_row.iter().enumerate() {
                    if *a == 0.0 {
                        continue;
                    }
                    for (l, b) in b_row.iter().enumerate() {
                        row[j + l] += a * b;
                    }
                }
            }
        }
        Poly2::from_table(table)
    }
}

impl Neg for &Poly2 {
    type Output = Poly2;
    fn neg(self) -> Poly2 {
        self.scale(-1.0)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for Poly2 {
            type Output = Poly2;
            fn $m(self, rhs: Poly2) -> Poly2 {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&Poly2> for Poly2 {
            type Output = Poly2;
            fn $m(self, rhs: &Poly2) -> Poly2 {
                (&self).$m(rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Neg for Poly2 {
    type Output = Poly2;
    fn neg(self) -> Poly2 {
        self.scale(-1.0)
    }
}

impl From<Vec<Term>> for Poly2 {
    fn from(terms: Vec<Term>) -> Self {
        Poly2::from_terms(terms.into_iter().map(|Term(i, j, c)| (i as usize, j as usize, c)))
    }
}

impl From<Poly2> for Vec<Term> {
    fn from(p: Poly2) -> Self {
        p.terms().map(|(i, j, c)| Term(i as u32, j as u32, c)).collect()
    }
}

impl fmt::Display for Poly2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (i, j, c) in self.terms() {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{c}")?;
            match i {
                0 => {}
                1 => write!(f, "*x")?,
                _ => write!(f, "*x^{i}")?,
            }
            match j {
                0 => {}
                1 => write!(f, "*y")?,
                _ => write!(f, "*y^{j}")?,
            }
        }
        Ok(())
    }
}

/// A pair of polynomials, i.e. a closed-form 1-form `u1 dx + u2 dy`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PolyField {
    pub u1: Poly2,
    pub u2: Poly2,
}

impl PolyField {
    pub fn new(u1: Poly2, u2: Poly2) -> Self {
        Self { u1, u2 }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn is_zero(&self) -> bool {
        self.u1.is_zero() && self.u2.is_zero()
    }

    pub fn eval(&self, p: Point) -> [f64; 2] {
        [self.u1.eval(p), self.u2.eval(p)]
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.u1.scale(s), self.u2.scale(s))
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::new(&self.u1 + &other.u1, &self.u2 + &other.u2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64) -> Point {
        Point::new(x, y)
    }

    #[test]
    fn eval_matches_expanded_form() {
        // 1 - x^2 + 3 x y^2
        let q = Poly2::from_terms([(0, 0, 1.0), (2, 0, -1.0), (1, 2, 3.0)]);
        let at = p(0.3, -0.7);
        let expect = 1.0 - 0.09 + 3.0 * 0.3 * 0.49;
        assert!((q.eval(at) - expect).abs() < 1e-15);
    }

    #[test]
    fn derivatives() {
        let q = Poly2::from_terms([(3, 1, 2.0), (0, 2, -1.0), (1, 0, 5.0)]);
        let qx = Poly2::from_terms([(2, 1, 6.0), (0, 0, 5.0)]);
        let qy = Poly2::from_terms([(3, 0, 2.0), (0, 1, -2.0)]);
        assert_eq!(q.dx(), qx);
        assert_eq!(q.dy(), qy);
        assert!(Poly2::constant(4.0).dx().is_zero());
    }

    #[test]
    fn product_and_trim() {
        let a = &Poly2::constant(1.0) - &(&Poly2::x() * &Poly2::x());
        let b = &Poly2::constant(1.0) + &Poly2::x();
        let prod = &a * &b;
        // (1 - x^2)(1 + x) = 1 + x - x^2 - x^3
        let expect = Poly2::from_terms([(0, 0, 1.0), (1, 0, 1.0), (2, 0, -1.0), (3, 0, -1.0)]);
        assert_eq!(prod, expect);
        assert!((&a - &a).is_zero());
        assert_eq!((&a - &a).degree(), None);
        assert_eq!(prod.degree(), Some(3));
    }

    #[test]
    fn serde_round_trip_uses_terms() {
        let q = Poly2::from_terms([(2, 0, 1.5), (0, 1, -2.0)]);
        let s = serde_json::to_string(&q).unwrap();
        assert_eq!(s, "[[0,1,-2.0],[2,0,1.5]]");
        let back: Poly2 = serde_json::from_str(&s).unwrap();
        assert_eq!(back, q);
    }
}
