//! Octonion arithmetic over `f64`.
//!
//! An [`Octonion`] is `x0 + x1 e1 + ... + x7 e7`. Products of the imaginary
//! units follow the table
//!
//! ```text
//!  .  | e1   e2   e3   e4   e5   e6   e7
//! ----+-----------------------------------
//!  e1 | -1   e4   e5  -e2  -e3  -e7   e6
//!  e2 | -e4  -1   e6   e1   e7  -e3  -e5
//!  e3 | -e5 -e6   -1  -e7   e1   e2   e4
//!  e4 | e2  -e1   e7   -1  -e6   e5  -e3
//!  e5 | e3  -e7  -e1   e6   -1  -e4   e2
//!  e6 | e7   e3  -e2  -e5   e4   -1  -e1
//!  e7 | -e6  e5  -e4   e3  -e2   e1   -1
//! ```
//!
//! with `e4 = e1 e2`, `e5 = e1 e3`, `e6 = e2 e3` and `e7 = (e1 e2) e3`.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

/// Signed basis index: `+k` means `e_k`, `-k` means `-e_k`, and `±8` stands
/// for `±1` (the real unit) so that the sign survives for index 0.
type SignedUnit = i8;

/// Products `e_i e_j` for `i, j` in `1..=7`, exactly as in the module table.
pub const UNIT_TABLE: [[SignedUnit; 7]; 7] = [
    [-8, 4, 5, -2, -3, -7, 6],
    [-4, -8, 6, 1, 7, -3, -5],
    [-5, -6, -8, -7, 1, 2, 4],
    [2, -1, 7, -8, -6, 5, -3],
    [3, -7, -1, 6, -8, -4, 2],
    [7, 3, -2, -5, 4, -8, -1],
    [-6, 5, -4, 3, -2, 1, -8],
];

/// Full 8x8 product table `(index, sign)` including the real unit.
pub const PRODUCT_TABLE: [[(usize, f64); 8]; 8] = build_product_table();

const fn build_product_table() -> [[(usize, f64); 8]; 8] {
    let mut t = [[(0usize, 1.0f64); 8]; 8];
    let mut i = 0;
    while i < 8 {
        let mut j = 0;
        while j < 8 {
            t[i][j] = if i == 0 {
                (j, 1.0)
            } else if j == 0 {
                (i, 1.0)
            } else {
                let s = UNIT_TABLE[i - 1][j - 1];
                let (mag, sign) = if s < 0 { (-s, -1.0) } else { (s, 1.0) };
                let idx = if mag == 8 { 0 } else { mag as usize };
                (idx, sign)
            };
            j += 1;
        }
        i += 1;
    }
    t
}

/// Problems found by [`verify_table`].
#[derive(Debug, Clone, PartialEq)]
pub enum TableDefect {
    NotMinusOne { unit: usize },
    NotAnticommuting { i: usize, j: usize },
    WrongGenerator { name: &'static str },
}

/// Checks the product table against the defining relations of the units.
///
/// Every `e_i^2` must be `-1`, distinct units must anticommute, and the
/// derived units must satisfy `e4 = e1 e2`, `e5 = e1 e3`, `e6 = e2 e3`,
/// `e7 = (e1 e2) e3`.
pub fn verify_table() -> Result<(), Vec<TableDefect>> {
    let mut defects = Vec::new();
    for i in 1..8 {
        if PRODUCT_TABLE[i][i] != (0, -1.0) {
            defects.push(TableDefect::NotMinusOne { unit: i });
        }
        for j in 1..8 {
            if i == j {
                continue;
            }
            let (a, sa) = PRODUCT_TABLE[i][j];
            let (b, sb) = PRODUCT_TABLE[j][i];
            if a != b || sa != -sb || a == 0 {
                defects.push(TableDefect::NotAnticommuting { i, j });
            }
        }
    }
    let e = Octonion::unit;
    let checks = [
        ("e4 = e1 e2", e(1) * e(2), e(4)),
        ("e5 = e1 e3", e(1) * e(3), e(5)),
        ("e6 = e2 e3", e(2) * e(3), e(6)),
        ("e7 = (e1 e2) e3", (e(1) * e(2)) * e(3), e(7)),
    ];
    for (name, got, want) in checks {
        if got != want {
            defects.push(TableDefect::WrongGenerator { name });
        }
    }
    if defects.is_empty() {
        Ok(())
    } else {
        Err(defects)
    }
}

/// Attempted to invert zero.
#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("zero has no inverse")]
pub struct ZeroInverse;

/// An octonion with real components `x0..x7`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Octonion(pub [f64; 8]);

impl Octonion {
    pub const ZERO: Octonion = Octonion([0.0; 8]);
    pub const ONE: Octonion = Octonion([1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);

    pub const fn new(components: [f64; 8]) -> Self {
        Octonion(components)
    }

    pub const fn real(x: f64) -> Self {
        Octonion([x, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0])
    }

    /// Basis element `e_i`; `unit(0)` is the real unit.
    ///
    /// Panics if `i > 7`.
    pub fn unit(i: usize) -> Self {
        let mut c = [0.0; 8];
        c[i] = 1.0;
        Octonion(c)
    }

    pub fn components(&self) -> [f64; 8] {
        self.0
    }

    /// Real part `x0`.
    pub fn re(&self) -> f64 {
        self.0[0]
    }

    /// Imaginary part `x1 e1 + ... + x7 e7`.
    pub fn im(&self) -> Octonion {
        let mut c = self.0;
        c[0] = 0.0;
        Octonion(c)
    }

    pub fn conjugate(&self) -> Octonion {
        let mut c = self.0;
        for x in &mut c[1..] {
            *x = -*x;
        }
        Octonion(c)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Euclidean scalar product `sum a_i b_i = Re(a conj(b))`.
    pub fn dot(&self, other: &Octonion) -> f64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn inverse(&self) -> Result<Octonion, ZeroInverse> {
        let n2 = self.norm_sqr();
        if n2 == 0.0 {
            return Err(ZeroInverse);
        }
        Ok(self.conjugate() / n2)
    }

    pub fn scale(&self, s: f64) -> Octonion {
        let mut c = self.0;
        for x in &mut c {
            *x *= s;
        }
        Octonion(c)
    }

    /// Largest absolute component.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

/// Octonion product `a b`.
#[inline]
pub fn multiply(a: &Octonion, b: &Octonion) -> Octonion {
    let mut out = [0.0; 8];
    for (i, &ai) in a.0.iter().enumerate() {
        if ai == 0.0 {
            continue;
        }
        let row = &PRODUCT_TABLE[i];
        for (j, &bj) in b.0.iter().enumerate() {
            let (k, s) = row[j];
            out[k] += s * ai * bj;
        }
    }
    Octonion(out)
}

/// `[a, b, c] = (a b) c - a (b c)`.
pub fn associator(a: &Octonion, b: &Octonion, c: &Octonion) -> Octonion {
    (*a * *b) * *c - *a * (*b * *c)
}

impl Mul for Octonion {
    type Output = Octonion;
    #[inline]
    fn mul(self, rhs: Octonion) -> Octonion {
        multiply(&self, &rhs)
    }
}

impl Mul<f64> for Octonion {
    type Output = Octonion;
    fn mul(self, rhs: f64) -> Octonion {
        self.scale(rhs)
    }
}

impl Mul<Octonion> for f64 {
    type Output = Octonion;
    fn mul(self, rhs: Octonion) -> Octonion {
        rhs.scale(self)
    }
}

impl Div<f64> for Octonion {
    type Output = Octonion;
    fn div(self, rhs: f64) -> Octonion {
        self.scale(1.0 / rhs)
    }
}

impl Add for Octonion {
    type Output = Octonion;
    #[inline]
    fn add(self, rhs: Octonion) -> Octonion {
        let mut c = self.0;
        for (x, y) in c.iter_mut().zip(rhs.0.iter()) {
            *x += y;
        }
        Octonion(c)
    }
}

impl AddAssign for Octonion {
    #[inline]
    fn add_assign(&mut self, rhs: Octonion) {
        for (x, y) in self.0.iter_mut().zip(rhs.0.iter()) {
            *x += y;
        }
    }
}

impl Sub for Octonion {
    type Output = Octonion;
    #[inline]
    fn sub(self, rhs: Octonion) -> Octonion {
        let mut c = self.0;
        for (x, y) in c.iter_mut().zip(rhs.0.iter()) {
            *x -= y;
        }
        Octonion(c)
    }
}

impl SubAssign for Octonion {
    fn sub_assign(&mut self, rhs: Octonion) {
        for (x, y) in self.0.iter_mut().zip(rhs.0.iter()) {
            *x -= y;
        }
    }
}

impl Neg for Octonion {
    type Output = Octonion;
    fn neg(self) -> Octonion {
        self.scale(-1.0)
    }
}

impl Index<usize> for Octonion {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for Octonion {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl From<f64> for Octonion {
    fn from(x: f64) -> Self {
        Octonion::real(x)
    }
}

impl From<[f64; 8]> for Octonion {
    fn from(c: [f64; 8]) -> Self {
        Octonion(c)
    }
}

impl std::iter::Sum for Octonion {
    fn sum<I: Iterator<Item = Octonion>>(iter: I) -> Octonion {
        iter.fold(Octonion::ZERO, |a, b| a + b)
    }
}

impl fmt::Display for Octonion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0[0])?;
        for i in 1..8 {
            let x = self.0[i];
            if x < 0.0 {
                write!(f, " - {}*e{}", -x, i)?;
            } else {
                write!(f, " + {}*e{}", x, i)?;
            }
        }
        Ok(())
    }
}

/// Failure to parse an octonion literal.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("cannot parse octonion {input:?}: {reason}")]
pub struct ParseOctonionError {
    pub input: String,
    pub reason: String,
}

impl std::str::FromStr for Octonion {
    type Err = ParseOctonionError;

    /// Accepts either eight comma-separated reals or a left-to-right sum of
    /// terms `k*e_i`, `k*ei`, `ei` or plain reals, e.g. `1+e1-0.5*e_7`.
    /// A coefficient needs the `*`: `2e1` is the real number 20.
    fn from_str(input: &str) -> Result<Self, Self::Err> {
        let err = |reason: &str| ParseOctonionError { input: input.to_string(), reason: reason.to_string() };
        let src: String = input.chars().filter(|c| !c.is_whitespace()).collect();
        if src.is_empty() {
            return Err(err("empty literal"));
        }
        if src.contains(',') {
            let parts: Vec<&str> = src.split(',').collect();
            if parts.len() != 8 {
                return Err(err("expected 8 comma-separated components"));
            }
            let mut c = [0.0; 8];
            for (x, p) in c.iter_mut().zip(parts) {
                *x = p.parse().map_err(|_| err(&format!("bad component {p:?}")))?;
            }
            return Ok(Octonion(c));
        }
        let mut scan = Scanner { s: src.as_bytes(), pos: 0 };
        let mut out = Octonion::ZERO;
        while scan.pos < scan.s.len() {
            let sign = match scan.peek() {
                Some(b'-') => {
                    scan.pos += 1;
                    -1.0
                }
                Some(b'+') => {
                    scan.pos += 1;
                    1.0
                }
                _ if scan.pos == 0 => 1.0,
                _ => return Err(err("expected '+' or '-' between terms")),
            };
            let (coeff, unit) = if matches!(scan.peek(), Some(b'e' | b'E')) {
                (1.0, scan.unit().ok_or_else(|| err("bad unit"))?)
            } else {
                let coeff = scan.number().ok_or_else(|| err("bad number"))?;
                if scan.peek() == Some(b'*') {
                    scan.pos += 1;
                    (coeff, scan.unit().ok_or_else(|| err("expected unit after '*'"))?)
                } else {
                    (coeff, 0)
                }
            };
            out[unit] += sign * coeff;
        }
        Ok(out)
    }
}

struct Scanner<'a> {
    s: &'a [u8],
    pos: usize,
}

impl Scanner<'_> {
    fn peek(&self) -> Option<u8> {
        self.s.get(self.pos).copied()
    }

    /// `e3`, `E3` or `e_3`.
    fn unit(&mut self) -> Option<usize> {
        if !matches!(self.peek(), Some(b'e' | b'E')) {
            return None;
        }
        self.pos += 1;
        if self.peek() == Some(b'_') {
            self.pos += 1;
        }
        let d = self.peek().filter(|c| (b'0'..=b'7').contains(c))?;
        self.pos += 1;
        Some((d - b'0') as usize)
    }

    /// Decimal number with optional exponent.
    fn number(&mut self) -> Option<f64> {
        let start = self.pos;
        while matches!(self.peek(), Some(b'0'..=b'9' | b'.')) {
            self.pos += 1;
        }
        if self.pos == start {
            return None;
        }
        if matches!(self.peek(), Some(b'e' | b'E')) {
            let mut look = self.pos + 1;
            if matches!(self.s.get(look), Some(b'+' | b'-')) {
                look += 1;
            }
            if matches!(self.s.get(look), Some(b'0'..=b'9')) {
                self.pos = look;
                while matches!(self.peek(), Some(b'0'..=b'9')) {
                    self.pos += 1;
                }
            }
        }
        std::str::from_utf8(&self.s[start..self.pos]).ok()?.parse().ok()
    }
}

/// Renders the signed unit `e_i e_j` (`i, j >= 1`) as text, e.g. `-e4` or `-1`.
pub fn unit_product_label(i: usize, j: usize) -> String {
    let (k, s) = PRODUCT_TABLE[i][j];
    let sign = if s < 0.0 { "-" } else { "" };
    if k == 0 {
        format!("{sign}1")
    } else {
        format!("{sign}e{k}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(i: usize) -> Octonion {
        Octonion::unit(i)
    }

    #[test]
    fn table_is_consistent() {
        assert_eq!(verify_table(), Ok(()));
    }

    #[test]
    fn generator_products() {
        assert_eq!(e(1) * e(2), e(4));
        assert_eq!((e(1) * e(2)) * e(3), e(7));
        assert_eq!(e(2) * e(3), e(6));
        assert_eq!(e(1) * e(6), -e(7));
    }

    #[test]
    fn conjugation_and_norm() {
        assert_eq!(e(1).conjugate(), -e(1));
        assert_eq!((Octonion::ONE + e(1)).conjugate(), Octonion::ONE - e(1));
        assert_eq!(e(3).norm(), 1.0);
        assert_eq!(e(1).dot(&e(2)), 0.0);
        let p = (Octonion::ONE + e(1)) * (Octonion::ONE + e(2));
        // (1 + e1)(1 + e2) = 1 + e1 + e2 + e4
        assert_eq!(p, Octonion::new([1.0, 1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0]));
        assert!((p.norm() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn inverses() {
        assert_eq!(e(1).inverse().unwrap(), -e(1));
        assert_eq!(Octonion::real(2.0).inverse().unwrap(), Octonion::real(0.5));
        let a = Octonion::ONE + e(1);
        assert_eq!(a.inverse().unwrap(), (Octonion::ONE - e(1)) * 0.5);
        assert_eq!(Octonion::ZERO.inverse(), Err(ZeroInverse));
        assert_eq!(ZeroInverse.to_string(), "zero has no inverse");
    }

    #[test]
    fn associator_of_generators() {
        assert_eq!(associator(&e(1), &e(2), &e(3)), e(7) * 2.0);
    }

    #[test]
    fn parse_literals() {
        let z: Octonion = "0,0,0,0,0,0,0,0".parse().unwrap();
        assert_eq!(z, Octonion::ZERO);
        let a: Octonion = "1+e1+e2+e3+e4+e5+e6+e7".parse().unwrap();
        assert_eq!(a, Octonion([1.0; 8]));
        let b: Octonion = "2*e1 - 0.5*e_7".parse().unwrap();
        assert_eq!(b, e(1) * 2.0 - e(7) * 0.5);
        let c: Octonion = "1e-3*e2".parse().unwrap();
        assert_eq!(c, e(2) * 1e-3);
        let d: Octonion = "0.1e1-e3".parse().unwrap(); // exponent, then unit
        assert_eq!(d, Octonion::real(1.0) - e(3));
        let neg: Octonion = "-e1".parse().unwrap();
        assert_eq!(neg, -e(1));
        assert_eq!("0".parse::<Octonion>().unwrap(), Octonion::ZERO);
        assert!("1,2,3".parse::<Octonion>().is_err());
        assert!("e9".parse::<Octonion>().is_err());
        assert!("foo".parse::<Octonion>().is_err());
    }

    #[test]
    fn label_rendering() {
        assert_eq!(unit_product_label(1, 2), "e4");
        assert_eq!(unit_product_label(2, 1), "-e4");
        assert_eq!(unit_product_label(5, 5), "-1");
    }
}
