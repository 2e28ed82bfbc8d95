//! Dense exact linear algebra over [`Rational`].
//!
//! All elimination routines pick the first nonzero entry of a column as the
//! pivot, so results (including which rows end up in a basis) are
//! reproducible.

use std::fmt;
use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::Rational;

/// A dense vector of rationals.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RVector(pub Vec<Rational>);

impl RVector {
    pub fn zeros(len: usize) -> Self {
        RVector(vec![Rational::zero(); len])
    }

    pub fn ones(len: usize) -> Self {
        RVector(vec![Rational::one(); len])
    }

    /// Standard basis vector `e_index` of the given length.
    pub fn unit(len: usize, index: usize) -> Self {
        let mut v = Self::zeros(len);
        v.0[index] = Rational::one();
        v
    }

    pub fn dot(&self, other: &RVector) -> Rational {
        assert_eq!(self.len(), other.len(), "dot product of mismatched vectors");
        self.iter().zip(other.iter()).map(|(a, b)| a * b).sum()
    }
}

impl Deref for RVector {
    type Target = Vec<Rational>;
    fn deref(&self) -> &Vec<Rational> {
        &self.0
    }
}

impl DerefMut for RVector {
    fn deref_mut(&mut self) -> &mut Vec<Rational> {
        &mut self.0
    }
}

impl From<Vec<Rational>> for RVector {
    fn from(v: Vec<Rational>) -> Self {
        RVector(v)
    }
}

impl FromIterator<Rational> for RVector {
    fn from_iter<I: IntoIterator<Item = Rational>>(iter: I) -> Self {
        RVector(iter.into_iter().collect())
    }
}

/// A dense row-major matrix of rationals.
///
/// The derived ordering compares shape first and then the entries in
/// row-major order, which is the lexicographic order used for canonical forms.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Rational>,
}

impl RMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<Rational>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: entries.len(),
            });
        }
        Ok(RMatrix { rows, cols, entries })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        RMatrix {
            rows,
            cols,
            entries: vec![Rational::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Rational::one());
        }
        m
    }

    /// Builds a matrix from nested rows; every row must have the same length.
    pub fn from_rows(rows: Vec<Vec<Rational>>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let n_rows = rows.len();
        let mut entries = Vec::with_capacity(n_rows * cols);
        for row in rows {
            if row.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    found: row.len(),
                });
            }
            entries.extend(row);
        }
        Ok(RMatrix {
            rows: n_rows,
            cols,
            entries,
        })
    }

    /// Convenience constructor from integers scaled by `1 / denominator`.
    pub fn from_scaled_ints(rows: &[&[i64]], denominator: i64) -> Result<Self> {
        let scale = Rational::new(1, denominator);
        Self::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|&x| Rational::from_integer(x) * &scale).collect())
                .collect(),
        )
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

    pub fn entries(&self) -> &[Rational] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> &Rational {
        &self.entries[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: Rational) {
        self.entries[i * self.cols + j] = value;
    }

    pub fn row(&self, i: usize) -> &[Rational] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> RVector {
        (0..self.rows).map(|i| self.get(i, j).clone()).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<Rational>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j).clone());
            }
        }
        t
    }

    pub fn mul_vec(&self, x: &RVector) -> RVector {
        assert_eq!(x.len(), self.cols, "matrix-vector dimension mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x.iter()).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn scale(&self, factor: &Rational) -> Self {
        self.map(|x| x * factor)
    }

    pub fn map(&self, f: impl Fn(&Rational) -> Rational) -> Self {
        RMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(f).collect(),
        }
    }

    /// Entrywise `(1 - w) * self + w * other`.
    pub fn lerp(&self, other: &RMatrix, weight: &Rational) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let keep = Rational::one() - weight;
        RMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a * &keep + b * weight)
                .collect(),
        }
    }

    /// `self * diag(d)`: scales column `j` by `d[j]`.
    pub fn mul_diag(&self, d: &RVector) -> Self {
        assert_eq!(d.len(), self.cols);
        let mut out = self.clone();
        for i in 0..self.rows {
            for j in 0..self.cols {
                let v = self.get(i, j) * &d[j];
                out.set(i, j, v);
            }
        }
        out
    }

    /// Entrywise (Frobenius / trace-form) inner product `trace(selfᵀ other)`.
    pub fn frobenius_dot(&self, other: &RMatrix) -> Rational {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.entries.iter().zip(&other.entries).map(|(a, b)| a * b).sum()
    }

    /// Returns the matrix whose `(i, j)` entry is `self[row_perm[i]][col_perm[j]]`.
    pub fn permuted(&self, row_perm: &[usize], col_perm: &[usize]) -> Self {
        assert_eq!(row_perm.len(), self.rows);
        assert_eq!(col_perm.len(), self.cols);
        let mut entries = Vec::with_capacity(self.entries.len());
        for &r in row_perm {
            for &c in col_perm {
                entries.push(self.get(r, c).clone());
            }
        }
        RMatrix {
            rows: self.rows,
            cols: self.cols,
            entries,
        }
    }
}

/// Serializes as an array of rows of `"p/q"` strings.
impl Serialize for RMatrix {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeSeq;
        let mut seq = serializer.serialize_seq(Some(self.rows))?;
        for i in 0..self.rows {
            seq.serialize_element(self.row(i))?;
        }
        seq.end()
    }
}

impl fmt::Display for RMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for i in 0..self.rows {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "[")?;
            for (j, x) in self.row(i).iter().enumerate() {
                if j > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{x}")?;
            }
            write!(f, "]")?;
        }
        write!(f, "]")
    }
}

/// Outcome of [`solve_linear`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Solution {
    Unique(RVector),
    Inconsistent,
    Underdetermined,
}

/// An incrementally built set of linearly independent rows kept in echelon
/// form. Rows may carry an augmented right-hand side, which is transformed
/// alongside the coefficients but never used for pivoting.
///
/// Insertion order matters: the stored row `k` is zero at the pivot columns of
/// rows `0..k`, which lets [`EchelonBasis::pop`] undo the last insertion
/// exactly. The vertex oracle relies on this for depth-first search.
#[derive(Clone, Debug)]
pub struct EchelonBasis {
    width: usize,
    rows: Vec<(usize, Vec<Rational>, Rational)>,
}

impl EchelonBasis {
    pub fn new(width: usize) -> Self {
        EchelonBasis {
            width,
            rows: Vec::with_capacity(width),
        }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Number of further independent rows needed to reach full rank.
    pub fn width_remaining(&self) -> usize {
        self.width - self.rows.len()
    }

    pub fn is_full(&self) -> bool {
        self.rows.len() == self.width
    }

    /// Reduces `row` against the basis and appends it if it is independent.
    pub fn try_insert(&mut self, row: &[Rational]) -> bool {
        self.try_insert_augmented(row, Rational::zero())
    }

    pub fn try_insert_augmented(&mut self, row: &[Rational], rhs: Rational) -> bool {
        assert_eq!(row.len(), self.width, "row width mismatch");
        let mut v = row.to_vec();
        let mut rhs = rhs;
        for (pivot, basis_row, basis_rhs) in &self.rows {
            let factor = v[*pivot].clone();
            if factor.is_zero() {
                continue;
            }
            for (x, b) in v.iter_mut().zip(basis_row) {
                if !b.is_zero() {
                    *x -= &factor * b;
                }
            }
            rhs -= &factor * basis_rhs;
        }
        match v.iter().position(|x| !x.is_zero()) {
            Some(pivot) => {
                let inv = v[pivot].recip();
                for x in v.iter_mut() {
                    if !x.is_zero() {
                        *x *= &inv;
                    }
                }
                rhs *= &inv;
                self.rows.push((pivot, v, rhs));
                true
            }
            None => false,
        }
    }

    /// Removes the most recently inserted row.
    pub fn pop(&mut self) {
        self.rows.pop();
    }

    /// Solves the square system when the basis is full.
    ///
    /// Row `k` can only be nonzero at its own pivot and at pivots of rows
    /// inserted after it, so back-substitution runs in reverse insertion order.
    pub fn solve_full(&self) -> Option<RVector> {
        if !self.is_full() {
            return None;
        }
        let mut x = RVector::zeros(self.width);
        for (pivot, row, rhs) in self.rows.iter().rev() {
            let mut value = rhs.clone();
            for (c, coeff) in row.iter().enumerate() {
                if c != *pivot && !coeff.is_zero() {
                    value -= coeff * &x[c];
                }
            }
            x[*pivot] = value;
        }
        Some(x)
    }
}

/// Reduces `m` (with an optional augmented last column excluded from
/// pivoting) to reduced row echelon form in place, returning the pivot
/// columns in row order.
fn rref(m: &mut [Vec<Rational>], pivot_cols: usize) -> Vec<usize> {
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..pivot_cols {
        if r == m.len() {
            break;
        }
        let Some(p) = (r..m.len()).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let inv = m[r][c].recip();
        for x in m[r].iter_mut() {
            if !x.is_zero() {
                *x *= &inv;
            }
        }
        let (head, tail) = m.split_at_mut(r);
        let (pivot_row, rest) = tail.split_first_mut().unwrap();
        for other in head.iter_mut().chain(rest.iter_mut()) {
            let factor = other[c].clone();
            if factor.is_zero() {
                continue;
            }
            for (x, p) in other.iter_mut().zip(pivot_row.iter()) {
                if !p.is_zero() {
                    *x -= &factor * p;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

/// Exact rank of `m`.
pub fn mat_rank(m: &RMatrix) -> usize {
    let mut rows = m.to_rows();
    rref(&mut rows, m.cols()).len()
}

/// Rank of the matrix whose rows are `rows`. All rows must share a length.
pub fn rank_of_rows(rows: &[RVector]) -> usize {
    let Some(first) = rows.first() else {
        return 0;
    };
    let mut basis = EchelonBasis::new(first.len());
    for row in rows {
        basis.try_insert(row);
        if basis.is_full() {
            break;
        }
    }
    basis.rank()
}

/// Solves `m · x = b` exactly.
pub fn solve_linear(m: &RMatrix, b: &RVector) -> Result<Solution> {
    if m.rows() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: m.rows(),
            found: b.len(),
        });
    }
    let cols = m.cols();
    let mut aug: Vec<Vec<Rational>> = (0..m.rows())
        .map(|i| {
            let mut row = m.row(i).to_vec();
            row.push(b[i].clone());
            row
        })
        .collect();
    let pivots = rref(&mut aug, cols);
    let rank = pivots.len();
    if aug[rank..].iter().any(|row| !row[cols].is_zero()) {
        return Ok(Solution::Inconsistent);
    }
    if rank < cols {
        return Ok(Solution::Underdetermined);
    }
    let mut x = RVector::zeros(cols);
    for (row, &c) in aug.iter().zip(&pivots) {
        x[c] = row[cols].clone();
    }
    Ok(Solution::Unique(x))
}
