//! The constraint system of the ε-differential privacy polytope.
//!
//! For a privacy parameter `t = e^ε` the polytope holds the `n × n` matrices
//! `A` with
//!
//! * `Σ_j a_ij = 1` for every row `i` (stochastic),
//! * `a_ij ≥ 0` (non-negativity),
//! * `a_ij ≤ t · a_kj` for every column `j` and rows `i ≠ k` (privacy).
//!
//! Constraints are indexed in a fixed order: the `n` stochastic rows, then the
//! `n²` non-negativity constraints in row-major order, then the `n·n·(n−1)`
//! privacy constraints ordered by `(j, i, k)`, i.e. grouped by column. Rows
//! with `i = k` are trivially satisfied and not part of the system.

use std::fmt;
use std::ops::Deref;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{RMatrix, RVector};
use crate::rational::Rational;

/// The privacy parameter `t = e^ε`, an exact rational `≥ 1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct PrivacyParameter(Rational);

impl PrivacyParameter {
    pub fn new(t: Rational) -> Result<Self> {
        if t < Rational::one() {
            return Err(Error::InvalidPrivacyParameter(t));
        }
        Ok(PrivacyParameter(t))
    }

    /// `t = 2^k`, i.e. `ε = k · ln 2`.
    pub fn from_ln2_multiple(k: u32) -> Self {
        PrivacyParameter(Rational::from_integer(2).pow(k))
    }

    pub fn value(&self) -> &Rational {
        &self.0
    }

    /// `true` when `ε > 0`.
    pub fn is_strict(&self) -> bool {
        self.0 > Rational::one()
    }
}

impl fmt::Display for PrivacyParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl TryFrom<Rational> for PrivacyParameter {
    type Error = Error;
    fn try_from(t: Rational) -> Result<Self> {
        Self::new(t)
    }
}

/// A square row-stochastic matrix with non-negative entries.
///
/// Privacy constraints are not part of this type's invariant; they are checked
/// against a [`ConstraintSystem`].
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct Mechanism(RMatrix);

impl Mechanism {
    pub fn new(matrix: RMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch {
                expected: matrix.rows(),
                found: matrix.cols(),
            });
        }
        for i in 0..matrix.rows() {
            let sum: Rational = matrix.row(i).iter().sum();
            if !sum.is_one() {
                return Err(Error::NotStochastic(format!("row {} sums to {sum}", i + 1)));
            }
            if let Some(j) = matrix.row(i).iter().position(Rational::is_negative) {
                return Err(Error::NotStochastic(format!(
                    "entry ({}, {}) is negative",
                    i + 1,
                    j + 1
                )));
            }
        }
        Ok(Mechanism(matrix))
    }

    /// The corner mechanism `E_col = 𝟏 e_colᵀ`, which always outputs `col`.
    pub fn corner(n: usize, col: usize) -> Self {
        assert!(col < n);
        let mut m = RMatrix::zeros(n, n);
        for i in 0..n {
            m.set(i, col, Rational::one());
        }
        Mechanism(m)
    }

    /// Every entry equal to `1/n`.
    pub fn uniform(n: usize) -> Self {
        let v = Rational::new(1, n as i64);
        Mechanism(RMatrix::zeros(n, n).map(|_| v.clone()))
    }

    pub fn n(&self) -> usize {
        self.0.rows()
    }

    pub fn matrix(&self) -> &RMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> RMatrix {
        self.0
    }

    /// Applies row and column permutations; the result is again stochastic.
    pub fn permuted(&self, row_perm: &[usize], col_perm: &[usize]) -> Self {
        Mechanism(self.0.permuted(row_perm, col_perm))
    }
}

impl Deref for Mechanism {
    type Target = RMatrix;
    fn deref(&self) -> &RMatrix {
        &self.0
    }
}

/// Which defining inequality or equality a constraint encodes. Indices are
/// zero-based; `Display` renders them one-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ConstraintKind {
    /// `Σ_j a_{row,j} = 1`.
    Stochastic { row: usize },
    /// `−a_{row,col} ≤ 0`.
    NonNeg { row: usize, col: usize },
    /// `a_{row,col} − t · a_{other,col} ≤ 0`.
    Dp { row: usize, other: usize, col: usize },
}

impl ConstraintKind {
    pub fn is_equality(&self) -> bool {
        matches!(self, ConstraintKind::Stochastic { .. })
    }
}

impl fmt::Display for ConstraintKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ConstraintKind::Stochastic { row } => write!(f, "Stochastic({})", row + 1),
            ConstraintKind::NonNeg { row, col } => write!(f, "NonNeg({},{})", row + 1, col + 1),
            ConstraintKind::Dp { row, other, col } => {
                write!(f, "DP({},{},{})", row + 1, other + 1, col + 1)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Relation {
    Equal,
    LessEq,
}

/// One linear constraint `⟨coeffs, A⟩ (= | ≤) rhs` over the `n²` matrix
/// entries; positions are row-major `r * n + c`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Constraint {
    pub kind: ConstraintKind,
    pub coeffs: Vec<(usize, Rational)>,
    pub rhs: Rational,
    pub relation: Relation,
}

impl Constraint {
    fn lhs(&self, a: &RMatrix) -> Rational {
        self.coeffs
            .iter()
            .map(|(pos, c)| c * &a.entries()[*pos])
            .sum()
    }

    pub fn is_satisfied(&self, a: &RMatrix) -> bool {
        let lhs = self.lhs(a);
        match self.relation {
            Relation::Equal => lhs == self.rhs,
            Relation::LessEq => lhs <= self.rhs,
        }
    }

    /// Holds with equality at `a`.
    pub fn is_tight(&self, a: &RMatrix) -> bool {
        self.lhs(a) == self.rhs
    }

    /// Dense coefficient vector of length `dim`.
    pub fn dense(&self, dim: usize) -> RVector {
        let mut v = RVector::zeros(dim);
        for (pos, c) in &self.coeffs {
            v[*pos] = c.clone();
        }
        v
    }
}

/// Result of a membership test.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Membership {
    InD,
    /// Indices of every violated constraint, ascending.
    Violation(Vec<usize>),
}

impl Membership {
    pub fn is_member(&self) -> bool {
        matches!(self, Membership::InD)
    }
}

/// The full indexed constraint system for a fixed `(n, t)`.
#[derive(Clone, Debug)]
pub struct ConstraintSystem {
    n: usize,
    t: PrivacyParameter,
    constraints: Vec<Constraint>,
}

/// Builds the constraint system for `n × n` mechanisms at privacy parameter `t`.
pub fn build_system(n: usize, t: &PrivacyParameter) -> ConstraintSystem {
    ConstraintSystem::new(n, t.clone())
}

impl ConstraintSystem {
    pub fn new(n: usize, t: PrivacyParameter) -> Self {
        assert!(n >= 1, "polytope dimension must be at least 1");
        let pos = |r: usize, c: usize| r * n + c;
        let mut constraints = Vec::with_capacity(n + n * n + n * n * (n - 1));
        for row in 0..n {
            constraints.push(Constraint {
                kind: ConstraintKind::Stochastic { row },
                coeffs: (0..n).map(|c| (pos(row, c), Rational::one())).collect(),
                rhs: Rational::one(),
                relation: Relation::Equal,
            });
        }
        for row in 0..n {
            for col in 0..n {
                constraints.push(Constraint {
                    kind: ConstraintKind::NonNeg { row, col },
                    coeffs: vec![(pos(row, col), -Rational::one())],
                    rhs: Rational::zero(),
                    relation: Relation::LessEq,
                });
            }
        }
        let neg_t = -t.value();
        for col in 0..n {
            for row in 0..n {
                for other in (0..n).filter(|&k| k != row) {
                    constraints.push(Constraint {
                        kind: ConstraintKind::Dp { row, other, col },
                        coeffs: vec![(pos(row, col), Rational::one()), (pos(other, col), neg_t.clone())],
                        rhs: Rational::zero(),
                        relation: Relation::LessEq,
                    });
                }
            }
        }
        ConstraintSystem { n, t, constraints }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn t(&self) -> &PrivacyParameter {
        &self.t
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn constraint(&self, index: usize) -> &Constraint {
        &self.constraints[index]
    }

    /// Range of indices holding the privacy constraints.
    pub fn dp_range(&self) -> std::ops::Range<usize> {
        self.n + self.n * self.n..self.constraints.len()
    }

    /// Range of indices holding the non-negativity constraints.
    pub fn nonneg_range(&self) -> std::ops::Range<usize> {
        self.n..self.n + self.n * self.n
    }

    /// Position of a constraint in the system.
    pub fn index_of(&self, kind: ConstraintKind) -> usize {
        let n = self.n;
        match kind {
            ConstraintKind::Stochastic { row } => row,
            ConstraintKind::NonNeg { row, col } => n + row * n + col,
            ConstraintKind::Dp { row, other, col } => {
                assert_ne!(row, other);
                let k = if other < row { other } else { other - 1 };
                n + n * n + col * n * (n - 1) + row * (n - 1) + k
            }
        }
    }

    /// Indices of the privacy constraints acting on column `col`.
    pub fn column_dp_indices(&self, col: usize) -> std::ops::Range<usize> {
        let per_col = self.n * (self.n - 1);
        let start = self.n + self.n * self.n + col * per_col;
        start..start + per_col
    }

    fn check_dims(&self, a: &RMatrix) -> Result<()> {
        if a.rows() != self.n || a.cols() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: if a.rows() != self.n { a.rows() } else { a.cols() },
            });
        }
        Ok(())
    }

    pub fn membership(&self, a: &RMatrix) -> Result<Membership> {
        self.check_dims(a)?;
        let violations: Vec<usize> = self
            .constraints
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_satisfied(a))
            .map(|(i, _)| i)
            .collect();
        Ok(if violations.is_empty() {
            Membership::InD
        } else {
            Membership::Violation(violations)
        })
    }

    /// Membership test that ignores the non-negativity constraints.
    pub fn satisfies_without_nonneg(&self, a: &RMatrix) -> Result<bool> {
        self.check_dims(a)?;
        let nonneg = self.nonneg_range();
        Ok(self
            .constraints
            .iter()
            .enumerate()
            .filter(|(i, _)| !nonneg.contains(i))
            .all(|(_, c)| c.is_satisfied(a)))
    }

    /// Errors with the violated indices unless `a` lies in the polytope.
    pub fn require_member(&self, a: &RMatrix) -> Result<()> {
        match self.membership(a)? {
            Membership::InD => Ok(()),
            Membership::Violation(violations) => Err(Error::NotInPolytope { violations }),
        }
    }

    /// Ascending indices of every constraint holding with equality at `a`.
    /// Stochastic constraints are always included.
    pub fn tight_set(&self, a: &Mechanism) -> Result<Vec<usize>> {
        self.require_member(a)?;
        Ok(self
            .constraints
            .iter()
            .enumerate()
            .filter(|(_, c)| c.relation == Relation::Equal || c.is_tight(a))
            .map(|(i, _)| i)
            .collect())
    }

    /// Dense coefficient vectors (length `n²`) of the given constraints.
    pub fn coefficient_rows(&self, indices: &[usize]) -> Vec<RVector> {
        let dim = self.n * self.n;
        indices.iter().map(|&i| self.constraints[i].dense(dim)).collect()
    }
}

/// Membership of `a` in the polytope for parameter `t`.
pub fn membership(a: &RMatrix, t: &PrivacyParameter) -> Result<Membership> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            expected: a.rows(),
            found: a.cols(),
        });
    }
    ConstraintSystem::new(a.rows(), t.clone()).membership(a)
}

/// For `t > 1`, checks that `v_i ≤ t · v_j` for all pairs implies `v ≥ 0`.
///
/// The implication is expected to hold for every `v`; a `false` return is a
/// counterexample.
pub fn nonneg_redundancy_check(v: &RVector, t: &PrivacyParameter) -> Result<bool> {
    if !t.is_strict() {
        return Err(Error::RequiresStrictPrivacy);
    }
    let t = t.value();
    let pairwise = v
        .iter()
        .all(|vi| v.iter().all(|vj| *vi <= t * vj));
    Ok(!pairwise || v.iter().all(|x| !x.is_negative()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t(n: i64, d: i64) -> PrivacyParameter {
        PrivacyParameter::new(Rational::new(n, d)).unwrap()
    }

    fn example_3x3() -> RMatrix {
        RMatrix::from_scaled_ints(&[&[4, 1, 2], &[3, 2, 2], &[2, 1, 4]], 7).unwrap()
    }

    #[test]
    fn rejects_small_t() {
        assert!(matches!(
            PrivacyParameter::new(Rational::new(1, 2)),
            Err(Error::InvalidPrivacyParameter(_))
        ));
        assert!(PrivacyParameter::new(Rational::one()).is_ok());
        assert_eq!(PrivacyParameter::from_ln2_multiple(3).value(), &Rational::from_integer(8));
    }

    #[test]
    fn constraint_counts() {
        for (n, dp) in [(1, 0), (3, 18), (5, 100)] {
            let sys = build_system(n, &t(2, 1));
            let count = |f: fn(&ConstraintKind) -> bool| {
                sys.constraints().iter().filter(|c| f(&c.kind)).count()
            };
            assert_eq!(count(|k| matches!(k, ConstraintKind::Stochastic { .. })), n);
            assert_eq!(count(|k| matches!(k, ConstraintKind::NonNeg { .. })), n * n);
            assert_eq!(count(|k| matches!(k, ConstraintKind::Dp { .. })), dp);
        }
    }

    #[test]
    fn index_order_is_documented_order() {
        let sys = build_system(4, &t(3, 2));
        for (i, c) in sys.constraints().iter().enumerate() {
            assert_eq!(sys.index_of(c.kind), i);
        }
        let dp: Vec<_> = sys.dp_range().map(|i| sys.constraint(i).kind).collect();
        let mut sorted = dp.clone();
        sorted.sort_by_key(|k| match *k {
            ConstraintKind::Dp { row, other, col } => (col, row, other),
            _ => unreachable!(),
        });
        assert_eq!(dp, sorted);
        assert_eq!(sys.column_dp_indices(2).len(), 12);
    }

    #[test]
    fn membership_examples() {
        assert_eq!(membership(&example_3x3(), &t(2, 1)).unwrap(), Membership::InD);

        let sys = build_system(2, &t(2, 1));
        match sys.membership(&RMatrix::identity(2)).unwrap() {
            Membership::Violation(v) => {
                let kinds: Vec<_> = v.iter().map(|&i| sys.constraint(i).kind).collect();
                assert_eq!(
                    kinds,
                    vec![
                        ConstraintKind::Dp { row: 0, other: 1, col: 0 },
                        ConstraintKind::Dp { row: 1, other: 0, col: 1 },
                    ]
                );
            }
            Membership::InD => panic!("identity is not private"),
        }

        for n in 1..=5 {
            for tp in [t(1, 1), t(3, 2), t(7, 1)] {
                assert!(membership(&Mechanism::uniform(n), &tp).unwrap().is_member());
            }
        }
        assert!(membership(&RMatrix::zeros(2, 3), &t(2, 1)).is_err());
        assert!(build_system(3, &t(2, 1)).membership(&RMatrix::identity(2)).is_err());
    }

    #[test]
    fn tight_set_of_corner() {
        let sys = build_system(2, &t(2, 1));
        let tight = sys.tight_set(&Mechanism::corner(2, 0)).unwrap();
        let kinds: Vec<String> = tight.iter().map(|&i| sys.constraint(i).kind.to_string()).collect();
        assert_eq!(
            kinds,
            ["Stochastic(1)", "Stochastic(2)", "NonNeg(1,2)", "NonNeg(2,2)", "DP(1,2,2)", "DP(2,1,2)"]
        );
    }

    #[test]
    fn tight_set_of_uniform_is_stochastic_only() {
        for n in 1..=4 {
            let sys = build_system(n, &t(2, 1));
            assert_eq!(sys.tight_set(&Mechanism::uniform(n)).unwrap(), (0..n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn tight_set_of_example_contains_column_one_extremes() {
        let sys = build_system(3, &t(2, 1));
        let a = Mechanism::new(example_3x3()).unwrap();
        let tight = sys.tight_set(&a).unwrap();
        let dp_tight: Vec<String> = tight
            .iter()
            .filter(|i| sys.dp_range().contains(i))
            .map(|&i| sys.constraint(i).kind.to_string())
            .collect();
        // Column 1: 4 = 2·2; column 2: 2 = 2·1 twice; column 3: 4 = 2·2 twice.
        assert_eq!(
            dp_tight,
            ["DP(1,3,1)", "DP(2,1,2)", "DP(2,3,2)", "DP(3,1,3)", "DP(3,2,3)"]
        );
        let not_member = Mechanism::new(RMatrix::identity(3)).unwrap();
        assert!(matches!(sys.tight_set(&not_member), Err(Error::NotInPolytope { .. })));
    }

    #[test]
    fn nonneg_redundancy_examples() {
        let v = |xs: &[i64]| -> RVector { xs.iter().map(|&x| Rational::from_integer(x)).collect() };
        assert!(nonneg_redundancy_check(&v(&[1, 2]), &t(2, 1)).unwrap());
        assert!(nonneg_redundancy_check(&v(&[-1, 1]), &t(2, 1)).unwrap());
        assert_eq!(
            nonneg_redundancy_check(&v(&[1, 1]), &t(1, 1)),
            Err(Error::RequiresStrictPrivacy)
        );
    }

    #[test]
    fn zero_privacy_requires_constant_columns() {
        let sys = build_system(2, &t(1, 1));
        let constant = RMatrix::from_scaled_ints(&[&[1, 2], &[1, 2]], 3).unwrap();
        let varying = RMatrix::from_scaled_ints(&[&[1, 2], &[2, 1]], 3).unwrap();
        assert!(sys.membership(&constant).unwrap().is_member());
        assert!(!sys.membership(&varying).unwrap().is_member());
    }

    fn rational_vec(len: usize) -> impl Strategy<Value = RVector> {
        proptest::collection::vec((-20i64..20, 1i64..6), len)
            .prop_map(|xs| xs.into_iter().map(|(n, d)| Rational::new(n, d)).collect())
    }

    /// A random stochastic matrix whose columns are scaled so that it lies in
    /// the polytope for t = 2: entries per column lie in `[c, 2c]`.
    fn member_3x3() -> impl Strategy<Value = RMatrix> {
        proptest::collection::vec(1i64..=2, 9).prop_flat_map(|weights| {
            let m = RMatrix::new(
                3,
                3,
                weights.iter().map(|&w| Rational::from_integer(w)).collect(),
            )
            .unwrap();
            // Normalize rows; the column ratio stays within t = 4.
            Just(normalize_rows(&m))
        })
    }

    fn normalize_rows(m: &RMatrix) -> RMatrix {
        let mut out = m.clone();
        for i in 0..m.rows() {
            let s: Rational = m.row(i).iter().sum();
            for j in 0..m.cols() {
                out.set(i, j, m.get(i, j) / &s);
            }
        }
        out
    }

    proptest! {
        #[test]
        fn pairwise_bound_forces_nonnegativity(v in rational_vec(4)) {
            prop_assert!(nonneg_redundancy_check(&v, &t(3, 2)).unwrap());
        }

        #[test]
        fn nonneg_is_implied_by_privacy(m in member_3x3()) {
            let sys = build_system(3, &t(4, 1));
            let member = sys.membership(&m).unwrap().is_member();
            prop_assert_eq!(sys.satisfies_without_nonneg(&m).unwrap(), member);
        }

        #[test]
        fn membership_is_permutation_invariant(
            m in member_3x3(),
            rp in Just(vec![0usize, 1, 2]).prop_shuffle(),
            cp in Just(vec![0usize, 1, 2]).prop_shuffle(),
        ) {
            for tp in [t(2, 1), t(4, 1)] {
                let sys = build_system(3, &tp);
                prop_assert_eq!(
                    sys.membership(&m).unwrap().is_member(),
                    sys.membership(&m.permuted(&rp, &cp)).unwrap().is_member()
                );
            }
        }

        #[test]
        fn tight_privacy_constraint_hits_column_extremes(m in member_3x3()) {
            let tp = t(2, 1);
            let sys = build_system(3, &tp);
            prop_assume!(sys.membership(&m).unwrap().is_member());
            let a = Mechanism::new(m).unwrap();
            for i in sys.tight_set(&a).unwrap() {
                if let ConstraintKind::Dp { row, other, col } = sys.constraint(i).kind {
                    let column = a.column(col);
                    prop_assert_eq!(a.get(row, col), column.iter().max().unwrap());
                    prop_assert_eq!(a.get(other, col), column.iter().min().unwrap());
                }
            }
        }
    }
}
