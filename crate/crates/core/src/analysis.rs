//! Structural statistics of a mechanism and the extremality certificate.
//!
//! A point of the polytope is extreme exactly when the coefficient vectors of
//! the constraints tight at it (the stochastic equalities plus every tight
//! inequality) span the whole `n²`-dimensional matrix space.
//!
//! Looseness follows the column min/max reading: `a_ij` is loose when it
//! equals neither `t · min_k a_kj` nor `max_k a_kj / t`. For an all-zero column
//! both values are `0`, so zero columns never contribute loose entries.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{mat_rank, rank_of_rows, RMatrix, RVector};
use crate::polytope::{ConstraintKind, ConstraintSystem, Mechanism, PrivacyParameter};
use crate::rational::Rational;

/// Column-normalized form: every nonzero column divided by its minimum.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TildeForm {
    pub tilde: RMatrix,
    /// Column minima on the support, `0` on zero columns.
    pub mins: RVector,
    /// Reciprocal column minima on the support, `0` on zero columns.
    pub mins_inv: RVector,
}

/// Classification of a mechanism by the characterized extreme-point families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum FamilyTag {
    /// A single nonzero column: one of the corner mechanisms `E_i`.
    DPrime,
    /// At least two nonzero columns, no loose entries, rank equal to the
    /// support size.
    DTilde,
    /// Extreme but in neither family.
    OtherExtreme,
    NotExtreme,
}

/// Proof object for [`is_extreme`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExtremalityCertificate {
    /// Indices of all tight constraints, ascending.
    pub tight: Vec<usize>,
    /// Rank of their coefficient vectors.
    pub rank: usize,
    /// `rank == n²`.
    pub is_extreme: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnalysisReport {
    pub gamma: BTreeSet<usize>,
    pub lambda: BTreeSet<(usize, usize)>,
    /// Rank of the mechanism matrix itself.
    pub rank: usize,
    pub certificate: ExtremalityCertificate,
    pub family_tag: FamilyTag,
}

impl AnalysisReport {
    pub fn is_extreme(&self) -> bool {
        self.certificate.is_extreme
    }

    pub fn tight_indices(&self) -> &[usize] {
        &self.certificate.tight
    }
}

/// Indices of the nonzero columns.
pub fn support(a: &RMatrix) -> BTreeSet<usize> {
    (0..a.cols())
        .filter(|&j| (0..a.rows()).any(|i| !a.get(i, j).is_zero()))
        .collect()
}

fn column_min_max(a: &RMatrix, j: usize) -> (Rational, Rational) {
    let col = a.column(j);
    let min = col.iter().min().cloned().unwrap_or_default();
    let max = col.iter().max().cloned().unwrap_or_default();
    (min, max)
}

/// The set of loose entries `(row, col)`: entries equal to neither
/// `t · min` nor `max / t` of their column. Entries of an all-zero column are
/// never loose, since both bounds are zero.
pub fn loose_entries(a: &RMatrix, t: &PrivacyParameter) -> BTreeSet<(usize, usize)> {
    let t = t.value();
    let mut loose = BTreeSet::new();
    for j in 0..a.cols() {
        let (min, max) = column_min_max(a, j);
        let upper = t * &min;
        let lower = &max / t;
        for i in 0..a.rows() {
            let x = a.get(i, j);
            if *x != upper && *x != lower {
                loose.insert((i, j));
            }
        }
    }
    loose
}

/// Divides each nonzero column by its minimum entry.
///
/// Fails when a nonzero column also contains a zero, which cannot happen
/// inside the polytope.
pub fn tilde_normalize(a: &Mechanism) -> Result<TildeForm> {
    let n = a.cols();
    let mut mins = RVector::zeros(n);
    let mut mins_inv = RVector::zeros(n);
    for j in support(a) {
        let (min, _) = column_min_max(a, j);
        if !min.is_positive() {
            return Err(Error::DegenerateColumn(j + 1));
        }
        mins_inv[j] = min.recip();
        mins[j] = min;
    }
    let tilde = a.mul_diag(&mins_inv);
    assert_eq!(&tilde.mul_diag(&mins), a.matrix(), "tilde form does not reconstruct");
    Ok(TildeForm {
        tilde,
        mins,
        mins_inv,
    })
}

/// Dimension of the span of the tight privacy constraints acting on column
/// `col`, each viewed as a vector in the column's `n` coordinates.
pub fn column_tight_span_dim(a: &Mechanism, sys: &ConstraintSystem, col: usize) -> Result<usize> {
    sys.require_member(a)?;
    let n = sys.n();
    let t = sys.t().value();
    let rows: Vec<RVector> = sys
        .column_dp_indices(col)
        .filter(|&i| sys.constraint(i).is_tight(a))
        .map(|i| match sys.constraint(i).kind {
            ConstraintKind::Dp { row, other, .. } => {
                let mut v = RVector::unit(n, row);
                v[other] = -t;
                v
            }
            _ => unreachable!("column range only holds privacy constraints"),
        })
        .collect();
    Ok(rank_of_rows(&rows))
}

/// Certifies whether `a` is an extreme point of the polytope.
pub fn is_extreme(a: &Mechanism, sys: &ConstraintSystem) -> Result<ExtremalityCertificate> {
    let tight = sys.tight_set(a)?;
    let rank = rank_of_rows(&sys.coefficient_rows(&tight));
    let dim = sys.n() * sys.n();
    Ok(ExtremalityCertificate {
        tight,
        rank,
        is_extreme: rank == dim,
    })
}

/// Family predicate shared by [`analyze`] and the enumeration module:
/// `Some(DPrime)`, `Some(DTilde)` or `None`.
pub(crate) fn family_predicate(
    gamma: &BTreeSet<usize>,
    lambda: &BTreeSet<(usize, usize)>,
    rank: usize,
) -> Option<FamilyTag> {
    if gamma.len() == 1 {
        Some(FamilyTag::DPrime)
    } else if gamma.len() >= 2 && lambda.is_empty() && rank == gamma.len() {
        Some(FamilyTag::DTilde)
    } else {
        None
    }
}

/// Full structural report for a member of the polytope.
pub fn analyze(a: &Mechanism, sys: &ConstraintSystem) -> Result<AnalysisReport> {
    let certificate = is_extreme(a, sys)?;
    let gamma = support(a);
    let lambda = loose_entries(a, sys.t());
    let rank = mat_rank(a);
    let family_tag = match family_predicate(&gamma, &lambda, rank) {
        Some(tag) => tag,
        None if certificate.is_extreme => FamilyTag::OtherExtreme,
        None => FamilyTag::NotExtreme,
    };
    Ok(AnalysisReport {
        gamma,
        lambda,
        rank,
        certificate,
        family_tag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polytope::build_system;

    fn t(n: i64) -> PrivacyParameter {
        PrivacyParameter::new(Rational::from_integer(n)).unwrap()
    }

    fn mech(rows: &[&[i64]], denom: i64) -> Mechanism {
        Mechanism::new(RMatrix::from_scaled_ints(rows, denom).unwrap()).unwrap()
    }

    fn example_3x3() -> Mechanism {
        mech(&[&[4, 1, 2], &[3, 2, 2], &[2, 1, 4]], 7)
    }

    fn example_4x4() -> Mechanism {
        mech(&[&[1, 0, 2, 0], &[1, 0, 2, 0], &[2, 0, 1, 0], &[1, 0, 2, 0]], 3)
    }

    fn example_5x5() -> Mechanism {
        mech(
            &[
                &[1, 1, 4, 1, 0],
                &[2, 1, 2, 2, 0],
                &[2, 2, 2, 1, 0],
                &[1, 2, 2, 2, 0],
                &[1, 1, 3, 2, 0],
            ],
            7,
        )
    }

    fn set<T: Ord + Clone>(xs: &[T]) -> BTreeSet<T> {
        xs.iter().cloned().collect()
    }

    #[test]
    fn support_examples() {
        assert_eq!(support(&Mechanism::corner(3, 0)), set(&[0]));
        assert_eq!(support(&example_3x3()), set(&[0, 1, 2]));
        assert_eq!(support(&example_4x4()), set(&[0, 2]));
    }

    #[test]
    fn loose_examples() {
        assert_eq!(loose_entries(&example_3x3(), &t(2)), set(&[(1, 0)]));
        assert_eq!(
            loose_entries(&Mechanism::corner(3, 0), &t(2)),
            set(&[(0, 0), (1, 0), (2, 0)])
        );
        assert_eq!(loose_entries(&example_5x5(), &t(2)), set(&[(4, 2)]));
    }

    #[test]
    fn tilde_examples() {
        let tf = tilde_normalize(&example_3x3()).unwrap();
        let expected = RMatrix::from_scaled_ints(&[&[4, 2, 2], &[3, 4, 2], &[2, 2, 4]], 2).unwrap();
        assert_eq!(tf.tilde, expected);
        assert_eq!(
            tf.mins,
            RVector(vec![Rational::new(2, 7), Rational::new(1, 7), Rational::new(2, 7)])
        );

        let e1 = Mechanism::corner(3, 0);
        let tf = tilde_normalize(&e1).unwrap();
        assert_eq!(&tf.tilde, e1.matrix());
        assert_eq!(tf.mins, RVector::unit(3, 0));

        let tf = tilde_normalize(&example_4x4()).unwrap();
        let expected = RMatrix::from_scaled_ints(&[&[1, 0, 2, 0], &[1, 0, 2, 0], &[2, 0, 1, 0], &[1, 0, 2, 0]], 1).unwrap();
        assert_eq!(tf.tilde, expected);
        let third = Rational::new(1, 3);
        assert_eq!(
            tf.mins,
            RVector(vec![third.clone(), Rational::zero(), third, Rational::zero()])
        );
        assert_eq!(support(&tf.tilde), support(&example_4x4()));
        assert_eq!(loose_entries(&tf.tilde, &t(2)), loose_entries(&example_4x4(), &t(2)));
    }

    #[test]
    fn tilde_rejects_degenerate_columns() {
        let a = mech(&[&[1, 0], &[0, 1]], 1);
        assert_eq!(tilde_normalize(&a), Err(Error::DegenerateColumn(1)));
    }

    #[test]
    fn column_span_examples() {
        let sys = build_system(3, &t(2));
        let e1 = Mechanism::corner(3, 0);
        assert_eq!(column_tight_span_dim(&e1, &sys, 1).unwrap(), 3);
        assert_eq!(column_tight_span_dim(&e1, &sys, 0).unwrap(), 0);
        let a = example_3x3();
        for j in 0..3 {
            assert!(column_tight_span_dim(&a, &sys, j).unwrap() <= 2);
        }
    }

    #[test]
    fn extremality_examples() {
        for n in 1..=4 {
            for tp in [t(1), t(2), t(3)] {
                let sys = build_system(n, &tp);
                for i in 0..n {
                    assert!(is_extreme(&Mechanism::corner(n, i), &sys).unwrap().is_extreme);
                }
                let uni = is_extreme(&Mechanism::uniform(n), &sys).unwrap();
                assert_eq!(uni.is_extreme, n == 1);
            }
        }
        let sys = build_system(5, &t(2));
        let cert = is_extreme(&example_5x5(), &sys).unwrap();
        assert!(cert.is_extreme);
        assert_eq!(cert.rank, 25);
        let sys = build_system(3, &t(2));
        assert!(!is_extreme(&example_3x3(), &sys).unwrap().is_extreme);
    }

    #[test]
    fn analyze_examples() {
        let r = analyze(&Mechanism::corner(3, 1), &build_system(3, &t(2))).unwrap();
        assert_eq!(r.gamma, set(&[1]));
        assert_eq!(r.lambda.len(), 3);
        assert_eq!(r.rank, 1);
        assert!(r.is_extreme());
        assert_eq!(r.family_tag, FamilyTag::DPrime);

        let r = analyze(&example_4x4(), &build_system(4, &t(2))).unwrap();
        assert_eq!(r.gamma, set(&[0, 2]));
        assert!(r.lambda.is_empty());
        assert_eq!(r.rank, 2);
        assert!(r.is_extreme());
        assert_eq!(r.family_tag, FamilyTag::DTilde);

        let r = analyze(&example_5x5(), &build_system(5, &t(2))).unwrap();
        assert_eq!(r.gamma, set(&[0, 1, 2, 3]));
        assert_eq!(r.lambda, set(&[(4, 2)]));
        assert_eq!(r.rank, 4);
        assert!(r.is_extreme());
        assert_eq!(r.family_tag, FamilyTag::OtherExtreme);

        let r = analyze(&Mechanism::uniform(3), &build_system(3, &t(2))).unwrap();
        assert_eq!(r.family_tag, FamilyTag::NotExtreme);

        let outside = Mechanism::new(RMatrix::identity(2)).unwrap();
        assert!(matches!(
            analyze(&outside, &build_system(2, &t(2))),
            Err(Error::NotInPolytope { .. })
        ));
    }
}
