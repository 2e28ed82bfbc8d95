//! Structural properties every extreme point must satisfy, checked on
//! concrete matrices. A failure carries the offending matrix as a witness.

use rand::Rng;
use serde::Serialize;

use crate::analysis::{column_tight_span_dim, is_extreme, loose_entries, support, tilde_normalize};
use crate::enumeration::PermutationPair;
use crate::error::Result;
use crate::linalg::{mat_rank, RMatrix};
use crate::polytope::{ConstraintKind, ConstraintSystem, Mechanism};
use crate::rational::Rational;

pub const CERTIFIED_EXTREME: &str = "certified-extreme";
pub const RANK_EQUALS_SUPPORT: &str = "rank-equals-support-size";
pub const LOOSE_ENTRY_BOUND: &str = "loose-entry-bound";
pub const ONE_LOOSE_PER_ROW: &str = "at-most-one-loose-entry-per-row";
pub const NO_CONSTANT_COLUMN: &str = "no-constant-support-column";
pub const TILDE_ROWS_NONCONSTANT: &str = "normalized-rows-nonconstant";
pub const TWO_COLUMN_PATTERN: &str = "two-column-normalized-pattern";
pub const COLUMN_TIGHT_SPAN: &str = "column-tight-span";
pub const PERMUTATION_CLOSURE: &str = "permutation-closure";
pub const TIGHT_HITS_EXTREMES: &str = "tight-constraint-hits-column-extremes";
pub const NONNEG_IMPLIED: &str = "nonnegativity-implied";
pub const TILDE_RECONSTRUCTION: &str = "normalized-form-reconstruction";

/// Every property name checked by [`check_extreme_point`].
pub const EXTREME_POINT_PROPERTIES: &[&str] = &[
    CERTIFIED_EXTREME,
    RANK_EQUALS_SUPPORT,
    LOOSE_ENTRY_BOUND,
    ONE_LOOSE_PER_ROW,
    NO_CONSTANT_COLUMN,
    TILDE_ROWS_NONCONSTANT,
    TWO_COLUMN_PATTERN,
    COLUMN_TIGHT_SPAN,
    PERMUTATION_CLOSURE,
    TIGHT_HITS_EXTREMES,
    NONNEG_IMPLIED,
    TILDE_RECONSTRUCTION,
];

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PropertyFailure {
    pub property: &'static str,
    pub detail: String,
    pub witness: RMatrix,
}

struct Collector<'a> {
    witness: &'a RMatrix,
    failures: Vec<PropertyFailure>,
}

impl Collector<'_> {
    fn check(&mut self, property: &'static str, ok: bool, detail: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(PropertyFailure {
                property,
                detail: detail(),
                witness: self.witness.clone(),
            });
        }
    }
}

/// Properties that hold for every member of the polytope, extreme or not:
/// tight privacy constraints pair a column maximum with a column minimum,
/// non-negativity follows from the privacy constraints when `t > 1`, and the
/// normalized form reconstructs the matrix with the same support and loose
/// entries.
pub fn check_member(a: &Mechanism, sys: &ConstraintSystem) -> Result<Vec<PropertyFailure>> {
    let mut c = Collector {
        witness: a.matrix(),
        failures: Vec::new(),
    };
    let tight = sys.tight_set(a)?;
    for &i in &tight {
        if let ConstraintKind::Dp { row, other, col } = sys.constraint(i).kind {
            let column = a.column(col);
            let max = column.iter().max().expect("nonempty column");
            let min = column.iter().min().expect("nonempty column");
            c.check(TIGHT_HITS_EXTREMES, a.get(row, col) == max && a.get(other, col) == min, || {
                format!("tight {} does not pair column max with min", sys.constraint(i).kind)
            });
        }
    }
    if sys.t().is_strict() {
        c.check(NONNEG_IMPLIED, sys.satisfies_without_nonneg(a)?, || {
            "member fails the privacy constraints alone".into()
        });
    }
    match tilde_normalize(a) {
        Ok(tf) => {
            let t = sys.t().value();
            let in_range = support(a).iter().all(|&j| {
                (0..a.n()).all(|i| {
                    let x = tf.tilde.get(i, j);
                    *x >= Rational::one() && x <= t
                })
            });
            c.check(
                TILDE_RECONSTRUCTION,
                in_range
                    && tf.tilde.mul_diag(&tf.mins) == *a.matrix()
                    && support(&tf.tilde) == support(a)
                    && loose_entries(&tf.tilde, sys.t()) == loose_entries(a, sys.t()),
                || "normalized form does not match the matrix".into(),
            );
        }
        Err(e) => c.check(TILDE_RECONSTRUCTION, false, || e.to_string()),
    }
    Ok(c.failures)
}

/// Checks every structural property of an extreme point, including
/// extremality under `permutation_pairs` random row/column permutations.
///
/// `a` is expected to be extreme; if it is not, a [`CERTIFIED_EXTREME`]
/// failure is reported and the extreme-only properties are skipped.
pub fn check_extreme_point<R: Rng + ?Sized>(
    a: &Mechanism,
    sys: &ConstraintSystem,
    permutation_pairs: usize,
    rng: &mut R,
) -> Result<Vec<PropertyFailure>> {
    let mut failures = check_member(a, sys)?;
    let mut c = Collector {
        witness: a.matrix(),
        failures: Vec::new(),
    };
    let n = sys.n();
    let cert = is_extreme(a, sys)?;
    c.check(CERTIFIED_EXTREME, cert.is_extreme, || {
        format!("tight constraints have rank {} < {}", cert.rank, n * n)
    });
    if !cert.is_extreme {
        failures.extend(c.failures);
        return Ok(failures);
    }

    let gamma = support(a);
    let lambda = loose_entries(a, sys.t());
    let rank = mat_rank(a);
    c.check(RANK_EQUALS_SUPPORT, rank == gamma.len(), || {
        format!("rank {rank} but {} nonzero columns", gamma.len())
    });

    for j in 0..n {
        let dim = column_tight_span_dim(a, sys, j)?;
        let ok = if gamma.contains(&j) { dim < n } else { dim == n };
        c.check(COLUMN_TIGHT_SPAN, ok, || {
            format!("column {} has tight span {dim}", j + 1)
        });
    }

    if gamma.len() >= 2 {
        c.check(LOOSE_ENTRY_BOUND, lambda.len() <= n - gamma.len(), || {
            format!("{} loose entries with {} nonzero columns", lambda.len(), gamma.len())
        });
        for i in 0..n {
            let count = lambda.iter().filter(|(r, _)| *r == i).count();
            c.check(ONE_LOOSE_PER_ROW, count <= 1, || {
                format!("row {} has {count} loose entries", i + 1)
            });
        }
        for &j in &gamma {
            let first = a.get(0, j);
            let constant = (0..n).all(|i| a.get(i, j) == first);
            c.check(NO_CONSTANT_COLUMN, !constant, || {
                format!("column {} is constant", j + 1)
            });
        }
        let tf = tilde_normalize(a)?;
        for i in 0..n {
            let mut values = gamma.iter().map(|&j| tf.tilde.get(i, j));
            let first = values.next().expect("support has two columns");
            let nonconstant = values.any(|x| x != first);
            c.check(TILDE_ROWS_NONCONSTANT, nonconstant, || {
                format!("normalized row {} is constant on the support", i + 1)
            });
        }
        if gamma.len() == 2 {
            let t = sys.t().value();
            let one = Rational::one();
            let cols: Vec<usize> = gamma.iter().copied().collect();
            for i in 0..n {
                let pair = (tf.tilde.get(i, cols[0]), tf.tilde.get(i, cols[1]));
                let ok = (pair.0 == &one && pair.1 == t) || (pair.0 == t && pair.1 == &one);
                c.check(TWO_COLUMN_PATTERN, ok, || {
                    format!("normalized row {} is ({}, {})", i + 1, pair.0, pair.1)
                });
            }
            c.check(TWO_COLUMN_PATTERN, lambda.is_empty(), || {
                "two nonzero columns but loose entries present".into()
            });
        }
    }

    for _ in 0..permutation_pairs {
        let p = PermutationPair::random(n, rng);
        let b = p.apply(a);
        let ok = is_extreme(&b, sys)?.is_extreme;
        c.check(PERMUTATION_CLOSURE, ok, || {
            format!("not extreme after rows {:?}, columns {:?}", p.row_perm(), p.col_perm())
        });
    }

    failures.extend(c.failures);
    Ok(failures)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polytope::PrivacyParameter;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sys(n: usize, t: i64) -> ConstraintSystem {
        ConstraintSystem::new(n, PrivacyParameter::new(Rational::from_integer(t)).unwrap())
    }

    #[test]
    fn known_extreme_points_pass() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ex5 = Mechanism::new(
            RMatrix::from_scaled_ints(
                &[&[1, 1, 4, 1, 0], &[2, 1, 2, 2, 0], &[2, 2, 2, 1, 0], &[1, 2, 2, 2, 0], &[1, 1, 3, 2, 0]],
                7,
            )
            .unwrap(),
        )
        .unwrap();
        assert_eq!(check_extreme_point(&ex5, &sys(5, 2), 5, &mut rng).unwrap(), vec![]);
        let e2 = Mechanism::corner(3, 1);
        assert_eq!(check_extreme_point(&e2, &sys(3, 2), 5, &mut rng).unwrap(), vec![]);
    }

    #[test]
    fn non_extreme_point_is_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let failures = check_extreme_point(&Mechanism::uniform(3), &sys(3, 2), 3, &mut rng).unwrap();
        assert_eq!(failures.len(), 1);
        assert_eq!(failures[0].property, CERTIFIED_EXTREME);
    }

    #[test]
    fn member_properties_hold_for_interior_point() {
        let a = Mechanism::new(RMatrix::from_scaled_ints(&[&[4, 1, 2], &[3, 2, 2], &[2, 1, 4]], 7).unwrap()).unwrap();
        assert_eq!(check_member(&a, &sys(3, 2)).unwrap(), vec![]);
    }
}
