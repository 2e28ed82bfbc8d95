//! Linear utility maximization over the polytope.
//!
//! Two independent routes: an exact scan over a vertex set, and an exact
//! rational simplex over the full constraint system using Bland's rule.
//! Every basic feasible solution of the slack form projects to a vertex of the
//! polytope, so simplex optima are certified extreme points.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::analysis::is_extreme;
use crate::enumeration::{family_membership, Family, VertexSet};
use crate::error::{Error, Result};
use crate::linalg::RMatrix;
use crate::polytope::{ConstraintSystem, Mechanism, PrivacyParameter, Relation};
use crate::properties::{check_extreme_point, PropertyFailure};
use crate::rational::Rational;

/// Objective entries for random probe utilities are drawn uniformly from
/// `-PROBE_WEIGHT_RANGE..=PROBE_WEIGHT_RANGE`.
pub const PROBE_WEIGHT_RANGE: i64 = 9;
/// Random permutation pairs checked per probe optimum.
pub const PROBE_PERMUTATION_PAIRS: usize = 3;

/// A linear utility `A ↦ Σ_ij w_ij a_ij`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct UtilityMatrix(RMatrix);

impl UtilityMatrix {
    pub fn new(weights: RMatrix) -> Result<Self> {
        if !weights.is_square() {
            return Err(Error::DimensionMismatch {
                expected: weights.rows(),
                found: weights.cols(),
            });
        }
        Ok(UtilityMatrix(weights))
    }

    pub fn identity(n: usize) -> Self {
        UtilityMatrix(RMatrix::identity(n))
    }

    pub fn ones(n: usize) -> Self {
        UtilityMatrix(RMatrix::zeros(n, n).map(|_| Rational::one()))
    }

    /// Independent uniform integers in `[-range, range]`, row-major.
    pub fn random_integer<R: Rng + ?Sized>(n: usize, range: i64, rng: &mut R) -> Self {
        let entries = (0..n * n)
            .map(|_| Rational::from_integer(rng.random_range(-range..=range)))
            .collect();
        UtilityMatrix(RMatrix::new(n, n, entries).expect("square"))
    }

    /// The objective `Σ_k c_k` over all inequality constraints `c_k · x ≤ 0`
    /// tight at `a`. When `a` is a vertex it is the unique maximizer.
    pub fn favoring(a: &Mechanism, sys: &ConstraintSystem) -> Result<Self> {
        let n = sys.n();
        let mut w = RMatrix::zeros(n, n);
        for i in sys.tight_set(a)? {
            let c = sys.constraint(i);
            if c.relation == Relation::Equal {
                continue;
            }
            for (pos, coeff) in &c.coeffs {
                let v = w.entries()[*pos].clone() + coeff;
                w.set(pos / n, pos % n, v);
            }
        }
        Ok(UtilityMatrix(w))
    }

    pub fn n(&self) -> usize {
        self.0.rows()
    }

    pub fn weights(&self) -> &RMatrix {
        &self.0
    }

    pub fn value(&self, a: &RMatrix) -> Rational {
        self.0.frobenius_dot(a)
    }

    /// `self + c · 𝟏𝟏ᵀ`.
    pub fn shifted(&self, c: &Rational) -> Self {
        UtilityMatrix(self.0.map(|w| w + c))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Method {
    VertexScan,
    Simplex,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OptimizationResult {
    pub value: Rational,
    pub argmax: Mechanism,
    pub method: Method,
    /// Indices of the constraints tight at `argmax`.
    pub certificate: Vec<usize>,
    /// Simplex pivots performed; zero for a vertex scan.
    pub pivots: usize,
}

/// Exact maximum over `vertices`; ties go to the earliest vertex.
pub fn optimize_over_vertices(u: &UtilityMatrix, vertices: &VertexSet) -> Result<OptimizationResult> {
    if vertices.is_empty() {
        return Err(Error::EmptyVertexSet);
    }
    if u.n() != vertices.n() {
        return Err(Error::DimensionMismatch {
            expected: vertices.n(),
            found: u.n(),
        });
    }
    let mut best: Option<(Rational, &Mechanism)> = None;
    for v in vertices.vertices() {
        let value = u.value(v);
        if best.as_ref().is_none_or(|(b, _)| value > *b) {
            best = Some((value, v));
        }
    }
    let (value, argmax) = best.expect("nonempty");
    let sys = ConstraintSystem::new(vertices.n(), vertices.t().clone());
    Ok(OptimizationResult {
        value,
        argmax: argmax.clone(),
        method: Method::VertexScan,
        certificate: sys.tight_set(argmax)?,
        pivots: 0,
    })
}

/// Dense simplex tableau in slack form.
///
/// Variables `0..n²` are the matrix entries (row-major), followed by one slack
/// per privacy constraint. Rows are the stochastic equalities, then one row per
/// privacy constraint. Non-negativity constraints become variable bounds.
struct Tableau {
    rows: Vec<Vec<Rational>>,
    rhs: Vec<Rational>,
    basis: Vec<usize>,
    reduced: Vec<Rational>,
    objective: Rational,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let inv = self.rows[r][c].recip();
        for x in self.rows[r].iter_mut() {
            if !x.is_zero() {
                *x *= &inv;
            }
        }
        self.rhs[r] *= &inv;
        let pivot_row = std::mem::take(&mut self.rows[r]);
        let pivot_rhs = self.rhs[r].clone();
        let nonzero: Vec<usize> = (0..pivot_row.len()).filter(|&j| !pivot_row[j].is_zero()).collect();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r || row[c].is_zero() {
                continue;
            }
            let factor = row[c].clone();
            for &j in &nonzero {
                row[j] -= &factor * &pivot_row[j];
            }
            self.rhs[i] -= &factor * &pivot_rhs;
        }
        if !self.reduced[c].is_zero() {
            let factor = self.reduced[c].clone();
            for &j in &nonzero {
                self.reduced[j] -= &factor * &pivot_row[j];
            }
            self.objective += &factor * &pivot_rhs;
        }
        self.rows[r] = pivot_row;
        self.basis[r] = c;
    }
}

/// Exact maximum of `u` over the polytope.
///
/// Starts from the basis of the corner mechanism `E_1` (entries of column 1
/// plus every slack), which is feasible for any `t ≥ 1`, and pivots with the
/// smallest-index rule for both entering and leaving variables, which cannot
/// cycle.
pub fn simplex_optimize(u: &UtilityMatrix, sys: &ConstraintSystem) -> Result<OptimizationResult> {
    let n = sys.n();
    if u.n() != n {
        return Err(Error::DimensionMismatch { expected: n, found: u.n() });
    }
    let dim = n * n;
    let dp = sys.dp_range();
    let n_vars = dim + dp.len();
    let mut rows = Vec::with_capacity(n + dp.len());
    let mut rhs = Vec::with_capacity(n + dp.len());
    for i in 0..n {
        let mut row = vec![Rational::zero(); n_vars];
        for (pos, c) in &sys.constraint(i).coeffs {
            row[*pos] = c.clone();
        }
        rows.push(row);
        rhs.push(Rational::one());
    }
    for (s, idx) in dp.clone().enumerate() {
        let mut row = vec![Rational::zero(); n_vars];
        for (pos, c) in &sys.constraint(idx).coeffs {
            row[*pos] = c.clone();
        }
        row[dim + s] = Rational::one();
        rows.push(row);
        rhs.push(Rational::zero());
    }
    let mut costs = vec![Rational::zero(); n_vars];
    costs[..dim].clone_from_slice(u.weights().entries());

    let mut tab = Tableau {
        basis: (0..n).map(|i| i * n).chain(dim..n_vars).collect(),
        rows,
        rhs,
        reduced: costs,
        objective: Rational::zero(),
    };
    // Bring the starting basis into canonical form. Slack columns are already
    // unit vectors; only the column-1 entries need pivoting in.
    for i in 0..n {
        tab.pivot(i, i * n);
    }
    debug_assert!(tab.rhs.iter().all(|x| !x.is_negative()), "starting basis infeasible");

    let mut pivots = 0;
    // Bland's rule: lowest-index improving column enters.
    while let Some(enter) = (0..n_vars).find(|&j| tab.reduced[j].is_positive()) {
        let mut leave: Option<(usize, Rational)> = None;
        for r in 0..tab.rows.len() {
            let a = &tab.rows[r][enter];
            if !a.is_positive() {
                continue;
            }
            let ratio = &tab.rhs[r] / a;
            let better = match &leave {
                None => true,
                Some((lr, lratio)) => {
                    ratio < *lratio || (ratio == *lratio && tab.basis[r] < tab.basis[*lr])
                }
            };
            if better {
                leave = Some((r, ratio));
            }
        }
        let (r, _) = leave.expect("polytope is bounded");
        tab.pivot(r, enter);
        pivots += 1;
    }

    let mut x = vec![Rational::zero(); dim];
    for (r, &b) in tab.basis.iter().enumerate() {
        if b < dim {
            x[b] = tab.rhs[r].clone();
        }
    }
    let argmax = Mechanism::new(RMatrix::new(n, n, x)?)?;
    let value = u.value(&argmax);
    assert_eq!(value, tab.objective, "objective bookkeeping drifted");
    let cert = is_extreme(&argmax, sys)?;
    assert!(cert.is_extreme, "simplex optimum is not a vertex: {}", argmax.matrix());
    Ok(OptimizationResult {
        value,
        argmax,
        method: Method::Simplex,
        certificate: cert.tight,
        pivots,
    })
}

/// Deterministic per-trial generator: the seed selects the key, the trial
/// index selects the stream, so trials are independent of evaluation order.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Outcome of [`conjecture_probe`].
#[derive(Clone, Debug, Serialize)]
pub struct ProbeReport {
    pub n: usize,
    pub t: PrivacyParameter,
    pub seed: u64,
    pub trials_run: usize,
    /// Extreme optima outside both characterized families.
    pub counters_found: Vec<Mechanism>,
    /// How many optima fell in each family, keyed by family name.
    pub family_counts: BTreeMap<String, usize>,
    pub distinct_optima: usize,
    /// Optima that failed the extremality certificate; always expected empty.
    pub non_extreme_optima: Vec<Mechanism>,
    pub property_failures: Vec<PropertyFailure>,
}

impl ProbeReport {
    pub fn is_clean(&self) -> bool {
        self.non_extreme_optima.is_empty() && self.property_failures.is_empty()
    }
}

/// Maximizes `trials` random integer utilities and classifies every optimum.
pub fn conjecture_probe(n: usize, t: &PrivacyParameter, trials: usize, seed: u64) -> Result<ProbeReport> {
    if !t.is_strict() {
        return Err(Error::RequiresStrictPrivacy);
    }
    let sys = ConstraintSystem::new(n, t.clone());
    let mut report = ProbeReport {
        n,
        t: t.clone(),
        seed,
        trials_run: 0,
        counters_found: Vec::new(),
        family_counts: BTreeMap::new(),
        distinct_optima: 0,
        non_extreme_optima: Vec::new(),
        property_failures: Vec::new(),
    };
    let mut seen = std::collections::HashSet::new();
    for trial in 0..trials {
        let mut rng = trial_rng(seed, trial as u64);
        let u = UtilityMatrix::random_integer(n, PROBE_WEIGHT_RANGE, &mut rng);
        let opt = simplex_optimize(&u, &sys)?;
        report.trials_run += 1;
        let fresh = seen.insert(opt.argmax.clone());
        let family = family_membership(&opt.argmax, t);
        *report.family_counts.entry(format!("{family:?}")).or_default() += 1;
        if !fresh {
            continue;
        }
        if !is_extreme(&opt.argmax, &sys)?.is_extreme {
            report.non_extreme_optima.push(opt.argmax.clone());
            continue;
        }
        report
            .property_failures
            .extend(check_extreme_point(&opt.argmax, &sys, PROBE_PERMUTATION_PAIRS, &mut rng)?);
        if family == Family::Neither {
            report.counters_found.push(opt.argmax);
        }
    }
    report.distinct_optima = seen.len();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enumeration::{enumerate_corner_family, enumerate_tight_family, vertex_oracle};

    fn t(n: i64, d: i64) -> PrivacyParameter {
        PrivacyParameter::new(Rational::new(n, d)).unwrap()
    }

    #[test]
    fn vertex_scan_identity_n2() {
        let v = vertex_oracle(2, &t(2, 1), None).unwrap();
        let values: Vec<Rational> = v.vertices().iter().map(|a| UtilityMatrix::identity(2).value(a)).collect();
        let mut sorted = values.clone();
        sorted.sort();
        assert_eq!(
            sorted,
            vec![Rational::new(2, 3), Rational::one(), Rational::one(), Rational::new(4, 3)]
        );
        let best = optimize_over_vertices(&UtilityMatrix::identity(2), &v).unwrap();
        assert_eq!(best.value, Rational::new(4, 3));
        assert_eq!(
            best.argmax.matrix(),
            &RMatrix::from_scaled_ints(&[&[2, 1], &[1, 2]], 3).unwrap()
        );
    }

    #[test]
    fn all_ones_utility_ties_at_n() {
        for n in 1..=3 {
            let tp = t(2, 1);
            let v = enumerate_corner_family(n, &tp).union(&enumerate_tight_family(n, &tp));
            let best = optimize_over_vertices(&UtilityMatrix::ones(n), &v).unwrap();
            assert_eq!(best.value, Rational::from_integer(n as i64));
            assert_eq!(&best.argmax, &v.vertices()[0]);
        }
    }

    #[test]
    fn empty_vertex_set_is_an_error() {
        let empty = enumerate_tight_family(2, &t(1, 1));
        assert_eq!(
            optimize_over_vertices(&UtilityMatrix::identity(2), &empty),
            Err(Error::EmptyVertexSet)
        );
    }

    #[test]
    fn simplex_examples() {
        let sys = ConstraintSystem::new(2, t(2, 1));
        assert_eq!(simplex_optimize(&UtilityMatrix::identity(2), &sys).unwrap().value, Rational::new(4, 3));

        let sys = ConstraintSystem::new(1, t(3, 1));
        let u = UtilityMatrix::new(RMatrix::from_scaled_ints(&[&[-5]], 2).unwrap()).unwrap();
        let r = simplex_optimize(&u, &sys).unwrap();
        assert_eq!(r.value, Rational::new(-5, 2));
        assert_eq!(r.argmax, Mechanism::corner(1, 0));

        let sys = ConstraintSystem::new(3, t(1, 1));
        assert_eq!(simplex_optimize(&UtilityMatrix::identity(3), &sys).unwrap().value, Rational::one());
    }

    #[test]
    fn simplex_matches_vertex_scan_n3() {
        let tp = t(2, 1);
        let sys = ConstraintSystem::new(3, tp.clone());
        let v = vertex_oracle(3, &tp, None).unwrap();
        for trial in 0..20 {
            let u = UtilityMatrix::random_integer(3, 9, &mut trial_rng(99, trial));
            let a = simplex_optimize(&u, &sys).unwrap();
            let b = optimize_over_vertices(&u, &v).unwrap();
            assert_eq!(a.value, b.value);
        }
    }

    #[test]
    fn shifting_utility_keeps_argmax_set() {
        let tp = t(3, 2);
        let v = vertex_oracle(3, &tp, None).unwrap();
        let c = Rational::new(7, 3);
        for trial in 0..10 {
            let u = UtilityMatrix::random_integer(3, 4, &mut trial_rng(5, trial));
            let shifted = u.shifted(&c);
            let best = optimize_over_vertices(&u, &v).unwrap().value;
            let best_shifted = optimize_over_vertices(&shifted, &v).unwrap().value;
            assert_eq!(&best + &(&c * Rational::from_integer(3)), best_shifted);
            let argmax = |w: &UtilityMatrix, target: &Rational| -> Vec<RMatrix> {
                v.vertices().iter().filter(|a| w.value(a) == *target).map(|a| a.matrix().clone()).collect()
            };
            assert_eq!(argmax(&u, &best), argmax(&shifted, &best_shifted));
        }
    }

    #[test]
    fn favoring_utility_recovers_vertex() {
        let tp = t(2, 1);
        let sys = ConstraintSystem::new(3, tp.clone());
        for v in vertex_oracle(3, &tp, None).unwrap().vertices() {
            let u = UtilityMatrix::favoring(v, &sys).unwrap();
            assert_eq!(&simplex_optimize(&u, &sys).unwrap().argmax, v);
        }
    }

    #[test]
    fn simplex_reaches_extreme_point_outside_families() {
        let tp = t(2, 1);
        let sys = ConstraintSystem::new(5, tp.clone());
        let a = Mechanism::new(
            RMatrix::from_scaled_ints(
                &[&[1, 1, 4, 1, 0], &[2, 1, 2, 2, 0], &[2, 2, 2, 1, 0], &[1, 2, 2, 2, 0], &[1, 1, 3, 2, 0]],
                7,
            )
            .unwrap(),
        )
        .unwrap();
        let r = simplex_optimize(&UtilityMatrix::favoring(&a, &sys).unwrap(), &sys).unwrap();
        assert_eq!(r.argmax, a);
        assert_eq!(family_membership(&r.argmax, &tp), Family::Neither);
    }

    #[test]
    fn probe_small_is_clean() {
        let report = conjecture_probe(2, &t(2, 1), 100, 1).unwrap();
        assert_eq!(report.trials_run, 100);
        assert!(report.counters_found.is_empty());
        assert!(report.is_clean());
        assert!(matches!(conjecture_probe(2, &t(1, 1), 1, 1), Err(Error::RequiresStrictPrivacy)));
    }

    #[test]
    fn probe_is_deterministic() {
        let a = conjecture_probe(3, &t(2, 1), 30, 7).unwrap();
        let b = conjecture_probe(3, &t(2, 1), 30, 7).unwrap();
        assert_eq!(a.family_counts, b.family_counts);
        assert_eq!(a.distinct_optima, b.distinct_optima);
    }
}
