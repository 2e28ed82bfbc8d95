//! Generators for the characterized vertex families, a brute-force vertex
//! oracle, and canonicalization under row/column permutation.
//!
//! The corner family is the `n` mechanisms `E_i = 𝟏 e_iᵀ`. The tight family
//! holds mechanisms with at least two nonzero columns, no loose entries, and
//! rank equal to the number of nonzero columns. A loose-free nonzero column
//! with minimum `m_j` only takes the values `m_j` and `t · m_j`, so each such
//! mechanism is `P · diag(m)` for a two-symbol pattern `P` over `{1, t}` on its
//! support, with `m` the unique solution of `P m = 𝟏`.
//!
//! The oracle enumerates bases of tight constraints directly: every vertex is
//! the unique solution of the `n` stochastic equalities together with
//! `n² − n` linearly independent inequalities made tight.

use std::collections::{BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::analysis::{family_predicate, loose_entries, support, FamilyTag};
use crate::error::{Error, Result};
use crate::linalg::{mat_rank, solve_linear, EchelonBasis, RMatrix, RVector, Solution};
use crate::polytope::{ConstraintSystem, Mechanism, PrivacyParameter};
use crate::rational::Rational;

/// Largest `n` for which the oracle runs without a candidate budget.
pub const ORACLE_MAX_EXACT_N: usize = 3;
/// Largest `n` the oracle accepts at all (with a budget).
pub const ORACLE_MAX_N: usize = 4;
/// Largest `n` accepted by [`canonical_form`].
pub const CANONICAL_MAX_N: usize = 5;

/// Where a vertex came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Provenance {
    Generator,
    Oracle,
}

/// A duplicate-free, ordered list of mechanisms with provenance tags.
#[derive(Clone, Debug)]
pub struct VertexSet {
    n: usize,
    t: PrivacyParameter,
    vertices: Vec<Mechanism>,
    provenance: Vec<Provenance>,
    seen: HashSet<RMatrix>,
}

impl VertexSet {
    pub fn new(n: usize, t: PrivacyParameter) -> Self {
        VertexSet {
            n,
            t,
            vertices: Vec::new(),
            provenance: Vec::new(),
            seen: HashSet::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn t(&self) -> &PrivacyParameter {
        &self.t
    }

    /// Appends `vertex` unless an equal matrix is already present.
    pub fn insert(&mut self, vertex: Mechanism, provenance: Provenance) -> bool {
        if !self.seen.insert(vertex.matrix().clone()) {
            return false;
        }
        self.vertices.push(vertex);
        self.provenance.push(provenance);
        true
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn contains(&self, m: &RMatrix) -> bool {
        self.seen.contains(m)
    }

    pub fn vertices(&self) -> &[Mechanism] {
        &self.vertices
    }

    pub fn provenance(&self) -> &[Provenance] {
        &self.provenance
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Mechanism, Provenance)> {
        self.vertices.iter().zip(self.provenance.iter().copied())
    }

    /// The vertices as an order-free set of exact matrices.
    pub fn matrix_set(&self) -> BTreeSet<RMatrix> {
        self.vertices.iter().map(|v| v.matrix().clone()).collect()
    }

    /// `self` followed by the members of `other` not already present.
    pub fn union(&self, other: &VertexSet) -> VertexSet {
        let mut out = self.clone();
        for (v, p) in other.iter() {
            out.insert(v.clone(), p);
        }
        out
    }

    /// One representative (the canonical form) per permutation orbit, in
    /// order of first appearance.
    pub fn canonical(&self) -> Result<VertexSet> {
        let mut out = VertexSet::new(self.n, self.t.clone());
        for (v, p) in self.iter() {
            out.insert(canonical_form(v)?, p);
        }
        Ok(out)
    }
}

/// A two-symbol pattern on a support: `true` cells hold `t`, `false` cells `1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pattern {
    n: usize,
    support: Vec<usize>,
    /// Row-major `n × support.len()`.
    high: Vec<bool>,
}

impl Pattern {
    /// Decodes `code` with the most significant of the `n·s` bits as cell
    /// `(0, 0)`, proceeding row-major.
    pub fn from_code(n: usize, support: Vec<usize>, code: u64) -> Self {
        let s = support.len();
        let bits = n * s;
        let high = (0..bits).map(|b| code >> (bits - 1 - b) & 1 == 1).collect();
        Pattern { n, support, high }
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn is_high(&self, row: usize, k: usize) -> bool {
        self.high[row * self.support.len() + k]
    }

    /// Every column holds at least one low and one high cell.
    pub fn is_mixed(&self) -> bool {
        (0..self.support.len()).all(|k| {
            let highs = (0..self.n).filter(|&i| self.is_high(i, k)).count();
            highs > 0 && highs < self.n
        })
    }

    /// The `n × s` matrix with `1` for low and `t` for high cells.
    pub fn evaluate(&self, t: &Rational) -> RMatrix {
        let s = self.support.len();
        let entries = self
            .high
            .iter()
            .map(|&h| if h { t.clone() } else { Rational::one() })
            .collect();
        RMatrix::new(self.n, s, entries).expect("pattern shape")
    }
}

/// The `n` corner mechanisms `E_1, …, E_n`.
pub fn enumerate_corner_family(n: usize, t: &PrivacyParameter) -> VertexSet {
    let mut set = VertexSet::new(n, t.clone());
    for i in 0..n {
        set.insert(Mechanism::corner(n, i), Provenance::Generator);
    }
    set
}

/// Subsets of `0..n` with at least two elements, in lexicographic order.
fn supports(n: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = (0u32..1 << n)
        .filter(|mask| mask.count_ones() >= 2)
        .map(|mask| (0..n).filter(|&j| mask >> j & 1 == 1).collect())
        .collect();
    out.sort();
    out
}

/// Every mechanism with at least two nonzero columns, no loose entries and
/// rank equal to its number of nonzero columns. Empty when `t = 1`.
///
/// The search is exhaustive over `2^(n·s)` patterns per support of size `s`,
/// which is practical up to `n = 4` and slow at `n = 5`.
pub fn enumerate_tight_family(n: usize, t: &PrivacyParameter) -> VertexSet {
    let mut set = VertexSet::new(n, t.clone());
    if !t.is_strict() || n < 2 {
        return set;
    }
    let sys = ConstraintSystem::new(n, t.clone());
    let ones = RVector::ones(n);
    for support_cols in supports(n) {
        let s = support_cols.len();
        for code in 0..1u64 << (n * s) {
            let pattern = Pattern::from_code(n, support_cols.clone(), code);
            if !pattern.is_mixed() {
                continue;
            }
            let p = pattern.evaluate(t.value());
            let Ok(Solution::Unique(m)) = solve_linear(&p, &ones) else {
                continue;
            };
            if !m.iter().all(Rational::is_positive) {
                continue;
            }
            let mut a = RMatrix::zeros(n, n);
            for i in 0..n {
                for (k, &col) in support_cols.iter().enumerate() {
                    a.set(i, col, p.get(i, k) * &m[k]);
                }
            }
            let a = Mechanism::new(a).expect("pattern solution is stochastic");
            assert!(sys.membership(&a).unwrap().is_member(), "tight-family point outside polytope: {}", a.matrix());
            assert!(loose_entries(&a, t).is_empty(), "tight-family point has loose entries");
            assert_eq!(support(&a).len(), s);
            assert_eq!(mat_rank(&a), s, "tight-family point has wrong rank");
            let fresh = set.insert(a, Provenance::Generator);
            assert!(fresh, "distinct patterns produced the same matrix");
        }
    }
    set
}

/// Options for [`enumerate_basic_solutions`].
#[derive(Clone, Copy, Debug, Default)]
pub struct OracleOptions {
    /// Also draw non-negativity constraints into candidate bases. Needed when
    /// `t = 1`; for `t > 1` they are implied by the privacy constraints.
    pub include_nonneg: bool,
    /// Maximum number of candidate rows to try; `None` means unlimited.
    pub budget: Option<u64>,
}

/// Brute-force vertex enumeration over bases of tight constraints.
///
/// Candidate inequality subsets are explored depth-first in index order;
/// a branch is abandoned as soon as its rows become linearly dependent. Each
/// full-rank basis is solved exactly and its solution kept if it lies in the
/// polytope.
pub fn enumerate_basic_solutions(sys: &ConstraintSystem, options: OracleOptions) -> Result<VertexSet> {
    let n = sys.n();
    let dim = n * n;
    let mut candidates: Vec<usize> = Vec::new();
    if options.include_nonneg {
        candidates.extend(sys.nonneg_range());
    }
    candidates.extend(sys.dp_range());
    let rows: Vec<RVector> = sys.coefficient_rows(&candidates);

    let mut basis = EchelonBasis::new(dim);
    for row in sys.coefficient_rows(&(0..n).collect::<Vec<_>>()) {
        let inserted = basis.try_insert_augmented(&row, Rational::one());
        debug_assert!(inserted);
    }

    struct Search<'a> {
        sys: &'a ConstraintSystem,
        rows: &'a [RVector],
        budget: Option<u64>,
        examined: u64,
        out: VertexSet,
    }

    impl Search<'_> {
        fn dfs(&mut self, basis: &mut EchelonBasis, start: usize) -> Result<()> {
            if basis.is_full() {
                let x = basis.solve_full().expect("full basis");
                let a = RMatrix::new(self.sys.n(), self.sys.n(), x.0).expect("square");
                if self.sys.membership(&a)?.is_member() {
                    let a = Mechanism::new(a).expect("member is stochastic");
                    self.out.insert(a, Provenance::Oracle);
                }
                return Ok(());
            }
            let need = basis.width_remaining();
            for idx in start..self.rows.len() {
                if self.rows.len() - idx < need {
                    break;
                }
                if let Some(budget) = self.budget {
                    if self.examined >= budget {
                        return Err(Error::BudgetExhausted {
                            budget,
                            examined: self.examined,
                        });
                    }
                }
                self.examined += 1;
                if basis.try_insert(&self.rows[idx]) {
                    self.dfs(basis, idx + 1)?;
                    basis.pop();
                }
            }
            Ok(())
        }
    }

    let mut search = Search {
        sys,
        rows: &rows,
        budget: options.budget,
        examined: 0,
        out: VertexSet::new(n, sys.t().clone()),
    };
    search.dfs(&mut basis, 0)?;
    Ok(search.out)
}

/// Ground-truth vertex set for small `n`.
///
/// `n ≤ 3` is exact and unbudgeted; `n = 4` requires a candidate budget and
/// reports exhaustion as an error. At `t = 1` the vertices are exactly the
/// corner mechanisms and are returned directly.
pub fn vertex_oracle(n: usize, t: &PrivacyParameter, budget: Option<u64>) -> Result<VertexSet> {
    if n > ORACLE_MAX_N {
        return Err(Error::UnsupportedSize {
            what: "vertex oracle",
            n,
            max: ORACLE_MAX_N,
        });
    }
    if n > ORACLE_MAX_EXACT_N && budget.is_none() {
        return Err(Error::UnsupportedSize {
            what: "vertex oracle without a candidate budget",
            n,
            max: ORACLE_MAX_EXACT_N,
        });
    }
    if !t.is_strict() {
        let mut set = VertexSet::new(n, t.clone());
        for i in 0..n {
            set.insert(Mechanism::corner(n, i), Provenance::Oracle);
        }
        return Ok(set);
    }
    let sys = ConstraintSystem::new(n, t.clone());
    enumerate_basic_solutions(
        &sys,
        OracleOptions {
            include_nonneg: false,
            budget,
        },
    )
}

/// Row and column permutations; `apply` maps `A` to the matrix with entry
/// `(i, j)` equal to `A[rows[i]][cols[j]]`, i.e. `P₁ A P₂`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PermutationPair {
    rows: Vec<usize>,
    cols: Vec<usize>,
}

fn is_bijection(p: &[usize]) -> bool {
    let mut seen = vec![false; p.len()];
    p.iter().all(|&i| i < p.len() && !std::mem::replace(&mut seen[i], true))
}

impl PermutationPair {
    pub fn new(rows: Vec<usize>, cols: Vec<usize>) -> Option<Self> {
        (rows.len() == cols.len() && is_bijection(&rows) && is_bijection(&cols))
            .then_some(PermutationPair { rows, cols })
    }

    pub fn identity(n: usize) -> Self {
        PermutationPair {
            rows: (0..n).collect(),
            cols: (0..n).collect(),
        }
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut rows: Vec<usize> = (0..n).collect();
        let mut cols: Vec<usize> = (0..n).collect();
        rows.shuffle(rng);
        cols.shuffle(rng);
        PermutationPair { rows, cols }
    }

    pub fn row_perm(&self) -> &[usize] {
        &self.rows
    }

    pub fn col_perm(&self) -> &[usize] {
        &self.cols
    }

    pub fn inverse(&self) -> Self {
        let inv = |p: &[usize]| {
            let mut q = vec![0; p.len()];
            for (i, &x) in p.iter().enumerate() {
                q[x] = i;
            }
            q
        };
        PermutationPair {
            rows: inv(&self.rows),
            cols: inv(&self.cols),
        }
    }

    pub fn apply(&self, a: &Mechanism) -> Mechanism {
        a.permuted(&self.rows, &self.cols)
    }
}

/// Advances `p` to the next permutation in lexicographic order.
fn next_permutation(p: &mut [usize]) -> bool {
    let Some(i) = p.windows(2).rposition(|w| w[0] < w[1]) else {
        return false;
    };
    let j = p.iter().rposition(|&x| x > p[i]).expect("successor exists");
    p.swap(i, j);
    p[i + 1..].reverse();
    true
}

/// The lexicographically smallest (row-major) matrix in the orbit of `a`
/// under independent row and column permutations.
///
/// For a fixed row order the best column order sorts columns by their entries
/// read top to bottom, so only the `n!` row orders are searched.
pub fn canonical_form(a: &Mechanism) -> Result<Mechanism> {
    let n = a.n();
    if n > CANONICAL_MAX_N {
        return Err(Error::UnsupportedSize {
            what: "canonical form",
            n,
            max: CANONICAL_MAX_N,
        });
    }
    let mut row_perm: Vec<usize> = (0..n).collect();
    let mut best: Option<RMatrix> = None;
    loop {
        let mut cols: Vec<usize> = (0..n).collect();
        cols.sort_by(|&x, &y| {
            row_perm
                .iter()
                .map(|&r| a.get(r, x))
                .cmp(row_perm.iter().map(|&r| a.get(r, y)))
        });
        let candidate = a.matrix().permuted(&row_perm, &cols);
        if best.as_ref().is_none_or(|b| candidate < *b) {
            best = Some(candidate);
        }
        if !next_permutation(&mut row_perm) {
            break;
        }
    }
    Ok(Mechanism::new(best.expect("at least one permutation")).expect("permutation keeps stochasticity"))
}

/// Membership in the characterized families, decided directly from the
/// support, loose entries and rank.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Family {
    DPrime,
    DTilde,
    Neither,
}

pub fn family_membership(a: &Mechanism, t: &PrivacyParameter) -> Family {
    let gamma = support(a);
    match family_predicate(&gamma, &loose_entries(a, t), mat_rank(a)) {
        Some(FamilyTag::DPrime) => Family::DPrime,
        Some(_) => Family::DTilde,
        None => Family::Neither,
    }
}
