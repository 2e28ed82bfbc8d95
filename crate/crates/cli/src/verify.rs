//! The `verify` command: runs the structural checks for one `(n, t)` and
//! reports a pass/fail line per suite.

use std::collections::BTreeSet;

use dp_polytope::enumeration::{enumerate_basic_solutions, OracleOptions, ORACLE_MAX_EXACT_N, ORACLE_MAX_N};
use dp_polytope::optimize::trial_rng;
use dp_polytope::properties::check_extreme_point;
use dp_polytope::{
    analyze, build_system, enumerate_corner_family, enumerate_tight_family, family_membership, is_extreme,
    support, vertex_oracle, ConstraintSystem, Family, FamilyTag, Mechanism, PrivacyParameter, RMatrix, Rational,
    Result, VertexSet,
};
use rand::Rng;
use serde::Serialize;

const PERMUTATION_PAIRS: usize = 10;
const MIDPOINT_SAMPLES: usize = 50;

#[derive(Debug, Serialize)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<RMatrix>,
}

impl SuiteResult {
    fn pass(name: &'static str, detail: String) -> Self {
        SuiteResult { name, passed: true, detail, witness: None }
    }

    fn fail(name: &'static str, detail: String, witness: Option<&RMatrix>) -> Self {
        SuiteResult { name, passed: false, detail, witness: witness.cloned() }
    }
}

fn generated(n: usize, t: &PrivacyParameter) -> VertexSet {
    enumerate_corner_family(n, t).union(&enumerate_tight_family(n, t))
}

fn property_suite(gen: &VertexSet, sys: &ConstraintSystem, seed: u64) -> Result<SuiteResult> {
    const NAME: &str = "extreme-point-properties";
    let mut rng = trial_rng(seed, 0);
    for v in gen.vertices() {
        if let Some(f) = check_extreme_point(v, sys, PERMUTATION_PAIRS, &mut rng)?.into_iter().next() {
            return Ok(SuiteResult::fail(NAME, format!("{}: {}", f.property, f.detail), Some(&f.witness)));
        }
    }
    Ok(SuiteResult::pass(NAME, format!("{} generated points", gen.len())))
}

fn family_suite(gen: &VertexSet, t: &PrivacyParameter) -> SuiteResult {
    const NAME: &str = "generated-points-classified";
    for v in gen.vertices() {
        let expected = if support(v).len() == 1 { Family::DPrime } else { Family::DTilde };
        let found = family_membership(v, t);
        if found != expected {
            return SuiteResult::fail(NAME, format!("expected {expected:?}, found {found:?}"), Some(v.matrix()));
        }
    }
    SuiteResult::pass(NAME, format!("{} generated points", gen.len()))
}

fn oracle_suite(gen: &VertexSet, oracle: &VertexSet) -> SuiteResult {
    const NAME: &str = "oracle-equals-generators";
    let (a, b) = (oracle.matrix_set(), gen.matrix_set());
    if let Some(m) = a.difference(&b).next() {
        return SuiteResult::fail(NAME, "oracle vertex missing from generators".into(), Some(m));
    }
    if let Some(m) = b.difference(&a).next() {
        return SuiteResult::fail(NAME, "generated point not found by oracle".into(), Some(m));
    }
    SuiteResult::pass(NAME, format!("{} vertices", oracle.len()))
}

fn full_support_suite(oracle: &VertexSet, sys: &ConstraintSystem, seed: u64) -> Result<SuiteResult> {
    const NAME: &str = "full-support-characterization";
    let n = sys.n();
    let mut count = 0;
    for v in oracle.vertices().iter().filter(|v| support(v).len() == n) {
        count += 1;
        let extreme = is_extreme(v, sys)?.is_extreme;
        let tilde = family_membership(v, sys.t()) == Family::DTilde;
        if extreme != tilde {
            return Ok(SuiteResult::fail(NAME, format!("extreme={extreme}, tight family={tilde}"), Some(v.matrix())));
        }
    }
    let vs = oracle.vertices();
    if vs.len() >= 2 {
        let mut rng = trial_rng(seed, 1);
        let half = Rational::new(1, 2);
        for _ in 0..MIDPOINT_SAMPLES {
            let i = rng.random_range(0..vs.len());
            let mut j = rng.random_range(0..vs.len() - 1);
            if j >= i {
                j += 1;
            }
            let mid = Mechanism::new(vs[i].lerp(&vs[j], &half))?;
            if is_extreme(&mid, sys)?.is_extreme {
                return Ok(SuiteResult::fail(NAME, "midpoint of two vertices certified extreme".into(), Some(mid.matrix())));
            }
        }
    }
    Ok(SuiteResult::pass(
        NAME,
        format!("{count} full-support vertices, {MIDPOINT_SAMPLES} midpoints non-extreme"),
    ))
}

fn zero_privacy_suite(n: usize, t: &PrivacyParameter) -> Result<SuiteResult> {
    const NAME: &str = "zero-privacy-corners";
    let corners: BTreeSet<RMatrix> = (0..n).map(|i| Mechanism::corner(n, i).into_matrix()).collect();
    let gen = generated(n, t);
    if gen.matrix_set() != corners {
        return Ok(SuiteResult::fail(NAME, format!("generators returned {} matrices", gen.len()), None));
    }
    if n <= ORACLE_MAX_EXACT_N {
        let found = enumerate_basic_solutions(
            &build_system(n, t),
            OracleOptions { include_nonneg: true, budget: None },
        )?;
        if let Some(m) = found.matrix_set().difference(&corners).next() {
            return Ok(SuiteResult::fail(NAME, "basis enumeration found a non-corner vertex".into(), Some(m)));
        }
        if found.len() != n {
            return Ok(SuiteResult::fail(NAME, format!("basis enumeration found {} vertices", found.len()), None));
        }
    }
    Ok(SuiteResult::pass(NAME, format!("vertices are exactly E_1..E_{n}")))
}

fn supplied_suite(a: &Mechanism, sys: &ConstraintSystem) -> Result<SuiteResult> {
    const NAME: &str = "supplied-matrix";
    if let Err(e) = sys.require_member(a) {
        return Ok(SuiteResult::fail(NAME, e.to_string(), Some(a.matrix())));
    }
    let report = analyze(a, sys)?;
    let detail = match report.family_tag {
        FamilyTag::NotExtreme => {
            return Ok(SuiteResult::fail(
                NAME,
                format!("not extreme: tight constraints have rank {}", report.certificate.rank),
                Some(a.matrix()),
            ))
        }
        FamilyTag::OtherExtreme => {
            "extreme point outside both characterized families: the families are a strict subset of the vertices"
                .to_string()
        }
        tag => format!("extreme point in family {tag:?}"),
    };
    Ok(SuiteResult::pass(NAME, detail))
}

/// Runs every suite that applies to `(n, t)`; `supplied` is analyzed in
/// addition when present.
pub fn run(n: usize, t: &PrivacyParameter, supplied: Option<&Mechanism>, seed: u64) -> Result<Vec<SuiteResult>> {
    let sys = build_system(n, t);
    let mut out = Vec::new();
    if !t.is_strict() {
        if n <= ORACLE_MAX_N {
            out.push(zero_privacy_suite(n, t)?);
        }
    } else if n <= ORACLE_MAX_N {
        let gen = generated(n, t);
        out.push(family_suite(&gen, t));
        out.push(property_suite(&gen, &sys, seed)?);
        if n <= ORACLE_MAX_EXACT_N {
            let oracle = vertex_oracle(n, t, None)?;
            out.push(oracle_suite(&gen, &oracle));
            out.push(full_support_suite(&oracle, &sys, seed)?);
        }
    }
    if let Some(a) = supplied {
        out.push(supplied_suite(a, &sys)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_cases_pass() {
        for (n, t) in [(2, 1), (3, 2), (2, 3)] {
            let t = PrivacyParameter::new(Rational::from_integer(t)).unwrap();
            let results = run(n, &t, None, 0).unwrap();
            assert!(!results.is_empty());
            assert!(results.iter().all(|r| r.passed), "{results:?}");
        }
    }

    #[test]
    fn non_extreme_supplied_matrix_fails() {
        let t = PrivacyParameter::new(Rational::from_integer(2)).unwrap();
        let results = run(5, &t, Some(&Mechanism::uniform(5)), 0).unwrap();
        assert_eq!(results.len(), 1);
        assert!(!results[0].passed);
    }
}
