//! Exact construction and vertex analysis of the local ε-differential privacy
//! polytope: the `n × n` row-stochastic matrices `A` with
//! `a_ij ≤ e^ε · a_kj` for all `i, j, k`.
//!
//! Every scalar is an exact [`Rational`]; the privacy level is carried as
//! `t = e^ε` and `ε` itself is never materialized.

pub mod analysis;
pub mod enumeration;
pub mod error;
pub mod linalg;
pub mod optimize;
pub mod polytope;
pub mod properties;
pub mod rational;

pub use analysis::{
    analyze, column_tight_span_dim, is_extreme, loose_entries, support, tilde_normalize,
    AnalysisReport, ExtremalityCertificate, FamilyTag, TildeForm,
};
pub use enumeration::{
    canonical_form, enumerate_corner_family, enumerate_tight_family, family_membership,
    vertex_oracle, Family, PermutationPair, Provenance, VertexSet,
};
pub use error::{Error, Result};
pub use linalg::{mat_rank, rank_of_rows, solve_linear, RMatrix, RVector, Solution};
pub use optimize::{
    conjecture_probe, optimize_over_vertices, simplex_optimize, Method, OptimizationResult,
    ProbeReport, UtilityMatrix,
};
pub use polytope::{
    build_system, membership, nonneg_redundancy_check, Constraint, ConstraintKind,
    ConstraintSystem, Mechanism, Membership, PrivacyParameter, Relation,
};
pub use rational::{ParseRationalError, Rational};
