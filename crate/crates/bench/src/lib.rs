//! Fixtures shared by the benchmarks.

use dp_polytope::{Mechanism, PrivacyParameter, RMatrix, Rational};

pub fn t(value: i64) -> PrivacyParameter {
    PrivacyParameter::new(Rational::from_integer(value)).expect("t >= 1")
}

/// A 5x5 extreme point outside both generated families at t = 2.
pub fn five_by_five() -> Mechanism {
    let rows: [&[i64]; 5] = [
        &[1, 1, 4, 1, 0],
        &[2, 1, 2, 2, 0],
        &[2, 2, 2, 1, 0],
        &[1, 2, 2, 2, 0],
        &[1, 1, 3, 2, 0],
    ];
    Mechanism::new(RMatrix::from_scaled_ints(&rows, 7).expect("square")).expect("stochastic")
}
