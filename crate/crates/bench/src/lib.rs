//! Shared fixtures for the benchmarks.

use sketchrate::{matgen, DenseMatrix, LinearSystem};

/// Desk-scale `gaus` matrix and a consistent system on it.
pub fn fixture(m: usize, n: usize) -> (DenseMatrix, LinearSystem) {
    let a = matgen::named_matrix("gaus", m, n, 1).expect("named profile");
    let sys = matgen::make_system(&a, 2);
    (a, sys)
}
