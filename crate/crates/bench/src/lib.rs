//! Fixtures shared by the benchmarks.

use dpms_core::{build_gram, reparametrize, GramMatrix, RegressionData};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};

/// Random design in (−0.5, 0.5) with an intercept column and a weak signal.
pub fn regression(n: usize, p: usize, seed: u64) -> RegressionData {
    let mut r = rand::rngs::StdRng::seed_from_u64(seed);
    let x = DMatrix::from_fn(n, p, |_, _| r.random::<f64>() - 0.5);
    let y = DVector::from_fn(n, |i, _| 0.2 * x[(i, 0)] + 0.1 * (r.random::<f64>() - 0.5));
    RegressionData::new(y, DMatrix::from_element(n, 1, 1.0), x).expect("valid fixture")
}

pub fn gram(n: usize, p: usize, seed: u64) -> GramMatrix {
    build_gram(&reparametrize(&regression(n, p, seed)).expect("full rank")).expect("nondegenerate")
}
