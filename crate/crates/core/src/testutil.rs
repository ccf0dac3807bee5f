//! Random operators and states for unit tests.

use alloc::vec::Vec;

use num_complex::Complex64;

use crate::noise::NoiseStream;
use crate::operator::OperatorMatrix;
use crate::state::QuantumState;

pub struct TestRng(NoiseStream);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        Self(NoiseStream::new(seed, 0xfeed, 1.0))
    }

    pub fn normal(&mut self) -> f64 {
        self.0.wiener_increment()
    }
}

pub fn random_operator(rng: &mut TestRng, n: usize) -> OperatorMatrix {
    let e: Vec<Complex64> = (0..n * n).map(|_| Complex64::new(rng.normal(), rng.normal())).collect();
    OperatorMatrix::from_rows(n, &e).unwrap()
}

pub fn random_hermitian(rng: &mut TestRng, n: usize) -> OperatorMatrix {
    random_operator(rng, n).hermitian_part()
}

/// `AA†/Tr[AA†]` for a Gaussian `A`: full rank, unit trace.
pub fn random_state(rng: &mut TestRng, n: usize) -> QuantumState {
    let a = random_operator(rng, n);
    let m = &a * &a.adjoint();
    QuantumState::new(m).unwrap().normalized()
}
