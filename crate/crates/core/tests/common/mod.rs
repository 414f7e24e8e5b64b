#![allow(dead_code)]

use maxent_qst::qmath::{ComplexMatrix, DensityMatrix, StateVector};
use maxent_qst::C64;
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut impl Rng) -> C64 {
    C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
}

pub fn random_hermitian(rng: &mut impl Rng, dim: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(dim, dim, |_, _| gaussian(rng)).hermitian_part()
}

pub fn random_real_symmetric(rng: &mut impl Rng, dim: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(dim, dim, |_, _| C64::new(StandardNormal.sample(rng), 0.0)).hermitian_part()
}

pub fn random_pure(rng: &mut impl Rng, num_qubits: usize) -> StateVector {
    StateVector::normalized((0..1 << num_qubits).map(|_| gaussian(rng)).collect()).unwrap()
}

/// `G G† / tr` with `G` of shape `d × rank`.
pub fn random_density(rng: &mut impl Rng, num_qubits: usize, rank: usize) -> DensityMatrix {
    let d = 1 << num_qubits;
    let g = ComplexMatrix::from_fn(d, rank, |_, _| gaussian(rng));
    let w = g.matmul(&g.adjoint());
    let tr = w.trace().re;
    DensityMatrix::new(w.scale(1.0 / tr).hermitian_part()).unwrap()
}

pub fn uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}
