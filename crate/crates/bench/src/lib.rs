//! Seeded fixtures shared by the benchmarks.

use guidelab::hamiltonian::{LocalHamiltonian, LocalTerm};
use guidelab::linalg::{c, CMat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random Hermitian operator on `k` qubits with spectral norm 1.
pub fn random_hermitian(k: usize, rng: &mut ChaCha8Rng) -> CMat {
    let d = 1 << k;
    let a = CMat::from_fn(d, d, |_, _| {
        c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
    });
    let h = &a + a.adjoint();
    let norm = h.clone().svd(false, false).singular_values.max();
    h * c(1.0 / norm, 0.0)
}

/// `m` random `k`-local terms with weights summing to one.
pub fn random_hamiltonian(n: usize, m: usize, k: usize, rng: &mut ChaCha8Rng) -> LocalHamiltonian {
    let terms = (0..m)
        .map(|_| {
            let mut support = rand::seq::index::sample(rng, n, k).into_vec();
            support.sort_unstable();
            LocalTerm::new(support, random_hermitian(k, rng), 1.0 / m as f64).unwrap()
        })
        .collect();
    LocalHamiltonian::new(n, terms).unwrap()
}
